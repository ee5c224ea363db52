from __future__ import annotations

from hypothesis import HealthCheck, settings

# numba compilation makes first calls slow; examples are derandomized so the
# suite is reproducible run to run
settings.register_profile(
    "repo",
    deadline=None,
    derandomize=True,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("repo")

# acceptance criteria register one verdict line each; they are echoed in the
# terminal summary so a plain `pytest -v` run shows them without -s
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
