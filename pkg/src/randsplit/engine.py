"""Random splitting chain: cycle times, flow composition and the tangent cocycle."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, replace
from typing import Callable

import numpy as np

from . import _kernels as K
from .flows import IntegratorError
from .models import SplittingModel

PURPOSES = {"times": 0, "init": 1, "frame": 2}

DEFAULT_TOL = 1e-10
DEFAULT_PROJ_TOL = 1e-10
CHUNK_FIELDS = 1 << 20  # field-time draws per chunk


class MonitorBreach(RuntimeError):
    """A conserved quantity drifted beyond the configured bound."""

    def __init__(self, step: int, quantity: int, drift: float, bound: float):
        super().__init__(
            f"conserved quantity {quantity} drifted by {drift:.3e} (bound {bound:.1e}) at cycle {step}"
        )
        self.step = step
        self.quantity = quantity
        self.drift = drift
        self.bound = bound


class RankCollapse(RuntimeError):
    """The propagated tangent frame lost rank."""


# ---------------------------------------------------------------------------
# time distributions and seeding


@dataclass(frozen=True)
class TimeDistribution:
    """Mean-one law of the cycle times, scaled by ``h``.

    ``kind`` is ``"exp"`` (Exponential(1)), ``"uniform"`` (Uniform(0, 2)) or
    ``"custom"``: a piecewise-constant density on ``edges`` with bin weights
    ``density``, which must start at 0 with positive mass and have mean 1.
    """

    kind: str = "exp"
    h: float = 1.0
    edges: tuple[float, ...] | None = None
    density: tuple[float, ...] | None = None

    def __post_init__(self):
        if not np.isfinite(self.h) or self.h < 0:
            raise ValueError(f"scale h must be finite and nonnegative, got {self.h}")
        if self.kind in ("exp", "uniform"):
            return
        if self.kind != "custom":
            raise ValueError(f"unknown time distribution {self.kind!r}")
        if self.edges is None or self.density is None:
            raise ValueError("custom distribution needs edges and density")
        e = np.asarray(self.edges, dtype=float)
        d = np.asarray(self.density, dtype=float)
        if e.ndim != 1 or d.shape != (e.size - 1,) or e.size < 2:
            raise ValueError("need len(edges) == len(density) + 1 >= 2")
        if e[0] != 0.0 or np.any(np.diff(e) <= 0):
            raise ValueError("edges must start at 0 and increase")
        if np.any(d < 0) or d[0] <= 0:
            raise ValueError("density must be nonnegative and positive on the first bin")
        mass = d * np.diff(e)
        mean = float(np.sum(mass * (e[1:] + e[:-1]) / 2) / mass.sum())
        if abs(mean - 1.0) > 1e-9:
            raise ValueError(f"custom density must have mean 1, got {mean:.12g}")

    @classmethod
    def custom(cls, edges, density, h: float = 1.0) -> TimeDistribution:
        """Custom table with the support rescaled so that the mean is 1."""
        e = np.asarray(edges, dtype=float)
        d = np.asarray(density, dtype=float)
        mass = d * np.diff(e)
        mean = float(np.sum(mass * (e[1:] + e[:-1]) / 2) / mass.sum())
        e = e / mean
        d = d * mean
        return cls("custom", h, tuple(e.tolist()), tuple(d.tolist()))

    def with_h(self, h: float) -> TimeDistribution:
        return replace(self, h=h)

    def _unit(self, count: int, rng: np.random.Generator) -> np.ndarray:
        if self.kind == "exp":
            return rng.standard_exponential(count)
        if self.kind == "uniform":
            return rng.uniform(0.0, 2.0, count)
        e = np.asarray(self.edges)
        d = np.asarray(self.density)
        cdf = np.concatenate([[0.0], np.cumsum(d * np.diff(e))])
        cdf /= cdf[-1]
        u = rng.random(count)
        b = np.clip(np.searchsorted(cdf, u, side="right") - 1, 0, d.size - 1)
        frac = (u - cdf[b]) / (cdf[b + 1] - cdf[b])
        return e[b] + frac * (e[b + 1] - e[b])


def sample_cycle_times(dist: TimeDistribution, count: int, rng: np.random.Generator) -> np.ndarray:
    """``count`` independent draws of ``h * tau``."""
    if count < 1:
        raise ValueError("count must be at least 1")
    if dist.h == 0.0:
        return np.zeros(count)
    return dist.h * dist._unit(count, rng)


@dataclass(frozen=True)
class SeedConfig:
    """Master seed plus stream id; each purpose draws from its own Philox substream."""

    master: int
    stream: int = 0

    def __post_init__(self):
        if not (0 <= self.master < 2**64) or self.stream < 0:
            raise ValueError("master seed must be a 64-bit unsigned integer, stream >= 0")

    def generator(self, purpose: str = "times") -> np.random.Generator:
        ss = np.random.SeedSequence([self.master, self.stream, PURPOSES[purpose]])
        return np.random.Generator(np.random.Philox(ss))


# ---------------------------------------------------------------------------
# single cycles


def _check_times(model: SplittingModel, times) -> np.ndarray:
    times = np.ascontiguousarray(times, dtype=float)
    if times.shape != (model.n_fields,):
        raise ValueError(f"need {model.n_fields} times, got shape {times.shape}")
    return times.reshape(1, -1)


def _raise_status(status: int, cycle: int, fld: int, extra: float) -> None:
    if status == K.INTEGRATOR_FAILURE:
        raise IntegratorError(f"integrator failure in field {fld} of cycle {cycle}", extra)
    if status == K.RANK_COLLAPSE:
        raise RankCollapse(f"tangent frame lost rank at cycle {cycle}")
    if status == K.STRIDE_OVERFLOW:
        raise OverflowError(
            f"log-stretch {extra:.1f} above {K.MAX_LOG_STRETCH} between renormalizations; "
            "reduce the stride"
        )


def split_step(x, model: SplittingModel, times, tol: float = DEFAULT_TOL) -> np.ndarray:
    """Apply every field's flow once, in order, for its time."""
    x = np.array(x, dtype=float, copy=True)
    T = _check_times(model, times)
    Q = np.zeros((model.dimension, 0))
    st, c, f, e = K.cocycle_run(
        model.kinds, model.idx, model.coef, tol, x, Q, T, model.weights,
        model.conserved(x), 1, DEFAULT_PROJ_TOL, False,
        np.zeros((1, 0)), np.zeros((1, model.weights.shape[0])), np.zeros((1, model.dimension)),
    )
    _raise_status(st, c, f, e)
    return x


@dataclass
class TrajectoryState:
    """State, orthonormal tangent frame (D x k, orthogonal to conserved gradients),
    per-column log-stretch sums, cycle count and stream id."""

    x: np.ndarray
    Q: np.ndarray
    log_acc: np.ndarray
    m: int = 0
    stream: int = 0

    @property
    def k(self) -> int:
        return self.Q.shape[1]

    def copy(self) -> TrajectoryState:
        return TrajectoryState(self.x.copy(), self.Q.copy(), self.log_acc.copy(), self.m, self.stream)


def tangent_projector(model: SplittingModel, x) -> np.ndarray:
    """Orthonormal basis (D x (D - c)) of the complement of the conserved gradients."""
    G = model.constraint_gradients(x)
    U, _, _ = np.linalg.svd(G.T, full_matrices=True)
    return U[:, G.shape[0]:]


def initial_frame(model: SplittingModel, x, k: int, rng: np.random.Generator) -> np.ndarray:
    """Random orthonormal k-frame in the tangent space of the level set at ``x``."""
    d = model.tangent_dimension
    if not (1 <= k <= d):
        raise ValueError(f"frame size must lie in [1, {d}], got {k}")
    B = tangent_projector(model, x)
    Z = rng.standard_normal((d, k))
    Qz, R = np.linalg.qr(Z)
    Qz *= np.sign(np.diag(R))
    return np.ascontiguousarray(B @ Qz)


def new_state(
    model: SplittingModel, x, k: int, seed: SeedConfig | None = None, frame: np.ndarray | None = None
) -> TrajectoryState:
    x = np.array(x, dtype=float, copy=True)
    if frame is None:
        rng = (seed or SeedConfig(0)).generator("frame")
        frame = initial_frame(model, x, k, rng)
    frame = np.ascontiguousarray(frame, dtype=float)
    return TrajectoryState(x, frame, np.zeros(frame.shape[1]), 0, seed.stream if seed else 0)


def tangent_step(
    state: TrajectoryState, model: SplittingModel, times, tol: float = DEFAULT_TOL
) -> TrajectoryState:
    """One cycle of the cocycle: propagate the frame, project, re-orthonormalize."""
    out = state.copy()
    T = _check_times(model, times)
    logs = np.zeros((1, out.k))
    st, c, f, e = K.cocycle_run(
        model.kinds, model.idx, model.coef, tol, out.x, out.Q, T, model.weights,
        model.conserved(state.x), 1, DEFAULT_PROJ_TOL, True,
        logs, np.zeros((1, model.weights.shape[0])), np.zeros((1, model.dimension)),
    )
    _raise_status(st, state.m, f, e)
    out.log_acc += logs[0]
    out.m += 1
    return out


def cycle_jacobians(model: SplittingModel, x, times, tol: float = DEFAULT_TOL):
    """Ambient Jacobian of every cycle along the path; returns (x_end, stack of D x D)."""
    x = np.array(x, dtype=float, copy=True)
    T = np.ascontiguousarray(times, dtype=float)
    if T.ndim != 2 or T.shape[1] != model.n_fields:
        raise ValueError("times must have shape (cycles, n_fields)")
    out = np.empty((T.shape[0], model.dimension, model.dimension))
    st, c = K.cycle_jacobians(model.kinds, model.idx, model.coef, tol, x, T, out)
    _raise_status(st, c, -1, 0.0)
    return x, out


# ---------------------------------------------------------------------------
# trajectories


@dataclass
class Monitors:
    """Abort when a conserved quantity's relative drift exceeds ``drift_tol``."""

    drift_tol: float | None = None


@dataclass
class TrajectoryRecord:
    """Thinned output of a run.

    ``trace_steps[i]`` cycles have been done when the cumulative log-stretch
    was ``trace_acc[i]``; ``batch_sums`` holds per-batch log-stretch sums of the
    post-burn-in cycles and ``batch_lengths`` their cycle counts.
    """

    m: int
    burn_in: int
    trace_steps: np.ndarray
    trace_acc: np.ndarray
    batch_sums: np.ndarray
    batch_lengths: np.ndarray
    burn_acc: np.ndarray
    total_acc: np.ndarray
    drift_max: np.ndarray
    x_final: np.ndarray
    Q_final: np.ndarray
    x_initial: np.ndarray | None = None
    conserved0: np.ndarray | None = None
    states: np.ndarray | None = None


def batch_index(m: int, burn_in: int, batches: int) -> np.ndarray:
    """Batch id of each cycle (-1 during burn-in); lengths differ by at most one."""
    M = m - burn_in
    if batches < 1 or M < batches:
        raise ValueError(f"{M} post-burn-in cycles cannot fill {batches} batches")
    c = np.arange(m, dtype=np.int64)
    b = np.full(m, -1, dtype=np.int64)
    post = c >= burn_in
    b[post] = (c[post] - burn_in) * batches // M
    return b


def run_trajectory(
    model: SplittingModel,
    dist: TimeDistribution,
    seed: SeedConfig,
    m_steps: int,
    k: int = 1,
    monitors: Monitors | None = None,
    x0=None,
    frame0=None,
    burn_in: int = 0,
    batches: int = 1,
    thin: int = 0,
    tol: float = DEFAULT_TOL,
    stride: int = 1,
    keep_states: bool = False,
    on_chunk: Callable[[int, np.ndarray, np.ndarray], None] | None = None,
) -> TrajectoryRecord:
    """Run ``m_steps`` cycles with a ``k``-frame (``k = 0``: state only).

    The initial point (unless given) and frame come from the seed's ``init`` and
    ``frame`` substreams, cycle times from its ``times`` substream, so the
    record is a pure function of the arguments.  ``thin > 0`` stores the
    cumulative log-stretch every ``thin`` cycles and at the end.
    """
    if m_steps < 1:
        raise ValueError("m_steps must be at least 1")
    if stride < 1:
        raise ValueError("stride must be at least 1")
    if not (0 <= burn_in < m_steps):
        raise ValueError("burn-in must lie in [0, m_steps)")
    monitors = monitors or Monitors()
    x = model.random_point(seed.generator("init")) if x0 is None else np.array(x0, dtype=float)
    if not model.is_generic(x):
        warnings.warn("initial point fails the genericity check", RuntimeWarning, stacklevel=2)
    x_init = x.copy()
    want_frame = k > 0
    if want_frame:
        if frame0 is None:
            Q = initial_frame(model, x, k, seed.generator("frame"))
        else:
            Q = np.array(frame0, dtype=float)
    else:
        Q = np.zeros((model.dimension, 0))
    kk = Q.shape[1]
    bid = batch_index(m_steps, burn_in, batches)
    c0 = model.conserved(x)
    nc = c0.size
    rng = seed.generator("times")
    nf = model.n_fields
    chunk = max(1, min(m_steps, CHUNK_FIELDS // nf))
    acc = np.zeros(kk)
    burn_acc = np.zeros(kk)
    batch_sums = np.zeros((batches, kk))
    batch_lengths = np.bincount(bid[bid >= 0], minlength=batches)
    drift_max = np.zeros(nc)
    trace_steps, trace_acc = [], []
    states = [] if keep_states else None
    logs = np.zeros((chunk, kk))
    drift = np.zeros((chunk, nc))
    xs = np.zeros((chunk, model.dimension))
    done = 0
    while done < m_steps:
        n = min(chunk, m_steps - done)
        T = sample_cycle_times(dist, n * nf, rng).reshape(n, nf)
        st, c, f, e = K.cocycle_run(
            model.kinds, model.idx, model.coef, tol, x, Q, T, model.weights, c0,
            stride, DEFAULT_PROJ_TOL, want_frame, logs, drift, xs,
        )
        _raise_status(st, done + c, f, e)
        L = logs[:n]
        D_ = drift[:n]
        dm = D_.max(axis=0)
        if monitors.drift_tol is not None and np.any(dm > monitors.drift_tol):
            row, q = np.unravel_index(np.argmax(D_ - monitors.drift_tol), D_.shape)
            raise MonitorBreach(done + int(row) + 1, int(q), float(D_[row, q]), monitors.drift_tol)
        drift_max = np.maximum(drift_max, dm)
        b = bid[done:done + n]
        if kk:
            np.add.at(batch_sums, b[b >= 0], L[b >= 0])
            burn_acc += L[b < 0].sum(axis=0)
            if thin > 0:
                cum = acc + np.cumsum(L, axis=0)
                steps = np.arange(done + 1, done + n + 1)
                sel = (steps % thin == 0) | (steps == m_steps)
                trace_steps.append(steps[sel])
                trace_acc.append(cum[sel])
            acc = acc + L.sum(axis=0)
        if keep_states:
            states.append(xs[:n].copy())
        if on_chunk is not None:
            on_chunk(done, L, xs[:n])
        done += n
    return TrajectoryRecord(
        m=m_steps,
        burn_in=burn_in,
        trace_steps=np.concatenate(trace_steps) if trace_steps else np.zeros(0, dtype=np.int64),
        trace_acc=np.concatenate(trace_acc) if trace_acc else np.zeros((0, kk)),
        batch_sums=batch_sums,
        batch_lengths=batch_lengths,
        burn_acc=burn_acc,
        total_acc=acc,
        drift_max=drift_max,
        x_final=x,
        Q_final=Q,
        states=np.concatenate(states) if keep_states else None,
        x_initial=x_init,
        conserved0=c0,
    )


def state_moments(
    model: SplittingModel,
    dist: TimeDistribution,
    seed: SeedConfig,
    m_steps: int,
    batches: int = 50,
    burn_in: int = 0,
    x0=None,
    tol: float = DEFAULT_TOL,
) -> tuple[np.ndarray, np.ndarray]:
    """Per-batch time averages of ``x_i**2`` along a state-only run: (batches x D, lengths)."""
    x = model.random_point(seed.generator("init")) if x0 is None else np.array(x0, dtype=float)
    bid = batch_index(m_steps, burn_in, batches)
    rng = seed.generator("times")
    nf = model.n_fields
    chunk = max(1, min(m_steps, CHUNK_FIELDS // nf))
    sums = np.zeros((batches, model.dimension))
    counts = np.zeros(batches, dtype=np.int64)
    done = 0
    while done < m_steps:
        n = min(chunk, m_steps - done)
        T = sample_cycle_times(dist, n * nf, rng).reshape(n, nf)
        st, c = K.state_run(model.kinds, model.idx, model.coef, tol, x, T, sums, counts, bid[done:done + n])
        _raise_status(st, done + c, -1, 0.0)
        done += n
    return sums / counts[:, None], counts


# ---------------------------------------------------------------------------
# deterministic splitting versus the true field


def deterministic_endpoint(model: SplittingModel, x0, h: float, T: float, tol: float = DEFAULT_TOL):
    """Lie-Trotter splitting with every time equal to ``h``, run for ``T / h`` cycles."""
    cycles = int(round(T / h))
    if cycles < 1 or abs(cycles * h - T) > 1e-9 * T:
        raise ValueError(f"T = {T} is not a whole number of steps h = {h}")
    x = np.array(x0, dtype=float, copy=True)
    times = np.full((cycles, model.n_fields), float(h))
    Q = np.zeros((model.dimension, 0))
    nc = model.weights.shape[0]
    st, c, f, e = K.cocycle_run(
        model.kinds, model.idx, model.coef, tol, x, Q, times, model.weights, model.conserved(x),
        1, DEFAULT_PROJ_TOL, False, np.zeros((cycles, 0)), np.zeros((cycles, nc)),
        np.zeros((cycles, model.dimension)),
    )
    _raise_status(st, c, f, e)
    return x


def reference_endpoint(model: SplittingModel, x0, T: float, rtol: float = 1e-12, atol: float = 1e-14):
    """High-accuracy DOP853 solution of the summed field ``sum_j V_j`` at time ``T``."""
    from scipy.integrate import solve_ivp

    V = model.true_field()
    sol = solve_ivp(lambda _t, y: V.evaluate(y), (0.0, T), np.asarray(x0, dtype=float),
                    method="DOP853", rtol=rtol, atol=atol)
    if not sol.success:
        raise RuntimeError(f"reference integration failed: {sol.message}")
    return sol.y[:, -1]


@dataclass
class ConvergenceReport:
    h: np.ndarray
    errors: np.ndarray
    order: float

    @property
    def ratios(self) -> np.ndarray:
        return self.errors[:-1] / self.errors[1:]


def splitting_convergence(model: SplittingModel, x0, h_grid, T: float = 1.0, tol: float = DEFAULT_TOL):
    """Endpoint errors on a descending ``h`` grid and the least-squares order in log-log."""
    h = np.asarray(h_grid, dtype=float)
    if h.size < 3:
        raise ValueError("h-grid needs at least 3 points")
    if np.any(np.diff(h) >= 0) or np.any(h <= 0):
        raise ValueError("h-grid must be positive and strictly descending")
    ref = reference_endpoint(model, x0, T)
    err = np.array([np.linalg.norm(deterministic_endpoint(model, x0, hh, T, tol) - ref) for hh in h])
    order = float(np.polyfit(np.log(h), np.log(err), 1)[0])
    return ConvergenceReport(h, err, order)


# ---------------------------------------------------------------------------
# Gronwall bound on the per-cycle cocycle factor


def field_jacobian_norms(model: SplittingModel, X) -> np.ndarray:
    """Spectral norms ``|DV_j(x)|`` for every state row of ``X`` and every field.

    Each field touches three coordinates, so its Jacobian is a 3x3 block.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    S = X.shape[0]
    out = np.empty((S, model.n_fields))
    for j in range(model.n_fields):
        i0, i1, i2 = (int(v) for v in model.idx[j])
        c0, c1, c2 = (float(v) for v in model.coef[j])
        a, b, c = X[:, i0], X[:, i1], X[:, i2]
        B = np.zeros((S, 3, 3))
        if model.kinds[j] == K.ROTATION:
            # dx_p = c x_r x_q, dx_q = -c x_r x_p on (p, q, r) = (i0, i1, i2)
            B[:, 0, 1], B[:, 0, 2] = c0 * c, c0 * b
            B[:, 1, 0], B[:, 1, 2] = -c0 * c, -c0 * a
        else:
            B[:, 0, 1], B[:, 0, 2] = c0 * c, c0 * b
            B[:, 1, 0], B[:, 1, 2] = c1 * c, c1 * a
            B[:, 2, 0], B[:, 2, 1] = c2 * b, c2 * a
        out[:, j] = np.linalg.norm(B, 2, axis=(1, 2))
    return out


@dataclass
class GronwallReport:
    """``log |cocycle factor|`` per cycle against ``C * sum_j t_j``."""

    log_norms: np.ndarray
    cycle_times: np.ndarray
    C: float

    @property
    def bounds(self) -> np.ndarray:
        return self.C * self.cycle_times

    @property
    def violations(self) -> int:
        return int(np.count_nonzero(self.log_norms > self.bounds))


def gronwall_check(
    model: SplittingModel,
    dist: TimeDistribution,
    seed: SeedConfig,
    m: int,
    x0=None,
    tol: float = DEFAULT_TOL,
) -> GronwallReport:
    """Per-cycle ambient Jacobians along one path; ``C`` is the largest field
    Jacobian norm sampled at the cycle start states."""
    x = model.random_point(seed.generator("init")) if x0 is None else np.array(x0, dtype=float)
    T = sample_cycle_times(dist, m * model.n_fields, seed.generator("times")).reshape(m, model.n_fields)
    nc = model.weights.shape[0]
    ends = np.zeros((m, model.dimension))
    xe = x.copy()
    st, c, f, e = K.cocycle_run(
        model.kinds, model.idx, model.coef, tol, xe, np.zeros((model.dimension, 0)), T,
        model.weights, model.conserved(x), 1, DEFAULT_PROJ_TOL, False,
        np.zeros((m, 0)), np.zeros((m, nc)), ends,
    )
    _raise_status(st, c, f, e)
    states = np.vstack([x[None, :], ends[:-1]])
    _, J = cycle_jacobians(model, x, T, tol)
    lognorm = np.log(np.linalg.norm(J, 2, axis=(1, 2)))
    C = float(field_jacobian_norms(model, states).max())
    return GronwallReport(lognorm, T.sum(axis=1), C)
