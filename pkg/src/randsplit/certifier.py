"""Lie bracket rank certification at explicit tangent-bundle points.

Columns of the certification matrices are lifted splitting fields and exact
polynomial brackets of lifted fields, evaluated at a point ``(x, eta)`` in the
interleaved layout ``(x_1, eta_1, ..., x_D, eta_D)``.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .models import (
    Mode,
    TriadIndex,
    build_lorenz_splitting,
    check_compatible,
    coupling_rational,
    energy_weights,
    enumerate_triads,
    half_lattice,
    top_field,
    triad_top_specs,
)
from .vecfield import PolyVectorField, interleave, lie_bracket, lift

DEFAULT_RANK_TOL = 1e-10
DET_RTOL = 1e-8
J2: tuple[Mode, ...] = ((0, 1), (1, 0), (-1, 1), (2, 0))


class ConsistencyError(RuntimeError):
    """A constructed test point violates one of its defining relations."""


# ---------------------------------------------------------------------------
# reports


@dataclass
class RankReport:
    shape: tuple[int, int]
    singular_values: np.ndarray
    rank: int
    threshold: float
    target: int | None = None
    scaled: bool = False

    @property
    def passed(self) -> bool:
        return self.target is None or self.rank == self.target

    @property
    def smallest_retained(self) -> float:
        return float(self.singular_values[self.rank - 1]) if self.rank else 0.0

    @property
    def margin(self) -> float:
        """Smallest retained singular value over the threshold."""
        return self.smallest_retained / self.threshold if self.threshold > 0 else math.inf

    def to_dict(self) -> dict:
        return {
            "shape": list(self.shape),
            "rank": self.rank,
            "target": self.target,
            "threshold": self.threshold,
            "equilibrated": self.scaled,
            "smallest_retained": self.smallest_retained,
            "margin": self.margin,
            "pass": self.passed,
            "singular_values": [float(s) for s in self.singular_values],
        }


def equilibrate(A, iterations: int = 50) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Ruiz row/column scaling with power-of-two factors (exact in floating point).

    Returns ``(S, r, c)`` with ``S = diag(1/r) A diag(1/c)``; rank is unchanged.
    """
    S = np.array(A, dtype=float)
    r_tot = np.ones(S.shape[0])
    c_tot = np.ones(S.shape[1])
    for _ in range(iterations):
        r = np.sqrt(np.abs(S).max(axis=1))
        c = np.sqrt(np.abs(S).max(axis=0))
        r[r == 0] = 1.0
        c[c == 0] = 1.0
        r = np.exp2(np.round(np.log2(r)))
        c = np.exp2(np.round(np.log2(c)))
        if np.all(r == 1.0) and np.all(c == 1.0):
            break
        S = S / r[:, None] / c[None, :]
        r_tot *= r
        c_tot *= c
    return S, r_tot, c_tot


def numeric_rank(
    A, tol: float = DEFAULT_RANK_TOL, target: int | None = None, scaled: bool = False
) -> RankReport:
    """Count singular values above ``tol * sigma_max * max(shape)``.

    With ``scaled`` the matrix is first equilibrated by exact power-of-two row
    and column scalings, which leave the rank unchanged but remove the spread
    of magnitudes coming from the coordinates of the point.
    """
    A = np.asarray(A, dtype=float)
    if not np.all(np.isfinite(A)):
        raise ValueError("matrix has non-finite entries")
    if scaled and A.size:
        A = equilibrate(A)[0]
    s = np.linalg.svd(A, compute_uv=False) if A.size else np.zeros(0)
    smax = float(s[0]) if s.size else 0.0
    thr = tol * smax * max(A.shape) if A.size else 0.0
    rank = int(np.sum(s > thr)) if smax > 0 else 0
    return RankReport(tuple(A.shape), s, rank, thr, target, scaled)


@dataclass
class DetCheck:
    block: str
    computed: float
    closed_form: float
    formula: str
    rtol: float = DET_RTOL
    params: dict = field(default_factory=dict)

    @property
    def rel_error(self) -> float:
        ref = abs(self.closed_form)
        if ref == 0.0:
            return math.inf if self.computed != 0.0 else 0.0
        return abs(abs(self.computed) - ref) / ref

    @property
    def passed(self) -> bool:
        return self.closed_form != 0.0 and self.rel_error <= self.rtol

    def to_dict(self) -> dict:
        d = asdict(self)
        d["rel_error"] = self.rel_error
        d["pass"] = self.passed
        return d


# ---------------------------------------------------------------------------
# bracket matrices


@dataclass
class BracketMatrix:
    """Certification matrix with the column recipe kept for cross-checks."""

    matrix: np.ndarray
    point: np.ndarray
    labels: list[str]
    recipes: list[tuple[PolyVectorField, ...]]
    target_rank: int
    row_labels: list[str] | None = None
    blocks: dict = field(default_factory=dict)

    def numeric_matrix(self) -> np.ndarray:
        """Same columns, brackets from Jacobian products ``Dg f - Df g`` at the point."""
        cols = []
        p = self.point
        for r in self.recipes:
            if len(r) == 1:
                cols.append(r[0].evaluate(p))
            else:
                f, g = r
                cols.append(g.jacobian_at(p) @ f.evaluate(p) - f.jacobian_at(p) @ g.evaluate(p))
        return np.column_stack(cols)

    def cross_check(self) -> float:
        """Largest entry-wise difference relative to the largest entry of each column."""
        A = self.matrix
        B = self.numeric_matrix()
        scale = np.maximum(np.abs(A).max(axis=0), np.finfo(float).tiny)
        return float(np.max(np.abs(A - B) / scale))


def _column(recipe: tuple[PolyVectorField, ...], point, cache: dict) -> np.ndarray:
    if len(recipe) == 1:
        return recipe[0].evaluate(point)
    key = (id(recipe[0]), id(recipe[1]))
    if key not in cache:
        cache[key] = lie_bracket(*recipe)
    return cache[key].evaluate(point)


# ---------------------------------------------------------------------------
# Lorenz


@dataclass
class LorenzTestPoint:
    n: int
    R: float
    a: float
    b: float
    x: np.ndarray
    eta: np.ndarray

    @property
    def lifted(self) -> np.ndarray:
        return interleave(self.x, self.eta)

    def relations(self) -> dict[str, float]:
        a, b, R = self.a, self.b, self.R
        return {
            "sphere": 2 * a * a + (self.n - 2) * b * b - R * R,
            "quadratic": 2 * a * a + 5 * a * b + 2 * b * b,
            "A3_factor": a**3 + a * b * b + 2 * b**3,
            "pivot_factor": 2 * b - a,
            "tangency": float(self.eta @ self.x),
        }


def lorenz_test_point(n: int, R: float = 1.0) -> LorenzTestPoint:
    """``x = (a, a, b, ..., b)``, alternating ``eta`` (last entry 0 for odd n)."""
    if n < 4:
        raise ValueError(f"Lorenz certification needs n >= 4, got {n}")
    if R <= 0:
        raise ValueError("radius must be positive")
    a = -R / math.sqrt(4 * n - 6)
    b = math.sqrt(2.0) * R / math.sqrt(2 * n - 3)
    x = np.full(n, b)
    x[:2] = a
    eta = np.array([1.0 if i % 2 == 0 else -1.0 for i in range(n)])
    if n % 2:
        eta[-1] = 0.0
    pt = LorenzTestPoint(n, float(R), a, b, x, eta)
    rel = pt.relations()
    scale = R * R
    if abs(rel["sphere"]) > 1e-12 * scale or abs(rel["quadratic"]) > 1e-12 * scale:
        raise ConsistencyError(f"test point relations violated: {rel}")
    if abs(rel["A3_factor"]) <= 1e-12 * R**3 or abs(rel["pivot_factor"]) <= 1e-12 * R:
        raise ConsistencyError(f"test point is degenerate: {rel}")
    if abs(rel["tangency"]) > 1e-12 * R:
        raise ConsistencyError("eta is not tangent to the sphere")
    return pt


def build_lorenz_bracket_matrix(n: int, point: LorenzTestPoint | None = None) -> BracketMatrix:
    """Columns ``V~1, [V~1,V~2], V~2, ..., [V~(n-2),V~(n-1)], V~(n-1), V~n`` (2n x 2n-2)."""
    point = point or lorenz_test_point(n)
    lifted = [lift(f) for f in build_lorenz_splitting(n)]
    labels, recipes = [], []
    labels.append("V1")
    recipes.append((lifted[0],))
    for i in range(1, n - 1):
        labels.append(f"[V{i},V{i + 1}]")
        recipes.append((lifted[i - 1], lifted[i]))
        labels.append(f"V{i + 1}")
        recipes.append((lifted[i],))
    labels.append(f"V{n}")
    recipes.append((lifted[n - 1],))
    p = point.lifted
    cache: dict = {}
    A = np.column_stack([_column(r, p, cache) for r in recipes])
    rows = [f"{s}{i + 1}" for i in range(n) for s in ("x", "eta")]
    bm = BracketMatrix(A, p, labels, recipes, 2 * n - 2, rows)
    bm.blocks = lorenz_blocks(bm.matrix, n)
    return bm


def lorenz_blocks(A: np.ndarray, n: int) -> dict[str, np.ndarray]:
    """``A_i`` (rows x_(i+1), eta_(i+1); columns [V~(i-1),V~i], V~i) and the top block B."""
    out = {"B": A[:4, :]}
    for i in range(2, n):
        r = 2 * i  # 0-based row of x_(i+1)
        c = 2 * i - 3  # 0-based column of [V~(i-1), V~i]
        out[f"A{i}"] = A[r:r + 2, c:c + 2]
    return out


def lorenz_closed_forms(point: LorenzTestPoint) -> dict[str, tuple[float, str]]:
    """Determinants of the 2x2 diagonal blocks ``A_2 .. A_(n-1)``."""
    a, b, n = point.a, point.b, point.n
    forms = {
        "A2": (4 * a**3 * b, "4 a^3 b"),
        "A3": (-a * (a**3 + a * b * b + 2 * b**3), "-a (a^3 + a b^2 + 2 b^3)"),
        "A4": (4 * a * b**3, "4 a b^3"),
    }
    for i in range(5, n):
        forms[f"A{i}"] = (4 * b**4, "+-4 b^4")
    return forms


def check_lorenz_blocks(n: int, bm: BracketMatrix, point: LorenzTestPoint) -> list[DetCheck]:
    forms = lorenz_closed_forms(point)
    checks = []
    for i in range(2, n):
        name = f"A{i}"
        val, txt = forms[name]
        checks.append(DetCheck(name, float(np.linalg.det(bm.blocks[name])), val, txt))
    return checks


# ---------------------------------------------------------------------------
# Euler


@dataclass
class EulerTestPoint:
    N: int
    enstrophy: float
    energy: float
    beta: float
    alpha1: float
    alpha2: float
    z_plus: float
    modes: list[Mode]
    q: np.ndarray
    eta: np.ndarray

    @property
    def lifted(self) -> np.ndarray:
        return interleave(self.q, self.eta)

    def residuals(self) -> dict[str, float]:
        w = energy_weights(self.N)
        return {
            "enstrophy": float(self.q @ self.q) / self.enstrophy - 1.0,
            "energy": float(w @ (self.q * self.q)) / self.energy - 1.0,
            "eta_dot_q": float(self.eta @ self.q),
            "eta_dot_grad_energy": float(self.eta @ (w * self.q)),
        }


def _euler_point_coefficients(N: int, enstrophy: float, energy: float):
    """Linear system for ``X = 10 alpha1^2`` and ``Y = 2 alpha2^2``.

    ``X + Y = enstrophy - P beta^2`` and ``X + Y/(2N^2) = energy - Q beta^2``.
    Returns (P, Q) so that both sides are affine in ``beta^2``.
    """
    modes = half_lattice(N)
    others = [k for k in modes if k not in J2 and k != (N, N)]
    P = 2.0 * len(modes)
    Q = 2.0 * (15.0 / 8.0 + sum(1.0 / (k[0] ** 2 + k[1] ** 2) for k in others))
    return P, Q


def _solve_xy(N, enstrophy, energy, beta):
    P, Q = _euler_point_coefficients(N, enstrophy, energy)
    c = 1.0 - 1.0 / (2 * N * N)
    b2 = beta * beta
    Y = ((enstrophy - energy) - (P - Q) * b2) / c
    X = enstrophy - P * b2 - Y
    return X, Y


def euler_z_plus(N: int, enstrophy: float, energy: float) -> float:
    """Largest ``beta`` below which both group amplitudes stay positive."""
    P, Q = _euler_point_coefficients(N, enstrophy, energy)
    c = 1.0 - 1.0 / (2 * N * N)
    # Y(b2) = (S - E - (P - Q) b2)/c ; X(b2) = S - P b2 - Y(b2)
    roots = []
    if P - Q > 0:
        roots.append((enstrophy - energy) / (P - Q))
    slope_x = -P + (P - Q) / c
    x0 = enstrophy - (enstrophy - energy) / c
    if slope_x < 0:
        roots.append(-x0 / slope_x)
    if not roots:
        return math.inf
    return math.sqrt(min(roots))


# Small beta spreads the singular values over more decades than a 1e-10
# threshold can resolve, even after equilibration; mid-interval is well conditioned.
DEFAULT_BETA_FRACTION = 0.5


def euler_test_point(
    N: int, enstrophy: float = 1.0, energy: float = 0.5, beta: float | None = None
) -> EulerTestPoint:
    """Point with ``a = alpha1`` on (0,1), (1,0), ``alpha2`` on (N,N), ``beta`` elsewhere.

    ``b = 2a`` on ``J2`` and ``b = a`` elsewhere; ``eta^a = 1`` and
    ``eta^b = -1/2`` on ``J2``, ``-1`` elsewhere.  ``alpha1`` and ``alpha2``
    solve the two conserved-quantity targets exactly.
    """
    if N < 3:
        raise ValueError(f"Euler certification needs N >= 3, got {N}")
    check_compatible(N, enstrophy, energy)
    zp = euler_z_plus(N, enstrophy, energy)
    if beta is None:
        beta = DEFAULT_BETA_FRACTION * zp
    if not (0.0 < beta < zp):
        raise ValueError(f"beta must lie in (0, Z+) = (0, {zp:.6g}), got {beta}")
    X, Y = _solve_xy(N, enstrophy, energy, beta)
    alpha1 = math.sqrt(X / 10.0)
    alpha2 = math.sqrt(Y / 2.0)
    modes = half_lattice(N)
    q = np.empty(2 * len(modes))
    eta = np.empty_like(q)
    for i, k in enumerate(modes):
        a = alpha1 if k in ((0, 1), (1, 0)) else alpha2 if k == (N, N) else beta
        in_j2 = k in J2
        q[2 * i] = a
        q[2 * i + 1] = 2 * a if in_j2 else a
        eta[2 * i] = 1.0
        eta[2 * i + 1] = -0.5 if in_j2 else -1.0
    pt = EulerTestPoint(N, enstrophy, energy, float(beta), alpha1, alpha2, zp, modes, q, eta)
    res = pt.residuals()
    qn = float(np.linalg.norm(q))
    if (
        abs(res["enstrophy"]) > 1e-12
        or abs(res["energy"]) > 1e-12
        or abs(res["eta_dot_q"]) > 1e-12 * qn
        or abs(res["eta_dot_grad_energy"]) > 1e-12 * qn
    ):
        raise ConsistencyError(f"Euler test point relations violated: {res}")
    return pt


def _triad_fields(triad: TriadIndex, mode_index: dict, dim: int) -> list[PolyVectorField]:
    return [top_field(dim, ind, cs) for ind, cs in triad_top_specs(triad, mode_index)]


GENERIC_COLUMNS = ((0,), (1,), (0, 2), (2, 3))
ZERO_COLUMNS = ((0,), (1,), (2,), (3,), (0, 1), (0, 2), (0, 3), (1, 2))
COLUMN_NAMES = {1: "V{}", 2: "[V{},V{}]"}


def _recipe_label(i: int, spec: tuple[int, ...]) -> str:
    return f"F({i}):" + COLUMN_NAMES[len(spec)].format(*(s + 1 for s in spec))


def build_euler_bracket_matrix(N: int, point: EulerTestPoint | None = None) -> BracketMatrix:
    """``4n x (4n - 4)`` matrix over the enumerated triads (``n`` half-lattice modes).

    ``F(0)`` contributes 8 columns (its four fields and the brackets
    [1,2], [1,3], [1,4], [2,3]); every later triad contributes
    ``V1, V2, [V1,V3], [V3,V4]``.  Rows are ordered mode by mode in order of
    first appearance, each as ``(a, b, eta^a, eta^b)``.
    """
    point = point or euler_test_point(N)
    triads = enumerate_triads(N)
    modes = half_lattice(N)
    index = {m: i for i, m in enumerate(modes)}
    dim = 2 * len(modes)
    for t in triads:
        if any(c == 0 for c in t.couplings()):
            raise ValueError(f"triad {t.modes} has a vanishing coupling constant")
    order: list[Mode] = []
    for t in triads:
        for m in t.modes:
            if m not in order:
                order.append(m)
    if len(order) != len(modes):
        raise ValueError("enumeration does not cover the half-lattice")
    # lifted coordinate of a_m is 2*(2*idx), eta^a is +1; b is 2*(2*idx+1)
    perm = []
    row_labels = []
    for m in order:
        i = index[m]
        perm += [4 * i, 4 * i + 2, 4 * i + 1, 4 * i + 3]
        row_labels += [f"a{m}", f"b{m}", f"eta_a{m}", f"eta_b{m}"]
    p = point.lifted
    labels, recipes = [], []
    cache: dict = {}
    for i, t in enumerate(triads):
        lf = [lift(f) for f in _triad_fields(t, index, dim)]
        for spec in ZERO_COLUMNS if i == 0 else GENERIC_COLUMNS:
            labels.append(_recipe_label(i, spec))
            recipes.append(tuple(lf[s] for s in spec))
    full = np.column_stack([_column(r, p, cache) for r in recipes])
    A = full[perm, :]
    bm = BracketMatrix(A, p, labels, recipes, 4 * len(modes) - 4, row_labels)
    bm.blocks = {"perm": np.asarray(perm), "triads": triads, "order": order}
    return bm


def _permuted_numeric(bm: BracketMatrix) -> np.ndarray:
    return bm.numeric_matrix()[bm.blocks["perm"], :]


def euler_cross_check(bm: BracketMatrix) -> float:
    A = bm.matrix
    B = _permuted_numeric(bm)
    scale = np.maximum(np.abs(A).max(axis=0), np.finfo(float).tiny)
    return float(np.max(np.abs(A - B) / scale))


def euler_block_structure_ok(bm: BracketMatrix) -> bool:
    """Zeros below each new-mode block: columns of F(i) never touch later modes."""
    A = bm.matrix
    n_modes = len(bm.blocks["order"])
    ok = np.all(A[12:, :8] == 0.0)
    for i in range(1, n_modes - 2):
        cols = slice(8 + 4 * (i - 1), 8 + 4 * i)
        first_later = 4 * (i + 3)
        ok = ok and np.all(A[first_later:, cols] == 0.0)
    return bool(ok)


def _abs_c(j: Mode, k: Mode) -> float:
    return abs(float(coupling_rational(j, k))) / (4 * math.pi)


def _local(point: EulerTestPoint, m: Mode):
    i = point.modes.index(m)
    return point.q[2 * i], point.q[2 * i + 1], point.eta[2 * i], point.eta[2 * i + 1]


def check_euler_blocks(N: int, bm: BracketMatrix, point: EulerTestPoint) -> list[DetCheck]:
    """Block determinants against their closed forms.

    ``M0'``: rows ``b_j, a_k, b_k, a_l`` of F(0) and their tangent rows under the
    eight F(0) columns.  Later triads: rows ``a_l, b_l, eta^a_l, eta^b_l`` of the
    new mode under the triad's four columns.  ``(gamma1, gamma2, m)`` are read
    off the coordinates; F(N+1) uses its own closed form.
    """
    A = bm.matrix
    triads = bm.blocks["triads"]
    checks = []
    beta = point.beta
    a1 = point.alpha1
    # M0'
    t0 = triads[0]
    j, k, l = t0.modes  # noqa: E741
    cjk, cjl, ckl = _abs_c(j, k), _abs_c(j, l), _abs_c(k, l)
    rows = [1, 4, 5, 8, 3, 6, 7, 10]  # b_j, a_k, b_k, a_l then their eta rows
    M0p = A[np.ix_(rows, range(8))]
    val = -96 * a1**5 * beta**11 * cjk**4 * cjl**5 * ckl**3
    checks.append(DetCheck("M0'", float(np.linalg.det(M0p)), val,
                           "-96 alpha1^5 beta^11 Cjk^4 Cjl^5 Ckl^3",
                           params={"alpha1": a1, "beta": beta}))
    for i in range(1, len(triads)):
        t = triads[i]
        j, k, l = t.modes  # noqa: E741
        cjk, cjl, ckl = _abs_c(j, k), _abs_c(j, l), _abs_c(k, l)
        r0 = 4 * (i + 2)
        cols = list(range(8 + 4 * (i - 1), 8 + 4 * i))
        M = A[r0:r0 + 4, cols]
        det = float(np.linalg.det(M))
        aj, bj, eaj, ebj = _local(point, j)
        ak, bk, eak, ebk = _local(point, k)
        al, bl, eal, ebl = _local(point, l)
        if i == N + 1:
            ok = (bj == 2 * aj and ebj == -0.5 and bk == 2 * ak and ebk == -0.5 and bl == al and ebl == -1.0
                  and ak == al)
            b_ = ak
            val = 39 / 2 * aj**3 * b_**4 * (b_ - aj) * cjk**4 * cjl * ckl if ok else 0.0
            checks.append(DetCheck(f"M'_F({i})", det, val,
                                   "39/2 alpha1^3 beta^4 (beta - alpha1) Cjk^4 Cjl Ckl",
                                   params={"alpha1": aj, "beta": b_, "triad": str(t.modes)}))
            continue
        g1, g2 = aj, al
        m = bl / al
        ok = (bj == 2 * g1 and ebj == -0.5 and ak == bk and ebk == -1.0 and eal == 1.0
              and m in (1.0, 2.0) and ebl == -1.0 / m)
        b_ = ak
        val = (3 * b_**3 * g1**3 * g2 * cjk**4 * cjl * ckl * (b_ + b_ * m * m + 2 * g2 * m * m) / (2 * m)
               if ok else 0.0)
        checks.append(DetCheck(f"M'_F({i})", det, val,
                               "3 beta^3 g1^3 g2 Cjk^4 Cjl Ckl (beta + beta m^2 + 2 g2 m^2)/(2m)",
                               params={"gamma1": g1, "gamma2": g2, "m": m, "beta": b_,
                                       "triad": str(t.modes)}))
    return checks


# ---------------------------------------------------------------------------
# top-level


@dataclass
class Certification:
    model: str
    params: dict
    rank: RankReport
    dets: list[DetCheck]
    cross_check: float
    structure_ok: bool = True
    extra: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return (
            self.rank.passed
            and all(d.passed for d in self.dets)
            and self.cross_check <= 1e-10
            and self.structure_ok
        )

    def to_dict(self) -> dict:
        return {
            "model": self.model,
            "params": self.params,
            "pass": self.passed,
            "rank": self.rank.to_dict(),
            "determinants": [d.to_dict() for d in self.dets],
            "bracket_cross_check": self.cross_check,
            "block_structure_ok": self.structure_ok,
            **self.extra,
        }


def certify_lorenz(n: int, R: float = 1.0, tol: float = DEFAULT_RANK_TOL) -> Certification:
    pt = lorenz_test_point(n, R)
    bm = build_lorenz_bracket_matrix(n, pt)
    rep = numeric_rank(bm.matrix, tol, bm.target_rank)
    dets = check_lorenz_blocks(n, bm, pt)
    top = numeric_rank(bm.blocks["B"], tol, 4)
    below = all(
        np.all(bm.matrix[2 * i + 2:, 2 * i - 3:2 * i - 1] == 0.0) for i in range(2, n)
    )
    return Certification("lorenz", {"n": n, "R": R, "a": pt.a, "b": pt.b}, rep, dets,
                         bm.cross_check(), below and top.passed,
                         {"relations": pt.relations(), "top_block_rank": top.rank})


def certify_euler(
    N: int,
    enstrophy: float = 1.0,
    energy: float = 0.5,
    beta: float | None = None,
    tol: float = DEFAULT_RANK_TOL,
) -> Certification:
    pt = euler_test_point(N, enstrophy, energy, beta)
    bm = build_euler_bracket_matrix(N, pt)
    rep = numeric_rank(bm.matrix, tol, bm.target_rank, scaled=True)
    raw = numeric_rank(bm.matrix, tol, bm.target_rank)
    dets = check_euler_blocks(N, bm, pt)
    params = {"N": N, "enstrophy": enstrophy, "energy": energy, "beta": pt.beta,
              "alpha1": pt.alpha1, "alpha2": pt.alpha2, "z_plus": pt.z_plus}
    return Certification("euler", params, rep, dets, euler_cross_check(bm),
                         euler_block_structure_ok(bm),
                         {"residuals": pt.residuals(), "unscaled_rank": raw.to_dict()})
