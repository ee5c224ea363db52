"""Lorenz-96 and Galerkin-truncated 2D Euler splitting families.

Both models are built from fields of one of two shapes, which is what the flow
kernels consume:

* rotation ``(p, q, r, c)``: ``dx_p = c x_r x_q``, ``dx_q = -c x_r x_p``;
* Euler top ``(u0, u1, u2; c0, c1, c2)``: ``dx_u0 = c0 x_u1 x_u2`` and cyclically,
  with ``c0 + c1 + c2 = 0``.

Euler states use one representative per +/- pair of wavevectors (the
half-lattice ``k2 > 0`` or ``k2 == 0, k1 > 0``).  Mode ``m`` stores its real part
at coordinate ``2m`` and imaginary part at ``2m + 1``; ``q_{-k} = conj(q_k)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property
from itertools import combinations, product

import numpy as np

from .vecfield import PolyVectorField, monomial

ROTATION = 0
TOP = 1

FOUR_PI = 4.0 * math.pi

Mode = tuple[int, int]


# ---------------------------------------------------------------------------
# generic container


class SplittingModel:
    """Ordered splitting family plus diagonal conserved quadratics.

    Subclasses fill ``fields``, ``kinds``, ``idx``, ``coef`` and ``weights``.
    ``weights`` has one row per conserved quantity ``sum_i w_i x_i**2``.
    """

    name = "model"
    dimension: int
    fields: tuple[PolyVectorField, ...]
    kinds: np.ndarray
    idx: np.ndarray
    coef: np.ndarray
    weights: np.ndarray

    @property
    def n_fields(self) -> int:
        return len(self.fields)

    @property
    def tangent_dimension(self) -> int:
        return self.dimension - self.weights.shape[0]

    def conserved(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return self.weights @ (x * x)

    def constraint_gradients(self, x) -> np.ndarray:
        """Gradients of the conserved quantities, one per row."""
        return 2.0 * self.weights * np.asarray(x, dtype=float)

    def true_field(self) -> PolyVectorField:
        total = self.fields[0]
        for f in self.fields[1:]:
            total = total + f
        return total

    def is_generic(self, x) -> bool:
        raise NotImplementedError


def _flow_arrays(specs: list[tuple[int, tuple[int, int, int], tuple[float, float, float]]]):
    kinds = np.array([s[0] for s in specs], dtype=np.int64)
    idx = np.array([s[1] for s in specs], dtype=np.int64).reshape(-1, 3)
    coef = np.array([s[2] for s in specs], dtype=float).reshape(-1, 3)
    return kinds, idx, coef


# ---------------------------------------------------------------------------
# Lorenz-96


def build_lorenz_splitting(n: int) -> list[PolyVectorField]:
    """Fields ``V_j(x) = x_{j-1} (x_{j+1} e_j - x_j e_{j+1})``, j = 1..n, periodic indices."""
    if n < 4:
        raise ValueError(f"Lorenz splitting needs n >= 4, got {n}")
    fields = []
    for j in range(n):
        jm, jp = (j - 1) % n, (j + 1) % n
        fields.append(
            PolyVectorField.from_terms(
                n,
                [
                    (j, Fraction(1), monomial((jm, 1), (jp, 1))),
                    (jp, Fraction(-1), monomial((jm, 1), (j, 1))),
                ],
            )
        )
    return fields


def lorenz_vector_field(n: int) -> PolyVectorField:
    """``V_Lorenz(x) = sum_j (x_{j+1} - x_{j-2}) x_{j-1} e_j``."""
    if n < 4:
        raise ValueError(f"Lorenz-96 needs n >= 4, got {n}")
    terms = []
    for j in range(n):
        terms.append((j, Fraction(1), monomial(((j + 1) % n, 1), ((j - 1) % n, 1))))
        terms.append((j, Fraction(-1), monomial(((j - 2) % n, 1), ((j - 1) % n, 1))))
    return PolyVectorField.from_terms(n, terms)


def lorenz_generic_sum(x) -> float:
    x = np.asarray(x, dtype=float)
    return float(np.sum((x**2 + np.roll(x, -1) ** 2) * np.roll(x, 1) ** 2))


def genericity_check_lorenz(x, rtol: float = 1e-14) -> bool:
    """True iff ``sum_j (x_j^2 + x_{j+1}^2) x_{j-1}^2`` exceeds ``rtol * |x|^4``."""
    x = np.asarray(x, dtype=float)
    scale = float(np.dot(x, x)) ** 2
    if scale == 0.0:
        return False
    return lorenz_generic_sum(x) > rtol * scale


class LorenzModel(SplittingModel):
    name = "lorenz"

    def __init__(self, n: int, radius: float = 1.0):
        if radius <= 0:
            raise ValueError("radius must be positive")
        self.n = n
        self.radius = float(radius)
        self.dimension = n
        self.fields = tuple(build_lorenz_splitting(n))
        self.kinds, self.idx, self.coef = _flow_arrays(
            [(ROTATION, (j, (j + 1) % n, (j - 1) % n), (1.0, 0.0, 0.0)) for j in range(n)]
        )
        self.weights = np.ones((1, n))

    def true_field(self) -> PolyVectorField:
        return lorenz_vector_field(self.n)

    def is_generic(self, x) -> bool:
        return genericity_check_lorenz(x)

    def random_point(self, rng: np.random.Generator) -> np.ndarray:
        """Uniform point on the sphere of radius ``radius``."""
        while True:
            x = rng.standard_normal(self.n)
            x *= self.radius / np.linalg.norm(x)
            if self.is_generic(x):
                return x

    def __repr__(self) -> str:
        return f"LorenzModel(n={self.n}, radius={self.radius:g})"


# ---------------------------------------------------------------------------
# 2D Euler


def _check_mode(k: Mode) -> None:
    if k[0] == 0 and k[1] == 0:
        raise ValueError("zero wavevector has no coupling constant")


def coupling_rational(j: Mode, k: Mode) -> Fraction:
    """``4*pi*C_{jk} = <j, k_perp> (1/|j|^2 - 1/|k|^2)`` with ``k_perp = (k2, -k1)``."""
    _check_mode(j)
    _check_mode(k)
    cross = j[0] * k[1] - j[1] * k[0]
    return cross * (Fraction(1, j[0] ** 2 + j[1] ** 2) - Fraction(1, k[0] ** 2 + k[1] ** 2))


def coupling_constant(j: Mode, k: Mode) -> float:
    return float(coupling_rational(j, k)) / FOUR_PI


def half_lattice(N: int) -> list[Mode]:
    """Representatives of the nonzero modes of ``[-N, N]^2`` modulo sign."""
    modes = [(k1, 0) for k1 in range(1, N + 1)]
    modes += [(k1, k2) for k2 in range(1, N + 1) for k1 in range(-N, N + 1)]
    return modes


def canonical(k: Mode) -> tuple[Mode, int]:
    """Half-lattice representative of ``k`` and the sign with ``k = sign * rep``."""
    if k[1] > 0 or (k[1] == 0 and k[0] > 0):
        return k, 1
    return (-k[0], -k[1]), -1


def _neg(k: Mode) -> Mode:
    return (-k[0], -k[1])


@dataclass(frozen=True)
class TriadIndex:
    """Three half-lattice modes with signs such that ``sum s_i * mode_i = 0``."""

    j: Mode
    k: Mode
    l: Mode  # noqa: E741
    signs: tuple[int, int, int]

    def __post_init__(self):
        s = self.signs
        tot = (
            s[0] * self.j[0] + s[1] * self.k[0] + s[2] * self.l[0],
            s[0] * self.j[1] + s[1] * self.k[1] + s[2] * self.l[1],
        )
        if tot != (0, 0):
            raise ValueError(f"triad {self.modes} does not close with signs {s}")

    @property
    def modes(self) -> tuple[Mode, Mode, Mode]:
        return (self.j, self.k, self.l)

    @property
    def signed(self) -> tuple[Mode, Mode, Mode]:
        """Signed wavevectors ``J + K + L = 0``."""
        s = self.signs
        return tuple((si * m[0], si * m[1]) for si, m in zip(s, self.modes))  # type: ignore[return-value]

    def couplings(self) -> tuple[Fraction, Fraction, Fraction]:
        """``4*pi*(C_KL, C_JL, C_JK)`` for the signed wavevectors."""
        J, K, L = self.signed
        return coupling_rational(K, L), coupling_rational(J, L), coupling_rational(J, K)

    @classmethod
    def close(cls, j: Mode, k: Mode, l: Mode) -> TriadIndex:  # noqa: E741
        """Find signs closing the triple, preferring ``s_j = +1``."""
        for sk, sl in product((1, -1), repeat=2):
            if j[0] + sk * k[0] + sl * l[0] == 0 and j[1] + sk * k[1] + sl * l[1] == 0:
                return cls(j, k, l, (1, sk, sl))
        raise ValueError(f"no sign choice closes {(j, k, l)}")


def _collinear(a: Mode, b: Mode) -> bool:
    return a[0] * b[1] - a[1] * b[0] == 0


def interacting_triads(N: int) -> list[TriadIndex]:
    """All closed triples of distinct half-lattice modes with a nonzero coupling.

    A collinear triple has all three couplings zero and is skipped; otherwise at
    most one coupling vanishes (when two of the wavevectors have equal length).
    """
    modes = half_lattice(N)
    out = []
    for a, b, c in combinations(modes, 3):
        if _collinear(a, b):
            continue
        try:
            t = TriadIndex.close(a, b, c)
        except ValueError:
            continue
        out.append(t)
    return out


def enumerate_triads(N: int) -> list[TriadIndex]:
    """Ordered triads ``F(0), ..., F(n-3)`` with ``n = 2N(N+1)`` modes.

    ``F(0)`` touches three modes and each later triad adds exactly one new mode,
    always in the third slot.  The first ``2N+1`` entries follow the published
    case table; the rest fill row 0 through ``(0,1), (p,1), (p,0)`` and each row
    ``r >= 2`` through ``(0,1), (-N,r-1), (-N,r)`` followed by
    ``(1,0), (L,r), (L+1,r)``.
    """
    if N < 3:
        raise ValueError(f"Euler enumeration needs N >= 3, got {N}")
    raw: list[tuple[Mode, Mode, Mode]] = []
    for i in range(0, N - 1):
        raw.append(((1, 0), (-N + i, 1), (-N + i + 1, 1)))
    raw.append(((-1, 1), (-3, 1), (2, 0)))
    raw.append(((2, 0), (-2, 1), (0, 1)))
    raw.append(((0, 1), (2, 0), (2, 1)))
    raw.append(((1, 0), (2, 1), (1, 1)))
    for i in range(N + 3, 2 * N + 1):
        raw.append(((1, 0), (-N + i - 1, 1), (-N + i, 1)))
    for p in range(3, N + 1):
        raw.append(((0, 1), (p, 1), (p, 0)))
    for r in range(2, N + 1):
        raw.append(((0, 1), (-N, r - 1), (-N, r)))
        for L in range(-N, N):
            raw.append(((1, 0), (L, r), (L + 1, r)))
    return [TriadIndex.close(*t) for t in raw]


def triad_top_specs(triad: TriadIndex, mode_index: dict[Mode, int]):
    """The four Euler-top fields of a triad as (indices, 4*pi*coefficients).

    Variants follow the order aaa, a_j b_k b_l, b_j a_k b_l, b_j b_k a_l.
    """
    sj, sk, sl = triad.signs
    ckl, cjl, cjk = triad.couplings()
    mj, mk, ml = (mode_index[m] for m in triad.modes)
    aj, ak, al = 2 * mj, 2 * mk, 2 * ml
    bj, bk, bl = aj + 1, ak + 1, al + 1
    return [
        ((aj, ak, al), (-ckl, -cjl, -cjk)),
        ((aj, bk, bl), (sk * sl * ckl, sk * sl * cjl, sk * sl * cjk)),
        ((bj, ak, bl), (sj * sl * ckl, sj * sl * cjl, sj * sl * cjk)),
        ((bj, bk, al), (sj * sk * ckl, sj * sk * cjl, sj * sk * cjk)),
    ]


def top_field(dimension: int, indices, coefs, scale: float = 1.0 / FOUR_PI) -> PolyVectorField:
    u0, u1, u2 = indices
    c0, c1, c2 = coefs
    return PolyVectorField.from_terms(
        dimension,
        [
            (u0, c0, monomial((u1, 1), (u2, 1))),
            (u1, c1, monomial((u0, 1), (u2, 1))),
            (u2, c2, monomial((u0, 1), (u1, 1))),
        ],
        scale,
    )


def top_flow_spec(indices, coefs) -> tuple[int, tuple[int, int, int], tuple[float, float, float]]:
    """Kernel spec for a top; a top with one exactly-zero coupling is a rotation."""
    c = [Fraction(v) for v in coefs]
    u = list(indices)
    if sum(c) != 0:
        raise ValueError("top couplings must sum to zero")
    fc = [float(v) / FOUR_PI for v in c]
    if c[2] == 0:
        return ROTATION, (u[0], u[1], u[2]), (fc[0], 0.0, 0.0)
    if c[0] == 0:
        return ROTATION, (u[1], u[2], u[0]), (fc[1], 0.0, 0.0)
    if c[1] == 0:
        return ROTATION, (u[0], u[2], u[1]), (fc[0], 0.0, 0.0)
    return TOP, (u[0], u[1], u[2]), (fc[0], fc[1], fc[2])


def build_euler_splitting(N: int, triads: list[TriadIndex] | None = None) -> list[PolyVectorField]:
    if N < 3:
        raise ValueError(f"Euler splitting needs N >= 3, got {N}")
    modes = half_lattice(N)
    index = {m: i for i, m in enumerate(modes)}
    dim = 2 * len(modes)
    triads = interacting_triads(N) if triads is None else triads
    fields = []
    for t in triads:
        for ind, cs in triad_top_specs(t, index):
            fields.append(top_field(dim, ind, cs))
    return fields


def energy_weights(N: int) -> np.ndarray:
    """Per-coordinate weights ``1/|k|^2`` of the energy ``sum (a_k^2 + b_k^2)/|k|^2``."""
    w = [1.0 / (k[0] ** 2 + k[1] ** 2) for k in half_lattice(N)]
    return np.repeat(np.asarray(w), 2)


def check_compatible(N: int, enstrophy: float, energy: float) -> None:
    """Reject pairs violating ``enstrophy/(2N^2) < energy < enstrophy``."""
    lo = enstrophy / (2 * N * N)
    if not (lo < energy < enstrophy):
        raise ValueError(
            f"incompatible conserved quantities: need enstrophy/(2N^2) < energy < enstrophy "
            f"(E/(2N^2) < calE < E), got enstrophy={enstrophy:g}, energy={energy:g}, "
            f"bounds ({lo:g}, {enstrophy:g})"
        )


def genericity_check_euler(q, atol: float = 0.0) -> bool:
    """Practical sufficient check: every coordinate nonzero."""
    q = np.asarray(q, dtype=float)
    return bool(np.all(np.abs(q) > atol))


class EulerModel(SplittingModel):
    """Galerkin-Euler splitting on the ``N``-th truncation.

    ``enstrophy`` fixes ``|q|^2`` and ``energy`` fixes ``sum |q_k|^2/|k|^2``; they
    are only used to place initial points.
    """

    name = "euler"

    def __init__(self, N: int, enstrophy: float = 1.0, energy: float = 0.5, triads=None):
        if N < 3:
            raise ValueError(f"Euler model needs N >= 3, got {N}")
        check_compatible(N, enstrophy, energy)
        self.N = N
        self.enstrophy = float(enstrophy)
        self.energy = float(energy)
        self.modes = half_lattice(N)
        self.mode_index = {m: i for i, m in enumerate(self.modes)}
        self.dimension = 2 * len(self.modes)
        self.triads = interacting_triads(N) if triads is None else list(triads)
        fields, specs = [], []
        for t in self.triads:
            for ind, cs in triad_top_specs(t, self.mode_index):
                fields.append(top_field(self.dimension, ind, cs))
                specs.append(top_flow_spec(ind, cs))
        self.fields = tuple(fields)
        self.kinds, self.idx, self.coef = _flow_arrays(specs)
        self.weights = np.vstack([np.ones(self.dimension), energy_weights(N)])

    @property
    def mode_count(self) -> int:
        return len(self.modes)

    @property
    def full_lattice_count(self) -> int:
        """Complex modes of the full truncated lattice without the reality constraint."""
        return 4 * self.N * (self.N + 1)

    @cached_property
    def _true_field(self) -> PolyVectorField:
        return super().true_field()

    def true_field(self) -> PolyVectorField:
        return self._true_field

    def is_generic(self, q) -> bool:
        return genericity_check_euler(q)

    def split_point(self, g: np.ndarray) -> np.ndarray:
        """Rescale two groups of ``g`` so that it hits both conserved targets.

        Coordinates with weight above ``energy/enstrophy`` form one group, the
        rest the other; the squared group scalings solve a 2x2 linear system.
        """
        w = self.weights[1]
        ratio = self.energy / self.enstrophy
        hi = w > ratio
        g2 = g * g
        A = np.array([[g2[hi].sum(), g2[~hi].sum()], [(w * g2)[hi].sum(), (w * g2)[~hi].sum()]])
        s = np.linalg.solve(A, [self.enstrophy, self.energy])
        if np.any(s <= 0):
            raise ValueError("could not place a point on the requested level set")
        out = g.copy()
        out[hi] *= math.sqrt(s[0])
        out[~hi] *= math.sqrt(s[1])
        return out

    def random_point(self, rng: np.random.Generator) -> np.ndarray:
        while True:
            q = self.split_point(rng.standard_normal(self.dimension))
            if self.is_generic(q):
                return q

    def __repr__(self) -> str:
        return f"EulerModel(N={self.N}, modes={self.mode_count}, triads={len(self.triads)})"


def conserved_quantities(model: SplittingModel, x) -> dict[str, float]:
    vals = model.conserved(x)
    if isinstance(model, EulerModel):
        return {"enstrophy": float(vals[0]), "energy": float(vals[1])}
    return {"norm2": float(vals[0])}
