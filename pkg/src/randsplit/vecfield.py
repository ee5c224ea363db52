"""Sparse polynomial vector fields with exact coefficient arithmetic.

A field is stored as ``scale * P`` where ``P`` has rational (``Fraction``) or
float coefficients.  Keeping an irrational common factor such as ``1/(4*pi)``
out of the coefficients lets brackets and lifts stay exact; the factor is only
applied when the field is evaluated.
"""

from __future__ import annotations

from numbers import Number
from typing import Iterable, Mapping, Sequence

import numpy as np

# A monomial is a sorted tuple of (coordinate index, power) pairs with power >= 1.
Monomial = tuple[tuple[int, int], ...]
Polynomial = dict[Monomial, Number]

ONE: Monomial = ()


class DimensionError(ValueError):
    pass


def monomial(*pairs: tuple[int, int]) -> Monomial:
    """Build a canonical monomial, merging repeated indices and dropping zero powers."""
    powers: dict[int, int] = {}
    for idx, pw in pairs:
        if pw < 0:
            raise ValueError("negative power")
        if pw:
            powers[idx] = powers.get(idx, 0) + pw
    return tuple(sorted(powers.items()))


def var(i: int) -> Monomial:
    return ((i, 1),)


def mono_mul(m1: Monomial, m2: Monomial) -> Monomial:
    if not m1:
        return m2
    if not m2:
        return m1
    return monomial(*m1, *m2)


def mono_degree(m: Monomial) -> int:
    return sum(p for _, p in m)


def mono_diff(m: Monomial, i: int) -> tuple[int, Monomial] | None:
    """Derivative of ``m`` w.r.t. ``x_i`` as (multiplier, monomial), or None if zero."""
    out = []
    mult = 0
    for idx, pw in m:
        if idx == i:
            mult = pw
            if pw > 1:
                out.append((idx, pw - 1))
        else:
            out.append((idx, pw))
    if not mult:
        return None
    return mult, tuple(out)


def _clean(p: Mapping[Monomial, Number]) -> Polynomial:
    return {m: c for m, c in p.items() if c != 0}


def poly_add(p: Polynomial, q: Polynomial, sign: int = 1) -> Polynomial:
    out = dict(p)
    for m, c in q.items():
        out[m] = out.get(m, 0) + sign * c
    return _clean(out)


def poly_mul(p: Polynomial, q: Polynomial) -> Polynomial:
    out: Polynomial = {}
    for m1, c1 in p.items():
        for m2, c2 in q.items():
            m = mono_mul(m1, m2)
            out[m] = out.get(m, 0) + c1 * c2
    return _clean(out)


def poly_scale(p: Polynomial, c: Number) -> Polynomial:
    return _clean({m: c * v for m, v in p.items()})


def poly_diff(p: Polynomial, i: int) -> Polynomial:
    out: Polynomial = {}
    for m, c in p.items():
        d = mono_diff(m, i)
        if d is not None:
            mult, dm = d
            out[dm] = out.get(dm, 0) + mult * c
    return _clean(out)


def poly_vars(p: Polynomial) -> set[int]:
    return {idx for m in p for idx, _ in m}


def poly_degree(p: Polynomial) -> int:
    return max((mono_degree(m) for m in p), default=0)


def poly_eval(p: Polynomial, x: Sequence[float]) -> float:
    total = 0.0
    for m, c in p.items():
        v = float(c)
        for idx, pw in m:
            v *= x[idx] ** pw
        total += v
    return total


def _remap(m: Monomial, f) -> Monomial:
    return monomial(*((f(idx), pw) for idx, pw in m))


class _Compiled:
    """Flat arrays for fast float evaluation of a list of polynomials."""

    def __init__(self, polys: Iterable[tuple[int, Polynomial]], nvars: int, scale: float):
        rows, coefs, monos = [], [], []
        for row, p in polys:
            for m, c in p.items():
                rows.append(row)
                coefs.append(float(c) * scale)
                monos.append(m)
        width = max((len(m) for m in monos), default=0) or 1
        idx = np.full((len(monos), width), nvars, dtype=np.int64)
        pw = np.zeros((len(monos), width), dtype=np.int64)
        for t, m in enumerate(monos):
            for s, (i, k) in enumerate(m):
                idx[t, s] = i
                pw[t, s] = k
        self.rows = np.asarray(rows, dtype=np.int64)
        self.coefs = np.asarray(coefs, dtype=float)
        self.idx = idx
        self.pw = pw

    def terms(self, x: np.ndarray) -> np.ndarray:
        xp = np.append(np.asarray(x, dtype=float), 1.0)
        return self.coefs * np.prod(xp[self.idx] ** self.pw, axis=1)


class PolyVectorField:
    """Polynomial vector field ``x -> scale * (P_1(x), ..., P_D(x))``.

    Values are treated as immutable once built.
    """

    __slots__ = ("dimension", "_comps", "scale", "_eval", "_jac")

    def __init__(
        self,
        dimension: int,
        components: Sequence[Mapping[Monomial, Number]] | None = None,
        scale: float = 1.0,
    ):
        if dimension < 1:
            raise DimensionError("dimension must be positive")
        comps = [dict() for _ in range(dimension)] if components is None else components
        if len(comps) != dimension:
            raise DimensionError(f"expected {dimension} components, got {len(comps)}")
        cleaned = []
        for p in comps:
            cp = _clean(p)
            for m in cp:
                for idx, pw in m:
                    if not 0 <= idx < dimension or pw < 1:
                        raise DimensionError(f"monomial {m} invalid in dimension {dimension}")
            cleaned.append(cp)
        self.dimension = dimension
        self._comps: tuple[Polynomial, ...] = tuple(cleaned)
        self.scale = float(scale)
        self._eval = None
        self._jac = None

    # construction helpers -------------------------------------------------

    @classmethod
    def from_terms(
        cls,
        dimension: int,
        terms: Iterable[tuple[int, Number, Monomial]],
        scale: float = 1.0,
    ) -> PolyVectorField:
        """Build from (component, coefficient, monomial) triples; repeated monomials add up."""
        comps: list[Polynomial] = [dict() for _ in range(dimension)]
        for comp, c, m in terms:
            if not 0 <= comp < dimension:
                raise DimensionError(f"component {comp} out of range")
            m = monomial(*m)
            comps[comp][m] = comps[comp].get(m, 0) + c
        return cls(dimension, comps, scale)

    @classmethod
    def zero(cls, dimension: int, scale: float = 1.0) -> PolyVectorField:
        return cls(dimension, None, scale)

    # accessors -----------------------------------------------------------

    @property
    def components(self) -> tuple[Polynomial, ...]:
        return self._comps

    def component(self, i: int) -> Polynomial:
        return dict(self._comps[i])

    @property
    def degree(self) -> int:
        return max((poly_degree(p) for p in self._comps), default=0)

    def is_zero(self) -> bool:
        return not any(self._comps)

    def support(self) -> list[int]:
        """Indices of nonzero components."""
        return [i for i, p in enumerate(self._comps) if p]

    def variables(self) -> set[int]:
        out: set[int] = set()
        for p in self._comps:
            out |= poly_vars(p)
        return out

    def __repr__(self) -> str:
        nterms = sum(len(p) for p in self._comps)
        return f"PolyVectorField(dim={self.dimension}, terms={nterms}, scale={self.scale:g})"

    # algebra -------------------------------------------------------------

    def _check(self, other: PolyVectorField) -> None:
        if self.dimension != other.dimension:
            raise DimensionError(f"dimension mismatch: {self.dimension} vs {other.dimension}")

    def _same_scale(self, other: PolyVectorField) -> tuple[PolyVectorField, PolyVectorField]:
        if self.scale == other.scale:
            return self, other
        # fall back to float coefficients with unit scale
        return self.with_scale(1.0), other.with_scale(1.0)

    def with_scale(self, scale: float) -> PolyVectorField:
        """Same field, coefficients re-expressed relative to ``scale`` (floats)."""
        if scale == self.scale:
            return self
        r = self.scale / scale
        return PolyVectorField(self.dimension, [poly_scale(p, r) for p in self._comps], scale)

    def __add__(self, other: PolyVectorField) -> PolyVectorField:
        self._check(other)
        a, b = self._same_scale(other)
        return PolyVectorField(a.dimension, [poly_add(p, q) for p, q in zip(a._comps, b._comps)], a.scale)

    def __sub__(self, other: PolyVectorField) -> PolyVectorField:
        self._check(other)
        a, b = self._same_scale(other)
        return PolyVectorField(a.dimension, [poly_add(p, q, -1) for p, q in zip(a._comps, b._comps)], a.scale)

    def __neg__(self) -> PolyVectorField:
        return PolyVectorField(self.dimension, [poly_scale(p, -1) for p in self._comps], self.scale)

    def __mul__(self, c: Number) -> PolyVectorField:
        return PolyVectorField(self.dimension, [poly_scale(p, c) for p in self._comps], self.scale)

    __rmul__ = __mul__

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, PolyVectorField):
            return NotImplemented
        if self.dimension != other.dimension:
            return False
        a, b = self._same_scale(other)
        return a._comps == b._comps

    __hash__ = None  # type: ignore[assignment]

    # evaluation ------------------------------------------------------------

    def _check_point(self, p) -> np.ndarray:
        x = np.asarray(p, dtype=float)
        if x.shape != (self.dimension,):
            raise DimensionError(f"point of shape {x.shape} for field of dimension {self.dimension}")
        return x

    def evaluate(self, p) -> np.ndarray:
        x = self._check_point(p)
        if self._eval is None:
            self._eval = _Compiled(enumerate(self._comps), self.dimension, self.scale)
        c = self._eval
        return np.bincount(c.rows, weights=c.terms(x), minlength=self.dimension)

    __call__ = evaluate

    def jacobian_at(self, p) -> np.ndarray:
        x = self._check_point(p)
        if self._jac is None:
            d = self.dimension
            polys = []
            for i, comp in enumerate(self._comps):
                for k in sorted(poly_vars(comp)):
                    polys.append((i * d + k, poly_diff(comp, k)))
            self._jac = _Compiled(polys, d, self.scale)
        c = self._jac
        flat = np.bincount(c.rows, weights=c.terms(x), minlength=self.dimension**2)
        return flat.reshape(self.dimension, self.dimension)

    def divergence(self) -> Polynomial:
        """Divergence as an exact polynomial (without the scale factor)."""
        out: Polynomial = {}
        for i, comp in enumerate(self._comps):
            out = poly_add(out, poly_diff(comp, i))
        return out

    def weighted_inner(self, weights: Sequence[Number]) -> Polynomial:
        """The polynomial ``sum_i w_i x_i P_i(x)``; zero iff ``sum w_i x_i^2`` is conserved."""
        out: Polynomial = {}
        for i, comp in enumerate(self._comps):
            if comp and weights[i]:
                out = poly_add(out, poly_mul({var(i): weights[i]}, comp))
        return out

    def lie_bracket(self, other: PolyVectorField) -> PolyVectorField:
        return lie_bracket(self, other)

    def lift(self) -> PolyVectorField:
        return lift(self)


def evaluate(field: PolyVectorField, p) -> np.ndarray:
    return field.evaluate(p)


def jacobian_at(field: PolyVectorField, p) -> np.ndarray:
    return field.jacobian_at(p)


def lie_bracket(f: PolyVectorField, g: PolyVectorField) -> PolyVectorField:
    """Exact bracket ``[f, g](x) = Dg(x) f(x) - Df(x) g(x)``."""
    if f.dimension != g.dimension:
        raise DimensionError(f"dimension mismatch: {f.dimension} vs {g.dimension}")
    fc, gc = f.components, g.components
    f_nz = {k for k, p in enumerate(fc) if p}
    g_nz = {k for k, p in enumerate(gc) if p}
    comps = []
    for i in range(f.dimension):
        acc: Polynomial = {}
        for k in poly_vars(gc[i]) & f_nz:
            acc = poly_add(acc, poly_mul(poly_diff(gc[i], k), fc[k]))
        for k in poly_vars(fc[i]) & g_nz:
            acc = poly_add(acc, poly_mul(poly_diff(fc[i], k), gc[k]), -1)
        comps.append(acc)
    return PolyVectorField(f.dimension, comps, f.scale * g.scale)


def lift_index(i: int, tangent: bool = False) -> int:
    """Position of ``x_i`` (or ``eta_i``) in the interleaved lifted layout."""
    return 2 * i + (1 if tangent else 0)


def lift(field: PolyVectorField) -> PolyVectorField:
    """Tangent lift ``(x, eta) -> (V(x), DV(x) eta)`` in layout (x_1, eta_1, ..., x_D, eta_D)."""
    d = field.dimension
    comps: list[Polynomial] = [dict() for _ in range(2 * d)]
    to_x = lambda i: 2 * i  # noqa: E731
    for i, comp in enumerate(field.components):
        if not comp:
            continue
        comps[2 * i] = {_remap(m, to_x): c for m, c in comp.items()}
        lin: Polynomial = {}
        for k in sorted(poly_vars(comp)):
            dk = poly_diff(comp, k)
            shifted = {_remap(m, to_x): c for m, c in dk.items()}
            lin = poly_add(lin, poly_mul(shifted, {var(2 * k + 1): 1}))
        comps[2 * i + 1] = lin
    return PolyVectorField(2 * d, comps, field.scale)


def interleave(x, eta) -> np.ndarray:
    """Pack (x, eta) into the lifted layout."""
    x = np.asarray(x, dtype=float)
    eta = np.asarray(eta, dtype=float)
    if x.shape != eta.shape:
        raise DimensionError("x and eta must have equal length")
    out = np.empty(2 * x.size)
    out[0::2] = x
    out[1::2] = eta
    return out
