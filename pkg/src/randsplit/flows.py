"""Flow maps of the splitting fields and their Jacobians.

Rotations are solved in closed form.  Euler tops are integrated with an
adaptive Dormand-Prince 5(4) pair, optionally together with their variational
equation so state and Jacobian come from one consistent integration.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from . import _kernels as K
from .models import FOUR_PI, TriadIndex, triad_top_specs

VARIANTS = ("aaa", "abb", "bab", "bba")


class IntegratorError(RuntimeError):
    """Raised when the adaptive integrator cannot meet its tolerance."""

    def __init__(self, message: str, residual: float):
        super().__init__(f"{message} (residual error norm {residual:.3e})")
        self.residual = residual


@dataclass(frozen=True)
class RotationFlowSpec:
    """``dx_p = c x_r x_q``, ``dx_q = -c x_r x_p``: rotation of (p, q) at rate ``c x_r``."""

    p: int
    q: int
    r: int
    c: float = 1.0

    def __post_init__(self):
        if self.p == self.q:
            raise ValueError("rotation plane needs two distinct coordinates")
        if self.r in (self.p, self.q):
            raise ValueError("rate coordinate must lie outside the rotation plane")


@dataclass(frozen=True)
class TriadFlowSpec:
    """Euler top ``dx_u0 = c0 x_u1 x_u2`` (cyclic) with ``c0 + c1 + c2 = 0``.

    ``exact`` optionally holds the couplings as rationals (any common positive
    multiple); a coupling that is exactly zero sends the flow to the closed-form
    rotation.  Without ``exact`` only literal float zeros dispatch.
    """

    indices: tuple[int, int, int]
    coefs: tuple[float, float, float]
    tolerance: float = 1e-10
    exact: tuple[Fraction, Fraction, Fraction] | None = None
    triad: TriadIndex | None = field(default=None, compare=False)
    variant: str | None = None

    def __post_init__(self):
        if not (0.0 < self.tolerance <= 1e-6):
            raise ValueError(f"tolerance must lie in (0, 1e-6], got {self.tolerance}")
        if len(set(self.indices)) != 3:
            raise ValueError("triad flow needs three distinct coordinates")

    @classmethod
    def from_triad(
        cls, triad: TriadIndex, variant: str | int, mode_index: dict, tolerance: float = 1e-10
    ) -> TriadFlowSpec:
        v = VARIANTS.index(variant) if isinstance(variant, str) else int(variant)
        ind, cs = triad_top_specs(triad, mode_index)[v]
        return cls(
            tuple(ind),
            tuple(float(c) / FOUR_PI for c in cs),
            tolerance,
            exact=tuple(Fraction(c) for c in cs),
            triad=triad,
            variant=VARIANTS[v],
        )

    def kernel_spec(self) -> tuple[int, tuple[int, int, int], tuple[float, float, float]]:
        zero = self.exact if self.exact is not None else self.coefs
        c = self.coefs
        u = self.indices
        if zero[2] == 0:
            return K.ROTATION, (u[0], u[1], u[2]), (c[0], 0.0, 0.0)
        if zero[0] == 0:
            return K.ROTATION, (u[1], u[2], u[0]), (c[1], 0.0, 0.0)
        if zero[1] == 0:
            return K.ROTATION, (u[0], u[2], u[1]), (c[0], 0.0, 0.0)
        return K.TOP, u, c

    def as_rotation(self) -> RotationFlowSpec | None:
        kind, ind, c = self.kernel_spec()
        if kind != K.ROTATION:
            return None
        return RotationFlowSpec(ind[0], ind[1], ind[2], c[0])


def _as_state(x) -> np.ndarray:
    x = np.array(x, dtype=float, copy=True)
    if x.ndim != 1:
        raise ValueError("state must be a vector")
    return x


# ---------------------------------------------------------------------------
# rotations


def rotation_flow(x, spec: RotationFlowSpec, t: float) -> np.ndarray:
    """Rotate ``(x_p, x_q)`` clockwise by ``c x_r t``; other coordinates untouched."""
    y = _as_state(x)
    K.rotation_apply(y, spec.p, spec.q, spec.r, float(spec.c), float(t))
    return y


def rotation_flow_jacobian(x, spec: RotationFlowSpec, t: float) -> np.ndarray:
    """Closed-form Jacobian: rotation block on (p, q) plus a shear column at r."""
    x = np.asarray(x, dtype=float)
    y = rotation_flow(x, spec, t)
    theta = spec.c * x[spec.r] * t
    cs, sn = math.cos(theta), math.sin(theta)
    J = np.eye(x.shape[0])
    p, q, r = spec.p, spec.q, spec.r
    J[p, p], J[p, q] = cs, sn
    J[q, p], J[q, q] = -sn, cs
    J[p, r] = spec.c * t * y[q]
    J[q, r] = -spec.c * t * y[p]
    return J


def shear_times(x, spec: RotationFlowSpec, m: int) -> float:
    """Time ``2 pi m / (c x_r)`` after which the rotation angle is ``2 pi m``."""
    rate = spec.c * float(np.asarray(x)[spec.r])
    if rate == 0.0:
        raise ValueError("shear identity needs a nonzero rate coordinate")
    return 2.0 * math.pi * m / rate


def shear_matrix(x, spec: RotationFlowSpec) -> np.ndarray:
    """``A`` with the single nonzero column ``(2 pi x_q / x_r, -2 pi x_p / x_r)`` at r."""
    x = np.asarray(x, dtype=float)
    if x[spec.r] == 0.0:
        raise ValueError("shear identity needs a nonzero rate coordinate")
    A = np.zeros((x.shape[0], x.shape[0]))
    A[spec.p, spec.r] = 2.0 * math.pi * x[spec.q] / x[spec.r]
    A[spec.q, spec.r] = -2.0 * math.pi * x[spec.p] / x[spec.r]
    return A


def shear_deviation(x, spec: RotationFlowSpec, m_max: int = 10) -> list[tuple[int, float, float]]:
    """Per ``m``: max entry deviation of the flow Jacobian at ``t_m``, and of the
    ``m``-fold product of one-period Jacobians along the (periodic) orbit, from ``eye + m A``."""
    x = np.asarray(x, dtype=float)
    A = shear_matrix(x, spec)
    eye = np.eye(x.size)
    t1 = shear_times(x, spec, 1)
    out = [(0, float(np.max(np.abs(rotation_flow_jacobian(x, spec, 0.0) - eye))), 0.0)]
    P = eye.copy()
    y = x.copy()
    for m in range(1, m_max + 1):
        J = rotation_flow_jacobian(x, spec, shear_times(x, spec, m))
        P = rotation_flow_jacobian(y, spec, t1) @ P
        y = rotation_flow(y, spec, t1)
        target = eye + m * A
        out.append((m, float(np.max(np.abs(J - target))), float(np.max(np.abs(P - target)))))
    return out


# ---------------------------------------------------------------------------
# Euler tops


def _run_top(x: np.ndarray, spec: TriadFlowSpec, t: float, with_jac: bool):
    kind, ind, c = spec.kernel_spec()
    D = x.shape[0]
    if kind == K.ROTATION:
        rot = RotationFlowSpec(ind[0], ind[1], ind[2], c[0])
        y = rotation_flow(x, rot, t)
        return y, (rotation_flow_jacobian(x, rot, t) if with_jac else None)
    buf = np.zeros(12)
    buf[:3] = x[list(ind)]
    ncomp = 3
    if with_jac:
        ncomp = 12
        buf[3:] = np.eye(3).ravel()
    work = np.empty((9, 12))
    status, err = K.top_integrate(buf, c[0], c[1], c[2], float(t), spec.tolerance, ncomp, work)
    if status != K.OK:
        raise IntegratorError("Euler top integration hit its step-size floor", err)
    y = x.copy()
    y[list(ind)] = buf[:3]
    if not with_jac:
        return y, None
    J = np.eye(D)
    J[np.ix_(ind, ind)] = buf[3:].reshape(3, 3)
    return y, J


def triad_flow(q, spec: TriadFlowSpec, t: float) -> np.ndarray:
    y, _ = _run_top(_as_state(q), spec, t, False)
    return y


def triad_flow_with_jacobian(q, spec: TriadFlowSpec, t: float) -> tuple[np.ndarray, np.ndarray]:
    """State and full Jacobian from the joint 3 + 9 variational integration."""
    y, J = _run_top(_as_state(q), spec, t, True)
    return y, J


def field_flow(x, kind: int, idx, coef, t: float, tol: float = 1e-10, with_jac: bool = False):
    """Flow one compiled model field (row of ``model.kinds/idx/coef``)."""
    x = _as_state(x)
    i0, i1, i2 = (int(v) for v in idx)
    if kind == K.ROTATION:
        spec = RotationFlowSpec(i0, i1, i2, float(coef[0]))
        y = rotation_flow(x, spec, t)
        return (y, rotation_flow_jacobian(x, spec, t)) if with_jac else y
    spec = TriadFlowSpec((i0, i1, i2), tuple(float(c) for c in coef), tol)
    y, J = _run_top(x, spec, t, with_jac)
    return (y, J) if with_jac else y
