"""Lyapunov spectrum estimates from cocycle log-stretch sums, with batch-mean errors."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .engine import (
    DEFAULT_TOL,
    Monitors,
    SeedConfig,
    TimeDistribution,
    TrajectoryRecord,
    run_trajectory,
)
from .models import SplittingModel

DEFAULT_BATCHES = 50


def default_burn_in(m: int) -> int:
    """1% of ``m`` with a floor of 1000 cycles, capped at a tenth of the run."""
    return int(min(max(m // 100, 1000), m // 10))


@dataclass
class LyapunovEstimate:
    """Exponents per cycle, descending, with batch-mean standard errors.

    ``stderr`` is a diagnostic from non-overlapping batch means, not a rigorous
    confidence bound.  ``per_time`` divides by the mean cycle duration ``h * n``.
    """

    exponents: np.ndarray
    stderr: np.ndarray
    m: int
    burn_in: int
    h: float
    n_fields: int
    batches: int
    drift_max: np.ndarray
    record: TrajectoryRecord | None = None
    column_order: np.ndarray | None = None

    @property
    def k(self) -> int:
        return self.exponents.size

    @property
    def cycle_time(self) -> float:
        return self.h * self.n_fields

    @property
    def per_time(self) -> np.ndarray:
        if self.cycle_time == 0.0:
            return np.zeros_like(self.exponents)
        return self.exponents / self.cycle_time

    @property
    def stderr_per_time(self) -> np.ndarray:
        if self.cycle_time == 0.0:
            return np.zeros_like(self.stderr)
        return self.stderr / self.cycle_time

    @property
    def lambda_sum(self) -> float:
        return float(np.sum(self.exponents))

    @property
    def top(self) -> float:
        return float(self.exponents[0])


def _reduce(rec: TrajectoryRecord, h: float, n_fields: int, batches: int) -> LyapunovEstimate:
    M = rec.m - rec.burn_in
    post = rec.batch_sums.sum(axis=0)
    exps = post / M
    if batches > 1:
        means = rec.batch_sums / rec.batch_lengths[:, None]
        se = means.std(axis=0, ddof=1) / np.sqrt(batches)
    else:
        se = np.full(exps.shape, np.nan)
    # QR ordering is already descending in the limit; enforce it for short runs
    order = np.argsort(-exps, kind="stable")
    return LyapunovEstimate(exps[order], se[order], rec.m, rec.burn_in, h, n_fields, batches,
                            rec.drift_max, rec, order)


def estimate_spectrum(
    model: SplittingModel,
    dist: TimeDistribution,
    seed: SeedConfig,
    m: int,
    k: int = 1,
    burn_in: int | None = None,
    batches: int = DEFAULT_BATCHES,
    tol: float = DEFAULT_TOL,
    monitors: Monitors | None = None,
    x0=None,
    frame0=None,
    thin: int = 0,
    stride: int = 1,
) -> LyapunovEstimate:
    """Leading ``k`` exponents per cycle from one trajectory of ``m`` cycles."""
    if not (1 <= k <= model.tangent_dimension):
        raise ValueError(f"k must lie in [1, {model.tangent_dimension}], got {k}")
    burn_in = default_burn_in(m) if burn_in is None else int(burn_in)
    if m - burn_in < batches or batches < 1:
        raise ValueError(f"m={m} with burn-in {burn_in} is too short for {batches} batches")
    if dist.h == 0.0:
        # identity chain: the cocycle is the identity, exponents are exactly zero
        z = np.zeros(k)
        return LyapunovEstimate(z, z.copy(), m, burn_in, 0.0, model.n_fields, batches,
                                np.zeros(model.weights.shape[0]))
    rec = run_trajectory(model, dist, seed, m, k=k, monitors=monitors, x0=x0, frame0=frame0,
                         burn_in=burn_in, batches=batches, thin=thin, tol=tol, stride=stride)
    return _reduce(rec, dist.h, model.n_fields, batches)


def normal_log_factor(model: SplittingModel, x0, x1) -> float:
    """``log sqrt(Gram(x0) / Gram(x1))`` of the conserved gradients.

    The flows preserve the conserved quantities, so the cocycle maps the
    gradient frame at ``x1`` back to the one at ``x0``; this is the log-volume
    change of the cocycle normal to the level set.
    """
    def half_logdet(x):
        G = model.constraint_gradients(x)
        return 0.5 * np.linalg.slogdet(G @ G.T)[1]

    return float(half_logdet(x0) - half_logdet(x1))


@dataclass
class SumEstimate:
    """Full-frame log-volume rates: tangent-frame sum and ambient determinant."""

    tangent: float
    ambient: float
    m: int
    tangent_total: float
    ambient_total: float


def estimate_sum(
    model: SplittingModel,
    dist: TimeDistribution,
    seed: SeedConfig,
    m: int,
    tol: float = DEFAULT_TOL,
    x0=None,
    detail: bool = False,
) -> float | SumEstimate:
    """Full-frame ``lambda_Sigma`` per cycle: sum of all tangent log-stretches over ``m``.

    With ``detail`` also return the ambient log-determinant rate, which adds
    the normal-bundle factor of the conserved gradients.
    """
    if dist.h == 0.0:
        return SumEstimate(0.0, 0.0, m, 0.0, 0.0) if detail else 0.0
    rec = run_trajectory(model, dist, seed, m, k=model.tangent_dimension, x0=x0, tol=tol)
    tot = float(rec.total_acc.sum())
    if not detail:
        return tot / m
    amb = tot + normal_log_factor(model, rec.x_initial, rec.x_final)
    return SumEstimate(tot / m, amb / m, m, tot, amb)


@dataclass
class ConvergenceTrace:
    steps: np.ndarray
    estimates: np.ndarray
    burn_in: int
    final: LyapunovEstimate


def convergence_trace(
    model: SplittingModel,
    dist: TimeDistribution,
    seed: SeedConfig,
    m: int,
    stride: int,
    k: int = 1,
    burn_in: int | None = None,
    batches: int = DEFAULT_BATCHES,
    tol: float = DEFAULT_TOL,
    x0=None,
    monitors: Monitors | None = None,
) -> ConvergenceTrace:
    """Running estimates at every multiple of ``stride`` past the burn-in, ending at ``m``."""
    if stride < 1:
        raise ValueError("stride must be at least 1")
    est = estimate_spectrum(model, dist, seed, m, k=k, burn_in=burn_in, batches=batches, tol=tol,
                            x0=x0, thin=stride, monitors=monitors)
    rec = est.record
    b = rec.burn_in
    sel = rec.trace_steps > b
    steps = rec.trace_steps[sel]
    burn_acc = rec.burn_acc
    vals = (rec.trace_acc[sel] - burn_acc) / (steps - b)[:, None]
    vals = vals[:, est.column_order]
    return ConvergenceTrace(steps, vals, b, est)
