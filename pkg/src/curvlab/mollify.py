"""Metric smoothing by periodic kernel convolution.

The unit torus carries a single global chart, so mollification is plain
componentwise convolution with a separable periodic Gaussian, truncated at
four widths per axis and renormalized to unit discrete mass. Unit mass makes
constants exact fixed points and preserves componentwise means; positivity
of the weights makes the smoothing a nodewise max-norm contraction and keeps
SPD fields SPD (a convex combination of SPD matrices). The SPD invariant is
still asserted at runtime as a guard against future kernel changes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.ndimage import convolve1d

from . import geometry
from .distributional import TestFunction, pair_scalar_curvature
from .errors import CannotAchieveFairness, EmptyFamily, KernelTooWide
from .grid import GridSpec, MetricField

MAX_DELTA = 1.0 / 8.0


@dataclass(frozen=True)
class MollifyParams:
    """Kernel width in torus lengths; support is the ball of radius 4*delta."""

    delta: float

    def __post_init__(self):
        if not self.delta > 0.0:
            raise ValueError("delta must be positive")
        if self.delta >= MAX_DELTA:
            raise KernelTooWide(
                f"delta={self.delta} >= 1/8: kernel support would wrap the torus"
            )


@dataclass(frozen=True)
class ContinuityReport:
    """Empirical continuity modulus of the pairing under mollification."""

    deltas: list[float]
    moduli: list[float]


def kernel_weights(grid: GridSpec, delta: float) -> np.ndarray:
    """1D truncated periodic Gaussian, unit discrete mass."""
    dx = grid.spacing
    radius = int(np.floor(4.0 * delta / dx))
    offsets = np.arange(-radius, radius + 1)
    w = np.exp(-((offsets * dx) ** 2) / (2.0 * delta**2))
    return w / w.sum()


def mollify(g: MetricField, params: MollifyParams) -> MetricField:
    w = kernel_weights(g.grid, params.delta)
    vals = g.values
    for a in range(g.grid.dim):
        vals = convolve1d(vals, w, axis=a, mode="wrap")
    out = MetricField(g.grid, vals, contravariant=g.contravariant)
    out.require_spd()
    return out


def fair_background_search(
    g: MetricField, delta_target: float, start_width: float = 0.12
) -> tuple[MetricField, float, list[tuple[float, float]]]:
    """Mollify with shrinking widths until the smoothed field is fair to g.

    Returns (background, width, transcript of (width, fairness) tried).
    Deterministic: the schedule halves from start_width and stops below 2*dx.
    """
    if not 0.0 < delta_target < 1.0:
        raise ValueError("delta_target must lie in (0, 1)")
    g.require_spd()
    transcript: list[tuple[float, float]] = []
    width = start_width
    while width >= 2.0 * g.grid.spacing:
        cand = mollify(g, MollifyParams(width))
        fair = geometry.fairness(g, cand)
        transcript.append((width, fair))
        if fair <= 1.0 + delta_target:
            return cand, width, transcript
        width *= 0.5
    raise CannotAchieveFairness(
        f"no width down to 2*dx={2 * g.grid.spacing} reached fairness "
        f"{1 + delta_target}; tried {transcript}"
    )


def fair_background(g: MetricField, delta_target: float) -> MetricField:
    """Smooth background h with fairness(g, h) <= 1 + delta_target."""
    cand, _, _ = fair_background_search(g, delta_target)
    return cand


def continuity_probe(
    g: MetricField,
    h: MetricField,
    deltas: list[float],
    family: list[TestFunction],
) -> ContinuityReport:
    """Normalized pairing drift |<R_{g_delta} - R_g, phi>| / ||phi|| per width."""
    if not family:
        raise EmptyFamily("continuity probe needs test functions")
    base = [pair_scalar_curvature(g, h, phi) for phi in family]
    moduli = []
    for delta in deltas:
        g_delta = mollify(g, MollifyParams(delta))
        worst = 0.0
        for phi, ref in zip(family, base):
            rep = pair_scalar_curvature(g_delta, h, phi)
            worst = max(worst, abs(rep.value - ref.value) / ref.test_norm)
        moduli.append(worst)
    return ContinuityReport(deltas=list(deltas), moduli=moduli)
