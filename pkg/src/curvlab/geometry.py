"""Finite-difference tensor calculus on flat periodic grids.

All first derivatives are centered second-order differences; second
derivatives are composed first differences, never a one-shot wide stencil.
On a periodic grid this makes two discrete identities exact to round-off,

    sum_m (D_i f)_m = 0        (telescoping)
    sum_m f_m (D_i w)_m = -sum_m (D_i f)_m w_m   (summation by parts)

and those identities carry the monotonicity bookkeeping of the flow
monitors, so the stencil choice is load-bearing, not stylistic.

Index conventions: gamma[..., k, i, j] is the connection coefficient with
upper index k; derivative stacks put the derivative axis first among the
component axes, e.g. dg[..., d, i, j] = D_d g_ij.
"""

from __future__ import annotations

import math

import numpy as np

from ._kernels import backend
from .errors import BadExponent, SingularMetric
from .grid import (
    LAMBDA_FLOOR,
    ChristoffelField,
    CurvatureBundle,
    GridSpec,
    MetricField,
    ScalarField,
    SymTensorField,
    VectorField,
    grid_sum,
)


def diff(values: np.ndarray, axis: int, dx: float) -> np.ndarray:
    """Centered periodic difference along a grid axis."""
    return (np.roll(values, -1, axis=axis) - np.roll(values, 1, axis=axis)) / (2.0 * dx)


def grad_stack(values: np.ndarray, grid: GridSpec) -> np.ndarray:
    """Stack D_d along every grid axis; new axis sits first among components."""
    dx = grid.spacing
    return np.stack([diff(values, a, dx) for a in range(grid.dim)], axis=grid.dim)


def _flat(values: np.ndarray, grid: GridSpec) -> np.ndarray:
    comp = values.shape[grid.dim:]
    return np.ascontiguousarray(values).reshape((grid.num_nodes,) + comp)


def _unflat(values: np.ndarray, grid: GridSpec) -> np.ndarray:
    return values.reshape(grid.shape + values.shape[1:])


def _check_pair(g: MetricField, h: MetricField | None) -> None:
    g.require_spd()
    if h is not None:
        if h.grid != g.grid:
            raise ValueError("fields must share a grid")
        h.require_spd()


# ---------------------------------------------------------------------------
# covariant derivatives against a background connection


def covd_scalar(values: np.ndarray, grid: GridSpec) -> np.ndarray:
    return grad_stack(values, grid)


def covd_vector(values: np.ndarray, grid: GridSpec, gamma: np.ndarray | None) -> np.ndarray:
    out = grad_stack(values, grid)
    if gamma is not None and gamma.any():
        out = out + np.einsum("...idm,...m->...di", gamma, values)
    return out


def covd_sym2(full: np.ndarray, grid: GridSpec, gamma: np.ndarray | None) -> np.ndarray:
    out = grad_stack(full, grid)
    if gamma is not None and gamma.any():
        out = out - np.einsum("...mdi,...mj->...dij", gamma, full)
        out = out - np.einsum("...mdj,...im->...dij", gamma, full)
    return out


def covd_3low(vals: np.ndarray, grid: GridSpec, gamma: np.ndarray | None) -> np.ndarray:
    out = grad_stack(vals, grid)
    if gamma is not None and gamma.any():
        out = out - np.einsum("...mdp,...mqr->...dpqr", gamma, vals)
        out = out - np.einsum("...mdq,...pmr->...dpqr", gamma, vals)
        out = out - np.einsum("...mdr,...pqm->...dpqr", gamma, vals)
    return out


# ---------------------------------------------------------------------------
# connection and curvature


def invert_metric(g: MetricField) -> MetricField:
    """Nodewise matrix inverse; output carries the flipped variance flag."""
    g.require_spd()
    inv = np.linalg.inv(g.matrices)
    return MetricField.from_matrices(g.grid, inv, contravariant=not g.contravariant)


def _christoffel_values(
    gfull: np.ndarray,
    ginv: np.ndarray,
    grid: GridSpec,
    gamma_bg: np.ndarray | None,
) -> np.ndarray:
    covd = covd_sym2(gfull, grid, gamma_bg)
    s = covd + covd.swapaxes(-3, -2) - np.moveaxis(covd, -3, -1)
    gam = backend.christoffel(_flat(ginv, grid), _flat(s, grid))
    return _unflat(gam, grid)


def christoffel(g: MetricField, h: MetricField | None = None) -> ChristoffelField:
    """Connection coefficients of g relative to the background connection of h.

    With h absent (or flat in these coordinates) the background derivative is
    the plain coordinate difference and the result is the ordinary coordinate
    Christoffel field of g; for a general smooth h it is the difference
    tensor between the two connections.
    """
    _check_pair(g, h)
    gfull = g.matrices
    ginv = np.linalg.inv(gfull)
    gamma_bg = None
    if h is not None:
        hfull = h.matrices
        gamma_bg = _christoffel_values(hfull, np.linalg.inv(hfull), g.grid, None)
    return ChristoffelField(g.grid, _christoffel_values(gfull, ginv, g.grid, gamma_bg))


def curvature(g: MetricField, h: MetricField | None = None) -> CurvatureBundle:
    """Ricci tensor, scalar curvature and curvature monitors of g.

    Assembled from the coordinate Christoffel field,
    R_ij = D_k gamma^k_ij - D_i gamma^k_kj + quadratic terms, so the result
    does not depend on h (which is only validated for grid compatibility).
    """
    _check_pair(g, h)
    grid = g.grid
    gfull = g.matrices
    ginv = np.linalg.inv(gfull)
    gam = _christoffel_values(gfull, ginv, grid, None)
    dgam = grad_stack(gam, grid)

    gam_f = _flat(gam, grid)
    t1 = np.einsum("...kkij->...ij", dgam)
    t2 = np.einsum("...ikkj->...ij", dgam)
    quad = _unflat(backend.ricci_quadratic(gam_f), grid)
    ric_full = t1 - t2 + quad
    ric_full = 0.5 * (ric_full + ric_full.swapaxes(-1, -2))

    scalar = np.einsum("...ij,...ij->...", ginv, ric_full)
    norm_sq = _unflat(
        backend.metric_dot_sym(_flat(ginv, grid), _flat(ric_full, grid), _flat(ric_full, grid)),
        grid,
    )
    proxy = np.sqrt(_unflat(backend.riemann_sq(gam_f, _flat(dgam, grid)), grid))

    return CurvatureBundle(
        ricci=SymTensorField.from_matrices(grid, ric_full),
        scalar=ScalarField(grid, scalar),
        ricci_norm_sq=ScalarField(grid, norm_sq),
        curv_proxy=ScalarField(grid, proxy),
    )


# ---------------------------------------------------------------------------
# measures and integrals


def volume_element(g: MetricField, h: MetricField) -> ScalarField:
    """Nodewise density sqrt(det g / det h)."""
    _check_pair(g, h)
    vals = np.sqrt(np.linalg.det(g.matrices) / np.linalg.det(h.matrices))
    return ScalarField(g.grid, vals)


def integrate(f: ScalarField | np.ndarray, g: MetricField) -> float:
    """Quadrature sum f * sqrt(det g) * dx^n in the fixed reduction order.

    Exact on constants over the flat metric and, by periodic-trapezoid
    exactness, on trigonometric polynomials below the Nyquist band.
    """
    vals = f.values if isinstance(f, ScalarField) else np.asarray(f)
    grid = g.grid
    dens = np.sqrt(np.linalg.det(g.matrices))
    return grid_sum(vals * dens) * grid.spacing**grid.dim


def total_volume(g: MetricField) -> float:
    return integrate(np.ones(g.grid.shape), g)


# ---------------------------------------------------------------------------
# norms against a smooth background


def _pointwise_norm_sq(vals, kind, hfull, hinv):
    if kind == "scalar":
        return vals * vals
    if kind == "vector":
        return np.einsum("...ij,...i,...j->...", hfull, vals, vals)
    if kind == "sym2":
        return np.einsum("...ia,...jb,...ij,...ab->...", hinv, hinv, vals, vals)
    raise ValueError(kind)


def _pointwise_grad_norm_sq(cov, kind, hfull, hinv):
    if kind == "scalar":
        return np.einsum("...dc,...d,...c->...", hinv, cov, cov)
    if kind == "vector":
        return np.einsum("...dc,...ia,...di,...ca->...", hinv, hfull, cov, cov)
    if kind == "sym2":
        return np.einsum(
            "...da,...ib,...jc,...dij,...abc->...", hinv, hinv, hinv, cov, cov
        )
    raise ValueError(kind)


def _field_kind(T) -> tuple[str, np.ndarray]:
    if isinstance(T, ScalarField):
        return "scalar", T.values
    if isinstance(T, VectorField):
        return "vector", T.values
    if isinstance(T, SymTensorField):
        return "sym2", T.matrices
    raise TypeError(f"unsupported field type {type(T).__name__}")


def sobolev_norm(
    T,
    h: MetricField,
    k: int = 0,
    p: float = 2.0,
    allow_low_p: bool = False,
) -> float:
    """W^{k,p} norm of a tensor field against the smooth background h.

    sum_{s<=k} ( integral |nabla_h^s T|_h^p dmu_h )^{1/p}, with p = inf
    evaluated as the nodewise max. Exponents p <= n sit outside the metric
    regime this package targets and need allow_low_p=True (used internally
    for the dual exponents of test functions).
    """
    if k not in (0, 1):
        raise ValueError("k must be 0 or 1")
    n = h.grid.dim
    if not allow_low_p and not p > n:
        raise BadExponent(f"p={p} requires p > n={n} (or allow_low_p=True)")
    h.require_spd()
    kind, vals = _field_kind(T)
    if T.grid != h.grid:
        raise ValueError("fields must share a grid")

    grid = h.grid
    hfull = h.matrices
    hinv = np.linalg.inv(hfull)
    dens = np.sqrt(np.linalg.det(hfull))

    def lp(norm_sq: np.ndarray) -> float:
        norm_sq = np.maximum(norm_sq, 0.0)
        if math.isinf(p):
            return float(np.sqrt(norm_sq.max()))
        s = grid_sum(norm_sq ** (p / 2.0) * dens) * grid.spacing**n
        return float(s ** (1.0 / p))

    total = lp(_pointwise_norm_sq(vals, kind, hfull, hinv))
    if k == 1:
        gamma_bg = _christoffel_values(hfull, hinv, grid, None)
        if kind == "scalar":
            cov = covd_scalar(vals, grid)
        elif kind == "vector":
            cov = covd_vector(vals, grid, gamma_bg)
        else:
            cov = covd_sym2(vals, grid, gamma_bg)
        total += lp(_pointwise_grad_norm_sq(cov, kind, hfull, hinv))
    return total


def gradient_norm_fields(
    T: SymTensorField, h: MetricField
) -> tuple[ScalarField, ScalarField]:
    """Pointwise |nabla_h T|_h and |nabla_h^2 T|_h for a symmetric 2-tensor."""
    grid = h.grid
    hfull = h.matrices
    hinv = np.linalg.inv(hfull)
    gamma_bg = _christoffel_values(hfull, hinv, grid, None)
    cov1 = covd_sym2(T.matrices, grid, gamma_bg)
    n1 = _pointwise_grad_norm_sq(cov1, "sym2", hfull, hinv)
    cov2 = covd_3low(cov1, grid, gamma_bg)
    n2 = np.einsum(
        "...da,...pb,...qc,...re,...dpqr,...abce->...",
        hinv, hinv, hinv, hinv, cov2, cov2,
    )
    return (
        ScalarField(grid, np.sqrt(np.maximum(n1, 0.0))),
        ScalarField(grid, np.sqrt(np.maximum(n2, 0.0))),
    )


# ---------------------------------------------------------------------------
# comparisons and pointwise inequalities


def fairness(g: MetricField, h: MetricField) -> float:
    """Smallest 1+delta with (1+delta)^{-1} h <= g <= (1+delta) h nodewise."""
    _check_pair(g, h)
    w, q = np.linalg.eigh(h.matrices)
    if w.min() <= 0:
        raise SingularMetric("background not positive definite")
    h_invsqrt = np.einsum("...ik,...k,...jk->...ij", q, 1.0 / np.sqrt(w), q)
    pencil = h_invsqrt @ g.matrices @ h_invsqrt
    lam = np.linalg.eigvalsh(pencil)
    lo = float(lam[..., 0].min())
    hi = float(lam[..., -1].max())
    if lo <= 0:
        raise SingularMetric("metric not positive definite against background")
    return max(hi, 1.0 / lo)


def einstein_defect(g: MetricField, h: MetricField | None = None) -> float:
    """Sup over nodes of |Ric - (R/n) g|_g, the trace-free Ricci size."""
    bundle = curvature(g, h)
    grid = g.grid
    n = grid.dim
    gfull = g.matrices
    ginv = np.linalg.inv(gfull)
    e = bundle.ricci.matrices - (bundle.scalar.values / n)[..., None, None] * gfull
    sq = backend.metric_dot_sym(_flat(ginv, grid), _flat(e, grid), _flat(e, grid))
    return float(np.sqrt(np.maximum(sq, 0.0)).max())


def cauchy_defect(g: MetricField, h: MetricField | None = None) -> ScalarField:
    """Pointwise 2|Ric|_g^2 - (2/n) R^2; nonnegative up to round-off.

    The inequality is algebra on the discrete (Ric, R) pair itself (R being
    the trace of the same Ric), so it holds regardless of stencil error.
    """
    bundle = curvature(g, h)
    n = g.grid.dim
    vals = 2.0 * bundle.ricci_norm_sq.values - (2.0 / n) * bundle.scalar.values**2
    return ScalarField(g.grid, vals)


# ---------------------------------------------------------------------------
# divergence-form Laplacian (the summation-by-parts workhorse)


def laplace_beltrami(
    fvals: np.ndarray, ginv: np.ndarray, sqrt_det: np.ndarray, grid: GridSpec
) -> np.ndarray:
    """(1/sqrt det g) D_i ( sqrt det g g^{ij} D_j f ) with composed differences."""
    dx = grid.spacing
    grad = grad_stack(fvals, grid)
    flux = sqrt_det[..., None] * np.einsum("...ij,...j->...i", ginv, grad)
    div = np.zeros_like(fvals)
    for a in range(grid.dim):
        div = div + diff(flux[..., a], a, dx)
    return div / sqrt_det
