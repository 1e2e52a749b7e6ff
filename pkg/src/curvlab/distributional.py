"""Weak-form scalar curvature for low-regularity metrics.

For a metric g sampled on the grid and a smooth background h, the scalar
curvature acts on a smooth test function phi through first derivatives of g
only:

    <R_g, phi> = integral( -V . D(phi * rho) + F * phi * rho ) dmu_h,

with rho = dmu_g/dmu_h, V a vector field and F a function built from the
connection difference tensor of (g, h). For smooth g this equals
integral(R phi dmu_g) up to stencil error, and the value does not depend on
which fair background h is used; both statements are exercised by the
consistency operations below.

The product phi * rho is multiplied nodewise first and differenced second:
the weak form owns the derivative, the possibly rough density never gets
differentiated alone.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import geometry
from ._kernels import backend
from .errors import CurvlabError, EmptyFamily
from .grid import GridSpec, MetricField, ScalarField, VectorField, grid_sum

TOL_CERT = 1e-6
FAMILY_VERSION = 1

_V_CROSSCHECK_TOL = 1e-10


@dataclass(frozen=True, eq=False)
class TestFunction:
    """Band-limited smooth test data; frequencies above N/4 are rejected."""

    field: ScalarField
    nonnegative: bool = True

    def __post_init__(self):
        if self.nonnegative and self.field.values.min() < 0.0:
            raise ValueError("nonnegative test function has negative values")
        _check_band_limit(self.field)

    @property
    def grid(self) -> GridSpec:
        return self.field.grid


def _check_band_limit(field: ScalarField, rel_tol: float = 1e-8) -> None:
    grid = field.grid
    n_cut = grid.resolution // 4
    spec = np.fft.fftn(field.values)
    freqs = np.fft.fftfreq(grid.resolution, d=1.0 / grid.resolution)
    outside = np.zeros(grid.shape, dtype=bool)
    for a in range(grid.dim):
        shape = [1] * grid.dim
        shape[a] = grid.resolution
        outside |= np.abs(freqs).reshape(shape) > n_cut
    total = float(np.sum(np.abs(spec) ** 2))
    if total == 0.0:
        return
    leaked = float(np.sum(np.abs(spec[outside]) ** 2))
    if np.sqrt(leaked / total) > rel_tol:
        raise ValueError(
            f"test function carries energy above frequency N/4 = {n_cut}"
        )


@dataclass(frozen=True)
class PairingReport:
    """Weak curvature pairing split into its vector and scalar parts."""

    value: float
    v_term: float
    f_term: float
    test_norm: float  # W^{1, n/(n-1)} norm of the test function against h


@dataclass(frozen=True)
class LowerBoundCertificate:
    bound: float
    worst_defect: float
    family_size: int
    tolerance: float = TOL_CERT

    @property
    def passes(self) -> bool:
        return self.worst_defect >= -self.tolerance


# ---------------------------------------------------------------------------
# the V / F decomposition


def _weak_fields(g: MetricField, h: MetricField):
    """V and F value arrays plus the shared geometric intermediates."""
    geometry._check_pair(g, h)
    grid = g.grid
    gfull = g.matrices
    ginv = np.linalg.inv(gfull)
    hfull = h.matrices
    gamma_bg = geometry._christoffel_values(hfull, np.linalg.inv(hfull), grid, None)
    if not gamma_bg.any():
        gamma_bg = None

    covd_g = geometry.covd_sym2(gfull, grid, gamma_bg)
    s = covd_g + covd_g.swapaxes(-3, -2) - np.moveaxis(covd_g, -3, -1)
    gam = geometry._unflat(
        backend.christoffel(geometry._flat(ginv, grid), geometry._flat(s, grid)), grid
    )

    # background-covariant derivative of the inverse metric
    dginv = geometry.grad_stack(ginv, grid)
    if gamma_bg is not None:
        dginv = dginv + np.einsum("...ikm,...mj->...kij", gamma_bg, ginv)
        dginv = dginv + np.einsum("...jkm,...im->...kij", gamma_bg, ginv)

    v, f = backend.vf_terms(
        geometry._flat(ginv, grid),
        geometry._flat(dginv, grid),
        geometry._flat(gam, grid),
    )
    v = geometry._unflat(v, grid)
    f = geometry._unflat(f, grid)

    # the contracted form of V must reproduce the assembled one: this is a
    # multilinear identity on (ginv, covd_g), so any gap flags a bug
    v_alt = np.einsum("...ij,...kl,...jil->...k", ginv, ginv, covd_g)
    v_alt -= np.einsum("...ij,...kl,...lij->...k", ginv, ginv, covd_g)
    gap = float(np.max(np.abs(v - v_alt)))
    if gap > _V_CROSSCHECK_TOL:
        raise CurvlabError(f"V-field cross-check failed: forms differ by {gap:.3e}")

    if gamma_bg is not None:
        ric_h = geometry.curvature(h).ricci.matrices
        f = f + np.einsum("...ij,...ij->...", ginv, ric_h)

    return v, f, gfull, hfull


def v_field(g: MetricField, h: MetricField) -> VectorField:
    v, _, _, _ = _weak_fields(g, h)
    return VectorField(g.grid, v)


def f_scalar(g: MetricField, h: MetricField) -> ScalarField:
    _, f, _, _ = _weak_fields(g, h)
    return ScalarField(g.grid, f)


# ---------------------------------------------------------------------------
# pairings


def pair_scalar_curvature(
    g: MetricField, h: MetricField, phi: TestFunction
) -> PairingReport:
    if phi.grid != g.grid:
        raise ValueError("test function grid mismatch")
    grid = g.grid
    dx = grid.spacing
    v, f, gfull, hfull = _weak_fields(g, h)

    det_h = np.linalg.det(hfull)
    rho = np.sqrt(np.linalg.det(gfull) / det_h)
    dens_h = np.sqrt(det_h)
    w = phi.field.values * rho

    v_integrand = np.zeros(grid.shape)
    for a in range(grid.dim):
        v_integrand -= v[..., a] * geometry.diff(w, a, dx)
    v_term = grid_sum(v_integrand * dens_h) * dx**grid.dim
    f_term = grid_sum(f * w * dens_h) * dx**grid.dim

    n = grid.dim
    test_norm = geometry.sobolev_norm(
        phi.field, h, k=1, p=n / (n - 1.0), allow_low_p=True
    )
    return PairingReport(
        value=v_term + f_term, v_term=v_term, f_term=f_term, test_norm=test_norm
    )


def smooth_consistency_gap(g: MetricField, h: MetricField, phi: TestFunction) -> float:
    """|<R_g, phi> - integral(R phi dmu_g)| for band-limited smooth g."""
    report = pair_scalar_curvature(g, h, phi)
    bundle = geometry.curvature(g)
    quad = geometry.integrate(bundle.scalar.values * phi.field.values, g)
    return abs(report.value - quad)


def background_gap(
    g: MetricField, h1: MetricField, h2: MetricField, phi: TestFunction
) -> float:
    """Pairing difference across two fair smooth backgrounds."""
    for hh in (h1, h2):
        if geometry.fairness(g, hh) >= 2.0:
            raise ValueError("background must be (1+delta)-fair to g with delta < 1")
    p1 = pair_scalar_curvature(g, h1, phi)
    p2 = pair_scalar_curvature(g, h2, phi)
    return abs(p1.value - p2.value)


# ---------------------------------------------------------------------------
# test-function family (shared by certificates and the mollifier probe)


def _fejer_1d(y: np.ndarray, order: int) -> np.ndarray:
    """Nonnegative cosine-polynomial bump with peak 1 and band limit `order`."""
    acc = np.ones_like(y)
    for k in range(1, order + 1):
        acc = acc + 2.0 * (1.0 - k / (order + 1.0)) * np.cos(2.0 * np.pi * k * y)
    return acc / (order + 1.0)


def bump(grid: GridSpec, center, order: int | None = None) -> TestFunction:
    """Translated product bump, band-limited and nonnegative by construction."""
    order = order if order is not None else min(8, grid.resolution // 4)
    xs = grid.meshgrid()
    vals = np.ones(grid.shape)
    for d in range(grid.dim):
        vals = vals * _fejer_1d(xs[d] - center[d], order)
    # cosine-sum evaluation can undershoot zero by round-off only
    vals = np.maximum(vals, 0.0)
    return TestFunction(ScalarField(grid, vals), nonnegative=True)


def constant_one(grid: GridSpec) -> TestFunction:
    return TestFunction(ScalarField(grid, np.ones(grid.shape)), nonnegative=True)


def default_family(
    grid: GridSpec, seed: int, size: int = 16, order: int | None = None
) -> list[TestFunction]:
    """Versioned certificate family: 2n axis bumps, the constant, seeded
    strictly positive band-limited fields. Members are continuum formulas, so
    the same (seed, size, order) transfers across resolutions."""
    if size < 2 * grid.dim + 1:
        raise ValueError("family size too small for the bump/constant core")
    order = order if order is not None else min(8, grid.resolution // 4)
    members = [constant_one(grid)]
    for d in range(grid.dim):
        for off in (-0.25, 0.25):
            center = [0.5] * grid.dim
            center[d] = 0.5 + off
            members.append(bump(grid, center, order))

    rng = np.random.default_rng(seed)
    xs = grid.meshgrid()
    while len(members) < size:
        q = np.zeros(grid.shape)
        for d in range(grid.dim):
            for k in range(1, order + 1):
                a, b = rng.normal(size=2) / k
                q = q + a * np.cos(2 * np.pi * k * xs[d]) + b * np.sin(2 * np.pi * k * xs[d])
        vals = 1.0 + 0.9 * q / max(float(np.max(np.abs(q))), 1e-300)
        members.append(TestFunction(ScalarField(grid, vals), nonnegative=True))
    return members


# ---------------------------------------------------------------------------
# certificates


def lower_bound_certificate(
    g: MetricField,
    h: MetricField,
    a: float,
    family: list[TestFunction],
    tol_cert: float = TOL_CERT,
) -> LowerBoundCertificate:
    """Worst normalized defect of <R_g - a, phi> over the family.

    Deterministic given the family; passes iff the worst defect is above
    -tol_cert, i.e. no member witnesses curvature below a.
    """
    if not family:
        raise EmptyFamily("lower-bound certificate needs at least one test function")
    worst = np.inf
    for phi in family:
        if not phi.nonnegative:
            raise ValueError("certificate family must be nonnegative")
        report = pair_scalar_curvature(g, h, phi)
        mass = geometry.integrate(phi.field, g)
        defect = (report.value - a * mass) / report.test_norm
        worst = min(worst, defect)
    return LowerBoundCertificate(
        bound=a, worst_defect=float(worst), family_size=len(family), tolerance=tol_cert
    )


def certified_bound(
    g: MetricField, h: MetricField, family: list[TestFunction]
) -> float:
    """Largest a the family can certify: min over phi of <R_g,phi>/mass(phi)."""
    if not family:
        raise EmptyFamily("certified bound needs at least one test function")
    best = np.inf
    for phi in family:
        report = pair_scalar_curvature(g, h, phi)
        mass = geometry.integrate(phi.field, g)
        if mass <= 0:
            raise ValueError("test function has nonpositive mass")
        best = min(best, report.value / mass)
    return float(best)
