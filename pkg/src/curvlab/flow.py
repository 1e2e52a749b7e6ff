"""Background-anchored parabolic metric flow and its quantitative monitors.

The evolution integrated here is

    d/dt g_ij = -2 Ric_ij + nabla_i V_j + nabla_j V_i,
    V_j = g_jk g^{pq} (Gamma^k_pq - Gamma~^k_pq),

with Gamma the coordinate connection of g(t), Gamma~ that of the fixed
smooth background h, and nabla the connection of g(t). The gauge term makes
the system strictly parabolic, so explicit stepping under a dt ~ dx^2 CFL
restriction is stable, and total volume, extremes of scalar curvature and
the Sobolev decay monitors are gauge-invariant quantities.

The stepper is deliberately assembled in this tensor form. An independent
second assembly in the expanded quasilinear form lives in the test suite as
an oracle; the two must agree to stencil accuracy on smooth data.

A homogeneous channel evolves exact Einstein model data (Ric = (a/n) g) in
closed form: scale s(t) = 1 - (2a/n) t, curvature a / s(t), volume
s(t)^{n/2}. Grid containers for that channel hold the constant metric
s(t) * g0 while curvature values come from the model, which is what makes
the equality cases of the volume and lower-bound laws exact.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import geometry
from ._kernels import backend
from .errors import BlowUp, CollapseTime, SingularMetric, UnstableStep
from .grid import (
    LAMBDA_FLOOR,
    GridSpec,
    MetricField,
    ScalarField,
    SymTensorField,
    VectorField,
    flat_metric,
    grid_sum,
)

DELTA_FAIR = 0.5

SERIES_COLUMNS = (
    "t",
    "dt",
    "vol",
    "min_scalar",
    "max_scalar",
    "max_curv_proxy",
    "sup_grad_g",
    "sup_grad2_g",
    "einstein_defect",
    "w1p_grad_int",
)


@dataclass(frozen=True)
class FlowParams:
    t_end: float
    scheme: str = "euler"
    cfl: float = 0.1
    a: float = 0.0
    save_stride: int = 1
    p: float = 4.0
    delta_fair: float = DELTA_FAIR

    def __post_init__(self):
        if self.scheme not in ("euler", "rk4"):
            raise ValueError(f"unknown scheme {self.scheme!r}")
        if not 0.0 < self.cfl <= 0.5:
            raise ValueError("cfl must lie in (0, 0.5]")
        if not self.t_end > 0.0:
            raise ValueError("t_end must be positive")
        if self.save_stride < 1:
            raise ValueError("save_stride must be >= 1")


@dataclass(frozen=True)
class HomogeneousModel:
    """Einstein model data Ric = (a/n) g with unit initial volume."""

    n: int
    a: float

    def scale(self, t: float) -> float:
        s = 1.0 - (2.0 * self.a / self.n) * t
        if s <= 0.0:
            raise CollapseTime(f"scale vanished at t={t} (a={self.a}, n={self.n})")
        return s

    def scalar(self, t: float) -> float:
        return self.a / self.scale(t)

    def volume(self, t: float) -> float:
        return self.scale(t) ** (self.n / 2.0)


def homogeneous_flow(model: HomogeneousModel, t: float) -> tuple[float, float]:
    """Closed-form (scale, scalar curvature) of the Einstein channel."""
    if model.a > 0.0 and t >= model.n / (2.0 * model.a):
        raise CollapseTime(f"t={t} at or past collapse time {model.n / (2 * model.a)}")
    return model.scale(t), model.scalar(t)


@dataclass(frozen=True, eq=False)
class FlowState:
    t: float
    g: MetricField
    vol: float
    min_scalar: float
    max_curv_proxy: float


@dataclass(eq=False)
class FlowTrace:
    params: FlowParams
    background: MetricField
    states: list[FlowState]
    dt_history: list[float]
    series: dict[str, np.ndarray]
    model: HomogeneousModel | None = None

    @property
    def grid(self) -> GridSpec:
        return self.background.grid

    @property
    def times(self) -> np.ndarray:
        return self.series["t"]

    def state_times(self) -> np.ndarray:
        return np.array([s.t for s in self.states])


# ---------------------------------------------------------------------------
# right-hand side


def _background_gamma(h: MetricField) -> np.ndarray:
    hfull = h.matrices
    return geometry._christoffel_values(hfull, np.linalg.inv(hfull), h.grid, None)


def _rhs_arrays(gfull, ginv, grid: GridSpec, gamma_h: np.ndarray):
    """Tensor-form RHS plus the curvature intermediates of the current state."""
    gam = geometry._christoffel_values(gfull, ginv, grid, None)
    dgam = geometry.grad_stack(gam, grid)
    gam_f = geometry._flat(gam, grid)

    t1 = np.einsum("...kkij->...ij", dgam)
    t2 = np.einsum("...ikkj->...ij", dgam)
    quad = geometry._unflat(backend.ricci_quadratic(gam_f), grid)
    ric = t1 - t2 + quad
    ric = 0.5 * (ric + ric.swapaxes(-1, -2))
    scalar = np.einsum("...ij,...ij->...", ginv, ric)

    w_up = np.einsum("...pq,...kpq->...k", ginv, gam - gamma_h)
    v_low = np.einsum("...jk,...k->...j", gfull, w_up)
    dv = geometry.grad_stack(v_low, grid)
    sym_grad = geometry._unflat(
        backend.sym_grad_v(gam_f, geometry._flat(v_low, grid), geometry._flat(dv, grid)),
        grid,
    )
    rhs = -2.0 * ric + sym_grad
    return rhs, {"gam": gam, "dgam": dgam, "ric": ric, "scalar": scalar, "w_up": w_up}


def h_flow_rhs(g: MetricField, h: MetricField) -> SymTensorField:
    """-2 Ric + symmetrized gauge gradient, assembled in the tensor form."""
    geometry._check_pair(g, h)
    gfull = g.matrices
    rhs, _ = _rhs_arrays(gfull, np.linalg.inv(gfull), g.grid, _background_gamma(h))
    return SymTensorField.from_matrices(g.grid, rhs)


def deturck_vector(g: MetricField, h: MetricField) -> VectorField:
    """Gauge vector W^k = g^{pq}(Gamma^k_pq - Gamma~^k_pq) of the flow."""
    geometry._check_pair(g, h)
    gfull = g.matrices
    ginv = np.linalg.inv(gfull)
    gam = geometry._christoffel_values(gfull, ginv, g.grid, None)
    w = np.einsum("...pq,...kpq->...k", ginv, gam - _background_gamma(h))
    return VectorField(g.grid, w)


# ---------------------------------------------------------------------------
# the stepper


class _StepDiagnostics:
    """Per-step scalars shared between the series and the saved states."""

    __slots__ = ("vol", "min_scalar", "max_scalar", "max_curv_proxy",
                 "sup_grad", "sup_grad2", "einstein_defect", "w1p_grad_int")


def _diagnostics(gfull, ginv, grid, info, h_geom, p) -> _StepDiagnostics:
    d = _StepDiagnostics()
    n = grid.dim
    sqrt_det = np.sqrt(np.linalg.det(gfull))
    d.vol = grid_sum(sqrt_det) * grid.spacing**n
    scal = info["scalar"]
    d.min_scalar = float(scal.min())
    d.max_scalar = float(scal.max())
    proxy_sq = backend.riemann_sq(
        geometry._flat(info["gam"], grid), geometry._flat(info["dgam"], grid)
    )
    d.max_curv_proxy = float(np.sqrt(max(proxy_sq.max(), 0.0)))

    hfull, hinv, gamma_h, dens_h = h_geom
    cov1 = geometry.covd_sym2(gfull, grid, gamma_h if gamma_h.any() else None)
    n1_sq = geometry._pointwise_grad_norm_sq(cov1, "sym2", hfull, hinv)
    n1_sq = np.maximum(n1_sq, 0.0)
    d.sup_grad = float(np.sqrt(n1_sq.max()))
    d.w1p_grad_int = grid_sum(n1_sq ** (p / 2.0) * dens_h) * grid.spacing**n
    cov2 = geometry.covd_3low(cov1, grid, gamma_h if gamma_h.any() else None)
    n2_sq = np.einsum(
        "...da,...pb,...qc,...re,...dpqr,...abce->...",
        hinv, hinv, hinv, hinv, cov2, cov2,
    )
    d.sup_grad2 = float(np.sqrt(max(n2_sq.max(), 0.0)))

    e = info["ric"] - (scal / n)[..., None, None] * gfull
    e_sq = backend.metric_dot_sym(
        geometry._flat(ginv, grid), geometry._flat(e, grid), geometry._flat(e, grid)
    )
    d.einstein_defect = float(np.sqrt(max(e_sq.max(), 0.0)))
    return d


def run_h_flow(g0: MetricField, h: MetricField, params: FlowParams) -> FlowTrace:
    """Explicit integration up to t_end with parabolic step control.

    dt = cfl * dx^2 * (global smallest eigenvalue of g), the eigenvalue
    factor bounding the size of the inverse-metric diffusion coefficients.
    Raises BlowUp when SPD or the curvature guard |Rm| <= 1/dx^2 fails, and
    UnstableStep when one step grows the state tenfold.
    """
    geometry._check_pair(g0, h)
    grid = g0.grid
    n = grid.dim
    dx = grid.spacing
    fair = geometry.fairness(g0, h)
    if fair > 1.0 + params.delta_fair:
        raise ValueError(
            f"initial fairness {fair:.3f} exceeds gate {1 + params.delta_fair}"
        )
    if params.a > 0.0 and params.t_end >= n / (2.0 * params.a):
        raise CollapseTime("t_end at or past the positive-bound collapse time")

    hfull = h.matrices
    h_geom = (
        hfull,
        np.linalg.inv(hfull),
        _background_gamma(h),
        np.sqrt(np.linalg.det(hfull)),
    )
    curv_guard = 1.0 / dx**2

    gfull = np.ascontiguousarray(g0.matrices)
    t = 0.0
    rows: list[list[float]] = []
    states: list[FlowState] = []
    dt_history: list[float] = []
    step = 0

    def rhs_of(mat):
        lam = np.linalg.eigvalsh(mat)
        if lam[..., 0].min() < LAMBDA_FLOOR:
            raise BlowUp(f"SPD lost at t={t:.6g}")
        return _rhs_arrays(mat, np.linalg.inv(mat), grid, h_geom[2])

    while True:
        lam = np.linalg.eigvalsh(gfull)
        lam_min = float(lam[..., 0].min())
        if lam_min < LAMBDA_FLOOR:
            raise BlowUp(f"SPD lost at t={t:.6g}")
        ginv = np.linalg.inv(gfull)
        rhs, info = _rhs_arrays(gfull, ginv, grid, h_geom[2])
        diag = _diagnostics(gfull, ginv, grid, info, h_geom, params.p)
        if diag.max_curv_proxy > curv_guard:
            raise BlowUp(
                f"curvature proxy {diag.max_curv_proxy:.3e} above 1/dx^2 at t={t:.6g}"
            )

        done = t >= params.t_end
        dt = 0.0 if done else min(params.cfl * dx**2 * lam_min, params.t_end - t)
        rows.append([t, dt, diag.vol, diag.min_scalar, diag.max_scalar,
                     diag.max_curv_proxy, diag.sup_grad, diag.sup_grad2,
                     diag.einstein_defect, diag.w1p_grad_int])
        if step % params.save_stride == 0 or done:
            states.append(
                FlowState(
                    t=t,
                    g=MetricField.from_matrices(grid, gfull),
                    vol=diag.vol,
                    min_scalar=diag.min_scalar,
                    max_curv_proxy=diag.max_curv_proxy,
                )
            )
        if done:
            break

        if params.scheme == "euler":
            g_new = gfull + dt * rhs
        else:
            k1 = rhs
            k2 = rhs_of(gfull + 0.5 * dt * k1)[0]
            k3 = rhs_of(gfull + 0.5 * dt * k2)[0]
            k4 = rhs_of(gfull + dt * k3)[0]
            g_new = gfull + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)

        norm_old = float(np.abs(gfull).max())
        norm_new = float(np.abs(g_new).max())
        if norm_new > 10.0 * max(norm_old, 1e-300):
            raise UnstableStep(
                f"state norm grew {norm_new / norm_old:.1f}x in one step at t={t:.6g}"
            )
        gfull = 0.5 * (g_new + g_new.swapaxes(-1, -2))
        dt_history.append(dt)
        t += dt
        step += 1

    series = {
        name: np.array([r[i] for r in rows]) for i, name in enumerate(SERIES_COLUMNS)
    }
    return FlowTrace(
        params=params,
        background=h,
        states=states,
        dt_history=dt_history,
        series=series,
    )


# ---------------------------------------------------------------------------
# homogeneous channel export


def homogeneous_trace(
    model: HomogeneousModel,
    grid: GridSpec,
    times: np.ndarray,
    params: FlowParams | None = None,
) -> FlowTrace:
    """Exact Einstein-channel trace in a grid container.

    States hold the constant metric s(t) * delta; curvature diagnostics come
    from the model (the constant coefficients themselves are flat as grid
    data). The curvature proxy reports the space-form value
    |Rm| = |R| sqrt(2/(n(n-1))), exact when the model is a space form.
    """
    if grid.dim != model.n:
        raise ValueError("grid dimension must match the model")
    times = np.asarray(times, dtype=np.float64)
    if times[0] != 0.0 or np.any(np.diff(times) <= 0):
        raise ValueError("times must start at 0 and increase strictly")
    if params is None:
        params = FlowParams(t_end=float(times[-1]), scheme="rk4", a=model.a)
    n = model.n
    flat_vals = flat_metric(grid).values
    states = []
    rows = []
    prev_t = 0.0
    for t in times:
        s, r = homogeneous_flow(model, float(t))
        vol = model.volume(float(t))
        proxy = abs(r) * math.sqrt(2.0 / (n * (n - 1.0)))
        states.append(
            FlowState(
                t=float(t),
                g=MetricField(grid, s * flat_vals),
                vol=vol,
                min_scalar=r,
                max_curv_proxy=proxy,
            )
        )
        rows.append([float(t), float(t) - prev_t, vol, r, r, proxy, 0.0, 0.0, 0.0, 0.0])
        prev_t = float(t)
    rows[0][1] = 0.0
    series = {
        name: np.array([r[i] for r in rows]) for i, name in enumerate(SERIES_COLUMNS)
    }
    # dt column convention matches run_h_flow: dt taken FROM each time
    series["dt"] = np.append(np.diff(times), 0.0)
    return FlowTrace(
        params=params,
        background=flat_metric(grid),
        states=states,
        dt_history=list(np.diff(times)),
        series=series,
        model=model,
    )


# ---------------------------------------------------------------------------
# normalization and the law checks


def normalize(g: MetricField) -> MetricField:
    """Unit-volume rescaling Vol(g)^{-2/n} * g."""
    g.require_spd()
    n = g.grid.dim
    vol = geometry.total_volume(g)
    out = MetricField(g.grid, vol ** (-2.0 / n) * g.values,
                      contravariant=g.contravariant)
    check = geometry.total_volume(out)
    if abs(check - 1.0) > 1e-10:
        raise SingularMetric(f"normalization failed: volume {check}")
    return out


def volume_law_check(trace: FlowTrace, a: float) -> dict:
    """Vol(t) against (1 - 2at/n)^{n/2}: equality for the model channel,
    one-sided bound with the grid tolerance otherwise."""
    n = trace.grid.dim
    dx = trace.grid.spacing
    ts = trace.series["t"]
    vols = trace.series["vol"]
    law = (1.0 - 2.0 * a * ts / n) ** (n / 2.0)
    defects = vols - law
    if trace.model is not None:
        tol = 1e-8
        worst = float(np.abs(defects).max())
    else:
        tol = 1e-4 + 5.0 * dx**2
        worst = float(defects.max())
    return {
        "check": "volume_law",
        "pass": bool(worst <= tol),
        "worst_margin": worst,
        "tolerance": tol,
        "a": a,
    }


def lower_bound_check(trace: FlowTrace, a: float) -> dict:
    """min_x R(x, t) against the propagated barrier a (1 - 2at/n)^{-1}."""
    n = trace.grid.dim
    dx = trace.grid.spacing
    ts = trace.series["t"]
    barrier = a / (1.0 - 2.0 * a * ts / n)
    margins = trace.series["min_scalar"] - barrier
    tol = 1e-3 * (1.0 + abs(a)) + 10.0 * dx**2
    worst = float(margins.min())
    return {
        "check": "lower_bound",
        "pass": bool(worst >= -tol),
        "worst_margin": worst,
        "tolerance": tol,
        "a": a,
        "margins": margins,
    }


def decay_report(trace: FlowTrace, p: float | None = None) -> dict:
    """Compensated derivative series and the tenfold gradient-energy law.

    Running maxima are taken past a burn-in of ten initial steps; the
    refinement-stability comparison lives in compare_decay_reports.
    """
    p = trace.params.p if p is None else p
    n = trace.grid.dim
    ts = trace.series["t"]
    dt0 = trace.dt_history[0] if trace.dt_history else 0.0
    t_burn = 10.0 * dt0
    live = ts >= max(t_burn, 1e-300)

    comp_grad = ts ** (n / (2.0 * p)) * trace.series["sup_grad_g"]
    exp2 = n / (4.0 * p) + 0.75
    comp_grad2 = ts**exp2 * trace.series["sup_grad2_g"]
    comp_curv = ts**exp2 * trace.series["max_curv_proxy"]

    w1p = trace.series["w1p_grad_int"]
    w1p0 = w1p[0]
    if w1p0 > 0.0:
        w1p_ratio = float(w1p.max() / w1p0)
        w1p_pass = bool(np.all(w1p <= 10.0 * w1p0))
    else:
        w1p_ratio = 0.0
        w1p_pass = bool(np.all(w1p <= 1e-12))

    def running_max(series):
        return float(series[live].max()) if live.any() else 0.0

    return {
        "check": "decay",
        "p": p,
        "t_burn": t_burn,
        "comp_grad_max": running_max(comp_grad),
        "comp_grad2_max": running_max(comp_grad2),
        "comp_curv_max": running_max(comp_curv),
        "w1p_ratio": w1p_ratio,
        "pass": w1p_pass,
    }


def compare_decay_reports(coarse: dict, fine: dict, factor: float = 2.0) -> dict:
    """Refinement stability: no compensated running max may grow past factor."""
    keys = ("comp_grad_max", "comp_grad2_max", "comp_curv_max")
    ratios = {}
    ok = True
    for k in keys:
        base = coarse[k]
        ratios[k] = fine[k] / base if base > 0 else (0.0 if fine[k] == 0 else np.inf)
        if base > 1e-12 and ratios[k] > factor:
            ok = False
    return {"check": "decay_refinement", "pass": ok, "ratios": ratios}


def self_similarity_check(trace: FlowTrace) -> dict:
    """Max over saved pairs of the sup-norm gap between normalized states."""
    normed = [normalize(s.g).values for s in trace.states]
    worst = 0.0
    for i in range(len(normed)):
        for j in range(i + 1, len(normed)):
            worst = max(worst, float(np.abs(normed[i] - normed[j]).max()))
    tol = 1e-10 if trace.model is not None else None
    return {
        "check": "self_similarity",
        "max_pair_gap": worst,
        "tolerance": tol,
        "pass": bool(worst <= tol) if tol is not None else True,
    }
