"""Elastic metric, its gauge-invariant restriction, and path energies.

The metric on perturbations ``df`` of a surface ``f`` is the three-term
elastic form

    <<df1, df2>> = integral |g|^(1/2) { a Tr((g^-1 dg1)_0 (g^-1 dg2)_0)
                   + b Tr(g^-1 dg1) Tr(g^-1 dg2) + c dn1 . dn2 },

with ``g`` the induced metric, ``dg, dn`` the induced first-order changes of
metric and unit normal, ``b = (a + lambda)/2`` and ``X_0`` the traceless part.
The gauge-invariant pairing evaluates the same form on the pointwise normal
components of the perturbations; tangential directions only re-parameterize
the shape and cost nothing.

Restricted to normal fields ``h n`` and ``k n`` the metric has the curvature
form

    ((hn, kn)) = integral |g|^(1/2) { h k (2a (k1 - k2)^2 + 4b (k1 + k2)^2)
                 + c (h_u h_v) g^-1 (k_u k_v)^T },

which is what the curvature-based path evaluators discretize.

Four path-energy evaluators are provided.  ``i2`` expands the metric in the
first fundamental form and its time derivative and sums the printed four-term
split E1..E4; its mixed bending term E3 omits a 1/(EG - F^2) factor relative
to the exact expansion of ``c dn.dn`` (kept as printed; the split is exact
for c = 0, and the curvature evaluators are exact for all weights).
``k1k2`` and ``polyfit`` use the curvature form with stencil or fitted
curvatures.  ``triangle`` replaces the parameter-domain quadrature weight
|g|^(1/2) du dv by per-vertex triangle areas of the embedded mesh, making the
weights parameterization-blind.

Discretization of a path: the velocity attached to frame k is the forward
difference ``(F[k+1] - F[k]) * (T-1)``, its normal component is taken with
respect to frame k's normals, and the energy is the left-endpoint rectangle
rule in time.  A constant path has exactly zero energy.
"""

import math
from dataclasses import dataclass

import numpy as np

from .errors import NonUniformGrid, ValidationError
from .surface import (
    DEFAULT_POLE_MARGIN,
    FundamentalForms,
    Surface,
    d_u,
    d_v,
    first_form,
    partials,
    second_form_direct,
    second_form_polyfit,
    vertex_areas,
)

EVALUATORS = ("i2", "k1k2", "polyfit", "triangle")

DEFAULT_POLYFIT_RADIUS = 3


@dataclass(frozen=True)
class ElasticParams:
    """Weights (a, lambda, c) of the elastic metric; b = (lambda + a)/2."""

    a: float = 1.0
    lam: float = 0.125
    c: float = 0.125

    def __post_init__(self):
        if self.a < 0.0 or self.c < 0.0:
            raise ValidationError("elastic weights a and c must be nonnegative")
        if self.a + self.lam <= 0.0 and self.c <= 0.0:
            raise ValidationError("metric is identically zero: need a + lambda > 0 or c > 0")

    @property
    def b(self):
        return 0.5 * (self.lam + self.a)


@dataclass(frozen=True, eq=False)
class SurfacePath:
    """T surfaces on the uniform time grid t_k = k/(T-1), one shared grid shape."""

    points: np.ndarray  # (T, n_u, n_v, 3)

    def __post_init__(self):
        pts = np.ascontiguousarray(np.asarray(self.points, dtype=np.float64))
        if pts.ndim != 4 or pts.shape[3] != 3:
            raise ValidationError(f"path points must have shape (T, n_u, n_v, 3), got {pts.shape}")
        if pts.shape[0] < 2:
            raise ValidationError("a path needs at least 2 frames")
        if not np.all(np.isfinite(pts)):
            raise ValidationError("path contains non-finite coordinates")
        Surface(pts[0])  # grid-size validation once; frames share the shape
        object.__setattr__(self, "points", pts)

    @property
    def n_frames(self):
        return self.points.shape[0]

    @property
    def grid(self):
        return self.points.shape[1:3]

    @property
    def times(self):
        return np.linspace(0.0, 1.0, self.n_frames)

    def frame(self, k) -> Surface:
        return Surface(self.points[k])

    @classmethod
    def from_frames(cls, frames):
        shapes = {f.points.shape for f in frames}
        if len(shapes) != 1:
            raise NonUniformGrid(f"frames disagree in grid shape: {sorted(shapes)}")
        return cls(np.stack([f.points for f in frames]))

    @classmethod
    def linear(cls, s1: Surface, s2: Surface, n_frames):
        """Pointwise linear interpolation from s1 to s2 over n_frames."""
        if s1.points.shape != s2.points.shape:
            raise NonUniformGrid("endpoints disagree in grid shape")
        t = np.linspace(0.0, 1.0, n_frames)[:, None, None, None]
        return cls((1.0 - t) * s1.points[None] + t * s2.points[None])


@dataclass
class EnergyBreakdown:
    """Total path energy, its four-term split, and per-frame kinetic values.

    For the ``i2`` evaluator the terms are the E1..E4 of the fundamental-form
    expansion; for the curvature evaluators they are (bending-difference a
    term, patch-area b term, gradient c term, 0).  The terms always sum to
    the total.
    """

    total: float
    terms: tuple
    per_frame: np.ndarray
    evaluator: str


def _band_sum(values_band):
    """Deterministic reduction of an already margin-sliced (rows, n_v) field."""
    return math.fsum(values_band.sum(axis=0).tolist())


def _check_margin(margin, n_u):
    if margin < 1 or 2 * margin >= n_u:
        raise ValidationError(f"pole margin {margin} invalid for {n_u} rows")


# ---------------------------------------------------------------------------
# metric on general perturbation fields

def _metric_ingredients(s, forms, df):
    """First-order change of (g, n) induced by a perturbation field."""
    dfu = d_u(df, s.du)
    dfv = d_v(df, s.dv)
    f_u, f_v = partials(s)
    dE = 2.0 * np.einsum("ijk,ijk->ij", f_u, dfu)
    dF = np.einsum("ijk,ijk->ij", f_u, dfv) + np.einsum("ijk,ijk->ij", f_v, dfu)
    dG = 2.0 * np.einsum("ijk,ijk->ij", f_v, dfv)
    dn = np.cross(dfu, f_v) + np.cross(f_u, dfv)
    return dE, dF, dG, dn


def metric_pair(s: Surface, df1, df2, params: ElasticParams, margin=DEFAULT_POLE_MARGIN):
    """Elastic inner product of two perturbation fields at a surface.

    Symmetric and bilinear; integrates over grid rows at least ``margin``
    away from the poles.
    """
    _check_margin(margin, s.n_u)
    forms = first_form(s)
    E, F, G = forms.E, forms.F, forms.G
    det = forms.det
    dE1, dF1, dG1, w1 = _metric_ingredients(s, forms, np.asarray(df1, dtype=np.float64))
    dE2, dF2, dG2, w2 = _metric_ingredients(s, forms, np.asarray(df2, dtype=np.float64))

    band = slice(margin, s.n_u - margin)
    E, F, G, det = E[band], F[band], G[band], det[band]
    n = forms.n[band]
    sqrt_det = forms.area[band]
    dE1, dF1, dG1, w1 = dE1[band], dF1[band], dG1[band], w1[band]
    dE2, dF2, dG2, w2 = dE2[band], dF2[band], dG2[band], w2[band]

    tr1 = (G * dE1 - 2.0 * F * dF1 + E * dG1) / det
    tr2 = (G * dE2 - 2.0 * F * dF2 + E * dG2) / det
    # polarization of Tr(g^-1 dg1 g^-1 dg2)
    tr_prod = (
        G**2 * dE1 * dE2
        + 2.0 * (E * G + F**2) * dF1 * dF2
        + E**2 * dG1 * dG2
        - 2.0 * F * G * (dE1 * dF2 + dF1 * dE2)
        + F**2 * (dE1 * dG2 + dG1 * dE2)
        - 2.0 * E * F * (dF1 * dG2 + dG1 * dF2)
    ) / det**2
    traceless = tr_prod - 0.5 * tr1 * tr2

    dn1 = -0.5 * tr1[..., None] * n + w1 / sqrt_det[..., None]
    dn2 = -0.5 * tr2[..., None] * n + w2 / sqrt_det[..., None]
    bend = np.einsum("ijk,ijk->ij", dn1, dn2)

    integrand = params.a * traceless + params.b * tr1 * tr2 + params.c * bend
    return _band_sum(integrand * sqrt_det) * s.du * s.dv


def gauge_pair(s: Surface, df1, df2, params: ElasticParams, margin=DEFAULT_POLE_MARGIN):
    """Gauge-invariant pairing: the elastic metric on the normal components."""
    forms = first_form(s)
    n = forms.n
    h1 = np.einsum("ijk,ijk->ij", np.asarray(df1, dtype=np.float64), n)
    h2 = np.einsum("ijk,ijk->ij", np.asarray(df2, dtype=np.float64), n)
    return metric_pair(s, h1[..., None] * n, h2[..., None] * n, params, margin)


def _curvature_forms(s, source, polyfit_radius):
    if source == "direct":
        return second_form_direct(s)
    if source == "polyfit":
        return second_form_polyfit(s, k=polyfit_radius)
    raise ValidationError(f"unknown curvature source {source!r}")


def curvature_pair(
    s: Surface,
    h,
    k,
    params: ElasticParams,
    margin=DEFAULT_POLE_MARGIN,
    curvature_source="direct",
    polyfit_radius=DEFAULT_POLYFIT_RADIUS,
):
    """Metric between normal fields ``h n`` and ``k n`` via principal curvatures.

    Integrates ``h k (2a (k1-k2)^2 + 4b (k1+k2)^2) + c grad-term`` against
    the area element.  With the polynomial-fit source the effective margin is
    at least the fit radius (rows without estimates are excluded).
    """
    forms = _curvature_forms(s, curvature_source, polyfit_radius)
    if curvature_source == "polyfit":
        margin = max(margin, polyfit_radius)
    _check_margin(margin, s.n_u)
    h = np.asarray(h, dtype=np.float64)
    k = np.asarray(k, dtype=np.float64)
    integrand = _curvature_integrand(s, forms, h, k, params, margin)
    band = slice(margin, s.n_u - margin)
    return _band_sum(integrand * forms.area[band]) * s.du * s.dv


def _curvature_integrand(s, forms, h, k, params, margin):
    """Band-sliced integrand of the curvature form (no measure factor)."""
    band = slice(margin, s.n_u - margin)
    k1, k2 = forms.k1[band], forms.k2[band]
    quad = 2.0 * params.a * (k1 - k2) ** 2 + 4.0 * params.b * (k1 + k2) ** 2
    integrand = h[band] * k[band] * quad
    if params.c != 0.0:
        hu, hv = d_u(h, s.du)[band], d_v(h, s.dv)[band]
        ku, kv = d_u(k, s.du)[band], d_v(k, s.dv)[band]
        E, F, G, det = forms.E[band], forms.F[band], forms.G[band], forms.det[band]
        grad = (G * hu * ku - F * (hu * kv + hv * ku) + E * hv * kv) / det
        integrand = integrand + params.c * grad
    return integrand


# ---------------------------------------------------------------------------
# path energy

def _kinetic_i2(s: Surface, velocity, params, margin):
    """One frame's kinetic value under the four-term fundamental-form split."""
    forms = first_form(s)
    n = forms.n
    h = np.einsum("ijk,ijk->ij", velocity, n)
    v_perp = h[..., None] * n
    vu = d_u(v_perp, s.du)
    vv = d_v(v_perp, s.dv)
    f_u, f_v = partials(s)

    Edot = 2.0 * np.einsum("ijk,ijk->ij", vu, f_u)
    Fdot = np.einsum("ijk,ijk->ij", vu, f_v) + np.einsum("ijk,ijk->ij", f_u, vv)
    Gdot = 2.0 * np.einsum("ijk,ijk->ij", vv, f_v)

    band = slice(margin, s.n_u - margin)
    E, F, G = forms.E[band], forms.F[band], forms.G[band]
    Edot, Fdot, Gdot = Edot[band], Fdot[band], Gdot[band]
    det = forms.det[band]
    det_m32 = det**-1.5
    scale = s.du * s.dv

    B = (
        G**2 * Edot**2
        + 2.0 * (E * G + F**2) * Fdot**2
        + E**2 * Gdot**2
        - 4.0 * F * G * Edot * Fdot
        + 2.0 * F**2 * Edot * Gdot
        - 4.0 * E * F * Fdot * Gdot
    )
    trace_num = G * Edot - 2.0 * F * Fdot + E * Gdot

    e1 = params.a * _band_sum(det_m32 * B) * scale
    e2 = (0.5 * params.lam + 0.25 * params.c) * _band_sum(det_m32 * trace_num**2) * scale
    if params.c != 0.0:
        w = np.cross(vu, f_v) + np.cross(f_u, vv)
        nw = np.einsum("ijk,ijk->ij", forms.n[band], w[band])
        ww = np.einsum("ijk,ijk->ij", w[band], w[band])
        e3 = -params.c * _band_sum(trace_num * nw) * scale
        e4 = params.c * _band_sum(det**-0.5 * ww) * scale
    else:
        e3 = 0.0
        e4 = 0.0
    return (e1, e2, e3, e4)


def _kinetic_curvature(s: Surface, velocity, params, margin, source, polyfit_radius, weights):
    """Curvature-form kinetic terms; weights=None uses |g|^(1/2) du dv."""
    forms = _curvature_forms(s, source, polyfit_radius)
    h = np.einsum("ijk,ijk->ij", velocity, forms.n)
    band = slice(margin, s.n_u - margin)
    k1, k2 = forms.k1[band], forms.k2[band]
    hb = h[band]
    if weights is None:
        w = forms.area[band] * (s.du * s.dv)
    else:
        w = weights[band]
    bend_a = 2.0 * params.a * _band_sum(hb**2 * (k1 - k2) ** 2 * w)
    area_b = 4.0 * params.b * _band_sum(hb**2 * (k1 + k2) ** 2 * w)
    if params.c != 0.0:
        hu, hv = d_u(h, s.du)[band], d_v(h, s.dv)[band]
        E, F, G, det = forms.E[band], forms.F[band], forms.G[band], forms.det[band]
        grad = (G * hu**2 - 2.0 * F * hu * hv + E * hv**2) / det
        grad_c = params.c * _band_sum(grad * w)
    else:
        grad_c = 0.0
    return (bend_a, area_b, grad_c, 0.0)


def _frame_kinetic(s, velocity, params, margin, evaluator, polyfit_radius, triangle_source):
    if evaluator == "i2":
        return _kinetic_i2(s, velocity, params, margin)
    if evaluator == "k1k2":
        return _kinetic_curvature(s, velocity, params, margin, "direct", polyfit_radius, None)
    if evaluator == "polyfit":
        return _kinetic_curvature(
            s, velocity, params, max(margin, polyfit_radius), "polyfit", polyfit_radius, None
        )
    if evaluator == "triangle":
        weights = vertex_areas(s.points)
        margin_eff = max(margin, polyfit_radius) if triangle_source == "polyfit" else margin
        return _kinetic_curvature(
            s, velocity, params, margin_eff, triangle_source, polyfit_radius, weights
        )
    raise ValidationError(f"unknown evaluator {evaluator!r}; expected one of {EVALUATORS}")


def path_energy(
    path: SurfacePath,
    params: ElasticParams,
    margin=DEFAULT_POLE_MARGIN,
    evaluator="i2",
    polyfit_radius=DEFAULT_POLYFIT_RADIUS,
    triangle_source="polyfit",
) -> EnergyBreakdown:
    """Energy of a discrete path under the selected evaluator.

    The kinetic value attached to frame k uses frame k's geometry and the
    forward-difference velocity to frame k+1; the time integral is the
    left-endpoint rectangle rule, so all reported per-frame values belong to
    frames ``0 .. T-2``.
    """
    _check_margin(margin, path.grid[0])
    T = path.n_frames
    pts = path.points
    per_frame = np.empty(T - 1)
    term_sums = [0.0, 0.0, 0.0, 0.0]
    term_lists = [[], [], [], []]
    for k in range(T - 1):
        velocity = (pts[k + 1] - pts[k]) * (T - 1.0)
        terms = _frame_kinetic(
            Surface(pts[k]), velocity, params, margin, evaluator, polyfit_radius, triangle_source
        )
        per_frame[k] = math.fsum(terms)
        for i in range(4):
            term_lists[i].append(terms[i])
    dt = 1.0 / (T - 1.0)
    term_sums = tuple(math.fsum(lst) * dt for lst in term_lists)
    total = math.fsum(per_frame.tolist()) * dt
    return EnergyBreakdown(total=total, terms=term_sums, per_frame=per_frame, evaluator=evaluator)


def path_length(
    path: SurfacePath,
    params: ElasticParams,
    margin=DEFAULT_POLE_MARGIN,
    evaluator="i2",
    polyfit_radius=DEFAULT_POLYFIT_RADIUS,
    triangle_source="polyfit",
):
    """Length of a discrete path: sum of sqrt(kinetic) * dt.

    Invariant under smooth monotone time reparameterization of the frames
    (up to resampling error), unlike the energy.
    """
    breakdown = path_energy(path, params, margin, evaluator, polyfit_radius, triangle_source)
    dt = 1.0 / (path.n_frames - 1.0)
    kinetic = np.maximum(breakdown.per_frame, 0.0)
    return math.fsum(np.sqrt(kinetic).tolist()) * dt


def theoretical_sphere_energy(r1, r2, params: ElasticParams):
    """Exact energy of the constant-speed radial path between concentric spheres.

    Only the patch-area term contributes: 32 pi (a + lambda) (r2 - r1)^2.
    """
    if r1 <= 0.0 or r2 <= 0.0:
        raise ValidationError("sphere radii must be positive")
    return 32.0 * math.pi * (params.a + params.lam) * (r2 - r1) ** 2
