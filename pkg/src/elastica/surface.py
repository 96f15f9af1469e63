"""Grid-sampled spherical surfaces: derivatives, fundamental forms, curvature.

A surface is an embedding of the sphere sampled on a regular polar grid:
``u_i = pi * i / (n_u - 1)`` for ``i = 0 .. n_u-1`` (both poles included) and
``v_j = 2*pi * j / n_v`` for ``j = 0 .. n_v-1`` (periodic).  Points are stored
as an ``(n_u, n_v, 3)`` float64 array, row-major with ``i`` outer.

Tangent/perturbation fields share that shape; they are plain ndarrays (see
:data:`TangentField`).

Derivatives in ``u`` use second-order central differences (one-sided at the
two pole rows); derivatives in ``v`` wrap periodically.  Quantities built
from them degenerate at the pole rows, which is why every surface integral
takes a pole margin ``m`` and sums rows ``m .. n_u-1-m`` only.

Sign convention: the unit normal is ``f_u x f_v`` normalized, and curvatures
are reported so that an outward-oriented sphere of radius R has
``kappa_1 = kappa_2 = +1/R`` (mean curvature positive for convex surfaces
oriented outward).
"""

import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateMetric, SingularFit, ValidationError

# A perturbation field delta-f: ndarray of shape (n_u, n_v, 3), same grid as
# the surface it belongs to.
TangentField = np.ndarray

DEFAULT_IMMERSION_EPS = 1e-10
DEFAULT_POLE_MARGIN = 3

_UMBILIC_CLAMP = 1e-12


@dataclass(frozen=True, eq=False)
class Surface:
    """An embedded sphere sampled on the polar (u, v) grid.

    Parameters
    ----------
    points : ndarray, shape (n_u, n_v, 3)
        Sample positions, ``n_u, n_v >= 8``.  All entries must be finite.
    """

    points: np.ndarray

    def __post_init__(self):
        pts = np.ascontiguousarray(np.asarray(self.points, dtype=np.float64))
        if pts.ndim != 3 or pts.shape[2] != 3:
            raise ValidationError(f"surface points must have shape (n_u, n_v, 3), got {pts.shape}")
        if pts.shape[0] < 8 or pts.shape[1] < 8:
            raise ValidationError(f"grid too small: {pts.shape[0]}x{pts.shape[1]} (need at least 8x8)")
        if not np.all(np.isfinite(pts)):
            raise ValidationError("surface contains non-finite coordinates")
        object.__setattr__(self, "points", pts)

    @property
    def n_u(self):
        return self.points.shape[0]

    @property
    def n_v(self):
        return self.points.shape[1]

    @property
    def du(self):
        return math.pi / (self.n_u - 1)

    @property
    def dv(self):
        return 2.0 * math.pi / self.n_v

    @property
    def u(self):
        """Polar angles of the grid rows, 0 .. pi inclusive."""
        return np.linspace(0.0, math.pi, self.n_u)

    @property
    def v(self):
        """Azimuthal angles of the grid columns, 0 .. 2*pi exclusive."""
        return np.arange(self.n_v) * self.dv

    def with_points(self, points):
        """New surface on the same grid convention with replaced coordinates."""
        return Surface(points)

    def same_grid(self, other):
        return self.points.shape == other.points.shape


@dataclass
class FundamentalForms:
    """Per-grid-point first/second fundamental form data of a surface.

    ``E, F, G`` and the unit normal ``n`` are always filled;
    ``area`` is ``sqrt(E*G - F^2)``.  Second-order fields (``e, f, g`` for
    the stencil estimator; ``K, H, k1, k2`` for either estimator) are None
    until the corresponding operation fills them.  The polynomial-fit
    estimator leaves ``e, f, g`` as None and marks rows without a full
    neighborhood as NaN in the curvature fields.
    """

    E: np.ndarray
    F: np.ndarray
    G: np.ndarray
    n: np.ndarray
    area: np.ndarray
    e: np.ndarray | None = None
    f: np.ndarray | None = None
    g: np.ndarray | None = None
    K: np.ndarray | None = None
    H: np.ndarray | None = None
    k1: np.ndarray | None = None
    k2: np.ndarray | None = None

    @property
    def det(self):
        return self.area**2


# ---------------------------------------------------------------------------
# finite-difference stencils (u: clamped rows, v: periodic)

def d_u(arr, du):
    """First derivative along axis 0, one-sided (2nd order) at the end rows."""
    out = np.empty_like(arr)
    out[1:-1] = (arr[2:] - arr[:-2]) / (2.0 * du)
    out[0] = (-3.0 * arr[0] + 4.0 * arr[1] - arr[2]) / (2.0 * du)
    out[-1] = (3.0 * arr[-1] - 4.0 * arr[-2] + arr[-3]) / (2.0 * du)
    return out


def d_v(arr, dv):
    """First derivative along axis 1 with periodic wrap."""
    return (np.roll(arr, -1, axis=1) - np.roll(arr, 1, axis=1)) / (2.0 * dv)


def d_uu(arr, du):
    out = np.empty_like(arr)
    out[1:-1] = (arr[2:] - 2.0 * arr[1:-1] + arr[:-2]) / du**2
    out[0] = (2.0 * arr[0] - 5.0 * arr[1] + 4.0 * arr[2] - arr[3]) / du**2
    out[-1] = (2.0 * arr[-1] - 5.0 * arr[-2] + 4.0 * arr[-3] - arr[-4]) / du**2
    return out


def d_vv(arr, dv):
    return (np.roll(arr, -1, axis=1) - 2.0 * arr + np.roll(arr, 1, axis=1)) / dv**2


def partials(s: Surface):
    """Discrete partial derivatives ``(f_u, f_v)`` of the embedding."""
    return d_u(s.points, s.du), d_v(s.points, s.dv)


# ---------------------------------------------------------------------------
# deterministic quadrature

def margin_sum(values, margin):
    """Sum a (n_u, n_v) field over rows ``margin .. n_u-1-margin``.

    Columns are reduced first and the column totals are combined with
    ``math.fsum``, so the result is bit-identical under any cyclic shift of
    the v-index and independent of how work is split across workers.
    """
    n_u = values.shape[0]
    if margin < 0 or 2 * margin >= n_u:
        raise ValidationError(f"pole margin {margin} invalid for {n_u} rows")
    band = values[margin: n_u - margin]
    return math.fsum(band.sum(axis=0).tolist())


def integrate_scalar(s: Surface, phi, margin=DEFAULT_POLE_MARGIN, forms=None):
    """Surface integral of a per-point scalar field.

    Computes ``sum phi * sqrt(E*G - F^2) * du * dv`` over grid rows at least
    ``margin`` away from each pole.
    """
    if forms is None:
        forms = first_form(s)
    phi = np.asarray(phi, dtype=np.float64)
    if phi.shape != (s.n_u, s.n_v):
        raise ValidationError(f"scalar field shape {phi.shape} does not match grid {(s.n_u, s.n_v)}")
    return margin_sum(phi * forms.area, margin) * s.du * s.dv


# ---------------------------------------------------------------------------
# fundamental forms

def first_form(s: Surface, immersion_eps=DEFAULT_IMMERSION_EPS):
    """First fundamental form, unit normal, and area element.

    Raises
    ------
    DegenerateMetric
        If ``E*G - F^2 <= immersion_eps**2`` at any interior grid point
        (rows ``1 .. n_u-2``): the discrete surface is not an immersion.
    """
    f_u, f_v = partials(s)
    E = np.einsum("ijk,ijk->ij", f_u, f_u)
    F = np.einsum("ijk,ijk->ij", f_u, f_v)
    G = np.einsum("ijk,ijk->ij", f_v, f_v)
    det = E * G - F**2
    interior = det[1:-1]
    if np.any(interior <= immersion_eps**2):
        i, j = np.unravel_index(int(np.argmin(interior)), interior.shape)
        raise DegenerateMetric(
            f"EG - F^2 = {interior[i, j]:.3e} at grid point ({i + 1}, {j}): not an immersion"
        )
    cross = np.cross(f_u, f_v)
    norm = np.linalg.norm(cross, axis=2)
    # pole rows may have a vanishing cross product; keep them finite
    n = cross / np.maximum(norm, 1e-300)[..., None]
    area = np.sqrt(np.maximum(det, 0.0))
    return FundamentalForms(E=E, F=F, G=G, n=n, area=area)


def second_form_direct(s: Surface, forms=None, immersion_eps=DEFAULT_IMMERSION_EPS):
    """Second fundamental form and curvatures from finite-difference stencils.

    Fills ``e, f, g, K, H, k1, k2`` on the forms of `s`.  The radicand
    ``H^2 - K`` is clamped to zero when it falls in ``[-1e-12, 0)``, which
    absorbs roundoff at umbilic points.
    """
    if forms is None:
        forms = first_form(s, immersion_eps)
    f_uu = d_uu(s.points, s.du)
    f_vv = d_vv(s.points, s.dv)
    f_uv = d_v(d_u(s.points, s.du), s.dv)
    n = forms.n
    e = np.einsum("ijk,ijk->ij", f_uu, n)
    f = np.einsum("ijk,ijk->ij", f_uv, n)
    g = np.einsum("ijk,ijk->ij", f_vv, n)
    det = forms.det
    # pole rows may divide by zero; they are excluded by every pole margin
    with np.errstate(invalid="ignore", divide="ignore"):
        K = (e * g - f**2) / det
        # sign flip: positive mean curvature for outward-oriented convex surfaces
        H = -0.5 * (e * forms.G + g * forms.E - 2.0 * f * forms.F) / det
        rad = H**2 - K
        rad = np.where((rad < 0.0) & (rad >= -_UMBILIC_CLAMP), 0.0, rad)
        root = np.sqrt(rad)
    forms.e, forms.f, forms.g = e, f, g
    forms.K, forms.H = K, H
    forms.k1, forms.k2 = H + root, H - root
    return forms


# ---------------------------------------------------------------------------
# quad-split mesh helpers
#
# Each grid quad (i, j), (i+1, j), (i+1, j+1), (i, j+1) is split along the
# (i, j)--(i+1, j+1) diagonal into triangles T1 = (a, b, c), T2 = (a, c, d).
# The split wraps in j and is fixed once and for all so that mesh-derived
# quantities are deterministic.

def _quad_crosses(points):
    a = points[:-1]
    b = points[1:]
    c = np.roll(points, -1, axis=1)[1:]
    d = np.roll(points, -1, axis=1)[:-1]
    cross1 = np.cross(b - a, c - a)
    cross2 = np.cross(c - a, d - a)
    return cross1, cross2


def vertex_normals(points):
    """Area-weighted average of incident facet normals, unit length.

    Facets are the quad-split triangles; weighting by area comes for free
    from summing the raw cross products.  Pole rows have (near-)degenerate
    facets and their normals are not meaningful.
    """
    cross1, cross2 = _quad_crosses(points)
    acc = np.zeros_like(points)
    acc[:-1] += cross1                              # vertex a of T1
    acc[1:] += cross1                               # vertex b
    acc[1:] += np.roll(cross1, 1, axis=1)           # vertex c
    acc[:-1] += cross2                              # vertex a of T2
    acc[1:] += np.roll(cross2, 1, axis=1)           # vertex c
    acc[:-1] += np.roll(cross2, 1, axis=1)          # vertex d
    norm = np.linalg.norm(acc, axis=2)
    return acc / np.maximum(norm, 1e-300)[..., None]


def vertex_areas(points):
    """Barycentric-lumped vertex areas: one third of incident triangle areas.

    The vertex areas sum to the total mesh area.  They depend only on the
    embedded point set, not on the parameterization density, which makes
    them a parameterization-blind quadrature weight.
    """
    cross1, cross2 = _quad_crosses(points)
    area1 = 0.5 * np.linalg.norm(cross1, axis=2)
    area2 = 0.5 * np.linalg.norm(cross2, axis=2)
    acc = np.zeros(points.shape[:2])
    acc[:-1] += area1
    acc[1:] += area1
    acc[1:] += np.roll(area1, 1, axis=1)
    acc[:-1] += area2
    acc[1:] += np.roll(area2, 1, axis=1)
    acc[:-1] += np.roll(area2, 1, axis=1)
    return acc / 3.0


# ---------------------------------------------------------------------------
# curvature by local quadratic fit

def _tangent_frames(n):
    """Deterministic orthonormal tangent pairs (t1, t2) for unit normals n."""
    ref = np.zeros_like(n)
    use_y = np.abs(n[..., 0]) > 0.9
    ref[..., 0] = np.where(use_y, 0.0, 1.0)
    ref[..., 1] = np.where(use_y, 1.0, 0.0)
    t1 = ref - np.einsum("ijk,ijk->ij", ref, n)[..., None] * n
    t1 /= np.linalg.norm(t1, axis=2)[..., None]
    t2 = np.cross(n, t1)
    return t1, t2


def second_form_polyfit(s: Surface, k=3, forms=None, cond_limit=1e12):
    """Curvatures from a least-squares quadratic patch around each point.

    For every grid point with a full ``(2k+1) x (2k+1)`` neighborhood (the v
    direction wraps, so only ``k`` rows at each pole are excluded), the
    neighborhood is translated to the origin, rotated so the averaged facet
    normal becomes the z-axis, and fitted with
    ``P(x, y) = a1 x^2 + a2 y^2 + a3 xy + a4 x + a5 y + a6``
    by solving the 6x6 normal equations.  Then ``K = 4 a1 a2 - a3^2`` and,
    with the outward-positive sign convention, ``H = -(a1 + a2)``.

    Rows ``0 .. k-1`` and ``n_u-k .. n_u-1`` get NaN curvatures; integrate
    with a pole margin of at least ``k``.

    Raises
    ------
    SingularFit
        If a neighborhood's normal matrix has condition number above
        ``cond_limit`` (degenerate neighborhood); callers may fall back to
        :func:`second_form_direct`.
    """
    if k < 2:
        raise ValidationError(f"neighborhood radius k={k} must be >= 2")
    n_u, n_v = s.n_u, s.n_v
    if 2 * k >= n_u - 1:
        raise ValidationError(f"neighborhood radius k={k} too large for {n_u} rows")
    if forms is None:
        forms = first_form(s)
    pts = s.points
    normals = vertex_normals(pts)

    rows = slice(k, n_u - k)
    n_rows = n_u - 2 * k
    centers = pts[rows]
    nrm = normals[rows]
    t1, t2 = _tangent_frames(nrm)

    size = (2 * k + 1) ** 2
    rel = np.empty((n_rows, n_v, size, 3))
    idx = 0
    for di in range(-k, k + 1):
        shifted_rows = pts[k + di: n_u - k + di]
        for dj in range(-k, k + 1):
            rel[:, :, idx, :] = np.roll(shifted_rows, -dj, axis=1)
            idx += 1
    rel -= centers[:, :, None, :]

    x = np.einsum("ijpk,ijk->ijp", rel, t1)
    y = np.einsum("ijpk,ijk->ijp", rel, t2)
    z = np.einsum("ijpk,ijk->ijp", rel, nrm)

    cols = np.stack([x**2, y**2, x * y, x, y, np.ones_like(x)], axis=-1)
    normal_mat = np.einsum("ijpa,ijpb->ijab", cols, cols)
    rhs = np.einsum("ijp,ijpa->ija", z, cols)

    eigvals = np.abs(np.linalg.eigvalsh(normal_mat))
    cond = eigvals[..., -1] / np.maximum(eigvals[..., 0], 1e-300)
    if np.any(cond > cond_limit):
        i, j = np.unravel_index(int(np.argmax(cond)), cond.shape)
        raise SingularFit(
            f"quadratic fit is singular at grid point ({i + k}, {j}): condition {cond[i, j]:.3e}"
        )
    coef = np.linalg.solve(normal_mat, rhs[..., None])[..., 0]

    a1, a2, a3 = coef[..., 0], coef[..., 1], coef[..., 2]
    K_band = 4.0 * a1 * a2 - a3**2
    H_band = -(a1 + a2)
    root = np.sqrt((a1 - a2) ** 2 + a3**2)

    K = np.full((n_u, n_v), np.nan)
    H = np.full((n_u, n_v), np.nan)
    k1 = np.full((n_u, n_v), np.nan)
    k2 = np.full((n_u, n_v), np.nan)
    K[rows], H[rows] = K_band, H_band
    k1[rows], k2[rows] = H_band + root, H_band - root
    forms.K, forms.H, forms.k1, forms.k2 = K, H, k1, k2
    return forms


# ---------------------------------------------------------------------------
# normal / tangential splitting

def decompose(s: Surface, df: TangentField, forms=None):
    """Split a perturbation field into tangential and normal parts.

    Returns ``(df_tan, df_perp)`` with ``df_perp = (df . n) n`` pointwise and
    ``df_tan = df - df_perp``.
    """
    df = np.asarray(df, dtype=np.float64)
    if df.shape != s.points.shape:
        raise ValidationError(f"field shape {df.shape} does not match surface {s.points.shape}")
    if forms is None:
        forms = first_form(s)
    coeff = np.einsum("ijk,ijk->ij", df, forms.n)
    df_perp = coeff[..., None] * forms.n
    return df - df_perp, df_perp
