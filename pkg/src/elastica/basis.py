"""Perturbation bases: real spherical harmonics, H1 orthonormalization, time modes.

The spatial part is built from real orthonormal spherical harmonics of degree
``l = 0 .. N`` evaluated on the polar grid, copied onto the three coordinate
axes, and orthonormalized with respect to the H1-type product

    (B1, B2) = integral over S^2 of (B1.B2 + B1_u.B2_u + B1_v.B2_v) ds,

where ``ds`` is the round-sphere area element ``sin(u) du dv``.  Penalizing
the coordinate derivatives keeps rapidly oscillating elements from carrying
the same weight as smooth ones, so gradient steps built from the basis do
not tear the surface out of the set of immersions.

Each spatial field is then modulated in time by ``P_j(t) = 0.25 * sin(pi*j*t)``
for ``j = 1 .. J``.  The endpoint values of every profile are pinned to an
exact 0.0 (not just ``sin(pi*j)`` roundoff), so path endpoints are preserved
bit-for-bit by construction.

Element ordering is ``(l, m, axis, j)`` with ``j`` fastest, and Gram-Schmidt
runs in that order.  A truncated basis is therefore a prefix, and the span of
a smaller basis is contained in the span of a larger one with the same J.
"""

import json
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import RankDeficientWarning, ValidationError
from .surface import Surface, d_u, d_v

TIME_AMPLITUDE = 0.25


def harmonic_indices(max_degree):
    """(l, m) pairs in basis order for degrees 0 .. max_degree."""
    return [(l, m) for l in range(max_degree + 1) for m in range(-l, l + 1)]


def _normalized_legendre(max_degree, x, sin_theta):
    """Fully normalized associated Legendre values S_l^m on a 1-D grid.

    ``S_l^m = sqrt((2l+1)/(4 pi) (l-m)!/(l+m)!) P_l^m`` with Condon-Shortley
    phase, computed by the standard stable three-term recurrence in l after
    seeding the diagonal.  Returns ``table[(l, m)] -> array like x``.
    """
    table = {}
    table[(0, 0)] = np.full_like(x, math.sqrt(1.0 / (4.0 * math.pi)))
    for m in range(1, max_degree + 1):
        table[(m, m)] = -math.sqrt((2.0 * m + 1.0) / (2.0 * m)) * sin_theta * table[(m - 1, m - 1)]
    for m in range(0, max_degree):
        for l in range(m + 1, max_degree + 1):
            a = math.sqrt((4.0 * l**2 - 1.0) / (l**2 - m**2))
            prev2 = table.get((l - 2, m))
            value = a * x * table[(l - 1, m)]
            if prev2 is not None:
                b = math.sqrt(
                    (2.0 * l + 1.0) * (l + m - 1.0) * (l - m - 1.0)
                    / ((2.0 * l - 3.0) * (l**2 - m**2))
                )
                value = value - b * prev2
            table[(l, m)] = value
    return table


def real_harmonics(max_degree, grid):
    """Real orthonormal spherical harmonics sampled on the polar grid.

    Parameters
    ----------
    max_degree : int
        Highest degree l (inclusive), >= 1 for a useful basis.
    grid : (int, int)
        ``(n_u, n_v)`` grid shape.

    Returns
    -------
    ndarray, shape ((max_degree+1)**2, n_u, n_v)
        Scalar fields ordered by :func:`harmonic_indices`; orthonormal for
        the unit-sphere measure (``integral Y_a Y_b ds = delta_ab``).
    """
    n_u, n_v = grid
    u = np.linspace(0.0, math.pi, n_u)
    v = np.arange(n_v) * (2.0 * math.pi / n_v)
    table = _normalized_legendre(max_degree, np.cos(u), np.sin(u))
    fields = np.empty(((max_degree + 1) ** 2, n_u, n_v))
    sqrt2 = math.sqrt(2.0)
    for idx, (l, m) in enumerate(harmonic_indices(max_degree)):
        radial = table[(l, abs(m))]
        if m == 0:
            fields[idx] = np.repeat(radial[:, None], n_v, axis=1)
        elif m > 0:
            fields[idx] = sqrt2 * radial[:, None] * np.cos(m * v)[None, :]
        else:
            fields[idx] = sqrt2 * radial[:, None] * np.sin(-m * v)[None, :]
    return fields


def sphere_quadrature_weights(grid):
    """Round-sphere quadrature weights sin(u) du dv, zero at the pole rows."""
    n_u, n_v = grid
    u = np.linspace(0.0, math.pi, n_u)
    du = math.pi / (n_u - 1)
    dv = 2.0 * math.pi / n_v
    return np.repeat(np.sin(u)[:, None], n_v, axis=1) * du * dv


def orthonormalize_h1(fields, pivot_tol=1e-10):
    """Gram-Schmidt under the H1 product on the parameter sphere.

    Runs modified Gram-Schmidt with one re-orthogonalization pass (derivative
    arrays are updated by linearity rather than re-differencing).  Elements
    whose residual norm falls below ``pivot_tol`` are dropped with a
    :class:`RankDeficientWarning`.

    Parameters
    ----------
    fields : ndarray, shape (count, n_u, n_v, 3)

    Returns
    -------
    (ndarray, list[int])
        Orthonormal fields (kept rows only) and the indices of the inputs
        that survived.
    """
    fields = np.asarray(fields, dtype=np.float64)
    if fields.ndim != 4 or fields.shape[-1] != 3:
        raise ValidationError(f"expected (count, n_u, n_v, 3) fields, got {fields.shape}")
    count, n_u, n_v, _ = fields.shape
    du = math.pi / (n_u - 1)
    dv = 2.0 * math.pi / n_v
    w = sphere_quadrature_weights((n_u, n_v))[..., None]

    q = np.zeros_like(fields)
    qu = np.zeros_like(fields)
    qv = np.zeros_like(fields)
    kept = []

    def inner_with_all(k, b, bu, bv):
        if k == 0:
            return np.empty(0)
        return (
            np.einsum("knmc,nmc->k", q[:k], w * b)
            + np.einsum("knmc,nmc->k", qu[:k], w * bu)
            + np.einsum("knmc,nmc->k", qv[:k], w * bv)
        )

    for i in range(count):
        b = fields[i].copy()
        bu = d_u(b, du)
        bv = d_v(b, dv)
        k = len(kept)
        for _ in range(2):
            coeff = inner_with_all(k, b, bu, bv)
            if coeff.size:
                b -= np.einsum("k,knmc->nmc", coeff, q[:k])
                bu -= np.einsum("k,knmc->nmc", coeff, qu[:k])
                bv -= np.einsum("k,knmc->nmc", coeff, qv[:k])
        norm = math.sqrt(
            float(np.sum(w * b * b) + np.sum(w * bu * bu) + np.sum(w * bv * bv))
        )
        if norm < pivot_tol:
            warnings.warn(
                f"dropping basis element {i}: H1 pivot {norm:.3e} below {pivot_tol:.0e}",
                RankDeficientWarning,
            )
            continue
        q[k] = b / norm
        qu[k] = bu / norm
        qv[k] = bv / norm
        kept.append(i)
    return q[: len(kept)].copy(), kept


def h1_gram(fields):
    """Gram matrix of vector fields under the H1 product (for verification)."""
    fields = np.asarray(fields, dtype=np.float64)
    count, n_u, n_v, _ = fields.shape
    du = math.pi / (n_u - 1)
    dv = 2.0 * math.pi / n_v
    w = sphere_quadrature_weights((n_u, n_v))[..., None]
    fu = np.stack([d_u(f, du) for f in fields])
    fv = np.stack([d_v(f, dv) for f in fields])
    gram = np.einsum("anmc,bnmc->ab", fields, w * fields)
    gram += np.einsum("anmc,bnmc->ab", fu, w * fu)
    gram += np.einsum("anmc,bnmc->ab", fv, w * fv)
    return gram


def time_profiles(time_modes, n_frames):
    """Profiles P_j(t_k) = 0.25 sin(pi j t_k) on t_k = k/(T-1), endpoints exactly 0."""
    t = np.linspace(0.0, 1.0, n_frames)
    profiles = np.empty((time_modes, n_frames))
    for j in range(1, time_modes + 1):
        profiles[j - 1] = TIME_AMPLITUDE * np.sin(math.pi * j * t)
    profiles[:, 0] = 0.0
    profiles[:, -1] = 0.0
    return profiles


@dataclass(frozen=True)
class HarmonicSpec:
    """Size of the perturbation basis.

    ``degree`` is the highest spherical-harmonic degree N, ``time_modes`` the
    number J of time profiles; the full basis has ``3 * (N+1)**2 * J``
    elements.  ``max_elements`` truncates to a prefix of the (l, m, axis, j)
    ordering, which is how odd published element counts are reached.
    """

    degree: int
    time_modes: int
    max_elements: int | None = None

    def __post_init__(self):
        if self.degree < 1 or self.time_modes < 1:
            raise ValidationError("harmonic degree and time modes must be >= 1")
        if self.max_elements is not None and self.max_elements < 1:
            raise ValidationError("max_elements must be positive")

    @property
    def full_count(self):
        return 3 * (self.degree + 1) ** 2 * self.time_modes

    @property
    def count(self):
        if self.max_elements is None:
            return self.full_count
        return min(self.max_elements, self.full_count)


@dataclass(frozen=True)
class BasisElement:
    """One perturbation direction: spatial field times a time profile index."""

    l: int
    m: int
    axis: int
    j: int
    spatial_index: int


@dataclass
class DeformationBasis:
    """H1-orthonormal spatial fields tensored with sine time profiles."""

    spec: HarmonicSpec
    grid: tuple
    fields: np.ndarray            # (n_spatial, n_u, n_v, 3) H1-orthonormal
    elements: list = field(default_factory=list)

    @property
    def count(self):
        return len(self.elements)

    def profiles(self, n_frames):
        return time_profiles(self.spec.time_modes, n_frames)

    def manifest(self):
        return {
            "degree": self.spec.degree,
            "time_modes": self.spec.time_modes,
            "max_elements": self.spec.max_elements,
            "grid": list(self.grid),
            "count": self.count,
            "ordering": [[e.l, e.m, e.axis, e.j] for e in self.elements],
        }


def build_basis(spec: HarmonicSpec, grid):
    """Construct the deformation basis for a grid shape.

    Three axis-copies of the real harmonics are H1-orthonormalized in
    (l, m, axis) order, then paired with the J time profiles; the element
    list is the (l, m, axis, j) ordering truncated to ``spec.count``.
    """
    n_u, n_v = grid
    scalars = real_harmonics(spec.degree, (n_u, n_v))
    indices = harmonic_indices(spec.degree)
    n_spatial = 3 * len(indices)
    fields = np.zeros((n_spatial, n_u, n_v, 3))
    meta = []
    pos = 0
    for idx, (l, m) in enumerate(indices):
        for axis in range(3):
            fields[pos, :, :, axis] = scalars[idx]
            meta.append((l, m, axis))
            pos += 1
    ortho, kept = orthonormalize_h1(fields)
    elements = []
    for spatial_index, orig in enumerate(kept):
        l, m, axis = meta[orig]
        for j in range(1, spec.time_modes + 1):
            elements.append(BasisElement(l=l, m=m, axis=axis, j=j, spatial_index=spatial_index))
    elements = elements[: spec.count]
    used = 1 + max(e.spatial_index for e in elements) if elements else 0
    return DeformationBasis(spec=spec, grid=(n_u, n_v), fields=ortho[:used], elements=elements)


# ---------------------------------------------------------------------------
# caching

def cache_key(spec: HarmonicSpec, grid):
    return f"basis_N{spec.degree}_J{spec.time_modes}_{grid[0]}x{grid[1]}"


def save_basis(basis: DeformationBasis, directory):
    """Write the basis fields and a JSON ordering manifest; returns the npz path."""
    import os

    os.makedirs(directory, exist_ok=True)
    key = cache_key(basis.spec, basis.grid)
    npz_path = os.path.join(directory, key + ".npz")
    np.savez(npz_path, fields=basis.fields)
    with open(os.path.join(directory, key + ".json"), "w") as fh:
        json.dump(basis.manifest(), fh, indent=1)
    return npz_path


def load_basis(spec: HarmonicSpec, grid, directory):
    """Load a cached basis; returns None on any mismatch or missing file."""
    import os

    key = cache_key(spec, grid)
    npz_path = os.path.join(directory, key + ".npz")
    json_path = os.path.join(directory, key + ".json")
    if not (os.path.exists(npz_path) and os.path.exists(json_path)):
        return None
    with open(json_path) as fh:
        manifest = json.load(fh)
    if manifest["degree"] != spec.degree or manifest["time_modes"] != spec.time_modes:
        return None
    if tuple(manifest["grid"]) != tuple(grid):
        return None
    fields = np.load(npz_path)["fields"]
    elements = []
    for pos, (l, m, axis, j) in enumerate(manifest["ordering"]):
        elements.append(
            BasisElement(l=l, m=m, axis=axis, j=j, spatial_index=pos // spec.time_modes)
        )
    elements = elements[: spec.count]
    return DeformationBasis(spec=spec, grid=tuple(grid), fields=fields, elements=elements)


def get_basis(spec: HarmonicSpec, grid, cache_dir=None):
    """Build the basis, consulting/filling the cache directory when given.

    The cache always stores the full (N, J) basis; truncation to
    ``spec.max_elements`` happens after loading.
    """
    full = HarmonicSpec(spec.degree, spec.time_modes)
    if cache_dir is not None:
        cached = load_basis(full, grid, cache_dir)
        if cached is not None:
            return _truncate(cached, spec)
    basis = build_basis(full, grid)
    if cache_dir is not None:
        save_basis(basis, cache_dir)
    return _truncate(basis, spec)


def _truncate(basis: DeformationBasis, spec: HarmonicSpec):
    if spec.max_elements is None:
        return DeformationBasis(spec=spec, grid=basis.grid, fields=basis.fields,
                                elements=list(basis.elements))
    elements = basis.elements[: spec.count]
    used = 1 + max(e.spatial_index for e in elements) if elements else 0
    return DeformationBasis(spec=spec, grid=basis.grid, fields=basis.fields[:used],
                            elements=elements)


# ---------------------------------------------------------------------------
# band-limited reconstruction

def reconstruct(s: Surface, max_degree):
    """Degree-N truncation of a surface's coordinate functions.

    Projects each coordinate onto the real harmonics by discrete quadrature
    with the round-sphere weights and resynthesizes.  ``max_degree=0``
    returns the constant surface at the coordinate means.
    """
    if max_degree < 0:
        raise ValidationError("max_degree must be >= 0")
    grid = (s.n_u, s.n_v)
    w = sphere_quadrature_weights(grid)
    if max_degree == 0:
        means = np.einsum("ij,ijc->c", w, s.points) / (4.0 * math.pi)
        return s.with_points(np.broadcast_to(means, s.points.shape).copy())
    fields = real_harmonics(max_degree, grid)
    coeffs = np.einsum("aij,ij,ijc->ac", fields, w, s.points)
    recon = np.einsum("ac,aij->ijc", coeffs, fields)
    return s.with_points(recon)
