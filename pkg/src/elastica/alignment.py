"""Scale, translation, and rotation normalization of closed grid surfaces.

The surface is treated as the boundary of the volume it encloses.  Splitting
every grid quad into two triangles and coning them to the origin gives signed
tetrahedra whose volumes, centroids, and second moments accumulate to the
inscribed volume, its center of mass, and the 3x3 moment tensor

    M = integral over the inscribed volume of x x^T dvol.

Rotational alignment fits the moment ellipsoid to each shape (eigenvectors of
M sorted by decreasing eigenvalue) and maps the axes of one onto the other.
Moments over the volume, rather than over surface samples, make the fit
equivariant under affine maps and robust to reparameterization of the grid.

A moment ellipsoid with two (near-)equal axes has no well-defined frame;
such inputs raise :class:`NotTriaxial`.  The 180-degree ambiguity of axis
directions is resolved by trying the four det-+1 sign hypotheses and keeping
the one whose two-frame path to the reference shape has the smallest
triangle-quadrature energy.
"""

import logging
import math
from dataclasses import dataclass

import numpy as np

from .errors import NotTriaxial, ZeroVolume
from .metric import ElasticParams, SurfacePath, path_energy
from .surface import Surface

logger = logging.getLogger(__name__)

TRIAXIAL_GAP = 1e-6

# det +1 sign patterns for the axis-direction ambiguity
SIGN_HYPOTHESES = (
    (1.0, 1.0, 1.0),
    (1.0, -1.0, -1.0),
    (-1.0, 1.0, -1.0),
    (-1.0, -1.0, 1.0),
)

_ALIGN_PARAMS = ElasticParams(a=1.0, lam=0.125, c=0.0)


@dataclass
class VolumeCells:
    """Per-quad signed tetrahedron volumes (two triangles per quad)."""

    vol1: np.ndarray  # (n_u-1, n_v)
    vol2: np.ndarray

    @property
    def total(self):
        return math.fsum((self.vol1 + self.vol2).sum(axis=0).tolist())


def _quad_corners(points):
    """Corners (a, b, d, c) = f(i,j), f(i+1,j), f(i,j+1), f(i+1,j+1) per quad."""
    nxt = np.roll(points, -1, axis=1)
    return points[:-1], points[1:], nxt[:-1], nxt[1:]


def inscribed_volume(s: Surface):
    """Signed tetra volumes per grid cell and their total.

    The sign convention makes an outward-oriented surface enclose positive
    volume; a negative total signals inward orientation (reported by the
    caller, not fatal).
    """
    a, b, d, c = _quad_corners(s.points)
    vol1 = np.einsum("ijk,ijk->ij", np.cross(b - a, d - a), a) / 6.0
    vol2 = np.einsum("ijk,ijk->ij", np.cross(d - c, b - c), c) / 6.0
    cells = VolumeCells(vol1=vol1, vol2=vol2)
    return cells, cells.total


def center_of_mass(s: Surface, cells: VolumeCells):
    """Centroid of the inscribed volume (volume-weighted tetra centroids)."""
    total = cells.total
    if abs(total) < 1e-12:
        raise ZeroVolume(f"inscribed volume {total:.3e} too small to take a centroid")
    a, b, d, c = _quad_corners(s.points)
    m1 = (a + b + d) / 4.0
    m2 = (c + b + d) / 4.0
    weighted = cells.vol1[..., None] * m1 + cells.vol2[..., None] * m2
    return weighted.reshape(-1, 3).sum(axis=0) / total


def second_moments(s: Surface, cells: VolumeCells):
    """Second moments of the inscribed volume as a symmetric 3x3 tensor.

    Uses the exact second-moment quadrature of a tetrahedron with one vertex
    at the origin, accumulated per cell.  The surface should be centered
    first if a central moment tensor is wanted.
    """
    a, b, d, c = _quad_corners(s.points)
    p1, p2, p3 = a + d, a + b, b + d
    q1, q2, q3 = b + d, c + b, c + d
    m1 = (
        np.einsum("ijk,ijl->ijkl", p1, p1)
        + np.einsum("ijk,ijl->ijkl", p2, p2)
        + np.einsum("ijk,ijl->ijkl", p3, p3)
    ) / 20.0
    m2 = (
        np.einsum("ijk,ijl->ijkl", q1, q1)
        + np.einsum("ijk,ijl->ijkl", q2, q2)
        + np.einsum("ijk,ijl->ijkl", q3, q3)
    ) / 20.0
    M = np.einsum("ij,ijkl->kl", cells.vol1, m1) + np.einsum("ij,ijkl->kl", cells.vol2, m2)
    return 0.5 * (M + M.T)


@dataclass
class EllipsoidFit:
    """Principal frame of a moment tensor and the matching ellipsoid map.

    ``rotation`` columns are the principal axes by decreasing moment,
    det +1, each column's largest-magnitude entry positive.  ``scale`` maps
    the unit sphere onto the volume-matching ellipsoid.
    """

    rotation: np.ndarray       # (3, 3)
    moments: np.ndarray        # (3,) descending
    scale: np.ndarray          # (3, 3)
    axis_gaps: tuple

    @classmethod
    def from_moments(cls, M):
        return fit_ellipsoid(M)


def fit_ellipsoid(M) -> EllipsoidFit:
    """Principal-axis frame of a positive-definite moment tensor.

    Raises
    ------
    NotTriaxial
        If consecutive eigenvalues are separated by a relative gap below
        1e-6; the frame is then ambiguous and the caller needs outside
        information (or must accept identity alignment).
    """
    M = np.asarray(M, dtype=np.float64)
    vals, vecs = np.linalg.eigh(M)
    vals = vals[::-1]
    vecs = vecs[:, ::-1]
    if vals[0] <= 0.0:
        raise NotTriaxial("moment tensor is not positive definite")
    gaps = ((vals[0] - vals[1]) / vals[0], (vals[1] - vals[2]) / vals[0])
    if min(gaps) < TRIAXIAL_GAP:
        raise NotTriaxial(
            f"moment ellipsoid is not triaxial: relative axis gaps {gaps[0]:.2e}, {gaps[1]:.2e}"
        )
    # deterministic signs: largest-magnitude entry of each axis positive
    for col in range(3):
        lead = int(np.argmax(np.abs(vecs[:, col])))
        if vecs[lead, col] < 0.0:
            vecs[:, col] = -vecs[:, col]
    if np.linalg.det(vecs) < 0.0:
        vecs[:, 2] = -vecs[:, 2]
    scale = (
        (4.0 * math.pi / 15.0) ** 0.2
        * float(np.linalg.det(M)) ** -0.1
        * (vecs * np.sqrt(vals)) @ vecs.T
    )
    return EllipsoidFit(rotation=vecs, moments=vals, scale=scale, axis_gaps=gaps)


@dataclass
class AlignmentReport:
    vol1: float
    vol2: float
    center1: np.ndarray
    center2: np.ndarray
    rotation1: np.ndarray
    rotation2: np.ndarray
    hypothesis: tuple
    hypothesis_index: int
    hypothesis_energies: tuple
    axis_gaps: tuple

    def to_dict(self):
        return {
            "vol1": self.vol1,
            "vol2": self.vol2,
            "center1": self.center1.tolist(),
            "center2": self.center2.tolist(),
            "U1": self.rotation1.tolist(),
            "U2": self.rotation2.tolist(),
            "hypothesis_chosen": list(self.hypothesis),
            "hypothesis_index": self.hypothesis_index,
            "hypothesis_energies": list(self.hypothesis_energies),
            "axis_gaps": list(self.axis_gaps),
        }


def normalize_surface(s: Surface):
    """Scale to unit inscribed volume and move the centroid to the origin."""
    cells, total = inscribed_volume(s)
    if abs(total) < 1e-12:
        raise ZeroVolume("cannot normalize a surface with vanishing inscribed volume")
    if total < 0.0:
        logger.warning("surface is inward-oriented (inscribed volume %.3e)", total)
    scaled = s.with_points(s.points / abs(total) ** (1.0 / 3.0))
    cells, _ = inscribed_volume(scaled)
    center = center_of_mass(scaled, cells)
    return scaled.with_points(scaled.points - center), abs(total), center


def align_pair(s1: Surface, s2: Surface, margin=3, energy_params=_ALIGN_PARAMS):
    """Normalize both surfaces and rotate the second onto the first's axes.

    Both surfaces are scaled to unit inscribed volume and centered.  The
    second is then rotated by ``U1 D U2^T`` where ``U_k`` are the principal
    frames and ``D`` ranges over the four det-+1 sign hypotheses; the
    hypothesis with the smallest two-frame triangle-quadrature energy wins
    (ties go to the first hypothesis in the fixed order, and the gap is
    logged).  Returns ``(F1, F2, report)``.
    """
    f1, vol1, center1 = normalize_surface(s1)
    f2, vol2, center2 = normalize_surface(s2)
    cells1, _ = inscribed_volume(f1)
    cells2, _ = inscribed_volume(f2)
    fit1 = fit_ellipsoid(second_moments(f1, cells1))
    fit2 = fit_ellipsoid(second_moments(f2, cells2))

    energies = []
    candidates = []
    for signs in SIGN_HYPOTHESES:
        rot = fit1.rotation @ np.diag(signs) @ fit2.rotation.T
        pts = f2.points @ rot.T
        candidates.append(pts)
        two_frame = SurfacePath(np.stack([f1.points, pts]))
        energies.append(
            path_energy(two_frame, energy_params, margin=margin, evaluator="triangle").total
        )
    best = min(energies)
    tol = max(1e-12, 1e-9 * abs(best))
    chosen = next(i for i, e in enumerate(energies) if e <= best + tol)
    gap = sorted(energies)[1] - best if len(energies) > 1 else 0.0
    logger.info(
        "alignment hypothesis %d chosen (energy %.6g, runner-up gap %.3g)",
        chosen,
        energies[chosen],
        gap,
    )
    report = AlignmentReport(
        vol1=vol1,
        vol2=vol2,
        center1=center1,
        center2=center2,
        rotation1=fit1.rotation,
        rotation2=fit2.rotation,
        hypothesis=SIGN_HYPOTHESES[chosen],
        hypothesis_index=chosen,
        hypothesis_energies=tuple(energies),
        axis_gaps=fit1.axis_gaps + fit2.axis_gaps,
    )
    return f1, f2.with_points(candidates[chosen]), report
