"""Analytic test shapes and sphere reparameterizations.

Shape recipes are plain dicts (JSON-friendly, used verbatim by the ``gen``
CLI command):

    {"kind": "sphere", "radius": 1.0, "n_u": 100, "n_v": 100}
    {"kind": "ellipsoid", "ax": 2.0, "ay": 1.0, "az": 1.0, ...}
    {"kind": "bump_sphere", "radius": 1.0, "amplitude": 0.1,
     "degree": 5, "order": 3, ...}
    {"kind": "linear_blend", "first": {...}, "second": {...}, "t": 0.5}

Reparameterization recipes describe orientation-preserving sphere
diffeomorphisms:

    {"kind": "v_shift", "j": 7}
    {"kind": "sphere_rotation", "axis": [0, 0, 1], "angle": 0.3}
    {"kind": "moebius", "alpha": 0.4, "beta": [0.5, 0.0]}

``v_shift`` acts by exact index rotation.  The other two resample the surface
at the preimages of the grid nodes with bilinear interpolation in (u, v),
periodic in v and clamped in u.  The Moebius map acts through stereographic
projection from the north pole (u = 0 maps to the point at infinity), so
``alpha`` scales and ``beta`` translates the complex plane seen from the
south pole.
"""

import math

import numpy as np

from .basis import real_harmonics
from .errors import ValidationError
from .surface import Surface


def grid_angles(n_u, n_v):
    u = np.linspace(0.0, math.pi, n_u)
    v = np.arange(n_v) * (2.0 * math.pi / n_v)
    return np.meshgrid(u, v, indexing="ij")


def unit_directions(n_u, n_v):
    """Unit-sphere positions of the grid nodes, shape (n_u, n_v, 3)."""
    uu, vv = grid_angles(n_u, n_v)
    return np.stack(
        [np.sin(uu) * np.cos(vv), np.sin(uu) * np.sin(vv), np.cos(uu)], axis=-1
    )


def sphere(radius=1.0, n_u=100, n_v=100):
    return Surface(radius * unit_directions(n_u, n_v))


def ellipsoid(ax, ay, az, n_u=100, n_v=100):
    d = unit_directions(n_u, n_v)
    return Surface(d * np.array([ax, ay, az]))


def bump_sphere(radius, amplitude, degree, order, n_u=100, n_v=100):
    """Sphere with a radial spherical-harmonic bump.

    The harmonic is rescaled so its maximum on the grid is 1; the radial
    offset then stays within ``amplitude``, and ``amplitude < radius`` keeps
    the surface embedded (star-shaped with positive radius).
    """
    if not (-degree <= order <= degree):
        raise ValidationError(f"harmonic order {order} out of range for degree {degree}")
    if abs(amplitude) >= radius:
        raise ValidationError("bump amplitude must be smaller than the radius")
    idx = degree * (degree + 1) + order  # position inside harmonic_indices(degree)
    y = real_harmonics(degree, (n_u, n_v))[idx]
    y = y / np.max(np.abs(y))
    r = radius + amplitude * y
    return Surface(r[..., None] * unit_directions(n_u, n_v))


def linear_blend(s1: Surface, s2: Surface, t):
    if s1.points.shape != s2.points.shape:
        raise ValidationError("blend endpoints must share one grid shape")
    return Surface((1.0 - t) * s1.points + t * s2.points)


def generate(recipe: dict) -> Surface:
    """Evaluate a shape recipe dict; see the module docstring for the schema."""
    kind = recipe.get("kind")
    n_u = int(recipe.get("n_u", 100))
    n_v = int(recipe.get("n_v", 100))
    if kind == "sphere":
        return sphere(float(recipe["radius"]), n_u, n_v)
    if kind == "ellipsoid":
        return ellipsoid(float(recipe["ax"]), float(recipe["ay"]), float(recipe["az"]), n_u, n_v)
    if kind == "bump_sphere":
        return bump_sphere(
            float(recipe["radius"]),
            float(recipe["amplitude"]),
            int(recipe["degree"]),
            int(recipe["order"]),
            n_u,
            n_v,
        )
    if kind == "linear_blend":
        first = dict(recipe["first"], n_u=n_u, n_v=n_v)
        second = dict(recipe["second"], n_u=n_u, n_v=n_v)
        return linear_blend(generate(first), generate(second), float(recipe["t"]))
    raise ValidationError(f"unknown shape recipe kind: {kind!r}")


# ---------------------------------------------------------------------------
# reparameterization

def rotation_matrix(axis, angle):
    axis = np.asarray(axis, dtype=np.float64)
    norm = np.linalg.norm(axis)
    if norm == 0.0:
        raise ValidationError("rotation axis must be nonzero")
    x, y, z = axis / norm
    c, s = math.cos(angle), math.sin(angle)
    C = 1.0 - c
    return np.array(
        [
            [c + x * x * C, x * y * C - z * s, x * z * C + y * s],
            [y * x * C + z * s, c + y * y * C, y * z * C - x * s],
            [z * x * C - y * s, z * y * C + x * s, c + z * z * C],
        ]
    )


def bilinear_resample(s: Surface, u_query, v_query):
    """Sample the surface at parameter points, periodic in v, clamped in u."""
    pts = s.points
    n_u, n_v = s.n_u, s.n_v
    fu = np.clip(u_query, 0.0, math.pi) / s.du
    i0 = np.clip(np.floor(fu).astype(int), 0, n_u - 2)
    wu = (fu - i0)[..., None]
    fv = np.mod(v_query, 2.0 * math.pi) / s.dv
    j0 = np.mod(np.floor(fv).astype(int), n_v)
    wv = np.mod(fv - np.floor(fv), 1.0)[..., None]
    j1 = (j0 + 1) % n_v
    p00 = pts[i0, j0]
    p01 = pts[i0, j1]
    p10 = pts[i0 + 1, j0]
    p11 = pts[i0 + 1, j1]
    top = (1.0 - wv) * p00 + wv * p01
    bot = (1.0 - wv) * p10 + wv * p11
    return (1.0 - wu) * top + wu * bot


def _angles_from_directions(d):
    u = np.arccos(np.clip(d[..., 2], -1.0, 1.0))
    v = np.arctan2(d[..., 1], d[..., 0])
    return u, np.mod(v, 2.0 * math.pi)


def reparameterize(s: Surface, recipe: dict) -> Surface:
    """Resample a surface under an orientation-preserving sphere diffeomorphism."""
    kind = recipe.get("kind")
    if kind == "v_shift":
        return s.with_points(np.roll(s.points, int(recipe["j"]), axis=1))
    if kind == "sphere_rotation":
        rot = rotation_matrix(recipe["axis"], float(recipe["angle"]))
        d = unit_directions(s.n_u, s.n_v)
        pre = d @ rot  # == rot^T applied to each node direction
        uq, vq = _angles_from_directions(pre)
        return s.with_points(bilinear_resample(s, uq, vq))
    if kind == "moebius":
        alpha = float(recipe.get("alpha", 0.4))
        beta = recipe.get("beta", 0.5)
        if isinstance(beta, (list, tuple)):
            beta = complex(beta[0], beta[1])
        else:
            beta = complex(beta)
        if alpha <= 0.0:
            raise ValidationError("moebius scale alpha must be positive (orientation)")
        uu, vv = grid_angles(s.n_u, s.n_v)
        # stereographic projection from the north pole: u=0 -> infinity
        with np.errstate(divide="ignore"):
            rho = 1.0 / np.tan(uu / 2.0)
        zeta = rho * np.exp(1j * vv)
        pre = (zeta - beta) / alpha
        rho_pre = np.abs(pre)
        uq = 2.0 * np.arctan2(1.0, rho_pre)  # rho = inf -> u = 0 smoothly
        vq = np.mod(np.angle(pre), 2.0 * math.pi)
        # the north pole row maps to itself (infinity is a fixed point)
        uq[0] = 0.0
        vq[0] = vv[0]
        return s.with_points(bilinear_resample(s, uq, vq))
    raise ValidationError(f"unknown reparameterization kind: {recipe.get('kind')!r}")


def gauge_transform_path(frames, schedule):
    """Apply a per-frame reparameterization schedule to a list of surfaces.

    ``schedule`` is a sequence of recipes (or None for identity), one per
    frame.  Returns the transformed frame list; the caller rebuilds a path
    from it.
    """
    if len(schedule) != len(frames):
        raise ValidationError("schedule length must match the number of frames")
    out = []
    for frame, recipe in zip(frames, schedule):
        out.append(frame if recipe is None else reparameterize(frame, recipe))
    return out


def rotation_schedule(n_frames, axis, max_angle, profile="sine"):
    """Smooth per-frame rotation recipes; angle follows sin(pi t) or linear t."""
    t = np.linspace(0.0, 1.0, n_frames)
    if profile == "sine":
        angles = max_angle * np.sin(math.pi * t)
    elif profile == "linear":
        angles = max_angle * t
    else:
        raise ValidationError(f"unknown schedule profile {profile!r}")
    return [
        {"kind": "sphere_rotation", "axis": list(axis), "angle": float(a)} for a in angles
    ]
