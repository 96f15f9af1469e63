"""Gradient descent of path energy over a finite perturbation basis.

The gradient of the energy with respect to a path is approximated
component-wise against the H1-orthonormal deformation basis: for basis
element b, the directional derivative is the forward difference
``(E(path + eps1 * b) - E(path)) / eps1``.  Treating the basis as
orthonormal, the update direction is the coefficient-weighted sum of the
elements and the squared gradient norm is the sum of squared coefficients.
Descent steps use a fixed step ``eps2`` that is halved whenever a step fails
to decrease the energy (a parameter-free backtracking stand-in for manual
step tuning), with a hard floor.  The loop stops when the squared gradient
norm falls below ``grad_tol``, the step floor is reached, or ``max_iter``
iterations have run.

Every basis element vanishes at t = 0 and t = 1 by construction, so the
endpoint shapes are preserved bit-for-bit.

Directional derivatives within an iteration are independent and are farmed
out to a thread pool; coefficients land in a preallocated array and are
reduced in index order, so traces are identical for any worker count.
"""

import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .alignment import align_pair, normalize_surface
from .basis import DeformationBasis, HarmonicSpec, get_basis
from .errors import DegenerateMetric, ImmersionLost, NotTriaxial, ValidationError
from .metric import (
    DEFAULT_POLYFIT_RADIUS,
    ElasticParams,
    SurfacePath,
    path_energy,
    path_length,
)
from .surface import Surface

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SolverConfig:
    """Knobs of the path-straightening loop; defaults follow the library-wide
    experiment settings (see README)."""

    params: ElasticParams = ElasticParams()
    evaluator: str = "k1k2"
    margin: int = 3
    harmonics: HarmonicSpec = HarmonicSpec(degree=5, time_modes=4)
    n_frames: int = 7
    eps1: float = 1e-4            # directional-derivative probe step
    eps2: float = 1e-2            # descent step, halved on energy increase
    eps2_floor: float = 1e-6
    grad_tol: float = 1e-3        # stop when ||grad E||^2 drops below this
    max_iter: int = 800
    max_failures: int = 20        # consecutive rejected/degenerate steps before abort
    polyfit_radius: int = DEFAULT_POLYFIT_RADIUS
    triangle_source: str = "polyfit"
    workers: int = 1
    cache_dir: str | None = None

    def __post_init__(self):
        if self.eps1 <= 0.0 or self.eps2 <= 0.0 or self.grad_tol <= 0.0:
            raise ValidationError("eps1, eps2, and grad_tol must be positive")
        if self.n_frames < 2:
            raise ValidationError("need at least 2 frames")


@dataclass
class SolveTrace:
    """Per-iteration record of the descent, plus the final state."""

    energies: list = field(default_factory=list)       # energy after each accepted step
    grad_norms: list = field(default_factory=list)     # ||grad E||^2 per iteration
    step_sizes: list = field(default_factory=list)
    wall_times: list = field(default_factory=list)
    initial_energy: float = 0.0
    final_energy: float = 0.0
    iterations: int = 0
    converged: bool = False
    stop_reason: str = ""

    def to_dict(self):
        return {
            "initial_energy": self.initial_energy,
            "final_energy": self.final_energy,
            "iterations": self.iterations,
            "converged": self.converged,
            "stop_reason": self.stop_reason,
            "energies": list(self.energies),
            "grad_norms": list(self.grad_norms),
            "step_sizes": list(self.step_sizes),
            "wall_times": list(self.wall_times),
        }


def _energy_of(points, cfg: SolverConfig):
    return path_energy(
        SurfacePath(points),
        cfg.params,
        margin=cfg.margin,
        evaluator=cfg.evaluator,
        polyfit_radius=cfg.polyfit_radius,
        triangle_source=cfg.triangle_source,
    ).total


def _perturbed_energy(points, spatial, profile, eps, cfg):
    candidate = points + eps * profile[:, None, None, None] * spatial[None]
    try:
        return _energy_of(candidate, cfg)
    except DegenerateMetric as exc:
        raise ImmersionLost(f"perturbed path left the set of immersions: {exc}") from exc


def directional_derivative(path: SurfacePath, basis: DeformationBasis, index, cfg: SolverConfig,
                           base_energy=None, central=False):
    """Directional derivative of the path energy along basis element ``index``.

    Forward difference by default; ``central=True`` doubles the cost and is
    meant for verification.
    """
    element = basis.elements[index]
    profiles = basis.profiles(path.n_frames)
    profile = profiles[element.j - 1]
    spatial = basis.fields[element.spatial_index]
    plus = _perturbed_energy(path.points, spatial, profile, cfg.eps1, cfg)
    if central:
        minus = _perturbed_energy(path.points, spatial, profile, -cfg.eps1, cfg)
        return (plus - minus) / (2.0 * cfg.eps1)
    if base_energy is None:
        base_energy = _energy_of(path.points, cfg)
    return (plus - base_energy) / cfg.eps1


def _gradient(points, basis, profiles, base_energy, cfg):
    """Forward-difference coefficients against every basis element."""
    coeffs = np.empty(basis.count)

    def work(i):
        element = basis.elements[i]
        e_plus = _perturbed_energy(
            points, basis.fields[element.spatial_index], profiles[element.j - 1], cfg.eps1, cfg
        )
        coeffs[i] = (e_plus - base_energy) / cfg.eps1

    if cfg.workers > 1:
        with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
            list(pool.map(work, range(basis.count)))
    else:
        for i in range(basis.count):
            work(i)
    return coeffs


def _update_field(coeffs, basis, profiles):
    """Sum of coeff * P_j(t_k) * B_s per frame, grouped by spatial field."""
    n_spatial = basis.fields.shape[0]
    J = basis.spec.time_modes
    weight = np.zeros((n_spatial, J))
    for i, element in enumerate(basis.elements):
        weight[element.spatial_index, element.j - 1] = coeffs[i]
    frame_weights = weight @ profiles  # (n_spatial, T)
    return np.einsum("sk,snmc->knmc", frame_weights, basis.fields)


def straighten(path0: SurfacePath, cfg: SolverConfig, basis: DeformationBasis | None = None):
    """Minimize path energy with endpoints fixed; returns (path, trace)."""
    if basis is None:
        basis = get_basis(cfg.harmonics, path0.grid, cfg.cache_dir)
    if basis.grid != tuple(path0.grid):
        raise ValidationError(f"basis grid {basis.grid} does not match path grid {path0.grid}")
    profiles = basis.profiles(path0.n_frames)
    points = path0.points.copy()
    endpoints = (path0.points[0].copy(), path0.points[-1].copy())

    trace = SolveTrace()
    energy = _energy_of(points, cfg)
    trace.initial_energy = energy
    eps2 = cfg.eps2
    failures = 0
    stop_reason = "max_iter"

    for iteration in range(cfg.max_iter):
        tic = time.perf_counter()
        try:
            coeffs = _gradient(points, basis, profiles, energy, cfg)
        except ImmersionLost as exc:
            failures += 1
            eps2 *= 0.5
            logger.warning("gradient probe failed (%s); halving step to %.3g", exc, eps2)
            if failures >= cfg.max_failures:
                stop_reason = "aborted: repeated immersion failures"
                break
            if eps2 < cfg.eps2_floor:
                stop_reason = "step floor"
                break
            continue
        grad_sq = math.fsum((coeffs**2).tolist())
        if grad_sq <= cfg.grad_tol:
            trace.converged = True
            stop_reason = "grad_tol"
            break

        update = _update_field(coeffs, basis, profiles)
        accepted = False
        while eps2 >= cfg.eps2_floor:
            candidate = points - eps2 * update
            candidate[0] = endpoints[0]
            candidate[-1] = endpoints[1]
            try:
                new_energy = _energy_of(candidate, cfg)
            except DegenerateMetric:
                new_energy = math.inf
            if new_energy < energy:
                accepted = True
                break
            eps2 *= 0.5
            failures += 1
            if failures >= cfg.max_failures:
                break
        if not accepted:
            stop_reason = "step floor" if eps2 < cfg.eps2_floor else "aborted: repeated step failures"
            break
        failures = 0
        points = candidate
        energy = new_energy
        trace.energies.append(energy)
        trace.grad_norms.append(grad_sq)
        trace.step_sizes.append(eps2)
        trace.wall_times.append(time.perf_counter() - tic)

    trace.iterations = len(trace.energies)
    trace.final_energy = energy
    trace.stop_reason = stop_reason
    return SurfacePath(points), trace


@dataclass
class GeodesicResult:
    distance: float
    path: SurfacePath
    trace: SolveTrace
    alignment: object = None  # AlignmentReport or None when alignment was skipped


def geodesic_distance(s1: Surface, s2: Surface, cfg: SolverConfig, align=True):
    """Geodesic distance estimate between two surfaces.

    Aligns the surfaces (scale, translation, rotation) unless ``align`` is
    False, straightens the linear interpolation between them, and returns the
    length of the resulting path.  When the moment ellipsoids are not
    triaxial the rotational step is skipped with a warning and only
    scale/translation normalization is applied.
    """
    report = None
    if align:
        try:
            f1, f2, report = align_pair(s1, s2, margin=cfg.margin)
        except NotTriaxial as exc:
            logger.warning("rotational alignment skipped: %s", exc)
            f1, _, _ = normalize_surface(s1)
            f2, _, _ = normalize_surface(s2)
    else:
        f1, f2 = s1, s2
    path0 = SurfacePath.linear(f1, f2, cfg.n_frames)
    path, trace = straighten(path0, cfg)
    distance = path_length(
        path,
        cfg.params,
        margin=cfg.margin,
        evaluator=cfg.evaluator,
        polyfit_radius=cfg.polyfit_radius,
        triangle_source=cfg.triangle_source,
    )
    return GeodesicResult(distance=distance, path=path, trace=trace, alignment=report)


def distance_matrix(surfaces, cfg: SolverConfig, align=True, workers=1):
    """Symmetric pairwise geodesic distance matrix (upper triangle solved).

    Returns ``(matrix, results)`` where ``results[(i, j)]`` holds the
    GeodesicResult of each solved pair.
    """
    n = len(surfaces)
    matrix = np.zeros((n, n))
    pairs = [(i, j) for i in range(n) for j in range(i + 1, n)]
    results = {}

    def solve(pair):
        i, j = pair
        res = geodesic_distance(surfaces[i], surfaces[j], cfg, align=align)
        return pair, res

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            solved = list(pool.map(solve, pairs))
    else:
        solved = [solve(p) for p in pairs]
    for (i, j), res in solved:
        matrix[i, j] = matrix[j, i] = res.distance
        results[(i, j)] = res
    return matrix, results
