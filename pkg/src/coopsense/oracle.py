"""Independent brute-force references used by the test suite and the
experiment harness baselines.

exhaustive_associate enumerates every full association (no unassigned
measurements) and keeps the global least-squares optimum; grid_localize
minimizes the single-target objective on a shrinking grid with no shared
search logic; ideal_ranges synthesizes measurements directly from geometry,
bypassing the air interface, to isolate the localization stage.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .airsim import as_rng
from .estimator import RangeSet
from .locator import LocationEstimate, Association, solve_single_target
from .scene import SBZ_MARGIN, Scene, bistatic_geometry

_TIE_TOL = 1e-9


@dataclass(frozen=True)
class IdealMeasurementModel:
    """Synthetic range-error model: Gaussian error scaled by half the range
    resolution and (by default) by the 1-based target index, with blind-zone
    targets omitted."""

    delta_ds: float
    epsilon_std: float = 1.0 / 3.0
    index_scaled: bool = True

    def __post_init__(self):
        if self.epsilon_std <= 0:
            raise ValueError("epsilon_std must be positive")


def ideal_ranges(scene: Scene, delta_ds: float | None, seed,
                 epsilon_std: float = 1.0 / 3.0,
                 index_scaled: bool = True) -> list[RangeSet]:
    """Per-tAP measurement sets drawn from the synthetic error model.

    delta_ds=None uses each tAP's own range resolution (hybrid bandwidth);
    a float forces a common resolution. Targets inside a pair's blind zone
    contribute nothing to that pair's set.
    """
    rng = as_rng(seed)
    out = []
    for tap in scene.taps:
        res = delta_ds if delta_ds is not None else scene.resolution_for(tap)
        d_b = scene.baseline(tap)
        values = []
        for j, tgt in enumerate(scene.targets, start=1):
            _, _, d_s = bistatic_geometry(tap, scene.rap, tgt)
            eps = rng.normal(0.0, epsilon_std)
            if d_s <= d_b + SBZ_MARGIN * res:
                continue
            mult = j if index_scaled else 1
            values.append(d_s + (res / 2.0) * eps * mult)
        out.append(RangeSet(tap_id=tap.id, ranges=tuple(values),
                            resolution_m=res))
    return out


class ExhaustiveSearchTooLarge(ValueError):
    """Enumeration count exceeds the configured guard."""


@dataclass
class ExhaustiveResult:
    association: Association
    locations: list[LocationEstimate]
    objective: float
    n_associations: int


def _association_count(sizes: list[int], j: int) -> int:
    count = math.comb(sizes[0], j)
    for n in sizes[1:]:
        count *= math.perm(n, j)
    return count


def exhaustive_associate(range_sets, tap_positions, j: int,
                         sigma: float = 1.0, rap_position=(0.0, 0.0),
                         max_associations: int = 5_000_000) -> ExhaustiveResult:
    """Globally optimal full association of j targets by brute force.

    Every measurement-to-target mapping that uses j distinct entries per set
    is enumerated (the first set as an unordered combination since target
    labels are interchangeable, the rest as ordered injections); each
    candidate's per-target positions come from the single-target solver.
    Cost per index tuple is memoized, but the enumeration itself is the
    point: with equal set sizes |D_k| = j it visits prod_{k=2}^K j!
    associations, which is why this is a baseline and not an algorithm.
    """
    rap = np.asarray(rap_position, dtype=float)
    sets = list(range_sets)
    if any(len(rs) < j for rs in sets):
        raise ValueError("every range set needs at least j measurements")
    anchors = [np.asarray(tap_positions[rs.tap_id], float) - rap for rs in sets]
    values = [list(rs.ranges) for rs in sets]
    sizes = [len(v) for v in values]
    total = _association_count(sizes, j)
    if total > max_associations:
        raise ExhaustiveSearchTooLarge(
            f"{total} candidate associations exceed the guard {max_associations}")

    memo: dict[tuple[int, ...], tuple[float, float, LocationEstimate]] = {}
    tap_ids = [rs.tap_id for rs in sets]

    def tuple_cost(key: tuple[int, ...]):
        entry = memo.get(key)
        if entry is None:
            triples = [(anchors[k], values[k][key[k]], sigma)
                       for k in range(len(sets))]
            est = solve_single_target(triples, tap_ids=tap_ids)
            zeta = max(r for _, r in est.per_tap_residuals)
            entry = (est.objective, zeta, est)
            memo[key] = entry
        return entry

    perm_lists = [list(itertools.permutations(range(n), j)) for n in sizes[1:]]
    best_cost = math.inf
    best_zeta = math.inf
    best_flat: tuple[int, ...] | None = None
    best_keys: list[tuple[int, ...]] | None = None
    n_enumerated = 0
    for combo1 in itertools.combinations(range(sizes[0]), j):
        for rest in itertools.product(*perm_lists):
            n_enumerated += 1
            cost = 0.0
            zeta = 0.0
            keys = []
            for slot in range(j):
                key = (combo1[slot],) + tuple(p[slot] for p in rest)
                c, z, _ = tuple_cost(key)
                cost += c
                zeta = max(zeta, z)
                keys.append(key)
            flat = tuple(x for key in keys for x in key)
            if (cost < best_cost - _TIE_TOL
                    or (abs(cost - best_cost) <= _TIE_TOL
                        and (zeta, flat) < (best_zeta, best_flat or flat))):
                best_cost, best_zeta, best_flat, best_keys = cost, zeta, flat, keys

    entries = {}
    locations = []
    for slot, key in enumerate(best_keys):
        for k, idx in enumerate(key):
            entries[(tap_ids[k], slot)] = idx + 1
        est = memo[key][2]
        locations.append(LocationEstimate(
            position=(float(est.position[0] + rap[0]),
                      float(est.position[1] + rap[1])),
            supporting_taps=est.supporting_taps,
            objective=est.objective,
            per_tap_residuals=est.per_tap_residuals,
            converged=est.converged,
        ))
    return ExhaustiveResult(association=Association(entries),
                            locations=locations, objective=best_cost,
                            n_associations=n_enumerated)


@dataclass
class GridLocalizeResult:
    point: np.ndarray
    objective: float
    on_boundary: bool
    ambiguous: bool


def grid_localize(ranges, bounds, coarse_step: float = 5.0,
                  refine_levels: int = 6) -> GridLocalizeResult:
    """Multi-resolution grid minimization of the single-target objective.

    bounds is (xmin, xmax, ymin, ymax) and must contain the optimum; the
    final grid pitch is coarse_step / 5**refine_levels (<= 1 mm for the
    defaults). A coarse-level tie far from the winner marks the result
    ambiguous; a coarse argmin on the bounds edge marks it on_boundary.
    """
    anchors = np.array([np.asarray(p, dtype=float) for p, d, *_ in ranges])
    ds = np.array([float(d) for _, d, *_ in ranges])
    sigmas = np.array([float(r[2]) if len(r) > 2 else 1.0 for r in ranges])
    xmin, xmax, ymin, ymax = bounds

    def objective_grid(xs, ys):
        X, Y = np.meshgrid(xs, ys, indexing="ij")
        total = np.zeros_like(X)
        r_r = np.sqrt(X**2 + Y**2)
        for a, d, s in zip(anchors, ds, sigmas):
            r_t = np.sqrt((X - a[0]) ** 2 + (Y - a[1]) ** 2)
            total += (d - r_r - r_t) ** 2 / (2.0 * s**2)
        return total

    xs = np.arange(xmin, xmax + coarse_step / 2, coarse_step)
    ys = np.arange(ymin, ymax + coarse_step / 2, coarse_step)
    grid = objective_grid(xs, ys)
    ix, iy = np.unravel_index(int(np.argmin(grid)), grid.shape)
    best_obj = float(grid[ix, iy])
    on_boundary = ix in (0, len(xs) - 1) or iy in (0, len(ys) - 1)

    tol = max(1e-9, 1e-6 * (1.0 + best_obj))
    near = np.argwhere(grid <= best_obj + tol)
    cell_dist = np.abs(near - np.array([ix, iy])).max(axis=1)
    ambiguous = bool((cell_dist > 5).any())

    cx, cy = xs[ix], ys[iy]
    step = coarse_step
    for _ in range(refine_levels):
        span = 2.0 * step
        step /= 5.0
        xs = np.arange(cx - span, cx + span + step / 2, step)
        ys = np.arange(cy - span, cy + span + step / 2, step)
        grid = objective_grid(xs, ys)
        ix, iy = np.unravel_index(int(np.argmin(grid)), grid.shape)
        cx, cy = float(xs[ix]), float(ys[iy])
        best_obj = float(grid[ix, iy])

    return GridLocalizeResult(point=np.array([cx, cy]), objective=best_obj,
                              on_boundary=on_boundary, ambiguous=ambiguous)
