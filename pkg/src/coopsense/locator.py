"""Stage II: joint data association and multi-target localization.

Each tAP contributes a descending-sorted set of bistatic range measurements.
A target position q (rAP at the origin) predicts the measurement
||q|| + ||q - a_k|| for tAP k, so localization is weighted nonlinear least
squares once the association between measurements and targets is known.
The association itself is found greedily: three sets at a time are searched
exhaustively (with triangle-inequality pruning), the candidate count is
walked down until the residual indicator clears a threshold, remaining sets
are attached by nearest prediction, and consumed measurements are removed
before the next combination is tried. Measurements that never fit anything
are the suspected gross errors and are reported as leftovers.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .estimator import RangeSet
from .scene import SBZ_MARGIN

_EPS_NORM = 1e-12
_TIE_TOL = 1e-9


class CollinearDeploymentError(ValueError):
    """tAP geometry too degenerate for a closed-form initial fix."""


@dataclass(frozen=True)
class LocationEstimate:
    position: tuple[float, float]
    supporting_taps: frozenset[int]
    objective: float
    per_tap_residuals: tuple[tuple[int, float], ...] = ()
    converged: bool = True

    @property
    def xy(self) -> np.ndarray:
        return np.asarray(self.position, dtype=float)


@dataclass(frozen=True)
class Association:
    """Measurement index per (tap_id, target slot); 1-based into the
    descending-sorted set, 0 meaning no measurement associated."""

    entries: dict[tuple[int, int], int]

    def __post_init__(self):
        per_tap: dict[int, list[int]] = {}
        for (tap_id, _), idx in self.entries.items():
            if idx:
                per_tap.setdefault(tap_id, []).append(idx)
        for tap_id, idxs in per_tap.items():
            if len(idxs) != len(set(idxs)):
                raise ValueError(f"duplicate measurement index for tAP {tap_id}")

    def for_tap(self, tap_id: int) -> dict[int, int]:
        return {slot: idx for (t, slot), idx in self.entries.items() if t == tap_id}


@dataclass
class SolverConfig:
    """Thresholds and solver knobs for the localization stage.

    zeta_th, when set, is the fixed accept/reject threshold everywhere;
    otherwise the per-resolution rules apply (max resolution over the seed
    combination for the rough test, each set's own resolution for the
    attach test), which collapse to the common resolution in the
    homogeneous-bandwidth case.
    """

    zeta_th: float | None = None
    zeta_rough_fn: Callable[[Sequence[float]], float] | None = None
    zeta_acc_fn: Callable[[float], float] | None = None
    zeta_fuse: float = 5.0
    sigma_mode: str = "uniform"  # "uniform" | "resolution"
    gn_max_iters: int = 50
    gn_tol: float = 1e-8

    def zeta_rough(self, resolutions: Sequence[float]) -> float:
        if self.zeta_rough_fn is not None:
            return self.zeta_rough_fn(resolutions)
        if self.zeta_th is not None:
            return self.zeta_th
        return max(resolutions)

    def zeta_acc(self, resolution: float) -> float:
        if self.zeta_acc_fn is not None:
            return self.zeta_acc_fn(resolution)
        if self.zeta_th is not None:
            return self.zeta_th
        return resolution

    def sigmas(self, resolutions: Sequence[float]) -> list[float]:
        if self.sigma_mode == "resolution":
            ref = min(resolutions)
            return [r / ref for r in resolutions]
        return [1.0] * len(resolutions)


def predicted_range(anchor, q) -> float:
    q = np.asarray(q, dtype=float)
    return float(np.linalg.norm(q) + np.linalg.norm(q - np.asarray(anchor)))


def range_sum_residuals(anchors: np.ndarray, ds: np.ndarray, q) -> np.ndarray:
    """Unweighted residuals d_k - ||q|| - ||q - a_k||."""
    q = np.asarray(q, dtype=float)
    r_r = max(np.linalg.norm(q), _EPS_NORM)
    r_t = np.maximum(np.linalg.norm(q - anchors, axis=1), _EPS_NORM)
    return ds - r_r - r_t


def range_sum_jacobian(anchors: np.ndarray, q) -> np.ndarray:
    """Jacobian of range_sum_residuals w.r.t. q, one row per anchor."""
    q = np.asarray(q, dtype=float)
    r_r = max(np.linalg.norm(q), _EPS_NORM)
    diff = q - anchors
    r_t = np.maximum(np.linalg.norm(diff, axis=1), _EPS_NORM)
    return -(q / r_r + diff / r_t[:, None])


def _gn_core(anchors: np.ndarray, ds: np.ndarray, sigmas: np.ndarray,
             q0: np.ndarray, max_iters: int, tol: float):
    """Damped Gauss-Newton on the weighted range-sum residuals.

    Returns (q, objective, converged) with objective
    sum_k (d_k - pred_k)^2 / (2 sigma_k^2); damping multiplies up on any
    step that does not decrease the objective, so accepted iterations are
    monotone.
    """
    q = np.asarray(q0, dtype=float).copy()
    lam = 1e-3

    def objective(x):
        r = range_sum_residuals(anchors, ds, x) / sigmas
        return 0.5 * float(r @ r)

    obj = objective(q)
    converged = False
    for _ in range(max_iters):
        r = range_sum_residuals(anchors, ds, q) / sigmas
        jac = range_sum_jacobian(anchors, q) / sigmas[:, None]
        jtj = jac.T @ jac
        jtr = jac.T @ r
        # Note jtr is the half-gradient of the objective.
        if np.linalg.norm(jtr) < 1e-10 * max(1.0, obj):
            converged = True
            break
        step = None
        while lam < 1e12:
            try:
                delta = np.linalg.solve(jtj + lam * np.eye(2), -jtr)
            except np.linalg.LinAlgError:
                lam *= 10.0
                continue
            cand = q + delta
            cand_obj = objective(cand)
            if cand_obj <= obj:
                step = delta
                q, obj = cand, cand_obj
                lam = max(lam / 10.0, 1e-12)
                break
            lam *= 10.0
        if step is None:
            return q, obj, False
        if np.linalg.norm(step) < tol and lam <= 1e-3:
            # A full (barely damped) update this small means we are at a
            # stationary point; a small heavily-damped step does not.
            converged = True
            break
    return q, obj, converged


def _sx_candidates(anchors: np.ndarray, ds: np.ndarray) -> list[np.ndarray]:
    """Candidate fixes from the closed-form linearization.

    Squaring ||q - a_k|| = d_k - ||q|| linearizes each measurement into
    a_k . q = (||a_k||^2 - d_k^2)/2 + d_k ||q||, so q is linear in the
    unknown radius r = ||q||; substituting back gives a quadratic in r.
    Both admissible roots are returned (noise can make the wrong one fit
    marginally better, so downstream refinement tries each).
    """
    if np.linalg.matrix_rank(anchors, tol=1e-9 * max(1.0, np.abs(anchors).max())) < 2:
        raise CollinearDeploymentError("tAP positions are collinear with the rAP")
    b = 0.5 * ((anchors**2).sum(axis=1) - ds**2)
    pinv = np.linalg.pinv(anchors)
    g = pinv @ b
    h = pinv @ ds
    # ||g + r h||^2 = r^2
    aa = float(h @ h) - 1.0
    bb = 2.0 * float(g @ h)
    cc = float(g @ g)
    roots = []
    if abs(aa) > 1e-12:
        disc = bb * bb - 4.0 * aa * cc
        if disc >= 0:
            sq = math.sqrt(disc)
            roots = [(-bb + sq) / (2 * aa), (-bb - sq) / (2 * aa)]
    elif abs(bb) > 1e-12:
        roots = [-cc / bb]
    candidates = [g + r * h for r in sorted(roots, reverse=True) if r > -1e-9]
    if not candidates:
        # No consistent radius (heavy noise); best-effort vertex fallback.
        r = -bb / (2 * aa) if abs(aa) > 1e-12 else 0.0
        candidates = [g + max(r, 0.0) * h]
    return candidates


def sx_closed_form(ranges: Sequence[tuple]) -> np.ndarray:
    """Closed-form range-sum fix (rAP at the origin): the candidate from the
    linearized system that best fits the raw measurements."""
    if len(ranges) < 3:
        raise ValueError("need at least 3 ranges")
    anchors = np.array([np.asarray(p, dtype=float) for p, d, *_ in ranges])
    ds = np.array([float(d) for _, d, *_ in ranges])
    candidates = _sx_candidates(anchors, ds)

    def fit(q):
        res = range_sum_residuals(anchors, ds, q)
        return float(res @ res)

    return min(candidates, key=fit)


def _solve_best(anchors: np.ndarray, ds: np.ndarray, sigmas: np.ndarray,
                inits: Sequence[np.ndarray], max_iters: int, tol: float):
    """Refine from every candidate start, keep the lowest final objective."""
    best = None
    for q0 in inits:
        out = _gn_core(anchors, ds, sigmas, np.asarray(q0, float),
                       max_iters, tol)
        if best is None or out[1] < best[1] - _TIE_TOL:
            best = out
    return best


def solve_single_target(ranges: Sequence[tuple], init=None,
                        max_iters: int = 50, tol: float = 1e-8,
                        tap_ids: Sequence[int] | None = None) -> LocationEstimate:
    """Weighted least-squares position from >= 3 (anchor, range, sigma)
    triples, rAP at the origin. Initialized from the closed-form fix unless
    an explicit init is given."""
    if len(ranges) < 3:
        raise ValueError("need at least 3 ranges")
    anchors = np.array([np.asarray(p, dtype=float) for p, *_ in ranges])
    ds = np.array([float(r[1]) for r in ranges])
    sigmas = np.array([float(r[2]) if len(r) > 2 else 1.0 for r in ranges])
    if init is None:
        try:
            inits = _sx_candidates(anchors, ds)
        except CollinearDeploymentError:
            inits = [anchors.mean(axis=0) / 2.0]
    else:
        inits = [np.asarray(init, float)]
    q, obj, converged = _solve_best(anchors, ds, sigmas, inits,
                                    max_iters, tol)
    ids = tuple(tap_ids) if tap_ids is not None else tuple(range(len(ranges)))
    resid = np.abs(range_sum_residuals(anchors, ds, q))
    return LocationEstimate(
        position=(float(q[0]), float(q[1])),
        supporting_taps=frozenset(ids),
        objective=obj,
        per_tap_residuals=tuple(zip(ids, (float(x) for x in resid))),
        converged=converged,
    )


# ---------------------------------------------------------------------------
# Greedy association


@dataclass
class _TapData:
    """Mutable per-tAP measurement bookkeeping, rAP-centred coordinates."""

    tap_id: int
    anchor: np.ndarray
    values: list[float]  # descending
    resolution: float


@dataclass
class RoughResult:
    association: Association
    locations: list[LocationEstimate]
    zeta: float
    objective: float


def _solve_triple(taps: list[_TapData], idxs: tuple[int, ...],
                  sigmas: list[float], config: SolverConfig):
    anchors = np.array([t.anchor for t in taps])
    ds = np.array([t.values[i] for t, i in zip(taps, idxs)])
    sig = np.array(sigmas)
    try:
        inits = _sx_candidates(anchors, ds)
    except CollinearDeploymentError:
        inits = [anchors.mean(axis=0) / 2.0]
    q, obj, converged = _solve_best(anchors, ds, sig, inits,
                                    config.gn_max_iters, config.gn_tol)
    resid = np.abs(range_sum_residuals(anchors, ds, q))
    est = LocationEstimate(
        position=(float(q[0]), float(q[1])),
        supporting_taps=frozenset(t.tap_id for t in taps),
        objective=obj,
        per_tap_residuals=tuple((t.tap_id, float(r)) for t, r in zip(taps, resid)),
        converged=converged,
    )
    return obj, est, float(resid.max()), converged


def _rough_search(taps: list[_TapData], j_tilde: int,
                  config: SolverConfig) -> RoughResult | None:
    """Exhaustive 3-set association for j_tilde targets with pruning.

    The first set's indices are enumerated as an ascending combination
    (target slots are interchangeable), the other two as injections. A
    candidate pair is feasible only if the measurement difference is below
    the inter-tAP distance; per-candidate least-squares costs are memoized
    per index triple.
    """
    t1, t2, t3 = taps
    n1, n2, n3 = len(t1.values), len(t2.values), len(t3.values)
    if j_tilde < 1 or j_tilde > min(n1, n2, n3):
        return None
    sigmas = config.sigmas([t.resolution for t in taps])

    base12 = float(np.linalg.norm(t1.anchor - t2.anchor))
    base13 = float(np.linalg.norm(t1.anchor - t3.anchor))
    base23 = float(np.linalg.norm(t2.anchor - t3.anchor))
    v1, v2, v3 = t1.values, t2.values, t3.values
    feas12 = [[abs(a - b) < base12 for b in v2] for a in v1]
    feas13 = [[abs(a - b) < base13 for b in v3] for a in v1]
    feas23 = [[abs(a - b) < base23 for b in v3] for a in v2]

    triple_cache: dict[tuple[int, int, int], tuple] = {}

    def triple(i1, i2, i3):
        key = (i1, i2, i3)
        out = triple_cache.get(key)
        if out is None:
            out = _solve_triple(taps, key, sigmas, config)
            triple_cache[key] = out
        return out

    best: list = [math.inf, math.inf, None, None, None]  # cost, zeta, tuple, ests, assoc

    slots = list(range(j_tilde))
    for combo1 in itertools.combinations(range(n1), j_tilde):
        used2 = [False] * n2
        used3 = [False] * n3
        chosen: list[tuple[int, int, int]] = []
        ests: list = []

        def dfs(slot: int, partial: float, zmax: float):
            if partial > best[0] + _TIE_TOL:
                return
            if slot == j_tilde:
                flat = tuple(x for tri in chosen for x in tri)
                if (partial < best[0] - _TIE_TOL
                        or (abs(partial - best[0]) <= _TIE_TOL
                            and (zmax, flat) < (best[1], best[2] or flat))):
                    best[0], best[1], best[2] = partial, zmax, flat
                    best[3] = list(ests)
                    best[4] = list(chosen)
                return
            i1 = combo1[slot]
            for i2 in range(n2):
                if used2[i2] or not feas12[i1][i2]:
                    continue
                for i3 in range(n3):
                    if used3[i3] or not feas13[i1][i3] or not feas23[i2][i3]:
                        continue
                    cost, est, maxres, converged = triple(i1, i2, i3)
                    if not converged and not math.isfinite(cost):
                        continue
                    used2[i2] = used3[i3] = True
                    chosen.append((i1, i2, i3))
                    ests.append((est, maxres))
                    dfs(slot + 1, partial + cost, max(zmax, maxres))
                    ests.pop()
                    chosen.pop()
                    used2[i2] = used3[i3] = False

        dfs(0, 0.0, 0.0)

    if best[2] is None:
        return None
    entries = {}
    locations = []
    for slot, (tri, (est, _)) in enumerate(zip(best[4], best[3])):
        for t, idx in zip(taps, tri):
            entries[(t.tap_id, slot)] = idx + 1
        locations.append(est)
    return RoughResult(association=Association(entries), locations=locations,
                       zeta=best[1], objective=best[0])


def rough_estimate(range_sets: Sequence[RangeSet], tap_positions,
                   j_tilde: int, config: SolverConfig | None = None):
    """Best 3-set association and fixes for j_tilde targets, or None when
    every candidate is pruned. tap_positions maps tap_id to rAP-centred
    coordinates."""
    if len(range_sets) != 3:
        raise ValueError("rough estimation takes exactly 3 range sets")
    config = config or SolverConfig()
    taps = [_TapData(rs.tap_id, np.asarray(tap_positions[rs.tap_id], float),
                     list(rs.ranges), rs.resolution_m) for rs in range_sets]
    result = _rough_search(taps, j_tilde, config)
    if result is None:
        return None
    return result.association, result.locations, result.zeta


def _attach_remaining(rough: RoughResult, rest: list[_TapData],
                      config: SolverConfig) -> dict[tuple[int, int], int]:
    """Associate the non-seed sets to the rough fixes (0 when nothing is
    within threshold). Greedy by residual so no measurement serves two
    targets."""
    entries: dict[tuple[int, int], int] = {}
    positions = [est.xy for est in rough.locations]
    for tap in rest:
        zeta = config.zeta_acc(tap.resolution)
        cands = []
        for slot, q in enumerate(positions):
            pred = predicted_range(tap.anchor, q)
            for idx, d in enumerate(tap.values):
                resid = abs(d - pred)
                if resid <= zeta:
                    cands.append((resid, idx, slot))
        cands.sort()
        used_idx: set[int] = set()
        used_slot: set[int] = set()
        for resid, idx, slot in cands:
            if idx in used_idx or slot in used_slot:
                continue
            entries[(tap.tap_id, slot)] = idx + 1
            used_idx.add(idx)
            used_slot.add(slot)
        for slot in range(len(positions)):
            entries.setdefault((tap.tap_id, slot), 0)
    return entries


def accurate_estimate(rough, range_sets: Sequence[RangeSet], tap_positions,
                      config: SolverConfig | None = None):
    """Extend an accepted rough association to every tAP and re-solve.

    rough is the (association, locations, zeta) triple from rough_estimate;
    range_sets holds all K sets (seed combination included).
    """
    config = config or SolverConfig()
    if isinstance(rough, RoughResult):
        rr = rough
    else:
        assoc, locations, zeta = rough
        rr = RoughResult(assoc, list(locations), zeta, math.nan)
    seed_ids = {tap_id for (tap_id, _) in rr.association.entries.keys()}
    taps = {rs.tap_id: _TapData(rs.tap_id,
                                np.asarray(tap_positions[rs.tap_id], float),
                                list(rs.ranges), rs.resolution_m)
            for rs in range_sets}
    rest = [taps[tid] for tid in taps if tid not in seed_ids]
    entries = dict(rr.association.entries)
    entries.update(_attach_remaining(rr, rest, config))
    assoc = Association(entries)

    estimates = []
    for slot, rough_est in enumerate(rr.locations):
        triples = []
        ids = []
        for tap_id, tap in taps.items():
            idx = entries.get((tap_id, slot), 0)
            if idx:
                triples.append((tap.anchor, tap.values[idx - 1], 1.0))
                ids.append(tap_id)
        resolutions = [taps[tid].resolution for tid in ids]
        sig = config.sigmas(resolutions)
        triples = [(a, d, s) for (a, d, _), s in zip(triples, sig)]
        estimates.append(solve_single_target(
            triples, init=rough_est.xy, max_iters=config.gn_max_iters,
            tol=config.gn_tol, tap_ids=ids))
    return assoc, estimates


def prefilter_ranges(range_sets: Sequence[RangeSet], tap_positions,
                     scene_center, scene_radius: float,
                     rap_position=(0.0, 0.0)) -> list[RangeSet]:
    """Drop measurements that no target in the service disc could produce.

    Too small: at or below the blind-zone boundary d_b + 3.5 * resolution
    (a real scattered path there would be masked anyway). Too large: above
    the maximum range sum attainable inside the disc, plus one resolution.
    """
    rap = np.asarray(rap_position, dtype=float)
    center = np.asarray(scene_center, dtype=float) - rap
    out = []
    for rs in range_sets:
        anchor = np.asarray(tap_positions[rs.tap_id], dtype=float) - rap
        d_b = float(np.linalg.norm(anchor))
        lo = d_b + SBZ_MARGIN * rs.resolution_m
        hi = (float(np.linalg.norm(center)) + float(np.linalg.norm(center - anchor))
              + 2.0 * scene_radius + rs.resolution_m)
        kept = tuple(d for d in rs.ranges if lo < d <= hi)
        out.append(RangeSet(tap_id=rs.tap_id, ranges=kept,
                            resolution_m=rs.resolution_m, usable=rs.usable))
    return out


def reindex_hybrid(range_sets: Sequence[RangeSet]) -> list[int]:
    """Processing order: finest resolution first, larger sets first on ties.

    Returns a permutation (indices into range_sets); with uniform
    resolutions this is a pure descending-cardinality order.
    """
    return sorted(range(len(range_sets)),
                  key=lambda i: (range_sets[i].resolution_m, -len(range_sets[i])))


@dataclass
class LocalizationDiagnostics:
    accepted: list[dict] = field(default_factory=list)
    rejected: list[dict] = field(default_factory=list)
    leftover: dict[int, list[float]] = field(default_factory=dict)


@dataclass
class LocalizationResult:
    estimates: list[LocationEstimate]
    diagnostics: LocalizationDiagnostics

    def __iter__(self):
        return iter(self.estimates)

    def __len__(self):
        return len(self.estimates)


def localize_all(range_sets: Sequence[RangeSet], tap_positions,
                 j_total: int, config: SolverConfig | None = None,
                 scene_center=None, scene_radius: float | None = None,
                 rap_position=(0.0, 0.0)) -> LocalizationResult:
    """Full greedy association/localization over K >= 3 range sets.

    tap_positions and rap_position are in global coordinates; estimates are
    returned in global coordinates. When scene bounds are given, grossly
    out-of-window measurements are removed first. Produces at most j_total
    estimates; unexplained measurements are reported in the diagnostics
    rather than forced into targets.
    """
    if len(range_sets) < 3:
        raise ValueError("need at least 3 tAP range sets")
    config = config or SolverConfig()
    rap = np.asarray(rap_position, dtype=float)
    positions = {rs.tap_id: np.asarray(tap_positions[rs.tap_id], float) - rap
                 for rs in range_sets}

    sets = [rs for rs in range_sets if rs.usable]
    if scene_center is not None and scene_radius is not None:
        sets = prefilter_ranges(sets, tap_positions, scene_center,
                                scene_radius, rap_position)

    order = reindex_hybrid(sets)
    taps = [_TapData(sets[i].tap_id, positions[sets[i].tap_id],
                     list(sets[i].ranges), sets[i].resolution_m)
            for i in order]

    diagnostics = LocalizationDiagnostics()
    found: list[LocationEstimate] = []

    combos = sorted(itertools.combinations(range(1, len(taps) + 1), 3),
                    key=lambda c: (sum(c), c))
    for combo in combos:
        if len(found) >= j_total:
            break
        seed = [taps[k - 1] for k in combo]
        j_tilde = min(min(len(t.values) for t in seed), j_total - len(found))
        accepted = None
        while j_tilde >= 1:
            rough = _rough_search(seed, j_tilde, config)
            zeta_lim = config.zeta_rough([t.resolution for t in seed])
            if rough is None or rough.zeta > zeta_lim:
                diagnostics.rejected.append({
                    "taps": [t.tap_id for t in seed],
                    "j_tilde": j_tilde,
                    "zeta": None if rough is None else rough.zeta,
                    "zeta_limit": zeta_lim,
                })
                j_tilde -= 1
                continue
            accepted = rough
            break
        if accepted is None:
            continue

        seed_ids = {t.tap_id for t in seed}
        rest = [t for t in taps if t.tap_id not in seed_ids]
        entries = dict(accepted.association.entries)
        entries.update(_attach_remaining(accepted, rest, config))
        assoc = Association(entries)

        by_tap = {t.tap_id: t for t in taps}
        for slot, rough_est in enumerate(accepted.locations):
            triples = []
            ids = []
            for tap_id, tap in by_tap.items():
                idx = entries.get((tap_id, slot), 0)
                if idx:
                    triples.append((tap.anchor, tap.values[idx - 1]))
                    ids.append(tap_id)
            sig = config.sigmas([by_tap[tid].resolution for tid in ids])
            triples = [(a, d, s) for (a, d), s in zip(triples, sig)]
            est = solve_single_target(triples, init=rough_est.xy,
                                      max_iters=config.gn_max_iters,
                                      tol=config.gn_tol, tap_ids=ids)
            global_est = LocationEstimate(
                position=(float(est.position[0] + rap[0]),
                          float(est.position[1] + rap[1])),
                supporting_taps=est.supporting_taps,
                objective=est.objective,
                per_tap_residuals=est.per_tap_residuals,
                converged=est.converged,
            )
            found.append(global_est)

        diagnostics.accepted.append({
            "taps": sorted(seed_ids),
            "j_tilde": len(accepted.locations),
            "zeta": accepted.zeta,
            "objective": accepted.objective,
            "association": {f"{tid}:{slot}": idx
                            for (tid, slot), idx in entries.items()},
        })

        # Consume associated measurements.
        for (tap_id, _), idx in entries.items():
            if idx:
                by_tap[tap_id].values[idx - 1] = math.nan
        for t in taps:
            t.values = [v for v in t.values if not math.isnan(v)]

    diagnostics.leftover = {t.tap_id: list(t.values) for t in taps if t.values}
    return LocalizationResult(estimates=found, diagnostics=diagnostics)


def ghost_check(tap_positions, rap_position, point, service_radius=None,
                match_tol: float = 1e-6, distinct_tol: float = 1e-3) -> bool:
    """Deployment audit: does a second point reproduce this point's exact
    range sums for every tAP?

    Runs damped least-squares refinement from a deterministic 8x8 grid of
    starts over the service area and reports True when any run converges to
    an equivalent solution away from the true point. Spread deployments
    (no hyperbola separating the tAPs from the rAP) return False.
    """
    rap = np.asarray(rap_position, dtype=float)
    anchors = np.array([np.asarray(p, float) - rap for p in tap_positions])
    if len(anchors) < 2:
        raise ValueError("need at least 2 tAPs")
    q = np.asarray(point, dtype=float) - rap
    ds = np.array([predicted_range(a, q) for a in anchors])
    if service_radius is None:
        service_radius = 2.0 * max(float(np.linalg.norm(q)),
                                   float(np.abs(anchors).max())) + 10.0
    sigmas = np.ones(len(anchors))
    grid = np.linspace(-service_radius, service_radius, 8)
    for x0 in grid:
        for y0 in grid:
            cand, obj, converged = _gn_core(anchors, ds, sigmas,
                                            np.array([x0, y0]), 80, 1e-10)
            resid = np.abs(range_sum_residuals(anchors, ds, cand))
            if resid.max() < match_tol and np.linalg.norm(cand - q) > distinct_tol:
                return True
    return False


def fuse_multi_rap(estimate_sets: Sequence[Sequence[LocationEstimate]],
                   zeta_fuse: float) -> list[LocationEstimate]:
    """Result-level fusion across rAP subsystems.

    Estimates from different subsystems closer than zeta_fuse are greedily
    matched (nearest first, one per subsystem per cluster) and replaced by
    the mean position; singletons pass through unchanged.
    """
    items = [(r, i, est) for r, ests in enumerate(estimate_sets)
             for i, est in enumerate(ests)]
    n = len(items)
    parent = list(range(n))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    systems = [{items[i][0]} for i in range(n)]
    pairs = []
    for a in range(n):
        for b in range(a + 1, n):
            if items[a][0] == items[b][0]:
                continue
            dist = float(np.linalg.norm(items[a][2].xy - items[b][2].xy))
            if dist <= zeta_fuse:
                pairs.append((dist, a, b))
    pairs.sort()
    for _, a, b in pairs:
        ra, rb = find(a), find(b)
        if ra == rb or systems[ra] & systems[rb]:
            continue
        parent[rb] = ra
        systems[ra] |= systems[rb]

    clusters: dict[int, list[int]] = {}
    for i in range(n):
        clusters.setdefault(find(i), []).append(i)

    fused = []
    for root in sorted(clusters, key=lambda r: (items[r][0], items[r][1])):
        members = [items[i][2] for i in clusters[root]]
        pos = np.mean([m.xy for m in members], axis=0)
        fused.append(LocationEstimate(
            position=(float(pos[0]), float(pos[1])),
            supporting_taps=frozenset().union(*(m.supporting_taps for m in members)),
            objective=float(np.mean([m.objective for m in members])),
            per_tap_residuals=tuple(itertools.chain.from_iterable(
                m.per_tap_residuals for m in members)),
            converged=all(m.converged for m in members),
        ))
    return fused
