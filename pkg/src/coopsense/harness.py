"""Monte Carlo experiment runner.

Experiments reproduce the standard evaluations at desk scale: range-error
CDFs under different synchronization/bandwidth settings, range-estimation
success versus transmit power (including beyond-CP distances), localization
success/RMSE versus target and tAP count for the greedy and exhaustive
associators, result-level fusion across two rAPs, and CPU-time scaling.

Every trial derives its generators from (root seed, stratum, trial) integer
keys, so results are reproducible bit-for-bit and independent of execution
order; aggregation is a commutative merge of per-trial records.
"""

from __future__ import annotations

import csv
import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment

from .airsim import channel_estimate, channel_matrix, generate_symbols, receive
from .estimator import (RangeSet, compensate_and_range, default_n_doppler,
                        delay_doppler_spectrum, extract_paths)
from .locator import SolverConfig, fuse_multi_rap, localize_all
from .oracle import ExhaustiveSearchTooLarge, exhaustive_associate, ideal_ranges
from .presets import (ScenePreset, build_scene, get_preset, preset_with,
                      sample_targets, sync_errors_for)
from .scene import SBZ_MARGIN, Scene, Target, bistatic_geometry

# Decorrelate generator streams across experiment families.
_TAGS = {"range_cdf": 11, "success_vs_power": 23, "localization_suite": 37,
         "multi_rap": 53, "timing": 71, "simulate": 97}


@dataclass
class Experiment:
    """Scenario template plus randomization law for one experiment run."""

    preset: str = "sub6-ring"
    trials: int = 200
    seed: int = 0
    j_targets: int = 3
    k_taps: int | None = None
    m_symbols: int = 6
    n_doppler: int | None = None
    sync: object = "default"  # "perfect" | "default" | (sto_std_s, cfo_std_hz)
    mode: str = "real"  # "real" | "ideal"
    speed_max: float = 15.0
    noise_figure_db: float = 0.0
    workers: int = 1

    def scene_preset(self) -> ScenePreset:
        return get_preset(self.preset)


@dataclass
class ExperimentResult:
    name: str
    config: dict
    columns: list[str]
    rows: list[list] = field(default_factory=list)
    summary: dict = field(default_factory=dict)


def _fmt(value) -> str:
    if isinstance(value, float):
        return format(value, ".10g")
    return str(value)


def write_csv(result: ExperimentResult, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(result.columns)
        for row in result.rows:
            writer.writerow([_fmt(v) for v in row])


def write_json(result: ExperimentResult, path) -> None:
    payload = {"experiment": result.name, "config": result.config,
               "summary": result.summary}
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def rate_ci95(successes: int, total: int) -> tuple[float, float, float]:
    """Success rate and normal-approximation 95% interval."""
    if total == 0:
        return math.nan, math.nan, math.nan
    p = successes / total
    half = 1.96 * math.sqrt(max(p * (1.0 - p), 0.0) / total)
    return p, max(0.0, p - half), min(1.0, p + half)


def cdf_points(errors: Sequence[float], max_points: int = 200) -> list[list[float]]:
    """Empirical CDF breakpoints of the finite entries, downsampled."""
    finite = sorted(e for e in errors if math.isfinite(e))
    n = len(finite)
    if n == 0:
        return []
    idx = np.unique(np.linspace(0, n - 1, min(max_points, n)).astype(int))
    return [[float(finite[i]), (i + 1) / n] for i in idx]


def _rng(*keys: int) -> np.random.Generator:
    return np.random.default_rng([int(k) & 0x7FFFFFFF for k in keys])


def _map_trials(fn: Callable, payloads: list, workers: int) -> list:
    if workers <= 1:
        return [fn(p) for p in payloads]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, payloads, chunksize=max(1, len(payloads) // (8 * workers))))


# ---------------------------------------------------------------------------
# Trial building blocks


def extract_range_sets(scene: Scene, m_symbols: int, n_doppler: int | None,
                       seed_keys: Sequence[int], with_detail: bool = False,
                       with_spectrum: bool = False):
    """Full Stage-I pipeline for every tAP of a scene.

    Returns the list of RangeSets, plus per-tAP detail records (path
    estimates, offset estimates, optionally the pre-extraction spectrum)
    when with_detail is set.
    """
    out = []
    details = []
    n_paths = len(scene.targets) + 1
    for ti, tap in enumerate(scene.taps):
        rng = _rng(*seed_keys, ti)
        nc = tap.bandwidth.n_subcarriers
        tx = generate_symbols(nc, m_symbols, rng)
        h = channel_matrix(scene.paths_for(tap), scene.sync_errors[ti],
                           tap.numerology, nc, m_symbols)
        rx = receive(tx, h, scene.noise_power_for(tap), rng)
        nd = n_doppler or default_n_doppler(m_symbols)
        paths = extract_paths(tx, rx, n_paths, tap.numerology, nd)
        period = tap.numerology.uniform_symbol_period_s()
        rs, sto, cfo = compensate_and_range(
            paths, scene.baseline(tap), 1.0 / (m_symbols * period),
            scene.resolution_for(tap), tap_id=tap.id)
        out.append(rs)
        if with_detail:
            record = {"tap_id": tap.id, "paths": paths, "sto_s": sto,
                      "cfo_hz": cfo, "spectrum": None}
            if with_spectrum:
                record["spectrum"] = delay_doppler_spectrum(
                    channel_estimate(tx, rx), nd, tap.numerology)
            details.append(record)
    if with_detail:
        return out, details
    return out


def trial_range_sets(scene: Scene, exp: Experiment,
                     seed_keys: Sequence[int]) -> list[RangeSet]:
    if exp.mode == "ideal":
        return ideal_ranges(scene, None, _rng(*seed_keys, 991))
    return extract_range_sets(scene, exp.m_symbols, exp.n_doppler, seed_keys)


def range_error_rows(scene: Scene, range_sets: Sequence[RangeSet]):
    """Per (tAP, target) absolute range error with blind-zone annotation.

    Measurements are matched to true bistatic ranges by optimal assignment;
    targets left unmatched get an infinite error.
    """
    rows = []
    for tap, rs in zip(scene.taps, range_sets):
        truth = scene.true_bistatic_ranges(tap)
        res = scene.resolution_for(tap)
        d_b = scene.baseline(tap)
        errors = np.full(len(truth), np.inf)
        meas = np.asarray(rs.ranges) if rs.usable else np.array([])
        if meas.size:
            cost = np.abs(truth[:, None] - meas[None, :])
            ri, ci = linear_sum_assignment(cost)
            errors[ri] = cost[ri, ci]
        for j, (d_s, err) in enumerate(zip(truth, errors)):
            rows.append({
                "tap_id": tap.id,
                "target": j,
                "true_range_m": float(d_s),
                "error_m": float(err),
                "in_sbz": bool(d_s <= d_b + SBZ_MARGIN * res),
                "resolution_m": res,
            })
    return rows


def localization_errors(true_positions: np.ndarray, estimates) -> np.ndarray:
    """Per true target position error after optimal matching (inf = missed)."""
    true_positions = np.asarray(true_positions, dtype=float)
    errors = np.full(len(true_positions), np.inf)
    if len(estimates) == 0:
        return errors
    est = np.array([e.xy for e in estimates])
    cost = np.linalg.norm(true_positions[:, None, :] - est[None, :, :], axis=2)
    ri, ci = linear_sum_assignment(cost)
    errors[ri] = cost[ri, ci]
    return errors


def target_on_ellipse(tap_pos, rap_pos, d_s: float, angle: float,
                      velocity=(0.0, 0.0), rcs_m2: float = 1.0) -> Target:
    """Target placed so its bistatic range for (tap, rap) is exactly d_s."""
    f1 = np.asarray(tap_pos, dtype=float)
    f2 = np.asarray(rap_pos, dtype=float)
    c = float(np.linalg.norm(f2 - f1)) / 2.0
    a = d_s / 2.0
    if a <= c:
        raise ValueError("bistatic range must exceed the baseline")
    b = math.sqrt(a * a - c * c)
    center = (f1 + f2) / 2.0
    ux = (f2 - f1) / (2.0 * c)
    uy = np.array([-ux[1], ux[0]])
    p = center + a * math.cos(angle) * ux + b * math.sin(angle) * uy
    return Target(position=(float(p[0]), float(p[1])), velocity=velocity,
                  rcs_m2=rcs_m2)


def sample_targets_sbz_free(preset: ScenePreset, count: int, k_taps: int,
                            rng: np.random.Generator, speed_max: float = 15.0,
                            max_tries: int = 200) -> tuple[Target, ...]:
    """Uniform-disc targets redrawn until no (tAP, target) pair is blind."""
    scene_probe = build_scene(preset, sample_targets(preset, count, rng,
                                                     speed_max), k_taps=k_taps)
    for _ in range(max_tries):
        ok = True
        for tap in scene_probe.taps:
            res = scene_probe.resolution_for(tap)
            d_b = scene_probe.baseline(tap)
            for tgt in scene_probe.targets:
                _, _, d_s = bistatic_geometry(tap, scene_probe.rap, tgt)
                if d_s <= d_b + SBZ_MARGIN * res:
                    ok = False
                    break
            if not ok:
                break
        if ok:
            return scene_probe.targets
        scene_probe = build_scene(preset, sample_targets(preset, count, rng,
                                                         speed_max),
                                  k_taps=k_taps)
    raise RuntimeError("could not sample a blind-zone-free scene")


def inject_outlier(range_sets: Sequence[RangeSet], scene: Scene,
                   rng: np.random.Generator,
                   offset_resolutions: float = 5.0) -> list[RangeSet]:
    """Replace one random measurement by a gross error.

    The replacement is redrawn inside the plausible measurement window of
    its tAP until it sits more than offset_resolutions range resolutions
    away from every true bistatic range, so it survives the coarse
    prefilter but fits no target.
    """
    sets = [list(rs.ranges) for rs in range_sets]
    candidates = [k for k, v in enumerate(sets) if v]
    k = int(rng.choice(candidates))
    tap = scene.taps[k]
    res = range_sets[k].resolution_m
    truth = scene.true_bistatic_ranges(tap)
    d_b = scene.baseline(tap)
    lo = d_b + SBZ_MARGIN * res + 0.5 * res
    hi = d_b + 2.0 * 0.95 * _scene_radius_hint(scene)
    victim = int(rng.integers(len(sets[k])))
    for _ in range(1000):
        cand = float(rng.uniform(lo, hi))
        if np.all(np.abs(truth - cand) > offset_resolutions * res):
            sets[k][victim] = cand
            break
    out = []
    for rs, vals in zip(range_sets, sets):
        out.append(RangeSet(tap_id=rs.tap_id, ranges=tuple(vals),
                            resolution_m=rs.resolution_m, usable=rs.usable))
    return out


def _scene_radius_hint(scene: Scene) -> float:
    pts = [np.linalg.norm(t.xy - scene.rap.xy) for t in scene.targets]
    pts += [np.linalg.norm(tap.xy - scene.rap.xy) for tap in scene.taps]
    return max(400.0, 1.5 * max(pts))


# ---------------------------------------------------------------------------
# Experiments


def run_range_cdf(exp: Experiment, j_values: Sequence[int] = (2, 4),
                  sync_levels: Sequence = ("perfect", "default"),
                  bandwidth_cases: Sequence[tuple] | None = None
                  ) -> ExperimentResult:
    """Range-error CDFs stratified by (J, sync level), or by numerology and
    channel bandwidth when bandwidth_cases is given."""
    base = exp.scene_preset()
    strata = []
    if bandwidth_cases:
        for case_ix, (mu, fr, bw) in enumerate(bandwidth_cases):
            strata.append((f"mu{mu}_bw{int(bw / 1e6)}MHz",
                           preset_with(base.name, mu=mu, fr=fr, channel_bw_hz=bw),
                           exp.j_targets, exp.sync, case_ix))
    else:
        ix = 0
        for j in j_values:
            for sync in sync_levels:
                strata.append((f"j{j}_{sync}", base, j, sync, ix))
                ix += 1

    columns = ["stratum", "trial", "n_targets", "n_valid", "n_success",
               "mean_error_m", "max_error_m"]
    result = ExperimentResult(
        name="range_cdf",
        config={"preset": exp.preset, "trials": exp.trials, "seed": exp.seed,
                "m_symbols": exp.m_symbols, "strata": [s[0] for s in strata]},
        columns=columns)

    payloads = [(label, preset, j, sync, six, trial, exp)
                for label, preset, j, sync, six in strata
                for trial in range(exp.trials)]
    outcomes = _map_trials(_range_cdf_trial, payloads, exp.workers)

    per_stratum: dict[str, dict] = {}
    for payload, rows in zip(payloads, outcomes):
        label, trial = payload[0], payload[5]
        non_sbz = [r for r in rows if not r["in_sbz"]]
        errors = [r["error_m"] for r in non_sbz]
        agg = per_stratum.setdefault(label, {"errors": [], "resolution": None})
        agg["errors"].extend(errors)
        if rows:
            agg["resolution"] = rows[0]["resolution_m"]
        n_success = sum(1 for r in non_sbz
                        if r["error_m"] <= r["resolution_m"] / 2.0)
        finite = [e for e in errors if math.isfinite(e)]
        result.rows.append([
            label, trial, len(rows), len(finite), n_success,
            float(np.mean(finite)) if finite else math.nan,
            float(np.max(finite)) if finite else math.nan,
        ])

    summary = {}
    for label, agg in per_stratum.items():
        res = agg["resolution"]
        errs = agg["errors"]
        n_ok = sum(1 for e in errs if e <= res / 2.0)
        rate, lo, hi = rate_ci95(n_ok, len(errs))
        summary[label] = {
            "n_measurements": len(errs),
            "resolution_m": res,
            "frac_below_half_resolution": rate,
            "ci_95": [lo, hi],
            "cdf": cdf_points(errs),
        }
    result.summary = summary
    return result


def _range_cdf_trial(payload):
    label, preset, j, sync, stratum_ix, trial, exp = payload
    rng = _rng(exp.seed, _TAGS["range_cdf"], stratum_ix, trial)
    targets = sample_targets(preset, j, rng, exp.speed_max)
    syncs = sync_errors_for(preset, len(preset.tap_positions), sync, rng)
    scene = build_scene(preset, targets, sync_errors=syncs,
                        noise_figure_db=exp.noise_figure_db)
    sets = extract_range_sets(scene, exp.m_symbols, exp.n_doppler,
                              (exp.seed, _TAGS["range_cdf"], stratum_ix, trial, 7))
    return range_error_rows(scene, sets)


def run_success_vs_power(exp: Experiment,
                         power_grid_dbm: Sequence[float] = (25.0, 35.0, 45.0),
                         range_bands: Sequence[tuple] = ((250.0, 700.0),
                                                         (700.0, 1400.0),
                                                         (1400.0, 1800.0)),
                         ) -> ExperimentResult:
    """Range-estimation success rate per (transmit power, bistatic-range
    band); targets are placed directly on the requested ellipses so bands
    beyond the CP-equivalent range are exercised."""
    columns = ["power_dbm", "band_low_m", "band_high_m", "trial",
               "n_measurements", "n_success"]
    result = ExperimentResult(
        name="success_vs_power",
        config={"preset": exp.preset, "trials": exp.trials, "seed": exp.seed,
                "m_symbols": exp.m_symbols, "j_targets": exp.j_targets,
                "power_grid_dbm": list(power_grid_dbm),
                "range_bands": [list(b) for b in range_bands]},
        columns=columns)

    payloads = []
    for pi, p_dbm in enumerate(power_grid_dbm):
        for bi, band in enumerate(range_bands):
            for trial in range(exp.trials):
                payloads.append((p_dbm, band, pi, bi, trial, exp))
    outcomes = _map_trials(_success_power_trial, payloads, exp.workers)

    acc: dict[tuple, list[int]] = {}
    for (p_dbm, band, _, _, trial, _), (n_meas, n_ok) in zip(payloads, outcomes):
        key = (p_dbm, band)
        acc.setdefault(key, [0, 0])
        acc[key][0] += n_meas
        acc[key][1] += n_ok
        result.rows.append([p_dbm, band[0], band[1], trial, n_meas, n_ok])

    summary = {}
    for (p_dbm, band), (n_meas, n_ok) in acc.items():
        rate, lo, hi = rate_ci95(n_ok, n_meas)
        summary[f"p{p_dbm:g}dBm_band{band[0]:g}-{band[1]:g}"] = {
            "power_dbm": p_dbm, "band_m": list(band),
            "n_measurements": n_meas, "success_rate": rate, "ci_95": [lo, hi],
        }
    result.summary = summary
    return result


def _success_power_trial(payload):
    p_dbm, band, pi, bi, trial, exp = payload
    tag = _TAGS["success_vs_power"]
    rng = _rng(exp.seed, tag, pi, bi, trial)
    preset = preset_with(exp.preset, tx_power_dbm=float(p_dbm))
    tap_pos = preset.tap_positions[0]
    rap_pos = preset.rap_positions[0]
    targets = []
    for _ in range(exp.j_targets):
        d_s = float(rng.uniform(band[0], band[1]))
        angle = float(rng.uniform(0.0, 2.0 * math.pi))
        speed = float(rng.uniform(0.0, exp.speed_max))
        heading = float(rng.uniform(0.0, 2.0 * math.pi))
        targets.append(target_on_ellipse(
            tap_pos, rap_pos, d_s, angle,
            velocity=(speed * math.cos(heading), speed * math.sin(heading)),
            rcs_m2=preset.rcs_m2))
    syncs = sync_errors_for(preset, 1, exp.sync, rng)
    scene = build_scene(preset, targets, sync_errors=syncs, k_taps=1,
                        noise_figure_db=exp.noise_figure_db)
    sets = extract_range_sets(scene, exp.m_symbols, exp.n_doppler,
                              (exp.seed, tag, pi, bi, trial, 7))
    rows = range_error_rows(scene, sets)
    usable = [r for r in rows if not r["in_sbz"]]
    n_ok = sum(1 for r in usable if r["error_m"] <= r["resolution_m"] / 2.0)
    return len(usable), n_ok


def run_localization_suite(exp: Experiment,
                           k_values: Sequence[int] = (3, 5),
                           algorithms: Sequence[str] = ("greedy",),
                           sbz_free: bool = False) -> ExperimentResult:
    """Localization success/RMSE/timing per (K, algorithm) for the configured
    measurement mode."""
    preset = exp.scene_preset()
    k_max = max(k_values)
    if k_max > len(preset.tap_positions):
        raise ValueError(f"preset {preset.name} has only "
                         f"{len(preset.tap_positions)} tAP positions")
    # Wall-clock values stay out of the CSV so re-runs are byte-identical;
    # medians land in the JSON summary instead.
    columns = ["k_taps", "algorithm", "trial", "n_targets", "n_localized",
               "n_success", "rmse_m"]
    result = ExperimentResult(
        name="localization_suite",
        config={"preset": exp.preset, "trials": exp.trials, "seed": exp.seed,
                "mode": exp.mode, "j_targets": exp.j_targets,
                "k_values": list(k_values), "algorithms": list(algorithms),
                "m_symbols": exp.m_symbols, "sbz_free": sbz_free},
        columns=columns)

    payloads = [(trial, tuple(k_values), tuple(algorithms), sbz_free, exp)
                for trial in range(exp.trials)]
    outcomes = _map_trials(_localization_trial, payloads, exp.workers)

    acc: dict[tuple, dict] = {}
    for trial, per_case in enumerate(outcomes):
        for (k, algo), rec in per_case.items():
            result.rows.append([k, algo, trial, rec["n_targets"],
                                rec["n_localized"], rec["n_success"],
                                rec["rmse_m"]])
            agg = acc.setdefault((k, algo), {
                "targets": 0, "success": 0, "sq_err": [], "times": []})
            agg["targets"] += rec["n_targets"]
            agg["success"] += rec["n_success"]
            agg["sq_err"].extend(rec["sq_errors"])
            agg["times"].append(rec["elapsed_s"])

    summary = {}
    for (k, algo), agg in sorted(acc.items()):
        rate, lo, hi = rate_ci95(agg["success"], agg["targets"])
        summary[f"k{k}_{algo}"] = {
            "k_taps": k, "algorithm": algo,
            "n_targets": agg["targets"],
            "success_rate": rate, "ci_95": [lo, hi],
            "rmse_m": float(np.sqrt(np.mean(agg["sq_err"]))) if agg["sq_err"]
            else math.nan,
            "median_time_s": float(np.median(agg["times"])),
        }
    result.summary = summary
    return result


def _localization_trial(payload):
    trial, k_values, algorithms, sbz_free, exp = payload
    tag = _TAGS["localization_suite"]
    preset = exp.scene_preset()
    k_max = max(k_values)
    rng = _rng(exp.seed, tag, trial)
    if sbz_free:
        targets = sample_targets_sbz_free(preset, exp.j_targets, k_max, rng,
                                          exp.speed_max)
    else:
        targets = sample_targets(preset, exp.j_targets, rng, exp.speed_max)
    syncs = sync_errors_for(preset, k_max, exp.sync, rng)
    scene = build_scene(preset, targets, sync_errors=syncs, k_taps=k_max,
                        noise_figure_db=exp.noise_figure_db)
    if exp.mode == "ideal":
        sets = ideal_ranges(scene, None, _rng(exp.seed, tag, trial, 991))
    else:
        sets = extract_range_sets(scene, exp.m_symbols, exp.n_doppler,
                                  (exp.seed, tag, trial, 7))
    truth = np.array([t.position for t in scene.targets])
    res = scene.resolution_for(scene.taps[0])
    out = {}
    for k in k_values:
        subset = sets[:k]
        positions = {tap.id: tap.position for tap in scene.taps[:k]}
        for algo in algorithms:
            t0 = time.perf_counter()
            estimates = _run_algorithm(algo, subset, positions, exp.j_targets,
                                       preset, scene)
            elapsed = time.perf_counter() - t0
            errors = localization_errors(truth, estimates)
            matched = errors[np.isfinite(errors)]
            out[(k, algo)] = {
                "n_targets": len(truth),
                "n_localized": len(estimates),
                "n_success": int(np.sum(errors <= res / 2.0)),
                "rmse_m": float(np.sqrt(np.mean(matched**2))) if matched.size
                else math.nan,
                "sq_errors": [float(e * e) for e in matched],
                "elapsed_s": elapsed,
            }
    return out


def _run_algorithm(algo: str, sets, positions, j_targets: int,
                   preset: ScenePreset, scene: Scene):
    rap_pos = scene.rap.position
    if algo == "greedy":
        result = localize_all(sets, positions, j_targets,
                              SolverConfig(),
                              scene_center=preset.disc_center,
                              scene_radius=preset.disc_radius_m,
                              rap_position=rap_pos)
        return result.estimates
    if algo == "exhaustive":
        j_eff = min([j_targets] + [len(rs) for rs in sets])
        if j_eff < 1:
            return []
        try:
            res = exhaustive_associate(sets, positions, j_eff,
                                       rap_position=rap_pos)
        except ExhaustiveSearchTooLarge:
            return []
        return res.locations
    raise ValueError(f"unknown algorithm {algo!r}")


def run_multi_rap(exp: Experiment, zeta_fuse: float | None = None,
                  targets_fn: Callable | None = None) -> ExperimentResult:
    """Localization-error CDFs for each single-rAP subsystem and for the
    fused two-rAP system (dual-rap style presets)."""
    preset = exp.scene_preset()
    n_sub = len(preset.rap_positions)
    if n_sub < 2:
        raise ValueError("multi-rAP experiment needs a preset with >= 2 rAPs")
    columns = ["trial", "system", "n_targets", "n_localized", "n_success",
               "mean_error_m"]
    result = ExperimentResult(
        name="multi_rap",
        config={"preset": exp.preset, "trials": exp.trials, "seed": exp.seed,
                "mode": exp.mode, "j_targets": exp.j_targets,
                "zeta_fuse": zeta_fuse},
        columns=columns)

    payloads = [(trial, zeta_fuse, targets_fn, exp)
                for trial in range(exp.trials)]
    outcomes = _map_trials(_multi_rap_trial, payloads, exp.workers)

    acc: dict[str, dict] = {}
    for trial, per_system in enumerate(outcomes):
        for system, rec in per_system.items():
            result.rows.append([trial, system, rec["n_targets"],
                                rec["n_localized"], rec["n_success"],
                                rec["mean_error_m"]])
            agg = acc.setdefault(system, {"targets": 0, "success": 0,
                                          "errors": []})
            agg["targets"] += rec["n_targets"]
            agg["success"] += rec["n_success"]
            agg["errors"].extend(rec["errors"])

    summary = {}
    for system, agg in sorted(acc.items()):
        rate, lo, hi = rate_ci95(agg["success"], agg["targets"])
        summary[system] = {
            "n_targets": agg["targets"], "success_rate": rate,
            "ci_95": [lo, hi], "cdf": cdf_points(agg["errors"]),
        }
    result.summary = summary
    return result


def _multi_rap_trial(payload):
    trial, zeta_fuse, targets_fn, exp = payload
    tag = _TAGS["multi_rap"]
    preset = exp.scene_preset()
    rng = _rng(exp.seed, tag, trial)
    if targets_fn is not None:
        targets = targets_fn(trial, rng)
    else:
        targets = sample_targets(preset, exp.j_targets, rng, exp.speed_max)
    k = len(preset.tap_positions)
    truth = np.array([t.position for t in targets])
    res_m = None
    estimate_sets = []
    per_system = {}
    for r in range(len(preset.rap_positions)):
        syncs = sync_errors_for(preset, k, exp.sync, rng)
        scene = build_scene(preset, targets, sync_errors=syncs, rap_index=r,
                            noise_figure_db=exp.noise_figure_db)
        res_m = scene.resolution_for(scene.taps[0])
        if exp.mode == "ideal":
            sets = ideal_ranges(scene, None, _rng(exp.seed, tag, trial, r, 991))
        else:
            sets = extract_range_sets(scene, exp.m_symbols, exp.n_doppler,
                                      (exp.seed, tag, trial, r, 7))
        positions = {tap.id: tap.position for tap in scene.taps}
        loc = localize_all(sets, positions, exp.j_targets, SolverConfig(),
                           scene_center=preset.disc_center,
                           scene_radius=preset.disc_radius_m,
                           rap_position=scene.rap.position)
        estimate_sets.append(loc.estimates)
        per_system[f"rap{r}"] = _system_metrics(truth, loc.estimates, res_m)
    fuse_threshold = zeta_fuse if zeta_fuse is not None else 3.0 * res_m
    fused = fuse_multi_rap(estimate_sets, fuse_threshold)
    per_system["fused"] = _system_metrics(truth, fused, res_m)
    return per_system


def _system_metrics(truth: np.ndarray, estimates, resolution_m: float):
    errors = localization_errors(truth, estimates)
    finite = errors[np.isfinite(errors)]
    return {
        "n_targets": len(truth),
        "n_localized": len(estimates),
        "n_success": int(np.sum(errors <= resolution_m / 2.0)),
        "mean_error_m": float(np.mean(finite)) if finite.size else math.nan,
        "errors": [float(e) for e in errors],
    }


def run_timing(exp: Experiment, j_values: Sequence[int] = (1, 2, 3, 4),
               ) -> ExperimentResult:
    """Median CPU time of the greedy associator versus exhaustive search,
    on blind-zone-free synthetic measurements."""
    preset = exp.scene_preset()
    k = exp.k_taps or len(preset.tap_positions)
    columns = ["j_targets", "trial", "greedy_s", "exhaustive_s"]
    result = ExperimentResult(
        name="timing",
        config={"preset": exp.preset, "trials": exp.trials, "seed": exp.seed,
                "k_taps": k, "j_values": list(j_values)},
        columns=columns)
    tag = _TAGS["timing"]
    summary = {}
    for ji, j in enumerate(j_values):
        greedy_times = []
        exhaustive_times = []
        for trial in range(exp.trials):
            rng = _rng(exp.seed, tag, ji, trial)
            targets = sample_targets_sbz_free(preset, j, k, rng, exp.speed_max)
            scene = build_scene(preset, targets, k_taps=k,
                                noise_figure_db=exp.noise_figure_db)
            sets = ideal_ranges(scene, None, _rng(exp.seed, tag, ji, trial, 991))
            positions = {tap.id: tap.position for tap in scene.taps}
            t0 = time.perf_counter()
            localize_all(sets, positions, j, SolverConfig(),
                         scene_center=preset.disc_center,
                         scene_radius=preset.disc_radius_m,
                         rap_position=scene.rap.position)
            t1 = time.perf_counter()
            exhaustive_associate(sets, positions, j,
                                 rap_position=scene.rap.position)
            t2 = time.perf_counter()
            greedy_times.append(t1 - t0)
            exhaustive_times.append(t2 - t1)
            result.rows.append([j, trial, t1 - t0, t2 - t1])
        summary[f"j{j}"] = {
            "j_targets": j,
            "greedy_median_s": float(np.median(greedy_times)),
            "exhaustive_median_s": float(np.median(exhaustive_times)),
        }
    result.summary = summary
    return result


EXPERIMENTS = {
    "range_cdf": run_range_cdf,
    "success_vs_power": run_success_vs_power,
    "localization_suite": run_localization_suite,
    "multi_rap": run_multi_rap,
    "timing": run_timing,
}


def run_experiment(name: str, exp: Experiment, **kwargs) -> ExperimentResult:
    try:
        fn = EXPERIMENTS[name]
    except KeyError:
        known = ", ".join(sorted(EXPERIMENTS))
        raise KeyError(f"unknown experiment {name!r}; available: {known}") from None
    return fn(exp, **kwargs)
