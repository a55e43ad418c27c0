"""Command-line front end.

Subcommands: simulate (one scene through the air interface and range
extraction), localize (range sets to target positions), montecarlo
(experiment suites), presets (list embedded scenarios). Exit codes:
0 success, 2 configuration error, 3 runtime failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np
import yaml

from . import harness
from .estimator import RangeSet, export_spectrum_csv
from .locator import SolverConfig, localize_all
from .numerology import CpMode, FrequencyRange, NumerologyError, max_subcarriers
from .presets import (PRESETS, ScenePreset, build_scene, get_preset,
                      sample_targets, sync_errors_for)
from .scene import Target


class ConfigError(ValueError):
    pass


def _fmt(value) -> str:
    if isinstance(value, float):
        return format(value, ".10g")
    return str(value)


def load_scenario(path) -> tuple[ScenePreset, tuple[Target, ...] | None]:
    """Scenario file (YAML, explicit units in key names) to a preset plus
    optional fixed target list."""
    try:
        raw = yaml.safe_load(Path(path).read_text())
    except (OSError, yaml.YAMLError) as exc:
        raise ConfigError(f"cannot read scenario {path}: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError("scenario file must be a mapping")
    try:
        preset = ScenePreset(
            name=str(raw.get("name", Path(path).stem)),
            description=str(raw.get("description", "user scenario")),
            tap_positions=tuple((float(x), float(y)) for x, y in raw["taps_m"]),
            rap_positions=tuple((float(x), float(y)) for x, y in raw["raps_m"]),
            disc_center=tuple(raw.get("disc_center_m", (0.0, 0.0))),
            disc_radius_m=float(raw.get("disc_radius_m", 400.0)),
            mu=int(raw.get("mu", 1)),
            fr=FrequencyRange(raw.get("fr", "FR1")),
            channel_bw_hz=float(raw.get("channel_bw_hz", 50e6)),
            carrier_hz=float(raw.get("carrier_hz", 4.9e9)),
            tx_power_dbm=float(raw.get("tx_power_dbm", 45.0)),
            rcs_m2=float(raw.get("rcs_m2", 1.0)),
            sto_std_s=float(raw.get("sto_std_ns", 10.0)) * 1e-9,
            cfo_std_rel=float(raw.get("cfo_std_rel", 0.01)),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"bad scenario file {path}: {exc}") from exc
    targets = None
    if "targets" in raw:
        targets = tuple(Target(
            position=tuple(t["position_m"]),
            velocity=tuple(t.get("velocity_mps", (0.0, 0.0))),
            rcs_m2=float(t.get("rcs_m2", preset.rcs_m2)),
        ) for t in raw["targets"])
    return preset, targets


def _resolve_preset(args) -> tuple[ScenePreset, tuple[Target, ...] | None]:
    if getattr(args, "scenario", None):
        preset, targets = load_scenario(args.scenario)
    else:
        try:
            preset = get_preset(args.preset)
        except KeyError as exc:
            raise ConfigError(str(exc)) from exc
        targets = None
    overrides = {}
    if getattr(args, "mu", None) is not None:
        overrides["mu"] = args.mu
    if getattr(args, "fr", None) is not None:
        overrides["fr"] = FrequencyRange(args.fr)
    if getattr(args, "bw_mhz", None) is not None:
        overrides["channel_bw_hz"] = args.bw_mhz * 1e6
    if getattr(args, "power_dbm", None) is not None:
        overrides["tx_power_dbm"] = args.power_dbm
    if getattr(args, "radius_m", None) is not None:
        overrides["disc_radius_m"] = args.radius_m
    if overrides:
        preset = replace(preset, **overrides)
    # Validate against the numerology tables before running anything.
    try:
        from .numerology import Numerology
        Numerology(preset.mu, CpMode.NORMAL)
        max_subcarriers(preset.mu, preset.fr, preset.channel_bw_hz)
    except NumerologyError as exc:
        raise ConfigError(str(exc)) from exc
    return preset, targets


def _sync_level(args):
    if args.sync == "perfect":
        return "perfect"
    if args.sync == "default":
        return "default"
    try:
        sto_ns, cfo_hz = (float(x) for x in args.sync.split(","))
    except ValueError as exc:
        raise ConfigError(
            "--sync must be 'perfect', 'default' or 'STO_NS,CFO_HZ'") from exc
    return (sto_ns * 1e-9, cfo_hz)


def _write_range_sets(path, preset, scene, sets, details, seed):
    payload = {
        "seed": seed,
        "preset": preset.name,
        "rap_position_m": list(scene.rap.position),
        "disc_center_m": list(preset.disc_center),
        "disc_radius_m": preset.disc_radius_m,
        "j_targets": len(scene.targets),
        "taps": [],
    }
    for tap, rs, det in zip(scene.taps, sets, details):
        payload["taps"].append({
            "tap_id": tap.id,
            "position_m": list(tap.position),
            "baseline_m": scene.baseline(tap),
            "resolution_m": rs.resolution_m,
            "usable": rs.usable,
            "sto_est_s": None if math.isnan(det["sto_s"]) else det["sto_s"],
            "cfo_est_hz": None if math.isnan(det["cfo_hz"]) else det["cfo_hz"],
            "ranges_m": list(rs.ranges),
        })
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _read_range_sets(path):
    try:
        payload = json.loads(Path(path).read_text())
        sets = []
        positions = {}
        for t in payload["taps"]:
            sets.append(RangeSet(tap_id=int(t["tap_id"]),
                                 ranges=tuple(t["ranges_m"]),
                                 resolution_m=float(t["resolution_m"]),
                                 usable=bool(t["usable"])))
            positions[int(t["tap_id"])] = tuple(t["position_m"])
        rap = tuple(payload["rap_position_m"])
        center = tuple(payload.get("disc_center_m", (0.0, 0.0)))
        radius = float(payload.get("disc_radius_m", 400.0))
        j = int(payload.get("j_targets", len(sets[0]) if sets else 1))
        return sets, positions, rap, center, radius, j
    except (OSError, KeyError, ValueError, json.JSONDecodeError) as exc:
        raise ConfigError(f"bad range-set file {path}: {exc}") from exc


def cmd_simulate(args) -> int:
    preset, fixed_targets = _resolve_preset(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng([args.seed, 5])
    targets = fixed_targets if fixed_targets is not None else sample_targets(
        preset, args.j, rng, args.speed_max)
    k = args.k if args.k is not None else len(preset.tap_positions)
    if not 1 <= k <= len(preset.tap_positions):
        raise ConfigError(f"--k must be in 1..{len(preset.tap_positions)}")
    syncs = sync_errors_for(preset, k, _sync_level(args), rng)
    scene = build_scene(preset, targets, sync_errors=syncs, k_taps=k)
    sets, details = harness.extract_range_sets(
        scene, args.m, args.nd, (args.seed, 97), with_detail=True,
        with_spectrum=args.dump_spectra)

    _write_range_sets(out / "range_sets.json", preset, scene, sets, details,
                      args.seed)
    with open(out / "path_estimates.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["tap_id", "path_index", "amplitude_re", "amplitude_im",
                         "delay_s", "doppler_hz", "delay_bin", "doppler_bin",
                         "valid"])
        for det in details:
            for li, p in enumerate(det["paths"]):
                writer.writerow([det["tap_id"], li,
                                 _fmt(p.amplitude.real), _fmt(p.amplitude.imag),
                                 _fmt(p.delay_s), _fmt(p.doppler_hz),
                                 _fmt(p.refined_bins[0]), _fmt(p.refined_bins[1]),
                                 int(p.valid)])
    truth = {
        "targets": [{"position_m": list(t.position),
                     "velocity_mps": list(t.velocity),
                     "rcs_m2": t.rcs_m2} for t in scene.targets],
        "true_ranges_m": {str(tap.id): [float(x) for x in
                                        scene.true_bistatic_ranges(tap)]
                          for tap in scene.taps},
    }
    (out / "truth.json").write_text(json.dumps(truth, indent=2, sort_keys=True)
                                    + "\n")
    if args.dump_spectra:
        for det in details:
            if det["spectrum"] is not None:
                export_spectrum_csv(det["spectrum"],
                                    out / f"spectrum_tap{det['tap_id']}.csv")
    n_unusable = sum(1 for rs in sets if not rs.usable)
    print(f"simulate: {len(sets)} tAPs, {len(scene.targets)} targets, "
          f"{n_unusable} unusable range sets -> {out}")
    return 0


def cmd_localize(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    if args.ranges:
        sets, positions, rap, center, radius, j_file = _read_range_sets(args.ranges)
        j = args.j if args.j is not None else j_file
    else:
        preset, fixed_targets = _resolve_preset(args)
        rng = np.random.default_rng([args.seed, 5])
        targets = fixed_targets if fixed_targets is not None else sample_targets(
            preset, args.j or 3, rng, args.speed_max)
        k = args.k if args.k is not None else len(preset.tap_positions)
        syncs = sync_errors_for(preset, k, _sync_level(args), rng)
        scene = build_scene(preset, targets, sync_errors=syncs, k_taps=k)
        sets = harness.extract_range_sets(scene, args.m, args.nd,
                                          (args.seed, 97))
        positions = {tap.id: tap.position for tap in scene.taps}
        rap = scene.rap.position
        center, radius = preset.disc_center, preset.disc_radius_m
        j = args.j if args.j is not None else len(targets)
    usable = [rs for rs in sets if rs.usable]
    if len(usable) < 3:
        raise ConfigError(f"need >= 3 usable tAP range sets, got {len(usable)}")

    config = SolverConfig(zeta_th=args.zeta)
    result = localize_all(sets, positions, j, config, scene_center=center,
                          scene_radius=radius, rap_position=rap)

    with open(out / "estimates.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["target", "x_m", "y_m", "n_taps", "objective",
                         "converged"])
        for i, est in enumerate(result.estimates):
            writer.writerow([i, _fmt(est.position[0]), _fmt(est.position[1]),
                             len(est.supporting_taps), _fmt(est.objective),
                             int(est.converged)])
    diag = {
        "n_estimates": len(result.estimates),
        "accepted": result.diagnostics.accepted,
        "rejected": result.diagnostics.rejected,
        "leftover_measurements": {str(k): v for k, v in
                                  result.diagnostics.leftover.items()},
        "estimates": [{"position_m": list(e.position),
                       "supporting_taps": sorted(e.supporting_taps),
                       "objective": e.objective,
                       "per_tap_residuals_m": [[t, r] for t, r in
                                               e.per_tap_residuals],
                       "converged": e.converged}
                      for e in result.estimates],
    }
    (out / "estimates.json").write_text(json.dumps(diag, indent=2,
                                                   sort_keys=True) + "\n")
    print(f"localize: {len(result.estimates)} of {j} targets -> {out}")
    return 0


def cmd_montecarlo(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    exp = harness.Experiment(
        preset=args.preset, trials=args.trials, seed=args.seed,
        j_targets=args.j, k_taps=args.k, m_symbols=args.m,
        n_doppler=args.nd, sync=_sync_level(args), mode=args.mode,
        workers=args.threads,
    )
    kwargs = {}
    if args.experiment == "localization_suite":
        kwargs["k_values"] = tuple(args.k_values) if args.k_values else (3, 5)
        kwargs["algorithms"] = tuple(args.algorithms)
    try:
        result = harness.run_experiment(args.experiment, exp, **kwargs)
    except KeyError as exc:
        raise ConfigError(str(exc.args[0])) from exc
    csv_path = out / f"{args.experiment}.csv"
    json_path = out / f"{args.experiment}_summary.json"
    harness.write_csv(result, csv_path)
    harness.write_json(result, json_path)
    print(f"montecarlo: {args.experiment} ({exp.trials} trials) -> "
          f"{csv_path}, {json_path}")
    return 0


def cmd_presets(args) -> int:
    for name in sorted(PRESETS):
        p = PRESETS[name]
        print(f"{name}: {p.description}")
        print(f"    taps={list(p.tap_positions)} raps={list(p.rap_positions)}")
        print(f"    mu={p.mu} {p.fr.value} bw={p.channel_bw_hz / 1e6:g} MHz "
              f"fc={p.carrier_hz / 1e9:g} GHz Pt={p.tx_power_dbm:g} dBm "
              f"R={p.disc_radius_m:g} m")
    return 0


def _add_common(parser, with_scene=True):
    parser.add_argument("--seed", type=int, default=0, help="root seed")
    parser.add_argument("--out", default="./out", help="output directory")
    parser.add_argument("--threads", type=int, default=1,
                        help="worker processes for trials")
    if with_scene:
        parser.add_argument("--preset", default="single-pair",
                            help="embedded scenario name (see 'presets')")
        parser.add_argument("--scenario", help="YAML scenario file")
        parser.add_argument("--mu", type=int, help="numerology override")
        parser.add_argument("--fr", choices=["FR1", "FR2"],
                            help="frequency range override")
        parser.add_argument("--bw-mhz", type=float, dest="bw_mhz",
                            help="channel bandwidth override (MHz)")
        parser.add_argument("--power-dbm", type=float, dest="power_dbm",
                            help="transmit power override (dBm)")
        parser.add_argument("--radius-m", type=float, dest="radius_m",
                            help="service disc radius override (m)")
        parser.add_argument("--j", type=int, default=3, help="target count")
        parser.add_argument("--k", type=int, help="tAP count (preset prefix)")
        parser.add_argument("--m", type=int, default=6,
                            help="reused OFDM symbols per sensing burst")
        parser.add_argument("--nd", type=int,
                            help="Doppler FFT size (default: pow2 >= 4M)")
        parser.add_argument("--sync", default="default",
                            help="'perfect', 'default' or 'STO_NS,CFO_HZ'")
        parser.add_argument("--speed-max", type=float, default=15.0,
                            dest="speed_max", help="max target speed (m/s)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="coopsense",
        description="bistatic multi-target localization from reused OFDM "
                    "downlink signals")
    sub = parser.add_subparsers(dest="command", required=True)

    p_sim = sub.add_parser("simulate", help="scene -> range sets")
    _add_common(p_sim)
    p_sim.add_argument("--dump-spectra", action="store_true",
                       help="export per-tAP delay-Doppler spectra as CSV")
    p_sim.set_defaults(fn=cmd_simulate)

    p_loc = sub.add_parser("localize", help="range sets -> target positions")
    _add_common(p_loc)
    p_loc.add_argument("--ranges", help="range_sets.json from 'simulate'")
    p_loc.add_argument("--zeta", type=float,
                       help="fixed association threshold (m); default: "
                            "per-set range resolution")
    p_loc.set_defaults(fn=cmd_localize, j=None)

    p_mc = sub.add_parser("montecarlo", help="experiment suites")
    _add_common(p_mc)
    p_mc.add_argument("--experiment", required=True,
                      help=f"one of: {', '.join(sorted(harness.EXPERIMENTS))}")
    p_mc.add_argument("--trials", type=int, default=100)
    p_mc.add_argument("--mode", choices=["real", "ideal"], default="real")
    p_mc.add_argument("--k-values", type=int, nargs="*", dest="k_values")
    p_mc.add_argument("--algorithms", nargs="*",
                      default=["greedy"], choices=["greedy", "exhaustive"])
    p_mc.set_defaults(fn=cmd_montecarlo, preset="sub6-ring")

    p_pre = sub.add_parser("presets", help="list embedded scenarios")
    p_pre.set_defaults(fn=cmd_presets)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except NumerologyError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - runtime failure boundary
        print(f"runtime failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
