"""Embedded scenario presets and scene construction helpers."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .numerology import CpMode, FrequencyRange, Numerology, max_subcarriers
from .scene import AccessPoint, ApRole, Scene, SyncError, Target


@dataclass(frozen=True)
class ScenePreset:
    name: str
    description: str
    tap_positions: tuple[tuple[float, float], ...]
    rap_positions: tuple[tuple[float, float], ...]
    disc_center: tuple[float, float]
    disc_radius_m: float
    mu: int
    fr: FrequencyRange
    channel_bw_hz: float
    carrier_hz: float
    tx_power_dbm: float = 45.0
    rcs_m2: float = 1.0
    sto_std_s: float = 10e-9
    cfo_std_rel: float = 0.01  # fraction of the subcarrier spacing

    @property
    def cfo_std_hz(self) -> float:
        return self.cfo_std_rel * Numerology(self.mu).scs_hz


def _ring(n: int, radius: float, start_deg: float = 90.0,
          step_deg: float = -72.0) -> tuple[tuple[float, float], ...]:
    pts = []
    for k in range(n):
        a = math.radians(start_deg + k * step_deg)
        pts.append((round(radius * math.cos(a), 6), round(radius * math.sin(a), 6)))
    return tuple(pts)


_SUB6_RING = _ring(5, 250.0)

PRESETS: dict[str, ScenePreset] = {
    # One tAP/rAP pair at sub-6 GHz; the setting for range-estimation studies.
    "single-pair": ScenePreset(
        name="single-pair",
        description="one tAP (-100,0) and one rAP (100,0), sub-6 GHz, "
                    "30 kHz SCS / 50 MHz, targets in a 400 m disc",
        tap_positions=((-100.0, 0.0),),
        rap_positions=((100.0, 0.0),),
        disc_center=(0.0, 0.0),
        disc_radius_m=400.0,
        mu=1, fr=FrequencyRange.FR1, channel_bw_hz=50e6, carrier_hz=4.9e9,
    ),
    # Five tAPs on a ring with the rAP at the disc centre. The standard
    # cooperative layout for localization experiments; ring coordinates are
    # a config choice, tAP k of a K-tAP run uses the first K entries.
    "sub6-ring": ScenePreset(
        name="sub6-ring",
        description="five tAPs on a 250 m ring, rAP at the centre, sub-6 GHz, "
                    "30 kHz SCS / 50 MHz, targets in a 400 m disc",
        tap_positions=_SUB6_RING,
        rap_positions=((0.0, 0.0),),
        disc_center=(0.0, 0.0),
        disc_radius_m=400.0,
        mu=1, fr=FrequencyRange.FR1, channel_bw_hz=50e6, carrier_hz=4.9e9,
    ),
    # Millimetre-wave small cell: finer range resolution, smaller service disc.
    "fr2-grid": ScenePreset(
        name="fr2-grid",
        description="five tAPs in a 100 m disc, rAP at the centre, FR2, "
                    "120 kHz SCS / 200 MHz",
        tap_positions=((-50.0, 0.0), (0.0, -50.0), (50.0, 50.0),
                       (-35.0, 35.0), (35.0, -35.0)),
        rap_positions=((0.0, 0.0),),
        disc_center=(0.0, 0.0),
        disc_radius_m=100.0,
        mu=3, fr=FrequencyRange.FR2, channel_bw_hz=200e6, carrier_hz=28e9,
    ),
    # Two receive APs sharing four tAPs, for result-level fusion runs.
    "dual-rap": ScenePreset(
        name="dual-rap",
        description="four shared tAPs with two selectable rAPs "
                    "(ring position 5 and the disc centre), sub-6 GHz",
        tap_positions=_SUB6_RING[:4],
        rap_positions=(_SUB6_RING[4], (0.0, 0.0)),
        disc_center=(0.0, 0.0),
        disc_radius_m=400.0,
        mu=1, fr=FrequencyRange.FR1, channel_bw_hz=50e6, carrier_hz=4.9e9,
    ),
}


def get_preset(name: str) -> ScenePreset:
    try:
        return PRESETS[name]
    except KeyError:
        known = ", ".join(sorted(PRESETS))
        raise KeyError(f"unknown preset {name!r}; available: {known}") from None


def preset_with(name: str, **overrides) -> ScenePreset:
    return replace(get_preset(name), **overrides)


def make_access_point(ap_id: int, position, role: ApRole,
                      preset: ScenePreset,
                      cp_mode: CpMode = CpMode.NORMAL) -> AccessPoint:
    numerology = Numerology(preset.mu, cp_mode)
    bandwidth = max_subcarriers(preset.mu, preset.fr, preset.channel_bw_hz)
    return AccessPoint(
        id=ap_id, position=(float(position[0]), float(position[1])), role=role,
        carrier_hz=preset.carrier_hz, tx_power_dbm=preset.tx_power_dbm,
        bandwidth=bandwidth, numerology=numerology,
    )


def sample_targets(preset: ScenePreset, count: int, rng: np.random.Generator,
                   speed_max: float = 15.0) -> tuple[Target, ...]:
    """Targets uniform over the service disc with random headings."""
    targets = []
    cx, cy = preset.disc_center
    for _ in range(count):
        r = preset.disc_radius_m * math.sqrt(rng.uniform())
        a = rng.uniform(0.0, 2.0 * math.pi)
        speed = rng.uniform(0.0, speed_max)
        heading = rng.uniform(0.0, 2.0 * math.pi)
        targets.append(Target(
            position=(cx + r * math.cos(a), cy + r * math.sin(a)),
            velocity=(speed * math.cos(heading), speed * math.sin(heading)),
            rcs_m2=preset.rcs_m2,
        ))
    return tuple(targets)


def build_scene(preset: ScenePreset, targets, sync_errors=None,
                k_taps: int | None = None, rap_index: int = 0,
                noise_figure_db: float = 0.0) -> Scene:
    """Scene from a preset: the first k_taps transmit positions plus the
    selected rAP."""
    k = k_taps if k_taps is not None else len(preset.tap_positions)
    if not 1 <= k <= len(preset.tap_positions):
        raise ValueError(f"k_taps must be in 1..{len(preset.tap_positions)}")
    taps = tuple(make_access_point(i + 1, pos, ApRole.TRANSMIT, preset)
                 for i, pos in enumerate(preset.tap_positions[:k]))
    rap = make_access_point(100 + rap_index,
                            preset.rap_positions[rap_index],
                            ApRole.RECEIVE, preset)
    return Scene(taps=taps, rap=rap, targets=tuple(targets),
                 sync_errors=tuple(sync_errors) if sync_errors else (),
                 noise_figure_db=noise_figure_db)


def sync_errors_for(preset: ScenePreset, k_taps: int, level,
                    rng: np.random.Generator) -> tuple[SyncError, ...]:
    """Draw per-tAP sync errors for a named level or an explicit
    (sto_std_s, cfo_std_hz) pair; "perfect" means all zeros."""
    if level == "perfect":
        return tuple(SyncError() for _ in range(k_taps))
    if level == "default":
        sto_std, cfo_std = preset.sto_std_s, preset.cfo_std_hz
    else:
        sto_std, cfo_std = level
    return tuple(SyncError(sto_s=float(rng.normal(0.0, sto_std)),
                           cfo_hz=float(rng.normal(0.0, cfo_std)))
                 for _ in range(k_taps))
