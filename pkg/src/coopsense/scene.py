"""Scene geometry, link budget and synchronization-error model.

A scene is one sensing task: a set of transmitting APs, one receiving AP,
and the targets whose scattered paths are to be measured. All geometry is
planar; positions are metres, velocities m/s.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .constants import SPEED_OF_LIGHT, THERMAL_NOISE_DBM_PER_HZ
from .numerology import BandwidthConfig, Numerology

SBZ_MARGIN = 3.5  # blind-zone width in units of the bistatic range resolution


class ApRole(Enum):
    TRANSMIT = "transmit"
    RECEIVE = "receive"


@dataclass(frozen=True)
class AccessPoint:
    id: int
    position: tuple[float, float]
    role: ApRole
    carrier_hz: float
    tx_power_dbm: float
    bandwidth: BandwidthConfig
    numerology: Numerology

    @property
    def xy(self) -> np.ndarray:
        return np.asarray(self.position, dtype=float)

    @property
    def wavelength_m(self) -> float:
        return SPEED_OF_LIGHT / self.carrier_hz


@dataclass(frozen=True)
class Target:
    position: tuple[float, float]
    velocity: tuple[float, float] = (0.0, 0.0)
    rcs_m2: float = 1.0

    def __post_init__(self):
        if self.rcs_m2 <= 0:
            raise ValueError("rcs_m2 must be positive")

    @property
    def xy(self) -> np.ndarray:
        return np.asarray(self.position, dtype=float)

    @property
    def v(self) -> np.ndarray:
        return np.asarray(self.velocity, dtype=float)


@dataclass(frozen=True)
class SyncError:
    """Residual timing/frequency offset of one tAP relative to the rAP.

    Constant over a sensing task.
    """

    sto_s: float = 0.0
    cfo_hz: float = 0.0


@dataclass(frozen=True)
class PathTruth:
    """Ground-truth parameters of one propagation path (0 = direct path)."""

    tap_id: int
    path_index: int
    delay_s: float
    doppler_hz: float
    amplitude: float


class PathKind(Enum):
    LOS = "los"
    SCATTERED = "scattered"


def bistatic_geometry(ap: AccessPoint, rap: AccessPoint, target: Target):
    """Distances tAP->target (d_t), target->rAP (d_r) and their sum (d_s)."""
    d_t = float(np.linalg.norm(target.xy - ap.xy))
    d_r = float(np.linalg.norm(target.xy - rap.xy))
    return d_t, d_r, d_t + d_r


def baseline_range(ap: AccessPoint, rap: AccessPoint) -> float:
    return float(np.linalg.norm(ap.xy - rap.xy))


def bistatic_doppler(ap: AccessPoint, rap: AccessPoint, target: Target,
                     carrier_hz: float) -> float:
    """Doppler shift of the scattered path, positive for a closing target.

    Equals -(d/dt of the bistatic range) divided by the carrier wavelength.
    """
    if carrier_hz <= 0:
        raise ValueError("carrier_hz must be positive")
    d_t = np.linalg.norm(target.xy - ap.xy)
    d_r = np.linalg.norm(target.xy - rap.xy)
    if d_t == 0.0 or d_r == 0.0:
        raise ValueError("target coincides with an access point")
    u_away_t = (target.xy - ap.xy) / d_t
    u_away_r = (target.xy - rap.xy) / d_r
    range_rate = float(target.v @ (u_away_t + u_away_r))
    wavelength = SPEED_OF_LIGHT / carrier_hz
    return -range_rate / wavelength


def path_amplitude(kind: PathKind, *, tx_power_dbm: float, carrier_hz: float,
                   d_t: float = 0.0, d_r: float = 0.0, d_b: float = 0.0,
                   rcs_m2: float = 1.0) -> float:
    """Linear path amplitude (sqrt of received power in mW), unit antenna gains.

    Direct path follows free-space (Friis) attenuation over the baseline d_b;
    scattered paths follow the bistatic radar equation over d_t and d_r.
    """
    p_t_mw = 10.0 ** (tx_power_dbm / 10.0)
    lam = SPEED_OF_LIGHT / carrier_hz
    if kind is PathKind.LOS:
        if d_b <= 0:
            raise ValueError("baseline distance must be positive")
        p_r = p_t_mw * lam**2 / ((4.0 * math.pi) ** 2 * d_b**2)
    else:
        if d_t <= 0 or d_r <= 0:
            raise ValueError("path distances must be positive")
        p_r = p_t_mw * lam**2 * rcs_m2 / ((4.0 * math.pi) ** 3 * d_t**2 * d_r**2)
    return math.sqrt(p_r)


def range_resolution(n_subcarriers: int, scs_hz: float) -> float:
    """Bistatic range resolution of the 2D-FFT processing, c0 / (Nc * scs)."""
    return SPEED_OF_LIGHT / (n_subcarriers * scs_hz)


def sbz_contains(ap: AccessPoint, rap: AccessPoint, target: Target,
                 delta_ds: float) -> bool:
    """Whether the target sits in the sensing blind zone of this tAP/rAP pair.

    Inside the zone the scattered-path peak is masked by the direct-path
    peak: d_s <= d_b + 3.5 * delta_ds (boundary inclusive).
    """
    if delta_ds <= 0:
        raise ValueError("delta_ds must be positive")
    _, _, d_s = bistatic_geometry(ap, rap, target)
    return d_s <= baseline_range(ap, rap) + SBZ_MARGIN * delta_ds


def noise_power_mw(n_subcarriers: int, scs_hz: float,
                   noise_figure_db: float = 0.0) -> float:
    """Receiver noise power (mW) over the occupied bandwidth Nc * scs."""
    bw_hz = n_subcarriers * scs_hz
    return 10.0 ** ((THERMAL_NOISE_DBM_PER_HZ + 10.0 * math.log10(bw_hz)
                     + noise_figure_db) / 10.0)


def sample_sync_errors(n_taps: int, rng: np.random.Generator,
                       sto_std_s: float, cfo_std_hz: float) -> tuple[SyncError, ...]:
    """Draw independent zero-mean Gaussian STO/CFO pairs, one per tAP."""
    stos = rng.normal(0.0, sto_std_s, size=n_taps)
    cfos = rng.normal(0.0, cfo_std_hz, size=n_taps)
    return tuple(SyncError(sto_s=float(t), cfo_hz=float(f))
                 for t, f in zip(stos, cfos))


@dataclass(frozen=True)
class Scene:
    """Immutable snapshot of one sensing task."""

    taps: tuple[AccessPoint, ...]
    rap: AccessPoint
    targets: tuple[Target, ...]
    sync_errors: tuple[SyncError, ...] = ()
    noise_figure_db: float = 0.0

    def __post_init__(self):
        positions = {tuple(t.position) for t in self.taps}
        if len(positions) != len(self.taps):
            raise ValueError("tAP positions must be distinct")
        if self.rap.role is not ApRole.RECEIVE:
            raise ValueError("rap must have the receive role")
        if not self.sync_errors:
            object.__setattr__(
                self, "sync_errors",
                tuple(SyncError() for _ in self.taps))
        elif len(self.sync_errors) != len(self.taps):
            raise ValueError("one SyncError per tAP required")

    def sync_for(self, tap: AccessPoint) -> SyncError:
        return self.sync_errors[self.tap_index(tap)]

    def tap_index(self, tap: AccessPoint) -> int:
        for i, t in enumerate(self.taps):
            if t.id == tap.id:
                return i
        raise KeyError(f"tAP id {tap.id} not in scene")

    def baseline(self, tap: AccessPoint) -> float:
        return baseline_range(tap, self.rap)

    def resolution_for(self, tap: AccessPoint) -> float:
        return range_resolution(tap.bandwidth.n_subcarriers,
                                tap.numerology.scs_hz)

    def noise_power_for(self, tap: AccessPoint) -> float:
        return noise_power_mw(tap.bandwidth.n_subcarriers,
                              tap.numerology.scs_hz, self.noise_figure_db)

    def paths_for(self, tap: AccessPoint) -> list[PathTruth]:
        """Ground-truth path list for one tAP: direct path first, then one
        scattered path per target in target order."""
        d_b = self.baseline(tap)
        paths = [PathTruth(
            tap_id=tap.id, path_index=0,
            delay_s=d_b / SPEED_OF_LIGHT, doppler_hz=0.0,
            amplitude=path_amplitude(PathKind.LOS, tx_power_dbm=tap.tx_power_dbm,
                                     carrier_hz=tap.carrier_hz, d_b=d_b),
        )]
        for j, tgt in enumerate(self.targets, start=1):
            d_t, d_r, d_s = bistatic_geometry(tap, self.rap, tgt)
            paths.append(PathTruth(
                tap_id=tap.id, path_index=j,
                delay_s=d_s / SPEED_OF_LIGHT,
                doppler_hz=bistatic_doppler(tap, self.rap, tgt, tap.carrier_hz),
                amplitude=path_amplitude(
                    PathKind.SCATTERED, tx_power_dbm=tap.tx_power_dbm,
                    carrier_hz=tap.carrier_hz, d_t=d_t, d_r=d_r,
                    rcs_m2=tgt.rcs_m2),
            ))
        return paths

    def true_bistatic_ranges(self, tap: AccessPoint) -> np.ndarray:
        """d_s per target, in target order."""
        return np.array([bistatic_geometry(tap, self.rap, t)[2]
                         for t in self.targets])
