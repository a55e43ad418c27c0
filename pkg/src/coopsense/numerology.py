"""5G NR frame-structure arithmetic: subcarrier spacing, CP lengths, symbol
timing and maximum transmission bandwidth.

Everything here is table-driven from 3GPP TS 38.211 / TS 38.101-1 / TS 38.101-2
(Release 17). Unsupported combinations are rejected, never interpolated.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

FFT_SIZE = 4096  # samples per OFDM symbol body, all numerologies

BASE_SCS_HZ = 15_000.0


class CpMode(Enum):
    NORMAL = "normal"
    EXTENDED = "extended"


class FrequencyRange(Enum):
    FR1 = "FR1"
    FR2 = "FR2"


# TS 38.211: frequency ranges in which each SCS configuration may be deployed.
_FR_BY_MU = {
    0: (FrequencyRange.FR1,),
    1: (FrequencyRange.FR1,),
    2: (FrequencyRange.FR1, FrequencyRange.FR2),
    3: (FrequencyRange.FR2,),
    4: (FrequencyRange.FR2,),
    5: (FrequencyRange.FR2,),
    6: (FrequencyRange.FR2,),
}

# TS 38.101-1 Table 5.3.2-1 / TS 38.101-2 Table 5.3.2-1, restricted to the
# channel bandwidths handled by this package: (mu, FR) -> {bw_hz: n_rb}.
_NRB_TABLE: dict[tuple[int, FrequencyRange], dict[float, int]] = {
    (0, FrequencyRange.FR1): {20e6: 106, 50e6: 270},
    (1, FrequencyRange.FR1): {20e6: 51, 50e6: 133, 100e6: 273},
    (2, FrequencyRange.FR1): {20e6: 24, 50e6: 65, 100e6: 135},
    (2, FrequencyRange.FR2): {50e6: 66, 100e6: 132, 200e6: 264},
    (3, FrequencyRange.FR2): {50e6: 32, 100e6: 66, 200e6: 132},
}


class NumerologyError(ValueError):
    """Invalid or unsupported NR configuration."""


@dataclass(frozen=True)
class Numerology:
    """SCS/CP configuration and the timing quantities derived from it.

    mu selects the subcarrier spacing 2**mu * 15 kHz; the extended CP exists
    only for mu = 2 (60 kHz).
    """

    mu: int
    cp_mode: CpMode = CpMode.NORMAL

    def __post_init__(self):
        if not 0 <= self.mu <= 6:
            raise NumerologyError(f"mu must be in 0..6, got {self.mu}")
        if self.cp_mode is CpMode.EXTENDED and self.mu != 2:
            raise NumerologyError("extended CP is only defined for mu=2")

    @property
    def scs_hz(self) -> float:
        return (2**self.mu) * BASE_SCS_HZ

    @property
    def fft_size(self) -> int:
        return FFT_SIZE

    @property
    def sample_interval_s(self) -> float:
        return 1.0 / (FFT_SIZE * self.scs_hz)

    @property
    def symbols_per_slot(self) -> int:
        return 12 if self.cp_mode is CpMode.EXTENDED else 14

    @property
    def slots_per_subframe(self) -> int:
        return 2**self.mu

    @property
    def symbols_per_frame(self) -> int:
        return 10 * self.slots_per_subframe * self.symbols_per_slot

    def uniform_symbol_period_s(self) -> float:
        """Symbol period used for a contiguous sensing burst.

        Bursts are scheduled to avoid the long-CP symbols (slot positions 0
        and 7), so a single period with the short normal CP applies to every
        reused symbol; the extended CP is uniform by construction.
        """
        q = 1024 if self.cp_mode is CpMode.EXTENDED else 288
        return (FFT_SIZE + q) * self.sample_interval_s


def cp_samples(numerology: Numerology, symbol_index_in_slot: int) -> int:
    """CP length in samples for a given symbol position within the slot.

    TS 38.211: extended CP is always 1024 samples; normal CP is 288 samples
    except for slot positions 0 and 7 which carry 288 + 2**(mu+5).
    """
    if not 0 <= symbol_index_in_slot < numerology.symbols_per_slot:
        raise NumerologyError(
            f"symbol index {symbol_index_in_slot} out of range for "
            f"{numerology.symbols_per_slot} symbols per slot"
        )
    if numerology.cp_mode is CpMode.EXTENDED:
        return 1024
    if symbol_index_in_slot in (0, 7):
        return 288 + 2 ** (numerology.mu + 5)
    return 288


def symbol_period(numerology: Numerology, symbol_index_in_slot: int) -> float:
    """OFDM symbol duration (CP included) in seconds."""
    q = cp_samples(numerology, symbol_index_in_slot)
    return (FFT_SIZE + q) * numerology.sample_interval_s


@dataclass(frozen=True)
class BandwidthConfig:
    """Active-subcarrier allocation for one channel-bandwidth setup."""

    channel_bw_hz: float
    n_rb: int
    n_subcarriers: int = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "n_subcarriers", 12 * self.n_rb)


def max_subcarriers(mu: int, fr: FrequencyRange, channel_bw_hz: float) -> BandwidthConfig:
    """Maximum transmission bandwidth configuration for (mu, FR, bandwidth).

    Looks up N_RB in the embedded TS 38.101 table; combinations the standard
    marks N/A raise NumerologyError.
    """
    if not 0 <= mu <= 6:
        raise NumerologyError(f"mu must be in 0..6, got {mu}")
    if fr not in _FR_BY_MU[mu]:
        raise NumerologyError(f"mu={mu} is not deployed in {fr.value}")
    row = _NRB_TABLE.get((mu, fr))
    if row is None:
        raise NumerologyError(f"no bandwidth table row for mu={mu}, {fr.value}")
    n_rb = row.get(float(channel_bw_hz))
    if n_rb is None:
        raise NumerologyError(
            f"channel bandwidth {channel_bw_hz / 1e6:g} MHz is N/A for "
            f"mu={mu}, {fr.value}"
        )
    return BandwidthConfig(channel_bw_hz=float(channel_bw_hz), n_rb=n_rb)


def supported_bandwidths(mu: int, fr: FrequencyRange) -> tuple[float, ...]:
    """Channel bandwidths with a table entry for (mu, FR), ascending."""
    row = _NRB_TABLE.get((mu, fr), {})
    return tuple(sorted(row))
