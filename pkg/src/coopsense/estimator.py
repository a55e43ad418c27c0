"""Stage I: bistatic range measurement from one tAP's received grid.

Pipeline per tAP: conjugate-demodulate to a channel estimate, zero-pad and
2D-transform it into a delay-Doppler spectrum, then iteratively take the
strongest peak, refine it to sub-bin accuracy, convert to a path estimate
and subtract the fitted component before the next pass. The direct path
doubles as the synchronization reference: its known geometry turns the
extracted delays into absolute bistatic ranges.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .airsim import GridKind, SymbolGrid, channel_estimate
from .constants import SPEED_OF_LIGHT
from .numerology import Numerology

_INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0

# Peak power this far above the estimated noise floor counts as a real path.
DEFAULT_PEAK_THRESHOLD_DB = 13.0

# Direct-path Doppler must stay within this many Doppler-resolution cells;
# residual carrier offsets are far smaller in any sane deployment.
LOS_DOPPLER_CELLS = 2.0


@dataclass(frozen=True)
class DelayDopplerSpectrum:
    """Magnitude spectrum over (delay bin, Doppler bin)."""

    values: np.ndarray
    delay_bin_s: float
    doppler_bin_hz: float

    @property
    def n_delay(self) -> int:
        return self.values.shape[0]

    @property
    def n_doppler(self) -> int:
        return self.values.shape[1]

    def peak_bin(self) -> tuple[int, int]:
        flat = int(np.argmax(self.values))
        p, q = np.unravel_index(flat, self.values.shape)
        return int(p), int(q)


@dataclass(frozen=True)
class PathEstimate:
    """One extracted propagation path."""

    amplitude: complex
    delay_s: float
    doppler_hz: float
    refined_bins: tuple[float, float]
    valid: bool = True


@dataclass(frozen=True)
class RangeSet:
    """Bistatic range measurements of one tAP, sorted descending so that
    element t (1-based) is the t-th largest."""

    tap_id: int
    ranges: tuple[float, ...]
    resolution_m: float
    usable: bool = True

    def __post_init__(self):
        object.__setattr__(self, "ranges", tuple(sorted(self.ranges, reverse=True)))
        if any(r <= 0 for r in self.ranges):
            raise ValueError("ranges must be strictly positive")

    def __len__(self) -> int:
        return len(self.ranges)

    def largest(self, t: int) -> float:
        """t-th largest measurement, 1-based."""
        if not 1 <= t <= len(self.ranges):
            raise IndexError(f"index {t} out of range for {len(self.ranges)} entries")
        return self.ranges[t - 1]


def default_n_doppler(n_symbols: int) -> int:
    """Doppler FFT size: smallest power of two >= 4 * n_symbols."""
    n = 1
    while n < 4 * n_symbols:
        n *= 2
    return n


def delay_doppler_spectrum(est: SymbolGrid, n_doppler: int,
                           numerology: Numerology) -> DelayDopplerSpectrum:
    """Zero-padded inverse transform over subcarriers / forward transform over
    symbols of a channel-estimate grid, scaled by 1/n_doppler."""
    return _spectrum_from_matrix(est.data, n_doppler, numerology)


def _spectrum_from_matrix(g: np.ndarray, n_doppler: int,
                          numerology: Numerology) -> DelayDopplerSpectrum:
    n_fft = numerology.fft_size
    if n_doppler < g.shape[1]:
        raise ValueError(f"n_doppler={n_doppler} smaller than symbol count {g.shape[1]}")
    spec = np.fft.fft(np.fft.ifft(g, n=n_fft, axis=0), n=n_doppler, axis=1)
    spec *= n_fft / n_doppler
    period = numerology.uniform_symbol_period_s()
    return DelayDopplerSpectrum(
        values=np.abs(spec),
        delay_bin_s=1.0 / (n_fft * numerology.scs_hz),
        doppler_bin_hz=1.0 / (n_doppler * period),
    )


def _correlation(g: np.ndarray, p: float, q: float, n_fft: int,
                 n_doppler: int) -> complex:
    """Continuous-coordinate matched correlation at (p, q) bins."""
    i = np.arange(g.shape[0])
    m = np.arange(g.shape[1])
    u = np.exp(2j * np.pi * p * i / n_fft)
    v = np.exp(-2j * np.pi * q * m / n_doppler)
    return complex(u @ g @ v)


def _golden_max(f, lo: float, hi: float, tol: float) -> float:
    a, b = lo, hi
    c = b - _INV_PHI * (b - a)
    d = a + _INV_PHI * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc > fd:
            b, d, fd = d, c, fc
            c = b - _INV_PHI * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + _INV_PHI * (b - a)
            fd = f(d)
    return 0.5 * (a + b)


def _refine_on_matrix(g: np.ndarray, coarse_bin: tuple[int, int], n_fft: int,
                      n_doppler: int, tol: float = 1e-4,
                      max_rounds: int = 12) -> tuple[float, float]:
    p0, q0 = coarse_bin
    i = np.arange(g.shape[0])
    m = np.arange(g.shape[1])
    p, q = float(p0), float(q0)
    # Alternating 1-D golden-section passes over the +-1-bin box; the
    # objective is separable for an isolated path, so this converges in a
    # couple of rounds even with residual interference.
    for _ in range(max_rounds):
        gv = g @ np.exp(-2j * np.pi * q * m / n_doppler)
        p_new = _golden_max(
            lambda pp: abs(np.exp(2j * np.pi * pp * i / n_fft) @ gv),
            p0 - 1.0, p0 + 1.0, tol)
        ug = np.exp(2j * np.pi * p_new * i / n_fft) @ g
        q_new = _golden_max(
            lambda qq: abs(ug @ np.exp(-2j * np.pi * qq * m / n_doppler)),
            q0 - 1.0, q0 + 1.0, tol)
        moved = max(abs(p_new - p), abs(q_new - q))
        p, q = p_new, q_new
        if moved < tol:
            break
    return p, q


def refine_peak(tx: SymbolGrid, rx: SymbolGrid, coarse_bin: tuple[int, int],
                n_doppler: int, n_fft: int = 4096) -> tuple[float, float]:
    """Maximize the matched-correlation modulus over the +-1-bin box around a
    coarse spectral peak; returns real-valued bin coordinates."""
    g = channel_estimate(tx, rx).data
    return _refine_on_matrix(g, coarse_bin, n_fft, n_doppler)


def estimate_component(amplitude: complex, p: float, q: float,
                       n_subcarriers: int, n_symbols: int, n_fft: int,
                       n_doppler: int) -> np.ndarray:
    """Rank-one channel component with the given amplitude and refined bins."""
    i = np.arange(n_subcarriers)[:, None]
    m = np.arange(n_symbols)[None, :]
    return amplitude * np.exp(-2j * np.pi * i * p / n_fft) \
        * np.exp(2j * np.pi * m * q / n_doppler)


def _wrap_signed(x: float, n: int) -> float:
    return (x + n / 2.0) % n - n / 2.0


def extract_paths(tx: SymbolGrid, rx: SymbolGrid, n_paths: int,
                  numerology: Numerology, n_doppler: int | None = None,
                  stop_below_floor: bool = False,
                  peak_threshold_db: float = DEFAULT_PEAK_THRESHOLD_DB,
                  ) -> list[PathEstimate]:
    """Iterative extract-and-eliminate over the strongest spectral peaks.

    With stop_below_floor=False exactly n_paths estimates are returned, in
    extraction (descending-energy) order; any taken from a residual whose
    peak no longer clears the noise floor are flagged invalid. With
    stop_below_floor=True extraction stops at the floor instead (for use
    when the path count is unknown).
    """
    if n_paths < 1:
        raise ValueError("n_paths must be >= 1")
    n_fft = numerology.fft_size
    n_sub, n_sym = tx.data.shape
    if n_doppler is None:
        n_doppler = default_n_doppler(n_sym)
    threshold = 10.0 ** (peak_threshold_db / 10.0)

    residual = channel_estimate(tx, rx).data.copy()
    estimates: list[PathEstimate] = []
    for _ in range(n_paths):
        spec = _spectrum_from_matrix(residual, n_doppler, numerology)
        p0, q0 = spec.peak_bin()
        power = spec.values**2
        # Median-based floor is robust to the handful of true peaks.
        floor = np.median(power) / math.log(2.0)
        valid = bool(power[p0, q0] > threshold * floor)
        if stop_below_floor and not valid:
            break
        p, q = _refine_on_matrix(residual, (p0, q0), n_fft, n_doppler)
        corr = _correlation(residual, p, q, n_fft, n_doppler)
        amplitude = corr / (n_sub * n_sym)
        residual -= estimate_component(amplitude, p, q, n_sub, n_sym,
                                       n_fft, n_doppler)
        delay = (p % n_fft) / (n_fft * numerology.scs_hz)
        doppler = _wrap_signed(q, n_doppler) / (
            n_doppler * numerology.uniform_symbol_period_s())
        estimates.append(PathEstimate(
            amplitude=amplitude, delay_s=delay, doppler_hz=doppler,
            refined_bins=(p % n_fft, q % n_doppler), valid=valid))
    return estimates


def compensate_and_range(paths: list[PathEstimate], baseline_m: float,
                         doppler_resolution_hz: float, resolution_m: float,
                         tap_id: int = 0):
    """Turn path estimates into a bistatic range set via direct-path reference.

    The strongest extracted path is taken as the direct path provided its
    Doppler is small; otherwise the smaller-Doppler path among the top two
    is used. Its known delay (baseline / c0) and zero Doppler yield the
    timing and frequency offsets, which are then removed from every
    scattered path.

    Returns (RangeSet, sto_s, cfo_hz); an unusable RangeSet (with nan
    offsets) results when no direct-path candidate passes validation.
    """
    candidates = [p for p in paths if p.valid]
    unusable = (RangeSet(tap_id=tap_id, ranges=(), resolution_m=resolution_m,
                         usable=False), float("nan"), float("nan"))
    if not candidates:
        return unusable
    los = candidates[0]
    limit = LOS_DOPPLER_CELLS * doppler_resolution_hz
    if abs(los.doppler_hz) >= limit:
        los = min(candidates[:2], key=lambda p: abs(p.doppler_hz))
        if abs(los.doppler_hz) >= limit:
            return unusable
    sto_s = los.delay_s - baseline_m / SPEED_OF_LIGHT
    cfo_hz = los.doppler_hz
    ranges = [SPEED_OF_LIGHT * (p.delay_s - sto_s)
              for p in candidates if p is not los]
    ranges = [r for r in ranges if r > 0]
    return (RangeSet(tap_id=tap_id, ranges=tuple(ranges),
                     resolution_m=resolution_m, usable=True), sto_s, cfo_hz)


def export_spectrum_csv(spec: DelayDopplerSpectrum, path) -> None:
    """Dump a spectrum as (delay_m, doppler_hz, magnitude_db) rows."""
    n_d = spec.n_doppler
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["delay_m", "doppler_hz", "magnitude_db"])
        for p in range(spec.n_delay):
            delay_m = p * spec.delay_bin_s * SPEED_OF_LIGHT
            for q in range(n_d):
                q_signed = q - n_d if q > n_d // 2 else q
                mag = spec.values[p, q]
                mag_db = 20.0 * math.log10(mag) if mag > 0 else -math.inf
                writer.writerow([f"{delay_m:.6f}",
                                 f"{q_signed * spec.doppler_bin_hz:.6f}",
                                 f"{mag_db:.3f}"])
