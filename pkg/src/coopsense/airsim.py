"""Frequency-domain air-interface simulation.

Synthesizes the transmitted symbol grid of one tAP, the discrete
frequency-domain sensing channel seen by the rAP, and the noisy received
grid. Everything stays in the subcarrier/symbol domain: the per-element
channel is

    h[i, m] = sum_l a_l * exp(-j 2 pi i scs (tau_l + sto))
                      * exp(+j 2 pi m T (f_l + cfo))

so no time-domain waveform or CP handling is ever materialized.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

import numpy as np

from .numerology import Numerology
from .scene import PathTruth, SyncError

GRID_MAGIC = b"CSGRID\x00\x01"

_QPSK = np.exp(1j * (np.pi / 4.0 + np.pi / 2.0 * np.arange(4)))


class GridKind(Enum):
    TRANSMITTED = "transmitted"
    RECEIVED = "received"
    CHANNEL_ESTIMATE = "channel_estimate"


@dataclass(frozen=True)
class SymbolGrid:
    """Complex matrix of shape (n_subcarriers, n_symbols)."""

    data: np.ndarray
    kind: GridKind

    def __post_init__(self):
        if self.data.ndim != 2:
            raise ValueError("grid must be 2-D (subcarriers x symbols)")

    @property
    def n_subcarriers(self) -> int:
        return self.data.shape[0]

    @property
    def n_symbols(self) -> int:
        return self.data.shape[1]


def as_rng(seed) -> np.random.Generator:
    """Accept an int seed, a SeedSequence, or a Generator."""
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def generate_symbols(n_subcarriers: int, n_symbols: int, seed) -> SymbolGrid:
    """I.i.d. unit-modulus QPSK grid, deterministic under a fixed seed."""
    if n_subcarriers < 1 or n_symbols < 1:
        raise ValueError("grid dimensions must be >= 1")
    rng = as_rng(seed)
    idx = rng.integers(0, 4, size=(n_subcarriers, n_symbols))
    return SymbolGrid(data=_QPSK[idx], kind=GridKind.TRANSMITTED)


def channel_matrix(paths: list[PathTruth], sync: SyncError,
                   numerology: Numerology, n_subcarriers: int,
                   n_symbols: int) -> np.ndarray:
    """Discrete frequency-domain sensing channel, shape (Nc, M)."""
    if not paths:
        raise ValueError("path list must be nonempty")
    scs = numerology.scs_hz
    period = numerology.uniform_symbol_period_s()
    i = np.arange(n_subcarriers)[:, None]
    m = np.arange(n_symbols)[None, :]
    h = np.zeros((n_subcarriers, n_symbols), dtype=complex)
    for p in paths:
        phase_i = np.exp(-2j * np.pi * i * scs * (p.delay_s + sync.sto_s))
        phase_m = np.exp(2j * np.pi * m * period * (p.doppler_hz + sync.cfo_hz))
        h += p.amplitude * phase_i * phase_m
    return h


def receive(tx: SymbolGrid, channel: np.ndarray, noise_power: float,
            seed) -> SymbolGrid:
    """Received grid: elementwise tx * channel plus CSCG noise of variance
    noise_power."""
    if tx.data.shape != channel.shape:
        raise ValueError(f"shape mismatch: {tx.data.shape} vs {channel.shape}")
    data = tx.data * channel
    if noise_power > 0:
        rng = as_rng(seed)
        sigma = np.sqrt(noise_power / 2.0)
        noise = rng.normal(0.0, sigma, size=channel.shape) \
            + 1j * rng.normal(0.0, sigma, size=channel.shape)
        data = data + noise
    return SymbolGrid(data=data, kind=GridKind.RECEIVED)


def channel_estimate(tx: SymbolGrid, rx: SymbolGrid) -> SymbolGrid:
    """Per-element channel estimate conj(tx) * rx.

    With unit-modulus symbols this reproduces the channel exactly in the
    noiseless case and leaves the noise variance unchanged otherwise.
    """
    if tx.data.shape != rx.data.shape:
        raise ValueError(f"shape mismatch: {tx.data.shape} vs {rx.data.shape}")
    return SymbolGrid(data=np.conj(tx.data) * rx.data,
                      kind=GridKind.CHANNEL_ESTIMATE)


def dump_grid(grid: SymbolGrid, path) -> None:
    """Binary dump: 16-byte header (magic, Nc, M), then row-major little-endian
    complex64 pairs."""
    data = np.ascontiguousarray(grid.data.astype(np.complex64))
    header = GRID_MAGIC + struct.pack("<II", grid.n_subcarriers, grid.n_symbols)
    Path(path).write_bytes(header + data.tobytes())


def load_grid(path, kind: GridKind = GridKind.CHANNEL_ESTIMATE) -> SymbolGrid:
    raw = Path(path).read_bytes()
    if raw[:8] != GRID_MAGIC:
        raise ValueError("not a coopsense grid file")
    n_sub, n_sym = struct.unpack("<II", raw[8:16])
    data = np.frombuffer(raw[16:], dtype="<c8").reshape(n_sub, n_sym)
    return SymbolGrid(data=data.astype(complex), kind=kind)
