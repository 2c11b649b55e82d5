"""Frame construction and the received-signal model.

A frame on one subcarrier is P pilot symbols followed by N blocks of D
data symbols.  The received matrix for a set of symbols is

    Y = (H_eff . X)^T A + Z

with H_eff the effective (satellite-Doppler pre-compensated) channel, X the
transmitted symbols, A the K x M steering matrix, and Z white complex noise
whose per-entry variance sigma2 is calibrated against the noiseless signal
energy for a requested SNR.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .channel import ChannelState, reference_channel


@dataclass(frozen=True)
class FrameTiming:
    """Sample period and symbol geometry on one subcarrier."""

    t_s: float        # sample period [s]
    n_sc: int         # subcarriers per symbol
    n_cp: int         # cyclic prefix samples
    subcarrier: int = 0

    def __post_init__(self):
        if self.t_s <= 0.0:
            raise ValueError(f"t_s must be positive, got {self.t_s}")
        if self.n_sc < 1 or self.n_cp < 1:
            raise ValueError(f"n_sc and n_cp must be >= 1, got {self.n_sc}, {self.n_cp}")
        if not 0 <= self.subcarrier < self.n_sc:
            raise ValueError(f"subcarrier {self.subcarrier} outside [0, {self.n_sc})")

    @classmethod
    def from_scs(cls, n_sc: int, n_cp: int, scs_hz: float, subcarrier: int = 0) -> "FrameTiming":
        if scs_hz <= 0.0:
            raise ValueError(f"subcarrier spacing must be positive, got {scs_hz}")
        return cls(t_s=1.0 / (n_sc * scs_hz), n_sc=n_sc, n_cp=n_cp, subcarrier=subcarrier)

    @property
    def t_sl(self) -> float:
        return self.n_sc * self.t_s

    @property
    def t_cp(self) -> float:
        return self.n_cp * self.t_s

    @property
    def symbol_period(self) -> float:
        return self.t_sl + self.t_cp


def symbol_times(timing: FrameTiming, symbols) -> np.ndarray:
    """Timestamps of the given symbol indices (strictly increasing, common step)."""
    return np.asarray(symbols, dtype=np.int64) * timing.symbol_period


@dataclass(frozen=True)
class FrameLayout:
    """Pilot/data split of a frame: P pilots, then n_blocks blocks of D data."""

    p: int
    d: int
    n_blocks: int
    update_interval: int

    def __post_init__(self):
        if self.p < 1 or self.d < 1 or self.n_blocks < 1:
            raise ValueError(
                f"p, d, n_blocks must be >= 1, got {self.p}, {self.d}, {self.n_blocks}")
        if not 1 <= self.update_interval <= self.n_blocks:
            raise ValueError(
                f"update_interval must be in [1, {self.n_blocks}], got {self.update_interval}")

    @property
    def n_symbols(self) -> int:
        return self.p + self.d * self.n_blocks

    def pilot_symbols(self) -> np.ndarray:
        return np.arange(self.p)

    def block_symbols(self, block: int) -> np.ndarray:
        """Frame symbol indices of data block `block` (1-based)."""
        self._check_block(block)
        start = self.p + (block - 1) * self.d
        return np.arange(start, start + self.d)

    def data_slice(self, block: int) -> slice:
        """Column/row slice of data block `block` inside the data-only arrays."""
        self._check_block(block)
        return slice((block - 1) * self.d, block * self.d)

    def scheduled_blocks(self) -> list[int]:
        return list(range(self.update_interval, self.n_blocks + 1, self.update_interval))

    def _check_block(self, block: int):
        if not 1 <= block <= self.n_blocks:
            raise ValueError(f"block {block} outside [1, {self.n_blocks}]")


@dataclass(frozen=True)
class Constellation:
    """Unit-average-energy symbol alphabet with Gray-coded bit labels."""

    order: int
    points: np.ndarray
    bit_labels: np.ndarray

    @classmethod
    def qam(cls, order: int) -> "Constellation":
        """Square QAM with per-axis Gray labeling, normalized to unit energy."""
        side = math.isqrt(order)
        if side * side != order or side < 2 or (side & (side - 1)) != 0:
            raise ValueError(f"order must be an even power of two >= 4, got {order}")
        levels = 2.0 * np.arange(side) - (side - 1)  # ..., -3, -1, 1, 3, ...
        gray = np.array([i ^ (i >> 1) for i in range(side)])
        axis_bits = side.bit_length() - 1

        re, im = np.meshgrid(levels, levels, indexing="ij")
        points = (re + 1j * im).ravel()
        points = points / np.sqrt(np.mean(np.abs(points) ** 2))
        gi, gj = np.meshgrid(gray, gray, indexing="ij")
        labels = ((gi << axis_bits) | gj).ravel()
        return cls(order=order, points=points, bit_labels=labels)

    @property
    def min_distance(self) -> float:
        diff = np.abs(self.points[:, None] - self.points[None, :])
        return float(diff[diff > 0].min())


def zadoff_chu(length: int, root: int, shift: int = 0) -> np.ndarray:
    """Constant-amplitude Zadoff-Chu sequence of the given root and cyclic shift.

    gcd(root, length) must be 1 so that distinct cyclic shifts stay
    orthogonal under the periodic inner product.
    """
    if length < 1:
        raise ValueError(f"length must be >= 1, got {length}")
    if root < 1 or math.gcd(root, length) != 1:
        raise ValueError(f"root must be >= 1 and coprime with length, got root={root}, length={length}")
    if not 0 <= shift < length:
        raise ValueError(f"shift must lie in [0, {length}), got {shift}")
    n = np.arange(length)
    m = (n + shift) % length
    q = m * (m + 1) if length % 2 else m * m
    return np.exp(-1j * np.pi * root * q / length)


def build_pilot_matrix(k_users: int, p: int, root: int = 1) -> np.ndarray:
    """K x P pilot matrix; row k is the Zadoff-Chu sequence cyclically shifted by k."""
    if k_users < 1:
        raise ValueError(f"k_users must be >= 1, got {k_users}")
    if p < k_users:
        raise ValueError(f"need at least as many pilot symbols as users, got p={p} < k={k_users}")
    return np.vstack([zadoff_chu(p, root, shift=k) for k in range(k_users)])


def map_symbols(rng: np.random.Generator, constellation: Constellation,
                k_users: int, n_symbols: int) -> np.ndarray:
    """Uniform i.i.d. constellation symbols as a K x S matrix."""
    idx = rng.integers(0, constellation.order, size=(k_users, n_symbols))
    return constellation.points[idx]


def calibrate_sigma2(target_snr_db: float, noiseless: np.ndarray) -> float:
    """Per-entry noise variance hitting the target SNR against a noiseless signal.

    The SNR convention is the average per-entry signal energy divided by the
    per-entry noise variance.  target +inf returns exactly 0.
    """
    power = float(np.mean(np.abs(noiseless) ** 2))
    if power == 0.0:
        raise ValueError("noiseless signal is identically zero; SNR undefined")
    if math.isinf(target_snr_db) and target_snr_db > 0:
        return 0.0
    return power / 10.0 ** (target_snr_db / 10.0)


def synthesize_rx(h_eff: np.ndarray, x: np.ndarray, steering: np.ndarray,
                  sigma2: float, rng: np.random.Generator):
    """Received S x M matrix (H_eff . X)^T A + Z and its noiseless part.

    Noise is circular complex Gaussian, variance sigma2 per entry (sigma2/2
    per real component), drawn independently for every entry.
    """
    h_eff = np.asarray(h_eff)
    x = np.asarray(x)
    if h_eff.shape != x.shape:
        raise ValueError(f"channel and symbol shapes differ: {h_eff.shape} vs {x.shape}")
    if steering.shape[0] != h_eff.shape[0]:
        raise ValueError(
            f"steering rows {steering.shape[0]} != user count {h_eff.shape[0]}")
    if sigma2 < 0.0:
        raise ValueError(f"sigma2 must be >= 0, got {sigma2}")

    noiseless = (h_eff * x).T @ steering
    if sigma2 > 0.0:
        scale = np.sqrt(sigma2 / 2.0)
        noise = scale * (rng.standard_normal(noiseless.shape)
                         + 1j * rng.standard_normal(noiseless.shape))
        return noiseless + noise, noiseless
    return noiseless.copy(), noiseless


@dataclass(frozen=True)
class FrameSignals:
    """Everything transmitted and received over one frame."""

    layout: FrameLayout
    pilots: np.ndarray           # K x P
    data: np.ndarray             # K x (N*D)
    rx_pilot: np.ndarray         # P x M
    rx_data: np.ndarray          # (N*D) x M
    noiseless_pilot: np.ndarray  # P x M
    noiseless_data: np.ndarray   # (N*D) x M
    sigma2: float

    def data_block(self, block: int) -> np.ndarray:
        """Transmitted K x D symbols of one data block."""
        return self.data[:, self.layout.data_slice(block)]

    def rx_data_block(self, block: int) -> np.ndarray:
        """Received D x M rows of one data block."""
        return self.rx_data[self.layout.data_slice(block)]


def build_frame(state: ChannelState, timing: FrameTiming, layout: FrameLayout,
                constellation: Constellation, snr_db: float,
                rng: np.random.Generator, zc_root: int = 1,
                h_eff: np.ndarray | None = None) -> FrameSignals:
    """Transmit one frame over a sampled scenario and collect the rx signal.

    A single sigma2 is calibrated from the noiseless signal of the whole
    frame, then one noise realization is drawn for all P + N*D symbols.
    h_eff can carry a precomputed effective channel (K x n_symbols) to avoid
    re-evaluating it; it must match reference_channel for the same frame.
    """
    pilots = build_pilot_matrix(state.k_users, layout.p, zc_root)
    data = map_symbols(rng, constellation, state.k_users, layout.d * layout.n_blocks)
    x = np.hstack([pilots, data])

    if h_eff is None:
        h_eff = reference_channel(state, timing, timing.subcarrier,
                                  np.arange(layout.n_symbols))
    if h_eff.shape != x.shape:
        raise ValueError(f"h_eff shape {h_eff.shape} does not match frame {x.shape}")

    noiseless = (h_eff * x).T @ state.steering
    sigma2 = calibrate_sigma2(snr_db, noiseless)
    rx, noiseless = synthesize_rx(h_eff, x, state.steering, sigma2, rng)

    p = layout.p
    return FrameSignals(
        layout=layout,
        pilots=pilots,
        data=data,
        rx_pilot=rx[:p],
        rx_data=rx[p:],
        noiseless_pilot=noiseless[:p],
        noiseless_data=noiseless[p:],
        sigma2=sigma2,
    )
