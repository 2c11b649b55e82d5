"""Channel estimators and symbol detection.

All estimators share one primitive: project the received rows through the
right pseudo-inverse of the steering matrix, transpose, and divide
elementwise by the symbols believed to have been transmitted.  They differ
only in which symbols they divide by (known pilots, detected data, true
data, or nothing at all for the genie variants) and over which window the
raw per-symbol estimates are averaged.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .airlink import Constellation, FrameLayout, FrameSignals, FrameTiming
from .channel import ChannelState, reference_channel
from .numerics import hadamard_div, matmul


@dataclass(frozen=True)
class ChannelEstimate:
    """A K x W channel estimate and the symbol window it applies to."""

    values: np.ndarray
    window: np.ndarray    # frame symbol indices the estimate is meant for
    provenance: str       # "P-LS", "DD-SB", "MDD-SB", "P-bound", ...


@dataclass(frozen=True)
class DetectionResult:
    soft: np.ndarray              # K x D equalizer output
    hard: np.ndarray              # K x D nearest constellation points
    symbol_errors: int | None = None  # vs. truth, when truth was available


def pls_estimate(rx: np.ndarray, symbols: np.ndarray,
                 steering_pinv: np.ndarray) -> np.ndarray:
    """Per-symbol least-squares estimate from known transmitted symbols.

    rx is S x M, symbols is K x S; the result is the raw K x S estimate
    (Y A^+)^T / X with no averaging.  Used with pilot symbols this is the
    pilot-based LS estimator; used with true data it is the known-data
    re-estimation benchmark.
    """
    return hadamard_div(matmul(rx, steering_pinv).T, symbols)


def average_and_tile(raw: np.ndarray, width: int) -> np.ndarray:
    """Column mean of a raw per-symbol estimate, tiled to the given width."""
    raw = np.asarray(raw)
    if raw.ndim != 2 or raw.shape[1] < 1:
        raise ValueError(f"raw estimate must be K x S with S >= 1, got {raw.shape}")
    if width < 1:
        raise ValueError(f"width must be >= 1, got {width}")
    mean = raw.mean(axis=1)
    return np.tile(mean[:, None], (1, width))


def zf_equalize(rx: np.ndarray, steering_pinv: np.ndarray,
                estimate: np.ndarray) -> np.ndarray:
    """Zero-forcing equalization: (Y A^+)^T divided by the channel estimate."""
    return hadamard_div(matmul(rx, steering_pinv).T, estimate)


def detect(soft: np.ndarray, constellation: Constellation,
           truth: np.ndarray | None = None) -> DetectionResult:
    """Minimum-distance detection; ties resolve to the lowest point index."""
    soft = np.asarray(soft)
    dist = np.abs(soft[..., None] - constellation.points)
    hard = constellation.points[np.argmin(dist, axis=-1)]
    errors = None
    if truth is not None:
        if truth.shape != soft.shape:
            raise ValueError(f"truth shape {truth.shape} != soft shape {soft.shape}")
        errors = int(np.count_nonzero(truth != hard))
    return DetectionResult(soft=soft, hard=hard, symbol_errors=errors)


def ddsb_estimate(rx_pilot: np.ndarray, rx_data: np.ndarray, pilots: np.ndarray,
                  detected: np.ndarray, steering_pinv: np.ndarray) -> np.ndarray:
    """Decision-directed semi-blind raw estimate over pilots plus detected data.

    Stacks the pilot and data rows and divides by [pilots, detected data],
    returning the raw K x (P + D) per-symbol estimate.
    """
    rx = np.vstack([rx_pilot, rx_data])
    x = np.hstack([pilots, detected])
    return hadamard_div(matmul(rx, steering_pinv).T, x)


def mddsb_run(frame: FrameSignals, initial: ChannelEstimate,
              steering_pinv: np.ndarray, layout: FrameLayout,
              constellation: Constellation,
              schedule=None) -> list[tuple[ChannelEstimate, DetectionResult]]:
    """Blockwise decision-directed tracking over a whole frame.

    Starting from the initial (pilot-based) tile, every data block is
    equalized and detected with the estimate currently in effect.  Blocks on
    the update schedule then re-estimate the channel from that block alone:
    divide the projected rx rows by the detected symbols, average, and tile.
    Off-schedule blocks detect with the stale estimate and change nothing.

    Returns one (estimate-in-effect-after-block, detection) pair per block,
    in block order.  symbol_errors is filled against the frame's true data.
    """
    if initial.values.shape[1] != layout.d:
        raise ValueError(
            f"initial estimate width {initial.values.shape[1]} != block width {layout.d}")
    if schedule is None:
        schedule = layout.scheduled_blocks()
    scheduled = frozenset(schedule)

    current = initial
    out = []
    for block in range(1, layout.n_blocks + 1):
        rx_block = frame.rx_data_block(block)
        soft = zf_equalize(rx_block, steering_pinv, current.values)
        det = detect(soft, constellation, truth=frame.data_block(block))
        if block in scheduled:
            raw = hadamard_div(matmul(rx_block, steering_pinv).T, det.hard)
            current = ChannelEstimate(
                values=average_and_tile(raw, layout.d),
                window=layout.block_symbols(block),
                provenance="MDD-SB",
            )
        out.append((current, det))
    return out


def pbound_estimate(state: ChannelState, timing: FrameTiming,
                    layout: FrameLayout) -> ChannelEstimate:
    """Noise-free pilot-window average of the true effective channel.

    The best any pilot-only estimator could do: the exact channel averaged
    over the pilot symbols, tiled to block width, and never updated again.
    """
    ref = reference_channel(state, timing, timing.subcarrier, layout.pilot_symbols())
    return ChannelEstimate(
        values=average_and_tile(ref, layout.d),
        window=layout.pilot_symbols(),
        provenance="P-bound",
    )


def genie_detect(frame: FrameSignals, state: ChannelState, timing: FrameTiming,
                 steering_pinv: np.ndarray, constellation: Constellation,
                 block: int) -> DetectionResult:
    """Detection with the exact per-symbol channel of one data block."""
    h_true = reference_channel(state, timing, timing.subcarrier,
                               frame.layout.block_symbols(block))
    soft = zf_equalize(frame.rx_data_block(block), steering_pinv, h_true)
    return detect(soft, constellation, truth=frame.data_block(block))
