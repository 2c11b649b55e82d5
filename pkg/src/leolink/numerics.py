"""Dense complex matrix kernels shared by the rest of the simulator.

Matrices are 2-D ``numpy.ndarray`` of complex128 indexed ``[row, col]``,
vectors are 1-D arrays.  Every function here is pure: inputs are never
mutated and no global state is touched.
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "DIVISOR_FLOOR",
    "DEFAULT_PINV_TOL",
    "ShapeError",
    "DegenerateDivisorError",
    "RankDeficiencyError",
    "matmul",
    "hadamard_mul",
    "hadamard_div",
    "kronecker",
    "right_pinv",
]

# Divisor magnitudes at or below this are treated as degenerate.  The floor
# only guards literal zeros and denormals; anything a physical channel or a
# normalized constellation produces sits hundreds of orders above it.
DIVISOR_FLOOR = 1e-300

DEFAULT_PINV_TOL = 1e-9


class ShapeError(ValueError):
    """Operand shapes violate the operation's contract."""


class DegenerateDivisorError(ValueError):
    """An elementwise divisor entry has magnitude at or below the floor."""

    def __init__(self, index: tuple, magnitude: float):
        self.index = index
        self.magnitude = magnitude
        super().__init__(
            f"degenerate divisor at entry {index}: |b| = {magnitude:.3e} "
            f"<= floor {DIVISOR_FLOOR:.0e}"
        )


class RankDeficiencyError(ValueError):
    """Matrix is numerically rank deficient for the requested inverse."""

    def __init__(self, effective_rank: int, shape: tuple):
        self.effective_rank = effective_rank
        self.shape = shape
        super().__init__(
            f"matrix of shape {shape[0]}x{shape[1]} has effective rank "
            f"{effective_rank} < {shape[0]}; right pseudo-inverse undefined"
        )


def _as_matrix(a, name: str) -> np.ndarray:
    a = np.asarray(a)
    if a.ndim != 2:
        raise ShapeError(f"{name} must be 2-D, got ndim={a.ndim}")
    return a.astype(np.complex128, copy=False)


def matmul(a, b) -> np.ndarray:
    """Matrix product a @ b with an explicit inner-dimension check."""
    a = _as_matrix(a, "a")
    b = _as_matrix(b, "b")
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul: inner dimensions differ, {a.shape} x {b.shape}")
    return a @ b


def _same_shape(a, b, op: str) -> tuple[np.ndarray, np.ndarray]:
    a = _as_matrix(a, "a")
    b = _as_matrix(b, "b")
    if a.shape != b.shape:
        raise ShapeError(f"{op}: shapes differ, {a.shape} vs {b.shape}")
    return a, b


def hadamard_mul(a, b) -> np.ndarray:
    """Elementwise product of two equal-shape matrices."""
    a, b = _same_shape(a, b, "hadamard_mul")
    return a * b


def hadamard_div(a, b, floor: float = DIVISOR_FLOOR) -> np.ndarray:
    """Elementwise quotient a / b.

    Raises DegenerateDivisorError naming the first offending entry (row-major
    order) if any |b[i, j]| <= floor.
    """
    a, b = _same_shape(a, b, "hadamard_div")
    mag = np.abs(b)
    bad = mag <= floor
    if bad.any():
        i, j = np.unravel_index(int(np.argmax(bad)), b.shape)
        raise DegenerateDivisorError((int(i), int(j)), float(mag[i, j]))
    return a / b


def kronecker(u, v) -> np.ndarray:
    """Kronecker product of two 1-D vectors (length |u|*|v|)."""
    u = np.asarray(u)
    v = np.asarray(v)
    if u.ndim != 1 or v.ndim != 1:
        raise ShapeError(f"kronecker expects 1-D vectors, got ndim {u.ndim} and {v.ndim}")
    return np.kron(u.astype(np.complex128, copy=False), v.astype(np.complex128, copy=False))


def right_pinv(a, tol: float = DEFAULT_PINV_TOL) -> np.ndarray:
    """Right Moore-Penrose pseudo-inverse A^H (A A^H)^-1 of a wide matrix.

    The primary path solves against the K x K Gram matrix, which is cheap
    for K << M.  When the Gram matrix looks ill-conditioned (condition
    estimate above 1/tol) the computation falls back to an SVD with
    singular values below tol * sigma_max treated as zero; if that leaves
    fewer than K usable directions the matrix is reported rank deficient.
    """
    a = _as_matrix(a, "a")
    k, m = a.shape
    if k > m:
        raise ShapeError(f"right_pinv needs K <= M, got {k}x{m}")
    if k == 0:
        return np.zeros((m, 0), dtype=np.complex128)

    gram = a @ a.conj().T
    evals = np.linalg.eigvalsh(gram)
    if evals[0] > 0.0 and evals[-1] / evals[0] <= 1.0 / tol:
        # A^+ = A^H G^-1 = (G^-1 A)^H because G is Hermitian.
        return np.linalg.solve(gram, a).conj().T

    u, s, vh = np.linalg.svd(a, full_matrices=False)
    if s[0] == 0.0:
        raise RankDeficiencyError(0, a.shape)
    keep = s > tol * s[0]
    rank = int(np.count_nonzero(keep))
    if rank < k:
        raise RankDeficiencyError(rank, a.shape)
    return (vh.conj().T * (1.0 / s)) @ u.conj().T
