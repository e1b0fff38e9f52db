"""Dense float64 substrate shared by every mechanism.

Matrices are plain 2-D ``numpy.ndarray`` objects of dtype float64. This module
adds the few things numpy does not give us directly: shape-checked products,
a max-subtracted row softmax, causal FFT convolution, the iterative
Moore-Penrose pseudoinverse, a seeded counter-based RNG, and a deterministic
allocation counter used as the benchmark's memory measure.
"""

from __future__ import annotations

import contextlib
import contextvars
import weakref
from collections.abc import Iterator

import numpy as np

from .errors import NonFiniteError, PinvDivergenceError, ShapeError

Matrix = np.ndarray
Rng = np.random.Generator

# --------------------------------------------------------------------------
# allocation accounting
# --------------------------------------------------------------------------


class AllocCounter:
    """Current/peak bytes of arrays allocated through :func:`track`.

    Arrays register a finalizer when tracked, so ``current_bytes`` drops as
    soon as CPython frees them. That makes the peak exactly reproducible for a
    fixed program, unlike RSS. Arrays tracked before a :meth:`reset` no longer
    affect the counter when they die.
    """

    def __init__(self) -> None:
        self.current_bytes = 0
        self.peak_bytes = 0
        self._generation = 0

    def reset(self) -> None:
        self.current_bytes = 0
        self.peak_bytes = 0
        self._generation += 1

    def acquire(self, nbytes: int) -> int:
        self.current_bytes += nbytes
        if self.current_bytes > self.peak_bytes:
            self.peak_bytes = self.current_bytes
        return self._generation

    def release(self, generation: int, nbytes: int) -> None:
        if generation == self._generation:
            self.current_bytes -= nbytes

    def __repr__(self) -> str:
        return f"AllocCounter(current_bytes={self.current_bytes}, peak_bytes={self.peak_bytes})"


_ACTIVE: contextvars.ContextVar[AllocCounter | None] = contextvars.ContextVar(
    "attnbench_alloc_counter", default=None
)


@contextlib.contextmanager
def counting(counter: AllocCounter) -> Iterator[AllocCounter]:
    """Route :func:`track` calls to ``counter`` inside the block."""
    token = _ACTIVE.set(counter)
    try:
        yield counter
    finally:
        _ACTIVE.reset(token)


def track(arr: np.ndarray) -> np.ndarray:
    """Charge a freshly allocated array to the active counter (if any)."""
    counter = _ACTIVE.get()
    if counter is not None and arr.base is None and arr.nbytes:
        gen = counter.acquire(arr.nbytes)
        weakref.finalize(arr, counter.release, gen, arr.nbytes)
    return arr


def empty(shape, dtype=np.float64) -> np.ndarray:
    return track(np.empty(shape, dtype=dtype))


def zeros(shape, dtype=np.float64) -> np.ndarray:
    return track(np.zeros(shape, dtype=dtype))


# --------------------------------------------------------------------------
# basic checked operations
# --------------------------------------------------------------------------


def as_matrix(a, name: str = "matrix") -> Matrix:
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != 2:
        raise ShapeError(f"{name} must be 2-D, got shape {a.shape}")
    return a


def ensure_finite(a: np.ndarray, what: str = "result") -> np.ndarray:
    if not np.isfinite(a).all():
        raise NonFiniteError(f"{what} contains NaN or Inf")
    return a


def matmul(a: Matrix, b: Matrix) -> Matrix:
    a = as_matrix(a, "a")
    b = as_matrix(b, "b")
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"cannot multiply {a.shape} by {b.shape}")
    out = empty((a.shape[0], b.shape[1]))
    with np.errstate(over="ignore", invalid="ignore"):  # reported below as NonFiniteError
        np.matmul(a, b, out=out)
    return ensure_finite(out, "matmul")


def softmax_rows(a: Matrix) -> Matrix:
    """Row-wise softmax with per-row max subtraction."""
    a = ensure_finite(as_matrix(a), "softmax input")
    out = empty(a.shape)
    np.subtract(a, a.max(axis=1, keepdims=True), out=out)
    np.exp(out, out=out)
    out /= out.sum(axis=1, keepdims=True)
    return out


def _next_pow2(n: int) -> int:
    return 1 << max(0, (n - 1).bit_length())


def conv_fft(kernel: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Causal linear convolution ``y_t = sum_{s<=t} kernel_s u_{t-s}``.

    Both arguments have the sequence on axis 0 (shape ``(n,)`` or
    ``(n, channels)``). Zero-padded to a power of two >= 2n, so there is no
    circular wrap-around.
    """
    kernel = np.asarray(kernel, dtype=np.float64)
    u = np.asarray(u, dtype=np.float64)
    if kernel.shape != u.shape:
        raise ShapeError(f"kernel shape {kernel.shape} != input shape {u.shape}")
    n = u.shape[0]
    if n == 0:
        return track(np.zeros_like(u))
    size = _next_pow2(2 * n)
    kf = np.fft.rfft(kernel, n=size, axis=0)
    uf = np.fft.rfft(u, n=size, axis=0)
    kf *= uf
    del uf
    y = np.fft.irfft(kf, n=size, axis=0)[:n]
    return ensure_finite(track(np.ascontiguousarray(y)), "conv_fft")


# --------------------------------------------------------------------------
# iterative pseudoinverse
# --------------------------------------------------------------------------

DEFAULT_PINV_MAX_ITERS = 40
DEFAULT_PINV_TOL = 1e-13


def penrose_residual(a: Matrix, z: Matrix) -> float:
    """``||A Z A - A||_F / ||A||_F``."""
    norm = np.linalg.norm(a)
    if norm == 0.0:
        return float(np.linalg.norm(z))
    return float(np.linalg.norm(a @ z @ a - a) / norm)


def pinv_iterative(
    a: Matrix,
    iters: int | None = None,
    *,
    tol: float = DEFAULT_PINV_TOL,
    max_iters: int = DEFAULT_PINV_MAX_ITERS,
) -> Matrix:
    """Moore-Penrose pseudoinverse by the Newton-Schulz-type iteration

        Z <- Z (13 I - A Z (15 I - A Z (7 I - A Z))) / 4

    started from ``Z0 = A^T / (||A||_1 ||A||_inf)``.

    With ``iters`` given, exactly that many steps are taken (the usual
    Nystromformer setting is 6). With ``iters=None`` the iteration runs until
    the relative Penrose residual drops below ``tol`` or ``max_iters`` steps.
    Raises :class:`PinvDivergenceError` if the result is non-finite or the
    residual ended up larger than at the start.
    """
    a = ensure_finite(as_matrix(a), "pinv input")
    r, c = a.shape
    if r != c:
        raise ShapeError(f"pinv_iterative expects a square matrix, got {a.shape}")
    scale = np.abs(a).sum(axis=0).max() * np.abs(a).sum(axis=1).max()
    if scale == 0.0:
        return track(np.zeros_like(a.T))
    eye = np.eye(r)
    z = a.T / scale
    start = penrose_residual(a, z)
    steps = iters if iters is not None else max_iters
    for _ in range(steps):
        az = a @ z
        z = 0.25 * z @ (13.0 * eye - az @ (15.0 * eye - az @ (7.0 * eye - az)))
        if not np.isfinite(z).all():
            raise PinvDivergenceError("pseudoinverse iteration produced non-finite values")
        if iters is None and penrose_residual(a, z) < tol:
            break
    final = penrose_residual(a, z)
    if not np.isfinite(final) or final > max(start, tol):
        raise PinvDivergenceError(
            f"pseudoinverse residual grew from {start:.3e} to {final:.3e}"
        )
    return track(np.ascontiguousarray(z))


# --------------------------------------------------------------------------
# random numbers
# --------------------------------------------------------------------------


def make_rng(seed: int) -> Rng:
    """Philox (counter-based) generator; same seed, same stream on every platform."""
    return np.random.Generator(np.random.Philox(int(seed) & 0xFFFFFFFFFFFFFFFF))


def gaussian_matrix(rng: Rng, rows: int, cols: int) -> Matrix:
    return track(rng.standard_normal((rows, cols)))
