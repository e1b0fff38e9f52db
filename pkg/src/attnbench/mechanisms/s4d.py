"""Diagonal state-space layer (S4D) evaluated as an FFT convolution."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .. import tensor as T
from ..core import AttentionInputs, AttentionPattern, require_support
from ..errors import NonFiniteError, UnstableStateError
from ._common import head_rng
from ._config import MechanismConfig

_CHANNEL_BLOCK = 16


@dataclass(frozen=True)
class S4DParams:
    """Per-channel diagonal SSM: ``a``, ``b``, ``c`` are complex (channels, r);
    ``log_dt`` and the feedthrough ``d_skip`` are real (channels,)."""

    a: np.ndarray
    b: np.ndarray
    c: np.ndarray
    log_dt: np.ndarray
    d_skip: np.ndarray

    @property
    def channels(self) -> int:
        return self.a.shape[0]

    @property
    def d_state(self) -> int:
        return self.a.shape[1]

    def check_stable(self) -> None:
        if not (self.a.real < 0).all():
            raise UnstableStateError("S4D state matrix has Re(A) >= 0")

    def with_skip(self, d_skip) -> "S4DParams":
        skip = np.broadcast_to(np.asarray(d_skip, dtype=np.float64), (self.channels,)).copy()
        return S4DParams(self.a, self.b, self.c, self.log_dt, skip)


def init_s4d(channels: int, d_state: int, rng: T.Rng) -> S4DParams:
    """A_k = -1/2 + i pi k, B = 1, C complex Gaussian, log dt ~ U[ln 1e-3, ln 1e-1], D = 1."""
    k = np.arange(d_state)
    a = np.broadcast_to(-0.5 + 1j * np.pi * k, (channels, d_state)).copy()
    b = np.ones((channels, d_state), dtype=np.complex128)
    c = (rng.standard_normal((channels, d_state)) + 1j * rng.standard_normal((channels, d_state))) * math.sqrt(0.5)
    log_dt = rng.uniform(math.log(1e-3), math.log(1e-1), size=channels)
    return S4DParams(a, b, c, log_dt, np.ones(channels))


def discretize(params: S4DParams) -> tuple[np.ndarray, np.ndarray]:
    """Zero-order hold: ``A_bar = exp(dt A)``, ``B_bar = (A_bar - 1) / A * B``."""
    params.check_stable()
    dt_a = np.exp(params.log_dt)[:, None] * params.a
    a_bar = np.exp(dt_a)
    b_bar = (a_bar - 1.0) / params.a * params.b
    return a_bar, b_bar


def s4d_kernel(params: S4DParams, length: int) -> np.ndarray:
    """``K_t = Re(sum_k C_k A_bar_k^t B_bar_k)`` for t < length, shape (length, channels)."""
    a_bar, b_bar = discretize(params)
    log_a = np.log(a_bar)
    cb = params.c * b_bar
    t = np.arange(length)
    kern = T.empty((length, params.channels))
    for c0 in range(0, params.channels, _CHANNEL_BLOCK):
        sl = slice(c0, c0 + _CHANNEL_BLOCK)
        powers = np.exp(log_a[sl, :, None] * t)  # (block, r, length)
        kern[:, sl] = np.einsum("cr,crt->tc", cb[sl], powers).real
    if not np.isfinite(kern).all():
        raise NonFiniteError("S4D kernel is not finite")
    return kern


def s4d_layer(u: np.ndarray, params: S4DParams, pattern="ns") -> np.ndarray:
    """``y = K * u + D u`` per channel. Causal self: forward pass only.
    Noncausal self: forward pass plus the same kernel run over the reversed
    sequence (so position t also sees the future)."""
    pattern = AttentionPattern.parse(pattern)
    require_support("s4d", pattern)
    u = T.as_matrix(u, "u")
    if u.shape[1] != params.channels:
        raise ValueError(f"u has {u.shape[1]} channels, params have {params.channels}")
    kern = s4d_kernel(params, u.shape[0])
    y = T.conv_fft(kern, u)
    if pattern is AttentionPattern.NONCAUSAL_SELF:
        y += T.conv_fft(kern, u[::-1])[::-1]
    y += params.d_skip * u
    return y


def s4d_attention(inputs: AttentionInputs, config: MechanismConfig | None = None) -> np.ndarray:
    """Attention-interface wrapper: S4D has no query/key interaction and is
    applied to the value sequence over all ``d`` channels (heads ignored)."""
    require_support("s4d", inputs.pattern)
    config = config or MechanismConfig()
    params = init_s4d(inputs.d, config.d_state, head_rng(config.seed, "s4d", 0))
    return s4d_layer(inputs.v, params, inputs.pattern)
