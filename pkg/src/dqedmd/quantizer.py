"""Mid-point uniform quantization with saturation and subtractive dither.

Scalars, vectors and whole trajectories are handled component-wise: every
state dimension owns a :class:`QuantizerSpec` (shared word length,
independent range). Dither draws are uniform on ``[-eps/2, eps/2]`` and are
subtracted again after decoding.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils import check_random_state
from sklearn.utils.validation import check_is_fitted

from ._validation import check_states

__all__ = [
    "QuantizerSpec",
    "DitherStream",
    "QuantizationRecord",
    "resolution",
    "encode",
    "decode_midpoint",
    "dither_quantize_vector",
    "quantize_trajectory",
    "auto_range_specs",
    "DitherQuantizer",
]


@dataclass(frozen=True)
class QuantizerSpec:
    """Uniform ``b``-bit quantizer on ``[u_min, u_max]``."""

    u_min: float
    u_max: float
    word_length: int

    def __post_init__(self):
        if not np.isfinite(self.u_min) or not np.isfinite(self.u_max):
            raise ValueError("quantizer range must be finite")
        if not self.u_max > self.u_min:
            raise ValueError(
                f"u_max must exceed u_min, got [{self.u_min}, {self.u_max}]")
        if int(self.word_length) != self.word_length or self.word_length < 1:
            raise ValueError(
                f"word_length must be an integer >= 1, got {self.word_length}")

    @property
    def resolution(self) -> float:
        return (self.u_max - self.u_min) / 2**self.word_length

    @property
    def max_code(self) -> int:
        return 2**self.word_length - 1

    def to_dict(self) -> dict:
        return {"u_min": float(self.u_min), "u_max": float(self.u_max),
                "word_length": int(self.word_length)}


def resolution(spec: QuantizerSpec) -> float:
    """Cell width ``(u_max - u_min) / 2**b``."""
    return spec.resolution


def encode(spec: QuantizerSpec, x):
    """Saturating quantizer: ``floor((x - u_min) / eps)`` clamped to the code range.

    Works on scalars and arrays; scalars return a Python ``int``.
    """
    codes = np.floor((np.asarray(x, dtype=float) - spec.u_min) / spec.resolution)
    codes = np.clip(codes, 0, spec.max_code).astype(np.int64)
    if codes.ndim == 0:
        return int(codes)
    return codes


def decode_midpoint(spec: QuantizerSpec, code):
    """Map a code to the midpoint of its cell, ``eps*code + u_min + eps/2``."""
    c = np.asarray(code)
    if np.any(c < 0) or np.any(c > spec.max_code):
        raise ValueError(f"code out of range [0, {spec.max_code}]: {code}")
    eps = spec.resolution
    out = eps * c + spec.u_min + eps / 2
    if out.ndim == 0:
        return float(out)
    return out


def _saturated(spec: QuantizerSpec, u: np.ndarray) -> np.ndarray:
    return (u <= spec.u_min) | (u >= spec.u_max)


def dither_quantize_vector(specs: Sequence[QuantizerSpec], x, w) -> np.ndarray:
    """Subtractive dither quantization of one state vector.

    Component ``j`` becomes ``decode(encode(x[j] + w[j])) - w[j]``.
    """
    x = np.asarray(x, dtype=float).ravel()
    w = np.asarray(w, dtype=float).ravel()
    if x.shape != w.shape:
        raise ValueError(f"x and w differ in length: {x.size} vs {w.size}")
    if len(specs) != x.size:
        raise ValueError(f"expected {len(specs)} components, got {x.size}")
    out = np.empty_like(x)
    for j, spec in enumerate(specs):
        out[j] = decode_midpoint(spec, encode(spec, x[j] + w[j])) - w[j]
    return out


class DitherStream:
    """Reproducible source of dither draws.

    Parameters
    ----------
    seed : int, sequence of int or numpy.random.SeedSequence
        Identical seeds yield identical draw sequences. A tuple such as
        ``(master_seed, trial, trajectory)`` gives independent streams per
        trial and trajectory.
    """

    def __init__(self, seed):
        self.seed = seed
        if isinstance(seed, np.random.SeedSequence):
            ss = seed
        else:
            entropy = [int(s) for s in np.atleast_1d(seed)]
            ss = np.random.SeedSequence(entropy)
        self._rng = np.random.default_rng(ss)

    def draw(self, resolutions, n_steps: int) -> np.ndarray:
        """Return ``(n_steps, n)`` draws, column ``j`` uniform on ``±eps_j/2``."""
        eps = np.asarray(resolutions, dtype=float).ravel()
        unit = self._rng.uniform(-0.5, 0.5, size=(n_steps, eps.size))
        return unit * eps


@dataclass
class QuantizationRecord:
    """Outcome of quantizing one trajectory (arrays are ``(steps, n)``)."""

    original: np.ndarray
    decoded: np.ndarray
    errors: np.ndarray
    saturation_count: int


def _quantize_rows(specs: Sequence[QuantizerSpec], states: np.ndarray,
                   dither: np.ndarray) -> tuple[np.ndarray, int]:
    decoded = np.empty_like(states)
    n_sat = 0
    for j, spec in enumerate(specs):
        u = states[:, j] + dither[:, j]
        n_sat += int(np.count_nonzero(_saturated(spec, u)))
        decoded[:, j] = decode_midpoint(spec, encode(spec, u)) - dither[:, j]
    return decoded, n_sat


def quantize_trajectory(specs: Sequence[QuantizerSpec], trajectory,
                        dither=None) -> QuantizationRecord:
    """Dither-quantize every state of a trajectory with fresh draws per step.

    Parameters
    ----------
    specs : sequence of QuantizerSpec
        One spec per state component.
    trajectory : array_like, shape (steps, n)
    dither : DitherStream, array of shape (steps, n), or None
        ``None`` means zero dither (plain mid-point quantization).
    """
    states = np.asarray(trajectory, dtype=float)
    if states.ndim == 1:
        states = states[:, None]
    if states.shape[0] == 0:
        raise ValueError("trajectory is empty")
    if states.shape[1] != len(specs):
        raise ValueError(
            f"trajectory has {states.shape[1]} components, "
            f"{len(specs)} quantizer specs given")
    if dither is None:
        w = np.zeros_like(states)
    elif isinstance(dither, DitherStream):
        w = dither.draw([s.resolution for s in specs], states.shape[0])
    else:
        w = np.asarray(dither, dtype=float).reshape(states.shape)
    decoded, n_sat = _quantize_rows(specs, states, w)
    return QuantizationRecord(original=states, decoded=decoded,
                              errors=decoded - states, saturation_count=n_sat)


def auto_range_specs(data, word_length: int,
                     margin: float = 0.05) -> list[QuantizerSpec]:
    """Per-component specs covering the data with headroom for the dither.

    The observed ``[lo, hi]`` is widened by ``margin * (hi - lo)`` on each
    side and then by ``eps/2``, so ``x + w`` never saturates for observed
    ``x``. Solving the resulting fixed point gives
    ``eps = (1 + 2*margin) * span / (2**b - 1)``.
    """
    data = np.asarray(data, dtype=float)
    if data.ndim == 1:
        data = data[:, None]
    if margin < 0:
        raise ValueError("margin must be non-negative")
    lo = data.min(axis=0)
    hi = data.max(axis=0)
    specs = []
    for lo_j, hi_j in zip(lo, hi):
        span = hi_j - lo_j
        if span <= 0:
            span = max(abs(lo_j), 1.0)
        eps = (1 + 2 * margin) * span / (2**word_length - 1)
        u_min = lo_j - margin * span - eps / 2
        specs.append(QuantizerSpec(u_min, u_min + eps * 2**word_length,
                                   word_length))
    return specs


class DitherQuantizer(TransformerMixin, BaseEstimator):
    """Subtractive dither quantizer as a scikit-learn transformer.

    ``fit`` chooses per-feature ranges from the data (see
    :func:`auto_range_specs`) unless ``ranges`` is given; ``transform``
    returns decoded states with the dither removed.

    Parameters
    ----------
    word_length : int
        Bits per component.
    ranges : sequence of (float, float), optional
        Explicit ``(u_min, u_max)`` per feature.
    margin : float
        Relative widening used by the automatic range policy.
    random_state : int, RandomState or None
        Seeds the dither.

    Attributes
    ----------
    specs_ : list of QuantizerSpec
    resolution_ : ndarray of shape (n_features,)
    saturation_count_ : int
        Saturated components in the most recent ``transform`` call.
    """

    def __init__(self, word_length=8, ranges=None, margin=0.05,
                 random_state=None):
        self.word_length = word_length
        self.ranges = ranges
        self.margin = margin
        self.random_state = random_state

    def fit(self, X, y=None):
        X = check_states(X)
        if self.ranges is None:
            self.specs_ = auto_range_specs(X, self.word_length, self.margin)
        else:
            if len(self.ranges) != X.shape[1]:
                raise ValueError("ranges must give one (u_min, u_max) per feature")
            self.specs_ = [QuantizerSpec(float(a), float(b), self.word_length)
                           for a, b in self.ranges]
        self.resolution_ = np.array([s.resolution for s in self.specs_])
        self.n_features_in_ = X.shape[1]
        self._rng = check_random_state(self.random_state)
        return self

    def transform(self, X):
        check_is_fitted(self, "specs_")
        X = check_states(X, n_features=self.n_features_in_)
        w = self._rng.uniform(-0.5, 0.5, size=X.shape) * self.resolution_
        decoded, self.saturation_count_ = _quantize_rows(self.specs_, X, w)
        return decoded
