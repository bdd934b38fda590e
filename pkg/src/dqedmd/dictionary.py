"""Observable dictionaries: state coordinates and thin plate spline RBFs."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import check_snapshots, check_states, check_vector

__all__ = [
    "Coordinate",
    "ThinPlateSpline",
    "Dictionary",
    "identity_dictionary",
    "make_tps_dictionary",
    "lift",
    "lift_snapshots",
    "jacobian",
    "max_gradient_norm",
    "Lifting",
]


@dataclass(frozen=True)
class Coordinate:
    index: int


@dataclass(frozen=True)
class ThinPlateSpline:
    """``r**2 * log(r)`` with ``r = ||x - center||``; zero at ``r = 0``."""

    center: tuple

    def __post_init__(self):
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))


Observable = Union[Coordinate, ThinPlateSpline]


def _tps(r2):
    # r^2 log r == 0.5 * r^2 * log(r^2); the r -> 0 limit is 0
    out = np.zeros_like(r2)
    pos = r2 > 0
    out[pos] = 0.5 * r2[pos] * np.log(r2[pos])
    return out


def _tps_slope(r2):
    # 2 log r + 1, with the gradient itself defined as 0 at r = 0
    out = np.zeros_like(r2)
    pos = r2 > 0
    out[pos] = np.log(r2[pos]) + 1.0
    return out


class Dictionary:
    """Ordered, immutable list of ``N`` observables on ``R^n``.

    Parameters
    ----------
    observables : sequence of Coordinate or ThinPlateSpline
    n : int
        State dimension.
    """

    def __init__(self, observables: Sequence[Observable], n: int):
        self.observables = tuple(observables)
        self.n = int(n)
        if self.n < 1:
            raise ValueError("state dimension must be >= 1")
        coord_rows, coord_idx, tps_rows, centers = [], [], [], []
        for i, obs in enumerate(self.observables):
            if isinstance(obs, Coordinate):
                if not 0 <= obs.index < self.n:
                    raise ValueError(
                        f"Coordinate index {obs.index} outside state dimension {self.n}")
                coord_rows.append(i)
                coord_idx.append(obs.index)
            elif isinstance(obs, ThinPlateSpline):
                if len(obs.center) != self.n:
                    raise ValueError(
                        f"TPS center has length {len(obs.center)}, expected {self.n}")
                tps_rows.append(i)
                centers.append(obs.center)
            else:
                raise TypeError(f"unknown observable {obs!r}")
        self._coord_rows = np.array(coord_rows, dtype=int)
        self._coord_idx = np.array(coord_idx, dtype=int)
        self._tps_rows = np.array(tps_rows, dtype=int)
        self._centers = np.array(centers, dtype=float).reshape(len(centers), self.n)

    @property
    def N(self) -> int:
        return len(self.observables)

    @property
    def centers(self) -> np.ndarray:
        return self._centers.copy()

    @property
    def is_identity(self) -> bool:
        return (self.N == self.n and self._tps_rows.size == 0
                and np.array_equal(self._coord_idx, np.arange(self.n))
                and np.array_equal(self._coord_rows, np.arange(self.n)))

    def __len__(self):
        return self.N

    def __eq__(self, other):
        return (isinstance(other, Dictionary) and self.n == other.n
                and self.observables == other.observables)

    def __hash__(self):
        return hash((self.n, self.observables))

    def __repr__(self):
        return (f"Dictionary(n={self.n}, coordinates={self._coord_rows.size}, "
                f"tps={self._tps_rows.size})")

    def _sq_dists(self, X):
        # (n_centers, T) squared distances for an (n, T) snapshot matrix
        diff = X[None, :, :] - self._centers[:, :, None]
        return np.einsum("kit,kit->kt", diff, diff)

    def lift_snapshots(self, X) -> np.ndarray:
        X = check_snapshots(X, name="X", n_rows=self.n)
        out = np.empty((self.N, X.shape[1]))
        if self._coord_rows.size:
            out[self._coord_rows] = X[self._coord_idx]
        if self._tps_rows.size:
            out[self._tps_rows] = _tps(self._sq_dists(X))
        return out

    def lift(self, x) -> np.ndarray:
        x = check_vector(x, self.n)
        return self.lift_snapshots(x[:, None])[:, 0]

    def jacobian(self, x) -> np.ndarray:
        x = check_vector(x, self.n)
        J = np.zeros((self.N, self.n))
        if self._coord_rows.size:
            J[self._coord_rows, self._coord_idx] = 1.0
        if self._tps_rows.size:
            diff = x[None, :] - self._centers
            r2 = np.einsum("ki,ki->k", diff, diff)
            J[self._tps_rows] = diff * _tps_slope(r2)[:, None]
        return J

    def max_gradient_norm(self, X) -> float:
        """Largest ``||grad phi_i(x)||`` over all observables and columns of ``X``."""
        X = check_snapshots(X, name="X", n_rows=self.n)
        best = 1.0 if self._coord_rows.size else 0.0
        if self._tps_rows.size:
            r2 = self._sq_dists(X)
            best = max(best, float(np.max(np.abs(np.sqrt(r2) * _tps_slope(r2)))))
        return best

    def to_dict(self) -> dict:
        obs = []
        for o in self.observables:
            if isinstance(o, Coordinate):
                obs.append({"kind": "coordinate", "index": int(o.index)})
            else:
                obs.append({"kind": "tps", "center": [float(c) for c in o.center]})
        return {"n": self.n, "observables": obs}

    @classmethod
    def from_dict(cls, data: dict) -> "Dictionary":
        obs = []
        for o in data["observables"]:
            if o["kind"] == "coordinate":
                obs.append(Coordinate(int(o["index"])))
            elif o["kind"] == "tps":
                obs.append(ThinPlateSpline(tuple(o["center"])))
            else:
                raise ValueError(f"unknown observable kind {o['kind']!r}")
        return cls(obs, int(data["n"]))


def identity_dictionary(n: int) -> Dictionary:
    return Dictionary([Coordinate(j) for j in range(n)], n)


def _normalize_box(box, n):
    box = np.asarray(box, dtype=float)
    if box.shape == (2,):
        box = np.tile(box, (n, 1))
    if box.shape != (n, 2):
        raise ValueError(f"box must be one (lo, hi) pair or {n} of them")
    if np.any(box[:, 1] <= box[:, 0]):
        raise ValueError(f"box has an empty interval: {box.tolist()}")
    return box


def make_tps_dictionary(n: int, n_centers: int, box, seed: int) -> Dictionary:
    """State coordinates followed by ``n_centers`` TPS observables.

    Centers are i.i.d. uniform on ``box`` (one ``(lo, hi)`` per dimension,
    or a single pair applied to every dimension).
    """
    if n_centers < 0:
        raise ValueError("n_centers must be >= 0")
    box = _normalize_box(box, n)
    rng = np.random.default_rng(seed)
    centers = rng.uniform(box[:, 0], box[:, 1], size=(n_centers, n))
    obs = [Coordinate(j) for j in range(n)]
    obs += [ThinPlateSpline(tuple(c)) for c in centers]
    return Dictionary(obs, n)


def lift(dictionary: Dictionary, x) -> np.ndarray:
    return dictionary.lift(x)


def lift_snapshots(dictionary: Dictionary, X) -> np.ndarray:
    """Lift an ``(n, T)`` snapshot matrix to ``(N, T)``."""
    return dictionary.lift_snapshots(X)


def jacobian(dictionary: Dictionary, x) -> np.ndarray:
    return dictionary.jacobian(x)


def max_gradient_norm(dictionary: Dictionary, X) -> float:
    return dictionary.max_gradient_norm(X)


class Lifting(TransformerMixin, BaseEstimator):
    """Lift sample-major states through a dictionary.

    With ``dictionary=None`` a TPS dictionary with ``n_centers`` centers is
    drawn on ``box`` (default: the bounding box of the training data).
    """

    def __init__(self, dictionary=None, n_centers=0, box=None, seed=0):
        self.dictionary = dictionary
        self.n_centers = n_centers
        self.box = box
        self.seed = seed

    def fit(self, X, y=None):
        X = check_states(X)
        if self.dictionary is not None:
            if self.dictionary.n != X.shape[1]:
                raise ValueError("dictionary state dimension does not match X")
            self.dictionary_ = self.dictionary
        else:
            box = self.box
            if box is None:
                box = np.column_stack([X.min(axis=0), X.max(axis=0)])
            self.dictionary_ = make_tps_dictionary(
                X.shape[1], self.n_centers, box, self.seed)
        self.n_features_in_ = X.shape[1]
        return self

    def transform(self, X):
        check_is_fitted(self, "dictionary_")
        X = check_states(X, n_features=self.n_features_in_)
        return self.dictionary_.lift_snapshots(X.T).T
