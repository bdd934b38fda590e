"""Least-squares Koopman estimation (EDMD / DQ-EDMD), prediction and modes."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from . import __version__
from ._validation import check_same_shape, check_snapshots, check_states, check_vector
from .dictionary import Dictionary, identity_dictionary
from .dynamics import build_snapshot_pairs

__all__ = [
    "FitReport",
    "KoopmanEstimate",
    "KoopmanModes",
    "gram_pinv",
    "fit_least_squares",
    "fit_decoder",
    "fit_edmd",
    "fit_dq_edmd",
    "predict",
    "koopman_modes",
    "relative_matrix_error",
    "mean_relative_prediction_error",
    "save_model",
    "load_model",
    "EDMD",
]

DEFAULT_RCOND_FACTOR = 64.0


@dataclass
class FitReport:
    residual: float
    gram_rank: int
    gram_condition: float
    svd_cutoff: float
    max_gradient_norm: Optional[float] = None


@dataclass
class KoopmanEstimate:
    K: np.ndarray
    C: np.ndarray
    dictionary: Dictionary
    fit: FitReport
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        N = self.dictionary.N
        if self.K.shape != (N, N):
            raise ValueError(f"K must be {N}x{N}, got {self.K.shape}")
        if self.C.shape != (self.dictionary.n, N):
            raise ValueError(
                f"C must be {self.dictionary.n}x{N}, got {self.C.shape}")


@dataclass
class KoopmanModes:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray  # columns xi_i
    modes: np.ndarray  # columns v_i = C xi_i


def gram_pinv(Phi, rcond_factor=DEFAULT_RCOND_FACTOR):
    """Pseudo-inverse of ``Phi Phi^T`` via SVD.

    Singular values below ``s_max * N * machine_eps * rcond_factor`` are
    dropped. Returns ``(pinv, rank, condition, cutoff)``.
    """
    G = Phi @ Phi.T
    U, s, Vt = np.linalg.svd(G, hermitian=True)
    N = G.shape[0]
    smax = s[0] if s.size else 0.0
    cutoff = smax * N * np.finfo(float).eps * rcond_factor
    keep = s > cutoff
    inv = (Vt[keep].T / s[keep]) @ U[:, keep].T
    cond = float(smax / s[-1]) if s[-1] > 0 else float("inf")
    return inv, int(keep.sum()), cond, float(cutoff)


def fit_least_squares(Phi, Phi_next, rcond_factor=DEFAULT_RCOND_FACTOR):
    """``K = Phi' Phi^T (Phi Phi^T)^+``, the minimizer of ``||Phi' - A Phi||^2 / T``.

    Returns ``(K, FitReport)``.
    """
    Phi = check_snapshots(Phi, "Phi")
    Phi_next = check_snapshots(Phi_next, "Phi_next")
    check_same_shape(Phi, Phi_next)
    G_inv, rank, cond, cutoff = gram_pinv(Phi, rcond_factor)
    K = (Phi_next @ Phi.T) @ G_inv
    resid = Phi_next - K @ Phi
    report = FitReport(residual=float(np.sum(resid**2) / Phi.shape[1]),
                       gram_rank=rank, gram_condition=cond, svd_cutoff=cutoff)
    return K, report


def fit_decoder(X, Phi, rcond_factor=DEFAULT_RCOND_FACTOR) -> np.ndarray:
    """``C = X Phi^T (Phi Phi^T)^+``, mapping lifted states back to states."""
    X = check_snapshots(X, "X")
    Phi = check_snapshots(Phi, "Phi")
    if X.shape[1] != Phi.shape[1]:
        raise ValueError("X and Phi must have the same number of snapshots")
    G_inv = gram_pinv(Phi, rcond_factor)[0]
    return (X @ Phi.T) @ G_inv


def fit_edmd(X, X_next, dictionary: Optional[Dictionary] = None,
             rcond_factor=DEFAULT_RCOND_FACTOR, meta=None) -> KoopmanEstimate:
    """Lift both snapshot matrices and fit ``K`` and ``C``.

    ``dictionary=None`` uses the identity dictionary, i.e. plain DMD.
    """
    X = check_snapshots(X, "X")
    X_next = check_snapshots(X_next, "X_next")
    check_same_shape(X, X_next, ("X", "X_next"))
    if dictionary is None:
        dictionary = identity_dictionary(X.shape[0])
    Phi = dictionary.lift_snapshots(X)
    Phi_next = dictionary.lift_snapshots(X_next)
    K, report = fit_least_squares(Phi, Phi_next, rcond_factor)
    C = fit_decoder(X, Phi, rcond_factor)
    report.max_gradient_norm = dictionary.max_gradient_norm(X)
    return KoopmanEstimate(K, C, dictionary, report, dict(meta or {}))


def fit_dq_edmd(X_decoded, X_decoded_next, dictionary: Optional[Dictionary] = None,
                rcond_factor=DEFAULT_RCOND_FACTOR, meta=None) -> KoopmanEstimate:
    """EDMD on decoded dither-quantized states.

    The observables are evaluated on the decoded states, so this is the same
    computation as :func:`fit_edmd`; it exists to keep call sites explicit.
    """
    return fit_edmd(X_decoded, X_decoded_next, dictionary, rcond_factor, meta)


def predict(est: KoopmanEstimate, x0, steps: int) -> np.ndarray:
    """Roll out ``x_hat_t = C K^t phi(x0)`` for ``t = 1..steps``; shape ``(steps, n)``.

    The lifted state is iterated (``z <- K z``), never re-lifted.
    """
    if steps < 1:
        raise ValueError("steps must be >= 1")
    z = est.dictionary.lift(x0)
    out = np.empty((steps, est.dictionary.n))
    for t in range(steps):
        z = est.K @ z
        out[t] = est.C @ z
    return out


def koopman_modes(est: KoopmanEstimate) -> KoopmanModes:
    """Eigenpairs of ``K`` sorted by decreasing ``|lambda|``, with modes ``C xi``."""
    K = est.K
    try:
        lam, vecs = np.linalg.eig(K)
    except np.linalg.LinAlgError as exc:
        raise RuntimeError(f"eigendecomposition of K failed: {exc}") from exc
    order = np.argsort(-np.abs(lam), kind="stable")
    lam, vecs = lam[order], vecs[:, order]
    return KoopmanModes(lam, vecs, est.C @ vecs)


def relative_matrix_error(K_ref, K_test) -> float:
    """``||K_ref - K_test||_F / ||K_ref||_F``."""
    K_ref = np.asarray(K_ref, dtype=float)
    K_test = np.asarray(K_test, dtype=float)
    if K_ref.shape != K_test.shape:
        raise ValueError(f"shape mismatch: {K_ref.shape} vs {K_test.shape}")
    ref = np.linalg.norm(K_ref)
    if ref == 0:
        raise ValueError("reference matrix has zero norm")
    return float(np.linalg.norm(K_ref - K_test) / ref)


def mean_relative_prediction_error(truth, predicted, floor=1e-8,
                                   return_skipped=False):
    """Time average of ``||x_hat_t - x_t|| / ||x_t||``.

    Steps with ``||x_t|| < floor`` are skipped. With ``return_skipped=True``
    returns ``(mean, n_skipped)``.
    """
    truth = np.asarray(truth, dtype=float)
    predicted = np.asarray(predicted, dtype=float)
    if truth.shape != predicted.shape:
        raise ValueError(
            f"truth and predicted differ in shape: {truth.shape} vs {predicted.shape}")
    if truth.ndim == 1:
        truth, predicted = truth[:, None], predicted[:, None]
    norms = np.linalg.norm(truth, axis=1)
    ok = norms >= floor
    if not ok.any():
        raise ValueError("every truth state is below the norm floor")
    errs = np.linalg.norm(predicted[ok] - truth[ok], axis=1) / norms[ok]
    mean = float(errs.mean())
    if return_skipped:
        return mean, int((~ok).sum())
    return mean


# -- model files ------------------------------------------------------------

MODEL_FORMAT = "dqedmd-model/1"


def save_model(est: KoopmanEstimate, path) -> None:
    """Write a self-contained JSON model file (floats round-trip exactly)."""
    doc = {
        "format": MODEL_FORMAT,
        "version": __version__,
        "K": est.K.tolist(),
        "C": est.C.tolist(),
        "dictionary": est.dictionary.to_dict(),
        "fit": asdict(est.fit),
        "meta": est.meta,
    }
    Path(path).write_text(json.dumps(doc, indent=1))


def load_model(path) -> KoopmanEstimate:
    doc = json.loads(Path(path).read_text())
    if doc.get("format") != MODEL_FORMAT:
        raise ValueError(f"{path}: not a {MODEL_FORMAT} file")
    return KoopmanEstimate(
        K=np.array(doc["K"], dtype=float),
        C=np.array(doc["C"], dtype=float),
        dictionary=Dictionary.from_dict(doc["dictionary"]),
        fit=FitReport(**doc["fit"]),
        meta=doc.get("meta", {}),
    )


# -- estimator ----------------------------------------------------------------

class EDMD(BaseEstimator):
    """Extended DMD as a scikit-learn style regressor.

    Samples are rows: ``fit(X, y)`` takes states ``X`` and their one-step
    successors ``y``, both ``(n_samples, n_features)``. Use
    :meth:`fit_trajectories` to fit directly from ``(M, T + 1, n)`` arrays.

    Parameters
    ----------
    dictionary : Dictionary, optional
        Observables; ``None`` means identity (plain DMD).
    rcond_factor : float
        Multiplier on ``s_max * N * machine_eps`` for the SVD cutoff.

    Attributes
    ----------
    estimate_ : KoopmanEstimate
    koopman_matrix_ : ndarray of shape (N, N)
    decoder_ : ndarray of shape (n_features, N)
    fit_report_ : FitReport
    """

    def __init__(self, dictionary=None, rcond_factor=DEFAULT_RCOND_FACTOR):
        self.dictionary = dictionary
        self.rcond_factor = rcond_factor

    def _fit_columns(self, X, X_next):
        self.estimate_ = fit_edmd(X, X_next, self.dictionary, self.rcond_factor)
        self.koopman_matrix_ = self.estimate_.K
        self.decoder_ = self.estimate_.C
        self.fit_report_ = self.estimate_.fit
        self.n_features_in_ = X.shape[0]
        return self

    def fit(self, X, y):
        X = check_states(X)
        y = check_states(y, n_features=X.shape[1], name="y")
        if X.shape[0] != y.shape[0]:
            raise ValueError("X and y must have the same number of samples")
        return self._fit_columns(X.T, y.T)

    def fit_trajectories(self, trajectories):
        return self._fit_columns(*build_snapshot_pairs(trajectories))

    def predict(self, X):
        """One-step predictions ``C K phi(x)`` for every row of ``X``."""
        check_is_fitted(self, "estimate_")
        X = check_states(X, n_features=self.n_features_in_)
        est = self.estimate_
        return (est.C @ est.K @ est.dictionary.lift_snapshots(X.T)).T

    def rollout(self, x0, steps):
        check_is_fitted(self, "estimate_")
        x0 = check_vector(x0, self.n_features_in_, "x0")
        return predict(self.estimate_, x0, steps)

    def modes(self):
        check_is_fitted(self, "estimate_")
        return koopman_modes(self.estimate_)

    def score(self, X, y):
        """Negative mean relative one-step error (higher is better)."""
        return -mean_relative_prediction_error(check_states(y), self.predict(X))
