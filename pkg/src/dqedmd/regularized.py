"""Regularized recovery from quantized data and perturbation diagnostics.

Recovery solves

    min_A  ||Phib' - A Phib||^2 / T - tr(A beta) - tr(A^T A Gamma)

whose zero-gradient condition ``A (Phib Phib^T / T - Gamma) = Phib' Phib^T / T
+ beta^T / 2`` has a unique solution (a minimizer) whenever the bracket on the
left is positive definite. For identity observables the regularizer is known
in closed form: ``Gamma = eps^2 / 12 * I`` and ``beta = 0``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._validation import check_same_shape, check_snapshots
from .dictionary import identity_dictionary
from .edmd import (DEFAULT_RCOND_FACTOR, EDMD, KoopmanEstimate, fit_decoder,
                   fit_least_squares)

__all__ = [
    "RegularizationParams",
    "IndefiniteGramError",
    "dmd_regularizer",
    "regularized_objective",
    "recover_regularized",
    "GramInflationReport",
    "gram_inflation_check",
    "PerturbationDiagnostics",
    "perturbation_diagnostics",
    "loglog_slope",
    "RegularizedEDMD",
]

DEFINITENESS_TOL = 1e-10


class IndefiniteGramError(ValueError):
    """``Phib Phib^T / T - Gamma`` is not safely positive definite."""


@dataclass
class RegularizationParams:
    beta: np.ndarray
    gamma: np.ndarray

    def __post_init__(self):
        self.beta = np.atleast_2d(np.asarray(self.beta, dtype=float))
        self.gamma = np.atleast_2d(np.asarray(self.gamma, dtype=float))
        if self.beta.shape != self.gamma.shape or self.beta.shape[0] != self.beta.shape[1]:
            raise ValueError("beta and gamma must be square and of equal shape")

    @property
    def N(self) -> int:
        return self.beta.shape[0]

    @classmethod
    def zeros(cls, N: int) -> "RegularizationParams":
        return cls(np.zeros((N, N)), np.zeros((N, N)))


def dmd_regularizer(eps, N: int) -> RegularizationParams:
    """Identity-observable regularizer: ``Gamma = eps^2/12 I``, ``beta = 0``.

    ``eps`` may be a scalar or one resolution per state component (then
    ``Gamma = diag(eps_j^2 / 12)``).
    """
    if N < 1:
        raise ValueError("N must be >= 1")
    eps = np.asarray(eps, dtype=float)
    if np.any(eps < 0):
        raise ValueError("resolution must be non-negative")
    diag = np.broadcast_to(eps**2 / 12.0, (N,)) if eps.ndim == 0 else eps**2 / 12.0
    if diag.shape != (N,):
        raise ValueError(f"need 1 or {N} resolutions, got {eps.size}")
    return RegularizationParams(np.zeros((N, N)), np.diag(diag))


def regularized_objective(A, Phi_bar, Phi_bar_next, params: RegularizationParams) -> float:
    T = Phi_bar.shape[1]
    resid = Phi_bar_next - A @ Phi_bar
    return float(np.sum(resid**2) / T - np.trace(A @ params.beta)
                 - np.trace(A.T @ A @ params.gamma))


def recover_regularized(Phi_bar, Phi_bar_next, params: RegularizationParams,
                        tol=DEFINITENESS_TOL) -> np.ndarray:
    """Stationary point ``(Phib' Phib^T/T + beta^T/2)(Phib Phib^T/T - Gamma)^-1``.

    Raises
    ------
    IndefiniteGramError
        If the corrected Gram matrix has smallest eigenvalue at or below
        ``tol * trace / N``; reduce ``Gamma`` or gather more data.
    """
    Phi_bar = check_snapshots(Phi_bar, "Phi_bar")
    Phi_bar_next = check_snapshots(Phi_bar_next, "Phi_bar_next")
    check_same_shape(Phi_bar, Phi_bar_next, ("Phi_bar", "Phi_bar_next"))
    N, T = Phi_bar.shape
    if params.N != N:
        raise ValueError(f"regularizer is {params.N}x{params.N}, data has N={N}")
    M = Phi_bar @ Phi_bar.T / T - params.gamma
    M_sym = 0.5 * (M + M.T)
    lam_min = np.linalg.eigvalsh(M_sym)[0]
    floor = tol * np.trace(M_sym) / N
    if not lam_min > floor:
        raise IndefiniteGramError(
            f"corrected Gram matrix not positive definite (min eigenvalue "
            f"{lam_min:.3e} <= {floor:.3e}); the quantization is too coarse for "
            f"this data: reduce Gamma or gather more data")
    R = Phi_bar_next @ Phi_bar.T / T + params.beta.T / 2
    return np.linalg.solve(M.T, R.T).T


@dataclass
class GramInflationReport:
    D: np.ndarray
    expected: np.ndarray  # eps_j^2 / 12 per component
    max_diag_deviation: float
    max_offdiag: float

    @property
    def max_diag_rel_deviation(self) -> float:
        return float(np.max(np.abs(np.diag(self.D) / self.expected - 1)))

    @property
    def max_offdiag_rel(self) -> float:
        scale = np.sqrt(np.outer(self.expected, self.expected))
        off = ~np.eye(self.D.shape[0], dtype=bool)
        return float(np.max(np.abs(self.D[off]) / scale[off])) if off.any() else 0.0


def gram_inflation_check(Phi, Phi_bar, eps) -> GramInflationReport:
    """Compare ``(Phib Phib^T - Phi Phi^T) / T`` with ``diag(eps^2 / 12)``.

    Meaningful for identity observables, where ``Phib - Phi`` is the raw
    quantization error.
    """
    Phi = check_snapshots(Phi, "Phi")
    Phi_bar = check_snapshots(Phi_bar, "Phi_bar")
    check_same_shape(Phi, Phi_bar, ("Phi", "Phi_bar"))
    N, T = Phi.shape
    D = (Phi_bar @ Phi_bar.T - Phi @ Phi.T) / T
    expected = np.broadcast_to(np.asarray(eps, dtype=float) ** 2 / 12.0, (N,)).copy()
    off = ~np.eye(N, dtype=bool)
    return GramInflationReport(
        D=D,
        expected=expected,
        max_diag_deviation=float(np.max(np.abs(np.diag(D) - expected))),
        max_offdiag=float(np.max(np.abs(D[off]))) if off.any() else 0.0,
    )


@dataclass
class PerturbationDiagnostics:
    phi_eps_norm: float
    psi_eps_norm: float
    pi_eps_norm: float
    k_eps_norm: float
    k_norm: float
    gram_inv_norm: float
    bound_rhs: float
    decomposition_residual: float

    @property
    def relative_k_eps(self) -> float:
        return self.k_eps_norm / self.k_norm

    def bound_holds(self, rtol=1e-6) -> bool:
        return self.relative_k_eps <= self.bound_rhs * (1 + rtol)


def perturbation_diagnostics(Phi, Phi_next, Phi_bar, Phi_bar_next, K, K_tilde,
                             max_condition=1e14) -> PerturbationDiagnostics:
    """Perturbation quantities of the finite-data analysis.

    With ``Phi_eps = Phib - Phi`` (and likewise for the successors),
    ``Psi = Phi_eps Phi^T + Phi Phi_eps^T + Phi_eps Phi_eps^T`` and
    ``Pi = Phi'_eps Phi^T + Phi' Phi_eps^T + Phi'_eps Phi_eps^T``. The bound
    is ``(||Psi|| + ||Pi|| / ||K||) ||(Phib Phib^T)^-1||`` on
    ``||K_tilde - K|| / ||K||``. ``decomposition_residual`` measures how well
    ``K_tilde - K = (Pi - K Psi)(Phib Phib^T)^-1`` holds numerically.
    """
    mats = [check_snapshots(a, name) for a, name in zip(
        (Phi, Phi_next, Phi_bar, Phi_bar_next),
        ("Phi", "Phi_next", "Phi_bar", "Phi_bar_next"))]
    Phi, Phi_next, Phi_bar, Phi_bar_next = mats
    for a, name in zip(mats[1:], ("Phi_next", "Phi_bar", "Phi_bar_next")):
        check_same_shape(Phi, a, ("Phi", name))
    for G, name in ((Phi @ Phi.T, "Phi"), (Phi_bar @ Phi_bar.T, "Phi_bar")):
        cond = np.linalg.cond(G)
        if not cond < max_condition:
            raise np.linalg.LinAlgError(
                f"{name} is numerically rank deficient (Gram condition {cond:.3e})")
    Phi_eps = Phi_bar - Phi
    Phi_next_eps = Phi_bar_next - Phi_next
    Psi = Phi_eps @ Phi.T + Phi @ Phi_eps.T + Phi_eps @ Phi_eps.T
    Pi = Phi_next_eps @ Phi.T + Phi_next @ Phi_eps.T + Phi_next_eps @ Phi_eps.T
    G_bar_inv = np.linalg.inv(Phi_bar @ Phi_bar.T)
    K = np.asarray(K, dtype=float)
    K_tilde = np.asarray(K_tilde, dtype=float)
    k_norm = float(np.linalg.norm(K))
    psi = float(np.linalg.norm(Psi))
    pi = float(np.linalg.norm(Pi))
    g_inv = float(np.linalg.norm(G_bar_inv))
    K_eps = K_tilde - K
    predicted = (Pi - K @ Psi) @ G_bar_inv
    return PerturbationDiagnostics(
        phi_eps_norm=float(np.linalg.norm(Phi_eps)),
        psi_eps_norm=psi,
        pi_eps_norm=pi,
        k_eps_norm=float(np.linalg.norm(K_eps)),
        k_norm=k_norm,
        gram_inv_norm=g_inv,
        bound_rhs=(psi + pi / k_norm) * g_inv,
        decomposition_residual=float(np.linalg.norm(K_eps - predicted)),
    )


def loglog_slope(pairs) -> float:
    """Least-squares slope of ``log(error)`` against ``log(eps)``."""
    arr = np.asarray(pairs, dtype=float)
    if arr.ndim != 2 or arr.shape[1] != 2 or arr.shape[0] < 3:
        raise ValueError("need at least three (eps, error) pairs")
    if np.any(arr <= 0) or not np.all(np.isfinite(arr)):
        raise ValueError("eps and error must be positive and finite")
    slope, _ = np.polyfit(np.log(arr[:, 0]), np.log(arr[:, 1]), 1)
    return float(slope)


class RegularizedEDMD(EDMD):
    """EDMD on quantized data with the trace regularizers subtracted.

    Give either ``params`` directly, or ``resolution`` (scalar or one per
    state component) to use the identity-observable closed form; the latter
    requires ``dictionary=None``.
    """

    def __init__(self, dictionary=None, params=None, resolution=None,
                 rcond_factor=DEFAULT_RCOND_FACTOR):
        super().__init__(dictionary=dictionary, rcond_factor=rcond_factor)
        self.params = params
        self.resolution = resolution

    def _fit_columns(self, X, X_next):
        dictionary = self.dictionary or identity_dictionary(X.shape[0])
        if self.params is not None:
            params = self.params
        elif self.resolution is not None:
            if not dictionary.is_identity:
                raise ValueError(
                    "the closed-form regularizer only covers identity observables; "
                    "pass params explicitly for other dictionaries")
            params = dmd_regularizer(self.resolution, dictionary.N)
        else:
            params = RegularizationParams.zeros(dictionary.N)
        Phi = dictionary.lift_snapshots(X)
        Phi_next = dictionary.lift_snapshots(X_next)
        K = recover_regularized(Phi, Phi_next, params)
        C = fit_decoder(X, Phi, self.rcond_factor)
        report = fit_least_squares(Phi, Phi_next, self.rcond_factor)[1]
        resid = Phi_next - K @ Phi
        report.residual = float(np.sum(resid**2) / Phi.shape[1])
        self.estimate_ = KoopmanEstimate(K, C, dictionary, report)
        self.koopman_matrix_ = K
        self.decoder_ = C
        self.fit_report_ = report
        self.n_features_in_ = X.shape[0]
        return self
