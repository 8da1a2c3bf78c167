"""Large-system (deterministic equivalent) SINR evaluation.

The random-matrix machinery lives in three solvers:

* ``solve_fixed_point``: scalar fixed point whose solution makes
  ``(1/N) tr(Q T)`` track the resolvent trace ``(1/N) tr(Q (B + alpha I)^-1)``
  of the sample Gram matrix ``B = (1/N) H H^H + S``.
* ``solve_derivative``: the companion linear system giving sandwich
  matrices ``T'_Omega`` whose traces track the two-sided resolvent trace
  with ``Omega`` inserted between the two resolvent factors.
* ``solve_zf_limit``: the regularizer-free limit of the system above, which
  is what zero forcing needs; it exists only with more antennas than users.

``de_sinr`` evaluates the asymptotic per-user SINR of a scenario for any
scheme/normalization pair, decomposed into the same signal / variance /
non-coherent interference / pilot contamination components as the Monte
Carlo estimator (asymptotic components carry an extra 1/N scaling; the
ratios are directly comparable).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .channel import ChannelStatistics, compute_statistics
from .precoder import MRT, RZF, VECTOR, PrecoderConfig, default_rzf_alpha
from .results import SinrGrid
from .scenario import Scenario

logger = logging.getLogger(__name__)

_BURN_IN = 10
# relative magnitude above which a clamped negative component is reported
_CLAMP_WARN = 1e-8


class ConvergenceError(RuntimeError):
    """Fixed point or derivative system failed to produce a solution."""

    def __init__(self, message: str, residual: Optional[float] = None, iterations: int = 0):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations


@dataclass(frozen=True)
class FixedPointSolution:
    u: np.ndarray  # (K,) positive scalars
    T: np.ndarray  # (N, N) Hermitian positive definite
    iterations: int
    residual: float


@dataclass(frozen=True)
class DerivativeSolution:
    """Derivative quantities, one row per requested sandwich matrix.

    Rows follow the order of ``omegas`` passed to :func:`solve_derivative`,
    with the per-user covariance rows appended when ``include_own`` is set.
    """

    u_prime: np.ndarray  # (M, K)
    T_prime: np.ndarray  # (M, N, N)


@dataclass(frozen=True)
class ZfLimitSolution:
    u: np.ndarray  # (K,) limits of alpha * u as the regularizer vanishes
    T: np.ndarray  # (N, N)
    u_prime: np.ndarray  # (K, K); column k solves the system for phi[k]
    T_prime: np.ndarray  # (K, N, N); entry k is the sandwich matrix for phi[k]
    J: np.ndarray  # (K, K) coupling matrix of the derivative system
    iterations: int
    residual: float


def _trace_pair(a_flat: np.ndarray, b: np.ndarray) -> np.ndarray:
    # tr(A_k B) for a stack of flattened A_k, via an inner product with vec(B^T)
    return a_flat @ b.T.reshape(-1)


def _trace_product(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.real(np.sum(a * b.T)))


def _hermitize(m: np.ndarray) -> np.ndarray:
    return (m + m.conj().swapaxes(-1, -2)) / 2


def _rel_change(u_new: np.ndarray, u_old: np.ndarray) -> float:
    if u_new.size == 0:
        return 0.0
    return float(np.max(np.abs(u_new - u_old) / np.maximum(np.abs(u_new), 1e-300)))


def _warn_nonmonotone(name: str, it: int) -> None:
    logger.warning(
        "%s residual increased at iteration %d after burn-in; "
        "continuing (convergence diagnostic only)",
        name,
        it,
    )


def solve_fixed_point(
    phi: np.ndarray,
    S: Optional[np.ndarray],
    alpha: float,
    tol: float = 1e-10,
    max_iter: int = 10_000,
) -> FixedPointSolution:
    """Solve the resolvent fixed point for one cell.

    ``phi`` stacks the K per-user estimate covariances, ``S`` is the
    (already 1/N-scaled) deterministic loading and ``alpha > 0`` the
    regularizer. Iterates from ``u = 1/alpha``; the tolerance applies to
    the elementwise relative change of ``u`` between iterations.
    """
    if not alpha > 0:
        raise ValueError("fixed point requires alpha > 0")
    phi = np.asarray(phi, complex)
    K, N = phi.shape[0], phi.shape[-1]
    base = alpha * np.eye(N, dtype=complex)
    if S is not None:
        base = base + S
    if K == 0:
        T = _hermitize(np.linalg.inv(base))
        return FixedPointSolution(u=np.zeros(0), T=T, iterations=0, residual=0.0)

    phi_flat = phi.reshape(K, N * N)
    u = np.full(K, 1.0 / alpha)
    prev_resid = np.inf
    warned = False
    for it in range(1, max_iter + 1):
        m = base + np.einsum("k,kab->ab", 1.0 / (N * (1.0 + u)), phi)
        T = np.linalg.inv(m)
        u_new = np.real(_trace_pair(phi_flat, T)) / N
        resid = _rel_change(u_new, u)
        u = u_new
        if it > _BURN_IN and resid > prev_resid and not warned and resid > 100 * tol:
            _warn_nonmonotone("fixed point", it)
            warned = True
        prev_resid = resid
        if resid <= tol:
            # final resolvent proxy consistent with the returned u
            m = base + np.einsum("k,kab->ab", 1.0 / (N * (1.0 + u)), phi)
            return FixedPointSolution(
                u=u, T=_hermitize(np.linalg.inv(m)), iterations=it, residual=resid
            )
    raise ConvergenceError(
        f"fixed point did not converge in {max_iter} iterations "
        f"(last relative change {prev_resid:.3e})",
        residual=prev_resid,
        iterations=max_iter,
    )


def _gram_traces(phi: np.ndarray, T: np.ndarray) -> np.ndarray:
    """Trace Gram matrix ``tr(phi_m T phi_n T)``, real for Hermitian inputs."""
    prods = phi @ T  # (K, N, N)
    K = phi.shape[0]
    flat = prods.reshape(K, -1)
    flat_t = prods.swapaxes(-1, -2).reshape(K, -1)
    return np.real(flat @ flat_t.T)


def solve_derivative(
    phi: np.ndarray,
    fixed_point: FixedPointSolution,
    omegas: Sequence[np.ndarray] = (),
    include_own: bool = False,
) -> DerivativeSolution:
    """Solve the derivative linear system for each sandwich matrix.

    ``omegas`` lists arbitrary Hermitian PSD matrices; with ``include_own``
    one extra system per ``phi[k]`` is appended (those right-hand sides
    come for free from the trace Gram matrix). All right-hand sides share
    one factorization of the coupling system, whose singularity flags a
    near-critical operating point.
    """
    phi = np.asarray(phi, complex)
    K, N = phi.shape[0], phi.shape[-1]
    u, T = fixed_point.u, fixed_point.T
    gram = _gram_traces(phi, T)
    J = gram / (N * N * (1.0 + u)[None, :] ** 2)

    phi_flat = phi.reshape(K, N * N)
    n_sys = len(omegas) + (K if include_own else 0)
    if n_sys == 0:
        return DerivativeSolution(
            u_prime=np.zeros((0, K)), T_prime=np.zeros((0, N, N), dtype=complex)
        )
    rhs = np.empty((K, n_sys))
    for m_idx, omega in enumerate(omegas):
        w = T @ omega @ T
        rhs[:, m_idx] = np.real(_trace_pair(phi_flat, w)) / N
    if include_own:
        rhs[:, len(omegas) :] = gram / N

    try:
        u_prime = np.linalg.solve(np.eye(K) - J, rhs)  # (K, n_sys)
    except np.linalg.LinAlgError as exc:
        raise ConvergenceError(
            "derivative system is singular (near-critical antenna/user load)"
        ) from exc

    load = 1.0 / (N * (1.0 + u) ** 2)
    t_prime = np.empty((n_sys, N, N), dtype=complex)
    for m_idx in range(n_sys):
        if m_idx < len(omegas):
            omega = omegas[m_idx]
        else:
            omega = phi[m_idx - len(omegas)]
        inner = np.einsum("k,kab->ab", u_prime[:, m_idx] * load, phi) + omega
        t_prime[m_idx] = T @ inner @ T
    return DerivativeSolution(u_prime=u_prime.T.copy(), T_prime=t_prime)


def solve_zf_limit(
    phi: np.ndarray,
    tol: float = 1e-10,
    max_iter: int = 10_000,
) -> ZfLimitSolution:
    """Regularizer-free limit of the fixed point plus its derivative system.

    Requires strictly more antennas than users; the solution scalars are
    the limits of ``alpha * u`` as the regularizer vanishes. Initialized at
    the exact solution of the uncorrelated special case for fast
    convergence.
    """
    phi = np.asarray(phi, complex)
    K, N = phi.shape[0], phi.shape[-1]
    if N <= K:
        raise ConvergenceError(
            f"zero-forcing limit needs more antennas than users (N={N}, K={K})"
        )
    trphi = np.real(np.einsum("kaa->k", phi)) / N
    if np.any(trphi <= 0):
        raise ConvergenceError("an estimate covariance has nonpositive trace")

    phi_flat = phi.reshape(K, N * N)
    eye = np.eye(N, dtype=complex)
    u = trphi * (1.0 - K / N)
    prev_resid = np.inf
    warned = False
    for it in range(1, max_iter + 1):
        m = eye + np.einsum("k,kab->ab", 1.0 / (N * u), phi)
        T = np.linalg.inv(m)
        u_new = np.real(_trace_pair(phi_flat, T)) / N
        if np.any(u_new <= trphi * 1e-13):
            raise ConvergenceError(
                "zero-forcing limit collapsed; antenna count is too close "
                f"to the user count (N={N}, K={K})"
            )
        resid = _rel_change(u_new, u)
        u = u_new
        if it > _BURN_IN and resid > prev_resid and not warned and resid > 100 * tol:
            _warn_nonmonotone("zero-forcing limit", it)
            warned = True
        prev_resid = resid
        if resid <= tol:
            m = eye + np.einsum("k,kab->ab", 1.0 / (N * u), phi)
            T = _hermitize(np.linalg.inv(m))
            break
    else:
        raise ConvergenceError(
            f"zero-forcing limit did not converge in {max_iter} iterations "
            f"(last relative change {prev_resid:.3e})",
            residual=prev_resid,
            iterations=max_iter,
        )

    gram = _gram_traces(phi, T)
    J = gram / (N * N * u[None, :] ** 2)
    rhs = gram / N  # column k is the right-hand side for phi[k]
    try:
        u_prime = np.linalg.solve(np.eye(K) - J, rhs)  # (K, K)
    except np.linalg.LinAlgError as exc:
        raise ConvergenceError(
            "zero-forcing derivative system is singular "
            f"(antenna/user load too critical, N={N}, K={K})"
        ) from exc

    load = 1.0 / (N * u**2)
    t_prime = np.empty((K, N, N), dtype=complex)
    for k in range(K):
        inner = np.einsum("i,iab->ab", u_prime[:, k] * load, phi) + phi[k]
        t_prime[k] = T @ inner @ T
    return ZfLimitSolution(
        u=u, T=T, u_prime=u_prime, T_prime=t_prime, J=J, iterations=it, residual=resid
    )


@dataclass(frozen=True)
class DeSinr:
    """Asymptotic per-user SINR decomposition for one scheme/normalization.

    ``interference_map[l, i, j, k]`` is the non-coherent power that stream
    ``i`` of BS ``l`` leaks onto UE ``k`` of cell ``j``; its diagonal entry
    is the beamforming-uncertainty variance and the rest sums into the
    non-coherent interference component.
    """

    grid: SinrGrid
    scheme: str
    normalization: str
    interference_map: np.ndarray  # (L, K, L, K)


def _clamp(name: str, arr: np.ndarray) -> np.ndarray:
    floor = float(np.min(arr)) if arr.size else 0.0
    if floor < 0:
        scale = float(np.max(np.abs(arr))) or 1.0
        if -floor > _CLAMP_WARN * scale:
            logger.warning(
                "clamping negative %s component (%.3e relative) to zero", name, -floor / scale
            )
        arr = np.clip(arr, 0.0, None)
    return arr


def _mrt_tables(scenario: Scenario, stats: ChannelStatistics):
    g = scenario.gains
    own = np.einsum("llk->lk", g)
    N = scenario.num_antennas
    trP = np.real(np.einsum("lkaa->lk", stats.base_projected)) / N
    base = scenario.correlation_base()
    trBP = np.real(np.einsum("ab,lkba->lk", base, stats.base_projected)) / N
    trphi = own[:, None, :] * g * trP[:, None, :]  # (l, j, k): tr of the cross matrix / N
    z = g[:, None, :, :] * (own**2 * trBP)[:, :, None, None]  # (l, i, j, k)
    return trphi, z


def de_sinr(
    scenario: Scenario,
    config: PrecoderConfig,
    stats: Optional[ChannelStatistics] = None,
    tol: float = 1e-10,
    max_iter: int = 10_000,
) -> DeSinr:
    """Evaluate the asymptotic SINR decomposition for every user.

    Per-cell solves are independent. The per-user cross terms are cached
    traces against the shared correlation base and the per-(cell, pilot)
    projected matrices, a fixed number of O(N^2) contractions per cell
    instead of fresh matrix products per user triple.
    """
    if stats is None:
        stats = compute_statistics(scenario)
    L, K, N = scenario.num_cells, scenario.ues_per_cell, scenario.num_antennas
    g = scenario.gains
    own = np.einsum("llk->lk", g)
    noise = scenario.power.sigma2 / (N * scenario.power.rho_dl)

    if config.scheme == MRT:
        trphi, z = _mrt_tables(scenario, stats)
        trphi_own = np.einsum("llk->lk", trphi)
        if config.normalization == VECTOR:
            W = 1.0 / trphi_own
        else:
            W = np.repeat(1.0 / trphi_own.mean(axis=1)[:, None], K, axis=1)
        sig_core = trphi_own**2
        cross_core = trphi**2
        middle = W[:, :, None, None] * z / N
    else:
        base = scenario.correlation_base()
        if config.scheme == RZF:
            alpha = config.alpha if config.alpha is not None else default_rzf_alpha(scenario)
            S = config.ridge_matrix / N if config.ridge_matrix is not None else None
        u_cross = np.empty((L, L, K))
        eps = np.empty((L, K, L, K))
        W = np.empty((L, K))
        sig_core = np.empty((L, K))
        base_flat_t = base.T.reshape(-1)
        for l in range(L):
            phi_own = stats.phi_own(l)
            proj = stats.base_projected[l]  # (K, N, N)
            proj_flat = proj.reshape(K, -1)
            if config.scheme == RZF:
                fp = solve_fixed_point(phi_own, S, alpha, tol=tol, max_iter=max_iter)
                deriv = solve_derivative(
                    phi_own, fp, omegas=[np.eye(N, dtype=complex)], include_own=True
                )
                u, T = fp.u, fp.T
                tp_eye, tp_phi = deriv.T_prime[0], deriv.T_prime[1:]
                denom_k = 1.0 + u
                if config.normalization == VECTOR:
                    tr_phi_eye = np.real(_trace_pair(proj_flat, tp_eye)) / N
                    W[l] = 1.0 / (own[l] ** 2 * tr_phi_eye)
                else:
                    s_plus = alpha * np.eye(N, dtype=complex)
                    if S is not None:
                        s_plus = s_plus + S
                    denom = np.real(np.trace(T)) / N - _trace_product(s_plus, tp_eye) / N
                    if not denom > 0:
                        raise ConvergenceError(
                            "matrix-normalization power coefficient is not positive"
                        )
                    W[l] = (K / N) / denom / denom_k**2
            else:
                zf = solve_zf_limit(phi_own, tol=tol, max_iter=max_iter)
                u, T = zf.u, zf.T
                tp_phi = zf.T_prime
                denom_k = u
                if config.normalization == VECTOR:
                    W[l] = 1.0 / u
                else:
                    W[l] = (1.0 / np.mean(1.0 / u)) / u**2

            sig_core[l] = u**2
            tr_proj_T = np.real(_trace_pair(proj_flat, T)) / N  # (K,)
            u_cross[l] = own[l][None, :] * g[l] * tr_proj_T[None, :]
            tp_flat = tp_phi.reshape(K, -1)
            tr_base_tp = np.real(tp_flat @ base_flat_t) / N  # (K_i,)
            # tr(proj_k @ tp_phi_i) / N as an (i, k) table
            tr_proj_tp = np.real(tp_flat @ proj.swapaxes(-1, -2).reshape(K, -1).T) / N
            ratio = u_cross[l] / denom_k[None, :]  # (j, k)
            coupler = own[l][None, :] * ratio * (ratio * own[l][None, :] - 2.0 * g[l])
            eps[l] = (
                g[l][None, :, :] * tr_base_tp[:, None, None]
                + tr_proj_tp[:, None, :] * coupler[None, :, :]
            )

        cross_core = u_cross**2
        middle = W[:, :, None, None] * eps / N

    signal = W * sig_core
    middle = _clamp("interference", middle)
    pilot_terms = W[:, None, :] * cross_core  # weight of stream k at BS l
    off_diag = (~np.eye(L, dtype=bool)).astype(float)
    pilot = _clamp("pilot contamination", np.einsum("ljk,lj->jk", pilot_terms, off_diag))

    idx_l = np.arange(L)[:, None]
    idx_k = np.arange(K)[None, :]
    variance = middle[idx_l, idx_k, idx_l, idx_k]
    total = middle.sum(axis=(0, 1))
    grid = SinrGrid(
        signal=signal,
        noise=noise,
        variance=variance,
        noncoherent_interference=total - variance,
        pilot_contamination=pilot,
    )
    return DeSinr(
        grid=grid,
        scheme=config.scheme,
        normalization=config.normalization,
        interference_map=middle,
    )
