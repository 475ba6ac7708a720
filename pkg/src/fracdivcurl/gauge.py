"""Nonlocal Coulomb-type gauge on node-indexed rotations.

A gauge field is an array ``P`` of shape ``(M, N, N)`` with ``P_i`` in SO(N);
a matrix potential is an array ``Omega`` of shape ``(M, M, N, N)``.  The
gauge is a critical point of

    F(P) = sum_{i != j} |(P_i - P_j)/d_ij^s - P_i Omega_ij|^2 mu_i mu_j / d_ij^n

found by Riemannian gradient descent with the retraction
``P_k <- expm(-tau alpha_k) P_k``.  At any critical point the rotated
potential :func:`omega_p` is s-divergence free.
"""
from __future__ import annotations

import time

import numpy as np
from scipy.linalg import expm

from .domain import Domain
from .fracops import pair_measure, s_divergence
from .solver import ROUNDOFF, SolveReport, SolverConfig

ANTISYM_TOL = 1e-10


def skew(A):
    return 0.5 * (A - np.swapaxes(A, -1, -2))


def check_antisymmetric(Omega, tol=ANTISYM_TOL):
    Omega = np.asarray(Omega, dtype=float)
    defect = np.max(np.abs(Omega + np.swapaxes(Omega, -1, -2)), initial=0.0)
    if defect > tol:
        raise ValueError(f"Omega is not antisymmetric (defect {defect:.3e})")
    return Omega


def check_gauge(P, tol=1e-10):
    P = np.asarray(P, dtype=float)
    if P.ndim != 3 or P.shape[1] != P.shape[2]:
        raise ValueError(f"gauge must have shape (M, N, N), got {P.shape}")
    eye = np.eye(P.shape[1])
    defect = np.max(np.abs(np.swapaxes(P, 1, 2) @ P - eye))
    if defect > tol or np.any(np.linalg.det(P) <= 0):
        raise ValueError(f"gauge leaves SO(N) (orthogonality defect {defect:.3e})")
    return P


def identity_gauge(M: int, N: int) -> np.ndarray:
    return np.broadcast_to(np.eye(N), (M, N, N)).copy()


def expm_skew(A: np.ndarray) -> np.ndarray:
    """Exponential of (a stack of) antisymmetric matrices.

    Closed forms for N = 2 and N = 3 (Rodrigues); scipy's Pade scaling and
    squaring otherwise.
    """
    A = np.asarray(A, dtype=float)
    N = A.shape[-1]
    if N == 2:
        t = A[..., 1, 0]
        c, s = np.cos(t), np.sin(t)
        return np.stack([np.stack([c, -s], -1), np.stack([s, c], -1)], -2)
    if N == 3:
        w = np.stack([A[..., 2, 1], A[..., 0, 2], A[..., 1, 0]], -1)
        theta = np.linalg.norm(w, axis=-1)[..., None, None]
        small = theta < 1e-6
        th = np.where(small, 1.0, theta)
        a = np.where(small, 1 - theta**2 / 6 + theta**4 / 120, np.sin(th) / th)
        b = np.where(small, 0.5 - theta**2 / 24 + theta**4 / 720, (1 - np.cos(th)) / th**2)
        return np.eye(3) + a * A + b * (A @ A)
    if A.ndim == 2:
        return expm(A)
    flat = A.reshape(-1, N, N)
    return np.stack([expm(m) for m in flat]).reshape(A.shape)


def _residual_field(domain, P, Omega, s):
    """``R_ij = (P_i - P_j)/d_ij^s - P_i Omega_ij``; diagonal zero."""
    D = domain.inverse_distance_power(s)
    R = (P[:, None] - P[None, :]) * D[:, :, None, None] - np.einsum("iab,ijbc->ijac", P, Omega)
    idx = np.arange(domain.size)
    R[idx, idx] = 0.0
    return R


def gauge_energy(domain: Domain, P, Omega, s: float, general: bool = False) -> float:
    """``F(P)``; ``general=True`` skips the antisymmetry check on ``Omega``."""
    if not general:
        check_antisymmetric(Omega)
    R = _residual_field(domain, np.asarray(P, dtype=float), np.asarray(Omega, dtype=float), s)
    return float(np.sum(np.sum(R**2, axis=(-1, -2)) * pair_measure(domain)))


def gauge_gradient(domain: Domain, P, Omega, s: float, general: bool = False) -> np.ndarray:
    """Left-trivialized Riemannian gradient, shape ``(M, N, N)``, antisymmetric.

    Node ``k`` carries ``alpha_k`` with ``d/dt F(expm(t a) P_k) = <alpha_k, a>``
    (Frobenius) for every antisymmetric ``a``, the other nodes held fixed.
    """
    if not general:
        check_antisymmetric(Omega)
    P = np.asarray(P, dtype=float)
    Omega = np.asarray(Omega, dtype=float)
    w = pair_measure(domain)
    D = domain.inverse_distance_power(s)
    R = _residual_field(domain, P, Omega, s)
    N = P.shape[1]
    # d/dt R_kj = a (D_kj P_k - P_k Omega_kj),  d/dt R_ik = -a D_ik P_k
    right = D[:, :, None, None] * np.eye(N) - np.swapaxes(Omega, -1, -2)
    out_pairs = np.einsum("kj,kjab,kjbc->kac", w, R, right)
    in_pairs = np.einsum("ik,ikac->kac", w * D, R)
    G = 2 * (out_pairs - in_pairs) @ np.swapaxes(P, 1, 2)
    return skew(G)


def omega_p(domain: Domain, P, Omega, s: float, general: bool = False) -> np.ndarray:
    """Rotated potential

    ``1/2 (d_s P (P_y^T + P_x^T) - P_x Omega P_y^T + P_y Omega^T P_x^T)``,

    which for antisymmetric ``Omega`` reduces to
    ``1/2 (d_s P (P_y^T + P_x^T) - P_x Omega P_y^T - P_y Omega P_x^T)``.
    Each entry is the antisymmetric part of ``(d_s P - P_x Omega) P_y^T``.
    """
    if not general:
        check_antisymmetric(Omega)
    P = np.asarray(P, dtype=float)
    Omega = np.asarray(Omega, dtype=float)
    D = domain.inverse_distance_power(s)
    Pt = np.swapaxes(P, 1, 2)
    dP = (P[:, None] - P[None, :]) * D[:, :, None, None]
    first = np.einsum("ijab,ijbc->ijac", dP, Pt[None, :] + Pt[:, None])
    second = np.einsum("iab,ijbc,jcd->ijad", P, Omega, Pt)
    third = np.einsum("jab,ijcb,idc->ijad", P, Omega, P)
    out = 0.5 * (first - second + third)
    idx = np.arange(domain.size)
    out[idx, idx] = 0.0
    return out


def gauge_conservation_residual(domain: Domain, P, Omega, s: float, general: bool = False) -> float:
    """Max over ``a < b`` of ``sup |div_s Omega^P[:, :, a, b]|``."""
    OP = omega_p(domain, P, Omega, s, general=general)
    N = OP.shape[-1]
    worst = 0.0
    for a in range(N):
        for b in range(a + 1, N):
            worst = max(worst, float(np.max(np.abs(s_divergence(domain, OP[:, :, a, b], s)))))
    return worst


def solve_gauge(domain: Domain, Omega, s: float, cfg: SolverConfig | None = None, P0=None, general: bool = False):
    """Minimize ``F`` over SO(N)-valued node fields, starting from ``P0`` (default identity).

    Barzilai-Borwein trial steps with Armijo backtracking; stops once the
    largest node gradient (Frobenius) is at most ``cfg.tol``.
    """
    cfg = cfg or SolverConfig()
    Omega = np.asarray(Omega, dtype=float)
    if not general:
        check_antisymmetric(Omega)
    M, N = domain.size, Omega.shape[-1]
    P = identity_gauge(M, N) if P0 is None else check_gauge(P0).copy()
    start = time.perf_counter()

    def evaluate(Q):
        return (
            gauge_energy(domain, Q, Omega, s, general=True),
            gauge_gradient(domain, Q, Omega, s, general=True),
        )

    def sup_norm(A):
        return float(np.max(np.sqrt(np.sum(A**2, axis=(-1, -2)))))

    F, g = evaluate(P)
    res = sup_norm(g)
    report = SolveReport(energies=[F], grad_norms=[res])
    prev = None

    while True:
        if res <= cfg.tol:
            report.converged = True
            report.message = "converged"
            break
        if report.iterations >= cfg.max_iters:
            report.message = "max_iters reached"
            break

        tau = cfg.initial_step
        if prev is not None:
            step, dg = prev
            sy = float(np.sum(step * (g - dg)))
            if sy > 0:
                tau = float(np.sum(step * step)) / sy

        gg = float(np.sum(g * g))
        while True:
            trial = expm_skew(-tau * g) @ P
            F_new, g_new = evaluate(trial)
            if F_new <= F - cfg.armijo * tau * gg:
                break
            # Armijo is unresolvable once the model decrease is round-off
            if tau * gg < ROUNDOFF * F and F_new <= F + ROUNDOFF * F:
                break
            tau *= cfg.shrink
            if tau < cfg.min_step:
                trial = None
                break
        if trial is None:
            report.message = "line search failed"
            break

        prev = (-tau * g, g)
        P, F, g = trial, F_new, g_new
        res = sup_norm(g)
        report.iterations += 1
        report.energies.append(F)
        report.grad_norms.append(res)

    report.el_residual = res
    report.wall_time = time.perf_counter() - start
    return P, report


def random_antisymmetric_potential(domain: Domain, N: int, rng: np.random.Generator, amplitude: float = 1.0) -> np.ndarray:
    """Gaussian antisymmetric matrices on every ordered pair, zero diagonal."""
    M = domain.size
    A = skew(rng.standard_normal((M, M, N, N))) * amplitude
    idx = np.arange(M)
    A[idx, idx] = 0.0
    return A


def manufactured_potential(domain: Domain, P_star, s: float) -> np.ndarray:
    """``Omega = P_x^T d_s P(x, y)``, for which ``F(P_star) = 0``.

    The result is generally not antisymmetric; pass ``general=True`` downstream.
    """
    P_star = np.asarray(P_star, dtype=float)
    D = domain.inverse_distance_power(s)
    dP = (P_star[:, None] - P_star[None, :]) * D[:, :, None, None]
    return np.einsum("iba,ijbc->ijac", P_star, dP)


def smooth_gauge(domain: Domain, N: int, rng: np.random.Generator, amplitude: float = 0.5, modes: int = 2) -> np.ndarray:
    """``expm(A(x))`` for a random low-frequency antisymmetric field ``A``."""
    x = (domain.nodes - np.asarray(domain.lower)) / np.asarray(domain.side_lengths)
    A = np.zeros((domain.size, N, N))
    for k in range(1, modes + 1):
        for trig in (np.cos, np.sin):
            coeff = skew(rng.standard_normal((N, N)))
            phase = trig(2 * np.pi * k * x.sum(axis=1))
            A += amplitude / k * phase[:, None, None] * coeff
    return expm_skew(A)
