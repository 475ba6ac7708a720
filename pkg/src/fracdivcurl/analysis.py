"""BMO, Hardy and maximal functionals, divergence-free projection and the
div-curl / Wente experiments.

Suprema over ``t > 0`` are taken over finite dyadic families of radii
(``2h, 4h, ...``), see :meth:`Domain.dyadic_radii`.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from itertools import product

import numpy as np
import scipy.linalg

from .domain import Ball, Domain, ball_members
from .fracops import (
    _check_offdiag,
    fractional_laplacian,
    laplacian_matrix,
    offdiag_lp_norm,
    pairing,
    s_divergence,
    s_gradient,
)

DEGENERATE = 1e-14


def bump_profile(r):
    """``exp(-1/(1 - r^2))`` for ``r < 1``, zero outside (unnormalized)."""
    r = np.asarray(r, dtype=float)
    out = np.zeros_like(r)
    inside = r < 1
    out[inside] = np.exp(-1.0 / (1.0 - r[inside] ** 2))
    return out


class Mollifier:
    """Radial bump ``kappa_t`` renormalized to unit discrete mass at each scale.

    The normalization is computed on the infinite lattice ``h Z^n``, so it
    does not depend on where the bump sits in the domain.
    """

    def __init__(self, domain: Domain):
        self.domain = domain
        self._norm = {}

    def normalization(self, t: float) -> float:
        if t not in self._norm:
            h, n = self.domain.spacing, self.domain.dim
            k = int(np.ceil(t / h))
            offsets = np.array(list(product(range(-k, k + 1), repeat=n)), dtype=float) * h
            mass = np.sum(bump_profile(np.linalg.norm(offsets, axis=1) / t)) * h**n
            if mass <= 0:
                raise ValueError(f"scale {t} is below the lattice spacing")
            self._norm[t] = 1.0 / mass
        return self._norm[t]

    def kernel(self, t: float) -> np.ndarray:
        """``kappa_t(x_i - x_j)`` as an ``(M, M)`` matrix, minimal-image distances."""
        return self.normalization(t) * bump_profile(self.domain.distances / t)

    def convolve(self, f, t: float) -> np.ndarray:
        return self.kernel(t) @ (np.asarray(f, dtype=float) * self.domain.weights)


def _radii(domain, radii):
    radii = domain.dyadic_radii() if radii is None else list(radii)
    if not radii:
        raise ValueError("empty family of radii")
    return radii


def _ball_means(domain, values, t):
    inside = (domain.distances < t).astype(float)
    mu = domain.weights
    return inside, (inside @ (values * mu)) / (inside @ mu)


def bmo_seminorm(domain: Domain, f, balls: list[Ball] | None = None, radii=None) -> float:
    """``max_B t^{-n} sum_{j in B} |f_j - (f)_B| mu_j`` over a finite ball family.

    Without ``balls`` the family is every node center times ``radii``
    (default: dyadic radii).
    """
    f = np.asarray(f, dtype=float)
    mu, n = domain.weights, domain.dim
    if balls is not None:
        if len(balls) == 0:
            raise ValueError("empty ball family")
        best = 0.0
        for ball in balls:
            idx = ball_members(domain, ball)
            mean = np.sum(f[idx] * mu[idx]) / np.sum(mu[idx])
            osc = np.sum(np.abs(f[idx] - mean) * mu[idx])
            best = max(best, osc / ball.radius**n)
        return float(best)

    best = 0.0
    for t in _radii(domain, radii):
        inside, means = _ball_means(domain, f, t)
        osc = np.sum(inside * np.abs(f[None, :] - means[:, None]) * mu[None, :], axis=1)
        best = max(best, float(osc.max()) / t**n)
    return best


def hardy_norm(domain: Domain, f, scales=None) -> float:
    """``sum_i mu_i max_t |(kappa_t * f)(x_i)|`` over a finite scale family.

    Default scales are ``2h, 4h, ...`` up to half the largest side length.
    """
    f = np.asarray(f, dtype=float)
    if scales is None:
        scales = domain.dyadic_radii(max(domain.side_lengths) / 2)
    scales = list(scales)
    if not scales:
        raise ValueError("empty scale family")
    moll = Mollifier(domain)
    sup = np.max([np.abs(moll.convolve(f, t)) for t in scales], axis=0)
    return float(np.sum(domain.weights * sup))


def maximal_function(domain: Domain, f, radii=None) -> np.ndarray:
    """Hardy-Littlewood maximal function over dyadic balls centered at each node."""
    absf = np.abs(np.asarray(f, dtype=float))
    return np.max([_ball_means(domain, absf, t)[1] for t in _radii(domain, radii)], axis=0)


def maximal_oscillation_check(domain: Domain, f, s: float, p: float, radii=None) -> float:
    """Largest ratio of ``t^{-s} |f_i - (f)_{B(x_i,t)}|`` to the local tail
    ``(sum_{j in B, j != i} |f_i - f_j|^p mu_j / d_ij^(n+sp))^(1/p)``.

    Pairs with a denominator below 1e-14 are skipped; returns 0 if all are.
    """
    if not 0 < s < 1:
        raise ValueError(f"s must lie in (0, 1), got {s}")
    if p < 1:
        raise ValueError(f"p must be >= 1, got {p}")
    f = np.asarray(f, dtype=float)
    kernel = domain.inverse_distance_power(domain.dim + s * p) * domain.weights[None, :]
    diff = np.abs(f[:, None] - f[None, :]) ** p * kernel
    best = 0.0
    for t in _radii(domain, radii):
        inside, means = _ball_means(domain, f, t)
        denom = np.sum(inside * diff, axis=1) ** (1.0 / p)
        num = t ** (-s) * np.abs(f - means)
        ok = denom >= DEGENERATE
        if np.any(ok):
            best = max(best, float(np.max(num[ok] / denom[ok])))
    return best


def solve_fractional_poisson(domain: Domain, rhs, s: float) -> np.ndarray:
    """Mean-zero ``u`` with ``fractional_laplacian(u, s) = rhs``.

    ``rhs`` must have vanishing weighted mean (relative 1e-10).  Constants
    span the kernel, so the system is regularized by ``c 1 1^T`` and solved
    as a dense SPD problem.
    """
    rhs = np.asarray(rhs, dtype=float)
    L = laplacian_matrix(domain, s)
    mu = domain.weights
    scale = np.sum(np.abs(rhs) * mu)
    if abs(np.sum(rhs * mu)) > 1e-10 * max(scale, np.finfo(float).tiny):
        raise ValueError("right-hand side must have zero weighted mean")
    if scale == 0:
        return np.zeros_like(rhs)
    A = L + np.mean(np.diag(L)) * np.ones_like(L) / domain.size
    try:
        u = scipy.linalg.solve(A, rhs, assume_a="pos")
    except np.linalg.LinAlgError as exc:
        raise ValueError(f"singular fractional Laplacian system: {exc}") from exc
    return u - np.sum(u * mu) / np.sum(mu)


def divfree_project(domain: Domain, F, s: float) -> np.ndarray:
    """Orthogonal projection of a one-component field onto ``ker div_s``.

    In the pair inner product the adjoint of ``div_s`` is ``d_s``, so the
    correction is ``d_s lam`` with ``div_s d_s lam = div_s F``, i.e.
    ``2 (-Delta)^s lam = div_s F``.
    """
    F = _check_offdiag(domain, F)
    if F.ndim != 2:
        raise ValueError("divfree_project expects a one-component field")
    rhs = 0.5 * s_divergence(domain, F, s)
    # the weighted mean is <F, d_s 1> = 0; drop its round-off
    mu = domain.weights
    rhs -= np.sum(rhs * mu) / np.sum(mu)
    lam = solve_fractional_poisson(domain, rhs, s)
    return F - s_gradient(domain, lam, s)


def divcurl_pairing(domain: Domain, phi, F, g, s: float) -> float:
    """``sum_i phi_i (F . d_s g)(x_i) mu_i``."""
    phi = np.asarray(phi, dtype=float)
    if phi.shape != (domain.size,):
        raise ValueError("phi does not live on this domain")
    return float(np.sum(phi * pairing(domain, F, s_gradient(domain, g, s)) * domain.weights))


# --- random data for the experiments -------------------------------------


def trial_rng(seed: int, trial: int) -> np.random.Generator:
    """Independent stream per ``(seed, trial)``, unaffected by resolution or threads."""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(trial,)))


def random_smooth_function(domain: Domain, rng: np.random.Generator, modes: int = 3) -> np.ndarray:
    """Random trigonometric polynomial sampled at the nodes.

    Coefficients depend only on ``rng``, so the same draw at different
    resolutions samples the same continuum function.
    """
    x = (domain.nodes - np.asarray(domain.lower)) / np.asarray(domain.side_lengths)
    f = np.zeros(domain.size)
    for k in range(1, modes + 1):
        wave = rng.integers(-k, k + 1, size=domain.dim)
        wave[0] = k if not wave.any() else wave[0]
        a, b = rng.standard_normal(2) / k
        phase = 2 * np.pi * x @ wave
        f += a * np.cos(phase) + b * np.sin(phase)
    return f


def random_offdiag_field(domain: Domain, rng: np.random.Generator, s: float, terms: int = 2) -> np.ndarray:
    """``sum_m b_m(x) d_s a_m(x, y)`` with random smooth ``a_m, b_m``.

    Vanishes on the diagonal like ``|x-y|^(1-s)``, so its pair norms stay
    bounded under refinement.
    """
    F = np.zeros((domain.size, domain.size))
    for _ in range(terms):
        a = random_smooth_function(domain, rng)
        b = random_smooth_function(domain, rng)
        F += b[:, None] * s_gradient(domain, a, s)
    return F


def random_bump(domain: Domain, rng: np.random.Generator, r_range=(0.1, 0.3)):
    """Randomly placed and scaled bump; returns ``(phi, center_point, radius)``."""
    L = np.asarray(domain.side_lengths)
    center = np.asarray(domain.lower) + rng.uniform(0, 1, domain.dim) * L
    r = rng.uniform(*r_range) * L[0]
    amp = rng.uniform(0.5, 2.0)
    delta = np.abs(domain.nodes - center)
    if domain.periodic:
        delta = np.minimum(delta, L - delta)
    phi = amp * bump_profile(np.linalg.norm(delta, axis=1) / r)
    return phi, center, r


@dataclass
class TrialRecord:
    trial: int
    seed: int
    ratio: float
    localized_ratio: float
    hardy_ratio: float
    pairing: float
    bmo: float
    phi_l1: float
    radius: float
    norm_F: float
    norm_dg: float
    const_pairing_rel: float


def _divcurl_trial(domain, s, p, seed, trial, lam):
    rng = trial_rng(seed, trial)
    F = divfree_project(domain, random_offdiag_field(domain, rng, s), s)
    g = random_smooth_function(domain, rng)
    phi, center, r = random_bump(domain, rng)
    q = p / (p - 1)
    dg = s_gradient(domain, g, s)
    norm_F = offdiag_lp_norm(domain, F, p)
    norm_dg = offdiag_lp_norm(domain, dg, q)
    value = divcurl_pairing(domain, phi, F, g, s)
    bmo = bmo_seminorm(domain, phi)
    phi_l1 = float(np.sum(np.abs(phi) * domain.weights))
    denom = (bmo + phi_l1 / r**domain.dim) * norm_F * norm_dg

    ball = Ball(domain.nearest_node(center), min(lam * r, 2 * domain.diameter))
    loc_denom = (
        (bmo + phi_l1 / r**domain.dim)
        * offdiag_lp_norm(domain, F, p, restriction=ball)
        * offdiag_lp_norm(domain, dg, q, restriction=ball)
    )
    hardy = hardy_norm(domain, pairing(domain, F, dg))
    const = divcurl_pairing(domain, np.ones(domain.size), F, g, s)
    if denom < DEGENERATE or loc_denom < DEGENERATE:
        return None
    return TrialRecord(
        trial=trial,
        seed=seed,
        ratio=abs(value) / denom,
        localized_ratio=abs(value) / loc_denom,
        hardy_ratio=hardy / (norm_F * norm_dg),
        pairing=value,
        bmo=bmo,
        phi_l1=phi_l1,
        radius=r,
        norm_F=norm_F,
        norm_dg=norm_dg,
        const_pairing_rel=abs(const) / (norm_F * norm_dg),
    )


def _quantiles(values):
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        return {}
    return {
        f"q{int(q * 100):02d}": float(np.quantile(values, q)) for q in (0.5, 0.9, 0.99)
    }


def _run_trials(fn, trials, threads):
    if threads and threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(fn, range(trials)))
    return [fn(k) for k in range(trials)]


def divcurl_constant_experiment(
    domain: Domain, trials: int, s: float, p: float = 2.0, seed: int = 0, lam: float = 4.0, threads: int = 1
) -> dict:
    """Empirical constants of the div-curl estimates over seeded random trials.

    Each trial projects a random smooth off-diagonal field onto ``ker div_s``,
    draws a smooth ``g`` and a random bump ``phi`` of radius ``r``, and records

    * ``ratio = |sum phi F.d_s g mu| / (([phi]_BMO + r^-n |phi|_1) |F|_p |d_s g|_p')``
    * ``localized_ratio``: same with both pair norms restricted to ``B(x0, lam r)``
    * ``hardy_ratio = |F.d_s g|_H1 / (|F|_p |d_s g|_p')``
    * ``const_pairing_rel``: the pairing against ``phi = 1`` relative to the norms.
    """
    if trials < 1:
        raise ValueError("need at least one trial")
    if not p > 1:
        raise ValueError(f"p must exceed 1, got {p}")
    results = _run_trials(lambda k: _divcurl_trial(domain, s, p, seed, k, lam), trials, threads)
    records = [r for r in results if r is not None]
    ratios = [r.ratio for r in records]
    return {
        "M": domain.size,
        "s": s,
        "p": p,
        "trials": trials,
        "skipped": trials - len(records),
        "max_ratio": max(ratios) if ratios else float("nan"),
        "ratio_quantiles": _quantiles(ratios),
        "max_localized_ratio": max((r.localized_ratio for r in records), default=float("nan")),
        "max_hardy_ratio": max((r.hardy_ratio for r in records), default=float("nan")),
        "max_const_pairing_rel": max((r.const_pairing_rel for r in records), default=float("nan")),
        "records": records,
    }


def _wente_trial(domain, s, p, seed, trial):
    rng = trial_rng(seed, trial)
    F = divfree_project(domain, random_offdiag_field(domain, rng, s), s)
    g = random_smooth_function(domain, rng)
    dg = s_gradient(domain, g, s)
    rhs = pairing(domain, F, dg)
    u = solve_fractional_poisson(domain, rhs, domain.dim / 2)
    norms = offdiag_lp_norm(domain, F, p) * offdiag_lp_norm(domain, dg, p / (p - 1))
    if norms < DEGENERATE:
        return None
    residual = np.max(np.abs(fractional_laplacian(domain, u, domain.dim / 2) - rhs))
    return {
        "trial": trial,
        "seed": seed,
        "sup_u": float(np.max(np.abs(u))),
        "norm_product": float(norms),
        "ratio": float(np.max(np.abs(u)) / norms),
        "solve_residual": float(residual / max(np.max(np.abs(rhs)), DEGENERATE)),
    }


def wente_experiment(domain: Domain, trials: int, s: float, p: float = 2.0, seed: int = 0, threads: int = 1) -> dict:
    """Sup-norm of ``u`` solving ``(-Delta)^{n/2} u = F . d_s g`` against ``|F|_p |d_s g|_p'``.

    Only ``n = 1`` is supported, where the left operator is ``(-Delta)^{1/2}``.
    """
    if domain.dim != 1:
        raise ValueError("the Wente experiment needs a one-dimensional domain")
    if trials < 1:
        raise ValueError("need at least one trial")
    results = _run_trials(lambda k: _wente_trial(domain, s, p, seed, k), trials, threads)
    records = [r for r in results if r is not None]
    ratios = [r["ratio"] for r in records]
    return {
        "M": domain.size,
        "s": s,
        "p": p,
        "trials": trials,
        "skipped": trials - len(records),
        "max_ratio": max(ratios) if ratios else float("nan"),
        "ratio_quantiles": _quantiles(ratios),
        "max_solve_residual": max((r["solve_residual"] for r in records), default=float("nan")),
        "records": records,
    }
