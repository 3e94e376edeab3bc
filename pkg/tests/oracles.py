"""Reference implementations that do not share code with the package."""

import mpmath
import numpy as np

mpmath.mp.dps = 40


def _arm_logpdf(eta, S, N, t, T, x):
    """High-precision log density of one arm's pseudo-action, from the reshaping formula."""
    em, ev, es, eg = eta  # already mpf
    lam_sigma = mpmath.exp(es)
    denom = 1 + lam_sigma * int(N)
    mean = (em + lam_sigma * mpmath.mpf(float(S))) / denom
    d = 1 - (mpmath.mpf(t) - 1) / T
    var = mpmath.exp(ev) * d**eg / denom
    r = mpmath.mpf(float(x)) - mean
    return -(mpmath.log(2 * mpmath.pi * var) + r * r / var) / 2


def fd_score(eta_m, eta_v, eta_sigma, eta_gamma, S, N, t, T, pseudo, h=mpmath.mpf("1e-15")):
    """Central finite differences in 40-digit arithmetic, laid out like ``MetaParams.to_vector``."""
    K = len(eta_m)
    out = np.empty(4 * K)
    for a in range(K):
        base = [eta_m[a], eta_v[a], eta_sigma[a], eta_gamma[a]]
        for j in range(4):
            up = [mpmath.mpf(float(v)) for v in base]
            dn = list(up)
            up[j] += h
            dn[j] -= h
            g = (_arm_logpdf(up, S[a], N[a], t, T, pseudo[a]) - _arm_logpdf(dn, S[a], N[a], t, T, pseudo[a])) / (2 * h)
            out[j * K + a] = float(g)
    return out


def random_score_case(rng, K=3, T=20):
    eta = [rng.normal(0, 1, K), rng.normal(0, 1, K), rng.normal(0, 1, K), rng.normal(0, 1, K)]
    N = rng.integers(0, 15, K)
    theta = rng.normal(0, 1, K)
    S = N * theta + np.sqrt(N) * rng.normal(0, 1, K)
    t = int(rng.integers(1, T + 1))
    lam_sigma = np.exp(eta[2])
    mean = (eta[0] + lam_sigma * S) / (1 + lam_sigma * N)
    var = np.exp(eta[1]) * (1 - (t - 1) / T) ** eta[3] / (1 + lam_sigma * N)
    pseudo = mean + np.sqrt(var) * rng.normal(0, 1, K)
    return eta, S, N, t, T, pseudo


def brute_force_posterior(m0, v0sq, noise_var, rewards):
    """Sequential Bayes rule, one observation at a time."""
    prec, num = 1.0 / v0sq, m0 / v0sq
    for r in rewards:
        new_prec = prec + 1.0 / noise_var
        mean = (num + r / noise_var) / new_prec
        prec, num = new_prec, mean * new_prec
    return num / prec, 1.0 / prec


def score_rel_error(analytic, reference):
    """Per-coordinate relative error; coordinates that are zero to rounding are compared against the vector scale."""
    floor = 1e-9 * max(1.0, float(np.max(np.abs(reference))))
    return np.abs(analytic - reference) / np.maximum(np.abs(reference), floor)
