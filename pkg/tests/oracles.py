"""Independent brute-force oracles used to freeze expected test values.

Everything here is written against plain atom lists with explicit python
loops (or a different numerical route than the library), so that agreement
with the library is a genuine two-route check and not a tautology.
"""

from __future__ import annotations

import itertools
import math

import numpy as np


def enum_expectation(atoms, fn):
    """Sum of weight * fn(x, y) over explicit (x, y, w) atoms."""
    total = None
    for x, y, w in atoms:
        val = np.asarray(fn(np.asarray(x, dtype=float), float(y)), dtype=float) * w
        total = val if total is None else total + val
    return total


def atoms_of(law):
    return [(law.xs[i], float(law.ys[i]), float(law.weights[i])) for i in range(law.support_size)]


def enum_sigma(atoms, feat):
    """E[phi phi^T] by explicit accumulation."""
    return enum_expectation(atoms, lambda x, y: np.outer(feat(x), feat(x)))


def enum_optimal_weights(atoms, feat):
    sigma = enum_sigma(atoms, feat)
    rhs = enum_expectation(atoms, lambda x, y: feat(x) * y)
    return np.linalg.solve(sigma, rhs)


def enum_risk(atoms, feat, w):
    return float(enum_expectation(atoms, lambda x, y: 0.5 * (feat(x) @ w - y) ** 2))


def enum_grad_cross(atoms, feat_t, w_t, feat_s, w_s):
    """E[g_t g_s^T] with g the pointwise square-loss gradient at the minimizers."""

    def term(x, y):
        gt = (feat_t(x) @ w_t - y) * feat_t(x)
        gs = (feat_s(x) @ w_s - y) * feat_s(x)
        return np.outer(gt, gs)

    return enum_expectation(atoms, term)


def lstsq_fit(x_mat, y):
    """Reference least-squares fit via numpy's SVD route (minimum norm)."""
    w, *_ = np.linalg.lstsq(x_mat, y, rcond=None)
    return w


def loop_empirical_risk(x_mat, y, w):
    total = 0.0
    for i in range(x_mat.shape[0]):
        pred = float(x_mat[i] @ w)
        total += 0.5 * (pred - y[i]) ** 2
    return total / x_mat.shape[0]


def enum_datasets(law, n):
    """Every ordered dataset of size n with its product probability."""
    m = law.support_size
    for combo in itertools.product(range(m), repeat=n):
        idx = list(combo)
        prob = float(np.prod(law.weights[idx]))
        yield law.xs[idx], law.ys[idx], prob


def mc_lambda_max_downward(atoms, weights, n, trials, seed):
    """Monte Carlo E[lambda_max(sqrt(n)(EZ - mean_n Z))] via direct sampling."""
    rng = np.random.default_rng(seed)
    mean_z = np.tensordot(weights, atoms, axes=(0, 0))
    counts = rng.multinomial(n, weights, size=trials)
    means = np.tensordot(counts / n, atoms, axes=(1, 0))
    devs = np.sqrt(n) * (mean_z[None] - means)
    vals = np.linalg.eigvalsh(devs)[:, -1]
    return float(vals.mean()), float(vals.std(ddof=1) / math.sqrt(trials))


def enum_expected_sup_gsq(law, collection, prof, n):
    """Exact E[sup_t G_n^2(t)] by enumerating every size-n dataset."""
    total = 0.0
    for xs, ys, prob in enum_datasets(law, n):
        best = -math.inf
        for entry in collection:
            phi = entry(xs)
            grad = phi.T @ (phi @ prof.w_star(entry.index) - ys) / n
            wh = prof.whitener(entry.index)
            best = max(best, n * float(np.sum((wh @ grad) ** 2)))
        total += prob * best
    return total
