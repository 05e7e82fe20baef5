"""Monte Carlo engine: trial batches, limiting-law samplers, and verdicts.

Conventions used throughout:

* every trial is reproducible from (master seed, trial index); aggregation
  is a deterministic reduction in trial order, so thread counts do not
  change results;
* every reported probability carries a binomial confidence interval;
* quantiles are order statistics with binomial-method confidence intervals;
* trials whose solver hit a singular sample covariance are flagged, never
  dropped, and count as violations in bound-validity sweeps.
"""

from __future__ import annotations

import hashlib
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy import stats

from . import erm
from .localization import ClosedFormComplexity, iterate
from .model import (
    DiscreteLaw,
    FeatureCollection,
    GaussianDesignLaw,
    rng_from_seed,
    sample_dataset,
    subset_collection,
)
from .population import PopulationProfile, excess_risk
from .processes import snapshot as process_snapshot
from .bounds import compute_bound_inputs, thresholds_and_bounds

__all__ = [
    "InsufficientTrialsError",
    "TrialBatch",
    "QuantileEstimate",
    "GaussianLimit",
    "run_trials",
    "consistency_curve",
    "sample_gaussian_limit",
    "estimate_quantile",
    "ks_statistic",
    "quantile_sandwich_check",
    "bound_validity_sweep",
    "MasterCheckResult",
    "pathwise_master_check",
    "BssReport",
    "bss_study",
    "binomial_ci",
]


class InsufficientTrialsError(ValueError):
    """Too few trials for the requested confidence level."""


def binomial_ci(successes: int, trials: int, conf: float = 0.95) -> tuple[float, float]:
    """Clopper-Pearson interval for a binomial proportion."""
    if trials < 1:
        raise ValueError("need at least one trial")
    alpha = 1.0 - conf
    k = int(successes)
    lo = 0.0 if k == 0 else float(stats.beta.ppf(alpha / 2.0, k, trials - k + 1))
    hi = 1.0 if k == trials else float(stats.beta.ppf(1.0 - alpha / 2.0, k + 1, trials - k))
    return lo, hi


# ---------------------------------------------------------------------------
# Trial batches
# ---------------------------------------------------------------------------

def _law_fingerprint(law) -> bytes:
    h = hashlib.sha256()
    if law.kind == "discrete":
        h.update(b"discrete")
        h.update(law.xs.tobytes())
        h.update(law.ys.tobytes())
        h.update(law.weights.tobytes())
    else:
        h.update(b"gaussian")
        h.update(law.cov.tobytes())
        h.update(law.w_true.tobytes())
        h.update(np.float64(law.noise_std).tobytes())
    return h.digest()


@dataclass(frozen=True)
class TrialBatch:
    """Per-trial outcomes of the solver and the fixed-index benchmark."""

    config_hash: str
    n: int
    master_seed: int
    t_hat: tuple
    n_excess: np.ndarray
    n_excess_oracle: np.ndarray
    singular: np.ndarray
    # present when snapshots were requested (discrete laws only)
    lam_plus: np.ndarray | None = None
    lam_minus: np.ndarray | None = None
    delta_plus: np.ndarray | None = None
    g_sq_hat: np.ndarray | None = None
    gap_hat: np.ndarray | None = None
    est_err_hat: np.ndarray | None = None

    @property
    def trials(self) -> int:
        return len(self.t_hat)

    @property
    def has_snapshots(self) -> bool:
        return self.lam_plus is not None

    def batch_hash(self) -> str:
        h = hashlib.sha256()
        h.update(self.config_hash.encode())
        h.update(repr(self.t_hat).encode())
        for arr in (self.n_excess, self.n_excess_oracle, self.singular):
            h.update(np.ascontiguousarray(arr).tobytes())
        return h.hexdigest()


def _oracle_index(law, collection, prof):
    if prof is not None:
        return prof.least_optimal_index
    risks = {e.index: law.approx_risk(e) for e in collection}
    best = min(risks.values())
    for t in collection.indices():
        if risks[t] <= best + 1e-12:
            return t
    raise AssertionError("unreachable")


def run_trials(
    law,
    collection: FeatureCollection,
    n: int,
    trials: int,
    master_seed: int,
    prof: PopulationProfile | None = None,
    snapshots: bool = False,
    threads: int = 1,
) -> TrialBatch:
    """Solve ERM on `trials` independent datasets of size n.

    Excess risks are exact: from the population profile on discrete laws,
    from the closed-form risk of the design on Gaussian laws.  The benchmark
    record reuses the solver's fit of the a-priori optimal index, which is
    what refitting it alone would produce.
    """
    if trials < 1:
        raise ValueError("need at least one trial")
    if snapshots and prof is None:
        raise ValueError("snapshots need a population profile")
    if prof is None and law.kind == "discrete":
        raise ValueError("discrete laws need a profile for exact excess risks")
    t_oracle = _oracle_index(law, collection, prof)
    if law.kind != "discrete":
        risks = {e.index: law.approx_risk(e) for e in collection}
        r_star = min(risks.values())

    def one(trial: int):
        ds = sample_dataset(law, n, (master_seed, trial))
        sol = erm.solve(ds, collection, prof)
        orec = sol.record(t_oracle)
        if prof is not None:
            exc = excess_risk(sol.index, sol.weights, prof)
            exc_o = excess_risk(t_oracle, orec.weights, prof)
        else:
            exc = law.risk(collection.entry(sol.index), sol.weights) - r_star
            exc_o = law.risk(collection.entry(t_oracle), orec.weights) - r_star
        row = (sol.index, n * exc, n * exc_o, sol.singular)
        if not snapshots:
            return row + (None,)
        snap = process_snapshot(ds, prof)
        g_hat = snap.g[sol.index]
        extra = (
            snap.lam_plus_scaled,
            snap.lam_minus_scaled,
            snap.delta_plus_scaled,
            g_hat * g_hat,
            prof.gap(sol.index),
            exc - prof.gap(sol.index),
        )
        return row + (extra,)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(one, range(trials)))
    else:
        results = [one(i) for i in range(trials)]

    h = hashlib.sha256()
    h.update(_law_fingerprint(law))
    h.update(repr((n, trials, master_seed, collection.indices(), snapshots)).encode())
    batch = {
        "config_hash": h.hexdigest(),
        "n": n,
        "master_seed": master_seed,
        "t_hat": tuple(r[0] for r in results),
        "n_excess": np.array([r[1] for r in results]),
        "n_excess_oracle": np.array([r[2] for r in results]),
        "singular": np.array([r[3] for r in results], dtype=bool),
    }
    if snapshots:
        extras = np.array([r[4] for r in results])
        batch.update(
            lam_plus=extras[:, 0],
            lam_minus=extras[:, 1],
            delta_plus=extras[:, 2],
            g_sq_hat=extras[:, 3],
            gap_hat=extras[:, 4],
            est_err_hat=extras[:, 5],
        )
    return TrialBatch(**batch)


def _grid_seed(seed: int, idx: int) -> int:
    return int(np.random.SeedSequence((int(seed), int(idx), 4)).generate_state(1)[0])


def consistency_curve(
    law,
    collection: FeatureCollection,
    n_grid,
    trials: int,
    seed: int,
    prof: PopulationProfile,
) -> list[dict]:
    """P(selected index is suboptimal) along a sample-size grid."""
    star = set(prof.t_star)
    rows = []
    for i, n in enumerate(n_grid):
        batch = run_trials(law, collection, int(n), trials, _grid_seed(seed, i), prof)
        miss = sum(1 for t in batch.t_hat if t not in star)
        lo, hi = binomial_ci(miss, trials)
        rows.append(
            {
                "n": int(n),
                "p_miss": miss / trials,
                "se": math.sqrt(max(miss / trials * (1 - miss / trials), 0.0) / trials),
                "ci_lo": lo,
                "ci_hi": hi,
                "trials": trials,
            }
        )
    return rows


# ---------------------------------------------------------------------------
# Limiting Gaussian law over the optimal set
# ---------------------------------------------------------------------------

PSD_FLOOR = -1e-10


class GaussianLimit:
    """Joint Gaussian limit of the whitened gradients over the optimal set.

    The block covariance has blocks W(t) G(t, s) W(s) for t, s optimal.
    Eigenvalues above the floor -1e-10 are clipped to zero; anything lower
    fails assembly with the offending pair named.
    """

    def __init__(self, prof: PopulationProfile):
        self.prof = prof
        self.t_star = prof.t_star
        dims = [prof.records[t].dim for t in self.t_star]
        self.block_slices = []
        off = 0
        for d in dims:
            self.block_slices.append(slice(off, off + d))
            off += d
        total = off
        cov = np.zeros((total, total))
        for i, t in enumerate(self.t_star):
            for j, s in enumerate(self.t_star):
                block = self.prof.whitener(t) @ prof.g_cross(t, s) @ self.prof.whitener(s)
                cov[self.block_slices[i], self.block_slices[j]] = block
        cov = 0.5 * (cov + cov.T)
        vals, vecs = np.linalg.eigh(cov)
        if vals[0] < PSD_FLOOR:
            raise ValueError(
                f"limit covariance is not PSD (min eigenvalue {vals[0]:.3e}); "
                f"offending pair {self._offending_pair(cov)!r}"
            )
        self.cov = cov
        self._root = vecs * np.sqrt(np.clip(vals, 0.0, None))

    def _offending_pair(self, cov: np.ndarray):
        for i, t in enumerate(self.t_star):
            for j, s in enumerate(self.t_star):
                if j <= i:
                    continue
                si, sj = self.block_slices[i], self.block_slices[j]
                sub = np.block([[cov[si, si], cov[si, sj]], [cov[sj, si], cov[sj, sj]]])
                if np.linalg.eigvalsh(sub)[0] < PSD_FLOOR:
                    return (t, s)
        return (self.t_star[0], self.t_star[0])

    def sample(self, draws: int, seed: int) -> tuple[np.ndarray, np.ndarray]:
        """Draws of (min, max) over the optimal set of the squared block norms."""
        rng = rng_from_seed(seed, 5)
        z = rng.standard_normal((draws, self.cov.shape[0])) @ self._root.T
        norms = np.stack([np.sum(z[:, sl] ** 2, axis=1) for sl in self.block_slices], axis=1)
        return norms.min(axis=1), norms.max(axis=1)


def sample_gaussian_limit(prof: PopulationProfile, draws: int, seed: int):
    return GaussianLimit(prof).sample(draws, seed)


# ---------------------------------------------------------------------------
# Quantiles and distributional checks
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class QuantileEstimate:
    level: float
    estimate: float
    ci_lo: float
    ci_hi: float


def estimate_quantile(samples: np.ndarray, level: float, conf: float = 0.95) -> QuantileEstimate:
    """Order-statistic quantile with a binomial-method confidence interval."""
    x = np.sort(np.asarray(samples, dtype=float))
    n = x.size
    if n < 2:
        raise ValueError("need at least two samples")
    if not 0.0 < level < 1.0:
        raise ValueError("level must be in (0, 1)")
    point = x[min(max(math.ceil(n * level) - 1, 0), n - 1)]
    alpha = 1.0 - conf
    lo_idx = int(stats.binom.ppf(alpha / 2.0, n, level))
    hi_idx = int(stats.binom.ppf(1.0 - alpha / 2.0, n, level)) + 1
    lo_idx = min(max(lo_idx, 1), n)
    hi_idx = min(max(hi_idx, 1), n)
    return QuantileEstimate(level, float(point), float(x[lo_idx - 1]), float(x[hi_idx - 1]))


def ks_statistic(a: np.ndarray, b: np.ndarray) -> float:
    return float(stats.ks_2samp(a, b, method="asymp").statistic)


def quantile_sandwich_check(
    batch: TrialBatch,
    z_minus: np.ndarray,
    z_plus: np.ndarray,
    delta: float,
    singleton: bool | None = None,
) -> dict:
    """Compare the rescaled excess quantile against the limiting sandwich.

    Passes when the order-statistic intervals are consistent with
    0.5 * Q(min) <= n * Q(excess) <= 0.5 * Q(max); for a singleton optimal
    set, also reports the two-sample KS statistic against half the squared
    norm of the limit.
    """
    if batch.trials < 50 / delta:
        raise InsufficientTrialsError(
            f"{batch.trials} trials cannot resolve the {1 - delta:.3f} quantile; need >= {50 / delta:.0f}"
        )
    q_exc = estimate_quantile(batch.n_excess, 1.0 - delta)
    q_min = estimate_quantile(z_minus, 1.0 - delta)
    q_max = estimate_quantile(z_plus, 1.0 - delta)
    tol = 1e-9 * max(1.0, abs(q_exc.estimate))  # absorbs exact-zero degeneracies
    lower_ok = 0.5 * q_min.ci_lo <= q_exc.ci_hi + tol
    upper_ok = q_exc.ci_lo <= 0.5 * q_max.ci_hi + tol
    out = {
        "delta": delta,
        "excess_quantile": q_exc,
        "half_min_quantile": 0.5 * q_min.estimate,
        "half_max_quantile": 0.5 * q_max.estimate,
        "lower_ok": bool(lower_ok),
        "upper_ok": bool(upper_ok),
        "pass": bool(lower_ok and upper_ok),
    }
    if singleton is None:
        singleton = bool(np.allclose(z_minus, z_plus))
    if singleton:
        out["ks_limit"] = ks_statistic(batch.n_excess, 0.5 * z_plus)
        out["ks_oracle"] = ks_statistic(batch.n_excess, batch.n_excess_oracle)
    return out


# ---------------------------------------------------------------------------
# Bound validity sweeps
# ---------------------------------------------------------------------------

def bound_validity_sweep(
    law,
    collection: FeatureCollection,
    delta: float,
    n_grid,
    trials: int,
    seed: int,
    prof: PopulationProfile,
    bound_kind: str = "explicit",
    k: int | None = None,
    estimator_trials: int = 4000,
) -> dict:
    """Empirical violation frequency of an excess bound along an n-grid.

    For each n the bound and its threshold are computed from the profile;
    rows at or above the threshold must have violation rate at most
    delta + 2 binomial SE (singular trials count as violations), rows below
    are informational.
    """
    if bound_kind not in ("single_class", "explicit"):
        raise ValueError(f"unknown bound kind {bound_kind!r}")
    rows = []
    all_pass = True
    for i, n in enumerate(n_grid):
        n = int(n)
        inputs = compute_bound_inputs(prof, n, trials=estimator_trials, seed=_grid_seed(seed, 1000 + i))
        if bound_kind == "single_class":
            report = thresholds_and_bounds(prof, inputs, n, delta, k=1)
            bound = report.single_class_excess_bound.value
            threshold = report.single_class_threshold.value
            k_used = 1
        else:
            cx = ClosedFormComplexity(prof, n, trials=estimator_trials, seed=_grid_seed(seed, 2000 + i))
            if k is None:
                from .localization import choose_k

                k_used, _, trace = choose_k(n, delta, prof, cx)
            else:
                k_used = k
                trace = iterate(n, delta, k, prof, cx)
            bound = 24.0 / (n * delta) * trace.final_complexity.value
            report = thresholds_and_bounds(prof, inputs, n, delta, k=k_used)
            threshold = report.explicit_threshold.value
        batch = run_trials(law, collection, n, trials, _grid_seed(seed, i), prof)
        viol = int(np.sum((batch.n_excess / n > bound) | batch.singular))
        rate = viol / trials
        se = math.sqrt(delta * (1.0 - delta) / trials)
        lo, hi = binomial_ci(viol, trials)
        above = n >= threshold
        ok = (rate <= delta + 2.0 * se) if above else True
        all_pass = all_pass and ok
        rows.append(
            {
                "n": n,
                "k": k_used,
                "threshold": threshold,
                "above_threshold": bool(above),
                "bound": bound,
                "violations": viol,
                "rate": rate,
                "rate_ci": (lo, hi),
                "singular_rate": float(np.mean(batch.singular)),
                "allowed": delta + 2.0 * se,
                "pass": bool(ok),
            }
        )
    return {"bound_kind": bound_kind, "delta": delta, "rows": rows, "pass": all_pass}


# ---------------------------------------------------------------------------
# Pathwise master-inequality check
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MasterCheckResult:
    checked: int
    excluded: int
    violations: int
    worst_slack: float

    @property
    def ok(self) -> bool:
        return self.violations == 0


def pathwise_master_check(batch: TrialBatch, prof: PopulationProfile, slack: float = 1e-8) -> MasterCheckResult:
    """Verify the pathwise suboptimality and estimation-error inequalities.

    On trials where both rescaled one-sided suprema are below one, the
    selected index's suboptimality is bounded by
    0.5 / ((1 - sup_delta)(1 - sup_lambda)) * G^2/n, and its estimation
    error is sandwiched by 0.5 G^2/n / (1 +/- the one-sided suprema)^2.
    Trials failing the event condition are excluded and counted.
    """
    if not batch.has_snapshots:
        raise ValueError("pathwise check needs a batch with process snapshots")
    n = batch.n
    event = (batch.delta_plus < 1.0) & (batch.lam_plus < 1.0)
    violations = 0
    worst = 0.0
    for i in np.nonzero(event)[0]:
        lam_p = batch.lam_plus[i]
        lam_m = batch.lam_minus[i]
        del_p = batch.delta_plus[i]
        gsq = batch.g_sq_hat[i] / n
        sub = batch.gap_hat[i]
        est = batch.est_err_hat[i]
        rhs1 = 0.5 / ((1.0 - del_p) * (1.0 - lam_p)) * gsq
        lo2 = 0.5 * gsq / (1.0 + lam_m) ** 2
        hi2 = 0.5 * gsq / (1.0 - lam_p) ** 2
        bad = (sub > rhs1 + slack) or (est > hi2 + slack) or (est < lo2 - slack)
        worst = max(worst, sub - rhs1, est - hi2, lo2 - est)
        if bad:
            violations += 1
    return MasterCheckResult(
        checked=int(event.sum()),
        excluded=int((~event).sum()),
        violations=violations,
        worst_slack=worst,
    )


# ---------------------------------------------------------------------------
# Best-subset-selection case study
# ---------------------------------------------------------------------------

def bss_instance(design: str, d: int, w_true, noise_std: float):
    """A sparse-regression instance: orthogonal +-1 design or Gaussian design.

    The discrete design places Y = <w_true, X> + eps with X uniform on the
    sign hypercube and eps an independent +-noise_std coin, so all population
    quantities are exact finite sums.
    """
    w_true = np.asarray(w_true, dtype=float)
    if design == "discrete":
        grid = np.array(np.meshgrid(*([[-1.0, 1.0]] * d), indexing="ij")).reshape(d, -1).T
        xs = np.repeat(grid, 2, axis=0)
        eps = np.tile([noise_std, -noise_std], grid.shape[0])
        ys = xs @ w_true + eps
        weights = np.full(xs.shape[0], 1.0 / xs.shape[0])
        return DiscreteLaw(xs=xs, ys=ys, weights=weights)
    if design == "gaussian":
        return GaussianDesignLaw(cov=np.eye(d), w_true=w_true, noise_std=noise_std)
    raise ValueError(f"unknown design {design!r}")


def recovery_threshold(
    prof: PopulationProfile,
    delta: float,
    trials: int = 4000,
    seed: int = 0,
    max_rounds: int = 8,
) -> tuple[int, int]:
    """Sample size above which support recovery holds with confidence delta.

    Solves n > min_k 4 k (gamma delta)^{-1} A(iterate_{k-1}(T)) where the
    iterate uses per-step confidence delta/(2k); the right-hand side depends
    on n through A, so the fixed point is found by repeated substitution
    (A decreases with n, so this converges from above).  Returns (n, k).
    """
    gamma = prof.gamma
    if not (0.0 < gamma < float("inf")):
        raise ValueError("recovery threshold needs a positive finite gap")
    k_max = 1 + len(prof.suboptimal())
    n = 1000
    best_k = 1
    for _ in range(max_rounds):
        best = None
        cx = ClosedFormComplexity(prof, n, trials=trials, seed=seed)
        for k in range(1, k_max + 1):
            if k == 1:
                s_prev = tuple(prof.indices())
            else:
                # k-1 applications, each at per-step confidence delta/(2k)
                s_prev = iterate(n, delta * (k - 1) / k, k - 1, prof, cx).final_set
            val = 4.0 * k / (gamma * delta) * cx.value(s_prev).value
            if best is None or val < best[0]:
                best = (val, k)
        n_new = int(math.ceil(best[0])) + 1
        best_k = best[1]
        if abs(n_new - n) <= max(2, n // 100):
            n = max(n, n_new)
            break
        n = n_new
    return n, best_k


@dataclass(frozen=True)
class BssReport:
    design: str
    d: int
    s: int
    support: tuple
    gamma: float | None
    n_threshold: int | None
    threshold_k: int | None
    rows: tuple
    recovery_at_threshold: float | None
    ratio_nonincreasing: bool

    @property
    def final_recovery(self) -> float:
        return self.rows[-1]["recovery"]


def bss_study(
    design: str,
    d: int,
    s: int,
    w_true,
    noise_std: float,
    n_grid,
    trials: int,
    seed: int,
    delta: float = 0.1,
    threshold_trials: int = 2000,
    check_threshold: bool = True,
) -> BssReport:
    """Support recovery and rescaled-excess trend for best-subset selection.

    Reports per-n recovery frequency with its binomial CI and the ratio
    a_n = mean(n * excess) / (noise_var * s); on the discrete design also the
    gap-based recovery threshold and the recovery frequency at it.
    """
    w_true = np.asarray(w_true, dtype=float)
    support = tuple(int(j) for j in np.nonzero(w_true)[0])
    if len(support) != s:
        raise ValueError("w_true must be exactly s-sparse")
    law = bss_instance(design, d, w_true, noise_std)
    collection = subset_collection(d, s)
    prof = None
    gamma = None
    if design == "discrete":
        from .population import profile as build_profile

        prof = build_profile(law, collection)
        gamma = prof.gamma
    else:
        risks = {e.index: law.approx_risk(e) for e in collection}
        r_star = min(risks.values())
        gamma = min(v - r_star for t, v in risks.items() if t != support)
    noise_var = noise_std**2

    rows = []
    for i, n in enumerate(n_grid):
        n = int(n)
        batch = run_trials(law, collection, n, trials, _grid_seed(seed, i), prof)
        hits = sum(1 for t in batch.t_hat if t == support)
        lo, hi = binomial_ci(hits, trials)
        mean_ne = float(np.mean(batch.n_excess))
        se_ne = float(np.std(batch.n_excess, ddof=1) / math.sqrt(trials))
        rows.append(
            {
                "n": n,
                "recovery": hits / trials,
                "recovery_ci": (lo, hi),
                "a_n": mean_ne / (noise_var * s),
                "a_n_se": se_ne / (noise_var * s),
                "singular_rate": float(np.mean(batch.singular)),
            }
        )
    nonincr = all(
        rows[i + 1]["a_n"] <= rows[i]["a_n"] + 2.0 * (rows[i]["a_n_se"] + rows[i + 1]["a_n_se"])
        for i in range(len(rows) - 1)
    )
    n_thr = k_thr = None
    rec_at_thr = None
    if design == "discrete" and check_threshold:
        n_thr, k_thr = recovery_threshold(prof, delta, trials=threshold_trials, seed=seed)
        batch = run_trials(law, collection, n_thr, trials, _grid_seed(seed, 10_000), prof)
        rec_at_thr = sum(1 for t in batch.t_hat if t == support) / trials
    return BssReport(
        design=design,
        d=d,
        s=s,
        support=support,
        gamma=gamma,
        n_threshold=n_thr,
        threshold_k=k_thr,
        rows=tuple(rows),
        recovery_at_threshold=rec_at_thr,
        ratio_nonincreasing=nonincr,
    )
