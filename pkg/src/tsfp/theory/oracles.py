"""Executable checks of the theory behind the coding-rate objective.

Each oracle is deterministic given its seed and returns a plain dict with a
``passes`` flag and every intermediate quantity, ready for JSON.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from ..autodiff import Tensor
from ..losses import gaussian_total_correlation, tcr_diversity_loss


def _coherence(gram: np.ndarray) -> float:
    """Max |G_ij| / sqrt(G_ii G_jj) over i != j (0 for a single token)."""
    k = gram.shape[0]
    if k < 2:
        return 0.0
    s = np.sqrt(np.diag(gram))
    c = np.abs(gram) / np.outer(s, s)
    return float(np.max(c[~np.eye(k, dtype=bool)]))


# -- Hadamard / total correlation ---------------------------------------------------


def verify_hadamard(cov, canary: bool = False) -> dict:
    """TC >= 0, with equality exactly for diagonal covariances.

    ``canary`` flips the sign of TC; a working harness must then fail on
    any correlated input.
    """
    cov = np.asarray(cov, dtype=np.float64)
    tc = gaussian_total_correlation(cov)
    if canary:
        tc = -tc
    off = cov - np.diag(np.diag(cov))
    max_off = float(np.max(np.abs(off))) if cov.shape[0] > 1 else 0.0
    is_diagonal = max_off < 1e-8
    passes = tc >= -1e-12 and ((tc < 1e-10) == is_diagonal)
    return {"tc": tc, "max_offdiag": max_off, "is_diagonal": is_diagonal, "passes": bool(passes)}


# -- spectral tail bound ------------------------------------------------------------


@dataclass
class Spectrum:
    values: np.ndarray  # descending
    vectors: np.ndarray  # orthonormal columns

    @classmethod
    def of(cls, cov: np.ndarray) -> "Spectrum":
        w, v = np.linalg.eigh(0.5 * (cov + cov.T))
        order = np.argsort(w)[::-1]
        return cls(np.clip(w[order], 0.0, None), v[:, order])

    def residual(self, cov: np.ndarray) -> float:
        rebuilt = (self.vectors * self.values) @ self.vectors.T
        return float(np.max(np.abs(rebuilt - cov)))


def projection_error(cov: np.ndarray, basis: np.ndarray) -> float:
    """Expected squared error E||x - P x||^2 = tr((I - P) cov), P onto span(basis)."""
    q, _ = np.linalg.qr(basis)
    return float(np.trace(cov) - np.trace(q.T @ cov @ q))


def spectral_tail_bound(cov, k: int, trials: int = 2000, seed: int = 0) -> dict:
    """Best rank-1 and rank-k projection errors against eigenvalue tail sums.

    ``err_k1`` is the error of k collapsed tokens (all spanning the top
    direction); ``err_k_orth`` that of k orthogonal ones.

    For D <= 6 also draws ``trials`` random non-orthogonal k-vector bases and
    checks none beats the orthogonal optimum.
    """
    cov = np.asarray(cov, dtype=np.float64)
    D = cov.shape[0]
    if not 1 <= k < D:
        raise ValueError(f"k must satisfy 1 <= k < D={D}, got {k}")
    spec = Spectrum.of(cov)
    tails = [float(np.sum(spec.values[j:])) for j in range(1, D + 1)]
    err_k1 = projection_error(cov, spec.vectors[:, :1])
    err_k_orth = projection_error(cov, spec.vectors[:, :k])
    out = {
        "D": D,
        "k": k,
        "eigenvalues": spec.values.tolist(),
        "residual": spec.residual(cov),
        "tail_sums": tails,
        "err_k1": err_k1,
        "err_k_orth": err_k_orth,
        "brute_force_min": None,
    }
    ok = (
        out["residual"] < 1e-9
        and abs(err_k1 - tails[0]) < 1e-8
        and abs(err_k_orth - tails[k - 1]) < 1e-8
    )
    if D <= 6:
        rng = np.random.default_rng(seed)
        best = min(projection_error(cov, rng.standard_normal((D, k))) for _ in range(trials))
        out["brute_force_min"] = best
        ok = ok and best >= err_k_orth - 1e-10
    out["passes"] = bool(ok)
    return out


# -- noise sensitivity ---------------------------------------------------------------


@dataclass
class SensitivityProbe:
    F: np.ndarray  # (d, k) unit-norm columns
    y: np.ndarray  # (k,)
    sigma: float

    def __post_init__(self):
        self.F = np.asarray(self.F, dtype=np.float64)
        self.y = np.asarray(self.y, dtype=np.float64)
        norms = np.linalg.norm(self.F, axis=0)
        if np.max(np.abs(norms - 1.0)) > 1e-8:
            raise ValueError("columns of F must have unit norm")

    @property
    def G(self) -> np.ndarray:
        return self.F.T @ self.F

    def readout(self) -> np.ndarray:
        """Minimum-norm w with F^T w = y: w = F G^-1 y."""
        g = self.G
        lam_min = float(np.linalg.eigvalsh(g)[0])
        if lam_min < 1e-12 * max(1.0, float(np.trace(g))):
            raise np.linalg.LinAlgError(f"F is rank deficient (lambda_min(G) = {lam_min:.3g})")
        return self.F @ np.linalg.solve(g, self.y)


def unit_columns(F: np.ndarray) -> np.ndarray:
    F = np.asarray(F, dtype=np.float64)
    return F / np.linalg.norm(F, axis=0)


def noise_sensitivity_probe(probe: SensitivityProbe, n_draws: int = 100_000, seed: int = 0) -> dict:
    """Analytic S = sigma^2 ||w||^2 against the Monte-Carlo variance of w^T eta."""
    w = probe.readout()
    constraint = float(np.max(np.abs(probe.F.T @ w - probe.y)))
    analytic = probe.sigma**2 * float(w @ w)
    via_gram = probe.sigma**2 * float(probe.y @ np.linalg.solve(probe.G, probe.y))
    rng = np.random.default_rng(seed)
    d = w.shape[0]
    proj = np.empty(n_draws)
    chunk = 10_000
    for i in range(0, n_draws, chunk):
        m = min(chunk, n_draws - i)
        proj[i:i + m] = (probe.sigma * rng.standard_normal((m, d))) @ w
    empirical = float(np.var(proj, ddof=1))
    rel = abs(empirical - analytic) / analytic if analytic > 0 else abs(empirical)
    return {
        "analytic": analytic,
        "analytic_gram_form": via_gram,
        "formula_gap": abs(analytic - via_gram),
        "empirical": empirical,
        "rel_error": rel,
        "constraint_residual": constraint,
        "lambda_min": float(np.linalg.eigvalsh(probe.G)[0]),
        "n_draws": n_draws,
        "passes": bool(rel < 0.02 and constraint < 1e-8 and abs(analytic - via_gram) <= 1e-10 * max(1.0, analytic)),
    }


def worst_case_sensitivity(G, sigma: float = 1.0, n_random: int = 10_000, seed: int = 0) -> dict:
    """The worst unit target costs sigma^2 / lambda_min(G), attained by its eigenvector."""
    G = np.asarray(G, dtype=np.float64)
    w, v = np.linalg.eigh(0.5 * (G + G.T))
    if w[0] <= 1e-12 * max(1.0, w[-1]):
        raise np.linalg.LinAlgError(f"G is singular (lambda_min = {w[0]:.3g})")
    bound = float(sigma**2 / w[0])
    ginv = np.linalg.inv(G)
    rng = np.random.default_rng(seed)
    y = rng.standard_normal((n_random, G.shape[0]))
    y /= np.linalg.norm(y, axis=1, keepdims=True)
    random_vals = sigma**2 * np.einsum("ni,ij,nj->n", y, ginv, y)
    y_star = v[:, 0]
    extremal = sigma**2 * float(y_star @ np.linalg.solve(G, y_star))
    emp_max = float(max(random_vals.max(), extremal))
    # the upper edge allows one ulp-scale of rounding above the exact bound
    within = bound - 1e-9 <= emp_max <= bound * (1 + 1e-12)
    return {
        "bound": bound,
        "lambda_min": float(w[0]),
        "random_max": float(random_vals.max()),
        "extremal_value": extremal,
        "empirical_max": emp_max,
        "passes": bool(within and abs(extremal - bound) < 1e-9),
    }


# -- orthogonality under the coding-rate loss ---------------------------------------------


def token_tc(tokens: np.ndarray) -> float:
    """Gaussian TC of the (k, k) second-moment matrix of the tokens."""
    d = tokens.shape[1]
    return gaussian_total_correlation(tokens @ tokens.T / d)


def orthogonality_descent(
    k: int = 8,
    d: int = 128,
    steps: int = 2000,
    step_size: float = 1.0,
    eps: float = 0.5,
    seed: int = 0,
    init_coherence: float | None = None,
    tol: float = 1e-6,
) -> dict:
    """Projected gradient descent on the coding-rate loss with unit-norm tokens.

    ``init_coherence`` (k=2 only) starts the two tokens at that cosine.
    Passes when the final coherence is below 0.05 and the token TC never
    rises by more than ``tol`` between steps.
    """
    if k > d:
        raise ValueError("need k <= d")
    rng = np.random.default_rng(seed)
    if init_coherence is not None:
        if k != 2:
            raise ValueError("init_coherence is defined for k=2 only")
        a = rng.standard_normal(d)
        a /= np.linalg.norm(a)
        b = rng.standard_normal(d)
        b -= (b @ a) * a
        b /= np.linalg.norm(b)
        f = np.stack([a, init_coherence * a + np.sqrt(1 - init_coherence**2) * b])
    else:
        f = rng.standard_normal((k, d))
    f /= np.linalg.norm(f, axis=1, keepdims=True)
    coh, tcs, losses = [], [], []
    for _ in range(steps + 1):
        t = Tensor(f, requires_grad=True)
        loss = tcr_diversity_loss(t, eps)
        grads = loss.backward()
        coh.append(_coherence(f @ f.T))
        tcs.append(token_tc(f) if k > 1 else 0.0)
        losses.append(loss.item())
        f = f - step_size * grads[t]
        f /= np.linalg.norm(f, axis=1, keepdims=True)
    rises = np.diff(tcs)
    max_rise = float(rises.max()) if rises.size else 0.0
    return {
        "k": k,
        "d": d,
        "steps": steps,
        "step_size": step_size,
        "eps": eps,
        "initial_coherence": coh[0],
        "final_coherence": coh[-1],
        "initial_tc": tcs[0],
        "final_tc": tcs[-1],
        "max_tc_rise": max_rise,
        "final_loss": losses[-1],
        "coherence": coh,
        "tc": tcs,
        "passes": bool(coh[-1] < 0.05 and max_rise <= tol),
    }


# -- sample complexity under sparse vs rotated latents -------------------------------------


DEFAULT_N_GRID = (20, 30, 40, 60, 80, 120, 160, 240, 320, 480, 640, 960)


def random_rotation(k: int, rng: np.random.Generator) -> np.ndarray:
    q, r = np.linalg.qr(rng.standard_normal((k, k)))
    return q * np.sign(np.diag(r))


def _min_n(x, y, x_test, y_test, n_grid, target, seed) -> float:
    from sklearn.linear_model import LogisticRegressionCV

    for n in n_grid:
        yn = y[:n]
        if min(np.sum(yn), n - np.sum(yn)) < 5:
            continue  # cannot stratify 5 folds
        clf = LogisticRegressionCV(
            Cs=10, cv=5, penalty="l1", solver="liblinear", max_iter=1000, random_state=seed
        )
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            clf.fit(x[:n], yn)
        if clf.score(x_test, y_test) >= target:
            return float(n)
    return float("inf")


def sample_complexity_experiment(
    k: int = 64,
    s: int = 2,
    n_grid=DEFAULT_N_GRID,
    seeds: int = 10,
    target: float = 0.9,
    n_test: int = 2000,
    rotation: str = "random",
    seed: int = 0,
    min_fraction: float = 0.8,
) -> dict:
    """Smallest training size reaching ``target`` test accuracy, per condition.

    Labels are sign(beta^T z) with an s-sparse beta on standard-normal
    latents z. The disentangled learner sees z; the entangled one sees R z
    for a fixed random rotation R (``rotation="identity"`` makes them equal).
    Both fit L1-penalised logistic regression with 5-fold selection of the
    penalty. ``inf`` marks a condition that never reached the target.
    """
    if not 1 <= s <= k:
        raise ValueError("need 1 <= s <= k")
    n_grid = sorted(int(n) for n in n_grid)
    n_max = n_grid[-1]
    rows = []
    for i in range(seeds):
        rng = np.random.default_rng([seed, i])
        beta = np.zeros(k)
        support = rng.choice(k, s, replace=False)
        beta[support] = rng.choice([-1.0, 1.0], s) * rng.uniform(0.5, 1.5, s)
        z = rng.standard_normal((n_max + n_test, k))
        y = (z @ beta > 0).astype(int)
        R = random_rotation(k, rng) if rotation == "random" else np.eye(k)
        x = z @ R.T
        n_dis = _min_n(z[:n_max], y[:n_max], z[n_max:], y[n_max:], n_grid, target, i)
        n_ent = _min_n(x[:n_max], y[:n_max], x[n_max:], y[n_max:], n_grid, target, i)
        rows.append({"seed": i, "n_dis": n_dis, "n_ent": n_ent})
    wins = sum(r["n_dis"] < r["n_ent"] for r in rows)
    finite = lambda key: [r[key] for r in rows if np.isfinite(r[key])]
    return {
        "k": k,
        "s": s,
        "n_grid": n_grid,
        "target_accuracy": target,
        "rotation": rotation,
        "per_seed": rows,
        "mean_n_dis": float(np.mean(finite("n_dis"))) if finite("n_dis") else None,
        "mean_n_ent": float(np.mean(finite("n_ent"))) if finite("n_ent") else None,
        "wins": wins,
        "seeds": seeds,
        "passes": bool(wins >= min_fraction * seeds),
    }


# -- suite -----------------------------------------------------------------------------------


def equicorrelated(n: int, rho: float) -> np.ndarray:
    return np.full((n, n), rho) + (1.0 - rho) * np.eye(n)


def run_all(seed: int = 0, canary: bool = False) -> list[dict]:
    """Every oracle at its default parameters; one verdict dict each."""
    rng = np.random.default_rng(seed)
    verdicts = []

    mats = [np.diag([3.0, 1.0, 7.0]), equicorrelated(2, 0.5), equicorrelated(3, 0.999)]
    for _ in range(20):
        a = rng.standard_normal((5, 5))
        mats.append(a @ a.T + 0.1 * np.eye(5))
    checks = [verify_hadamard(m, canary=canary) for m in mats]
    verdicts.append({
        "oracle": "hadamard",
        "params": {"n_matrices": len(mats), "canary": canary},
        "results": checks,
        "passes": all(c["passes"] for c in checks),
    })

    spec_runs = []
    for i in range(100):
        D = int(rng.integers(3, 7)) if i % 2 == 0 else int(rng.integers(7, 17))
        a = rng.standard_normal((D, D))
        spec_runs.append(spectral_tail_bound(a @ a.T, int(rng.integers(1, D)), trials=500, seed=seed + i))
    verdicts.append({
        "oracle": "spectral_tail_bound",
        "params": {"n_covariances": 100, "trials": 500},
        "max_err_k1_gap": max(abs(r["err_k1"] - r["tail_sums"][0]) for r in spec_runs),
        "max_err_k_orth_gap": max(abs(r["err_k_orth"] - r["tail_sums"][r["k"] - 1]) for r in spec_runs),
        "passes": all(r["passes"] for r in spec_runs),
    })

    F = unit_columns(rng.standard_normal((32, 4)))
    y = rng.standard_normal(4)
    ns = noise_sensitivity_probe(SensitivityProbe(F, y, 0.7), n_draws=100_000, seed=seed)
    verdicts.append({"oracle": "noise_sensitivity", "params": {"d": 32, "k": 4, "sigma": 0.7}, **ns})

    wc = [worst_case_sensitivity(np.eye(4), 1.3, seed=seed), worst_case_sensitivity(equicorrelated(2, 0.5), 1.0, seed=seed)]
    G = F.T @ F
    wc.append(worst_case_sensitivity(G, 0.7, seed=seed))
    verdicts.append({
        "oracle": "worst_case_sensitivity",
        "params": {"cases": ["identity", "rho=0.5", "random"]},
        "results": wc,
        "passes": all(r["passes"] for r in wc),
    })

    od = orthogonality_descent(8, 128, seed=seed)
    summary = {key: val for key, val in od.items() if key not in ("coherence", "tc")}
    verdicts.append({"oracle": "orthogonality_descent", "params": {"k": 8, "d": 128}, **summary})

    sc = sample_complexity_experiment(64, 2, seeds=10, seed=seed)
    verdicts.append({"oracle": "sample_complexity", "params": {"k": 64, "s": 2, "seeds": 10}, **sc})
    return verdicts
