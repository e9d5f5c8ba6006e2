"""Hamiltonian-style MCMC for the hazard model posterior.

Sampling runs on an unconstrained parameterization: the baseline simplex
goes through an additive log-ratio transform and the shrinkage rate
through a log transform, with both Jacobians folded into the target.
Step size is tuned by dual averaging during warm-up, with a diagonal mass
matrix estimated from the first warm-up half.  The lasso prior is handled
through its subgradient (sign(0) = 0); a smoothed variant is available
via ``smooth_abs_eps`` for strictly differentiable targets.
"""

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.optimize import minimize

from .errors import ConvergenceError, InitializationError
from .hazard import ModelParams
from .likelihood import (BETA0_VARIANCE, NEG_INF, CohortDesign, log_prior_grad,
                         _abs_smooth)
from .splines import SplineBasis


@dataclass
class McmcConfig:
    """Sampler settings; the defaults match the fitting pipeline."""

    chains: int = 4
    warmup: int = 1000
    iterations: int = 1000
    seed: int = 0
    target_accept: float = 0.8
    max_leapfrog: int = 48
    trajectory: float = 2.0
    smooth_abs_eps: float = 0.0
    init_retries: int = 10
    n_jobs: int = 1

    def __post_init__(self):
        if min(self.chains, self.warmup, self.iterations) <= 0:
            raise ValueError("chains, warmup and iterations must be positive")


@dataclass
class PosteriorDraws:
    """Post-warm-up draws from every chain, merged in chain order."""

    beta0: np.ndarray
    beta: np.ndarray
    gamma: np.ndarray
    tau: np.ndarray
    chain: np.ndarray
    iteration: np.ndarray
    covariates: tuple
    diagnostics: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return self.beta0.size

    def __getitem__(self, i: int) -> ModelParams:
        return ModelParams(
            beta0=float(self.beta0[i]),
            beta=self.beta[i],
            baseline_weights=self.gamma[i],
            shrinkage_rate=float(self.tau[i]),
            covariates=self.covariates,
        )

    def __iter__(self):
        return (self[i] for i in range(len(self)))

    def parameter_names(self) -> list:
        names = ["beta0"] + list(self.covariates)
        names += [f"gamma[{l}]" for l in range(self.gamma.shape[1])]
        return names + ["tau"]

    def parameter_array(self, name: str) -> np.ndarray:
        if name == "beta0":
            return self.beta0
        if name == "tau":
            return self.tau
        if name.startswith("gamma["):
            return self.gamma[:, int(name[6:-1])]
        return self.beta[:, self.covariates.index(name)]

    def coefficient_draws(self, covariate: str) -> np.ndarray:
        return self.beta[:, self.covariates.index(covariate)]

    def thin(self, keep: int) -> "PosteriorDraws":
        """Evenly spaced subset of draws (serving-latency knob)."""
        if keep <= 0:
            raise ValueError("thin target must be a positive draw count")
        n = len(self)
        if keep >= n:
            return self
        idx = np.linspace(0, n - 1, keep).round().astype(int)
        return replace(
            self, beta0=self.beta0[idx], beta=self.beta[idx], gamma=self.gamma[idx],
            tau=self.tau[idx], chain=self.chain[idx], iteration=self.iteration[idx],
        )


def softmax_from_alr(z: np.ndarray) -> np.ndarray:
    """Map an additive log-ratio vector (length L-1) onto the simplex."""
    full = np.concatenate([z, [0.0]])
    full -= full.max()
    e = np.exp(full)
    return e / e.sum()


class _UnconstrainedPosterior:
    """Log posterior and gradient on the unconstrained parameter vector."""

    def __init__(self, design: CohortDesign, n_basis: int, smooth_abs_eps: float = 0.0):
        self.design = design
        self.p = len(design.covariates)
        self.L = n_basis
        self.eps = smooth_abs_eps
        self.dim = 1 + self.p + (self.L - 1) + 1

    def unpack(self, theta: np.ndarray):
        p, L = self.p, self.L
        beta0 = theta[0]
        beta = theta[1:1 + p]
        z = theta[1 + p:1 + p + L - 1]
        u = theta[-1]
        return beta0, beta, z, u

    def constrained(self, theta: np.ndarray):
        beta0, beta, z, u = self.unpack(theta)
        return beta0, beta.copy(), softmax_from_alr(z), math.exp(u)

    def value_and_grad(self, theta: np.ndarray):
        beta0, beta, z, u = self.unpack(theta)
        gamma = softmax_from_alr(z)
        # beyond double range the posterior is astronomically low anyway
        tau = math.exp(u) if -700.0 < u < 700.0 else 0.0
        if tau <= 0.0 or abs(beta0) > 1e150:
            return NEG_INF, np.zeros(self.dim)
        ll, g0, gb, gg = self.design.loglik_grad(beta0, beta, gamma)
        if ll == NEG_INF:
            return NEG_INF, np.zeros(self.dim)
        p0, pb, pg, pt = log_prior_grad(beta0, beta, gamma, tau, self.eps)
        absb, _ = _abs_smooth(beta, self.eps)
        value = ll
        value += -0.5 * math.log(2 * math.pi * BETA0_VARIANCE) - beta0 ** 2 / (2 * BETA0_VARIANCE)
        value += self.p * math.log(tau / 2.0) - tau * float(absb.sum())
        value += -0.5 * math.log(2 * math.pi) - 0.5 * u - tau / 2.0
        # simplex log-Jacobian sum(log gamma) and tau log-Jacobian u
        with np.errstate(divide="ignore"):
            value += float(np.log(gamma).sum()) + u
        if not math.isfinite(value):
            return NEG_INF, np.zeros(self.dim)

        g_gamma = gg + pg
        inner = float(g_gamma @ gamma)
        g_z = gamma[:-1] * (g_gamma[:-1] - inner) + (1.0 - self.L * gamma[:-1])
        g_tau_total = pt
        g_u = g_tau_total * tau + 1.0
        grad = np.concatenate([[g0 + p0], gb + pb, g_z, [g_u]])
        return value, grad


def _leapfrog(post, theta, rho, eps, inv_mass, n_steps, grad):
    theta = theta.copy()
    rho = rho.copy()
    rho += 0.5 * eps * grad
    for step in range(n_steps):
        theta += eps * rho * inv_mass
        value, grad = post.value_and_grad(theta)
        if not math.isfinite(value):
            return theta, rho, value, grad
        rho += (eps if step < n_steps - 1 else 0.5 * eps) * grad
    return theta, rho, value, grad


def _initial_step_size(post, theta, inv_mass, rng):
    value, grad = post.value_and_grad(theta)
    eps = 0.1
    rho = rng.standard_normal(theta.size) / np.sqrt(inv_mass)
    for _ in range(60):
        theta1, rho1, value1, _ = _leapfrog(post, theta, rho, eps, inv_mass, 1, grad)
        h0 = -value + 0.5 * float(rho ** 2 @ inv_mass)
        h1 = -value1 + 0.5 * float(rho1 ** 2 @ inv_mass) if math.isfinite(value1) else math.inf
        accept = math.exp(min(0.0, h0 - h1)) if math.isfinite(h1) else 0.0
        if accept > 0.95:
            eps *= 2.0
        elif accept < 0.25:
            eps *= 0.5
        else:
            break
    return min(max(eps, 1e-6), 10.0)


class _DualAveraging:
    """Nesterov-style step-size adaptation toward a target accept rate."""

    def __init__(self, eps0: float, target: float):
        self.mu = math.log(10.0 * eps0)
        self.target = target
        self.log_eps = math.log(eps0)
        self.log_eps_bar = 0.0
        self.h_bar = 0.0
        self.count = 0

    def update(self, accept_prob: float) -> float:
        self.count += 1
        m = self.count
        self.h_bar += ((self.target - accept_prob) - self.h_bar) / (m + 10.0)
        self.log_eps = self.mu - math.sqrt(m) / 0.05 * self.h_bar
        w = m ** -0.75
        self.log_eps_bar = w * self.log_eps + (1 - w) * self.log_eps_bar
        return math.exp(self.log_eps)

    @property
    def adapted(self) -> float:
        return math.exp(self.log_eps_bar)


def _sample_chain(post, theta0, config: McmcConfig, rng):
    dim = theta0.size
    inv_mass = np.ones(dim)
    theta = theta0.copy()
    value, grad = post.value_and_grad(theta)

    def hmc_iteration(theta, value, grad, eps):
        rho = rng.standard_normal(dim) * np.sqrt(1.0 / inv_mass)
        h0 = -value + 0.5 * float((rho * rho) @ inv_mass)
        base = max(1, min(config.max_leapfrog, int(round(config.trajectory / eps))))
        n_steps = int(rng.integers(max(1, base // 2), base + 1))
        theta1, rho1, value1, grad1 = _leapfrog(post, theta, rho, eps, inv_mass, n_steps, grad)
        if math.isfinite(value1):
            h1 = -value1 + 0.5 * float((rho1 * rho1) @ inv_mass)
            delta = h0 - h1
        else:
            delta = -math.inf
        diverged = not math.isfinite(delta) or delta < -1000.0
        accept_prob = 0.0 if diverged else math.exp(min(0.0, delta))
        if not diverged and math.log(max(rng.random(), 1e-300)) < delta:
            return theta1, value1, grad1, accept_prob, diverged
        return theta, value, grad, accept_prob, diverged

    divergences = 0
    phase1 = config.warmup // 2
    estimation = []
    da = _DualAveraging(_initial_step_size(post, theta, inv_mass, rng), config.target_accept)
    eps = math.exp(da.log_eps)
    for it in range(phase1):
        theta, value, grad, aprob, div = hmc_iteration(theta, value, grad, eps)
        divergences += div
        eps = da.update(aprob)
        if it >= phase1 // 2:
            estimation.append(theta.copy())

    if len(estimation) >= 10:
        var = np.var(np.asarray(estimation), axis=0, ddof=1)
        n_est = len(estimation)
        inv_mass = (n_est / (n_est + 5.0)) * var + (5.0 / (n_est + 5.0)) * 1e-3
        inv_mass = np.maximum(inv_mass, 1e-10)

    da = _DualAveraging(_initial_step_size(post, theta, inv_mass, rng), config.target_accept)
    eps = math.exp(da.log_eps)
    for _ in range(config.warmup - phase1):
        theta, value, grad, aprob, div = hmc_iteration(theta, value, grad, eps)
        divergences += div
        eps = da.update(aprob)

    eps = da.adapted
    kept = np.empty((config.iterations, dim))
    accept_sum = 0.0
    for it in range(config.iterations):
        theta, value, grad, aprob, div = hmc_iteration(theta, value, grad, eps)
        divergences += div
        accept_sum += aprob
        kept[it] = theta
    return kept, accept_sum / config.iterations, eps, divergences


def _initial_theta(post, config: McmcConfig, rng):
    for attempt in range(config.init_retries):
        scale = 0.1 * (1.5 ** attempt)
        theta = np.zeros(post.dim)
        theta[0] = rng.normal(0.0, scale)
        theta[1:1 + post.p] = rng.normal(0.0, scale, size=post.p)
        # z = 0 is the uniform simplex; u = 0 is tau = 1
        value, _ = post.value_and_grad(theta)
        if math.isfinite(value):
            return theta
    raise InitializationError(
        f"no finite posterior after {config.init_retries} jittered initializations"
    )


def run_mcmc(data, basis: SplineBasis, config: McmcConfig | None = None,
             covariates=None) -> PosteriorDraws:
    """Sample the posterior; returns merged post-warm-up draws.

    Each chain owns an RNG stream spawned deterministically from the
    master seed, so results are reproducible bit-for-bit for a given
    configuration regardless of execution order.
    """
    config = config or McmcConfig()
    if covariates is None:
        covariates = list(data[0].covariates.keys()) if data else []
    design = CohortDesign(data, basis, covariates)
    post = _UnconstrainedPosterior(design, basis.n_basis, config.smooth_abs_eps)

    seeds = np.random.SeedSequence(config.seed).spawn(config.chains)
    rngs = [np.random.Generator(np.random.Philox(s)) for s in seeds]

    def one_chain(c):
        theta0 = _initial_theta(post, config, rngs[c])
        return _sample_chain(post, theta0, config, rngs[c])

    if config.n_jobs > 1:
        with ThreadPoolExecutor(max_workers=config.n_jobs) as pool:
            results = list(pool.map(one_chain, range(config.chains)))
    else:
        results = [one_chain(c) for c in range(config.chains)]

    n, dim = config.iterations, post.dim
    thetas = np.vstack([r[0] for r in results])
    beta0 = thetas[:, 0]
    beta = thetas[:, 1:1 + post.p]
    zs = thetas[:, 1 + post.p:dim - 1]
    full = np.concatenate([zs, np.zeros((zs.shape[0], 1))], axis=1)
    full -= full.max(axis=1, keepdims=True)
    expz = np.exp(full)
    gammas = expz / expz.sum(axis=1, keepdims=True)
    tau = np.exp(thetas[:, -1])
    chain_ids = np.repeat(np.arange(config.chains), n)
    iters = np.tile(np.arange(n), config.chains)

    draws = PosteriorDraws(
        beta0=beta0, beta=beta, gamma=gammas, tau=tau,
        chain=chain_ids, iteration=iters, covariates=tuple(covariates),
    )
    names = draws.parameter_names()
    rhat, ess_vals = {}, {}
    for name in names:
        series = draws.parameter_array(name).reshape(config.chains, n)
        rhat[name] = split_rhat(series)
        ess_vals[name] = effective_sample_size(series)
    draws.diagnostics = {
        "accept_rate": [float(r[1]) for r in results],
        "step_size": [float(r[2]) for r in results],
        "divergences": int(sum(r[3] for r in results)),
        "rhat": rhat,
        "ess": ess_vals,
    }
    return draws


def check_convergence(draws: PosteriorDraws, rhat_max: float = 1.05,
                      ess_min: float = 100.0) -> tuple[bool, list]:
    """Apply the convergence gate; returns (ok, list of offending messages)."""
    problems = []
    for name, value in draws.diagnostics.get("rhat", {}).items():
        if not value < rhat_max:
            problems.append(f"split-Rhat for {name} is {value:.4f} (gate {rhat_max})")
    for name, value in draws.diagnostics.get("ess", {}).items():
        if not value > ess_min:
            problems.append(f"ESS for {name} is {value:.1f} (gate {ess_min})")
    return (not problems), problems


def split_rhat(series: np.ndarray) -> float:
    """Potential scale reduction on half-split chains (rows are chains)."""
    m, n = series.shape
    half = n // 2
    if half < 2:
        return math.nan
    halves = series[:, : 2 * half].reshape(2 * m, half)
    within = halves.var(axis=1, ddof=1).mean()
    between = half * halves.mean(axis=1).var(ddof=1)
    if within == 0:
        return 1.0 if between == 0 else math.inf
    var_plus = (half - 1) / half * within + between / half
    return float(math.sqrt(var_plus / within))


def effective_sample_size(series: np.ndarray) -> float:
    """Multi-chain ESS with Geyer's initial monotone positive sequence."""
    m, n = series.shape
    half = n // 2
    if half < 2:
        return float("nan")
    halves = series[:, : 2 * half].reshape(2 * m, half)
    m2, n2 = halves.shape
    centered = halves - halves.mean(axis=1, keepdims=True)
    acov = np.empty((m2, n2))
    for c in range(m2):
        full = np.correlate(centered[c], centered[c], mode="full")
        acov[c] = full[n2 - 1:] / n2
    within = halves.var(axis=1, ddof=1).mean()
    if within == 0:
        return float(m2 * n2)
    between = n2 * halves.mean(axis=1).var(ddof=1)
    var_plus = (n2 - 1) / n2 * within + between / n2
    rho = 1.0 - (within - acov.mean(axis=0)) / var_plus
    # Geyer: accumulate while consecutive-lag pair sums stay positive,
    # enforcing monotone decrease.
    tau = 1.0
    prev_pair = math.inf
    t = 1
    while t + 1 < n2:
        pair = rho[t] + rho[t + 1]
        if pair <= 0:
            break
        pair = min(pair, prev_pair)
        prev_pair = pair
        tau += 2.0 * pair
        t += 2
    return float(m2 * n2 / tau)


def fit_map(data, basis: SplineBasis, covariates=None, tau: float | None = None,
            smooth_eps: float = 1e-6, max_iter: int = 500):
    """Posterior mode with the shrinkage rate held fixed (or pure ML).

    With ``tau=None`` no prior enters at all; otherwise the lasso penalty
    at the given rate plus the intercept prior are included.  The absolute
    value is lightly smoothed so the quasi-Newton search is stable.
    """
    if covariates is None:
        covariates = list(data[0].covariates.keys()) if data else []
    design = CohortDesign(data, basis, covariates)
    L = basis.n_basis
    p = len(covariates)
    dim = 1 + p + (L - 1)

    def objective(x):
        beta0, beta, z = x[0], x[1:1 + p], x[1 + p:]
        gamma = softmax_from_alr(z)
        ll, g0, gb, gg = design.loglik_grad(beta0, beta, gamma)
        if ll == NEG_INF:
            return 1e300, np.zeros(dim)
        value, grad0, gradb = ll, g0, gb
        if tau is not None:
            absb, dabs = _abs_smooth(beta, smooth_eps)
            value += -beta0 ** 2 / (2 * BETA0_VARIANCE) - tau * float(absb.sum())
            grad0 += -beta0 / BETA0_VARIANCE
            gradb = gradb - tau * dabs
        inner = float(gg @ gamma)
        gz = gamma[:-1] * (gg[:-1] - inner)
        grad = np.concatenate([[grad0], gradb, gz])
        return -value, -grad

    x0 = np.zeros(dim)
    res = minimize(objective, x0, jac=True, method="L-BFGS-B",
                   options={"maxiter": max_iter, "ftol": 1e-12, "gtol": 1e-10})
    beta0, beta, z = res.x[0], res.x[1:1 + p], res.x[1 + p:]
    if not np.isfinite(res.fun) or res.fun >= 1e299:
        raise ConvergenceError("MAP optimization failed to find a finite optimum")
    return ModelParams(
        beta0=float(beta0), beta=beta, baseline_weights=softmax_from_alr(z),
        shrinkage_rate=tau if tau is not None else 1.0, covariates=tuple(covariates),
    )
