"""Scaled-likelihood Bayesian calibration with Metropolis-within-Gibbs.

The joint posterior over physical parameters p and the likelihood scaling
hyper-parameter S is, up to a constant,

    log pi(p, S) = (ke/2) ln S - S E(p) + (alpha - 1) ln S - beta S + log prior(p)

with E the scalar cost statistic (a PC surrogate or any callable) and a
Gamma(alpha, beta) hyper-prior on S. Each sweep takes one random-walk
Metropolis step on p (Gaussian proposal in canonical coordinates) followed
by an exact draw of S from its conjugate conditional
Gamma(ke/2 + alpha, E(p) + beta). Chains are a pure function of the seed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Union

import numpy as np

from .ensemble import DesignEnsemble  # noqa: F401  (re-exported convenience)
from .errors import ConfigError, DomainError, EvaluationError, NumericalError, ShapeError
from .parameters import ParameterSpace
from .surrogate import PCExpansion

__all__ = [
    "HyperPrior",
    "CalibrationConfig",
    "Chain",
    "log_posterior",
    "gibbs_conditional",
    "gibbs_draw_S",
    "acceptance_probability",
    "run_mcmc",
    "running_mean",
    "kde_marginal",
    "write_chain",
    "read_chain",
    "write_kde",
]

_KDE_CHUNK = 65536


@dataclass(frozen=True)
class HyperPrior:
    """Gamma(alpha, rate beta) prior for the likelihood scaling S."""

    alpha: float = 18.18
    beta: float = 72.02

    def __post_init__(self):
        if self.alpha <= 0 or self.beta <= 0:
            raise DomainError("Gamma hyper-prior needs alpha > 0 and beta > 0")

    @property
    def mean(self) -> float:
        return self.alpha / self.beta

    @property
    def variance(self) -> float:
        return self.alpha / self.beta ** 2

    def log_pdf(self, s: float) -> float:
        if s <= 0:
            return -math.inf
        return (self.alpha * math.log(self.beta) - math.lgamma(self.alpha)
                + (self.alpha - 1.0) * math.log(s) - self.beta * s)

    def sample(self, rng: np.random.Generator, size=None) -> np.ndarray:
        return rng.gamma(shape=self.alpha, scale=1.0 / self.beta, size=size)


CostFunction = Union[PCExpansion, Callable[[np.ndarray], float]]


@dataclass
class CalibrationConfig:
    """Everything run_mcmc needs; immutable in spirit once handed over.

    surrogate may be a PCExpansion (evaluated in canonical coordinates after
    the affine map) or any callable taking a physical parameter vector.
    proposal_scales are per-axis random-walk steps in canonical units; the
    default 0.1 is 5% of the canonical range. tune enables a discarded
    pre-run phase that rescales proposals toward 0.2-0.4 acceptance.
    fix_s disables the Gibbs step and pins S (sampler test mode).
    """

    space: ParameterSpace
    surrogate: CostFunction
    hyper: HyperPrior = field(default_factory=HyperPrior)
    ke: float = 17.0
    n_iters: int = 1_000_000
    burn_in: Optional[int] = None
    proposal_scales: Union[float, np.ndarray] = 0.1
    seed: int = 0
    tune: bool = False
    tune_iters: int = 2000
    fix_s: Optional[float] = None

    def __post_init__(self):
        if self.burn_in is None:
            self.burn_in = self.n_iters // 5
        if not 0 <= self.burn_in < self.n_iters:
            raise ConfigError(
                f"burn_in {self.burn_in} must lie in [0, n_iters={self.n_iters})"
            )
        scales = np.broadcast_to(
            np.asarray(self.proposal_scales, dtype=float), (self.space.dim,)
        ).copy()
        if (scales <= 0).any():
            raise ConfigError("proposal_scales must be positive")
        self.proposal_scales = scales
        if self.ke <= 0:
            raise ConfigError(f"effective degrees of freedom must be positive, got {self.ke}")
        if self.fix_s is not None and self.fix_s <= 0:
            raise ConfigError("fix_s must be positive when set")

    def cost_function(self) -> Callable[[np.ndarray], float]:
        """Normalize the surrogate to a physical-coordinates scalar callable."""
        if isinstance(self.surrogate, PCExpansion):
            surr = self.surrogate
            space = self.space
            if surr.dim != space.dim:
                raise ShapeError(
                    f"surrogate dimension {surr.dim} does not match "
                    f"parameter space dimension {space.dim}"
                )
            return lambda p: surr.eval(space.to_canonical(p))
        return self.surrogate


@dataclass(frozen=True)
class Chain:
    """MCMC output: physical-parameter samples, S samples, diagnostics."""

    samples_p: np.ndarray      # (n_iters, m) physical units
    samples_S: np.ndarray      # (n_iters,)
    log_post: np.ndarray       # (n_iters,)
    acceptance_rate: float
    seed: int
    burn_in: int
    proposal_scales: np.ndarray

    @property
    def n_iters(self) -> int:
        return self.samples_p.shape[0]

    def post_burn_in(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        b = self.burn_in
        return self.samples_p[b:], self.samples_S[b:], self.log_post[b:]


def log_posterior(config: CalibrationConfig, p, S: float) -> float:
    """Unnormalized joint log posterior at (p, S); -inf outside support."""
    p = np.asarray(p, dtype=float)
    lp_prior = config.space.log_prior(p)
    if not math.isfinite(lp_prior) or S <= 0.0:
        return -math.inf
    cost = config.cost_function()(p)
    if not math.isfinite(cost):
        raise EvaluationError(f"surrogate returned non-finite value at p={p.tolist()}")
    h = config.hyper
    return ((0.5 * config.ke + h.alpha - 1.0) * math.log(S)
            - S * (cost + h.beta) + lp_prior)


def gibbs_conditional(config: CalibrationConfig, p) -> tuple[float, float]:
    """(shape, rate) of the conjugate Gamma conditional of S given p."""
    cost = config.cost_function()(np.asarray(p, dtype=float))
    if not math.isfinite(cost):
        raise EvaluationError(f"surrogate returned non-finite value at p={p!r}")
    rate = cost + config.hyper.beta
    if rate <= 0.0:
        raise NumericalError(
            f"degenerate S-conditional: E(p) + beta = {rate} <= 0 at p={p!r}"
        )
    return 0.5 * config.ke + config.hyper.alpha, rate


def gibbs_draw_S(config: CalibrationConfig, p, rng: np.random.Generator) -> float:
    """Exact draw of S from its conditional given p."""
    shape, rate = gibbs_conditional(config, p)
    return float(rng.gamma(shape=shape, scale=1.0 / rate))


def acceptance_probability(log_post_current: float, log_post_proposed: float) -> float:
    """Metropolis acceptance probability from log-posterior values."""
    if log_post_proposed == -math.inf:
        return 0.0
    if log_post_current == -math.inf:
        return 1.0
    return min(1.0, math.exp(min(0.0, log_post_proposed - log_post_current)))


def _tune_scales(cost, space, hyper, ke, scales, xi0, cost0, s0,
                 rng, n_iters, fix_s):
    """Discarded pre-run: rescale proposals toward 0.2-0.4 acceptance."""
    block = max(100, n_iters // 10)
    xi, e_cur, s = xi0.copy(), cost0, s0
    shape_s = 0.5 * ke + hyper.alpha
    scales = scales.copy()
    done = 0
    while done < n_iters:
        n_acc = 0
        n_blk = min(block, n_iters - done)
        for _ in range(n_blk):
            prop = xi + scales * rng.standard_normal(xi.size)
            if np.abs(prop).max() <= 1.0:
                e_prop = cost(space.from_canonical(prop))
                if math.log(rng.random()) < -s * (e_prop - e_cur):
                    xi, e_cur = prop, e_prop
                    n_acc += 1
            if fix_s is None:
                s = rng.gamma(shape=shape_s, scale=1.0 / (e_cur + hyper.beta))
        rate = n_acc / n_blk
        if rate < 0.2:
            scales *= 0.7
        elif rate > 0.4:
            scales *= 1.4
        done += n_blk
    return scales


def run_mcmc(config: CalibrationConfig) -> Chain:
    """Metropolis-within-Gibbs sampling of the joint posterior.

    Per iteration: one Gaussian random-walk Metropolis step on p in
    canonical coordinates (out-of-box proposals rejected through the prior),
    then an exact conjugate draw of S given the updated p. The chain is
    fully determined by config.seed.
    """
    space = config.space
    cost = config.cost_function()
    hyper = config.hyper
    rng = np.random.default_rng(config.seed)
    m = space.dim

    p0 = space.defaults()
    xi = space.to_canonical(p0)
    e_cur = float(cost(p0))
    if not math.isfinite(e_cur):
        raise EvaluationError(f"surrogate returned non-finite value at start point {p0.tolist()}")
    s = config.fix_s if config.fix_s is not None else hyper.mean

    scales = config.proposal_scales
    if config.tune:
        scales = _tune_scales(cost, space, hyper, config.ke, scales, xi, e_cur, s,
                              rng, config.tune_iters, config.fix_s)

    n = config.n_iters
    samples_p = np.empty((n, m))
    samples_s = np.empty(n)
    log_post = np.empty(n)
    lp_const = space.log_prior(p0)
    shape_s = 0.5 * config.ke + hyper.alpha
    log_s_coef = 0.5 * config.ke + hyper.alpha - 1.0
    beta = hyper.beta
    n_accept = 0
    p_cur = p0

    for t in range(n):
        prop = xi + scales * rng.standard_normal(m)
        if np.abs(prop).max() <= 1.0:
            p_prop = space.from_canonical(prop)
            e_prop = float(cost(p_prop))
            if not math.isfinite(e_prop):
                raise EvaluationError(
                    f"surrogate returned non-finite value at iteration {t}, "
                    f"p={p_prop.tolist()}"
                )
            # At fixed S only the scaled cost changes across the box prior.
            if math.log(rng.random()) < -s * (e_prop - e_cur):
                xi, p_cur, e_cur = prop, p_prop, e_prop
                n_accept += 1
        rate = e_cur + beta
        if rate <= 0.0:
            raise NumericalError(
                f"degenerate S-conditional at iteration {t}: E(p) + beta = {rate}"
            )
        if config.fix_s is None:
            s = float(rng.gamma(shape=shape_s, scale=1.0 / rate))
        samples_p[t] = p_cur
        samples_s[t] = s
        log_post[t] = log_s_coef * math.log(s) - s * rate + lp_const

    return Chain(
        samples_p=samples_p,
        samples_S=samples_s,
        log_post=log_post,
        acceptance_rate=n_accept / n,
        seed=config.seed,
        burn_in=config.burn_in,
        proposal_scales=scales,
    )


def running_mean(chain: Chain) -> np.ndarray:
    """Cumulative means per parameter and for S; shape (n_iters, m+1)."""
    joined = np.column_stack([chain.samples_p, chain.samples_S])
    counts = np.arange(1, joined.shape[0] + 1)[:, None]
    return np.cumsum(joined, axis=0) / counts


def kde_marginal(samples, n_grid: int = 512, bandwidth: Optional[float] = None) -> np.ndarray:
    """Gaussian-kernel density on an equispaced grid; rows of (x, density).

    Bandwidth defaults to Silverman's rule 0.9 min(std, IQR/1.34) n^(-1/5);
    the grid spans [min - 3h, max + 3h]. Degenerate samples (zero spread)
    are rejected rather than smoothed into a spike.
    """
    samples = np.asarray(samples, dtype=float).ravel()
    n = samples.size
    if n < 100:
        raise DomainError(f"KDE needs at least 100 samples, got {n}")
    if bandwidth is None:
        std = float(np.std(samples))
        q75, q25 = np.percentile(samples, [75.0, 25.0])
        bandwidth = 0.9 * min(std, (q75 - q25) / 1.34) * n ** (-0.2)
    if not (bandwidth > 0 and math.isfinite(bandwidth)):
        raise NumericalError(
            f"degenerate KDE bandwidth {bandwidth!r}; samples have no spread"
        )
    grid = np.linspace(samples.min() - 3 * bandwidth,
                       samples.max() + 3 * bandwidth, n_grid)
    density = np.zeros(n_grid)
    for start in range(0, n, _KDE_CHUNK):
        block = samples[start:start + _KDE_CHUNK]
        z = (grid[:, None] - block[None, :]) / bandwidth
        density += np.exp(-0.5 * z * z).sum(axis=1)
    density /= n * bandwidth * math.sqrt(2.0 * math.pi)
    return np.column_stack([grid, density])


# -- chain and KDE files ------------------------------------------------------

def write_chain(path, chain: Chain, space: ParameterSpace) -> None:
    """One row per post-burn-in iteration: index, p (physical), S, log posterior."""
    p, s, lp = chain.post_burn_in()
    with open(path, "w") as fh:
        fh.write("# pccal chain\n")
        fh.write(f"# dim = {space.dim}\n")
        fh.write(f"# names = {' '.join(space.names)}\n")
        fh.write(f"# n_iters = {chain.n_iters}\n")
        fh.write(f"# burn_in = {chain.burn_in}\n")
        fh.write(f"# seed = {chain.seed}\n")
        fh.write(f"# acceptance_rate = {chain.acceptance_rate:.6f}\n")
        fh.write("# columns = iteration p*dim S log_posterior\n")
        for i in range(p.shape[0]):
            row = [str(chain.burn_in + i)]
            row += [f"{x:.16e}" for x in p[i]]
            row.append(f"{s[i]:.16e}")
            row.append(f"{lp[i]:.16e}")
            fh.write(" ".join(row) + "\n")


def read_chain(path) -> tuple[list[str], np.ndarray, np.ndarray, dict]:
    """Returns (names, samples_p, samples_S, header) from a chain file."""
    header: dict[str, str] = {}
    rows = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                body = line.lstrip("#").strip()
                if "=" in body:
                    key, _, value = body.partition("=")
                    header[key.strip()] = value.strip()
                continue
            rows.append(line.split())
    if not rows:
        raise ConfigError(f"chain file {path} contains no samples")
    dim = int(header["dim"])
    names = header.get("names", "").split() or [f"p{i}" for i in range(dim)]
    data = np.array([[float(f) for f in r] for r in rows])
    return names, data[:, 1:1 + dim], data[:, 1 + dim], header


def write_kde(path, table: np.ndarray, label: str = "") -> None:
    """Two-column grid/density table."""
    with open(path, "w") as fh:
        fh.write("# pccal kde\n")
        if label:
            fh.write(f"# label = {label}\n")
        fh.write("# columns = x density\n")
        for x, d in table:
            fh.write(f"{x:.16e} {d:.16e}\n")
