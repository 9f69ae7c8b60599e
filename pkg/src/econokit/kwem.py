"""Closed-economy pairwise wealth-exchange simulator.

A population of N agents holds non-negative wealths x_i.  At every time
step two randomly chosen agents j != k exchange an amount dx so that the
total wealth is conserved:

    x_j' = x_j - dx,    x_k' = x_k + dx.

Three exchange rules are supported:

* ``constant_amount``     -- dx = kappa, skipped when it would drive the
                             payer negative.
* ``homogeneous_omega``   -- dx = omega * (eps_bar * x_j - eps * x_k) with
                             eps uniform in (0,1), eps_bar = 1 - eps; the
                             saving parameter is lambda = 1 - omega.
* ``heterogeneous_lambda``-- per-agent saving parameters lambda_i; the
                             payer keeps lambda_j * x_j and a uniform
                             fraction eps of the pooled stakes is returned:
                             x_j' = lambda_j x_j
                                    + eps ((1-lambda_j) x_j + (1-lambda_k) x_k).

The hot loop is compiled with numba; trades are strictly sequential within
a run.  Randomness comes from a single seeded PCG64 generator, so identical
(config, seed) pairs give bit-identical trajectories.  Independent replicas
should be seeded via :func:`spawn_seeds`.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .wealth_stats import WealthSnapshot

VALID_KINDS = ("constant_amount", "homogeneous_omega", "heterogeneous_lambda")

# trades per RNG batch; bounds memory of the pre-drawn random arrays
_CHUNK = 1_000_000


@dataclass
class AgentPopulation:
    """Wealths and saving parameters of N agents."""

    wealths: np.ndarray
    savings: np.ndarray
    total_wealth: float

    def __post_init__(self):
        self.wealths = np.asarray(self.wealths, dtype=float)
        self.savings = np.asarray(self.savings, dtype=float)
        if self.wealths.size < 2:
            raise ValueError("population needs at least 2 agents")
        if self.wealths.size != self.savings.size:
            raise ValueError("wealths and savings must have equal length")
        if np.any(self.wealths < 0):
            raise ValueError("wealths must be non-negative")
        if np.any((self.savings < 0) | (self.savings >= 1)):
            raise ValueError("saving parameters must lie in [0, 1)")

    @property
    def n_agents(self) -> int:
        return self.wealths.size

    @property
    def mean_wealth(self) -> float:
        return self.total_wealth / self.n_agents

    def check_conservation(self, rel_tol: float = 1e-9) -> None:
        drift = abs(self.wealths.sum() - self.total_wealth)
        if drift > rel_tol * self.total_wealth:
            raise RuntimeError(f"wealth conservation violated: drift {drift:g}")


@dataclass
class ExchangeRule:
    """Selects the dx rule and carries exactly its parameters."""

    kind: str
    kappa: float | None = None
    omega: float | None = None

    def __post_init__(self):
        if self.kind not in VALID_KINDS:
            raise ValueError(f"unknown rule kind {self.kind!r}")
        if self.kind == "constant_amount":
            if self.kappa is None or self.kappa <= 0:
                raise ValueError("constant_amount requires kappa > 0")
            if self.omega is not None:
                raise ValueError("omega is not a constant_amount parameter")
        elif self.kind == "homogeneous_omega":
            if self.omega is None or not (0 < self.omega <= 1):
                raise ValueError("homogeneous_omega requires omega in (0, 1]")
            if self.kappa is not None:
                raise ValueError("kappa is not a homogeneous_omega parameter")
        else:  # heterogeneous_lambda: parameters live on the agents
            if self.kappa is not None or self.omega is not None:
                raise ValueError("heterogeneous_lambda takes no rule parameters")

    @property
    def saving(self) -> float:
        """lambda = 1 - omega for the homogeneous rule."""
        if self.kind != "homogeneous_omega":
            raise ValueError("saving parameter is defined for homogeneous_omega only")
        return 1.0 - self.omega


@dataclass
class SimConfig:
    n_agents: int
    n_trades: int
    seed: int
    rule: ExchangeRule
    initial_wealth: float = 1.0
    snapshot_times: list[int] = field(default_factory=list)
    savings_value: float | None = None
    lambda_max: float | None = None

    def __post_init__(self):
        if self.n_agents < 2:
            raise ValueError("n_agents must be >= 2")
        if self.n_trades < 0:
            raise ValueError("n_trades must be >= 0")
        if self.initial_wealth <= 0:
            raise ValueError("initial_wealth must be positive")
        self.snapshot_times = sorted(int(t) for t in self.snapshot_times)
        if self.snapshot_times and self.snapshot_times[-1] > self.n_trades:
            raise ValueError("snapshot_times must not exceed n_trades")


def init_population(
    n: int,
    initial_wealth: float,
    savings_value: float | None = None,
    lambda_max: float | None = None,
    rng: np.random.Generator | None = None,
) -> AgentPopulation:
    """Equal-wealth population with uniform or sampled saving parameters.

    Exactly one of ``savings_value`` (the same lambda for every agent) or
    ``lambda_max`` (lambda_i sampled uniformly on [0, lambda_max)) must be
    given.  Sampling requires ``rng``.
    """
    if n < 2:
        raise ValueError("n must be >= 2")
    if initial_wealth <= 0:
        raise ValueError("initial_wealth must be positive")
    if (savings_value is None) == (lambda_max is None):
        raise ValueError("give exactly one of savings_value or lambda_max")
    if savings_value is not None:
        if not (0 <= savings_value < 1):
            raise ValueError("savings_value must lie in [0, 1)")
        savings = np.full(n, float(savings_value))
    else:
        if not (0 < lambda_max <= 1):
            raise ValueError("lambda_max must lie in (0, 1]")
        if rng is None:
            raise ValueError("sampled savings require an rng")
        savings = rng.uniform(0.0, lambda_max, size=n)
        # guard against lambda_max == 1 producing a value at the closed end
        savings = np.clip(savings, 0.0, np.nextafter(1.0, 0.0))
    wealths = np.full(n, float(initial_wealth))
    return AgentPopulation(wealths, savings, total_wealth=n * float(initial_wealth))


def delta_x_homogeneous(x_j: float, x_k: float, omega: float, eps: float) -> float:
    """dx = omega * ((1-eps) x_j - eps x_k); keeps both wealths non-negative."""
    if x_j < 0 or x_k < 0:
        raise ValueError("wealths must be non-negative")
    if not (0 < omega <= 1):
        raise ValueError("omega must lie in (0, 1]")
    return omega * ((1.0 - eps) * x_j - eps * x_k)


def delta_x_constant(x_j: float, x_k: float, kappa: float) -> float | None:
    """dx = kappa, or None when the trade would drive the payer negative."""
    if kappa <= 0:
        raise ValueError("kappa must be positive")
    if x_j - kappa < 0:
        return None
    return kappa


def delta_x_heterogeneous(
    x_j: float, x_k: float, lam_j: float, lam_k: float, eps: float
) -> float:
    """Per-agent-saving exchange; reduces to the homogeneous rule at equal lambda.

    The payer's new wealth is
    x_j' = lam_j x_j + eps ((1-lam_j) x_j + (1-lam_k) x_k) and dx = x_j - x_j'.
    """
    if x_j < 0 or x_k < 0:
        raise ValueError("wealths must be non-negative")
    if not (0 <= lam_j < 1 and 0 <= lam_k < 1):
        raise ValueError("saving parameters must lie in [0, 1)")
    new_xj = lam_j * x_j + eps * ((1.0 - lam_j) * x_j + (1.0 - lam_k) * x_k)
    return x_j - new_xj


@njit(cache=True)
def _trade_homogeneous(wealths, omega, jj, kk, eps):
    for t in range(jj.size):
        j = jj[t]
        k = kk[t]
        xj = wealths[j]
        xk = wealths[k]
        dx = omega * ((1.0 - eps[t]) * xj - eps[t] * xk)
        wealths[j] = xj - dx
        wealths[k] = xk + dx


@njit(cache=True)
def _trade_heterogeneous(wealths, savings, jj, kk, eps):
    for t in range(jj.size):
        j = jj[t]
        k = kk[t]
        xj = wealths[j]
        xk = wealths[k]
        pool = (1.0 - savings[j]) * xj + (1.0 - savings[k]) * xk
        new_xj = savings[j] * xj + eps[t] * pool
        wealths[j] = new_xj
        wealths[k] = (xj + xk) - new_xj


@njit(cache=True)
def _trade_constant(wealths, kappa, jj, kk):
    rejected = 0
    for t in range(jj.size):
        j = jj[t]
        if wealths[j] - kappa < 0.0:
            rejected += 1
            continue
        wealths[j] -= kappa
        wealths[kk[t]] += kappa
    return rejected


def _apply_trades(pop: AgentPopulation, rule: ExchangeRule, n: int,
                  rng: np.random.Generator) -> int:
    """Run n sequential trades in pre-drawn chunks; returns rejected count."""
    n_agents = pop.n_agents
    rejected = 0
    done = 0
    while done < n:
        m = min(_CHUNK, n - done)
        jj = rng.integers(0, n_agents, size=m)
        kk = rng.integers(0, n_agents - 1, size=m)
        kk += kk >= jj  # uniform over k != j
        if rule.kind == "homogeneous_omega":
            eps = rng.random(m)
            _trade_homogeneous(pop.wealths, rule.omega, jj, kk, eps)
        elif rule.kind == "heterogeneous_lambda":
            eps = rng.random(m)
            _trade_heterogeneous(pop.wealths, pop.savings, jj, kk, eps)
        else:
            rejected += _trade_constant(pop.wealths, rule.kappa, jj, kk)
        done += m
    return rejected


@dataclass
class SimResult:
    population: AgentPopulation
    snapshots: list[WealthSnapshot]
    rejected_trades: int


def run_simulation(config: SimConfig, population: AgentPopulation | None = None) -> SimResult:
    """Run the configured number of trades, snapshotting at the requested counts.

    When ``population`` is omitted it is built from the config: per-agent
    lambdas from ``savings_value``/``lambda_max`` (heterogeneous rule) or from
    the rule's own omega (homogeneous).  Snapshots carry agent-ordered wealth
    and lambda arrays so they can be written per agent.
    """
    rng = np.random.default_rng(np.random.PCG64(config.seed))
    if population is None:
        if config.rule.kind == "heterogeneous_lambda":
            population = init_population(
                config.n_agents, config.initial_wealth,
                savings_value=config.savings_value,
                lambda_max=config.lambda_max, rng=rng,
            )
        else:
            lam = config.rule.saving if config.rule.kind == "homogeneous_omega" else 0.0
            population = init_population(
                config.n_agents, config.initial_wealth, savings_value=lam,
            )
    elif population.n_agents != config.n_agents:
        raise ValueError("population size does not match config")

    snapshots: list[WealthSnapshot] = []
    rejected = 0
    now = 0
    wanted = set(config.snapshot_times)
    times = sorted(wanted | {config.n_trades})
    for t in times:
        rejected += _apply_trades(population, config.rule, t - now, rng)
        now = t
        if t in wanted:
            snapshots.append(WealthSnapshot.from_agent_wealths(
                t, population.wealths, savings=population.savings))
    population.check_conservation()
    return SimResult(population, snapshots, rejected)


def spawn_seeds(seed: int, n_replicas: int) -> list[int]:
    """Deterministic sub-seeds for independent replicas (SeedSequence spawning)."""
    children = np.random.SeedSequence(seed).spawn(n_replicas)
    return [int(c.generate_state(1, dtype=np.uint64)[0]) for c in children]
