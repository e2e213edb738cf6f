"""Simulation-truth generators and parameter-error metrics.

Three single-edge scenarios (Gaussian predictors, three-component mixture
predictors, and an elementwise-quadratic response map) plus the
semi-simulation family, where regression truths are drawn from pools of
posterior coefficient draws and responses are built on top of given
predictor clouds.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Mapping, Sequence

import numpy as np
from scipy.stats import invwishart

from .model import DDRDataset, LinearMapParams, MapKind, apply_map
from .ot import EmpiricalDistribution

__all__ = [
    "Scenario",
    "ScenarioConfig",
    "SimulatedData",
    "CoefficientPool",
    "SemiSimData",
    "default_truth",
    "gen_scenario",
    "build_coefficient_pool",
    "build_coefficient_pools",
    "gen_semi_sim",
    "param_error",
]


class Scenario(str, Enum):
    GAUSS1 = "gauss1"
    MIXTURE2 = "mixture2"
    QUADRATIC = "quadratic"
    SEMISIM_NO_EDGE = "semisim-noedge"
    SEMISIM_FULL = "semisim-full"
    SEMISIM_SPARSE = "semisim-sparse"


_SINGLE_EDGE = (Scenario.GAUSS1, Scenario.MIXTURE2, Scenario.QUADRATIC)

# Mixture component mean locations for the second scenario.
_MIXTURE_CENTERS = np.array([[0.0, 0.0], [8.0, 8.0], [-8.0, 8.0]])


def default_truth(scenario: Scenario) -> LinearMapParams:
    """The planted regression map each single-edge scenario recovers."""
    kind = MapKind.QUADRATIC if scenario is Scenario.QUADRATIC else MapKind.LINEAR
    return LinearMapParams(
        coef=np.array([[1.0, 0.0], [1.0, 1.0]]), intercept=np.array([1.0, 1.0]), map_kind=kind
    )


def _default_noise_sd(scenario: Scenario) -> float:
    return 0.1 if scenario is Scenario.QUADRATIC else 1.0


@dataclass(frozen=True)
class ScenarioConfig:
    """Knobs of a single-edge scenario; ``truth=None`` uses the stock map."""

    scenario: Scenario
    n_pairs: int
    n_atoms: int = 100
    seed: int = 0
    noise_sd: float | None = None
    truth: LinearMapParams | None = None
    n_test: int = 200
    shared_shift: bool = False  # one noise draw per distribution instead of per atom

    def __post_init__(self):
        object.__setattr__(self, "scenario", Scenario(self.scenario))
        if self.scenario not in _SINGLE_EDGE:
            raise ValueError(
                f"scenario {self.scenario.value} is generated by gen_semi_sim, not gen_scenario"
            )
        if self.n_pairs < 1 or self.n_atoms < 1:
            raise ValueError("need at least one pair and one atom")
        if self.noise_sd is not None and self.noise_sd < 0:
            raise ValueError("noise_sd must be nonnegative")

    def resolved_noise_sd(self) -> float:
        return self.noise_sd if self.noise_sd is not None else _default_noise_sd(self.scenario)

    def resolved_truth(self) -> LinearMapParams:
        return self.truth if self.truth is not None else default_truth(self.scenario)


@dataclass(frozen=True)
class SimulatedData:
    train: DDRDataset
    test: DDRDataset
    truth: LinearMapParams


def _gauss1_atoms(rng, m):
    mean = 2.0 * rng.standard_normal(2)
    cov = invwishart.rvs(df=6, scale=np.eye(2), random_state=rng)
    return rng.multivariate_normal(mean, cov, size=m, method="cholesky")


def _mixture2_atoms(rng, m):
    means = _MIXTURE_CENTERS + 2.0 * rng.standard_normal((3, 2))
    covs = [invwishart.rvs(df=6, scale=np.eye(2), random_state=rng) for _ in range(3)]
    labels = rng.integers(3, size=m)
    atoms = np.empty((m, 2))
    for c in range(3):
        mask = labels == c
        if np.any(mask):
            atoms[mask] = rng.multivariate_normal(
                means[c], covs[c], size=int(mask.sum()), method="cholesky"
            )
    return atoms


def _quadratic_atoms(rng, m):
    mean = rng.standard_normal(2)
    cov = invwishart.rvs(df=10, scale=np.eye(2), random_state=rng)
    return rng.multivariate_normal(mean, cov, size=m, method="cholesky")


_ATOM_SAMPLERS = {
    Scenario.GAUSS1: _gauss1_atoms,
    Scenario.MIXTURE2: _mixture2_atoms,
    Scenario.QUADRATIC: _quadratic_atoms,
}


def _make_pair(rng, cfg: ScenarioConfig, truth: LinearMapParams):
    atoms = _ATOM_SAMPLERS[cfg.scenario](rng, cfg.n_atoms)
    responses = apply_map(truth, atoms)
    sd = cfg.resolved_noise_sd()
    if sd > 0:
        if cfg.shared_shift:
            responses = responses + sd * rng.standard_normal(truth.d_out)
        else:
            responses = responses + sd * rng.standard_normal(responses.shape)
    return EmpiricalDistribution(atoms), EmpiricalDistribution(responses)


def gen_scenario(cfg: ScenarioConfig) -> SimulatedData:
    """Generate train and test pair sets under one simulation truth.

    Every pair draws from its own seed substream, so a run with a larger
    ``n_pairs`` extends a smaller one pair for pair.
    """
    truth = cfg.resolved_truth()
    streams = np.random.SeedSequence(cfg.seed).spawn(cfg.n_pairs + cfg.n_test)
    pairs = [
        _make_pair(np.random.default_rng(s), cfg, truth) for s in streams
    ]
    train = DDRDataset(tuple(pairs[: cfg.n_pairs]))
    test = DDRDataset(tuple(pairs[cfg.n_pairs :])) if cfg.n_test > 0 else None
    return SimulatedData(train=train, test=test, truth=truth)


@dataclass(frozen=True)
class CoefficientPool:
    """Flat pool of posterior coefficient draws tagged by edge status."""

    values: np.ndarray
    label: str

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64).ravel()
        if values.size == 0:
            raise ValueError(f"no edges with flag for pool {self.label}")
        object.__setattr__(self, "values", values)


def build_coefficient_pool(
    chains: Mapping, include_flags: Mapping, included: bool
) -> CoefficientPool:
    """Pool all coefficient draws of the edges whose flag matches ``included``."""
    parts = [
        np.asarray(chains[edge].coefficient_draws()).ravel()
        for edge in sorted(chains)
        if bool(include_flags[edge]) == included
    ]
    label = "p1" if included else "p0"
    if not parts:
        raise ValueError(f"no edges with flag for pool {label}")
    return CoefficientPool(values=np.concatenate(parts), label=label)


def build_coefficient_pools(chains: Mapping, include_flags: Mapping):
    """Both pools: excluded-edge draws first, included-edge draws second."""
    return (
        build_coefficient_pool(chains, include_flags, included=False),
        build_coefficient_pool(chains, include_flags, included=True),
    )


@dataclass(frozen=True)
class SemiSimData:
    """Per-edge datasets with the planted truths behind them."""

    datasets: dict
    truths: dict
    planted: dict  # edge -> bool, whether the truth came from the signal pool


def gen_semi_sim(
    scenario: Scenario,
    pools: tuple,
    real_predictors: Mapping,
    seed: int = 0,
    response_dims: Mapping | None = None,
    included_edges: Sequence | None = None,
    noise_sd: float = 0.1,
) -> SemiSimData:
    """Plant per-edge regression truths drawn from coefficient pools.

    Predictor clouds are taken as given (real data or a surrogate); response
    clouds are their affine images under the planted map plus isotropic
    per-atom noise, one response atom per predictor atom.  The no-edge and
    full-graph scenarios draw every truth entry from the null (p0) or signal
    (p1) pool; the sparse scenario uses ``included_edges`` to mix the two.
    """
    scenario = Scenario(scenario)
    p0, p1 = pools
    if scenario is Scenario.SEMISIM_SPARSE:
        if included_edges is None:
            raise ValueError("sparse scenario needs the set of planted edges")
        included_edges = set(included_edges)
    elif scenario in (Scenario.SEMISIM_NO_EDGE, Scenario.SEMISIM_FULL):
        included_edges = set()
    else:
        raise ValueError(f"scenario {scenario.value} is not a semi-simulation scenario")

    edges = sorted(real_predictors)
    streams = np.random.SeedSequence(seed).spawn(len(edges))
    datasets, truths, planted = {}, {}, {}
    for edge, stream in zip(edges, streams):
        rng = np.random.default_rng(stream)
        source = real_predictors[edge]
        if isinstance(source, DDRDataset):
            predictor_clouds = [f for f, _ in source.pairs]
            d_out = source.d_out
        else:
            predictor_clouds = list(source)
            d_out = None
        d_in = predictor_clouds[0].dim
        if response_dims is not None:
            d_out = int(response_dims[edge])
        elif d_out is None:
            raise ValueError("response_dims required when predictors are bare clouds")
        use_signal = scenario is Scenario.SEMISIM_FULL or (
            scenario is Scenario.SEMISIM_SPARSE and edge in included_edges
        )
        pool = p1 if use_signal else p0
        coef = rng.choice(pool.values, size=(d_out, d_in))
        intercept = rng.choice(pool.values, size=d_out)
        truth = LinearMapParams(coef=coef, intercept=intercept)

        pairs = []
        for predictor in predictor_clouds:
            responses = apply_map(truth, predictor.atoms)
            if noise_sd > 0:
                responses = responses + noise_sd * rng.standard_normal(responses.shape)
            pairs.append((predictor, EmpiricalDistribution(responses)))
        datasets[edge] = DDRDataset(tuple(pairs))
        truths[edge] = truth
        planted[edge] = use_signal
    return SemiSimData(datasets=datasets, truths=truths, planted=planted)


def param_error(estimate: LinearMapParams, truth: LinearMapParams) -> float:
    """Squared parameter error: Frobenius on coefficients plus the intercept gap."""
    if estimate.coef.shape != truth.coef.shape:
        raise ValueError("coefficient shapes do not match")
    if estimate.intercept.shape != truth.intercept.shape:
        raise ValueError("intercept shapes do not match")
    d_coef = estimate.coef - truth.coef
    d_int = estimate.intercept - truth.intercept
    return float(np.sum(d_coef * d_coef) + d_int @ d_int)
