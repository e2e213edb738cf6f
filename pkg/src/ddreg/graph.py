"""Directed-graph discovery over distribution-valued nodes.

Every ordered node pair gets its own regression fit; an edge is called
present when the posterior probability that its largest absolute coefficient
exceeds a threshold is more than one half.  The threshold is chosen to
minimise the posterior expected false negative rate subject to a bound on
the posterior expected false discovery rate.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .mcmc import Chain, MLRState
from .model import DDRDataset

__all__ = [
    "EdgeKey",
    "EdgeSpec",
    "EdgePosterior",
    "GraphDecision",
    "max_abs_coef_per_draw",
    "epsilon_inclusion_prob",
    "fdr_fnr",
    "select_epsilon",
    "edge_rpe_weights",
    "mlr_inclusion_chain",
    "MlrCoefficientView",
    "weighted_graph_dot",
    "selected_graph_dot",
]

EdgeKey = tuple  # (source, target) node-id pair

# Additive guard shared by both error-rate denominators.
_DENOM_GUARD = 0.001


@dataclass(frozen=True)
class EdgeSpec:
    """One directed edge: node ids plus the paired data that trains its fit."""

    source: str
    target: str
    dataset: DDRDataset

    def __post_init__(self):
        if self.source == self.target:
            raise ValueError("edge endpoints must differ")

    @property
    def key(self) -> EdgeKey:
        return (self.source, self.target)


@dataclass
class EdgePosterior:
    """Fitted and reference chains for one edge with its error summary."""

    chain: Chain
    ref_chain: Chain
    mean_rpe: float
    rpe_interval: tuple

    def __post_init__(self):
        if self.chain.n_draws != self.ref_chain.n_draws:
            raise ValueError("chain length mismatch")


@dataclass
class GraphDecision:
    """Selected threshold with the edge decisions and attained error rates."""

    epsilon: float
    include: dict
    eip: dict
    fdr: float
    fnr: float
    feasible: bool = True


class MlrCoefficientView:
    """Adapter exposing baseline coefficient draws to the inclusion machinery."""

    def __init__(self, coef_draws: np.ndarray):
        self._draws = coef_draws

    def coefficient_draws(self) -> np.ndarray:
        return self._draws


def mlr_inclusion_chain(draws: Sequence[MLRState]) -> MlrCoefficientView:
    """Stack baseline coefficient draws without the intercept row (row 0)."""
    if not draws:
        raise ValueError("empty chain")
    return MlrCoefficientView(np.stack([state.coef[1:, :] for state in draws]))


def max_abs_coef_per_draw(chain) -> np.ndarray:
    """Largest absolute coefficient of each draw, shape (T,)."""
    draws = np.asarray(chain.coefficient_draws(), dtype=np.float64)
    if draws.shape[0] == 0:
        raise ValueError("empty chain")
    return np.max(np.abs(draws.reshape(draws.shape[0], -1)), axis=1)


def epsilon_inclusion_prob(chain, eps: float) -> float:
    """Fraction of draws whose largest absolute coefficient exceeds ``eps``."""
    if eps < 0:
        raise ValueError("threshold must be nonnegative")
    return float(np.mean(max_abs_coef_per_draw(chain) > eps))


def fdr_fnr(eip: Mapping, include: Mapping) -> tuple[float, float]:
    """Posterior expected false discovery and false negative rates.

    Evaluated verbatim: a 0.001 guard in each denominator avoids division by
    zero when nothing (or everything) is selected.
    """
    if set(eip) != set(include):
        raise ValueError("eip and include must cover the same edges")
    n_edges = len(eip)
    selected = sum(bool(include[e]) for e in eip)
    fdr_num = sum((1.0 - eip[e]) for e in eip if include[e])
    fnr_num = sum(eip[e] for e in eip if not include[e])
    fdr = fdr_num / (selected + _DENOM_GUARD)
    fnr = fnr_num / (n_edges - selected + _DENOM_GUARD)
    return fdr, fnr


def _decision_at(sorted_max: Mapping, eps: float):
    eip = {}
    include = {}
    for edge, values in sorted_max.items():
        n = values.shape[0]
        above = n - np.searchsorted(values, eps, side="right")
        p = above / n
        eip[edge] = float(p)
        include[edge] = bool(p > 0.5)
    return eip, include


def select_epsilon(
    chains: Mapping,
    fdr_bound: float = 0.10,
    grid: Sequence[float] | None = None,
) -> GraphDecision:
    """Pick the inclusion threshold by constrained error-rate optimisation.

    For every candidate threshold the edge decisions and both error rates are
    formed; among thresholds whose expected false discovery rate is within
    ``fdr_bound`` the one minimising the expected false negative rate wins,
    ties going to the smallest threshold.  Both error rates self-grade
    against the inclusion probabilities at the candidate itself, which makes
    the extreme thresholds (everything included, or everything excluded once
    every probability hits zero) score a vacuous (0, 0); informative
    thresholds, with at least one edge on each side, are therefore preferred,
    and the trivial ones serve only as a fallback when no informative
    threshold meets the bound.  The default grid is the sorted set of every
    observed per-draw maximum plus zero, over which the objective is exactly
    piecewise constant.  If no threshold at all is feasible the one with the
    smallest discovery rate is reported and flagged.
    """
    if not chains:
        raise ValueError("no edges to decide on")
    sorted_max = {
        edge: np.sort(max_abs_coef_per_draw(chain)) for edge, chain in chains.items()
    }
    if grid is None:
        grid = np.unique(np.concatenate([[0.0]] + list(sorted_max.values())))
    else:
        grid = np.asarray(sorted(grid), dtype=np.float64)
        if grid.size == 0:
            raise ValueError("empty threshold grid")

    n_edges = len(sorted_max)
    best_split = None  # feasible candidates separating the edges, key (fnr, eps)
    best_trivial = None  # feasible all-in / all-out candidates
    fallback = None  # minimal-FDR point if the bound is never met
    for eps in grid:
        eip, include = _decision_at(sorted_max, float(eps))
        fdr, fnr = fdr_fnr(eip, include)
        if fallback is None or fdr < fallback[1]:
            fallback = ((fnr, float(eps)), fdr, float(eps), eip, include)
        if fdr > fdr_bound:
            continue
        key = (fnr, float(eps))
        n_included = sum(include.values())
        if 0 < n_included < n_edges:
            if best_split is None or key < best_split[0]:
                best_split = (key, fdr, float(eps), eip, include)
        else:
            if best_trivial is None or key < best_trivial[0]:
                best_trivial = (key, fdr, float(eps), eip, include)

    chosen = best_split if best_split is not None else best_trivial
    if chosen is not None:
        (fnr, _), fdr, eps, eip, include = chosen
        return GraphDecision(
            epsilon=eps, include=include, eip=eip, fdr=fdr, fnr=fnr, feasible=True
        )
    (fnr, _), fdr, eps, eip, include = fallback
    return GraphDecision(
        epsilon=eps, include=include, eip=eip, fdr=fdr, fnr=fnr, feasible=False
    )


def edge_rpe_weights(
    posteriors: Mapping, kernel_scale: float = 0.2
) -> dict:
    """Exponential-kernel weights for the fully connected error-labelled graph."""
    if kernel_scale <= 0:
        raise ValueError("kernel_scale must be positive")
    return {
        edge: (float(np.exp(-post.mean_rpe / kernel_scale)), post.mean_rpe)
        for edge, post in posteriors.items()
    }


def _edge_nodes(edges) -> list:
    nodes = []
    for source, target in edges:
        for v in (source, target):
            if v not in nodes:
                nodes.append(v)
    return nodes


def weighted_graph_dot(weights: Mapping) -> str:
    """DOT text of the fully connected digraph, edges labelled by mean error."""
    lines = ["digraph weighted {"]
    for node in _edge_nodes(weights):
        lines.append(f'  "{node}";')
    for (source, target), (weight, rpe) in weights.items():
        penwidth = 0.5 + 4.5 * weight
        lines.append(
            f'  "{source}" -> "{target}" [label="{rpe:.3f}", penwidth={penwidth:.2f}];'
        )
    lines.append("}")
    return "\n".join(lines) + "\n"


def selected_graph_dot(decision: GraphDecision) -> str:
    """DOT text of the edges retained by the selected threshold."""
    lines = ["digraph selected {"]
    for node in _edge_nodes(decision.include):
        lines.append(f'  "{node}";')
    for (source, target), included in decision.include.items():
        if included:
            eip = decision.eip[(source, target)]
            lines.append(f'  "{source}" -> "{target}" [label="{eip:.2f}"];')
    lines.append("}")
    return "\n".join(lines) + "\n"
