"""Regression maps between empirical distributions and the generalized likelihood.

The model pushes each predictor cloud through a parametric map and scores the
fit by the Monte-Carlo sliced squared transport cost against the observed
response cloud.  The negative log generalized likelihood is the loss-weighted
sum of those costs over all pairs; its gradient follows from the envelope
theorem evaluated at the sort-based optimal coupling of each projection.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .ot import (
    EmpiricalDistribution,
    ProjectionSet,
    _batch_cost_sorted,
    northwest_corner_pairs,
)

__all__ = [
    "MapKind",
    "LinearMapParams",
    "DDRDataset",
    "GenLikConfig",
    "HorseshoeState",
    "apply_map",
    "pushforward",
    "sw2_terms",
    "neg_log_gen_likelihood",
    "grad_neg_log_gen_likelihood",
    "log_prior",
    "grad_log_prior",
    "SlicedLikelihood",
    "InterceptLikelihood",
]


class MapKind(str, Enum):
    """Parametric family of the regression map."""

    LINEAR = "linear"
    QUADRATIC = "quadratic"  # elementwise square of the affine image


@dataclass(frozen=True)
class LinearMapParams:
    """Affine map parameters: ``x -> coef @ x + intercept``.

    With ``map_kind=QUADRATIC`` the affine image is squared componentwise.
    """

    coef: np.ndarray  # (d_out, d_in)
    intercept: np.ndarray  # (d_out,)
    map_kind: MapKind = MapKind.LINEAR

    def __post_init__(self):
        coef = np.asarray(self.coef, dtype=np.float64)
        intercept = np.asarray(self.intercept, dtype=np.float64)
        if coef.ndim != 2:
            raise ValueError("coef must be a 2-D (d_out, d_in) matrix")
        if intercept.ndim != 1 or intercept.shape[0] != coef.shape[0]:
            raise ValueError("intercept must be a vector of length d_out")
        if not (np.all(np.isfinite(coef)) and np.all(np.isfinite(intercept))):
            raise ValueError("non-finite map parameter")
        object.__setattr__(self, "coef", coef)
        object.__setattr__(self, "intercept", intercept)
        object.__setattr__(self, "map_kind", MapKind(self.map_kind))

    @property
    def d_in(self) -> int:
        return self.coef.shape[1]

    @property
    def d_out(self) -> int:
        return self.coef.shape[0]

    def flatten(self) -> np.ndarray:
        """Row-major coefficients followed by the intercept."""
        return np.concatenate([self.coef.ravel(), self.intercept])

    @classmethod
    def unflatten(
        cls, vec: np.ndarray, d_out: int, d_in: int, map_kind: MapKind = MapKind.LINEAR
    ) -> "LinearMapParams":
        vec = np.asarray(vec, dtype=np.float64)
        if vec.shape != (d_out * d_in + d_out,):
            raise ValueError("flattened parameter vector has the wrong length")
        return cls(
            coef=vec[: d_out * d_in].reshape(d_out, d_in),
            intercept=vec[d_out * d_in :],
            map_kind=map_kind,
        )

    @classmethod
    def zeros(cls, d_out: int, d_in: int, map_kind: MapKind = MapKind.LINEAR):
        return cls(np.zeros((d_out, d_in)), np.zeros(d_out), map_kind)


@dataclass(frozen=True)
class DDRDataset:
    """Paired predictor/response empirical distributions, one pair per subject."""

    pairs: tuple

    def __post_init__(self):
        pairs = tuple(self.pairs)
        if not pairs:
            raise ValueError("dataset needs at least one pair")
        d_in = pairs[0][0].dim
        d_out = pairs[0][1].dim
        for k, (f, g) in enumerate(pairs):
            if f.dim != d_in or g.dim != d_out:
                raise ValueError(f"pair {k} has inconsistent dimensions")
        object.__setattr__(self, "pairs", pairs)

    @classmethod
    def from_arrays(cls, predictors, responses) -> "DDRDataset":
        if len(predictors) != len(responses):
            raise ValueError("predictor and response lists differ in length")
        return cls(
            tuple(
                (EmpiricalDistribution(x), EmpiricalDistribution(y))
                for x, y in zip(predictors, responses)
            )
        )

    @property
    def n_pairs(self) -> int:
        return len(self.pairs)

    @property
    def d_in(self) -> int:
        return self.pairs[0][0].dim

    @property
    def d_out(self) -> int:
        return self.pairs[0][1].dim

    def subset(self, indices) -> "DDRDataset":
        return DDRDataset(tuple(self.pairs[i] for i in indices))


@dataclass(frozen=True)
class GenLikConfig:
    """Generalized-likelihood settings: loss weight and projection count.

    The transport order is fixed at p=2; the gradient relies on it.
    """

    loss_weight: float
    n_projections: int

    def __post_init__(self):
        if not self.loss_weight > 0:
            raise ValueError("loss_weight must be positive")
        if self.n_projections < 1:
            raise ValueError("need at least one projection")


@dataclass(frozen=True)
class HorseshoeState:
    """Local/global shrinkage scales with their auxiliary variables."""

    lambda_sq: np.ndarray  # (d_out, d_in)
    nu: np.ndarray  # (d_out, d_in)
    tau_sq: float
    zeta: float

    def __post_init__(self):
        lambda_sq = np.asarray(self.lambda_sq, dtype=np.float64)
        nu = np.asarray(self.nu, dtype=np.float64)
        if lambda_sq.shape != nu.shape or lambda_sq.ndim != 2:
            raise ValueError("lambda_sq and nu must be matching 2-D arrays")
        for name, value in (("lambda_sq", lambda_sq), ("nu", nu)):
            if not np.all(np.isfinite(value)) or np.any(value <= 0):
                raise ValueError(f"{name} entries must be positive and finite")
        for name, value in (("tau_sq", self.tau_sq), ("zeta", self.zeta)):
            if not np.isfinite(value) or value <= 0:
                raise ValueError(f"{name} must be positive and finite")
        object.__setattr__(self, "lambda_sq", lambda_sq)
        object.__setattr__(self, "nu", nu)
        object.__setattr__(self, "tau_sq", float(self.tau_sq))
        object.__setattr__(self, "zeta", float(self.zeta))

    @classmethod
    def initial(cls, d_out: int, d_in: int) -> "HorseshoeState":
        ones = np.ones((d_out, d_in))
        return cls(lambda_sq=ones, nu=ones.copy(), tau_sq=1.0, zeta=1.0)


def apply_map(params: LinearMapParams, atoms: np.ndarray) -> np.ndarray:
    """Apply the map row-wise to an (m, d_in) array of atoms."""
    atoms = np.asarray(atoms, dtype=np.float64)
    if atoms.shape[-1] != params.d_in:
        raise ValueError(
            f"dimension mismatch: atoms have d={atoms.shape[-1]}, map expects {params.d_in}"
        )
    out = atoms @ params.coef.T + params.intercept
    if params.map_kind is MapKind.QUADRATIC:
        out = out * out
    return out


def pushforward(params: LinearMapParams, dist: EmpiricalDistribution) -> EmpiricalDistribution:
    """Image distribution: the map applied to every atom, order preserved."""
    return EmpiricalDistribution(apply_map(params, dist.atoms))


def log_prior(params: LinearMapParams, hs: HorseshoeState) -> float:
    """Log prior density of (coef, intercept) up to an additive constant.

    Coefficients are Gaussian with per-entry variance ``lambda_sq * tau_sq``
    and the intercept is standard Gaussian.  Scale-dependent normalizing
    terms are dropped: they cancel in any accept ratio for fixed scales.
    """
    if hs.lambda_sq.shape != params.coef.shape:
        raise ValueError("shrinkage state shape does not match coefficients")
    if np.any(hs.lambda_sq <= 0) or hs.tau_sq <= 0:
        raise ValueError("shrinkage scales must be positive")
    # Divide twice: the product lambda_sq * tau_sq can underflow even when
    # the quotient is representable.
    quad = np.sum(params.coef**2 / hs.lambda_sq / hs.tau_sq)
    return -0.5 * quad - 0.5 * float(params.intercept @ params.intercept)


def grad_log_prior(params: LinearMapParams, hs: HorseshoeState):
    """Gradient of :func:`log_prior` with respect to (coef, intercept)."""
    if hs.lambda_sq.shape != params.coef.shape:
        raise ValueError("shrinkage state shape does not match coefficients")
    return -params.coef / hs.lambda_sq / hs.tau_sq, -params.intercept


def _project_onto(atoms_stack: np.ndarray, directions: np.ndarray) -> np.ndarray:
    # (n, m, d) x (L, d) -> (n, L, m), C-contiguous for the sorts that follow.
    return np.matmul(directions[None, :, :], np.swapaxes(atoms_stack, 1, 2))


class SlicedLikelihood:
    """Reusable evaluator of the sliced squared-cost terms for one dataset.

    Response projections are sorted once at construction; each evaluation
    only projects and sorts the fitted side.  When all pairs share their atom
    counts the evaluation is fully vectorised across pairs and projections.
    """

    # Pair-chunk size keeping the projected block near 2 MB, so sorts and
    # scatters stay cache-resident instead of streaming 30+ MB temporaries.
    _CHUNK_DOUBLES = 1 << 18

    def __init__(self, data: DDRDataset, proj: ProjectionSet):
        if proj.dim != data.d_out:
            raise ValueError(
                f"dimension mismatch: projections have d={proj.dim}, responses d={data.d_out}"
            )
        self.data = data
        self.proj = proj
        self._theta = proj.directions  # (L, d_out)
        m1_sizes = {f.n_atoms for f, _ in data.pairs}
        m2_sizes = {g.n_atoms for _, g in data.pairs}
        self._packed = len(m1_sizes) == 1 and len(m2_sizes) == 1
        if self._packed:
            self._X = np.stack([f.atoms for f, _ in data.pairs])  # (N, m1, d_in)
            responses = np.stack([g.atoms for _, g in data.pairs])
            self._Vs = np.sort(_project_onto(responses, self._theta), axis=-1)
            n_proj, m1 = proj.n_projections, self._X.shape[1]
            self._chunk = min(
                data.n_pairs, max(1, self._CHUNK_DOUBLES // (n_proj * m1))
            )
            self._ubuf = np.empty((self._chunk, n_proj, m1))
        else:
            self._X = [f.atoms for f, _ in data.pairs]
            self._Vs = [
                np.sort(self._theta @ g.atoms.T, axis=-1) for _, g in data.pairs
            ]

    def _check(self, params: LinearMapParams):
        if params.d_in != self.data.d_in or params.d_out != self.data.d_out:
            raise ValueError("map dimensions do not match the dataset")

    def _chunk_project(self, params: LinearMapParams, start: int, stop: int):
        """Project the fitted atoms of pairs [start, stop) into the shared buffer."""
        affine = self._X[start:stop] @ params.coef.T + params.intercept
        fitted = affine * affine if params.map_kind is MapKind.QUADRATIC else affine
        out = self._ubuf[: stop - start]
        np.matmul(self._theta[None, :, :], np.swapaxes(fitted, 1, 2), out=out)
        return out, affine

    def sw2_terms(self, params: LinearMapParams) -> np.ndarray:
        """Per-pair Monte-Carlo sliced squared costs (no loss weight)."""
        self._check(params)
        n_pairs = self.data.n_pairs
        if self._packed:
            m1 = self._X.shape[1]
            m2 = self._Vs.shape[-1]
            terms = np.empty(n_pairs)
            n_proj = self.proj.n_projections
            for start in range(0, n_pairs, self._chunk):
                stop = min(start + self._chunk, n_pairs)
                u, _ = self._chunk_project(params, start, stop)
                u.sort(axis=-1)
                if m1 == m2:
                    np.subtract(u, self._Vs[start:stop], out=u)
                    terms[start:stop] = np.einsum("nlm,nlm->n", u, u) / (m1 * n_proj)
                else:
                    terms[start:stop] = _batch_cost_sorted(
                        u, self._Vs[start:stop], 2
                    ).mean(axis=-1)
            return terms
        terms = np.empty(n_pairs)
        for i, x in enumerate(self._X):
            u_sorted = np.sort(self._theta @ apply_map(params, x).T, axis=-1)
            terms[i] = _batch_cost_sorted(u_sorted, self._Vs[i], 2).mean()
        return terms

    def total(self, params: LinearMapParams) -> float:
        return float(np.sum(self.sw2_terms(params)))

    def total_and_grad(self, params: LinearMapParams):
        """Sum of the per-pair terms and its gradient in (coef, intercept).

        The gradient evaluates the envelope-theorem expression at the
        merged-quantile optimal coupling of every projection; sorting ties
        are broken stably on the original atom index.
        """
        self._check(params)
        if self._packed:
            return self._total_and_grad_packed(params)
        total = 0.0
        d_coef = np.zeros_like(params.coef)
        d_int = np.zeros_like(params.intercept)
        for x, v_sorted in zip(self._X, self._Vs):
            t, dc, di = _pair_total_and_grad(params, x, v_sorted, self._theta)
            total += t
            d_coef += dc
            d_int += di
        return total, d_coef, d_int

    def _total_and_grad_packed(self, params: LinearMapParams):
        theta = self._theta
        n_pairs = self.data.n_pairs
        n_proj = self.proj.n_projections
        m1 = self._X.shape[1]
        m2 = self._Vs.shape[-1]
        quadratic = params.map_kind is MapKind.QUADRATIC

        total = 0.0
        if quadratic:
            d_coef = np.zeros_like(params.coef)
            d_int = np.zeros_like(params.intercept)
        else:
            per_proj = np.zeros((n_proj, params.d_in))
            colsum = np.zeros(n_proj)

        for start in range(0, n_pairs, self._chunk):
            stop = min(start + self._chunk, n_pairs)
            u, affine = self._chunk_project(params, start, stop)
            sorter = np.argsort(u, axis=-1, kind="stable")
            if m1 == m2:
                resid = np.take_along_axis(u, sorter, axis=-1)
                np.subtract(resid, self._Vs[start:stop], out=resid)
                total += float(np.einsum("nlm,nlm->", resid, resid)) / (m1 * n_proj)
                # Route residuals back to the atoms that produced them; u
                # doubles as the scatter buffer once its sorted copy exists.
                np.put_along_axis(u, sorter, resid, axis=-1)
                scatter = u
                scale = 2.0 / m1
            else:
                src, tgt, wts = northwest_corner_pairs(m1, m2)
                u_sorted = np.take_along_axis(u, sorter, axis=-1)
                resid = u_sorted[..., src] - self._Vs[start:stop][..., tgt]
                total += float(((resid * resid) @ wts).sum()) / n_proj
                scatter = np.zeros_like(u)
                np.add.at(
                    scatter,
                    (
                        np.arange(stop - start)[:, None, None],
                        np.arange(n_proj)[None, :, None],
                        sorter[..., src],
                    ),
                    2.0 * wts * resid,
                )
                scale = 1.0
            x_chunk = self._X[start:stop]
            if quadratic:
                d_coef += 2.0 * scale * np.einsum(
                    "nlm,la,nma,nmk->ak", scatter, theta, affine, x_chunk, optimize=True
                )
                d_int += 2.0 * scale * np.einsum(
                    "nlm,la,nma->a", scatter, theta, affine, optimize=True
                )
            else:
                per_proj += scale * np.tensordot(scatter, x_chunk, axes=([0, 2], [0, 1]))
                colsum += scale * scatter.sum(axis=(0, 2))

        if quadratic:
            return total, d_coef / n_proj, d_int / n_proj
        return total, (theta.T @ per_proj) / n_proj, (theta.T @ colsum) / n_proj


def _pair_total_and_grad(params, x, v_sorted, theta):
    """Single-pair term and gradient; mirrors the packed path."""
    affine = x @ params.coef.T + params.intercept  # (m1, d_out)
    fitted = affine * affine if params.map_kind is MapKind.QUADRATIC else affine
    u = (fitted @ theta.T).T  # (L, m1)
    sorter = np.argsort(u, axis=-1, kind="stable")
    u_sorted = np.take_along_axis(u, sorter, axis=-1)

    n_proj, m1 = u.shape
    m2 = v_sorted.shape[-1]
    if m1 == m2:
        resid = u_sorted - v_sorted
        costs = np.mean(resid * resid, axis=-1)
        scatter = np.empty_like(u)
        np.put_along_axis(scatter, sorter, resid, axis=-1)
        scale = 2.0 / m1
    else:
        src, tgt, wts = northwest_corner_pairs(m1, m2)
        resid = u_sorted[..., src] - v_sorted[..., tgt]
        costs = (resid * resid) @ wts
        scatter = np.zeros_like(u)
        np.add.at(
            scatter,
            (np.arange(n_proj)[:, None], sorter[..., src]),
            2.0 * wts * resid,
        )
        scale = 1.0
    total = float(costs.mean())

    factor = scale / n_proj
    if params.map_kind is MapKind.QUADRATIC:
        d_coef = 2.0 * factor * np.einsum(
            "lm,la,ma,mk->ak", scatter, theta, affine, x, optimize=True
        )
        d_int = 2.0 * factor * np.einsum("lm,la,ma->a", scatter, theta, affine)
    else:
        d_coef = factor * (theta.T @ (scatter @ x))
        d_int = factor * (theta.T @ scatter.sum(axis=1))
    return total, d_coef, d_int


class InterceptLikelihood:
    """Closed-form evaluator for intercept-only maps.

    With the coefficient matrix frozen at zero the pushforward is a point
    mass, so every 1-D cost reduces to a mean squared deviation and no
    sorting of the fitted side is needed.
    """

    def __init__(self, data: DDRDataset, proj: ProjectionSet):
        if proj.dim != data.d_out:
            raise ValueError(
                f"dimension mismatch: projections have d={proj.dim}, responses d={data.d_out}"
            )
        self.data = data
        self.proj = proj
        self._theta = proj.directions
        v = [g.atoms @ self._theta.T for _, g in data.pairs]  # (m2, L) each
        self._vbar = np.stack([vi.mean(axis=0) for vi in v])  # (N, L)
        self._v2bar = np.stack([(vi * vi).mean(axis=0) for vi in v])
        self._mean_v2 = self._v2bar.mean(axis=1)  # (N,)

    def _point(self, params: LinearMapParams) -> np.ndarray:
        b = params.intercept
        return b * b if params.map_kind is MapKind.QUADRATIC else b

    def sw2_terms(self, params: LinearMapParams) -> np.ndarray:
        c = self._theta @ self._point(params)  # (L,)
        n_proj = c.shape[0]
        return float(np.mean(c * c)) - (2.0 / n_proj) * (self._vbar @ c) + self._mean_v2

    def total(self, params: LinearMapParams) -> float:
        return float(np.sum(self.sw2_terms(params)))

    def total_and_grad(self, params: LinearMapParams):
        c = self._theta @ self._point(params)
        n_pairs = self.data.n_pairs
        n_proj = c.shape[0]
        total = float(
            n_pairs * np.mean(c * c)
            - (2.0 / n_proj) * float(self._vbar.sum(axis=0) @ c)
            + self._mean_v2.sum()
        )
        resid = (2.0 / n_proj) * (n_pairs * c - self._vbar.sum(axis=0))  # d total / dc
        d_int = self._theta.T @ resid
        if params.map_kind is MapKind.QUADRATIC:
            d_int = 2.0 * params.intercept * d_int
        return total, np.zeros_like(params.coef), d_int

    def sw2_terms_draws(self, intercept_draws: np.ndarray, map_kind: MapKind) -> np.ndarray:
        """Per-pair terms for a whole stack of intercept draws, shape (T, N)."""
        b = np.asarray(intercept_draws, dtype=np.float64)
        points = b * b if map_kind is MapKind.QUADRATIC else b
        c = points @ self._theta.T  # (T, L)
        n_proj = c.shape[1]
        return (
            np.mean(c * c, axis=1)[:, None]
            - (2.0 / n_proj) * (c @ self._vbar.T)
            + self._mean_v2[None, :]
        )


def sw2_terms(
    params: LinearMapParams, data: DDRDataset, proj: ProjectionSet
) -> np.ndarray:
    """Per-pair sliced squared costs between fitted and observed responses."""
    return SlicedLikelihood(data, proj).sw2_terms(params)


def neg_log_gen_likelihood(
    params: LinearMapParams,
    data: DDRDataset,
    cfg: GenLikConfig,
    proj: ProjectionSet,
) -> float:
    """Loss-weighted sum of sliced squared costs over all pairs."""
    _check_projection_count(cfg, proj)
    return cfg.loss_weight * SlicedLikelihood(data, proj).total(params)


def grad_neg_log_gen_likelihood(
    params: LinearMapParams,
    data: DDRDataset,
    cfg: GenLikConfig,
    proj: ProjectionSet,
):
    """Gradient of :func:`neg_log_gen_likelihood` in (coef, intercept)."""
    _check_projection_count(cfg, proj)
    _, d_coef, d_int = SlicedLikelihood(data, proj).total_and_grad(params)
    return cfg.loss_weight * d_coef, cfg.loss_weight * d_int


def _check_projection_count(cfg: GenLikConfig, proj: ProjectionSet):
    if proj.n_projections != cfg.n_projections:
        raise ValueError(
            f"projection set has L={proj.n_projections}, config expects {cfg.n_projections}"
        )
