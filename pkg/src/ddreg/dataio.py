"""Dataset ingestion, standardization, splitting, PCA export, and file formats.

On-disk layout of a dataset directory::

    manifest.json                      {"edges": [{"source", "target", "donors"}], "min_cells"}
    <source>__<target>/<donor>_pred.csv    one row per cell, header row of gene names
    <source>__<target>/<donor>_resp.csv

Generated and real data share this format, so simulation and ingestion feed
one pipeline.  All writes are atomic (temp file + rename).
"""

from __future__ import annotations

import csv
import json
import logging
import math
import os
import tempfile
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .model import DDRDataset
from .ot import EmpiricalDistribution

__all__ = [
    "DonorTable",
    "EdgeTable",
    "Standardizer",
    "SplitResult",
    "PcaResult",
    "atomic_write_text",
    "atomic_write_json",
    "read_matrix_csv",
    "ingest",
    "write_dataset",
    "standardize",
    "split",
    "pca_export",
    "parse_chain_csv",
]

logger = logging.getLogger("ddreg")


@dataclass(frozen=True)
class DonorTable:
    """One donor's cells-by-genes matrix for a single role."""

    donor: str
    role: str  # "pred" or "resp"
    genes: tuple
    values: np.ndarray


@dataclass
class EdgeTable:
    """Everything known about one edge's data: donors, gene panels, pairs."""

    source: str
    target: str
    donors: list
    dataset: DDRDataset
    pred_genes: tuple
    resp_genes: tuple

    @property
    def key(self):
        return (self.source, self.target)


def atomic_write_text(path, text: str, overwrite: bool = True):
    """Write text through a temp file and rename, so readers never see partials."""
    path = Path(path)
    if not overwrite and path.exists():
        raise FileExistsError(f"output collision: {path} already exists")
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def atomic_write_json(path, obj, overwrite: bool = True):
    atomic_write_text(path, json.dumps(obj, indent=2, sort_keys=True) + "\n", overwrite)


def _fmt(value: float) -> str:
    return repr(float(value))


def _matrix_csv_text(genes: Sequence[str], values: np.ndarray) -> str:
    lines = [",".join(genes)]
    for row in np.asarray(values, dtype=np.float64):
        lines.append(",".join(_fmt(v) for v in row))
    return "\n".join(lines) + "\n"


def read_matrix_csv(path) -> DonorTable:
    """Parse a cells-by-genes CSV; raises naming file and line on ragged rows."""
    path = Path(path)
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise ValueError(f"{path}: empty file")
        width = len(header)
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if len(row) != width:
                raise ValueError(
                    f"{path}:{lineno}: ragged row, expected {width} columns, got {len(row)}"
                )
            try:
                rows.append([float(v) for v in row])
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: {exc}") from None
    if not rows:
        raise ValueError(f"{path}: no data rows")
    name = path.stem
    donor, _, role = name.rpartition("_")
    return DonorTable(
        donor=donor, role=role, genes=tuple(header), values=np.asarray(rows, dtype=np.float64)
    )


def edge_dirname(source: str, target: str) -> str:
    for name in (source, target):
        if "__" in name or "/" in name or name != name.strip():
            raise ValueError(f"node id {name!r} not usable as a path component")
    return f"{source}__{target}"


def ingest(root, min_cells: int | None = None) -> dict:
    """Load every edge dataset listed in a directory manifest.

    Donors must clear the minimum cell count in both roles; failing or
    incomplete donors are skipped with a warning.  Returns a mapping from
    ``(source, target)`` to :class:`EdgeTable`.
    """
    root = Path(root)
    manifest_path = root / "manifest.json"
    if not manifest_path.exists():
        raise FileNotFoundError(f"no manifest.json under {root}")
    manifest = json.loads(manifest_path.read_text())
    threshold = int(manifest.get("min_cells", 1)) if min_cells is None else int(min_cells)

    edges: dict = {}
    for entry in manifest["edges"]:
        source, target = entry["source"], entry["target"]
        edge_dir = root / edge_dirname(source, target)
        donors, pairs = [], []
        pred_genes = resp_genes = None
        for donor in entry["donors"]:
            pred_path = edge_dir / f"{donor}_pred.csv"
            resp_path = edge_dir / f"{donor}_resp.csv"
            if not pred_path.exists() or not resp_path.exists():
                logger.warning(
                    "edge %s->%s: donor %s missing a role file, skipped", source, target, donor
                )
                continue
            pred = read_matrix_csv(pred_path)
            resp = read_matrix_csv(resp_path)
            if pred.values.shape[0] < threshold or resp.values.shape[0] < threshold:
                logger.warning(
                    "edge %s->%s: donor %s below min_cells=%d, excluded",
                    source,
                    target,
                    donor,
                    threshold,
                )
                continue
            if pred_genes is None:
                pred_genes, resp_genes = pred.genes, resp.genes
            elif pred.genes != pred_genes or resp.genes != resp_genes:
                raise ValueError(
                    f"edge {source}->{target}: donor {donor} has an inconsistent gene panel"
                )
            donors.append(donor)
            pairs.append(
                (EmpiricalDistribution(pred.values), EmpiricalDistribution(resp.values))
            )
        if not pairs:
            raise ValueError(f"edge {source}->{target}: no usable donors")
        edges[(source, target)] = EdgeTable(
            source=source,
            target=target,
            donors=donors,
            dataset=DDRDataset(tuple(pairs)),
            pred_genes=pred_genes,
            resp_genes=resp_genes,
        )
    return edges


def write_dataset(root, tables: Sequence[EdgeTable], min_cells: int = 1, overwrite: bool = True):
    """Serialize edge tables into the manifest-plus-CSV directory format."""
    root = Path(root)
    manifest = {
        "edges": [
            {"source": t.source, "target": t.target, "donors": list(t.donors)}
            for t in tables
        ],
        "min_cells": int(min_cells),
    }
    for table in tables:
        edge_dir = root / edge_dirname(table.source, table.target)
        for donor, (pred, resp) in zip(table.donors, table.dataset.pairs):
            atomic_write_text(
                edge_dir / f"{donor}_pred.csv",
                _matrix_csv_text(table.pred_genes, pred.atoms),
                overwrite,
            )
            atomic_write_text(
                edge_dir / f"{donor}_resp.csv",
                _matrix_csv_text(table.resp_genes, resp.atoms),
                overwrite,
            )
    atomic_write_json(root / "manifest.json", manifest, overwrite)


@dataclass(frozen=True)
class Standardizer:
    """Per-gene affine transform fitted on pooled training cells."""

    pred_mean: np.ndarray
    pred_sd: np.ndarray
    resp_mean: np.ndarray
    resp_sd: np.ndarray
    pred_genes: tuple
    resp_genes: tuple

    @classmethod
    def fit(
        cls,
        train: DDRDataset,
        pred_genes: Sequence[str] | None = None,
        resp_genes: Sequence[str] | None = None,
    ) -> "Standardizer":
        pred_genes = tuple(
            pred_genes if pred_genes is not None else (f"x{j}" for j in range(train.d_in))
        )
        resp_genes = tuple(
            resp_genes if resp_genes is not None else (f"y{j}" for j in range(train.d_out))
        )
        pred_pool = np.concatenate([f.atoms for f, _ in train.pairs])
        resp_pool = np.concatenate([g.atoms for _, g in train.pairs])
        stats = []
        for pool, genes in ((pred_pool, pred_genes), (resp_pool, resp_genes)):
            mean = pool.mean(axis=0)
            sd = pool.std(axis=0)
            for j, gene in enumerate(genes):
                if sd[j] == 0.0:
                    raise ValueError(f"gene {gene} is constant in the training pool")
            stats.append((mean, sd))
        return cls(
            pred_mean=stats[0][0],
            pred_sd=stats[0][1],
            resp_mean=stats[1][0],
            resp_sd=stats[1][1],
            pred_genes=pred_genes,
            resp_genes=resp_genes,
        )

    def transform(self, dataset: DDRDataset) -> DDRDataset:
        pairs = tuple(
            (
                EmpiricalDistribution((f.atoms - self.pred_mean) / self.pred_sd),
                EmpiricalDistribution((g.atoms - self.resp_mean) / self.resp_sd),
            )
            for f, g in dataset.pairs
        )
        return DDRDataset(pairs)

    def to_dict(self) -> dict:
        return {
            "pred_genes": list(self.pred_genes),
            "resp_genes": list(self.resp_genes),
            "pred_mean": self.pred_mean.tolist(),
            "pred_sd": self.pred_sd.tolist(),
            "resp_mean": self.resp_mean.tolist(),
            "resp_sd": self.resp_sd.tolist(),
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "Standardizer":
        return cls(
            pred_mean=np.asarray(data["pred_mean"], dtype=np.float64),
            pred_sd=np.asarray(data["pred_sd"], dtype=np.float64),
            resp_mean=np.asarray(data["resp_mean"], dtype=np.float64),
            resp_sd=np.asarray(data["resp_sd"], dtype=np.float64),
            pred_genes=tuple(data["pred_genes"]),
            resp_genes=tuple(data["resp_genes"]),
        )


def standardize(
    train: DDRDataset,
    test: DDRDataset | None = None,
    pred_genes: Sequence[str] | None = None,
    resp_genes: Sequence[str] | None = None,
):
    """Fit per-gene statistics on the pooled training cells and apply everywhere.

    The same affine map is applied to the test split, so the transformed test
    pool generally has nonzero mean.  Returns the transformed splits and the
    fitted statistics for persistence.
    """
    stats = Standardizer.fit(train, pred_genes, resp_genes)
    return stats.transform(train), (stats.transform(test) if test is not None else None), stats


@dataclass(frozen=True)
class SplitResult:
    train: DDRDataset
    test: DDRDataset
    train_indices: tuple
    test_indices: tuple


def split(dataset: DDRDataset, train_fraction: float, seed: int) -> SplitResult:
    """Seeded donor shuffle; the first ceil(f*N) donors form the training set."""
    if not 0 < train_fraction < 1:
        raise ValueError("train_fraction must lie strictly between 0 and 1")
    n = dataset.n_pairs
    if n < 2:
        raise ValueError("need at least two pairs to split")
    order = np.random.default_rng(seed).permutation(n)
    n_train = math.ceil(train_fraction * n)
    train_idx = tuple(int(i) for i in order[:n_train])
    test_idx = tuple(int(i) for i in order[n_train:])
    if not test_idx:
        raise ValueError("train_fraction leaves no test pairs")
    return SplitResult(
        train=dataset.subset(train_idx),
        test=dataset.subset(test_idx),
        train_indices=train_idx,
        test_indices=test_idx,
    )


@dataclass(frozen=True)
class PcaResult:
    components: np.ndarray  # (d, k) orthonormal directions
    projected: np.ndarray  # (m, k) projected atoms
    mean: np.ndarray  # (d,) centering vector
    eigenvalues: np.ndarray  # (d,) covariance spectrum, descending


def pca_export(dist: EmpiricalDistribution, k: int = 2) -> PcaResult:
    """Top-k principal directions of the centered atom cloud.

    Signs are fixed so each component's largest-magnitude entry is positive.
    The eigenvalues are those of the (1/m)-normalised covariance, so the mean
    squared reconstruction error of a rank-k projection is the discarded tail.
    """
    if k > dist.dim:
        raise ValueError(f"cannot extract {k} components from d={dist.dim}")
    if dist.n_atoms < 2:
        raise ValueError("need at least two atoms")
    mean = dist.atoms.mean(axis=0)
    centered = dist.atoms - mean
    _, svals, vt = np.linalg.svd(centered, full_matrices=False)
    eigenvalues = np.zeros(dist.dim)
    eigenvalues[: svals.shape[0]] = (svals**2) / dist.n_atoms
    components = vt[:k].T.copy()
    for j in range(k):
        pivot = np.argmax(np.abs(components[:, j]))
        if components[pivot, j] < 0:
            components[:, j] = -components[:, j]
    return PcaResult(
        components=components,
        projected=centered @ components,
        mean=mean,
        eigenvalues=eigenvalues,
    )


def parse_chain_csv(text: str) -> dict:
    """Parse a chain CSV back into column-grouped arrays (inverse of the writer)."""
    lines = [ln for ln in text.strip().splitlines() if ln]
    header = lines[0].split(",")
    raw = np.asarray([[float(v) for v in ln.split(",")] for ln in lines[1:]])
    cols = {name: raw[:, i] for i, name in enumerate(header)}
    coef_names = [h for h in header if h.startswith("A_")]
    d_out = 1 + max(int(h.split("_")[1]) for h in coef_names)
    d_in = 1 + max(int(h.split("_")[2]) for h in coef_names)
    n = raw.shape[0]
    coef = np.empty((n, d_out, d_in))
    for i in range(d_out):
        for j in range(d_in):
            coef[:, i, j] = cols[f"A_{i}_{j}"]
    out = {"iter": cols["iter"].astype(int), "coef": coef, "header": header}
    intercept_names = [h for h in header if h.startswith("b_")]
    if intercept_names:
        out["intercept"] = np.stack(
            [cols[f"b_{i}"] for i in range(len(intercept_names))], axis=1
        )
    if "accepted" in cols:
        out["accepted"] = cols["accepted"].astype(bool)
    return out
