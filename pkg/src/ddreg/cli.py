"""Command-line interface: simulate, fit-ddr, fit-mlr, graph, report.

Every command is reproducible end to end from its inputs and seed; outputs
carry no timestamps, and all files are written atomically.  A config file of
``key=value`` lines can be passed with ``--config``; its entries override the
command-line flags.  The output root defaults to ``$DDREG_OUT`` (or
``./runs``) when ``--out`` is omitted.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np
from scipy.stats import invwishart

from . import dataio, graph, mcmc, sim
from .dataio import EdgeTable, atomic_write_json, atomic_write_text
from .model import DDRDataset, LinearMapParams, MapKind, apply_map
from .ot import EmpiricalDistribution, sample_projections

_ENV_OUT = "DDREG_OUT"


def derive_seed(seed: int, *keys: int) -> int:
    """Deterministic child seed for a named sub-task of a master seed."""
    return int(np.random.SeedSequence([int(seed), *map(int, keys)]).generate_state(1)[0])


# ---------------------------------------------------------------------------
# argument plumbing
# ---------------------------------------------------------------------------


def _add_common(p: argparse.ArgumentParser):
    p.add_argument("--out", type=Path, default=None, help="output directory")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--config", type=Path, default=None, help="key=value file overriding flags")
    p.add_argument("--force", action="store_true", help="overwrite existing outputs")


def _add_fit_options(p: argparse.ArgumentParser):
    p.add_argument("--w", type=float, default=100.0, help="generalized-likelihood loss weight")
    p.add_argument("--eta", type=float, default=1e-4, help="Langevin step size")
    p.add_argument("--n-projections", "--L", dest="n_projections", type=int, default=1000)
    p.add_argument("--n-iter", type=int, default=1000)
    p.add_argument("--burn-in", type=int, default=500)
    p.add_argument(
        "--map", choices=[k.value for k in MapKind], default=MapKind.LINEAR.value
    )
    p.add_argument(
        "--projection-policy",
        choices=[p_.value for p_ in mcmc.ProjectionPolicy],
        default=mcmc.ProjectionPolicy.FIXED_PER_RUN.value,
    )
    p.add_argument(
        "--standardize",
        action="store_true",
        help="standardize per gene using training-pool statistics",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ddreg")
    sub = parser.add_subparsers(dest="command", required=True)

    p_sim = sub.add_parser("simulate", help="generate synthetic datasets")
    p_sim.add_argument("--scenario", required=True, choices=[s.value for s in sim.Scenario])
    p_sim.add_argument("--n", type=int, default=10, help="training pairs (donors) per edge")
    p_sim.add_argument("--n-test", type=int, default=200)
    p_sim.add_argument("--m", type=int, default=100, help="atoms per distribution")
    p_sim.add_argument("--noise-sd", type=float, default=None)
    p_sim.add_argument("--n-nodes", type=int, default=4, help="semi-simulation node count")
    p_sim.add_argument("--n-planted", type=int, default=4, help="sparse scenario planted edges")
    p_sim.add_argument("--pilot-n", type=int, default=30, help="pilot donors for pool fits")
    p_sim.add_argument("--pilot-n-projections", type=int, default=200)
    p_sim.add_argument("--pilot-n-iter", type=int, default=1000)
    p_sim.add_argument("--pilot-burn-in", type=int, default=500)
    _add_common(p_sim)
    p_sim.set_defaults(func=cmd_simulate)

    p_fit = sub.add_parser("fit-ddr", help="fit one edge and its reference model")
    p_fit.add_argument("--data", type=Path, required=True)
    p_fit.add_argument("--edge", nargs=2, metavar=("SOURCE", "TARGET"), default=None)
    _add_fit_options(p_fit)
    _add_common(p_fit)
    p_fit.set_defaults(func=cmd_fit_ddr)

    p_mlr = sub.add_parser("fit-mlr", help="fit the pseudo-bulk baseline on one edge")
    p_mlr.add_argument("--data", type=Path, required=True)
    p_mlr.add_argument("--edge", nargs=2, metavar=("SOURCE", "TARGET"), default=None)
    p_mlr.add_argument("--n-iter", type=int, default=1000)
    p_mlr.add_argument("--burn-in", type=int, default=500)
    p_mlr.add_argument("--standardize", action="store_true")
    _add_common(p_mlr)
    p_mlr.set_defaults(func=cmd_fit_mlr)

    p_graph = sub.add_parser("graph", help="fit every edge and select the graph")
    p_graph.add_argument("--data", type=Path, required=True)
    p_graph.add_argument("--model", choices=["ddr", "mlr"], default="ddr")
    p_graph.add_argument("--fdr-bound", type=float, default=0.10)
    p_graph.add_argument("--kernel-scale", type=float, default=0.2)
    p_graph.add_argument("--jobs", type=int, default=1, help="parallel edge fits")
    _add_fit_options(p_graph)
    _add_common(p_graph)
    p_graph.set_defaults(func=cmd_graph)

    p_rep = sub.add_parser("report", help="aggregate runs and export figure data")
    p_rep.add_argument("--runs", nargs="+", type=Path, required=True)
    p_rep.add_argument("--data", type=Path, default=None, help="dataset for fitted-atom dumps")
    p_rep.add_argument("--n-dump-draws", type=int, default=25)
    _add_common(p_rep)
    p_rep.set_defaults(func=cmd_report)

    return parser


def _parse_config_scalar(raw: str):
    text = raw.strip()
    lowered = text.lower()
    if lowered in ("true", "false"):
        return lowered == "true"
    for cast in (int, float):
        try:
            return cast(text)
        except ValueError:
            continue
    return text


def apply_config_overrides(args: argparse.Namespace):
    """Apply ``key=value`` lines from ``--config``; file entries win over flags."""
    if getattr(args, "config", None) is None:
        return
    path = Path(args.config)
    if not path.exists():
        raise FileNotFoundError(f"config file {path} not found")
    for lineno, line in enumerate(path.read_text().splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected key=value")
        key, raw = line.split("=", 1)
        attr = key.strip().replace("-", "_")
        if not hasattr(args, attr):
            raise ValueError(f"{path}:{lineno}: unknown option {key.strip()!r}")
        setattr(args, attr, _parse_config_scalar(raw))


def _out_dir(args, command: str) -> Path:
    if args.out is not None:
        return Path(args.out)
    return Path(os.environ.get(_ENV_OUT, "runs")) / command


# ---------------------------------------------------------------------------
# dataset helpers
# ---------------------------------------------------------------------------


def _resolve_data(path: Path):
    """Return (train_root, test_root or None) for a dataset directory."""
    path = Path(path)
    if (path / "manifest.json").exists():
        return path, None
    if (path / "train" / "manifest.json").exists():
        test = path / "test"
        return path / "train", (test if (test / "manifest.json").exists() else None)
    raise FileNotFoundError(f"no dataset manifest under {path}")


def _single_edge(tables: dict, edge) -> EdgeTable:
    if edge is not None:
        key = (edge[0], edge[1])
        if key not in tables:
            raise ValueError(f"edge {key[0]}->{key[1]} not present in the dataset")
        return tables[key]
    if len(tables) != 1:
        raise ValueError("dataset has several edges; pass --edge SOURCE TARGET")
    return next(iter(tables.values()))


def _sim_edge_table(source, target, pairs, donor_prefix="d") -> EdgeTable:
    donors = [f"{donor_prefix}{i:04d}" for i in range(len(pairs))]
    dataset = DDRDataset(tuple(pairs))
    return EdgeTable(
        source=source,
        target=target,
        donors=donors,
        dataset=dataset,
        pred_genes=tuple(f"x{j}" for j in range(dataset.d_in)),
        resp_genes=tuple(f"y{j}" for j in range(dataset.d_out)),
    )


def _truth_dict(truth: LinearMapParams) -> dict:
    return {
        "coef": truth.coef.tolist(),
        "intercept": truth.intercept.tolist(),
        "map_kind": truth.map_kind.value,
    }


# ---------------------------------------------------------------------------
# simulate
# ---------------------------------------------------------------------------


def build_pilot_pools(
    seed: int,
    n_pairs: int = 30,
    n_atoms: int = 60,
    n_projections: int = 200,
    loss_weight: float = 100.0,
    step_size: float = 1e-4,
    n_iter: int = 1000,
    burn_in: int = 500,
):
    """Coefficient pools from two pilot fits: one planted edge, one null edge.

    Stand-in for pools built from a full real-data analysis: the signal pool
    collects posterior coefficient draws of a genuinely linked pair, the null
    pool those of a pair whose responses ignore the predictors.
    """
    cfg = mcmc.MalaConfig(
        step_size=step_size,
        loss_weight=loss_weight,
        n_projections=n_projections,
        n_iter=n_iter,
        burn_in=burn_in,
        seed=derive_seed(seed, 101),
    )
    signal = sim.gen_scenario(
        sim.ScenarioConfig(
            scenario=sim.Scenario.GAUSS1,
            n_pairs=n_pairs,
            n_atoms=n_atoms,
            seed=derive_seed(seed, 102),
            n_test=0,
        )
    )
    null_truth = LinearMapParams(np.zeros((2, 2)), np.array([1.0, 1.0]))
    null = sim.gen_scenario(
        sim.ScenarioConfig(
            scenario=sim.Scenario.GAUSS1,
            n_pairs=n_pairs,
            n_atoms=n_atoms,
            seed=derive_seed(seed, 103),
            truth=null_truth,
            n_test=0,
        )
    )
    chains = {
        ("pilot", "signal"): mcmc.run_ddr_chain(signal.train, cfg),
        ("pilot", "null"): mcmc.run_ddr_chain(
            null.train,
            mcmc.MalaConfig(
                step_size=step_size,
                loss_weight=loss_weight,
                n_projections=n_projections,
                n_iter=n_iter,
                burn_in=burn_in,
                seed=derive_seed(seed, 104),
            ),
        ),
    }
    flags = {("pilot", "signal"): True, ("pilot", "null"): False}
    return sim.build_coefficient_pools(chains, flags)


def _semi_sim_nodes(n_nodes: int):
    names = [f"n{i}" for i in range(n_nodes)]
    dims = {name: 2 + (i % 2) for i, name in enumerate(names)}
    return names, dims


def _semi_sim_predictors(nodes, dims, n_pairs, n_atoms, seed):
    """Per-node donor clouds reused by every edge leaving that node."""
    clouds = {}
    for idx, node in enumerate(nodes):
        d = dims[node]
        streams = np.random.SeedSequence([seed, 7000 + idx]).spawn(n_pairs)
        donor_clouds = []
        for s in streams:
            rng = np.random.default_rng(s)
            mean = 2.0 * rng.standard_normal(d)
            cov = invwishart.rvs(df=d + 4, scale=np.eye(d), random_state=rng)
            donor_clouds.append(
                EmpiricalDistribution(
                    rng.multivariate_normal(
                        mean, np.atleast_2d(cov), size=n_atoms, method="cholesky"
                    )
                )
            )
        clouds[node] = donor_clouds
    return clouds


def cmd_simulate(args) -> int:
    out = _out_dir(args, "simulate")
    scenario = sim.Scenario(args.scenario)
    if scenario in (sim.Scenario.GAUSS1, sim.Scenario.MIXTURE2, sim.Scenario.QUADRATIC):
        cfg = sim.ScenarioConfig(
            scenario=scenario,
            n_pairs=args.n,
            n_atoms=args.m,
            seed=args.seed,
            noise_sd=args.noise_sd,
            n_test=args.n_test,
        )
        data = sim.gen_scenario(cfg)
        dataio.write_dataset(
            out / "train", [_sim_edge_table("X", "Y", data.train.pairs)], overwrite=args.force
        )
        if data.test is not None:
            dataio.write_dataset(
                out / "test", [_sim_edge_table("X", "Y", data.test.pairs)], overwrite=args.force
            )
        atomic_write_json(
            out / "truth.json",
            {
                "scenario": scenario.value,
                "seed": args.seed,
                "n": args.n,
                "n_test": args.n_test,
                "m": args.m,
                "noise_sd": cfg.resolved_noise_sd(),
                "truth": _truth_dict(data.truth),
            },
            overwrite=args.force,
        )
    else:
        nodes, dims = _semi_sim_nodes(args.n_nodes)
        edges = [(a, b) for a in nodes for b in nodes if a != b]
        clouds = _semi_sim_predictors(nodes, dims, args.n, args.m, derive_seed(args.seed, 1))
        predictors = {e: clouds[e[0]] for e in edges}
        response_dims = {e: dims[e[1]] for e in edges}
        pools = build_pilot_pools(
            derive_seed(args.seed, 2),
            n_atoms=args.m,
            n_pairs=args.pilot_n,
            n_projections=args.pilot_n_projections,
            n_iter=args.pilot_n_iter,
            burn_in=args.pilot_burn_in,
        )
        planted = None
        if scenario is sim.Scenario.SEMISIM_SPARSE:
            rng = np.random.default_rng(derive_seed(args.seed, 3))
            chosen = rng.choice(len(edges), size=min(args.n_planted, len(edges)), replace=False)
            planted = [edges[i] for i in sorted(chosen)]
        semi = sim.gen_semi_sim(
            scenario,
            pools,
            predictors,
            seed=derive_seed(args.seed, 4),
            response_dims=response_dims,
            included_edges=planted,
        )
        tables = [
            EdgeTable(
                source=e[0],
                target=e[1],
                donors=[f"d{i:04d}" for i in range(args.n)],
                dataset=semi.datasets[e],
                pred_genes=tuple(f"x{j}" for j in range(dims[e[0]])),
                resp_genes=tuple(f"y{j}" for j in range(dims[e[1]])),
            )
            for e in edges
        ]
        dataio.write_dataset(out / "train", tables, overwrite=args.force)
        atomic_write_json(
            out / "truth.json",
            {
                "scenario": scenario.value,
                "seed": args.seed,
                "n": args.n,
                "m": args.m,
                "nodes": {k: dims[k] for k in nodes},
                "planted_edges": sorted(
                    [list(e) for e, flag in semi.planted.items() if flag]
                ),
                "truths": {
                    f"{e[0]}__{e[1]}": _truth_dict(t) for e, t in semi.truths.items()
                },
                "pool_sizes": {"p0": int(pools[0].values.size), "p1": int(pools[1].values.size)},
            },
            overwrite=args.force,
        )
    print(f"wrote {out}")
    return 0


# ---------------------------------------------------------------------------
# fitting
# ---------------------------------------------------------------------------


def _mala_config(args, seed) -> mcmc.MalaConfig:
    return mcmc.MalaConfig(
        step_size=args.eta,
        loss_weight=args.w,
        n_projections=args.n_projections,
        n_iter=args.n_iter,
        burn_in=args.burn_in,
        seed=seed,
        projection_policy=mcmc.ProjectionPolicy(args.projection_policy),
    )


def fit_edge(
    train: DDRDataset,
    cfg: mcmc.MalaConfig,
    map_kind: MapKind = MapKind.LINEAR,
    test: DDRDataset | None = None,
):
    """Fitted chain, intercept-only reference chain, and RPE summaries."""
    chain = mcmc.run_ddr_chain(train, cfg, map_kind=map_kind)
    ref_cfg = mcmc.MalaConfig(
        step_size=cfg.step_size,
        loss_weight=cfg.loss_weight,
        n_projections=cfg.n_projections,
        n_iter=cfg.n_iter,
        burn_in=cfg.burn_in,
        seed=derive_seed(cfg.seed, 9),
        projection_policy=cfg.projection_policy,
    )
    ref_chain = mcmc.run_reference_chain(train, ref_cfg, map_kind=map_kind)
    gen_cfg = cfg.gen_lik()
    proj = sample_projections(cfg.n_projections, train.d_out, chain.projection_seed)
    rpe = mcmc.mean_rpe(chain, ref_chain, train, gen_cfg, proj)
    rpe_test = (
        mcmc.mean_rpe(chain, ref_chain, test, gen_cfg, proj) if test is not None else None
    )
    return chain, ref_chain, rpe, rpe_test


def _rpe_draws_csv(rpe, rpe_test) -> str:
    header = ["draw", "rpe"] + (["rpe_test"] if rpe_test is not None else [])
    lines = [",".join(header)]
    for t in range(rpe.per_draw.shape[0]):
        row = [str(t), repr(float(rpe.per_draw[t]))]
        if rpe_test is not None:
            row.append(repr(float(rpe_test.per_draw[t])))
        lines.append(",".join(row))
    return "\n".join(lines) + "\n"


def cmd_fit_ddr(args) -> int:
    out = _out_dir(args, "fit-ddr")
    train_root, test_root = _resolve_data(args.data)
    table = _single_edge(dataio.ingest(train_root), args.edge)
    train = table.dataset
    test = None
    if test_root is not None:
        test_tables = dataio.ingest(test_root)
        if table.key in test_tables:
            test = test_tables[table.key].dataset
    if args.standardize:
        train, test, stats = dataio.standardize(
            train, test, table.pred_genes, table.resp_genes
        )
        atomic_write_json(out / "standardizer.json", stats.to_dict(), overwrite=args.force)

    cfg = _mala_config(args, args.seed)
    map_kind = MapKind(args.map)
    chain, ref_chain, rpe, rpe_test = fit_edge(train, cfg, map_kind, test)

    atomic_write_text(out / "chain.csv", mcmc.chain_csv_text(chain), overwrite=args.force)
    atomic_write_text(
        out / "ref_chain.csv", mcmc.chain_csv_text(ref_chain), overwrite=args.force
    )
    atomic_write_text(
        out / "rpe_draws.csv", _rpe_draws_csv(rpe, rpe_test), overwrite=args.force
    )
    summary = {
        "edge": [table.source, table.target],
        "mean_rpe": rpe.mean,
        "rpe_ci": list(rpe.interval),
        "accept_rate": chain.accept_rate,
        "ref_accept_rate": ref_chain.accept_rate,
        "posterior": mcmc.chain_summary(chain).as_dict(),
    }
    if rpe_test is not None:
        summary["mean_rpe_test"] = rpe_test.mean
        summary["rpe_ci_test"] = list(rpe_test.interval)
    atomic_write_json(out / "summary.json", summary, overwrite=args.force)
    atomic_write_json(
        out / "manifest.json",
        {"chain": mcmc.chain_manifest(chain), "ref_chain": mcmc.chain_manifest(ref_chain)},
        overwrite=args.force,
    )
    print(f"wrote {out}")
    return 0


def _edge_means(dataset: DDRDataset):
    xbar = np.stack([f.atoms.mean(axis=0) for f, _ in dataset.pairs])
    ybar = np.stack([g.atoms.mean(axis=0) for _, g in dataset.pairs])
    design = np.concatenate([np.ones((xbar.shape[0], 1)), xbar], axis=1)
    return design, ybar


def cmd_fit_mlr(args) -> int:
    out = _out_dir(args, "fit-mlr")
    train_root, _ = _resolve_data(args.data)
    table = _single_edge(dataio.ingest(train_root), args.edge)
    train = table.dataset
    if args.standardize:
        train, _, stats = dataio.standardize(train, None, table.pred_genes, table.resp_genes)
        atomic_write_json(out / "standardizer.json", stats.to_dict(), overwrite=args.force)
    design, ybar = _edge_means(train)
    draws = mcmc.run_mlr_chain(
        design, ybar, n_iter=args.n_iter, burn_in=args.burn_in, seed=args.seed
    )
    atomic_write_text(out / "mlr_chain.csv", mcmc.mlr_chain_csv_text(draws), overwrite=args.force)
    coef = np.stack([d.coef for d in draws])
    summary = {
        "edge": [table.source, table.target],
        "n_draws": len(draws),
        "coef_mean": coef.mean(axis=0).tolist(),
        "coef_interval": np.quantile(coef, (0.025, 0.975), axis=0).tolist(),
    }
    atomic_write_json(out / "summary.json", summary, overwrite=args.force)
    print(f"wrote {out}")
    return 0


def _graph_edge_task(payload):
    key, dataset, cfg, map_kind = payload
    chain, ref_chain, rpe, _ = fit_edge(dataset, cfg, map_kind)
    return key, chain, ref_chain, rpe


def cmd_graph(args) -> int:
    out = _out_dir(args, "graph")
    train_root, _ = _resolve_data(args.data)
    tables = dataio.ingest(train_root)
    keys = sorted(tables)
    map_kind = MapKind(args.map)

    datasets = {}
    for key in keys:
        dataset = tables[key].dataset
        if args.standardize:
            dataset, _, _ = dataio.standardize(
                dataset, None, tables[key].pred_genes, tables[key].resp_genes
            )
        datasets[key] = dataset

    nodes = sorted({v for key in keys for v in key})
    report_edges = {}
    if args.model == "mlr":
        chains = {}
        for idx, key in enumerate(keys):
            design, ybar = _edge_means(datasets[key])
            draws = mcmc.run_mlr_chain(
                design,
                ybar,
                n_iter=args.n_iter,
                burn_in=args.burn_in,
                seed=derive_seed(args.seed, idx),
            )
            chains[key] = graph.mlr_inclusion_chain(draws)
            report_edges[key] = {}
        weights = None
    else:
        payloads = [
            (key, datasets[key], _mala_config(args, derive_seed(args.seed, idx)), map_kind)
            for idx, key in enumerate(keys)
        ]
        if args.jobs > 1:
            with ProcessPoolExecutor(max_workers=args.jobs) as pool:
                results = list(pool.map(_graph_edge_task, payloads))
        else:
            results = [_graph_edge_task(p) for p in payloads]
        chains = {}
        posteriors = {}
        for key, chain, ref_chain, rpe in results:
            chains[key] = chain
            posteriors[key] = graph.EdgePosterior(
                chain=chain, ref_chain=ref_chain, mean_rpe=rpe.mean, rpe_interval=rpe.interval
            )
            edge_dir = out / "edges" / dataio.edge_dirname(*key)
            atomic_write_text(
                edge_dir / "chain.csv", mcmc.chain_csv_text(chain), overwrite=args.force
            )
            atomic_write_text(
                edge_dir / "ref_chain.csv",
                mcmc.chain_csv_text(ref_chain),
                overwrite=args.force,
            )
        weights = graph.edge_rpe_weights(posteriors, kernel_scale=args.kernel_scale)
        for key in keys:
            report_edges[key] = {
                "mean_rpe": posteriors[key].mean_rpe,
                "rpe_ci": list(posteriors[key].rpe_interval),
                "weight": weights[key][0],
            }

    decision = graph.select_epsilon(chains, fdr_bound=args.fdr_bound)
    for key in keys:
        report_edges[key]["eip_at_selected_eps"] = decision.eip[key]
        report_edges[key]["included"] = decision.include[key]

    report = {
        "nodes": nodes,
        "model": args.model,
        "epsilon": decision.epsilon,
        "fdr": decision.fdr,
        "fnr": decision.fnr,
        "feasible": decision.feasible,
        "fdr_bound": args.fdr_bound,
        "edges": {f"{k[0]}__{k[1]}": v for k, v in report_edges.items()},
        "config": {
            "w": args.w,
            "eta": args.eta,
            "n_projections": args.n_projections,
            "n_iter": args.n_iter,
            "burn_in": args.burn_in,
            "seed": args.seed,
            "map": map_kind.value,
            "standardize": bool(args.standardize),
        },
    }
    atomic_write_json(out / "graph.json", report, overwrite=args.force)
    if weights is not None:
        atomic_write_text(
            out / "weighted.dot", graph.weighted_graph_dot(weights), overwrite=args.force
        )
    atomic_write_text(
        out / "selected.dot", graph.selected_graph_dot(decision), overwrite=args.force
    )
    included = sorted(k for k, v in decision.include.items() if v)
    print(
        f"selected epsilon={decision.epsilon:.6g} fdr={decision.fdr:.4f} "
        f"fnr={decision.fnr:.4f} edges={included}"
    )
    return 0


# ---------------------------------------------------------------------------
# report
# ---------------------------------------------------------------------------


def _coeff_long_csv(run_name: str, parsed: dict) -> list:
    rows = []
    coef = parsed["coef"]
    n, d_out, d_in = coef.shape
    for t in range(n):
        for i in range(d_out):
            for j in range(d_in):
                rows.append(f"{run_name},{t},A_{i}_{j},{coef[t, i, j]!r}")
    return rows


def cmd_report(args) -> int:
    out = _out_dir(args, "report")
    aggregate = {}
    rpe_rows = ["run,draw,rpe"]
    coeff_rows = ["run,draw,entry,value"]
    for run in args.runs:
        run = Path(run)
        name = run.name
        for candidate in ("summary.json", "graph.json"):
            path = run / candidate
            if path.exists():
                aggregate[name] = json.loads(path.read_text())
                break
        else:
            raise FileNotFoundError(f"no summary.json or graph.json under {run}")
        rpe_path = run / "rpe_draws.csv"
        if rpe_path.exists():
            for line in rpe_path.read_text().strip().splitlines()[1:]:
                draw, rpe, *_ = line.split(",")
                rpe_rows.append(f"{name},{draw},{rpe}")
        chain_path = run / "chain.csv"
        if chain_path.exists():
            coeff_rows.extend(_coeff_long_csv(name, dataio.parse_chain_csv(chain_path.read_text())))

    atomic_write_json(out / "report.json", aggregate, overwrite=args.force)
    atomic_write_text(out / "rpe_box.csv", "\n".join(rpe_rows) + "\n", overwrite=args.force)
    atomic_write_text(out / "coeff_box.csv", "\n".join(coeff_rows) + "\n", overwrite=args.force)

    if args.data is not None:
        _dump_fitted_atoms(args, out)
    print(f"wrote {out}")
    return 0


def _dump_fitted_atoms(args, out: Path):
    """PCA-projected observed and fitted atoms for evenly spaced posterior draws."""
    train_root, _ = _resolve_data(args.data)
    table = _single_edge(dataio.ingest(train_root), None)
    run = next((Path(r) for r in args.runs if (Path(r) / "chain.csv").exists()), None)
    if run is None:
        raise FileNotFoundError("fitted-atom dump requested but no run has a chain.csv")
    parsed = dataio.parse_chain_csv((run / "chain.csv").read_text())
    manifest = json.loads((run / "manifest.json").read_text())
    map_kind = MapKind(manifest["chain"]["map_kind"])
    std_path = run / "standardizer.json"
    dataset = table.dataset
    if std_path.exists():
        stats = dataio.Standardizer.from_dict(json.loads(std_path.read_text()))
        dataset = stats.transform(dataset)

    n_draws = parsed["coef"].shape[0]
    picks = np.unique(np.linspace(0, n_draws - 1, args.n_dump_draws).round().astype(int))
    observed_rows = ["donor,atom,pc1,pc2"]
    fitted_rows = ["donor,draw,atom,pc1,pc2"]
    for donor, (pred, resp) in zip(table.donors, dataset.pairs):
        pca = dataio.pca_export(resp, k=min(2, resp.dim))
        proj_obs = pca.projected
        for a in range(proj_obs.shape[0]):
            pc2 = proj_obs[a, 1] if proj_obs.shape[1] > 1 else 0.0
            observed_rows.append(f"{donor},{a},{proj_obs[a, 0]!r},{pc2!r}")
        for t in picks:
            params = LinearMapParams(parsed["coef"][t], parsed["intercept"][t], map_kind)
            fitted = (apply_map(params, pred.atoms) - pca.mean) @ pca.components
            for a in range(fitted.shape[0]):
                pc2 = fitted[a, 1] if fitted.shape[1] > 1 else 0.0
                fitted_rows.append(f"{donor},{t},{a},{fitted[a, 0]!r},{pc2!r}")
    atomic_write_text(out / "observed_atoms.csv", "\n".join(observed_rows) + "\n", overwrite=args.force)
    atomic_write_text(out / "fitted_atoms.csv", "\n".join(fitted_rows) + "\n", overwrite=args.force)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        apply_config_overrides(args)
        return args.func(args)
    except (ValueError, FileNotFoundError, FileExistsError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
