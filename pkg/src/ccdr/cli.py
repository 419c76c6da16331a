"""Command-line interface: simulate, fit, eval, bench.

Every command writes a ``manifest.json`` next to its outputs recording the
command, the full configuration, the seed and RNG algorithm, a fingerprint
of the data it consumed or produced, the package version and wall-clock
timings, so any run can be reproduced exactly.

Exit codes: 0 success, 2 malformed input file, 3 constant data column,
4 invalid configuration.  Set the CCDR_LOG environment variable (DEBUG,
INFO, ...) to see solver progress.
"""

import argparse
import csv
import hashlib
import json
import logging
import math
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .metrics import compare, refit_ols, test_loglik
from .model import Dataset, DegenerateDataError, WeightedDag, bic_score
from .penalty import L1, MCP, PenaltyConfig
from .simulate import RNG_ALGORITHM, SimConfig, random_dag, sample_sem
from .solver import SolverConfig, fit_path

logger = logging.getLogger("ccdr.cli")

EXIT_BAD_INPUT = 2
EXIT_CONSTANT_COLUMN = 3
EXIT_BAD_CONFIG = 4


class CliError(Exception):
    """Failure with a specific process exit code."""

    def __init__(self, code: int, message: str):
        super().__init__(message)
        self.code = code


@dataclass
class RunManifest:
    """Reproducibility record written next to every command's outputs."""

    command: str
    config: dict
    seed: int = None
    dataset: dict = None
    version: str = __version__
    rng: str = RNG_ALGORITHM
    timings: dict = field(default_factory=dict)

    def write(self, path: Path) -> None:
        path.write_text(json.dumps(asdict(self), indent=2, sort_keys=True) + "\n")


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _read_csv_matrix(path) -> np.ndarray:
    """Load a numeric CSV (rows = observations), tolerating one header line."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise CliError(EXIT_BAD_INPUT, f"cannot read {path}: {exc}") from exc
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise CliError(EXIT_BAD_INPUT, f"{path}: empty file")
    skip = 0
    try:
        [float(tok) for tok in lines[0].split(",")]
    except ValueError:
        skip = 1
    try:
        raw = np.loadtxt(lines[skip:], delimiter=",", ndmin=2)
    except ValueError as exc:
        raise CliError(EXIT_BAD_INPUT, f"{path}: malformed CSV ({exc})") from exc
    if not np.all(np.isfinite(raw)):
        raise CliError(EXIT_BAD_INPUT, f"{path}: non-finite values")
    if raw.shape[0] < 2:
        raise CliError(EXIT_BAD_INPUT, f"{path}: need at least 2 rows")
    return raw


def _load_dataset(path, treat_as_numeric: bool) -> Dataset:
    raw = _read_csv_matrix(path)
    if not treat_as_numeric and np.all(raw == np.round(raw)):
        raise CliError(
            EXIT_BAD_CONFIG,
            f"{path}: every value is integer-coded; pass --treat-as-numeric to "
            "acknowledge fitting the Gaussian model to discrete levels",
        )
    try:
        return Dataset.from_raw(raw)
    except DegenerateDataError as exc:
        raise CliError(EXIT_CONSTANT_COLUMN, f"{path}: {exc}") from exc


def _write_edge_list(path: Path, dag: WeightedDag, lam=None) -> None:
    """One line per edge: 'parent child weight' with 1-based node indices."""
    header = f"# p={dag.p}" + ("" if lam is None else f" lambda={lam:.17g}")
    lines = [header]
    for i, j in sorted(dag.edges):
        lines.append(f"{i + 1} {j + 1} {dag.edges[(i, j)]:.17g}")
    path.write_text("\n".join(lines) + "\n")


def _read_edge_list(path) -> WeightedDag:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise CliError(EXIT_BAD_INPUT, f"cannot read {path}: {exc}") from exc
    p = None
    edges = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line:
            continue
        if line.startswith("#"):
            for tok in line[1:].split():
                if tok.startswith("p="):
                    p = int(tok[2:])
            continue
        parts = line.split()
        if len(parts) != 3:
            raise CliError(EXIT_BAD_INPUT, f"{path}:{lineno}: expected 'parent child weight'")
        try:
            i, j, w = int(parts[0]), int(parts[1]), float(parts[2])
        except ValueError as exc:
            raise CliError(EXIT_BAD_INPUT, f"{path}:{lineno}: {exc}") from exc
        edges[(i - 1, j - 1)] = w
    if p is None:
        raise CliError(EXIT_BAD_INPUT, f"{path}: missing '# p=<p>' header")
    try:
        return WeightedDag(p=p, edges=edges, omega2=np.ones(p))
    except ValueError as exc:
        raise CliError(EXIT_BAD_INPUT, f"{path}: not a valid DAG ({exc})") from exc


def _solver_config(args) -> SolverConfig:
    try:
        pen = PenaltyConfig(family=args.penalty, lam=0.0, gamma=args.gamma)
        return SolverConfig(
            penalty=pen,
            epsilon=args.epsilon,
            max_iters=args.max_iters,
            alpha_threshold=args.alpha_threshold,
            n_lambda=args.nlambda,
            lambda_min_ratio=args.lambda_min_ratio,
        )
    except ValueError as exc:
        raise CliError(EXIT_BAD_CONFIG, f"invalid configuration: {exc}") from exc


def _out_dir(args) -> Path:
    out = Path(args.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_simulate(args) -> int:
    started = time.perf_counter()
    try:
        cfg = SimConfig(
            p=args.p,
            expected_edges=args.expected_edges,
            n=args.n,
            weight_range=(args.weight_min, args.weight_max),
            noise_sd=args.noise_sd,
            seed=args.seed,
            random_sign=args.random_sign,
        )
    except ValueError as exc:
        raise CliError(EXIT_BAD_CONFIG, f"invalid configuration: {exc}") from exc
    rng = cfg.rng()
    dag = random_dag(cfg, rng)
    try:
        _, raw = sample_sem(dag, cfg.n, rng)
    except DegenerateDataError as exc:
        raise CliError(EXIT_CONSTANT_COLUMN, str(exc)) from exc

    out = _out_dir(args)
    data_path = out / "data.csv"
    np.savetxt(data_path, raw, delimiter=",", fmt="%.17g")
    truth_path = out / "truth.txt"
    _write_edge_list(truth_path, dag)
    manifest = RunManifest(
        command="simulate",
        config={
            "p": cfg.p,
            "expected_edges": cfg.expected_edges,
            "n": cfg.n,
            "weight_range": list(cfg.weight_range),
            "noise_sd": cfg.noise_sd,
            "random_sign": cfg.random_sign,
        },
        seed=args.seed,
        dataset={"rows": cfg.n, "cols": cfg.p, "sha256": _sha256(data_path)},
        timings={"total_seconds": time.perf_counter() - started},
    )
    manifest.write(out / "manifest.json")
    logger.info("simulate: p=%d n=%d edges=%d seed=%s", cfg.p, cfg.n, dag.edge_count, args.seed)
    print(f"wrote {data_path} ({cfg.n} x {cfg.p}), truth with {dag.edge_count} edges")
    return 0


def cmd_fit(args) -> int:
    started = time.perf_counter()
    cfg = _solver_config(args)
    data = _load_dataset(args.input, args.treat_as_numeric)
    path = fit_path(data, cfg)

    out = _out_dir(args)
    summary_points = []
    for idx, pt in enumerate(path.points):
        fname = f"edges_{idx:03d}.txt"
        _write_edge_list(out / fname, pt.estimate, lam=pt.lam)
        summary_points.append(
            {
                "index": idx,
                "lambda": pt.lam,
                "edge_count": pt.edge_count,
                "objective": pt.objective,
                "sweeps": pt.sweeps_used,
                "converged": pt.converged,
                "seconds": pt.seconds,
                "file": fname,
            }
        )
    summary = {
        "penalty": args.penalty,
        "gamma": args.gamma,
        "halted_early": path.halted_early,
        "points": summary_points,
    }
    (out / "path_summary.json").write_text(json.dumps(summary, indent=2) + "\n")
    manifest = RunManifest(
        command="fit",
        config={
            "input": str(args.input),
            "penalty": args.penalty,
            "gamma": args.gamma,
            "nlambda": args.nlambda,
            "lambda_min_ratio": args.lambda_min_ratio,
            "alpha_threshold": args.alpha_threshold,
            "epsilon": args.epsilon,
            "max_iters": args.max_iters,
            "treat_as_numeric": args.treat_as_numeric,
        },
        seed=None,
        dataset={"rows": data.n, "cols": data.p, "sha256": _sha256(Path(args.input))},
        timings={
            "total_seconds": time.perf_counter() - started,
            "per_lambda_seconds": [pt.seconds for pt in path.points],
        },
    )
    manifest.write(out / "manifest.json")
    logger.info(
        "fit: %d estimates, edge counts %s", len(path.points), [pt.edge_count for pt in path.points]
    )
    print(
        f"wrote {len(path.points)} estimates to {out}"
        + (" (halted early: edge budget exceeded)" if path.halted_early else "")
    )
    return 0


def cmd_eval(args) -> int:
    estimate = _read_edge_list(args.estimate)
    truth = _read_edge_list(args.truth)
    try:
        m = compare(estimate, truth)
    except ValueError as exc:
        raise CliError(EXIT_BAD_CONFIG, str(exc)) from exc
    out = m.as_dict()
    out["test_loglik"] = None
    if args.test_data is not None:
        if args.train_data is None:
            raise CliError(
                EXIT_BAD_CONFIG,
                "--test-data requires --train-data (parameters are refit on training rows)",
            )
        train = _load_dataset(args.train_data, args.treat_as_numeric)
        test = _load_dataset(args.test_data, args.treat_as_numeric)
        try:
            out["test_loglik"] = test_loglik(estimate, train, test)
        except ValueError as exc:
            raise CliError(EXIT_BAD_CONFIG, str(exc)) from exc
    text = json.dumps(out, indent=2)
    print(text)
    if args.output is not None:
        Path(args.output).write_text(text + "\n")
    return 0


def _select_index(path, truth, data, select: str) -> int:
    """Pick one estimate from a solution path.

    oracle-shd: smallest DAG structural Hamming distance to the truth
    (requires the truth; ties keep the sparser, earlier point).
    bic: smallest BIC after a least-squares refit of each point.
    none: the final (densest computed) point.
    """
    if select == "none" or len(path.points) == 1:
        return len(path.points) - 1
    if select == "oracle-shd":
        shds = [compare(pt.estimate, truth).shd_dag for pt in path.points]
        return int(np.argmin(shds))
    if select == "bic":
        scores = []
        for pt in path.points:
            try:
                scores.append(bic_score(refit_ols(pt.estimate, data), data))
            except ValueError:
                scores.append(math.inf)
        return int(np.argmin(scores))
    raise ValueError(f"unknown selection rule {select!r}")


def _bench_task(payload):
    """One benchmark replicate: simulate once, fit and score every penalty."""
    (p, s0_ratio, n, rep, seed_seq, penalties, gamma, select, solver_kwargs) = payload
    rng = np.random.default_rng(seed_seq)
    sim = SimConfig(p=p, expected_edges=s0_ratio * p, n=n)
    truth = random_dag(sim, rng)
    data, _ = sample_sem(truth, n, rng)
    out = {}
    for family in penalties:
        cfg = SolverConfig(penalty=PenaltyConfig(family=family, lam=0.0, gamma=gamma), **solver_kwargs)
        started = time.perf_counter()
        path = fit_path(data, cfg)
        seconds = time.perf_counter() - started
        idx = _select_index(path, truth, data, select)
        m = compare(path.points[idx].estimate, truth)
        out[family] = {
            "T": m.T,
            "P": m.P,
            "TP": m.TP,
            "R": m.R,
            "FP": m.FP,
            "shd_dag": m.shd_dag,
            "shd_skeleton": m.shd_skeleton,
            "fit_seconds": seconds,
            "estimates": len(path.points),
            "selected_index": idx,
        }
    return (p, s0_ratio, n, rep), out


_COUNT_KEYS = ("T", "P", "TP", "R", "FP", "shd_dag", "shd_skeleton")


def _aggregate(cells, p, s0_ratio, n, family, select, replicates) -> dict:
    """Average replicate counts for one grid cell; rates are ratios of means."""
    means = {k: float(np.mean([c[k] for c in cells])) for k in _COUNT_KEYS}
    fit_seconds = float(np.mean([c["fit_seconds"] for c in cells]))
    fit_seconds_max = float(np.max([c["fit_seconds"] for c in cells]))
    estimates = float(np.mean([c["estimates"] for c in cells]))
    row = {
        "p": p,
        "s0_ratio": s0_ratio,
        "n": n,
        "penalty": family,
        "select": select,
        "replicates": replicates,
        **means,
        "tpr": means["TP"] / means["T"] if means["T"] else 0.0,
        "fdr": (means["R"] + means["FP"]) / means["P"] if means["P"] else 0.0,
        "fpr": (means["R"] + means["FP"]) / (p * (p - 1) / 2 - means["T"]),
        "fit_seconds": fit_seconds,
        "fit_seconds_max": fit_seconds_max,
        "seconds_per_estimate": fit_seconds / estimates if estimates else 0.0,
    }
    return row


def run_benchmark_grid(
    ps,
    s0_ratios,
    n_ratios=None,
    n_fixed=None,
    replicates=20,
    penalties=(MCP,),
    gamma=2.0,
    select="oracle-shd",
    seed=0,
    jobs=1,
    **solver_kwargs,
) -> list:
    """Run a (p x s0/p x n x replicate) simulation/estimation/scoring grid.

    Each replicate draws a fresh random DAG and dataset (seeded
    deterministically from ``seed`` regardless of worker count), fits a
    full path per penalty family, selects one estimate by ``select``, and
    scores it against the generating DAG.  Returns one averaged row per
    (p, s0_ratio, n, penalty) cell plus an 'all' summary row per
    (p, penalty); rates in each row are ratios of the averaged counts.
    """
    if (n_ratios is None) == (n_fixed is None):
        raise ValueError("specify exactly one of n_ratios or n_fixed")
    root = np.random.SeedSequence(seed)
    grid = [
        (p, s0r, int(round(nr * p)) if n_fixed is None else int(n_fixed))
        for p in ps
        for s0r in s0_ratios
        for nr in (n_ratios if n_fixed is None else [None])
    ]
    tasks = []
    seeds = root.spawn(len(grid) * replicates)
    for idx, (p, s0r, n) in enumerate(grid):
        for rep in range(replicates):
            tasks.append(
                (p, s0r, n, rep, seeds[idx * replicates + rep], tuple(penalties), gamma, select, solver_kwargs)
            )

    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_bench_task, tasks))
    else:
        results = [_bench_task(t) for t in tasks]

    by_cell = {}
    for (p, s0r, n, _rep), per_family in results:
        for family, counts in per_family.items():
            by_cell.setdefault((p, s0r, n, family), []).append(counts)

    rows = []
    for p, s0r, n in grid:
        for family in penalties:
            cells = by_cell[(p, s0r, n, family)]
            rows.append(_aggregate(cells, p, s0r, n, family, select, replicates))
    # Table-style summary: average over every s0 and n at fixed p (balanced
    # cells, so the mean of cell means is the grand replicate mean).
    for p in ps:
        for family in penalties:
            pooled = [c for (pp, _s, _n, fam), cs in by_cell.items() if pp == p and fam == family for c in cs]
            rows.append(_aggregate(pooled, p, "all", "all", family, select, replicates))
    return rows


_BENCH_COLUMNS = (
    "p", "s0_ratio", "n", "penalty", "select", "replicates",
    "T", "P", "TP", "R", "FP", "shd_dag", "shd_skeleton",
    "tpr", "fdr", "fpr", "fit_seconds", "fit_seconds_max", "seconds_per_estimate",
)


def cmd_bench(args) -> int:
    started = time.perf_counter()
    try:  # validate the shared solver settings early
        for family in args.penalty:
            SolverConfig(
                penalty=PenaltyConfig(family=family, lam=0.0, gamma=args.gamma),
                epsilon=args.epsilon,
                max_iters=args.max_iters,
                alpha_threshold=args.alpha_threshold,
                n_lambda=args.nlambda,
                lambda_min_ratio=args.lambda_min_ratio,
            )
    except ValueError as exc:
        raise CliError(EXIT_BAD_CONFIG, f"invalid configuration: {exc}") from exc
    try:
        rows = run_benchmark_grid(
            ps=args.p,
            s0_ratios=args.s0_ratio,
            n_ratios=args.n_ratio,
            n_fixed=args.n,
            replicates=args.replicates,
            penalties=tuple(args.penalty),
            gamma=args.gamma,
            select=args.select,
            seed=args.seed,
            jobs=args.jobs,
            epsilon=args.epsilon,
            max_iters=args.max_iters,
            alpha_threshold=args.alpha_threshold,
            n_lambda=args.nlambda,
            lambda_min_ratio=args.lambda_min_ratio,
        )
    except ValueError as exc:
        raise CliError(EXIT_BAD_CONFIG, f"invalid configuration: {exc}") from exc

    out = _out_dir(args)
    bench_path = out / "bench.csv"
    with open(bench_path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=_BENCH_COLUMNS)
        writer.writeheader()
        writer.writerows(rows)
    manifest = RunManifest(
        command="bench",
        config={
            "p": list(args.p),
            "s0_ratio": list(args.s0_ratio),
            "n_ratio": args.n_ratio,
            "n": args.n,
            "replicates": args.replicates,
            "penalty": list(args.penalty),
            "gamma": args.gamma,
            "select": args.select,
            "nlambda": args.nlambda,
            "lambda_min_ratio": args.lambda_min_ratio,
            "alpha_threshold": args.alpha_threshold,
            "epsilon": args.epsilon,
            "max_iters": args.max_iters,
            "jobs": args.jobs,
        },
        seed=args.seed,
        dataset=None,
        timings={"total_seconds": time.perf_counter() - started},
    )
    manifest.write(out / "manifest.json")
    for row in rows:
        if row["s0_ratio"] == "all":
            print(
                f"p={row['p']} {row['penalty']}: TP={row['TP']:.2f} FP={row['FP']:.2f} "
                f"tpr={row['tpr']:.3f} fdr={row['fdr']:.3f} shd={row['shd_dag']:.2f}"
            )
    print(f"wrote {bench_path}")
    return 0


def _add_solver_flags(sp, multi_penalty: bool) -> None:
    if multi_penalty:
        sp.add_argument("--penalty", nargs="+", choices=(MCP, L1), default=[MCP],
                        help="penalty families to fit (default: mcp)")
    else:
        sp.add_argument("--penalty", choices=(MCP, L1), default=MCP,
                        help="penalty family (default: mcp)")
    sp.add_argument("--gamma", type=float, default=2.0, help="MCP concavity (default: 2)")
    sp.add_argument("--nlambda", type=int, default=20, help="path length (default: 20)")
    sp.add_argument("--lambda-min-ratio", type=float, default=0.05,
                    help="smallest lambda as a fraction of sqrt(n) (default: 0.05)")
    sp.add_argument("--alpha-threshold", type=float, default=3.0,
                    help="halt once an estimate has more than alpha*p edges (default: 3)")
    sp.add_argument("--epsilon", type=float, default=1e-4, help="sweep convergence tolerance")
    sp.add_argument("--max-iters", type=int, default=None,
                    help="sweep/round budget per lambda (default: max(sqrt(p), 10))")
    sp.add_argument("--treat-as-numeric", action="store_true",
                    help="acknowledge integer-coded (discrete) input columns")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ccdr",
        description="Sparse Gaussian DAG estimation by penalized coordinate descent.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("simulate", help="generate a random DAG and SEM samples")
    sp.add_argument("--p", type=int, required=True, help="number of variables")
    sp.add_argument("--expected-edges", type=float, required=True, help="mean edge count s0")
    sp.add_argument("--n", type=int, required=True, help="number of samples")
    sp.add_argument("--noise-sd", type=float, default=1.0)
    sp.add_argument("--weight-min", type=float, default=0.5)
    sp.add_argument("--weight-max", type=float, default=2.0)
    sp.add_argument("--random-sign", action="store_true", help="random +/- edge weight signs")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--output-dir", required=True)
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("fit", help="estimate a regularization path from a CSV dataset")
    sp.add_argument("--input", required=True, help="CSV of observations (rows) by variables (columns)")
    sp.add_argument("--output-dir", required=True)
    _add_solver_flags(sp, multi_penalty=False)
    sp.set_defaults(func=cmd_fit)

    sp = sub.add_parser("eval", help="score an estimated edge list against a truth edge list")
    sp.add_argument("--estimate", required=True)
    sp.add_argument("--truth", required=True)
    sp.add_argument("--test-data", default=None, help="CSV of held-out rows for test log-likelihood")
    sp.add_argument("--train-data", default=None, help="CSV of training rows used to refit parameters")
    sp.add_argument("--treat-as-numeric", action="store_true")
    sp.add_argument("--output", default=None, help="also write the metrics JSON here")
    sp.set_defaults(func=cmd_eval)

    sp = sub.add_parser("bench", help="run a simulation/estimation/scoring grid")
    sp.add_argument("--p", type=int, nargs="+", required=True)
    sp.add_argument("--s0-ratio", type=float, nargs="+", required=True, help="expected edges per node")
    group = sp.add_mutually_exclusive_group(required=True)
    group.add_argument("--n-ratio", type=float, nargs="+", default=None, help="samples per node")
    group.add_argument("--n", type=int, default=None, help="fixed sample count for every p")
    sp.add_argument("--replicates", type=int, default=20)
    sp.add_argument("--select", choices=("oracle-shd", "bic", "none"), default="oracle-shd")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--jobs", type=int, default=1, help="parallel replicate workers")
    sp.add_argument("--output-dir", required=True)
    _add_solver_flags(sp, multi_penalty=True)
    sp.set_defaults(func=cmd_bench)

    return parser


def main(argv=None) -> int:
    level = os.environ.get("CCDR_LOG", "").upper()
    logging.basicConfig(level=level if level in ("DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL") else "WARNING")
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code


if __name__ == "__main__":
    sys.exit(main())
