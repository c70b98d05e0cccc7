"""End-to-end pipeline driver and metrics reporter.

Subcommands: ingest, synth, pscs, split, encode, solve, audit, metrics,
pipeline. The pipeline chains dataset -> candidate search -> split
optimization -> encoding -> solve -> audit -> metrics, persisting every
stage artifact under a run directory with a manifest.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from dataclasses import dataclass, replace
from pathlib import Path

from .data import Dataset, IngestConfig, SyntheticSpec, generate_synthetic, ingest_csv
from .encoder import (
    Encoding,
    PenaltyWeights,
    SplitPlan,
    encode_basic,
    encode_split,
    optimize_split_plan,
)
from .pscs import CandidateList, SearchLimits, run_pscs_all
from .qubo import Qubo
from .reporting import metrics_rows, render_metrics_figures, write_metrics_csv
from .solver import SolveResult, solve_anneal, solve_exhaustive
from .verify import AuditReport, audit


class PipelineStageError(RuntimeError):
    """Wraps a failure with the pipeline stage it occurred in."""

    def __init__(self, stage: str, cause: BaseException):
        super().__init__(f"stage {stage!r} failed: {cause}")
        self.stage = stage
        self.cause = cause


@dataclass(frozen=True)
class PipelineConfig:
    """Validated run recipe; round-trips losslessly through JSON."""

    outdir: str = "run"
    input_csv: str | None = None
    synthetic: SyntheticSpec | None = SyntheticSpec(num_variables=4, num_rows=500)
    bins: int = 3
    max_states: int = 4
    threshold: float = 0.05
    budget: int = 2
    margin: float = 0.1
    encoding: str = "split"
    solver: str = "auto"
    sweeps: int = 1500
    restarts: int = 20
    seed: int = 0
    max_trainings: int = 20000
    max_train_seconds: float = 300.0
    exhaustive_cap: int = 24
    oracle_cap: int = 2_000_000
    metrics_budgets: tuple[int, ...] = (0, 1, 2)
    figures: bool = True
    jobs: int = 1

    def __post_init__(self) -> None:
        if (self.input_csv is None) == (self.synthetic is None):
            raise ValueError("exactly one of input_csv or synthetic must be set")
        if not self.threshold > 0:
            raise ValueError("threshold must be positive (infinity allowed)")
        if self.budget < 0:
            raise ValueError("budget must be non-negative")
        if not self.margin > 0:
            raise ValueError("margin must be positive")
        if self.encoding not in ("basic", "split"):
            raise ValueError("encoding must be 'basic' or 'split'")
        if self.solver not in ("auto", "exhaustive", "anneal"):
            raise ValueError("solver must be auto, exhaustive, or anneal")
        for name in ("bins", "max_states"):
            if getattr(self, name) < 2:
                raise ValueError(f"{name} must be at least 2")
        for name in ("sweeps", "restarts", "max_trainings", "exhaustive_cap", "oracle_cap", "jobs"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be at least 1")
        if not self.max_train_seconds > 0:
            raise ValueError("max_train_seconds must be positive")
        if any(k < 0 for k in self.metrics_budgets):
            raise ValueError("metrics budgets must be non-negative")

    def to_json_dict(self) -> dict:
        return {
            "outdir": self.outdir,
            "input_csv": self.input_csv,
            "synthetic": None if self.synthetic is None else self.synthetic.to_json_dict(),
            "bins": self.bins,
            "max_states": self.max_states,
            "threshold": self.threshold,
            "budget": self.budget,
            "margin": self.margin,
            "encoding": self.encoding,
            "solver": self.solver,
            "sweeps": self.sweeps,
            "restarts": self.restarts,
            "seed": self.seed,
            "max_trainings": self.max_trainings,
            "max_train_seconds": self.max_train_seconds,
            "exhaustive_cap": self.exhaustive_cap,
            "oracle_cap": self.oracle_cap,
            "metrics_budgets": list(self.metrics_budgets),
            "figures": self.figures,
            "jobs": self.jobs,
        }

    @classmethod
    def from_json_dict(cls, obj: dict) -> "PipelineConfig":
        known = {f: obj[f] for f in obj}
        if known.get("synthetic") is not None:
            known["synthetic"] = SyntheticSpec.from_json_dict(known["synthetic"])
        if "metrics_budgets" in known:
            known["metrics_budgets"] = tuple(known["metrics_budgets"])
        return cls(**known)

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_json_dict(), indent=2) + "\n")

    @classmethod
    def load(cls, path: str | Path) -> "PipelineConfig":
        return cls.from_json_dict(json.loads(Path(path).read_text()))


@dataclass
class PipelineResult:
    outdir: Path
    dataset: Dataset
    lists: list[CandidateList]
    plan: SplitPlan | None
    encoding: Encoding
    solve: SolveResult
    audit: AuditReport
    manifest: dict


def _stage(name: str, log):
    class _Ctx:
        def __enter__(self):
            self.t0 = time.perf_counter()
            log(f"[{name}] ...")
            return self

        def __exit__(self, exc_type, exc, tb):
            self.seconds = time.perf_counter() - self.t0
            if exc is not None:
                raise PipelineStageError(name, exc) from exc
            log(f"[{name}] done in {self.seconds:.2f}s")
            return False

    return _Ctx()


def run_pipeline(config: PipelineConfig, log=None) -> PipelineResult:
    """Execute every stage, persisting artifacts under ``config.outdir``."""
    log = log or (lambda msg: print(msg, file=sys.stderr))
    outdir = Path(config.outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    config.save(outdir / "config.json")
    manifest: dict = {"config": config.to_json_dict(), "artifacts": {}, "stages": []}

    def record(stage: str, seconds: float, **artifacts: str) -> None:
        manifest["stages"].append({"name": stage, "seconds": round(seconds, 6)})
        manifest["artifacts"].update(artifacts)

    with _stage("dataset", log) as st:
        truth = None
        if config.input_csv is not None:
            result = ingest_csv(
                config.input_csv,
                IngestConfig(bins=config.bins, max_states=config.max_states),
            )
            dataset = result.dataset
            (outdir / "ingest_report.json").write_text(
                json.dumps(result.to_json_dict(), indent=2) + "\n"
            )
        else:
            dataset, truth = generate_synthetic(config.synthetic)
            (outdir / "truth.json").write_text(json.dumps(truth.to_json_dict()) + "\n")
        dataset.save(outdir / "dataset.json")
    record("dataset", st.seconds, dataset="dataset.json")

    with _stage("pscs", log) as st:
        limits = SearchLimits(
            max_trainings=config.max_trainings, max_seconds=config.max_train_seconds
        )
        lists = run_pscs_all(dataset, config.threshold, limits=limits, jobs=config.jobs)
        cand_dir = outdir / "candidates"
        cand_dir.mkdir(exist_ok=True)
        for cl in lists:
            cl.save(cand_dir / f"var_{cl.target:03d}.json")
    record("pscs", st.seconds, candidates="candidates")

    plan: SplitPlan | None = None
    if config.encoding == "split":
        with _stage("split", log) as st:
            plan = optimize_split_plan(lists, config.budget)
            plan.save(outdir / "split_plan.json")
        record("split", st.seconds, split_plan="split_plan.json")

    with _stage("encode", log) as st:
        if config.encoding == "split":
            enc = encode_split(lists, plan, margin=config.margin)
        else:
            enc = encode_basic(lists, margin=config.margin)
        enc.qubo.save_json(outdir / "qubo.json")
        enc.qubo.save_coordinate(outdir / "qubo.txt")
        (outdir / "encoding.json").write_text(
            json.dumps(enc.meta_json_dict(), indent=2) + "\n"
        )
    record(
        "encode", st.seconds, qubo_json="qubo.json", qubo_text="qubo.txt", encoding="encoding.json"
    )

    with _stage("solve", log) as st:
        method = config.solver
        if method == "auto":
            method = "exhaustive" if enc.qubo.num_bits <= config.exhaustive_cap else "anneal"
        if method == "exhaustive":
            solved = solve_exhaustive(enc.qubo, cap=config.exhaustive_cap)
        else:
            solved = solve_anneal(
                enc.qubo, sweeps=config.sweeps, restarts=config.restarts, seed=config.seed
            )
        solved.save(outdir / "solve.json")
    record("solve", st.seconds, solve="solve.json")

    with _stage("audit", log) as st:
        report = audit(
            enc.qubo,
            solved,
            lists,
            plan=plan,
            weights=enc.weights,
            oracle_cap=config.oracle_cap,
        )
        report.save(outdir / "audit.json", outdir / "audit.txt")
    record("audit", st.seconds, audit="audit.json", audit_text="audit.txt")

    with _stage("metrics", log) as st:
        rows = metrics_rows(lists, budgets=sorted(set(config.metrics_budgets) | {config.budget}))
        write_metrics_csv(rows, outdir / "metrics.csv")
        figure_paths: list[Path] = []
        if config.figures:
            figure_paths = render_metrics_figures(rows, outdir / "figures")
    record(
        "metrics",
        st.seconds,
        metrics="metrics.csv",
        **{f"figure_{p.stem}": str(p.relative_to(outdir)) for p in figure_paths},
    )

    manifest["verdict"] = "pass" if report.passed else "fail"
    (outdir / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")
    return PipelineResult(
        outdir=outdir,
        dataset=dataset,
        lists=lists,
        plan=plan,
        encoding=enc,
        solve=solved,
        audit=report,
        manifest=manifest,
    )


# -- subcommands ------------------------------------------------------------


def _load_lists(cand_dir: str | Path) -> list[CandidateList]:
    paths = sorted(Path(cand_dir).glob("var_*.json"))
    if not paths:
        raise FileNotFoundError(f"no candidate lists under {cand_dir}")
    lists = [CandidateList.load(p) for p in paths]
    for n, cl in enumerate(lists):
        if cl.target != n:
            raise ValueError(f"{paths[n]} targets variable {cl.target}, expected {n}")
    return lists


def cmd_ingest(args) -> int:
    result = ingest_csv(args.input, IngestConfig(bins=args.bins, max_states=args.max_states))
    result.dataset.save(args.out)
    if args.report:
        Path(args.report).write_text(json.dumps(result.to_json_dict(), indent=2) + "\n")
    ds = result.dataset
    print(f"{args.out}: {ds.num_rows} rows x {ds.num_variables} variables "
          f"({result.dropped_rows} rows dropped)")
    return 0


def cmd_synth(args) -> int:
    spec = SyntheticSpec(
        num_variables=args.variables,
        num_rows=args.rows,
        states=args.states,
        max_parents=args.max_parents,
        edge_probability=args.edge_prob,
        seed=args.seed,
    )
    dataset, truth = generate_synthetic(spec)
    dataset.save(args.out)
    if args.truth_out:
        Path(args.truth_out).write_text(json.dumps(truth.to_json_dict()) + "\n")
    print(f"{args.out}: {dataset.num_rows} rows x {dataset.num_variables} variables, "
          f"{len(truth.edges)} true edges")
    return 0


def cmd_pscs(args) -> int:
    dataset = Dataset.load(args.dataset)
    limits = SearchLimits(max_trainings=args.max_omega, max_seconds=args.max_seconds)
    lists = run_pscs_all(dataset, args.threshold, limits=limits, jobs=args.jobs)
    outdir = Path(args.outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    status = 0
    for cl in lists:
        cl.save(outdir / f"var_{cl.target:03d}.json")
        flag = "" if cl.complete else "  [PARTIAL]"
        print(
            f"variable {cl.target}: trainings={cl.num_trainings} "
            f"candidates={cl.num_candidates} hits={cl.memo_hits}{flag}"
        )
        if not cl.complete:
            status = 3
    return status


def cmd_split(args) -> int:
    lists = _load_lists(args.candidates)
    plan = optimize_split_plan(lists, args.budget)
    plan.save(args.out)
    total = sum(e.num_bits for e in plan.entries)
    basic = sum(cl.num_candidates - 1 for cl in lists)
    print(f"{args.out}: {total} score bits at budget {args.budget} (unsplit: {basic})")
    return 0


def cmd_encode(args) -> int:
    lists = _load_lists(args.candidates)
    if args.mode == "split":
        plan = SplitPlan.load(args.plan) if args.plan else optimize_split_plan(lists, args.budget)
        enc = encode_split(lists, plan, margin=args.margin)
    else:
        enc = encode_basic(lists, margin=args.margin)
    enc.qubo.save_json(args.out)
    if args.text_out:
        enc.qubo.save_coordinate(args.text_out)
    if args.meta_out:
        Path(args.meta_out).write_text(json.dumps(enc.meta_json_dict(), indent=2) + "\n")
    n_lin, n_quad = enc.qubo.num_terms()
    print(f"{args.out}: {enc.qubo.num_bits} bits, {n_lin} linear + {n_quad} quadratic terms")
    return 0


def cmd_solve(args) -> int:
    qubo = Qubo.load_json(args.qubo)
    if args.method == "exhaustive" or (args.method == "auto" and qubo.num_bits <= args.cap):
        result = solve_exhaustive(qubo, cap=args.cap)
    else:
        result = solve_anneal(qubo, sweeps=args.sweeps, restarts=args.restarts, seed=args.seed)
    result.save(args.out)
    print(f"{args.out}: method={result.method} energy={result.energy!r}")
    return 0


def cmd_audit(args) -> int:
    qubo = Qubo.load_json(args.qubo)
    result = SolveResult.load(args.solve)
    lists = _load_lists(args.candidates)
    plan = SplitPlan.load(args.plan) if args.plan else None
    weights = None
    if args.meta:
        meta = json.loads(Path(args.meta).read_text())
        weights = PenaltyWeights.from_json_dict(meta["weights"])
    report = audit(qubo, result, lists, plan=plan, weights=weights, oracle_cap=args.oracle_cap)
    report.save(args.out, args.text_out)
    print(report.to_text(), end="")
    return 0 if report.passed else 2


def cmd_metrics(args) -> int:
    lists = _load_lists(args.candidates)
    budgets = [int(k) for k in args.budgets.split(",")] if args.budgets else [0, 1, 2]
    rows = metrics_rows(lists, budgets=budgets)
    write_metrics_csv(rows, args.out)
    print(f"{args.out}: {len(rows)} variables")
    if args.figures:
        for path in render_metrics_figures(rows, Path(args.out).parent):
            print(f"figure: {path}")
    return 0


def cmd_pipeline(args) -> int:
    if args.config:
        config = PipelineConfig.load(args.config)
    else:
        config = PipelineConfig(
            synthetic=SyntheticSpec(num_variables=args.variables, num_rows=args.rows, seed=args.seed)
        )
    overrides = {}
    for name in ("outdir", "threshold", "budget", "margin", "encoding", "solver", "seed", "jobs"):
        value = getattr(args, name, None)
        if value is not None:
            overrides[name] = value
    if args.max_omega is not None:
        overrides["max_trainings"] = args.max_omega
    if args.no_figures:
        overrides["figures"] = False
    if overrides:
        config = replace(config, **overrides)
    try:
        result = run_pipeline(config)
    except PipelineStageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    print(f"artifacts: {result.outdir}")
    print(result.audit.to_text(), end="")
    return 0 if result.audit.passed else 2


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bnqubo",
        description="Structure learning over discrete data, compiled to QUBO and solved",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="discretize a CSV into a dataset")
    p.add_argument("--input", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--bins", type=int, default=3)
    p.add_argument("--max-states", type=int, default=4, dest="max_states")
    p.add_argument("--report", default=None)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("synth", help="sample a synthetic dataset")
    p.add_argument("--variables", type=int, required=True)
    p.add_argument("--rows", type=int, required=True)
    p.add_argument("--states", type=int, default=3)
    p.add_argument("--max-parents", type=int, default=2, dest="max_parents")
    p.add_argument("--edge-prob", type=float, default=0.3, dest="edge_prob")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--truth-out", default=None, dest="truth_out")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("pscs", help="search parent-set candidates per variable")
    p.add_argument("--dataset", required=True)
    p.add_argument("--threshold", type=float, required=True)
    p.add_argument("--max-omega", type=int, default=None, dest="max_omega")
    p.add_argument("--max-seconds", type=float, default=None, dest="max_seconds")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--outdir", required=True)
    p.set_defaults(func=cmd_pscs)

    p = sub.add_parser("split", help="optimize family splits for fewer bits")
    p.add_argument("--candidates", required=True)
    p.add_argument("--budget", type=int, default=2)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_split)

    p = sub.add_parser("encode", help="build the QUBO")
    p.add_argument("--candidates", required=True)
    p.add_argument("--mode", choices=("basic", "split"), default="split")
    p.add_argument("--plan", default=None)
    p.add_argument("--budget", type=int, default=2)
    p.add_argument("--margin", type=float, default=0.1)
    p.add_argument("--out", required=True)
    p.add_argument("--text-out", default=None, dest="text_out")
    p.add_argument("--meta-out", default=None, dest="meta_out")
    p.set_defaults(func=cmd_encode)

    p = sub.add_parser("solve", help="minimize a QUBO")
    p.add_argument("--qubo", required=True)
    p.add_argument("--method", choices=("auto", "exhaustive", "anneal"), default="auto")
    p.add_argument("--cap", type=int, default=24)
    p.add_argument("--sweeps", type=int, default=1500)
    p.add_argument("--restarts", type=int, default=20)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("audit", help="decode and cross-check a solve result")
    p.add_argument("--qubo", required=True)
    p.add_argument("--solve", required=True)
    p.add_argument("--candidates", required=True)
    p.add_argument("--plan", default=None)
    p.add_argument("--meta", default=None)
    p.add_argument("--oracle-cap", type=int, default=2_000_000, dest="oracle_cap")
    p.add_argument("--out", required=True)
    p.add_argument("--text-out", default=None, dest="text_out")
    p.set_defaults(func=cmd_audit)

    p = sub.add_parser("metrics", help="per-variable search/encoding metrics")
    p.add_argument("--candidates", required=True)
    p.add_argument("--budgets", default="0,1,2")
    p.add_argument("--out", required=True)
    p.add_argument("--figures", action=argparse.BooleanOptionalAction, default=True)
    p.set_defaults(func=cmd_metrics)

    p = sub.add_parser("pipeline", help="run every stage end to end")
    p.add_argument("--config", default=None)
    p.add_argument("--outdir", default=None)
    p.add_argument("--variables", type=int, default=4)
    p.add_argument("--rows", type=int, default=500)
    p.add_argument("--threshold", type=float, default=None)
    p.add_argument("--budget", type=int, default=None)
    p.add_argument("--margin", type=float, default=None)
    p.add_argument("--encoding", choices=("basic", "split"), default=None)
    p.add_argument("--solver", choices=("auto", "exhaustive", "anneal"), default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--jobs", type=int, default=None)
    p.add_argument("--max-omega", type=int, default=None, dest="max_omega")
    p.add_argument("--no-figures", action="store_true", dest="no_figures")
    p.set_defaults(func=cmd_pipeline)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
