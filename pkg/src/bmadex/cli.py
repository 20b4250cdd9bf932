"""Command-line interface: simulate, analyze, compare.

Exit codes: 0 on success, 2 on usage errors (bad flags or values), 1 on
runtime failures. Every run writes a manifest (key=value lines) into its
output directory recording the command, all flags, input digests, the tool
version, and a timestamp.
"""

from __future__ import annotations

import argparse
import hashlib
import os
import sys
from datetime import datetime, timezone
from pathlib import Path

import numpy as np
import pandas as pd

import bmadex
from bmadex.bayesfactor import BfConfig
from bmadex.errors import BmadexError
from bmadex.evaluate import average_curves
from bmadex.ingest import format_float, load_dataset
from bmadex.pipeline import (KNOWN_METHODS, analyze_dataset, benchmark_run,
                             method_curves, table1_frame, table2_frame)
from bmadex.simulate import (SimConfig, generate_dataset, load_truth,
                             write_config_echo, write_replicate)


def _sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


def write_manifest(outdir, command: str, args: argparse.Namespace,
                   inputs: list = ()):
    lines = [f"command={command}",
             f"version={bmadex.__version__}",
             f"timestamp={datetime.now(timezone.utc).isoformat()}"]
    for key, value in sorted(vars(args).items()):
        if key == "func":
            continue
        lines.append(f"flag.{key}={value}")
    for path in inputs:
        lines.append(f"input.{path}={_sha256(path)}")
    path = Path(outdir) / "manifest.txt"
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def _write_csv(df: pd.DataFrame, path, float_cols=None):
    out = df.copy()
    cols = float_cols if float_cols is not None else [
        c for c in out.columns if out[c].dtype.kind == "f"]
    for c in cols:
        out[c] = out[c].map(format_float)
    out.to_csv(path, index=False)


def _default_threads() -> int:
    return os.cpu_count() or 1


def cmd_simulate(args) -> int:
    try:
        cfg = SimConfig(n=args.n, genes=args.genes, f_s=args.fs, f_g=args.fg,
                        f_d=args.fd, seed=args.seed, replicates=args.reps,
                        effect_sd_scale=args.effect_sd_scale,
                        variance_df=args.variance_df,
                        variance_scale=args.variance_scale)
    except ValueError as exc:
        print(f"simulate: {exc}", file=sys.stderr)
        return 2
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    for rep in range(cfg.replicates):
        dataset, truth = generate_dataset(cfg, replicate=rep)
        write_replicate(outdir, cfg, rep, dataset, truth)
    write_config_echo(outdir, cfg)
    write_manifest(outdir, "simulate", args)
    print(f"wrote {cfg.replicates} replicate(s) of {cfg.genes} genes x "
          f"{cfg.n} samples to {outdir}")
    return 0


def _parse_joint(spec: str):
    mode = "all"
    names_part = spec
    for suffix in (":all", ":any"):
        if spec.endswith(suffix):
            names_part, mode = spec[:-len(suffix)], suffix[1:]
            break
    names = [s for s in names_part.split("+") if s]
    if not names:
        raise BmadexError(f"joint spec {spec!r} names no covariates")
    label = ("&" if mode == "all" else "|").join(names)
    return names, mode, label


def cmd_analyze(args) -> int:
    dataset = load_dataset(args.expr, args.covars)
    covariates = [c for c in args.covariates.split(",") if c]
    interactions = [c for c in (args.interactions or "").split(",") if c]
    pattern = None
    if args.pattern:
        parts = [c for c in args.pattern.split(",") if c]
        if len(parts) != 2:
            print("analyze: --pattern needs exactly two factors", file=sys.stderr)
            return 2
        pattern = (parts[0], parts[1])
    prior = args.prior if args.prior in ("empirical", "uniform") else None
    if prior is None:
        report = pd.read_csv(args.prior, comment="#")
        prior = report["prior"].to_numpy(float)
    joint = [_parse_joint(spec) for spec in args.joint or []]

    cfg = BfConfig(method=args.bf_method)
    result = analyze_dataset(dataset, covariates, interactions=interactions,
                             hierarchy=args.hierarchy, pattern=pattern,
                             prior=prior, c=args.c, cfg=cfg,
                             threads=args.threads,
                             target_pe_fdr=args.target_pefdr, joint=joint)

    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    _write_csv(result.space.describe(), outdir / "modelspace.csv")

    prior_path = outdir / "prior.csv"
    with open(prior_path, "w", encoding="utf-8") as fh:
        fh.write(f"# c={format_float(args.c)}\n")
        if result.calibration is not None:
            fh.write(f"# iterations={result.calibration.iterations_run}\n")
            fh.write(f"# max_change={format_float(result.calibration.max_change_final)}\n")
        rep = result.prior_report()
        for c in ("omega", "prior"):
            rep[c] = rep[c].map(lambda v: format_float(v) if np.isfinite(v) else "")
        rep.to_csv(fh, index=False)

    _write_csv(result.inclusion, outdir / "inclusion.csv")

    selection_rows = []
    for tg in result.targets:
        table = result.rankings[tg.label]
        ids, scores, pe = table.as_arrays()
        frame = pd.DataFrame({"gene_id": ids,
                              "rank": np.arange(1, len(ids) + 1),
                              f"P_{tg.label}": scores,
                              "pe_fdr_at_gene": pe})
        _write_csv(frame, outdir / f"ranking_{tg.file_label}.csv")
        if table.target_cut is not None:
            cut = table.target_cut
            selection_rows.append({
                "target": tg.label, "n_selected": cut,
                "pe_fdr_at_cut": pe[cut - 1] if cut else 0.0,
                "min_score_selected": scores[cut - 1] if cut else float("nan")})
    if selection_rows:
        _write_csv(pd.DataFrame(selection_rows), outdir / "selection.csv")

    if args.dump_scores:
        J, M = result.scores.log_bf.shape
        dump = pd.DataFrame({
            "gene_id": np.repeat(result.scores.gene_ids, M),
            "model_index": np.tile(np.arange(M), J),
            "log_bf": result.scores.log_bf.ravel(),
            "r_squared": result.scores.r_squared.ravel()})
        _write_csv(dump, outdir / "scores.csv")

    write_manifest(outdir, "analyze", args, inputs=[args.expr, args.covars])
    print(f"analyzed {dataset.n_genes} genes x {dataset.n_samples} samples "
          f"over {len(result.space)} models; wrote {outdir}")
    return 0


def _replicate_dirs(sim_dir: Path) -> list[Path]:
    reps = sorted(p for p in sim_dir.iterdir() if p.is_dir() and p.name.startswith("rep"))
    if not reps:
        raise BmadexError(f"{sim_dir}: no rep*/ directories found")
    for rep in reps:
        if not (rep / "truth.csv").exists():
            raise BmadexError(f"{rep}: truth.csv missing")
    return reps


def cmd_compare(args) -> int:
    methods = [m for m in args.methods.split(",") if m]
    for m in methods:
        if m not in KNOWN_METHODS:
            print(f"compare: unknown method {m!r}; known: {','.join(KNOWN_METHODS)}",
                  file=sys.stderr)
            return 2
    sim_dir = Path(args.sim_dir)
    reps = _replicate_dirs(sim_dir)
    if args.max_reps:
        reps = reps[:args.max_reps]

    t1_rows, t2_rows = [], []
    sens_acc: dict[str, list] = {m: [] for m in methods}
    calib_acc: dict[str, list] = {m: [] for m in methods}
    for rep in reps:
        dataset = load_dataset(rep / "expression.tsv", rep / "covariates.tsv")
        truth = load_truth(rep / "truth.csv")
        stats = benchmark_run(dataset, truth, methods, c=args.c,
                              threads=args.threads)
        t1 = table1_frame(stats, truth, args.pcut)
        t1["replicate"] = rep.name
        t1_rows.append(t1)
        t2 = table2_frame(stats, truth, args.fdr)
        t2["replicate"] = rep.name
        t2_rows.append(t2)
        sens, calib = method_curves(stats, truth)
        for m in methods:
            sens_acc[m].append(sens[m])
            calib_acc[m].append(calib[m])

    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    t1_all = pd.concat(t1_rows, ignore_index=True)
    t2_all = pd.concat(t2_rows, ignore_index=True)
    if len(t1_all):
        _write_csv(t1_all, outdir / "table1_replicates.csv")
        t1_mean = t1_all.drop(columns="replicate").groupby("method", sort=False).mean()
        _write_csv(t1_mean.reset_index(), outdir / "table1.csv")
    _write_csv(t2_all, outdir / "table2_replicates.csv")
    t2_mean = t2_all.drop(columns="replicate").groupby("method", sort=False).mean()
    _write_csv(t2_mean.reset_index(), outdir / "table2.csv")

    sens_avg, calib_avg = {}, {}
    for m in methods:
        sens_avg[m] = average_curves(sens_acc[m], ("true_fdr", "sensitivity"))
        calib_avg[m] = average_curves(calib_acc[m], ("true_fdr", "estimated_fdr"))
        _write_csv(sens_avg[m], outdir / f"curve_{m}.csv")
        _write_csv(calib_avg[m], outdir / f"calibration_{m}.csv")

    if not args.no_figures:
        from bmadex.plots import plot_fdr_calibration, plot_sensitivity_curves
        plot_sensitivity_curves(sens_avg, outdir / "sensitivity_vs_fdr.png")
        plot_fdr_calibration(calib_avg, outdir / "fdr_calibration.png")

    write_manifest(outdir, "compare", args)
    print(f"compared {len(methods)} method(s) over {len(reps)} replicate(s); "
          f"wrote {outdir}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bmadex",
        description="Bayesian model averaging for differential expression")
    parser.add_argument("--version", action="version",
                        version=f"bmadex {bmadex.__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="generate synthetic benchmark data")
    sim.add_argument("--n", type=int, default=80, help="samples per replicate")
    sim.add_argument("--genes", type=int, default=10000)
    sim.add_argument("--fs", type=float, default=0.10,
                     help="proportion of genes affected by s")
    sim.add_argument("--fg", type=float, default=0.05)
    sim.add_argument("--fd", type=float, default=0.0)
    sim.add_argument("--reps", type=int, default=10)
    sim.add_argument("--seed", type=int, default=0)
    sim.add_argument("--effect-sd-scale", type=float,
                     default=SimConfig.effect_sd_scale)
    sim.add_argument("--variance-df", type=float, default=SimConfig.variance_df)
    sim.add_argument("--variance-scale", type=float,
                     default=SimConfig.variance_scale)
    sim.add_argument("--out", required=True)
    sim.set_defaults(func=cmd_simulate)

    ana = sub.add_parser("analyze", help="rank genes by posterior inclusion")
    ana.add_argument("--expr", required=True, help="expression file (genes x samples)")
    ana.add_argument("--covars", required=True, help="covariate file (samples x covariates)")
    ana.add_argument("--covariates", required=True,
                     help="comma-separated covariate columns to model")
    ana.add_argument("--interactions", default="",
                     help="comma-separated product columns, e.g. s:g")
    ana.add_argument("--hierarchy", action="store_true",
                     help="restrict to models where interactions bring both parents")
    ana.add_argument("--pattern", default="",
                     help="two binary factors for the 16-model pattern space")
    ana.add_argument("--prior", default="empirical",
                     help="empirical, uniform, or a prior.csv path")
    ana.add_argument("--c", type=float, default=1.0,
                     help="Bayes factor cutoff for the empirical prior")
    ana.add_argument("--target-pefdr", type=float, default=None)
    ana.add_argument("--joint", action="append", default=[],
                     help="extra joint target, e.g. s+g:all or s+s:g:any")
    ana.add_argument("--bf-method", default="auto",
                     choices=("auto", "quadrature", "laplace"))
    ana.add_argument("--threads", type=int, default=_default_threads())
    ana.add_argument("--dump-scores", action="store_true")
    ana.add_argument("--out", required=True)
    ana.set_defaults(func=cmd_analyze)

    cmp_ = sub.add_parser("compare", aliases=["evaluate"],
                          help="benchmark methods against simulation truth")
    cmp_.add_argument("--sim-dir", required=True)
    cmp_.add_argument("--methods", default="sm1,sm2,mm,bma-empirical")
    cmp_.add_argument("--pcut", type=float, default=0.001)
    cmp_.add_argument("--fdr", type=float, default=0.05)
    cmp_.add_argument("--c", type=float, default=1.0)
    cmp_.add_argument("--threads", type=int, default=_default_threads())
    cmp_.add_argument("--max-reps", type=int, default=0,
                      help="limit the number of replicates (0 = all)")
    cmp_.add_argument("--no-figures", action="store_true")
    cmp_.add_argument("--out", required=True)
    cmp_.set_defaults(func=cmd_compare)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (BmadexError, OSError, KeyError, ValueError) as exc:
        print(f"bmadex {args.command}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
