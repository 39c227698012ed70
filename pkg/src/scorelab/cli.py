"""Command-line interface.

Subcommands mirror the pipeline stages: density handling, training (global
and piecewise), reverse sampling, metric evaluation, the decomposition
verifier, the two studies, and report emission.  ``SCORELAB_OUT`` overrides
output directories; ``SCORELAB_THREADS`` caps BLAS threads (applied before
numpy loads).
"""

import os

if "SCORELAB_THREADS" in os.environ:
    os.environ.setdefault("OMP_NUM_THREADS", os.environ["SCORELAB_THREADS"])
    os.environ.setdefault("OPENBLAS_NUM_THREADS", os.environ["SCORELAB_THREADS"])

import argparse
import csv
import logging
import sys

import numpy as np


def _out_dir(args_dir):
    return os.environ.get("SCORELAB_OUT", args_dir)


def cmd_density_normalize(args):
    from .density import load_density, save_density

    dens = load_density(args.spec)
    out = args.output or args.spec
    save_density(dens, out)
    print(f"logZ={dens.logZ:.10g} quad_tol={dens.quad_tol:.3g} c1={dens.c1:.6g} -> {out}")


def cmd_density_sample(args):
    from .bench import resolve_density
    from .density import density_hash, sample, save_samples

    dens = resolve_density(args.spec)
    x = sample(dens, args.n, args.seed, streams=args.streams)
    save_samples(args.output, x, args.seed, density_hash(dens))
    print(f"wrote {x.shape[0]} samples of dimension {x.shape[1]} to {args.output}")


def cmd_train(args, piecewise: bool):
    from .bench import load_config, run_end_to_end
    from dataclasses import replace

    config = replace(load_config(args.config), piecewise=piecewise)
    if args.out_dir:
        config = replace(config, out_dir=args.out_dir)
    record = run_end_to_end(config)
    print(
        f"trained {'piecewise ' if piecewise else ''}model: "
        f"val_loss={record.val_loss_best:.5g} tv_hist={record.tv_hist:.5g} "
        f"w1={record.w1_value:.5g} ({record.w1_method})"
    )


def cmd_sample(args):
    from .bench import build_schedule, load_config, resolve_density
    from .density import density_hash, save_samples
    from .net import as_score_fn, load_checkpoint
    from .sampler import SamplerConfig, reverse_sample
    from .schedule import TimeWindow
    from .training import load_piecewise

    config = load_config(args.config)
    schedule = build_schedule(config)
    density = resolve_density(config.density)
    if args.manifest:
        score = load_piecewise(args.manifest)
        window = TimeWindow(score.boundaries[0], score.boundaries[-1])
    else:
        network, _ = load_checkpoint(args.checkpoint)
        score = as_score_fn(network)
        from .bench import resolve_plan

        window = resolve_plan(config).window
    sconfig = SamplerConfig(
        steps=config.sampler_steps,
        window=window,
        chains=args.chains or config.chains or config.n,
        seed=config.seed + 2,
        grid=config.sampler_grid,
    )
    samples = reverse_sample(score, schedule, sconfig, density.d)
    save_samples(args.output, samples, sconfig.seed, density_hash(density))
    print(f"wrote {samples.shape[0]} chains to {args.output}")


def cmd_eval(args):
    from .bench import resolve_density
    from .density import load_samples
    from .metrics import HistogramSpec, density_pdf, tv_samples_vs_density, w1_1d_exact, w1_sliced
    from .density import sample as density_sample

    density = resolve_density(args.density)
    samples, meta = load_samples(args.samples)
    d = density.d
    pdf = density_pdf(density)
    tv = tv_samples_vs_density(samples, pdf, HistogramSpec(lo=(-1.0,) * d, hi=(1.0,) * d))
    ref = density_sample(density, samples.shape[0], args.seed)
    if d == 1:
        w1 = w1_1d_exact(samples[:, 0], ref[:, 0])
    else:
        w1 = w1_sliced(samples, ref, 64, np.random.default_rng(args.seed))
    print(f"tv_hist={tv.value:.5f} (bins={tv.resolution}) "
          f"w1={w1.value:.5f} (method={w1.method})")


DECOMP_COLUMNS = [
    "spec", "check", "subset_size", "t", "sigma", "x0", "x1", "value", "extra"
]


def cmd_verify_decomposition(args):
    from .decomposition import (
        SHIPPED_SPECS,
        SIGMA_GRID_DEFAULT,
        SIGMA_GRID_SMALLNESS,
        probe_points,
        t_for_sigma,
        verify_identity,
        verify_smallness,
    )
    from .schedule import NoiseSchedule

    schedule = NoiseSchedule()
    names = [args.spec] if args.spec else list(SHIPPED_SPECS)
    rows = []
    for name in names:
        spec = SHIPPED_SPECS[name]()
        probes = probe_points(spec.d, per_axis=5)
        t_grid = [t_for_sigma(schedule, s) for s in SIGMA_GRID_DEFAULT[:4]]
        ident = verify_identity(spec, schedule, probes, t_grid)
        print(f"{name}: identity max rel residual {ident.max_rel_residual:.3e}")
        for row in ident.rows:
            rows.append(
                (name, "identity", "", f"{row.t:.8g}", f"{row.sigma:.8g}",
                 f"{row.x[0]:.6g}", f"{row.x[1]:.6g}" if len(row.x) > 1 else "",
                 f"{row.rel_residual:.6e}", f"{row.direct:.8g}")
            )
        for subset in ([0], list(range(len(spec.pairs)))):
            subset = tuple(subset)
            small = verify_smallness(spec, schedule, subset, probes, SIGMA_GRID_SMALLNESS)
            print(
                f"{name}: smallness |A|={len(subset)} slope {small.slope:.4f} "
                f"(constant {small.fitted_constant:.4g})"
            )
            for sig, mx, ratio, bound in zip(
                small.sigmas, small.max_abs_delta, small.ratios, small.certificate_bounds
            ):
                rows.append(
                    (name, "smallness", str(len(subset)), "", f"{sig:.8g}",
                     "", "", f"{mx:.6e}", f"{ratio:.6e}")
                )
            rows.append(
                (name, "smallness-slope", str(len(subset)), "", "", "", "",
                 f"{small.slope:.6f}", f"{max(small.certificate_bounds):.6g}")
            )
    if args.output:
        with open(args.output, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(DECOMP_COLUMNS)
            writer.writerows(rows)
        print(f"report -> {args.output}")


def cmd_rate_study(args):
    from dataclasses import replace

    from .bench import load_config, run_rate_study, write_records

    base = load_config(args.config)
    if args.out_dir:
        base = replace(base, out_dir=args.out_dir)
    n_list = [int(v) for v in args.n_list.split(",")]
    report = run_rate_study(base, n_list, range(args.seeds), metric=args.metric)
    print(report.summary())
    out = os.path.join(_out_dir(base.out_dir), "rate_study.csv")
    os.makedirs(os.path.dirname(out), exist_ok=True)
    write_records(out, report.records, append=False)
    with open(os.path.join(_out_dir(base.out_dir), "rate_study_summary.txt"), "w") as fh:
        fh.write(report.summary() + "\n")


def cmd_adaptivity_study(args):
    from dataclasses import replace

    from .bench import load_config, run_adaptivity_study, write_records

    base = load_config(args.config)
    if args.out_dir:
        base = replace(base, out_dir=args.out_dir)
    d_list = [int(v) for v in args.d_list.split(",")]
    report = run_adaptivity_study(base, d_list, range(args.seeds))
    print(report.summary())
    out = os.path.join(_out_dir(base.out_dir), "adaptivity_study.csv")
    os.makedirs(os.path.dirname(out), exist_ok=True)
    write_records(out, report.records, append=False)


def cmd_report(args):
    from .bench import read_records

    rows = read_records(args.csv)
    print(f"{len(rows)} records in {args.csv}")
    by_n = {}
    for row in rows:
        by_n.setdefault(int(row["n"]), []).append(float(row["tv_hist"]))
    if len(by_n) >= 3:
        from .bench import fit_slope

        ns = sorted(by_n)
        meds = [float(np.median(by_n[n])) for n in ns]
        slope, se = fit_slope(ns, meds)
        print(f"tv_hist slope {slope:.4f} +- {se:.4f}")
        for n, m in zip(ns, meds):
            print(f"  n={n:>8d} median tv_hist={m:.5f}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="scorelab")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    dens = sub.add_parser("density", help="density spec handling")
    dsub = dens.add_subparsers(dest="density_command", required=True)
    d_norm = dsub.add_parser("normalize")
    d_norm.add_argument("spec")
    d_norm.add_argument("-o", "--output")
    d_samp = dsub.add_parser("sample")
    d_samp.add_argument("spec")
    d_samp.add_argument("-n", type=int, required=True)
    d_samp.add_argument("--seed", type=int, default=0)
    d_samp.add_argument("--streams", type=int, default=1)
    d_samp.add_argument("-o", "--output", required=True)

    for name in ("train", "train-piecewise"):
        p = sub.add_parser(name)
        p.add_argument("config")
        p.add_argument("--out-dir")

    p = sub.add_parser("sample")
    p.add_argument("config")
    p.add_argument("--checkpoint")
    p.add_argument("--manifest")
    p.add_argument("--chains", type=int, default=0)
    p.add_argument("-o", "--output", required=True)

    p = sub.add_parser("eval")
    p.add_argument("--density", required=True)
    p.add_argument("--samples", required=True)
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("verify-decomposition")
    p.add_argument("--spec")
    p.add_argument("-o", "--output")

    p = sub.add_parser("rate-study")
    p.add_argument("config")
    p.add_argument("--n-list", required=True)
    p.add_argument("--seeds", type=int, default=3)
    p.add_argument("--metric", default="tv_hist")
    p.add_argument("--out-dir")

    p = sub.add_parser("adaptivity-study")
    p.add_argument("config")
    p.add_argument("--d-list", default="1,2,3")
    p.add_argument("--seeds", type=int, default=3)
    p.add_argument("--out-dir")

    p = sub.add_parser("report")
    p.add_argument("csv")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING)
    if args.command == "density":
        if args.density_command == "normalize":
            cmd_density_normalize(args)
        else:
            cmd_density_sample(args)
    elif args.command == "train":
        cmd_train(args, piecewise=False)
    elif args.command == "train-piecewise":
        cmd_train(args, piecewise=True)
    elif args.command == "sample":
        cmd_sample(args)
    elif args.command == "eval":
        cmd_eval(args)
    elif args.command == "verify-decomposition":
        cmd_verify_decomposition(args)
    elif args.command == "rate-study":
        cmd_rate_study(args)
    elif args.command == "adaptivity-study":
        cmd_adaptivity_study(args)
    elif args.command == "report":
        cmd_report(args)
    return 0


if __name__ == "__main__":
    sys.exit(main())
