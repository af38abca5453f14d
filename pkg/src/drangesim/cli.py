"""Command-line experiment runner.

Every invocation writes into a fresh run directory under ``--out-dir`` or
``$DRANGESIM_OUT`` (default ``./runs``) together with ``manifest.json``;
``drangesim replay MANIFEST`` re-executes the run into a new directory.

Exit codes: 0 success, 1 runtime error, 2 usage error, 3 configuration error.
"""

import argparse
import json
import logging
import os
import shutil
import sys
import time
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__, bench, calibration
from .characterize import (Region, coverage_by_pattern, failing_columns_per_subarray,
                           row_bucket_counts, run_activation_failure_test, spatial_bitmap,
                           temperature_sweep, time_stability, write_bitmap)
from .config import RunConfig, load_config
from .device import generate_device
from .drange import RngCellCatalog, generate_random, identify_rng_cells
from .errors import ConfigError, DrangeError
from .patterns import DataPattern
from .stats import load_bits, run_battery
from .streams import SampleStream
from .timing import alg2_trace

log = logging.getLogger("drangesim")
ENV_OUT = "DRANGESIM_OUT"


class Run:
    """An append-only output directory."""

    def __init__(self, root, name, explicit=None):
        if explicit is not None:
            self.dir = Path(explicit)
            if self.dir.exists() and any(self.dir.iterdir()):
                raise DrangeError(f"output directory {self.dir} already holds a run")
        else:
            root = Path(root)
            i = 1
            while (root / f"{name}-{i:04d}").exists():
                i += 1
            self.dir = root / f"{name}-{i:04d}"
        self.dir.mkdir(parents=True, exist_ok=True)
        self.outputs = []
        self.inputs = None

    def path(self, name):
        p = self.dir / name
        self.outputs.append(name)
        return p

    def external(self, path):
        self.outputs.append(str(Path(path).resolve()))

    def write_json(self, name, obj):
        with open(self.path(name), "w") as fh:
            json.dump(obj, fh, indent=2, sort_keys=True, default=_jsonable)


def _jsonable(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    return str(o)


# -- helpers ---------------------------------------------------------------------------

def _region(e):
    return Region(e.channel, e.bank, e.subarrays, e.rows, e.columns)


def _pattern(e):
    return DataPattern.parse(e.pattern)


def _catalogs(cfg, device, temps):
    e = cfg.experiment
    out = {}
    for t in temps:
        out[float(t)] = identify_rng_cells(device, t, e.trcd, _pattern(e), e.samples, e.tolerance,
                                           e.overlapping, stream=SampleStream(device, e.stream_start))
    return out


# -- subcommands -----------------------------------------------------------------------

def cmd_gen_device(args, cfg, run):
    dev = generate_device(cfg.device)
    dev.dump_weak_columns(run.path("weak_columns.csv"))
    ref = dev.fprob(np.arange(dev.n_weak), dev.reference_condition(DataPattern("SOLID0")))
    run.write_json("device.json", {
        "config": cfg.device.to_dict(), "n_weak_cells": dev.n_weak,
        "n_rng_cells": int(dev.is_rng.sum()),
        "reference_fprob_quantiles": np.quantile(ref, [0.1, 0.5, 0.9]).tolist(),
    })


def cmd_characterize(args, cfg, run):
    e = cfg.experiment
    dev = generate_device(cfg.device)
    reg, pat = _region(e), _pattern(e)
    if args.experiment == "spatial":
        m = run_activation_failure_test(dev, reg, pat, e.trcd, e.temperature, e.iterations,
                                        SampleStream(dev, e.stream_start), cfg.timing)
        safe = run_activation_failure_test(dev, reg, pat, cfg.device.model.trcd_safe, e.temperature,
                                           e.iterations, SampleStream(dev, e.stream_start), cfg.timing)
        m.to_csv(run.path("fprob.csv"))
        bm = spatial_bitmap(m)
        write_bitmap(bm, run.path("bitmap.pgm"))
        counts, slopes = row_bucket_counts(m)
        cols = failing_columns_per_subarray(m)
        run.write_json("spatial.json", {
            "failing_cells": int((m.failures > 0).sum()), "profiled_cells": int(m.cells.size),
            "failing_bitlines_per_subarray": {str(k): len(v) for k, v in cols.items()},
            "row_bucket_counts": {str(k): v for k, v in counts.items()},
            "row_bucket_slopes": {str(k): v for k, v in slopes.items()},
            "failures_at_safe_trcd": int(safe.failures.sum()),
            "reads": m.reads, "first_access_reads": m.first_access_reads,
        })
    elif args.experiment == "coverage":
        rep = coverage_by_pattern(dev, None, e.trcd, e.temperature, e.iterations, reg,
                                  e.stream_start, cfg.timing)
        rep.to_csv(run.path("coverage.csv"))
    elif args.experiment == "temperature":
        ts = temperature_sweep(dev, e.temperatures, e.trcd, pat, e.iterations, reg, e.stream_start, cfg.timing)
        ts.to_csv(run.path("tempsweep.csv"))
        run.write_json("tempsweep.json", {"points": len(ts.points), "fraction_below": ts.fraction_below(),
                                          "bucket_medians": ts.bucket_medians()})
    else:
        st = time_stability(dev, e.rounds, e.iterations, reg, pat, e.trcd, e.temperature,
                            e.stream_start, cfg.timing)
        bound = st.bound()
        with open(run.path("stability.csv"), "w") as fh:
            fh.write("cell,mean_fprob,std_fprob,bound\n")
            for w, mu, sd, b in zip(st.cells, st.mean, st.std, bound):
                fh.write(f"{int(w)},{mu:.6f},{sd:.6f},{b:.6f}\n")
        run.write_json("stability.json", {"rounds": e.rounds, "iterations": e.iterations,
                                          "cells": int(st.cells.size), "violations": st.violations()})


def cmd_identify(args, cfg, run):
    dev = generate_device(cfg.device)
    temps = args.temperatures or [cfg.experiment.temperature]
    summary = {}
    for t, cat in _catalogs(cfg, dev, temps).items():
        cat.save(run.path(f"catalog_{t:g}C.json"))
        summary[f"{t:g}"] = {"cells": len(cat), "density_histogram": cat.density_histogram()}
    run.write_json("identify.json", summary)


def cmd_generate(args, cfg, run):
    e = cfg.experiment
    dev = generate_device(cfg.device)
    if args.catalog:
        cat = RngCellCatalog.load(args.catalog)
    else:
        cat = _catalogs(cfg, dev, [e.temperature])[float(e.temperature)]
    # reads for generation start after the identification reads
    stream = SampleStream(dev, e.stream_start + e.samples)
    bs = generate_random(dev, cat, e.bits, temperature=e.temperature, stream=stream, timing=cfg.timing)
    if args.out:
        out = Path(args.out)
        if out.exists():
            raise DrangeError(f"{out} exists; refusing to overwrite")
        for p in bs.save(out):
            run.external(p)
    else:
        bs.save(run.path("bits.bin"))
        run.outputs.append("bits.bin.json")
    log.info("generated %d bits from %d cells", len(bs), len(bs.cells))


def cmd_test(args, cfg, run):
    bits = load_bits(args.input)
    rep = run_battery(bits, cfg.experiment.alpha, min_bits=args.min_bits)
    with open(run.path("report.json"), "w") as fh:
        fh.write(rep.to_json())
    text = rep.to_text()
    with open(run.path("report.txt"), "w") as fh:
        fh.write(text + "\n")
    print(text)


def cmd_bench(args, cfg, run):
    e = cfg.experiment
    if args.what == "throughput":
        rate_sets, seeds = [], []
        for i in range(e.devices):
            dcfg = replace(cfg.device, seed=cfg.device.seed + i)
            dev = generate_device(dcfg)
            cat = _catalogs(cfg, dev, [e.temperature])[float(e.temperature)]
            rate_sets.append(bench.bank_data_rates(cat, dcfg))
            seeds.append(dcfg.seed)
        rep = bench.throughput_report(rate_sets, cfg.timing, 1, seeds)
        rep.to_csv(run.path("throughput_curve.csv"))
        best = max(r[-1] for r in rep.per_device)
        run.write_json("throughput.json", {
            "calibration_version": calibration.VERSION,
            "calibrated_loop_runtime_ns": calibration.LOOP_RUNTIME_NS,
            "calibrated_max_mbps_1ch": bench.calibrated_throughput(),
            "calibrated_max_mbps_4ch": bench.calibrated_throughput(channels=4),
            "calibrated_avg_mbps_4ch": bench.calibrated_throughput(calibration.AVG_BITS_PER_BANK, channels=4),
            "bank_rates": rate_sets, "seeds": seeds, "per_device": rep.per_device,
            "duty": e.duty, "duty_cycled_max_mbps": bench.duty_cycled_throughput(best, e.duty),
        })
    elif args.what == "latency":
        tab = bench.latency_table()
        run.write_json("latency.json", {
            "calibration_version": calibration.VERSION,
            "first_access_ns": calibration.LATENCY_FIRST_NS,
            "pipeline_interval_ns": calibration.LATENCY_INTERVAL_NS,
            "scenarios": {k: {"model_ns": v, "target_ns": t} for k, (v, t) in tab.items()},
            "storage_overhead": bench.storage_overhead(6, cfg.device.rows_per_bank),
            "storage_overhead_32k_rows": bench.storage_overhead(6, 32768),
        })
        tr = alg2_trace([(b, (0, 0), (2, 0)) for b in range(cfg.device.banks_per_channel)],
                        cfg.timing.with_(trcd_reduced=e.trcd), 100)
        tr.to_csv(run.path("alg2_trace.csv"))
    else:
        cmp_ = bench.compare_baselines(cfg.baselines)
        with open(run.path("baselines.md"), "w") as fh:
            fh.write(cmp_.to_markdown() + "\n")
        cmp_.to_csv(run.path("baselines.csv"))
        print(cmp_.to_markdown())


def cmd_report(args, cfg, run):
    roots = [Path(p) for p in (args.runs or [])] or [Path(args.root)]
    manifests = []
    for root in roots:
        cands = [root / "manifest.json"] if (root / "manifest.json").exists() else sorted(root.glob("*/manifest.json"))
        for m in cands:
            if m.parent == run.dir:
                continue
            with open(m) as fh:
                manifests.append((m.parent, json.load(fh)))
    run.inputs = [str(d.resolve()) for d, _ in manifests]
    lines = ["# Run report", "", "| run | subcommand | seed | outputs |", "|---|---|---|---|"]
    for d, m in manifests:
        lines.append(f"| {d.name} | {' '.join(m['subcommand'])} | {m['seed']} | {', '.join(m['outputs'])} |")
    for d, m in manifests:
        for name in m["outputs"]:
            if name.endswith(".json") and not os.path.isabs(name) and (d / name).exists() \
                    and os.path.getsize(d / name) < 20000:
                lines += ["", f"## {d.name}/{name}", "", "```", (d / name).read_text().strip(), "```"]
    with open(run.path("report.md"), "w") as fh:
        fh.write("\n".join(lines) + "\n")


HANDLERS = {"gen-device": cmd_gen_device, "characterize": cmd_characterize, "identify": cmd_identify,
            "generate": cmd_generate, "test": cmd_test, "bench": cmd_bench, "report": cmd_report}


# -- argument parsing ---------------------------------------------------------------------

def _parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="YAML or JSON config file")
    common.add_argument("--out-dir", help="run directory (must not hold a run)")
    common.add_argument("--seed", type=int, help="device seed")
    common.add_argument("--trcd", type=float)
    common.add_argument("--temperature", type=float)
    common.add_argument("--pattern")
    common.add_argument("--iterations", type=int)
    common.add_argument("--stream-start", type=int)
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="drangesim", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("gen-device", parents=[common])
    c = sub.add_parser("characterize", parents=[common])
    c.add_argument("experiment", choices=["spatial", "coverage", "temperature", "stability"])
    c.add_argument("--rounds", type=int)
    c.add_argument("--temperatures", type=float, nargs="+")
    i = sub.add_parser("identify", parents=[common])
    i.add_argument("--temperatures", type=float, nargs="+")
    i.add_argument("--samples", type=int)
    i.add_argument("--tolerance", type=float)
    i.add_argument("--overlapping", action="store_true", default=None)
    g = sub.add_parser("generate", parents=[common])
    g.add_argument("--bits", type=int)
    g.add_argument("--out", help="packed-bit output file (sidecar at FILE.json)")
    g.add_argument("--catalog", help="catalog JSON from `identify`")
    g.add_argument("--samples", type=int)
    g.add_argument("--tolerance", type=float)
    t = sub.add_parser("test", parents=[common])
    t.add_argument("--in", dest="input", required=True, help="packed-bit or ASCII 0/1 file")
    t.add_argument("--alpha", type=float)
    t.add_argument("--min-bits", type=int, default=1_000_000)
    b = sub.add_parser("bench", parents=[common])
    b.add_argument("what", choices=["throughput", "latency", "compare"])
    b.add_argument("--devices", type=int)
    b.add_argument("--duty", type=float)
    r = sub.add_parser("report", parents=[common])
    r.add_argument("--runs", nargs="+", help="run directories or roots to collate")
    r.add_argument("--root", default=None)
    rp = sub.add_parser("replay")
    rp.add_argument("manifest")
    rp.add_argument("--out-dir")
    rp.add_argument("-v", "--verbose", action="store_true")
    return p


_OVERRIDES = {
    # flag -> (section, key)
    "seed": ("device", "seed"), "trcd": ("experiment", "trcd"),
    "temperature": ("experiment", "temperature"), "pattern": ("experiment", "pattern"),
    "iterations": ("experiment", "iterations"), "stream_start": ("experiment", "stream_start"),
    "rounds": ("experiment", "rounds"), "samples": ("experiment", "samples"),
    "tolerance": ("experiment", "tolerance"), "overlapping": ("experiment", "overlapping"),
    "bits": ("experiment", "bits"), "alpha": ("experiment", "alpha"),
    "devices": ("experiment", "devices"), "duty": ("experiment", "duty"),
}


def resolve_config(args):
    cfg = load_config(args.config).to_dict()
    for flag, (sec, key) in _OVERRIDES.items():
        v = getattr(args, flag, None)
        if v is not None:
            cfg[sec][key] = v
    if getattr(args, "temperatures", None) and args.command == "characterize":
        cfg["experiment"]["temperatures"] = args.temperatures
    return RunConfig.from_dict(cfg)


def _execute(args, cfg, argv, out_dir=None):
    root = os.environ.get(ENV_OUT, "runs")
    name = args.command + (f"-{args.experiment}" if args.command == "characterize" else "") \
        + (f"-{args.what}" if args.command == "bench" else "")
    run = Run(root, name, out_dir)
    if args.command == "report" and args.root is None:
        args.root = str(root)
    started = time.time()
    try:
        HANDLERS[args.command](args, cfg, run)
    except BaseException:
        if not run.outputs:
            shutil.rmtree(run.dir, ignore_errors=True)
        raise
    sub = [args.command] + ([args.experiment] if args.command == "characterize" else []) \
        + ([args.what] if args.command == "bench" else [])
    manifest = {
        "subcommand": sub, "argv": argv, "config": cfg.to_dict(), "seed": cfg.device.seed,
        "tool_version": __version__, "calibration_version": calibration.VERSION,
        "started": started, "finished": time.time(), "outputs": run.outputs,
    }
    if run.inputs is not None:
        manifest["inputs"] = run.inputs
    with open(run.dir / "manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True, default=_jsonable)
    print(run.dir)
    return run


def replay(manifest_path, out_dir=None):
    """Re-run a recorded invocation with its resolved config into a new directory."""
    with open(manifest_path) as fh:
        m = json.load(fh)
    argv = []
    skip = False
    for tok in m["argv"]:
        if skip:
            skip = False
        elif tok in ("--out-dir", "--config"):
            skip = True
        elif not tok.startswith(("--out-dir=", "--config=")):
            argv.append(tok)
    args = _parser().parse_args(argv)
    cfg = RunConfig.from_dict(m["config"])
    if m.get("inputs") is not None:
        # collate exactly the runs the original report saw
        args.runs = m["inputs"]
    if out_dir is None:
        out_dir = _fresh_dir(os.environ.get(ENV_OUT, "runs"), "replay")
    if getattr(args, "out", None):
        # an explicit output file moves into the new run directory
        args.out = str(Path(out_dir) / Path(args.out).name)
        argv = [t for t in argv if not t.startswith("--out=")]
        if "--out" in argv:
            argv[argv.index("--out") + 1] = args.out
        else:
            argv += ["--out", args.out]
    return _execute(args, cfg, argv, out_dir)


def _fresh_dir(root, name):
    root = Path(root)
    i = 1
    while (root / f"{name}-{i:04d}").exists():
        i += 1
    return root / f"{name}-{i:04d}"


def main(argv=None):
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = _parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "replay":
            replay(args.manifest, args.out_dir)
        else:
            _execute(args, resolve_config(args), argv, args.out_dir)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 3
    except DrangeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
