"""Command-line entry point: ``sivsim <command> --config run.json --out outdir``.

Every command writes its data files plus ``manifest.json`` recording the
resolved config, its SHA-256 digest, the seed and the tool version.

Exit status: 0 success, 1 invalid config, 2 runtime or numerical failure,
3 insufficient data.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from importlib import resources
from pathlib import Path

import numpy as np

from . import __version__
from . import config as C
from . import ensemble as E
from . import fitting as F
from . import io
from . import overlap as O
from . import photons as P
from . import rates as R
from . import spectra as S
from .errors import ConfigError, InsufficientDataError, SivError
from .structure import transition_table

COMMANDS = ("simulate-pl", "simulate-ple", "lifetime", "saturation", "stream", "g2", "fit",
            "overlap", "ensemble", "report")
THREADS_ENV = "SIVSIM_THREADS"
FIXTURE_LINES = "fixture_lines.csv"


def derive_seed(seed, *tags):
    """Independent sub-seed for a named sub-task (stable across versions)."""
    h = hashlib.sha256(repr((int(seed),) + tuple(str(t) for t in tags)).encode()).digest()
    return int.from_bytes(h[:8], "little") >> 1


class Outputs:
    def __init__(self, out_dir, fmt="csv"):
        self.dir = Path(out_dir)
        self.dir.mkdir(parents=True, exist_ok=True)
        self.fmt = fmt
        self.files = []

    def path(self, name):
        p = self.dir / name
        p.parent.mkdir(parents=True, exist_ok=True)
        self.files.append(name)
        return p

    def json(self, name, obj):
        io.write_json(self.path(name), obj)

    def spectrum(self, stem, spectrum):
        if self.fmt == "json":
            self.json(f"{stem}.json", io.spectrum_to_dict(spectrum))
        else:
            io.write_spectrum(self.path(f"{stem}.csv"), spectrum)

    def table(self, stem, columns, metadata=None):
        if self.fmt == "json":
            self.json(f"{stem}.json", {"metadata": metadata or {}, "columns": columns})
        else:
            io.write_table(self.path(f"{stem}.csv"), columns, metadata)

    def manifest(self, command, cfg):
        cfg = {k: v for k, v in cfg.items() if not k.startswith("_")}
        outputs = {}
        for name in sorted(set(self.files)):
            outputs[name] = hashlib.sha256((self.dir / name).read_bytes()).hexdigest()
        io.write_json(self.dir / "manifest.json", {
            "tool": "sivsim", "version": __version__, "command": command,
            "config_sha256": C.config_digest(cfg), "seed": cfg["seed"], "config": cfg,
            "outputs": outputs})


def _linspace(axis_cfg):
    return np.linspace(axis_cfg["start_hz"], axis_cfg["stop_hz"], axis_cfg["points"])


def _resolve_path(cfg, value):
    if value is None:
        return None
    p = Path(value)
    base = cfg.get("_config_dir")
    return p if p.is_absolute() or base is None else Path(base) / p


# ---------------------------------------------------------------- commands

def cmd_simulate_pl(cfg, out, threads):
    model = C.build_model(cfg)
    T = cfg["temperature"]
    spec = S.pl_spectrum(model, T, cfg["pl"]["resolution_hz"], _linspace(cfg["pl"]["axis"]))
    out.spectrum("pl_spectrum", spec)
    table = transition_table(model, T)
    out.json("transition_table.json", {
        "temperature": T, "zpl_reference_hz": table.zpl_reference,
        "lines": [vars(line) for line in table.lines]})


def cmd_simulate_ple(cfg, out, threads):
    model = C.build_model(cfg)
    T = cfg["temperature"]
    c = cfg["ple"]
    summary = {}
    for line in c["lines"]:
        width = R.effective_linewidth(model, T, line) * math.sqrt(1 + c["power_ratio"])
        center = model.line_offset(line)
        half = 0.5 * c["span_fwhm"] * width
        axis = np.linspace(center - half, center + half, c["points"])
        spec = S.ple_spectrum(model, T, line, c["power_ratio"], axis)
        out.spectrum(f"ple_{line}", spec)
        summary[line] = {"center_hz": center, "fwhm_hz": spec.metadata["fwhm"]}
    out.json("ple_summary.json", {"temperature": T, "power_ratio": c["power_ratio"],
                                  "lines": summary})


def cmd_lifetime(cfg, out, threads):
    model = C.build_model(cfg)
    c = cfg["lifetime"]
    edges = np.arange(0.0, c["window_s"] + 0.5 * c["bin_width_s"], c["bin_width_s"])
    report = []
    for T in c["temperatures"]:
        seed = derive_seed(cfg["seed"], "lifetime", repr(float(T)))
        hist = S.decay_histogram(model, T, edges, c["counts_total"], seed)
        out.spectrum(f"decay_{T:g}K", hist)
        fit = F.fit_exponential(hist, c["tail_start_s"])
        tau = R.lifetime(model.rates, T)
        report.append({"temperature": T, "model_lifetime_s": tau,
                       "transform_limit_hz": R.transform_limit(tau),
                       "fitted_lifetime_s": fit.params["tau"],
                       "fitted_lifetime_ci95_s": fit.ci95["tau"], "converged": fit.converged,
                       "seed": seed})
    out.json("lifetime.json", {"results": report})


def cmd_saturation(cfg, out, threads):
    c = cfg["saturation"]
    powers = np.linspace(0.0, c["max_power"], c["points"])
    spec = S.saturation_curve(S.SaturationParams(c["i_sat"], c["p_sat"]), powers)
    if c["noise"] > 0:
        rng = np.random.Generator(np.random.Philox(derive_seed(cfg["seed"], "saturation")))
        noisy = spec.values * (1.0 + c["noise"] * rng.standard_normal(powers.size))
        spec = S.Spectrum("saturation", powers, np.clip(noisy, 0, None),
                          {**spec.metadata, "seed": cfg["seed"], "noise": c["noise"]})
    out.spectrum("saturation", spec)
    out.json("saturation_fit.json", F.fit_saturation(spec).to_dict())


def _simulate_shards(cfg, threads):
    model = C.build_model(cfg)
    c = cfg["stream"]
    rm = R.build_rate_matrix(model, cfg["temperature"], c["pump"])
    n = c["shards"]
    d = c["duration_s"] / n
    seeds = [derive_seed(cfg["seed"], "stream", k) for k in range(n)]

    def one(seed):
        return P.simulate_stream(rm, d, c["collection_efficiency"], seed)

    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        shards = list(pool.map(one, seeds))
    return rm, shards, seeds


def cmd_stream(cfg, out, threads):
    rm, shards, seeds = _simulate_shards(cfg, threads)
    d = shards[0].duration
    times = np.concatenate([s.arrival_times + k * d for k, s in enumerate(shards)])
    total = cfg["stream"]["duration_s"]
    stream = P.PhotonStream(times, total, cfg["seed"], shards[0].model_hash)
    io.write_photon_stream(out.path("photons.bin"), stream)
    out.json("stream.json", {
        "n_photons": len(stream), "duration_s": total, "mean_rate": len(stream) / total,
        "expected_rate": R.radiative_flux(rm) * cfg["stream"]["collection_efficiency"],
        "model_hash": stream.model_hash, "shard_seeds": seeds})


def cmd_g2(cfg, out, threads):
    c = cfg["g2"]
    path = _resolve_path(cfg, c["stream_file"])
    if path is not None:
        stream = io.read_photon_stream(path, cfg["stream"]["duration_s"])
        hist = P.g2_estimate(stream, c["bin_width_s"], c["max_lag_s"], c["start_stop"])
    else:
        _, shards, _ = _simulate_shards(cfg, threads)
        hists = [P.g2_estimate(s, c["bin_width_s"], c["max_lag_s"], c["start_stop"])
                 for s in shards]
        hist = P.combine_histograms(hists)
    if out.fmt == "json":
        out.json("g2.json", {"lags": hist.lags, "g2": hist.g2, "counts": hist.counts,
                             "bin_width": hist.bin_width, "normalization": hist.normalization})
    else:
        io.write_correlation(out.path("g2.csv"), hist)
    out.json("g2_summary.json", {"g2_zero_bin": float(hist.g2[0]),
                                 "n_photons": hist.n_photons, "duration_s": hist.duration})


def read_manifest(path):
    """``(entry, resolved path)`` pairs from a JSON list, ``{"spectra": [...]}`` or plain lines."""
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    try:
        obj = json.loads(text)
        entries = obj["spectra"] if isinstance(obj, dict) else obj
    except json.JSONDecodeError:
        entries = [ln.strip() for ln in text.splitlines() if ln.strip() and not ln.startswith("#")]
    return [(e, Path(e) if Path(e).is_absolute() else path.parent / e) for e in map(str, entries)]


def fit_spectrum(spec, n_lines=None, tail_start=0.0, lineshape="auto"):
    if spec.kind == "decay":
        return F.fit_exponential(spec, tail_start), {}
    if spec.kind == "saturation":
        return F.fit_saturation(spec), {}
    n = n_lines or (4 if spec.kind == "PL" else 1)
    resolution = float(spec.metadata.get("resolution") or 0.0)
    if lineshape == "auto":
        lineshape = "voigt" if resolution > 0 else "lorentzian"
    if lineshape == "voigt":
        res = F.fit_multi_voigt(spec, n, resolution)
    else:
        res = F.fit_multi_lorentzian(spec, n)
    areas = F.line_areas(res, n)
    derived = {"area_fractions": (areas / areas.sum()).tolist()}
    if n == 4:
        labels = ["D", "C", "B", "A"]  # ascending position
        derived["line_weights"] = dict(zip(labels, derived["area_fractions"]))
        derived["ground_splitting_hz"] = res.params["position1"] - res.params["position0"]
    return res, derived


def cmd_fit(cfg, out, threads):
    c = cfg["fit"]
    manifest = _resolve_path(cfg, c["manifest"])
    if manifest is None:
        raise InsufficientDataError("fit needs fit.manifest listing spectra")
    paths = read_manifest(manifest)
    if not paths:
        raise InsufficientDataError("fit manifest lists no spectra")

    def one(item):
        entry, p = item
        spec = io.read_spectrum(p)
        res, derived = fit_spectrum(spec, c["n_lines"], c["tail_start_s"], c["lineshape"])
        return {"source": entry, "kind": spec.kind, "result": res.to_dict(), "derived": derived}

    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        results = list(pool.map(one, paths))
    out.json("fits.json", {"fits": results})


def fixture_records():
    ref = resources.files("sivsim").joinpath("data", FIXTURE_LINES)
    with resources.as_file(ref) as p:
        return io.read_line_records(p)


def overlap_report(records, c):
    pairs = O.adjacent_pairs(records, c["same_class_only"])
    reports = [O.pair_report(a, b) for a, b in pairs]
    gaps = O.pairwise_detunings(records, same_class_only=False)
    hist = O.detuning_histogram(gaps, c["primary_bin_hz"], c["sub_bins"])
    best = max(reports, key=lambda r: (r.overlap, r.a, r.b))
    thr = c["threshold_hz"]
    summary = {
        "n_records": len(records),
        "max_overlap": best.overlap, "max_overlap_pair": [best.a, best.b],
        "max_overlap_detuning_hz": best.detuning,
        "max_mode_overlap": max(r.mode_overlap for r in reports),
        "adjacent_gaps_hz": gaps,
        "n_gaps_below_threshold": sum(g < thr for g in gaps),
        "n_gaps_below_30pct": sum(g < 0.3 * thr for g in gaps),
        "match_probability": O.match_probability(records, thr),
        "histogram": {"edges_hz": hist.edges, "counts": hist.counts,
                      "sub_edges_hz": hist.sub_edges, "sub_counts": hist.sub_counts},
    }
    return reports, summary


def cmd_overlap(cfg, out, threads):
    c = cfg["overlap"]
    path = _resolve_path(cfg, c["records"])
    records = fixture_records() if path is None else io.read_line_records(path)
    reports, summary = overlap_report(records, c)
    out.table("overlap_pairs", {
        "a": [r.a for r in reports], "b": [r.b for r in reports],
        "detuning_hz": [r.detuning for r in reports], "overlap": [r.overlap for r in reports],
        "mode_overlap": [r.mode_overlap for r in reports]})
    out.json("overlap_report.json", summary)


def cmd_ensemble(cfg, out, threads):
    ecfg = C.build_ensemble_config(cfg)
    sample = E.generate(ecfg)
    if out.fmt == "json":
        out.json("ensemble_lines.json", [vars(r) for r in sample.line_records])
    else:
        io.write_line_records(out.path("ensemble_lines.csv"), sample.line_records,
                              {"seed": ecfg.seed, "temperature": ecfg.temperature})
    out.json("ensemble.json", {"seed": ecfg.seed,
                               "emitters": [E.model_to_dict(m) for m in sample.emitters]})
    gaps = O.pairwise_detunings(sample.line_records)
    summary = {"n_emitters": ecfg.n_emitters,
               "n_gaps_below_94MHz": sum(g < 94e6 for g in gaps),
               "n_gaps_below_28p2MHz": sum(g < 0.3 * 94e6 for g in gaps),
               "ground_splitting_spread_hz": E.ground_splitting_spread(sample),
               "match_probability_94MHz": O.match_probability(sample.line_records, 94e6)}
    try:
        summary["class_separation_hz"] = E.class_separation(sample)
    except InsufficientDataError:
        summary["class_separation_hz"] = None
    out.json("ensemble_summary.json", summary)


def cmd_report(cfg, out, threads):
    from .report import acceptance_summary

    for name in COMMANDS:
        if name in ("report", "fit"):
            continue
        sub = Outputs(out.dir / name, out.fmt)
        HANDLERS[name](cfg, sub, threads)
        sub.manifest(name, cfg)
        out.files.extend(f"{name}/{f}" for f in sub.files)
    if out.fmt == "csv":
        # Refit every generated spectrum; the fit section's manifest is ignored here.
        spectra = [f"../{f}" for f in out.files
                   if f.endswith(".csv") and f.split("/")[0] in
                   ("simulate-pl", "simulate-ple", "lifetime", "saturation")]
        sub = Outputs(out.dir / "fit", out.fmt)
        sub.json("spectra.json", {"spectra": spectra})
        fit_cfg = {**cfg, "fit": {**cfg["fit"], "manifest": str(sub.dir / "spectra.json"),
                                  "n_lines": None}}
        cmd_fit(fit_cfg, sub, threads)
        sub.manifest("fit", cfg)
        out.files.extend(f"fit/{f}" for f in sub.files)
    out.json("acceptance.json", acceptance_summary(cfg))


HANDLERS = {
    "simulate-pl": cmd_simulate_pl, "simulate-ple": cmd_simulate_ple, "lifetime": cmd_lifetime,
    "saturation": cmd_saturation, "stream": cmd_stream, "g2": cmd_g2, "fit": cmd_fit,
    "overlap": cmd_overlap, "ensemble": cmd_ensemble, "report": cmd_report,
}


# ---------------------------------------------------------------- driver

def _load(config_path, seed):
    if config_path is None:
        cfg = C.default_config()
    else:
        cfg = C.load_config(config_path)
    if seed is not None:
        cfg["seed"] = seed
        cfg = C.resolve(cfg)
    return cfg


def run(command, config_path=None, output_dir=".", seed=None, threads=None, fmt="csv"):
    """Execute one command; returns the process exit status."""
    if threads is None:
        threads = int(os.environ.get(THREADS_ENV, "1") or 1)
    try:
        cfg = _load(config_path, seed)
        if config_path is not None:
            base = str(Path(config_path).resolve().parent)
        else:
            base = None
        out = Outputs(output_dir, fmt)
        run_cfg = dict(cfg)
        if base is not None:
            run_cfg["_config_dir"] = base
        HANDLERS[command](run_cfg, out, threads)
        out.manifest(command, cfg)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        for line in exc.errors:
            print(f"  {line}", file=sys.stderr)
        return 1
    except InsufficientDataError as exc:
        print(f"error: insufficient data: {exc}", file=sys.stderr)
        return 3
    except (SivError, ArithmeticError, ValueError, OSError, np.linalg.LinAlgError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


def validate(config_path):
    try:
        text = Path(config_path).read_text(encoding="utf-8")
    except OSError as exc:
        print(f"error: cannot read {config_path}: {exc}", file=sys.stderr)
        return 1
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        print(f"/: invalid JSON: {exc}", file=sys.stderr)
        return 1
    errors = C.validate_config(obj)
    for line in errors:
        print(line, file=sys.stderr)
    if not errors:
        print(f"{config_path}: valid")
    return 1 if errors else 0


def build_parser():
    parser = argparse.ArgumentParser(prog="sivsim", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="JSON run configuration (defaults if omitted)")
        p.add_argument("--out", default=".", help="output directory")
        p.add_argument("--seed", type=int, help="override the config seed")
        p.add_argument("--threads", type=int, help=f"worker threads (env {THREADS_ENV})")
        p.add_argument("--format", choices=("csv", "json"), default="csv")
    p = sub.add_parser("validate")
    p.add_argument("config_path", nargs="?")
    p.add_argument("--config", dest="config_opt")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    if args.command == "validate":
        path = args.config_opt or args.config_path
        if path is None:
            print("error: validate needs a config path", file=sys.stderr)
            return 1
        return validate(path)
    return run(args.command, args.config, args.out, args.seed, args.threads, args.format)


if __name__ == "__main__":
    sys.exit(main())
