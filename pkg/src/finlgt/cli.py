"""``finlgt`` command-line driver."""

from __future__ import annotations

import csv
import io
import json
import math
import os
import sys
from pathlib import Path

import click
import jsonschema

from . import __version__
from .errors import ConfigError, LGTError
from .groups import load_custom, rep_by_id
from .lattice import CubeRegion, Loop, rectangle_loop

_INT4 = {"type": "array", "items": {"type": "integer"}, "minItems": 4, "maxItems": 4}
_NUM_OR_LIST = {"oneOf": [{"type": "number", "minimum": 0},
                          {"type": "array", "items": {"type": "number", "minimum": 0}, "minItems": 1}]}
_LOOP = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "start": _INT4,
        "steps": {"type": "array", "items": {"type": "string", "pattern": "^[+\\-−][1-4]$"}},
        "rectangle": {
            "type": "object",
            "additionalProperties": False,
            "required": ["corner", "width", "height"],
            "properties": {
                "corner": _INT4,
                "width": {"type": "integer", "minimum": 1},
                "height": {"type": "integer", "minimum": 1},
                "plane": {"type": "array", "items": {"type": "integer", "minimum": 1, "maximum": 4},
                          "minItems": 2, "maxItems": 2},
            },
        },
    },
    "oneOf": [{"required": ["start", "steps"]}, {"required": ["rectangle"]}],
}

CONFIG_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "command": {"type": "string"},
        "group": {"type": "string"},
        "rep": {"type": "string"},
        "custom_group": {"type": ["object", "string"]},
        "rep_index": {"type": "integer", "minimum": 0},
        "region": {
            "type": "object",
            "additionalProperties": False,
            "required": ["side"],
            "properties": {"corner": _INT4, "side": {"type": "integer", "minimum": 1}},
        },
        "loop": _LOOP,
        "beta": _NUM_OR_LIST,
        "ell": _NUM_OR_LIST,
        "N": {"type": "number", "minimum": 1},
        "L": {"type": "number", "minimum": 0},
        "sampler": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "algo": {"enum": ["heatbath", "metropolis"]},
                "schedule": {"enum": ["sequential", "checkerboard"]},
                "sweeps": {"type": "integer", "minimum": 20},
                "burnin": {"type": "integer", "minimum": 0},
                "thin": {"type": "integer", "minimum": 1},
                "seed": {"type": "integer", "minimum": 0},
                "chains": {"type": "integer", "minimum": 1},
                "start": {"enum": ["cold", "hot"]},
            },
        },
        "poisson": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"source": {"enum": ["mc", "exact"]}},
        },
        "budget": {"type": "integer", "minimum": 1},
        "seed": {"type": "integer", "minimum": 0},
        "output": {"type": "string"},
    },
}


# ---------------------------------------------------------------- config handling

def load_config(path) -> dict:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    validate_config(doc)
    return doc


def validate_config(doc):
    try:
        jsonschema.validate(doc, CONFIG_SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"invalid config at {where}: {exc.message}") from exc


def resolve_rep(cfg):
    if "custom_group" in cfg:
        _, reps = load_custom(cfg["custom_group"])
        idx = cfg.get("rep_index", 0)
        if idx >= len(reps):
            raise ConfigError(f"custom group has {len(reps)} representations, rep_index={idx}")
        return reps[idx]
    if "rep" not in cfg:
        raise ConfigError("config needs 'rep' (or 'custom_group')")
    try:
        rep = rep_by_id(cfg["rep"])
    except (KeyError, LGTError) as exc:
        raise ConfigError(str(exc)) from exc
    if "group" in cfg and cfg["rep"].lower().partition("-")[0] != cfg["group"].lower():
        raise ConfigError(f"rep {cfg['rep']!r} does not belong to group {cfg['group']!r}")
    return rep


def resolve_region(cfg):
    r = cfg.get("region")
    if r is None:
        raise ConfigError("config needs 'region'")
    return CubeRegion(tuple(r.get("corner", (0, 0, 0, 0))), r["side"])


def resolve_loop(cfg, region=None):
    spec = cfg.get("loop")
    if spec is None:
        raise ConfigError("config needs 'loop'")
    if "rectangle" in spec:
        r = spec["rectangle"]
        loop = rectangle_loop(tuple(r["corner"]), r["width"], r["height"], tuple(r.get("plane", (1, 2))))
    else:
        loop = Loop(tuple(spec["start"]), spec["steps"])
    if not loop.closed:
        raise ConfigError("loop is not closed")
    if region is not None:
        box = loop.bounding_box()
        if not region.contains_box(box):
            raise ConfigError("loop leaves the region")
    return loop


def as_list(x):
    return list(x) if isinstance(x, list) else [x]


def resolve_budget(cfg, flag):
    from .oracle import EnumerationBudget

    value = cfg.get("budget")
    if flag is not None:
        value = flag
    if os.environ.get("LGT_BUDGET"):
        value = int(float(os.environ["LGT_BUDGET"]))
    return EnumerationBudget(value) if value else EnumerationBudget()


# ---------------------------------------------------------------- output

def header_lines(cfg, command):
    return [f"# finlgt {__version__}", f"# command: {command}",
            "# config: " + json.dumps(cfg, sort_keys=True, separators=(",", ":"))]


def write_csv(rows, columns, cfg, command, out_dir, name):
    buf = io.StringIO(newline="")
    for line in header_lines(cfg, command):
        buf.write(line + "\r\n")
    w = csv.DictWriter(buf, fieldnames=columns, lineterminator="\r\n")
    w.writeheader()
    for row in rows:
        w.writerow({k: _fmt(row.get(k, "")) for k in columns})
    _emit(buf.getvalue(), out_dir, name)


def write_json(doc, cfg, command, out_dir, name):
    payload = {"artifact_version": __version__, "command": command, "config": cfg, **doc}
    _emit(json.dumps(payload, indent=2, sort_keys=True, default=_json_default) + "\n", out_dir, name)


def _json_default(x):
    if hasattr(x, "tolist"):
        return x.tolist()
    if isinstance(x, complex):
        return {"re": x.real, "im": x.imag}
    raise TypeError(f"not serialisable: {type(x)}")


def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, bool):
        return "true" if v else "false"
    return v


def _emit(text, out_dir, name):
    if out_dir is None:
        sys.stdout.write(text)
        return
    d = Path(out_dir)
    d.mkdir(parents=True, exist_ok=True)
    with open(d / name, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


# ---------------------------------------------------------------- commands

def _common(f):
    f = click.option("--budget", type=int, default=None, help="Max enumerated configurations.")(f)
    f = click.option("--jobs", type=int, default=1, show_default=True, help="Worker cap.")(f)
    f = click.option("--seed", type=click.IntRange(0, 2**64 - 1), default=None, help="64-bit seed.")(f)
    f = click.option("--out", "out_dir", type=click.Path(file_okay=False), default=None,
                     help="Output directory (stdout if omitted).")(f)
    f = click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False), required=True)(f)
    return f


def _fail(exc):
    click.echo(f"error: {exc}", err=True)
    sys.exit(2)


@click.group()
@click.version_option(__version__, prog_name="finlgt")
def main():
    """Finite-group lattice gauge theory experiments."""


def _predict_rows(cfg):
    from .theory import LOG_FLOOR, beta_thresholds, error_bound_abelian, error_bound_general, predict_abelian, predict_general

    rep = resolve_rep(cfg)
    betas = as_list(cfg.get("beta", [1.0]))
    ells = as_list(cfg.get("ell", [4]))
    thr = beta_thresholds(rep)
    rows = []
    for beta in betas:
        bound = error_bound_general(rep, beta)
        abel_bound = None
        if rep.dim == 1 and "N" in cfg and "L" in cfg:
            abel_bound = error_bound_abelian(rep, beta, cfg["N"], cfg["L"])
        for ell in ells:
            g = predict_general(rep, beta, ell)
            row = {"beta": float(beta), "ell": float(ell), "predict_general": g.value,
                   "r_beta": g.r_beta, "log_r_beta": g.log_r_beta,
                   "bound_general": bound.bound, "log_bound_general": bound.log_bound,
                   "threshold_main": thr["main"], "threshold_abelian": thr["abelian"],
                   "threshold_ok": bound.threshold_ok, "degenerate": bound.degenerate}
            if rep.dim == 1:
                a = predict_abelian(rep, beta, ell)
                row["predict_abelian"] = a.value
                row["abelian_matches_general"] = abs(a.value - g.value) <= 1e-10 * max(g.value, 1e-300)
            if abel_bound is not None:
                row["bound_abelian"] = abel_bound.bound
                row["threshold_abelian_ok"] = abel_bound.threshold_ok
            for name in ("r_beta", "bound_general"):
                if row[name] < LOG_FLOOR:
                    row[name] = ""
            rows.append(row)
    return rows


PREDICT_COLUMNS = ["beta", "ell", "predict_general", "predict_abelian", "abelian_matches_general", "r_beta",
                   "log_r_beta", "bound_general", "log_bound_general", "bound_abelian", "threshold_main",
                   "threshold_abelian", "threshold_ok", "threshold_abelian_ok", "degenerate"]


@main.command()
@_common
def predict(config_path, out_dir, seed, jobs, budget):
    """First-order Wilson loop predictions with bounds and threshold flags."""
    try:
        cfg = load_config(config_path)
        write_csv(_predict_rows(cfg), PREDICT_COLUMNS, cfg, "predict", out_dir, "predict.csv")
    except LGTError as exc:
        _fail(exc)


def _sampler_params(cfg, beta, seed):
    from .sampler import SamplerParams

    region = resolve_region(cfg)
    s = cfg.get("sampler", {})
    return SamplerParams(
        region, resolve_rep(cfg), float(beta), [resolve_loop(cfg, region)],
        n_samples=s.get("sweeps", 1000), burn_in=s.get("burnin", 1000), thin=s.get("thin", 10),
        seed=seed if seed is not None else s.get("seed", cfg.get("seed", 0)), algo=s.get("algo", "heatbath"),
        schedule=s.get("schedule", "sequential"), chains=s.get("chains", 1), start=s.get("start", "cold"))


SAMPLE_COLUMNS = ["beta", "ell", "estimate", "stderr", "ess", "n", "estimate_im", "stderr_im", "ngamma_mean"]


@main.command()
@_common
def sample(config_path, out_dir, seed, jobs, budget):
    """Monte Carlo estimates of the Wilson loop and the N_gamma histogram."""
    from .sampler import ngamma_record, run_chains, wilson_record

    try:
        cfg = load_config(config_path)
        rows, hists = [], []
        for beta in as_list(cfg.get("beta", [1.0])):
            params = _sampler_params(cfg, beta, seed)
            samples = run_chains(params, jobs=jobs)
            w = wilson_record(samples)
            ng = ngamma_record(samples)
            ell = params.loops[0].length
            rows.append({"beta": float(beta), "ell": ell, "estimate": w.mean.real, "stderr": w.stderr, "ess": w.ess,
                         "n": w.n, "estimate_im": w.mean.imag, "stderr_im": w.imag_stderr,
                         "ngamma_mean": ng.mean.real})
            hists.append({"beta": float(beta), "ell": ell, **ng.histogram})
        write_csv(rows, SAMPLE_COLUMNS, cfg, "sample", out_dir, "sample.csv")
        write_json({"histograms": hists}, cfg, "sample", out_dir, "sample_histograms.json")
    except (LGTError, ValueError) as exc:
        _fail(exc)


@main.command()
@_common
def oracle(config_path, out_dir, seed, jobs, budget):
    """Exact partition function, Wilson loop and N_gamma law by enumeration."""
    from .oracle import TallySpec, enumerate_gauge_fixed

    try:
        cfg = load_config(config_path)
        region = resolve_region(cfg)
        rep = resolve_rep(cfg)
        spec = TallySpec(loops=[resolve_loop(cfg, region)] if "loop" in cfg else [])
        b = resolve_budget(cfg, budget)
        en = enumerate_gauge_fixed(region, rep, spec=spec, budget=b, jobs=jobs)
        values = []
        for beta in as_list(cfg.get("beta", [1.0])):
            v = {"beta": float(beta), "partition_function": en.partition_function(beta),
                 "log_partition_function": math.log(en.partition_function(beta))}
            if spec.loops:
                w = en.wilson(beta)
                v["wilson"] = {"re": w.real, "im": w.imag}
                v["ngamma_pmf"] = en.ngamma_pmf(beta).tolist()
            values.append(v)
        doc = {"inputs": {"region": {"corner": list(region.corner), "side": region.side}, "rep": rep.name},
               "value": values, "method": "gauge-fixed enumeration",
               "budget_used": {"configurations": en.visited, "max_configurations": b.max_configs}}
        write_json(doc, cfg, "oracle", out_dir, "oracle.json")
    except LGTError as exc:
        _fail(exc)


@main.command("diagnose-poisson")
@_common
def diagnose_poisson(config_path, out_dir, seed, jobs, budget):
    """Distance between the N_gamma law and Poisson(ell r_beta)."""
    from .groups import r_beta
    from .oracle import TallySpec, enumerate_gauge_fixed
    from .sampler import ngamma_record, run_chains
    from .theory import poisson_pmf_vector, tv_to_poisson

    try:
        cfg = load_config(config_path)
        region = resolve_region(cfg)
        rep = resolve_rep(cfg)
        loop = resolve_loop(cfg, region)
        source = cfg.get("poisson", {}).get("source", "mc")
        en = None
        if source == "exact":
            en = enumerate_gauge_fixed(region, rep, spec=TallySpec(loops=[loop]), budget=resolve_budget(cfg, budget),
                                       jobs=jobs)
        out = []
        for beta in as_list(cfg.get("beta", [1.0])):
            if en is not None:
                pmf = en.ngamma_pmf(beta).tolist()
            else:
                pmf = ngamma_record(run_chains(_sampler_params(cfg, beta, seed), jobs=jobs)).histogram["pmf"]
                pmf = [x / sum(pmf) for x in pmf]
            lam = loop.length * r_beta(rep, beta)
            out.append({"beta": float(beta), "lambda": lam, "tv": tv_to_poisson(pmf, lam), "pmf": pmf,
                        "poisson_pmf": poisson_pmf_vector(lam, len(pmf)).tolist()})
        write_json({"source": source, "results": out}, cfg, "diagnose-poisson", out_dir, "poisson.json")
    except LGTError as exc:
        _fail(exc)


@main.command()
@click.argument("suite", type=click.Choice(["dec", "gauge", "vortex", "factorization", "oracle-mc", "all"]))
@click.option("--seed", type=click.IntRange(0, 2**64 - 1), default=0, show_default=True)
def verify(suite, seed):
    """Run a named invariant suite; exit status 1 if any check fails."""
    from .verify import SUITES, run_suite

    names = list(SUITES) if suite == "all" else [suite]
    ok = True
    for name in names:
        for check in run_suite(name, seed=seed):
            click.echo(f"[{name}] {check.line()}")
            ok &= check.ok
    sys.exit(0 if ok else 1)


if __name__ == "__main__":
    main()
