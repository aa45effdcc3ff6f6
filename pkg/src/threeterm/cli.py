"""Command-line front end: ``check``, ``region``, ``trace``, ``gm`` and ``simulate``."""
from __future__ import annotations

import argparse
import json
import math
import os
import re
import sys
import tempfile
from typing import Sequence

import numpy as np

from . import __version__
from .config import (CBT_RATES, COMMANDS, DEFAULT_SEED, FORMATS, PAIRS, SCENARIOS, THEOREMS, ConfigError,
                     RunConfig, build_config, read_sections)
from .info import DistortionMatrix, JointPmf, entropy, markov_check, mutual_info, read_pmf
from .region.closed_form import region_lossless, region_theorem2, region_theorem3, region_theorem4, region_theorem5
from .region.constraints import TOTALS, RateRegion, fmt, region_csv
from .region.optimize import InfeasibleDistortion, InfeasibleWithinBudget, SearchParams
from .region.schedule import SOURCES, AuxSchedule, aux_name
from .region.theorem1 import eval_theorem1, total_rates
from .sim.codebook import stream
from .sim.typicality import IntractableEnumeration

SCHEMA_VERSION = 1
EXIT_CONFIG, EXIT_INFEASIBLE, EXIT_NUMERIC = 2, 3, 4
_DESC = re.compile(r"^U([123])>(\d+)_(\d+)$")


class Infeasible(RuntimeError):
    pass


# argument parsing -------------------------------------------------------------

# (flag, section, key, help); every flag maps onto one configuration key
_GLOBAL = [("--config", None, None, "INI configuration file; flags override its values"),
           ("--seed", "run", "seed", f"master seed (default {DEFAULT_SEED})"),
           ("--out", "run", "out", "output file (default: standard output)"),
           ("--format", "run", "format", "output format: " + " | ".join(FORMATS)),
           ("--threads", "run", "threads", "worker processes for simulation")]
_PMF = [("--pmf", "run", "pmf_path", "joint pmf file")]
_REGION = _PMF + [("--theorem", "run", "theorem", " | ".join(THEOREMS))] + \
    [(f"--{p.lower()}", "distortion", p, f"distortion target {p}") for p in PAIRS] + \
    [("--rounds", "search", "rounds", "number of rounds K"),
     ("--restarts", "search", "restarts", "optimizer restarts"),
     ("--iterations", "search", "iterations", "optimizer iterations per restart"),
     ("--max-card", "search", "max_card", "cap on auxiliary cardinalities ('none' for the theorem bound)")]
_FLAGS = {
    "check": _PMF,
    "region": _REGION,
    "trace": _REGION + [("--target", "trace", "target", "distortion pair to sweep"),
                        ("--grid", "trace", "grid", "sweep lo:hi:steps")],
    "gm": [("--alpha", "gm", "alpha", "mixing probability"),
           ("--sigma0sq", "gm", "sigma0sq", "variance of the first component"),
           ("--sigma1sq", "gm", "sigma1sq", "variance of the second component"),
           ("--dmin", "gm", "dmin", "smallest distortion on the grid"),
           ("--dmax", "gm", "dmax", "largest distortion on the grid"),
           ("--steps", "gm", "steps", "grid points"),
           ("--r1", "gm", "r1", "fixed rate of node 1 (default: binary entropy of alpha)"),
           ("--spacing", "gm", "spacing", "grid spacing: log | linear")],
    "simulate": _PMF + [("--scenario", "simulate", "scenario", " | ".join(SCENARIOS)),
                        ("--n", "simulate", "n", "comma-separated block lengths"),
                        ("--trials", "simulate", "trials", "trials per block length"),
                        ("--delta", "simulate", "delta", "typicality tolerance"),
                        ("--ratio", "simulate", "ratio", "spread between tolerance levels"),
                        ("--mode", "simulate", "mode", "codeword sampling: auto | exact | rejection"),
                        ("--max-attempts", "simulate", "max_attempts", "rejection attempts per codeword"),
                        ("--margin", "simulate", "margin", "interactive: bin rates this far above the bounds"),
                        ("--cover", "simulate", "cover", "interactive: codebook rates this far above covering")]
                       + [(f"--{k.lower().replace('_', '-')}", "rates", k, f"cbt rate {k}") for k in CBT_RATES],
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="threeterm", description=__doc__)
    parser.add_argument("--version", action="version", version=f"threeterm {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for cmd in COMMANDS:
        p = sub.add_parser(cmd, help=f"{cmd} command")
        for flag, _sec, key, text in _GLOBAL + _FLAGS[cmd]:
            p.add_argument(flag, dest=key or "config", help=text, default=None, metavar=(key or "path").upper())
    return parser


def config_from_args(args: argparse.Namespace) -> RunConfig:
    sections: dict[str, dict[str, str]] = {}
    if args.config:
        with open(args.config) as fh:
            sections = read_sections(fh.read())
    sections.setdefault("run", {})["command"] = args.command
    for flag, sec, key, _ in _GLOBAL + _FLAGS[args.command]:
        if sec is None:
            continue
        val = getattr(args, key, None)
        if val is not None:
            sections.setdefault(sec, {})[key] = str(val)
    return build_config(sections)


# output -------------------------------------------------------------------------

def _clean(x):
    if isinstance(x, float):
        if not math.isfinite(x):
            return str(x)
        return float(fmt(x))
    if isinstance(x, (np.floating, np.integer)):
        return _clean(x.item())
    if isinstance(x, dict):
        return {str(k): _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    return x


def write_output(text: str, path: str | None) -> None:
    """Write once: a temporary file in the target directory renamed into place."""
    if path is None:
        sys.stdout.write(text)
        return
    d = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(prefix=".threeterm-", dir=d)
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def report_json(cfg: RunConfig, results) -> str:
    doc = {"schema_version": SCHEMA_VERSION, "tool": "threeterm", "version": __version__,
           "command": cfg.command, "config": cfg.echo(), "results": results}
    return json.dumps(_clean(doc), indent=2, sort_keys=True) + "\n"


def rows_csv(header: Sequence[str], rows: list[Sequence]) -> str:
    lines = [",".join(header)]
    for r in rows:
        lines.append(",".join("" if v is None else (fmt(v) if isinstance(v, float) else str(v)) for v in r))
    return "\n".join(lines) + "\n"


def region_dict(region: RateRegion) -> dict:
    return {"constraints": [{"id": c.label or f"c{i}", "coeffs": dict(c.coeffs), "bound_bits": c.bound}
                            for i, c in enumerate(region.constraints)],
            "distortions": dict(region.distortions),
            "boundary_samples": [{"rates": r, "distortions": d} for r, d in region.boundary_samples]}


# commands -----------------------------------------------------------------------

def _measures(pmf: JointPmf) -> dict[str, DistortionMatrix]:
    return {s: DistortionMatrix.hamming(pmf.size(s)) for s in SOURCES}


def _search(cfg: RunConfig) -> SearchParams:
    return SearchParams(restarts=cfg.restarts, iterations=cfg.iterations, seed=cfg.seed)


def parse_description(name: str):
    m = _DESC.match(name)
    if not m:
        raise ConfigError([f"schedule.{name}: not a description name (expected e.g. U1>23_1)"])
    return int(m.group(1)), m.group(2), int(m.group(3))


def build_schedule(cfg: RunConfig, pmf: JointPmf) -> AuxSchedule:
    """Descriptions from the ``[schedule]`` section: ``copy`` of the origin's source or a random kernel."""
    keys = {name: parse_description(name) for name in cfg.schedule}
    K = max([cfg.rounds] + [k[2] for k in keys.values()])
    sched = AuxSchedule(K)
    errors = []
    for name, key in keys.items():
        spec = cfg.schedule[name]
        card = pmf.size(SOURCES[key[0] - 1]) if spec == "copy" else int(spec)
        try:
            sched.add(*key, card)
        except ValueError as e:
            errors.append(f"schedule.{name}: {e}")
    if errors:
        raise ConfigError(errors)
    for key in sched.active():
        if cfg.schedule[aux_name(key)] == "copy":
            shape = sched.kernel_shape(key, pmf.sizes)
            k = shape[-1]
            kern = np.zeros(shape)
            # conditioning starts with the origin's own source
            idx = np.arange(k)
            kern.reshape(k, -1, k)[idx, :, idx] = 1.0
            sched.specs[key].kernel = kern
    sched.fill_random(pmf.sizes, stream(cfg.seed, "schedule"))
    return sched


def run_region(cfg: RunConfig, pmf: JointPmf, distortion: dict[str, float] | None = None) -> RateRegion:
    D = cfg.distortion if distortion is None else distortion
    d = _measures(pmf)
    params = _search(cfg)
    t = cfg.theorem
    if t == "t2":
        return region_theorem2(pmf, d, D["D32"], params, cfg.max_card)
    if t == "t3":
        return region_theorem3(pmf, d, D["D12"], D["D32"], params, cfg.max_card)
    if t == "t4":
        return region_theorem4(pmf, d, D["D31"], D["D12"], params, cfg.max_card)
    if t == "t5":
        return region_theorem5(pmf, d, {k: D.get(k) for k in ("D12", "D21", "D31", "D32")}, cfg.rounds,
                               params, cfg.max_card)
    if t == "t7":
        return region_lossless(pmf)
    sched = build_schedule(cfg, pmf)
    region = total_rates(eval_theorem1(pmf, sched, d))
    over = {k: v for k, v in D.items() if region.distortions.get(k, 0.0) > v + 1e-9}
    if over:
        raise Infeasible("schedule misses distortion targets: " + ", ".join(
            f"{k} achieves {region.distortions[k]:.6g} > {v:.6g}" for k, v in over.items()))
    return region


def cmd_check(cfg: RunConfig, pmf: JointPmf):
    rows = [("size_" + s, float(pmf.size(s))) for s in SOURCES]
    for s in SOURCES:
        others = [o for o in SOURCES if o != s]
        rows.append((f"H({s})", entropy(pmf, s)))
        rows.append((f"H({s}|{''.join(others)})", entropy(pmf, s, others)))
    for a, b in (("X1", "X2"), ("X1", "X3"), ("X2", "X3")):
        rows.append((f"I({a};{b})", mutual_info(pmf, a, b)))
    rows.append(("markov_X1-X3-X2", markov_check(pmf, ("X1", "X3", "X2"))))
    return {"quantities": dict(rows)}, rows_csv(["quantity", "value"], rows)


def cmd_region(cfg: RunConfig, pmf: JointPmf):
    region = run_region(cfg, pmf)
    return region_dict(region), region_csv(region, TOTALS)


def cmd_trace(cfg: RunConfig, pmf: JointPmf):
    lo, hi, steps = cfg.trace_grid
    rows = []
    for D in np.linspace(lo, hi, steps):
        targets = dict(cfg.distortion)
        targets[cfg.trace_target] = float(D)
        try:
            region = run_region(cfg, pmf, targets)
        except (InfeasibleDistortion, InfeasibleWithinBudget):
            rows.append((float(D), None, None, None))
            continue
        r1, r2 = region.bound({"R1": 1}), region.bound({"R2": 1})
        s = region.bound({"R1": 1, "R2": 1})
        if s is None and r1 is not None and r2 is not None:
            s = r1 + r2
        rows.append((float(D), r1, r2, s))
    header = ["D_target", "R1", "R2", "sum"]
    return {"target": cfg.trace_target, "rows": [dict(zip(header, r)) for r in rows]}, rows_csv(header, rows)


def cmd_gm(cfg: RunConfig, pmf=None):
    from .gaussian_mixture import GmSource, compare_curves, curves_csv, default_grid
    g = cfg.gm
    src = GmSource(g["alpha"], g["sigma0sq"], g["sigma1sq"])
    if g["dmin"] is None and g["dmax"] is None:
        grid = default_grid(src, g["steps"], g["spacing"])
    else:
        lo = g["dmin"] if g["dmin"] is not None else 1e-3 * src.variance
        hi = g["dmax"] if g["dmax"] is not None else src.variance
        if not lo < hi:
            raise ConfigError(["gm.dmin: must be below gm.dmax"])
        grid = np.geomspace(lo, hi, g["steps"]) if g["spacing"] == "log" else np.linspace(lo, hi, g["steps"])
    rows = compare_curves(src, grid, g["r1"])
    return {"rows": rows}, curves_csv(rows)


def _sim_configs(cfg: RunConfig, pmf: JointPmf):
    from .sim.cbt import CbtConfig, CbtRates, copy_kernels
    from .sim.interactive import InteractiveConfig, suggest_rates
    from .sim.report import SimParams
    params = SimParams(cfg.delta, cfg.ratio, cfg.mode, cfg.max_attempts)
    if cfg.scenario == "cbt":
        rates = CbtRates(*(cfg.rates[k][0] for k in CBT_RATES))
        k1, k2 = copy_kernels(pmf)
        return [CbtConfig(pmf, k1, k2, rates, n, params) for n in cfg.n], {k: cfg.rates[k][0] for k in CBT_RATES}
    sched = build_schedule(cfg, pmf)
    if cfg.margin is not None:
        rates = suggest_rates(pmf, sched, cfg.margin, cfg.cover)
    else:
        rates = {k: tuple(v) for k, v in cfg.rates.items() if k in cfg.schedule}
    return [InteractiveConfig(pmf, sched, rates, n, params) for n in cfg.n], {k: list(v) for k, v in rates.items()}


def cmd_simulate(cfg: RunConfig, pmf: JointPmf):
    from .sim.harness import estimate_error, estimates_csv
    configs, rates = _sim_configs(cfg, pmf)
    ests = [estimate_error(c, cfg.trials, cfg.seed, cfg.threads) for c in configs]
    return {"scenario": cfg.scenario, "rates": rates, "estimates": [e.to_dict() for e in ests]}, estimates_csv(ests)


_COMMANDS = {"check": cmd_check, "region": cmd_region, "trace": cmd_trace, "gm": cmd_gm, "simulate": cmd_simulate}


def dispatch(cfg: RunConfig) -> str:
    """Run the configured command and return the rendered output."""
    pmf = None
    if cfg.command != "gm":
        try:
            pmf = read_pmf(cfg.pmf_path)
        except OSError as e:
            raise ConfigError([f"run.pmf_path: cannot read {cfg.pmf_path!r}: {e.strerror}"]) from None
        except ValueError as e:
            raise ConfigError([f"run.pmf_path: {e}"]) from None
        missing = [s for s in SOURCES if s not in pmf.names]
        if missing:
            raise ConfigError([f"run.pmf_path: pmf lacks {', '.join(missing)}"])
    results, csv_text = _COMMANDS[cfg.command](cfg, pmf)
    return report_json(cfg, results) if cfg.format == "json" else csv_text


def _fail(kind: str, message: str, code: int, errors=None) -> int:
    doc = {"error": kind, "message": message, "exit_code": code}
    if errors:
        doc["errors"] = errors
    sys.stderr.write(json.dumps(doc) + "\n")
    return code


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = config_from_args(args)
        for w in cfg.warnings:
            sys.stderr.write(json.dumps({"warning": w}) + "\n")
        text = dispatch(cfg)
        write_output(text, cfg.out)
    except ConfigError as e:
        return _fail("config", str(e), EXIT_CONFIG, e.errors)
    except (InfeasibleDistortion, InfeasibleWithinBudget, Infeasible) as e:
        return _fail("infeasible", str(e), EXIT_INFEASIBLE)
    except (ArithmeticError, IntractableEnumeration) as e:
        return _fail("numeric", str(e), EXIT_NUMERIC)
    except (ValueError, OSError) as e:
        return _fail("config", str(e), EXIT_CONFIG)
    return 0


if __name__ == "__main__":
    sys.exit(main())
