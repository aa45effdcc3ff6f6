"""Run configuration: INI text in, validated :class:`RunConfig` out.

Sections and keys::

    [run]       command, pmf_path, theorem, seed, out, format, threads
    [distortion] D12 D13 D21 D23 D31 D32 (targets), measure = hamming
    [search]    rounds, restarts, iterations, max_card
    [trace]     target, grid = lo:hi:steps
    [gm]        alpha, sigma0sq, sigma1sq, dmin, dmax, steps, r1, spacing
    [simulate]  scenario, n, trials, delta, ratio, mode, max_attempts, margin, cover
    [rates]     cbt: R1 R2 R1_hat R2_hat; interactive: <description> = R R_hat
    [schedule]  <description> = copy | <cardinality>

Unknown keys produce warnings; every other problem is collected and raised
together as :class:`ConfigError`.
"""
from __future__ import annotations

import configparser
from dataclasses import dataclass, field, fields

DEFAULT_SEED = 20240601
COMMANDS = ("check", "region", "trace", "gm", "simulate")
THEOREMS = ("t2", "t3", "t4", "t5", "t7", "t1-schedule")
FORMATS = ("csv", "json")
PAIRS = ("D12", "D13", "D21", "D23", "D31", "D32")
SCENARIOS = ("cbt", "interactive")
CBT_RATES = ("R1", "R2", "R1_hat", "R2_hat")

# distortion targets each theorem reads
THEOREM_TARGETS = {"t2": ("D32",), "t3": ("D12", "D32"), "t4": ("D31", "D12"),
                   "t5": ("D12", "D21", "D31", "D32"), "t7": (), "t1-schedule": PAIRS}


class ConfigError(ValueError):
    def __init__(self, errors: list[str]):
        super().__init__("; ".join(errors))
        self.errors = list(errors)


@dataclass
class RunConfig:
    command: str
    pmf_path: str | None = None
    theorem: str | None = None
    seed: int = DEFAULT_SEED
    out: str | None = None
    format: str = "csv"
    threads: int = 1
    distortion: dict[str, float] = field(default_factory=dict)
    measure: str = "hamming"
    rounds: int = 1
    restarts: int = 6
    iterations: int = 150
    max_card: int | None = 3
    trace_target: str | None = None
    trace_grid: tuple[float, float, int] | None = None
    gm: dict[str, float | int | str | None] = field(default_factory=dict)
    scenario: str | None = None
    n: tuple[int, ...] = (8, 12, 16)
    trials: int = 200
    delta: float = 1.0
    ratio: float = 2.0
    mode: str = "auto"
    max_attempts: int = 200
    margin: float | None = None
    cover: float | None = None
    rates: dict[str, tuple[float, ...]] = field(default_factory=dict)
    schedule: dict[str, str] = field(default_factory=dict)
    warnings: list[str] = field(default_factory=list, compare=False)

    def echo(self) -> dict:
        """Settings that determine results; output path and worker count are left out."""
        out = {}
        for f in fields(self):
            if f.name in ("warnings", "out", "threads"):
                continue
            v = getattr(self, f.name)
            out[f.name] = list(v) if isinstance(v, tuple) else v
        return out

    def to_text(self) -> str:
        """INI text that parses back to an equal configuration."""
        s: dict[str, dict[str, str]] = {"run": {"command": self.command, "seed": str(self.seed),
                                                "format": self.format, "threads": str(self.threads)}}
        r = s["run"]
        if self.pmf_path is not None:
            r["pmf_path"] = self.pmf_path
        if self.theorem is not None:
            r["theorem"] = self.theorem
        if self.out is not None:
            r["out"] = self.out
        s["distortion"] = {k: repr(v) for k, v in self.distortion.items()}
        s["distortion"]["measure"] = self.measure
        s["search"] = {"rounds": str(self.rounds), "restarts": str(self.restarts),
                       "iterations": str(self.iterations),
                       "max_card": "none" if self.max_card is None else str(self.max_card)}
        s["trace"] = {}
        if self.trace_target is not None:
            s["trace"]["target"] = self.trace_target
        if self.trace_grid is not None:
            lo, hi, k = self.trace_grid
            s["trace"]["grid"] = f"{lo!r}:{hi!r}:{k}"
        s["gm"] = {k: ("none" if v is None else (repr(v) if isinstance(v, float) else str(v)))
                   for k, v in self.gm.items()}
        sim = {"n": ",".join(map(str, self.n)), "trials": str(self.trials), "delta": repr(self.delta),
               "ratio": repr(self.ratio), "mode": self.mode, "max_attempts": str(self.max_attempts)}
        if self.scenario is not None:
            sim["scenario"] = self.scenario
        if self.margin is not None:
            sim["margin"] = repr(self.margin)
        if self.cover is not None:
            sim["cover"] = repr(self.cover)
        s["simulate"] = sim
        s["rates"] = {k: " ".join(repr(x) for x in v) for k, v in self.rates.items()}
        s["schedule"] = dict(self.schedule)
        lines = []
        for sec, kv in s.items():
            lines.append(f"[{sec}]")
            lines += [f"{k} = {v}" for k, v in kv.items()]
            lines.append("")
        return "\n".join(lines)


_KNOWN = {
    "run": {"command", "pmf_path", "theorem", "seed", "out", "format", "threads"},
    "distortion": set(PAIRS) | {"measure"},
    "search": {"rounds", "restarts", "iterations", "max_card"},
    "trace": {"target", "grid"},
    "gm": {"alpha", "sigma0sq", "sigma1sq", "dmin", "dmax", "steps", "r1", "spacing"},
    "simulate": {"scenario", "n", "trials", "delta", "ratio", "mode", "max_attempts", "margin", "cover"},
}
GM_DEFAULTS = {"alpha": 0.1, "sigma0sq": 0.5, "sigma1sq": 2.0, "dmin": None, "dmax": None, "steps": 50,
               "r1": None, "spacing": "log"}


class _Reader:
    def __init__(self, sections: dict[str, dict[str, str]]):
        self.s = sections
        self.errors: list[str] = []

    def get(self, sec: str, key: str, conv, default=None, check=None, why: str = ""):
        raw = self.s.get(sec, {}).get(key)
        if raw is None or raw == "":
            return default
        if isinstance(raw, str) and raw.strip().lower() == "none" and default is None:
            return None
        try:
            val = conv(raw.strip())
        except (TypeError, ValueError):
            self.errors.append(f"{sec}.{key}: malformed value {raw!r}")
            return default
        if check is not None and not check(val):
            self.errors.append(f"{sec}.{key}: {why or 'invalid value'} (got {raw!r})")
            return default
        return val

    def choice(self, sec: str, key: str, options, default=None):
        return self.get(sec, key, str, default, lambda v: v in options, f"must be one of {', '.join(options)}")


def _floats(text: str) -> tuple[float, ...]:
    return tuple(float(x) for x in text.replace(",", " ").split())


def _ints(text: str) -> tuple[int, ...]:
    vals = tuple(int(x) for x in text.replace(",", " ").split())
    if not vals:
        raise ValueError("empty list")
    return vals


def _grid(text: str) -> tuple[float, float, int]:
    lo, hi, k = text.split(":")
    return float(lo), float(hi), int(k)


def build_config(sections: dict[str, dict[str, str]]) -> RunConfig:
    """Validate raw ``{section: {key: text}}`` values; raises :class:`ConfigError` listing every problem."""
    rd = _Reader(sections)
    warnings = []
    for sec, kv in sections.items():
        if sec in ("rates", "schedule"):
            continue
        if sec not in _KNOWN:
            warnings.append(f"unknown section [{sec}]")
            continue
        for k in kv:
            if k not in _KNOWN[sec]:
                warnings.append(f"unknown key {sec}.{k}")

    pos = lambda v: v > 0
    nonneg = lambda v: v >= 0
    command = rd.choice("run", "command", COMMANDS)
    if command is None and "command" not in sections.get("run", {}):
        rd.errors.append("run.command: missing required key")
    cfg = RunConfig(command=command or "check", warnings=warnings)
    cfg.pmf_path = rd.get("run", "pmf_path", str)
    cfg.theorem = rd.choice("run", "theorem", THEOREMS)
    cfg.seed = rd.get("run", "seed", int, DEFAULT_SEED, lambda v: 0 <= v < 2 ** 64, "must fit in 64 bits")
    cfg.out = rd.get("run", "out", str)
    cfg.format = rd.choice("run", "format", FORMATS, "csv")
    cfg.threads = rd.get("run", "threads", int, 1, pos, "must be positive")

    for k in PAIRS:
        v = rd.get("distortion", k, float, None, nonneg, "distortion targets must be nonnegative")
        if v is not None:
            cfg.distortion[k] = v
    cfg.measure = rd.choice("distortion", "measure", ("hamming",), "hamming")

    cfg.rounds = rd.get("search", "rounds", int, 1, pos, "must be positive")
    cfg.restarts = rd.get("search", "restarts", int, 6, pos, "must be positive")
    cfg.iterations = rd.get("search", "iterations", int, 150, pos, "must be positive")
    cfg.max_card = rd.get("search", "max_card", lambda t: None if t.lower() == "none" else int(t), 3,
                          lambda v: v is None or v >= 1, "must be at least 1")

    cfg.trace_target = rd.choice("trace", "target", PAIRS)
    cfg.trace_grid = rd.get("trace", "grid", _grid, None, lambda g: 0 <= g[0] <= g[1] and g[2] >= 1,
                            "need 0 <= lo <= hi and at least one step")

    gm = dict(GM_DEFAULTS)
    for k in ("alpha", "sigma0sq", "sigma1sq", "dmin", "dmax", "r1"):
        gm[k] = rd.get("gm", k, float, GM_DEFAULTS[k])
    gm["steps"] = rd.get("gm", "steps", int, 50, lambda v: v >= 2, "need at least two points")
    gm["spacing"] = rd.choice("gm", "spacing", ("log", "linear"), "log")
    if not 0 < gm["alpha"] < 1:
        rd.errors.append("gm.alpha: must lie strictly between 0 and 1")
    for k in ("sigma0sq", "sigma1sq"):
        if not gm[k] > 0:
            rd.errors.append(f"gm.{k}: must be positive")
    for k in ("dmin", "dmax"):
        if gm[k] is not None and not gm[k] > 0:
            rd.errors.append(f"gm.{k}: must be positive")
    if gm["r1"] is not None and gm["r1"] < 0:
        rd.errors.append("gm.r1: must be nonnegative")
    cfg.gm = gm

    cfg.scenario = rd.choice("simulate", "scenario", SCENARIOS)
    cfg.n = rd.get("simulate", "n", _ints, (8, 12, 16), lambda v: all(x >= 1 for x in v), "block lengths must be positive")
    cfg.trials = rd.get("simulate", "trials", int, 200, pos, "must be positive")
    cfg.delta = rd.get("simulate", "delta", float, 1.0, pos, "must be positive")
    cfg.ratio = rd.get("simulate", "ratio", float, 2.0, lambda v: v >= 1, "must be at least 1")
    cfg.mode = rd.choice("simulate", "mode", ("auto", "exact", "rejection"), "auto")
    cfg.max_attempts = rd.get("simulate", "max_attempts", int, 200, pos, "must be positive")
    cfg.margin = rd.get("simulate", "margin", float, None, nonneg, "must be nonnegative")
    cfg.cover = rd.get("simulate", "cover", float, None, pos, "must be positive")

    for k, raw in sections.get("rates", {}).items():
        try:
            vals = _floats(raw)
        except ValueError:
            rd.errors.append(f"rates.{k}: malformed value {raw!r}")
            continue
        if any(v <= 0 for v in vals):
            rd.errors.append(f"rates.{k}: rates must be positive")
        cfg.rates[k] = vals
    for k, raw in sections.get("schedule", {}).items():
        raw = raw.strip()
        if raw != "copy":
            try:
                if int(raw) < 1:
                    raise ValueError
            except ValueError:
                rd.errors.append(f"schedule.{k}: expected 'copy' or a positive cardinality, got {raw!r}")
        cfg.schedule[k] = raw

    _requirements(cfg, rd.errors)
    if rd.errors:
        raise ConfigError(rd.errors)
    return cfg


def _requirements(cfg: RunConfig, errors: list[str]) -> None:
    cmd = cfg.command
    if cmd in ("check", "region", "trace", "simulate") and not cfg.pmf_path:
        errors.append("run.pmf_path: missing required key")
    if cmd in ("region", "trace") and cfg.theorem is None:
        errors.append("run.theorem: missing required key")
    if cmd == "trace":
        if cfg.trace_target is None:
            errors.append("trace.target: missing required key")
        if cfg.trace_grid is None:
            errors.append("trace.grid: missing required key")
        if cfg.theorem in ("t7", "t1-schedule"):
            errors.append("run.theorem: traces need a theorem with distortion targets (t2..t5)")
        elif cfg.theorem and cfg.trace_target and cfg.trace_target not in THEOREM_TARGETS[cfg.theorem]:
            errors.append(f"trace.target: {cfg.trace_target} is not a target of {cfg.theorem}")
    if cmd == "region" and cfg.theorem in ("t2", "t3", "t4"):
        for k in THEOREM_TARGETS[cfg.theorem]:
            if k not in cfg.distortion:
                errors.append(f"distortion.{k}: missing required key for {cfg.theorem}")
    if cmd == "region" and cfg.theorem == "t1-schedule" and not cfg.schedule:
        errors.append("schedule: at least one description is required for t1-schedule")
    if cmd == "simulate":
        if cfg.scenario is None:
            errors.append("simulate.scenario: missing required key")
        elif cfg.scenario == "cbt":
            missing = [k for k in CBT_RATES if k not in cfg.rates]
            if missing:
                errors.append(f"rates: cbt needs {', '.join(missing)}")
            for k in CBT_RATES:
                if k in cfg.rates and len(cfg.rates[k]) != 1:
                    errors.append(f"rates.{k}: expected one number")
        else:
            if not cfg.schedule:
                errors.append("schedule: at least one description is required for the interactive scenario")
            if cfg.margin is None:
                for k in cfg.schedule:
                    if k not in cfg.rates:
                        errors.append(f"rates.{k}: missing (or set simulate.margin and simulate.cover)")
                    elif len(cfg.rates[k]) != 2:
                        errors.append(f"rates.{k}: expected a bin rate and a codebook rate")
            elif cfg.cover is None:
                errors.append("simulate.cover: required together with simulate.margin")


def read_sections(text: str) -> dict[str, dict[str, str]]:
    cp = configparser.ConfigParser(interpolation=None, delimiters=("=",))
    cp.optionxform = str
    try:
        cp.read_string(text)
    except configparser.Error as e:
        raise ConfigError([f"unreadable configuration: {e}"]) from None
    return {sec: dict(cp[sec]) for sec in cp.sections()}


def parse_config(text: str) -> RunConfig:
    return build_config(read_sections(text))
