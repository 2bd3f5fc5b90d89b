"""INI scenario files: parsing, defaults and cross-field validation.

Every key has a default (see ``DEFAULTS``); a file only needs the keys it
changes.  Lists are comma-separated.  Coefficients are ``offset`` plus an
optional ``<name>_modes`` list of sine amplitudes; the initial data take
their offsets from the boundary constants g and h.
"""

from __future__ import annotations

import configparser
from dataclasses import asdict, dataclass
from pathlib import Path

from .errors import ConfigurationError
from .grid import SpatialGrid, SubIntervalSet, TimeGrid
from .scenario import ScenarioSpec, SineSeries
from .weights import CarlemanConfig, build_beta

COMMANDS = ("forward", "weights", "carleman", "carleman-sys", "stab-b", "stab-ic",
            "logconvexity", "reconstruct")
# harnesses that only make sense on a positivity-admissible reference system
NEEDS_ASSUMPTIONS = ("carleman-sys", "stab-b", "stab-ic", "reconstruct")

DEFAULTS = {
    "grid": {"L": "1.0", "n": "201", "t0": "0.0", "T": "1.0", "nt": "400"},
    "geometry": {"omega": "0.3, 0.7", "omega_prime": "0.45, 0.55",
                 "omega_second": "0.4, 0.6", "x0": "0.5"},
    "carleman": {"m": "2.0", "s": "8, 16, 32", "lambda": "2, 4"},
    "system": {
        "a": "0.0", "a_modes": "", "b_tilde": "1.0", "b_tilde_modes": "",
        "c": "1.0", "c_modes": "", "d": "0.0", "d_modes": "",
        "gamma_modes": "1.0", "u0_modes": "0.5", "v0_modes": "1.0",
        "du0_modes": "", "dv0_modes": "",
        "g": "0.0", "h": "1.0", "R": "10.0", "r": "1.0", "c0": "1.0",
    },
    "experiment": {
        "harness": "forward", "eps": "0.001, 0.01, 0.1", "seed": "0", "ensemble": "20",
        "n_modes": "4", "alpha": "1e-8", "lsq_modes": "2", "lsq_budget": "20",
        "noise": "0.0", "output": "results",
    },
}


@dataclass(frozen=True)
class ScenarioConfig:
    # grid
    L: float
    n: int
    t0: float
    T: float
    nt: int
    # geometry
    omega: tuple
    omega_prime: tuple
    omega_second: tuple
    x0: float
    # carleman
    m: float
    s_list: tuple
    lam_list: tuple
    # system
    a: SineSeries
    b_tilde: SineSeries
    c: SineSeries
    d: SineSeries
    gamma: SineSeries
    u0: SineSeries
    v0: SineSeries
    du0: SineSeries
    dv0: SineSeries
    g: float
    h: float
    R: float
    r: float
    c0: float
    # experiment
    harness: str
    eps: tuple
    seed: int
    ensemble: int
    n_modes: int
    alpha: float
    lsq_modes: int
    lsq_budget: int
    noise: float
    output: str

    @property
    def sgrid(self) -> SpatialGrid:
        return SpatialGrid(self.L, self.n)

    @property
    def tgrid(self) -> TimeGrid:
        return TimeGrid(self.t0, self.T, self.nt)

    @property
    def subintervals(self) -> SubIntervalSet:
        return SubIntervalSet.from_tuples(self.omega, self.omega_prime, self.omega_second, self.L)

    @property
    def seeds(self) -> list:
        return [self.seed + k for k in range(self.ensemble)]

    def spec(self, gamma_scale: float = 1.0, perturb: bool = True) -> ScenarioSpec:
        base = ScenarioSpec(a=self.a, b_tilde=self.b_tilde, c=self.c, d=self.d,
                            gamma=self.gamma.scaled(gamma_scale), u0_ref=self.u0, v0_ref=self.v0,
                            g=self.g, h=self.h, R=self.R, r=self.r, c0=self.c0, omega=self.omega)
        if perturb:
            return base.with_initial_perturbation(self.du0, self.dv0)
        return base

    def echo(self) -> dict:
        out = {}
        for k, v in asdict(self).items():
            if isinstance(v, dict):  # SineSeries flattened by asdict
                v = {"offset": v["offset"], "amplitudes": list(v["amplitudes"])}
            elif isinstance(v, tuple):
                v = list(v)
            out[k] = v
        return out


def _line_index(text: str) -> dict:
    """(section, key) -> 1-based line number, for error messages."""
    index, section = {}, None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if line.startswith("[") and line.endswith("]"):
            section = line[1:-1].strip()
        elif section and line and line[0] not in "#;" and ("=" in line or ":" in line):
            key = line.split("=", 1)[0].split(":", 1)[0].strip()
            index[(section, key)] = lineno
    return index


def _floats(text: str) -> tuple:
    text = text.strip()
    return tuple(float(p) for p in text.split(",")) if text else ()


def _interval(text: str) -> tuple:
    vals = _floats(text)
    if len(vals) != 2:
        raise ValueError(f"expected 'lo, hi', got {text!r}")
    return vals


def parse_config(text: str, source: str = "<string>", command: str | None = None
                 ) -> ScenarioConfig:
    """Parse and validate; ``command`` overrides experiment.harness for the rule set."""
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"),
                                       interpolation=None)
    parser.optionxform = str
    try:
        parser.read_string(text, source=source)
    except configparser.ParsingError as exc:
        lineno, line = exc.errors[0]
        raise ConfigurationError(f"{source}: parse error at line {lineno}: {line.strip()!r}") from exc
    except (configparser.DuplicateOptionError, configparser.DuplicateSectionError) as exc:
        raise ConfigurationError(f"{source}: parse error at line {exc.lineno}: {exc.message}"
                                 ) from exc
    except configparser.MissingSectionHeaderError as exc:
        raise ConfigurationError(f"{source}: parse error at line {exc.lineno}: "
                                 "key outside any section") from exc
    lines = _line_index(text)

    for section in parser.sections():
        if section not in DEFAULTS:
            raise ConfigurationError(f"{source}: unknown section [{section}]")
        for key in parser[section]:
            if key not in DEFAULTS[section]:
                raise ConfigurationError(
                    f"{source}: line {lines.get((section, key), '?')}: unknown key "
                    f"'{key}' in [{section}]")

    def get(section, key, conv):
        raw = parser.get(section, key, fallback=DEFAULTS[section][key])
        try:
            return conv(raw)
        except ValueError as exc:
            where = lines.get((section, key))
            loc = f"line {where}" if where else "default"
            raise ConfigurationError(f"{source}: {loc}: bad value for {section}.{key}: {exc}"
                                     ) from exc

    def series(key, offset=None):
        off = offset if offset is not None else get("system", key, float)
        return SineSeries(off, get("system", f"{key}_modes", _floats))

    g = get("system", "g", float)
    h = get("system", "h", float)
    cfg = ScenarioConfig(
        L=get("grid", "L", float), n=get("grid", "n", int),
        t0=get("grid", "t0", float), T=get("grid", "T", float), nt=get("grid", "nt", int),
        omega=get("geometry", "omega", _interval),
        omega_prime=get("geometry", "omega_prime", _interval),
        omega_second=get("geometry", "omega_second", _interval),
        x0=get("geometry", "x0", float),
        m=get("carleman", "m", float),
        s_list=get("carleman", "s", _floats), lam_list=get("carleman", "lambda", _floats),
        a=series("a"), b_tilde=series("b_tilde"), c=series("c"), d=series("d"),
        gamma=series("gamma", 0.0), u0=series("u0", g), v0=series("v0", h),
        du0=series("du0", 0.0), dv0=series("dv0", 0.0),
        g=g, h=h, R=get("system", "R", float), r=get("system", "r", float),
        c0=get("system", "c0", float),
        harness=get("experiment", "harness", str.strip), eps=get("experiment", "eps", _floats),
        seed=get("experiment", "seed", int), ensemble=get("experiment", "ensemble", int),
        n_modes=get("experiment", "n_modes", int), alpha=get("experiment", "alpha", float),
        lsq_modes=get("experiment", "lsq_modes", int),
        lsq_budget=get("experiment", "lsq_budget", int),
        noise=get("experiment", "noise", float), output=get("experiment", "output", str.strip),
    )
    validate(cfg, command or cfg.harness)
    return cfg


def load_config(path, command: str | None = None) -> ScenarioConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigurationError(f"config file not found: {path}")
    return parse_config(path.read_text(), source=str(path), command=command)


def validate(cfg: ScenarioConfig, command: str) -> None:
    """Re-run the owning modules' checks; raises ConfigurationError naming the rule."""
    if command not in COMMANDS:
        raise ConfigurationError(f"unknown harness '{command}', expected one of {COMMANDS}")
    sgrid, tgrid = cfg.sgrid, cfg.tgrid
    sub = cfg.subintervals
    if not (cfg.s_list and cfg.lam_list):
        raise ConfigurationError("carleman.s and carleman.lambda must be nonempty")
    for s in cfg.s_list:
        for lam in cfg.lam_list:
            CarlemanConfig(lam, s, cfg.m, sub, cfg.x0)
    build_beta(sgrid, sub, cfg.x0, cfg.m)
    if cfg.ensemble < 1 or not 0 <= cfg.n_modes <= 8 or not 1 <= cfg.lsq_modes <= 8:
        raise ConfigurationError("ensemble >= 1, n_modes in 0..8, lsq_modes in 1..8 required")
    if cfg.alpha <= 0 or cfg.noise < 0 or cfg.lsq_budget < 1:
        raise ConfigurationError("alpha > 0, noise >= 0, lsq_budget >= 1 required")
    sc = cfg.spec().materialize(sgrid, tgrid)
    if not sc.reference_coeffs.in_bound():
        raise ConfigurationError(f"coefficients leave Lambda(R) with R={cfg.R}")
    for eps in cfg.eps or (1.0,):
        if not cfg.spec(eps).materialize(sgrid, tgrid).target_in_bound():
            raise ConfigurationError(f"b~ + eps gamma leaves Lambda(R) at eps={eps}")
    if command in NEEDS_ASSUMPTIONS:
        report = sc.check()
        if not report.passed:
            raise ConfigurationError("positivity assumptions violated: "
                                     + ", ".join(report.violations))
