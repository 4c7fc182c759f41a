"""Convergence studies over mesh levels: errors and rates per (k, q) block."""

from __future__ import annotations

import configparser
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace

import numpy as np

from .analysis import ConvergenceReport, energy_audit, jump_error_sum, sup_m0_error, weighted_l2_error
from .evolution import TimeMesh, lift_exponential, march
from .postprocess import lifted_postprocess, postprocess
from .problems import EXAMPLES, build_discrete_problem, check_exact_solution

log = logging.getLogger(__name__)

COLUMNS = {
    "rho1": "||U - U_rho1||_rho1",
    "rho2": "||U - U_rho2||_rho2",
    "rhodiff": "||U_rho1 - U_rho2||_rho2",
    "V": "||V - V_h||_0",
    "EV": "||U - E V_h||_0",
    "EV_U": "||E V_h - U_h||_0",
    "Vpp": "||V - V~||_0",
    "EVpp": "||U - E V~||_0",
    "Upp": "||U - U~||_rho",
    "sup_V": "||V - V_h||_inf,M0",
    "sup_Vpp": "||V - V~||_inf,M0",
    "sup_EVpp": "||U - E V~||_inf,M0,rho",
    "sup_EVpp0": "||U - E V~||_inf,M0",
    "sup_Upp": "||U - U~||_inf,M0",
    "jumps": "sum exp(-2 rho t) |[[U_h]]|_M0^2",
}

DEFAULT_NORMS = {
    "weighted": ["rho1", "rho2", "rhodiff"],
    "transformed": ["V", "EV", "EV_U"],
    "postprocess": ["V", "Vpp", "EVpp", "Upp"],
    "postprocess_sup": ["sup_V", "sup_Vpp", "sup_EVpp", "sup_Upp"],
}


class StudyConfigError(ValueError):
    pass


@dataclass
class StudyConfig:
    """One (k, q) block of a convergence table.

    ``rho`` holds one value (transformed studies) or two (weighted comparison studies).
    ``q = None`` selects ``q = k - 1``; ``q = k - 2`` is the usual choice with post-processing.
    """

    example: int = 1
    variant: str = "weighted"
    rho: tuple = (1.0, 2.0)
    k: int = 1
    q: int | None = None
    levels: tuple = (192, 384, 768)
    postprocess: bool = False
    norms: tuple = ()
    out: str | None = None
    T: float = 1.0
    time_samples: int = 10
    seed: int = 0
    mesh_pattern: str = ""
    workers: int = 1

    def __post_init__(self):
        self.rho = tuple(float(r) for r in np.atleast_1d(self.rho))
        self.levels = tuple(int(n) for n in self.levels)
        self.norms = tuple(self.norms)
        if self.q is None:
            self.q = self.k - 1
        self.validate()

    def validate(self) -> None:
        if self.example not in EXAMPLES:
            raise StudyConfigError(f"unknown example {self.example}")
        if self.variant not in ("weighted", "transformed"):
            raise StudyConfigError(f"unknown variant {self.variant!r}")
        if self.k < 1 or self.q < 0:
            raise StudyConfigError("need k >= 1 and q >= 0")
        if not self.levels:
            raise StudyConfigError("at least one level is required")
        if list(self.levels) != sorted(self.levels):
            raise StudyConfigError("levels must be ascending")
        if not self.rho:
            raise StudyConfigError("at least one rho is required")
        if self.T <= 0:
            raise StudyConfigError("T must be positive")
        for name in self.norms:
            if name not in COLUMNS:
                raise StudyConfigError(f"unknown norm column {name!r}")

    @property
    def columns(self) -> tuple:
        if self.norms:
            return self.norms
        if self.postprocess:
            return tuple(DEFAULT_NORMS["postprocess"])
        return tuple(DEFAULT_NORMS[self.variant])

    def header(self) -> dict:
        d = asdict(self)
        d.pop("out")
        d.pop("workers")
        d["columns"] = ",".join(self.columns)
        return d


_FIELD_TYPES = {
    "example": int,
    "k": int,
    "q": int,
    "T": float,
    "time_samples": int,
    "seed": int,
    "workers": int,
}


def config_from_mapping(values: dict, base: StudyConfig | None = None) -> StudyConfig:
    """Build a config from string-valued ``key = value`` pairs (lists are whitespace/comma separated)."""
    known = {f.name for f in fields(StudyConfig)}
    kwargs = {}
    for key, raw in values.items():
        key = key.strip()
        if key not in known:
            raise StudyConfigError(f"unknown config key {key!r}")
        try:
            if isinstance(raw, str):
                raw = raw.strip()
                if key in ("rho",):
                    raw = tuple(float(x) for x in raw.replace(",", " ").split())
                elif key == "levels":
                    raw = tuple(int(x) for x in raw.replace(",", " ").split())
                elif key == "norms":
                    raw = tuple(raw.replace(",", " ").split())
                elif key == "postprocess":
                    raw = raw.lower() in ("1", "true", "yes", "on")
                elif key == "q" and raw.lower() in ("", "none"):
                    raw = None
                elif key in _FIELD_TYPES:
                    raw = _FIELD_TYPES[key](raw)
        except ValueError as exc:
            raise StudyConfigError(f"bad value for {key}: {raw!r}") from exc
        kwargs[key] = raw
    try:
        return replace(base, **kwargs) if base is not None else StudyConfig(**kwargs)
    except (TypeError, ValueError) as exc:
        raise StudyConfigError(str(exc)) from exc


def load_config(path) -> StudyConfig:
    parser = configparser.ConfigParser()
    parser.optionxform = str
    try:
        found = parser.read(path)
    except configparser.Error as exc:
        raise StudyConfigError(f"malformed config {path}: {exc}") from exc
    if not found:
        raise StudyConfigError(f"cannot read config {path}")
    if not parser.has_section("study"):
        raise StudyConfigError("config needs a [study] section")
    return config_from_mapping(dict(parser["study"]))


# ---------------------------------------------------------------------------


def make_spec(config: StudyConfig):
    if config.example == 2 and config.mesh_pattern:
        return EXAMPLES[2](pattern=config.mesh_pattern)
    return EXAMPLES[config.example]()


def _level_errors(config: StudyConfig, N: int) -> dict:
    spec = make_spec(config)
    problem = build_discrete_problem(spec, N, config.k)
    S = problem.sampler
    ops = problem.ops
    tm = TimeMesh.uniform(config.T, N)
    q = config.q
    cols = config.columns
    rho = config.rho[0]
    cache = {}

    def weighted(r):
        if ("w", r) not in cache:
            cache[("w", r)] = march(problem, tm, q, r, "weighted")
        return cache[("w", r)]

    def transformed():
        if "t" not in cache:
            cache["t"] = march(problem, tm, q, rho, "transformed")
        return cache["t"]

    def scale(t):
        return np.exp(-rho * t)

    ns = config.time_samples
    out = {}
    for c in cols:
        if c == "rho1":
            out[c] = weighted_l2_error(S, weighted(rho), rho)
        elif c == "rho2":
            r2 = config.rho[1]
            out[c] = weighted_l2_error(S, weighted(r2), r2)
        elif c == "rhodiff":
            r2 = config.rho[1]
            out[c] = weighted_l2_error(None, weighted(rho), r2, reference=weighted(r2), ops=ops)
        elif c == "V":
            out[c] = weighted_l2_error(S, transformed(), 0.0, scale_fn=scale)
        elif c == "EV":
            out[c] = weighted_l2_error(S, lift_exponential(transformed(), rho), 0.0)
        elif c == "EV_U":
            out[c] = weighted_l2_error(None, weighted(rho), 0.0, reference=lift_exponential(transformed(), rho), ops=ops)
        elif c == "Vpp":
            out[c] = weighted_l2_error(S, postprocess(transformed()), 0.0, scale_fn=scale)
        elif c == "EVpp":
            out[c] = weighted_l2_error(S, lifted_postprocess(transformed(), rho), 0.0)
        elif c == "Upp":
            out[c] = weighted_l2_error(S, postprocess(weighted(rho)), rho)
        elif c == "sup_V":
            out[c] = sup_m0_error(S, transformed(), ns, scale_fn=scale)
        elif c == "sup_Vpp":
            out[c] = sup_m0_error(S, postprocess(transformed()), ns, scale_fn=scale)
        elif c == "sup_EVpp":
            out[c] = sup_m0_error(S, lifted_postprocess(transformed(), rho), ns, rho=rho)
        elif c == "sup_EVpp0":
            out[c] = sup_m0_error(S, lifted_postprocess(transformed(), rho), ns)
        elif c == "sup_Upp":
            out[c] = sup_m0_error(S, postprocess(weighted(rho)), ns)
        elif c == "jumps":
            sol = weighted(rho) if config.variant == "weighted" else transformed()
            out[c] = jump_error_sum(sol, rho if config.variant == "weighted" else 0.0, ops.M0)
    return out


def _safe_level(config: StudyConfig, N: int):
    try:
        return N, _level_errors(config, N), None
    except (MemoryError, RuntimeError, ValueError) as exc:
        return N, None, f"{type(exc).__name__}: {exc}"


def run_study(config: StudyConfig) -> ConvergenceReport:
    """Errors per level for every requested column; infeasible levels are recorded, not fatal."""
    config.validate()
    if any(c in ("rho2", "rhodiff") for c in config.columns) and len(config.rho) < 2:
        raise StudyConfigError("comparison columns need two rho values")
    if config.workers > 1:
        with ProcessPoolExecutor(config.workers) as pool:
            results = list(pool.map(_safe_level, [config] * len(config.levels), config.levels))
    else:
        results = [_safe_level(config, N) for N in config.levels]
    errors = {c: [] for c in config.columns}
    failures = {}
    for N, vals, err in results:
        if err is not None:
            log.warning("level N=%d failed: %s", N, err)
            failures[N] = err
        for c in config.columns:
            errors[c].append(None if vals is None else vals[c])
    meta = config.header()
    if config.seed is not None:
        meta["exact_residual"] = f"{check_exact_solution(make_spec(config), seed=config.seed):.3e}"
    report = ConvergenceReport(list(config.columns), list(config.levels), errors, meta, failures)
    if config.out:
        report.to_csv(config.out)
    return report


# ---------------------------------------------------------------------------


@dataclass
class EnergyReport:
    levels: list
    max_relative_gap: list
    jump_sums: list
    energies: list = field(default_factory=list)

    def to_csv(self, path=None, header: dict | None = None) -> str:
        lines = [f"# {k} = {v}" for k, v in (header or {}).items()]
        lines.append("N,max_rel_gap,jump_sum,final_energy")
        for n, g, j, e in zip(self.levels, self.max_relative_gap, self.jump_sums, self.energies):
            lines.append(f"{n},{g:.3e},{j:.6e},{e[-1]:.6e}")
        text = "\n".join(lines) + "\n"
        if path:
            with open(path, "w") as fh:
                fh.write(text)
        return text


def run_energy_audit(config: StudyConfig, zero_load: bool = False) -> EnergyReport:
    """Energy-identity gaps and jump sums per level.

    With ``zero_load`` the load is removed and the scheme starts from the interpolant of the
    exact state at ``t = T``, so the weighted energy must decrease monotonically.
    """
    config.validate()
    rho = config.rho[0]
    gaps, jumps, energies = [], [], []
    for N in config.levels:
        spec = make_spec(config)
        problem = build_discrete_problem(spec, N, config.k)
        if zero_load:
            start = problem.interpolate_exact(config.T)
            n = problem.ndofs
            problem = replace(problem, rhs=lambda t, n=n: np.zeros(n), x0=start)
        sol = march(problem, TimeMesh.uniform(config.T, N), config.q, rho, config.variant)
        bal = energy_audit(sol, problem, rho)
        gaps.append(float(bal.relative_gap.max()))
        r = rho if config.variant == "weighted" else 0.0
        jumps.append(jump_error_sum(sol, r, problem.ops.M0))
        energies.append(np.concatenate([[bal.initial], bal.final_energy]))
    return EnergyReport(list(config.levels), gaps, jumps, energies)


def is_monotone_decreasing(values, rtol: float = 1e-12) -> bool:
    v = np.asarray(values)
    return bool(np.all(np.diff(v) <= rtol * np.maximum(np.abs(v[:-1]), math.ulp(1.0))))
