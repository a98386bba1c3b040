"""Scenario configuration, named presets and the on-disk solution cache.

Scenario files are INI documents.  Every key is optional; an empty file
gives the base case (age 25, no initial wealth, HARA bequests, fair
pricing).  Sections and keys:

    [scenario]    name, initial_age, horizon, initial_wealth
    [preferences] r, sigma, beta, phi, bequest_mode
    [loads]       load_ins, load_ann, pricing_rate, calibration_age,
                  kappa_ins, kappa_ann   (explicit kappas override loads)
    [mortality]   m, b
    [profiles]    income_coefficients (three numbers, ln-income quadratic),
                  post_retirement_income, luxury_shift, dependency_ratio
    [solver]      dt, nodes, w_max, interpolation, rate_evaluation,
                  control_tolerance, gauss_order, borrowing_share,
                  boundary_consumption_share, participation_tolerance
    [output]      directory, cache_dir, policy_stride
"""

from __future__ import annotations

import configparser
import dataclasses
import hashlib
import json
import logging
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Optional

import numpy as np

from .loads import LoadSchedule, solve_kappa_ann, solve_kappa_ins
from .mortality import GompertzParams
from .preferences import Preferences
from .profiles import (LUXURY_SHIFT, POST_RETIREMENT_INCOME, IncomeProfile, build_dependency,
                       phi_bar, published_income)
from .solver import (MAX_AGE, Model, Solution, SolverConfig, ValueSlice, backward_induction,
                     step_coefficients)

log = logging.getLogger(__name__)

CACHE_VERSION = 1


class ConfigError(ValueError):
    """Out-of-range or inconsistent scenario configuration."""


class ConfigSyntaxError(ConfigError):
    """Scenario text that cannot be read: bad INI, unknown keys, non-numbers."""


@dataclass(frozen=True)
class ScenarioConfig:
    name: str = "base"
    initial_age: float = 25.0
    horizon: Optional[float] = None
    initial_wealth: float = 0.0
    # preferences
    r: float = 0.032
    sigma: float = 2.0
    beta: float = float(-np.log(0.975))
    phi: float = 0.95
    bequest_mode: str = "hara"
    # loads
    load_ins: float = 0.0
    load_ann: float = 0.0
    pricing_rate: float = 0.02
    calibration_age: float = 65.0
    kappa_ins: Optional[float] = None
    kappa_ann: Optional[float] = None
    # mortality
    m: float = 88.23
    b: float = 9.38
    # profiles
    income_coefficients: Optional[tuple] = None
    post_retirement_income: float = POST_RETIREMENT_INCOME
    luxury_shift: float = LUXURY_SHIFT
    dependency_ratio: float = 1.35
    # solver
    dt: float = 0.05
    nodes: int = 400
    w_max: float = 3e6
    interpolation: str = "pchip"
    rate_evaluation: str = "start"
    control_tolerance: float = 1e-8
    gauss_order: int = 16
    borrowing_share: float = 0.9
    boundary_consumption_share: float = 0.05
    participation_tolerance: float = 1.0
    # output
    directory: str = "out"
    cache_dir: Optional[str] = None
    policy_stride: float = 1.0

    def replace(self, **changes) -> "ScenarioConfig":
        return dataclasses.replace(self, **changes)

    @property
    def effective_horizon(self) -> float:
        return self.horizon if self.horizon is not None else MAX_AGE - self.initial_age

    def validate(self) -> "ScenarioConfig":
        def need(cond, msg):
            if not cond:
                raise ConfigError(msg)

        need(25 <= self.initial_age < MAX_AGE, "initial_age must lie in [25, 110)")
        need(self.effective_horizon > 0 and self.initial_age + self.effective_horizon <= MAX_AGE + 1e-9,
             "horizon must be positive and end by age 110")
        need(np.isfinite(self.initial_wealth), "initial_wealth must be finite")
        need(self.r >= 0, "r must be non-negative")
        need(self.sigma > 0 and self.sigma != 1, "sigma must be positive and different from 1")
        need(self.beta >= 0, "beta must be non-negative")
        need(0 < self.phi < 1, "phi must lie in (0, 1)")
        need(self.bequest_mode in ("crra", "hara"), "bequest_mode must be crra or hara")
        need(0 <= self.load_ins < 1 and 0 <= self.load_ann < 1, "loads must lie in [0, 1)")
        need(self.pricing_rate > 0, "pricing_rate must be positive")
        need(25 <= self.calibration_age < MAX_AGE, "calibration_age must lie in [25, 110)")
        for k in (self.kappa_ins, self.kappa_ann):
            need(k is None or k >= 1, "explicit kappas must be >= 1")
        need(self.b > 0, "Gompertz scale b must be positive")
        need(self.income_coefficients is None or len(self.income_coefficients) == 3,
             "income_coefficients needs three numbers")
        need(self.post_retirement_income >= 0, "post_retirement_income must be non-negative")
        need(self.dependency_ratio >= 0, "dependency_ratio must be non-negative")
        need(self.dt > 0, "dt must be positive")
        steps = self.effective_horizon / self.dt
        need(abs(steps - round(steps)) < 1e-9, "dt must divide the horizon")
        need(self.nodes >= 4, "need at least 4 wealth nodes")
        need(self.w_max > 0, "w_max must be positive")
        need(self.interpolation in ("pchip", "linear"), "interpolation must be pchip or linear")
        need(self.rate_evaluation in ("start", "step-average"), "rate_evaluation must be start or step-average")
        need(self.control_tolerance > 0 and self.gauss_order >= 1, "bad solver tolerances")
        need(0 <= self.borrowing_share <= 1, "borrowing_share must lie in [0, 1]")
        need(0 <= self.boundary_consumption_share < 1, "boundary_consumption_share must lie in [0, 1)")
        need(self.participation_tolerance >= 0, "participation_tolerance must be non-negative")
        need(self.policy_stride > 0, "policy_stride must be positive")
        return self

    # ---- model assembly -------------------------------------------------

    def mortality(self) -> GompertzParams:
        return GompertzParams(m=self.m, b=self.b, x=self.initial_age)

    def schedule(self) -> LoadSchedule:
        base = GompertzParams(m=self.m, b=self.b)
        k_ins = self.kappa_ins if self.kappa_ins is not None else solve_kappa_ins(
            self.load_ins, self.pricing_rate, self.calibration_age, base)
        k_ann = self.kappa_ann if self.kappa_ann is not None else solve_kappa_ann(
            self.load_ann, self.pricing_rate, self.calibration_age, base)
        return LoadSchedule(k_ins, k_ann, self.pricing_rate, self.calibration_age, base.at_age(self.initial_age))

    def income(self) -> IncomeProfile:
        if self.income_coefficients is None:
            prof = published_income()
            return dataclasses.replace(prof, post_retirement_income=self.post_retirement_income)
        return IncomeProfile(tuple(float(c) for c in self.income_coefficients),
                             post_retirement_income=self.post_retirement_income)

    def preferences(self) -> Preferences:
        dep = None
        if self.bequest_mode == "hara":
            c_knot = -self.dependency_ratio * float(self.income()(20.0)) / phi_bar(self.phi)
            dep = build_dependency(c_knot, c_end=self.luxury_shift)
        return Preferences(r=self.r, sigma=self.sigma, beta=self.beta, phi=self.phi,
                           bequest_mode=self.bequest_mode, dependency=dep)

    def solver_config(self) -> SolverConfig:
        return SolverConfig(horizon=self.horizon, dt=self.dt, nodes=self.nodes, w_max=self.w_max,
                            interpolation=self.interpolation, control_tolerance=self.control_tolerance,
                            gauss_order=self.gauss_order, borrowing_share=self.borrowing_share,
                            boundary_consumption_share=self.boundary_consumption_share,
                            rate_evaluation=self.rate_evaluation)

    def model(self) -> Model:
        return Model(self.mortality(), self.preferences(), self.schedule(), self.income())

    # ---- identity -------------------------------------------------------

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        if d["income_coefficients"] is not None:
            d["income_coefficients"] = list(d["income_coefficients"])
        return d

    def solution_key(self) -> str:
        """Hash of every field that affects the solved value function."""
        skip = {"name", "initial_wealth", "participation_tolerance", "directory", "cache_dir", "policy_stride"}
        d = {k: v for k, v in self.to_dict().items() if k not in skip}
        d["cache_version"] = CACHE_VERSION
        blob = json.dumps(d, sort_keys=True, default=repr)
        return hashlib.sha256(blob.encode()).hexdigest()


SECTIONS = {
    "scenario": ("name", "initial_age", "horizon", "initial_wealth"),
    "preferences": ("r", "sigma", "beta", "phi", "bequest_mode"),
    "loads": ("load_ins", "load_ann", "pricing_rate", "calibration_age", "kappa_ins", "kappa_ann"),
    "mortality": ("m", "b"),
    "profiles": ("income_coefficients", "post_retirement_income", "luxury_shift", "dependency_ratio"),
    "solver": ("dt", "nodes", "w_max", "interpolation", "rate_evaluation", "control_tolerance",
               "gauss_order", "borrowing_share", "boundary_consumption_share", "participation_tolerance"),
    "output": ("directory", "cache_dir", "policy_stride"),
}

_TYPES = {f.name: f.type for f in fields(ScenarioConfig)}


def _convert(key: str, raw: str):
    kind = _TYPES[key]
    raw = raw.strip()
    if "Optional" in kind and raw.lower() in ("", "none"):
        return None
    try:
        if key == "income_coefficients":
            return tuple(float(v) for v in raw.replace(",", " ").split())
        if "float" in kind:
            return float(raw)
        if "int" in kind:
            return int(raw)
    except ValueError as exc:
        raise ConfigSyntaxError(f"{key}: cannot parse {raw!r}") from exc
    return raw


def parse_config(text: str, base: ScenarioConfig | None = None) -> ScenarioConfig:
    """Scenario from INI text, layered over ``base`` (or the defaults)."""
    parser = configparser.ConfigParser(interpolation=None)
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigSyntaxError(f"malformed scenario file: {exc}") from exc
    changes = {}
    for section in parser.sections():
        if section not in SECTIONS:
            raise ConfigSyntaxError(f"unknown section [{section}]")
        for key, raw in parser.items(section):
            if key not in SECTIONS[section]:
                raise ConfigSyntaxError(f"unknown key {key!r} in [{section}]")
            changes[key] = _convert(key, raw)
    cfg = (base or ScenarioConfig()).replace(**changes)
    return cfg.validate()


def load_config(path, base: ScenarioConfig | None = None) -> ScenarioConfig:
    return parse_config(Path(path).read_text(), base)


def dump_config(cfg: ScenarioConfig) -> str:
    lines = []
    d = cfg.to_dict()
    for section, keys in SECTIONS.items():
        lines.append(f"[{section}]")
        for key in keys:
            v = d[key]
            if v is None:
                v = ""
            elif isinstance(v, list):
                v = " ".join(repr(x) for x in v)
            lines.append(f"{key} = {v}")
        lines.append("")
    return "\n".join(lines)


POSTRET = dict(initial_age=65.0, initial_wealth=500_000.0)
PRESETS: dict[str, dict] = {
    # post-retirement exhibits and the load-demand table
    "postret-18": dict(POSTRET, load_ins=0.18, load_ann=0.18),
    "postret-18-crra": dict(POSTRET, load_ins=0.18, load_ann=0.18, bequest_mode="crra", phi=0.5),
    "postret-fair": dict(POSTRET),
    "postret-fair-crra": dict(POSTRET, bequest_mode="crra", phi=0.5),
    "table3": dict(POSTRET),
    # full life cycle from age 25 with no financial wealth
    "fullcycle-18": dict(load_ins=0.18, load_ann=0.18),
    "fullcycle-18-crra": dict(load_ins=0.18, load_ann=0.18, bequest_mode="crra", phi=0.5),
    "fullcycle-fair": dict(),
    "fullcycle-fair-crra": dict(bequest_mode="crra", phi=0.5),
}
for _pct in (6, 12, 18):
    PRESETS[f"feedforward-ann-{_pct:02d}"] = dict(load_ins=0.12, load_ann=_pct / 100)
    PRESETS[f"feedforward-ins-{_pct:02d}"] = dict(load_ins=_pct / 100, load_ann=0.12)

# which presets make up each exhibit
EXHIBITS = {
    "figure3": ("postret-18", "postret-18-crra", "postret-fair", "postret-fair-crra"),
    "figure4": ("fullcycle-18", "fullcycle-18-crra"),
    "figure5": ("feedforward-ann-06", "feedforward-ann-12", "feedforward-ann-18"),
    "figure6": ("feedforward-ins-06", "feedforward-ins-12", "feedforward-ins-18",
                "fullcycle-fair", "fullcycle-fair-crra"),
    "table3": ("table3",),
}

TABLE3_LOADS = tuple(k / 100 for k in range(0, 15, 2))
TABLE3_AGES = (65, 70, 75, 80, 85, 90)


def preset(name: str) -> ScenarioConfig:
    if name not in PRESETS:
        raise ConfigError(f"unknown preset {name!r}; choose from {', '.join(sorted(PRESETS))}")
    return ScenarioConfig(name=name, **PRESETS[name]).validate()


# ---- solution cache -------------------------------------------------------

def save_solution(solution: Solution, path) -> None:
    arrays = {k: np.stack([getattr(s, k) for s in solution.slices])
              for k in ("grid", "values", "consumption", "premium", "feasible")}
    np.savez(path, times=solution.times, offsets=solution.offsets, horizon=solution.horizon, **arrays)


def load_solution(path, model: Model, config: SolverConfig) -> Solution:
    with np.load(path) as npz:
        data = {k: npz[k] for k in npz.files}  # each npz access re-reads the member
    times, offsets, horizon = data["times"], data["offsets"], float(data["horizon"])
    slices = [ValueSlice(i, float(times[i]), data["grid"][i], data["values"][i], data["consumption"][i],
                         data["premium"][i], data["feasible"][i]) for i in range(len(times))]
    coeffs = [step_coefficients(times[i], config.dt, model.mortality, model.prefs.beta, config.gauss_order)
              for i in range(len(times) - 1)]
    return Solution(model, config, horizon, times, coeffs, slices, offsets)


def solve(cfg: ScenarioConfig, use_cache: bool = True) -> Solution:
    """Backward induction for ``cfg``, reusing a cached solution when present."""
    model, solver_cfg = cfg.model(), cfg.solver_config()
    path = None
    if use_cache and cfg.cache_dir:
        path = Path(cfg.cache_dir) / f"{cfg.solution_key()}.npz"
        if path.exists():
            log.info("loading cached solution %s", path.name)
            return load_solution(path, model, solver_cfg)
    solution = backward_induction(model, solver_cfg)
    if path is not None:
        path.parent.mkdir(parents=True, exist_ok=True)
        save_solution(solution, path)
    return solution
