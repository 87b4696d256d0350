"""Configured scenario runs with columnar outputs and reproducibility manifests.

A configuration is an INI file of ``key = value`` sections.  Every scenario
has built-in defaults, so a config file only needs the keys it changes.
Each run returns a :class:`RunResult` holding the reported numbers, the
pass/fail checks, the curves to export and optional field snapshots.
"""

from __future__ import annotations

import configparser
import hashlib
import json
import math
import time
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Mapping

import numpy as np

from . import finite_bit as fb
from .classical import (
    characteristics_series,
    conserved_functionals,
    energy_expectation,
    gaussian_wavefunction,
    liouville_evolve,
    stationary_state,
    thermal_expectations,
)
from .grid import (
    BOUNDARY_TOL,
    BoundaryMassWarning,
    ClassicalWaveFunction,
    PhaseSpaceGrid,
    PositionWaveFunction,
    WignerFunction,
    boundary_mass,
    marginals,
    momentum_variance,
    position_variance,
    wigner_transform,
    write_field,
)
from .potentials import Potential
from .quantum import (
    GaussianPacketSpec,
    classical_wavefunction_quantum_evolve,
    gaussian_position_state,
    moyal_evolve,
    packet_analytics,
    reconstruct_density,
    schrodinger_evolve,
)


class ConfigError(ValueError):
    pass


# ---------------------------------------------------------------------------
# configuration

TWO_PI = 2 * math.pi

DEFAULT_TOLERANCES = {
    "boundary_mass": BOUNDARY_TOL,
    "slit_overlap": 1e-6,
    "visibility_min": 0.5,
    "visibility_max": 0.05,
    "spreading_rel_error": 1e-6,
    "momentum_drift": 1e-10,
    "floor_linf": 1e-6,
    "identical_linf": 1e-12,
    "divergence_ratio": 10.0,
    "conservation_drift": 1e-6,
    "static_linf": 1e-6,
    "thermal_gap_min": 1e-3,
    "norm_drift": 1e-10,
    "finite_bit_atol": 1e-12,
    "ordering_atol": 1e-8,
}

DEFAULT_CONFIGS = {
    "evolve": """
[grid]
n = 128
aspect = 1.0
mass = 1.0
[potential]
kind = harmonic
k = 1.0
[state]
kind = gaussian
x0 = 1.0
p0 = 0.0
width_x = 0.7071067811865476
width_p = 0.7071067811865476
[dynamics]
method = liouville
dt = 0.001
t_final = 1.0
stride = 100
""",
    "double-slit": """
[grid]
n = 256
aspect = 1.0
mass = 1.0
[beams]
half_separation = 1.5
width_x = 0.35
p0 = 0.0
a1 = 1.0
a2 = 1.0
t_screen = auto
support_level = 0.01
window_fraction = 0.5
[dynamics]
method = moyal
dt = 0.01
""",
    "packet-spreading": """
[grid]
n = 1024
aspect = 1.0
mass = 1.0
[packet]
p_mean = 0.5
p_width = 1.0
[dynamics]
t_final = auto
samples = 21
dt = 0.01
""",
    "equivalence": """
[case harmonic]
role = floor
potential = harmonic
k = 39.47841760435743
n = 256
aspect = 0.15915494309189535
x0 = 1.0
p0 = 0.0
width_x = 0.28209479177387814
width_p = 1.772453850905516
t_final = period
dt = 0.001
stride = 50
[case quartic]
role = divergent
potential = quartic
lam = 1.0
n = 256
aspect = 0.25
x0 = 0.0
p0 = 0.0
width_x = 0.7071067811865476
width_p = 0.7071067811865476
t_final = 1.0
dt = 0.001
stride = 50
[case free]
role = identical
potential = free
n = 256
aspect = 1.0
x0 = 0.0
p0 = 1.0
width_x = 0.7071067811865476
width_p = 0.7071067811865476
t_final = 1.0
dt = 0.001
stride = 50
""",
    "antithermalization": """
[grid]
n = 64
aspect = 0.15915494309189535
mass = 1.0
[potential]
kind = harmonic
k = 39.47841760435743
[state]
kind = gaussian
x0 = 1.0
p0 = 0.0
width_x = 0.3
width_p = 1.5
[profile]
temperature = 9.0
[dynamics]
periods = 50
samples = 11
dt = 0.001
interpolation = fourier
""",
    "finite-bit": """
[finite-bit]
Q = 2
seed = 0
""",
}

SCENARIOS = ("double-slit", "packet-spreading", "equivalence", "antithermalization", "finite-bit")


def _parser() -> configparser.ConfigParser:
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    cp.optionxform = str
    return cp


@dataclass(frozen=True)
class ExperimentConfig:
    """Resolved configuration: built-in defaults overlaid by the user's file."""

    scenario: str
    sections: Mapping[str, Mapping[str, str]]
    tolerances: Mapping[str, float]

    @classmethod
    def from_text(
        cls,
        text: str = "",
        scenario: str | None = None,
        tol_overrides: Mapping[str, float] | None = None,
        set_values: Mapping[str, Mapping[str, str]] | None = None,
    ):
        """Merge defaults, the user's text and ``set_values`` (highest priority)."""
        user = _parser()
        user.read_string(text)
        if scenario is None:
            scenario = user.get("scenario", "name", fallback=None)
        if scenario is None:
            raise ConfigError("no scenario given (use [scenario] name = ... or the command line)")
        if scenario not in DEFAULT_CONFIGS:
            raise ConfigError(f"unknown scenario {scenario!r}; choose from {sorted(DEFAULT_CONFIGS)}")
        base = _parser()
        base.read_string(DEFAULT_CONFIGS[scenario])
        sections: dict[str, dict[str, str]] = {s: dict(base[s]) for s in base.sections()}
        user_cases = [s for s in user.sections() if s.startswith("case ")]
        if user_cases:  # user-supplied cases replace the default case list
            sections = {s: v for s, v in sections.items() if not s.startswith("case ")}
        for s in user.sections():
            if s in ("scenario", "tolerances"):
                continue
            sections.setdefault(s, {}).update(dict(user[s]))
        for s, items in (set_values or {}).items():
            sections.setdefault(s, {}).update({k: str(v) for k, v in items.items()})
        tol = dict(DEFAULT_TOLERANCES)
        if user.has_section("tolerances"):
            tol.update(_parse_tolerances(dict(user["tolerances"])))
        tol.update(tol_overrides or {})
        return cls(scenario, sections, tol)

    @classmethod
    def load(cls, path, scenario: str | None = None, tol_overrides=None):
        return cls.from_text(Path(path).read_text(), scenario, tol_overrides)

    # typed access -----------------------------------------------------------
    def raw(self, section: str, key: str, default=None) -> str | None:
        return self.sections.get(section, {}).get(key, default)

    def get_float(self, section: str, key: str, default: float | None = None) -> float:
        v = self.raw(section, key)
        if v is None:
            if default is None:
                raise ConfigError(f"missing [{section}] {key}")
            return float(default)
        try:
            return float(v)
        except ValueError as exc:
            raise ConfigError(f"[{section}] {key} = {v!r} is not a number") from exc

    def get_int(self, section: str, key: str, default: int | None = None) -> int:
        value = self.get_float(section, key, default)
        if value != int(value):
            raise ConfigError(f"[{section}] {key} must be an integer")
        return int(value)

    def get_str(self, section: str, key: str, default: str | None = None) -> str:
        v = self.raw(section, key, default)
        if v is None:
            raise ConfigError(f"missing [{section}] {key}")
        return v

    def grid(self, section: str = "grid") -> PhaseSpaceGrid:
        return PhaseSpaceGrid.square(
            self.get_int(section, "n"),
            mass=self.get_float(section, "mass", 1.0),
            aspect=self.get_float(section, "aspect", 1.0),
        )

    def potential(self, section: str = "potential", kind_key: str = "kind") -> Potential:
        kind = self.get_str(section, kind_key, "free")
        if kind == "free":
            return Potential.free()
        if kind == "harmonic":
            return Potential.harmonic(self.get_float(section, "k", 1.0))
        if kind == "quartic":
            return Potential.quartic(self.get_float(section, "lam", 1.0), self.get_float(section, "k", 0.0))
        raise ConfigError(f"unsupported potential kind {kind!r} (free, harmonic, quartic)")

    # hashing ------------------------------------------------------------------
    def canonical(self) -> str:
        return json.dumps(
            {"scenario": self.scenario, "sections": self.sections, "tolerances": self.tolerances},
            sort_keys=True,
        )

    @property
    def hash(self) -> str:
        return hashlib.sha256(self.canonical().encode()).hexdigest()


def _parse_tolerances(items: Mapping[str, str]) -> dict[str, float]:
    out = {}
    for k, v in items.items():
        if k not in DEFAULT_TOLERANCES:
            raise ConfigError(f"unknown tolerance {k!r}; known: {sorted(DEFAULT_TOLERANCES)}")
        try:
            out[k] = float(v)
        except ValueError as exc:
            raise ConfigError(f"tolerance {k} = {v!r} is not a number") from exc
    return out


def parse_tolerance_overrides(pairs) -> dict[str, float]:
    """Turn ``["name=value", ...]`` into a tolerance dict."""
    items = {}
    for pair in pairs or ():
        if "=" not in pair:
            raise ConfigError(f"tolerance override {pair!r} is not name=value")
        k, v = pair.split("=", 1)
        items[k.strip()] = v.strip()
    return _parse_tolerances(items)


# ---------------------------------------------------------------------------
# results


@dataclass(frozen=True)
class Check:
    name: str
    value: float
    limit: float
    relation: str  # "<=" or ">="

    @property
    def passed(self) -> bool:
        if not math.isfinite(self.value):
            return False
        return self.value <= self.limit if self.relation == "<=" else self.value >= self.limit


@dataclass
class RunResult:
    scenario: str
    config: ExperimentConfig
    numbers: dict[str, float] = field(default_factory=dict)
    checks: list[Check] = field(default_factory=list)
    curves: dict[str, tuple[tuple[str, ...], np.ndarray]] = field(default_factory=dict)
    fields: dict[str, object] = field(default_factory=dict)
    wall_time: float = 0.0

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def check(self, name: str, value: float, limit: float, relation: str = "<=") -> Check:
        c = Check(name, float(value), float(limit), relation)
        self.checks.append(c)
        return c

    def record(self, **numbers) -> None:
        for k, v in numbers.items():
            self.numbers[k] = float(v)

    def curve(self, name: str, **columns) -> None:
        names = tuple(columns)
        self.curves[name] = (names, np.column_stack([np.asarray(c, dtype=float) for c in columns.values()]))

    def summary(self) -> str:
        lines = [f"scenario = {self.scenario}", f"config_hash = {self.config.hash}"]
        lines += [f"{k} = {v!r}" for k, v in self.numbers.items()]
        for c in self.checks:
            status = "PASS" if c.passed else "FAIL"
            lines.append(f"check {c.name} = {c.value!r} {c.relation} {c.limit!r} {status}")
        lines.append(f"passed = {str(self.passed).lower()}")
        return "\n".join(lines) + "\n"


def _guard(result: RunResult, name: str, density, grid: PhaseSpaceGrid) -> None:
    result.check(f"boundary_{name}", boundary_mass(density, grid), result.config.tolerances["boundary_mass"])


# ---------------------------------------------------------------------------
# shared state builders


def _gaussian_from(config: ExperimentConfig, section: str, grid: PhaseSpaceGrid) -> ClassicalWaveFunction:
    return gaussian_wavefunction(
        grid,
        config.get_float(section, "x0", 0.0),
        config.get_float(section, "p0", 0.0),
        config.get_float(section, "width_x", 1 / math.sqrt(2)),
        config.get_float(section, "width_p", 1 / math.sqrt(2)),
    )


def fringe_visibility(screen: np.ndarray, window: np.ndarray) -> float:
    """(max - min) / (max + min) of the screen density inside ``window``."""
    s = np.asarray(screen)[window]
    return float((s.max() - s.min()) / (s.max() + s.min()))


def overlap_window(x: np.ndarray, r1: np.ndarray, r2: np.ndarray, level: float = 0.01, fraction: float = 0.5) -> np.ndarray:
    """Central ``fraction`` of the interval where both beams exceed ``level`` of their peaks."""
    both = np.nonzero((r1 > level * r1.max()) & (r2 > level * r2.max()))[0]
    if both.size == 0:
        raise ConfigError("the beams do not overlap on the screen")
    lo, hi = x[both[0]], x[both[-1]]
    centre, half = 0.5 * (lo + hi), 0.25 * (hi - lo) * fraction / 0.5
    return np.abs(x - centre) <= half


def _cosine_overlap(r1, r2) -> float:
    return float(np.sum(r1 * r2) / math.sqrt(np.sum(r1**2) * np.sum(r2**2)))


# ---------------------------------------------------------------------------
# scenarios


def run_double_slit(config: ExperimentConfig) -> RunResult:
    """Two beams prepared as an amplitude superposition and as a probability mixture.

    Beams start at x = -+d with widths (width_x, 1/(2 width_x)) and evolve
    freely.  By default the screen sits at the time when each beam has
    spread to width d, where the mixture is flat near the centre.
    """
    res = RunResult("double-slit", config)
    tol = config.tolerances
    g = config.grid()
    V = Potential.free()
    sec = "beams"
    d = config.get_float(sec, "half_separation")
    wx = config.get_float(sec, "width_x")
    wp = 0.5 / wx
    p0 = config.get_float(sec, "p0", 0.0)
    a1, a2 = config.get_float(sec, "a1", 1.0), config.get_float(sec, "a2", 1.0)
    if a1 == 0 and a2 == 0:
        raise ConfigError("a1 and a2 cannot both vanish")
    weight = config.get_float(sec, "weight", a1**2 / (a1**2 + a2**2))
    if not 0 <= weight <= 1:
        raise ConfigError("mixture weight must lie in [0, 1]")
    t_raw = config.get_str(sec, "t_screen", "auto")
    t_screen = g.mass * math.sqrt(max(d * d - wx * wx, 0.0)) / wp if t_raw == "auto" else float(t_raw)
    method = config.get_str("dynamics", "method", "moyal")
    dt = config.get_float("dynamics", "dt", 0.01)
    res.record(t_screen=t_screen, weight=weight)

    phi1 = gaussian_position_state(g, -d, p0, wx).normalize().values
    phi2 = gaussian_position_state(g, d, -p0, wx).normalize().values
    overlap = _cosine_overlap(np.abs(phi1) ** 2, np.abs(phi2) ** 2)
    res.record(slit_overlap=overlap)
    if overlap > tol["slit_overlap"]:
        raise ConfigError(f"beams overlap at the slits (overlap {overlap:.3g} > {tol['slit_overlap']:g})")

    def final(series):
        return series[-1][1]

    screens: dict[str, np.ndarray] = {}
    if method == "moyal":
        w1 = wigner_transform(PositionWaveFunction(g, phi1).density_matrix())
        w2 = wigner_transform(PositionWaveFunction(g, phi2).density_matrix())
        sup = PositionWaveFunction(g, a1 * phi1 + a2 * phi2).normalize()
        ws = wigner_transform(sup.density_matrix())
        c1, c2 = (abs(np.vdot(phi, sup.values)) ** 2 * g.dx**2 for phi in (phi1, phi2))
        res.record(interference_term_max=np.max(np.abs(ws.values - c1 * w1.values - c2 * w2.values)))
        wm = WignerFunction(g, weight * w1.values + (1 - weight) * w2.values)
        evolved = {name: final(moyal_evolve(w, V, t_screen, dt)) for name, w in
                   (("beam1", w1), ("beam2", w2), ("superposition", ws), ("mixture", wm))}
        for name, w in evolved.items():
            screens[name] = marginals(w)[0]
        res.fields["superposition_final"] = evolved["superposition"]
    elif method in ("liouville", "hw-wavefunction"):
        psi1 = gaussian_wavefunction(g, -d, p0, wx, wp)
        psi2 = gaussian_wavefunction(g, d, -p0, wx, wp)
        sup = ClassicalWaveFunction(g, a1 * psi1.values + a2 * psi2.values).normalize()
        na = math.sqrt(sup.norm() / (np.sum(np.abs(a1 * psi1.values + a2 * psi2.values) ** 2) * g.weight))
        cross = 2 * a1 * a2 * na**2 * psi1.values.real * psi2.values.real
        res.record(interference_term_max=np.max(np.abs(cross)))
        mix = ClassicalWaveFunction(g, np.sqrt(weight * np.abs(psi1.values) ** 2 + (1 - weight) * np.abs(psi2.values) ** 2))
        evolve = liouville_evolve if method == "liouville" else classical_wavefunction_quantum_evolve
        evolved = {name: final(evolve(psi, V, t_screen, dt)) for name, psi in
                   (("beam1", psi1), ("beam2", psi2), ("superposition", sup), ("mixture", mix))}
        for name, psi in evolved.items():
            screens[name] = marginals(psi)[0]
        if method == "hw-wavefunction":
            for name in ("superposition", "mixture"):
                screens[f"xq_{name}"] = marginals(reconstruct_density(evolved[name]))[0]
        res.fields["superposition_final"] = evolved["superposition"]
    else:
        raise ConfigError(f"unknown dynamics {method!r} (moyal, liouville, hw-wavefunction)")

    window = overlap_window(
        g.x, screens["beam1"], screens["beam2"],
        config.get_float(sec, "support_level", 0.01), config.get_float(sec, "window_fraction", 0.5),
    )
    res.record(window_lo=g.x[window][0], window_hi=g.x[window][-1])
    for name in screens:
        if name.startswith("beam"):
            continue
        res.record(**{f"visibility_{name}": fringe_visibility(screens[name], window)})
    for name in ("superposition", "mixture"):
        _guard(res, name, screens[name], g)
    res.check("visibility_mixture", res.numbers["visibility_mixture"], tol["visibility_max"], "<=")
    if method == "moyal":
        res.check("visibility_superposition", res.numbers["visibility_superposition"], tol["visibility_min"], ">=")
    res.curve("screen", x=g.x, **{k: v for k, v in screens.items()})
    return res


def run_packet_spreading(config: ExperimentConfig) -> RunResult:
    """Free Schroedinger evolution of a Gaussian packet against the closed-form spread."""
    res = RunResult("packet-spreading", config)
    tol = config.tolerances
    g = config.grid()
    spec = GaussianPacketSpec(config.get_float("packet", "p_mean", 0.0), config.get_float("packet", "p_width", 1.0), g.mass)
    t_raw = config.get_str("dynamics", "t_final", "auto")
    t_final = 2 * g.mass / spec.p_width**2 if t_raw == "auto" else float(t_raw)
    samples = config.get_int("dynamics", "samples", 21)
    dt = config.get_float("dynamics", "dt", 0.01)
    phi0 = PositionWaveFunction(g, spec.wavefunction(g.x, 0.0)).normalize()
    times, var_num, var_exact, mean_p, var_p = [], [], [], [], []
    k = g.kx
    t_prev, phi = 0.0, phi0
    for t in np.linspace(0.0, t_final, samples):
        if t > t_prev:
            phi = schrodinger_evolve(phi, Potential.free(), t - t_prev, dt)[-1][1]
            t_prev = t
        rho = np.abs(phi.values) ** 2
        rho /= rho.sum()
        mx = np.sum(g.x * rho)
        times.append(t)
        var_num.append(np.sum((g.x - mx) ** 2 * rho))
        var_exact.append(packet_analytics(spec, t).var_x)
        pk = np.abs(np.fft.fft(phi.values)) ** 2
        pk /= pk.sum()
        mean_p.append(np.sum(k * pk))
        var_p.append(np.sum((k - np.sum(k * pk)) ** 2 * pk))
    var_num, var_exact = np.array(var_num), np.array(var_exact)
    rel = np.abs(var_num - var_exact) / var_exact
    res.record(t_final=t_final, rel_error_max=rel.max(), var_x_final=var_num[-1], var_x_exact_final=var_exact[-1],
               mean_p=mean_p[0], var_p=var_p[0])
    drift = max(np.ptp(mean_p), np.ptp(var_p))
    res.record(momentum_drift=drift)
    res.check("spreading_rel_error", rel.max(), tol["spreading_rel_error"])
    res.check("momentum_drift", drift, tol["momentum_drift"])
    _guard(res, "final", np.abs(phi.values) ** 2, g)
    res.curve("variance", t=times, var_x=var_num, var_x_exact=var_exact, rel_error=rel, mean_p=mean_p, var_p=var_p)
    return res


def run_equivalence(config: ExperimentConfig) -> RunResult:
    """Liouville evolution of |psi|^2 against Moyal evolution of the same initial Gaussian.

    Each ``[case name]`` section has a role: ``floor`` cases must agree to
    ``floor_linf``, ``identical`` cases to ``identical_linf``, and
    ``divergent`` cases must end at least ``divergence_ratio`` times above
    the largest floor value.
    """
    from .grid import WignerFunction

    res = RunResult("equivalence", config)
    tol = config.tolerances
    cases = [s for s in config.sections if s.startswith("case ")]
    if not cases:
        raise ConfigError("equivalence needs at least one [case name] section")
    finals: dict[str, tuple[str, float]] = {}
    for sec in cases:
        name = sec.split(" ", 1)[1].strip()
        g = config.grid(sec)
        V = config.potential(sec, "potential")
        t_raw = config.get_str(sec, "t_final")
        if t_raw == "period":
            if V.kind != "harmonic":
                raise ConfigError(f"[{sec}] t_final = period needs a harmonic potential")
            t_final = TWO_PI / V.omega(g.mass)
        else:
            t_final = float(t_raw)
        dt = config.get_float(sec, "dt")
        stride = config.get_int(sec, "stride", 0)
        psi = _gaussian_from(config, sec, g)
        w = WignerFunction(g, np.abs(psi.values) ** 2)
        lv = liouville_evolve(psi, V, t_final, dt, stride)
        mv = moyal_evolve(w, V, t_final, dt, stride)
        ts = np.array([t for t, _ in lv])
        linf = np.array([np.max(np.abs(np.abs(a.values) ** 2 - b.values)) for (_, a), (_, b) in zip(lv, mv)])
        res.curve(f"divergence_{name}", t=ts, linf=linf)
        res.record(**{f"linf_{name}": linf[-1], f"t_final_{name}": t_final})
        _guard(res, f"{name}_liouville", np.abs(lv[-1][1].values) ** 2, g)
        _guard(res, f"{name}_moyal", mv[-1][1].values, g)
        finals[name] = (config.get_str(sec, "role", "report"), float(linf[-1]))
    floors = [v for role, v in finals.values() if role == "floor"]
    for name, (role, v) in finals.items():
        if role == "floor":
            res.check(f"floor_{name}", v, tol["floor_linf"])
        elif role == "identical":
            res.check(f"identical_{name}", v, tol["identical_linf"])
        elif role == "divergent":
            if not floors:
                raise ConfigError("a divergent case needs a floor case to compare against")
            ratio = v / max(max(floors), np.finfo(float).tiny)
            res.record(**{f"divergence_ratio_{name}": ratio})
            res.check(f"divergent_{name}", ratio, tol["divergence_ratio"], ">=")
    return res


ENERGY_PROFILES: dict[str, Callable] = {
    "E": lambda E: E,
    "E2": lambda E: E**2,
    "exp_minus_E": lambda E: np.exp(-E),
}


def run_antithermalization(config: ExperimentConfig) -> RunResult:
    """Long-time conservation of <f(E)> along characteristics, compared with thermal values."""
    res = RunResult("antithermalization", config)
    tol = config.tolerances
    g = config.grid()
    V = config.potential()
    if V.kind == "free":
        raise ConfigError("antithermalization needs a confining potential")
    omega = V.omega(g.mass) if V.kind == "harmonic" else config.get_float("dynamics", "omega", 1.0)
    period = TWO_PI / omega
    periods = config.get_float("dynamics", "periods", 50)
    samples = config.get_int("dynamics", "samples", 11)
    dt = config.get_float("dynamics", "dt", 1e-3)
    interp = config.get_str("dynamics", "interpolation", "fourier")
    times = np.linspace(0.0, periods * period, samples)
    psi0 = _gaussian_from(config, "state", g)
    _guard(res, "initial", np.abs(psi0.values) ** 2, g)
    series = characteristics_series(psi0, V, times, dt=dt, interpolation=interp)
    report = conserved_functionals(series, ENERGY_PROFILES, V)
    res.record(period=period, t_final=times[-1])
    for name, r in report.items():
        res.record(**{f"initial_{name}": r["initial"], f"drift_{name}": r["drift"]})
        res.check(f"conservation_{name}", r["drift"], tol["conservation_drift"])
    beta, thermal = thermal_expectations(g, V, report["E"]["initial"], ENERGY_PROFILES)
    res.record(thermal_beta=beta)
    for name, value in thermal.items():
        final = float(report[name]["values"][-1])
        gap = abs(final - value) / max(abs(value), 1e-300)
        res.record(**{f"thermal_{name}": value, f"thermal_gap_{name}": gap})
        if name != "E":  # <E> matches by construction of the temperature
            res.check(f"non_thermal_{name}", gap, tol["thermal_gap_min"], ">=")
    res.curve("conservation", t=times, **{name: r["values"] for name, r in report.items()})

    T = config.get_float("profile", "temperature", 1.0)
    static = stationary_state(lambda E: np.exp(-E / T), g, V)
    _guard(res, "profile", np.abs(static.values) ** 2, g)
    end = characteristics_series(static, V, [times[-1]], dt=dt, interpolation=interp)[0][1]
    scale = np.max(np.abs(static.values))
    static_err = np.max(np.abs(end.values - static.values)) / scale
    split = liouville_evolve(static, V, period, dt)[-1][1]
    res.record(profile_static_linf=static_err, profile_split_step_linf=np.max(np.abs(split.values - static.values)) / scale)
    res.check("profile_static", static_err, tol["static_linf"])
    return res


def _bit_chain(basis: fb.GeneratorBasis) -> tuple[int, int, int]:
    """Signed indices of z(x)1.., 1(x)z.., z(x)z.. (a comeasurable triple)."""
    Q = basis.Q
    out = []
    for letters in ("z" + "1" * (Q - 1), "1z" + "1" * (Q - 2), "zz" + "1" * (Q - 2)):
        k, sign = basis.index(letters)
        out.append(sign * k)
    return tuple(out)


def run_finite_bit_suite(Q: int, config: ExperimentConfig | None = None) -> RunResult:
    """Spectrum, commutator, ensemble and bit-chain checks for Q bits."""
    config = config or ExperimentConfig.from_text("", "finite-bit", set_values={"finite-bit": {"Q": Q}})
    res = RunResult("finite-bit", config)
    atol = config.tolerances["finite_bit_atol"]
    basis = fb.build_generators(Q)
    M = basis.M
    res.record(Q=Q, M=M)
    inv = basis.check(atol=atol, sample=None if Q <= 3 else 48)
    res.check("generator_invariants", max(v for k, v in inv.items() if k != "passed"), atol)

    occ = fb.occupation_operators(M)
    res.check("occupation_sum", np.abs(occ.sum(axis=0) - np.eye(M)).max(), atol)
    X = fb.location_operator(M)
    res.check("location_spectrum", np.abs(np.sort(np.linalg.eigvalsh(X)) - np.sort(fb.locations(M))).max(), atol)

    L = fb.angular_momentum_operator(M)
    plain = np.sort(np.linalg.eigvalsh(L))
    res.check("angular_momentum_spectrum", np.abs(plain - np.sort(fb.angular_momentum_spectrum(M))).max(), atol)
    res.record(angular_momentum_min=plain[0], angular_momentum_max=plain[-1])
    if M > 2:
        U = fb.angular_momentum_eigenstates(M)
        res.check("angular_momentum_eigenvectors", np.abs(L @ U - U * fb.angular_momentum_spectrum(M)).max(), atol)
        states = [fb.state_from_vector(U[:, j], basis) for j in range(M)]
        occ_dev = max(abs(s.expectation(N) - 1 / M) for s in states for N in occ)
        res.check("eigenstate_occupations", occ_dev, atol)
        res.check("eigenstate_location", max(abs(s.expectation(X)) for s in states), atol)
    improved = np.sort(np.linalg.eigvalsh(fb.angular_momentum_operator(M, improved=True)))
    m = fb.momentum_labels(M)
    res.check("improved_spectrum", np.abs(improved - np.sort(np.where(np.abs(m) < M / 2, m, 0))).max(), atol)
    res.curve("angular_momentum_spectrum", index=np.arange(M), plain=plain, improved=improved)

    if Q % 2 == 0:
        Xc, Pc = fb.classical_operators(Q)
        res.check("classical_commutator", np.abs(fb.commutator(Xc, Pc)).max(), 0.0)

    # a pure state: its expectation vector has purity M - 1
    rng = np.random.default_rng(config.get_int("finite-bit", "seed", 0))
    vec = rng.normal(size=M) + 1j * rng.normal(size=M)
    pure = fb.state_from_vector(vec, basis)
    res.record(pure_state_purity=pure.purity)
    res.check("pure_state_purity", abs(pure.purity - (M - 1)), 1e-10)

    if Q == 1:
        # positivity of one-bit states is exactly the purity bound P <= 1
        mismatches = 0
        for rho_k in rng.uniform(-1, 1, size=(2000, 3)):
            s = fb.state_from_expectations(rho_k, basis)
            mismatches += s.positive != (s.purity <= 1 + 1e-12)
        res.check("purity_bound_mismatches", mismatches, 0)
    else:
        chain = _bit_chain(basis)
        mixed = fb.state_from_expectations(pure.rho_k / (M - 1), basis)
        ens = fb.bit_chain_ensemble(mixed, chain)
        rep = fb.bit_chain_check(ens, chain, basis if M <= 16 else None, tol=1e-10)
        res.record(bit_chain_quartic_residual=rep.quartic_residual, ensemble_min_probability=ens.min_probability())
        res.check("bit_chain_failures", 0 if rep.passed else 1, 0)
        res.check("ensemble_min_probability", ens.min_probability(), -1e-12, ">=")
        if ens.K <= fb.ENUMERATE_LIMIT:
            table = ens.table()
            sig = fb._signs(ens.K)
            res.check("ensemble_table_sum", abs(table.sum() - 1), 1e-12)
            res.check("ensemble_table_means", np.abs(sig.T @ table - mixed.rho_k).max(), 1e-12)
        product = fb.bit_chain_check(fb.ensemble_from_state(mixed), chain, None, tol=1e-10)
        res.record(product_ensemble_is_chain=float(product.passed))

    res.record(ordering_combination=ordering_combination_value())
    res.check("ordering_combination", abs(res.numbers["ordering_combination"] - 1.0), config.tolerances["ordering_atol"])
    return res


def ordering_combination_value(n: int = 64) -> float:
    """<PXPX> + <XPXP> - <XXPP> - <PPXX> on a correlated Gaussian Wigner function."""
    from .observables import ordered_correlator, ordering_combination

    g = PhaseSpaceGrid.square(n)
    x, p = g.mesh()
    w = np.exp(-(x**2 - 0.6 * x * p + p**2) / 1.5)
    w = WignerFunction(g, w / (w.sum() * g.weight))
    return float(np.real(ordered_correlator(w, ordering_combination())))


def run_evolve(config: ExperimentConfig) -> RunResult:
    """Generic evolution with observables recorded at every snapshot."""
    res = RunResult("evolve", config)
    tol = config.tolerances
    g = config.grid()
    V = config.potential()
    method = config.get_str("dynamics", "method", "liouville")
    dt = config.get_float("dynamics", "dt")
    t_final = config.get_float("dynamics", "t_final")
    stride = config.get_int("dynamics", "stride", 0)
    kind = config.get_str("state", "kind", "gaussian")
    psi = _initial_wavefunction(config, g, V, kind)
    if method == "liouville":
        series = liouville_evolve(psi, V, t_final, dt, stride)
    elif method == "hw-wavefunction":
        series = classical_wavefunction_quantum_evolve(psi, V, t_final, dt, stride)
    elif method == "moyal":
        series = moyal_evolve(WignerFunction(g, np.abs(psi.values) ** 2, tol=None), V, t_final, dt, stride)
    elif method == "characteristics":
        n = max(1, int(round(t_final / dt)))
        marks = np.arange(0, n + 1, stride or n)
        times = sorted(set((marks * t_final / n).tolist()) | {t_final})
        series = characteristics_series(psi, V, times, dt=dt, interpolation=config.get_str("dynamics", "interpolation", "fourier"))
    else:
        raise ConfigError(f"unknown dynamics {method!r} (liouville, hw-wavefunction, moyal, characteristics)")
    rows = []
    for t, f in series:
        w = f.values if isinstance(f, WignerFunction) else np.abs(f.values) ** 2
        wf = _WField(g, w)
        norm = float(np.sum(w) * g.weight)
        x, p = g.mesh()
        energy = float(np.sum(V.energy(x, p, g.mass) * w) * g.weight) / norm
        rows.append((t, norm, float(np.sum(x * w) * g.weight) / norm, position_variance(wf),
                     float(np.sum(p * w) * g.weight) / norm, momentum_variance(wf), energy))
    rows = np.array(rows)
    res.curve("observables", t=rows[:, 0], norm=rows[:, 1], mean_x=rows[:, 2], var_x=rows[:, 3],
              mean_p=rows[:, 4], var_p=rows[:, 5], energy=rows[:, 6])
    res.record(norm_drift=np.ptp(rows[:, 1]), energy_drift=np.ptp(rows[:, 6]), t_final=rows[-1, 0])
    res.check("norm_drift", res.numbers["norm_drift"], tol["norm_drift"])
    last = series[-1][1]
    _guard(res, "final", last.values if isinstance(last, WignerFunction) else np.abs(last.values) ** 2, g)
    for i, (t, f) in enumerate(series):
        res.fields[f"snapshot_{i:04d}"] = f
    return res


@dataclass(frozen=True)
class _WField:
    grid: PhaseSpaceGrid
    values: np.ndarray


def _initial_wavefunction(config: ExperimentConfig, g: PhaseSpaceGrid, V: Potential, kind: str) -> ClassicalWaveFunction:
    """Gaussian, superposition a1 psi1 + a2 psi2, mixture a w1 + (1 - a) w2, or energy profile."""
    if kind == "gaussian":
        return _gaussian_from(config, "state", g)
    if kind in ("superposition", "mixture"):
        psi1 = _gaussian_from(config, "state", g)
        psi2 = gaussian_wavefunction(
            g,
            config.get_float("state", "x0_2"),
            config.get_float("state", "p0_2", 0.0),
            config.get_float("state", "width_x", 1 / math.sqrt(2)),
            config.get_float("state", "width_p", 1 / math.sqrt(2)),
        )
        if kind == "superposition":
            a1, a2 = config.get_float("state", "a1", 1.0), config.get_float("state", "a2", 1.0)
            return ClassicalWaveFunction(g, a1 * psi1.values + a2 * psi2.values).normalize()
        a = config.get_float("state", "weight", 0.5)
        if not 0 <= a <= 1:
            raise ConfigError("mixture weight must lie in [0, 1]")
        return ClassicalWaveFunction(g, np.sqrt(a * np.abs(psi1.values) ** 2 + (1 - a) * np.abs(psi2.values) ** 2))
    if kind == "energy-profile":
        T = config.get_float("state", "temperature", 1.0)
        return stationary_state(lambda E: np.exp(-E / T), g, V)
    raise ConfigError(f"unknown state kind {kind!r}")


RUNNERS: dict[str, Callable[[ExperimentConfig], RunResult]] = {
    "evolve": run_evolve,
    "double-slit": run_double_slit,
    "packet-spreading": run_packet_spreading,
    "equivalence": run_equivalence,
    "antithermalization": run_antithermalization,
    "finite-bit": lambda cfg: run_finite_bit_suite(cfg.get_int("finite-bit", "Q"), cfg),
}


def run(config: ExperimentConfig) -> RunResult:
    """Run the configured scenario; boundary warnings become failed checks, not noise."""
    start = time.perf_counter()
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", BoundaryMassWarning)
        result = RUNNERS[config.scenario](config)
    result.wall_time = time.perf_counter() - start
    return result


# ---------------------------------------------------------------------------
# outputs and manifest


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def write_outputs(result: RunResult, out_dir) -> dict:
    """Write one ``.dat`` file per curve, the field snapshots, the summary and the manifest."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    files = []
    for name, (cols, data) in result.curves.items():
        path = out / f"{name}.dat"
        np.savetxt(path, data, fmt="%.17g", header=" ".join(cols))
        files.append(path)
    for name, obj in result.fields.items():
        path = out / f"{name}.field"
        write_field(path, obj)
        files.append(path)
    summary = out / "summary.txt"
    summary.write_text(result.summary())
    files.append(summary)
    return emit_manifest(result, out, files)


def manifest_body(result: RunResult, files: Mapping[str, str] | None = None) -> dict:
    """Everything the manifest records except the wall time."""
    cfg = result.config
    grids = {s: dict(v) for s, v in cfg.sections.items() if s == "grid" or s.startswith("case ")}
    return {
        "scenario": result.scenario,
        "config_hash": cfg.hash,
        "config": cfg.sections,
        "grid": grids,
        "tolerances": dict(cfg.tolerances),
        "numbers": result.numbers,
        "checks": [
            {"name": c.name, "value": c.value, "limit": c.limit, "relation": c.relation, "passed": c.passed}
            for c in result.checks
        ],
        "passed": result.passed,
        "files": dict(files or {}),
    }


def manifest_hash(body: Mapping) -> str:
    return hashlib.sha256(json.dumps(body, sort_keys=True).encode()).hexdigest()


def emit_manifest(result: RunResult, out_dir, files=()) -> dict:
    """Write ``manifest.json``; its ``manifest_hash`` ignores the wall time."""
    out = Path(out_dir)
    body = manifest_body(result, {Path(f).name: _sha256(Path(f)) for f in files})
    manifest = dict(body, manifest_hash=manifest_hash(body), wall_time=result.wall_time)
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return manifest
