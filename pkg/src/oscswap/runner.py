"""Scenarios, presets and the reproduction harness.

Scenario files are YAML.  Every dimensional value carries a unit:
frequencies in Hz/kHz/MHz/GHz (ordinary, converted to rad/s by 2 pi),
times in s/ms/us/ns.  Example::

    name: my-run
    states:
      phi: {kind: coherent, alpha: 1}
      phibar: {kind: coherent, alpha: -1}
    coupler: {alpha: 0.7071067811865476, beta: 0.7071067811865476}
    params:
      solve: {g_a: 60 MHz, Delta_a: 1.5 GHz, Delta: 1.25 GHz, delta: 0.25 GHz, k: 1}
      omega_a: 7.5 GHz
      omega_b: 4.5 GHz
      crosstalk_ratio: 0.1
    decoherence: reference        # or none, or {kappa_a: 20 us, ...}
    crosstalk: true
    hamiltonian: effective        # ideal | effective | full
    horizon: 0.6 us
    solver: {method: split, dt: 2 ns, n_samples: 121}
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field, replace
from math import pi, sqrt
from pathlib import Path

import numpy as np
import yaml

from .hamiltonians import (
    LEAKAGE_THRESHOLD,
    ParamSolution,
    PhysicalParams,
    solve_params,
)
from .hilbert import E, F
from .lindblad import (
    DecoherenceRates,
    SolverConfig,
    SolverError,
    Trajectory,
    simulate_protocol_open,
    _CHANNEL_LAYOUT,
)
from .states import DEFAULT_TAIL_TOL, OscState, default_truncation

TWO_PI = 2 * pi

FREQ_UNITS = {"Hz": 1.0, "kHz": 1e3, "MHz": 1e6, "GHz": 1e9}
TIME_UNITS = {"s": 1.0, "ms": 1e-3, "us": 1e-6, "μs": 1e-6, "ns": 1e-9}
_QUANTITY = re.compile(r"^\s*([-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)\s*([A-Za-zμ]+)\s*$")

SOLVE_KEYS = ("g_a", "Delta_a", "Delta", "delta")
EXPLICIT_KEYS = ("g_a", "g_b", "Omega", "Delta_a", "Delta", "delta_b")
SOLVER_KEYS = {"method", "dt", "n_samples", "rtol", "atol", "max_step", "positivity_checks", "magnus_phase"}
TOP_KEYS = {
    "name",
    "states",
    "coupler",
    "params",
    "decoherence",
    "crosstalk",
    "hamiltonian",
    "horizon",
    "truncation",
    "tail_tol",
    "solver",
    "leakage_threshold",
    "output",
}


class ScenarioError(ValueError):
    """Malformed scenario; the message names the offending key."""


# --------------------------------------------------------------------------- #
# units


def parse_quantity(value, kind: str, where: str) -> float:
    """``"60 MHz"`` -> 6e7 (Hz) or ``"0.6 us"`` -> 6e-7 (s)."""
    units = FREQ_UNITS if kind == "freq" else TIME_UNITS
    if isinstance(value, bool) or not isinstance(value, str):
        raise ScenarioError(f"{where}: missing unit (expected one of {', '.join(units)}), got {value!r}")
    m = _QUANTITY.match(value)
    if not m or m.group(2) not in units:
        raise ScenarioError(f"{where}: cannot parse {value!r} as a {kind} with unit {'/'.join(units)}")
    return float(m.group(1)) * units[m.group(2)]


def format_quantity(value: float, kind: str) -> str:
    """Inverse of :func:`parse_quantity`, exact under round-trip."""
    order = ("GHz", "MHz", "kHz", "Hz") if kind == "freq" else ("us", "ns", "ms", "s")
    units = FREQ_UNITS if kind == "freq" else TIME_UNITS
    for u in order:
        x = value / units[u]
        if float(repr(x)) * units[u] == value and (abs(x) >= 1e-3 or u == order[-1]) and abs(x) < 1e4:
            return f"{x!r} {u}"
    return f"{value!r} {'Hz' if kind == 'freq' else 's'}"


# --------------------------------------------------------------------------- #
# scenario


@dataclass(frozen=True)
class Scenario:
    """A complete simulation input.

    Frequencies are ordinary (Hz) and times in seconds, as written in the
    config; :meth:`solution` converts to rad/s.
    """

    name: str
    phi: OscState
    phibar: OscState
    alpha: complex = 1 / sqrt(2)
    beta: complex = 1 / sqrt(2)
    #: solver inputs (Hz) plus ``k``; mutually exclusive with ``explicit``
    solve: dict | None = None
    explicit: dict | None = None
    omega_a: float = 7.5e9
    omega_b: float = 4.5e9
    crosstalk_ratio: float = 0.1
    #: lifetimes in seconds keyed by channel; None means no decoherence
    lifetimes: dict | None = None
    crosstalk: bool = True
    hamiltonian: str = "effective"
    horizon: float = 0.6e-6
    truncation: int | None = None
    tail_tol: float = DEFAULT_TAIL_TOL
    solver: dict = field(default_factory=lambda: {"method": "split", "dt": 2e-9, "n_samples": 121})
    leakage_threshold: float = LEAKAGE_THRESHOLD
    csv: str | None = None
    plot: str | None = None

    def __post_init__(self):
        if (self.solve is None) == (self.explicit is None):
            raise ScenarioError(f"{self.name}: give exactly one of params.solve and params.explicit")
        if self.hamiltonian not in ("ideal", "effective", "full"):
            raise ScenarioError(f"{self.name}: hamiltonian must be ideal, effective or full")
        if not self.horizon > 0:
            raise ScenarioError(f"{self.name}: horizon must be positive")

    # ------------------------------------------------------------------ #
    def solution(self) -> ParamSolution:
        if self.solve is not None:
            s = self.solve
            return solve_params(
                TWO_PI * s["g_a"],
                TWO_PI * s["Delta_a"],
                TWO_PI * s["Delta"],
                TWO_PI * s["delta"],
                int(s.get("k", 1)),
                omega_a=TWO_PI * self.omega_a,
                omega_b=TWO_PI * self.omega_b,
                crosstalk_ratio=self.crosstalk_ratio,
            )
        e = self.explicit
        phys = PhysicalParams(
            **{k: TWO_PI * e[k] for k in EXPLICIT_KEYS},
            omega_a=TWO_PI * self.omega_a,
            omega_b=TWO_PI * self.omega_b,
            g_ab=self.crosstalk_ratio * TWO_PI * max(e["g_a"], e["g_b"]),
        )
        return ParamSolution(phys, phys.ideal())

    def rates(self) -> DecoherenceRates:
        if not self.lifetimes:
            return DecoherenceRates()
        return DecoherenceRates.from_lifetimes(**self.lifetimes)

    def solver_config(self) -> SolverConfig:
        return SolverConfig(**self.solver)

    @property
    def n(self) -> int:
        return self.truncation or max(default_truncation(self.phi), default_truncation(self.phibar))

    @property
    def is_open(self) -> bool:
        return bool(self.lifetimes) and not self.rates().is_zero

    def closed(self) -> Scenario:
        """Same scenario without decoherence and crosstalk."""
        return replace(self, name=self.name + "-closed", lifetimes=None, crosstalk=False, csv=None, plot=None)

    # ------------------------------------------------------------------ #
    def to_dict(self) -> dict:
        d: dict = {"name": self.name}
        d["states"] = {"phi": self.phi.to_dict(), "phibar": self.phibar.to_dict()}
        d["coupler"] = {"alpha": _num(self.alpha), "beta": _num(self.beta)}
        params: dict = {}
        if self.solve is not None:
            params["solve"] = {k: format_quantity(self.solve[k], "freq") for k in SOLVE_KEYS}
            params["solve"]["k"] = int(self.solve.get("k", 1))
        else:
            params["explicit"] = {k: format_quantity(self.explicit[k], "freq") for k in EXPLICIT_KEYS}
        params["omega_a"] = format_quantity(self.omega_a, "freq")
        params["omega_b"] = format_quantity(self.omega_b, "freq")
        params["crosstalk_ratio"] = self.crosstalk_ratio
        d["params"] = params
        if self.lifetimes:
            d["decoherence"] = {
                k: (format_quantity(v, "time") if v is not None else None) for k, v in self.lifetimes.items()
            }
        else:
            d["decoherence"] = "none"
        d["crosstalk"] = self.crosstalk
        d["hamiltonian"] = self.hamiltonian
        d["horizon"] = format_quantity(self.horizon, "time")
        if self.truncation is not None:
            d["truncation"] = self.truncation
        d["tail_tol"] = self.tail_tol
        solver = {}
        for k, v in self.solver.items():
            solver[k] = format_quantity(v, "time") if k in ("dt", "max_step") and v is not None else v
        d["solver"] = solver
        d["leakage_threshold"] = self.leakage_threshold
        out = {k: v for k, v in (("csv", self.csv), ("plot", self.plot)) if v is not None}
        if out:
            d["output"] = out
        return d

    def dumps(self) -> str:
        return yaml.safe_dump(self.to_dict(), sort_keys=False, allow_unicode=True)


def _num(c: complex):
    c = complex(c)
    return float(c.real) if c.imag == 0 else str(c).strip("()")


def _reject_unknown(d: dict, allowed, where: str):
    extra = set(d) - set(allowed)
    if extra:
        raise ScenarioError(f"{where}: unknown key(s) {sorted(extra)}")


def _require(d: dict, key: str, where: str):
    if key not in d:
        raise ScenarioError(f"{where}: missing required key {key!r}")
    return d[key]


def scenario_from_dict(d, source: str = "<dict>") -> Scenario:
    if not isinstance(d, dict) or not d:
        raise ScenarioError(f"{source}: empty or non-mapping scenario")
    _reject_unknown(d, TOP_KEYS, source)
    kw: dict = {"name": str(d.get("name", Path(source).stem))}

    states = _require(d, "states", source)
    if not isinstance(states, dict):
        raise ScenarioError(f"{source}: states must be a mapping")
    _reject_unknown(states, {"phi", "phibar"}, f"{source}: states")
    for key in ("phi", "phibar"):
        spec = _require(states, key, f"{source}: states")
        try:
            kw[key] = OscState.parse(spec) if isinstance(spec, str) else OscState.from_dict(spec)
        except (ValueError, KeyError, TypeError) as exc:
            raise ScenarioError(f"{source}: states.{key}: {exc}") from None

    if "coupler" in d:
        c = d["coupler"]
        _reject_unknown(c, {"alpha", "beta"}, f"{source}: coupler")
        try:
            kw["alpha"] = complex(str(_require(c, "alpha", f"{source}: coupler")).replace("i", "j"))
            kw["beta"] = complex(str(_require(c, "beta", f"{source}: coupler")).replace("i", "j"))
        except ValueError as exc:
            raise ScenarioError(f"{source}: coupler: {exc}") from None

    params = _require(d, "params", source)
    _reject_unknown(params, {"solve", "explicit", "omega_a", "omega_b", "crosstalk_ratio"}, f"{source}: params")
    if "solve" in params:
        s = params["solve"]
        _reject_unknown(s, set(SOLVE_KEYS) | {"k"}, f"{source}: params.solve")
        kw["solve"] = {k: parse_quantity(_require(s, k, f"{source}: params.solve"), "freq", f"{source}: params.solve.{k}") for k in SOLVE_KEYS}
        kw["solve"]["k"] = _as_int(s.get("k", 1), f"{source}: params.solve.k")
    if "explicit" in params:
        e = params["explicit"]
        _reject_unknown(e, EXPLICIT_KEYS, f"{source}: params.explicit")
        kw["explicit"] = {
            k: parse_quantity(_require(e, k, f"{source}: params.explicit"), "freq", f"{source}: params.explicit.{k}")
            for k in EXPLICIT_KEYS
        }
    for k in ("omega_a", "omega_b"):
        if k in params:
            kw[k] = parse_quantity(params[k], "freq", f"{source}: params.{k}")
    if "crosstalk_ratio" in params:
        kw["crosstalk_ratio"] = _as_float(params["crosstalk_ratio"], f"{source}: params.crosstalk_ratio")

    deco = d.get("decoherence", "none")
    if deco in (None, "none"):
        kw["lifetimes"] = None
    elif deco == "reference":
        kw["lifetimes"] = dict(REFERENCE_LIFETIMES)
    elif isinstance(deco, dict):
        _reject_unknown(deco, _CHANNEL_LAYOUT, f"{source}: decoherence")
        kw["lifetimes"] = {
            k: (None if v is None else parse_quantity(v, "time", f"{source}: decoherence.{k}")) for k, v in deco.items()
        }
    else:
        raise ScenarioError(f"{source}: decoherence must be 'reference', 'none' or a lifetime mapping")

    if "crosstalk" in d:
        if not isinstance(d["crosstalk"], bool):
            raise ScenarioError(f"{source}: crosstalk must be true or false")
        kw["crosstalk"] = d["crosstalk"]
    if "hamiltonian" in d:
        kw["hamiltonian"] = str(d["hamiltonian"])
    if "horizon" in d:
        kw["horizon"] = parse_quantity(d["horizon"], "time", f"{source}: horizon")
    if "truncation" in d and d["truncation"] is not None:
        kw["truncation"] = _as_int(d["truncation"], f"{source}: truncation")
    if "tail_tol" in d:
        kw["tail_tol"] = _as_float(d["tail_tol"], f"{source}: tail_tol")
    if "solver" in d:
        sv = dict(d["solver"])
        _reject_unknown(sv, SOLVER_KEYS, f"{source}: solver")
        for k in ("dt", "max_step"):
            if sv.get(k) is not None:
                sv[k] = parse_quantity(sv[k], "time", f"{source}: solver.{k}")
        for k in ("rtol", "atol", "magnus_phase"):
            if k in sv:
                sv[k] = _as_float(sv[k], f"{source}: solver.{k}")
        for k in ("n_samples", "positivity_checks"):
            if k in sv:
                sv[k] = _as_int(sv[k], f"{source}: solver.{k}")
        kw["solver"] = sv
    if "leakage_threshold" in d:
        kw["leakage_threshold"] = _as_float(d["leakage_threshold"], f"{source}: leakage_threshold")
    if "output" in d:
        out = d["output"]
        _reject_unknown(out, {"csv", "plot"}, f"{source}: output")
        kw["csv"], kw["plot"] = out.get("csv"), out.get("plot")
    try:
        sc = Scenario(**kw)
        sc.solver_config()
    except ScenarioError:
        raise
    except (ValueError, TypeError) as exc:
        raise ScenarioError(f"{source}: {exc}") from None
    return sc


def _as_int(v, where):
    if isinstance(v, bool) or not isinstance(v, (int, float)) or int(v) != v:
        raise ScenarioError(f"{where}: expected an integer, got {v!r}")
    return int(v)


def _as_float(v, where):
    if isinstance(v, bool):
        raise ScenarioError(f"{where}: expected a number, got {v!r}")
    try:
        return float(v)
    except (TypeError, ValueError):
        raise ScenarioError(f"{where}: expected a number, got {v!r}") from None


def loads_scenario(text: str, source: str = "<string>") -> Scenario:
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ScenarioError(f"{source}: YAML parse error: {exc}") from None
    return scenario_from_dict(data, source)


def load_scenario(spec: str | Path) -> Scenario:
    """Preset name or path to a YAML file."""
    if str(spec) in PRESETS:
        return PRESETS[str(spec)]
    path = Path(spec)
    if not path.exists():
        raise ScenarioError(f"{spec}: neither a preset ({', '.join(PRESETS)}) nor an existing file")
    return loads_scenario(path.read_text(), str(path))


# --------------------------------------------------------------------------- #
# presets

REFERENCE_LIFETIMES = {
    "kappa_a": 20e-6,
    "kappa_b": 20e-6,
    "gamma_gpg": 60e-6,
    "gamma_eg": 100e-6,
    "gamma_egp": 40e-6,
    "gamma_fg": 100e-6,
    "gamma_fgp": 100e-6,
    "gamma_fe": 30e-6,
    "gamma_phi_gp": 15e-6,
    "gamma_phi_e": 15e-6,
    "gamma_phi_f": 15e-6,
}

REFERENCE_SOLVE = {"g_a": 60e6, "Delta_a": 1.5e9, "Delta": 1.25e9, "delta": 0.25e9, "k": 1}

#: reported fidelities near t = 0.5 us for the open-system presets
REFERENCE_FIDELITY = {"fig2a": 0.959, "fig2b": 0.912, "fig2c": 0.929, "fig2d": 0.918}

# r = 1 squeezed vacuum at n = 30 leaves ~6e-5 above the cutoff
SQUEEZED_TAIL_TOL = 1e-4

_PAIRS = {
    "fig2a": (OscState("coherent", 1 + 0j), OscState("coherent", -1 + 0j), DEFAULT_TAIL_TOL),
    "fig2b": (OscState("squeezed", 1 + 0j), OscState("squeezed", -1 + 0j), SQUEEZED_TAIL_TOL),
    "fig2c": (OscState("coherent", 1 + 0j), OscState("squeezed", 1 + 0j), SQUEEZED_TAIL_TOL),
    "fig2d": (OscState("cat", 1 + 0j, 1), OscState("cat", 1 + 0j, -1), DEFAULT_TAIL_TOL),
}


def _presets() -> dict[str, Scenario]:
    out = {}
    for name, (phi, phibar, tol) in _PAIRS.items():
        base = Scenario(
            name=name,
            phi=phi,
            phibar=phibar,
            solve=dict(REFERENCE_SOLVE),
            lifetimes=dict(REFERENCE_LIFETIMES),
            crosstalk=True,
            tail_tol=tol,
        )
        out[name] = base
        out[name + "-ideal"] = replace(base, name=name + "-ideal", lifetimes=None, crosstalk=False)
    return out


PRESETS = _presets()


# --------------------------------------------------------------------------- #
# running


@dataclass
class RunResult:
    scenario: Scenario
    trajectory: Trajectory
    t_swap: float
    fidelity_at_swap: float
    max_leakage: float
    closed_trajectory: Trajectory | None = None

    @property
    def peak_fidelity(self) -> float:
        return float(np.nanmax(self.trajectory.fidelity))

    def summary(self) -> dict:
        tr = self.trajectory
        return {
            "scenario": self.scenario.name,
            "n": tr.diagnostics.get("n"),
            "hamiltonian": self.scenario.hamiltonian,
            "crosstalk": self.scenario.crosstalk,
            "open": self.scenario.is_open,
            "t_swap_us": self.t_swap * 1e6,
            "fidelity_at_t_swap": self.fidelity_at_swap,
            "peak_fidelity": self.peak_fidelity,
            "max_trace_error": tr.max_trace_error,
            "max_hermiticity_error": float(np.max(tr.hermiticity)),
            "min_eigenvalue": tr.min_eigenvalue,
            "max_leakage_e_f": self.max_leakage,
            "leakage_ok": self.max_leakage <= self.scenario.leakage_threshold,
        }


def _simulate(sc: Scenario, truncation: int | None) -> Trajectory:
    sol = sc.solution()
    times = np.linspace(0.0, sc.horizon, sc.solver_config().n_samples)
    # sample t_swap itself
    if sol.t_swap < sc.horizon:
        times = np.unique(np.r_[times, sol.t_swap])
    cfg = sc.solver_config()
    return simulate_protocol_open(
        sc.phi,
        sc.phibar,
        sc.alpha,
        sc.beta,
        sol,
        sc.rates(),
        crosstalk=sc.crosstalk,
        hamiltonian=sc.hamiltonian,
        n=truncation or sc.n,
        cfg=replace(cfg, n_samples=len(times)) if cfg.n_samples != len(times) else cfg,
        horizon=sc.horizon,
        tail_tol=sc.tail_tol,
        times=times,
    )


def run(
    scenario: Scenario,
    *,
    truncation: int | None = None,
    output: str | None = None,
    plot: str | None = None,
) -> RunResult:
    """Simulate a scenario; write CSV/SVG when paths are given (or set in the scenario)."""
    sc = scenario
    try:
        traj = _simulate(sc, truncation)
    except SolverError as exc:
        raise SolverError(f"scenario {sc.name!r}: {exc}", exc.trajectory) from exc
    t_swap = sc.solution().t_swap
    leak = float(np.max(traj.populations[:, E] + traj.populations[:, F]))
    res = RunResult(sc, traj, t_swap, traj.fidelity_at(t_swap), leak)
    output = output or sc.csv
    plot = plot or sc.plot
    if output:
        traj.to_csv(output)
    if plot:
        if sc.is_open or sc.crosstalk:
            res.closed_trajectory = _simulate(sc.closed(), truncation)
        write_plot(res, plot)
    return res


def write_plot(res: RunResult, path: str) -> None:
    """Single-panel F(t) plot as SVG."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    plt.rcParams["svg.hashsalt"] = "oscswap"
    fig, ax = plt.subplots(figsize=(5.0, 3.4))
    if res.closed_trajectory is not None:
        c = res.closed_trajectory
        ax.plot(c.times * 1e6, c.fidelity, color="tab:blue", lw=1.2, label="closed")
    t = res.trajectory
    ax.plot(
        t.times * 1e6,
        t.fidelity,
        color="tab:red" if res.scenario.is_open else "tab:blue",
        lw=1.2,
        label="open" if res.scenario.is_open else "closed",
    )
    ax.axvline(res.t_swap * 1e6, color="0.6", lw=0.8, ls="--")
    ax.set_xlabel("t (us)")
    ax.set_ylabel("F")
    ax.set_ylim(0, 1.02)
    ax.set_xlim(0, res.scenario.horizon * 1e6)
    ax.set_title(res.scenario.name)
    ax.legend(loc="lower right", frameon=False)
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def validate(suite: str):
    """Run a named validation suite (see :mod:`oscswap.validation`)."""
    from .validation import run_suite

    return run_suite(suite)
