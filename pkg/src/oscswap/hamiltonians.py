"""Hamiltonians of the conditional-swap scheme and the parameter solver.

All rates and frequencies are angular (rad/s).  Time-dependent Hamiltonians
are :class:`TimeDependentOperator` instances, a sum of static operators with
``exp(i nu t)`` coefficients; ``build_*`` helpers evaluate them at a time.

Builders:

* :func:`build_ideal` - conditional beam splitter plus conditional number
  shift, active only when the coupler is in ``|g>``.
* :func:`full_hamiltonian` - four-level coupler driven by both resonators
  and a classical pulse, interaction picture.
* :func:`crosstalk` - direct resonator-resonator leakage coupling.
* :func:`effective_stage2` / :func:`effective_stage3` - the two adiabatic
  elimination stages.
* :func:`build_effective` - the static effective Hamiltonian.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import isfinite, pi, sqrt

import numpy as np
import scipy.sparse as sp

from .hilbert import E, F, G, GP, Operator, SystemDims, annihilation, lift, transition

#: leakage diagnostic threshold on p_e + p_f (engineering default)
LEAKAGE_THRESHOLD = 0.05


class ParameterError(ValueError):
    """Invalid physical parameters."""


class ParameterConsistencyError(RuntimeError):
    """The solved parameters fail their own matching relation."""


def common_period(freqs, max_divisor: int = 64) -> float | None:
    """Smallest ``P`` with every ``nu P`` a multiple of 2 pi (zeros ignored).

    Candidates are ``2 pi m / min|nu|`` for ``m <= max_divisor``; None when
    no candidate fits or all frequencies vanish.
    """
    nus = np.abs(np.asarray(freqs, dtype=float))
    nus = nus[nus != 0.0]
    if nus.size == 0:
        return None
    base = nus.min()
    for m in range(1, max_divisor + 1):
        ratios = nus / (base / m)
        if np.all(np.abs(ratios - np.round(ratios)) < 1e-9 * np.maximum(ratios, 1.0)):
            return 2 * pi * m / base
    return None


@dataclass(frozen=True, eq=False)
class TimeDependentOperator:
    """``H(t) = sum_k op_k exp(i nu_k t)``; frequency 0 marks a static term."""

    terms: tuple[tuple[Operator, float], ...]

    def __post_init__(self):
        if not self.terms:
            raise ValueError("need at least one term")
        first = self.terms[0][0]
        for op, _ in self.terms[1:]:
            first._check(op)

    @classmethod
    def static(cls, op: Operator) -> TimeDependentOperator:
        return cls(((op, 0.0),))

    @property
    def space(self):
        op = self.terms[0][0]
        return op.shape_, op.labels

    @property
    def frequencies(self) -> np.ndarray:
        return np.array([nu for _, nu in self.terms], dtype=float)

    @property
    def is_static(self) -> bool:
        return bool(np.all(self.frequencies == 0.0))

    @property
    def max_frequency(self) -> float:
        return float(np.max(np.abs(self.frequencies)))

    @property
    def period(self) -> float | None:
        """Common period of all phase factors, or None if incommensurate/static."""
        return common_period(self.frequencies)

    def at(self, t: float) -> Operator:
        op0 = self.terms[0][0]
        m = sum((op.data * np.exp(1j * nu * t) for op, nu in self.terms), sp.csr_matrix(op0.data.shape, dtype=complex))
        return Operator(sp.csr_matrix(m), op0.shape_, op0.labels, True)

    def __add__(self, other):
        if isinstance(other, Operator):
            other = TimeDependentOperator.static(other)
        return TimeDependentOperator(self.terms + other.terms)

    __radd__ = __add__


@dataclass(frozen=True)
class IdealParams:
    """Conditional shift ``omega`` and conditional coupling ``lam`` (rad/s)."""

    omega: float
    lam: float

    def __post_init__(self):
        if self.lam == 0.0 or not isfinite(self.lam):
            raise ParameterError("conditional coupling must be finite and nonzero")

    @property
    def t_swap(self) -> float:
        return pi / (2 * abs(self.lam))

    @property
    def lambda_sign(self) -> int:
        return 1 if self.lam > 0 else -1

    def phase_residual(self, t: float | None = None) -> float:
        """Signed distance of ``-/+ pi/2 - omega t`` from the nearest multiple of 2 pi."""
        t = self.t_swap if t is None else t
        phase = -self.lambda_sign * pi / 2 - self.omega * t
        return float(phase - 2 * pi * np.round(phase / (2 * pi)))


@dataclass(frozen=True)
class PhysicalParams:
    """Circuit parameters of the four-level coupler scheme (rad/s).

    ``delta_a`` is derived as ``Delta_a - Delta``.  ``g_ab`` is the crosstalk
    strength and ``omega_a``/``omega_b`` the resonator frequencies that set
    its phase.
    """

    g_a: float
    g_b: float
    Omega: float
    Delta_a: float
    Delta: float
    delta_b: float
    omega_a: float = 0.0
    omega_b: float = 0.0
    g_ab: float = 0.0
    k: int = 1
    lambda_sign: int = 1

    @property
    def delta_a(self) -> float:
        return self.Delta_a - self.Delta

    @property
    def g_tilde_a(self) -> float:
        return self.g_a * self.Omega * (1 / self.Delta_a + 1 / self.Delta) / 2

    @property
    def phase_matched(self) -> bool:
        return abs(self.delta_a - self.delta_b) <= 1e-12 * abs(self.delta_b) and self.delta_b > 0

    @property
    def delta(self) -> float:
        if not self.phase_matched:
            raise ParameterError(
                f"not phase matched: delta_a={self.delta_a:.6e} != delta_b={self.delta_b:.6e} (or delta <= 0)"
            )
        return self.delta_b

    @property
    def lam(self) -> float:
        return self.g_tilde_a * self.g_b / self.delta

    @property
    def Delta_ab(self) -> float:
        return self.omega_a - self.omega_b

    def ideal(self) -> IdealParams:
        return IdealParams(omega=-self.g_b**2 / self.delta, lam=self.lam)


@dataclass(frozen=True)
class ParamSolution:
    physical: PhysicalParams
    ideal: IdealParams

    @property
    def t_swap(self) -> float:
        return self.ideal.t_swap


def stark_shift_mismatch(p: PhysicalParams) -> float:
    """Relative mismatch between the a- and b-mode shifts (zero when matched)."""
    d = p.delta
    lhs = p.g_a**2 / p.Delta_a + p.g_a**2 * p.Omega**2 / (4 * d) * (1 / p.Delta_a + 1 / p.Delta) ** 2
    rhs = p.g_b**2 / d
    return abs(lhs - rhs) / abs(rhs)


def solve_params(
    g_a: float,
    Delta_a: float,
    Delta: float,
    delta: float,
    k: int = 1,
    *,
    omega_a: float = 0.0,
    omega_b: float = 0.0,
    crosstalk_ratio: float = 0.0,
) -> ParamSolution:
    """Pulse amplitude and b-coupling that turn the effective Hamiltonian
    into the ideal conditional one with a phase-free swap.

    Uses the ``2k(2k+1)`` branch, i.e. ``g_b / g_tilde_a = 4k + 1``, which
    makes ``lambda > 0`` and ``-pi/2 - omega t_swap = 2 k pi``.  ``Delta`` is
    the pulse detuning; ``Delta_a - Delta`` must equal ``delta``.

    The crosstalk strength is ``crosstalk_ratio * max(g_a, g_b)``.
    """
    for name, v in (("g_a", g_a), ("Delta_a", Delta_a), ("Delta", Delta), ("delta", delta)):
        if not (isfinite(v) and v > 0):
            raise ParameterError(f"{name} must be positive, got {v}")
    if int(k) != k or k < 1:
        raise ParameterError(f"k must be a positive integer, got {k}")
    if abs((Delta_a - Delta) - delta) > 1e-9 * delta:
        raise ParameterError(
            f"Delta_a - Delta = {Delta_a - Delta:.6e} must equal delta = {delta:.6e} for phase matching"
        )
    k = int(k)
    branch = 2 * k * (2 * k + 1)
    g_b = abs(4 * k + 1) * g_a / (2 * sqrt(branch * Delta_a / delta))
    Omega = Delta * Delta_a / (Delta + Delta_a) * sqrt(delta / (branch * Delta_a))
    phys = PhysicalParams(
        g_a=g_a,
        g_b=g_b,
        Omega=Omega,
        Delta_a=Delta_a,
        Delta=Delta,
        delta_b=Delta_a - Delta,
        omega_a=omega_a,
        omega_b=omega_b,
        g_ab=crosstalk_ratio * max(g_a, g_b),
        k=k,
        lambda_sign=1,
    )
    mismatch = stark_shift_mismatch(phys)
    if mismatch > 1e-9:
        raise ParameterConsistencyError(f"shift matching violated: relative mismatch {mismatch:.3e}")
    ideal = phys.ideal()
    if abs(ideal.phase_residual()) > 1e-9:
        raise ParameterConsistencyError(f"swap phase condition violated by {ideal.phase_residual():.3e} rad")
    return ParamSolution(phys, ideal)


# --------------------------------------------------------------------------- #
# operator builders


class _Ops:
    """Lifted ladder and coupler operators for one ``SystemDims``."""

    def __init__(self, dims: SystemDims):
        self.dims = dims
        self.a = lift(annihilation(dims.n_a), "a", dims)
        self.b = lift(annihilation(dims.n_b), "b", dims)
        self.na = (self.a.dag() @ self.a).with_hermitian()
        self.nb = (self.b.dag() @ self.b).with_hermitian()

    def s(self, i: int, j: int) -> Operator:
        """Coupler ``|i><j|``."""
        return lift(transition(i, j), "q", self.dims)


def _pair(op: Operator, coeff: complex, nu: float) -> tuple[tuple[Operator, float], ...]:
    """``coeff op e^{i nu t} + h.c.``"""
    x = coeff * op
    return ((x, nu), (x.dag(), -nu))


def build_ideal(p: IdealParams, dims: SystemDims) -> Operator:
    """``[omega (a^dag a + b^dag b) + lam (a^dag b + a b^dag)] |g><g|``"""
    o = _Ops(dims)
    pg = o.s(G, G)
    hop = o.a.dag() @ o.b + o.a @ o.b.dag()
    h = (p.omega * (o.na + o.nb) + p.lam * hop) @ pg
    return h.with_hermitian()


def ideal_parts(p: IdealParams, dims: SystemDims) -> tuple[Operator, Operator]:
    """The commuting shift and hopping parts of :func:`build_ideal`."""
    o = _Ops(dims)
    pg = o.s(G, G)
    h0 = (p.omega * (o.na + o.nb)) @ pg
    h1 = (p.lam * (o.a.dag() @ o.b + o.a @ o.b.dag())) @ pg
    return h0.with_hermitian(), h1.with_hermitian()


def full_hamiltonian(p: PhysicalParams, dims: SystemDims) -> TimeDependentOperator:
    """Interaction-picture coupler-resonator-pulse Hamiltonian.

    ``g_a e^{i Delta_a t} a s_fg + g_b e^{i delta_b t} b s_eg
    + Omega e^{i Delta t} s_fe + h.c.``
    """
    o = _Ops(dims)
    terms = (
        _pair(o.a @ o.s(F, G), p.g_a, p.Delta_a)
        + _pair(o.b @ o.s(E, G), p.g_b, p.delta_b)
        + _pair(o.s(F, E), p.Omega, p.Delta)
    )
    return TimeDependentOperator(terms)


def build_full(p: PhysicalParams, t: float, dims: SystemDims) -> Operator:
    return full_hamiltonian(p, dims).at(t)


def crosstalk(p: PhysicalParams, dims: SystemDims) -> TimeDependentOperator:
    """``g_ab e^{i Delta_ab t} a^dag b + h.c.``, identity on the coupler."""
    o = _Ops(dims)
    return TimeDependentOperator(_pair(o.a.dag() @ o.b, p.g_ab, p.Delta_ab))


def build_crosstalk(p: PhysicalParams, t: float, dims: SystemDims) -> Operator:
    return crosstalk(p, dims).at(t)


def _stark_f(p: PhysicalParams, o: _Ops) -> Operator:
    # g_a^2/Delta_a [|f><f| + a^dag a (|f><f| - |g><g|)] + Omega^2/Delta (|f><f| - |e><e|)
    sff, sgg, see = o.s(F, F), o.s(G, G), o.s(E, E)
    return (p.g_a**2 / p.Delta_a) * (sff + o.na @ (sff - sgg)) + (p.Omega**2 / p.Delta) * (sff - see)


def effective_stage2(p: PhysicalParams, dims: SystemDims) -> TimeDependentOperator:
    """First elimination stage: f and the pulse removed, Raman a-e coupling left."""
    o = _Ops(dims)
    static = _stark_f(p, o).with_hermitian()
    seg = o.s(E, G)
    terms = ((static, 0.0),) + _pair(o.a @ seg, -p.g_tilde_a, p.delta_a) + _pair(o.b @ seg, p.g_b, p.delta_b)
    return TimeDependentOperator(terms)


def build_effective_stage2(p: PhysicalParams, t: float, dims: SystemDims) -> Operator:
    return effective_stage2(p, dims).at(t)


def effective_stage3(p: PhysicalParams, dims: SystemDims) -> TimeDependentOperator:
    """Second elimination stage: e removed, conditional hopping left.

    The hopping prefactor is ``-(g~_a g_b / 2)(1/delta_a + 1/delta_b)`` with
    phase ``e^{i(delta_a - delta_b) t}``.
    """
    o = _Ops(dims)
    see, sgg = o.s(E, E), o.s(G, G)
    static = (
        (p.g_tilde_a**2 / p.delta_a) * (see + o.na @ (see - sgg))
        + (p.g_b**2 / p.delta_b) * (see + o.nb @ (see - sgg))
        + _stark_f(p, o)
    ).with_hermitian()
    pref = -(p.g_tilde_a * p.g_b / 2) * (1 / p.delta_a + 1 / p.delta_b)
    hop = o.a @ o.b.dag() @ see - o.a.dag() @ o.b @ sgg
    terms = ((static, 0.0),) + _pair(hop, pref, p.delta_a - p.delta_b)
    return TimeDependentOperator(terms)


def build_effective_stage3(p: PhysicalParams, t: float, dims: SystemDims) -> Operator:
    return effective_stage3(p, dims).at(t)


def build_effective(p: PhysicalParams, dims: SystemDims) -> Operator:
    """Static effective Hamiltonian with e and f unoccupied.

    ``-(g_a^2/Delta_a + g~_a^2/delta) a^dag a |g><g| - (g_b^2/delta) b^dag b |g><g|
    + lam (a b^dag + a^dag b) |g><g|``
    """
    o = _Ops(dims)
    d = p.delta
    pg = o.s(G, G)
    h = (
        -(p.g_a**2 / p.Delta_a + p.g_tilde_a**2 / d) * o.na
        - (p.g_b**2 / d) * o.nb
        + p.lam * (o.a @ o.b.dag() + o.a.dag() @ o.b)
    ) @ pg
    return h.with_hermitian()


# --------------------------------------------------------------------------- #
# validity of the elimination


@dataclass(frozen=True)
class Condition:
    name: str
    large: float
    small: float

    @property
    def ratio(self) -> float:
        """``large / small``; infinite when the small side vanishes."""
        return float("inf") if self.small == 0 else abs(self.large) / abs(self.small)


@dataclass(frozen=True)
class DetuningReport:
    conditions: tuple[Condition, ...]

    def __getitem__(self, name: str) -> Condition:
        for c in self.conditions:
            if c.name == name:
                return c
        raise KeyError(name)

    @property
    def worst(self) -> Condition:
        return min(self.conditions, key=lambda c: c.ratio)

    def rows(self) -> list[tuple[str, float, float, float]]:
        return [(c.name, c.large, c.small, c.ratio) for c in self.conditions]


def check_detuning_conditions(p: PhysicalParams) -> DetuningReport:
    """Evaluate every large-detuning inequality of both elimination stages.

    Reports ``large / small`` for each; nothing is enforced.
    """
    stark_a = p.g_a**2 / p.Delta_a
    stark_p = p.Omega**2 / p.Delta
    conds = (
        Condition("Delta_a >> g_a", p.Delta_a, p.g_a),
        Condition("Delta >> Omega", p.Delta, p.Omega),
        Condition(
            "Delta_a - delta_b >> g_a g_b (1/Delta_a + 1/delta_b)/2",
            p.Delta_a - p.delta_b,
            p.g_a * p.g_b * (1 / p.Delta_a + 1 / p.delta_b) / 2,
        ),
        Condition(
            "Delta - delta_b >> Omega g_b (1/Delta + 1/delta_b)/2",
            p.Delta - p.delta_b,
            p.Omega * p.g_b * (1 / p.Delta + 1 / p.delta_b) / 2,
        ),
        Condition("delta_a >> g~_a", p.delta_a, p.g_tilde_a),
        Condition("delta_a >> g_a^2/Delta_a", p.delta_a, stark_a),
        Condition("delta_a >> Omega^2/Delta", p.delta_a, stark_p),
        Condition("delta_b >> g_b", p.delta_b, p.g_b),
        Condition("delta_b >> g_a^2/Delta_a", p.delta_b, stark_a),
        Condition("delta_b >> Omega^2/Delta", p.delta_b, stark_p),
    )
    return DetuningReport(conds)
