"""Ideal conditional-swap entangling protocol.

The coupler flag ``|g>`` switches on the swap, ``|g'>`` leaves the
oscillators alone.  Starting from ``|phi>_a |phibar>_b (alpha|g'> + beta|g>)``
the phase-corrected swap produces

    alpha |phi>_a |phibar>_b |g'> + beta |phibar>_a |phi>_b |g>,

a pulse ``g' -> (g + g')/sqrt2``, ``g -> (g - g')/sqrt2`` on the coupler,
then a coupler measurement leaves ``alpha|phi phibar> +/- beta|phibar phi>``.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import pi

import numpy as np

from .hamiltonians import IdealParams, build_ideal
from .hilbert import (
    DimensionError,
    G,
    GP,
    Ket,
    Operator,
    SystemDims,
    expm_apply,
    inner,
    lift,
    tensor,
)
from .states import CouplerState, OscState, product_state

NORM_TOL = 1e-9
PHASE_TOL = 1e-9


class PhaseConditionError(ValueError):
    """The swap phase condition is not met."""


class NormalizationError(ValueError):
    """Coupler amplitudes do not satisfy |alpha|^2 + |beta|^2 = 1."""


def _osc(x, n: int | None) -> Ket:
    if isinstance(x, Ket):
        return x
    if n is None:
        raise ValueError("a truncation is needed to build an oscillator state")
    return x.ket(n)


def _phased(psi: Ket, per_photon: complex) -> Ket:
    n = np.arange(psi.dim)
    return Ket(psi.data * per_photon**n, psi.shape_, psi.labels, psi.tail_mass)


def swap_oracle(phi_a: Ket, phi_b: Ket, lambda_sign: int = 1) -> tuple[Ket, Ket]:
    """Exchange two single-mode states with the beam-splitter phases.

    Evolving ``lam (a^dag b + a b^dag)`` for ``pi/(2|lam|)`` maps
    ``|n>_a|m>_b`` to ``e^{-/+ i(n+m) pi/2} |m>_a |n>_b``; the phase
    per photon is ``-i`` for ``lam > 0`` and ``+i`` otherwise.
    """
    if phi_a.dim != phi_b.dim:
        raise DimensionError("swap needs equal truncations")
    per = -1j if lambda_sign > 0 else 1j
    return _phased(phi_b, per), _phased(phi_a, per)


def corrected_swap_oracle(
    phi_a: Ket, phi_b: Ket, omega: float, t: float, lambda_sign: int = 1, tol: float = PHASE_TOL
) -> tuple[Ket, Ket]:
    """Swap including the conditional number shift ``omega``.

    The per-photon phase is ``exp(i(-/+ pi/2 - omega t))``, which is one when
    the phase condition holds; otherwise :class:`PhaseConditionError`.
    """
    phase = -lambda_sign * pi / 2 - omega * t
    residual = phase - 2 * pi * round(phase / (2 * pi))
    if abs(residual) > tol:
        raise PhaseConditionError(f"phase condition violated: residual {residual:.3e} rad (tolerance {tol:.1e})")
    per = np.exp(1j * residual)
    return _phased(phi_b, per), _phased(phi_a, per)


@dataclass(frozen=True)
class EntangledTarget:
    """``alpha |phi>_a |phibar>_b + sign beta |phibar>_a |phi>_b``."""

    phi: OscState | Ket
    phibar: OscState | Ket
    alpha: complex
    beta: complex
    sign: int = 1

    def __post_init__(self):
        _require_normalized(self.alpha, self.beta)

    def unnormalized(self, n: int | None = None) -> Ket:
        p, q = _osc(self.phi, n), _osc(self.phibar, n)
        return self.alpha * tensor(p, q) + (self.sign * self.beta) * tensor(q, p)

    def norm_squared(self, n: int | None = None) -> float:
        return self.unnormalized(n).norm() ** 2

    def ket(self, n: int | None = None) -> Ket:
        return self.unnormalized(n).normalized()


@dataclass(frozen=True)
class Branch:
    probability: float
    state: Ket


@dataclass(frozen=True)
class ProtocolResult:
    pre_pulse_state: Ket
    post_pulse_state: Ket
    #: keyed by coupler outcome, ``"g"`` or ``"gp"``
    branches: dict
    #: ``|<ideal|pre_pulse>|^2``
    ideal_overlap: float

    @property
    def total_probability(self) -> float:
        return sum(b.probability for b in self.branches.values())


def _require_normalized(alpha, beta):
    s = abs(alpha) ** 2 + abs(beta) ** 2
    if abs(s - 1.0) > NORM_TOL:
        raise NormalizationError(f"|alpha|^2 + |beta|^2 = {s:.12f}, expected 1")


def initial_state(phi: Ket, phibar: Ket, alpha: complex, beta: complex) -> Ket:
    """``|phi>_a |phibar>_b (alpha |g'> + beta |g>)``."""
    _require_normalized(alpha, beta)
    return product_state(phi, phibar, CouplerState.superposition(alpha, beta))


def ideal_state(phi: Ket, phibar: Ket, alpha: complex, beta: complex) -> Ket:
    """``alpha |phi>|phibar>|g'> + beta |phibar>|phi>|g>`` (normalized)."""
    _require_normalized(alpha, beta)
    gp = product_state(phi, phibar, CouplerState.level(GP))
    g = product_state(phibar, phi, CouplerState.level(G))
    return (alpha * gp + beta * g).normalized()


def coupler_pulse(dims: SystemDims) -> Operator:
    """``|g'> -> (|g> + |g'>)/sqrt2``, ``|g> -> (|g> - |g'>)/sqrt2``; identity on e, f."""
    u = np.eye(4, dtype=complex)
    s = 1 / np.sqrt(2)
    u[G, G], u[GP, G] = s, -s
    u[G, GP], u[GP, GP] = s, s
    return lift(Operator.from_matrix(u, ((4,), ("q",))), "q", dims)


def _coupler_component(psi: Ket, level: int) -> Ket:
    """Oscillator part of ``psi`` with the coupler projected on ``level``."""
    t = psi.data.reshape(psi.shape_)
    part = np.take(t, level, axis=psi.labels.index("q"))
    labels = tuple(l for l in psi.labels if l != "q")
    return Ket(part.reshape(-1).copy(), part.shape, labels, psi.tail_mass)


def run_protocol(
    phi: OscState | Ket,
    phibar: OscState | Ket,
    alpha: complex,
    beta: complex,
    p: IdealParams,
    dims: SystemDims,
) -> ProtocolResult:
    """Conditional evolution for ``t_swap``, coupler pulse, and measurement branches."""
    _require_normalized(alpha, beta)
    if dims.n_a != dims.n_b:
        raise DimensionError("the protocol needs n_a == n_b")
    residual = p.phase_residual()
    if abs(residual) > PHASE_TOL:
        raise PhaseConditionError(f"ideal parameters violate the phase condition by {residual:.3e} rad")
    u, v = _osc(phi, dims.n_a), _osc(phibar, dims.n_b)
    psi0 = initial_state(u, v, alpha, beta)
    pre = expm_apply(build_ideal(p, dims), psi0, p.t_swap)
    target = ideal_state(u, v, alpha, beta)
    ov = abs(inner(target, pre)) ** 2
    post = coupler_pulse(dims) @ pre
    branches = {}
    for name, level in (("g", G), ("gp", GP)):
        comp = _coupler_component(post, level)
        prob = comp.norm() ** 2
        branches[name] = Branch(prob, comp.normalized() if prob > 0 else comp)
    return ProtocolResult(pre, post, branches, ov)


def attach_oscillator_c(psi: Ket) -> Ket:
    """Insert oscillator c in vacuum (``n_c = 2``) before the coupler."""
    if "c" in psi.labels:
        return psi
    n_a, n_b, n_q = psi.shape_
    dims = SystemDims(n_a, n_b, 2)
    t = psi.data.reshape(n_a, n_b, 1, n_q)
    out = np.concatenate([t, np.zeros_like(t)], axis=2)
    return Ket(out.reshape(-1), dims.shape, dims.labels, psi.tail_mass)


def tripartite_map(pre_pulse: Ket) -> Ket:
    """Ideal emission map ``|g'>|0>_c -> |g>|1>_c``, ``|g>|0>_c -> |g>|0>_c``.

    Oscillator c is added in vacuum if absent.  Coupler levels e and f are
    left untouched.
    """
    psi = attach_oscillator_c(pre_pulse)
    t = psi.data.reshape(psi.shape_).copy()
    if np.linalg.norm(t[:, :, 1, :]) > 1e-12:
        raise ValueError("oscillator c must start in vacuum")
    t[:, :, 1, G] = t[:, :, 0, GP]
    t[:, :, 0, GP] = 0.0
    return Ket(t.reshape(-1), psi.shape_, psi.labels, psi.tail_mass)


@dataclass(frozen=True)
class SwapGateReport:
    #: (label, infidelity) for the four logical inputs
    mappings: tuple[tuple[str, float], ...]

    @property
    def worst_infidelity(self) -> float:
        return max(x for _, x in self.mappings)


def swap_gate_check(phi: OscState | Ket, phibar: OscState | Ket, p: IdealParams, dims: SystemDims) -> SwapGateReport:
    """Propagate the four logical product inputs with the coupler in ``|g>``
    for ``t_swap`` and compare against the exchanged products."""
    u, v = _osc(phi, dims.n_a), _osc(phibar, dims.n_b)
    H = build_ideal(p, dims)
    g = CouplerState.level(G)
    rows = []
    names = {id(u): "phi", id(v): "phibar"}
    for x, y in ((u, u), (u, v), (v, u), (v, v)):
        out = expm_apply(H, product_state(x, y, g), p.t_swap)
        want = product_state(y, x, g)
        infid = max(0.0, 1.0 - abs(inner(want, out)) ** 2)
        rows.append((f"|{names[id(x)]},{names[id(y)]}> -> |{names[id(y)]},{names[id(x)]}>", infid))
    return SwapGateReport(tuple(rows))
