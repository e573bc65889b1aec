"""Fidelity, populations, purity, entanglement and tail-mass diagnostics."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .hilbert import DensityMatrix, DimensionError, Ket, partial_trace

log = logging.getLogger(__name__)

#: eigenvalues below this are dropped from entropy sums
ENTROPY_CUTOFF = 1e-12
#: pure-state check for entanglement_entropy
PURITY_TOL = 1e-9


class MixedStateError(ValueError):
    """An entropy of entanglement was requested for a mixed state."""


@dataclass(frozen=True)
class MetricSample:
    time: float
    fidelity: float
    trace: float
    purity: float
    populations: tuple[float, float, float, float]
    tail_a: float
    tail_b: float


def _check(rho: DensityMatrix, psi: Ket):
    if rho.shape_ != psi.shape_:
        raise DimensionError(f"state spaces differ: {rho.shape_} vs {psi.shape_}")


def overlap_squared(rho, psi) -> float:
    """Real quadratic form ``<psi|rho|psi>`` on raw arrays."""
    return float(np.real(np.vdot(psi, rho @ psi)))


def clipped_sqrt(q: float) -> float:
    if q < 0:
        if q < -1e-9:
            log.warning("negative fidelity quadratic form %.3e clipped to 0", q)
        return 0.0
    return float(np.sqrt(q))


def fidelity(rho: DensityMatrix | Ket, psi: Ket) -> float:
    """``sqrt(<psi|rho|psi>)``; a ket argument is treated as a pure state."""
    if isinstance(rho, Ket):
        _check(rho, psi)
        return clipped_sqrt(abs(np.vdot(psi.data, rho.data)) ** 2)
    _check(rho, psi)
    return clipped_sqrt(overlap_squared(rho.data, psi.data))


def level_populations(rho: DensityMatrix | Ket) -> tuple[float, float, float, float]:
    """Coupler populations ``(p_g, p_g', p_e, p_f)``."""
    red = partial_trace(rho, ["q"])
    p = np.real(np.diag(red.data))
    return tuple(float(x) for x in p)


def purity(rho: DensityMatrix) -> float:
    """``tr(rho^2)``, computed as the Frobenius norm (rho Hermitian)."""
    return float(np.real(np.vdot(rho.data, rho.data)))


def tail_population(rho: DensityMatrix | Ket, subsystem: str) -> float:
    """Population of the top retained Fock level of one oscillator."""
    red = partial_trace(rho, [subsystem])
    return float(np.real(red.data[-1, -1]))


def von_neumann_entropy(rho: DensityMatrix) -> float:
    w = np.linalg.eigvalsh(0.5 * (rho.data + rho.data.conj().T))
    w = w[w > ENTROPY_CUTOFF]
    return float(-np.sum(w * np.log(w)))


def entanglement_entropy(psi: Ket | DensityMatrix, cut) -> float:
    """Entropy (natural log) of the reduced state on the subsystems in ``cut``."""
    if isinstance(psi, DensityMatrix):
        p = purity(psi) / abs(psi.trace()) ** 2
        if abs(p - 1.0) > PURITY_TOL:
            raise MixedStateError(f"state is mixed (purity {p:.6f}); entanglement entropy needs a pure state")
        rho = psi
    else:
        rho = psi.normalized().dm()
    return von_neumann_entropy(partial_trace(rho, cut))


def sample(t: float, rho: DensityMatrix, target: Ket | None = None) -> MetricSample:
    labels = rho.labels
    return MetricSample(
        time=t,
        fidelity=fidelity(rho, target) if target is not None else float("nan"),
        trace=float(np.real(rho.trace())),
        purity=purity(rho),
        populations=level_populations(rho),
        tail_a=tail_population(rho, "a") if "a" in labels else 0.0,
        tail_b=tail_population(rho, "b") if "b" in labels else 0.0,
    )
