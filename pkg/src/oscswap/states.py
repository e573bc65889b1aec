"""Initial and target states: Fock, coherent, squeezed vacuum, cat, coupler.

Truncated states are renormalized; the weight that fell above the cutoff is
kept on the returned ket as ``tail_mass`` and must not exceed ``tail_tol``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

from .hilbert import E, F, G, GP, DimensionError, Ket, SystemDims, tensor

DEFAULT_TAIL_TOL = 1e-6


class TruncationError(ValueError):
    """The requested Fock cutoff discards more weight than ``tail_tol``."""

    def __init__(self, msg: str, required: int | None = None):
        super().__init__(msg)
        self.required = required


# --------------------------------------------------------------------------- #
# photon-number distributions
#
# Each helper returns log|c_m|^2 for m = 0..m_max of the *normalized* infinite
# state, so tail sums are computed directly instead of as 1 - kept.


def _log_probs_coherent(alpha: complex, m_max: int) -> np.ndarray:
    m = np.arange(m_max + 1)
    x = abs(alpha) ** 2
    if x == 0.0:
        out = np.full(m_max + 1, -np.inf)
        out[0] = 0.0
        return out
    return -x + m * np.log(x) - gammaln(m + 1)


def _log_probs_squeezed(r: float, m_max: int) -> np.ndarray:
    out = np.full(m_max + 1, -np.inf)
    if r == 0.0:
        out[0] = 0.0
        return out
    k = np.arange(m_max // 2 + 1)
    t2 = np.tanh(r) ** 2
    out[2 * k] = k * np.log(t2) + gammaln(2 * k + 1) - 2 * k * np.log(2.0) - 2 * gammaln(k + 1) - np.log(np.cosh(r))
    return out


def _log_probs_cat(alpha: complex, parity: int, m_max: int) -> np.ndarray:
    x = abs(alpha) ** 2
    m = np.arange(m_max + 1)
    out = np.full(m_max + 1, -np.inf)
    keep = (m % 2 == 0) if parity > 0 else (m % 2 == 1)
    # |c_m|^2 = x^m / m! / cosh(x) (even) or / sinh(x) (odd)
    norm = np.log(np.cosh(x)) if parity > 0 else np.log(np.sinh(x))
    out[keep] = m[keep] * np.log(x) - gammaln(m[keep] + 1) - norm
    return out


def _tail(log_probs_fn, n: int) -> float:
    """Probability of photon numbers >= n, summed until the terms are negligible."""
    m_max = n + 64
    while True:
        lp = log_probs_fn(m_max)
        tail = float(np.sum(np.exp(lp[n:])))
        last = float(np.max(np.exp(lp[-2:])))
        if last <= 1e-20 * tail or last < 1e-300:
            return tail
        m_max *= 2


# --------------------------------------------------------------------------- #
# state recipes


@dataclass(frozen=True)
class OscState:
    """Recipe for a single-oscillator pure state.

    ``kind`` is one of ``fock``, ``coherent``, ``squeezed``, ``cat``,
    ``custom``.  ``value`` holds the photon number, the complex amplitude,
    the complex squeezing parameter, or the amplitude tuple respectively.
    """

    kind: str
    value: object = 0
    parity: int = 1

    def __post_init__(self):
        if self.kind not in ("fock", "coherent", "squeezed", "cat", "custom"):
            raise ValueError(f"unknown oscillator state kind {self.kind!r}")
        if self.kind == "cat" and self.parity not in (1, -1):
            raise ValueError("cat parity must be +1 or -1")

    def tail_mass(self, n: int) -> float:
        if self.kind == "fock":
            return 0.0 if int(self.value) < n else 1.0
        if self.kind == "coherent":
            return _tail(lambda mm: _log_probs_coherent(complex(self.value), mm), n)
        if self.kind == "squeezed":
            return _tail(lambda mm: _log_probs_squeezed(abs(complex(self.value)), mm), n)
        if self.kind == "cat":
            return _tail(lambda mm: _log_probs_cat(complex(self.value), self.parity, mm), n)
        amps = np.asarray(self.value, dtype=complex)
        p = np.abs(amps) ** 2
        return float(p[n:].sum() / p.sum()) if p.sum() > 0 else 0.0

    def required_truncation(self, tail_tol: float = DEFAULT_TAIL_TOL) -> int:
        """Smallest cutoff ``n >= 2`` whose discarded weight is <= ``tail_tol``."""
        n = 2
        while self.tail_mass(n) > tail_tol:
            n += 1
            if n > 4096:
                raise TruncationError("no cutoff below 4096 meets the tail tolerance")
        return n

    def ket(self, n: int, tail_tol: float = DEFAULT_TAIL_TOL) -> Ket:
        if self.kind == "fock":
            return fock(int(self.value), n)
        if self.kind == "coherent":
            return coherent(complex(self.value), n, tail_tol)
        if self.kind == "squeezed":
            return squeezed_vacuum(complex(self.value), n, tail_tol)
        if self.kind == "cat":
            return cat(complex(self.value), self.parity, n, tail_tol)
        return custom(self.value, n, tail_tol)

    def to_dict(self) -> dict:
        if self.kind == "fock":
            return {"kind": "fock", "n": int(self.value)}
        if self.kind == "custom":
            return {"kind": "custom", "amplitudes": [_fmt_complex(c) for c in self.value]}
        key = "xi" if self.kind == "squeezed" else "alpha"
        d = {"kind": self.kind, key: _fmt_complex(complex(self.value))}
        if self.kind == "cat":
            d["parity"] = "+" if self.parity > 0 else "-"
        return d

    @classmethod
    def from_dict(cls, d: dict) -> OscState:
        d = dict(d)
        kind = d.pop("kind", None)
        if kind == "fock":
            st = cls("fock", int(d.pop("n")))
        elif kind == "coherent":
            st = cls("coherent", _parse_complex(d.pop("alpha")))
        elif kind == "squeezed":
            st = cls("squeezed", _parse_complex(d.pop("xi")))
        elif kind == "cat":
            par = d.pop("parity", "+")
            st = cls("cat", _parse_complex(d.pop("alpha")), 1 if str(par) in ("+", "1", "+1", "even") else -1)
        elif kind == "custom":
            st = cls("custom", tuple(_parse_complex(c) for c in d.pop("amplitudes")))
        else:
            raise ValueError(f"unknown oscillator state kind {kind!r}")
        if d:
            raise ValueError(f"unknown keys for {kind} state: {sorted(d)}")
        return st

    @classmethod
    def parse(cls, text: str) -> OscState:
        """Parse the compact CLI form, e.g. ``coherent:1``, ``cat:1:-``, ``fock:2``."""
        parts = text.split(":")
        kind = parts[0]
        if kind == "fock":
            return cls("fock", int(parts[1]))
        if kind in ("coherent", "squeezed"):
            return cls(kind, _parse_complex(parts[1]))
        if kind == "cat":
            par = parts[2] if len(parts) > 2 else "+"
            return cls("cat", _parse_complex(parts[1]), -1 if par == "-" else 1)
        raise ValueError(f"cannot parse state {text!r}")


def _parse_complex(v) -> complex:
    if isinstance(v, (int, float, complex)):
        return complex(v)
    return complex(str(v).replace(" ", "").replace("i", "j"))


def _fmt_complex(c: complex):
    c = complex(c)
    if c.imag == 0.0:
        return float(c.real)
    return str(c).strip("()")


# --------------------------------------------------------------------------- #
# factories


def _finish(amps: np.ndarray, tail: float, n: int, tail_tol: float, what: str, recipe: OscState) -> Ket:
    if tail > tail_tol:
        required = recipe.required_truncation(tail_tol)
        raise TruncationError(
            f"{what}: truncation n={n} discards weight {tail:.3e} > tail_tol={tail_tol:.1e}; "
            f"need n >= {required}",
            required,
        )
    nrm = np.linalg.norm(amps)
    return Ket(amps / nrm, (n,), ("osc",), tail)


def fock(k: int, n: int) -> Ket:
    if n < 2:
        raise DimensionError(f"truncation must be >= 2, got {n}")
    if not 0 <= k < n:
        raise TruncationError(f"Fock state |{k}> does not fit truncation n={n}", k + 1)
    v = np.zeros(n, dtype=complex)
    v[k] = 1.0
    return Ket(v, (n,), ("osc",))


def _coherent_amplitudes(alpha: complex, n: int) -> np.ndarray:
    c = np.empty(n, dtype=complex)
    c[0] = np.exp(-0.5 * abs(alpha) ** 2)
    for m in range(n - 1):
        c[m + 1] = c[m] * alpha / np.sqrt(m + 1)
    return c


def coherent(alpha: complex, n: int, tail_tol: float = DEFAULT_TAIL_TOL) -> Ket:
    """Truncated coherent state ``|alpha>``."""
    if n < 2:
        raise DimensionError(f"truncation must be >= 2, got {n}")
    recipe = OscState("coherent", complex(alpha))
    return _finish(_coherent_amplitudes(complex(alpha), n), recipe.tail_mass(n), n, tail_tol, "coherent", recipe)


def squeezed_vacuum(xi: complex, n: int, tail_tol: float = DEFAULT_TAIL_TOL) -> Ket:
    """Truncated squeezed vacuum ``S(xi)|0>`` with ``xi = r exp(i theta)``.

    Only even Fock states are populated; ``|-xi>`` is the same state with
    the squeezing phase shifted by pi.
    """
    if n < 2:
        raise DimensionError(f"truncation must be >= 2, got {n}")
    xi = complex(xi)
    r, theta = abs(xi), np.angle(xi)
    c = np.zeros(n, dtype=complex)
    c[0] = 1.0 / np.sqrt(np.cosh(r))
    z = -np.exp(1j * theta) * np.tanh(r)
    for m in range(0, (n - 1) // 2):
        # c_{2m+2} / c_{2m} = z sqrt((2m+1)/(2m+2))
        c[2 * m + 2] = c[2 * m] * z * np.sqrt((2 * m + 1) / (2 * m + 2))
    recipe = OscState("squeezed", xi)
    return _finish(c, recipe.tail_mass(n), n, tail_tol, "squeezed", recipe)


def cat(alpha: complex, parity: int, n: int, tail_tol: float = DEFAULT_TAIL_TOL) -> Ket:
    """Normalized cat state ``(|alpha> + parity |-alpha>) / sqrt(2 (1 + parity e^{-2|alpha|^2}))``."""
    if n < 2:
        raise DimensionError(f"truncation must be >= 2, got {n}")
    alpha = complex(alpha)
    if parity < 0 and alpha == 0:
        raise ValueError("odd cat state with alpha = 0 is the zero vector")
    c = _coherent_amplitudes(alpha, n) + parity * _coherent_amplitudes(-alpha, n)
    m = np.arange(n)
    c[(m % 2 == 1) if parity > 0 else (m % 2 == 0)] = 0.0
    recipe = OscState("cat", alpha, 1 if parity > 0 else -1)
    return _finish(c, recipe.tail_mass(n), n, tail_tol, "cat", recipe)


def custom(amplitudes, n: int, tail_tol: float = DEFAULT_TAIL_TOL) -> Ket:
    amps = np.zeros(n, dtype=complex)
    src = np.asarray(amplitudes, dtype=complex)
    if not np.any(src):
        raise ValueError("custom state has no nonzero amplitude")
    amps[: min(n, src.size)] = src[:n]
    recipe = OscState("custom", tuple(src))
    return _finish(amps, recipe.tail_mass(n), n, tail_tol, "custom", recipe)


#: default cutoffs for the reference amplitudes (alpha = xi = 1)
DEFAULT_TRUNCATIONS = {"coherent": 15, "cat": 15, "squeezed": 30}


def default_truncation(state: OscState | Ket) -> int:
    """Per-kind default cutoff; Fock and custom states use their own length."""
    if isinstance(state, Ket):
        return state.dim
    if state.kind == "fock":
        return max(2, int(state.value) + 1)
    if state.kind == "custom":
        return max(2, len(state.value))
    return DEFAULT_TRUNCATIONS[state.kind]


# --------------------------------------------------------------------------- #
# coupler


@dataclass(frozen=True)
class CouplerState:
    """Amplitudes on the coupler levels ``(g, g', e, f)``."""

    amplitudes: tuple[complex, complex, complex, complex]

    def __post_init__(self):
        v = np.asarray(self.amplitudes, dtype=complex)
        if v.shape != (4,):
            raise ValueError("coupler state needs four amplitudes (g, g', e, f)")
        if abs(np.linalg.norm(v) - 1.0) > 1e-12:
            raise ValueError(f"coupler state not normalized (norm {np.linalg.norm(v):.12f})")

    @classmethod
    def superposition(cls, alpha: complex, beta: complex) -> CouplerState:
        """``alpha |g'> + beta |g>``."""
        return cls((complex(beta), complex(alpha), 0j, 0j))

    @classmethod
    def level(cls, k: int) -> CouplerState:
        amps = [0j] * 4
        amps[k] = 1.0 + 0j
        return cls(tuple(amps))

    def ket(self) -> Ket:
        return Ket(np.asarray(self.amplitudes, dtype=complex), (4,), ("q",))


def product_state(a: Ket, b: Ket, coupler: CouplerState | Ket, c: Ket | None = None) -> Ket:
    """``|a> (x) |b> [(x) |c>] (x) |coupler>`` in the global (a, b, c, q) order."""
    q = coupler.ket() if isinstance(coupler, CouplerState) else coupler
    if q.dim != 4:
        raise DimensionError("coupler ket must have 4 levels")
    parts = [a, b] + ([c] if c is not None else []) + [q]
    psi = tensor(*parts)
    dims = SystemDims(a.dim, b.dim, c.dim if c is not None else 0)
    out = Ket(psi.data / np.linalg.norm(psi.data), dims.shape, dims.labels, psi.tail_mass)
    return out


__all__ = [
    "DEFAULT_TAIL_TOL",
    "TruncationError",
    "OscState",
    "CouplerState",
    "fock",
    "coherent",
    "squeezed_vacuum",
    "cat",
    "custom",
    "product_state",
    "default_truncation",
    "DEFAULT_TRUNCATIONS",
    "G",
    "GP",
    "E",
    "F",
]
