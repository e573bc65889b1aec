"""Lindblad master-equation integration.

    drho/dt = -i[H(t), rho] + sum_k rate_k (L_k rho L_k^dag - {L_k^dag L_k, rho}/2)

The state is propagated on the smallest basis subset that is invariant
under ``H``, every ``L_k`` and every ``L_k^dag L_k`` and contains the
support of ``rho0``.  This is exact: ``rho(t)`` vanishes outside it.

Methods
-------
``rk4``
    Classic fixed-step Runge-Kutta.  The step must resolve the fastest
    phase frequency (``dt <= 1/(50 f_max)``).
``adaptive``
    Dormand-Prince 5(4) with error control on every matrix entry.
``split``
    Strang splitting ``e^{hD/2} U(t, t+h) e^{hD/2}``.  ``U`` is the exact
    unitary of the Hamiltonian part, built block by block on the connected
    components of the Hamiltonian graph (fourth-order Magnus substeps for
    time-dependent terms).  When all phase frequencies share a common
    period the step is a multiple of it and ``U`` is computed once.  The
    dissipator half steps use RK4.

``rho`` is symmetrized after every step; its trace is never renormalized.
"""

from __future__ import annotations

import csv
import io
import logging
import math
from dataclasses import dataclass, field, fields
from math import pi

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components

from . import kernels
from .hamiltonians import (
    ParamSolution,
    TimeDependentOperator,
    build_effective,
    common_period,
    build_ideal,
    crosstalk as crosstalk_term,
    full_hamiltonian,
)
from .hilbert import (
    E,
    F,
    G,
    GP,
    DensityMatrix,
    DimensionError,
    Ket,
    Operator,
    SystemDims,
    annihilation,
    lift,
    transition,
)
from .metrics import clipped_sqrt

log = logging.getLogger(__name__)

CSV_COLUMNS = ("time_us", "fidelity", "trace", "purity", "pop_e", "pop_f", "pop_gprime")
METHODS = ("rk4", "adaptive", "split")


class SolverError(RuntimeError):
    """Integration failed (trace drift, non-finite state, step budget)."""

    def __init__(self, msg: str, trajectory=None):
        super().__init__(msg)
        self.trajectory = trajectory


class StiffnessError(SolverError):
    """Adaptive step size underflow."""


# --------------------------------------------------------------------------- #
# channels


@dataclass(frozen=True, eq=False)
class LindbladChannel:
    operator: Operator
    rate: float
    label: str = ""

    def __post_init__(self):
        if not (math.isfinite(self.rate) and self.rate >= 0):
            raise ValueError(f"channel {self.label!r}: rate must be finite and >= 0, got {self.rate}")


#: field -> (kind, subsystem or (to, from) levels)
_CHANNEL_LAYOUT = {
    "kappa_a": ("ladder", "a"),
    "kappa_b": ("ladder", "b"),
    "gamma_gpg": ("lower", (G, GP)),
    "gamma_eg": ("lower", (G, E)),
    "gamma_egp": ("lower", (GP, E)),
    "gamma_fg": ("lower", (G, F)),
    "gamma_fgp": ("lower", (GP, F)),
    "gamma_fe": ("lower", (E, F)),
    "gamma_phi_gp": ("project", GP),
    "gamma_phi_e": ("project", E),
    "gamma_phi_f": ("project", F),
}


@dataclass(frozen=True)
class DecoherenceRates:
    """Decay, relaxation and dephasing rates in 1/s (inverse lifetimes).

    ``gamma_xy`` relaxes level x to level y (``gp`` stands for g').
    """

    kappa_a: float = 0.0
    kappa_b: float = 0.0
    gamma_gpg: float = 0.0
    gamma_eg: float = 0.0
    gamma_egp: float = 0.0
    gamma_fg: float = 0.0
    gamma_fgp: float = 0.0
    gamma_fe: float = 0.0
    gamma_phi_gp: float = 0.0
    gamma_phi_e: float = 0.0
    gamma_phi_f: float = 0.0

    def __post_init__(self):
        for f in fields(self):
            v = getattr(self, f.name)
            if not (math.isfinite(v) and v >= 0):
                raise ValueError(f"{f.name} must be finite and >= 0, got {v}")

    @classmethod
    def from_lifetimes(cls, **lifetimes) -> DecoherenceRates:
        """Rates from lifetimes in seconds; ``None`` or ``inf`` disables a channel."""
        rates = {}
        for k, T in lifetimes.items():
            if T is None or T == math.inf:
                rates[k] = 0.0
            elif T <= 0:
                raise ValueError(f"lifetime {k} must be positive, got {T}")
            else:
                rates[k] = 1.0 / T
        return cls(**rates)

    @classmethod
    def reference(cls) -> DecoherenceRates:
        """Resonator and coupler lifetimes of the reference circuit."""
        us = 1e-6
        return cls.from_lifetimes(
            kappa_a=20 * us,
            kappa_b=20 * us,
            gamma_gpg=60 * us,
            gamma_eg=100 * us,
            gamma_egp=40 * us,
            gamma_fg=100 * us,
            gamma_fgp=100 * us,
            gamma_fe=30 * us,
            gamma_phi_gp=15 * us,
            gamma_phi_e=15 * us,
            gamma_phi_f=15 * us,
        )

    def as_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}

    @property
    def is_zero(self) -> bool:
        return not any(self.as_dict().values())


def build_channels(rates: DecoherenceRates, dims: SystemDims) -> list[LindbladChannel]:
    """Jump operators for every nonzero rate, in declaration order."""
    out = []
    for name, (kind, arg) in _CHANNEL_LAYOUT.items():
        rate = getattr(rates, name)
        if rate < 0:
            raise ValueError(f"{name} must be >= 0")
        if rate == 0:
            continue
        if kind == "ladder":
            op = lift(annihilation(dims.size(arg)), arg, dims)
        elif kind == "lower":
            op = lift(transition(*arg), "q", dims)
        else:
            op = lift(transition(arg, arg), "q", dims)
        out.append(LindbladChannel(op, rate, name))
    return out


# --------------------------------------------------------------------------- #
# configuration and output


@dataclass(frozen=True)
class SolverConfig:
    method: str = "rk4"
    #: fixed step (rk4) or target step (split); None picks a default
    dt: float | None = None
    rtol: float = 1e-8
    atol: float = 1e-10
    max_step: float | None = None
    #: output samples over [0, horizon] when no explicit times are given
    n_samples: int = 121
    #: number of sampled times with an eigenvalue positivity check
    positivity_checks: int = 20
    trace_tol: float = 1e-6
    #: restrict to the invariant support of rho0
    reduce: bool = True
    #: largest ``nu * h`` per Magnus substep
    magnus_phase: float = 0.2
    max_steps: int = 50_000_000

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}; choose from {METHODS}")
        if self.dt is not None and not self.dt > 0:
            raise ValueError("dt must be positive")
        if self.n_samples < 2:
            raise ValueError("need at least two output samples")


@dataclass
class Trajectory:
    """Sampled metrics; ``populations`` columns are (g, g', e, f)."""

    times: np.ndarray
    fidelity: np.ndarray
    trace: np.ndarray
    purity: np.ndarray
    populations: np.ndarray
    tail_a: np.ndarray
    tail_b: np.ndarray
    hermiticity: np.ndarray
    #: sample index -> smallest eigenvalue
    min_eigenvalues: dict
    final_state: DensityMatrix
    states: list | None = None
    diagnostics: dict = field(default_factory=dict)

    def __len__(self):
        return self.times.size

    @property
    def max_trace_error(self) -> float:
        return float(np.max(np.abs(self.trace - 1.0)))

    @property
    def min_eigenvalue(self) -> float:
        return min(self.min_eigenvalues.values()) if self.min_eigenvalues else float("nan")

    def index_near(self, t: float) -> int:
        return int(np.argmin(np.abs(self.times - t)))

    def fidelity_at(self, t: float) -> float:
        return float(self.fidelity[self.index_near(t)])

    def rows(self):
        for i in range(self.times.size):
            p = self.populations[i]
            yield (self.times[i] * 1e6, self.fidelity[i], self.trace[i], self.purity[i], p[E], p[F], p[GP])

    def to_csv(self, dest=None) -> str:
        """CSV text with :data:`CSV_COLUMNS`, 12 significant digits; written to ``dest`` if given."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for row in self.rows():
            w.writerow([f"{x:.12g}" for x in row])
        text = buf.getvalue()
        if dest is not None:
            with open(dest, "w", newline="") as fh:
                fh.write(text)
        return text


# --------------------------------------------------------------------------- #
# problem assembly


def _as_terms(H) -> list[tuple[sp.csr_matrix, float]]:
    if H is None:
        return []
    if isinstance(H, Operator):
        return [(H.data, 0.0)]
    if isinstance(H, TimeDependentOperator):
        return [(op.data, float(nu)) for op, nu in H.terms]
    return [(op.data if isinstance(op, Operator) else sp.csr_matrix(op), float(nu)) for op, nu in H]


def _pattern(m) -> sp.csr_matrix:
    m = sp.csr_matrix(m)
    m.eliminate_zeros()
    return sp.csr_matrix((np.ones(m.nnz), m.indices, m.indptr), shape=m.shape)


def invariant_support(seed: np.ndarray, generators: list) -> np.ndarray:
    """Sorted indices reachable from ``seed`` through the nonzero patterns of ``generators``."""
    d = generators[0].shape[0] if generators else seed.size
    reach = np.zeros(d, dtype=bool)
    reach[seed] = True
    if not generators:
        return np.flatnonzero(reach)
    # A[j, i] != 0 means i -> j; jump operators only map downhill
    A = sum(_pattern(g) for g in generators).tocsr()
    while True:
        nxt = reach | (A @ reach.astype(float) > 0)
        if np.array_equal(nxt, reach):
            return np.flatnonzero(reach)
        reach = nxt


def _scatter(pattern: sp.csr_matrix, m: sp.csr_matrix) -> np.ndarray:
    """Data of ``m`` laid out on the (superset) sparsity ``pattern``."""
    n = pattern.shape[1]
    rows = np.repeat(np.arange(pattern.shape[0]), np.diff(pattern.indptr))
    keys = rows.astype(np.int64) * n + pattern.indices
    c = m.tocoo()
    mk = c.row.astype(np.int64) * n + c.col
    pos = np.searchsorted(keys, mk)
    out = np.zeros(pattern.nnz, dtype=complex)
    np.add.at(out, pos, c.data)
    return out


class _Problem:
    """Right-hand side on the reduced, block-ordered basis."""

    def __init__(self, H, channels, rho0: np.ndarray, reduce: bool, backend: str | None = None):
        self.kern = kernels.get(backend)
        d = rho0.shape[0]
        terms = _as_terms(H)
        for m, _ in terms:
            if m.shape != (d, d):
                raise DimensionError("Hamiltonian and state dimensions differ")
        for ch in channels:
            if ch.operator.dim != d:
                raise DimensionError("jump operator and state dimensions differ")
        if reduce:
            seed = np.flatnonzero(np.any(rho0 != 0, axis=1))
            gens = [m for m, _ in terms]
            for ch in channels:
                L = ch.operator.data
                gens += [L, (L.conj().T @ L).tocsr()]
            idx = invariant_support(seed, gens)
        else:
            idx = np.arange(d)

        # merge equal frequencies
        merged: dict[float, sp.csr_matrix] = {}
        for m, nu in terms:
            sub = sp.csr_matrix(m)[idx][:, idx]
            merged[nu] = merged[nu] + sub if nu in merged else sub
        # order basis so connected blocks of the Hamiltonian are contiguous
        union = sum((_pattern(m) for m in merged.values()), sp.csr_matrix((idx.size, idx.size)))
        if merged:
            n_blocks, labels = connected_components(union, directed=False)
        else:
            n_blocks, labels = idx.size, np.arange(idx.size)
        order = np.argsort(labels, kind="stable")
        self.idx = idx[order]
        self.dim_full = d
        self.dim = self.idx.size
        self.labels = labels[order]
        bounds = np.flatnonzero(np.diff(self.labels)) + 1
        self.blocks = list(zip(np.r_[0, bounds], np.r_[bounds, self.dim]))

        self.freqs = np.array(sorted(merged), dtype=float)
        mats = [merged[nu][order][:, order].tocsr() for nu in self.freqs]
        pat = _pattern(sum(mats, sp.csr_matrix((self.dim, self.dim))))
        pat.sort_indices()
        self.h_mats = mats
        self.h_indptr = np.ascontiguousarray(pat.indptr, dtype=np.int32)
        self.h_indices = np.ascontiguousarray(pat.indices, dtype=np.int32)
        self.h_data = np.array([_scatter(pat, m) for m in mats]).reshape(len(mats), pat.nnz)
        self.nu_max = float(np.max(np.abs(self.freqs))) if self.freqs.size else 0.0
        absum = sum((abs(m) for m in mats), sp.csr_matrix((self.dim, self.dim)))
        self.h_norm = float(np.max(np.asarray(absum.sum(axis=1)))) if mats and absum.nnz else 0.0

        # dissipator: general jumps through kernels, diagonal parts elementwise
        self.jumps = []
        diag_jumps = []
        Ksum = sp.csr_matrix((self.dim, self.dim), dtype=complex)
        for ch in channels:
            if ch.rate == 0:
                continue
            L = ch.operator.data[self.idx][:, self.idx].tocsr()
            L.eliminate_zeros()
            if L.nnz == 0:
                continue
            Ksum = Ksum + ch.rate * (L.conj().T @ L)
            if _is_diagonal(L):
                diag_jumps.append((ch.rate, L.diagonal()))
            else:
                self.jumps.append((kernels.CSR(L), ch.rate))
        Ksum = Ksum.tocsr()
        Ksum.eliminate_zeros()
        self.has_dissipation = Ksum.nnz > 0
        self.K_general = None
        W = None
        if diag_jumps or Ksum.nnz:
            if _is_diagonal(Ksum):
                k = Ksum.diagonal().real
                W = -0.5 * (k[:, None] + k[None, :])
            else:
                self.K_general = kernels.CSR(Ksum)
            for rate, dg in diag_jumps:
                term = rate * np.outer(dg, dg.conj())
                W = term if W is None else W + term
            if W is not None and np.all(np.imag(W) == 0):
                W = np.ascontiguousarray(np.real(W))
        self.W = W
        self.diss_norm = float(np.max(np.abs(Ksum.diagonal()))) * 2 if Ksum.nnz else 0.0
        self.work = np.empty((self.dim, self.dim), dtype=complex)

    # ------------------------------------------------------------------ #
    def restrict_state(self, rho: np.ndarray) -> np.ndarray:
        return np.ascontiguousarray(rho[np.ix_(self.idx, self.idx)])

    def expand_state(self, r: np.ndarray) -> np.ndarray:
        out = np.zeros((self.dim_full, self.dim_full), dtype=complex)
        out[np.ix_(self.idx, self.idx)] = r
        return out

    def h_values(self, t: float) -> np.ndarray:
        if self.freqs.size == 1 and self.freqs[0] == 0.0:
            return self.h_data[0]
        return np.exp(1j * self.freqs * t) @ self.h_data

    def dissipator(self, rho: np.ndarray, out: np.ndarray) -> np.ndarray:
        """``out += D(rho)``."""
        k = self.kern
        for L, rate in self.jumps:
            k.sandwich(out, rho, L.indptr, L.indices, L.data, rate, self.work)
        if self.K_general is not None:
            K = self.K_general
            k.hermitian_product(out, rho, K.indptr, K.indices, K.data, -0.5 + 0j, self.work)
        if self.W is not None:
            out += self.W * rho
        return out

    def rhs(self, t: float, rho: np.ndarray, out: np.ndarray) -> np.ndarray:
        out.fill(0)
        if self.h_data.shape[0]:
            self.kern.hermitian_product(
                out, rho, self.h_indptr, self.h_indices, self.h_values(t), -1j, self.work
            )
        return self.dissipator(rho, out)


def _is_diagonal(m: sp.csr_matrix) -> bool:
    c = m.tocoo()
    return bool(np.all(c.row == c.col))


def _hermitize(rho: np.ndarray) -> np.ndarray:
    rho += rho.conj().T
    rho *= 0.5
    return rho


# --------------------------------------------------------------------------- #
# integrators


class _Sampler:
    """Records metrics of the reduced state at output times."""

    def __init__(self, prob: _Problem, times, target: np.ndarray | None, dims_info, cfg: SolverConfig, store: bool):
        self.prob = prob
        self.times = np.asarray(times, dtype=float)
        n = self.times.size
        self.target = None if target is None else np.ascontiguousarray(target[prob.idx])
        shape, labels = dims_info
        self.shape, self.labels = shape, labels
        grids = np.unravel_index(prob.idx, shape)
        self.q = grids[labels.index("q")] if "q" in labels else None
        self.tops = {}
        for osc in ("a", "b"):
            if osc in labels:
                p = labels.index(osc)
                self.tops[osc] = grids[p] == shape[p] - 1
        self.fid = np.full(n, np.nan)
        self.tr = np.empty(n)
        self.pur = np.empty(n)
        self.pops = np.zeros((n, 4))
        self.tail = {"a": np.zeros(n), "b": np.zeros(n)}
        self.herm = np.empty(n)
        k = min(cfg.positivity_checks, n)
        self.check_at = set(np.unique(np.round(np.linspace(0, n - 1, k)).astype(int)).tolist()) if k > 0 else set()
        self.min_eigs = {}
        self.store = store
        self.states = [] if store else None

    def record(self, i: int, rho: np.ndarray):
        diag = np.real(np.diagonal(rho))
        self.tr[i] = diag.sum()
        self.pur[i] = float(np.real(np.vdot(rho, rho)))
        if self.q is not None:
            self.pops[i] = np.bincount(self.q, weights=diag, minlength=4)[:4]
        for osc, mask in self.tops.items():
            self.tail[osc][i] = diag[mask].sum()
        self.herm[i] = float(np.max(np.abs(rho - rho.conj().T))) if rho.size else 0.0
        if self.target is not None:
            self.fid[i] = clipped_sqrt(float(np.real(np.vdot(self.target, rho @ self.target))))
        if i in self.check_at:
            lam = float(np.linalg.eigvalsh(rho)[0]) if rho.size else 0.0
            if self.prob.dim < self.prob.dim_full:
                lam = min(lam, 0.0)
            self.min_eigs[i] = lam
        if self.store:
            self.states.append(DensityMatrix(self.prob.expand_state(rho), self.shape, self.labels))
        if not np.isfinite(self.tr[i]):
            raise SolverError(f"non-finite state at t={self.times[i]:.6e} s")


def _rk4_step(prob: _Problem, t, rho, h, ks, tmp):
    k1, k2, k3, k4 = ks
    prob.rhs(t, rho, k1)
    np.multiply(k1, h / 2, out=tmp)
    tmp += rho
    prob.rhs(t + h / 2, tmp, k2)
    np.multiply(k2, h / 2, out=tmp)
    tmp += rho
    prob.rhs(t + h / 2, tmp, k3)
    np.multiply(k3, h, out=tmp)
    tmp += rho
    prob.rhs(t + h, tmp, k4)
    k2 += k3
    k2 *= 2
    k1 += k2
    k1 += k4
    k1 *= h / 6
    rho += k1
    return _hermitize(rho)


def default_rk4_step(prob: _Problem) -> float:
    """``1/(50 f_max)`` with ``f_max`` the largest phase or spectral frequency (Hz)."""
    f_max = max(prob.nu_max, prob.h_norm, prob.diss_norm) / (2 * pi)
    return 1.0 / (50 * f_max) if f_max > 0 else math.inf


def _run_rk4(prob, rho, sampler, cfg):
    h_max = cfg.dt if cfg.dt is not None else default_rk4_step(prob)
    bound = default_rk4_step(prob)
    if h_max > bound * (1 + 1e-12):
        raise ValueError(f"rk4 step {h_max:.3e} s exceeds 1/(50 f_max) = {bound:.3e} s")
    ks = [np.empty_like(rho) for _ in range(4)]
    tmp = np.empty_like(rho)
    times = sampler.times
    sampler.record(0, rho)
    steps = 0
    for i in range(1, times.size):
        span = times[i] - times[i - 1]
        n = max(1, math.ceil(span / h_max - 1e-9)) if math.isfinite(h_max) else 1
        h = span / n
        for j in range(n):
            _rk4_step(prob, times[i - 1] + j * h, rho, h, ks, tmp)
        steps += n
        sampler.record(i, rho)
    return {"steps": steps, "dt": h_max}


# Dormand-Prince 5(4)
_DP_C = (0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0)
_DP_A = (
    (),
    (1 / 5,),
    (3 / 40, 9 / 40),
    (44 / 45, -56 / 15, 32 / 9),
    (19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729),
    (9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656),
    (35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84),
)
_DP_E = (71 / 57600, 0.0, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40)


def _run_adaptive(prob, rho, sampler, cfg):
    times = sampler.times
    sampler.record(0, rho)
    k = [np.empty_like(rho) for _ in range(7)]
    y = np.empty_like(rho)
    err = np.empty_like(rho)
    t = times[0]
    prob.rhs(t, rho, k[0])
    scale0 = cfg.atol + cfg.rtol * np.abs(rho)
    with np.errstate(over="ignore"):
        d0 = np.sqrt(np.mean(np.abs(rho / scale0) ** 2))
        d1 = np.sqrt(np.mean(np.abs(k[0] / scale0) ** 2))
        h = 0.01 * d0 / d1 if d1 > 1e-5 and d0 > 1e-5 else 0.0
    if not (np.isfinite(h) and h > 0):
        h = 1e-6 * (times[-1] - times[0])
    if prob.nu_max:
        h = min(h, 0.5 / prob.nu_max)
    max_step = cfg.max_step or math.inf
    span = times[-1] - times[0]
    accepted = rejected = 0
    for i in range(1, times.size):
        t_end = times[i]
        while t < t_end:
            if accepted + rejected > cfg.max_steps:
                raise SolverError(f"step budget exhausted at t={t:.6e} s")
            h = min(h, max_step)
            last = t + h >= t_end
            hs = t_end - t if last else h
            for s in range(1, 7):
                np.copyto(y, rho)
                for j, a in enumerate(_DP_A[s]):
                    if a:
                        y += (hs * a) * k[j]
                if s == 6:
                    _hermitize(y)
                prob.rhs(t + _DP_C[s] * hs, y, k[s])
            err.fill(0)
            for j, e in enumerate(_DP_E):
                if e:
                    err += (hs * e) * k[j]
            sc = cfg.atol + cfg.rtol * np.maximum(np.abs(rho), np.abs(y))
            en = float(np.sqrt(np.mean(np.abs(err / sc) ** 2)))
            if not np.isfinite(en):
                raise SolverError(f"non-finite error estimate at t={t:.6e} s")
            fac = 5.0 if en == 0 else min(5.0, max(0.2, 0.9 * en**-0.2))
            if en <= 1.0:
                t = t_end if last else t + hs
                rho, y = y, rho
                k[0], k[6] = k[6], k[0]
                accepted += 1
                # a step shortened to hit a sample time does not shrink the proposal
                h = max(h, hs * fac) if last else hs * fac
            else:
                rejected += 1
                h = hs * fac
                # below eps * span the error estimate rounds to zero and steps stall
                if h < 16 * np.finfo(float).eps * max(abs(t), span):
                    raise StiffnessError(
                        f"step size underflow at t={t:.6e} s: h={h:.3e} s, error ratio {en:.3e}, "
                        f"rtol={cfg.rtol:.1e}, atol={cfg.atol:.1e}"
                    )
        sampler.record(i, rho)
    return {"steps": accepted, "rejected": rejected, "out": rho}


def _expm_hermitian(K: np.ndarray) -> np.ndarray:
    """``exp(-i K)`` for a stack of Hermitian matrices."""
    w, v = np.linalg.eigh(K)
    return (v * np.exp(-1j * w)[..., None, :]) @ np.swapaxes(v.conj(), -1, -2)


class _BlockPropagator:
    """Exact Hamiltonian propagator over ``[t0, t0 + h]`` on the block structure."""

    def __init__(self, prob: _Problem, magnus_phase: float):
        self.prob = prob
        self.magnus_phase = magnus_phase
        groups: dict[int, list[int]] = {}
        for b, (s0, s1) in enumerate(prob.blocks):
            groups.setdefault(s1 - s0, []).append(b)
        self.groups = []
        for size, members in groups.items():
            starts = np.array([prob.blocks[b][0] for b in members])
            if not prob.h_mats:
                hk = np.zeros((0, len(members), size, size), dtype=complex)
            elif size == 1:
                hk = np.array([m.diagonal()[starts] for m in prob.h_mats]).reshape(len(prob.h_mats), -1, 1, 1)
            else:
                hk = np.array(
                    [[m[s : s + size, s : s + size].toarray() for s in starts] for m in prob.h_mats]
                ).reshape(len(prob.h_mats), len(members), size, size)
            self.groups.append((size, starts, hk))
        self.static = bool(np.all(prob.freqs == 0.0))

    def __call__(self, t0: float, h: float):
        """List of ``(size, starts, U)`` with ``U`` of shape (blocks, size, size)."""
        out = []
        for size, starts, hk in self.groups:
            if hk.shape[0] == 0:
                U = np.broadcast_to(np.eye(size, dtype=complex), (starts.size, size, size)).copy()
            elif self.static:
                U = _expm_hermitian(h * hk.sum(axis=0))
            else:
                U = self._magnus(hk, t0, h)
            out.append((size, starts, U))
        return out

    def _magnus(self, hk, t0, h):
        prob = self.prob
        rate = max(prob.nu_max, prob.h_norm)
        n_sub = max(1, math.ceil(h * rate / self.magnus_phase))
        hs = h / n_sub
        c1, c2 = 0.5 - math.sqrt(3) / 6, 0.5 + math.sqrt(3) / 6
        m, size = hk.shape[1], hk.shape[2]
        U = np.broadcast_to(np.eye(size, dtype=complex), (m, size, size)).copy()
        for j in range(n_sub):
            t = t0 + j * hs
            H1 = np.tensordot(np.exp(1j * prob.freqs * (t + c1 * hs)), hk, axes=1)
            H2 = np.tensordot(np.exp(1j * prob.freqs * (t + c2 * hs)), hk, axes=1)
            K = (hs / 2) * (H1 + H2) - 1j * (math.sqrt(3) * hs**2 / 12) * (H2 @ H1 - H1 @ H2)
            K = 0.5 * (K + np.swapaxes(K.conj(), -1, -2))
            U = _expm_hermitian(K) @ U
        return U


def _apply_unitary(rho: np.ndarray, props) -> np.ndarray:
    """``rho <- U rho U^dag`` for block-diagonal ``U``."""
    for size, starts, U in props:
        if size == 1:
            ph = np.empty(rho.shape[0], dtype=complex)
            ph.fill(1.0)
            ph[starts] = U[:, 0, 0]
            if np.all(ph == 1.0):
                continue
            rho *= ph[:, None]
            rho *= ph.conj()[None, :]
            continue
        for b, s in enumerate(starts):
            sl = slice(s, s + size)
            rho[sl, :] = U[b] @ rho[sl, :]
        for b, s in enumerate(starts):
            sl = slice(s, s + size)
            rho[:, sl] = rho[:, sl] @ U[b].conj().T
    return rho


def _split_grid(prob: _Problem, cfg: SolverConfig, horizon: float) -> tuple[float, int | None]:
    """Step and number of distinct step propagators (None: recompute every step).

    A periodic Hamiltonian gets ``h = m P`` (one propagator) or ``h = P / M``
    (``M`` propagators reused cyclically), whichever is closest to the target.
    """
    target = min(cfg.dt if cfg.dt is not None else 1e-9, horizon)
    if np.all(prob.freqs == 0.0):
        return target, 1
    period = common_period(prob.freqs)
    if period is None:
        return target, None
    if target >= period:
        return max(1, round(target / period)) * period, 1
    m = max(1, round(period / target))
    return period / m, m


def _run_split(prob, rho, sampler, cfg, h, n_phases):
    times = sampler.times
    cache = {}
    prop = _BlockPropagator(prob, cfg.magnus_phase)
    steps = np.round(times / h).astype(np.int64)
    ks = [np.empty_like(rho) for _ in range(4)]
    tmp = np.empty_like(rho)
    dnorm = prob.diss_norm + sum(r * float(np.max(np.abs(L.data))) ** 2 for L, r in prob.jumps)
    diss = _DissOnly(prob)

    def dissipate(tau):
        if not prob.has_dissipation or tau == 0:
            return
        n = max(1, math.ceil(tau * dnorm / 0.05))
        for _ in range(n):
            _rk4_step(diss, 0.0, rho, tau / n, ks, tmp)

    sampler.record(0, rho)
    owed = False
    i_sample = 1
    for j in range(int(steps[-1])):
        dissipate(h if owed else h / 2)
        if n_phases is None:
            U = prop(j * h, h)
        else:
            key = j % n_phases
            U = cache.get(key)
            if U is None:
                U = cache[key] = prop(key * h, h)
        _apply_unitary(rho, U)
        if i_sample < steps.size and steps[i_sample] == j + 1:
            dissipate(h / 2)
            owed = False
            _hermitize(rho)
            while i_sample < steps.size and steps[i_sample] == j + 1:
                sampler.record(i_sample, rho)
                i_sample += 1
        else:
            owed = True
    return {"steps": int(steps[-1]), "dt": h}


class _DissOnly:
    """Adapter exposing only the dissipator as ``rhs``."""

    def __init__(self, prob):
        self.prob = prob

    def rhs(self, t, rho, out):
        out.fill(0)
        return self.prob.dissipator(rho, out)


def integrate(
    rho0: DensityMatrix | Ket,
    H,
    channels: list[LindbladChannel],
    cfg: SolverConfig | None = None,
    horizon: float | None = None,
    *,
    times=None,
    target: Ket | None = None,
    store_states: bool = False,
    backend: str | None = None,
) -> Trajectory:
    """Integrate from ``rho0`` over ``[0, horizon]``.

    ``H`` is an :class:`Operator`, a :class:`TimeDependentOperator`, a
    sequence of ``(operator, frequency)`` pairs, or None.  ``target`` adds
    ``F = sqrt(<target|rho|target>)`` to every sample.  With ``split`` the
    output times are snapped to the step grid.
    """
    cfg = cfg or SolverConfig()
    if isinstance(rho0, Ket):
        rho0 = rho0.dm()
    if times is None:
        if horizon is None or not horizon > 0:
            raise ValueError("horizon must be positive")
        times = np.linspace(0.0, horizon, cfg.n_samples)
    times = np.asarray(times, dtype=float)
    if times[0] != 0.0 or np.any(np.diff(times) <= 0):
        raise ValueError("output times must start at 0 and increase strictly")
    horizon = float(times[-1])
    prob = _Problem(H, channels, rho0.data, cfg.reduce, backend)
    rho = prob.restrict_state(rho0.data.astype(complex))
    _hermitize(rho)

    diag = {"method": cfg.method, "dim": prob.dim_full, "reduced_dim": prob.dim, "backend": prob.kern.BACKEND}
    if cfg.method == "split":
        h, n_phases = _split_grid(prob, cfg, horizon)
        times = np.unique(np.round(times / h)) * h
        diag["propagators"] = n_phases
    sampler = _Sampler(prob, times, None if target is None else target.data, (rho0.shape_, rho0.labels), cfg, store_states)
    if cfg.method == "rk4":
        info = _run_rk4(prob, rho, sampler, cfg)
    elif cfg.method == "adaptive":
        info = _run_adaptive(prob, rho, sampler, cfg)
        rho = info.pop("out")
    else:
        info = _run_split(prob, rho, sampler, cfg, h, n_phases)
    diag.update(info)

    traj = Trajectory(
        times=sampler.times,
        fidelity=sampler.fid,
        trace=sampler.tr,
        purity=sampler.pur,
        populations=sampler.pops,
        tail_a=sampler.tail["a"],
        tail_b=sampler.tail["b"],
        hermiticity=sampler.herm,
        min_eigenvalues=sampler.min_eigs,
        final_state=DensityMatrix(prob.expand_state(rho), rho0.shape_, rho0.labels),
        states=sampler.states,
        diagnostics=diag,
    )
    drift = traj.max_trace_error
    if drift > cfg.trace_tol:
        raise SolverError(f"trace drift {drift:.3e} exceeds tolerance {cfg.trace_tol:.1e}", traj)
    return traj


# --------------------------------------------------------------------------- #
# protocol driver


HAMILTONIANS = ("ideal", "effective", "full")


def protocol_hamiltonian(solution: ParamSolution, dims: SystemDims, kind: str = "effective", crosstalk: bool = True):
    """Hamiltonian source for an open protocol run, crosstalk added on request."""
    if kind == "ideal":
        H = TimeDependentOperator.static(build_ideal(solution.ideal, dims))
    elif kind == "effective":
        H = TimeDependentOperator.static(build_effective(solution.physical, dims))
    elif kind == "full":
        H = full_hamiltonian(solution.physical, dims)
    else:
        raise ValueError(f"unknown Hamiltonian choice {kind!r}; choose from {HAMILTONIANS}")
    if crosstalk and solution.physical.g_ab != 0:
        H = H + crosstalk_term(solution.physical, dims)
    return H


def simulate_protocol_open(
    phi,
    phibar,
    alpha: complex,
    beta: complex,
    solution: ParamSolution,
    rates: DecoherenceRates,
    *,
    crosstalk: bool = True,
    hamiltonian: str = "effective",
    n: int | None = None,
    cfg: SolverConfig | None = None,
    horizon: float | None = None,
    tail_tol: float | None = None,
    times=None,
    store_states: bool = False,
) -> Trajectory:
    """Open-system protocol run with fidelity against the ideal swapped state.

    ``phi``/``phibar`` are :class:`~oscswap.states.OscState` recipes or
    single-mode kets.  ``n`` defaults to the per-state default truncation;
    ``horizon`` to 1.2 ``t_swap``.  The default solver is ``split`` with a
    2 ns step.
    """
    from .protocol import ideal_state, initial_state
    from .states import DEFAULT_TAIL_TOL, default_truncation

    tol = DEFAULT_TAIL_TOL if tail_tol is None else tail_tol
    if n is None:
        n = max(default_truncation(x) for x in (phi, phibar))
    u = phi if isinstance(phi, Ket) else phi.ket(n, tol)
    v = phibar if isinstance(phibar, Ket) else phibar.ket(n, tol)
    if u.dim != v.dim:
        raise DimensionError("oscillator truncations differ")
    dims = SystemDims(u.dim, v.dim)
    psi0 = initial_state(u, v, alpha, beta)
    target = ideal_state(u, v, alpha, beta)
    H = protocol_hamiltonian(solution, dims, hamiltonian, crosstalk)
    channels = build_channels(rates, dims)
    horizon = 1.2 * solution.t_swap if horizon is None else horizon
    cfg = cfg or SolverConfig(method="split", dt=2e-9)
    traj = integrate(psi0, H, channels, cfg, horizon, times=times, target=target, store_states=store_states)
    traj.diagnostics.update({"n": u.dim, "hamiltonian": hamiltonian, "crosstalk": crosstalk, "t_swap": solution.t_swap})
    return traj
