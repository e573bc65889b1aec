"""Named validation suites behind ``oscswap validate``.

Each check returns ``(passed, detail)``; suites are lists of checks.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import exp, pi, sinh, sqrt

import numpy as np

from . import hamiltonians as ham
from . import hilbert as hb
from . import lindblad as lb
from . import protocol as pr
from . import states as st

TWO_PI = 2 * pi


@dataclass(frozen=True)
class Check:
    name: str
    passed: bool
    detail: str


@dataclass(frozen=True)
class ValidationReport:
    suite: str
    checks: tuple[Check, ...]

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def format(self) -> str:
        lines = [f"{'PASS' if c.passed else 'FAIL'}  {c.name}: {c.detail}" for c in self.checks]
        n_ok = sum(c.passed for c in self.checks)
        lines.append(f"{self.suite}: {n_ok}/{len(self.checks)} checks passed")
        return "\n".join(lines)


def _within(name, value, ref, tol, unit=""):
    err = abs(value - ref)
    return Check(name, bool(err <= tol), f"{value:.10g}{unit} vs {ref:.10g}{unit} (|diff| {err:.2e} <= {tol:.0e})")


def _below(name, value, tol):
    return Check(name, bool(value <= tol), f"{value:.3e} <= {tol:.0e}")


def reference_solution(crosstalk: bool = False) -> ham.ParamSolution:
    return ham.solve_params(
        TWO_PI * 60e6,
        TWO_PI * 1.5e9,
        TWO_PI * 1.25e9,
        TWO_PI * 0.25e9,
        1,
        omega_a=TWO_PI * 7.5e9,
        omega_b=TWO_PI * 4.5e9,
        crosstalk_ratio=0.1 if crosstalk else 0.0,
    )


# --------------------------------------------------------------------------- #


def algebra_checks():
    out = []
    n = 10
    a = hb.annihilation(n).toarray()
    comm = a @ a.conj().T - a.conj().T @ a - np.eye(n)
    comm[n - 1, n - 1] = 0.0
    out.append(_below("[a, a^dag] = 1 below the top level", float(np.abs(comm).max()), 1e-12))

    dims = hb.SystemDims(4, 3)
    A = hb.lift(hb.annihilation(4), "a", dims)
    B = hb.lift(hb.annihilation(3), "b", dims)
    c = (A @ B - B @ A).toarray()
    out.append(_below("lifted a and b commute", float(np.abs(c).max()), 1e-12))
    out.append(Check("lift nnz = nnz(op) x other dims", A.nnz == 3 * 3 * 4, f"{A.nnz} vs {3 * 3 * 4}"))

    rng = np.random.default_rng(7)
    dims = hb.SystemDims(4, 4)
    m = rng.normal(size=(dims.dim, dims.dim)) + 1j * rng.normal(size=(dims.dim, dims.dim))
    H = hb.Operator.from_matrix(m + m.conj().T, dims, hermitian=True)
    v = rng.normal(size=dims.dim) + 1j * rng.normal(size=dims.dim)
    psi = hb.Ket.from_array(v / np.linalg.norm(v), dims)
    x, y = hb.expm_apply(H, psi, 0.37), hb.expm_apply_dense(H, psi, 0.37)
    out.append(_below("expm_apply matches eigendecomposition", float(np.abs(x.data - y.data).max()), 1e-8))
    out.append(_below("expm_apply preserves the norm", abs(x.norm() - 1.0), 1e-9))

    d2 = hb.SystemDims(2, 2)
    lam = 1.0
    bs = lam * (
        hb.lift(hb.creation(2), "a", d2) @ hb.lift(hb.annihilation(2), "b", d2)
        + hb.lift(hb.annihilation(2), "a", d2) @ hb.lift(hb.creation(2), "b", d2)
    )
    ket10 = hb.Ket.from_array(np.eye(d2.dim)[d2.basis_index(a=1)], d2)
    out_bs = hb.expm_apply(bs.with_hermitian(), ket10, pi / 4)
    want = (np.eye(d2.dim)[d2.basis_index(a=1)] - 1j * np.eye(d2.dim)[d2.basis_index(b=1)]) / sqrt(2)
    out.append(_below("50/50 beam splitter on |1,0>", float(np.abs(out_bs.data - want).max()), 1e-9))

    rho = hb.DensityMatrix.from_array(psi.dm().data, dims)
    red = hb.partial_trace(rho, ["a", "q"])
    out.append(_below("partial trace keeps the trace", abs(red.trace() - rho.trace()), 1e-12))
    full = hb.partial_trace(rho, ["a", "b", "q"])
    out.append(_below("partial trace over nothing is identity", float(np.abs(full.data - rho.data).max()), 1e-15))
    return out


def states_checks():
    out = []
    c = st.coherent(1.0, 15)
    nbar = float(np.sum(np.arange(15) * np.abs(c.data) ** 2))
    out.append(_within("coherent(1) mean photon number", nbar, 1.0, 1e-4))
    ov = abs(hb.inner(st.coherent(1.0, 20), st.coherent(-1.0, 20)))
    out.append(_within("<1|-1> overlap", ov, exp(-2), 1e-9))
    n_sq = st.OscState("squeezed", 1.0).required_truncation()
    s = st.squeezed_vacuum(1.0, n_sq)
    nbar = float(np.sum(np.arange(n_sq) * np.abs(s.data) ** 2))
    out.append(_within(f"squeezed r=1 mean photon number (n={n_sq})", nbar, sinh(1.0) ** 2, 1e-3))
    out.append(_below("squeezed odd amplitudes vanish", float(np.abs(s.data[1::2]).max()), 0.0))
    cp, cm = st.cat(1.0, 1, 15), st.cat(1.0, -1, 15)
    out.append(_below("opposite cats are orthogonal", abs(hb.inner(cp, cm)), 1e-12))
    sm = cp.data * sqrt(1 + exp(-2)) + cm.data * sqrt(1 - exp(-2))
    col = abs(np.vdot(sm, c.data)) / (np.linalg.norm(sm) * np.linalg.norm(c.data))
    out.append(_within("cat(+) + cat(-) is collinear with coherent", col, 1.0, 1e-10))
    return out


def params_checks():
    out = []
    sol = reference_solution()
    p = sol.physical
    out.append(_within("g_b / 2pi", p.g_b / TWO_PI / 1e6, 25.0, 1.0, " MHz"))
    out.append(_within("Omega / 2pi", p.Omega / TWO_PI / 1e6, 114.0, 1.0, " MHz"))
    out.append(_within("t_swap", sol.t_swap * 1e6, 0.50, 0.01, " us"))
    out.append(_below("shift matching relative mismatch", ham.stark_shift_mismatch(p), 1e-9))
    out.append(_below("swap phase residual", abs(sol.ideal.phase_residual()), 1e-9))
    out.append(_within("lambda / 2pi", p.lam / TWO_PI / 1e6, 0.5, 1e-9, " MHz"))
    out.append(_within("omega / 2pi", sol.ideal.omega / TWO_PI / 1e6, -2.5, 1e-9, " MHz"))
    rep = ham.check_detuning_conditions(p)
    out.append(_within("Delta_a / g_a", rep["Delta_a >> g_a"].ratio, 25.0, 1e-9))
    out.append(_within("delta_b / g_b", rep["delta_b >> g_b"].ratio, 10.0, 1e-9))
    dims = hb.SystemDims(5, 5)
    diff = np.abs((ham.build_effective(p, dims) - ham.build_ideal(sol.ideal, dims)).data).max()
    scale = np.abs(ham.build_ideal(sol.ideal, dims).data).max()
    out.append(_below("effective = ideal Hamiltonian (relative)", float(diff / scale), 1e-12))
    return out


def swap_checks():
    out = []
    sol = reference_solution()
    n = 15
    dims = hb.SystemDims(n, n)
    ideal = sol.ideal
    for label, (x, y) in {
        "coherent": (st.OscState("coherent", 1), st.OscState("coherent", -1)),
        "cat": (st.OscState("cat", 1, 1), st.OscState("cat", 1, -1)),
    }.items():
        u, v = x.ket(n), y.ket(n)
        a_out, b_out = pr.corrected_swap_oracle(u, v, ideal.omega, ideal.t_swap)
        want = st.product_state(a_out, b_out, st.CouplerState.level(hb.G))
        got = hb.expm_apply(ham.build_ideal(ideal, dims), st.product_state(u, v, st.CouplerState.level(hb.G)), ideal.t_swap)
        out.append(_within(f"corrected swap vs propagator ({label})", abs(hb.inner(want, got)) ** 2, 1.0, 1e-6))
    res = pr.run_protocol(
        st.OscState("coherent", 1), st.OscState("coherent", -1), 1 / sqrt(2), 1 / sqrt(2), ideal, dims
    )
    out.append(_within("p(g) for coherent +-1", res.branches["g"].probability, (1 + exp(-4)) / 2, 1e-8))
    out.append(_within("branch probabilities sum", res.total_probability, 1.0, 1e-9))
    fock = pr.swap_gate_check(st.OscState("fock", 0), st.OscState("fock", 1), ideal, hb.SystemDims(4, 4))
    out.append(_below("SWAP gate, Fock encoding", fock.worst_infidelity, 1e-8))
    catg = pr.swap_gate_check(st.OscState("cat", 1, 1), st.OscState("cat", 1, -1), ideal, dims)
    out.append(_below("SWAP gate, cat encoding", catg.worst_infidelity, 1e-6))
    return out


def lindblad_checks():
    out = []
    dims = hb.SystemDims(2, 2)
    kappa = 1e5
    psi = st.product_state(st.fock(0, 2), st.fock(0, 2), st.CouplerState.level(hb.GP))
    ch = lb.build_channels(lb.DecoherenceRates(gamma_gpg=kappa), dims)
    times = np.array([0.0, 0.5, 1.0, 2.0]) / kappa
    tr = lb.integrate(psi, None, ch, lb.SolverConfig(method="rk4", dt=1e-8), times=times)
    err = float(np.abs(tr.populations[:, hb.GP] - np.exp(-kappa * times)).max())
    out.append(_below("amplitude decay e^{-kt}", err, 1e-6))
    psi = st.product_state(st.fock(0, 2), st.fock(0, 2), st.CouplerState.superposition(1 / sqrt(2), 1 / sqrt(2)))
    ch = lb.build_channels(lb.DecoherenceRates(gamma_phi_gp=kappa), dims)
    tr = lb.integrate(psi, None, ch, lb.SolverConfig(method="rk4", dt=1e-8), times=times, store_states=True)
    i, j = dims.basis_index(q=hb.G), dims.basis_index(q=hb.GP)
    coh = np.array([abs(s.data[i, j]) for s in tr.states])
    out.append(_below("projector dephasing e^{-gt/2}", float(np.abs(coh - 0.5 * np.exp(-kappa * times / 2)).max()), 1e-6))

    sol = reference_solution()
    d = hb.SystemDims(4, 4)
    H = ham.build_effective(sol.physical, d)
    psi = pr.initial_state(st.coherent(0.5, 4, 1e-2), st.coherent(-0.5, 4, 1e-2), 1 / sqrt(2), 1 / sqrt(2))
    cfg = lb.SolverConfig(method="rk4", dt=sol.t_swap / 4000)
    tr = lb.integrate(psi, H, [], cfg, times=np.array([0.0, sol.t_swap]))
    want = hb.expm_apply(H, psi, sol.t_swap).dm().data
    out.append(_below("closed rk4 matches expm_apply", float(np.abs(tr.final_state.data - want).max()), 1e-8))
    return out


SUITES = {
    "algebra": algebra_checks,
    "states": states_checks,
    "params": params_checks,
    "swap": swap_checks,
    "lindblad": lindblad_checks,
}


def run_suite(name: str) -> ValidationReport:
    if name == "all":
        checks = []
        for k, fn in SUITES.items():
            checks += [Check(f"{k}: {c.name}", c.passed, c.detail) for c in fn()]
        return ValidationReport("all", tuple(checks))
    if name not in SUITES:
        raise KeyError(f"unknown suite {name!r}; choose from {', '.join(SUITES)}, all")
    return ValidationReport(name, tuple(SUITES[name]()))
