import numpy as np
import pytest
import scipy.linalg as sla
from hypothesis import given
from hypothesis import strategies as st_

from oscswap import hilbert as hb
from oscswap.hilbert import E, F, G, GP, SystemDims


def random_ket(dims, rng):
    v = rng.normal(size=dims.dim) + 1j * rng.normal(size=dims.dim)
    return hb.Ket.from_array(v / np.linalg.norm(v), dims)


def random_hermitian(dims, rng, scale=1.0):
    m = rng.normal(size=(dims.dim, dims.dim)) + 1j * rng.normal(size=(dims.dim, dims.dim))
    return hb.Operator.from_matrix(scale * (m + m.conj().T), dims, hermitian=True)


class TestSystemDims:
    def test_total_dimension(self):
        assert SystemDims(3, 5).dim == 3 * 5 * 4
        assert SystemDims(3, 5, 2).dim == 3 * 5 * 2 * 4

    @pytest.mark.parametrize("kw", [dict(n_a=1, n_b=3), dict(n_a=3, n_b=1), dict(n_a=3, n_b=3, n_c=3), dict(n_a=2, n_b=2, n_q=3)])
    def test_invalid(self, kw):
        with pytest.raises(hb.DimensionError):
            SystemDims(**kw)

    def test_layout_coupler_fastest(self):
        d = SystemDims(3, 3)
        assert d.basis_index() == 0
        assert d.basis_index(q=GP) == 1
        assert d.basis_index(b=1) == 4
        assert d.basis_index(a=1) == 12

    def test_layout_with_c(self):
        d = SystemDims(2, 2, 2)
        assert d.labels == ("a", "b", "c", "q")
        assert d.basis_index(c=1) == 4


class TestAnnihilation:
    def test_n2(self):
        np.testing.assert_array_equal(hb.annihilation(2).toarray(), [[0, 1], [0, 0]])

    def test_number_identity(self):
        a = hb.annihilation(4).toarray()
        np.testing.assert_allclose(np.diag(a.conj().T @ a), [0, 1, 2, 3], atol=1e-15)

    def test_commutator_edge_only(self):
        a = hb.annihilation(10).toarray()
        c = a @ a.conj().T - a.conj().T @ a - np.eye(10)
        nz = np.argwhere(np.abs(c) > 1e-12)
        assert nz.tolist() == [[9, 9]]

    def test_too_small(self):
        with pytest.raises(hb.DimensionError):
            hb.annihilation(1)

    @given(st_.integers(2, 40))
    def test_commutator_property(self, n):
        a = hb.annihilation(n).toarray()
        c = a @ a.conj().T - a.conj().T @ a - np.eye(n)
        assert np.abs(c[: n - 1, : n - 1]).max() <= 1e-12
        assert np.abs(c[: n - 1, n - 1]).max() <= 1e-12


class TestLift:
    def test_commute(self):
        d = SystemDims(4, 3)
        A = hb.lift(hb.annihilation(4), "a", d)
        B = hb.lift(hb.annihilation(3), "b", d)
        assert np.abs((A @ B - B @ A).toarray()).max() <= 1e-12

    def test_identity(self):
        d = SystemDims(3, 2)
        I = hb.lift(hb.identity(3), "a", d)
        np.testing.assert_array_equal(I.toarray(), np.eye(d.dim))

    def test_matrix_element(self, frozen):
        d = SystemDims(2, 2)
        op = hb.lift(hb.creation(2), "a", d) @ hb.lift(hb.annihilation(2), "b", d)
        val = op.toarray()[d.basis_index(a=1, b=0, q=G), d.basis_index(a=0, b=1, q=G)]
        assert val == pytest.approx(frozen["lift_element"], abs=1e-15)

    def test_mismatch(self):
        with pytest.raises(hb.DimensionError):
            hb.lift(hb.annihilation(3), "a", SystemDims(4, 4))

    def test_missing_subsystem(self):
        with pytest.raises(hb.DimensionError):
            hb.lift(hb.annihilation(2), "c", SystemDims(4, 4))

    @given(st_.integers(2, 6), st_.integers(2, 6), st_.sampled_from(["a", "b", "q"]))
    def test_nnz_property(self, na, nb, which):
        d = SystemDims(na, nb)
        op = hb.transition(F, G) if which == "q" else hb.annihilation(d.size(which))
        lifted = hb.lift(op, which, d)
        assert lifted.nnz == op.nnz * d.dim // d.size(which)

    def test_ordering_matches_kron(self):
        d = SystemDims(3, 2)
        a = hb.annihilation(3).toarray()
        ref = np.kron(np.kron(a, np.eye(2)), np.eye(4))
        np.testing.assert_array_equal(hb.lift(hb.annihilation(3), "a", d).toarray(), ref)


class TestExpmApply:
    def test_zero_hamiltonian(self, rng):
        d = SystemDims(2, 2)
        psi = random_ket(d, rng)
        out = hb.expm_apply(hb.Operator.from_matrix(np.zeros((d.dim, d.dim)), d, True), psi, 3.0)
        np.testing.assert_array_equal(out.data, psi.data)

    def test_number_eigenstate(self):
        n, t = 6, 0.7
        out = hb.expm_apply(hb.number(n), hb.basis(n, 3), t)
        assert out.data[3] == pytest.approx(np.exp(-3j * t), abs=1e-12)

    def test_beam_splitter(self, frozen):
        d = SystemDims(2, 2)
        H = hb.lift(hb.creation(2), "a", d) @ hb.lift(hb.annihilation(2), "b", d)
        H = (H + H.dag()).with_hermitian()
        psi = hb.Ket.from_array(np.eye(d.dim)[d.basis_index(a=1)], d)
        out = hb.expm_apply(H, psi, np.pi / 4)
        ref = np.array(frozen["beam_splitter_10"]["re"]) + 1j * np.array(frozen["beam_splitter_10"]["im"])
        got = np.array([out.data[d.basis_index(a=i, b=j)] for i in range(2) for j in range(2)])
        np.testing.assert_allclose(got, ref, atol=1e-9)

    def test_non_hermitian_rejected(self):
        a = hb.annihilation(3)
        with pytest.raises(hb.NotHermitianError):
            hb.expm_apply(a, hb.basis(3, 1), 1.0)

    def test_flag_checked_on_construction(self):
        with pytest.raises(hb.NotHermitianError):
            hb.annihilation(3).with_hermitian()

    def test_infinite_time(self):
        with pytest.raises(ValueError):
            hb.expm_apply(hb.number(3), hb.basis(3, 1), np.inf)

    @given(st_.integers(0, 2**32 - 1), st_.floats(-3, 3))
    def test_norm_and_dense_oracle(self, seed, t):
        rng = np.random.default_rng(seed)
        d = SystemDims(2, 2)  # 16 <= 64
        H = random_hermitian(d, rng)
        psi = random_ket(d, rng)
        out = hb.expm_apply(H, psi, t)
        assert abs(out.norm() - 1) <= 1e-9
        ref = sla.expm(-1j * t * H.toarray()) @ psi.data
        assert np.abs(out.data - ref).max() <= 1e-8
        assert np.abs(hb.expm_apply_dense(H, psi, t).data - ref).max() <= 1e-8


class TestPartialTrace:
    def test_product_factors(self, rng):
        u = rng.normal(size=3) + 1j * rng.normal(size=3)
        v = rng.normal(size=2) + 1j * rng.normal(size=2)
        w = np.array([1, 1j, 0, 0]) / np.sqrt(2)
        u, v = u / np.linalg.norm(u), v / np.linalg.norm(v)
        psi = hb.Ket.from_array(np.kron(np.kron(u, v), w), SystemDims(3, 2))
        np.testing.assert_allclose(hb.partial_trace(psi, ["a"]).data, np.outer(u, u.conj()), atol=1e-14)
        np.testing.assert_allclose(hb.partial_trace(psi, ["b"]).data, np.outer(v, v.conj()), atol=1e-14)
        np.testing.assert_allclose(hb.partial_trace(psi, ["q"]).data, np.outer(w, w.conj()), atol=1e-14)

    def test_bell(self):
        d = SystemDims(2, 2)
        v = np.zeros(d.dim)
        v[d.basis_index()] = v[d.basis_index(a=1, b=1)] = 1 / np.sqrt(2)
        red = hb.partial_trace(hb.Ket.from_array(v, d), ["a"])
        np.testing.assert_allclose(red.data, np.eye(2) / 2, atol=1e-15)

    def test_protocol_state_coupler(self, frozen):
        from oscswap.protocol import ideal_state
        from oscswap.states import coherent

        n = 15
        psi = ideal_state(coherent(1, n), coherent(-1, n), 2**-0.5, 2**-0.5)
        red = hb.partial_trace(psi, ["q"]).data
        np.testing.assert_allclose(red[:2, :2].real, frozen["coupler_reduced_gg_block"], atol=1e-12)
        np.testing.assert_allclose(np.diag(red).real, [0.5, 0.5, 0, 0], atol=1e-12)
        assert psi.labels == ("a", "b", "q")

    def test_empty_keep(self, rng):
        with pytest.raises(hb.DimensionError):
            hb.partial_trace(random_ket(SystemDims(2, 2), rng), [])

    def test_keep_all(self, rng):
        psi = random_ket(SystemDims(2, 3), rng)
        np.testing.assert_array_equal(hb.partial_trace(psi, ["a", "b", "q"]).data, psi.dm().data)

    @given(st_.integers(0, 2**32 - 1), st_.lists(st_.sampled_from(["a", "b", "c", "q"]), min_size=1, max_size=4, unique=True))
    def test_trace_property(self, seed, keep):
        rng = np.random.default_rng(seed)
        d = SystemDims(3, 2, 2)
        k = rng.integers(1, 4)
        vs = rng.normal(size=(k, d.dim)) + 1j * rng.normal(size=(k, d.dim))
        rho = sum(np.outer(v, v.conj()) for v in vs)
        rho = hb.DensityMatrix.from_array(rho / np.trace(rho), d)
        red = hb.partial_trace(rho, keep)
        assert abs(red.trace() - rho.trace()) <= 1e-12
        assert red.labels == tuple(l for l in d.labels if l in keep)


class TestInner:
    def test_self_and_orthogonal(self, rng):
        psi = random_ket(SystemDims(2, 2), rng)
        assert hb.inner(psi, psi) == pytest.approx(1.0, abs=1e-12)
        assert hb.inner(hb.basis(3, 0), hb.basis(3, 1)) == 0

    def test_coherent_overlap(self, frozen):
        from oscswap.states import coherent

        assert hb.inner(coherent(1, 20), coherent(-1, 20)).real == pytest.approx(frozen["overlap_coherent_pm1_n20"], abs=1e-12)
        assert frozen["overlap_coherent_pm1_n20"] == pytest.approx(frozen["exp_minus_2"], abs=1e-9)

    def test_mismatch(self):
        with pytest.raises(hb.DimensionError):
            hb.inner(hb.basis(3, 0), hb.basis(4, 0))


class TestDensityMatrix:
    def test_diagnostics(self, rng):
        psi = random_ket(SystemDims(2, 2), rng)
        rho = psi.dm()
        assert rho.hermiticity_error() <= 1e-15
        assert rho.min_eigenvalue() >= -1e-12
        assert abs(rho.trace() - 1) <= 1e-12

    def test_shape_mismatch(self):
        with pytest.raises(hb.DimensionError):
            hb.DensityMatrix.from_array(np.eye(3), SystemDims(2, 2))

    def test_levels_are_distinct(self):
        assert sorted({G, GP, E, F}) == [0, 1, 2, 3]
