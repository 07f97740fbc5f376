import numpy as np
import pytest

from lindflow.core import ValidationError
from lindflow.model import (JumpOperator, JumpValidationError, SystemModel,
                            build_excitonic_nmer, build_polaritonic_trimer,
                            dissipator_superop, drain_operator, jump_matrix,
                            pump_operator, validate_jump)


class TestExcitonicNmer:
    def test_dimer_matrix_elements(self):
        m = build_excitonic_nmer(2, 1000.0, 181.5)
        assert m.labels == ["gg", "ge", "eg", "ee"]
        H = m.hamiltonian
        assert H[m.index("eg"), m.index("ge")] == pytest.approx(-181.5)
        assert H[m.index("ee"), m.index("ee")] == pytest.approx(2000.0)
        assert H[m.index("gg"), m.index("gg")] == 0.0

    def test_monomer_metadata(self):
        m = build_excitonic_nmer(2, 1000.0, 181.5)
        assert m.monomer_of["eg"] == {1}
        assert m.monomer_of["ee"] == {1, 2}
        assert m.ground_label == "gg"
        assert m.excitation_count("ge") == 1

    def test_single_monomer(self):
        m = build_excitonic_nmer(1, 800.0, 50.0)
        assert np.allclose(m.hamiltonian, np.diag([0.0, 800.0]))
        # one local bath, no inter-monomer coupling anywhere
        assert np.count_nonzero(m.hamiltonian - np.diag(np.diag(m.hamiltonian))) == 0

    def test_trimer_no_next_nearest_coupling(self):
        m = build_excitonic_nmer(3, 1000.0, 181.5)
        assert m.hamiltonian[m.index("egg"), m.index("gge")] == 0.0
        assert m.hamiltonian[m.index("egg"), m.index("geg")] == pytest.approx(-181.5)

    def test_hermitian_exactly(self):
        for n in (1, 2, 3):
            H = build_excitonic_nmer(n, 700.0, 120.0).hamiltonian
            assert np.array_equal(H, H.conj().T)

    def test_coupling_ops_are_projectors(self):
        m = build_excitonic_nmer(2, 1000.0, 181.5)
        s1 = m.coupling_ops["monomer1"]
        assert np.allclose(s1, [0, 0, 1, 1])  # eg, ee excited on monomer 1
        s2 = m.coupling_ops["monomer2"]
        assert np.allclose(s2, [0, 1, 0, 1])

    def test_rejects_nonpositive_n(self):
        with pytest.raises(ValidationError):
            build_excitonic_nmer(0, 1000.0, 181.5)


class TestPolaritonicTrimer:
    def test_couplings(self):
        m = build_polaritonic_trimer(0.0, 0.0, 181.5, 0.0, 120.0)
        H = m.hamiltonian
        assert H[m.index("1"), m.index("c")] == pytest.approx(120.0)
        assert H[m.index("1"), m.index("3")] == 0.0
        assert H[m.index("1"), m.index("2")] == pytest.approx(-181.5)

    def test_ground_state_decoupled(self):
        m = build_polaritonic_trimer(0.0, 0.0, 181.5, 0.0, 120.0)
        g = m.index("0")
        assert np.count_nonzero(m.hamiltonian[g, :]) == 0
        assert np.count_nonzero(m.hamiltonian[:, g]) == 0

    def test_cavity_has_no_bath(self):
        m = build_polaritonic_trimer(0.0, 0.0, 181.5, 0.0, 120.0)
        for diag in m.coupling_ops.values():
            assert diag[m.index("c")] == 0.0
            assert diag[m.index("0")] == 0.0

    def test_zero_rabi_matches_excitonic_chain_block(self):
        m = build_polaritonic_trimer(0.0, 0.0, 181.5, 0.0, 0.0)
        block = m.hamiltonian[1:4, 1:4]
        chain = np.array([[0.0, -181.5, 0.0],
                          [-181.5, 0.0, -181.5],
                          [0.0, -181.5, 0.0]])
        assert np.allclose(block, chain)
        assert np.count_nonzero(m.hamiltonian[4, :]) == 0


class TestJumpOperators:
    def test_dimer_pump_terms(self):
        m = build_excitonic_nmer(2, 1000.0, 181.5)
        op = pump_operator(m, 1, 300.0)
        pairs = {(m.labels[t.initial], m.labels[t.final]) for t in op.terms}
        assert pairs == {("gg", "eg"), ("ge", "ee")}
        assert op.timescale_fs == 300.0
        assert op.kind == "pump"

    def test_dimer_drain_terms(self):
        m = build_excitonic_nmer(2, 1000.0, 181.5)
        op = drain_operator(m, 2, 300.0)
        pairs = {(m.labels[t.initial], m.labels[t.final]) for t in op.terms}
        assert pairs == {("ge", "gg"), ("ee", "eg")}

    def test_polaritonic_losses_single_term(self):
        m = build_polaritonic_trimer(0.0, 0.0, 181.5, 0.0, 120.0)
        l3 = drain_operator(m, 3, 300.0)
        lc = drain_operator(m, "c", 600.0)
        assert len(l3.terms) == 1 and len(lc.terms) == 1
        assert m.labels[l3.terms[0].final] == "0"
        assert m.labels[lc.terms[0].initial] == "c"

    def test_pump_rejected_on_first_excitation_model(self):
        m = build_polaritonic_trimer(0.0, 0.0, 181.5, 0.0, 120.0)
        with pytest.raises(ValidationError, match="full-space"):
            pump_operator(m, 1, 300.0)

    def test_site_out_of_range(self):
        m = build_excitonic_nmer(2, 1000.0, 181.5)
        with pytest.raises(ValidationError, match="range"):
            pump_operator(m, 3, 300.0)

    def test_jump_matrix_single_term(self):
        op = JumpOperator(300.0, [(1.0, 0, 2)])
        L = jump_matrix(op, 3)
        expected = np.zeros((3, 3))
        expected[2, 0] = 300.0 ** -0.5
        assert np.allclose(L, expected)

    def test_jump_matrix_empty(self):
        op = JumpOperator(100.0, [])
        assert np.count_nonzero(op.matrix(4)) == 0

    def test_jump_matrix_dimer_pump_two_entries(self):
        m = build_excitonic_nmer(2, 1000.0, 181.5)
        L = pump_operator(m, 1, 300.0).matrix(4)
        assert np.count_nonzero(L) == 2
        assert L[m.index("eg"), m.index("gg")] == pytest.approx(300.0 ** -0.5)

    def test_shared_endpoint_rejected(self):
        with pytest.raises(JumpValidationError, match="shared final state"):
            JumpOperator(100.0, [(1.0, 0, 2), (1.0, 1, 2)])

    def test_swap_terms_allowed(self):
        op = JumpOperator(100.0, [(1.0, 0, 1), (1.0, 1, 0)])
        assert validate_jump(op)

    def test_self_transition_rejected(self):
        with pytest.raises(JumpValidationError, match="identical"):
            JumpOperator(100.0, [(1.0, 1, 1)])

    def test_nonpositive_timescale_rejected(self):
        with pytest.raises(JumpValidationError):
            JumpOperator(0.0, [(1.0, 0, 1)])

    def test_pump_drain_adjoint_related(self):
        m = build_excitonic_nmer(2, 1000.0, 181.5)
        P = pump_operator(m, 1, 250.0).matrix(4)
        D = drain_operator(m, 1, 250.0).matrix(4)
        assert np.allclose(D, P.conj().T)


def test_system_model_rejects_non_hermitian():
    with pytest.raises(ValidationError):
        SystemModel(np.array([[0.0, 1.0], [0.5, 0.0]]), ["a", "b"])


def test_dissipator_traceless_action():
    # Tr[D(rho)] = 0 for any rho: dissipators preserve trace
    m = build_excitonic_nmer(2, 1000.0, 181.5)
    ops = [pump_operator(m, 1, 300.0), drain_operator(m, 2, 200.0)]
    D = dissipator_superop(ops, 4)
    from lindflow.core import vectorize
    tr = vectorize(np.eye(4))
    assert np.max(np.abs(D.T @ tr)) < 1e-14
