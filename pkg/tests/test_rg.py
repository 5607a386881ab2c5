"""Coarse-graining operators, the coupling recursion, and exactness checks."""

import math
from itertools import product

import numpy as np
import pytest

from rgdl.errors import DomainError, ValidationError
from rgdl.rg import (
    RGOperator,
    block_spin_operator_2d,
    decimation_operator_1d,
    decimation_step_coupling,
    exactness_residual,
    free_energy_difference,
    renormalized_hamiltonian,
    rg_flow,
    rg_flow_closed_form,
)
from rgdl.spins import (
    Boundary,
    Hamiltonian,
    Lattice,
    LatticeKind,
    config_index,
    hamiltonian_from_energies,
)


def periodic_chain(n, coupling):
    lat = Lattice(LatticeKind.CHAIN_1D, (n,), Boundary.PERIODIC)
    return Hamiltonian.nearest_neighbor(lat, coupling)


def marginalize_odd_sites(n, coupling):
    """Oracle: clamp even sites, explicitly sum exp(-H) over the odd sites.

    Returns log weights over the 2^(n/2) configurations of the retained
    (even-indexed) spins, in enumeration order.
    """
    h = periodic_chain(n, coupling)
    m = n // 2
    log_w = np.empty(1 << m)
    for hidden_idx in range(1 << m):
        total = 0.0
        for odd in product([-1, 1], repeat=m):
            v = np.empty(n, dtype=np.int8)
            for j in range(m):
                v[2 * j] = 2 * ((hidden_idx >> j) & 1) - 1
                v[2 * j + 1] = odd[j]
            total += math.exp(-h.energy(v))
        log_w[hidden_idx] = math.log(total)
    return log_w


def coupling_from_marginalized_chain(n, coupling):
    """Extract the retained-spin pair coupling from the oracle's log weights."""
    log_w = marginalize_odd_sites(n, coupling)
    fit = hamiltonian_from_energies(-log_w, n // 2)
    got = {sites: k for sites, k in fit.terms}
    m = n // 2
    nn = [tuple(sorted((j, (j + 1) % m))) for j in range(m)]
    # every interaction generated by decimation beyond nearest-neighbor pairs
    # (and the constant) must vanish
    for sites, k in got.items():
        if sites and sites not in nn:
            assert abs(k) < 1e-10, f"unexpected term {sites}: {k}"
    vals = [got[s] for s in set(nn)]
    assert np.ptp(vals) < 1e-10
    return float(np.mean(vals))


class TestDecimationCoupling:
    def test_fixed_point_at_zero(self):
        assert decimation_step_coupling(0.0) == 0.0

    @pytest.mark.parametrize(
        "coupling,expected",
        [(1.0, 0.6625013736789321), (0.5, 0.21689041524151356)],
    )
    def test_known_values(self, coupling, expected):
        np.testing.assert_allclose(decimation_step_coupling(coupling), expected, rtol=1e-12)

    @pytest.mark.parametrize("coupling", [1.0, 0.5])
    def test_matches_exact_marginalization(self, coupling):
        # 8-site periodic chain: decimation closes on a 4-site chain whose
        # coupling is given by the recursion
        oracle = coupling_from_marginalized_chain(8, coupling)
        np.testing.assert_allclose(decimation_step_coupling(coupling), oracle, atol=1e-10)

    def test_rejects_negative(self):
        with pytest.raises(DomainError):
            decimation_step_coupling(-0.1)

    def test_contracts(self):
        for coupling in (0.1, 0.7, 2.0, 3.0):
            assert 0 < decimation_step_coupling(coupling) < coupling


class TestFlow:
    def test_zero_stays_zero(self):
        np.testing.assert_array_equal(rg_flow(0.0, 5), np.zeros(6))

    def test_strictly_decreasing_to_zero(self):
        flow = rg_flow(1.0, 4)
        assert len(flow) == 5
        assert np.all(np.diff(flow) < 0)
        assert flow[-1] < 0.02

    @pytest.mark.parametrize("j0", [0.25, 0.5, 1.0, 2.0, 3.0])
    def test_closed_form(self, j0):
        np.testing.assert_allclose(rg_flow(j0, 6), rg_flow_closed_form(j0, 6), atol=1e-12)

    def test_negative_steps(self):
        with pytest.raises(ValidationError):
            rg_flow(1.0, -1)


class TestDecimationOperator:
    def test_two_sites_indicator(self):
        # hidden spin copies site 0 (the even site); weight 1 there, 0 elsewhere
        op = decimation_operator_1d(2)
        w = np.exp(op.log_weight)
        for v_idx in range(4):
            keep = v_idx & 1
            np.testing.assert_array_equal(w[v_idx], np.eye(2)[keep])

    def test_odd_count_rejected(self):
        with pytest.raises(ValidationError):
            decimation_operator_1d(5)

    def test_exactness(self):
        assert exactness_residual(decimation_operator_1d(8)) <= 1e-14

    def test_renormalized_coupling_n4(self):
        # periodic 4-chain: the two retained spins connect through both rings,
        # so the hidden system is a 2-site chain with two parallel bonds of J'
        op = decimation_operator_1d(4)
        ren = renormalized_hamiltonian(op, periodic_chain(4, 0.7))
        fit, residual = ren.fit_couplings([(0, 1), (1, 0)])
        assert residual < 1e-10
        per_bond = [k for sites, k in fit.terms if sites == (0, 1)]
        np.testing.assert_allclose(per_bond, [0.38294282286401327] * 2, atol=1e-10)

    @pytest.mark.parametrize("n", [4, 6, 8])
    def test_hidden_table_matches_oracle(self, n):
        op = decimation_operator_1d(n)
        ren = renormalized_hamiltonian(op, periodic_chain(n, 0.9))
        np.testing.assert_allclose(ren.log_weight, marginalize_odd_sites(n, 0.9), atol=1e-10)


class TestBlockSpinOperator:
    def _apply(self, op, v):
        row = np.exp(op.log_weight[config_index(np.asarray(v, dtype=np.int8))])
        (h_idx,) = np.nonzero(row)
        return int(h_idx[0])

    def test_majority(self):
        lat = Lattice(LatticeKind.SQUARE_2D, (2, 2), Boundary.PERIODIC)
        op = block_spin_operator_2d(lat)
        assert op.n_hidden == 1
        assert self._apply(op, [1, 1, 1, -1]) == 1
        assert self._apply(op, [-1, -1, 1, -1]) == 0

    def test_tie_copies_top_left(self):
        lat = Lattice(LatticeKind.SQUARE_2D, (2, 2), Boundary.PERIODIC)
        op = block_spin_operator_2d(lat)
        assert self._apply(op, [1, 1, -1, -1]) == 1
        assert self._apply(op, [-1, 1, 1, -1]) == 0

    def test_all_up_4x4(self):
        lat = Lattice(LatticeKind.SQUARE_2D, (4, 4), Boundary.PERIODIC)
        op = block_spin_operator_2d(lat)
        assert self._apply(op, np.ones(16, dtype=np.int8)) == 0b1111

    def test_odd_extent_rejected(self):
        with pytest.raises(ValidationError):
            block_spin_operator_2d(Lattice(LatticeKind.SQUARE_2D, (3, 4), Boundary.PERIODIC))

    def test_requires_square_lattice(self):
        with pytest.raises(DomainError):
            block_spin_operator_2d(Lattice(LatticeKind.CHAIN_1D, (4,), Boundary.PERIODIC))

    def test_exactness(self):
        lat = Lattice(LatticeKind.SQUARE_2D, (2, 4), Boundary.PERIODIC)
        assert exactness_residual(block_spin_operator_2d(lat)) <= 1e-14


class TestRenormalizedHamiltonian:
    def test_zero_hamiltonian_gives_uniform(self):
        op = decimation_operator_1d(6)
        ren = renormalized_hamiltonian(op, Hamiltonian(6, ()))
        np.testing.assert_allclose(ren.probabilities(), np.full(8, 1 / 8), atol=1e-14)

    def test_annihilated_row_reported_as_is(self):
        # an operator that never emits hidden state 1: column stays -inf
        lw = np.array([[0.0, -np.inf], [0.0, -np.inf]])
        op = RGOperator(lw, 1, 1)
        ren = renormalized_hamiltonian(op, Hamiltonian(1, ()))
        assert ren.log_weight[1] == -np.inf
        np.testing.assert_allclose(np.exp(ren.log_weight[0]), 2.0, rtol=1e-14)

    def test_fit_reports_missing_basis(self):
        # three-spin interaction cannot be absorbed by fields + constant
        op = decimation_operator_1d(6)
        h = Hamiltonian(6, (((0, 2, 4), 1.2),))
        ren = renormalized_hamiltonian(op, h)
        _, residual = ren.fit_couplings([(0,), (1,), (2,)])
        assert residual > 0.1
        _, residual_full = ren.fit_couplings([(0, 1, 2)])
        assert residual_full < 1e-12


class TestExactnessAndFreeEnergy:
    def test_decimation_delta_f_zero(self):
        op = decimation_operator_1d(8)
        for coupling in (0.3, 0.7, 1.5):
            df = free_energy_difference(op, periodic_chain(8, coupling))
            assert abs(df) <= 1e-10

    def test_block_spin_delta_f_zero(self):
        lat = Lattice(LatticeKind.SQUARE_2D, (2, 4), Boundary.PERIODIC)
        op = block_spin_operator_2d(lat)
        h = Hamiltonian.nearest_neighbor(lat, 0.408)
        assert abs(free_energy_difference(op, h)) <= 1e-10

    def test_scaled_operator_shifts_free_energy(self):
        op = decimation_operator_1d(6).scaled(2.0)
        h = periodic_chain(6, 0.5)
        np.testing.assert_allclose(free_energy_difference(op, h), -math.log(2), atol=1e-12)
        np.testing.assert_allclose(exactness_residual(op), 1.0, atol=1e-12)

    def test_perturbed_operator_not_exact(self):
        base = decimation_operator_1d(4)
        lw = base.log_weight.copy()
        lw[3, 2] = 0.1  # extra weight on one (v, h) pair
        op = RGOperator(lw, 4, 2)
        assert exactness_residual(op) > 1e-3
        assert abs(free_energy_difference(op, periodic_chain(4, 0.5))) > 1e-6
