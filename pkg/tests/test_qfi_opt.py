"""Optimizer tests: Heisenberg-picture adjoint (trace duality against the
forward maps), fixed-point/optimality certificates, restart robustness, and
dominance over the standard reference states."""

import math

import numpy as np
import pytest

from phaselim import oracles
from phaselim.qcore import (AngularBlockMatrix, CollectiveDephasing,
                            LocalDephasing, Loss, NoiseFree,
                            SymmetricPureState, apply_dephasing, apply_loss,
                            channel_blocks, noon_state,
                            product_plus_state, state_qfi)
from phaselim.qfi_opt import (IterationConfig, channel_adjoint_apply, cr_bound,
                              maximize_qfi_over_states, qfi_iterate)


class TestChannelAdjoint:
    def test_noise_free_is_identity(self):
        rng = np.random.default_rng(0)
        a = rng.standard_normal((5, 5))
        a = a + a.T
        operand = AngularBlockMatrix(4, {4: a})
        out = channel_adjoint_apply(NoiseFree(), 4, operand)
        assert np.allclose(out, a, atol=1e-14)

    def test_dephasing_is_unital(self):
        n = 5
        operand = AngularBlockMatrix(n, {
            blk.key[1]: np.eye(len(blk.indices))
            for blk in channel_blocks(LocalDephasing(0.6), n)})
        out = channel_adjoint_apply(LocalDephasing(0.6), n, operand)
        assert np.allclose(out, np.eye(n + 1), atol=1e-12)

    def test_single_qubit_damps_transverse_observable(self):
        sx = np.array([[0.0, 1.0], [1.0, 0.0]])
        operand = AngularBlockMatrix(1, {1: sx})
        out = channel_adjoint_apply(LocalDephasing(0.7), 1, operand)
        assert np.allclose(out, 0.7 * sx, atol=1e-14)

    @pytest.mark.parametrize("eta", [0.3, 0.8])
    def test_trace_duality_with_dephasing(self, eta):
        n = 4
        state = oracles.random_state(n, seed=7)
        rho = apply_dephasing(state, eta)
        rng = np.random.default_rng(1)
        operand_blocks = {}
        for tj in rho.blocks:
            a = rng.standard_normal((tj + 1, tj + 1)) \
                + 1j * rng.standard_normal((tj + 1, tj + 1))
            operand_blocks[tj] = a + a.conj().T
        operand = AngularBlockMatrix(n, operand_blocks)
        lhs = sum(np.trace(rho.blocks[tj] @ operand_blocks[tj])
                  for tj in rho.blocks)
        adj = channel_adjoint_apply(LocalDephasing(eta), n, operand)
        rhs = state.amplitudes.conj() @ adj @ state.amplitudes
        assert lhs == pytest.approx(rhs, rel=1e-11)

    def test_trace_duality_with_loss(self):
        n, eta = 3, 0.6
        state = oracles.random_state(n, seed=2)
        mix = apply_loss(state, eta)
        rng = np.random.default_rng(5)
        operand = {}
        for blk in channel_blocks(Loss(eta), n):
            d = len(blk.indices)
            a = rng.standard_normal((d, d))
            operand[blk.key[1:]] = a + a.T
        lhs = 0.0
        for comp in mix.components:
            block = comp.weight * np.outer(comp.amplitudes,
                                           comp.amplitudes.conj())
            lhs += np.trace(block @ operand[(comp.l0, comp.l1)]).real
        adj = channel_adjoint_apply(Loss(eta), n, operand)
        rhs = (state.amplitudes.conj() @ adj @ state.amplitudes).real
        assert lhs == pytest.approx(rhs, rel=1e-11)

    def test_collective_is_self_adjoint_damping(self):
        n = 3
        rng = np.random.default_rng(3)
        a = rng.standard_normal((n + 1, n + 1))
        a = a + a.T
        out = channel_adjoint_apply(CollectiveDephasing(0.4), n,
                                    AngularBlockMatrix(n, {n: a}))
        m = np.arange(n + 1) - n / 2
        damp = np.exp(-0.4 * (m[:, None] - m[None, :]) ** 2 / 2)
        assert np.allclose(out, damp * a, atol=1e-14)

    def test_structure_mismatch_rejected(self):
        with pytest.raises(ValueError):
            channel_adjoint_apply(Loss(0.5), 2, AngularBlockMatrix(2, {2: np.eye(3)}))
        with pytest.raises(ValueError):
            channel_adjoint_apply(NoiseFree(), 2, {})
        with pytest.raises(ValueError):
            channel_adjoint_apply(NoiseFree(), 2,
                                  AngularBlockMatrix(2, {0: np.eye(1)}))


class TestIterationConfig:
    def test_validation(self):
        with pytest.raises(ValueError):
            IterationConfig(max_iters=0)
        with pytest.raises(ValueError):
            IterationConfig(rel_tol=0.0)
        with pytest.raises(ValueError):
            IterationConfig(restarts=0)


class TestNoiseFreeOptimum:
    @pytest.mark.parametrize("n", [1, 2, 3, 5, 8, 12, 25])
    def test_reaches_heisenberg_value(self, n):
        trace = qfi_iterate(n, NoiseFree())
        assert trace.qfi == pytest.approx(n * n, rel=1e-9)

    def test_returned_state_is_noon_like(self):
        n = 7
        trace = qfi_iterate(n, NoiseFree())
        c = np.abs(trace.final_state.amplitudes)
        assert c[0] == pytest.approx(1 / math.sqrt(2), abs=1e-6)
        assert c[n] == pytest.approx(1 / math.sqrt(2), abs=1e-6)
        assert np.max(c[1:n]) < 1e-6


class TestDephasedOptimum:
    def test_single_qubit_equals_exhaustive_scan(self):
        # the full single-qubit landscape: F(theta) = eta^2 sin^2(theta)
        eta = 0.7
        thetas = np.linspace(0.0, math.pi, 2001)
        best = 0.0
        for theta in thetas:
            s = SymmetricPureState(1, [math.cos(theta / 2), math.sin(theta / 2)],
                                   normalize=True)
            best = max(best, state_qfi(s, LocalDephasing(eta)))
        trace = qfi_iterate(1, LocalDephasing(eta))
        assert trace.qfi == pytest.approx(eta * eta, abs=1e-10)
        assert trace.qfi >= best - 1e-9

    def test_linear_scaling_coefficient_approaches_limit(self):
        # N / F decreases toward (1 - eta^2)/eta^2 as N grows
        eta = 0.7
        limit = (1 - eta * eta) / (eta * eta)
        from phaselim.qcore import resample_state
        ratios = []
        warm = None
        for n in (20, 40, 60):
            init = resample_state(warm, n) if warm is not None else None
            cfg = IterationConfig(rel_tol=1e-9, initial_state=init)
            trace = qfi_iterate(n, LocalDephasing(eta), cfg)
            warm = trace.final_state
            ratios.append(n / trace.qfi)
        # the approach is slow (O(1/sqrt(N)) corrections): assert the trend
        # and that the N=60 value is already within 30 percent of the limit
        assert ratios[0] > ratios[1] > ratios[2] > limit
        assert ratios[2] == pytest.approx(limit, rel=0.30)


class TestFixedPoint:
    @pytest.mark.parametrize("noise", [LocalDephasing(0.7), Loss(0.6),
                                       CollectiveDephasing(0.25)])
    def test_rerun_from_converged_state_is_stationary(self, noise):
        n = 8
        cfg = IterationConfig(rel_tol=1e-11)
        first = qfi_iterate(n, noise, cfg)
        again = qfi_iterate(n, noise, IterationConfig(
            rel_tol=1e-11, initial_state=first.final_state))
        assert again.qfi == pytest.approx(first.qfi, rel=1e-9)

    def test_history_is_monotone_nondecreasing(self):
        trace = qfi_iterate(9, LocalDephasing(0.6),
                            IterationConfig(polish=False))
        diffs = np.diff(trace.qfi_values)
        assert np.all(diffs >= -1e-10 * np.abs(trace.qfi_values[1:]))

    def test_trace_length_bounded_by_max_iters(self):
        cfg = IterationConfig(max_iters=7, rel_tol=1e-15, polish=True)
        trace = qfi_iterate(6, LocalDephasing(0.6), cfg)
        assert len(trace.qfi_values) <= 7
        assert trace.qfi >= trace.qfi_values[-1] - 1e-12


class TestRestarts:
    def test_perturbed_restarts_agree(self):
        cfg = IterationConfig(restarts=5, perturbation_scale=0.3, seed=11)
        trace = qfi_iterate(6, LocalDephasing(0.7), cfg)
        spread = (max(trace.restart_qfis) - min(trace.restart_qfis))
        assert spread <= 1e-6 * trace.qfi
        assert len(trace.restart_qfis) == 5

    def test_complex_start_reaches_real_optimum(self):
        rng = np.random.default_rng(21)
        n = 5
        amps = rng.standard_normal(n + 1) + 1j * rng.standard_normal(n + 1)
        start = SymmetricPureState(n, amps / np.linalg.norm(amps))
        ref = qfi_iterate(n, LocalDephasing(0.7))
        got = qfi_iterate(n, LocalDephasing(0.7),
                          IterationConfig(initial_state=start))
        assert got.qfi == pytest.approx(ref.qfi, rel=1e-8)


class TestDominance:
    @pytest.mark.parametrize("eta", [0.3, 0.7])
    @pytest.mark.parametrize("n", [2, 3, 5, 8, 13, 21, 34, 55, 60])
    def test_optimum_dominates_reference_states_dephasing(self, n, eta):
        noise = LocalDephasing(eta)
        trace = qfi_iterate(n, noise, IterationConfig(rel_tol=1e-9))
        f_noon = state_qfi(noon_state(n), noise)
        f_prod = state_qfi(product_plus_state(n), noise)
        assert trace.qfi >= f_noon - 1e-8 * max(1.0, f_noon)
        assert trace.qfi >= f_prod - 1e-8 * max(1.0, f_prod)

    @pytest.mark.parametrize("eta", [0.3, 0.7])
    @pytest.mark.parametrize("n", [2, 5, 13, 34, 60])
    def test_optimum_dominates_reference_states_loss(self, n, eta):
        noise = Loss(eta)
        trace = qfi_iterate(n, noise, IterationConfig(rel_tol=1e-9))
        f_noon = state_qfi(noon_state(n), noise)
        f_prod = state_qfi(product_plus_state(n), noise)
        assert trace.qfi >= f_noon - 1e-8 * max(1.0, f_noon)
        assert trace.qfi >= f_prod - 1e-8 * max(1.0, f_prod)


class TestLossOptimum:
    def test_single_photon(self):
        trace = qfi_iterate(1, Loss(0.7))
        assert trace.qfi == pytest.approx(0.7, abs=1e-11)

    def test_lossless_matches_noise_free(self):
        trace = qfi_iterate(6, Loss(1.0))
        assert trace.qfi == pytest.approx(36.0, rel=1e-9)


class TestCrBound:
    def test_heisenberg_value(self):
        assert cr_bound(100.0, 1) == pytest.approx(0.1)

    def test_standard_scaling(self):
        assert cr_bound(25.0, 1) == pytest.approx(0.2)

    def test_repetition_scaling(self):
        assert cr_bound(7.3, 4) == pytest.approx(cr_bound(7.3, 1) / 2.0)

    def test_domain_errors(self):
        with pytest.raises(ValueError):
            cr_bound(0.0, 1)
        with pytest.raises(ValueError):
            cr_bound(1.0, 0)


class TestEngineOnExplicitBlocks:
    def test_prior_averaged_channel_matches_collective(self):
        # composing no-noise with a Gaussian kick equals collective dephasing
        from phaselim.qcore import compose_collective
        n, gamma = 10, 0.2
        direct = qfi_iterate(n, CollectiveDephasing(gamma))
        composed = maximize_qfi_over_states(
            n, compose_collective(channel_blocks(NoiseFree(), n), gamma))
        assert composed.qfi == pytest.approx(direct.qfi, rel=1e-10)

    def test_initial_state_dimension_checked(self):
        with pytest.raises(ValueError):
            qfi_iterate(4, NoiseFree(),
                        IterationConfig(initial_state=noon_state(5)))
