import math

import numpy as np
import pytest

from heraldopt import learning, mesh
from heraldopt.detector import ReadoutMatrix
from heraldopt.exceptions import BootstrapError


def finite_difference_gradient(evaluator, params, step=1e-6):
    """Central finite differences on the loss; the gradient oracle."""
    flat = params.to_flat()
    grad = np.empty_like(flat)
    for t in range(flat.size):
        up = flat.copy()
        up[t] += step
        dn = flat.copy()
        dn[t] -= step
        modes = params.modes
        grad[t] = (
            evaluator.value(mesh.MeshParams.from_flat(modes, up))[0]
            - evaluator.value(mesh.MeshParams.from_flat(modes, dn))[0]
        ) / (2.0 * step)
    return grad


def assert_gradient_close(analytic, oracle, rel=1e-5, near_zero=1e-8):
    for a, o in zip(analytic, oracle):
        if abs(o) < 1e-3:
            assert abs(a - o) <= near_zero
        else:
            assert abs(a - o) <= rel * abs(o)


class TestSoftplus:
    def test_at_zero(self):
        assert learning.softplus(0.0, 1.0) == pytest.approx(math.log(2.0))

    def test_saturation(self):
        assert learning.softplus(10.0, 10000.0) == pytest.approx(10.0, abs=1e-12)

    def test_deep_negative_tail(self):
        assert learning.softplus(-0.01, 10000.0) <= 1e-40

    def test_monotone_and_positive(self):
        values = [learning.softplus(x, 50.0) for x in np.linspace(-1.0, 1.0, 41)]
        assert all(v > 0.0 for v in values)
        assert all(b > a for a, b in zip(values, values[1:]))

    def test_requires_positive_beta(self):
        with pytest.raises(ValueError):
            learning.softplus(0.0, 0.0)


class TestAdamStep:
    def test_zero_gradient_keeps_parameters(self):
        params = mesh.MeshParams.from_flat(2, np.ones(4))
        state = learning.init_train_state(params)
        hyper = learning.Hyperparams(learning_rate=0.1)
        after = learning.adam_step(state, np.zeros(4), hyper)
        assert after.step == 1
        assert np.array_equal(after.params.to_flat(), params.to_flat())

    def test_first_step_has_unit_scale(self):
        params = mesh.MeshParams.from_flat(2, np.zeros(4))
        state = learning.init_train_state(params)
        hyper = learning.Hyperparams(learning_rate=0.01)
        grad = np.array([3.0, -0.5, 1e-3, 7.0])
        after = learning.adam_step(state, grad, hyper)
        delta = after.params.to_flat() - params.to_flat()
        # bias-corrected first step moves each component by ~lr * sign(grad)
        assert np.allclose(delta, -hyper.learning_rate * np.sign(grad), rtol=1e-4)

    def test_descends_a_quadratic(self):
        # reference problem: f(theta) = |theta|^2 from (1, 1), 10 steps
        flat = np.array([1.0, 1.0, 0.0, 0.0])
        params = mesh.MeshParams.from_flat(2, flat)
        state = learning.init_train_state(params)
        hyper = learning.Hyperparams(learning_rate=0.1)
        values = []
        for _ in range(10):
            theta = state.params.to_flat()
            values.append(float(theta @ theta))
            state = learning.adam_step(state, 2.0 * theta, hyper)
        final = state.params.to_flat()
        values.append(float(final @ final))
        assert all(b < a for a, b in zip(values, values[1:]))

    def test_length_mismatch(self):
        state = learning.init_train_state(mesh.MeshParams.from_flat(2, np.zeros(4)))
        with pytest.raises(ValueError):
            learning.adam_step(state, np.zeros(3), learning.Hyperparams())


class TestLoss:
    def test_alpha_zero_is_one_minus_root_fidelity(
        self, default_setup, default_target, resta_detector
    ):
        rng = np.random.default_rng(31)
        hyper = learning.Hyperparams(alpha=0.0)
        params = mesh.random_params(6, rng)
        value, success, fidelity = learning.loss(
            params, default_setup, resta_detector, default_target, hyper
        )
        assert value == 1.0 - math.sqrt(fidelity)
        assert 0.0 <= fidelity <= 1.0 + 1e-12
        assert 0.0 <= success <= 1.0 + 1e-12

    def test_loss_decomposition(self, default_setup, default_target, resta_detector):
        rng = np.random.default_rng(32)
        hyper = learning.Hyperparams(s_star=0.09)
        for _ in range(5):
            params = mesh.random_params(6, rng)
            value, success, fidelity = learning.loss(
                params, default_setup, resta_detector, default_target, hyper
            )
            penalty = hyper.alpha * learning.softplus(hyper.s_star - success, hyper.beta)
            assert abs(value - penalty + math.sqrt(fidelity) - 1.0) <= 1e-12

    def test_ideal_detector_at_bootstrap_angles(
        self, default_setup, default_target, bootstrap_angles
    ):
        identity = ReadoutMatrix.identity(4)
        hyper = learning.Hyperparams(alpha=0.0)
        value, success, fidelity = learning.loss(
            bootstrap_angles, default_setup, identity, default_target, hyper
        )
        assert value <= 1e-3
        assert fidelity >= 1.0 - 1e-6
        assert 0.070 <= success <= 0.078

    def test_biased_baseline_below_one(
        self, default_setup, default_target, resta_detector, bootstrap_angles
    ):
        hyper = learning.Hyperparams()
        _, success, fidelity = learning.loss(
            bootstrap_angles, default_setup, resta_detector, default_target, hyper
        )
        assert fidelity < 1.0
        assert 0.0 < success < 1.0


class TestGradLoss:
    def test_matches_finite_differences(
        self, default_setup, default_target, resta_detector
    ):
        rng = np.random.default_rng(33)
        hyper = learning.Hyperparams(s_star=0.075)
        evaluator = learning.LossEvaluator(
            default_setup, resta_detector, default_target, hyper
        )
        for _ in range(3):
            params = mesh.random_params(6, rng)
            analytic = evaluator.gradient(params)
            oracle = finite_difference_gradient(evaluator, params)
            assert_gradient_close(analytic, oracle)

    def test_ancilla_output_phases_are_stationary(
        self, default_setup, default_target, resta_detector
    ):
        # output phases on measured ancilla modes multiply each conditional
        # block by a global phase, so the loss cannot depend on them
        rng = np.random.default_rng(34)
        hyper = learning.Hyperparams()
        grad = learning.grad_loss(
            mesh.random_params(6, rng), default_setup, resta_detector,
            default_target, hyper,
        )
        n_blocks = 15
        for ancilla_mode in (4, 5):
            assert abs(grad[2 * n_blocks + ancilla_mode]) <= 1e-8

    def test_penalty_vanishes_when_saturated(
        self, default_setup, default_target, resta_detector
    ):
        rng = np.random.default_rng(35)
        hyper_on = learning.Hyperparams(alpha=10.0, beta=10000.0, s_star=0.0)
        hyper_off = learning.Hyperparams(alpha=0.0, beta=10000.0, s_star=0.0)
        for _ in range(10):
            params = mesh.random_params(6, rng)
            _, success, _ = learning.loss(
                params, default_setup, resta_detector, default_target, hyper_on
            )
            if success <= 0.05:
                continue
            g_on = learning.grad_loss(
                params, default_setup, resta_detector, default_target, hyper_on
            )
            g_off = learning.grad_loss(
                params, default_setup, resta_detector, default_target, hyper_off
            )
            assert np.abs(g_on - g_off).max() <= 1e-8


class TestTrain:
    def test_zero_iterations(self, default_setup, default_target, resta_detector):
        rng = np.random.default_rng(36)
        initial = mesh.random_params(6, rng)
        hyper = learning.Hyperparams(iterations=0)
        final, trajectory = learning.train(
            default_setup, resta_detector, default_target, hyper, initial
        )
        assert final == initial
        assert trajectory == []

    def test_trajectory_recomputes_from_its_own_records(
        self, default_setup, default_target, resta_detector, bootstrap_angles
    ):
        hyper = learning.Hyperparams(iterations=20)
        _, trajectory = learning.train(
            default_setup, resta_detector, default_target, hyper, bootstrap_angles
        )
        assert len(trajectory) == 20
        for record in trajectory:
            expected = (
                1.0
                - math.sqrt(record.fidelity)
                + hyper.alpha * learning.softplus(hyper.s_star - record.success, hyper.beta)
            )
            assert abs(record.loss - expected) <= 1e-10
            assert 0.0 <= record.fidelity <= 1.0 + 1e-12
            assert 0.0 <= record.success <= 1.0 + 1e-12

    def test_deterministic(self, default_setup, default_target, resta_detector):
        rng = np.random.default_rng(37)
        initial = mesh.random_params(6, rng)
        hyper = learning.Hyperparams(iterations=10)
        run = lambda: learning.train(
            default_setup, resta_detector, default_target, hyper, initial
        )
        final_a, traj_a = run()
        final_b, traj_b = run()
        assert final_a == final_b
        assert traj_a == traj_b

    def test_ideal_detector_training_keeps_optimum(
        self, default_setup, default_target, bootstrap_angles
    ):
        identity = ReadoutMatrix.identity(4)
        hyper = learning.Hyperparams(s_star=0.070, iterations=100)
        _, trajectory = learning.train(
            default_setup, identity, default_target, hyper, bootstrap_angles
        )
        assert all(r.fidelity >= 1.0 - 1e-4 for r in trajectory)


class TestBootstrap:
    def test_bootstrap_meets_contract(
        self, default_setup, default_target, bootstrap_angles
    ):
        from heraldopt.fock import fidelity_with_pure
        from heraldopt.gate import ideal_postselect

        state, success = ideal_postselect(
            default_setup, mesh.build_unitary(bootstrap_angles)
        )
        fidelity = fidelity_with_pure(state, default_target)
        assert fidelity >= 1.0 - 1e-6
        assert abs(success - 2.0 / 27.0) <= 4e-3

    def test_zero_restart_budget_fails(self, default_setup, default_target):
        with pytest.raises(BootstrapError):
            learning.bootstrap_ideal(default_setup, default_target, restarts=0)

    def test_same_seed_same_angles(self, default_setup, default_target):
        overrides = {"seed": 99, "iterations": 300}
        a = learning.bootstrap_ideal(default_setup, default_target, overrides, restarts=5)
        b = learning.bootstrap_ideal(default_setup, default_target, overrides, restarts=5)
        assert a == b


class TestHyperparams:
    def test_validation(self):
        with pytest.raises(ValueError):
            learning.Hyperparams(alpha=-1.0)
        with pytest.raises(ValueError):
            learning.Hyperparams(beta=0.0)
        with pytest.raises(ValueError):
            learning.Hyperparams(s_star=1.5)
        with pytest.raises(ValueError):
            learning.Hyperparams(learning_rate=0.0)

    def test_penalty_monotone_in_threshold(
        self, default_setup, default_target, resta_detector
    ):
        rng = np.random.default_rng(38)
        params = mesh.random_params(6, rng)
        losses = []
        for s_star in (0.0, 0.05, 0.10, 0.20, 0.40):
            hyper = learning.Hyperparams(s_star=s_star)
            losses.append(
                learning.loss(
                    params, default_setup, resta_detector, default_target, hyper
                )[0]
            )
        assert all(b >= a - 1e-12 for a, b in zip(losses, losses[1:]))
