"""Loss, gradients, and training for detector-bias-aware state learning.

The scalar objective for mesh angles theta is

    L(theta) = 1 - sqrt(F(theta)) + alpha * softplus_beta(S* - S(theta))

where F is the fidelity of the gate's (generally mixed) output against the
pure target and S is the observed success probability under the given
readout matrix.  Gradients are computed analytically in reverse mode:
the loss is backpropagated through the fidelity/success sums to the output
amplitudes, through the batched permanents to the mode matrix, and through
the mesh blocks to the angles.  Central finite differences on the loss are
kept as the independent correctness oracle in the test suite.
"""

import dataclasses
import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize

from . import kernels
from .detector import ReadoutMatrix, readout_prob
from .exceptions import BootstrapError, ImpossiblePostselectionError
from .gate import ancilla_grouping, embedded_input
from .mesh import MeshParams, build_unitary, build_unitary_and_gradients, random_params

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPSILON = 1e-8


@dataclass(frozen=True)
class Hyperparams:
    """Training hyperparameters; the defaults reproduce the headline experiment."""

    alpha: float = 10.0
    beta: float = 10000.0
    s_star: float = 0.075
    learning_rate: float = 0.00025
    iterations: int = 1000
    seed: int = 0

    def __post_init__(self):
        if self.alpha < 0.0:
            raise ValueError("alpha must be nonnegative")
        if self.beta <= 0.0:
            raise ValueError("beta must be positive")
        if not 0.0 <= self.s_star <= 1.0:
            raise ValueError("s_star must lie in [0, 1]")
        if self.learning_rate <= 0.0:
            raise ValueError("learning_rate must be positive")
        if self.iterations < 0:
            raise ValueError("iterations must be nonnegative")


def softplus(x, beta):
    """(1/beta) * log(exp(beta*x) + 1), overflow-safe for large |beta*x|."""
    if beta <= 0.0:
        raise ValueError("beta must be positive")
    z = beta * x
    if z > 0.0:
        return x + math.log1p(math.exp(-z)) / beta
    return math.log1p(math.exp(z)) / beta


def _sigmoid(z):
    if z >= 0.0:
        return 1.0 / (1.0 + math.exp(-z))
    e = math.exp(z)
    return e / (1.0 + e)


@dataclass(frozen=True)
class TrainState:
    """Adam optimizer state."""

    params: MeshParams
    first_moment: np.ndarray
    second_moment: np.ndarray
    step: int = 0


def init_train_state(params):
    n = params.to_flat().size
    return TrainState(
        params=params,
        first_moment=np.zeros(n),
        second_moment=np.zeros(n),
        step=0,
    )


def adam_step(state, grad, hyper):
    """One Adam update with bias-corrected moments."""
    grad = np.asarray(grad, dtype=np.float64)
    if grad.shape != state.first_moment.shape:
        raise ValueError(
            f"gradient length {grad.shape} does not match parameter count "
            f"{state.first_moment.shape}"
        )
    step = state.step + 1
    m = ADAM_BETA1 * state.first_moment + (1.0 - ADAM_BETA1) * grad
    v = ADAM_BETA2 * state.second_moment + (1.0 - ADAM_BETA2) * grad**2
    m_hat = m / (1.0 - ADAM_BETA1**step)
    v_hat = v / (1.0 - ADAM_BETA2**step)
    theta = state.params.to_flat() - hyper.learning_rate * m_hat / (
        np.sqrt(v_hat) + ADAM_EPSILON
    )
    return TrainState(
        params=MeshParams.from_flat(state.params.modes, theta),
        first_moment=m,
        second_moment=v,
        step=step,
    )


@dataclass(frozen=True)
class TrajectoryRecord:
    """Loss, success probability, and fidelity at one training iteration."""

    iteration: int
    loss: float
    success: float
    fidelity: float


class LossEvaluator:
    """Precomputed pipeline for repeated loss/gradient evaluation at one setup.

    Precomputes the sector tables, the embedded input, the ancilla grouping,
    the per-outcome readout factors, and the target overlap vector, so each
    evaluation reduces to one batched-permanent kernel call plus small
    reductions.
    """

    def __init__(self, setup, detector, target, hyper):
        self.setup = setup
        self.detector = detector
        self.target = target
        self.hyper = hyper
        if not target.normalized:
            raise ValueError("target state must be normalized")
        if detector.max_photons < setup.total_photons:
            raise ValueError(
                f"readout matrix covers at most {detector.max_photons} photons, "
                f"setup carries {setup.total_photons}"
            )

        sector = setup.full_sector
        self._row_reps = sector.repeated_indices
        self._row_norms = sector.norms
        self._col_reps, self._col_norms, self._in_amps = embedded_input(setup)

        grouping = ancilla_grouping(
            setup.total_modes, setup.total_photons, tuple(setup.ancilla_modes)
        )
        self._block_of = grouping.block_of
        self._n_blocks = len(grouping.outcomes)
        pattern = tuple(setup.postselect_pattern)
        self._readout = np.array(
            [readout_prob(pattern, outcome, detector) for outcome in grouping.outcomes]
        )
        if self._readout.max() <= 0.0:
            raise ImpossiblePostselectionError(
                f"ancilla pattern {pattern} has zero readout probability for this setup"
            )

        # conj(target amplitude) at each full-sector index whose output part
        # lies in the target's photon sector; zero elsewhere
        self._target_vec = np.zeros(sector.dim, dtype=np.complex128)
        for b, out_sector in enumerate(grouping.output_sectors):
            if (out_sector.modes, out_sector.photons) != (
                target.sector.modes,
                target.sector.photons,
            ):
                continue
            idx = grouping.members[b]
            self._target_vec[idx] = np.conj(
                target.amplitudes[grouping.positions[b]]
            )

    def amplitudes(self, u):
        """Full-sector output amplitudes for a mode matrix."""
        return (
            kernels.transition_matrix(
                u, self._row_reps, self._col_reps, self._row_norms, self._col_norms
            )
            @ self._in_amps
        )

    def _reduce(self, c):
        """(success, overlap-per-block, fidelity numerator) from amplitudes."""
        probs = np.bincount(
            self._block_of, weights=(c.real**2 + c.imag**2), minlength=self._n_blocks
        )
        tc = self._target_vec * c
        overlaps = np.bincount(
            self._block_of, weights=tc.real, minlength=self._n_blocks
        ) + 1j * np.bincount(self._block_of, weights=tc.imag, minlength=self._n_blocks)
        success = float(self._readout @ probs)
        numerator = float(self._readout @ np.abs(overlaps) ** 2)
        return success, overlaps, numerator

    def _assemble(self, success, numerator):
        if success <= 0.0:
            raise ImpossiblePostselectionError(
                "success probability vanished during loss evaluation"
            )
        fidelity = numerator / success
        penalty = self.hyper.alpha * softplus(self.hyper.s_star - success, self.hyper.beta)
        return 1.0 - math.sqrt(fidelity) + penalty, success, fidelity

    def value(self, params):
        """(loss, success, fidelity) at the given mesh angles."""
        c = self.amplitudes(build_unitary(params))
        success, _, numerator = self._reduce(c)
        return self._assemble(success, numerator)

    def value_and_grad(self, params):
        """Loss triple plus the analytic gradient w.r.t. flattened angles."""
        u, du = build_unitary_and_gradients(params)
        c = self.amplitudes(u)
        success, overlaps, numerator = self._reduce(c)
        loss, _, fidelity = self._assemble(success, numerator)

        # reverse pass: d loss / d conj(c) per amplitude
        dl_df = -0.5 / math.sqrt(fidelity) if fidelity > 0.0 else 0.0
        dl_dnum = dl_df / success
        dl_dsucc = -dl_df * numerator / success**2 - self.hyper.alpha * _sigmoid(
            self.hyper.beta * (self.hyper.s_star - success)
        )
        r = self._readout[self._block_of]
        gbar = dl_dnum * r * overlaps[self._block_of] * np.conj(self._target_vec)
        gbar += dl_dsucc * r * c

        weights = np.conj(gbar)[:, None] * self._in_amps[None, :]
        gu = kernels.transition_gradient(
            u,
            self._row_reps,
            self._col_reps,
            self._row_norms,
            self._col_norms,
            weights,
        )
        grad = 2.0 * np.einsum("tab,ab->t", du, gu).real
        return loss, success, fidelity, grad

    def gradient(self, params):
        return self.value_and_grad(params)[3]


def loss(params, setup, p, target, hyper):
    """(loss, success, fidelity) of the full pipeline at one angle vector."""
    return LossEvaluator(setup, p, target, hyper).value(params)


def grad_loss(params, setup, p, target, hyper):
    """Analytic gradient of :func:`loss` w.r.t. the flattened mesh angles."""
    return LossEvaluator(setup, p, target, hyper).gradient(params)


def train(setup, p, target, hyper, initial):
    """Run Adam for ``hyper.iterations`` steps from the given angles.

    Each trajectory record holds the loss/success/fidelity at the start of
    its iteration (before the parameter update).  Deterministic given the
    inputs; the seed only matters for procedures that draw random starts.
    """
    evaluator = LossEvaluator(setup, p, target, hyper)
    state = init_train_state(initial)
    trajectory = []
    for iteration in range(hyper.iterations):
        value, success, fidelity, grad = evaluator.value_and_grad(state.params)
        trajectory.append(
            TrajectoryRecord(
                iteration=iteration, loss=value, success=success, fidelity=fidelity
            )
        )
        state = adam_step(state, grad, hyper)
    return state.params, trajectory


# Bootstrap acceptance thresholds: fidelity of the ideal-detector solution and
# the success-probability floor (the reference gate's optimum is 2/27).
BOOTSTRAP_FIDELITY_GOAL = 1.0 - 1e-6
BOOTSTRAP_SUCCESS_FLOOR = 0.070
BOOTSTRAP_SUCCESS_CEIL = 0.078
_BOOTSTRAP_DEFAULTS = Hyperparams(
    alpha=10.0, beta=10000.0, s_star=0.074, learning_rate=0.02, iterations=1500, seed=0
)
# The polish stage backs the success threshold slightly off the feasibility
# edge so the penalty stays silent while L-BFGS drives the fidelity to 1.
_POLISH_S_STAR = 0.071


def bootstrap_ideal(setup, target, hyper_overrides=None, restarts=20):
    """Angles solving the ideal-detector problem, found by multi-start Adam.

    Random uniform restarts are trained on the penalized loss with an
    identity readout matrix, polished with L-BFGS, and accepted once the
    ideal-postselection fidelity reaches 1 - 1e-6 with success probability
    inside [0.070, 0.078] (around the reference gate's 2/27 optimum).
    Raises BootstrapError (carrying the best candidate) when the restart
    budget is exhausted.
    """
    hyper = _BOOTSTRAP_DEFAULTS
    if hyper_overrides:
        hyper = dataclasses.replace(hyper, **hyper_overrides)
    identity = ReadoutMatrix.identity(setup.total_photons)
    evaluator = LossEvaluator(setup, identity, target, hyper)
    polish_evaluator = LossEvaluator(
        setup, identity, target, dataclasses.replace(hyper, s_star=_POLISH_S_STAR)
    )
    rng = np.random.default_rng(hyper.seed)
    modes = setup.total_modes

    best = (None, -1.0, 0.0)
    for _ in range(restarts):
        params, _ = train(setup, identity, target, hyper, random_params(modes, rng))

        def objective(theta):
            value, _, _, grad = polish_evaluator.value_and_grad(
                MeshParams.from_flat(modes, theta)
            )
            return value, grad

        result = minimize(
            objective,
            params.to_flat(),
            jac=True,
            method="L-BFGS-B",
            options={"maxiter": 2000, "ftol": 1e-16, "gtol": 1e-12},
        )
        candidate = MeshParams.from_flat(modes, result.x)
        _, success, fidelity = evaluator.value(candidate)
        if (
            fidelity >= BOOTSTRAP_FIDELITY_GOAL
            and BOOTSTRAP_SUCCESS_FLOOR <= success <= BOOTSTRAP_SUCCESS_CEIL
        ):
            return candidate
        if fidelity > best[1]:
            best = (candidate, fidelity, success)
    raise BootstrapError(
        f"bootstrap failed after {restarts} restarts; best candidate reached "
        f"fidelity {best[1]:.8f} with success probability {best[2]:.6f}",
        best_params=best[0],
        best_fidelity=best[1],
        best_success=best[2],
    )
