"""Declarative experiment configuration.

One YAML file describes the whole experiment; every field has a default so
an empty file reproduces the headline setup: a 6-mode mesh preparing the
four-mode resource state (|0101> + |1001> + |0110> - |1010>)/2 from two
dual-rail |+> qubits and two single-photon ancillas, postselected on one
photon per ancilla, with the measured biased-detector matrix.
"""

import dataclasses
from dataclasses import dataclass, field

import yaml

from .detector import load_readout_matrix
from .exceptions import ValidationError
from .fock import PureState, enumerate_basis
from .gate import GateSetup
from .learning import Hyperparams

# (occupation, amplitude) pairs on the output modes
DEFAULT_INPUT_TERMS = (
    ((0, 1, 0, 1), 0.5),
    ((1, 0, 0, 1), 0.5),
    ((0, 1, 1, 0), 0.5),
    ((1, 0, 1, 0), 0.5),
)
DEFAULT_TARGET_TERMS = (
    ((0, 1, 0, 1), 0.5),
    ((1, 0, 0, 1), 0.5),
    ((0, 1, 1, 0), 0.5),
    ((1, 0, 1, 0), -0.5),
)
# default success-threshold grid for the sweep: 16 evenly spaced points
DEFAULT_SWEEP = tuple(round(i * 0.1450 / 15, 8) for i in range(16))


@dataclass(frozen=True)
class ExperimentConfig:
    modes: int = 6
    ancilla_modes: tuple = (4, 5)
    ancilla_preparation: tuple = (1, 1)
    postselect_pattern: tuple = (1, 1)
    input_terms: tuple = DEFAULT_INPUT_TERMS
    target_terms: tuple = DEFAULT_TARGET_TERMS
    detector_source: str = "resta-2023"
    detector_normalize: bool = False
    alpha: float = 10.0
    beta: float = 10000.0
    s_star: float = 0.075
    learning_rate: float = 0.00025
    iterations: int = 1000
    seed: int = 0
    bootstrap_restarts: int = 20
    bootstrap_learning_rate: float = 0.02
    bootstrap_iterations: int = 1500
    bootstrap_s_star: float = 0.074
    sweep_s_star: tuple = DEFAULT_SWEEP
    output_directory: str = "results"

    def hyperparams(self, s_star=None, iterations=None, seed=None):
        return Hyperparams(
            alpha=self.alpha,
            beta=self.beta,
            s_star=self.s_star if s_star is None else s_star,
            learning_rate=self.learning_rate,
            iterations=self.iterations if iterations is None else iterations,
            seed=self.seed if seed is None else seed,
        )

    def _state_from_terms(self, terms, what):
        occupations = [tuple(occ) for occ, _ in terms]
        if not occupations:
            raise ValidationError(f"{what} state needs at least one term")
        n_out = self.modes - len(self.ancilla_modes)
        photons = {sum(occ) for occ in occupations}
        if any(len(occ) != n_out for occ in occupations):
            raise ValidationError(f"{what} state occupations must cover {n_out} modes")
        if len(photons) != 1:
            raise ValidationError(f"{what} state terms must share one photon total")
        sector = enumerate_basis(n_out, photons.pop())
        return PureState.from_terms(sector, terms, normalize=True)

    def make_setup(self):
        return GateSetup(
            total_modes=self.modes,
            ancilla_modes=tuple(self.ancilla_modes),
            input_state=self._state_from_terms(self.input_terms, "input"),
            ancilla_preparation=tuple(self.ancilla_preparation),
            postselect_pattern=tuple(self.postselect_pattern),
        )

    def make_target(self):
        return self._state_from_terms(self.target_terms, "target")

    def make_detector(self):
        return load_readout_matrix(self.detector_source, normalize=self.detector_normalize)

    def bootstrap_overrides(self):
        return {
            "learning_rate": self.bootstrap_learning_rate,
            "iterations": self.bootstrap_iterations,
            "s_star": self.bootstrap_s_star,
            "seed": self.seed,
            "alpha": self.alpha,
            "beta": self.beta,
        }


def _parse_terms(raw, what):
    terms = []
    for item in raw:
        if not isinstance(item, dict) or "occupation" not in item or "amplitude" not in item:
            raise ValidationError(
                f"each {what} term needs 'occupation' and 'amplitude' keys"
            )
        occ = tuple(int(v) for v in item["occupation"])
        amp = item["amplitude"]
        if isinstance(amp, (list, tuple)):
            if len(amp) != 2:
                raise ValidationError("complex amplitudes are written as [re, im]")
            amp = complex(float(amp[0]), float(amp[1]))
        else:
            amp = complex(float(amp), 0.0)
        terms.append((occ, amp))
    return tuple(terms)


_SECTIONS = {
    "setup": {
        "modes",
        "ancilla_modes",
        "ancilla_preparation",
        "postselect_pattern",
        "input_state",
        "target_state",
    },
    "detector": {"source", "normalize"},
    "training": {"alpha", "beta", "s_star", "learning_rate", "iterations", "seed"},
    "bootstrap": {"restarts", "learning_rate", "iterations", "s_star"},
    "sweep": {"s_star_values"},
    "output": {"directory"},
}


def load_config(path=None):
    """Read a YAML config file; missing fields fall back to the defaults."""
    if path is None:
        return ExperimentConfig()
    try:
        with open(path) as fh:
            doc = yaml.safe_load(fh) or {}
    except yaml.YAMLError as exc:
        raise ValidationError(f"cannot parse config {path}: {exc}") from exc
    if not isinstance(doc, dict):
        raise ValidationError(f"config {path} must be a mapping of sections")

    for section, keys in doc.items():
        if section not in _SECTIONS:
            raise ValidationError(f"unknown config section {section!r}")
        unknown = set(keys or {}) - _SECTIONS[section]
        if unknown:
            raise ValidationError(
                f"unknown keys in config section {section!r}: {sorted(unknown)}"
            )

    overrides = {}
    setup = doc.get("setup") or {}
    if "modes" in setup:
        overrides["modes"] = int(setup["modes"])
    for key, name in (
        ("ancilla_modes", "ancilla_modes"),
        ("ancilla_preparation", "ancilla_preparation"),
        ("postselect_pattern", "postselect_pattern"),
    ):
        if key in setup:
            overrides[name] = tuple(int(v) for v in setup[key])
    if "input_state" in setup:
        overrides["input_terms"] = _parse_terms(setup["input_state"], "input")
    if "target_state" in setup:
        overrides["target_terms"] = _parse_terms(setup["target_state"], "target")

    det = doc.get("detector") or {}
    if "source" in det:
        overrides["detector_source"] = str(det["source"])
    if "normalize" in det:
        overrides["detector_normalize"] = bool(det["normalize"])

    training = doc.get("training") or {}
    for key, cast in (
        ("alpha", float),
        ("beta", float),
        ("s_star", float),
        ("learning_rate", float),
        ("iterations", int),
        ("seed", int),
    ):
        if key in training:
            overrides[key] = cast(training[key])

    bootstrap = doc.get("bootstrap") or {}
    for key, cast, name in (
        ("restarts", int, "bootstrap_restarts"),
        ("learning_rate", float, "bootstrap_learning_rate"),
        ("iterations", int, "bootstrap_iterations"),
        ("s_star", float, "bootstrap_s_star"),
    ):
        if key in bootstrap:
            overrides[name] = cast(bootstrap[key])

    sweep = doc.get("sweep") or {}
    if "s_star_values" in sweep:
        overrides["sweep_s_star"] = tuple(float(v) for v in sweep["s_star_values"])

    output = doc.get("output") or {}
    if "directory" in output:
        overrides["output_directory"] = str(output["directory"])

    try:
        return dataclasses.replace(ExperimentConfig(), **overrides)
    except (TypeError, ValueError) as exc:
        raise ValidationError(f"bad config value in {path}: {exc}") from exc
