"""Nondeterministic gate evaluation: propagation, conditioning, postselection.

A gate run interferes a pure input state with ancilla photons through a
mode unitary, then measures the ancilla modes.  With perfect detectors the
output is the conditional state for the postselected pattern; with biased
detectors every true ancilla occupation that can masquerade as the pattern
contributes, and the output is a weighted ensemble of conditional pure
states.
"""

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from . import kernels
from .detector import readout_prob
from .exceptions import ImpossiblePostselectionError
from .fock import FockSector, PureState, enumerate_basis

PRUNE_THRESHOLD = 1e-15


@dataclass(frozen=True)
class GateSetup:
    """Input state, ancilla preparation, and postselection pattern of one gate."""

    total_modes: int
    ancilla_modes: tuple
    input_state: PureState
    ancilla_preparation: tuple
    postselect_pattern: tuple

    def __post_init__(self):
        anc = tuple(self.ancilla_modes)
        if len(set(anc)) != len(anc) or any(
            m < 0 or m >= self.total_modes for m in anc
        ):
            raise ValueError(f"bad ancilla mode indices: {anc}")
        if len(self.ancilla_preparation) != len(anc):
            raise ValueError("ancilla preparation length must match ancilla mode count")
        if len(self.postselect_pattern) != len(anc):
            raise ValueError("postselect pattern length must match ancilla mode count")
        if any(n < 0 for n in self.ancilla_preparation):
            raise ValueError("ancilla preparation entries must be nonnegative")
        if self.input_state.sector.modes != self.total_modes - len(anc):
            raise ValueError(
                "input state must live on the non-ancilla modes "
                f"({self.total_modes - len(anc)} modes)"
            )

    @property
    def output_modes(self):
        anc = set(self.ancilla_modes)
        return tuple(m for m in range(self.total_modes) if m not in anc)

    @property
    def total_photons(self):
        return self.input_state.sector.photons + sum(self.ancilla_preparation)

    @property
    def full_sector(self):
        return enumerate_basis(self.total_modes, self.total_photons)


@dataclass(frozen=True, eq=False)
class AncillaGrouping:
    """Index structure splitting a sector's basis by its ancilla sub-pattern."""

    sector: FockSector
    ancilla_modes: tuple
    outcomes: tuple  # ancilla patterns, in order of first appearance in the basis
    block_of: np.ndarray = field(repr=False)  # basis index -> outcome position
    members: tuple = field(repr=False)  # per outcome: array of basis indices
    output_sectors: tuple = field(repr=False)  # per outcome: FockSector of output modes
    positions: tuple = field(repr=False)  # per outcome: index in the output sector


@lru_cache(maxsize=None)
def ancilla_grouping(modes, photons, ancilla_modes):
    sector = enumerate_basis(modes, photons)
    anc = tuple(ancilla_modes)
    out_modes = tuple(m for m in range(modes) if m not in set(anc))
    outcome_pos = {}
    outcomes = []
    members = []
    positions = []
    block_of = np.empty(sector.dim, dtype=np.int64)
    for k, occ in enumerate(sector.basis):
        pattern = tuple(occ[m] for m in anc)
        if pattern not in outcome_pos:
            outcome_pos[pattern] = len(outcomes)
            outcomes.append(pattern)
            members.append([])
            positions.append([])
        b = outcome_pos[pattern]
        block_of[k] = b
        members[b].append(k)
        out_sector = enumerate_basis(len(out_modes), photons - sum(pattern))
        positions[b].append(out_sector.index_of(tuple(occ[m] for m in out_modes)))
    return AncillaGrouping(
        sector=sector,
        ancilla_modes=anc,
        outcomes=tuple(outcomes),
        block_of=block_of,
        members=tuple(np.asarray(m, dtype=np.int64) for m in members),
        output_sectors=tuple(
            enumerate_basis(len(out_modes), photons - sum(o)) for o in outcomes
        ),
        positions=tuple(np.asarray(p, dtype=np.int64) for p in positions),
    )


def embedded_input(setup):
    """Nonzero input-tensor-ancilla amplitudes as sparse kernel inputs.

    Returns (col_reps, col_norms, values): the repeated-mode-index rows and
    normalization factors of every occupied full-sector basis state, plus the
    input amplitude carried by each.
    """
    sector = setup.full_sector
    out_modes = setup.output_modes
    anc_pairs = list(zip(setup.ancilla_modes, setup.ancilla_preparation))
    cols = []
    values = []
    in_sector = setup.input_state.sector
    for j, occ in enumerate(in_sector.basis):
        amp = setup.input_state.amplitudes[j]
        if amp == 0.0:
            continue
        full = [0] * setup.total_modes
        for mode, count in zip(out_modes, occ):
            full[mode] = count
        for mode, count in anc_pairs:
            full[mode] = count
        cols.append(sector.index_of(tuple(full)))
        values.append(amp)
    cols = np.asarray(cols, dtype=np.int64)
    return (
        sector.repeated_indices[cols],
        sector.norms[cols],
        np.asarray(values, dtype=np.complex128),
    )


def propagate(setup, u):
    """Apply the interferometer to input (x) ancilla, in the full sector."""
    u = np.asarray(u, dtype=np.complex128)
    if u.shape != (setup.total_modes, setup.total_modes):
        raise ValueError(
            f"mode matrix has shape {u.shape}, setup has {setup.total_modes} modes"
        )
    sector = setup.full_sector
    col_reps, col_norms, values = embedded_input(setup)
    amps = kernels.transition_matrix(
        u, sector.repeated_indices, col_reps, sector.norms, col_norms
    ) @ values
    return PureState(sector=sector, amplitudes=amps)


def condition_on_ancilla(full_state, ancilla_modes):
    """Group full-sector amplitudes by ancilla pattern.

    Returns a list of (outcome, unnormalized conditional PureState, probability)
    covering every ancilla pattern reachable in the sector.
    """
    sector = full_state.sector
    grouping = ancilla_grouping(sector.modes, sector.photons, tuple(ancilla_modes))
    results = []
    for b, outcome in enumerate(grouping.outcomes):
        block = full_state.amplitudes[grouping.members[b]]
        out_sector = grouping.output_sectors[b]
        amps = np.zeros(out_sector.dim, dtype=np.complex128)
        amps[grouping.positions[b]] = block
        prob = float(np.vdot(block, block).real)
        results.append((outcome, PureState(sector=out_sector, amplitudes=amps), prob))
    return results


@dataclass(frozen=True)
class EnsembleEntry:
    """One true ancilla occupation contributing to the observed output."""

    outcome: tuple
    weight: float  # readout probability times physical outcome probability
    probability: float  # physical probability of this ancilla occupation
    conditional_state: PureState  # unnormalized; squared norm = probability
    output_photons: int


@dataclass(frozen=True)
class ConditionalEnsemble:
    """Mixed gate output as weighted conditional pure states plus success."""

    entries: tuple
    success: float


def ideal_postselect(setup, u):
    """Output state and success probability with perfect detectors."""
    full = propagate(setup, u)
    for outcome, state, prob in condition_on_ancilla(full, setup.ancilla_modes):
        if outcome == tuple(setup.postselect_pattern):
            if prob <= 0.0:
                break
            return (
                PureState(
                    sector=state.sector,
                    amplitudes=state.amplitudes / np.sqrt(prob),
                    normalized=True,
                ),
                prob,
            )
    raise ImpossiblePostselectionError(
        f"ancilla pattern {tuple(setup.postselect_pattern)} never occurs for this setup"
    )


def imperfect_postselect(setup, u, p, prune_threshold=PRUNE_THRESHOLD):
    """Gate output ensemble with a biased readout matrix.

    Every true ancilla occupation n (photon total at most the sector total)
    enters with weight P(pattern | n) times the physical probability of n.
    Entries below ``prune_threshold`` are dropped from the ensemble; the
    success probability is the sum over all weights, pruned or not.
    """
    if p.max_photons < setup.total_photons:
        raise ValueError(
            f"readout matrix covers at most {p.max_photons} photons, "
            f"setup carries {setup.total_photons}"
        )
    full = propagate(setup, u)
    pattern = tuple(setup.postselect_pattern)
    entries = []
    success = 0.0
    for outcome, state, prob in condition_on_ancilla(full, setup.ancilla_modes):
        weight = readout_prob(pattern, outcome, p) * prob
        success += weight
        if weight >= prune_threshold or prune_threshold <= 0.0:
            entries.append(
                EnsembleEntry(
                    outcome=outcome,
                    weight=weight,
                    probability=prob,
                    conditional_state=state,
                    output_photons=setup.total_photons - sum(outcome),
                )
            )
    if success <= 0.0:
        raise ImpossiblePostselectionError(
            f"ancilla pattern {pattern} has zero readout probability for this setup"
        )
    return ConditionalEnsemble(entries=tuple(entries), success=success)
