"""Fixed-photon-number Fock sectors, permanents, and state utilities.

A passive interferometer conserves total photon number, so every state in
this package lives in a single sector: the span of all M-mode occupation
vectors with a fixed photon total N.  The basis is ordered
lexicographically descending in the occupation counts, e.g. for M=2, N=2:
(2,0), (1,1), (0,2).  This order is frozen; all serialized amplitudes and
tests reference it.
"""

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from . import kernels
from .exceptions import UndefinedOutputStateError

# Exact integer factorials; photon totals beyond 8 are out of scope here.
FACTORIALS = tuple(math.factorial(i) for i in range(9))

UNITARITY_TOL = 1e-10


def _descending_occupations(modes, photons):
    if modes == 1:
        yield (photons,)
        return
    for head in range(photons, -1, -1):
        for tail in _descending_occupations(modes - 1, photons - head):
            yield (head,) + tail


@dataclass(frozen=True, eq=False)
class FockSector:
    """The N-photon subspace of M modes, with its frozen basis order."""

    modes: int
    photons: int
    basis: tuple = field(repr=False)
    index: dict = field(repr=False)

    @property
    def dim(self):
        return len(self.basis)

    def index_of(self, occupation):
        return self.index[tuple(occupation)]

    @property
    def repeated_indices(self):
        """Per basis state, the mode index of each photon (shape (dim, N))."""
        return _sector_tables(self.modes, self.photons)[0]

    @property
    def norms(self):
        """Per basis state, sqrt(prod_i n_i!)."""
        return _sector_tables(self.modes, self.photons)[1]


@lru_cache(maxsize=None)
def _sector_tables(modes, photons):
    sector = enumerate_basis(modes, photons)
    reps = np.empty((sector.dim, photons), dtype=np.int64)
    norms = np.empty(sector.dim, dtype=np.float64)
    for k, occ in enumerate(sector.basis):
        pos = 0
        prod = 1
        for mode, count in enumerate(occ):
            for _ in range(count):
                reps[k, pos] = mode
                pos += 1
            prod *= FACTORIALS[count]
        norms[k] = math.sqrt(prod)
    reps.setflags(write=False)
    norms.setflags(write=False)
    return reps, norms


@lru_cache(maxsize=None)
def enumerate_basis(modes, photons):
    """All M-mode, N-photon occupation vectors, lexicographically descending."""
    if modes < 1:
        raise ValueError(f"mode count must be positive, got {modes}")
    if photons < 0:
        raise ValueError(f"photon count must be nonnegative, got {photons}")
    basis = tuple(_descending_occupations(modes, photons))
    index = {occ: k for k, occ in enumerate(basis)}
    return FockSector(modes=modes, photons=photons, basis=basis, index=index)


def permanent(a):
    """Matrix permanent (Glynn's O(2^n n) formula via the kernel backend)."""
    return kernels.permanent(a)


def permanent_reference(a):
    """Naive Laplace (cofactor) expansion of the permanent, for testing only."""
    a = np.asarray(a, dtype=np.complex128)
    n = a.shape[0]
    if a.ndim != 2 or a.shape[1] != n:
        raise ValueError(f"permanent requires a square matrix, got shape {a.shape}")
    if n == 0:
        return 1.0 + 0.0j
    if n == 1:
        return complex(a[0, 0])
    rest = np.arange(1, n)
    total = 0.0 + 0.0j
    for col in range(n):
        minor = a[np.ix_(rest, np.delete(np.arange(n), col))]
        total += a[0, col] * permanent_reference(minor)
    return total


@dataclass
class PureState:
    """A ket in a single Fock sector, stored as amplitudes in the frozen basis."""

    sector: FockSector
    amplitudes: np.ndarray
    normalized: bool = False

    def __post_init__(self):
        self.amplitudes = np.asarray(self.amplitudes, dtype=np.complex128)
        if self.amplitudes.shape != (self.sector.dim,):
            raise ValueError(
                f"amplitude vector has length {self.amplitudes.shape}, "
                f"sector dimension is {self.sector.dim}"
            )
        if self.normalized and abs(self.norm_squared() - 1.0) > 1e-10:
            raise ValueError("state marked normalized but its squared norm is not 1")

    @classmethod
    def from_terms(cls, sector, terms, normalize=True):
        """Build from (occupation, amplitude) pairs; other amplitudes are zero."""
        amps = np.zeros(sector.dim, dtype=np.complex128)
        for occ, amp in terms:
            amps[sector.index_of(occ)] += amp
        if normalize:
            nrm = np.linalg.norm(amps)
            if nrm == 0.0:
                raise ValueError("cannot normalize the zero state")
            amps /= nrm
        return cls(sector=sector, amplitudes=amps, normalized=normalize)

    def norm_squared(self):
        return float(np.vdot(self.amplitudes, self.amplitudes).real)

    def overlap(self, other):
        """<self|other>; zero if the states live in different sectors."""
        if (self.sector.modes, self.sector.photons) != (
            other.sector.modes,
            other.sector.photons,
        ):
            return 0.0 + 0.0j
        return complex(np.vdot(self.amplitudes, other.amplitudes))


@dataclass(frozen=True)
class SectorUnitary:
    """A mode unitary lifted to one Fock sector."""

    dimension: int
    entries: np.ndarray


def lift_unitary(u, sector):
    """Lift an M x M mode unitary to its action on an N-photon sector.

    Entry (n, m) is the permanent of u with row i repeated n_i times and
    column j repeated m_j times, divided by sqrt(prod n_i! prod m_j!).
    """
    u = np.asarray(u, dtype=np.complex128)
    if u.shape != (sector.modes, sector.modes):
        raise ValueError(
            f"mode matrix has shape {u.shape}, sector expects "
            f"({sector.modes}, {sector.modes})"
        )
    defect = np.abs(u.conj().T @ u - np.eye(sector.modes)).max()
    if defect > UNITARITY_TOL:
        raise ValueError(f"mode matrix is not unitary (defect {defect:.2e})")
    reps = sector.repeated_indices
    norms = sector.norms
    entries = kernels.transition_matrix(u, reps, reps, norms, norms)
    return SectorUnitary(dimension=sector.dim, entries=entries)


def fidelity_with_pure(state, target):
    """Fidelity <psi*| rho |psi*> against a pure target.

    ``state`` is either a PureState (plain squared overlap) or a conditional
    ensemble produced by the imperfect-postselection pipeline, in which case
    the readout-weighted conditional overlaps are summed and divided by the
    success probability.
    """
    if not target.normalized:
        raise ValueError("target state must be normalized")
    if hasattr(state, "entries"):
        if state.success <= 0.0:
            raise UndefinedOutputStateError(
                "output state is undefined: success probability is zero"
            )
        total = 0.0
        for entry in state.entries:
            if entry.probability <= 0.0:
                continue
            readout_factor = entry.weight / entry.probability
            total += readout_factor * abs(target.overlap(entry.conditional_state)) ** 2
        return total / state.success
    return abs(target.overlap(state)) ** 2
