"""Photon-number-resolving detector readout statistics.

A detector is described by a column-stochastic matrix P with
P[m, n] = probability of reading out m photons when n photons arrive.
Detectors on different modes are assumed independent and identical, so
joint readout probabilities factor over modes.
"""

import csv
from dataclasses import dataclass

import numpy as np

from .exceptions import ValidationError

# Measured SNSPD readout matrix (truncated to at most 4 photons) used as the
# default biased-detector instance.  The published values carry rounding
# error: column 4 sums to ~1.0009.
RESTA_2023 = np.array(
    [
        [1.0, 0.1050, 0.0110, 0.0012, 0.0010],
        [0.0, 0.8950, 0.2452, 0.0513, 0.0097],
        [0.0, 0.0000, 0.7438, 0.3770, 0.1304],
        [0.0, 0.0000, 0.0000, 0.5706, 0.4585],
        [0.0, 0.0000, 0.0000, 0.0000, 0.4013],
    ]
)

COLUMN_SUM_TOL = 2e-3


@dataclass(frozen=True)
class ReadoutMatrix:
    """Validated conditional readout-probability matrix."""

    entries: np.ndarray

    def __post_init__(self):
        entries = np.asarray(self.entries, dtype=np.float64)
        if entries.ndim != 2 or entries.shape[0] != entries.shape[1]:
            raise ValidationError(f"readout matrix must be square, got {entries.shape}")
        if (entries < 0.0).any() or (entries > 1.0).any():
            bad = np.argwhere((entries < 0.0) | (entries > 1.0))[0]
            raise ValidationError(
                f"readout probability out of [0, 1] at row {bad[0]}, column {bad[1]}"
            )
        sums = entries.sum(axis=0)
        off = np.abs(sums - 1.0)
        if (off > COLUMN_SUM_TOL).any():
            col = int(np.argmax(off))
            raise ValidationError(
                f"column {col} of the readout matrix sums to {sums[col]:.6f}, "
                f"expected 1 within {COLUMN_SUM_TOL}"
            )
        entries.setflags(write=False)
        object.__setattr__(self, "entries", entries)

    @property
    def max_photons(self):
        return self.entries.shape[0] - 1

    @classmethod
    def identity(cls, max_photons):
        """Perfect detector: readout always equals the true photon number."""
        return cls(np.eye(max_photons + 1))

    def normalized(self):
        """Copy with each column rescaled to sum exactly to 1."""
        return ReadoutMatrix(self.entries / self.entries.sum(axis=0, keepdims=True))


def from_csv(path):
    """Read a readout matrix from CSV: header of true photon numbers, rows = m."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if len(rows) < 2:
        raise ValidationError(f"readout CSV {path} has no data rows")
    try:
        entries = np.array([[float(v) for v in row] for row in rows[1:]])
    except ValueError as exc:
        raise ValidationError(f"readout CSV {path} has a non-numeric entry: {exc}") from exc
    return ReadoutMatrix(entries)


def load_readout_matrix(source, normalize=False):
    """Resolve a built-in tag ("resta-2023", "identity-N") or a CSV path."""
    if source == "resta-2023":
        matrix = ReadoutMatrix(RESTA_2023)
    elif isinstance(source, str) and source.startswith("identity-"):
        try:
            max_photons = int(source.split("-", 1)[1])
        except ValueError as exc:
            raise ValidationError(f"bad identity detector tag: {source!r}") from exc
        matrix = ReadoutMatrix.identity(max_photons)
    else:
        matrix = from_csv(source)
    return matrix.normalized() if normalize else matrix


def readout_prob(x, n, p):
    """Joint probability of readout pattern x given true occupation n.

    Detectors are independent and identical, so this is the product of
    per-mode matrix entries.
    """
    if len(x) != len(n):
        raise ValueError(f"pattern lengths differ: {len(x)} vs {len(n)}")
    limit = p.max_photons
    prob = 1.0
    for xi, ni in zip(x, n):
        if xi > limit or ni > limit:
            raise ValueError(
                f"occupation entry exceeds the matrix range (max {limit}): "
                f"readout {xi}, true {ni}"
            )
        prob *= p.entries[xi, ni]
        if prob == 0.0:
            return 0.0
    return prob
