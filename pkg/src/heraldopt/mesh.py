"""Rectangular mesh of two-mode blocks parametrizing M-mode unitaries.

Placement order (frozen; angle files and flattened parameter vectors use it):
columns left to right, column c coupling adjacent pairs (i, i+1) for
i = c % 2, c % 2 + 2, ... top to bottom.  For M = 6 that is

    column 0: (0,1) (2,3) (4,5)     column 1: (1,2) (3,4)
    column 2: (0,1) (2,3) (4,5)     column 3: (1,2) (3,4)
    column 4: (0,1) (2,3) (4,5)     column 5: (1,2) (3,4)

for a total of M(M-1)/2 blocks.  Each block applies

    [[exp(i*phi)*cos(theta), -sin(theta)],
     [exp(i*phi)*sin(theta),  cos(theta)]]

to its mode pair, and a diagonal of M output phases follows the mesh.
The flattened parameter vector is [theta_0, phi_0, theta_1, phi_1, ...,
psi_0, ..., psi_{M-1}] in block order, M*M real numbers in total.
"""

import json
import math
import os
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .exceptions import ValidationError


@lru_cache(maxsize=None)
def mzi_pair_order(modes):
    """Mode pairs (i, i+1) coupled by each block, in placement order."""
    pairs = []
    for column in range(modes):
        for i in range(column % 2, modes - 1, 2):
            pairs.append((i, i + 1))
    assert len(pairs) == modes * (modes - 1) // 2
    return tuple(pairs)


def n_parameters(modes):
    """Real degrees of freedom of the mesh: M(M-1) block angles + M phases."""
    return modes * modes


@dataclass(frozen=True)
class MeshParams:
    """Angles of the mesh: one (theta, phi) pair per block plus output phases."""

    modes: int
    mzi_angles: tuple
    output_phases: tuple

    def __post_init__(self):
        expected = self.modes * (self.modes - 1) // 2
        if len(self.mzi_angles) != expected:
            raise ValidationError(
                f"expected {expected} (theta, phi) pairs for {self.modes} modes, "
                f"got {len(self.mzi_angles)}"
            )
        if len(self.output_phases) != self.modes:
            raise ValidationError(
                f"expected {self.modes} output phases, got {len(self.output_phases)}"
            )
        flat = [a for pair in self.mzi_angles for a in pair] + list(self.output_phases)
        if not all(math.isfinite(a) for a in flat):
            raise ValidationError("all angles must be finite")

    @classmethod
    def from_flat(cls, modes, vector):
        vector = np.asarray(vector, dtype=np.float64)
        if vector.shape != (n_parameters(modes),):
            raise ValidationError(
                f"flat parameter vector must have length {n_parameters(modes)}, "
                f"got {vector.shape}"
            )
        n_blocks = modes * (modes - 1) // 2
        pairs = tuple(
            (float(vector[2 * t]), float(vector[2 * t + 1])) for t in range(n_blocks)
        )
        phases = tuple(float(p) for p in vector[2 * n_blocks :])
        return cls(modes=modes, mzi_angles=pairs, output_phases=phases)

    def to_flat(self):
        flat = [a for pair in self.mzi_angles for a in pair]
        flat.extend(self.output_phases)
        return np.asarray(flat, dtype=np.float64)


def random_params(modes, rng):
    """Uniform angles over [0, 2*pi), used for bootstrap restarts."""
    return MeshParams.from_flat(
        modes, rng.uniform(0.0, 2.0 * np.pi, size=n_parameters(modes))
    )


def _block_matrix(theta, phi):
    c, s = math.cos(theta), math.sin(theta)
    e = complex(math.cos(phi), math.sin(phi))
    return np.array([[e * c, -s], [e * s, c]], dtype=np.complex128)


def _embed(block, pair, modes):
    full = np.eye(modes, dtype=np.complex128)
    i, j = pair
    full[i, i], full[i, j] = block[0, 0], block[0, 1]
    full[j, i], full[j, j] = block[1, 0], block[1, 1]
    return full


def build_unitary(params):
    """Mode unitary of the mesh: output phases times the block product."""
    u = np.eye(params.modes, dtype=np.complex128)
    for (theta, phi), (i, j) in zip(params.mzi_angles, mzi_pair_order(params.modes)):
        block = _block_matrix(theta, phi)
        u[[i, j], :] = block @ u[[i, j], :]
    phases = np.exp(1j * np.asarray(params.output_phases))
    return phases[:, None] * u


def build_unitary_and_gradients(params):
    """The mesh unitary and dU/dp for every flattened parameter.

    Returns (u, du) with du of shape (M*M, M, M) in flattened-parameter order.
    Uses prefix/suffix block products, so the cost is O(blocks * M^3) overall.
    """
    modes = params.modes
    pairs = mzi_pair_order(modes)
    n_blocks = len(pairs)

    prefix = [np.eye(modes, dtype=np.complex128)]
    for (theta, phi), pair in zip(params.mzi_angles, pairs):
        prefix.append(_embed(_block_matrix(theta, phi), pair, modes) @ prefix[-1])
    product = prefix[-1]

    suffix = [np.eye(modes, dtype=np.complex128)] * (n_blocks + 1)
    acc = np.eye(modes, dtype=np.complex128)
    for t in range(n_blocks - 1, -1, -1):
        suffix[t + 1] = acc
        theta, phi = params.mzi_angles[t]
        acc = acc @ _embed(_block_matrix(theta, phi), pairs[t], modes)
    suffix[0] = acc  # full block product again; unused but kept consistent

    phases = np.exp(1j * np.asarray(params.output_phases))
    u = phases[:, None] * product

    du = np.zeros((n_parameters(modes), modes, modes), dtype=np.complex128)
    for t, ((theta, phi), pair) in enumerate(zip(params.mzi_angles, pairs)):
        c, s = math.cos(theta), math.sin(theta)
        e = complex(math.cos(phi), math.sin(phi))
        d_theta = np.array([[-e * s, -c], [e * c, -s]], dtype=np.complex128)
        d_phi = np.array([[1j * e * c, 0.0], [1j * e * s, 0.0]], dtype=np.complex128)
        left = suffix[t + 1]
        right = prefix[t]
        for slot, d2 in ((2 * t, d_theta), (2 * t + 1, d_phi)):
            # derivative block embedded with zeros (not identity) elsewhere
            middle = np.zeros((modes, modes), dtype=np.complex128)
            i, j = pair
            middle[i, i], middle[i, j] = d2[0, 0], d2[0, 1]
            middle[j, i], middle[j, j] = d2[1, 0], d2[1, 1]
            du[slot] = phases[:, None] * (left @ middle @ right)
    for j in range(modes):
        du[2 * n_blocks + j, j, :] = 1j * u[j, :]
    return u, du


def save_angles(params, path):
    """Write the angle JSON file (atomic: temp file then rename)."""
    doc = {
        "modes": params.modes,
        "mzi_angles": [[theta, phi] for theta, phi in params.mzi_angles],
        "output_phases": list(params.output_phases),
    }
    tmp = f"{path}.tmp"
    with open(tmp, "w") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")
    os.replace(tmp, path)


def load_angles(path):
    """Read an angle JSON file written by :func:`save_angles`."""
    try:
        with open(path) as fh:
            doc = json.load(fh)
        return MeshParams(
            modes=int(doc["modes"]),
            mzi_angles=tuple((float(t), float(p)) for t, p in doc["mzi_angles"]),
            output_phases=tuple(float(p) for p in doc["output_phases"]),
        )
    except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        raise ValidationError(f"malformed angle file {path}: {exc}") from exc
