"""Torsion tensors as flat component vectors.

A torsion tensor T^c_[ab] (antisymmetric in the lower pair) is stored as the
flat vector of its independent components, pairs (a, b) with a < b in
lexicographic order, the upper index c varying fastest:

    comps[q * n + c] = T^c_[ab],   q = index of (a, b) in pair_indices(n)

The Euclidean norm of ``comps`` is the torsion norm **only** when the
components refer to an orthonormal basis of the averaged metric; the
``frame`` tag records which basis the components live in.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

FRAME_ORTHONORMAL = "orthonormal"
FRAME_CHART = "chart"


def pair_indices(n: int) -> list[tuple[int, int]]:
    """Lexicographic list of index pairs (a, b) with a < b."""
    return [(a, b) for a in range(n) for b in range(a + 1, n)]


def torsion_dim(n: int) -> int:
    """Number of independent torsion components: n * C(n, 2)."""
    return n * n * (n - 1) // 2


def comps_to_full(comps: np.ndarray, n: int) -> np.ndarray:
    """Expand flat components to the full antisymmetric array T[c, a, b]."""
    comps = np.asarray(comps, dtype=float)
    full = np.zeros((n, n, n))
    for q, (a, b) in enumerate(pair_indices(n)):
        for c in range(n):
            full[c, a, b] = comps[q * n + c]
            full[c, b, a] = -comps[q * n + c]
    return full


def full_to_comps(full: np.ndarray) -> np.ndarray:
    """Extract flat components from a full array T[c, a, b] (a < b part)."""
    full = np.asarray(full, dtype=float)
    n = full.shape[0]
    comps = np.empty(torsion_dim(n))
    for q, (a, b) in enumerate(pair_indices(n)):
        comps[q * n : q * n + n] = full[:, a, b]
    return comps


@dataclass(eq=False)
class TorsionTensor:
    """Flat torsion components with the basis they refer to.

    Attributes
    ----------
    dim : int
        Chart dimension n.
    comps : ndarray, shape (n * n * (n-1) / 2,)
        Independent components, see module docstring for the layout.
    frame : str
        FRAME_ORTHONORMAL or FRAME_CHART.
    """

    dim: int
    comps: np.ndarray
    frame: str = FRAME_ORTHONORMAL

    def __post_init__(self):
        self.comps = np.asarray(self.comps, dtype=float).reshape(-1)
        if self.comps.size != torsion_dim(self.dim):
            raise ValueError(
                f"expected {torsion_dim(self.dim)} components for dim {self.dim}, got {self.comps.size}"
            )

    @property
    def norm(self) -> float:
        """Euclidean component norm; equals the torsion norm in an
        orthonormal basis of the averaged metric."""
        return float(np.linalg.norm(self.comps))

    def to_full(self) -> np.ndarray:
        return comps_to_full(self.comps, self.dim)

    @classmethod
    def from_full(cls, full: np.ndarray, frame: str = FRAME_ORTHONORMAL) -> "TorsionTensor":
        full = np.asarray(full, dtype=float)
        return cls(dim=full.shape[0], comps=full_to_comps(full), frame=frame)

    @classmethod
    def zero(cls, dim: int, frame: str = FRAME_ORTHONORMAL) -> "TorsionTensor":
        return cls(dim=dim, comps=np.zeros(torsion_dim(dim)), frame=frame)


def transform_full(full: np.ndarray, basis: np.ndarray, basis_inv: np.ndarray) -> np.ndarray:
    """Components of a (1,2)-tensor after the change of basis e'_a = basis @ e_a.

    ``full`` holds components in the old basis; the result holds components
    in the primed basis: T'[c, a, b] = basis_inv[c, k] T[k, i, j] basis[i, a] basis[j, b].
    """
    return np.einsum("ck,kij,ia,jb->cab", basis_inv, full, basis, basis)


def torsion_to_chart(t: TorsionTensor, basis: np.ndarray) -> TorsionTensor:
    """Convert orthonormal-frame components to chart components.

    ``basis`` is the matrix whose columns are the orthonormal frame vectors
    in chart coordinates.
    """
    if t.frame == FRAME_CHART:
        return t
    basis_inv = np.linalg.inv(basis)
    full_chart = transform_full(t.to_full(), basis_inv, basis)
    return TorsionTensor.from_full(full_chart, frame=FRAME_CHART)


def torsion_to_orthonormal(t: TorsionTensor, basis: np.ndarray) -> TorsionTensor:
    """Convert chart components to orthonormal-frame components."""
    if t.frame == FRAME_ORTHONORMAL:
        return t
    basis_inv = np.linalg.inv(basis)
    full_frame = transform_full(t.to_full(), basis, basis_inv)
    return TorsionTensor.from_full(full_frame, frame=FRAME_ORTHONORMAL)
