"""Sparse operators on the Fock (x) (two-level)^N composite space.

Basis ordering is frozen: the Fock index varies slowest, then emitter 1, ...,
emitter N fastest. Each two-level factor is ordered (excited, ground), so
``sigma_z = diag(+1, -1)``.

Vectorization is column stacking, ``vec(A rho B) = (B^T kron A) vec(rho)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property, lru_cache
from itertools import product

import numpy as np
import scipy.sparse as sp

EXCITED, GROUND = 0, 1

_SIGMA = {
    "z": np.array([[1.0, 0.0], [0.0, -1.0]], dtype=complex),
    "plus": np.array([[0.0, 1.0], [0.0, 0.0]], dtype=complex),
    "minus": np.array([[0.0, 0.0], [1.0, 0.0]], dtype=complex),
}


@dataclass(frozen=True)
class HilbertSpec:
    """Layout of the composite space.

    With ``sector_cap = k`` only basis states whose photon number plus number
    of excited emitters is at most ``k`` are kept.
    """

    n_max: int
    n_emitters: int
    sector_cap: int | None = None

    def __post_init__(self):
        if self.n_max < 0:
            raise ValueError(f"n_max must be >= 0, got {self.n_max}")
        if self.n_emitters < 0:
            raise ValueError(f"n_emitters must be >= 0, got {self.n_emitters}")
        if self.sector_cap is not None and self.sector_cap < 0:
            raise ValueError(f"sector_cap must be >= 0, got {self.sector_cap}")

    @property
    def full_dim(self) -> int:
        return (self.n_max + 1) * 2**self.n_emitters

    @cached_property
    def full_basis(self) -> tuple[tuple[int, tuple[int, ...]], ...]:
        """All (photon number, emitter levels) labels in frozen order."""
        levels = list(product((EXCITED, GROUND), repeat=self.n_emitters))
        return tuple((n, lv) for n in range(self.n_max + 1) for lv in levels)

    @cached_property
    def retained(self) -> np.ndarray:
        """Full-space indices of the basis states kept by the sector cap."""
        if self.sector_cap is None:
            return np.arange(self.full_dim)
        keep = [
            i
            for i, (n, lv) in enumerate(self.full_basis)
            if n + lv.count(EXCITED) <= self.sector_cap
        ]
        return np.array(keep, dtype=int)

    @property
    def dim(self) -> int:
        return len(self.retained)

    @property
    def truncated(self) -> bool:
        return self.sector_cap is not None and self.dim < self.full_dim

    @cached_property
    def basis(self) -> tuple[tuple[int, tuple[int, ...]], ...]:
        return tuple(self.full_basis[i] for i in self.retained)

    def index(self, n_photons: int, excited: tuple[int, ...] | set[int] = ()) -> int:
        """Index of ``|n, ...>`` with the listed emitters (1-based) excited."""
        lv = tuple(EXCITED if j + 1 in set(excited) else GROUND for j in range(self.n_emitters))
        try:
            return self.basis.index((n_photons, lv))
        except ValueError:
            raise ValueError(f"state |{n_photons}, excited={sorted(excited)}> not in basis") from None

    def full(self) -> "HilbertSpec":
        return HilbertSpec(self.n_max, self.n_emitters)


def sector_project(spec: HilbertSpec) -> tuple[np.ndarray, sp.csr_matrix, sp.csr_matrix]:
    """Return (retained indices, injection, restriction) for a truncated spec.

    The injection maps truncated amplitudes into the full space (full_dim x
    dim); the restriction is its transpose.
    """
    idx = spec.retained
    inject = sp.csr_matrix(
        (np.ones(len(idx)), (idx, np.arange(len(idx)))), shape=(spec.full_dim, len(idx))
    )
    return idx, inject, inject.T.tocsr()


def restrict(spec: HilbertSpec, op: sp.spmatrix) -> sp.csr_matrix:
    """Compress a full-space operator onto the retained sector states."""
    op = sp.csr_matrix(op, dtype=complex)
    if spec.sector_cap is None:
        return op
    idx = spec.retained
    return op[idx][:, idx].tocsr()


def _embed(spec: HilbertSpec, fock_op, emitter_ops: dict[int, np.ndarray]) -> sp.csr_matrix:
    factors = [sp.identity(spec.n_max + 1, format="csr") if fock_op is None else sp.csr_matrix(fock_op)]
    for j in range(1, spec.n_emitters + 1):
        factors.append(sp.csr_matrix(emitter_ops[j]) if j in emitter_ops else sp.identity(2, format="csr"))
    out = factors[0]
    for f in factors[1:]:
        out = sp.kron(out, f, format="csr")
    return restrict(spec, out)


@lru_cache(maxsize=256)
def _cached(spec: HilbertSpec, kind: str, j: int = 0) -> sp.csr_matrix:
    if kind == "a":
        ladder = sp.diags(np.sqrt(np.arange(1, spec.n_max + 1)), 1, dtype=complex)
        return _embed(spec, ladder, {})
    if kind == "n":
        return _embed(spec, sp.diags(np.arange(spec.n_max + 1, dtype=complex)), {})
    return _embed(spec, None, {j: _SIGMA[kind]})


# operators are cached per spec; callers get copies so the cache stays intact
def annihilation(spec: HilbertSpec) -> sp.csr_matrix:
    if spec.n_max < 1:
        raise ValueError("annihilation operator needs n_max >= 1")
    return _cached(spec, "a").copy()


def creation(spec: HilbertSpec) -> sp.csr_matrix:
    return dagger(annihilation(spec))


def number(spec: HilbertSpec) -> sp.csr_matrix:
    return _cached(spec, "n").copy()


def pauli(spec: HilbertSpec, which: str, j: int) -> sp.csr_matrix:
    """Pauli operator ``which`` in {z, plus, minus} acting on emitter ``j`` (1-based)."""
    if which not in _SIGMA:
        raise ValueError(f"unknown Pauli operator {which!r}; expected one of {sorted(_SIGMA)}")
    if not 1 <= j <= spec.n_emitters:
        raise IndexError(f"emitter index {j} out of range 1..{spec.n_emitters}")
    return _cached(spec, which, j).copy()


def identity(spec: HilbertSpec) -> sp.csr_matrix:
    return sp.identity(spec.dim, dtype=complex, format="csr")


def excitation_number(spec: HilbertSpec) -> sp.csr_matrix:
    """Total excitation ``a^dag a + sum_j sigma_+ sigma_-``."""
    op = number(spec)
    for j in range(1, spec.n_emitters + 1):
        op = op + pauli(spec, "plus", j) @ pauli(spec, "minus", j)
    return op.tocsr()


def dagger(op):
    return op.conj().T.tocsr() if sp.issparse(op) else np.conj(op).T


def vectorize(rho: np.ndarray) -> np.ndarray:
    rho = np.asarray(rho)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {rho.shape}")
    return rho.reshape(-1, order="F")


def devectorize(vec: np.ndarray, dim: int | None = None) -> np.ndarray:
    vec = np.asarray(vec)
    if dim is None:
        dim = int(round(np.sqrt(vec.size)))
    if vec.ndim != 1 or vec.size != dim * dim:
        raise ValueError(f"vector of length {vec.size} does not hold a {dim}x{dim} matrix")
    return vec.reshape(dim, dim, order="F")


def basis_density(spec: HilbertSpec, n_photons: int, excited=()) -> np.ndarray:
    """Pure-state projector onto a product basis state."""
    rho = np.zeros((spec.dim, spec.dim), dtype=complex)
    i = spec.index(n_photons, tuple(excited))
    rho[i, i] = 1.0
    return rho


def ket_density(ket: np.ndarray) -> np.ndarray:
    ket = np.asarray(ket, dtype=complex)
    ket = ket / np.linalg.norm(ket)
    return np.outer(ket, ket.conj())
