"""Dense complex linear algebra for multi-qubit operators.

Operators are plain complex numpy arrays; superoperators are (d*d, d*d)
matrices acting on column-stacked ("vec") operators. All spectral-norm
statements about superoperators are basis independent across orthonormal
operator bases, so the column-stacking representation reports the same
norm as the normalized-Pauli-string basis.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import reduce

import numpy as np

PAULI = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex),
    "Y": np.array([[0.0, -1.0j], [1.0j, 0.0]], dtype=complex),
    "Z": np.array([[1.0, 0.0], [0.0, -1.0]], dtype=complex),
}


class OperatorError(ValueError):
    """Malformed operator input (dimension mismatch, non-Hermitian, ...)."""


def pauli_string(factors, n_qubits: int) -> np.ndarray:
    """Tensor product of Pauli factors on 1-based sites, identity elsewhere.

    ``factors`` is an iterable of ``(site, axis)`` with axis in {X, Y, Z}.
    """
    sites = [s for s, _ in factors]
    if len(set(sites)) != len(sites):
        raise OperatorError(f"duplicate site in {sites}")
    ops = [PAULI["I"]] * n_qubits
    for site, axis in factors:
        if not 1 <= site <= n_qubits:
            raise OperatorError(f"site {site} out of range [1, {n_qubits}]")
        ops[site - 1] = PAULI[axis]
    return reduce(np.kron, ops) if n_qubits else np.eye(1, dtype=complex)


def is_hermitian(op: np.ndarray, tol: float = 1e-10) -> bool:
    scale = max(np.linalg.norm(op, 2), 1.0)
    return np.linalg.norm(op - op.conj().T, 2) <= tol * scale


def unitary_exp(gen: np.ndarray, theta: float) -> np.ndarray:
    """exp(i*theta*gen) for Hermitian gen, via eigendecomposition."""
    if not is_hermitian(gen):
        raise OperatorError("generator is not Hermitian")
    w, v = np.linalg.eigh(gen)
    return (v * np.exp(1j * theta * w)) @ v.conj().T


def expm_hermitian(h: np.ndarray, t: float) -> np.ndarray:
    """exp(-i*h*t) for Hermitian h."""
    return unitary_exp(h, -t)


@dataclass
class SpectralDecomposition:
    """Distinct eigenvalues with degeneracy-grouped orthogonal projectors."""

    eigenvalues: np.ndarray          # ascending distinct values
    projectors: list                 # matching rank-d_e projectors

    def reconstruct(self) -> np.ndarray:
        return sum(e * p for e, p in zip(self.eigenvalues, self.projectors))

    def propagator(self, t: float) -> np.ndarray:
        """exp(-i*H*t) assembled from the projectors (exactly unitary)."""
        return sum(np.exp(-1j * e * t) * p for e, p in zip(self.eigenvalues, self.projectors))


def hermitian_eig(h: np.ndarray, gap_rtol: float = 1e-8) -> SpectralDecomposition:
    """Eigendecomposition with eigenvalues clustered at relative gap gap_rtol.

    The target spectra here are exactly degenerate, so clustering only has
    to absorb eigensolver roundoff.
    """
    if not is_hermitian(h):
        raise OperatorError("matrix is not Hermitian")
    w, v = np.linalg.eigh(h)
    scale = max(abs(w[0]), abs(w[-1]), 1e-300)
    tol = gap_rtol * scale if scale > 0 else 1e-12
    groups = [[0]]
    for i in range(1, len(w)):
        if w[i] - w[groups[-1][-1]] <= tol:
            groups[-1].append(i)
        else:
            groups.append([i])
    eigenvalues = np.array([np.mean(w[g]) for g in groups])
    projectors = []
    for g in groups:
        vg = v[:, g]
        projectors.append(vg @ vg.conj().T)
    return SpectralDecomposition(eigenvalues, projectors)


def trace_distance(rho: np.ndarray, sigma: np.ndarray) -> float:
    """(1/2)||rho - sigma||_1 for Hermitian arguments."""
    if rho.shape != sigma.shape:
        raise OperatorError(f"dimension mismatch {rho.shape} vs {sigma.shape}")
    ev = np.linalg.eigvalsh(rho - sigma)
    return 0.5 * float(np.sum(np.abs(ev)))


def partial_trace(rho_joint: np.ndarray, dims, keep) -> np.ndarray:
    """Trace out all subsystems not listed in ``keep`` (indices into dims)."""
    dims = list(dims)
    d_total = int(np.prod(dims))
    if rho_joint.shape != (d_total, d_total):
        raise OperatorError(f"dims {dims} inconsistent with shape {rho_joint.shape}")
    keep = sorted(set(keep))
    if not keep:
        raise OperatorError("keep must be non-empty")
    n = len(dims)
    rho = rho_joint.reshape(dims + dims)
    # contract traced-out pairs from the highest index down so positions of
    # the remaining axes are unaffected
    m = n
    for i in sorted((i for i in range(n) if i not in keep), reverse=True):
        rho = np.trace(rho, axis1=i, axis2=m + i)
        m -= 1
    d_keep = int(np.prod([dims[i] for i in keep]))
    return rho.reshape(d_keep, d_keep)


# -- superoperators (column-stacking convention: vec(AXB) = (B^T (x) A) vec X)


@dataclass
class SuperOperator:
    """d^2 x d^2 matrix on column-stacked operators."""

    matrix: np.ndarray
    dim: int

    def __add__(self, other: "SuperOperator") -> "SuperOperator":
        return SuperOperator(self.matrix + other.matrix, self.dim)

    def apply(self, x: np.ndarray) -> np.ndarray:
        return unvec(self.matrix @ vec(x), self.dim)


def vec(x: np.ndarray) -> np.ndarray:
    """Column-stack a matrix into a vector."""
    return x.reshape(-1, order="F")


def unvec(v: np.ndarray, dim: int) -> np.ndarray:
    return v.reshape(dim, dim, order="F")


def sandwich_superop(left: np.ndarray, right: np.ndarray) -> SuperOperator:
    """The map X -> left @ X @ right."""
    return SuperOperator(np.kron(right.T, left), left.shape[0])


def left_superop(op: np.ndarray) -> SuperOperator:
    return sandwich_superop(op, np.eye(op.shape[0]))


def right_superop(op: np.ndarray) -> SuperOperator:
    return sandwich_superop(np.eye(op.shape[0]), op)


def zero_superop(dim: int) -> SuperOperator:
    return SuperOperator(np.zeros((dim * dim, dim * dim), dtype=complex), dim)


def hermitian_adjoint_superop(s: SuperOperator) -> SuperOperator:
    """The map X -> [S(X^dag)]^dag.

    For a map built from left-multiplications this returns the matching
    right-multiplications by the adjoints, which is the sense in which the
    third channel-difference map equals the dagger of the second.
    """
    d = s.dim
    t = s.matrix.reshape(d, d, d, d)        # [(b,a),(c,dd)] with vec idx = col*d + row
    t2 = np.conj(np.transpose(t, (1, 0, 3, 2)))
    return SuperOperator(t2.reshape(d * d, d * d), d)


def superop_norm(s: SuperOperator) -> float:
    """Spectral norm of the superoperator matrix (orthonormal operator basis)."""
    return float(np.linalg.norm(s.matrix, 2))


def apply_superop(s: SuperOperator, x: np.ndarray) -> np.ndarray:
    return s.apply(x)
