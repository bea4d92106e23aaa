"""Dense operator algebra on multipartite Hilbert spaces.

All operators carry a tuple of subsystem dimensions.  Index convention: the
first listed subsystem is the most significant tensor factor, which is the
ordering produced by ``np.kron``.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import DimensionMismatch, NonHermitianInput, SchemaError

HERM_TOL = 1e-9
EIG_TOL = 1e-10


@dataclass(frozen=True, eq=False)
class SubsystemOperator:
    """Complex square matrix tagged with subsystem dimensions."""

    matrix: np.ndarray
    dims: tuple[int, ...]

    def __post_init__(self):
        dims = tuple(int(d) for d in self.dims)
        if not dims or any(d < 1 for d in dims):
            raise DimensionMismatch(f"invalid subsystem dimensions {dims}")
        m = np.array(self.matrix, dtype=complex)
        side = math.prod(dims)
        if m.shape != (side, side):
            raise DimensionMismatch(
                f"matrix shape {m.shape} does not match dims {dims} (expected {side}x{side})"
            )
        if not np.all(np.isfinite(m)):
            raise ValueError("operator has non-finite entries")
        m.flags.writeable = False
        object.__setattr__(self, "matrix", m)
        object.__setattr__(self, "dims", dims)

    @property
    def size(self) -> int:
        return self.matrix.shape[0]

    @property
    def n_subsystems(self) -> int:
        return len(self.dims)

    def dag(self) -> "SubsystemOperator":
        return SubsystemOperator(self.matrix.conj().T, self.dims)

    def trace(self) -> complex:
        return complex(np.trace(self.matrix))

    def hermiticity_violation(self) -> float:
        return float(np.max(np.abs(self.matrix - self.matrix.conj().T), initial=0.0))

    def is_hermitian(self, tol: float = HERM_TOL) -> bool:
        scale = max(1.0, float(np.max(np.abs(self.matrix), initial=0.0)))
        return self.hermiticity_violation() <= tol * scale

    def reshaped(self) -> np.ndarray:
        """View as a tensor with one row index and one column index per subsystem."""
        return self.matrix.reshape(self.dims + self.dims)

    def scaled(self, c) -> "SubsystemOperator":
        return SubsystemOperator(c * self.matrix, self.dims)

    def __add__(self, other):
        _check_same_dims(self, other)
        return SubsystemOperator(self.matrix + other.matrix, self.dims)

    def __sub__(self, other):
        _check_same_dims(self, other)
        return SubsystemOperator(self.matrix - other.matrix, self.dims)

    def __matmul__(self, other):
        _check_same_dims(self, other)
        return SubsystemOperator(self.matrix @ other.matrix, self.dims)

    def __repr__(self):
        return f"SubsystemOperator(dims={self.dims})"


@dataclass(frozen=True, eq=False)
class HermitianSpectrum:
    eigenvalues: np.ndarray  # ascending
    eigenvectors: np.ndarray  # columns

    @property
    def lambda_min(self) -> float:
        return float(self.eigenvalues[0])

    @property
    def lambda_max(self) -> float:
        return float(self.eigenvalues[-1])

    def reconstruct(self) -> np.ndarray:
        v = self.eigenvectors
        return (v * self.eigenvalues) @ v.conj().T


def _check_same_dims(a: SubsystemOperator, b: SubsystemOperator):
    if a.dims != b.dims:
        raise DimensionMismatch(f"dims {a.dims} and {b.dims} differ")


def as_operator(x, dims: Sequence[int] | None = None) -> SubsystemOperator:
    """Coerce an array (or operator) into a :class:`SubsystemOperator`.

    A 1-D array is interpreted as a ket and turned into its projector.
    """
    if isinstance(x, SubsystemOperator):
        if dims is not None and tuple(dims) != x.dims:
            raise DimensionMismatch(f"expected dims {tuple(dims)}, got {x.dims}")
        return x
    arr = np.asarray(x, dtype=complex)
    if arr.ndim == 1:
        arr = np.outer(arr, arr.conj())
    if dims is None:
        dims = (arr.shape[0],)
    return SubsystemOperator(arr, tuple(dims))


def identity(dims: Sequence[int] | int) -> SubsystemOperator:
    dims = (dims,) if isinstance(dims, int) else tuple(dims)
    return SubsystemOperator(np.eye(math.prod(dims)), dims)


def projector(ket, dims: Sequence[int] | None = None) -> SubsystemOperator:
    ket = np.asarray(ket, dtype=complex).ravel()
    return SubsystemOperator(np.outer(ket, ket.conj()), dims or (ket.size,))


def tensor_product(*ops: SubsystemOperator) -> SubsystemOperator:
    if not ops:
        raise ValueError("tensor_product needs at least one operand")
    side = math.prod(op.size for op in ops)
    # refuse to allocate absurd dense matrices rather than fail inside numpy
    if side > 2**16:
        raise OverflowError(f"tensor product of side {side} exceeds dense storage limits")
    m = ops[0].matrix
    dims = ops[0].dims
    for op in ops[1:]:
        m = np.kron(m, op.matrix)
        dims = dims + op.dims
    return SubsystemOperator(m, dims)


def _normalize_indices(indices, n) -> list[int]:
    if isinstance(indices, (int, np.integer)):
        indices = [indices]
    out = sorted({int(i) for i in indices})
    for i in out:
        if not 0 <= i < n:
            raise DimensionMismatch(f"subsystem index {i} out of range for {n} subsystems")
    return out


def partial_trace(x: SubsystemOperator, traced: Iterable[int] | int) -> SubsystemOperator:
    """Trace out the subsystems listed in ``traced``; the rest keep their order.

    Tracing everything is rejected; use :func:`trace` for the scalar.
    """
    n = x.n_subsystems
    traced = _normalize_indices(traced, n)
    kept = [i for i in range(n) if i not in traced]
    if not kept:
        raise DimensionMismatch("cannot trace out every subsystem; use trace() for the scalar")
    t = x.reshaped()
    letters = "abcdefghijklmnopqrstuvwxyz"
    row = [letters[i] for i in range(n)]
    col = [letters[n + i] for i in range(n)]
    for i in traced:
        col[i] = row[i]
    out = "".join(row[i] for i in kept) + "".join(col[i] for i in kept)
    res = np.einsum("".join(row) + "".join(col) + "->" + out, t)
    kdims = tuple(x.dims[i] for i in kept)
    side = math.prod(kdims)
    return SubsystemOperator(res.reshape(side, side), kdims)


def trace(x: SubsystemOperator) -> complex:
    return x.trace()


def partial_transpose(x: SubsystemOperator, subsystem: int | Iterable[int]) -> SubsystemOperator:
    n = x.n_subsystems
    idx = _normalize_indices(subsystem, n)
    axes = list(range(2 * n))
    for i in idx:
        axes[i], axes[n + i] = axes[n + i], axes[i]
    res = x.reshaped().transpose(axes)
    return SubsystemOperator(res.reshape(x.size, x.size), x.dims)


def permute_subsystems(x: SubsystemOperator, perm: Sequence[int]) -> SubsystemOperator:
    """Reorder tensor factors: new subsystem ``i`` is old subsystem ``perm[i]``."""
    n = x.n_subsystems
    perm = [int(p) for p in perm]
    if sorted(perm) != list(range(n)):
        raise DimensionMismatch(f"{perm} is not a permutation of range({n})")
    axes = perm + [n + p for p in perm]
    dims = tuple(x.dims[p] for p in perm)
    res = x.reshaped().transpose(axes)
    return SubsystemOperator(res.reshape(x.size, x.size), dims)


def hermitian_eigs(x: SubsystemOperator, herm_tol: float = HERM_TOL) -> HermitianSpectrum:
    if not x.is_hermitian(herm_tol):
        v = x.hermiticity_violation()
        raise NonHermitianInput(f"operator is not Hermitian (max|X - X^dag| = {v:.3e})", v)
    m = 0.5 * (x.matrix + x.matrix.conj().T)
    w, v = np.linalg.eigh(m)
    return HermitianSpectrum(w, v)


# -- JSON ------------------------------------------------------------------

def operator_to_json(op: SubsystemOperator) -> dict:
    return {
        "dims": list(op.dims),
        "matrix": [[[float(z.real), float(z.imag)] for z in row] for row in op.matrix],
    }


def operator_from_json(payload, where: str = "operator") -> SubsystemOperator:
    """Build an operator from ``{"dims": [...], "matrix": [[[re, im], ...], ...]}``."""
    if not isinstance(payload, dict):
        raise SchemaError(f"{where}: expected an object with 'dims' and 'matrix'")
    for key in ("dims", "matrix"):
        if key not in payload:
            raise SchemaError(f"{where}: missing field '{key}'")
    dims = payload["dims"]
    if not isinstance(dims, list) or not dims or not all(
        isinstance(d, int) and not isinstance(d, bool) and d >= 1 for d in dims
    ):
        raise SchemaError(f"{where}.dims: expected a non-empty list of positive integers")
    rows = payload["matrix"]
    if not isinstance(rows, list) or not rows:
        raise SchemaError(f"{where}.matrix: expected a non-empty list of rows")
    n = len(rows)
    out = np.empty((n, n), dtype=complex)
    for i, row in enumerate(rows):
        if not isinstance(row, list) or len(row) != n:
            raise SchemaError(
                f"{where}.matrix[{i}]: expected {n} entries (matrix must be square)"
            )
        for j, z in enumerate(row):
            if (
                not isinstance(z, list)
                or len(z) != 2
                or not all(isinstance(c, (int, float)) and not isinstance(c, bool) for c in z)
            ):
                raise SchemaError(f"{where}.matrix[{i}][{j}]: expected [re, im]")
            out[i, j] = complex(z[0], z[1])
    if math.prod(dims) != n:
        raise SchemaError(
            f"{where}: dims {dims} have product {math.prod(dims)} but matrix is {n}x{n}"
        )
    try:
        return SubsystemOperator(out, tuple(dims))
    except ValueError as exc:
        raise SchemaError(f"{where}: {exc}") from exc


def load_operator(path, require_hermitian: bool = False) -> SubsystemOperator:
    with open(path) as fh:
        try:
            payload = json.load(fh)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"{path}: invalid JSON at line {exc.lineno}: {exc.msg}") from exc
    op = operator_from_json(payload, where=str(path))
    if require_hermitian and not op.is_hermitian():
        v = op.hermiticity_violation()
        raise NonHermitianInput(f"{path}: operator is not Hermitian (violation {v:.3e})", v)
    return op
