"""Retrodicted (past-state) outcome probabilities.

A past state is the pair ``(rho, E)`` of a prior density matrix and a posterior
effect.  The probability of outcome ``m`` of an intermediate measurement with
Kraus operators ``Omega_m`` is

    p(m) = Tr(Omega_m rho Omega_m^dag E) / sum_m' Tr(Omega_m' rho Omega_m'^dag E).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import (
    DimensionMismatch,
    ImpossiblePostselection,
    InvalidPovm,
    NonHermitianInput,
    SchemaError,
)
from .operators import (
    EIG_TOL,
    SubsystemOperator,
    as_operator,
    hermitian_eigs,
    operator_from_json,
    operator_to_json,
)

POVM_TOL = 1e-9
POS_TOL = 1e-9
PROB_TOL = 1e-10
DENOM_FLOOR = 1e-14


@dataclass(frozen=True, eq=False)
class Povm:
    """Measurement given by Kraus operators ``Omega_m`` on a common space."""

    ops: tuple[SubsystemOperator, ...]
    label: str = ""
    tol: float = POVM_TOL

    def __post_init__(self):
        ops = tuple(as_operator(o) for o in self.ops)
        if not ops:
            raise InvalidPovm("a POVM needs at least one outcome")
        dims = ops[0].dims
        if any(o.dims != dims for o in ops):
            raise DimensionMismatch("POVM outcome operators act on different spaces")
        object.__setattr__(self, "ops", ops)
        dev = self.completeness_violation()
        if dev > self.tol:
            raise InvalidPovm(
                f"POVM '{self.label}' is incomplete: max|sum Omega^dag Omega - 1| = {dev:.3e}"
            )

    @classmethod
    def from_matrices(cls, mats, label: str = "", dims=None) -> "Povm":
        mats = [np.asarray(m, dtype=complex) for m in mats]
        dims = tuple(dims) if dims is not None else (mats[0].shape[0],)
        return cls(tuple(SubsystemOperator(m, dims) for m in mats), label)

    @property
    def dims(self) -> tuple[int, ...]:
        return self.ops[0].dims

    @property
    def n_outcomes(self) -> int:
        return len(self.ops)

    @property
    def stack(self) -> np.ndarray:
        return np.stack([o.matrix for o in self.ops])

    def completeness_violation(self) -> float:
        s = sum(o.matrix.conj().T @ o.matrix for o in self.ops)
        return float(np.max(np.abs(s - np.eye(s.shape[0]))))

    def to_json(self) -> dict:
        return {"label": self.label, "ops": [operator_to_json(o) for o in self.ops]}

    @classmethod
    def from_json(cls, payload, where: str = "povm") -> "Povm":
        if not isinstance(payload, dict) or "ops" not in payload:
            raise SchemaError(f"{where}: expected an object with 'ops'")
        label = payload.get("label", "")
        if not isinstance(label, str):
            raise SchemaError(f"{where}.label: expected a string")
        if not isinstance(payload["ops"], list) or not payload["ops"]:
            raise SchemaError(f"{where}.ops: expected a non-empty list")
        ops = tuple(
            operator_from_json(o, where=f"{where}.ops[{i}]") for i, o in enumerate(payload["ops"])
        )
        return cls(ops, label)


def projective_povm(vectors, label: str = "") -> Povm:
    """POVM of rank-one projectors onto the columns of ``vectors``."""
    v = np.asarray(vectors, dtype=complex)
    return Povm.from_matrices([np.outer(v[:, m], v[:, m].conj()) for m in range(v.shape[1])], label)


def _min_eig(m: np.ndarray) -> float:
    return float(np.linalg.eigvalsh(0.5 * (m + m.conj().T))[0])


@dataclass(frozen=True, eq=False)
class PastState:
    """The pair ``(rho, E)``.  Overall scale of either member is irrelevant."""

    rho: SubsystemOperator
    effect: SubsystemOperator
    tol: float = POS_TOL

    def __post_init__(self):
        rho = as_operator(self.rho)
        eff = self.effect
        if not isinstance(eff, SubsystemOperator):
            eff = as_operator(eff, rho.dims)
        if rho.dims != eff.dims:
            raise DimensionMismatch(f"rho dims {rho.dims} differ from effect dims {eff.dims}")
        for name, op in (("rho", rho), ("effect", eff)):
            if not op.is_hermitian():
                v = op.hermiticity_violation()
                raise NonHermitianInput(f"{name} is not Hermitian (violation {v:.3e})", v)
            scale = float(np.max(np.abs(op.matrix)))
            if scale == 0.0:
                raise ValueError(f"{name} is the zero operator")
            if _min_eig(op.matrix) < -self.tol * scale:
                raise ValueError(f"{name} is not positive semidefinite")
        if rho.trace().real <= 0:
            raise ValueError("rho must have positive trace")
        object.__setattr__(self, "rho", rho)
        object.__setattr__(self, "effect", eff)

    @classmethod
    def from_vectors(cls, psi, e, dims: Sequence[int] | None = None) -> "PastState":
        psi = np.asarray(psi, dtype=complex).ravel()
        e = np.asarray(e, dtype=complex).ravel()
        dims = tuple(dims) if dims is not None else (psi.size,)
        return cls(
            SubsystemOperator(np.outer(psi, psi.conj()), dims),
            SubsystemOperator(np.outer(e, e.conj()), dims),
        )

    @property
    def dims(self) -> tuple[int, ...]:
        return self.rho.dims


@dataclass(frozen=True, eq=False)
class Observable:
    """Hermitian observable with degenerate eigenvalues merged into one projector."""

    matrix: SubsystemOperator
    eigenvalues: np.ndarray = field(init=False)
    projectors: tuple[np.ndarray, ...] = field(init=False)

    def __post_init__(self):
        op = as_operator(self.matrix)
        spec = hermitian_eigs(op)
        w, v = spec.eigenvalues, spec.eigenvectors
        tol = 1e-8 * max(1.0, float(np.max(np.abs(w))))
        groups: list[list[int]] = [[0]]
        for i in range(1, len(w)):
            if w[i] - w[groups[-1][0]] <= tol:
                groups[-1].append(i)
            else:
                groups.append([i])
        vals = np.array([w[g].mean() for g in groups])
        projs = tuple(v[:, g] @ v[:, g].conj().T for g in groups)
        object.__setattr__(self, "matrix", op)
        object.__setattr__(self, "eigenvalues", vals)
        object.__setattr__(self, "projectors", projs)

    @property
    def povm(self) -> Povm:
        return Povm(tuple(SubsystemOperator(p, self.matrix.dims) for p in self.projectors), "observable")


@dataclass(frozen=True, eq=False)
class ProbabilityTable:
    """Rows are measurement settings, columns are outcomes."""

    probs: np.ndarray
    labels: tuple[str, ...] = ()

    def __post_init__(self):
        p = np.asarray(self.probs, dtype=float)
        if p.ndim != 2:
            raise ValueError("probability table must be two-dimensional")
        if np.any(np.abs(p.sum(axis=1) - 1.0) > 1e-8):
            raise ValueError("probability table rows must sum to one")
        object.__setattr__(self, "probs", p)

    @property
    def n_settings(self) -> int:
        return self.probs.shape[0]


# -- core probabilities ----------------------------------------------------

def _weights(rho: np.ndarray, eff: np.ndarray, ops: np.ndarray) -> np.ndarray:
    # Tr(Om rho Om^dag E) for each m; nonnegative for positive rho, E up to rounding
    x = ops @ rho @ np.conj(np.swapaxes(ops, 1, 2))
    return np.maximum(np.einsum("mil,li->m", x, eff).real, 0.0)


def _normalize(w: np.ndarray, floor: float) -> np.ndarray:
    total = w.sum()
    if total <= floor:
        raise ImpossiblePostselection(
            f"postselection probability {total:.3e} is below the floor {floor:.3e}"
        )
    return w / total


def _floor(past: PastState) -> float:
    return DENOM_FLOOR * past.rho.trace().real * past.effect.trace().real


def past_probs(past: PastState, povm: Povm) -> np.ndarray:
    if past.dims != povm.dims:
        raise DimensionMismatch(f"past state dims {past.dims} differ from POVM dims {povm.dims}")
    w = _weights(past.rho.matrix, past.effect.matrix, povm.stack)
    return _normalize(w, _floor(past))


def local_ops(povm: Povm, dims: tuple[int, ...]) -> np.ndarray:
    """Extend ``povm`` acting on the leading subsystems by identities on the rest."""
    k = len(povm.dims)
    if tuple(dims[:k]) != povm.dims or k > len(dims):
        raise DimensionMismatch(f"POVM dims {povm.dims} are not a leading factor of {dims}")
    rest = math.prod(dims[k:])
    eye = np.eye(rest)
    return np.stack([np.kron(o.matrix, eye) for o in povm.ops])


def past_probs_local(past: PastState, povm: Povm) -> np.ndarray:
    """Outcome probabilities of a measurement on A for a past state on A x B."""
    if len(past.dims) < 2:
        raise DimensionMismatch("past_probs_local expects a multipartite past state")
    ops = local_ops(povm, past.dims)
    w = _weights(past.rho.matrix, past.effect.matrix, ops)
    return _normalize(w, _floor(past))


def _probs_auto(past: PastState, povm: Povm) -> np.ndarray:
    if past.dims == povm.dims:
        return past_probs(past, povm)
    return past_probs_local(past, povm)


def probability_table(past: PastState, povms: Sequence[Povm]) -> ProbabilityTable:
    rows = [_probs_auto(past, p) for p in povms]
    if len({len(r) for r in rows}) != 1:
        raise ValueError("all settings must have the same number of outcomes")
    return ProbabilityTable(np.array(rows), tuple(p.label for p in povms))


def past_moments(past: PastState, obs: Observable) -> tuple[float, float]:
    """Retrodicted mean and variance of ``obs`` (measured on the leading subsystems)."""
    p = _probs_auto(past, obs.povm)
    lam = obs.eigenvalues
    mean = float(lam @ p)
    var = float((lam**2) @ p - mean**2)
    return mean, max(var, 0.0) if var > -PROB_TOL else var


# -- generalized convexity -------------------------------------------------

def spectral_ensemble(op) -> tuple[np.ndarray, np.ndarray]:
    """Eigen-ensemble ``(weights, vectors)`` of a positive operator; vectors are columns."""
    op = as_operator(op)
    spec = hermitian_eigs(op)
    keep = spec.eigenvalues > EIG_TOL * max(1.0, spec.lambda_max)
    return spec.eigenvalues[keep].copy(), spec.eigenvectors[:, keep].copy()


@dataclass(frozen=True, eq=False)
class QuasiconvexDecomposition:
    """``p(m) = sum_xy state_weights[x] effect_weights[x, y] components[x, y, m]``."""

    state_weights: np.ndarray  # p'_x
    effect_weights: np.ndarray  # q'_xy
    components: np.ndarray  # p(m | x, y); rows of excluded components are zero
    valid: np.ndarray  # bool mask of components with nonzero denominator

    def reconstruct(self) -> np.ndarray:
        return np.einsum("x,xy,xym->m", self.state_weights, self.effect_weights, self.components)

    def joint_weights(self) -> np.ndarray:
        return self.state_weights[:, None] * self.effect_weights


def quasiconvex_decompose(rho_ensemble, effect_ensemble, povm: Povm) -> QuasiconvexDecomposition:
    """Rewrite the retrodicted distribution as a convex mixture over pure components.

    Ensembles are ``(weights, vectors)`` with vectors stored as columns.  The
    POVM may act on the whole space or on its leading factor only, in which case
    ``dims`` of the full space are inferred as ``povm.dims + (rest,)``.
    """
    p_x, psi = (np.asarray(a) for a in rho_ensemble)
    q_y, evs = (np.asarray(a) for a in effect_ensemble)
    psi = psi.reshape(psi.shape[0], -1) if psi.ndim == 2 else psi.reshape(-1, 1)
    evs = evs.reshape(evs.shape[0], -1) if evs.ndim == 2 else evs.reshape(-1, 1)
    if np.any(p_x < 0) or np.any(q_y < 0):
        raise ValueError("ensemble weights must be nonnegative")
    n = psi.shape[0]
    if evs.shape[0] != n:
        raise DimensionMismatch("state and effect ensembles live on different spaces")
    side = math.prod(povm.dims)
    if side == n:
        ops = povm.stack
    elif n % side == 0:
        ops = local_ops(povm, povm.dims + (n // side,))
    else:
        raise DimensionMismatch(f"POVM of size {side} does not fit a space of size {n}")

    # alpha[x, y, m] = |<e_y| Omega_m |psi_x>|^2
    amp = np.einsum("iy,mij,jx->xym", evs.conj(), ops, psi)
    alpha = np.abs(amp) ** 2
    a_xy = alpha.sum(axis=2)
    scale = float(np.max(a_xy, initial=0.0))
    valid = a_xy > DENOM_FLOOR * max(scale, 1e-300)
    comps = np.zeros_like(alpha)
    comps[valid] = alpha[valid] / a_xy[valid][:, None]

    qa = np.where(valid, q_y[None, :] * a_xy, 0.0)
    a_x = qa.sum(axis=1)
    if not np.any(a_x > 0):
        raise ImpossiblePostselection("every component of the decomposition has zero weight")
    with np.errstate(invalid="ignore", divide="ignore"):
        q_prime = np.where(a_x[:, None] > 0, qa / a_x[:, None], 0.0)
    p_tilde = p_x * a_x
    p_prime = p_tilde / p_tilde.sum()
    return QuasiconvexDecomposition(p_prime, q_prime, comps, valid)


# -- environment compression -----------------------------------------------

def compress_environment(psi, e, d: int, D: int) -> tuple[np.ndarray, np.ndarray]:
    """Replace a pure past state on C^d x C^D by one on C^d x C^d with the same
    local retrodicted statistics on the first factor.

    Both vectors are Schmidt decomposed; the overlaps ``M_ab = <hat psi_a|hat e_b>``
    of their environment parts are refactored as ``M = A^dag B`` (QR), whose
    columns serve as new environment vectors in C^d.
    """
    if D < d:
        raise DimensionMismatch(f"environment dimension {D} is smaller than system dimension {d}")
    psi = np.asarray(psi, dtype=complex).reshape(d, D)
    e = np.asarray(e, dtype=complex).reshape(d, D)

    def schmidt(m):
        u, s, vh = np.linalg.svd(m, full_matrices=False)
        return u * s, vh  # system parts as columns, environment parts as rows of vh

    sys_psi, env_psi = schmidt(psi)
    sys_e, env_e = schmidt(e)
    # env_psi[a, c] is the c-th component of |hat psi_a>
    overlap = env_psi.conj() @ env_e.T  # M_ab
    q, r = np.linalg.qr(overlap)
    # rows are the new environment vectors: A = q^dag, B = r, so A^dag B = M
    env_psi_new = q.conj()
    env_e_new = r.T
    psi_new = sys_psi @ env_psi_new
    e_new = sys_e @ env_e_new
    psi_new = psi_new.ravel() / np.linalg.norm(psi_new)
    e_new = e_new.ravel() / np.linalg.norm(e_new)
    return psi_new, e_new
