"""The reduced past-state operator on two copies of subsystem A.

For a past state ``(rho, E)`` on A x B the operator

    Xi = Tr_B[(rho_AB (x) 1_A2)(1_A1 (x) E_BA2)]

acts on A1 x A2 and reproduces every retrodicted probability of measurements
on A.  A negative eigenvalue of ``Xi`` certifies that ``rho`` or ``E`` is
entangled across A|B.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, ImpossiblePostselection
from .operators import (
    SubsystemOperator,
    as_operator,
    hermitian_eigs,
    partial_trace,
    partial_transpose,
)
from .retrodiction import DENOM_FLOOR, PastState, Povm
from .sampling import make_rng, random_density

XI_TOL = 1e-9
NEG_TOL = 1e-10
EXPAND_TOL = 1e-10


@dataclass(frozen=True, eq=False)
class ReducedPastState:
    xi: SubsystemOperator
    provenance: str = ""

    @property
    def d_a(self) -> int:
        return self.xi.dims[0]

    @property
    def matrix(self) -> np.ndarray:
        return self.xi.matrix

    def spectrum(self):
        return hermitian_eigs(self.xi)

    def normalized(self) -> "ReducedPastState":
        tr = self.xi.trace().real
        if tr == 0:
            raise ZeroDivisionError("reduced past state has zero trace")
        return ReducedPastState(self.xi.scaled(1.0 / tr), self.provenance)


def _split(past_dims) -> tuple[int, int]:
    if len(past_dims) < 2:
        raise DimensionMismatch(f"expected a bipartite past state, got dims {past_dims}")
    return past_dims[0], math.prod(past_dims[1:])


def _hermitize(m: np.ndarray) -> np.ndarray:
    return 0.5 * (m + m.conj().T)


def xi_tensor(rho: np.ndarray, eff: np.ndarray, d_a: int, d_b: int) -> np.ndarray:
    """Contract ``rho`` and ``E`` (both on A x B) into the d_a^2 x d_a^2 matrix of Xi.

    Xi[a1 a2, a1' a2'] = sum_{b,c} rho[a1 b, a1' c] E[a2 c, a2' b].
    """
    r = rho.reshape(d_a, d_b, d_a, d_b)
    e = eff.reshape(d_a, d_b, d_a, d_b)
    x = np.einsum("ibjc,kclb->ikjl", r, e, optimize=True)
    return x.reshape(d_a * d_a, d_a * d_a)


def xi_from_past(past: PastState) -> ReducedPastState:
    d_a, d_b = _split(past.dims)
    m = xi_tensor(past.rho.matrix, past.effect.matrix, d_a, d_b)
    return ReducedPastState(SubsystemOperator(_hermitize(m), (d_a, d_a)), "past")


# -- product expansions ------------------------------------------------------

@dataclass(frozen=True, eq=False)
class ProductExpansion:
    """``X = sum_j coeffs[j] first[j] (x) second[j]`` with positive ``first``/``second``."""

    coeffs: np.ndarray
    first: np.ndarray  # (J, d_a, d_a)
    second: np.ndarray  # (J, d_b, d_b)

    @property
    def dims(self) -> tuple[int, int]:
        return self.first.shape[1], self.second.shape[1]

    def reconstruct(self) -> SubsystemOperator:
        d_a, d_b = self.dims
        m = np.einsum("j,jab,jcd->acbd", self.coeffs, self.first, self.second)
        return SubsystemOperator(m.reshape(d_a * d_b, d_a * d_b), (d_a, d_b))

    @classmethod
    def from_product(cls, a, b, coeff: float = 1.0) -> "ProductExpansion":
        a = np.asarray(a, dtype=complex)
        b = np.asarray(b, dtype=complex)
        return cls(np.array([coeff], dtype=float), a[None], b[None])


def hermitian_basis(d: int) -> np.ndarray:
    """Hilbert-Schmidt orthonormal Hermitian basis built from matrix units."""
    out = []
    for j in range(d):
        m = np.zeros((d, d), dtype=complex)
        m[j, j] = 1.0
        out.append(m)
    for j in range(d):
        for k in range(j + 1, d):
            s = np.zeros((d, d), dtype=complex)
            s[j, k] = s[k, j] = 1 / np.sqrt(2)
            a = np.zeros((d, d), dtype=complex)
            a[j, k] = 1j / np.sqrt(2)
            a[k, j] = -1j / np.sqrt(2)
            out += [s, a]
    return np.array(out)


def _spectral_pieces(basis: np.ndarray):
    """Split each basis operator into weighted rank-one projectors."""
    owner, weights, projs = [], [], []
    for mu, h in enumerate(basis):
        w, v = np.linalg.eigh(h)
        for lam, vec in zip(w, v.T):
            if abs(lam) > 1e-14:
                owner.append(mu)
                weights.append(lam)
                projs.append(np.outer(vec, vec.conj()))
    return np.array(owner), np.array(weights), np.array(projs)


def product_expansion(x) -> ProductExpansion:
    """Expand a Hermitian operator on A x B into positive product operators.

    Coefficients in a Hermitian product basis are distributed over the
    eigenprojectors of each basis element; negative coefficients appear
    whenever they are needed (always, for entangled operators).
    """
    x = as_operator(x)
    if x.n_subsystems != 2:
        raise DimensionMismatch("product_expansion expects an operator on two subsystems")
    hermitian_eigs(x)  # validates hermiticity
    d_a, d_b = x.dims
    ha, hb = hermitian_basis(d_a), hermitian_basis(d_b)
    x4 = x.matrix.reshape(d_a, d_b, d_a, d_b)
    coeff = np.einsum("mab,ncd,bdac->mn", ha, hb, x4, optimize=True).real
    oa, wa, pa = _spectral_pieces(ha)
    ob, wb, pb = _spectral_pieces(hb)
    t = coeff[oa][:, ob] * np.outer(wa, wb)
    cut = 1e-15 * max(1.0, float(np.max(np.abs(t), initial=0.0)))
    ia, ib = np.nonzero(np.abs(t) > cut)
    return ProductExpansion(t[ia, ib], pa[ia], pb[ib])


def xi_from_expansion(exp_rho: ProductExpansion, exp_effect: ProductExpansion) -> ReducedPastState:
    """``Xi = sum_jk x_jk rho^j (x) E^k`` with ``x_jk = t_j s_k Tr(omega^j F^k)``."""
    if exp_rho.dims != exp_effect.dims:
        raise DimensionMismatch("expansions of rho and E act on different spaces")
    d_a, _ = exp_rho.dims
    overlap = np.einsum("jab,kba->jk", exp_rho.second, exp_effect.second, optimize=True)
    x = exp_rho.coeffs[:, None] * exp_effect.coeffs[None, :] * overlap
    y = x @ exp_effect.first.reshape(len(exp_effect.coeffs), -1)
    m = np.einsum("jab,jcd->acbd", exp_rho.first, y.reshape(-1, d_a, d_a), optimize=True)
    m = m.reshape(d_a * d_a, d_a * d_a)
    return ReducedPastState(SubsystemOperator(_hermitize(m), (d_a, d_a)), "expansion")


# -- probabilities from Xi ---------------------------------------------------

def xi_weights(xi: ReducedPastState, ops: np.ndarray) -> np.ndarray:
    """Unnormalized ``Tr M_m(Xi)`` for a stack of Kraus operators on A.

    ``M_m`` acts on product terms as ``rho (x) E -> Omega_m rho Omega_m^dag E``;
    by linearity ``Tr M_m(Xi) = sum Omega[i,p] conj(Omega[j,q]) Xi[p j, q i]``.
    """
    d = xi.d_a
    x4 = xi.matrix.reshape(d, d, d, d)
    w = np.einsum("mip,mjq,pjqi->m", ops, ops.conj(), x4, optimize=True)
    return w.real


def probs_from_xi(xi: ReducedPastState, povm: Povm) -> np.ndarray:
    if povm.dims != (xi.d_a,):
        raise DimensionMismatch(f"POVM dims {povm.dims} do not match subsystem dimension {xi.d_a}")
    w = xi_weights(xi, povm.stack)
    total = w.sum()
    floor = DENOM_FLOOR * max(float(np.max(np.abs(xi.matrix))), 1e-300)
    if total <= floor:
        raise ImpossiblePostselection(f"postselection weight {total:.3e} vanishes")
    return w / total


# -- entanglement criteria ---------------------------------------------------

@dataclass(frozen=True)
class NegativityWitness:
    lambda_min: float
    nonseparable: bool


def negativity_witness(xi: ReducedPastState, neg_tol: float = NEG_TOL) -> NegativityWitness:
    """``nonseparable`` certifies that rho or E is entangled; False is inconclusive."""
    spec = xi.spectrum()
    norm = float(np.max(np.abs(spec.eigenvalues)))
    lam = spec.lambda_min
    return NegativityWitness(lam, bool(lam < -neg_tol * norm))


def marginal_criteria(xi: ReducedPastState) -> tuple[float, float]:
    """Minimal eigenvalues of ``Tr_2 Xi`` and ``Tr_1 Xi``.

    A negative first value would indicate entangled rho, a negative second an
    entangled effect.
    """
    first = hermitian_eigs(partial_trace(xi.xi, [1])).lambda_min
    second = hermitian_eigs(partial_trace(xi.xi, [0])).lambda_min
    return first, second


def xi_via_effect_ensemble(rho, weights, vectors, effect=None) -> ReducedPastState:
    """Build Xi from an ensemble ``E = sum_x q_x |e_x><e_x|``.

    Writing ``|e_x> = (M_x (x) 1)|phi+>`` with unnormalized ``|phi+> = sum_j |jj>``
    gives ``Xi = sum_x q_x (1 (x) M_x) rho^T_B (1 (x) M_x^dag)``.
    """
    rho = as_operator(rho)
    d_a, d_b = _split(rho.dims)
    q = np.asarray(weights, dtype=float)
    vecs = np.asarray(vectors, dtype=complex).reshape(d_a * d_b, -1)
    if q.ndim != 1 or vecs.shape[1] != q.size:
        raise ValueError("ensemble weights and vectors do not pair up")
    if np.any(q < 0):
        raise ValueError("ensemble weights must be nonnegative")
    if effect is not None:
        target = as_operator(effect).matrix
        rebuilt = (vecs * q) @ vecs.conj().T
        dev = float(np.max(np.abs(rebuilt - target)))
        if dev > XI_TOL * max(1.0, float(np.max(np.abs(target)))):
            raise ValueError(f"effect ensemble does not reconstruct E (deviation {dev:.3e})")
    rho_pt = partial_transpose(SubsystemOperator(rho.matrix, (d_a, d_b)), 1).matrix
    eye = np.eye(d_a)
    m = np.zeros((d_a * d_a, d_a * d_a), dtype=complex)
    for qx, v in zip(q, vecs.T):
        k = np.kron(eye, v.reshape(d_a, d_b))
        m += qx * (k @ rho_pt @ k.conj().T)
    return ReducedPastState(SubsystemOperator(_hermitize(m), (d_a, d_a)), "effect-ensemble")


def marginal_survey(samples: int, d_a: int, d_b: int, seed: int) -> dict:
    """Monte-Carlo minimum of both marginal eigenvalues over random positive pairs.

    Each member is a Hilbert-Schmidt random density matrix, scaled so that
    ``Xi`` has unit spectral scale before the eigenvalues are compared.
    """
    rng = make_rng(seed)
    worst = np.array([np.inf, np.inf])
    for _ in range(samples):
        rho = random_density(d_a * d_b, rng)
        eff = random_density(d_a * d_b, rng)
        m = xi_tensor(rho, eff, d_a, d_b)
        xi = ReducedPastState(SubsystemOperator(_hermitize(m), (d_a, d_a)))
        scale = float(np.max(np.abs(np.linalg.eigvalsh(xi.matrix))))
        worst = np.minimum(worst, np.array(marginal_criteria(xi)) / scale)
    return {"samples": samples, "seed": seed, "min_first": float(worst[0]), "min_second": float(worst[1])}
