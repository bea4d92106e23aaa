"""Continuous-variable past states in a truncated Fock basis.

Quadratures follow ``x_phi = a e^{-i phi} + a^dag e^{i phi}`` so that the vacuum
has ``<x^2> = 1`` and ``[x_phi, p_phi] = 2i``.  Phase-space functions use the
complex amplitude ``alpha`` with ``x_phi = 2 Re(alpha e^{-i phi})``.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.special import gammainc, gammaln

from .errors import DimensionMismatch, ImpossiblePostselection, TruncationTooSevere
from .operators import SubsystemOperator, partial_trace
from .reduced import ReducedPastState
from .retrodiction import DENOM_FLOOR, PastState

N_MAX = 40
TRUNC_TOL = 1e-6
GUARD_TOL = 1e-10
GRID_TOL = 1e-3


class TrustedRegionWarning(UserWarning):
    """Phase-space point lies where truncation artifacts are not controlled."""


class CoarseGridWarning(UserWarning):
    """Quadrature grid does not resolve the density (normalization off by > 1e-3)."""


@dataclass(frozen=True, eq=False)
class FockOperator:
    """Operator in the number basis ``|0..n_max-1>`` of one or two modes.

    ``tail`` bounds the weight discarded by truncation.
    """

    matrix: np.ndarray
    n_max: int
    modes: int = 1
    tail: float = 0.0

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        side = self.n_max**self.modes
        if m.shape != (side, side):
            raise DimensionMismatch(f"expected a {side}x{side} matrix, got {m.shape}")
        object.__setattr__(self, "matrix", m)

    @property
    def operator(self) -> SubsystemOperator:
        return SubsystemOperator(self.matrix, (self.n_max,) * self.modes)

    def trace(self) -> float:
        return float(np.trace(self.matrix).real)


@dataclass(frozen=True, eq=False)
class FockState:
    vector: np.ndarray
    n_max: int
    modes: int = 1
    tail: float = 0.0

    def projector(self) -> FockOperator:
        v = self.vector
        return FockOperator(np.outer(v, v.conj()), self.n_max, self.modes, self.tail)


@dataclass(frozen=True)
class TmsvParams:
    s: float

    @property
    def n_bar(self) -> float:
        return math.sinh(self.s) ** 2


def annihilation(n: int) -> np.ndarray:
    return np.diag(np.sqrt(np.arange(1, n, dtype=float)), 1)


def _check_nmax(n_max):
    if int(n_max) != n_max or n_max < 2:
        raise ValueError(f"n_max must be an integer >= 2, got {n_max}")


# -- two-mode squeezed states ------------------------------------------------

def tmsv(s: float, n_max: int = N_MAX, trunc_tol: float = TRUNC_TOL) -> FockState:
    """``cosh(s)^-1 sum_j tanh(s)^j |jj>`` truncated at ``j < n_max`` (not renormalized)."""
    _check_nmax(n_max)
    t = math.tanh(s)
    deficit = t ** (2 * n_max)
    if deficit > trunc_tol:
        raise TruncationTooSevere(
            f"tanh(s)^(2 n_max) = {deficit:.3e} exceeds {trunc_tol:.1e}; raise n_max"
        )
    coeff = t ** np.arange(n_max) / math.cosh(s)
    v = np.zeros(n_max * n_max)
    v[np.arange(n_max) * (n_max + 1)] = coeff
    return FockState(v.astype(complex), n_max, 2, deficit)


def tmsv_past(s: float, n_max: int = N_MAX, same_sign: bool = False) -> PastState:
    """Prepared ``psi_s`` and postselected ``psi_{-s}`` (or ``psi_s`` if ``same_sign``)."""
    psi = tmsv(s, n_max)
    e = tmsv(s if same_sign else -s, n_max)
    return PastState.from_vectors(psi.vector, e.vector, (n_max, n_max))


def xi_tmsv(s: float, n_max: int = N_MAX, trunc_tol: float = TRUNC_TOL) -> ReducedPastState:
    """Reduced past state of ``(psi_s, psi_-s)`` built entrywise on ``|jk><kj|``.

    For normalized ``psi_s`` the prefactor is ``1/cosh(s)^4``, so that
    ``Xi[jk, kj] = xi_j xi_k`` with ``xi`` from :func:`xi_diag`.
    """
    tmsv(s, n_max, trunc_tol)  # truncation guard
    t = math.tanh(s)
    j = np.arange(n_max)
    jj, kk = np.meshgrid(j, j, indexing="ij")
    vals = (-1.0) ** (jj + kk) * t ** (2 * (jj + kk)) / math.cosh(s) ** 4
    m = np.zeros((n_max * n_max, n_max * n_max))
    m[(jj * n_max + kk).ravel(), (kk * n_max + jj).ravel()] = vals.ravel()
    return ReducedPastState(SubsystemOperator(m, (n_max, n_max)), "tmsv")


def xi_diag(n_bar: float, sign: str = "alternating", n_max: int = N_MAX) -> FockOperator:
    """``sum_j (-n)^j/(1+n)^(j+1) |j><j|`` (alternating) or the thermal state (plain)."""
    if n_bar < 0:
        raise ValueError("n_bar must be nonnegative")
    if sign not in ("alternating", "plain"):
        raise ValueError(f"sign must be 'alternating' or 'plain', got {sign!r}")
    _check_nmax(n_max)
    n_bar = float(n_bar)
    j = np.arange(n_max)
    base = -n_bar if sign == "alternating" else n_bar
    w = base**j / (1.0 + n_bar) ** (j + 1)
    tail = (n_bar / (1.0 + n_bar)) ** n_max
    return FockOperator(np.diag(w).astype(complex), n_max, 1, tail)


def xi_trace_closed(n_bar: float) -> float:
    return 1.0 / (1.0 + 2.0 * n_bar)


def rank_one_past_probs_cv(xi: FockOperator, states) -> np.ndarray:
    """``p(m) ∝ |<phi_m|xi|phi_m>|^2`` for rank-one measurements ``|phi_m><phi_m|``."""
    phi = np.atleast_2d(np.asarray(states, dtype=complex))
    if phi.shape[1] != xi.n_max:
        raise DimensionMismatch(f"states have length {phi.shape[1]}, expected {xi.n_max}")
    amp = np.einsum("mi,ij,mj->m", phi.conj(), xi.matrix, phi)
    w = np.abs(amp) ** 2
    total = w.sum()
    if total <= DENOM_FLOOR:
        raise ImpossiblePostselection("all overlaps <phi_m|xi|phi_m> vanish")
    return w / total


# -- phase space ---------------------------------------------------------------

def trunc_err(alpha_abs, n_max: int) -> np.ndarray:
    """Weight of a coherent state outside the first ``n_max`` number states."""
    a2 = np.asarray(alpha_abs, dtype=float) ** 2
    return np.where(a2 > 0, gammainc(n_max, a2), 0.0)


def in_trusted_region(alpha, n_max: int) -> np.ndarray:
    return np.abs(np.asarray(alpha)) ** 2 <= 0.5 * n_max


def _flag_region(alpha, n_max):
    if not np.all(in_trusted_region(alpha, n_max)):
        warnings.warn(
            f"|alpha|^2 exceeds n_max/2 = {n_max / 2} for some points", TrustedRegionWarning,
            stacklevel=3,
        )


def coherent(alpha, n_max: int) -> np.ndarray:
    """Truncated coherent-state coefficients, shape ``alpha.shape + (n_max,)``."""
    alpha = np.asarray(alpha, dtype=complex)
    n = np.arange(n_max)
    r = np.abs(alpha)[..., None]
    with np.errstate(divide="ignore", invalid="ignore"):
        logmag = -0.5 * r**2 + n * np.log(r) - 0.5 * gammaln(n + 1)
    logmag = np.where((r == 0) & (n == 0), 0.0, logmag)
    return np.exp(logmag) * np.exp(1j * n * np.angle(alpha)[..., None])


def _single_mode(op) -> np.ndarray:
    m = op.matrix if isinstance(op, (FockOperator, SubsystemOperator)) else np.asarray(op)
    if isinstance(op, FockOperator) and op.modes != 1:
        raise DimensionMismatch("phase-space functions need a single-mode operator")
    return np.asarray(m, dtype=complex)


def husimi(op, alpha) -> np.ndarray:
    """``Q(alpha) = <alpha|op|alpha> / pi``."""
    m = _single_mode(op)
    n = m.shape[0]
    _flag_region(alpha, n)
    c = coherent(alpha, n)
    return np.einsum("...i,ij,...j->...", c.conj(), m, c).real / np.pi


class _Displacer:
    """Displacement operators restricted to the first ``n_max`` number states.

    ``alpha a^dag - alpha* a = -i |alpha| R H R^dag`` with ``H = i(a^dag - a)`` and
    ``R = e^{i theta n}``; ``H`` is diagonalized once on a padded space and the
    exponential is restricted afterwards, which removes edge artifacts.
    """

    def __init__(self, n_max: int, pad: int | None = None):
        self.n_max = n_max
        self.size = n_max + (pad if pad is not None else max(n_max, 40))
        a = annihilation(self.size)
        lam, v = np.linalg.eigh(1j * (a.conj().T - a))
        self.lam, self.v = lam, v
        self.parity = (-1.0) ** np.arange(self.size)

    def rows(self, alpha: complex) -> np.ndarray:
        """First ``n_max`` rows of ``D(alpha)`` on the padded space."""
        r, th = abs(alpha), np.angle(alpha)
        phase = np.exp(1j * th * np.arange(self.size))
        d = (self.v * np.exp(-1j * r * self.lam)) @ self.v.conj().T
        d = phase[:, None] * d * phase.conj()[None, :]
        return d[: self.n_max]


def wigner(op, alpha, pad: int | None = None) -> np.ndarray:
    """``W(alpha) = (2/pi) Tr(D(alpha) P D(alpha)^dag op)`` with parity ``P``."""
    m = _single_mode(op)
    n = m.shape[0]
    _flag_region(alpha, n)
    alpha = np.asarray(alpha, dtype=complex)
    disp = _Displacer(n, pad)
    out = np.empty(alpha.shape)
    for idx, a in np.ndenumerate(alpha):
        d = disp.rows(complex(a))
        x = (d * disp.parity) @ d.conj().T
        out[idx] = (2 / np.pi) * np.einsum("ij,ji->", x, m).real
    return out


def husimi_closed(n_bar: float, which: str, alpha) -> np.ndarray:
    a2 = np.abs(np.asarray(alpha)) ** 2
    if which == "xi":
        return np.exp(-(1 + 2 * n_bar) / (1 + n_bar) * a2) / (np.pi * (1 + n_bar))
    if which == "thermal":
        return np.exp(-a2 / (1 + n_bar)) / (np.pi * (1 + n_bar))
    raise ValueError(f"unknown operator {which!r}")


def wigner_closed(n_bar: float, which: str, alpha) -> np.ndarray:
    a2 = np.abs(np.asarray(alpha)) ** 2
    if which == "xi":
        return (2 / np.pi) * np.exp(-2 * (1 + 2 * n_bar) * a2)
    if which == "thermal":
        return (2 / np.pi) * np.exp(-2 * a2 / (1 + 2 * n_bar)) / (1 + 2 * n_bar)
    raise ValueError(f"unknown operator {which!r}")


# -- quadratures ---------------------------------------------------------------

def hermite_functions(x, n_max: int) -> np.ndarray:
    """``psi_n(x)`` for ``n < n_max``, shape ``(n_max, len(x))``, vacuum variance 1."""
    x = np.asarray(x, dtype=float)
    out = np.empty((n_max,) + x.shape)
    out[0] = (2 * np.pi) ** -0.25 * np.exp(-(x**2) / 4)
    if n_max > 1:
        out[1] = x * out[0]
    for n in range(1, n_max - 1):
        out[n + 1] = (x * out[n] - np.sqrt(n) * out[n - 1]) / np.sqrt(n + 1)
    return out


def quadrature_kets(x, phi: float, n_max: int) -> np.ndarray:
    """``<n|x_phi> = e^{i n phi} psi_n(x)``, shape ``(n_max, len(x))``."""
    return np.exp(1j * phi * np.arange(n_max))[:, None] * hermite_functions(x, n_max)


def _diag_expect(m: np.ndarray, kets: np.ndarray) -> np.ndarray:
    return np.einsum("ix,ij,jx->x", kets.conj(), m, kets).real


@dataclass(frozen=True, eq=False)
class QuadratureDensity:
    x: np.ndarray
    density: np.ndarray
    norm_deviation: float

    def moments(self) -> tuple[float, float]:
        mean = np.trapezoid(self.x * self.density, self.x)
        var = np.trapezoid((self.x - mean) ** 2 * self.density, self.x)
        return float(mean), float(var)


def quadrature_past_prob(target, phi: float, x_grid, effect=None) -> QuadratureDensity:
    """Retrodicted density of an intermediate ``x_phi`` measurement.

    ``target`` is a single-mode ``rho`` (with ``effect``), a single-mode
    diagonal operator ``xi`` of a two-mode squeezed past state (density
    ``∝ <x|xi|x>^2``), or a :class:`ReducedPastState` (density
    ``∝ <x x|Xi|x x>``).  The result is normalized on the grid by the
    trapezoidal rule.  ``norm_deviation`` compares the grid integral of a
    positive reference marginal with its trace; deviations above 1e-3 are
    reported with a :class:`CoarseGridWarning`.
    """
    x = np.asarray(x_grid, dtype=float)
    if isinstance(target, ReducedPastState):
        n = target.d_a
        kets = quadrature_kets(x, phi, n)
        xi4 = target.matrix.reshape(n, n, n, n)
        raw = np.einsum("px,jx,pjqi,qx,ix->x", kets.conj(), kets.conj(), xi4, kets, kets,
                        optimize=True).real
        ref = partial_trace(target.xi, [1]).matrix
    elif effect is None:
        m = _single_mode(target)
        n = m.shape[0]
        kets = quadrature_kets(x, phi, n)
        raw = _diag_expect(m, kets) ** 2
        ref = np.abs(m)
    else:
        rho, eff = _single_mode(target), _single_mode(effect)
        n = rho.shape[0]
        kets = quadrature_kets(x, phi, n)
        raw = _diag_expect(rho, kets) * _diag_expect(eff, kets)
        ref = rho
    ref_tr = float(np.trace(ref).real)
    dev = abs(np.trapezoid(_diag_expect(ref, kets), x) - ref_tr) / max(abs(ref_tr), 1e-300)
    if dev > GRID_TOL:
        warnings.warn(f"quadrature grid too coarse: normalization off by {dev:.2e}",
                      CoarseGridWarning, stacklevel=2)
    total = np.trapezoid(raw, x)
    if total <= DENOM_FLOOR:
        raise ImpossiblePostselection("retrodicted quadrature density vanishes on the grid")
    return QuadratureDensity(x, raw / total, float(dev))


def guard_nmax(s: float, n_max: int | None = None) -> int:
    """Smallest admissible ``n_max`` (at least the default) with ``tanh(s)^(2 n) < 1e-10``."""
    t2 = math.tanh(abs(s)) ** 2
    if n_max is not None:
        _check_nmax(n_max)
        if t2 ** n_max >= GUARD_TOL:
            raise TruncationTooSevere(
                f"tanh(s)^(2 n_max) = {t2 ** n_max:.3e} is not below {GUARD_TOL:.0e}"
            )
        return n_max
    n = N_MAX
    while t2**n >= GUARD_TOL:
        n += 1
    return n


def quadrature_grid(n_max: int, points_per_unit: int = 100) -> np.ndarray:
    half = 2.0 * math.sqrt(n_max) + 6.0
    return np.linspace(-half, half, int(2 * half * points_per_unit) + 1)


def past_quadrature_variance(s: float, phi: float = 0.0, n_max: int | None = None) -> float:
    """Retrodicted variance of ``x_phi`` for the past state ``(psi_s, psi_-s)``.

    ``n_max=None`` picks the smallest truncation satisfying the guard.
    """
    n = guard_nmax(s, n_max)
    xi = xi_diag(math.sinh(s) ** 2, "alternating", n)
    dens = quadrature_past_prob(xi, phi, quadrature_grid(n))
    return dens.moments()[1]


def past_quadrature_variance_closed(s: float) -> float:
    """Untruncated value ``1 / (2 cosh 2s)``."""
    return 0.5 / math.cosh(2 * s)

