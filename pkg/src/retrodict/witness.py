"""Dimension witnesses for past states and their Monte-Carlo bounds.

A witness ``f`` maps the table of retrodicted probabilities of several
measurements on A to a number.  ``c_k`` is its maximum over past states whose
environment B has dimension ``k``; a value above ``c_k`` certifies that the
environment is larger than ``k``.  For pure past states on C^d x C^k the
probabilities only depend on the d x d matrix ``G = Psi E^dag`` of rank <= k,
since ``<e|(Omega (x) 1)|psi> = Tr(Omega G)``.  All sampling below works with
``G`` directly.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatch, SingularDenominator
from .operators import SubsystemOperator
from .retrodiction import DENOM_FLOOR, PastState, Povm, ProbabilityTable
from .sampling import (
    haar_pure_past,
    haar_state,
    haar_unitary,
    make_rng,
    random_density,
)

CHUNK = 8192
BATCHES = 10

SIGMA = np.array(
    [
        [[0, 1], [1, 0]],
        [[0, -1j], [1j, 0]],
        [[1, 0], [0, -1]],
    ],
    dtype=complex,
)

__all__ = [
    "MeasurementSuite",
    "WitnessFn",
    "PAULI_ABS_SUM",
    "MAX_PROB_SUM",
    "BlochPastState",
    "CkEstimate",
    "DetectionGap",
    "haar_unitary",
    "haar_pure_past",
    "pauli_suite",
    "noisy_pauli_povm",
    "mub_unitaries",
    "mub_suite",
    "past_bloch",
    "evaluate_witness",
    "estimate_ck",
    "optimize_c0_pauli",
    "detection_gap",
    "scatter_samples",
    "product_ceiling_samples",
]


# -- measurement settings ----------------------------------------------------

@dataclass(frozen=True, eq=False)
class MeasurementSuite:
    """Ordered measurement settings on A sharing dimension and outcome count."""

    povms: tuple[Povm, ...]
    label: str = ""

    def __post_init__(self):
        povms = tuple(self.povms)
        if not povms:
            raise ValueError("a measurement suite needs at least one setting")
        if len({p.dims for p in povms}) != 1:
            raise DimensionMismatch("settings act on different spaces")
        if len({p.n_outcomes for p in povms}) != 1:
            raise ValueError("settings must have the same number of outcomes")
        object.__setattr__(self, "povms", povms)

    @property
    def dim_a(self) -> int:
        return math.prod(self.povms[0].dims)

    @property
    def n_settings(self) -> int:
        return len(self.povms)

    @property
    def n_outcomes(self) -> int:
        return self.povms[0].n_outcomes

    @property
    def stack(self) -> np.ndarray:
        """Kraus operators with shape (settings, outcomes, d, d)."""
        return np.stack([p.stack for p in self.povms])

    def table(self, past: PastState) -> ProbabilityTable:
        from .retrodiction import probability_table

        return probability_table(past, self.povms)


def _eigenprojectors(u: np.ndarray) -> list[np.ndarray]:
    return [np.outer(u[:, m], u[:, m].conj()) for m in range(u.shape[1])]


def pauli_suite() -> MeasurementSuite:
    """sigma_x, sigma_y, sigma_z; outcome 0 is the +1 eigenvalue."""
    povms = []
    for name, s in zip("xyz", SIGMA):
        w, v = np.linalg.eigh(s)
        povms.append(Povm.from_matrices(_eigenprojectors(v[:, ::-1]), f"sigma_{name}"))
    return MeasurementSuite(tuple(povms), "pauli")


def noisy_pauli_povm(p: float, q: float) -> MeasurementSuite:
    """Three-outcome Pauli measurements that confirm +1 with probability p and -1 with q."""
    if not (0.0 <= p <= 1.0 and 0.0 <= q <= 1.0):
        raise ValueError(f"success probabilities must lie in [0, 1], got p={p}, q={q}")
    povms = []
    for proj, name in zip(pauli_suite().povms, "xyz"):
        pi0, pi1 = (o.matrix for o in proj.ops)
        ops = [
            np.sqrt(p) * pi0,
            np.sqrt(q) * pi1,
            np.sqrt(1 - p) * pi0 + np.sqrt(1 - q) * pi1,
        ]
        povms.append(Povm.from_matrices(ops, f"noisy_{name}"))
    return MeasurementSuite(tuple(povms), f"noisy-pauli(p={p},q={q})")


def mub_unitaries() -> list[np.ndarray]:
    """Identity plus four unitaries whose columns form mutually unbiased bases of C^4."""
    i = 1j
    u1 = [[1, 1, 1, 1], [1, 1, -1, -1], [1, -1, -1, 1], [1, -1, 1, -1]]
    u2 = [[1, 1, 1, 1], [-1, -1, 1, 1], [-i, i, i, -i], [-i, i, -i, i]]
    u3 = [[1, 1, 1, 1], [-i, -i, i, i], [-i, i, i, -i], [-1, 1, -1, 1]]
    u4 = [[1, 1, 1, 1], [-i, -i, i, i], [-1, 1, -1, 1], [-i, i, i, -i]]
    return [np.eye(4, dtype=complex)] + [np.array(u, dtype=complex) / 2 for u in (u1, u2, u3, u4)]


def mub_suite() -> MeasurementSuite:
    povms = [
        Povm.from_matrices(_eigenprojectors(u), f"mub_{a}") for a, u in enumerate(mub_unitaries())
    ]
    return MeasurementSuite(tuple(povms), "mub4")


# -- witness functions -------------------------------------------------------

@dataclass(frozen=True)
class WitnessFn:
    """``PauliAbsSum``: sum_a |p_a(0) - p_a(1)|.  ``MaxProbSum``: sum_a max_m p_a(m)."""

    kind: str

    def __post_init__(self):
        if self.kind not in ("PauliAbsSum", "MaxProbSum"):
            raise ValueError(f"unknown witness kind {self.kind!r}")

    def __call__(self, probs) -> np.ndarray | float:
        """Evaluate on an array of shape (..., settings, outcomes)."""
        p = np.asarray(probs, dtype=float)
        if self.kind == "PauliAbsSum":
            if p.shape[-1] != 2:
                raise ValueError("PauliAbsSum needs two-outcome settings")
            out = np.abs(p[..., 0] - p[..., 1]).sum(axis=-1)
        else:
            out = p.max(axis=-1).sum(axis=-1)
        return float(out) if out.ndim == 0 else out


PAULI_ABS_SUM = WitnessFn("PauliAbsSum")
MAX_PROB_SUM = WitnessFn("MaxProbSum")


def evaluate_witness(wfn: WitnessFn, table: ProbabilityTable) -> float:
    return float(wfn(table.probs))


# -- Bloch parametrization ---------------------------------------------------

@dataclass(frozen=True, eq=False)
class BlochPastState:
    """Qubit past state with ``rho = (1 + r.sigma)/2`` and ``E = (1 + s.sigma)/2``."""

    r: np.ndarray
    s: np.ndarray

    def __post_init__(self):
        r = np.asarray(self.r, dtype=float).reshape(3)
        s = np.asarray(self.s, dtype=float).reshape(3)
        for name, v in (("r", r), ("s", s)):
            if np.linalg.norm(v) > 1 + 1e-12:
                raise ValueError(f"Bloch vector {name} has norm > 1")
        object.__setattr__(self, "r", r)
        object.__setattr__(self, "s", s)

    def rho(self) -> np.ndarray:
        return 0.5 * (np.eye(2) + np.einsum("a,aij->ij", self.r, SIGMA))

    def effect(self) -> np.ndarray:
        return 0.5 * (np.eye(2) + np.einsum("a,aij->ij", self.s, SIGMA))

    def past_state(self) -> PastState:
        return PastState(SubsystemOperator(self.rho(), (2,)), SubsystemOperator(self.effect(), (2,)))


def _bloch_ratio(r, s):
    den = 1.0 + r * s
    if np.any(np.abs(den) <= 1e-15):
        raise SingularDenominator("1 + r_a s_a vanishes for some component")
    return (r + s) / den


def past_bloch(bp: BlochPastState) -> np.ndarray:
    """Retrodicted Bloch vector, ``<sigma^a>_p = (r_a + s_a)/(1 + r_a s_a)``."""
    return _bloch_ratio(bp.r, bp.s)


def _spherical(p):
    rad, th, ph = p
    return np.clip(rad, 0.0, 1.0) * np.array(
        [np.sin(th) * np.cos(ph), np.sin(th) * np.sin(ph), np.cos(th)]
    )


def optimize_c0_pauli(points: int = 201, step: float = 1e-4) -> tuple[float, float]:
    """Maximal ``sum_a |<sigma^a>_p|`` over qubit past states without environment.

    A grid over the symmetric reduction ``r_a = r``, ``s_a = s`` locates the
    basin; coordinate descent over radius and two angles of both vectors then
    polishes the optimum.  Returns ``(c0, mean |<sigma^a>_p|)`` at the optimum.
    """
    grid = np.linspace(-1.0, 1.0, points)
    feasible = grid[np.sqrt(3) * np.abs(grid) <= 1.0]
    rr, ss = np.meshgrid(feasible, feasible, indexing="ij")
    den = 1.0 + rr * ss
    with np.errstate(divide="ignore", invalid="ignore"):
        vals = np.where(np.abs(den) > 1e-15, 3 * np.abs((rr + ss) / den), -np.inf)
    i, j = np.unravel_index(np.argmax(vals), vals.shape)
    r0, s0 = rr[i, j], ss[i, j]

    def to_params(v):
        rad = np.linalg.norm(v)
        th = np.arccos(v[2] / rad) if rad > 0 else 0.0
        return [rad, th, np.arctan2(v[1], v[0])]

    x = np.array(to_params(np.full(3, r0)) + to_params(np.full(3, s0)))

    def objective(x):
        r, s = _spherical(x[:3]), _spherical(x[3:])
        try:
            return float(np.abs(_bloch_ratio(r, s)).sum())
        except SingularDenominator:
            return -np.inf

    best = objective(x)
    improved = True
    while improved:
        improved = False
        for c in range(6):
            for sign in (1.0, -1.0):
                trial = x.copy()
                trial[c] += sign * step
                if c in (0, 3):
                    trial[c] = min(max(trial[c], 0.0), 1.0)
                val = objective(trial)
                if val > best + 1e-15:
                    x, best, improved = trial, val, True
                    break
    rp = _bloch_ratio(_spherical(x[:3]), _spherical(x[3:]))
    return best, float(np.mean(np.abs(rp)))


# -- batched retrodiction for pure past states -------------------------------

def _gaussian_cols(rng, n, d, k):
    return rng.standard_normal((n, d, k)) + 1j * rng.standard_normal((n, d, k))


def _normalize_batch(m):
    norms = np.sqrt(np.sum(np.abs(m) ** 2, axis=(-2, -1), keepdims=True))
    return m / norms


def _sample_g(strategy: str, d: int, k: int, n: int, rng) -> np.ndarray:
    """Matrices ``G = Psi E^dag`` for ``n`` Haar-random pure past states."""
    if strategy == "state-and-effect":
        psi = _normalize_batch(_gaussian_cols(rng, n, d, k))
        eff = _normalize_batch(_gaussian_cols(rng, n, d, k))
        return psi @ np.conj(np.swapaxes(eff, 1, 2))
    if strategy == "effect-only":
        # psi = phi+ on C^d x C^d; a rank-k effect e = E V^dag spans every rank-k G
        eff = _normalize_batch(_gaussian_cols(rng, n, d, k))
        if k < d:
            v = haar_unitary(d, rng, n)[:, :, :k]
            eff = eff @ np.conj(np.swapaxes(v, 1, 2))
        return np.conj(np.swapaxes(eff, 1, 2)) / np.sqrt(d)
    raise ValueError(f"unknown strategy {strategy!r}")


def probs_from_g(g: np.ndarray, ops: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Retrodicted tables ``(N, settings, outcomes)`` and a validity mask ``(N,)``."""
    s, m, d, _ = ops.shape
    # Tr(Omega G) = sum_ij Omega[i, j] G[j, i]
    amp = np.swapaxes(g, 1, 2).reshape(len(g), d * d) @ ops.reshape(s * m, d * d).T
    w = (np.abs(amp) ** 2).reshape(len(g), s, m)
    den = w.sum(axis=2)
    valid = np.all(den > DENOM_FLOOR, axis=1)
    safe = np.where(den > DENOM_FLOOR, den, 1.0)
    return w / safe[..., None], valid


def probs_from_mixed(rho: np.ndarray, eff: np.ndarray, ops: np.ndarray):
    """Tables for stacks of mixed ``rho`` and ``E`` acting on the measured space."""
    x = np.einsum("smij,njk,smlk->nsmil", ops, rho, ops.conj(), optimize=True)
    w = np.einsum("nsmil,nli->nsm", x, eff, optimize=True).real
    den = w.sum(axis=2)
    valid = np.all(den > DENOM_FLOOR, axis=1)
    safe = np.where(den > DENOM_FLOOR, den, 1.0)
    return w / safe[..., None], valid


# -- c_k estimation ----------------------------------------------------------

@dataclass(frozen=True, eq=False)
class CkEstimate:
    k: int
    value: float
    samples: int
    seed: int
    strategy: str
    trace: list = field(default_factory=list)  # (sample index, running max)
    skipped: int = 0
    batch_maxima: np.ndarray = field(default_factory=lambda: np.zeros(0))
    stderr: float = float("nan")

    @property
    def skip_rate(self) -> float:
        return self.skipped / self.samples if self.samples else 0.0


def _batch_stats(values: np.ndarray, batches: int) -> tuple[np.ndarray, float]:
    parts = [p for p in np.array_split(values, batches) if p.size]
    maxima = np.array([np.nanmax(p) if np.any(np.isfinite(p)) else np.nan for p in parts])
    good = maxima[np.isfinite(maxima)]
    se = float(np.std(good, ddof=1) / np.sqrt(len(good))) if len(good) > 1 else float("nan")
    return maxima, se


def witness_values(wfn, suite, d_a, k, samples, seed, strategy="state-and-effect") -> np.ndarray:
    """Witness value for each sample; NaN marks skipped (impossible) postselections.

    Sample ``j`` always comes from chunk ``j // CHUNK`` of the substream keyed
    by ``(seed, chunk)``, so longer runs extend shorter ones.
    """
    if suite.dim_a != d_a:
        raise DimensionMismatch(f"suite acts on dimension {suite.dim_a}, not {d_a}")
    ops = suite.stack
    out = np.empty(samples)
    for c, start in enumerate(range(0, samples, CHUNK)):
        n = min(CHUNK, samples - start)
        rng = make_rng(seed, c)
        g = _sample_g(strategy, d_a, k, CHUNK, rng)[:n]
        probs, valid = probs_from_g(g, ops)
        f = np.asarray(wfn(probs), dtype=float)
        out[start : start + n] = np.where(valid, f, np.nan)
    return out


def estimate_ck(
    wfn: WitnessFn,
    suite: MeasurementSuite,
    d_a: int,
    k: int,
    samples: int,
    seed: int,
    strategy: str = "state-and-effect",
    batches: int = BATCHES,
) -> CkEstimate:
    """Lower bound on ``c_k`` from the running maximum over random pure past states.

    The standard error is that of the maximum over ``batches`` contiguous
    batches of samples (batch means of the batch maxima).
    """
    if not 1 <= k <= d_a:
        raise ValueError(f"environment dimension k={k} must satisfy 1 <= k <= {d_a}")
    if samples < 1:
        raise ValueError("samples must be positive")
    vals = witness_values(wfn, suite, d_a, k, samples, seed, strategy)
    skipped = int(np.count_nonzero(np.isnan(vals)))
    running = np.fmax.accumulate(np.where(np.isnan(vals), -np.inf, vals))
    change = np.flatnonzero(np.diff(running, prepend=-np.inf) > 0)
    idx = list(change)
    if not idx or idx[-1] != samples - 1:
        idx.append(samples - 1)
    trace = [(int(i) + 1, float(running[i])) for i in idx]
    maxima, se = _batch_stats(vals, batches)
    return CkEstimate(
        k=k,
        value=float(running[-1]),
        samples=samples,
        seed=seed,
        strategy=strategy,
        trace=trace,
        skipped=skipped,
        batch_maxima=maxima,
        stderr=se,
    )


# -- detection gap -----------------------------------------------------------

@dataclass(frozen=True)
class DetectionGap:
    p: float
    q: float
    c0: float
    c2: float
    raw_delta: float
    delta: float
    stderr: float


def detection_gap(p: float, q: float, samples: int, seed: int,
                  strategy: str = "effect-only") -> DetectionGap:
    """``Delta = c_2 - c_0`` for noisy Pauli measurements and ``MaxProbSum``.

    ``c_0 = c_1``, so both bounds come from pure past states with k = 1 and 2.
    The same seed is used at every grid point, which keeps Delta smooth in (p, q).
    """
    suite = noisy_pauli_povm(p, q)
    c1 = estimate_ck(MAX_PROB_SUM, suite, 2, 1, samples, seed, strategy)
    c2 = estimate_ck(MAX_PROB_SUM, suite, 2, 2, samples, seed, strategy)
    raw = c2.value - c1.value
    se = float(np.hypot(np.nan_to_num(c1.stderr), np.nan_to_num(c2.stderr)))
    return DetectionGap(p, q, c1.value, c2.value, raw, max(raw, 0.0), se)


# -- scatter data ------------------------------------------------------------

SCATTER_CLASSES = ("mixed-local", "pure-local", "pure-C2", "pure-C4")


def scatter_samples(samples: int, seed: int, wfn: WitnessFn = PAULI_ABS_SUM,
                    suite: MeasurementSuite | None = None) -> list[tuple[int, str, float]]:
    """Witness values of random past states of four kinds.

    ``mixed-local``: mixed rho and E on C^2.  ``pure-local``: pure rho and
    mixed E on C^2.  ``pure-C2``: pure rho and E on C^2.  ``pure-C4``: pure
    rho and E on C^2 x C^2, measured on the first factor.
    """
    suite = suite or pauli_suite()
    ops = suite.stack
    d = suite.dim_a
    rows = []
    for ci, cls in enumerate(SCATTER_CLASSES):
        rng = make_rng(seed, ci)
        if cls == "pure-C4":
            probs, valid = probs_from_g(_sample_g("state-and-effect", d, d, samples, rng), ops)
        elif cls == "pure-C2":
            probs, valid = probs_from_g(_sample_g("state-and-effect", d, 1, samples, rng), ops)
        else:
            if cls == "mixed-local":
                rho = np.stack([random_density(d, rng) for _ in range(samples)])
            else:
                v = haar_state(d, rng, samples)
                rho = np.einsum("ni,nj->nij", v, v.conj())
            eff = np.stack([random_density(d, rng) for _ in range(samples)])
            probs, valid = probs_from_mixed(rho, eff, ops)
        f = np.asarray(wfn(probs), dtype=float)
        rows += [(i, cls, float(f[i])) for i in range(samples) if valid[i]]
    return rows


def product_ceiling_samples(samples: int, seed: int, wfn: WitnessFn = PAULI_ABS_SUM,
                            suite: MeasurementSuite | None = None, k: int = 2) -> np.ndarray:
    """Witness values for product states ``psi_A (x) phi_B`` with Haar effects on C^d x C^k."""
    suite = suite or pauli_suite()
    d = suite.dim_a
    rng = make_rng(seed)
    psi_a = haar_state(d, rng, samples)
    phi_b = haar_state(k, rng, samples)
    psi = np.einsum("ni,nj->nij", psi_a, phi_b)
    e = haar_state(d * k, rng, samples).reshape(samples, d, k)
    g = psi @ np.conj(np.swapaxes(e, 1, 2))
    probs, valid = probs_from_g(g, suite.stack)
    return np.asarray(wfn(probs), dtype=float)[valid]

