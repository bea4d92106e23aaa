import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from retrodict.errors import DimensionMismatch, SingularDenominator
from retrodict.fixtures import vaa_pair
from retrodict.retrodiction import PastState, ProbabilityTable, past_probs, probability_table
from retrodict.sampling import haar_pure_past, haar_unitary, make_rng
from retrodict.witness import (
    MAX_PROB_SUM,
    PAULI_ABS_SUM,
    SCATTER_CLASSES,
    BlochPastState,
    MeasurementSuite,
    WitnessFn,
    _sample_g,
    detection_gap,
    estimate_ck,
    evaluate_witness,
    mub_suite,
    mub_unitaries,
    noisy_pauli_povm,
    optimize_c0_pauli,
    past_bloch,
    pauli_suite,
    probs_from_g,
    product_ceiling_samples,
    scatter_samples,
    witness_values,
)

C0 = 1.5 * np.sqrt(3)


# -- sampling ----------------------------------------------------------------


@pytest.mark.parametrize("d", [1, 2, 3, 5])
def test_haar_unitary_is_unitary(d):
    u = haar_unitary(d, make_rng(1))
    assert np.max(np.abs(u.conj().T @ u - np.eye(d))) <= 1e-12
    assert abs(abs(np.linalg.det(u)) - 1) <= 1e-10


def test_haar_first_moment():
    u = haar_unitary(4, make_rng(2), 10**4)
    x = np.abs(u[:, 0, 0]) ** 2
    se = x.std(ddof=1) / np.sqrt(x.size)
    assert abs(x.mean() - 0.25) < 3 * se


def test_haar_phase_fix_removes_bias():
    # without the phase fix the diagonal of Q would have a biased sign
    u = haar_unitary(3, make_rng(3), 20000)
    assert abs(u[:, 0, 0].mean()) < 0.02


def test_haar_pure_past_properties():
    psi, e = haar_pure_past(2, 3, make_rng(4))
    assert np.linalg.norm(psi) == pytest.approx(1.0, abs=1e-12)
    assert np.linalg.norm(e) == pytest.approx(1.0, abs=1e-12)
    psi2, e2 = haar_pure_past(2, 3, make_rng(4))
    assert np.array_equal(psi, psi2) and np.array_equal(e, e2)
    psi1, _ = haar_pure_past(2, 1, make_rng(5))
    assert psi1.shape == (2,)


def test_substreams_are_independent():
    a = make_rng(7, 0).standard_normal(4)
    b = make_rng(7, 1).standard_normal(4)
    assert not np.allclose(a, b)
    assert np.array_equal(a, make_rng(7, 0).standard_normal(4))


# -- settings ----------------------------------------------------------------


def test_mub_unitaries():
    us = mub_unitaries()
    assert np.array_equal(us[0], np.eye(4))
    for u in us:
        assert np.max(np.abs(u.conj().T @ u - np.eye(4))) <= 1e-12
    for a in range(5):
        for b in range(a + 1, 5):
            assert np.allclose(np.abs(us[a].conj().T @ us[b]) ** 2, 0.25, atol=1e-12)


def test_pauli_suite_outcome_zero_is_plus_one():
    for s, povm in zip(
        [np.array([[0, 1], [1, 0]]), np.array([[0, -1j], [1j, 0]]), np.diag([1, -1])],
        pauli_suite().povms,
    ):
        p0 = povm.stack[0]
        assert np.allclose(s @ p0, p0)


@given(st.floats(0, 1), st.floats(0, 1))
def test_noisy_pauli_complete(p, q):
    suite = noisy_pauli_povm(p, q)
    for povm in suite.povms:
        assert povm.completeness_violation() <= 1e-12
    assert suite.n_outcomes == 3


def test_noisy_pauli_limits():
    sharp = noisy_pauli_povm(1, 1)
    for povm, proj in zip(sharp.povms, pauli_suite().povms):
        assert np.allclose(povm.stack[:2], proj.stack)
        assert np.allclose(povm.stack[2], 0)
    blind = noisy_pauli_povm(0, 0)
    for povm in blind.povms:
        assert np.allclose(povm.stack[2], np.eye(2))
    with pytest.raises(ValueError):
        noisy_pauli_povm(1.5, 0)


def test_suite_requires_common_shape():
    with pytest.raises(DimensionMismatch):
        MeasurementSuite(pauli_suite().povms + mub_suite().povms[:1])
    with pytest.raises(ValueError):
        MeasurementSuite(pauli_suite().povms + noisy_pauli_povm(0.5, 0.5).povms[:1])


# -- witness functions -------------------------------------------------------


def test_witness_values_on_reference_tables():
    vaa = probability_table(vaa_pair(), pauli_suite().povms)
    assert evaluate_witness(PAULI_ABS_SUM, vaa) == pytest.approx(3.0)
    uniform = ProbabilityTable(np.full((3, 2), 0.5))
    assert evaluate_witness(PAULI_ABS_SUM, uniform) == 0.0
    assert evaluate_witness(MAX_PROB_SUM, uniform) == 1.5
    assert evaluate_witness(MAX_PROB_SUM, ProbabilityTable(np.full((5, 4), 0.25))) == 1.25


def test_unknown_witness_kind():
    with pytest.raises(ValueError):
        WitnessFn("Other")


@given(st.integers(0, 2**31 - 1), st.floats(0, 1))
def test_witnesses_are_convex(seed, lam):
    rng = np.random.default_rng(seed)
    for wfn, m in ((PAULI_ABS_SUM, 2), (MAX_PROB_SUM, 4)):
        p1, p2 = rng.dirichlet(np.ones(m), size=3), rng.dirichlet(np.ones(m), size=3)
        mix = wfn(lam * p1 + (1 - lam) * p2)
        assert mix <= lam * wfn(p1) + (1 - lam) * wfn(p2) + 1e-12


def test_max_ties_do_not_matter():
    assert MAX_PROB_SUM(np.array([[0.5, 0.5, 0.0]])) == 0.5


# -- Bloch parametrization ---------------------------------------------------


@pytest.mark.parametrize(
    "r, s, expected",
    [
        ((0, 0, 1), (0, 0, 0), (0, 0, 1)),
        ((0.5, 0, 0), (0.5, 0, 0), (0.8, 0, 0)),
        ((1, 0, 0), (0, 1, 0), (1, 1, 0)),
    ],
)
def test_past_bloch_examples(r, s, expected):
    assert np.allclose(past_bloch(BlochPastState(r, s)), expected)


@given(st.integers(0, 2**31 - 1))
def test_past_bloch_matches_retrodiction(seed):
    rng = np.random.default_rng(seed)
    r = rng.standard_normal(3)
    s = rng.standard_normal(3)
    r *= rng.uniform() / np.linalg.norm(r)
    s *= rng.uniform() / np.linalg.norm(s)
    bp = BlochPastState(r, s)
    past = bp.past_state()
    direct = [p[0] - p[1] for p in (past_probs(past, povm) for povm in pauli_suite().povms)]
    assert np.allclose(past_bloch(bp), direct, atol=1e-12)


def test_past_bloch_singular():
    with pytest.raises(SingularDenominator):
        past_bloch(BlochPastState((1, 0, 0), (-1, 0, 0)))


def test_bloch_vectors_must_be_physical():
    with pytest.raises(ValueError):
        BlochPastState((1, 1, 0), (0, 0, 0))


def test_optimize_c0():
    c0, comp = optimize_c0_pauli()
    assert c0 == pytest.approx(C0, abs=1e-6)
    assert 0.85 <= comp <= 0.88
    assert abs(past_bloch(BlochPastState(np.zeros(3), np.zeros(3)))).sum() == 0.0


# -- sampling of witness values ---------------------------------------------


@pytest.mark.parametrize("strategy", ["state-and-effect", "effect-only"])
@pytest.mark.parametrize("k", [1, 2, 3])
def test_sampled_g_has_rank_at_most_k(strategy, k):
    g = _sample_g(strategy, 4, k, 50, make_rng(1))
    ranks = np.linalg.matrix_rank(g, tol=1e-10)
    assert np.all(ranks <= k)
    assert np.all(ranks == k)


def test_g_probabilities_match_past_state():
    rng = make_rng(9)
    psi, e = haar_pure_past(2, 2, rng)
    g = psi.reshape(2, 2) @ e.reshape(2, 2).conj().T
    probs, valid = probs_from_g(g[None], pauli_suite().stack)
    direct = probability_table(PastState.from_vectors(psi, e, (2, 2)), pauli_suite().povms).probs
    assert valid[0]
    assert np.allclose(probs[0], direct, atol=1e-12)


def test_invalid_samples_flagged():
    probs, valid = probs_from_g(np.zeros((1, 2, 2)), pauli_suite().stack)
    assert not valid[0]


def test_estimate_is_monotone_and_prefix_consistent():
    long = estimate_ck(PAULI_ABS_SUM, pauli_suite(), 2, 1, 20000, seed=3)
    short = estimate_ck(PAULI_ABS_SUM, pauli_suite(), 2, 1, 5000, seed=3)
    vals = [v for _, v in long.trace]
    assert all(b >= a for a, b in zip(vals, vals[1:]))
    assert long.trace[-1] == (20000, long.value)
    assert long.value >= short.value
    running_at_5000 = max(v for i, v in long.trace if i <= 5000)
    assert running_at_5000 == short.value


def test_estimate_deterministic():
    a = estimate_ck(MAX_PROB_SUM, mub_suite(), 4, 2, 3000, seed=8)
    b = estimate_ck(MAX_PROB_SUM, mub_suite(), 4, 2, 3000, seed=8)
    assert a.trace == b.trace
    assert a.skipped == 0 and a.skip_rate == 0.0
    assert len(a.batch_maxima) == 10
    assert np.isfinite(a.stderr)


def test_estimate_preconditions():
    with pytest.raises(ValueError):
        estimate_ck(PAULI_ABS_SUM, pauli_suite(), 2, 3, 10, seed=0)
    with pytest.raises(ValueError):
        estimate_ck(PAULI_ABS_SUM, pauli_suite(), 2, 1, 0, seed=0)
    with pytest.raises(DimensionMismatch):
        witness_values(PAULI_ABS_SUM, pauli_suite(), 4, 1, 10, seed=0)


def test_estimates_are_lower_bounds():
    k1 = estimate_ck(PAULI_ABS_SUM, pauli_suite(), 2, 1, 50000, seed=4)
    k2 = estimate_ck(PAULI_ABS_SUM, pauli_suite(), 2, 2, 50000, seed=4)
    assert k1.value <= C0 + 1e-9
    assert k2.value <= 3.0 + 1e-9
    assert k1.value <= k2.value + 3 * np.hypot(k1.stderr, k2.stderr)


def test_strategies_consistent():
    se = estimate_ck(PAULI_ABS_SUM, pauli_suite(), 2, 1, 50000, 5, "state-and-effect")
    eo = estimate_ck(PAULI_ABS_SUM, pauli_suite(), 2, 1, 50000, 5, "effect-only")
    assert abs(se.value - eo.value) <= 3 * np.hypot(se.stderr, eo.stderr) + 1e-3


def test_unknown_strategy():
    with pytest.raises(ValueError):
        estimate_ck(PAULI_ABS_SUM, pauli_suite(), 2, 1, 10, 0, "other")


def test_product_states_respect_ceiling():
    vals = product_ceiling_samples(10**4, seed=6)
    assert vals.size == 10**4
    assert vals.max() <= C0 + 1e-6


def test_scatter_classes():
    rows = scatter_samples(300, seed=2)
    classes = {c for _, c, _ in rows}
    assert classes == set(SCATTER_CLASSES)
    by = {c: [f for _, cc, f in rows if cc == c] for c in SCATTER_CLASSES}
    for c in ("mixed-local", "pure-local", "pure-C2"):
        assert max(by[c]) <= C0 + 1e-9
    assert max(by["pure-C4"]) <= 3.0 + 1e-9


def test_detection_gap_structure():
    blind = detection_gap(0, 0, 2000, seed=1)
    assert blind.delta == 0.0 and blind.c0 == 3.0
    a = detection_gap(1, 0, 2000, seed=1)
    b = detection_gap(0, 1, 2000, seed=1)
    assert a.delta == pytest.approx(b.delta, abs=1e-12)
    assert a.delta >= 0 and a.raw_delta == pytest.approx(a.c2 - a.c0)
