import math

import numpy as np
import pytest

from jsrcert import criteria, kozyakin, smallmat, words
from jsrcert.bounds import refine
from jsrcert.criteria import Certificate
from jsrcert.errors import ConditionKError, InvalidMatrixError
from jsrcert.kozyakin import KozyakinConfig, Undecided
from jsrcert.words import MatrixSet

import oracles

FAST = KozyakinConfig(horizon=20_000)


@pytest.fixture(scope="module")
def unit_model():
    return kozyakin.build_model(1, 1, 1, 1)


@pytest.fixture(scope="module")
def unit_approx(unit_model):
    return kozyakin.barabanov_iterate(unit_model, 4096, 1e-10, 20_000)


# -- model -------------------------------------------------------------------


def test_build_model_valid_cases():
    m = kozyakin.build_model(1, 1, 1, 1, 1, 1)
    assert np.array_equal(m.A0, [[1, 1], [0, 1]]) and np.array_equal(m.A1, [[1, 0], [1, 1]])
    m = kozyakin.build_model(0.5, 2, 1, 3, 2, 0.7)
    assert np.allclose(m.A0, 2 * np.array([[0.5, 2], [0, 1]]))
    assert np.allclose(m.A1, 0.7 * np.array([[1, 0], [1, 3]]))


@pytest.mark.parametrize("params,name", [
    ((1.5, 1, 1, 1), "a <= 1"),
    ((0.0, 1, 1, 1), "a > 0"),
    ((0.5, 0.5, 1, 1), "b*c >= 1"),
    ((0.5, 1, 1, -1), "d > 0"),
    ((0.5, 1, 1, 1, -1.0), "alpha > 0"),
    ((0.5, 1, 1, 1, 1.0, 0.0), "beta > 0"),
])
def test_condition_k_names_the_failed_inequality(params, name):
    with pytest.raises(ConditionKError) as err:
        kozyakin.build_model(*params)
    assert err.value.inequality == name
    assert str(err.value) == f"{name} violated"


def test_model_from_set_round_trip():
    m = kozyakin.build_model(0.5, 2, 1, 3, 2, 0.7)
    back = kozyakin.model_from_set(m.matrix_set)
    assert np.allclose([back.a, back.b, back.c, back.d, back.alpha, back.beta], [0.5, 2, 1, 3, 2, 0.7])
    assert kozyakin.model_from_set(MatrixSet.of(np.eye(2), np.eye(2))) is None


# -- extremal norm -------------------------------------------------------------


def test_unit_model_norm_matches_refine(unit_approx):
    assert unit_approx.converged and unit_approx.residual <= 1e-10
    assert np.all(unit_approx.values > 0)
    assert abs(unit_approx.rho_hat - oracles.golden_sqrt()) <= 1e-4


def test_norm_iteration_validates_arguments(unit_model):
    with pytest.raises(ValueError):
        kozyakin.barabanov_iterate(unit_model, 32)
    with pytest.raises(ValueError):
        kozyakin.barabanov_iterate(unit_model, 128, tol=0.0)


def test_partial_result_when_sweeps_run_out(unit_model):
    ap = kozyakin.barabanov_iterate(unit_model, 1024, 1e-14, 3)
    assert not ap.converged and ap.iterations == 3 and ap.residual > 1e-14
    with pytest.raises(ValueError):
        kozyakin.extremal_switching(unit_model, ap, 0.3, 10)


def test_singleton_irreducible_reduces_to_power_method():
    m = np.array([[1.0, -2.0], [1.0, 1.0]])  # eigenvalues 1 +- i sqrt 2
    ap = kozyakin.iterate_norm([m], 4096, 1e-10, 50_000)
    assert ap.converged
    assert ap.rho_hat == pytest.approx(smallmat.spectral_radius(m), rel=1e-6)
    assert set(kozyakin.extremal_switching(None, ap, 0.3, 100)) == {0}
    rot = kozyakin.iterate_norm([0.9 * smallmat.rotation(0.37)], 512, 1e-12, 100)
    assert rot.rho_hat == pytest.approx(0.9, rel=1e-12)


def test_singleton_model_member_upper_value_tends_to_its_radius():
    # a single triangular member is reducible, so min(Tv/v) never meets max(Tv/v);
    # the upper Collatz-Wielandt value still converges to rho(A0)
    m = kozyakin.build_model(0.5, 2, 1, 1)
    ap = kozyakin.barabanov_iterate(m, 1024, 1e-12, 3000, active=(0,))
    assert not ap.converged
    assert ap.hi == pytest.approx(smallmat.spectral_radius(m.A0), abs=1e-6)


def test_scaling_doubles_rho_hat():
    m = kozyakin.build_model(0.5, 1, 2, 0.5, 1.3, 0.8)
    m2 = kozyakin.build_model(0.5, 1, 2, 0.5, 2.6, 1.6)
    a = kozyakin.barabanov_iterate(m, 1024, 1e-10)
    b = kozyakin.barabanov_iterate(m2, 1024, 1e-10)
    assert b.rho_hat == pytest.approx(2 * a.rho_hat, rel=1e-12)


@pytest.mark.parametrize("params", [(1, 1, 1, 1, 1, 1), (0.5, 1, 2, 0.5, 1.0, 1.4),
                                    (0.5, 1, 2, 0.5, 3.0, 1.0), (0.8, 2, 1, 1.5, 1, 1)])
def test_collatz_wielandt_bracket_contains_refine_value(params):
    m = kozyakin.build_model(*params)
    rep = refine(m.matrix_set, 1e-9, 200_000, 10)
    ap = kozyakin.barabanov_iterate(m, 4096, 1e-10)
    for lo, hi in ap.history:
        assert lo <= rep.upper + 1e-3
        assert hi >= rep.lower - 1e-3


def test_polygon_upper_is_a_valid_bound():
    for params in [(1, 1, 1, 1), (0.5, 1, 2, 0.5, 1.0, 1.4), (0.3, 5, 0.4, 2, 1.0, 0.6)]:
        m = kozyakin.build_model(*params)
        ap = kozyakin.barabanov_iterate(m, 2048, 1e-10)
        ub = kozyakin.polygon_upper(ap)
        rep = refine(m.matrix_set, 1e-9, 200_000, 10)
        assert ub >= rep.lower - 1e-12
        assert ub <= ap.hi * (1 + 1e-3)


@pytest.mark.parametrize("b,c", [(1, 1), (2, 1), (1, 3), (2.5, 0.7)])
def test_grid_refinement_never_widens_the_error(b, c):
    m = kozyakin.build_model(1, b, c, 1)
    truth = math.sqrt(smallmat.spectral_radius(m.A0 @ m.A1))
    errs = [abs(kozyakin.barabanov_iterate(m, n, 1e-12).rho_hat - truth) for n in (256, 512, 1024, 2048, 4096)]
    assert all(e2 <= e1 + 1e-12 for e1, e2 in zip(errs, errs[1:]))


# -- switching -----------------------------------------------------------------


def test_unit_model_alternates(unit_model, unit_approx):
    seq = kozyakin.extremal_switching(unit_model, unit_approx, 0.3, 2_000)
    tail = seq[1000:]
    assert abs(sum(tail) / len(tail) - 0.5) <= 0.01
    with pytest.raises(ValueError):
        kozyakin.extremal_switching(unit_model, unit_approx, 0.3, 0)


def test_frequency_independent_of_start(unit_model, unit_approx):
    rng = np.random.default_rng(0)
    sigmas = []
    for x0 in rng.uniform(0, math.pi, 5):
        sigmas.append(kozyakin.switching_frequency(unit_model, FAST, unit_approx, x0=float(x0)).sigma)
    assert max(sigmas) - min(sigmas) <= 2 / FAST.horizon + 1e-3


def test_frequency_with_vector_start(unit_model, unit_approx):
    a = kozyakin.switching_frequency(unit_model, FAST, unit_approx, x0=np.array([1.0, 2.0]))
    assert 0.49 <= a.sigma <= 0.51


@pytest.mark.parametrize("b,c", [(1, 1), (2, 1), (1, 3), (4, 0.5)])
def test_a_d_one_family_has_frequency_one_half(b, c):
    est = kozyakin.switching_frequency(kozyakin.build_model(1, b, c, 1), FAST)
    assert 0.49 <= est.sigma <= 0.51 and (est.p, est.q) == (1, 2)
    assert math.gcd(est.p, est.q) == 1 and est.approx_error == abs(est.sigma - 0.5)


def test_frequency_falls_as_first_member_dominates():
    ratios = [0.5, 1, 2, 4, 8, 16]
    sig = [kozyakin.switching_frequency(kozyakin.build_model(0.5, 1, 2, 0.5, r, 1), FAST).sigma
           for r in ratios]
    assert all(0 <= s <= 1 for s in sig)
    assert all(s2 <= s1 for s1, s2 in zip(sig, sig[1:]))
    assert sig[-1] == 0.0


@pytest.mark.parametrize("ratio", [0.5, 1, 2, 4, 8])
def test_frequency_matches_brute_force_best_words(ratio):
    m = kozyakin.build_model(0.5, 1, 2, 0.5, ratio, 1)
    est = kozyakin.switching_frequency(m, FAST)
    _, w = oracles.max_product_growth([m.A0, m.A1], 12)
    assert est.sigma == pytest.approx(w.count(2) / 12, abs=1e-3)


def test_best_rational_and_words():
    assert kozyakin.best_rational(0.5, 64) == (1, 2, 0.0)
    p, q, err = kozyakin.best_rational(math.pi - 3, 64)
    assert (p, q) == (9, 64) and err == pytest.approx(abs(math.pi - 3 - 9 / 64))
    assert kozyakin.best_rational(math.pi - 3, 10)[:2] == (1, 7)
    assert kozyakin.christoffel_word(2, 5) == (0, 0, 1, 0, 1)
    w = kozyakin.christoffel_word(7, 12)
    assert sum(w) == 7 and words.is_lyndon(w)
    # balanced: every pair of equal-length cyclic factors differs by at most one 1
    ww = w + w
    for n in range(1, 12):
        counts = {sum(ww[i:i + n]) for i in range(12)}
        assert max(counts) - min(counts) <= 1
    necks = kozyakin.candidate_necklaces(2, 6)
    assert necks == [(0, 0, 0, 0, 1, 1), (0, 0, 0, 1, 0, 1), (0, 0, 1, 0, 0, 1)]
    few = kozyakin.candidate_necklaces(20, 41, budget=10)
    assert all(len(w) == 41 and sum(w) == 20 for w in few) and len(few) <= 4


# -- decision ---------------------------------------------------------------------


def test_theorem8_unit_model(unit_model):
    cert = kozyakin.theorem8_decide(unit_model)
    assert isinstance(cert, Certificate) and cert.criterion == "Kozyakin"
    assert cert.word == (1, 2)
    assert cert.value == pytest.approx(oracles.golden_sqrt(), abs=1e-6)


def test_theorem8_depth_one_certificate():
    m = kozyakin.build_model(0.5, 1, 2, 0.5, 8.0, 1.0)
    cert = kozyakin.theorem8_decide(m, FAST)
    assert cert.details["q"] == 1 and cert.word == (1,)
    assert cert.value == pytest.approx(8.0)


def test_theorem8_undecided_when_no_small_denominator_fits():
    m = kozyakin.build_model(0.5, 1, 2, 0.5, 0.56, 1.0)
    out = kozyakin.theorem8_decide(m, KozyakinConfig(horizon=20_000, q_max=4))
    assert isinstance(out, Undecided)
    assert out.estimate is not None and out.estimate.q <= 4 and out.estimate.approx_error > 1e-3


def test_theorem8_certificates_cross_validate():
    rng = np.random.default_rng(2)
    for _ in range(4):
        alpha, beta = rng.uniform(0.3, 3.0, 2)
        m = kozyakin.build_model(0.5, 1, 2, 0.5, alpha, beta)
        out = kozyakin.theorem8_decide(m, FAST)
        assert isinstance(out, (Certificate, Undecided))
        if isinstance(out, Certificate):
            rep = refine(m.matrix_set, 1e-9, 200_000, 8)
            criteria.cross_validate(m.matrix_set, out, rep, 1e-6)


# -- case ladder --------------------------------------------------------------------


def _b(a, b):
    return np.array([[a, b], [0.0, 1.0]])


def _c(c, d):
    return np.array([[1.0, 0.0], [c, d]])


def test_dispatch_case2():
    r = kozyakin.example9_dispatch(_b(0.5, 2), _c(0, 3))
    assert r.case == 2 and r.certificate.value == pytest.approx(3.0)


def test_dispatch_case6_with_unequal_off_diagonals():
    r = kozyakin.example9_dispatch(_b(1, 2), _c(1, 1))
    assert r.case == 6
    b0, b1 = _b(1, 2), _c(1, 1)
    assert r.certificate.value == pytest.approx(math.sqrt(oracles.rho(b0 @ b1)), abs=1e-6)


def test_dispatch_b_equal_c_fires_the_swap_case_first():
    # a = d and b = c: the swap case precedes case 6 in the ladder
    r = kozyakin.example9_dispatch(_b(1, 1), _c(1, 1))
    assert r.case == 4
    assert r.certificate.value == pytest.approx(oracles.golden_sqrt(), abs=1e-9)


def test_dispatch_case5_gate_fails_to_generic():
    r = kozyakin.example9_dispatch(_b(2, 3), _c(1, 2))
    assert r.case is None and r.route == "generic certify"


def test_dispatch_other_cases():
    assert kozyakin.example9_dispatch(_b(0, 3), _c(1, 2)).case == 1
    r = kozyakin.example9_dispatch(_b(-1, 3), _c(1, -2))
    assert r.case == 3 and r.certificate.criterion == "ThmE"
    r = kozyakin.example9_dispatch(_b(0.5, 1), _c(0.1, 0.5))
    assert r.case == 5 and r.certificate.criterion == "Cor4"
    q = r.certificate.witness["Q"]
    assert np.allclose(q, [[-0.5, 1], [0, 1]])
    rep = refine(MatrixSet.of(_b(0.5, 1), _c(0.1, 0.5)), 1e-9, 200_000, 8)
    assert rep.lower - 1e-6 <= r.certificate.value <= rep.upper + 1e-6


def test_dispatch_exactly_one_case():
    rng = np.random.default_rng(9)
    for _ in range(200):
        a, b, c, d = rng.choice([-1.0, 0.0, 0.5, 1.0, 2.0], 4)
        case = kozyakin.example9_case(_b(a, b), _c(c, d))
        assert case in (None, 1, 2, 3, 4, 5, 6)


def test_dispatch_rejects_wrong_shape():
    with pytest.raises(InvalidMatrixError):
        kozyakin.example9_dispatch(np.eye(2) * 2, _c(1, 1))
