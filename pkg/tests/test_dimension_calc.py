import math
from fractions import Fraction

import numpy as np
import pytest

from stabledim.dimension_calc import (
    BAND,
    CascadeParams,
    DimensionPair,
    EigenData,
    HolderParams,
    WidthCascade,
    beta_star,
    beta_star_array,
    bound_constants,
    branch_a,
    candidate_scales,
    cantor_dimensions,
    cantor_eigendata,
    cascade_check,
    case_ii_criterion,
    containment_threshold,
    diagonal_beta,
    diagonal_endpoints,
    e_of_d,
    eigen_condition,
    exceptional_measure_bound,
    exceptional_measure_forms,
    holder_combine,
    in_D,
    in_PY,
    lemma_case_bound,
    region_areas,
    solve_expected_dim,
    strongly_regular_measure_bound,
    synthetic_cascade,
)

PARAMS = CascadeParams(1e-5, 0.05, 1e-3, 1.9, 1.3)


def test_beta_star_examples():
    assert beta_star(DimensionPair(0.6, 0.6)) == pytest.approx(1.0, abs=1e-14)
    assert beta_star(DimensionPair(11 / 21, 11 / 21)) == pytest.approx(5 / 3, abs=1e-14)
    assert beta_star(DimensionPair(0.55, 0.55)) == pytest.approx(18 / 13, rel=1e-14)


def test_beta_star_symmetric():
    rng = np.random.default_rng(0)
    a, b = rng.uniform(0.01, 0.99, (2, 1000))
    np.testing.assert_allclose(beta_star_array(a, b), beta_star_array(b, a), rtol=1e-14)


def test_beta_star_singular():
    # max + sum = 1 at (0.2, 0.4): 0.4 + 0.6 = 1
    with pytest.raises(ValueError, match="singular denominator"):
        beta_star(DimensionPair(0.2, 0.4))


def test_dimension_pair_range():
    with pytest.raises(ValueError):
        DimensionPair(0.0, 0.5)
    with pytest.raises(ValueError):
        DimensionPair(0.5, 1.0)


def test_in_py_examples():
    assert in_PY(DimensionPair(0.55, 0.55))
    assert not in_PY(DimensionPair(0.6, 0.6))
    assert not in_PY(DimensionPair(0.9, 0.9))


def test_in_d_examples():
    assert in_D(DimensionPair(0.51, 0.51))
    assert not in_D(DimensionPair(11 / 21, 11 / 21))
    assert not in_D(DimensionPair(0.55, 0.55))


def test_eigen_condition_examples():
    e = EigenData(0.25, 2.0, 0.5, 4.0)
    assert e.omega_s == pytest.approx(2.0)
    dp = DimensionPair(0.55, 0.55)
    assert eigen_condition(dp, e) == (beta_star(dp) <= 1 + min(2.0, e.omega_u))


def test_eigen_condition_cantor_reduction():
    # l = 2, lambda = 1/4, mu = 3: bound 1 + min(log 4/log 3, log 3/log 4) = (d_s + d_u)/max
    dp = cantor_dimensions(2, 0.25, 3.0)
    e = cantor_eigendata(0.25, 3.0)
    bound = 1 + min(e.omega_s, e.omega_u)
    assert bound == pytest.approx(dp.total / dp.dmax, rel=1e-14)
    assert eigen_condition(dp, e) == (beta_star(dp) <= dp.total / dp.dmax)


def test_eigen_conservative_requires_unit_product():
    with pytest.raises(ValueError):
        EigenData(0.5, 3.0, 0.5, 2.0, conservative=True)


def test_cantor_dimensions():
    assert cantor_dimensions(2, 0.25, 4.0).d_s0 == pytest.approx(0.5)
    dp = cantor_dimensions(3, 1 / 9, 9.0)
    assert (dp.d_s0, dp.d_u0) == pytest.approx((0.5, 0.5))
    dp = cantor_dimensions(2, 1 / 3, 3.0)
    assert dp.d_s0 == pytest.approx(math.log(2) / math.log(3))
    with pytest.raises(ValueError):
        cantor_dimensions(3, 0.5, 4.0)


def test_region_areas_small():
    area_d, area_py, ratio = region_areas(256)
    assert 0 < area_d < area_py
    assert ratio == pytest.approx(area_d / area_py)
    with pytest.raises(ValueError):
        region_areas(128)


def test_region_ratio_refinement_sanity():
    r = [region_areas(n)[2] for n in (256, 512, 1024, 2048)]
    diffs = [abs(b - a) for a, b in zip(r, r[1:])]
    # successive refinements shrink
    assert diffs[1] <= 4 * diffs[2] + 1e-12 or diffs[2] <= diffs[0]


def test_diagonal_endpoints():
    a, b = diagonal_endpoints()
    assert abs(a - 0.6) < 1e-12
    assert abs(b - 11 / 21) < 1e-12
    assert diagonal_beta(0.5) == pytest.approx(2.0)


def test_candidate_scales():
    assert candidate_scales(0.1, 1.0, 3) == pytest.approx([0.1, 0.01, 1e-4, 1e-8])
    assert candidate_scales(0.3, 0.5, 0) == [0.3]
    assert strongly_regular_measure_bound(0.01, 0.1) == pytest.approx(0.01 * (1 - 3 * 0.01**0.01))


def test_cascade_params_ordering():
    with pytest.raises(ValueError):
        CascadeParams(1e-3, 0.05, 1e-3, 1.9, 1.3)
    with pytest.raises(ValueError):
        CascadeParams(1e-5, 0.05, 1e-3, 1.9, 1.85)


def test_cascade_synthetic_admissible():
    w = synthetic_cascade(PARAMS, 5)
    assert cascade_check(w).admissible


def test_cascade_flat_violation():
    w = synthetic_cascade(PARAMS, 3)
    P, Q = list(w.P_widths), list(w.Q_widths)
    P[2], Q[2] = P[1], Q[1]
    rep = cascade_check(WidthCascade(P, Q, PARAMS))
    assert not rep.admissible
    assert rep.index == 1 and rep.family == "recursive"


def test_cascade_empty():
    assert cascade_check(WidthCascade([0.1], [1e-5], PARAMS)).admissible


def test_bound_constants_example():
    p = CascadeParams(1e-3, 0.5, 0.1, 3.0, 1.1, strict=False)
    w = WidthCascade([0.1, 1e-4], [0.01, 1e-4], p)
    bc = bound_constants(w, 1)
    assert bc.K_k == pytest.approx(100.0)
    assert bc.L_k == pytest.approx(10.0)
    assert bc.r_k == pytest.approx(1e-4**0.45 * 1e-4)
    assert bc.s_k == pytest.approx(bc.L_k * bc.r_k / bc.K_k)
    assert bc.N_k == pytest.approx(0.01**0.45 / bc.r_k)
    with pytest.raises(ValueError):
        bound_constants(w, 0)


def test_bound_constants_degenerate_eta():
    p = CascadeParams(1e-3, 0.5, 1.0, 3.0, 1.1, C=2.0, strict=False)
    w = WidthCascade([0.1, 1e-3, 1e-5], [0.01, 1e-3, 1e-5], p)
    assert bound_constants(w, 2).r_k == pytest.approx(2.0 * 1e-5)


def test_bound_constants_equal_widths():
    C, eta, wdt, k = 1.5, 0.2, 0.01, 3
    p = CascadeParams(1e-3, 0.5, eta, 3.0, 1.1, C=C, strict=False)
    w = WidthCascade([wdt] * (k + 1), [wdt] * (k + 1), p)
    expected = C**k * wdt ** (-1 - (k - 1) * (1 + eta) / 2)
    assert bound_constants(w, k).K_k == pytest.approx(expected, rel=1e-12)


def test_exceptional_identity():
    w = synthetic_cascade(PARAMS, 4)
    for d in (1.0, 1.3, 1.77, 2.0):
        a, b = exceptional_measure_forms(w, 3, d)
        assert abs(a - b) <= 1e-9 * a
        assert exceptional_measure_bound(w, 3, d) == pytest.approx(a, rel=1e-12)


def test_exceptional_d_one_drops_p0():
    w = synthetic_cascade(PARAMS, 3)
    w2 = WidthCascade((0.5,) + w.P_widths[1:], w.Q_widths, PARAMS)
    assert exceptional_measure_bound(w, 2, 1.0) == pytest.approx(exceptional_measure_bound(w2, 2, 1.0))


def test_branch_examples():
    assert branch_a(DimensionPair(0.51, 0.51))
    assert not branch_a(DimensionPair(0.55, 0.55))


def test_lemma_case_bound_cases():
    w = synthetic_cascade(PARAMS, 4)
    a = lemma_case_bound(DimensionPair(0.51, 0.51), w, 3, 1.5)
    b = lemma_case_bound(DimensionPair(0.55, 0.55), w, 3, 1.54)
    assert a.case == "a" and a.dominates
    assert b.case == "b" and b.dominates


def test_lemma_case_bound_rejects_inadmissible():
    w = synthetic_cascade(PARAMS, 3)
    P, Q = list(w.P_widths), list(w.Q_widths)
    Q[3] = Q[2]
    P[3] = P[2]
    with pytest.raises(ValueError, match="inadmissible"):
        lemma_case_bound(DimensionPair(0.51, 0.51), WidthCascade(P, Q, PARAMS), 3, 1.5)


def test_e_of_d():
    assert e_of_d(DimensionPair(0.51, 0.51), 1.5, 1.7) == pytest.approx(0.25)
    assert e_of_d(DimensionPair(0.55, 0.55), 1.5, 5 / 3) == pytest.approx(0.225)
    with pytest.raises(ValueError):
        e_of_d(DimensionPair(0.55, 0.55), 1.5, 1.0)


def test_solve_expected_dim_examples():
    case, v = solve_expected_dim(DimensionPair(0.51, 0.51))
    assert case == "i"
    assert v == pytest.approx(1 / (1 / 0.51 + 25.0), rel=1e-12)
    case, v = solve_expected_dim(DimensionPair(0.55, 0.55))
    assert case == "ii"
    assert v < 0.55
    assert case_ii_criterion(DimensionPair(0.55, 0.55))
    with pytest.raises(ValueError):
        solve_expected_dim(DimensionPair(0.4, 0.5))


def test_containment_threshold_examples():
    assert containment_threshold(Fraction(5, 3), 0) is False
    assert containment_threshold(1.7, 0)
    assert containment_threshold(2, 0.1, 1)
    assert not containment_threshold(1.2, 0.0, 10)


def test_holder_case_i_matches():
    dp = DimensionPair(0.51, 0.51)
    rep = holder_combine(HolderParams.from_rho(0.51), dp, 1.03, 1.85, 0.0, target=0.02)
    assert rep.solved and rep.case == "i"
    assert rep.d - 1 == pytest.approx(1 / (1 / 0.51 + 1 / 0.04), abs=1e-9)
    assert rep.matches_closed_form


def test_holder_case_ii_matches():
    dp = DimensionPair(0.52, 0.54)
    rep = holder_combine(HolderParams.from_rho(0.52), dp, 1.3, 1.75, 0.0)
    assert rep.solved and rep.case == "ii" and rep.matches_closed_form


def test_holder_conjugacy():
    with pytest.raises(ValueError):
        HolderParams(2.0, 3.0, 0.5)


def test_in_py_beta_equivalence_sample():
    rng = np.random.default_rng(5)
    for a, b in rng.uniform(0.01, 0.99, (2000, 2)):
        dp = DimensionPair(a, b)
        if dp.dmax + dp.total <= 1:
            continue
        beta = beta_star(dp)
        if abs(beta - 1) < BAND:
            continue
        assert in_PY(dp) == (beta > 1)
