import math

import numpy as np
import pytest

from stabledim.affine_like import (
    AffineLikeMap,
    ConeParams,
    FoldingModel,
    GridRep,
    IntervalPair,
    QuadraticRep,
    branch_residual,
    check_cone,
    check_distortion,
    delta_distance,
    distortion_values,
    gate_inequality,
    injective_on_samples,
    jacobian_width_check,
    linear_map,
    map_from_kv,
    map_to_kv,
    parabolic_compose,
    parabolic_gate,
    random_cone_map,
    simple_compose,
    widths,
)
from stabledim.cli import fold_cone, fold_example

UNIT = IntervalPair((0.0, 1.0), (0.0, 1.0))
# u0 v0 must exceed 1; diagonal maps have no off-diagonal terms so 1.1 acts like 1
CP = ConeParams(2.0, 1.1, 1.1)


def test_widths_linear():
    assert widths(linear_map(3, 1 / 3)) == pytest.approx((1 / 3, 1 / 3))
    assert widths(linear_map(10, 0.1)) == pytest.approx((0.1, 0.1))


def test_widths_composition():
    F = linear_map(3, 1 / 3)
    FF = simple_compose(F, F, CP)
    assert widths(FF) == pytest.approx((1 / 9, 1 / 9))
    assert FF.n == 2
    assert check_cone(FF, CP.squared())


def test_cone_examples():
    assert check_cone(linear_map(3, 1 / 3), CP)
    assert not check_cone(linear_map(1.5, 1 / 1.5), CP)


def test_cone_off_diagonal():
    stable_ok = QuadraticRep((0.1, 0.2, 0.4), (0.1, 0.0, 0.3))
    stable_bad_u = QuadraticRep((0.1, 0.2, 0.4), (0.1, 0.0, 0.6))
    cp = ConeParams(2.0, 1.0 + 1e-9, 1.01)
    assert check_cone(AffineLikeMap(UNIT, UNIT, stable_ok), cp)
    assert not check_cone(AffineLikeMap(UNIT, UNIT, stable_bad_u), cp)


def test_cone_params_validation():
    with pytest.raises(ValueError):
        ConeParams(1.0, 1.1, 1.1)
    with pytest.raises(ValueError):
        ConeParams(2.0, 1.0, 1.0)
    with pytest.raises(ValueError):
        ConeParams(2.0, 3.0, 3.0)


def test_distortion_linear():
    F = linear_map(3, 1 / 3)
    assert all(v == pytest.approx(0.0, abs=1e-12) for v in distortion_values(F).values())
    assert check_distortion(F, 0.0)
    assert check_distortion(F, 1.0)


def test_distortion_quadratic():
    F = AffineLikeMap(UNIT, UNIT, QuadraticRep((0.0, 1 / 3, 0.0, 0.0, 0.0, 0.01), (0.0, 0.0, 1 / 3)))
    assert max(distortion_values(F).values()) == pytest.approx(0.02, rel=1e-6)
    assert check_distortion(F, 0.02)
    assert not check_distortion(F, 0.019)


def test_map_validation():
    with pytest.raises(ValueError, match="vanishes"):
        AffineLikeMap(UNIT, UNIT, QuadraticRep((0.5, 0.0, 0.0), (0.0, 0.0, 0.5)))
    with pytest.raises(ValueError, match="leaves"):
        AffineLikeMap(UNIT, UNIT, QuadraticRep((0.0, 2.0, 0.0), (0.0, 0.0, 0.5)))


def test_forward_inverse_roundtrip():
    F = random_cone_map(np.random.default_rng(3), CP, quadratic=0.05)
    (p_lo, p_hi), _ = F.strip_ranges()
    rng = np.random.default_rng(4)
    y0 = rng.uniform(0, 1, 50)
    x1 = rng.uniform(0, 1, 50)
    x0, y1 = F.rep.values(y0, x1)
    img = F.forward(np.stack([x0, y0], 1))
    np.testing.assert_allclose(img, np.stack([x1, y1], 1), atol=1e-10)
    back = F.inverse(img)
    np.testing.assert_allclose(back, np.stack([x0, y0], 1), atol=1e-10)
    assert p_lo <= x0.min() and x0.max() <= p_hi


def test_simple_compose_closed_form_and_solver_agree():
    rng = np.random.default_rng(8)
    F = random_cone_map(rng, CP)
    F2 = random_cone_map(rng, CP, quadratic=0.05)
    H = simple_compose(F, F2, CP)
    ys, xs = rng.uniform(0, 1, (2, 30))
    x0, y2 = H.rep.values(ys, xs)
    direct = F2.forward(F.forward(np.stack([x0, ys], 1)))
    np.testing.assert_allclose(direct, np.stack([xs, y2], 1), atol=1e-8)
    assert check_cone(H, CP.squared())


def test_simple_compose_errors():
    ident = AffineLikeMap(UNIT, UNIT, QuadraticRep((0.0, 1.0, 0.0), (0.0, 0.0, 1.0)))
    F = linear_map(3, 1 / 3)
    with pytest.raises(ValueError, match="cone condition"):
        simple_compose(F, ident, CP)
    other = IntervalPair((0.0, 2.0), (0.0, 1.0))
    G = AffineLikeMap(other, UNIT, QuadraticRep((0.0, 1 / 3, 0.0), (0.0, 0.0, 1 / 3)))
    with pytest.raises(ValueError, match="must equal"):
        simple_compose(F, G, CP)


def test_jacobian_width():
    rep = jacobian_width_check(linear_map(10, 0.1), 1.0)
    assert rep.ratio_min == pytest.approx(1.0) and rep.ratio_max == pytest.approx(1.0) and rep.ok
    assert jacobian_width_check(linear_map(3, 0.5), 1.0).ok
    F = AffineLikeMap(UNIT, UNIT, QuadraticRep((0.1, 0.3, 0.0, 0.01, 0.01, 0.01),
                                               (0.1, 0.0, 0.3, 0.01, 0.01, 0.01)))
    assert jacobian_width_check(F, 1.2).ok


def test_fold_delta_closed_form():
    G = FoldingModel(0.04, 0.1)
    # tip of G^-1(x' = p) is at y = (t + p)/a, delta measured in units of that height
    assert G.tip(-0.01) == pytest.approx(0.3)
    assert delta_distance((0.0, 0.1), (-0.01, 0.01), G) == pytest.approx((0.03 - 0.01) / 0.1)
    assert delta_distance((0.25, 0.35), (-0.01, 0.01), G) <= 0.0
    for t in (1e-2, 1e-4):
        assert delta_distance((0.0, 0.0), (0.0, 0.0), FoldingModel(t, 0.1)) == pytest.approx(t / 0.1)
    with pytest.raises(ValueError, match="outside the fold chart"):
        delta_distance((0.0, 0.1), (0.9, 1.1), G)


def test_fold_roundtrip():
    G = FoldingModel(0.04, 0.1)
    P = np.random.default_rng(0).uniform(-0.5, 0.5, (20, 2))
    np.testing.assert_allclose(G.inverse(G(P)), P, atol=1e-12)
    with pytest.raises(ValueError):
        FoldingModel(0.04, 0.0)
    with pytest.raises(ValueError):
        FoldingModel(0.04, 0.1, N0=1)


def test_gate_inequality_examples():
    assert gate_inequality(0.0768, 0.01, 0.01, "composition-gate", b=0.5)
    assert not gate_inequality(0.0, 0.01, 0.01, "composition-gate", b=100.0)
    assert not gate_inequality(-1.0, 1e-9, 1e-9, "R7-gate", C=100.0)
    assert gate_inequality(1e-3, 1e-4, 1e-4, "R7-gate", C=2.0, eta=0.1)
    assert not gate_inequality(2e-4, 1e-4, 1e-4, "R7-gate", C=2.0, eta=0.1)
    with pytest.raises(ValueError):
        gate_inequality(1.0, 0.1, 0.1, "other")


def test_parabolic_compose_example():
    F0, F1, G = fold_example()
    cp = fold_cone()
    assert parabolic_gate(F0, F1, G, cp)
    Fp, Fm = parabolic_compose(F0, F1, G, cp)
    for Fb in (Fp, Fm):
        assert branch_residual(Fb, F0, F1, G) < 1e-12
        assert injective_on_samples(Fb)
        assert check_cone(Fb, cp.squared())
        assert Fb.n == F0.n + G.N0 + F1.n
    # the two branches sit on opposite arms of the fold
    (a_lo, a_hi), _ = Fp.strip_ranges()
    (b_lo, b_hi), _ = Fm.strip_ranges()
    assert a_hi <= b_lo or b_hi <= a_lo


def test_parabolic_branch_width_scaling():
    F0, F1, G = fold_example()
    Fp, _ = parabolic_compose(F0, F1, G, fold_cone())
    wp, _ = widths(Fp)
    wP0, _ = widths(F0)
    wP1, _ = widths(F1)
    delta = delta_distance(F0.strip_ranges()[1], F1.strip_ranges()[0], G)
    # branch width is bounded by C |P0| |P1| / sqrt(a delta)
    assert wp <= 2 * wP0 * wP1 / math.sqrt(G.a * delta)


def test_parabolic_compose_gate_failure():
    F0, F1, _ = fold_example()
    G = FoldingModel(0.0, 0.1, 2, F0.codomain, F1.domain)
    with pytest.raises(ValueError, match="not allowed"):
        parabolic_compose(F0, F1, G, fold_cone())


def test_parabolic_grid_fit_rejected_by_residual():
    F0, F1, G = fold_example()
    with pytest.raises(ValueError, match="residual"):
        parabolic_compose(F0, F1, G, fold_cone(), fit="grid")


def test_kv_roundtrip():
    F = random_cone_map(np.random.default_rng(1), CP, quadratic=0.05)
    G = map_from_kv(map_to_kv(F))
    np.testing.assert_array_equal(G.rep.a, F.rep.a)
    assert map_to_kv(G) == map_to_kv(F)
    with pytest.raises(ValueError, match="missing key"):
        map_from_kv("kind=linear\n")
    with pytest.raises(ValueError, match="malformed"):
        map_from_kv("kind linear\n")


def test_kv_grid_export():
    F = AffineLikeMap(UNIT, UNIT, GridRep.sample(QuadraticRep((0.1, 0.3), (0.1, 0.0, 0.3)), (0, 1), (0, 1)))
    G = map_from_kv(map_to_kv(F))
    assert widths(G) == pytest.approx(widths(F), rel=1e-9)
