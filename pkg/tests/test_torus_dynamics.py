import math

import numpy as np
import pytest

from stabledim.torus_dynamics import (
    Ball,
    Rect,
    StandardMapParams,
    TorusPoint,
    TowerRegion,
    TowerSpec,
    Whole,
    averaging_check,
    build_tower,
    combination_check,
    height_budget,
    max_invariant_escape,
    minimal_height,
    periodic_points,
    residual_trajectory_ok,
    select_centers,
    std_map,
    std_map_inv,
    tower_params,
    verify_empty_intersection,
)

P2 = StandardMapParams(2.0)


@pytest.fixture(scope="module")
def small_tower():
    K = periodic_points(P2, 1)
    N = minimal_height(0.5)
    spec = select_centers(tower_params(P2, 0.5, N, K, seed=1), P2, seed=1, cloud=10_000)
    V, diag = build_tower(spec, P2, seed=1)
    return spec, V, diag


def test_std_map_examples():
    for lam in (0.0, 0.7, 2.0):
        p = std_map(TorusPoint(0, 0), StandardMapParams(lam))
        assert (p.x, p.y) == pytest.approx((0.0, 0.0))
        q = std_map_inv(TorusPoint(0, 0), StandardMapParams(lam))
        assert (q.x, q.y) == pytest.approx((0.0, 0.0))
    p = std_map(TorusPoint(0.25, 0.0), StandardMapParams(0.0))
    assert (p.x, p.y) == pytest.approx((0.5, 0.25))
    q = std_map_inv(TorusPoint(0.5, 0.25), StandardMapParams(0.0))
    assert (q.x, q.y) == pytest.approx((0.25, 0.0))


def test_invertibility():
    z = np.random.default_rng(0).random((10_000, 2))
    back = P2.inverse(P2.forward(z))
    d = np.abs((back - z + 0.5) % 1.0 - 0.5)
    assert d.max() < 1e-12


def test_area_preservation():
    z = np.random.default_rng(1).random((1000, 2))
    assert np.allclose(np.abs(np.linalg.det(P2.jacobian(z))), 1.0, atol=1e-12)


def test_params_validation():
    with pytest.raises(ValueError):
        StandardMapParams(-1.0)


def test_periodic_points_fixed():
    pts = periodic_points(P2, 1)
    assert any(p.dist(TorusPoint(0, 0)) < 1e-9 for p, _ in pts)
    for p, period in pts:
        assert period == 1
        assert std_map(p, P2).dist(p) < 1e-9
    with pytest.raises(ValueError):
        periodic_points(P2, 0)


def test_periodic_points_linear():
    # lam = 0: fixed points are the diagonal x = y; the grid seeds find some of them
    pts = periodic_points(StandardMapParams(0.0), 1, seed_grid=8)
    assert pts
    for p, _ in pts:
        assert abs(((p.x - p.y + 0.5) % 1.0) - 0.5) < 1e-9


def test_height_budget():
    assert height_budget(100) == pytest.approx(0.1 + math.exp(-10))
    assert height_budget(100) < 0.125
    assert height_budget(60) > 0.125
    # 1/sqrt(64) = 1/8 exactly, so the exp term pushes N = 64 over the budget
    assert minimal_height(0.25) == 65


def test_tower_params_errors():
    with pytest.raises(ValueError, match="minimal admissible N = 65"):
        tower_params(P2, 0.25, 60, [])
    with pytest.raises(ValueError, match="eps"):
        tower_params(P2, 1.5, 100, [])


def test_tower_spec_validation():
    with pytest.raises(ValueError):
        TowerSpec(10, 0.1, 0.06, 0.01, 1, 0.5, np.zeros((0, 2)))


def test_tower_spec_roundtrip(small_tower):
    spec, _, _ = small_tower
    s2 = TowerSpec.from_kv(spec.to_kv())
    assert s2.to_kv() == spec.to_kv()
    np.testing.assert_array_equal(s2.centers, spec.centers)


def test_tower_radii_ordering(small_tower):
    spec, _, _ = small_tower
    assert spec.delta / 2 > spec.mu > spec.eta > 0


def test_select_centers_trajectory(small_tower):
    spec, _, _ = small_tower
    assert residual_trajectory_ok(spec)
    r = spec.diagnostics["residual"]
    assert all(b <= a for a, b in zip(r, r[1:]))


def test_select_centers_m_zero():
    K = periodic_points(P2, 1)
    spec = tower_params(P2, 0.5, minimal_height(0.5), K, seed=1)
    from dataclasses import replace
    out = select_centers(replace(spec, m=0), P2, seed=1, cloud=5000)
    assert len(out.centers) == 0
    assert out.diagnostics["residual"][0] == pytest.approx(out.diagnostics["leb_y0"])


def test_build_tower_budget(small_tower):
    spec, V, diag = small_tower
    assert diag.ok
    assert diag.complement < spec.eps
    assert diag.complement <= spec.eps / 2 + height_budget(spec.N)
    assert diag.base_term <= 1 / math.sqrt(spec.N)
    base_pts = spec.centers[:200]
    assert not V.contains(base_pts).any()


def test_tower_emptiness(small_tower):
    spec, V, _ = small_tower
    rep = verify_empty_intersection(V, spec.N, P2, 5000, seed=3)
    assert rep.counterexamples == 0
    assert rep.histogram.sum() == 5000


def test_tower_expand_agrees():
    c = np.array([[0.3, 0.7], [0.6, 0.2]])
    V = TowerRegion(c, 0.01, 4, P2)
    E = V.expand()
    z = np.concatenate([np.random.default_rng(2).random((3000, 2)),
                        P2.forward(c + 0.003), P2.forward(P2.forward(c - 0.004))])
    np.testing.assert_array_equal(V.contains(z), E.contains(z))


def test_tower_floor_escape_time():
    c = np.array([[0.3, 0.7]])
    V = TowerRegion(c, 0.002, 6, P2)
    u = c + 0.0005
    for j in range(1, 6):
        z = u.copy()
        for _ in range(j):
            z = P2.forward(z)
        if V.contains(z)[0]:
            assert V.escape_times(z)[0] == j


def test_verify_whole_torus_negative_control():
    rep = verify_empty_intersection(Whole(), 5, P2, 500, seed=0)
    assert rep.counterexamples == 500


def test_averaging_identity():
    rep = averaging_check(P2, 20, 0.01, Rect(0.55, 0.95, 0.05, 0.35), n_x=1000, seed=2)
    assert rep.ok


def test_max_invariant_examples():
    assert max_invariant_escape(Whole(), P2, 5, 16).count == 256
    assert max_invariant_escape(Ball((0.5, 0.1), 0.05), P2, 20, 32).count == 0
    with pytest.raises(ValueError):
        max_invariant_escape(Whole(), P2, 0, 8)


def test_max_invariant_monotone():
    U = Ball((0.0, 0.0), 0.3)
    counts = [max_invariant_escape(U, P2, h, 48).count for h in (1, 2, 4, 8)]
    assert all(b <= a for a, b in zip(counts, counts[1:]))


def test_combination_check():
    U = Ball((0.0, 0.0), 0.3)
    U_tilde = Ball((0.0, 0.0), 0.001)
    V = TowerRegion(np.array([[0.4, 0.6]]), 0.01, 3, P2)
    rep = combination_check(U, U_tilde, V, P2, 3, 8, 48)
    assert rep.containment and rep.ok
    with pytest.raises(ValueError):
        combination_check(U, U_tilde, V, P2, 3, 3, 16)
