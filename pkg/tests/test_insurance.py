import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from insured_marl.insurance import (FloorState, InsuranceConfig, init_floor, project_action, project_rows,
                                    project_rows_vjp, project_to_cap, project_vjp, risky_budget, update_floor)

CPPI = InsuranceConfig("cppi", k=2.0, f0=0.8)
TIPP = InsuranceConfig("tipp", k=2.0, phi=0.8)


def test_init_floor():
    assert init_floor(CPPI, 1000).floor == pytest.approx(800)
    assert init_floor(TIPP, 1000).floor == pytest.approx(800)
    assert init_floor(InsuranceConfig("none"), 1000).floor == 0
    with pytest.raises(ValueError):
        init_floor(CPPI, 0.0)


def test_tipp_ratchets_up_and_holds():
    up = update_floor(FloorState(80, 100), TIPP, 120)
    assert up.floor == pytest.approx(96)
    hold = update_floor(FloorState(96, 120), TIPP, 100)
    assert hold.floor == 96


def test_cppi_floor_fixed():
    for a in (10.0, 1000.0, 5e6):
        assert update_floor(FloorState(800, 1000), CPPI, a).floor == 800


def test_risky_budget_examples():
    assert risky_budget(FloorState(80, 100), CPPI, 100) == pytest.approx(40)
    assert risky_budget(FloorState(90, 100), InsuranceConfig("cppi", k=5), 100) == pytest.approx(50)
    assert risky_budget(FloorState(120, 100), CPPI, 100) == 0.0
    # large k would lever up; the clamp stops at total asset
    assert risky_budget(FloorState(10, 100), InsuranceConfig("cppi", k=10), 100) == 100


def test_project_action_examples():
    a = np.array([0.5, 0.3, 0.2])
    np.testing.assert_array_equal(project_action(a, 100.0, 100.0), a)
    np.testing.assert_allclose(project_action([0.6, 0.4, 0.0], 50.0, 100.0), [0.3, 0.2, 0.5])
    np.testing.assert_array_equal(project_action([0.2, 0.7, 0.1], 0.0, 100.0), [0, 0, 1])
    with pytest.raises(ValueError):
        project_action(a, 10.0, 0.0)


def test_config_validation():
    with pytest.raises(ValueError):
        InsuranceConfig("stoploss")
    with pytest.raises(ValueError):
        InsuranceConfig("cppi", k=0)
    with pytest.raises(ValueError):
        InsuranceConfig("tipp", phi=1.0)


simplex = st.integers(2, 8).flatmap(
    lambda n: st.lists(st.floats(0, 1), min_size=n, max_size=n).filter(lambda v: sum(v) > 1e-6))


@given(simplex, st.floats(0, 1))
def test_projection_idempotent_and_feasible(v, cap):
    a = np.array(v) / sum(v)
    once = project_to_cap(a, cap)
    twice = project_to_cap(once, cap)
    assert np.array_equal(once, twice)
    if a[:-1].sum() <= cap:
        assert np.array_equal(once, a)
    else:
        assert once[:-1].sum() <= cap
    assert np.all(once >= 0)
    assert abs(once.sum() - 1) < 1e-12


@given(st.lists(st.floats(0.01, 10), min_size=2, max_size=60), st.floats(0.05, 0.95))
def test_tipp_floor_non_decreasing(path, phi):
    cfg = InsuranceConfig("tipp", phi=phi)
    f = init_floor(cfg, path[0])
    prev = f.floor
    for a in path[1:]:
        f = update_floor(f, cfg, a)
        assert f.floor >= prev
        prev = f.floor


@settings(max_examples=50)
@given(st.floats(1, 1e6), st.floats(1e-3, 1e3), st.sampled_from(["cppi", "tipp"]),
       st.lists(st.floats(0.5, 2.0), min_size=1, max_size=10))
def test_budget_homogeneous(a0, c, kind, moves):
    cfg = InsuranceConfig(kind, k=3.0)
    f1, f2 = init_floor(cfg, a0), init_floor(cfg, c * a0)
    a = a0
    for m in moves:
        a *= m
        f1, f2 = update_floor(f1, cfg, a), update_floor(f2, cfg, c * a)
        b1, b2 = risky_budget(f1, cfg, a), risky_budget(f2, cfg, c * a)
        assert b2 == pytest.approx(c * b1, rel=1e-9, abs=1e-9 * c * a)


def fd_vjp(fn, a, g, h=1e-7):
    out = np.zeros_like(a)
    for k in range(len(a)):
        e = np.zeros_like(a)
        e[k] = h
        out[k] = g @ (fn(a + e) - fn(a - e)) / (2 * h)
    return out


def test_projection_vjp_matches_finite_differences():
    rng = np.random.default_rng(0)
    for _ in range(20):
        a = rng.dirichlet(np.ones(5))
        cap = rng.uniform(0.05, 0.95)
        g = rng.standard_normal(5)
        num = fd_vjp(lambda x: project_rows(x[None], np.array([cap]))[0], a, g)
        np.testing.assert_allclose(project_vjp(a, cap, g), num, atol=1e-6)
        np.testing.assert_allclose(project_rows_vjp(a[None], np.array([cap]), g[None])[0], num, atol=1e-6)


def test_rows_agree_with_single():
    rng = np.random.default_rng(1)
    A = rng.dirichlet(np.ones(4), size=30)
    caps = rng.uniform(0, 1, size=30)
    rows = project_rows(A, caps)
    for a, c, r in zip(A, caps, rows):
        np.testing.assert_allclose(r, project_to_cap(a, c), atol=1e-15)
