import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from helpers import annulus_cap_measure_mc, fields_1d, fields_2d, min_interval_cover
from nlharnack import (CompactSet, ConeSpec, DomainGrid, NoChainError, ResolutionError, ScenarioFields,
                       ball_cover, chain_constant, chain_of_balls, contraction_constant, dilate, erode,
                       inner_cone_check, level_set)
from nlharnack.errors import PreconditionError
from nlharnack.kernel import unit_ball_volume
from nlharnack.geometry import (annulus_cover_count, chain_holds, cover_holds, log_contraction_constant,
                                reference_measure)


def unit_interval(h=1 / 100):
    return DomainGrid(((0.0, 1.0),), h)


def xs_of(s):
    return s.grid.points[s.mask, 0]


# -- level sets ------------------------------------------------------------------------------------

def test_level_set_constant():
    f = fields_1d(0.3, b=1.0)
    assert level_set(f, 0.2).size == f.grid.n
    assert level_set(f, 0.2, "below").empty
    assert level_set(f, 0.31).empty


def test_level_set_vee():
    grid = unit_interval(1 / 200)
    x = grid.points[:, 0]
    f = ScenarioFields(grid, np.abs(x - 0.5), np.ones(grid.n), 0.5)
    W = xs_of(level_set(f, 0.25))
    assert np.all((W <= 0.25 + grid.h) | (W >= 0.75 - grid.h))
    assert W.min() == x.min() and W.max() == x.max()
    Z = level_set(f, 0.25, "below")
    assert not (Z.mask & level_set(f, 0.25).mask).any()
    assert (Z | level_set(f, 0.25)).size == grid.n


def test_from_spec_forms():
    f = fields_1d(lambda p: 0.1 + 0.4 * p[:, 0], b=1.0)
    assert CompactSet.from_spec("all", f).size == f.grid.n
    a = CompactSet.from_spec("levelset:g>0.3", f)
    assert np.all(f.g[a.mask] >= 0.3)
    assert CompactSet.from_spec([[0.2, 0.4]], f).size > 0
    with pytest.raises(ValueError):
        CompactSet.from_spec("disk", f)


# -- morphology ------------------------------------------------------------------------------------

def test_dilate_identity_and_ball():
    grid = unit_interval()
    s = CompactSet.from_nodes(grid, [50])
    assert dilate(s, 0).mask.tolist() == s.mask.tolist()
    x = grid.points[:, 0]
    np.testing.assert_array_equal(dilate(s, 0.2).mask, np.abs(x - x[50]) <= 0.2 + 1e-12)


def test_erode_interval():
    grid = unit_interval()
    full = CompactSet.full(grid)
    assert erode(full, 0).size == grid.n
    e = xs_of(erode(full, 0.25))
    assert e.min() == pytest.approx(0.25, abs=grid.h) and e.max() == pytest.approx(0.75, abs=grid.h)


def test_erode_periodic_full_is_full():
    grid = DomainGrid(((0.0, 1.0),), 1 / 64, periodic=True)
    assert erode(CompactSet.full(grid), 0.3).size == grid.n


@settings(max_examples=30, deadline=None)
@given(st.floats(0.0, 0.3), st.floats(0.0, 0.3), st.floats(0.1, 0.9), st.floats(0.0, 0.3))
def test_morphology_properties(r1, r2, c, w):
    grid = unit_interval(1 / 128)
    A = CompactSet.from_boxes(grid, [[c - w / 2, c + w / 2]])
    B = CompactSet.from_boxes(grid, [[c - w, c + w]])
    if A.empty:
        A = CompactSet.from_nodes(grid, [grid.nearest_node(np.array([c]))])
        B = B | A
    assert A.issubset(B)
    assert dilate(A, r1).issubset(dilate(B, r1))
    assert erode(A, r1).issubset(erode(B, r1))
    # r1 then r2 contains r1 + r2 shrunk by one cell
    two = dilate(dilate(A, r1), r2)
    assert dilate(A, max(r1 + r2 - grid.h, 0.0)).issubset(two)
    # dilation then erosion recovers the set up to one cell, as long as the
    # dilation stays away from the boundary of Omega
    xs = grid.points[A.mask, 0]
    if xs.min() - r1 > 2 * grid.h and xs.max() + r1 < 1 - 2 * grid.h:
        back = erode(dilate(A, r1), max(r1 - grid.h, 0.0))
        assert A.issubset(back)


# -- covers and chains ------------------------------------------------------------------------------

def test_cover_unit_interval():
    grid = unit_interval(0.01)
    rep = ball_cover(CompactSet.full(grid), 0.25)
    assert rep.N <= 3
    assert rep.N >= min_interval_cover(grid.points[0, 0], grid.points[-1, 0], 0.25)
    assert cover_holds(CompactSet.full(grid), rep)


def test_cover_trivial_cases():
    grid = unit_interval(0.01)
    assert ball_cover(CompactSet.from_nodes(grid, [7]), 0.1).N == 1
    assert ball_cover(CompactSet.full(grid), 1.0).N == 1
    with pytest.raises(ResolutionError):
        ball_cover(CompactSet.full(grid), 0.004)


@settings(max_examples=20, deadline=None)
@given(st.floats(0.02, 0.5), st.integers(0, 3))
def test_cover_invariant_2d(radius, seed):
    f = fields_2d(0.2, h=1 / 20, b=1.0)
    rng = np.random.default_rng(seed)
    s = CompactSet(f.grid, rng.random(f.grid.n) < 0.4)
    if radius <= f.grid.h / 2 or s.empty:
        return
    assert cover_holds(s, ball_cover(s, radius))


def test_chain_1d():
    grid = unit_interval(0.01)
    full = CompactSet.full(grid)
    x, y = grid.nearest_node(np.array([0.1])), grid.nearest_node(np.array([0.9]))
    ch = chain_of_balls(x, y, full, 0.4)
    assert ch.centers[0] == x and ch.centers[-1] == y
    assert ch.N0 <= ball_cover(full, 0.1).N + 2
    assert chain_holds(ch, grid)
    assert chain_of_balls(x, x, full, 0.4).N0 == 0


def test_chain_disconnected():
    grid = unit_interval(0.01)
    s = CompactSet.from_boxes(grid, [[0.0, 0.2], [0.7, 1.0]])
    with pytest.raises(NoChainError) as ei:
        chain_of_balls(grid.nearest_node(np.array([0.1])), grid.nearest_node(np.array([0.8])), s, 0.2)
    assert ei.value.components is not None


# -- constants --------------------------------------------------------------------------------------

def test_reference_measure_1d_exact():
    # A(0, 15/16, 1) cap B(15/16, 17/16) = [15/16, 1]
    assert reference_measure(1) == pytest.approx(1 / 16, abs=1e-12)


def test_reference_measure_2d_against_monte_carlo():
    mc = annulus_cap_measure_mc(2)
    se = 4 * math.sqrt(mc / 4 * (1 - mc / 4) / 400_000)
    assert abs(reference_measure(2) - mc) <= 4 * se
    assert reference_measure(2) == 0.14324


def test_cover_piece_measure_against_monte_carlo():
    assert reference_measure(1, cap_radius=3 / 16) == pytest.approx(1 / 16, abs=1e-12)
    mc = annulus_cap_measure_mc(2, cap_radius=3 / 16)
    se = 4 * math.sqrt(mc / 4 * (1 - mc / 4) / 400_000)
    assert abs(reference_measure(2, cap_radius=3 / 16) - mc) <= 4 * se
    assert reference_measure(2, cap_radius=3 / 16) == 0.023416


@pytest.mark.parametrize("d", [1, 2])
def test_annulus_cover_count_is_minimal(d):
    n1 = annulus_cover_count(d)
    if d == 1:
        assert n1 == 2
        return
    # equally spaced centres on the inner circle: n1 cover, n1 - 1 do not
    th = np.linspace(0, 2 * math.pi, 3601)
    pts = np.concatenate([np.column_stack([r * np.cos(th), r * np.sin(th)]) for r in (15 / 16, 1.0)])

    def covers(k):
        c = 15 / 16 * np.column_stack([np.cos(2 * math.pi * np.arange(k) / k),
                                       np.sin(2 * math.pi * np.arange(k) / k)])
        dist = np.linalg.norm(pts[:, None, :] - c[None], axis=2).min(axis=1)
        return dist.max() <= 3 / 16 + 1e-12

    assert covers(n1) and not covers(n1 - 1)
    assert n1 == 18


def test_contraction_constant_frozen_values():
    assert contraction_constant(1.0, 1.0, 1) == pytest.approx(1 / 256, rel=1e-14)
    assert contraction_constant(0.01, 1.0, 1) == pytest.approx(3.90625e-05, rel=1e-14)
    assert contraction_constant(0.01, 1.0, 2) == pytest.approx(4.0652777777777764e-07, rel=1e-14)
    assert contraction_constant(1e4, 1.0, 1) == 0.5
    assert contraction_constant(math.inf, 0.3, 2) == 0.5


@pytest.mark.parametrize("d", [1, 2])
@pytest.mark.parametrize("frac", [0.25, 0.5, 1.0])
def test_contraction_constant_holds_for_constants(d, frac):
    # u = 1 is in the membership class with C0 = 1 / |B(eta)|; the lemma then needs
    # |B(r)| >= C1 |B(r + eta/4)|, which the constant must respect in every dimension
    eta = 1.0
    C0 = 1 / (unit_ball_volume(d) * eta ** d)
    r = frac * eta
    assert (r / (r + eta / 4)) ** d >= contraction_constant(C0, eta, d)


@settings(max_examples=50, deadline=None)
@given(st.floats(1e-8, 1e8), st.floats(1e-3, 10.0), st.sampled_from([1, 2]), st.floats(1.0, 10.0))
def test_contraction_constant_monotone(C0, eta, d, k):
    c = contraction_constant(C0, eta, d)
    assert 0 < c <= 0.5
    assert contraction_constant(C0 * k, eta, d) >= c
    assert contraction_constant(C0, eta * k, d) >= c
    assert log_contraction_constant(C0, eta, d) <= math.log(0.5)


def test_chain_constant_small_sigma():
    grid = unit_interval(0.01)
    s = CompactSet.from_nodes(grid, [50])
    cc = chain_constant(1e-3, 0.1, s)
    c1 = contraction_constant(1e-3, 0.1, 1)
    assert cc.N == 1
    assert cc.C_pair == pytest.approx(c1 ** 6, rel=1e-12)
    assert cc.C_sum == pytest.approx(cc.C_pair, rel=1e-12)


def test_chain_constant_deterministic_and_bounded():
    grid = DomainGrid(((-0.5, 1.5),), 1 / 256)
    s = CompactSet.from_boxes(grid, [[0.3, 0.7]])
    a = chain_constant(0.5, 0.1, s)
    b = chain_constant(0.5, 0.1, CompactSet(grid, s.mask.copy()))
    assert (a.N, a.log_C_pair) == (b.N, b.log_C_pair)
    assert a.C_pair <= 1 and a.C_sum <= a.C_pair
    bigger = chain_constant(0.5, 0.1, CompactSet.from_boxes(grid, [[0.2, 0.8]]))
    assert bigger.N >= a.N and bigger.C_pair <= a.C_pair
    with pytest.raises(PreconditionError):
        chain_constant(0.5, 0.1, CompactSet.from_boxes(unit_interval(), [[0.3, 0.7]]))


# -- inner cone -------------------------------------------------------------------------------------

def test_cone_box_passes():
    grid = DomainGrid(((0.0, 1.0), (0.0, 1.0)), 1 / 32)
    rep = inner_cone_check(CompactSet.full(grid), ConeSpec(math.pi / 8, 0.2))
    assert rep.passed and rep.checked > 0


def test_cone_spike_fails():
    grid = DomainGrid(((0.0, 1.0), (0.0, 1.0)), 1 / 32)
    s = CompactSet.from_boxes(grid, [[[0.0, 0.5], [0.0, 1.0]]])
    spike = grid.nearest_node(np.array([0.8, 0.5]))
    s = s | CompactSet.from_nodes(grid, [spike])
    rep = inner_cone_check(s, ConeSpec(math.pi / 8, 0.2))
    assert not rep.passed and rep.failing_node == spike


def test_cone_l_shape_orientations_vary():
    grid = DomainGrid(((0.0, 1.0), (0.0, 1.0)), 1 / 32)
    L = CompactSet.from_boxes(grid, [[[0.0, 1.0], [0.0, 0.4]], [[0.0, 0.4], [0.0, 1.0]]])
    rep = inner_cone_check(L, ConeSpec(math.pi / 8, 0.15))
    assert rep.passed
    assert len({tuple(np.round(v, 12)) for v in rep.witnesses.values()}) > 1


def test_cone_spec_validation():
    with pytest.raises(ValueError):
        ConeSpec(math.pi / 2, 0.1)
    with pytest.raises(ValueError):
        ConeSpec(0.3, 0.0)
