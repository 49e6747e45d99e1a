import math

import pytest
from hypothesis import given, settings, strategies as st

from btdsim.geometry import (
    BlockageType,
    InvalidGeometry,
    Link,
    LinkKind,
    Obstacle,
    Side,
    TopologyConfig,
    blocked_links,
    build_topology,
    classify_oracle,
    interference_free_margin,
    segment_disk_distance,
)


def seg_hits_disk(p, q, c, r):
    """Independent check: solve |p + t(q-p) - c|^2 = r^2 for t in [0, 1]."""
    dx, dy = q[0] - p[0], q[1] - p[1]
    fx, fy = p[0] - c[0], p[1] - c[1]
    if fx * fx + fy * fy <= r * r or (q[0] - c[0]) ** 2 + (q[1] - c[1]) ** 2 <= r * r:
        return True
    a = dx * dx + dy * dy
    b = 2 * (fx * dx + fy * dy)
    cc = fx * fx + fy * fy - r * r
    disc = b * b - 4 * a * cc
    if disc < 0:
        return False
    s = math.sqrt(disc)
    return any(0.0 <= t <= 1.0 for t in ((-b - s) / (2 * a), (-b + s) / (2 * a)))


# --- topology ------------------------------------------------------------------


@pytest.mark.parametrize(
    "width,theta,length,d0,n",
    [
        (20, 45, 200, 20.0, 11),
        (20, 45, 20, 20.0, 2),
        (10, math.degrees(math.atan(0.5)), 100, 20.0, 6),
    ],
)
def test_spacing_and_count(width, theta, length, d0, n):
    topo = build_topology(TopologyConfig(width, length, theta, 30))
    assert topo.d_0 == pytest.approx(d0, abs=1e-9)
    assert topo.N == n


def test_rounded_angle_lands_just_below_six_nodes():
    # 26.565 deg is slightly under atan(0.5), so d_0 is slightly over 20 m
    topo = build_topology(TopologyConfig(10, 100, 26.565, 30))
    assert topo.d_0 > 20.0
    assert topo.N == 5


def test_node_layout_and_link_sets():
    topo = build_topology(TopologyConfig(20, 200, 45, 30))
    assert topo.nodes[0].position == (0.0, 0.0)
    assert topo.nodes[0].side == Side.SOUTH
    assert topo.nodes[1].side == Side.NORTH and topo.nodes[1].y == 20
    assert [(l.src, l.dst) for l in topo.original_links] == [(k, k + 1) for k in range(10)]
    spans = sorted((l.src, l.dst) for l in topo.alternative_links)
    assert spans == sorted([(k, k + 2) for k in range(9)] + [(k, k + 3) for k in range(8)])


def test_link_kinds():
    assert Link(3, 4).kind == LinkKind.ORIGINAL
    assert Link(3, 5).kind == LinkKind.SKIP_ONE
    assert Link(3, 6).kind == LinkKind.SKIP_TWO
    with pytest.raises(InvalidGeometry):
        Link(3, 7)
    with pytest.raises(InvalidGeometry):
        Link(4, 3)


@pytest.mark.parametrize("theta", [0, 90, -5, 120])
def test_theta_out_of_range(theta):
    with pytest.raises(InvalidGeometry):
        TopologyConfig(20, 200, theta, 30)


def test_road_too_short_for_two_nodes():
    with pytest.raises(InvalidGeometry):
        build_topology(TopologyConfig(20, 10, 45, 30))


def test_control_slot_must_be_shorter():
    with pytest.raises(InvalidGeometry):
        TopologyConfig(20, 200, 45, 30, slot=10, control_slot=10)


@settings(max_examples=60, deadline=None)
@given(
    width=st.floats(1, 50),
    theta=st.floats(5, 85),
    n_target=st.integers(2, 40),
)
def test_consecutive_links_have_equal_length_and_alternate(width, theta, n_target):
    d0 = width / math.tan(math.radians(theta))
    topo = build_topology(TopologyConfig(width, d0 * (n_target - 1) + d0 / 2, theta, 10))
    expected = width / math.sin(math.radians(theta))
    for a, b in zip(topo.nodes, topo.nodes[1:]):
        assert math.dist(a.position, b.position) == pytest.approx(expected, rel=1e-9)
        assert a.side != b.side


# --- interference-free condition ------------------------------------------------


def test_margin_at_sixty_degrees():
    margin, ok = interference_free_margin(60, 30)
    assert abs(margin - 30.0) < 1e-9
    assert ok


def test_margin_boundary_is_strict():
    margin, ok = interference_free_margin(60, 60)
    assert abs(margin - 30.0) < 1e-9
    assert not ok


def test_margin_at_forty_five_degrees():
    margin, ok = interference_free_margin(45, 50)
    assert margin == pytest.approx(45 - math.degrees(math.atan(1 / 3)), abs=1e-12)
    assert margin == pytest.approx(26.5651, abs=5e-5)
    assert ok


def test_margin_rejects_narrow_angles():
    _, ok = interference_free_margin(10, 60)
    assert not ok


@given(st.floats(0.5, 59.0), st.floats(0.01, 0.99))
def test_margin_increases_with_theta_up_to_sixty(t1, gap):
    m1, _ = interference_free_margin(t1, 10)
    m2, _ = interference_free_margin(t1 + gap, 10)
    assert m2 > m1


@given(st.floats(60.01, 89.0), st.floats(0.01, 0.99))
def test_margin_decreases_with_theta_past_sixty(t1, gap):
    m1, _ = interference_free_margin(t1, 10)
    m2, _ = interference_free_margin(min(t1 + gap, 89.99), 10)
    assert m2 < m1


def test_margin_peaks_at_sixty_degrees():
    grid = [0.5 + 0.1 * i for i in range(895)]
    best = max(grid, key=lambda t: interference_free_margin(t, 10)[0])
    assert best == pytest.approx(60.0, abs=0.1)


# --- blockage -----------------------------------------------------------------

TOPO = build_topology(TopologyConfig(20, 200, 45, 30))


def midpoint(link):
    (x1, y1), (x2, y2) = TOPO.link(link.src, link.dst).segment
    return ((x1 + x2) / 2, (y1 + y2) / 2)


def test_small_disk_on_curb_link_hits_only_that_link():
    ob = Obstacle(midpoint(Link(4, 6)), 0.1)
    assert blocked_links(TOPO, ob) == {Link(4, 6)}


def test_small_disk_near_the_end_of_an_original_link():
    # a quarter of the way along e4,5, clear of the mid-road crossing point
    (x1, y1), (x2, y2) = TOPO.link(4, 5).segment
    ob = Obstacle((x1 + (x2 - x1) / 4, y1 + (y2 - y1) / 4), 0.1)
    assert blocked_links(TOPO, ob) == {Link(4, 5)}


def test_zero_radius_off_every_segment():
    assert blocked_links(TOPO, Obstacle((10.0, 3.0), 0.0)) == frozenset()


def test_disk_on_a_node_cuts_all_its_links():
    k = 5
    ob = Obstacle(TOPO.nodes[k].position, 0.5)
    expected = {Link(a, b) for a, b in [(k - 3, k), (k - 2, k), (k - 1, k), (k, k + 1), (k, k + 2), (k, k + 3)]}
    assert blocked_links(TOPO, ob) == expected


def test_disk_on_the_source_only_cuts_existing_links():
    ob = Obstacle(TOPO.nodes[0].position, 0.5)
    assert blocked_links(TOPO, ob) == {Link(0, 1), Link(0, 2), Link(0, 3)}


def test_obstacle_outside_road_rejected():
    with pytest.raises(InvalidGeometry):
        blocked_links(TOPO, Obstacle((10.0, 25.0), 1.0))


def test_negative_radius_rejected():
    with pytest.raises(InvalidGeometry):
        Obstacle((10.0, 5.0), -1.0)


@settings(max_examples=200, deadline=None)
@given(x=st.floats(0, 200), y=st.floats(0, 20), r=st.floats(0, 6))
def test_blocked_links_matches_quadratic_oracle(x, y, r):
    got = blocked_links(TOPO, Obstacle((x, y), r))
    for link in TOPO.links:
        p, q = link.segment
        d = segment_disk_distance(p, q, (x, y))
        if abs(d - r) < 1e-7:
            continue  # tangent within rounding: either answer is fine
        assert (link in got) == seg_hits_disk(p, q, (x, y), r)


@settings(max_examples=100, deadline=None)
@given(x=st.floats(0, 200), y=st.floats(0, 20), r1=st.floats(0, 5), r2=st.floats(0, 5))
def test_blocked_links_monotone_in_radius(x, y, r1, r2):
    lo, hi = sorted((r1, r2))
    assert blocked_links(TOPO, Obstacle((x, y), lo)) <= blocked_links(TOPO, Obstacle((x, y), hi))


# --- oracle decomposition -------------------------------------------------------

K = 5


def verdict_of(*pairs):
    return classify_oracle(TOPO, {Link(a, b) for a, b in pairs})


def test_single_original_is_type_one():
    v = verdict_of((K, K + 1))
    assert [(e.type, e.node) for e in v.entries] == [(BlockageType.I, K)]
    assert v.entries[0].evidence == {Link(K, K + 1)}


def test_crossing_diagonal_is_type_three():
    v = verdict_of((K, K + 1), (K - 1, K + 2))
    assert [(e.type, e.node) for e in v.entries] == [(BlockageType.III, K)]


def test_all_tx_links_is_type_four():
    v = verdict_of((K, K + 1), (K, K + 2), (K, K + 3))
    assert [(e.type, e.node) for e in v.entries] == [(BlockageType.IV, K)]


def test_adjacent_diagonal_is_type_two():
    v = verdict_of((K, K + 1), (K, K + 3))
    assert [(e.type, e.node) for e in v.entries] == [(BlockageType.II, K)]
    v = verdict_of((K, K + 1), (K - 2, K + 1))
    assert [(e.type, e.node) for e in v.entries] == [(BlockageType.II, K + 1)]


def test_all_rx_links_is_type_four_at_the_receiver():
    v = verdict_of((K, K + 1), (K - 1, K + 1), (K - 2, K + 1))
    assert [(e.type, e.node) for e in v.entries] == [(BlockageType.IV, K + 1)]


def test_combination_reports_both_types():
    v = verdict_of((K, K + 1), (K, K + 3), (K - 1, K + 2))
    assert v.keys() == {(BlockageType.II, K), (BlockageType.III, K)}


def test_lone_alternate_goes_to_residual():
    v = verdict_of((K, K + 2))
    assert v.entries == ()
    assert v.residual == {Link(K, K + 2)}


@settings(max_examples=150, deadline=None)
@given(st.sets(st.sampled_from(TOPO.links), max_size=8))
def test_decomposition_covers_every_blocked_link_once(blocked):
    v = classify_oracle(TOPO, blocked)
    seen = [l for e in v.entries for l in e.evidence] + list(v.residual)
    assert sorted(seen) == sorted(blocked)
    originals = {l for l in blocked if l.span == 1}
    claimed = {l for e in v.entries for l in e.evidence}
    assert originals <= claimed
