import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from bolalab.model import Variant
from bolalab.policy import (
    Download,
    PauseFor,
    SleepUntilBufferBelow,
    bola_basic_decide,
    crossing_level,
    decision_thresholds,
    dynamic_v,
    level_from_thresholds,
    oscillation_guard,
    score,
    shall_abandon,
    sustainable_level,
    throughput_rule,
)

V, GP = 0.93, 5.0


@pytest.fixture
def ladder(example_ladder):
    return example_ladder.mean_sizes, example_ladder.utilities


def test_scores_at_empty_buffer(ladder):
    sizes, u = ladder
    per_mb = [score(u[m], 0.0, V, GP, sizes[m]) * 1e6 for m in range(5)]
    assert per_mb == pytest.approx([0.408, 0.753, 1.404, 2.583, 4.682], abs=1.5e-3)


def test_score_zero_at_own_threshold(ladder):
    sizes, u = ladder
    assert score(u[2], V * (u[2] + GP), V, GP, sizes[2]) == 0.0


def test_basic_decisions(ladder):
    sizes, u = ladder
    assert bola_basic_decide(0.0, V, GP, sizes, u) == Download(5)
    assert bola_basic_decide(7.0, V, GP, sizes, u) == Download(1)
    d = bola_basic_decide(7.5, V, GP, sizes, u)
    assert isinstance(d, SleepUntilBufferBelow)
    assert d.threshold == pytest.approx(7.344, abs=1e-3)


def test_cutoff_itself_downloads_top(ladder):
    sizes, u = ladder
    assert bola_basic_decide(V * (u[0] + GP), V, GP, sizes, u) == Download(1)


def _bisect_switch(sizes, u, lo, hi, below):
    # independent check: bisection on the argmax itself
    for _ in range(200):
        mid = (lo + hi) / 2
        # the chosen index only falls as Q grows, so "index >= below" is monotone
        if bola_basic_decide(mid, V, GP, sizes, u).m >= below:
            lo = mid
        else:
            hi = mid
    return lo


def test_thresholds_match_bisection(ladder):
    sizes, u = ladder
    thr = decision_thresholds(V, GP, sizes, u)
    assert thr[0] == 0.0
    assert thr[5] == pytest.approx(7.3446, abs=1e-4)
    for k, m in enumerate([5, 4, 3, 2], start=1):
        assert thr[k] == pytest.approx(_bisect_switch(sizes, u, 0.0, 7.3, m), abs=1e-9)
    assert thr[1] * 3 == pytest.approx(12.06, abs=0.01)
    assert thr[5] * 3 == pytest.approx(22.03, abs=0.01)


@settings(max_examples=60, deadline=None)
@given(
    st.lists(st.floats(0.2, 40.0), min_size=2, max_size=7, unique=True),
    st.floats(0.05, 3.0),
    st.floats(0.5, 20.0),
    st.data(),
)
def test_threshold_map_equals_decisions(means, v, gp, data):
    import math

    means = sorted(means, reverse=True)
    assume(all(a / b > 1.01 for a, b in zip(means, means[1:])))
    sizes = [m * 1e6 for m in means]
    u = [math.log(m / means[-1]) for m in means]
    thr = decision_thresholds(v, gp, sizes, u)
    assert all(a <= b for a, b in zip(thr, thr[1:]))
    cutoff = thr[-1]
    for q in data.draw(st.lists(st.floats(0.0, cutoff * 1.2), min_size=5, max_size=20)):
        d = bola_basic_decide(q, v, gp, sizes, u)
        expect = level_from_thresholds(thr, q)
        if expect is None:
            assert isinstance(d, SleepUntilBufferBelow)
        else:
            assert d == Download(expect)


def test_dynamic_v_examples(example_ladder):
    u1 = example_ladder.utilities[0]
    q, v = dynamic_v(30.0, 1000.0, 8.344, u1, GP, 3.0)
    assert q == pytest.approx(5.0) and v == pytest.approx(0.5065, abs=1e-4)
    q, v = dynamic_v(0.0, 1000.0, 8.344, u1, GP, 3.0)
    assert q == pytest.approx(3.0) and v == pytest.approx(0.2533, abs=1e-4)
    q, v = dynamic_v(1e6, 1e6, 8.344, u1, GP, 3.0)
    assert q == 8.344 and v == pytest.approx((8.344 - 1) / (u1 + GP))


def test_sustainable_level(ladder):
    sizes, _ = ladder
    assert sustainable_level(2.5e6, sizes, 3.0) == 3
    assert sustainable_level(7e6, sizes, 3.0) == 1
    assert sustainable_level(1.0, sizes, 3.0) == 5


def test_guard_example(ladder):
    sizes, u = ladder
    args = (sizes, u, 3.0)
    assert oscillation_guard(1, 3, 2.5e6, *args, Variant.U, V, GP, 7.0) == Download(2)
    d = oscillation_guard(1, 3, 2.5e6, *args, Variant.O, V, GP, 7.0)
    assert isinstance(d, PauseFor) and d.then == Download(3)
    q_cross = crossing_level(V, GP, sizes, u, 3)
    assert d.duration == pytest.approx((7.0 - q_cross) * 3.0)
    # after the pause level 3 outscores level 2
    q_after = 7.0 - d.duration / 3.0
    assert score(u[2], q_after, V, GP, sizes[2]) >= score(u[1], q_after, V, GP, sizes[1]) - 1e-12


def test_guard_no_adjustment_when_bandwidth_suffices(ladder):
    sizes, u = ladder
    assert oscillation_guard(1, 3, 6e6, sizes, u, 3.0, Variant.U, V, GP, 7.0) == Download(1)


def test_guard_low_bandwidth_holds_previous(ladder):
    sizes, u = ladder
    for variant in (Variant.O, Variant.U):
        assert oscillation_guard(2, 4, 1e3, sizes, u, 3.0, variant, V, GP, 6.0) == Download(4)


def test_guard_disabled_for_finite_and_downswitch(ladder):
    sizes, u = ladder
    assert oscillation_guard(1, 3, 2.5e6, sizes, u, 3.0, Variant.FINITE, V, GP, 7.0) == Download(1)
    assert oscillation_guard(4, 2, 2.5e6, sizes, u, 3.0, Variant.U, V, GP, 3.0) == Download(4)


def test_guard_pause_never_past_empty_buffer(ladder):
    sizes, u = ladder
    d = oscillation_guard(1, 3, 2.5e6, sizes, u, 3.0, Variant.O, 0.93, GP, 0.5)
    assert isinstance(d, PauseFor)
    assert d.duration <= 0.5 * 3.0


def test_abandon_example(ladder):
    sizes, u = ladder
    assert shall_abandon(1, 9e6, 2.0, V, GP, sizes, u) == Download(5)
    s = [score(u[m], 2.0, V, GP, sizes[m]) * 1e6 for m in range(2, 5)]
    assert s == pytest.approx([0.936, 1.614, 2.669], abs=1e-3)


def test_abandon_edge_cases(ladder):
    sizes, u = ladder
    assert shall_abandon(1, 1.0, 2.0, V, GP, sizes, u) is None
    assert shall_abandon(5, 0.5e6, 2.0, V, GP, sizes, u) is None
    # at or above the cutoff no score is positive, so nothing is worth switching to
    assert shall_abandon(1, 0.1e6, 7.5, V, GP, sizes, u) is None
    assert shall_abandon(2, 0.1e6, V * (u[0] + GP), V, GP, sizes, u) is None


def test_throughput_rule(ladder):
    sizes, _ = ladder
    assert throughput_rule(None, sizes, 3.0) == 5
    assert throughput_rule(10e6, sizes, 3.0) == 1
    assert throughput_rule(3.0e6, sizes, 3.0) == 3
