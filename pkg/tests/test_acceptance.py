"""End-to-end acceptance checks; each records a one-line verdict for the terminal summary."""

import time

import pytest
from conftest import ACCEPTANCE
from instances import tiny_instance

from bolalab import metrics, traces
from bolalab.cli import main
from bolalab.model import PlayerConfig, Variant, derive_v
from bolalab.oracle import brute_force_optimal, offline_optimal
from bolalab.policy import SleepUntilBufferBelow, bola_basic_decide, decision_thresholds, level_from_thresholds
from bolalab.simulator import constant_trace, simulate

GP = 5.0
P = 3.0
PROFILES = range(1, 13)


def record(k, ok, detail):
    prev_ok, prev = ACCEPTANCE.get(k, (True, ""))
    ACCEPTANCE[k] = (prev_ok and ok, f"{prev}; {detail}" if prev else detail)


def session(man, trace, variant, buffer_s):
    log = simulate(man, trace, PlayerConfig(gamma_p=GP, buffer_chunks=buffer_s / man.chunk_duration,
                                            variant=variant))
    return log, metrics.compute(log, man, GP)


@pytest.fixture(scope="module")
def profile_runs():
    """Ten-minute sessions on every profile plus the oracle bound for each."""
    man = traces.reference_manifest(200, 42, P)
    t0 = time.perf_counter()
    runs = {}
    for pid in PROFILES:
        tr = traces.gen_profile(pid)
        r_star = offline_optimal(man, tr, GP, delta=0.25, b_max=25.0).value
        runs[pid] = {"r_star": r_star}
        for v in Variant:
            runs[pid][v] = session(man, tr, v, 25.0)[1]
    return runs, time.perf_counter() - t0


def test_criterion_1_threshold_geometry(example_ladder):
    t0 = time.perf_counter()
    sizes, u, V = example_ladder.mean_sizes, example_ladder.utilities, 0.93
    thr = decision_thresholds(V, GP, sizes, u)
    steps = len({level_from_thresholds(thr, q) for q in (0.5 * (a + b) for a, b in zip(thr, thr[1:]))})
    mismatches = 0
    q, k = 0.0, 0
    while q <= 1.2 * thr[-1]:
        d = bola_basic_decide(q, V, GP, sizes, u)
        want = level_from_thresholds(thr, q)
        got = None if isinstance(d, SleepUntilBufferBelow) else d.m
        mismatches += got != want
        k += 1
        q = k * 0.01
    elapsed = time.perf_counter() - t0
    ok = (steps == 5 and abs(thr[-1] - 7.344) < 1e-3 and abs(thr[-1] * P - 22.03) < 0.01
          and abs(thr[1] * P - 12.06) < 0.01 and mismatches == 0 and elapsed < 1.0)
    record(1, ok, f"cutoff {thr[-1]:.4f} chunks = {thr[-1] * P:.2f} s, 5/4 boundary {thr[1] * P:.2f} s, "
                  f"{k} samples, {mismatches} mismatches, {elapsed:.2f} s")
    assert ok


def test_criterion_2_buffer_bounds():
    t0 = time.perf_counter()
    man = traces.reference_manifest(200, 42, P)
    u1 = man.utilities[0]
    qmax = 25.0 / P
    V = derive_v(qmax, u1, GP)
    bound = V * (u1 + GP) + 1
    cfg = PlayerConfig(gamma_p=GP, V=V, buffer_chunks=qmax)
    trs = [traces.gen_profile(pid) for pid in PROFILES] + [traces.synthetic_trace(s) for s in range(100)]
    violations, peak = 0, 0.0
    for tr in trs:
        log = simulate(man, tr, cfg)
        for r in log.records:
            peak = max(peak, r.q_start)
            violations += r.q_start > qmax + 1e-9 or r.q_start > bound + 1e-9
        violations += log.max_buffer > qmax + 1e-9
    elapsed = time.perf_counter() - t0
    ok = violations == 0 and elapsed < 30.0
    record(2, ok, f"{len(trs)} traces, peak {peak:.4f} of Q_max {qmax:.4f}, {violations} violations, {elapsed:.1f} s")
    assert ok


def test_criterion_3_oracle_vs_brute_force():
    t0 = time.perf_counter()
    gaps, below, abs_gap = [], 0, 0.0
    seeds = range(60)
    for seed in seeds:
        man, tr = tiny_instance(seed)
        best, _ = brute_force_optimal(man, tr, GP, b_max=40.0)
        dp = offline_optimal(man, tr, GP, delta=0.01, b_max=40.0).value
        below += dp < best - 1e-12
        gaps.append((dp - best) / abs(best))
        abs_gap = max(abs_gap, dp - best)
    elapsed = time.perf_counter() - t0
    over = sum(g > 0.01 for g in gaps)
    ok = below == 0 and over == 0 and elapsed < 120.0
    record(3, ok, f"{len(seeds)} instances, DP below brute force {below}x, {over} above 1% relative "
                  f"(worst {max(gaps):.2e}, largest absolute gap {abs_gap:.4f}), {elapsed:.1f} s")
    assert ok


def test_criterion_4_upper_bound(profile_runs):
    t0 = time.perf_counter()
    violations, count = 0, 0
    for seed in range(40):
        man, tr = tiny_instance(seed, max_chunks=6)
        r_star = offline_optimal(man, tr, GP, delta=0.05, b_max=4 * man.chunk_duration).value
        for v in Variant:
            m = session(man, tr, v, 4 * man.chunk_duration)[1]
            violations += m.oracle_form > r_star + 1e-12
            count += 1
    runs, _ = profile_runs
    worst = 0.0
    for pid in PROFILES:
        for v in Variant:
            ratio = runs[pid][v].oracle_form / runs[pid]["r_star"]
            worst = max(worst, ratio)
            violations += ratio > 1.0
            count += 1
    elapsed = time.perf_counter() - t0
    ok = violations == 0 and elapsed < 120.0
    record(4, ok, f"{count} sessions, {violations} above r*, max ratio on profiles {worst:.3f}, {elapsed:.1f} s")
    assert ok


def test_criterion_5_near_optimal(profile_runs):
    runs, elapsed = profile_runs
    ratios = {(pid, v): runs[pid][v].oracle_form / runs[pid]["r_star"]
              for pid in PROFILES for v in (Variant.FINITE, Variant.U)}
    low = min(ratios, key=ratios.get)
    ok = ratios[low] >= 0.80 and elapsed < 300.0
    record(5, ok, f"min ratio {ratios[low]:.3f} ({low[1].value}, profile {low[0]}), "
                  f"max {max(ratios.values()):.3f}, {elapsed:.1f} s")
    assert ok


def test_criterion_6_no_midstream_rebuffer(profile_runs):
    runs, _ = profile_runs
    stalls = {(pid, v.value): runs[pid][v].mid_stream_rebuffer
              for pid in PROFILES for v in (Variant.FINITE, Variant.O, Variant.U)}
    bad = {k: s for k, s in stalls.items() if s > 0}
    record(6, not bad, f"{len(stalls)} sessions, {len(bad)} with mid-stream rebuffer {bad or ''}".rstrip())
    assert not bad


def test_criterion_7_oscillation_ordering(profile_runs):
    runs, _ = profile_runs
    worse = [pid for pid in PROFILES
             if runs[pid][Variant.O].avg_bitrate_change > runs[pid][Variant.U].avg_bitrate_change]
    stats = [(m * 1e6, 0.0) for m, _ in traces.LADDER_STATS]
    man = traces.gen_vbr_manifest(200, P, stats, 0)
    link = constant_trace(2.0e6, latency=0.05)
    steady = {v: metrics.steady_state_change(session(man, link, v, 25.0)[0].levels, man)
              for v in (Variant.O, Variant.U)}
    ok = not worse and steady[Variant.O] == 0 and steady[Variant.U] > 0
    record(7, ok, f"O > U on profiles {worse or 'none'}; constant 2 Mbps steady change "
                  f"O {steady[Variant.O]:.4f} vs U {steady[Variant.U]:.4f} Mbps")
    assert ok


BUFFERS = (10.0, 25.0, 60.0, 120.0)


@pytest.fixture(scope="module")
def buffer_sweep():
    man = traces.reference_manifest(200, 42, P).repeat_to(600)
    tr = traces.gen_profile(1)
    return {(v, b): session(man, tr, v, b)[1].oracle_form for v in (Variant.BASIC, Variant.FINITE) for b in BUFFERS}


def _fmt(values):
    return "[" + ", ".join(f"{x:.4f}" for x in values) + "]"


def test_criterion_8_finite_beats_basic(buffer_sweep):
    basic = [buffer_sweep[Variant.BASIC, b] for b in BUFFERS]
    finite = [buffer_sweep[Variant.FINITE, b] for b in BUFFERS]
    ok = all(f > b for f, b in zip(finite, basic))
    record(8, ok, f"FINITE {_fmt(finite)} vs BASIC {_fmt(basic)} at {BUFFERS} s")
    assert ok


def test_criterion_8_basic_non_increasing(buffer_sweep):
    basic = [buffer_sweep[Variant.BASIC, b] for b in BUFFERS]
    rises = [(a, b) for a, b, x, y in zip(BUFFERS, BUFFERS[1:], basic, basic[1:]) if y > x]
    record(8, not rises, f"BASIC rises between buffers {rises or 'none'}")
    assert not rises


def _run_twice(tmp_path, argv, files):
    out = []
    for tag in ("a", "b"):
        d = tmp_path / tag
        assert main(argv + ["--out", str(d)]) == 0
        out.append([(d / f).read_bytes() for f in files])
    return out[0] == out[1]


def _gen_twice(tmp_path, argv, name):
    blobs = []
    for tag in ("a", "b"):
        path = tmp_path / f"{tag}_{name}"
        assert main(argv + ["--out", str(path)]) == 0
        blobs.append(path.read_bytes())
    return blobs[0] == blobs[1]


def test_criterion_9_determinism(tmp_path):
    common = ["--profile", "7", "--buffer-s", "20", "--minutes", "3", "--seed", "11"]
    checks = {
        "simulate": _run_twice(tmp_path / "s", ["simulate", *common, "--variant", "finite"],
                               ["session_log.csv", "simulate_report.csv"]),
        "oracle": _run_twice(tmp_path / "o", ["oracle", *common, "--delta", "0.25"], ["oracle_report.csv"]),
        "sweep": _run_twice(tmp_path / "w", ["sweep", "--profiles", "1-4", "--variants", "basic,finite,o,u",
                                             "--buffer-s", "20", "--minutes", "2", "--jobs", "2"],
                            ["sweep_report.csv"]),
        "compare": _run_twice(tmp_path / "c", ["compare", "--profiles", "2,9", "--variants", "u", "--buffer-s", "20",
                                               "--minutes", "2", "--delta", "0.25", "--format", "json"],
                              ["compare_report.json"]),
        "gen-profile": _gen_twice(tmp_path, ["gen-profile", "--profile", "5"], "p.csv"),
        "gen-manifest": _gen_twice(tmp_path, ["gen-manifest", "--chunks", "50", "--seed", "9"], "m.json"),
    }
    differ = [k for k, same in checks.items() if not same]
    record(9, not differ, f"{len(checks)} subcommands, differing outputs: {differ or 'none'}")
    assert not differ
