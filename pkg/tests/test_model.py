import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bolalab import traces
from bolalab.errors import InvalidManifestError, ParameterError
from bolalab.model import (
    PlayerConfig,
    Variant,
    build_manifest,
    derive_gamma_v,
    derive_v,
    load_manifest,
    log_utilities,
    manifest_from_dict,
    manifest_to_dict,
    save_manifest,
)


def test_log_utilities_example_ladder(example_ladder):
    assert example_ladder.utilities == pytest.approx([2.897, 2.192, 1.461, 0.732, 0.0], abs=5e-4)


def test_log_utility_table_row_three():
    man = build_manifest(3.0, [[8.886e6], [0.690e6]])
    assert man.utilities[0] == pytest.approx(2.556, abs=5e-4)


def test_single_level_utility_is_zero():
    assert build_manifest(3.0, [[1e6, 2e6]]).utilities == [0.0]


def test_non_positive_size_rejected():
    with pytest.raises(InvalidManifestError):
        build_manifest(3.0, [[1e6], [0.0]])


def test_levels_must_shrink_with_index():
    with pytest.raises(InvalidManifestError):
        build_manifest(3.0, [[1e6], [2e6]])


def test_derive_v_examples(example_ladder):
    u1 = example_ladder.utilities[0]
    assert derive_v(8.3443, 2.897, 5.0) == pytest.approx(0.930, abs=5e-4)
    assert derive_v(1 + u1 + 5.0, u1, 5.0) == pytest.approx(1.0)
    assert derive_v(25 / 3, u1, 5.0) == pytest.approx(0.9286, abs=5e-4)
    with pytest.raises(ParameterError):
        derive_v(1.0, u1, 5.0)


def test_derive_gamma_v_inverts_thresholds(example_ladder):
    gp, v = derive_gamma_v(12.06, 25.03, example_ladder)
    assert gp == pytest.approx(5.0, abs=0.01)
    assert v == pytest.approx(0.93, abs=0.005)


def test_derive_gamma_v_round_trip(example_ladder):
    from bolalab.policy import decision_thresholds

    gp, v = derive_gamma_v(12.0, 30.0, example_ladder)
    thr = decision_thresholds(v, gp, example_ladder.mean_sizes, example_ladder.utilities)
    p = example_ladder.chunk_duration
    assert thr[1] * p == pytest.approx(12.0, rel=1e-9)
    assert (v * (example_ladder.utilities[0] + gp) + 1) * p == pytest.approx(30.0, rel=1e-9)


def test_derive_gamma_v_equal_sizes_error():
    man = build_manifest(3.0, [[1e6], [1e6]], utilities=[1.0, 0.0])
    with pytest.raises(ParameterError):
        derive_gamma_v(5.0, 20.0, man)


def test_derive_gamma_v_infeasible(example_ladder):
    with pytest.raises(ParameterError):
        derive_gamma_v(20.0, 10.0, example_ladder)


def test_variant_parse():
    assert Variant.parse("bola-u") is Variant.U
    assert Variant.parse("BOLA-BASIC") is Variant.BASIC
    assert Variant.parse("finite") is Variant.FINITE
    with pytest.raises(ParameterError):
        Variant.parse("panda")


def test_player_config_resolution(example_ladder):
    u1 = example_ladder.utilities[0]
    cfg = PlayerConfig(gamma_p=5.0, buffer_chunks=25 / 3)
    v, q = cfg.resolve(u1)
    assert v == pytest.approx(derive_v(25 / 3, u1, 5.0))
    assert cfg.complies(u1)
    v_only = PlayerConfig(gamma_p=5.0, V=0.93)
    assert v_only.resolve(u1)[1] == pytest.approx(0.93 * (u1 + 5) + 1)
    assert not PlayerConfig(gamma_p=5.0, V=2.0, buffer_chunks=5.0).complies(u1)


def test_player_config_validation():
    with pytest.raises(ParameterError):
        PlayerConfig(gamma_p=0.0, V=1.0)
    with pytest.raises(ParameterError):
        PlayerConfig(gamma_p=5.0)
    with pytest.raises(ParameterError):
        PlayerConfig(gamma_p=5.0, buffer_chunks=1.0)


def test_abandonment_defaults():
    assert PlayerConfig(gamma_p=5, V=1, variant=Variant.FINITE).abandonment
    assert not PlayerConfig(gamma_p=5, V=1, variant=Variant.BASIC).abandonment
    assert not PlayerConfig(gamma_p=5, V=1, variant=Variant.U, abandonment_enabled=False).abandonment


def test_manifest_round_trip(tmp_path, table_manifest):
    path = tmp_path / "m.json"
    save_manifest(table_manifest, path)
    back = load_manifest(path)
    assert back == table_manifest
    assert manifest_from_dict(manifest_to_dict(back)) == back


def test_manifest_bad_json(tmp_path):
    path = tmp_path / "m.json"
    path.write_text("{not json")
    with pytest.raises(InvalidManifestError):
        load_manifest(path)


def test_manifest_missing_field():
    with pytest.raises(InvalidManifestError):
        manifest_from_dict({"levels": []})


def test_repeat_to_cycles(example_ladder):
    man = traces.reference_manifest(10, 1)
    longer = man.repeat_to(25)
    assert longer.chunk_count == 25
    for n in range(1, 26):
        assert longer.chunk_sizes(n) == man.chunk_sizes((n - 1) % 10 + 1)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(0.1, 50.0), min_size=2, max_size=6, unique=True))
def test_log_utilities_monotone(means):
    means = sorted(means, reverse=True)
    man = log_utilities(build_manifest(2.0, [[m * 1e6] for m in means], utilities=[0.0] * len(means)))
    u = man.utilities
    assert u[-1] == 0.0
    assert all(a > b for a, b in zip(u, u[1:]))
    assert u[0] == pytest.approx(math.log(means[0] / means[-1]))
