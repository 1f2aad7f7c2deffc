import math
from dataclasses import replace

import numpy as np
import pytest
import tomli
from hypothesis import given, settings, strategies as st

from anchor_sim import scenario as S
from anchor_sim.errors import ScenarioError


def test_desk3_shapes(desk3):
    assert desk3.num_subchannels == 8
    assert desk3.num_blocks == 4
    assert desk3.kind_counts == (1, 1, 1)
    assert desk3.num_variables == 1 + 1 + 2
    assert desk3.band_matrix.shape == (3, 8)
    assert desk3.measurement_shape().shape == (3, 1, 3)


def test_block_overlap_matches_loop(paper):
    f, size = paper.num_subchannels, paper.comm_block_size
    expected = np.zeros((paper.num_radars, paper.num_blocks))
    for i, r in enumerate(paper.radars):
        for n in range(paper.num_blocks):
            block = set(range(n * size, (n + 1) * size))
            expected[i, n] = len(block & set(range(*r.band)))
    assert np.array_equal(paper.block_overlap, expected)
    assert f == 100


def test_paper_scenario_is_packaged_builder_output(paper):
    assert paper == S.build_paper_scenario()
    assert paper.kind_counts == (3, 3, 2)
    assert paper.num_targets == 2 and paper.num_macro == 6
    assert paper.num_blocks == 25
    # blocks that overlap no radar exist, so each user can be served cleanly
    assert np.sum(paper.block_overlap.sum(axis=0) == 0) >= 1


def test_measurement_shape_formula(desk3):
    shape = desk3.measurement_shape()
    r = desk3.radars[1]
    rcs = desk3.targets[0].rcs[1]
    assert shape[1, 0, 0] == pytest.approx(rcs * desk3.range_const / r.signal_bandwidth**2)
    assert shape[1, 0, 1] == pytest.approx(rcs * desk3.angle_const * r.beamwidth**2)
    assert shape[1, 0, 2] == pytest.approx(rcs * desk3.doppler_const * r.signal_bandwidth**2)


def test_normalizer(desk3):
    assert np.array_equal(np.diag(desk3.normalizer), [1, 10, 1, 10])


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**31 - 1),
       counts=st.tuples(st.integers(0, 3), st.integers(0, 3), st.integers(0, 2),
                        st.integers(1, 3), st.integers(0, 6)))
def test_toml_round_trip(seed, counts):
    sc = S.generate_random_scenario(seed, counts, num_micro=1)
    back = S.scenario_from_dict(tomli.loads(S.dumps_scenario(sc)))
    assert back == sc


def test_generator_is_deterministic():
    assert S.generate_random_scenario(7) == S.generate_random_scenario(7)
    assert S.generate_random_scenario(7) != S.generate_random_scenario(8)


def test_save_and_load(tmp_path, desk3):
    path = tmp_path / "desk3.toml"
    S.save_scenario(desk3, path)
    assert S.load_scenario(path) == desk3


def test_band_selector_form_and_kind_reordering(desk3):
    d = S.scenario_to_dict(desk3)
    r0 = d["radars"][0]
    del r0["band"]
    r0["band_selector"] = [1, 1, 1, 0, 0, 0, 0, 0]
    d["radars"] = d["radars"][::-1]          # mech, phased, mimo on disk
    assert S.scenario_from_dict(d) == desk3


def test_band_selector_must_be_contiguous(desk3):
    d = S.scenario_to_dict(desk3)
    del d["radars"][0]["band"]
    d["radars"][0]["band_selector"] = [1, 0, 1, 0, 0, 0, 0, 0]
    with pytest.raises(ScenarioError, match="band_selector"):
        S.scenario_from_dict(d)


def test_declared_subchannels_cross_checked(desk3):
    d = S.scenario_to_dict(desk3)
    d["num_subchannels"] = 9
    with pytest.raises(ScenarioError, match="num_subchannels"):
        S.scenario_from_dict(d)


def test_missing_field_named(desk3):
    d = S.scenario_to_dict(desk3)
    del d["fusion_period"]
    with pytest.raises(ScenarioError, match="fusion_period"):
        S.scenario_from_dict(d)


def test_parse_failure_is_scenario_error(tmp_path):
    p = tmp_path / "bad.toml"
    p.write_text("fusion_period = [")
    with pytest.raises(ScenarioError, match="parse failure"):
        S.load_scenario(p)


def _radar(sc, k, **kw):
    radars = list(sc.radars)
    radars[k] = replace(radars[k], **kw)
    return tuple(radars)


@pytest.mark.parametrize("field, change", [
    ("fusion_period", lambda sc: sc.replace(fusion_period=0.0)),
    ("comm_block_size", lambda sc: sc.replace(comm_block_size=3)),
    ("radars[0].band", lambda sc: sc.replace(radars=_radar(sc, 0, band=(6, 9)))),
    ("radars[0].power_budget", lambda sc: sc.replace(radars=_radar(sc, 0, power_budget=None))),
    ("radars[1].fixed_power", lambda sc: sc.replace(radars=_radar(sc, 1, fixed_power=0.0))),
    ("radars[0].schedule", lambda sc: sc.replace(radars=_radar(sc, 0, schedule=((11.0, 1.0),)))),
    ("radars[0].noise_power", lambda sc: sc.replace(radars=_radar(sc, 0, noise_power=-1.0))),
    ("radars", lambda sc: sc.replace(radars=sc.radars[::-1])),
    ("targets[0].rcs", lambda sc: sc.replace(targets=(replace(sc.targets[0], rcs=(1.0,)),))),
    ("targets", lambda sc: sc.replace(targets=())),
    ("users[0].noise_power", lambda sc: sc.replace(
        users=(replace(sc.users[0], noise_power=0.0),) + sc.users[1:])),
    ("users", lambda sc: sc.replace(users=S.desk_scenario(3).users + S.desk_scenario(2).users)),
])
def test_validation_names_field(desk3, field, change):
    with pytest.raises(ScenarioError) as info:
        change(desk3)
    assert info.value.field == field


def test_generator_rejects_too_many_users():
    with pytest.raises(ScenarioError, match="users"):
        S.generate_random_scenario(0, (1, 1, 1, 1, 26))


def _schedule_oracle(init, rev, lo, hi):
    out, m = [], 0
    while init + m * rev < hi + 10 * rev:
        t = init + m * rev
        if lo <= t < hi:
            out.append(t)
        m += 1
    return out


@settings(max_examples=200, deadline=None)
@given(init=st.floats(0, 9.9), rev=st.sampled_from([0.5, 1.0, 2.0, 2.5, 3.0, 7.0]),
       k=st.integers(0, 12))
def test_measurement_schedule_matches_enumeration(init, rev, k):
    radar = replace(S.desk_scenario().radars[0], schedule=((init, rev),))
    got = S.measurement_schedule(radar, 0, (10.0 * k, 10.0 * (k + 1)))
    want = _schedule_oracle(init, rev, 10.0 * k, 10.0 * (k + 1))
    assert np.allclose(got, want) and len(got) == len(want)


def test_interval_boundaries_are_half_open():
    radar = replace(S.desk_scenario().radars[0], schedule=((0.0, 5.0),))
    assert list(S.measurement_schedule(radar, 0, (0.0, 10.0))) == [0.0, 5.0]
    assert list(S.measurement_schedule(radar, 0, (10.0, 20.0))) == [10.0, 15.0]


def test_interval_schedule_counts_tile_time(paper):
    # every measurement time lands in exactly one interval
    total = sum(S.interval_schedule(paper, k).counts for k in range(5))
    for i, r in enumerate(paper.radars):
        for q in range(paper.num_targets):
            init, rev = r.schedule[q]
            assert total[i, q] == math.ceil((50.0 - init) / rev - 1e-12)
