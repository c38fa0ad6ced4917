import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from softhand_wrist.hand import (
    EXTENDED_ROM,
    HAND,
    WORKSPACE_HEADER,
    HandState,
    PalmWorkspace,
    WristState,
    ideal_rom_coverage,
    palm_workspace,
    rom_grid,
    synergy_expand,
    validate_rom,
    wrist_chain,
    wrist_fk,
)
from softhand_wrist.kinematics import forward_kinematics


def closed_form(t1, t2):
    r = 34 + 48 * math.cos(t2)
    return np.array([math.cos(t1) * r, math.sin(t1) * r, 48 * math.sin(t2)])


@pytest.mark.parametrize(
    "deg, ok", [((30, 90), True), ((0, 0), True), ((31, 0), False), ((0, -90.5), False), ((-30, -90), True)]
)
def test_validate_rom(deg, ok):
    assert validate_rom(WristState.from_degrees(*deg)) is ok


@given(st.floats(-1.0, 1.0), st.floats(-2.0, 2.0))
def test_validate_rom_symmetric(t1, t2):
    assert validate_rom(WristState(t1, t2)) == validate_rom(WristState(-t1, -t2))


@pytest.mark.parametrize(
    "deg, expected",
    [
        ((0, 0), [82, 0, 0]),
        ((0, -90), [34, 0, -48]),
        ((30, 0), [82 * math.cos(math.pi / 6), 82 * math.sin(math.pi / 6), 0]),
    ],
)
def test_wrist_fk_examples(deg, expected):
    np.testing.assert_allclose(wrist_fk(WristState.from_degrees(*deg)).translation, expected, atol=1e-9)


def test_wrist_fk_matches_chain():
    rng = np.random.default_rng(7)
    ch = wrist_chain()
    for t1, t2 in rng.uniform(-math.pi, math.pi, (1000, 2)):
        assert wrist_fk(WristState(t1, t2)).allclose(forward_kinematics(ch, [t1, t2]))


class TestSynergy:
    def test_open(self):
        assert np.all(synergy_expand(0.0) == 0)

    def test_closed(self):
        np.testing.assert_allclose(np.degrees(synergy_expand(1.0)).reshape(5, 3), [[90, 100, 80]] * 5)

    def test_half(self):
        np.testing.assert_array_equal(synergy_expand(0.5), synergy_expand(1.0) / 2)

    @pytest.mark.parametrize("s", [-0.01, 1.01, math.nan])
    def test_out_of_range(self, s):
        with pytest.raises(ValueError):
            synergy_expand(s)

    @given(st.floats(0, 1), st.floats(0, 1))
    def test_monotone(self, a, b):
        lo, hi = sorted((a, b))
        assert np.all(synergy_expand(lo) <= synergy_expand(hi))

    def test_hand_state(self):
        h = HandState.from_synergy(0.25)
        np.testing.assert_array_equal(h.joint_angles, synergy_expand(0.25))
        assert h.joint_angles.shape == (15,)


class TestWorkspace:
    @pytest.mark.parametrize("step", [1.0, 2.5, 5.0, 7.0, 10.0])
    def test_extremes(self, step):
        ws = PalmWorkspace(step_deg=step).fit()
        ext = ws.extremes()
        assert ext["max_reach_mm"] == pytest.approx(82.0, abs=1e-9)
        assert ext["z_min_mm"] == pytest.approx(-48.0, abs=1e-9)
        assert ext["z_max_mm"] == pytest.approx(48.0, abs=1e-9)

    def test_grid_size(self):
        assert len(rom_grid(5.0)) == 13 * 37

    def test_on_closed_form_surface(self):
        ws = PalmWorkspace(step_deg=3.0).fit()
        t = np.radians(ws.grid_deg_)
        expected = np.array([closed_form(a, b) for a, b in t])
        assert np.max(np.abs(ws.points_ - expected)) < 1e-9

    def test_coarse_step_corners(self):
        pts = palm_workspace(90.0)
        for z in (48.0, -48.0):
            assert np.any(np.all(np.isclose(pts, [34, 0, z], atol=1e-9), axis=1))

    def test_sorted(self):
        pts = palm_workspace(10.0)
        assert [tuple(p) for p in pts] == sorted(tuple(p) for p in pts)

    @pytest.mark.parametrize("step", [0.0, -1.0, 10.5])
    def test_estimator_step_validation(self, step):
        with pytest.raises(ValueError):
            PalmWorkspace(step_deg=step).fit()

    def test_transform(self):
        ws = PalmWorkspace().fit()
        np.testing.assert_allclose(ws.transform([[0.0, 0.0]]), [[82, 0, 0]], atol=1e-9)

    def test_csv(self, tmp_path):
        ws = PalmWorkspace(step_deg=10).fit()
        ws.to_csv(tmp_path / "w.csv")
        lines = (tmp_path / "w.csv").read_text().splitlines()
        assert lines[0] == ",".join(WORKSPACE_HEADER)
        assert len(lines) == 1 + 7 * 19


def test_ideal_rom_coverage():
    rows = {r["direction"]: r for r in ideal_rom_coverage()}
    assert rows["flexion"]["met"] and rows["radial"]["met"] and rows["extension"]["met"]
    assert not rows["ulnar"]["met"]


def test_extended_rom_meets_ulnar():
    rows = {r["direction"]: r for r in ideal_rom_coverage(EXTENDED_ROM)}
    assert rows["ulnar"]["met"]


def test_hand_constants():
    assert HAND.finger_length_mm == 81.6 and HAND.hand_height_mm == 164.6
    assert HAND.base_angle("thumb") == -146.8
    angles = [a for _, a in HAND.finger_base_angles_deg]
    assert len(set(angles)) == 5
    assert (HAND.wrist_height_mm, HAND.wrist_width_mm, HAND.wrist_depth_mm) == (54.5, 69.3, 41.0)
