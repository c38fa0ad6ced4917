import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from softhand_wrist.hand import WristState, rom_grid
from softhand_wrist.transmission import (
    TICK_RESOLUTION,
    OutOfRangeError,
    RomError,
    ServoCalibration,
    ServoTransmission,
    TransmissionConfig,
    angle_to_servo,
    calibrations_from_dict,
    default_calibrations,
    finger_tendon_displacement,
    geometric_gain,
    load_calibrations,
    round_half_away,
    servo_to_angle,
    wrist_command,
)

CAL = ServoCalibration()
DEV_ID, FLEX_ID = 3, 4


def test_center_is_zero():
    assert servo_to_angle(2048, CAL) == 0.0
    assert angle_to_servo(0.0, CAL) == 2048


def test_linearity():
    assert servo_to_angle(2148, CAL) == pytest.approx(100 * CAL.gain)


def test_default_gain_from_geometry():
    assert geometric_gain(10, 10) == TICK_RESOLUTION == 2 * math.pi / 4096
    assert geometric_gain(5, 10) == pytest.approx(math.pi / 4096)


@pytest.mark.parametrize("ticks", [-1, 4096])
def test_ticks_out_of_range(ticks):
    with pytest.raises(OutOfRangeError):
        servo_to_angle(ticks, CAL)


def test_angle_out_of_range_names_servo():
    with pytest.raises(OutOfRangeError, match="servo 3 \\(wrist_dev\\)"):
        angle_to_servo(4.0, ServoCalibration(servo_id=3, role="wrist_dev"))


def test_round_half_away():
    assert [round_half_away(v) for v in (0.5, 1.5, -0.5, -1.5, 0.49)] == [1, 2, -1, -2, 0]


@pytest.mark.parametrize("cal", default_calibrations() + (ServoCalibration(1000, -0.0021, 9, "finger_ext"),))
def test_exhaustive_round_trip(cal):
    for t in range(4096):
        assert angle_to_servo(servo_to_angle(t, cal), cal) == t


@given(st.floats(-math.pi / 2, math.pi / 2))
def test_quantisation_bound(angle):
    t = angle_to_servo(angle, CAL)
    assert abs(servo_to_angle(t, CAL) - angle) <= abs(CAL.gain) / 2 + 1e-15


def test_rom_maps_inside_range():
    for c in default_calibrations():
        for a in (-math.pi / 2, math.pi / 2):
            assert 0 <= angle_to_servo(a, c) <= 4095


def test_calibration_validation():
    with pytest.raises(ValueError):
        ServoCalibration(gain=0.0)
    with pytest.raises(ValueError):
        ServoCalibration(center_ticks=5000)
    with pytest.raises(ValueError):
        ServoCalibration(role="elbow")


class TestTendons:
    def test_sheathed_constant_over_grid(self):
        cfg = TransmissionConfig("sheathed")
        grid = np.radians(rom_grid(5.0))
        for s in np.linspace(0, 1, 10):
            ref = finger_tendon_displacement(s, WristState(0, 0), cfg)
            for t1, t2 in grid:
                assert finger_tendon_displacement(s, WristState(t1, t2), cfg) == ref

    @given(st.floats(0, 1), st.floats(-0.6, 0.6), st.floats(-1.6, 1.6))
    def test_antagonistic_sum(self, s, t1, t2):
        f, e = finger_tendon_displacement(s, WristState(t1, t2), TransmissionConfig())
        assert f + e == pytest.approx(40.0)

    def test_unsheathed_coupling(self):
        cfg = TransmissionConfig("unsheathed", coupling=(2.0, 5.0))
        a = finger_tendon_displacement(0.3, WristState(0, math.pi / 2), cfg)
        b = finger_tendon_displacement(0.3, WristState(0, 0), cfg)
        assert a[0] - b[0] == pytest.approx(5 * math.pi / 2)
        assert a[1] - b[1] == pytest.approx(-5 * math.pi / 2)

    def test_open_hand(self):
        assert finger_tendon_displacement(0, WristState(0, 0), TransmissionConfig()) == (0.0, 40.0)

    def test_bad_mode(self):
        with pytest.raises(ValueError):
            TransmissionConfig("loose")


class TestWristCommand:
    calibs = default_calibrations()

    def test_neutral(self):
        assert wrist_command(0, 0, self.calibs) == {DEV_ID: 2048, FLEX_ID: 2048}

    def test_golden_thirty_degrees(self):
        # frozen from the shipped calibration: 2048 + round(pi/6 / (2 pi / 4096))
        assert wrist_command(math.radians(30), 0, self.calibs) == {DEV_ID: 2389, FLEX_ID: 2048}

    def test_flexion_symmetric(self):
        up = wrist_command(0, math.pi / 2, self.calibs)[FLEX_ID]
        down = wrist_command(0, -math.pi / 2, self.calibs)[FLEX_ID]
        assert up - 2048 == -(down - 2048) == 1024

    @given(st.floats(-math.pi / 6, math.pi / 6), st.floats(-math.pi / 2, math.pi / 2))
    def test_odd(self, t1, t2):
        a = wrist_command(t1, t2, self.calibs)
        b = wrist_command(-t1, -t2, self.calibs)
        assert all(a[k] - 2048 == -(b[k] - 2048) for k in a)

    def test_rom_rejected(self):
        with pytest.raises(RomError, match="deviation"):
            wrist_command(math.radians(31), 0, self.calibs)
        with pytest.raises(RomError, match="flexion"):
            wrist_command(0, math.radians(95), self.calibs)

    def test_missing_role(self):
        with pytest.raises(ValueError, match="wrist_flex"):
            wrist_command(0, 0, self.calibs[:3])


class TestCalibrationFiles:
    def test_shipped(self, shipped_config):
        assert [c.role for c in shipped_config.calibrations] == ["finger_flex", "finger_ext", "wrist_dev", "wrist_flex"]
        assert all(c.gain == TICK_RESOLUTION for c in shipped_config.calibrations)

    def test_load(self, tmp_path):
        p = tmp_path / "c.json"
        p.write_text(json.dumps({"servos": [{"id": 7, "role": "wrist_dev", "center_ticks": 2000, "gain_rad_per_tick": 0.001}]}))
        (c,) = load_calibrations(p)
        assert (c.servo_id, c.center_ticks, c.gain) == (7, 2000, 0.001)

    def test_duplicate_ids(self):
        s = {"id": 1, "role": "wrist_dev", "center_ticks": 2048, "gain_rad_per_tick": 0.001}
        with pytest.raises(ValueError, match="duplicate"):
            calibrations_from_dict({"servos": [s, s]})

    def test_empty(self):
        with pytest.raises(ValueError):
            calibrations_from_dict({"servos": []})


class TestEstimator:
    def test_round_trip(self):
        tr = ServoTransmission().fit()
        ticks = np.array([[0, 100, 2048, 4095], [4095, 2048, 1, 7]])
        np.testing.assert_array_equal(tr.transform(tr.inverse_transform(ticks)), ticks)

    def test_column_check(self):
        tr = ServoTransmission().fit()
        with pytest.raises(ValueError):
            tr.transform(np.zeros((1, 3)))

    def test_unfitted(self):
        from sklearn.exceptions import NotFittedError

        with pytest.raises(NotFittedError):
            ServoTransmission().transform([[0, 0, 0, 0]])

    def test_params(self):
        assert "calibrations" in ServoTransmission().get_params()
