import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from softhand_wrist.hand import wrist_chain
from softhand_wrist.kinematics import (
    DHParam,
    KinematicChain,
    Transform,
    chain_from_dict,
    chain_from_rows,
    chain_to_dict,
    compose_chains,
    dh_transform,
    forward_kinematics,
    jacobian,
    load_chain,
    rot_x,
    rot_z,
    save_chain,
)

WRIST = wrist_chain()


def palm_closed_form(t1, t2):
    r = 34 + 48 * math.cos(t2)
    return np.array([math.cos(t1) * r, math.sin(t1) * r, 48 * math.sin(t2)])


def fd_jacobian(chain, q, h=1e-6):
    """Central differences: position directly, orientation via the rotation-matrix log."""
    n = chain.n_joints
    J = np.empty((6, n))
    for i in range(n):
        dq = np.zeros(n)
        dq[i] = h
        Tp, Tm = forward_kinematics(chain, q + dq), forward_kinematics(chain, q - dq)
        J[:3, i] = (Tp.translation - Tm.translation) / (2 * h)
        W = (Tp.rotation - Tm.rotation) / (2 * h) @ forward_kinematics(chain, q).rotation.T
        J[3:, i] = [W[2, 1], W[0, 2], W[1, 0]]
    return J


angles = st.floats(-math.pi, math.pi, allow_nan=False)


class TestDH:
    def test_wrist_first_row(self):
        T = dh_transform(DHParam(34, math.pi / 2, 0), 0.0)
        np.testing.assert_allclose(T.translation, [34, 0, 0], atol=1e-12)
        np.testing.assert_allclose(T.rotation, rot_x(math.pi / 2), atol=1e-12)

    def test_zero_row_is_identity(self):
        assert dh_transform(DHParam(0, 0, 0), 0.0).allclose(Transform())

    def test_quarter_turn(self):
        T = dh_transform(DHParam(48, 0, 0), math.pi / 2)
        np.testing.assert_allclose(T.translation, [0, 48, 0], atol=1e-12)
        np.testing.assert_allclose(T.rotation, rot_z(math.pi / 2), atol=1e-12)

    @pytest.mark.parametrize("bad", [math.nan, math.inf])
    def test_non_finite_angle(self, bad):
        with pytest.raises(ValueError):
            dh_transform(DHParam(1, 0, 0), bad)

    @pytest.mark.parametrize(
        "kw", [dict(a=-1, alpha=0, d=0), dict(a=0, alpha=4.0, d=0), dict(a=0, alpha=0, d=math.nan)]
    )
    def test_row_validation(self, kw):
        with pytest.raises(ValueError):
            DHParam(**kw)

    def test_alpha_pi_allowed(self):
        DHParam(0, math.pi, 0)


class TestForwardKinematics:
    @pytest.mark.parametrize(
        "q, expected", [((0, 0), [82, 0, 0]), ((0, math.pi / 2), [34, 0, 48])]
    )
    def test_wrist_examples(self, q, expected):
        np.testing.assert_allclose(forward_kinematics(WRIST, q).translation, expected, atol=1e-9)

    def test_collinear_chain(self):
        ch = chain_from_rows([DHParam(a, 0, 0) for a in (3.0, 4.5, 7.25)])
        np.testing.assert_allclose(forward_kinematics(ch, np.zeros(3)).translation, [14.75, 0, 0], atol=1e-12)

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            forward_kinematics(WRIST, [0.0])

    @settings(max_examples=200, deadline=None)
    @given(angles, angles)
    def test_closed_form(self, t1, t2):
        np.testing.assert_allclose(forward_kinematics(WRIST, [t1, t2]).translation, palm_closed_form(t1, t2), atol=1e-9)

    @settings(max_examples=100, deadline=None)
    @given(st.lists(angles, min_size=8, max_size=8))
    def test_rotation_proper(self, shipped_q):
        from softhand_wrist.config import load_config

        T = forward_kinematics(load_config().chain, np.array(shipped_q))
        assert T.is_proper(1e-9)


class TestJacobian:
    def test_wrist_flexion_column(self):
        np.testing.assert_allclose(jacobian(WRIST, [0, 0])[:3, 1], [0, 0, 48], atol=1e-12)

    def test_planar_lever(self):
        ch = chain_from_rows([DHParam(1, 0, 0)])
        np.testing.assert_allclose(jacobian(ch, [0.0])[:, 0], [0, 1, 0, 0, 0, 1], atol=1e-12)

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            jacobian(WRIST, [0, 0, 0])

    def test_composite_matches_finite_differences(self, shipped_config):
        rng = np.random.default_rng(3)
        ch = shipped_config.chain
        for _ in range(20):
            q = rng.uniform(-math.pi, math.pi, ch.n_joints)
            J, Jn = jacobian(ch, q), fd_jacobian(ch, q)
            assert np.linalg.norm(J - Jn) / np.linalg.norm(Jn) < 1e-6


class TestCompose:
    def test_lengths_add(self, shipped_config):
        ch = compose_chains(shipped_config.arm, shipped_config.wrist)
        assert ch.n_joints == 8
        assert ch.joint_limits.shape == (8, 2)

    def test_composition_identity(self, shipped_config):
        arm, wrist = shipped_config.arm, shipped_config.wrist
        ch = compose_chains(arm, wrist)
        rng = np.random.default_rng(0)
        for _ in range(1000):
            q = rng.uniform(-math.pi, math.pi, 8)
            lhs = forward_kinematics(ch, q)
            rhs = forward_kinematics(arm, q[:6]) @ forward_kinematics(wrist, q[6:])
            assert lhs.allclose(rhs, atol=1e-9)


class TestTransform:
    @settings(max_examples=50, deadline=None)
    @given(st.lists(angles, min_size=9, max_size=9))
    def test_associative_and_inverse(self, v):
        a = Transform.from_rpy(v[0:3], [v[0] * 10, 2, 3])
        b = Transform.from_rpy(v[3:6], [1, v[4] * 5, 0])
        c = Transform.from_rpy(v[6:9], [0, 0, v[8]])
        assert ((a @ b) @ c).allclose(a @ (b @ c))
        assert (a @ a.inverse()).allclose(Transform())

    def test_flags_improper(self):
        assert not Transform(np.diag([1.0, 1.0, -1.0])).is_proper()
        assert Transform.rot_z(0.3).is_proper()


class TestChainFiles:
    def test_round_trip(self, tmp_path, shipped_config):
        p = tmp_path / "arm.json"
        save_chain(shipped_config.arm, p)
        back = load_chain(p)
        rng = np.random.default_rng(1)
        for _ in range(20):
            q = rng.uniform(-3, 3, 6)
            assert forward_kinematics(back, q).allclose(forward_kinematics(shipped_config.arm, q), atol=1e-6)

    def test_missing_keys(self):
        with pytest.raises(ValueError, match="missing keys"):
            chain_from_dict({"rows": [{"a_mm": 1}]})

    def test_bad_limits(self):
        with pytest.raises(ValueError):
            KinematicChain((DHParam(1, 0, 0),), [(1.0, -1.0)], [1.0])

    def test_bad_speed(self):
        with pytest.raises(ValueError):
            KinematicChain((DHParam(1, 0, 0),), [(-1.0, 1.0)], [0.0])

    def test_empty(self):
        with pytest.raises(ValueError):
            KinematicChain((), [], [])

    def test_to_dict_keys(self, shipped_config):
        d = chain_to_dict(shipped_config.wrist)
        assert len(d["rows"]) == 2 and set(d) == {"name", "base", "tool", "rows"}


def test_shipped_arm_reach(shipped_config):
    # shoulder centre to flange with the arm stretched out
    F = shipped_config.arm.frames(np.zeros(6))
    reach = np.linalg.norm(F[-1][:3, 3] - F[1][:3, 3])
    assert abs(reach - 850) <= 10
