import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from softhand_wrist.servo import (
    BROADCAST_ID,
    PING,
    READ,
    REG_GOAL_POSITION,
    REG_PRESENT_POSITION,
    SYNC_WRITE,
    WRITE,
    ChecksumError,
    FrameLengthError,
    HeaderError,
    IncompleteFrame,
    ProtocolError,
    ScriptError,
    ServoFrame,
    SimBus,
    SimServo,
    bus_transaction,
    check_transcript,
    decode_frame,
    encode_frame,
    ping_frame,
    read_position_frame,
    run_script,
    sim_bus_step,
    split_frames,
    sync_goal_frame,
    write_goal_frame,
)

ids = st.integers(0, BROADCAST_ID)
instructions = st.sampled_from([PING, READ, WRITE, SYNC_WRITE])
params = st.lists(st.integers(0, 255), max_size=250)


def byte_sum_checksum(body):
    return ~sum(body) & 0xFF


class TestCodec:
    def test_ping_golden(self):
        assert encode_frame(1, PING) == bytes([0xFF, 0xFF, 0x01, 0x02, 0x01, 0xFB])

    def test_write_checksum(self):
        frame = encode_frame(2, WRITE, [0x2A, 0x00, 0x08])
        assert frame[-1] == byte_sum_checksum([0x02, 0x05, 0x03, 0x2A, 0x00, 0x08])
        assert frame[3] == 5

    def test_decode_ping(self):
        assert decode_frame(bytes.fromhex("FFFF010201FB")) == ServoFrame(1, PING, ())

    @settings(max_examples=300)
    @given(ids, instructions, params)
    def test_round_trip(self, i, ins, p):
        data = encode_frame(i, ins, p)
        f = decode_frame(data)
        assert (f.id, f.instruction, list(f.params)) == (i, ins, p)
        assert f.to_bytes() == data

    @pytest.mark.parametrize("kw", [dict(servo_id=255), dict(servo_id=-1), dict(params=[256]), dict(params=[0] * 251)])
    def test_encode_rejects(self, kw):
        args = dict(servo_id=1, instruction=WRITE, params=())
        args.update(kw)
        with pytest.raises(ValueError):
            encode_frame(**args)

    def test_unknown_instruction(self):
        with pytest.raises(ValueError):
            encode_frame(1, 0x7F)

    def test_empty_incomplete(self):
        with pytest.raises(IncompleteFrame):
            decode_frame(b"")

    def test_truncated_incomplete(self):
        with pytest.raises(IncompleteFrame):
            decode_frame(encode_frame(1, WRITE, [1, 2, 3])[:-1])

    def test_bad_header(self):
        with pytest.raises(HeaderError):
            decode_frame(b"\xff\xfe\x01\x02\x01\xfb")

    def test_trailing_bytes(self):
        with pytest.raises(FrameLengthError):
            decode_frame(encode_frame(1, PING) + b"\x00")

    def test_checksum_error_fields(self):
        with pytest.raises(ChecksumError) as info:
            decode_frame(bytes.fromhex("FFFF010201FA"))
        assert (info.value.expected, info.value.actual) == (0xFB, 0xFA)
        assert info.value.kind == "checksum_error"

    @pytest.mark.parametrize("n_params", range(0, 11))
    def test_single_bit_flips_rejected(self, n_params):
        # frames of 6..16 bytes; every bit after the header
        for i in (0, 1, 7, 254):
            data = encode_frame(i, WRITE, [(37 * k + i) & 0xFF for k in range(n_params)])
            assert len(data) <= 16
            for byte in range(2, len(data)):
                for bit in range(8):
                    bad = bytearray(data)
                    bad[byte] ^= 1 << bit
                    with pytest.raises(ProtocolError):
                        decode_frame(bytes(bad))

    def test_split_frames(self):
        stream = encode_frame(1, PING) + encode_frame(2, READ, [0x38, 2]) + b"\xff\xff\x03"
        frames, tail = split_frames(stream)
        assert [f.id for f in frames] == [1, 2] and tail == b"\xff\xff\x03"


class TestSimBus:
    def test_no_goal_change(self):
        bus = SimBus()
        before = bus.positions()
        sim_bus_step(bus, 1.0)
        assert bus.positions() == before

    def test_speed_limit(self):
        s = SimServo(1, "wrist_dev", position=1000, goal=2000, speed=500)
        bus = SimBus([s])
        sim_bus_step(bus, 1.0)
        assert s.position == 1500

    @pytest.mark.parametrize("dist, dt", [(1000, 0.3), (7, 0.001), (4095, 0.25)])
    def test_convergence_steps(self, dist, dt):
        import math

        s = SimServo(1, position=0, goal=dist, speed=500)
        bus = SimBus([s])
        steps = 0
        while s.position != dist:
            bus.step(dt)
            steps += 1
        assert steps == math.ceil(dist / (500 * dt))

    @settings(max_examples=50)
    @given(st.integers(0, 4095), st.integers(0, 4095), st.lists(st.floats(0.001, 5.0), min_size=1, max_size=20))
    def test_positions_in_range(self, start, goal, dts):
        s = SimServo(1, position=start, goal=goal)
        bus = SimBus([s])
        for dt in dts:
            bus.step(dt)
            assert 0 <= s.position <= 4095

    def test_bad_dt(self):
        with pytest.raises(ValueError):
            SimBus().step(0)

    def test_write_then_read(self):
        bus = SimBus()
        assert bus_transaction(bus, write_goal_frame(3, 2389)).instruction == 0
        bus.step(1.0)
        reply = bus_transaction(bus, read_position_frame(3))
        assert reply.params == (0x55, 0x09)

    def test_read_little_endian(self):
        bus = SimBus([SimServo(1, position=0x0800, goal=0x0800)])
        assert bus_transaction(bus, encode_frame(1, READ, [REG_PRESENT_POSITION, 2])).params == (0x00, 0x08)

    def test_broadcast_ping_silent(self):
        assert bus_transaction(SimBus(), ping_frame(BROADCAST_ID)) is None

    def test_unknown_id_silent(self):
        assert bus_transaction(SimBus(), ping_frame(42)) is None

    def test_sync_write(self):
        bus = SimBus()
        assert bus_transaction(bus, sync_goal_frame({3: 2389, 4: 1024})) is None
        assert (bus.servos[3].goal, bus.servos[4].goal, bus.servos[1].goal) == (2389, 1024, 2048)

    def test_unsupported_register(self):
        reply = bus_transaction(SimBus(), encode_frame(1, WRITE, [0x10, 0, 0]))
        assert reply.instruction != 0

    @settings(max_examples=100)
    @given(st.integers(1, 4), st.integers(0, 4095))
    def test_isolation(self, target, tick):
        bus = SimBus()
        others = {i: (s.goal, s.position) for i, s in bus.servos.items() if i != target}
        bus_transaction(bus, write_goal_frame(target, tick))
        bus.step(0.5)
        assert {i: (s.goal, s.position) for i, s in bus.servos.items() if i != target} == others

    def test_duplicate_ids(self):
        with pytest.raises(ValueError):
            SimBus([SimServo(1), SimServo(1)])


class TestScripts:
    def test_empty(self):
        assert run_script([]) == []

    def test_ping_all(self):
        lines = run_script(["ping 1", "ping 2", "ping 3", "ping 4"])
        assert sum(line.startswith("<") for line in lines) == 4

    def test_corrupted_frame(self):
        with pytest.raises(ScriptError, match="line 2: checksum_error"):
            run_script(["ping 1", "FF FF 01 02 01 FA"])

    def test_unknown_command(self):
        with pytest.raises(ScriptError, match="line 1"):
            run_script(["jump 3"])

    def test_wrist_command_moves_servos(self):
        bus = SimBus()
        run_script(["wrist 30 0", "wait 1", "wait 1"], bus)
        assert bus.positions()[3] == 2389 and bus.positions()[4] == 2048

    def test_transcript_replay(self):
        lines = run_script(["ping 1", "write 2 3000", "wait 0.5", "read 2", "# comment", ""])
        assert check_transcript(lines) == []
        tampered = [line.replace("< FF FF 02 04 00", "< FF FF 02 04 01") for line in lines]
        assert check_transcript(tampered)
