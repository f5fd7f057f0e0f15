"""User-logic subprocess harness tests using tiny shell and Python children."""

import sys

import pytest
from hypothesis import given, settings, strategies as st

from bagpipe.errors import UserLogicError, UserLogicExit, UserLogicTimeout
from bagpipe.frames import Frame, encode_bytes
from bagpipe.userproc import UserLogicSpec, run_user_logic

PY = sys.executable

# child that decodes its input, applies fn to each frame, re-encodes
_MAP_CHILD = """
import sys
from bagpipe import frames
out = [{expr} for f in frames.decode_stream(sys.stdin.buffer)]
frames.encode_stream(out, sys.stdout.buffer)
"""


def _map_spec(expr: str, **kwargs) -> UserLogicSpec:
    return UserLogicSpec((PY, "-c", _MAP_CHILD.format(expr=expr)), **kwargs)


def test_cat_is_identity():
    frames = [Frame("a", b"\x01"), Frame("b/2", b"\x02\x03")]
    result = run_user_logic(UserLogicSpec(("/bin/cat",)), frames)
    assert result.frames == frames
    assert result.exit_code == 0
    assert result.stderr == b""


@given(
    frames=st.lists(
        st.builds(Frame, st.text(max_size=12), st.binary(max_size=48)), max_size=8
    )
)
@settings(max_examples=15, deadline=None)
def test_cat_identity_random(frames):
    assert run_user_logic(UserLogicSpec(("/bin/cat",)), frames).frames == frames


def test_large_input_via_feeder_thread():
    # over PIPE_SAFE_BYTES both ways, forcing the concurrent writer path
    frames = [Frame("big", b"\xaa" * (2 * 1024 * 1024))]
    result = run_user_logic(UserLogicSpec(("/bin/cat",)), frames)
    assert result.frames == frames


def test_frame_transform_child():
    result = run_user_logic(
        _map_spec('frames.Frame(f.name.upper(), f.payload * 2)'),
        [Frame("ab", b"\x05")],
    )
    assert result.frames == [Frame("AB", b"\x05\x05")]


def test_nonzero_exit_raises_with_frames_attached():
    command = (
        "/bin/sh",
        "-c",
        "cat >/dev/null; printf 'BPR1\\377\\377\\377\\377'; echo oops >&2; exit 3",
    )
    with pytest.raises(UserLogicExit, match="exited with status 3") as info:
        run_user_logic(UserLogicSpec(command), [Frame("x", b"")])
    assert info.value.exit_code == 3
    assert info.value.frames == []  # output stream was still well-formed
    assert b"oops" in info.value.stderr


def test_nonzero_exit_with_garbage_output():
    command = ("/bin/sh", "-c", "cat >/dev/null; echo not-a-stream; exit 9")
    with pytest.raises(UserLogicExit) as info:
        run_user_logic(UserLogicSpec(command), [])
    assert info.value.exit_code == 9
    assert info.value.frames is None


def test_malformed_output_from_clean_exit():
    command = ("/bin/sh", "-c", "cat >/dev/null; printf 'BPR1'")
    with pytest.raises(UserLogicError, match="malformed frame stream"):
        run_user_logic(UserLogicSpec(command), [])


def test_missing_command():
    with pytest.raises(UserLogicError, match="cannot start user logic"):
        run_user_logic(UserLogicSpec(("/no/such/binary",)), [])


def test_empty_command_rejected():
    with pytest.raises(ValueError):
        UserLogicSpec(())


def test_timeout_kills_child():
    command = ("/bin/sh", "-c", "sleep 30")
    with pytest.raises(UserLogicTimeout, match="exceeded 0.2"):
        run_user_logic(UserLogicSpec(command, timeout_s=0.2), [])


def test_stderr_captured_on_success():
    command = ("/bin/sh", "-c", "cat; echo warning >&2")
    result = run_user_logic(UserLogicSpec(command), [Frame("k", b"v")])
    assert result.frames == [Frame("k", b"v")]
    assert result.stderr.strip() == b"warning"


def test_task_id_exported():
    result = run_user_logic(
        _map_spec('frames.Frame(__import__("os").environ["BAGPIPE_TASK_ID"], b"")'),
        [Frame("x", b"")],
        task_id="7/3",
    )
    assert result.frames == [Frame("7/3", b"")]


def test_extra_env_passed_through():
    child = _MAP_CHILD.format(
        expr='frames.Frame(__import__("os").environ["MY_KNOB"], b"")'
    )
    spec = UserLogicSpec((PY, "-c", child), env={"MY_KNOB": "turned"})
    result = run_user_logic(spec, [Frame("x", b"")])
    assert result.frames == [Frame("turned", b"")]


def test_empty_input_empty_output():
    result = run_user_logic(UserLogicSpec(("/bin/cat",)), [])
    assert result.frames == []
