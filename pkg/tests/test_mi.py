"""Machine-interface layer: parsing oracles, round-trips, live sessions."""

from __future__ import annotations

import os

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dbgchat import mi
from dbgchat.errors import (
    CommandInFlight,
    DebuggerExited,
    TargetNotFound,
)
from dbgchat.mi import (
    DriverConfig,
    MIRecord,
    RecordKind,
    parse_mi_line,
    spawn_debugger,
)

# -- fixed oracle lines ----------------------------------------------------

def test_result_done_with_value():
    rec = parse_mi_line('^done,value="42"')
    assert rec.kind is RecordKind.RESULT
    assert rec.klass == "done"
    assert rec.payload == {"value": "42"}
    assert rec.token is None


def test_prompt_line():
    assert parse_mi_line("(gdb) ").kind is RecordKind.PROMPT
    assert parse_mi_line("(gdb)").kind is RecordKind.PROMPT


def test_stopped_signal_record():
    line = ('*stopped,reason="signal-received",signal-name="SIGSEGV",'
            'signal-meaning="Segmentation fault"')
    rec = parse_mi_line(line)
    assert rec.kind is RecordKind.ASYNC_EXEC
    assert rec.klass == "stopped"
    assert rec.payload["reason"] == "signal-received"
    assert rec.payload["signal-name"] == "SIGSEGV"


def test_tokened_result():
    rec = parse_mi_line('7^error,msg="No symbol table is loaded."')
    assert rec.token == 7
    assert rec.klass == "error"
    assert rec.payload["msg"] == "No symbol table is loaded."


def test_console_stream_unescapes():
    rec = parse_mi_line('~"line one\\nline two\\t!"')
    assert rec.kind is RecordKind.CONSOLE_STREAM
    assert rec.text == "line one\nline two\t!"


def test_log_and_target_streams():
    assert parse_mi_line('&"warning\\n"').kind is RecordKind.LOG_STREAM
    assert parse_mi_line('@"out"').kind is RecordKind.TARGET_STREAM


def test_notify_async_record():
    rec = parse_mi_line('=thread-group-added,id="i1"')
    assert rec.kind is RecordKind.ASYNC_NOTIFY
    assert rec.klass == "thread-group-added"
    assert rec.payload == {"id": "i1"}


def test_status_async_normalizes_to_notify():
    rec = parse_mi_line('+download,{section=".text",section-size="6668"}')
    assert rec.kind is RecordKind.ASYNC_NOTIFY
    assert rec.klass == "download"


def test_nested_tuple_payload():
    line = ('*stopped,reason="breakpoint-hit",frame={addr="0x08048564",'
            'func="main",args=[{name="argc",value="1"}],file="demo.c",line="4"}')
    rec = parse_mi_line(line)
    frame = rec.payload["frame"]
    assert frame["func"] == "main"
    assert frame["args"] == [{"name": "argc", "value": "1"}]
    assert frame["line"] == "4"


def test_result_list_with_repeated_names():
    line = ('^done,stack=[frame={level="0",func="inner"},'
            'frame={level="1",func="main"}]')
    rec = parse_mi_line(line)
    stack = rec.payload["stack"]
    assert [f["frame"]["func"] for f in stack] == ["inner", "main"]


def test_empty_list_and_tuple():
    rec = parse_mi_line('^done,locals=[],frame={}')
    assert rec.payload == {"locals": [], "frame": {}}


def test_octal_and_hex_escapes():
    assert parse_mi_line('~"\\033[0m"').text == "\x1b[0m"
    assert parse_mi_line('~"tab:\\x09."').text == "tab:\t."


def test_junk_line_degrades_to_unparsed_log():
    rec = parse_mi_line("Reading symbols from ./a.out...")
    assert rec.kind is RecordKind.LOG_STREAM
    assert rec.unparsed
    assert rec.text == "Reading symbols from ./a.out..."


def test_unparsed_serializes_to_identity():
    raw = "some stray target output"
    rec = parse_mi_line(raw)
    assert rec.serialize() == raw


# -- round-trip invariants -------------------------------------------------

FIXED_LINES = [
    '^done,value="42"',
    '^done',
    '^running',
    '(gdb) ',
    '*running,thread-id="all"',
    '*stopped,reason="exited",exit-code="03"',
    '=breakpoint-created,bkpt={number="1",type="breakpoint"}',
    '~"Reading symbols...\\n"',
    '&"set confirm off\\n"',
    '@"inferior says hi"',
    '12^done,threads=[]',
    '^done,stack=[frame={level="0"},frame={level="1"}]',
    '^done,chars="\'R\' <repeats 100 times>, \'B\' <repeats 50 times>"',
    '^error,msg="Cannot access memory at address 0x0"',
    'garbage that matches nothing',
    '',
]


@pytest.mark.parametrize("line", FIXED_LINES)
def test_round_trip_fixed(line):
    first = parse_mi_line(line)
    again = parse_mi_line(first.serialize())
    assert again == first


@given(st.text(max_size=200))
def test_parse_is_total_and_round_trips(line):
    line = line.replace("\n", " ")
    first = parse_mi_line(line)
    again = parse_mi_line(first.serialize())
    assert again == first


_names = st.from_regex(r"[a-z][a-z0-9-]{0,8}", fullmatch=True)
_strings = st.text(max_size=12)


def _values(depth=3):
    if depth == 0:
        return _strings
    sub = _values(depth - 1)
    return st.one_of(
        _strings,
        st.dictionaries(_names, sub, max_size=3),
        st.lists(sub, max_size=3),
        st.lists(st.dictionaries(_names, sub, min_size=1, max_size=1), max_size=3),
    )


@settings(max_examples=200)
@given(
    kind=st.sampled_from([RecordKind.RESULT, RecordKind.ASYNC_EXEC,
                          RecordKind.ASYNC_NOTIFY]),
    token=st.one_of(st.none(), st.integers(min_value=0, max_value=10**6)),
    klass=_names,
    payload=st.dictionaries(_names, _values(), max_size=4),
)
def test_serialize_parse_round_trip_generated(kind, token, klass, payload):
    rec = MIRecord(kind=kind, token=token, klass=klass, payload=payload)
    assert parse_mi_line(rec.serialize()) == rec


@given(_strings)
def test_stream_text_round_trips(text):
    rec = MIRecord(kind=RecordKind.CONSOLE_STREAM, text=text.replace("\r", ""))
    assert parse_mi_line(rec.serialize()) == rec


# -- live debugger sessions ------------------------------------------------

def test_spawn_missing_target_raises():
    with pytest.raises(TargetNotFound):
        spawn_debugger("/no/such/binary")


def test_spawn_missing_debugger_raises(fixture_bins):
    from dbgchat.errors import DebuggerNotFound
    cfg = DriverConfig(debugger="definitely-not-a-debugger")
    with pytest.raises(DebuggerNotFound):
        spawn_debugger(str(fixture_bins["crash_segv"]), config=cfg)


def test_live_evaluate(fixture_bins):
    with spawn_debugger(str(fixture_bins["crash_segv"])) as dbg:
        out = dbg.send_command("-data-evaluate-expression 1+1")
        assert out.result_class == "done"
        assert out.result.payload["value"] == "2"


def test_live_run_captures_target_output(fixture_bins):
    with spawn_debugger(str(fixture_bins["crash_segv"])) as dbg:
        out = dbg.send_command("-exec-run")
        assert out.result_class == "running"
        batch = dbg.wait_for_async(
            lambda r: r.kind is RecordKind.ASYNC_EXEC and r.klass == "stopped",
            timeout=20,
        )
        stop = next(r for r in batch if r.klass == "stopped")
        assert stop.payload["signal-name"] == "SIGSEGV"
        assert stop.payload["frame"]["func"] == "tally_reds"
        # Inferior stdout goes to the pty, never the MI stream.
        assert "drew 150 marbles" in dbg.target_output(settle=2.0)


def test_live_commands_after_close_raise(fixture_bins):
    dbg = spawn_debugger(str(fixture_bins["crash_segv"]))
    dbg.close()
    with pytest.raises(DebuggerExited):
        dbg.send_command("-data-evaluate-expression 1")


def test_transcript_mirrors_raw_lines(fixture_bins, tmp_path):
    path = tmp_path / "mi.log"
    cfg = DriverConfig(transcript_path=str(path))
    with spawn_debugger(str(fixture_bins["crash_segv"]), config=cfg) as dbg:
        dbg.send_command("-data-evaluate-expression 6*7")
    text = path.read_text()
    assert '^done,value="42"' in text
    # Every mirrored line must parse, with no unparsed stragglers from gdb.
    for line in text.splitlines():
        rec = parse_mi_line(line)
        assert not rec.unparsed or not line.startswith(("^", "*", "=", "~", "&"))
