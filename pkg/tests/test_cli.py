"""CLI behavior: flags, rendering, exit codes, end-to-end replays."""

import io
import json
import os
import shutil
import subprocess
import sys
from pathlib import Path

import pytest

from dbgchat import PROMPT
from dbgchat.cli import (
    Config,
    TerminalUi,
    build_parser,
    main,
    run_repl,
    stop_report,
)
from dbgchat.session import Frame, StopInfo

DATA = Path(__file__).parent / "data"
REPLAY_SCRIPT = DATA / "replay_segv.json"
REPLAY_INPUT = "p total_runs\nWhy did the program stop here?\nquit\n"


# -- flags and config -------------------------------------------------------

def test_parser_defaults():
    ns = build_parser().parse_args(["./prog"])
    assert ns.target == "./prog"
    assert ns.target_args == []
    assert ns.model == "gpt-4o"
    assert ns.key_env == "OPENAI_API_KEY"
    assert ns.script is None
    assert ns.unsafe is False


def test_parser_target_args_after_separator():
    ns = build_parser().parse_args(["./prog", "--", "a", "--verbose"])
    assert ns.target == "./prog"
    assert ns.target_args == ["a", "--verbose"]


def test_config_defaults_root_to_cwd():
    config = Config(target="./prog")
    assert config.root == os.getcwd()


def test_config_rejects_unsafe_with_whitelist():
    with pytest.raises(ValueError):
        Config(target="./prog", unsafe=True, whitelist_path="fns.txt")


def test_config_rejects_nonpositive_budget():
    with pytest.raises(ValueError):
        Config(target="./prog", budget=0)


@pytest.mark.parametrize("argv", [
    [],
    ["--unsafe", "--whitelist", "f.txt", "./prog"],
    ["--budget", "-5", "./prog"],
])
def test_usage_errors_exit_2(argv, capsys):
    with pytest.raises(SystemExit) as excinfo:
        main(argv)
    assert excinfo.value.code == 2


# -- terminal rendering -----------------------------------------------------

def make_ui():
    out = io.StringIO()
    return TerminalUi(out), out


def test_prose_streams_verbatim_and_turn_end_closes_line():
    ui, out = make_ui()
    ui.on_prose("Hello ")
    ui.on_prose("there.")
    ui.on_turn_end()
    assert out.getvalue() == "Hello there.\n"


def test_empty_prose_renders_nothing():
    ui, out = make_ui()
    ui.on_prose("")
    ui.on_turn_end()
    assert out.getvalue() == ""


def test_multiparagraph_prose_preserves_blank_lines():
    ui, out = make_ui()
    ui.on_prose("First.\n\nSecond.\n")
    ui.on_turn_end()
    assert out.getvalue() == "First.\n\nSecond.\n"


def test_echo_renders_command_then_indented_output():
    ui, out = make_ui()
    ui.on_echo("p drawn_count", "$2 = 150")
    assert out.getvalue() == "→ p drawn_count\n   $2 = 150\n"


def test_echo_mid_prose_breaks_the_line_first():
    ui, out = make_ui()
    ui.on_prose("Thinking")
    ui.on_echo("bt", "#0 main ()")
    assert out.getvalue() == "Thinking\n→ bt\n   #0 main ()\n"


def test_notice_and_debugger_output():
    ui, out = make_ui()
    ui.on_debugger("p x", "$1 = 3")
    ui.on_notice("turn aborted")
    assert out.getvalue() == "$1 = 3\n[turn aborted]\n"


# -- stop report ------------------------------------------------------------

class StopSession:
    def __init__(self, stop, frames=()):
        self._stop = stop
        self._frames = list(frames)

    @property
    def stop(self):
        return self._stop

    @property
    def stopped(self):
        return self._stop is not None and self._stop.kind != "exited"

    def backtrace(self, limit=None):
        return self._frames


def test_stop_report_names_innermost_user_frame(tmp_path):
    user_file = str(tmp_path / "app.c")
    frames = [
        Frame(level=0, func="memcpy", file="memcpy.c", line=12,
              fullname="string/memcpy.c"),
        Frame(level=1, func="copy_all", file="app.c", line=40,
              fullname=user_file),
    ]
    session = StopSession(
        StopInfo(kind="signal", signal_name="SIGSEGV",
                 signal_meaning="Segmentation fault"), frames)
    report = stop_report(session, str(tmp_path))
    assert report == ("The program stopped on SIGSEGV "
                      "(Segmentation fault).\n"
                      "  at app.c:40 in copy_all()")


def test_stop_report_exited_has_no_frame_line():
    session = StopSession(StopInfo(kind="exited", exit_code=1))
    assert stop_report(session, "/nowhere") == \
        "The program exited with code 1."


def test_stop_report_without_stop():
    assert stop_report(StopSession(None), "/nowhere") == \
        "The program did not stop."


# -- repl loop --------------------------------------------------------------

class LineStream:
    def __init__(self, lines, interrupts=0):
        self._lines = list(lines)
        self._interrupts = interrupts

    def isatty(self):
        return False

    def readline(self):
        if self._interrupts:
            self._interrupts -= 1
            raise KeyboardInterrupt
        if not self._lines:
            return ""
        return self._lines.pop(0) + "\n"


class FakeAgent:
    def __init__(self, raise_on=None):
        self.lines = []
        self.raise_on = raise_on

    def handle_input(self, line):
        if line == self.raise_on:
            raise KeyboardInterrupt
        self.lines.append(line)


def test_repl_echoes_piped_input_and_stops_at_quit():
    agent = FakeAgent()
    out = io.StringIO()
    run_repl(agent, LineStream(["p x", "quit", "never seen"]), out)
    assert agent.lines == ["p x"]
    assert out.getvalue() == f"{PROMPT}p x\n{PROMPT}quit\n"


def test_repl_ends_cleanly_on_eof():
    agent = FakeAgent()
    out = io.StringIO()
    run_repl(agent, LineStream(["bt"]), out)
    assert agent.lines == ["bt"]
    assert out.getvalue().endswith("\n")


def test_repl_interrupt_aborts_turn_not_session():
    agent = FakeAgent(raise_on="slow question")
    out = io.StringIO()
    run_repl(agent, LineStream(["slow question", "p x", "quit"]), out)
    assert agent.lines == ["p x"]
    assert "[turn interrupted]" in out.getvalue()


def test_repl_interrupt_at_prompt_continues():
    agent = FakeAgent()
    out = io.StringIO()
    run_repl(agent, LineStream(["p x", "quit"], interrupts=1), out)
    assert agent.lines == ["p x"]


# -- end-to-end replays -----------------------------------------------------

def run_cli(args, input_text="", env=None, timeout=120):
    cmd = [sys.executable, "-m", "dbgchat.cli", *args]
    return subprocess.run(cmd, input=input_text, text=True,
                          capture_output=True, timeout=timeout, env=env)


@pytest.fixture()
def segv_binary(fixture_bins):
    return fixture_bins["crash_segv"]


def replay_args(segv_binary, fixtures_dir, log_path, extra=()):
    return ["--script", str(REPLAY_SCRIPT), "--root", str(fixtures_dir),
            "--log", str(log_path), *extra, str(segv_binary)]


def test_cli_replay_session(segv_binary, fixtures_dir, tmp_path):
    result = run_cli(replay_args(segv_binary, fixtures_dir,
                                 tmp_path / "log.jsonl"), REPLAY_INPUT)
    assert result.returncode == 0, result.stderr
    out = result.stdout
    assert out.startswith("The program stopped on SIGSEGV")
    assert "  at crash_segv.c:28 in tally_reds()" in out
    assert f"{PROMPT}p total_runs\n$1 = 3\n" in out
    assert "→ p drawn_count\n   $2 = 150\n" in out
    assert "\nRecommendation\n" in out
    assert out.endswith(f"{PROMPT}quit\n")

    events = [json.loads(line)
              for line in (tmp_path / "log.jsonl").read_text().splitlines()]
    assert [e["event"] for e in events] == [
        "config", "debugger", "send", "tool_call", "tool_call", "tool_call",
        "tool_call", "prose"]


def test_cli_replay_is_deterministic(segv_binary, fixtures_dir, tmp_path):
    first = run_cli(replay_args(segv_binary, fixtures_dir,
                                tmp_path / "one.jsonl"), REPLAY_INPUT)
    second = run_cli(replay_args(segv_binary, fixtures_dir,
                                 tmp_path / "two.jsonl"), REPLAY_INPUT)
    assert first.returncode == 0 and second.returncode == 0
    assert (tmp_path / "one.jsonl").read_bytes() == \
        (tmp_path / "two.jsonl").read_bytes()
    assert first.stdout == second.stdout


def test_cli_missing_key_exits_before_repl(segv_binary):
    env = dict(os.environ)
    env.pop("OPENAI_API_KEY", None)
    result = run_cli([str(segv_binary)], env=env)
    assert result.returncode == 1
    assert "no API key" in result.stderr
    assert PROMPT not in result.stdout


def test_cli_missing_target_exits_1():
    result = run_cli(["--script", str(REPLAY_SCRIPT), "/no/such/binary"])
    assert result.returncode == 1
    assert "target executable not found" in result.stderr


def test_cli_missing_stdin_file_exits_1(segv_binary):
    result = run_cli(["--script", str(REPLAY_SCRIPT),
                      "--stdin-file", "/no/such/input", str(segv_binary)])
    assert result.returncode == 1
    assert "/no/such/input" in result.stderr


def test_cli_whitelist_flag_accepted(segv_binary, fixtures_dir, tmp_path):
    allow = tmp_path / "allow.txt"
    allow.write_text("# helpers\nchecksum\n")
    result = run_cli(replay_args(segv_binary, fixtures_dir,
                                 tmp_path / "log.jsonl",
                                 extra=["--whitelist", str(allow)]),
                     REPLAY_INPUT)
    assert result.returncode == 0, result.stderr
    config = json.loads(
        (tmp_path / "log.jsonl").read_text().splitlines()[0])
    assert config["policy"] == "whitelist"


def test_cli_leaves_no_debugger_behind(segv_binary, tmp_path):
    target = tmp_path / "hygiene_target"
    shutil.copy(segv_binary, target)
    target.chmod(0o755)
    result = run_cli(["--script", str(REPLAY_SCRIPT), str(target)],
                     "p total_runs\nquit\n")
    assert result.returncode == 0, result.stderr
    scan = subprocess.run(["pgrep", "-f", "hygiene_target"],
                          capture_output=True, text=True)
    assert scan.stdout.strip() == ""
