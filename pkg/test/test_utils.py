import pytest

from ssf.harness.verdict import Verdict
from ssf.utils.logging import RULE, print_lines, print_summary_end, print_verdicts
from ssf.utils.timer import Timer, TimerError


def test_timer_laps():
    timer = Timer()
    assert not timer.is_running
    timer.start()
    first = timer.lap("first")
    timer.stop()
    assert not timer.is_running
    assert [name for name, _ in timer.laps] == ["first", "end"]
    assert first >= 0
    assert timer.total_time == pytest.approx(sum(x for _, x in timer.laps))
    assert timer.recorded_times_as_str[0].startswith("first: ")
    assert timer.total_time_as_str.endswith("s")

    timer.start(reset=True)
    assert timer.laps == []


def test_timer_misuse():
    timer = Timer(start_timer=True)
    with pytest.raises(TimerError, match="already running"):
        timer.start()
    timer.stop()
    with pytest.raises(TimerError, match="not running"):
        timer.stop()


def test_print_lines(capsys):
    print_lines("Run", ["records: 3", "messages sent: 1"])
    assert capsys.readouterr().out.splitlines() == [
        "### Run:",
        "###  -> records: 3",
        "###  -> messages sent: 1",
        "### ",
    ]
    print_lines("Slashable offences", [])
    assert "###  -> none" in capsys.readouterr().out


def test_print_verdicts(capsys):
    print_verdicts([Verdict.passed("ssf", "2 slots"), Verdict.waived("finality", "")])
    assert capsys.readouterr().out == "PASS ssf 2 slots\nWAIVED finality\n"


def test_print_summary_end(capsys):
    timer = Timer(start_timer=True)
    timer.lap("simulation")
    timer.stop()
    print_summary_end("run of smoke.cfg", timer)
    out = capsys.readouterr().out
    assert out.startswith("### Completed run of smoke.cfg in ")
    assert "###  - simulation: " in out
    assert RULE in out
