from __future__ import annotations

import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from ixtrace.lpm import available_backends  # noqa: E402

DATA = Path(__file__).parent / "data"

_ACCEPTANCE: dict[str, dict] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance(ac_id, title): acceptance criterion check")


@pytest.fixture
def data_dir() -> Path:
    return DATA


@pytest.fixture(scope="session")
def world():
    from synth import world as build

    return build()


@pytest.fixture(params=sorted(available_backends()))
def kernel(request):
    return available_backends()[request.param]


@pytest.fixture
def measure(request):
    """Attach measured values to the acceptance line of the current test."""
    marker = request.node.get_closest_marker("acceptance")
    slot = _ACCEPTANCE.setdefault(marker.args[0], {"title": marker.args[1], "ok": True, "info": {}})
    return slot["info"]


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("acceptance")
    if marker is None or rep.when != "call" and not rep.failed:
        return
    slot = _ACCEPTANCE.setdefault(marker.args[0], {"title": marker.args[1], "ok": True, "info": {}})
    slot["ok"] = slot["ok"] and not rep.failed
    slot.setdefault("skipped", rep.skipped)


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for ac in sorted(_ACCEPTANCE, key=lambda s: int(s[2:])):
        slot = _ACCEPTANCE[ac]
        status = "PASS" if slot["ok"] else "FAIL"
        info = ", ".join(f"{k}={v}" for k, v in slot["info"].items())
        tr.write_line(f"{ac} {status}  {slot['title']}" + (f"  [{info}]" if info else ""))
