import numpy as np
import pytest

from ofk import _pykernels


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def _backends():
    out = [pytest.param(_pykernels, id="python")]
    try:
        from ofk import _ckernels
    except ImportError:
        return out
    return out + [pytest.param(_ckernels, id="cython")]


@pytest.fixture(params=_backends())
def backend(request, monkeypatch):
    """Run a test once per available kernel implementation."""
    import ofk.decoder
    import ofk.metrics

    impl = request.param
    monkeypatch.setattr(ofk.decoder, "decode_runs", impl.decode_runs)
    monkeypatch.setattr(ofk.metrics, "max_bipartite_matching", impl.max_bipartite_matching)
    return impl



_ACCEPTANCE = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance(number, title): acceptance criterion covered by a test")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("acceptance")
    if marker is None or not (rep.when == "call" or rep.failed):
        return
    number, title = marker.args
    entry = _ACCEPTANCE.setdefault(number, {"title": title, "passed": 0, "failed": 0})
    entry["passed" if rep.passed else "failed"] += 1


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_ACCEPTANCE):
        e = _ACCEPTANCE[number]
        status = "PASS" if e["failed"] == 0 and e["passed"] else "FAIL"
        terminalreporter.write_line(
            f"criterion {number}: {status}  {e['title']} ({e['passed']} passed, {e['failed']} failed)")
