"""Shared, session-scoped fixtures: trained models on the orthogonal-pattern set."""

import numpy as np
import pytest

from snnsar.data import orthogonal_patterns
from snnsar.neuron import LifParams
from snnsar.stdp import StdpParams, train_unsupervised_bilayer, train_unsupervised_single
from snnsar.supervised import extract_guidance, train_supervised


@pytest.fixture(scope="session")
def fixture_data():
    return orthogonal_patterns(per_class=30, size=32, seed=0, test_per_class=10)


@pytest.fixture(scope="session")
def single_model(fixture_data):
    d = fixture_data
    return train_unsupervised_single(d.images("train"), d.labels("train"), LifParams(), StdpParams(),
                                     epochs=20, seed=0, classes=d.classes)


@pytest.fixture(scope="session")
def bilayer_model(fixture_data):
    d = fixture_data
    return train_unsupervised_bilayer(d.images("train"), d.labels("train"), LifParams(), StdpParams(),
                                      epochs=5, seed=0, classes=d.classes, hidden=10)


@pytest.fixture(scope="session")
def guidance(single_model, fixture_data):
    return extract_guidance(single_model, fixture_data.representatives())


@pytest.fixture(scope="session")
def supervised_model(fixture_data, guidance):
    d = fixture_data
    return train_supervised(d.images("train"), d.labels("train"), guidance, LifParams(), epochs=25,
                            seed=0, test=(d.images("test"), d.labels("test")))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# acceptance reporting: one PASS/FAIL line per criterion in the terminal summary

_ACCEPTANCE: dict = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n): acceptance criterion number")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None or report.when != "call" and not report.failed:
        return
    detail = dict(item.user_properties).get("detail", "")
    if report.failed and report.when == "call" and not detail:
        detail = str(call.excinfo.value).splitlines()[0] if call.excinfo else ""
    _ACCEPTANCE[marker.args[0]] = ("PASS" if report.passed else "FAIL", detail)


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_ACCEPTANCE):
        status, detail = _ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n}: {status}  {detail}")
