"""Collects ``acceptance``-marked outcomes and prints one verdict line per criterion."""
import pytest

_RESULTS = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance(label): acceptance criterion reported in the summary")


def pytest_collection_modifyitems(items):
    for item in items:
        mark = item.get_closest_marker("acceptance")
        if mark is not None:
            item.user_properties.append(("criterion", mark.args[0]))


def pytest_runtest_logreport(report):
    props = dict(report.user_properties)
    label = props.get("criterion")
    if label is None:
        return
    if report.when == "call" or (report.when == "setup" and not report.passed):
        _RESULTS[label] = ("PASS" if report.passed else "FAIL", props.get("detail", ""))


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for label, (verdict, detail) in _RESULTS.items():
        tr.write_line(f"{verdict}  {label}" + (f"  [{detail}]" if detail else ""))
    passed = sum(v == "PASS" for v, _ in _RESULTS.values())
    tr.write_line(f"{passed}/{len(_RESULTS)} acceptance criteria pass")
