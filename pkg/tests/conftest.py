import pytest


def pytest_runtest_logreport(report):
    # One visible pass/fail line per acceptance criterion.
    if report.when == "call" and "test_acceptance" in report.nodeid:
        name = report.nodeid.split("::")[-1]
        outcome = "PASS" if report.passed else ("SKIP" if report.skipped else "FAIL")
        print(f"\nACCEPTANCE {name}: {outcome}")


@pytest.fixture
def tmp_events_csv(tmp_path):
    """Write event rows to a CSV file and return its path."""

    def write(rows, name="events.csv"):
        path = tmp_path / name
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("learner_id,order_index,label,topics\n")
            for row in rows:
                fh.write(row + "\n")
        return path

    return write
