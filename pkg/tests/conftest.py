import support

CRITERIA = {
    1: "cached grid ranking equals refit oracle",
    2: "fit counts grow linearly with the grid",
    3: "grid vs TPE parity and speed",
    4: "hybrid blending bounds and far field",
    5: "one-class SVM outlier fraction and feasibility",
    6: "TPE beats random search",
    7: "wind profile power law",
    8: "friction exponent recovery",
    9: "t multiplier and zero-width aggregation",
    10: "hybrid extrapolation benefit",
    11: "PV template round trip and calibration",
    12: "benchmark rerun determinism",
}


SELECTED: set = set()


def pytest_collection_finish(session):
    for item in session.items:
        if item.module.__name__ == "test_acceptance" and item.name.startswith("test_criterion_"):
            SELECTED.add(int(item.name.split("_")[2]))


def pytest_terminal_summary(terminalreporter):
    if not SELECTED:
        return
    terminalreporter.section("acceptance criteria")
    for n, title in CRITERIA.items():
        if n in support.ACCEPTANCE:
            ok, detail = support.ACCEPTANCE[n]
            terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'} criterion {n:2d} ({title}): {detail}")
        elif n in SELECTED:
            terminalreporter.write_line(f"FAIL criterion {n:2d} ({title}): test errored before a verdict")
        else:
            terminalreporter.write_line(f"---- criterion {n:2d} ({title}): not run")
