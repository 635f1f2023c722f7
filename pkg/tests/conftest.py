VERDICT = {"passed": "PASS", "failed": "FAIL"}


def pytest_terminal_summary(terminalreporter):
    """One pass/fail line per acceptance criterion, from the 'criterion' user property."""
    lines = []
    for outcome, word in VERDICT.items():
        for rep in terminalreporter.stats.get(outcome, []):
            if rep.when != "call":
                continue
            for name, value in getattr(rep, "user_properties", []):
                if name == "criterion":
                    number, detail = value
                    lines.append((number, f"criterion {number}: {word} {detail}"))
    if lines:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(lines):
            terminalreporter.write_line(line)
