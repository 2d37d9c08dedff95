"""
Unit tests for floquetdg -- the built-in property suites.
"""

from __future__ import annotations

import pytest

from floquetdg.verify import SUITES, CheckResult, format_report, run_verification


# -- run_verification() -------------------------------------------------------

class TestRunVerification:
    @pytest.mark.parametrize("suite", sorted(SUITES))
    def test_suite_passes(self, suite):
        results = run_verification([suite])
        assert results
        failed = [r.line() for r in results if not r.passed]
        assert not failed, "\n".join(failed)

    def test_selection_keeps_order(self):
        names = [r.name for r in run_verification(["flux", "oracle"])]
        assert names[0] == "flux unit jump"
        assert names[-1] == "oracle TE=TM at normal"

    def test_unknown_suite_raises(self):
        with pytest.raises(ValueError, match="unknown verification suites: nope"):
            run_verification(["flux", "nope"])


# -- CheckResult / format_report() --------------------------------------------

class TestReport:
    def test_line_format(self):
        line = CheckResult("energy", False, 2.5e-3, 1e-10, "200 steps").line()
        assert line.startswith("FAIL  energy")
        assert "2.500e-03 (limit 1.0e-10)" in line
        assert line.endswith("200 steps")

    def test_summary_counts_passes(self):
        report = format_report(
            [CheckResult("a", True, 0.0, 1.0), CheckResult("b", False, 2.0, 1.0)]
        )
        lines = report.splitlines()
        assert lines[0].startswith("PASS")
        assert lines[-1] == "1/2 checks passed"
