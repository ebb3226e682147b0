"""Run the acceptance suite and print one PASS/FAIL line per criterion.

    python3 scripts/run_acceptance.py [extra pytest args]

Criterion 7 (50 calibration fits) dominates the runtime, about 15 minutes
on one core; add ``-k "not calibration"`` to skip it.
"""
import sys
from pathlib import Path

import pytest

if __name__ == "__main__":
    tests = Path(__file__).resolve().parent.parent / "tests" / "test_acceptance.py"
    sys.exit(pytest.main([str(tests), "-v", "-rxX", *sys.argv[1:]]))
