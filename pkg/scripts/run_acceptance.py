"""Run the acceptance suite and print one pass/fail line per criterion.

    python3 scripts/run_acceptance.py [-k EXPR]

Takes about 20 minutes on one core.  Extra arguments go to pytest.
"""

import sys
from pathlib import Path

import pytest

if __name__ == "__main__":
    tests = Path(__file__).resolve().parent.parent / "tests" / "test_acceptance.py"
    sys.exit(pytest.main([str(tests), "-q", "-p", "no:cacheprovider", *sys.argv[1:]]))
