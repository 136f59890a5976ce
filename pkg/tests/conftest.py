import shutil
import sys
from pathlib import Path

import pytest

from adtfree.solver import Solver

ROOT = Path(__file__).resolve().parent.parent
PROBLEMS = ROOT / "problems"

# criterion number -> (passed, description); filled in by test_acceptance
ACCEPTANCE: dict[int, tuple[bool, str]] = {}


def z3_command() -> str | None:
    exe = shutil.which("z3")
    if exe is None:
        try:
            import z3  # noqa: F401
        except ImportError:
            return None
        exe = str(Path(sys.executable).parent / "z3")
        if not Path(exe).exists():
            return None
    # global guidance keeps spacer from diverging on the difference-predicate goals
    return f"{exe} fp.spacer.global=true {{file}}"


def stub_solver(answer: str, *extra: str) -> Solver:
    """A fake back end that prints a fixed verdict and optional extra lines."""
    text = "\\n".join((answer,) + extra)
    return Solver(f'{sys.executable} -c "print(\'{text}\')"', 30)


@pytest.fixture(scope="session")
def z3():
    cmd = z3_command()
    if cmd is None:
        pytest.skip("z3 is not installed")
    return Solver(cmd, 120)


@pytest.fixture(scope="session")
def problems_dir():
    return PROBLEMS


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, desc = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n}: {'PASS' if ok else 'FAIL'}  {desc}")
