import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

_ACCEPTANCE: dict[int, tuple[bool, str]] = {}


@pytest.fixture
def rng():
  return np.random.default_rng(20240611)


@pytest.fixture
def acceptance():
  """Recorder for acceptance verdicts, printed once at the end of the run."""

  def record(number: int, ok: bool, detail: str) -> None:
    _ACCEPTANCE[number] = (ok, detail)
    print(f'criterion {number:2d}: {"PASS" if ok else "FAIL"}  {detail}')

  return record


def pytest_terminal_summary(terminalreporter):
  if not _ACCEPTANCE:
    return
  terminalreporter.section('acceptance criteria')
  for number in sorted(_ACCEPTANCE):
    ok, detail = _ACCEPTANCE[number]
    terminalreporter.write_line(
        f'criterion {number:2d}: {"PASS" if ok else "FAIL"}  {detail}')
