import numpy as np
import pytest

from loggsqg.spectral import GridSpec, SpectralField


@pytest.fixture
def grid32():
    return GridSpec(32)


def single_mode(grid: GridSpec, k1: int, k2: int, amplitude: float = 1.0) -> SpectralField:
    """Real field cos(k1 x1 + k2 x2) scaled to the requested L2 norm."""
    c = np.zeros((grid.N, grid.N), dtype=complex)
    c[k1 % grid.N, k2 % grid.N] += 1.0
    c[-k1 % grid.N, -k2 % grid.N] += 1.0
    f = SpectralField(grid, c, zero_mean=(k1, k2) != (0, 0))
    from loggsqg.spectral import l2_norm

    return f * (amplitude / l2_norm(f))


ACCEPTANCE_LINES: list = []


def record_criterion(number: int, title: str, passed: bool, detail: str = "") -> str:
    line = f"criterion {number:2d} {'PASS' if passed else 'FAIL'}  {title}" + (f"  ({detail})" if detail else "")
    print(line)
    ACCEPTANCE_LINES.append((number, line))
    return line


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
