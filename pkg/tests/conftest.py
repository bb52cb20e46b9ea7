import numpy as np
import pytest

from isopair import models

W_DIAG = np.diag([1, 1j])


@pytest.fixture(scope="session")
def shipped():
    return models.shipped_models(W_DIAG)


def dense_defect(pair, grade):
    """Independent route to C(V1, V2): dense compressions of V1 and V2 on a
    window closed under two adjoint steps, multiplied as plain matrices."""
    b = pair.band_radius
    big = pair.scheme.window(grade + 2 * b)
    inner = pair.scheme.window(grade)
    from isopair import linops as lo
    A = lo.compress(pair.V1, big)
    B = lo.compress(pair.V2, big)
    V = A @ B
    C = np.eye(len(big)) - A @ A.conj().T - B @ B.conj().T + V @ V.conj().T
    pos = {c: i for i, c in enumerate(big)}
    idx = [pos[c] for c in inner]
    return C[np.ix_(idx, idx)]


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
