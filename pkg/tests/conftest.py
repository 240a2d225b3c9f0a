import numpy as np
import pytest
from hypothesis import settings

from gepurity.basis_index import SectorBasis
from gepurity.states import PureState, make_rng

settings.register_profile("default", max_examples=60, deadline=None)
settings.load_profile("default")

PAULI = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}


def kron_all(mats):
    out = np.ones((1, 1), dtype=complex)
    for m in mats:
        out = np.kron(out, m)
    return out


def site_op(n, i, m, d=2):
    return kron_all([m if j == i else np.eye(d) for j in range(n)])


def random_state(n, seed=0, d=2, real=False):
    rng = make_rng(seed, 99)
    N = d**n
    a = rng.normal(size=N) + (0 if real else 1j * rng.normal(size=N))
    return PureState.normalized(SectorBasis.full(n, d), a)


def reduced_site_rho(psi_full, i):
    """Explicit partial trace onto site i of a full-basis state."""
    n, d = psi_full.n, psi_full.d
    t = np.asarray(psi_full.amps).reshape([d] * n)
    t = np.moveaxis(t, i, 0).reshape(d, -1)
    return t @ t.conj().T


def oracle_local_purity(psi):
    full = psi.to_full()
    d = full.d
    vals = [np.trace(r @ r).real for r in (reduced_site_rho(full, i) for i in range(full.n))]
    return d / (d - 1) * (np.mean(vals) - 1 / d)


# -- acceptance bookkeeping -------------------------------------------------

_ACCEPTANCE: list[str] = []


@pytest.fixture(scope="session")
def acceptance_log():
    return _ACCEPTANCE


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE:
            terminalreporter.write_line(line)
