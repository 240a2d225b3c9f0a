import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from gepurity.basis_index import SectorBasis, enumerate_sector
from gepurity.purity_engine import npc
from gepurity.states import (
    BasisMismatchError,
    EnsembleKind,
    EnsembleSpec,
    LocalFrame,
    NormalizationError,
    PureState,
    apply_local_unitaries,
    basis_state,
    bell_state,
    bloch_vectors,
    canonical_frame,
    change_basis,
    ghz_state,
    make_rng,
    product_state,
    random_local_unitaries,
    sample,
    sample_amplitudes,
    w_state,
)

from conftest import PAULI, kron_all, random_state, reduced_site_rho, site_op


def test_normalization_enforced():
    b = SectorBasis.full(1)
    with pytest.raises(NormalizationError):
        PureState(b, [0.5, 0.0])
    with pytest.raises(BasisMismatchError):
        PureState(b, [1.0, 0.0, 0.0])


def test_json_roundtrip():
    psi = random_state(3, seed=4)
    back = PureState.from_json(psi.to_json())
    assert back.basis == psi.basis
    assert np.array_equal(back.amps, psi.amps)
    obj = json.loads(psi.to_json())
    assert obj["basis"]["n"] == 3 and len(obj["amplitudes"]) == 8


def test_sector_state_embeds():
    s = enumerate_sector(4, 0)
    psi = PureState.normalized(s, np.arange(1, 7))
    full = psi.to_full()
    assert np.allclose(full.amps[s.strings], psi.amps)
    assert np.isclose(np.sum(full.probs), 1.0)


@pytest.mark.parametrize(
    "kind,basis",
    [
        (EnsembleKind.HAAR_COMPLEX, SectorBasis.full(1)),
        (EnsembleKind.HAAR_REAL, SectorBasis.full(3)),
        (EnsembleKind.HAAR_COMPLEX_SECTOR, enumerate_sector(6, 0)),
        (EnsembleKind.HAAR_REAL_SECTOR, enumerate_sector(6, 2)),
    ],
)
def test_samples_are_normalized(kind, basis):
    spec = EnsembleSpec(kind, basis, seed=5)
    a = sample_amplitudes(spec, 50, make_rng(5))
    assert a.shape == (50, basis.dim)
    assert np.allclose(np.sum(np.abs(a) ** 2, axis=1), 1.0, atol=1e-12)
    if spec.is_real:
        assert not np.iscomplexobj(a)


def test_ensemble_basis_validation():
    with pytest.raises(ValueError):
        EnsembleSpec(EnsembleKind.HAAR_COMPLEX, enumerate_sector(4, 0))
    with pytest.raises(ValueError):
        EnsembleSpec(EnsembleKind.HAAR_REAL_SECTOR, SectorBasis.full(4))
    with pytest.raises(ValueError):
        EnsembleSpec(EnsembleKind.SHUFFLED, SectorBasis.full(2), probs=[0.5, 0.6, 0, 0])


def test_shuffled_single_component():
    spec = EnsembleSpec(EnsembleKind.SHUFFLED, SectorBasis.full(3), probs=np.eye(8)[0])
    for k in range(5):
        assert np.isclose(npc(sample(spec, index=k)), 1.0)


def test_shuffled_preserves_probability_multiset():
    p = np.array([0.4, 0.3, 0.2, 0.1])
    spec = EnsembleSpec(EnsembleKind.SHUFFLED, SectorBasis.full(2), probs=p)
    a = sample_amplitudes(spec, 20, make_rng(1))
    assert np.allclose(np.sort(np.abs(a) ** 2, axis=1), np.sort(p))


def test_sampling_is_seed_deterministic():
    spec = EnsembleSpec(EnsembleKind.HAAR_COMPLEX, SectorBasis.full(4), seed=11)
    assert np.array_equal(sample(spec, index=3).amps, sample(spec, index=3).amps)
    assert not np.array_equal(sample(spec, index=3).amps, sample(spec, index=4).amps)


def test_named_states():
    assert np.allclose(ghz_state(3).amps[[0, 7]], 2**-0.5)
    assert np.allclose(bell_state().probs, [0.5, 0, 0, 0.5])
    assert np.allclose(w_state(3).probs[[1, 2, 4]], 1 / 3)
    assert basis_state(SectorBasis.full(2), 2).probs[2] == 1.0


def test_change_basis_examples():
    zero = basis_state(SectorBasis.full(1))
    assert np.allclose(change_basis(zero, "x").amps, [2**-0.5, 2**-0.5])
    ghz_x = change_basis(ghz_state(3), "x")
    even = [v for v in range(8) if bin(v).count("1") % 2 == 0]
    assert np.allclose(ghz_x.probs[even], 0.25)
    # dense oracle: rows of H^{(x)3} applied to the GHZ vector
    H = np.array([[1, 1], [1, -1]]) / np.sqrt(2)
    assert np.allclose(ghz_x.amps, kron_all([H] * 3) @ ghz_state(3).amps)


@given(st.integers(1, 5), st.integers(0, 10**6), st.sampled_from("xyz"))
def test_change_basis_roundtrip(n, seed, axis):
    psi = random_state(n, seed)
    back = change_basis(change_basis(psi, axis), LocalFrame.uniform(n, axis), inverse=True)
    assert np.allclose(back.amps, psi.amps, atol=1e-12)


def test_y_basis_diagonalizes_sigma_y():
    psi = random_state(3, seed=2)
    phi = change_basis(psi, "y")
    for i in range(3):
        direct = np.vdot(psi.amps, site_op(3, i, PAULI["Y"]) @ psi.amps).real
        p = phi.probs.reshape(2**i, 2, -1)
        assert np.isclose(direct, p[:, 0].sum() - p[:, 1].sum())


def test_sector_rejects_transverse_basis():
    psi = PureState.normalized(enumerate_sector(4, 0), np.ones(6))
    with pytest.raises(BasisMismatchError):
        change_basis(psi, "x")


def test_canonical_frame_examples():
    plus = product_state([np.array([1, 1])])
    assert np.allclose(canonical_frame(plus).axes[0], [1, 0, 0])
    f = canonical_frame(product_state([np.array([1, 0]), np.array([0, 1])]))
    assert np.allclose(f.axes, [[0, 0, 1], [0, 0, -1]])
    assert canonical_frame(bell_state()).degenerate == (True, True)


@given(st.integers(1, 5), st.integers(0, 10**6))
def test_canonical_frame_diagonalizes_marginals(n, seed):
    psi = random_state(n, seed)
    phi = change_basis(psi, canonical_frame(psi))
    for i in range(n):
        rho = reduced_site_rho(phi, i)
        assert abs(rho[0, 1]) < 1e-10
        assert rho[0, 0].real >= rho[1, 1].real - 1e-10


def test_qudit_canonical_frame():
    psi = random_state(2, seed=3, d=3)
    phi = change_basis(psi, canonical_frame(psi))
    for i in range(2):
        rho = reduced_site_rho(phi, i)
        assert np.allclose(rho - np.diag(np.diag(rho)), 0, atol=1e-10)


def test_bloch_vectors_match_dense():
    psi = random_state(3, seed=7)
    b = bloch_vectors(psi)
    for i in range(3):
        for k, c in enumerate("XYZ"):
            assert np.isclose(b[i, k], np.vdot(psi.amps, site_op(3, i, PAULI[c]) @ psi.amps).real)


def test_apply_local_unitaries_matches_kron():
    rng = make_rng(3)
    us = random_local_unitaries(3, 2, rng)
    psi = random_state(3, seed=8)
    assert np.allclose(apply_local_unitaries(psi.amps, us), kron_all(us) @ psi.amps)
    us3 = random_local_unitaries(2, 3, rng)
    q = random_state(2, seed=8, d=3)
    assert np.allclose(apply_local_unitaries(q.amps, us3, 3), kron_all(us3) @ q.amps)
