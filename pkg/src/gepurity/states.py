"""Pure states, random-state ensembles and product-basis changes."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from typing import Sequence

import numpy as np

from .basis_index import SectorBasis, popcount

NORM_TOL = 1e-12
DEGENERATE_TOL = 1e-12

_SQ2 = 1.0 / np.sqrt(2.0)
HADAMARD = np.array([[1, 1], [1, -1]], dtype=complex) * _SQ2
# rows are <+i| and <-i|, i.e. H applied after S^dagger
Y_ROTATION = np.array([[1, -1j], [1, 1j]], dtype=complex) * _SQ2
AXIS_UNITARIES = {"z": np.eye(2, dtype=complex), "x": HADAMARD, "y": Y_ROTATION}

PAULI = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}


class NormalizationError(ValueError):
    pass


class BasisMismatchError(ValueError):
    pass


def make_rng(seed: int, *keys: int) -> np.random.Generator:
    """Counter-based (Philox) generator for the stream ``(seed, *keys)``.

    Distinct key tuples give independent streams; the same tuple gives the
    same draws on every platform.
    """
    ss = np.random.SeedSequence([int(seed), *map(int, keys)])
    return np.random.Generator(np.random.Philox(ss))


@dataclass(frozen=True, eq=False)
class PureState:
    basis: SectorBasis
    amps: np.ndarray

    def __post_init__(self):
        amps = np.array(self.amps, dtype=complex)
        if amps.shape != (self.basis.dim,):
            raise BasisMismatchError(f"expected {self.basis.dim} amplitudes, got shape {amps.shape}")
        norm = float(np.vdot(amps, amps).real)
        if abs(norm - 1.0) > NORM_TOL:
            raise NormalizationError(f"state norm^2 = {norm!r}, expected 1")
        amps.setflags(write=False)
        object.__setattr__(self, "amps", amps)

    @classmethod
    def normalized(cls, basis: SectorBasis, amps) -> "PureState":
        amps = np.asarray(amps, dtype=complex)
        return cls(basis, amps / np.linalg.norm(amps))

    @property
    def n(self) -> int:
        return self.basis.n

    @property
    def d(self) -> int:
        return self.basis.d

    @property
    def dim(self) -> int:
        return self.basis.dim

    @property
    def probs(self) -> np.ndarray:
        return np.abs(self.amps) ** 2

    def to_full(self) -> "PureState":
        """Embed a sector state in the full product space."""
        if self.basis.is_full:
            return self
        full = np.zeros(self.basis.full_dim, dtype=complex)
        full[self.basis.strings] = self.amps
        return PureState(SectorBasis.full(self.n, self.d), full)

    def to_json(self) -> str:
        return json.dumps(
            {
                "basis": self.basis.describe(),
                "amplitudes": [[float(a.real), float(a.imag)] for a in self.amps],
            }
        )

    @classmethod
    def from_json(cls, text: str) -> "PureState":
        obj = json.loads(text)
        basis = SectorBasis.from_description(obj["basis"])
        pairs = np.asarray(obj["amplitudes"], dtype=float)
        if pairs.ndim != 2 or pairs.shape[1] != 2:
            raise ValueError("amplitudes must be a list of [re, im] pairs")
        return cls(basis, pairs[:, 0] + 1j * pairs[:, 1])


# -- named states -----------------------------------------------------------


def basis_state(basis: SectorBasis, index: int = 0) -> PureState:
    amps = np.zeros(basis.dim, dtype=complex)
    amps[index] = 1.0
    return PureState(basis, amps)


def product_state(site_vectors: Sequence[np.ndarray]) -> PureState:
    vec = np.ones(1, dtype=complex)
    for v in site_vectors:
        v = np.asarray(v, dtype=complex)
        vec = np.kron(vec, v / np.linalg.norm(v))
    d = len(site_vectors[0])
    return PureState(SectorBasis.full(len(site_vectors), d), vec)


def ghz_state(n: int) -> PureState:
    amps = np.zeros(2**n, dtype=complex)
    amps[0] = amps[-1] = _SQ2
    return PureState(SectorBasis.full(n), amps)


def bell_state() -> PureState:
    return ghz_state(2)


def w_state(n: int) -> PureState:
    amps = np.zeros(2**n, dtype=complex)
    amps[[1 << k for k in range(n)]] = 1 / np.sqrt(n)
    return PureState(SectorBasis.full(n), amps)


# -- ensembles --------------------------------------------------------------


class EnsembleKind(str, Enum):
    HAAR_COMPLEX = "haar_complex"
    HAAR_REAL = "haar_real"
    HAAR_COMPLEX_SECTOR = "haar_complex_sector"
    HAAR_REAL_SECTOR = "haar_real_sector"
    SHUFFLED = "shuffled"


@dataclass(frozen=True, eq=False)
class EnsembleSpec:
    """Which random-state distribution to draw from.

    ``basis`` fixes the dimension; sector kinds require a sector basis and
    full kinds a full one. ``probs`` is the probability multiset for the
    shuffled ensemble.
    """

    kind: EnsembleKind
    basis: SectorBasis
    seed: int = 0
    probs: np.ndarray | None = field(default=None)

    def __post_init__(self):
        object.__setattr__(self, "kind", EnsembleKind(self.kind))
        sector_kind = self.kind in (EnsembleKind.HAAR_COMPLEX_SECTOR, EnsembleKind.HAAR_REAL_SECTOR)
        if sector_kind and self.basis.is_full:
            raise ValueError(f"{self.kind.value} needs a sector basis")
        if self.kind in (EnsembleKind.HAAR_COMPLEX, EnsembleKind.HAAR_REAL) and not self.basis.is_full:
            raise ValueError(f"{self.kind.value} needs the full basis; use the sector variant")
        if self.kind is EnsembleKind.SHUFFLED:
            if self.probs is None:
                raise ValueError("shuffled ensemble needs probs")
            p = np.asarray(self.probs, dtype=float)
            if p.shape != (self.basis.dim,) or np.any(p < 0) or abs(p.sum() - 1.0) > NORM_TOL:
                raise ValueError("probs must be nonnegative, sum to 1 and match the basis dimension")
            p = p.copy()
            p.setflags(write=False)
            object.__setattr__(self, "probs", p)

    @property
    def dim(self) -> int:
        return self.basis.dim

    @property
    def is_real(self) -> bool:
        return self.kind in (EnsembleKind.HAAR_REAL, EnsembleKind.HAAR_REAL_SECTOR)


def sample_amplitudes(spec: EnsembleSpec, size: int, rng: np.random.Generator) -> np.ndarray:
    """(size, dim) array of normalized amplitude vectors from ``spec``."""
    dim = spec.dim
    kind = spec.kind
    if kind is EnsembleKind.SHUFFLED:
        probs = np.broadcast_to(spec.probs, (size, dim))
        mags = rng.permuted(np.sqrt(probs), axis=1)
        phases = np.exp(2j * np.pi * rng.random((size, dim)))
        return mags * phases
    if spec.is_real:
        out = rng.standard_normal((size, dim))
    else:
        out = rng.standard_normal((size, dim)) + 1j * rng.standard_normal((size, dim))
    norms = np.linalg.norm(out, axis=1)
    bad = norms == 0
    while np.any(bad):  # measure-zero; redraw the offending rows
        k = int(bad.sum())
        redraw = rng.standard_normal((k, dim))
        if not spec.is_real:
            redraw = redraw + 1j * rng.standard_normal((k, dim))
        out[bad] = redraw
        norms = np.linalg.norm(out, axis=1)
        bad = norms == 0
    return out / norms[:, None]


def sample(spec: EnsembleSpec, rng: np.random.Generator | None = None, index: int = 0) -> PureState:
    """One state from ``spec``; by default from the stream (spec.seed, index)."""
    if rng is None:
        rng = make_rng(spec.seed, index)
    amps = sample_amplitudes(spec, 1, rng)[0]
    return PureState(spec.basis, amps)


# -- local frames and basis changes -----------------------------------------


def apply_local_unitaries(amps: np.ndarray, unitaries: Sequence[np.ndarray], d: int = 2) -> np.ndarray:
    """Apply a product of single-site matrices, one site at a time.

    ``amps`` has shape (..., d**n); ``unitaries[i]`` acts on site i (site 0
    is the most significant digit). Cost is O(n d N) instead of O(N^2).
    """
    amps = np.asarray(amps)
    n = len(unitaries)
    lead = amps.shape[:-1]
    out = amps.astype(complex, copy=True)
    for i, u in enumerate(unitaries):
        if u is None:
            continue
        t = out.reshape(*lead, d**i, d, d ** (n - i - 1))
        out = np.einsum("ab,...xbz->...xaz", u, t).reshape(*lead, d**n)
    return out


def site_reduced_density_matrices(amps: np.ndarray, n: int, d: int = 2) -> np.ndarray:
    """(n, d, d) stack of single-site reduced density matrices."""
    rhos = np.empty((n, d, d), dtype=complex)
    for i in range(n):
        t = np.asarray(amps).reshape(d**i, d, d ** (n - i - 1))
        rhos[i] = np.einsum("xaz,xbz->ab", t, t.conj())
    return rhos


@dataclass(frozen=True, eq=False)
class LocalFrame:
    """Per-site product basis.

    ``unitaries[i]`` has the bra vectors of the new site basis as rows, so
    applying it maps old-basis amplitudes to new-basis amplitudes. For
    qubits ``axes[i]`` is the Bloch direction whose +1 eigenvector is digit 0.
    """

    unitaries: tuple[np.ndarray, ...]
    d: int = 2
    axes: np.ndarray | None = None
    degenerate: tuple[bool, ...] = ()

    def __post_init__(self):
        if self.axes is not None:
            norms = np.linalg.norm(self.axes, axis=1)
            if np.any(np.abs(norms - 1.0) > 1e-12):
                raise ValueError("frame axes must be unit vectors")

    @classmethod
    def from_axes(cls, axes: np.ndarray, degenerate: Sequence[bool] | None = None) -> "LocalFrame":
        axes = np.asarray(axes, dtype=float)
        axes = axes / np.linalg.norm(axes, axis=1, keepdims=True)
        us = tuple(_axis_unitary(a) for a in axes)
        deg = tuple(degenerate) if degenerate is not None else (False,) * len(axes)
        return cls(us, 2, axes, deg)

    @classmethod
    def uniform(cls, n: int, label: str) -> "LocalFrame":
        axis = {"x": (1.0, 0.0, 0.0), "y": (0.0, 1.0, 0.0), "z": (0.0, 0.0, 1.0)}[label]
        return cls((AXIS_UNITARIES[label],) * n, 2, np.tile(axis, (n, 1)), (False,) * n)

    @property
    def n(self) -> int:
        return len(self.unitaries)


def _axis_unitary(axis: np.ndarray) -> np.ndarray:
    nx, ny, nz = axis
    theta = np.arccos(np.clip(nz, -1.0, 1.0))
    phi = np.arctan2(ny, nx)
    c, s = np.cos(theta / 2), np.sin(theta / 2)
    plus = np.array([c, np.exp(1j * phi) * s])
    minus = np.array([-np.exp(-1j * phi) * s, c])
    return np.vstack([plus.conj(), minus.conj()])


def bloch_vectors(psi: PureState) -> np.ndarray:
    """(n, 3) array of single-site (<X>, <Y>, <Z>)."""
    if not psi.basis.is_full or psi.d != 2:
        psi = psi.to_full()
    rhos = site_reduced_density_matrices(psi.amps, psi.n, 2)
    x = 2 * rhos[:, 0, 1].real
    y = -2 * rhos[:, 0, 1].imag
    z = (rhos[:, 0, 0] - rhos[:, 1, 1]).real
    return np.stack([x, y, z], axis=1)


def canonical_frame(psi: PureState) -> LocalFrame:
    """Product basis in which every single-site reduced state is diagonal."""
    if not psi.basis.is_full:
        raise BasisMismatchError("canonical_frame needs a full-basis state")
    if psi.d == 2:
        b = bloch_vectors(psi)
        lengths = np.linalg.norm(b, axis=1)
        degenerate = lengths < DEGENERATE_TOL
        axes = np.where(degenerate[:, None], np.array([0.0, 0.0, 1.0]), b / np.where(degenerate, 1.0, lengths)[:, None])
        return LocalFrame.from_axes(axes, degenerate.tolist())
    rhos = site_reduced_density_matrices(psi.amps, psi.n, psi.d)
    us, deg = [], []
    for rho in rhos:
        w, v = np.linalg.eigh(rho)
        order = np.argsort(w)[::-1]
        us.append(v[:, order].conj().T)
        deg.append(bool(np.ptp(w) < DEGENERATE_TOL))
    return LocalFrame(tuple(us), psi.d, None, tuple(deg))


def change_basis(psi: PureState, frame: LocalFrame | str, inverse: bool = False) -> PureState:
    """Amplitudes of ``psi`` in a rotated product basis.

    ``frame`` is a LocalFrame or one of the axis labels "x", "y", "z". With
    ``inverse=True`` the amplitudes are taken back from the frame basis.
    """
    if isinstance(frame, str):
        if frame not in AXIS_UNITARIES:
            raise ValueError(f"unknown axis label {frame!r}")
        if frame == "z":
            return psi
        if not psi.basis.is_full:
            raise BasisMismatchError(f"the {frame}-basis leaves the sector; embed with to_full() first")
        frame = LocalFrame.uniform(psi.n, frame)
    if not psi.basis.is_full:
        raise BasisMismatchError("frame changes need a full-basis state")
    if frame.n != psi.n or frame.d != psi.d:
        raise BasisMismatchError("frame does not match the state's sites")
    us = frame.unitaries
    if inverse:
        us = tuple(u.conj().T for u in us)
    amps = apply_local_unitaries(psi.amps, us, psi.d)
    return PureState(psi.basis, amps / np.linalg.norm(amps))


def random_local_unitaries(n: int, d: int, rng: np.random.Generator) -> list[np.ndarray]:
    """Haar-random single-site unitaries via QR of complex Ginibre matrices."""
    out = []
    for _ in range(n):
        z = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
        q, r = np.linalg.qr(z)
        out.append(q * (np.diag(r) / np.abs(np.diag(r))))
    return out


def z_parity_signs(basis: SectorBasis) -> np.ndarray:
    """Eigenvalues of the collective sigma_z product on each label."""
    return 1 - 2 * (popcount(basis.strings) & 1)
