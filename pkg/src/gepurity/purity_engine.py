"""Observable sets and purity functionals.

Operators are kept in structured form (Pauli strings, real diagonals, spin-J
components, single-site matrices) and their expectations are evaluated in
O(N) per operator. ``to_dense`` builds explicit matrices for cross-checks only.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass
from functools import lru_cache
from math import isqrt
from typing import Sequence, Union

import numpy as np

from .basis_index import SectorBasis, popcount
from .hamming_analysis import pair_sum_marginals, walsh_hadamard
from .states import (
    AXIS_UNITARIES,
    PAULI,
    BasisMismatchError,
    LocalFrame,
    PureState,
    apply_local_unitaries,
    site_reduced_density_matrices,
)


class ObservableSetError(ValueError):
    """Operator set violates tracelessness, normalization or orthogonality."""


class UnsupportedDimensionError(ValueError):
    pass


# -- operator types ---------------------------------------------------------


@dataclass(frozen=True)
class PauliString:
    """coeff * (tensor product of I/X/Y/Z), site 1 leftmost in ``label``."""

    label: str
    coeff: float = 1.0

    def __post_init__(self):
        lab = self.label.upper()
        if not lab or set(lab) - set("IXYZ"):
            raise ValueError(f"bad Pauli label {self.label!r}")
        object.__setattr__(self, "label", lab)

    @property
    def n(self) -> int:
        return len(self.label)

    @property
    def x_mask(self) -> int:
        n = self.n
        return sum(1 << (n - 1 - i) for i, c in enumerate(self.label) if c in "XY")

    @property
    def z_mask(self) -> int:
        n = self.n
        return sum(1 << (n - 1 - i) for i, c in enumerate(self.label) if c in "ZY")

    @property
    def n_y(self) -> int:
        return self.label.count("Y")

    @property
    def is_real(self) -> bool:
        return self.n_y % 2 == 0

    @property
    def is_identity(self) -> bool:
        return set(self.label) == {"I"}

    @property
    def dim(self) -> int:
        return 2**self.n


@dataclass(frozen=True, eq=False)
class DiagonalReal:
    diag: np.ndarray

    def __post_init__(self):
        arr = np.array(self.diag, dtype=float)
        arr.setflags(write=False)
        object.__setattr__(self, "diag", arr)

    is_real = True

    @property
    def dim(self) -> int:
        return len(self.diag)


@dataclass(frozen=True)
class SpinJComponent:
    """sqrt(3 / (J (J+1))) J_axis on the spin-J irrep, basis m = J, J-1, ..., -J."""

    axis: str
    J: float

    def __post_init__(self):
        if self.axis not in ("x", "y", "z"):
            raise ValueError(f"axis must be x, y or z, got {self.axis!r}")
        if self.J <= 0 or abs(2 * self.J - round(2 * self.J)) > 1e-12:
            raise ValueError(f"J must be a positive half-integer, got {self.J}")

    @property
    def dim(self) -> int:
        return int(round(2 * self.J)) + 1

    @property
    def is_real(self) -> bool:
        return self.axis != "y"

    @property
    def scale(self) -> float:
        return float(np.sqrt(3.0 / (self.J * (self.J + 1))))


@dataclass(frozen=True, eq=False)
class LocalOperator:
    """``matrix`` acting on one factor of a tensor product with factor sizes ``dims``."""

    dims: tuple[int, ...]
    site: int
    matrix: np.ndarray

    def __post_init__(self):
        m = np.array(self.matrix, dtype=complex)
        d = self.dims[self.site]
        if m.shape != (d, d) or not np.allclose(m, m.conj().T, atol=1e-12):
            raise ValueError("site matrix must be Hermitian and match the factor dimension")
        m.setflags(write=False)
        object.__setattr__(self, "dims", tuple(int(x) for x in self.dims))
        object.__setattr__(self, "matrix", m)

    @property
    def dim(self) -> int:
        return int(np.prod(self.dims))

    @property
    def is_real(self) -> bool:
        return bool(np.all(np.abs(self.matrix.imag) < 1e-15))


Operator = Union[PauliString, DiagonalReal, SpinJComponent, LocalOperator]


@dataclass(frozen=True, eq=False)
class ObservableSet:
    ops: tuple
    kappa: float
    label: str = "custom"

    @property
    def dim_h(self) -> int:
        return len(self.ops)

    @property
    def N(self) -> int:
        return self.ops[0].dim

    @property
    def is_real(self) -> bool:
        return all(op.is_real for op in self.ops)

    def __len__(self) -> int:
        return len(self.ops)

    def validate(self, tol: float = 1e-9) -> None:
        """Check tracelessness, tr(b^2) = N and pairwise orthogonality."""
        N = self.N
        if any(op.dim != N for op in self.ops):
            raise ObservableSetError("operators act on different dimensions")
        if all(isinstance(op, PauliString) for op in self.ops):
            labels = [op.label for op in self.ops]
            if len(set(labels)) != len(labels):
                raise ObservableSetError("duplicate Pauli strings are not orthogonal")
            for op in self.ops:
                if op.is_identity:
                    raise ObservableSetError(f"{op.label} is not traceless")
                if abs(op.coeff**2 - 1.0) > tol:
                    raise ObservableSetError(f"{op.label}: tr(b^2) = {op.coeff**2 * N}, expected {N}")
            return
        mats = np.array([to_dense(op) for op in self.ops])
        tr = np.einsum("kii->k", mats)
        if np.max(np.abs(tr)) > 1e-10 * max(1, N):
            raise ObservableSetError("operators are not traceless")
        gram = np.einsum("aij,bji->ab", mats, mats).real
        if np.max(np.abs(gram - N * np.eye(len(mats)))) > tol * N:
            raise ObservableSetError("operators are not trace-orthonormal (tr(b_i b_j) = N delta_ij)")


# -- built-in observable sets -----------------------------------------------


def gell_mann(d: int) -> list[np.ndarray]:
    """Generalized Gell-Mann matrices, tr(g_a g_b) = 2 delta_ab."""
    out = []
    for j in range(d):
        for k in range(j + 1, d):
            s = np.zeros((d, d), dtype=complex)
            s[j, k] = s[k, j] = 1
            out.append(s)
            a = np.zeros((d, d), dtype=complex)
            a[j, k], a[k, j] = -1j, 1j
            out.append(a)
    for l in range(1, d):
        g = np.zeros((d, d), dtype=complex)
        g[np.arange(l), np.arange(l)] = 1
        g[l, l] = -l
        out.append(g * np.sqrt(2.0 / (l * (l + 1))))
    return out


def _log2_exact(N: int) -> int | None:
    n = N.bit_length() - 1
    return n if N == 1 << n and n >= 1 else None


def _pauli_label(n: int, placements: dict[int, str]) -> str:
    chars = ["I"] * n
    for site, c in placements.items():
        chars[site] = c
    return "".join(chars)


def all_observables(N: int) -> ObservableSet:
    """All N^2 - 1 traceless observables; Pauli strings when N = 2^n."""
    n = _log2_exact(N)
    if n is not None:

        ops = tuple(
            PauliString("".join(t)) for t in itertools.product("IXYZ", repeat=n) if set(t) != {"I"}
        )
    else:
        scale = np.sqrt(N / 2.0)
        ops = tuple(LocalOperator((N,), 0, g * scale) for g in gell_mann(N))
    return ObservableSet(ops, 1.0 / (N - 1), f"all(N={N})")


def unilocal_A(d_A: int, d_B: int) -> ObservableSet:
    """su(d_A) acting on factor A of C^{d_A} x C^{d_B}."""
    scale = np.sqrt(d_A / 2.0)
    ops = tuple(LocalOperator((d_A, d_B), 0, g * scale) for g in gell_mann(d_A))
    return ObservableSet(ops, 1.0 / (d_A - 1), f"unilocal_A({d_A},{d_B})")


def local_qubits(n: int, axes: str = "xyz") -> ObservableSet:
    """Single-site Paulis along ``axes`` on every site, kappa = 1/n."""
    ops = tuple(
        PauliString(_pauli_label(n, {i: a.upper()})) for i in range(n) for a in axes
    )
    label = "local" if axes == "xyz" else f"local_{axes}"
    return ObservableSet(ops, 1.0 / n, f"{label}(n={n})")


def local_qudits(n: int, d: int) -> ObservableSet:
    if d == 2:
        return local_qubits(n)
    scale = np.sqrt(d / 2.0)
    dims = (d,) * n
    ops = tuple(LocalOperator(dims, i, g * scale) for i in range(n) for g in gell_mann(d))
    return ObservableSet(ops, 1.0 / (n * (d - 1)), f"local(n={n},d={d})")


def diagonal_algebra(basis: SectorBasis | int) -> ObservableSet:
    """Traceless diagonal observables in the given basis.

    kappa = 1/(N-1) so that the purity equals N/(N-1) IPR - 1/(N-1).
    """
    N = basis if isinstance(basis, int) else basis.dim
    ops = []
    for l in range(1, N):
        v = np.zeros(N)
        v[:l] = 1.0
        v[l] = -l
        ops.append(DiagonalReal(v * np.sqrt(N / (l * (l + 1)))))
    return ObservableSet(tuple(ops), 1.0 / (N - 1), f"diag(N={N})")


def spin_j(J: float) -> ObservableSet:
    ops = tuple(SpinJComponent(a, J) for a in "xyz")
    return ObservableSet(ops, (J + 1) / (3 * J), f"su2(J={J})")


def q_block(n: int, q: int = 2) -> ObservableSet:
    """All nontrivial Pauli strings supported on each contiguous block of q sites.

    kappa makes a product of pure block states reach purity 1.
    """

    if n % q:
        raise ValueError(f"n={n} is not a multiple of the block size q={q}")
    blocks = n // q
    ops = []
    for b in range(blocks):
        for t in itertools.product("IXYZ", repeat=q):
            if set(t) == {"I"}:
                continue
            ops.append(PauliString(_pauli_label(n, {b * q + j: c for j, c in enumerate(t)})))
    return ObservableSet(tuple(ops), 1.0 / (blocks * (2**q - 1)), f"block(n={n},q={q})")


def load_observable_set(text: str) -> ObservableSet:
    """User-defined set from JSON.

    Accepts a list of ``{"pauli": "XIZY", "coeff": 1.0}`` entries (or bare
    strings), or an object ``{"label": ..., "kappa": ..., "ops": [...]}``.
    Without kappa, 1/dim(h) is used, which bounds the purity by 1.
    """
    obj = json.loads(text)
    if isinstance(obj, list):
        obj = {"ops": obj}
    entries = obj.get("ops")
    if not entries:
        raise ObservableSetError("observable set has no operators")
    ops = []
    for e in entries:
        if isinstance(e, str):
            ops.append(PauliString(e))
        else:
            ops.append(PauliString(e["pauli"], float(e.get("coeff", 1.0))))
    if len({op.n for op in ops}) != 1:
        raise ObservableSetError("Pauli strings have different lengths")
    kappa = float(obj.get("kappa", 1.0 / len(ops)))
    h = ObservableSet(tuple(ops), kappa, obj.get("label", "custom"))
    h.validate()
    return h


# -- expectation values -----------------------------------------------------


@lru_cache(maxsize=4096)
def _pauli_index_maps(label: str, basis: SectorBasis):
    op = PauliString(label)
    labels = basis.strings
    targets = labels ^ op.x_mask
    signs = (1 - 2 * (popcount(labels & op.z_mask) & 1)).astype(float)
    if basis.is_full:
        src = np.arange(basis.dim)
        pos = targets
    else:
        pos = basis.rank_array(targets)
        src = np.nonzero(pos >= 0)[0]
        pos = pos[src]
        signs = signs[src]
    phase = 1j ** (op.n_y % 4)
    return src, pos, signs, phase


def _pauli_expectation(op: PauliString, amps: np.ndarray, basis: SectorBasis) -> np.ndarray:
    if op.n != basis.n or basis.d != 2:
        raise BasisMismatchError(f"{op.label} does not act on this basis")
    src, pos, signs, phase = _pauli_index_maps(op.label, basis)
    if src.size == 0:
        return np.zeros(amps.shape[:-1])
    if op.x_mask == 0:
        val = (np.abs(amps[..., src]) ** 2) @ signs
        return op.coeff * val
    val = np.einsum("...k,...k,k->...", amps[..., pos].conj(), amps[..., src], signs)
    return op.coeff * (phase * val).real


def _spin_expectation(op: SpinJComponent, amps: np.ndarray) -> np.ndarray:
    J = op.J
    m = J - np.arange(op.dim)
    if op.axis == "z":
        return op.scale * ((np.abs(amps) ** 2) @ m)
    # J_+ |m> = sqrt(J(J+1) - m(m+1)) |m+1>; index k-1 holds m+1
    c = np.sqrt(J * (J + 1) - m[1:] * (m[1:] + 1))
    jplus = np.einsum("...k,...k,k->...", amps[..., :-1].conj(), amps[..., 1:], c)
    return op.scale * (jplus.real if op.axis == "x" else jplus.imag)


def _local_expectation(op: LocalOperator, amps: np.ndarray) -> np.ndarray:
    dims = op.dims
    left = int(np.prod(dims[: op.site]))
    right = int(np.prod(dims[op.site + 1 :]))
    t = amps.reshape(*amps.shape[:-1], left, dims[op.site], right)
    return np.einsum("...xaz,ab,...xbz->...", t.conj(), op.matrix, t).real


def expectation(op: Operator, amps: np.ndarray, basis: SectorBasis | None = None) -> np.ndarray:
    """<psi|op|psi> for amplitude array(s) of shape (..., dim)."""
    amps = np.asarray(amps)
    if isinstance(op, PauliString):
        basis = basis or SectorBasis.full(op.n)
        return _pauli_expectation(op, amps, basis)
    if amps.shape[-1] != op.dim:
        raise BasisMismatchError(f"operator dim {op.dim} vs state dim {amps.shape[-1]}")
    if isinstance(op, DiagonalReal):
        return (np.abs(amps) ** 2) @ op.diag
    if isinstance(op, SpinJComponent):
        return _spin_expectation(op, amps)
    if isinstance(op, LocalOperator):
        return _local_expectation(op, amps)
    raise TypeError(f"unsupported operator {op!r}")


def vanishes_on(op: Operator, basis: SectorBasis) -> bool:
    """True if op has identically zero expectation on every state of ``basis``.

    Structural: a Pauli string flipping an odd number of sites changes the
    magnetization parity and so maps any sector out of itself.
    """
    if basis.is_full or not isinstance(op, PauliString):
        return False
    return popcount(op.x_mask) % 2 == 1


def expectations(h: ObservableSet, amps: np.ndarray, basis: SectorBasis) -> np.ndarray:
    """(..., dim_h) array of <b_i>."""
    amps = np.asarray(amps)
    real_input = not np.iscomplexobj(amps)
    out = np.zeros((*amps.shape[:-1], len(h.ops)))
    for i, op in enumerate(h.ops):
        if vanishes_on(op, basis) or (real_input and not op.is_real):
            continue
        out[..., i] = expectation(op, amps, basis)
    return out


def _check_dims(state_basis: SectorBasis, h: ObservableSet) -> None:
    op = h.ops[0]
    if isinstance(op, PauliString):
        if op.n != state_basis.n or state_basis.d != 2:
            raise BasisMismatchError(f"set {h.label} acts on {op.n} qubits, state has n={state_basis.n}, d={state_basis.d}")
    elif op.dim != state_basis.dim:
        raise BasisMismatchError(f"set {h.label} has dimension {op.dim}, state has {state_basis.dim}")


def purity(psi: PureState, h: ObservableSet) -> float:
    """kappa_h * sum_i <b_i>^2."""
    _check_dims(psi.basis, h)
    return float(h.kappa * np.sum(expectations(h, psi.amps, psi.basis) ** 2))


def purity_batch(amps: np.ndarray, h: ObservableSet, basis: SectorBasis) -> np.ndarray:
    _check_dims(basis, h)
    return h.kappa * np.sum(expectations(h, amps, basis) ** 2, axis=-1)


def to_dense(op: Operator, basis: SectorBasis | None = None) -> np.ndarray:
    """Explicit matrix; for a sector basis, the block Pi b Pi on that sector."""
    if isinstance(op, PauliString):
        m = np.ones((1, 1), dtype=complex)
        for c in op.label:
            m = np.kron(m, PAULI[c])
        m = op.coeff * m
    elif isinstance(op, DiagonalReal):
        m = np.diag(op.diag).astype(complex)
    elif isinstance(op, SpinJComponent):
        J = op.J
        mvals = J - np.arange(op.dim)
        jp = np.diag(np.sqrt(J * (J + 1) - mvals[1:] * (mvals[1:] + 1)), 1).astype(complex)
        if op.axis == "z":
            m = np.diag(mvals).astype(complex)
        elif op.axis == "x":
            m = (jp + jp.T) / 2
        else:
            m = (jp - jp.T) / 2j
        m = op.scale * m
    elif isinstance(op, LocalOperator):
        m = np.ones((1, 1), dtype=complex)
        for i, d in enumerate(op.dims):
            m = np.kron(m, op.matrix if i == op.site else np.eye(d))
    else:
        raise TypeError(f"unsupported operator {op!r}")
    if basis is not None and not basis.is_full:
        idx = basis.strings
        m = m[np.ix_(idx, idx)]
    return m


# -- purity functionals -----------------------------------------------------


def pauli_spectrum(amps: np.ndarray, n: int) -> np.ndarray:
    """All Pauli-string expectations of full-basis qubit states.

    Returns (..., N, N) real array E[x_mask, z_mask] = <P> where P flips
    the sites in x_mask and carries Z-type signs on z_mask (sites in both
    are Y). Uses one Walsh-Hadamard transform per x_mask.
    """
    amps = np.asarray(amps, dtype=complex)
    N = 2**n
    k = np.arange(N)
    # c[x, k] = conj(a[k ^ x]) a[k]
    c = np.conj(amps[..., k[None, :] ^ k[:, None]]) * amps[..., None, :]
    w = walsh_hadamard(c.real) + 1j * walsh_hadamard(c.imag)
    ny = popcount(k[:, None] & k[None, :])
    return np.real(w * (1j) ** ny)


def purity_all(psi: PureState) -> float:
    """kappa sum_P <P>^2 over all N^2 - 1 traceless basis operators.

    For qubit registers this sums the explicit Pauli spectrum; otherwise
    it uses N/(N-1) (tr rho^2 - 1/N). Equals 1 for every pure state.
    """
    N = psi.dim
    if psi.basis.is_full and psi.d == 2:
        e = pauli_spectrum(psi.amps, psi.n)
        return float((np.sum(e**2) - e[0, 0] ** 2) / (N - 1))
    tr_rho2 = float(np.sum(psi.probs)) ** 2
    return N / (N - 1) * (tr_rho2 - 1.0 / N)


def bipartite_ge(psi: PureState, d_A: int, d_B: int) -> float:
    """1 - P_{h_A} = d_A/(d_A-1) * (1 - tr rho_A^2)."""
    if d_A * d_B != psi.dim or not psi.basis.is_full:
        raise BasisMismatchError(f"state dimension {psi.dim} is not {d_A} x {d_B}")
    m = psi.amps.reshape(d_A, d_B)
    rho_a = m @ m.conj().T
    e_a = 1.0 - float(np.sum(np.abs(rho_a) ** 2))
    return d_A / (d_A - 1) * e_a


def ipr(psi_or_probs) -> float:
    p = psi_or_probs.probs if isinstance(psi_or_probs, PureState) else np.asarray(psi_or_probs)
    return np.sum(p**2, axis=-1)


def npc(psi_or_probs):
    """Number of principal components (sum |a_k|^4)^-1."""
    return 1.0 / ipr(psi_or_probs)


def purity_diagonal(psi: PureState) -> float:
    N = psi.dim
    return N / (N - 1) * float(ipr(psi)) - 1.0 / (N - 1)


def single_site_expectations(amps: np.ndarray, basis: SectorBasis) -> np.ndarray:
    """(..., n, 3) array of (<X_i>, <Y_i>, <Z_i>) for qubits.

    Sector states have <X_i> = <Y_i> = 0 identically.
    """
    amps = np.asarray(amps)
    n = basis.n
    lead = amps.shape[:-1]
    out = np.zeros((*lead, n, 3))
    p = np.abs(amps) ** 2
    if not basis.is_full:
        bits = (basis.strings[:, None] >> (n - 1 - np.arange(n))[None, :]) & 1
        out[..., 2] = p @ (1 - 2 * bits)
        return out
    for i in range(n):
        t = amps.reshape(*lead, 2**i, 2, 2 ** (n - i - 1))
        a0, a1 = t[..., 0, :], t[..., 1, :]
        c = np.sum(a0.conj() * a1, axis=(-2, -1))
        out[..., i, 0] = 2 * c.real
        out[..., i, 1] = 2 * c.imag
        pt = p.reshape(*lead, 2**i, 2, 2 ** (n - i - 1))
        out[..., i, 2] = np.sum(pt[..., 0, :] - pt[..., 1, :], axis=(-2, -1))
    return out


def local_purity_mub(psi: PureState) -> tuple[float, float, float, float]:
    """(P_x, P_y, P_z, P_loc) with P_a = (1/n) sum_i <sigma_a^(i)>^2."""
    if psi.d != 2:
        raise UnsupportedDimensionError("local_purity_mub is for qubits")
    e = single_site_expectations(psi.amps, psi.basis)
    px, py, pz = np.mean(e**2, axis=0)
    return float(px), float(py), float(pz), float(px + py + pz)


def local_purity_batch(amps: np.ndarray, basis: SectorBasis) -> np.ndarray:
    e = single_site_expectations(amps, basis)
    return np.mean(np.sum(e**2, axis=-1), axis=-1)


def local_purity_reduced(psi: PureState) -> float:
    """d/(d-1) * mean_i (tr rho_i^2 - 1/d), via explicit partial traces."""
    full = psi.to_full()
    d, n = full.d, full.n
    rhos = site_reduced_density_matrices(full.amps, n, d)
    tr2 = np.einsum("kab,kba->k", rhos, rhos).real
    return float(d / (d - 1) * np.mean(tr2 - 1.0 / d))


# -- Hamming-distance forms of local GE -------------------------------------


def _is_prime(d: int) -> bool:
    return d >= 2 and all(d % p for p in range(2, isqrt(d) + 1))


def mub_site_unitaries(d: int) -> list[np.ndarray]:
    """d+1 single-site bases (rows are bras) that are pairwise mutually unbiased.

    d = 2 gives the z, x, y eigenbases. For odd prime d the computational
    basis is joined by the quadratic-phase bases omega^(a j^2 + b j)/sqrt(d).
    """
    if d == 2:
        return [AXIS_UNITARIES["z"], AXIS_UNITARIES["x"], AXIS_UNITARIES["y"]]
    if not _is_prime(d):
        raise UnsupportedDimensionError(f"MUB family implemented for prime d only, got d={d}")
    omega = np.exp(2j * np.pi / d)
    j = np.arange(d)
    out = [np.eye(d, dtype=complex)]
    for a in range(d):
        vecs = np.array([omega ** ((a * j * j + b * j) % d) for b in range(d)]) / np.sqrt(d)
        out.append(vecs.conj())
    return out


def ge_two_copy(psi: PureState, frame: LocalFrame) -> float:
    """2d/(n(d-1)) * <psi psi| F |psi psi> with F the two-copy Hamming distance.

    The two-copy expectation is sum_{k<k'} f_kk' |a_k|^2 |a_k'|^2 in the
    frame basis; no N^2-dimensional vector is formed.
    """
    if not psi.basis.is_full:
        raise BasisMismatchError("ge_two_copy needs a full-basis state")
    n, d = psi.n, psi.d
    amps = apply_local_unitaries(psi.amps, frame.unitaries, d)
    s = pair_sum_marginals(np.abs(amps) ** 2, n, d)
    return float(2 * d / (n * (d - 1)) * s)


def mub_sum_form(psi: PureState) -> float:
    """2d/(n(d-1)) * sum over the d+1 MUB product bases of <F_alpha>, minus d."""
    if not psi.basis.is_full:
        raise BasisMismatchError("mub_sum_form needs a full-basis state")
    n, d = psi.n, psi.d
    total = 0.0
    for u in mub_site_unitaries(d):
        amps = apply_local_unitaries(psi.amps, [u] * n, d)
        total += pair_sum_marginals(np.abs(amps) ** 2, n, d)
    return float(2 * d / (n * (d - 1)) * total - d)
