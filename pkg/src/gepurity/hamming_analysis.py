"""Hamming-distance-resolved correlations of basis-state probabilities.

Sums of ``p_k p_j`` over label pairs at fixed distance are computed three
ways: a direct O(N^2) pair loop (the reference), single-site marginals
(O(nN), weighted sums only) and an XOR autocorrelation through the
Walsh-Hadamard transform (O(N log N), full distance profile).
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from math import comb

import numpy as np

from .basis_index import (
    SectorBasis,
    digit_array,
    hamming_matrix,
    pair_count_by_distance,
    popcount,
    sector_pair_count,
)
from .states import PureState, change_basis

DIRECT_PAIR_LIMIT = 14
Z2_TOL = 1e-9


def walsh_hadamard(x: np.ndarray) -> np.ndarray:
    """Unnormalized Walsh-Hadamard transform along the last axis (length 2^n)."""
    x = np.array(x, dtype=float, copy=True)
    lead = x.shape[:-1]
    N = x.shape[-1]
    h = 1
    while h < N:
        t = x.reshape(*lead, N // (2 * h), 2, h)
        a = t[..., 0, :].copy()
        t[..., 0, :] += t[..., 1, :]
        t[..., 1, :] = a - t[..., 1, :]
        h *= 2
    return x


def xor_autocorrelation(p: np.ndarray) -> np.ndarray:
    """C[m] = sum_k p[k] p[k ^ m] along the last axis."""
    N = p.shape[-1]
    w = walsh_hadamard(p)
    return walsh_hadamard(w * w) / N


def _full_probs(probs: np.ndarray, basis: SectorBasis) -> np.ndarray:
    if basis.is_full:
        return np.asarray(probs, dtype=float)
    probs = np.asarray(probs, dtype=float)
    out = np.zeros((*probs.shape[:-1], basis.full_dim))
    out[..., basis.strings] = probs
    return out


def ordered_distance_sums(probs: np.ndarray, basis: SectorBasis) -> np.ndarray:
    """(..., n+1) array S_f = sum over ordered pairs (k, j) at distance f of p_k p_j.

    Qubits only; uses the XOR autocorrelation of the embedded probabilities.
    """
    if basis.d != 2:
        raise ValueError("ordered_distance_sums is implemented for qubits; use distance_sums_direct")
    n = basis.n
    c = xor_autocorrelation(_full_probs(probs, basis))
    weights = popcount(np.arange(basis.full_dim))
    onehot = (weights[:, None] == np.arange(n + 1)[None, :]).astype(float)
    return c @ onehot


def distance_sums_direct(probs: np.ndarray, basis: SectorBasis) -> np.ndarray:
    """Unordered-pair sums per distance from the explicit pair loop (k < j)."""
    if basis.n > DIRECT_PAIR_LIMIT:
        raise ValueError(f"direct pair loop limited to n <= {DIRECT_PAIR_LIMIT}")
    probs = np.asarray(probs, dtype=float)
    D = hamming_matrix(basis.strings, basis.n, basis.d)
    iu = np.triu_indices(basis.dim, k=1)
    dist = D[iu]
    prods = probs[..., iu[0]] * probs[..., iu[1]]
    out = np.zeros((*probs.shape[:-1], basis.n + 1))
    for f in range(1, basis.n + 1):
        sel = dist == f
        if sel.any():
            out[..., f] = prods[..., sel].sum(axis=-1)
    return out


def pair_sum_direct(probs: np.ndarray, basis: SectorBasis) -> np.ndarray:
    """sum_{k<j} f_kj p_k p_j via the full distance matrix."""
    if basis.n > DIRECT_PAIR_LIMIT:
        raise ValueError(f"direct pair loop limited to n <= {DIRECT_PAIR_LIMIT}")
    D = hamming_matrix(basis.strings, basis.n, basis.d).astype(float)
    probs = np.asarray(probs, dtype=float)
    return 0.5 * np.einsum("...k,kj,...j->...", probs, D, probs)


def pair_sum_marginals(probs: np.ndarray, n: int, d: int = 2) -> np.ndarray:
    """sum_{k<j} f_kj p_k p_j = (1/2) sum_i (1 - sum_v q_i(v)^2), full basis.

    q_i is the marginal distribution of site i; cost O(n N).
    """
    probs = np.asarray(probs, dtype=float)
    lead = probs.shape[:-1]
    total = np.zeros(lead)
    for i in range(n):
        q = probs.reshape(*lead, d**i, d, d ** (n - i - 1)).sum(axis=(-3, -1))
        total += 1.0 - np.sum(q**2, axis=-1)
    return 0.5 * total


def hamming_weighted_purity(psi: PureState, basis_label: str = "z", method: str = "direct") -> float:
    """1 - (4/n) sum_{k<j} f_kj |a_k|^2 |a_j|^2 in the x, y or z product basis.

    ``method`` is "direct" (O(N^2) pair sum) or "marginal" (O(nN)).
    """
    if psi.d != 2:
        raise ValueError("hamming_weighted_purity is for qubits; see qudit_hamming_purity")
    phi = change_basis(psi, basis_label)
    p = phi.probs
    if method == "direct":
        s = pair_sum_direct(p, phi.basis)
    elif method == "marginal":
        if not phi.basis.is_full:
            s = pair_sum_direct(p, phi.basis)
        else:
            s = pair_sum_marginals(p, phi.n, 2)
    else:
        raise ValueError(f"unknown method {method!r}")
    return float(1.0 - 4.0 / psi.n * s)


def qudit_hamming_purity(psi: PureState, d: int | None = None, method: str = "direct") -> float:
    """1 - 2d/(n(d-1)) sum_{k<k'} f_kk' |a_k|^2 |a_k'|^2 with generalized distance.

    Equals the local purity when every site marginal is diagonal in the
    state's basis (for instance after a canonical frame change).
    """
    d = d or psi.d
    if d != psi.d:
        raise ValueError(f"state has local dimension {psi.d}, not {d}")
    p = psi.probs
    if method == "direct":
        s = pair_sum_direct(p, psi.basis)
    else:
        s = pair_sum_marginals(p, psi.n, d)
    return float(1.0 - 2 * d / (psi.n * (d - 1)) * s)


@dataclass(frozen=True, eq=False)
class HammingProfile:
    """Per-distance pair averages A_f and their ratios w_f to the overall average.

    Index f runs over 0..n; the f = 0 entries are unused and set to zero,
    as are distances with no pairs (odd f inside a magnetization sector).
    """

    basis_label: str
    n: int
    n_f: np.ndarray
    A_f: np.ndarray
    A_bar: float
    w_f: np.ndarray
    ipr: float
    degenerate: bool

    @property
    def distances(self) -> np.ndarray:
        return np.arange(self.n + 1)

    def csv_rows(self) -> list[tuple]:
        return [
            (int(f), int(self.n_f[f]), float(self.A_f[f]), float(self.w_f[f]))
            for f in range(1, self.n + 1)
            if self.n_f[f] > 0
        ]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["f", "n_f", "A_f", "w_f"])
        for f, nf, a, wf in self.csv_rows():
            w.writerow([f, nf, f"{a:.12g}", f"{wf:.12g}"])
        return buf.getvalue()


def pair_counts(basis: SectorBasis) -> np.ndarray:
    """Unordered pair counts n_f (f = 1..n) for a full qubit basis or a sector."""
    n = basis.n
    counts = np.zeros(n + 1, dtype=np.int64)
    for f in range(1, n + 1):
        if basis.is_full:
            if basis.d != 2:
                counts[f] = basis.full_dim * comb(n, f) * (basis.d - 1) ** f // 2
            else:
                counts[f] = pair_count_by_distance(n, f)
        else:
            counts[f] = sector_pair_count(n, basis.n_ones, f)
    return counts


def profile_from_probs(probs: np.ndarray, basis: SectorBasis, method: str = "xor") -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Batched (A_f, A_bar, w_f) from probability vectors; A_f has shape (..., n+1)."""
    probs = np.asarray(probs, dtype=float)
    n_f = pair_counts(basis)
    if method == "xor":
        s = ordered_distance_sums(probs, basis) / 2.0
        s[..., 0] = 0.0
    elif method == "pairs":
        s = distance_sums_direct(probs, basis)
    else:
        raise ValueError(f"unknown method {method!r}")
    safe = np.where(n_f > 0, n_f, 1)
    A_f = np.where(n_f > 0, s / safe, 0.0)
    N = basis.dim
    ipr = np.sum(probs**2, axis=-1)
    A_bar = (1.0 - ipr) / (N * (N - 1))
    with np.errstate(divide="ignore", invalid="ignore"):
        w_f = np.where(np.asarray(A_bar)[..., None] > 1e-300, A_f / np.asarray(A_bar)[..., None], 0.0)
    return A_f, A_bar, w_f


def profile(psi: PureState, basis_label: str = "z", method: str = "xor") -> HammingProfile:
    """Distance-resolved pair averages of |a_k|^2 |a_j|^2 in the given basis.

    ``method="pairs"`` buckets every unordered pair explicitly; "xor" uses
    the Walsh-Hadamard autocorrelation. Both agree to rounding.
    """
    if psi.d != 2:
        raise ValueError("profile is implemented for qubits")
    phi = change_basis(psi, basis_label)
    A_f, A_bar, w_f = profile_from_probs(phi.probs, phi.basis, method)
    n_f = pair_counts(phi.basis)
    ipr = float(np.sum(phi.probs**2))
    degenerate = bool(A_bar <= 1e-300)
    return HammingProfile(basis_label, psi.n, n_f, A_f, float(A_bar), w_f, ipr, degenerate)


# -- predictors and exact specializations -----------------------------------


def uncorrelated_prediction(npc_x: float, npc_y: float, npc_z: float, N: int) -> float:
    """Local purity implied by Hamming-uncorrelated products in all three bases."""
    return N / (N - 1) * (1 / npc_x + 1 / npc_y + 1 / npc_z) - 3.0 / (N - 1)


def sector_prediction_sz0(npc_z, N0: int):
    """Local purity implied by Hamming-uncorrelated products within S_z = 0."""
    return N0 / (N0 - 1) / np.asarray(npc_z, dtype=float) - 1.0 / (N0 - 1)


def single_excitation_relation(npc_z, n: int):
    """Exact local purity of a single-excitation state (all pair distances are 2)."""
    return 4.0 / n / np.asarray(npc_z, dtype=float) + (n - 4) / n


def z2_symmetry_check(psi: PureState, tol: float = Z2_TOL) -> bool:
    """True iff psi is an eigenvector of the collective sigma_z product.

    For eigenvectors, also verifies that every <sigma_x^(i)>, <sigma_y^(i)>
    vanishes, raising ``AssertionError`` otherwise.
    """
    if psi.d != 2:
        raise ValueError("z2_symmetry_check is for qubits")
    signs = 1 - 2 * (popcount(psi.basis.strings) & 1)
    parity = float(np.sum(psi.probs * signs))
    ok = abs(abs(parity) - 1.0) < tol
    if ok:
        from .purity_engine import single_site_expectations

        e = single_site_expectations(psi.amps, psi.basis)
        worst = float(np.max(np.abs(e[:, :2])))
        if worst > tol:
            raise AssertionError(f"parity eigenstate with transverse expectation {worst:g}")
    return ok


def generalized_distance_matrix(n: int, d: int) -> np.ndarray:
    labels = np.arange(d**n)
    digs = digit_array(labels, n, d)
    return (digs[:, None, :] != digs[None, :, :]).sum(axis=-1)
