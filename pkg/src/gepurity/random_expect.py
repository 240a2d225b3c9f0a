"""Expected purities of random pure states, closed form and Monte Carlo."""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from math import comb

import numpy as np

from .basis_index import SectorBasis, popcount
from .purity_engine import (
    DiagonalReal,
    ObservableSet,
    Operator,
    PauliString,
    expectation,
    purity_batch,
    to_dense,
)
from .states import EnsembleSpec, make_rng, sample_amplitudes

DEFAULT_BATCH = 4096


class RealityError(ValueError):
    """A complex operator was passed where only real observables are allowed."""


def expected_purity_haar(h: ObservableSet, N: int | None = None) -> float:
    """kappa_h dim(h) / (N + 1) for Haar-random complex states."""
    N = N or h.N
    return h.kappa * h.dim_h / (N + 1)


def expected_purity_real(h: ObservableSet, N: int | None = None) -> float:
    """kappa_h 2 dim(h) / (N + 2) for orthogonally invariant real states."""
    N = N or h.N
    bad = [op for op in h.ops if not op.is_real]
    if bad:
        raise RealityError(f"{len(bad)} operator(s) in {h.label} are not real, e.g. {bad[0]!r}")
    return h.kappa * 2 * h.dim_h / (N + 2)


def expected_ipr_real(N: int) -> float:
    return 3.0 / (N + 2)


def expected_ipr_haar(N: int) -> float:
    return 2.0 / (N + 1)


def haar_pair_average(N: int, real: bool = False) -> float:
    """Exact E|a_k|^2 |a_j|^2 (k != j): 1/(N(N+1)) complex, 1/(N(N+2)) real."""
    return 1.0 / (N * (N + 2)) if real else 1.0 / (N * (N + 1))


def reference_pair_average(N: int) -> float:
    """Reference random-state level (N-3)/[N(N-1)(N+2)] quoted for A_f plots."""
    return (N - 3) / (N * (N - 1) * (N + 2))


# -- projection into a magnetization sector ---------------------------------


@dataclass(frozen=True)
class Projection:
    """Pi b Pi = alpha b' + beta 1 on a sector of dimension ``sector_dim``."""

    alpha: float
    beta: float
    trace: float
    trace_sq: float
    sector_dim: int


@dataclass(frozen=True, eq=False)
class ProjectedOperatorDecomposition:
    alpha: np.ndarray
    beta: np.ndarray
    sector_dim: int


def _binom(n: int, k: int) -> int:
    return comb(n, k) if 0 <= k <= n else 0


def pauli_sector_trace(op: PauliString, n_ones: int) -> float:
    """tr(Pi P Pi) on the sector with ``n_ones`` down spins.

    Only purely diagonal strings contribute: sum_k (-1)^k C(w, k) C(n-w, n_ones-k)
    with w the number of Z factors.
    """
    if op.x_mask:
        return 0.0
    n = op.n
    w = popcount(op.z_mask)
    return op.coeff * sum((-1) ** k * comb(w, k) * _binom(n - w, n_ones - k) for k in range(w + 1))


def pauli_sector_trace_sq(op: PauliString, n_ones: int) -> float:
    """tr((Pi P Pi)^2): labels whose flipped sites hold equally many 0s and 1s."""
    x = popcount(op.x_mask)
    if x % 2:
        return 0.0
    n = op.n
    return op.coeff**2 * comb(x, x // 2) * _binom(n - x, n_ones - x // 2)


def dense_sector_traces(op: Operator, sector: SectorBasis) -> tuple[float, float]:
    """(tr(Pi b Pi), tr((Pi b Pi)^2)) by explicit projection; reference only."""
    m = to_dense(op, sector)
    return float(np.trace(m).real), float(np.trace(m @ m).real)


def project_operator(op: Operator, sector: SectorBasis) -> Projection:
    """Split the sector projection of ``op`` into traceless and identity parts.

    beta = tr(Pi b Pi) / N_S and alpha^2 = (tr((Pi b Pi)^2) - N_S beta^2) / N_S,
    with b' normalized to tr(b'^2) = N_S.
    """
    N_S = sector.dim
    if sector.is_full:
        tr = 0.0
        tr2 = float(op.dim) * (op.coeff**2 if isinstance(op, PauliString) else 1.0)
    elif isinstance(op, PauliString):
        tr = float(pauli_sector_trace(op, sector.n_ones))
        tr2 = float(pauli_sector_trace_sq(op, sector.n_ones))
    elif isinstance(op, DiagonalReal):
        vals = op.diag[sector.strings]
        tr, tr2 = float(vals.sum()), float(np.sum(vals**2))
    else:
        tr, tr2 = dense_sector_traces(op, sector)
    beta = tr / N_S
    alpha_sq = max(tr2 - N_S * beta**2, 0.0) / N_S
    return Projection(float(np.sqrt(alpha_sq)), beta, tr, tr2, N_S)


def decompose(h: ObservableSet, sector: SectorBasis) -> ProjectedOperatorDecomposition:
    projs = [project_operator(op, sector) for op in h.ops]
    return ProjectedOperatorDecomposition(
        np.array([p.alpha for p in projs]), np.array([p.beta for p in projs]), sector.dim
    )


def expected_purity_sector(h: ObservableSet, sector: SectorBasis, real: bool = False) -> float:
    """kappa_h (c sum_i alpha_i^2 + sum_i beta_i^2) for random states of the sector.

    c = 1/(N_S+1) for the complex ensemble and 2/(N_S+2) for the real one.
    In the real case purely imaginary operators have zero expectation and
    are dropped.
    """
    N_S = sector.dim
    a2 = b2 = 0.0
    for op in h.ops:
        if real and not op.is_real:
            continue
        p = project_operator(op, sector)
        a2 += p.alpha**2
        b2 += p.beta**2
    c = 2.0 / (N_S + 2) if real else 1.0 / (N_S + 1)
    return h.kappa * (c * a2 + b2)


def bilocal_lambda(n: int) -> int:
    """tr(Pi Z1 Z2 Pi) on S_z = 0: sum_{k=0}^{2} (-1)^k C(2,k) C(n-2, n/2-k)."""
    if n % 2:
        raise ValueError("S_z = 0 needs even n")
    return sum((-1) ** k * comb(2, k) * _binom(n - 2, n // 2 - k) for k in range(3))


def bilocal_sz0_closed_form(n: int) -> float:
    """Expected two-site-block purity for real Haar states of S_z = 0.

    (1/3) [ 2/(N0+2) (3 - l^2/N0^2 + 4 C(n-2,(n-2)/2)/N0) + l^2/N0^2 ]
    with l = tr(Pi Z1 Z2 Pi).
    """
    N0 = comb(n, n // 2)
    lam = bilocal_lambda(n)
    beta_sq = lam**2 / N0**2
    flips = 4 * comb(n - 2, (n - 2) // 2) / N0
    return (2.0 / (N0 + 2) * (3 - beta_sq + flips) + beta_sq) / 3.0


def local_sz0_closed_form(n: int, real: bool = True) -> float:
    N0 = comb(n, n // 2)
    return 2.0 / (N0 + 2) if real else 1.0 / (N0 + 1)


def spin_j_closed_form(J: float) -> float:
    return 1.0 / (2 * J)


# -- Monte Carlo ------------------------------------------------------------


def _mc_chunk(args):
    h, spec, start_batch, sizes = args
    out = []
    for b, size in enumerate(sizes):
        rng = make_rng(spec.seed, start_batch + b)
        amps = sample_amplitudes(spec, size, rng)
        out.append(purity_batch(amps, h, spec.basis))
    return np.concatenate(out)


def _batch_sizes(samples: int, batch: int) -> list[int]:
    sizes = [batch] * (samples // batch)
    if samples % batch:
        sizes.append(samples % batch)
    return sizes


def monte_carlo_purities(h: ObservableSet, spec: EnsembleSpec, samples: int, batch: int = DEFAULT_BATCH, jobs: int = 1) -> np.ndarray:
    """Purity of each sampled state; batch b draws from stream (spec.seed, b).

    Output is identical for any ``jobs``.
    """
    if samples < 100:
        raise ValueError("need at least 100 samples")
    sizes = _batch_sizes(samples, batch)
    if jobs <= 1:
        return _mc_chunk((h, spec, 0, sizes))
    chunks = [(h, spec, i, [s]) for i, s in enumerate(sizes)]
    with ProcessPoolExecutor(max_workers=jobs) as ex:
        return np.concatenate(list(ex.map(_mc_chunk, chunks)))


def monte_carlo_expected_purity(h: ObservableSet, spec: EnsembleSpec, samples: int, batch: int = DEFAULT_BATCH, jobs: int = 1) -> tuple[float, float]:
    """(mean, standard error) of the purity over ``samples`` draws."""
    vals = monte_carlo_purities(h, spec, samples, batch, jobs)
    return float(np.mean(vals)), float(np.std(vals, ddof=1) / np.sqrt(len(vals)))


def monte_carlo_moment(op: Operator, spec: EnsembleSpec, samples: int, batch: int = DEFAULT_BATCH) -> tuple[float, float]:
    """(mean, stderr) of <psi|b|psi>^2 for a single operator."""
    vals = []
    for b, size in enumerate(_batch_sizes(samples, batch)):
        amps = sample_amplitudes(spec, size, make_rng(spec.seed, b))
        vals.append(expectation(op, amps, spec.basis) ** 2)
    v = np.concatenate(vals)
    return float(v.mean()), float(v.std(ddof=1) / np.sqrt(len(v)))


def monte_carlo_ipr(spec: EnsembleSpec, samples: int, batch: int = DEFAULT_BATCH) -> tuple[float, float]:
    vals = []
    for b, size in enumerate(_batch_sizes(samples, batch)):
        amps = sample_amplitudes(spec, size, make_rng(spec.seed, b))
        vals.append(np.sum(np.abs(amps) ** 4, axis=1))
    v = np.concatenate(vals)
    return float(v.mean()), float(v.std(ddof=1) / np.sqrt(len(v)))


def report(formula: str, value: float, mc_mean: float, mc_stderr: float) -> dict:
    sigmas = abs(mc_mean - value) / mc_stderr if mc_stderr > 0 else float("inf") * (mc_mean != value)
    return {
        "formula": formula,
        "value": value,
        "mc_mean": mc_mean,
        "mc_stderr": mc_stderr,
        "sigmas": float(sigmas),
    }
