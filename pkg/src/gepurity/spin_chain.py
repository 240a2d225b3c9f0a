"""Disordered Heisenberg chain in a magnetization sector.

H = sum_i (eps_i / 2) Z_i + (J / 4) sum_i sigma_i . sigma_{i+1}, open boundary,
eps_i = eps + U[-w/2, w/2]. Each realization is diagonalized in full and
every eigenvector is characterized by NPC_z, local purity and its Hamming
profile A_f.
"""

from __future__ import annotations

import hashlib
import json
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from math import comb

import numpy as np
import scipy.linalg
import scipy.optimize
import scipy.sparse as sp
from threadpoolctl import threadpool_limits

from .basis_index import SectorBasis, enumerate_sector, popcount
from .hamming_analysis import profile_from_probs, sector_prediction_sz0
from .states import make_rng

log = logging.getLogger(__name__)

POISSON_R = 2 * np.log(2) - 1
GOE_R = 0.5307
UNFOLD_DEGREE = 7
DEGENERATE_GAP = 1e-12
MAX_RESAMPLE = 5
INSET_BINS = 60
INSET_RANGE = (-4.0, 4.0)
SPACING_BINS = 40
SPACING_MAX = 4.0


class DegenerateSpectrumError(RuntimeError):
    pass


class DiagonalizationError(RuntimeError):
    pass


@dataclass(frozen=True)
class ChainSpec:
    n: int
    J: float
    eps: float = 1.0
    disorder_width: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.n < 2:
            raise ValueError("chain needs n >= 2")
        if self.J < 0 or self.disorder_width < 0:
            raise ValueError("J and disorder_width must be nonnegative")


def site_fields(spec: ChainSpec, *stream: int) -> np.ndarray:
    """eps_i = eps + delta_i with delta_i uniform in [-w/2, w/2]."""
    rng = make_rng(spec.seed, *stream)
    w = spec.disorder_width
    return spec.eps + rng.uniform(-w / 2, w / 2, size=spec.n)


def _spins(sector: SectorBasis) -> np.ndarray:
    """(dim, n) array of sigma_z eigenvalues, digit 1 -> -1."""
    n = sector.n
    bits = (sector.strings[:, None] >> (n - 1 - np.arange(n))[None, :]) & 1
    return 1 - 2 * bits


def build_hamiltonian(spec: ChainSpec, sector: SectorBasis, eps_i: np.ndarray | None = None) -> sp.csr_matrix:
    """Sparse real-symmetric H restricted to ``sector``."""
    if sector.n != spec.n or sector.d != 2:
        raise ValueError("sector does not match the chain")
    n = spec.n
    if eps_i is None:
        eps_i = site_fields(spec)
    eps_i = np.asarray(eps_i, dtype=float)
    z = _spins(sector)
    diag = z @ (eps_i / 2) + spec.J / 4 * np.sum(z[:, :-1] * z[:, 1:], axis=1)
    rows, cols, vals = [np.arange(sector.dim)], [np.arange(sector.dim)], [diag]
    strings = sector.strings
    for i in range(n - 1):
        pair = (1 << (n - 1 - i)) | (1 << (n - 2 - i))
        differ = popcount(strings & pair) == 1
        src = np.nonzero(differ)[0]
        dst = sector.rank_array(strings[src] ^ pair)
        rows.append(src)
        cols.append(dst)
        vals.append(np.full(src.size, spec.J / 2))
    H = sp.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(sector.dim, sector.dim),
    ).tocsr()
    H.sum_duplicates()
    return H


def hamiltonian_trace(spec: ChainSpec, sector: SectorBasis, eps_i: np.ndarray) -> float:
    """tr H from counting: sum_i (eps_i/2) tr Z_i + (J/4) sum_i tr Z_i Z_{i+1}."""
    n, k = sector.n, sector.n_ones
    if sector.is_full:
        return 0.0
    tr_z = comb(n - 1, k) - comb(n - 1, k - 1) if k >= 1 else comb(n - 1, k)
    tr_zz = sum((-1) ** j * comb(2, j) * comb(n - 2, k - j) for j in range(3) if 0 <= k - j)
    return float(np.sum(eps_i) / 2 * tr_z + spec.J / 4 * (n - 1) * tr_zz)


@dataclass(frozen=True, eq=False)
class SpectralResult:
    sector: SectorBasis
    energies: np.ndarray
    vectors: np.ndarray
    realization_id: int = 0


def diagonalize(H, sector: SectorBasis | None = None, realization_id: int = 0, check: bool = True) -> SpectralResult:
    """Full dense eigendecomposition, eigenvalues ascending."""
    dense = H.toarray() if sp.issparse(H) else np.asarray(H, dtype=float)
    try:
        w, v = scipy.linalg.eigh(dense)
    except np.linalg.LinAlgError as exc:
        np.save("failed_hamiltonian.npy", dense)
        raise DiagonalizationError(f"eigh failed ({exc}); matrix saved to failed_hamiltonian.npy") from exc
    if check:
        scale = max(np.linalg.norm(dense, 2), 1e-300)
        resid = np.linalg.norm(dense @ v - v * w, axis=0)
        if np.max(resid) > 1e-8 * scale:
            raise DiagonalizationError(f"eigen-residual {np.max(resid):.3g} exceeds 1e-8 * |H|")
        ortho = np.max(np.abs(v.T @ v - np.eye(len(w))))
        if ortho > 1e-9:
            raise DiagonalizationError(f"eigenvectors deviate from orthonormal by {ortho:.3g}")
    if sector is None:
        sector = SectorBasis.full(int(np.log2(len(w))))
    return SpectralResult(sector, w, v, realization_id)


# -- level statistics -------------------------------------------------------


@dataclass(frozen=True, eq=False)
class LevelStatistics:
    mean_r: float
    r_values: np.ndarray
    spacings: np.ndarray
    hist_edges: np.ndarray
    hist_density: np.ndarray
    n_levels: int
    n_degenerate: int
    metadata: dict = field(default_factory=dict)


def central_band(energies: np.ndarray, edge_fraction: float = 0.1) -> np.ndarray:
    e = np.sort(np.asarray(energies, dtype=float))
    cut = int(np.floor(edge_fraction * len(e)))
    return e[cut : len(e) - cut] if cut else e


def gap_ratios(energies: np.ndarray, min_gap: float = DEGENERATE_GAP) -> tuple[np.ndarray, int]:
    """min(s_k, s_k+1) / max(s_k, s_k+1); spacings below ``min_gap`` are dropped."""
    s = np.diff(np.sort(energies))
    degenerate = s < min_gap
    s = s[~degenerate]
    r = np.minimum(s[:-1], s[1:]) / np.maximum(s[:-1], s[1:])
    return r, int(degenerate.sum())


def unfold(energies: np.ndarray, degree: int = UNFOLD_DEGREE) -> np.ndarray:
    """Map levels through a polynomial fit of the staircase N(E)."""
    e = np.sort(energies)
    x = (e - e.mean()) / (e.std() or 1.0)
    coef = np.polynomial.polynomial.polyfit(x, np.arange(len(e)), degree)
    return np.polynomial.polynomial.polyval(x, coef)


def level_statistics(energies: np.ndarray, edge_fraction: float = 0.1, bins: int = 40, s_max: float = 4.0) -> LevelStatistics:
    """Gap-ratio statistics and unfolded spacing histogram of the central band."""
    e = central_band(energies, edge_fraction)
    if len(e) < 50:
        raise ValueError(f"need at least 50 levels in the central band, got {len(e)}")
    r, n_deg = gap_ratios(e)
    s = np.diff(unfold(e))
    s = s / s.mean()
    density, edges = np.histogram(s, bins=bins, range=(0.0, s_max), density=True)
    meta = {"edge_fraction": edge_fraction, "unfold_degree": UNFOLD_DEGREE, "statistic": "gap_ratio"}
    return LevelStatistics(float(r.mean()), r, s, edges, density, len(e), n_deg, meta)


# -- eigenvector analysis ---------------------------------------------------


@dataclass(frozen=True)
class EigvecRecord:
    energy: float
    npc_z: float
    p_loc: float
    A_f: dict
    realization_id: int


@dataclass(frozen=True, eq=False)
class EigvecTable:
    """Column-oriented per-eigenvector data for one realization."""

    energies: np.ndarray
    npc_z: np.ndarray
    p_loc: np.ndarray
    A_f: np.ndarray  # (n_vectors, n+1); only even f are populated in a sector
    realization_id: int

    def records(self) -> list[EigvecRecord]:
        n = self.A_f.shape[1] - 1
        return [
            EigvecRecord(
                float(self.energies[k]),
                float(self.npc_z[k]),
                float(self.p_loc[k]),
                {f: float(self.A_f[k, f]) for f in range(2, n + 1, 2)},
                self.realization_id,
            )
            for k in range(len(self.energies))
        ]


def eigenvector_table(result: SpectralResult) -> EigvecTable:
    probs = result.vectors.T**2
    npc = 1.0 / np.sum(probs**2, axis=1)
    z = _spins(result.sector).astype(float)
    p_loc = np.mean((probs @ z) ** 2, axis=1)
    A_f, _, _ = profile_from_probs(probs, result.sector, "xor")
    return EigvecTable(result.energies, npc, p_loc, A_f, result.realization_id)


def analyze_eigenvectors(result: SpectralResult) -> list[EigvecRecord]:
    """NPC_z, local purity (= P_z here) and A_f for f = 2, 4, ..., n per eigenvector."""
    if result.sector.is_full:
        raise ValueError("analyze_eigenvectors expects a magnetization sector")
    return eigenvector_table(result).records()


# -- hyperbolic fit ---------------------------------------------------------


@dataclass(frozen=True)
class HyperbolaFit:
    a: float
    b: float
    c: float
    residual_norm: float
    warning: str | None = None

    def __call__(self, x):
        return self.a / (np.asarray(x, dtype=float) + self.b) + self.c


def _linear_for_b(x, y, w, b):
    basis = np.column_stack([1.0 / (x + b), np.ones_like(x)])
    sw = np.sqrt(w)
    coef, *_ = np.linalg.lstsq(basis * sw[:, None], y * sw, rcond=None)
    resid = np.sqrt(np.sum(w * (basis @ coef - y) ** 2))
    return coef, resid


def fit_hyperbola(x, y, weights=None, b_range: tuple[float, float] | None = None, grid: int = 400) -> HyperbolaFit:
    """Least-squares fit y = a/(x + b) + c.

    For each b on a grid the problem is linear in (a, c); the best grid
    point is refined with a bounded scalar minimization.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    w = np.ones_like(x) if weights is None else np.asarray(weights, dtype=float)
    if len(x) < 10:
        raise ValueError("fit needs at least 10 points")
    span = float(x.max() - x.min()) or 1.0
    if b_range is None:
        b_range = (-x.min() + 1e-4 * span, 20 * span + 10)
    # log-spaced in the distance to the pole at b = -min(x)
    t = np.geomspace(b_range[0] + x.min(), b_range[1] + x.min(), grid)
    bs = t - x.min()
    res = np.array([_linear_for_b(x, y, w, b)[1] for b in bs])
    k = int(np.argmin(res))
    warning = None
    if k in (0, grid - 1):
        warning = f"best b={bs[k]:.4g} on the edge of the scan [{b_range[0]:.4g}, {b_range[1]:.4g}]"
        log.warning("hyperbola fit: %s", warning)
        b_best = bs[k]
    else:
        opt = scipy.optimize.minimize_scalar(
            lambda b: _linear_for_b(x, y, w, b)[1], bounds=(bs[k - 1], bs[k + 1]), method="bounded",
            options={"xatol": 1e-10},
        )
        b_best = float(opt.x)
    (a, c), resid = _linear_for_b(x, y, w, b_best)
    return HyperbolaFit(float(a), float(b_best), float(c), float(resid), warning)


# -- ensemble driver --------------------------------------------------------


@dataclass(frozen=True)
class ChainConfig:
    n: int = 12
    ratios: tuple = (0.2, 0.59, 1.0)
    realizations: int = 100
    master_seed: int = 2007
    eps: float = 1.0
    disorder_width: float = 1.0
    npc_bin_width: float = 5.0
    edge_fraction: float = 0.1
    inset_ratio: float = 1.0
    inset_window: tuple = (300.0, 316.0)
    fit_ratio: float = 0.59

    @classmethod
    def from_dict(cls, d: dict) -> "ChainConfig":
        known = {k: v for k, v in d.items() if k in cls.__dataclass_fields__}
        unknown = set(d) - set(known) - {"bins", "jobs", "out_dir"}
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        if "bins" in d and "npc_bin_width" not in d:
            known["npc_bin_width"] = float(d["bins"])
        for key in ("ratios", "inset_window"):
            if key in known:
                known[key] = tuple(float(r) for r in known[key])
        cfg = cls(**known)
        if cfg.n % 2 or cfg.n < 4:
            raise ValueError("the S_z = 0 experiment needs even n >= 4")
        if cfg.realizations < 1:
            raise ValueError("realizations must be >= 1")
        return cfg

    def to_dict(self) -> dict:
        d = asdict(self)
        d["ratios"] = list(self.ratios)
        d["inset_window"] = list(self.inset_window)
        return d

    def digest(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:12]


@dataclass(eq=False)
class RealizationResult:
    ratio_index: int
    realization_id: int
    table: EigvecTable | None
    r_values: np.ndarray | None
    spacings: np.ndarray | None
    n_degenerate: int = 0
    inset_moments: tuple = (0, 0.0, 0.0, 0.0)  # count, sum a^2, sum a^4, sum a
    inset_hist: np.ndarray | None = None
    resamples: int = 0
    error: str | None = None


def _run_realization(args) -> RealizationResult:
    cfg, a, r = args
    ratio = cfg.ratios[a]
    sector = enumerate_sector(cfg.n, 0)
    spec = ChainSpec(cfg.n, ratio * cfg.disorder_width, cfg.eps, cfg.disorder_width, cfg.master_seed)
    try:
        with threadpool_limits(limits=1):
            for attempt in range(MAX_RESAMPLE):
                eps_i = site_fields(spec, r, attempt)
                H = build_hamiltonian(spec, sector, eps_i)
                tr = hamiltonian_trace(spec, sector, eps_i)
                if abs(H.diagonal().sum() - tr) > 1e-9 * max(1.0, abs(tr)):
                    raise DiagonalizationError("Hamiltonian trace disagrees with the counting formula")
                res = diagonalize(H, sector, r)
                if np.min(np.diff(res.energies)) >= DEGENERATE_GAP:
                    break
                log.info("ratio %s realization %d: degenerate spectrum, resampling", ratio, r)
            else:
                raise DegenerateSpectrumError(f"degenerate after {MAX_RESAMPLE} draws")
            table = eigenvector_table(res)
            e = central_band(res.energies, cfg.edge_fraction)
            rv, n_deg = gap_ratios(e)
            s = np.diff(unfold(e))
            s = s / s.mean()
            moments, hist = (0, 0.0, 0.0, 0.0), None
            if abs(ratio - cfg.inset_ratio) < 1e-12:
                lo, hi = cfg.inset_window
                sel = (table.npc_z > lo) & (table.npc_z < hi)
                comps = res.vectors[:, sel].ravel()
                moments = (comps.size, float(np.sum(comps**2)), float(np.sum(comps**4)), float(np.sum(comps)))
                hist = np.histogram(comps * np.sqrt(sector.dim), bins=INSET_BINS, range=INSET_RANGE)[0]
        return RealizationResult(a, r, table, rv, s, n_deg, moments, hist, attempt)
    except Exception as exc:  # logged and excluded by the aggregator
        log.error("ratio %s realization %d failed: %s", ratio, r, exc)
        return RealizationResult(a, r, None, None, None, error=f"{type(exc).__name__}: {exc}")


def run_realizations(cfg: ChainConfig, jobs: int = 1) -> list[RealizationResult]:
    tasks = [(cfg, a, r) for a in range(len(cfg.ratios)) for r in range(cfg.realizations)]
    if jobs <= 1:
        results = [_run_realization(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            results = list(ex.map(_run_realization, tasks, chunksize=max(1, len(tasks) // (4 * jobs))))
    results.sort(key=lambda x: (x.ratio_index, x.realization_id))
    return results


def binned_means(x: np.ndarray, y: np.ndarray, width: float = 1.0) -> dict:
    """Means of y over bins [k w, (k+1) w) of x (rows: lo, count, mean, sem)."""
    idx = np.floor(x / width).astype(np.int64)
    keys = np.unique(idx)
    lo, count, mean, sem = [], [], [], []
    for k in keys:
        sel = idx == k
        vals = y[sel]
        lo.append(k * width)
        count.append(int(sel.sum()))
        mean.append(vals.mean(axis=0))
        sem.append(vals.std(axis=0, ddof=1) / np.sqrt(len(vals)) if len(vals) > 1 else np.zeros_like(vals[0]))
    return {"lo": np.array(lo), "count": np.array(count), "mean": np.array(mean), "sem": np.array(sem)}


@dataclass(eq=False)
class EnsembleDataset:
    config: ChainConfig
    results: list
    wall_time: float = 0.0

    def tables(self, ratio_index: int, trim: float = 0.0) -> list[EigvecTable]:
        out = []
        for res in self.results:
            if res.ratio_index != ratio_index or res.table is None:
                continue
            t = res.table
            if trim:
                cut = int(np.floor(trim * len(t.energies)))
                sl = slice(cut, len(t.energies) - cut)
                t = EigvecTable(t.energies[sl], t.npc_z[sl], t.p_loc[sl], t.A_f[sl], t.realization_id)
            out.append(t)
        return out

    def stacked(self, ratio_index: int, trim: float = 0.0):
        ts = self.tables(ratio_index, trim)
        return (
            np.concatenate([t.npc_z for t in ts]),
            np.concatenate([t.p_loc for t in ts]),
            np.concatenate([t.A_f for t in ts]),
        )

    def failures(self) -> list[tuple[int, int, str]]:
        return [(r.ratio_index, r.realization_id, r.error) for r in self.results if r.error]

    def gap_ratio_summary(self, ratio_index: int) -> tuple[float, float, int]:
        rv = np.concatenate([r.r_values for r in self.results if r.ratio_index == ratio_index and r.r_values is not None])
        per_real = [r.r_values.mean() for r in self.results if r.ratio_index == ratio_index and r.r_values is not None]
        sem = float(np.std(per_real, ddof=1) / np.sqrt(len(per_real))) if len(per_real) > 1 else float("nan")
        return float(rv.mean()), sem, int(rv.size)

    def ploc_binned(self, ratio_index: int, trim: float = 0.0) -> dict:
        npc, ploc, _ = self.stacked(ratio_index, trim)
        return binned_means(npc, ploc, 1.0)

    def af_binned(self, ratio_index: int, trim: float = 0.0) -> dict:
        npc, _, A = self.stacked(ratio_index, trim)
        return binned_means(npc, A, 1.0)

    def fit(self, ratio_index: int, trim: float = 0.0, weighted: bool = True) -> HyperbolaFit:
        b = self.ploc_binned(ratio_index, trim)
        x = b["lo"] + 0.5
        return fit_hyperbola(x, b["mean"], b["count"] if weighted else None)

    def inset_moments(self) -> dict:
        count = s2 = s4 = s1 = 0.0
        for r in self.results:
            c, a2, a4, a1 = r.inset_moments
            count += c
            s2 += a2
            s4 += a4
            s1 += a1
        if count == 0:
            return {"count": 0}
        mean = s1 / count
        var = s2 / count - mean**2
        kurt = (s4 / count) / (s2 / count) ** 2 - 3.0  # about zero
        N0 = comb(self.config.n, self.config.n // 2)
        return {
            "count": int(count),
            "mean": mean,
            "variance": var,
            "reference_variance": 1.0 / N0,
            "relative_variance_error": var * N0 - 1.0,
            "excess_kurtosis": kurt,
        }


def run_ensemble(cfg: ChainConfig, jobs: int = 1) -> EnsembleDataset:
    """Diagonalize and analyze every (ratio, realization); ordered, seed-deterministic."""
    t0 = time.perf_counter()
    results = run_realizations(cfg, jobs)
    ds = EnsembleDataset(cfg, results, time.perf_counter() - t0)
    for a, r, err in ds.failures():
        log.warning("excluded ratio=%s realization=%d: %s", cfg.ratios[a], r, err)
    return ds


def ratio_index(cfg: ChainConfig, ratio: float) -> int:
    for i, r in enumerate(cfg.ratios):
        if abs(r - ratio) < 1e-12:
            return i
    raise KeyError(f"ratio {ratio} not in config {cfg.ratios}")


def eq13_curve(npc, n: int):
    return sector_prediction_sz0(npc, comb(n, n // 2))


def with_ratios(cfg: ChainConfig, ratios) -> ChainConfig:
    return replace(cfg, ratios=tuple(ratios))


# -- figure-ready tables ----------------------------------------------------


def _hist_rows(ratio, edges, values):
    return [(ratio, edges[i], edges[i + 1], values[i]) for i in range(len(values))]


def dataset_tables(ds: EnsembleDataset) -> dict[str, tuple[list[str], list[tuple]]]:
    """Plot-ready tables keyed by file stem: (header, rows)."""
    cfg = ds.config
    n = cfg.n
    N0 = comb(n, n // 2)
    even = list(range(2, n + 1, 2))
    out: dict[str, tuple[list[str], list[tuple]]] = {}

    hist_rows, scatter, ploc_rows, af_rows, level_rows, spacing_rows, inset_rows = [], [], [], [], [], [], []
    fit_idx = ratio_index(cfg, cfg.fit_ratio) if cfg.fit_ratio in cfg.ratios else None
    fit = ds.fit(fit_idx) if fit_idx is not None else None
    top = N0 + cfg.npc_bin_width
    edges = np.arange(0.0, top, cfg.npc_bin_width)
    for a, ratio in enumerate(cfg.ratios):
        if not ds.tables(a):
            continue
        npc, ploc, A = ds.stacked(a)
        counts = np.histogram(npc, bins=edges)[0]
        density = counts / (counts.sum() * cfg.npc_bin_width)
        hist_rows += [(ratio, edges[i], edges[i + 1], int(counts[i]), density[i]) for i in range(len(counts))]

        first = ds.tables(a)[0]
        scatter += [
            (ratio, first.realization_id, k, first.energies[k], first.npc_z[k], first.p_loc[k])
            for k in range(len(first.energies))
        ]

        b = binned_means(npc, ploc, 1.0)
        pred = eq13_curve(b["lo"] + 0.5, n)
        fitted = fit(b["lo"] + 0.5) if (fit is not None and a == fit_idx) else np.full(len(b["lo"]), np.nan)
        ploc_rows += [
            (ratio, b["lo"][i], b["lo"][i] + 1, int(b["count"][i]), b["mean"][i], b["sem"][i], pred[i], fitted[i])
            for i in range(len(b["lo"]))
        ]

        b = binned_means(npc, A, 1.0)
        af_rows += [
            (ratio, b["lo"][i], b["lo"][i] + 1, int(b["count"][i]), *[b["mean"][i][f] for f in even])
            for i in range(len(b["lo"]))
        ]

        mean_r, sem_r, count_r = ds.gap_ratio_summary(a)
        n_deg = sum(r.n_degenerate for r in ds.results if r.ratio_index == a)
        level_rows.append((ratio, mean_r, sem_r, count_r, n_deg))

        s = np.concatenate([r.spacings for r in ds.results if r.ratio_index == a and r.spacings is not None])
        dens, sedges = np.histogram(s, bins=SPACING_BINS, range=(0.0, SPACING_MAX), density=True)
        spacing_rows += _hist_rows(ratio, sedges, dens)

        hs = [r.inset_hist for r in ds.results if r.ratio_index == a and r.inset_hist is not None]
        if hs:
            total = np.sum(hs, axis=0)
            iedges = np.linspace(*INSET_RANGE, INSET_BINS + 1)
            width = iedges[1] - iedges[0]
            dens = total / max(total.sum(), 1) / width
            inset_rows += [(ratio, iedges[i], iedges[i + 1], int(total[i]), dens[i]) for i in range(INSET_BINS)]

    out["npc_histogram"] = (["ratio", "npc_lo", "npc_hi", "count", "density"], hist_rows)
    out["inset_components"] = (["ratio", "x_lo", "x_hi", "count", "density"], inset_rows)
    out["ploc_scatter"] = (["ratio", "realization", "index", "energy", "npc_z", "p_loc"], scatter)
    out["ploc_binned"] = (
        ["ratio", "npc_lo", "npc_hi", "count", "mean_p_loc", "sem", "uncorrelated_prediction", "hyperbola_fit"],
        ploc_rows,
    )
    out["af_binned"] = (["ratio", "npc_lo", "npc_hi", "count", *[f"A_{f}" for f in even]], af_rows)
    out["level_stats"] = (["ratio", "mean_r", "sem_r", "n_ratios", "n_degenerate"], level_rows)
    out["spacing_histogram"] = (["ratio", "s_lo", "s_hi", "density"], spacing_rows)
    return out


def dataset_summary(ds: EnsembleDataset) -> dict:
    cfg = ds.config
    fits = {}
    if cfg.fit_ratio in cfg.ratios:
        a = ratio_index(cfg, cfg.fit_ratio)
        if ds.tables(a):
            for name, kw in (
                ("binned_weighted", {}),
                ("binned_weighted_trimmed", {"trim": cfg.edge_fraction}),
                ("binned_unweighted", {"weighted": False}),
            ):
                fits[name] = asdict(ds.fit(a, **kw))
    levels = {}
    for a, ratio in enumerate(cfg.ratios):
        if ds.tables(a):
            m, sem, cnt = ds.gap_ratio_summary(a)
            levels[repr(float(ratio))] = {"mean_r": m, "sem_r": sem, "n_ratios": cnt}
    return {
        "config": cfg.to_dict(),
        "fits": fits,
        "gap_ratio": levels,
        "reference_r": {"poisson": POISSON_R, "goe": GOE_R},
        "inset": ds.inset_moments(),
        "failures": [{"ratio": cfg.ratios[a], "realization": r, "error": e} for a, r, e in ds.failures()],
        "resamples": sum(r.resamples for r in ds.results),
        "metadata": {
            "level_statistic": "gap_ratio",
            "unfold_degree": UNFOLD_DEGREE,
            "edge_fraction": cfg.edge_fraction,
            "parameterization": "J = ratio * disorder_width, eps_i = eps + U[-w/2, w/2]",
            "boundary": "open",
        },
    }
