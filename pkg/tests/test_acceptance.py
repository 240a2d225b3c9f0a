"""Acceptance criteria, each run at its stated tolerance.

Every test appends one [PASS]/[FAIL] line to the acceptance log (printed
in the terminal summary) before asserting. Extra informational lines are
prefixed with "info".
"""

import json
import time
from math import comb

import numpy as np
import pytest

from gepurity.basis_index import SectorBasis, enumerate_sector, single_excitation_sector
from gepurity.cli import csv_text, run
from gepurity.hamming_analysis import (
    distance_sums_direct,
    pair_sum_direct,
    profile_from_probs,
    single_excitation_relation,
)
from gepurity.purity_engine import (
    PauliString,
    diagonal_algebra,
    ge_two_copy,
    local_purity_batch,
    local_qubits,
    purity_all,
    purity_batch,
    q_block,
    single_site_expectations,
    spin_j,
    to_dense,
)
from gepurity.random_expect import (
    bilocal_lambda,
    bilocal_sz0_closed_form,
    expected_ipr_real,
    haar_pair_average,
    local_sz0_closed_form,
    monte_carlo_expected_purity,
    monte_carlo_ipr,
    pauli_sector_trace,
    pauli_sector_trace_sq,
    reference_pair_average,
    spin_j_closed_form,
)
from gepurity.spin_chain import GOE_R, POISSON_R, ChainConfig, binned_means, dataset_tables, ratio_index, run_ensemble
from gepurity.states import (
    AXIS_UNITARIES,
    EnsembleKind,
    EnsembleSpec,
    PureState,
    apply_local_unitaries,
    canonical_frame,
    make_rng,
    sample_amplitudes,
)

IDENTITY_TOL = 1e-9
SIGMA = 3.0
MC_SAMPLES = 100_000
CHAIN_CONFIG = ChainConfig(n=12, ratios=(0.05, 0.2, 0.59, 1.0), realizations=100)


def record(log, name, ok, detail):
    line = f"[{'PASS' if ok else 'FAIL'}] {name}: {detail}"
    log.append(line)
    print(line)


def info(log, text):
    log.append(f"  info {text}")
    print(f"  info {text}")


# -- 1. exact identities ------------------------------------------------------


def identity_deviations(n, seed, count=1000, chunk=250):
    """Largest absolute violation of each identity over ``count`` Haar states."""
    full = SectorBasis.full(n)
    N = full.dim
    dev = dict.fromkeys(["lemma_x", "lemma_y", "lemma_z", "diag_purity", "ipr_pairs", "single_excitation",
                         "two_copy", "purity_all"], 0.0)
    rng = make_rng(seed, n)
    amps_all = sample_amplitudes(EnsembleSpec(EnsembleKind.HAAR_COMPLEX, full), count, rng)
    h_diag = diagonal_algebra(N)
    for start in range(0, count, chunk):
        amps = amps_all[start:start + chunk]
        e = single_site_expectations(amps, full)
        for j, axis in enumerate("xyz"):
            p_axis = np.abs(apply_local_unitaries(amps, [AXIS_UNITARIES[axis]] * n)) ** 2
            lhs = 1 - 4.0 / n * pair_sum_direct(p_axis, full)
            rhs = np.mean(e[..., j] ** 2, axis=-1)
            dev[f"lemma_{axis}"] = max(dev[f"lemma_{axis}"], np.max(np.abs(lhs - rhs)))
        p = np.abs(amps) ** 2
        ipr = np.sum(p**2, axis=-1)
        diag = purity_batch(amps, h_diag, full)
        dev["diag_purity"] = max(dev["diag_purity"], np.max(np.abs(diag - (N / (N - 1) * ipr - 1 / (N - 1)))))
        pairs = distance_sums_direct(p, full).sum(axis=-1)
        dev["ipr_pairs"] = max(dev["ipr_pairs"], np.max(np.abs(ipr - (1 - 2 * pairs))))
    p_loc = local_purity_batch(amps_all, full)
    for k in range(count):
        psi = PureState(full, amps_all[k])
        dev["two_copy"] = max(dev["two_copy"], abs(ge_two_copy(psi, canonical_frame(psi)) - (1 - p_loc[k])))
        dev["purity_all"] = max(dev["purity_all"], abs(purity_all(psi) - 1.0))
    # W-type states: embed single-excitation samples so x and y terms are computed too
    s1 = single_excitation_sector(n)
    se = sample_amplitudes(EnsembleSpec(EnsembleKind.HAAR_COMPLEX_SECTOR, s1), count, make_rng(seed, n, 1))
    emb = np.zeros((count, N), dtype=complex)
    emb[:, s1.strings] = se
    lhs = local_purity_batch(emb, full)
    rhs = single_excitation_relation(1.0 / np.sum(np.abs(se) ** 4, axis=-1), n)
    dev["single_excitation"] = float(np.max(np.abs(lhs - rhs)))
    return dev


def test_criterion_1_identity_suite(acceptance_log):
    t0 = time.perf_counter()
    worst: dict[str, float] = {}
    for n in range(2, 9):
        for key, v in identity_deviations(n, seed=1).items():
            worst[key] = max(worst.get(key, 0.0), float(v))
    elapsed = time.perf_counter() - t0
    ok = all(v <= IDENTITY_TOL for v in worst.values()) and elapsed < 60
    detail = ", ".join(f"{k} {v:.1e}" for k, v in worst.items())
    record(acceptance_log, "1 identity suite (1000 states, n=2..8, tol 1e-9, < 60 s)", ok,
           f"max deviations {detail}; {elapsed:.1f} s")
    assert ok


# -- 2. closed forms vs Monte Carlo ---------------------------------------------


def mc_checks():
    """(label, closed form, (mean, stderr)) for every Monte Carlo comparison."""
    out = []
    seed = 100
    for n in range(2, 9):
        full = SectorBasis.full(n)
        spec = EnsembleSpec(EnsembleKind.HAAR_COMPLEX, full, seed=seed)
        out.append((f"local n={n}", 3 / (full.dim + 1), monte_carlo_expected_purity(local_qubits(n), spec, MC_SAMPLES)))
        seed += 1
    for J in range(1, 11):
        spec = EnsembleSpec(EnsembleKind.HAAR_COMPLEX, SectorBasis(1, 2 * J + 1), seed=seed)
        out.append((f"su(2) J={J}", spin_j_closed_form(J), monte_carlo_expected_purity(spin_j(J), spec, MC_SAMPLES)))
        seed += 1
    for n in (4, 8):
        spec = EnsembleSpec(EnsembleKind.HAAR_REAL, SectorBasis.full(n), seed=seed)
        out.append((f"real IPR N={2**n}", expected_ipr_real(2**n), monte_carlo_ipr(spec, MC_SAMPLES)))
        seed += 1
    for n in (6, 12):
        spec = EnsembleSpec(EnsembleKind.HAAR_REAL_SECTOR, enumerate_sector(n, 0), seed=seed)
        out.append((f"sector local n={n}", local_sz0_closed_form(n),
                    monte_carlo_expected_purity(local_qubits(n), spec, MC_SAMPLES)))
        seed += 1
    for n in (6, 8, 12):
        spec = EnsembleSpec(EnsembleKind.HAAR_REAL_SECTOR, enumerate_sector(n, 0), seed=seed)
        out.append((f"bilocal n={n}", bilocal_sz0_closed_form(n),
                    monte_carlo_expected_purity(q_block(n, 2), spec, MC_SAMPLES)))
        seed += 1
    return out


def printed_bilocal(n):
    """The bi-local display taken literally, with lambda^2/N0 in both places."""
    N0 = comb(n, n // 2)
    lam = bilocal_lambda(n)
    return (2 / (N0 + 2) * (3 - lam**2 / N0 + 4 / N0 * comb(n - 2, (n - 2) // 2)) + lam**2 / N0) / 3


def test_criterion_2_closed_forms_monte_carlo(acceptance_log):
    t0 = time.perf_counter()
    rows = mc_checks()
    elapsed = time.perf_counter() - t0
    sig = {label: abs(m - v) / se for label, v, (m, se) in rows}
    worst = max(sig, key=sig.get)
    ok = all(s <= SIGMA for s in sig.values()) and elapsed < 300
    record(acceptance_log, "2 closed forms vs Monte Carlo (1e5 samples, 3 sigma, < 5 min)", ok,
           f"{len(rows)} comparisons, worst {worst} at {sig[worst]:.2f} sigma; {elapsed:.0f} s")
    info(acceptance_log, "sigmas " + ", ".join(f"{k} {v:.2f}" for k, v in sig.items()))
    for label, v, (m, se) in rows:
        if label.startswith("bilocal"):
            n = int(label.split("=")[1])
            lit = printed_bilocal(n)
            info(acceptance_log, f"{label}: derived {v:.6g} at {sig[label]:.2f} sigma; "
                                 f"display read literally gives {lit:.6g} at {abs(m - lit) / se:.0f} sigma")
    assert ok


# -- 3. Haar A_f flatness -------------------------------------------------------


def test_criterion_3_haar_af_flatness(acceptance_log):
    n, samples = 8, 10_000
    full = SectorBasis.full(n)
    N = full.dim
    rng = make_rng(300)
    chunks = []
    for _ in range(10):
        amps = sample_amplitudes(EnsembleSpec(EnsembleKind.HAAR_COMPLEX, full), samples // 10, rng)
        chunks.append(profile_from_probs(np.abs(amps) ** 2, full)[0][:, 1:])
    A = np.concatenate(chunks)
    mean = A.mean(axis=0)
    se = A.std(axis=0, ddof=1) / np.sqrt(samples)
    ref = reference_pair_average(N)
    sig_ref = np.abs(mean - ref) / se
    haar = haar_pair_average(N)
    sig_haar = np.abs(mean - haar) / se
    ok = bool(np.all(sig_ref <= SIGMA))
    record(acceptance_log, "3 Haar A_f = (N-3)/[N(N-1)(N+2)] at N=256 (1e4 samples, 3 sigma)", ok,
           f"max {sig_ref.max():.1f} sigma over f=1..8 (reference {ref:.4e}, sample mean {mean.mean():.4e})")
    info(acceptance_log, f"exact Haar pair moment 1/(N(N+1)) = {haar:.4e} lies within {sig_haar.max():.2f} sigma "
                         f"for every f; the quoted reference differs from it by a factor {ref / haar:.4f}")
    assert ok


# -- 4. combinatorial traces ----------------------------------------------------


def test_criterion_4_trace_oracle(acceptance_log):
    n = 6
    s = enumerate_sector(n, 0)
    N0 = s.dim
    lam = sum((-1) ** k * comb(2, k) * comb(n - 2, n // 2 - k) for k in range(3))
    labels = ["ZIIIII", "IZIIII", "ZZIIII", "XXIIII", "YYIIII"]
    mismatches = []
    brute = {}
    for label in labels:
        op = PauliString(label)
        B = to_dense(op, s)
        tr = int(round(np.trace(B).real))
        tr2 = int(round(np.trace(B @ B).real))
        brute[label] = (tr, tr2)
        combin = (int(pauli_sector_trace(op, s.n_ones)), int(pauli_sector_trace_sq(op, s.n_ones)))
        if combin != (tr, tr2):
            mismatches.append(label)
    # the five distinct values and their combinatorial expressions
    five = {
        "tr(Pi Z1 Pi)": (0, brute["ZIIIII"][0]),
        "tr((Pi Z1 Pi)^2)": (N0, brute["ZIIIII"][1]),
        "tr(Pi Z1Z2 Pi) = lambda": (lam, brute["ZZIIII"][0]),
        "tr((Pi Z1Z2 Pi)^2)": (N0, brute["ZZIIII"][1]),
        "tr((Pi X1X2 Pi)^2)": (2 * comb(n - 2, (n - 2) // 2), brute["XXIIII"][1]),
    }
    bad = [k for k, (want, got) in five.items() if want != got]
    ok = not mismatches and not bad and brute["XXIIII"][1] == brute["YYIIII"][1] and brute["XXIIII"][0] == 0
    record(acceptance_log, "4 sector trace oracle at n=6 (exact integers)", ok,
           "; ".join(f"{k} {got}" for k, (_, got) in five.items()) + f"; routine mismatches {mismatches or 'none'}")
    info(acceptance_log, f"the printed C(n-2,(n-2)/2) = {comb(n - 2, (n - 2) // 2)} for tr((Pi X1X2 Pi)^2) is half "
                         f"the brute-force {brute['XXIIII'][1]}; the final bi-local display uses the correct value")
    assert ok


# -- 5-8. disordered chain --------------------------------------------------------


@pytest.fixture(scope="module")
def chain_dataset():
    return run_ensemble(CHAIN_CONFIG, jobs=1)


@pytest.mark.slow
def test_criterion_5_chain_fit_and_profiles(chain_dataset, acceptance_log):
    ds = chain_dataset
    a = ratio_index(ds.config, 0.59)
    fit = ds.fit(a)
    fit_ok = abs(fit.a - 14.5) <= 0.3 * 14.5 and abs(fit.b - 12.2) <= 0.3 * 12.2 and abs(fit.c + 0.032) <= 0.02
    npc, ploc, A = ds.stacked(a)
    coarse = binned_means(npc, ploc, ds.config.npc_bin_width)
    increases = int(np.sum(np.diff(coarse["mean"]) > 0))
    mono_ok = increases == 0 and fit.a > 0
    af = binned_means(npc, A, 1.0)
    centers = af["lo"] + 0.5
    peak = int(np.argmax(af["mean"][:, 2]))
    at_peak = af["mean"][peak]
    others = np.delete(at_peak[1:], 1)  # every f other than 2
    peak_ok = 2 <= centers[peak] <= 8 and bool(np.all(at_peak[2] > others))
    ok = fit_ok and mono_ok and peak_ok and not ds.failures()
    record(acceptance_log, "5 chain n=12 ratio 0.59 (fit bands, monotone curve, A_2 peak)", ok,
           f"a={fit.a:.2f} b={fit.b:.2f} c={fit.c:.4f} [{'in' if fit_ok else 'out of'} band]; "
           f"{increases} upticks in width-{ds.config.npc_bin_width:g} bins; A_2 peak at NPC {centers[peak]:.1f} "
           f"{'above' if peak_ok else 'not above'} other A_f; {len(ds.failures())} failures; "
           f"ensemble {ds.wall_time:.0f} s for {len(ds.config.ratios)} ratios")
    for name, kw in (("trimmed", {"trim": ds.config.edge_fraction}), ("unweighted", {"weighted": False})):
        f = ds.fit(a, **kw)
        info(acceptance_log, f"{name} fit a={f.a:.2f} b={f.b:.2f} c={f.c:.4f}")
    for i in np.flatnonzero(np.diff(coarse["mean"]) > 0):
        step = coarse["mean"][i + 1] - coarse["mean"][i]
        noise = np.hypot(np.nan_to_num(coarse["sem"][i]), np.nan_to_num(coarse["sem"][i + 1]))
        info(acceptance_log, f"uptick at NPC {coarse['lo'][i + 1]:g} (counts {coarse['count'][i]} -> "
                             f"{coarse['count'][i + 1]}): +{step:.2e}, {step / noise if noise else np.inf:.1f} sem")
    assert ok


@pytest.mark.slow
def test_criterion_6_gap_ratio_crossover(chain_dataset, acceptance_log):
    ds = chain_dataset
    means = [ds.gap_ratio_summary(a)[0] for a in range(len(ds.config.ratios))]
    mono = all(b > a for a, b in zip(means, means[1:]))
    near = abs(means[0] - POISSON_R) <= 0.03
    ok = mono and near
    pairs = ", ".join(f"{r:g}: {m:.4f}" for r, m in zip(ds.config.ratios, means))
    record(acceptance_log, "6 gap ratio crossover", ok,
           f"{pairs}; Poisson {POISSON_R:.4f}, GOE {GOE_R:.4f}")
    assert ok


@pytest.mark.slow
def test_criterion_7_inset_moments(chain_dataset, acceptance_log):
    m = chain_dataset.inset_moments()
    ok = m["count"] > 0 and abs(m["relative_variance_error"]) <= 0.05
    record(acceptance_log, "7 inset components variance vs 1/924 (5%)", ok,
           f"{m['count']} components, variance x 924 = {1 + m['relative_variance_error']:.4f}, "
           f"excess kurtosis {m['excess_kurtosis']:.3f} (not gated)")
    assert ok


@pytest.mark.slow
def test_criterion_8_determinism(chain_dataset, acceptance_log, tmp_path):
    cfg_path = tmp_path / "chain.json"
    cfg_path.write_text(json.dumps(CHAIN_CONFIG.to_dict()))
    out = tmp_path / "out"
    code = run(["--jobs", "2", "--out-dir", str(out), "chain", "--config", str(cfg_path)])
    reference = {stem: csv_text(*table).encode() for stem, table in dataset_tables(chain_dataset).items()}
    differing = []
    for stem, blob in reference.items():
        files = list(out.glob(f"{stem}_*.csv"))
        if len(files) != 1 or files[0].read_bytes() != blob:
            differing.append(stem)
    ok = code == 0 and not differing
    record(acceptance_log, "8 byte-identical chain CSVs (jobs 1 vs jobs 2 rerun)", ok,
           f"{len(reference)} tables compared, differing: {differing or 'none'}")
    assert ok
