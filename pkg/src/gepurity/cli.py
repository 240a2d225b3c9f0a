"""Command-line driver: every computation as a seeded batch job emitting CSV/JSON.

Exit codes: 0 success, 2 configuration/input error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import logging
import sys
import time
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .basis_index import SectorBasis, enumerate_sector
from .hamming_analysis import profile, uncorrelated_prediction
from .purity_engine import (
    all_observables,
    diagonal_algebra,
    ipr,
    load_observable_set,
    local_purity_mub,
    local_qubits,
    local_qudits,
    purity,
    q_block,
    spin_j,
    unilocal_A,
)
from .random_expect import (
    bilocal_sz0_closed_form,
    expected_ipr_haar,
    expected_ipr_real,
    expected_purity_haar,
    expected_purity_real,
    expected_purity_sector,
    monte_carlo_expected_purity,
    monte_carlo_ipr,
    report,
)
from .spin_chain import ChainConfig, DiagonalizationError, dataset_summary, dataset_tables, fit_hyperbola, run_ensemble
from .states import EnsembleKind, EnsembleSpec, PureState, canonical_frame, change_basis

log = logging.getLogger("gepurity")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3


class ConfigError(Exception):
    pass


class NumericalFailure(Exception):
    pass


# -- output helpers ---------------------------------------------------------


def fmt(x) -> str:
    """12 significant digits, '.' decimal separator."""
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, str):
        return x
    return format(float(x), ".12g")


def csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt(v) for v in row])
    return buf.getvalue()


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if np.isfinite(v) else None
    return obj


def json_text(obj) -> str:
    return json.dumps(_jsonable(obj), indent=2, sort_keys=True) + "\n"


def config_hash(command: str, config: dict) -> str:
    blob = json.dumps({"command": command, "config": _jsonable(config)}, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()[:12]


@dataclass
class RunManifest:
    command: str
    config: dict
    seed: int
    version: str
    config_hash: str
    wall_time: float
    outputs: list

    def to_json(self) -> str:
        return json_text(asdict(self))


class Output:
    """Collects named artifacts and writes them (with a manifest) or prints them."""

    def __init__(self, args, command: str, config: dict):
        self.out_dir = Path(args.out_dir) if args.out_dir else None
        self.format = args.format
        self.command = command
        self.config = config
        self.seed = args.seed
        self.hash = config_hash(command, config)
        self.t0 = time.perf_counter()
        self.files: list[str] = []

    def emit(self, stem: str, payload: dict | None = None, table=None):
        """Write ``table`` as CSV when format is csv (or the payload is tabular only), else JSON."""
        if table is not None and (self.format == "csv" or payload is None):
            text, ext = csv_text(*table), "csv"
        else:
            body = dict(payload or {})
            if table is not None:
                header, rows = table
                body["rows"] = [dict(zip(header, r)) for r in rows]
            body["manifest_hash"] = self.hash
            text, ext = json_text(body), "json"
        if self.out_dir is None:
            sys.stdout.write(text)
            return
        self.out_dir.mkdir(parents=True, exist_ok=True)
        name = f"{stem}_{self.hash}.{ext}"
        with open(self.out_dir / name, "w", newline="\n") as fh:
            fh.write(text)
        self.files.append(name)

    def finish(self):
        if self.out_dir is None:
            return
        m = RunManifest(
            self.command, self.config, self.seed, __version__, self.hash, time.perf_counter() - self.t0, self.files
        )
        self.out_dir.mkdir(parents=True, exist_ok=True)
        with open(self.out_dir / f"manifest_{self.hash}.json", "w", newline="\n") as fh:
            fh.write(m.to_json())


# -- input helpers ----------------------------------------------------------


def load_config(path: str | None) -> dict:
    if not path:
        return {}
    try:
        with open(path) as fh:
            obj = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(obj, dict):
        raise ConfigError("config must be a JSON object")
    return obj


def merged(cfg: dict, args, keys) -> dict:
    """Config values overridden by explicitly given flags."""
    out = dict(cfg)
    for k in keys:
        v = getattr(args, k, None)
        if v is not None:
            out[k] = v
    return out


def load_state(path: str) -> PureState:
    try:
        with open(path) as fh:
            return PureState.from_json(fh.read())
    except (OSError, ValueError, KeyError, TypeError) as exc:
        raise ConfigError(f"cannot load state {path}: {exc}") from exc


def named_set(name: str, n: int | None = None, d: int = 2, N: int | None = None, **kw):
    """Observable sets by name: local, all, diag, bilocal, block, unilocal, spinJ."""
    name = name.lower()
    if name == "local":
        return local_qubits(n) if d == 2 else local_qudits(n, d)
    if name == "all":
        return all_observables(N)
    if name == "diag":
        return diagonal_algebra(N)
    if name == "bilocal":
        return q_block(n, 2)
    if name == "block":
        return q_block(n, kw.get("q") or 2)
    if name == "unilocal":
        if not kw.get("d_a") or not kw.get("d_b"):
            raise ConfigError("unilocal needs --d-a and --d-b")
        return unilocal_A(kw["d_a"], kw["d_b"])
    if name in ("spinj", "su2"):
        if kw.get("J") is None:
            raise ConfigError("spinJ needs --J")
        return spin_j(kw["J"])
    raise ConfigError(f"unknown observable set {name!r}")


# -- commands ---------------------------------------------------------------


def cmd_purity(args) -> dict:
    psi = load_state(args.state)
    if args.set_file:
        try:
            h = load_observable_set(Path(args.set_file).read_text())
        except (OSError, ValueError, KeyError) as exc:
            raise ConfigError(f"bad observable set: {exc}") from exc
        name = h.label
    else:
        name = args.set or "local"
        needs_full = name in ("local", "all", "bilocal", "block", "unilocal")
        target = psi.to_full() if needs_full else psi
        h = named_set(name, n=psi.n, d=psi.d, N=target.dim, q=args.q, d_a=args.d_a, d_b=args.d_b, J=args.J)
    out = {"set": name}
    if name == "local" and psi.d == 2:
        full = psi.to_full()
        px, py, pz, ploc = local_purity_mub(full)
        npcs = {ax: 1.0 / ipr(change_basis(full, ax).probs) for ax in "xyz"}
        pred = uncorrelated_prediction(npcs["x"], npcs["y"], npcs["z"], full.dim)
        out.update(P_h=ploc, P_x=px, P_y=py, P_z=pz, NPC=npcs, uncorrelated_prediction=pred, residual=ploc - pred)
    else:
        if h.N == psi.dim:
            target = psi
        elif h.N == psi.basis.full_dim:
            target = psi.to_full()
        else:
            raise ConfigError(f"observable set acts on dimension {h.N}, state has {psi.dim}")
        out["P_h"] = purity(target, h)
    return out


def cmd_npc(args) -> dict:
    psi = load_state(args.state)
    basis = args.basis
    if basis == "canonical":
        phi = change_basis(psi.to_full(), canonical_frame(psi.to_full()))
    elif basis in ("x", "y"):
        phi = change_basis(psi.to_full(), basis)
    else:
        phi = psi
    r = ipr(phi.probs)
    return {"basis": basis, "ipr": r, "npc": 1.0 / r, "dim": phi.dim}


def cmd_hamming_profile(args, output: Output):
    psi = load_state(args.state)
    target = psi if args.basis == "z" else psi.to_full()
    prof = profile(target, args.basis, args.method)
    rows = prof.csv_rows()
    payload = {"basis": args.basis, "n": prof.n, "A_bar": prof.A_bar, "ipr": prof.ipr, "degenerate": prof.degenerate}
    output.emit("hamming_profile", payload, (["f", "n_f", "A_f", "w_f"], rows))


def cmd_random_expect(args, cfg: dict) -> dict:
    name = cfg.get("set", "local").lower()
    ensemble = cfg.get("ensemble", "complex")
    if ensemble not in ("complex", "real"):
        raise ConfigError(f"unknown ensemble {ensemble!r}")
    real = ensemble == "real"
    samples = int(cfg.get("samples", 10**4))
    seed = int(cfg.get("seed", 0))
    jobs = int(cfg.get("jobs", 1))

    if name == "ipr":
        n = _n_from(cfg)
        basis = SectorBasis.full(n)
        spec = EnsembleSpec(EnsembleKind.HAAR_REAL if real else EnsembleKind.HAAR_COMPLEX, basis, seed)
        value = expected_ipr_real(basis.dim) if real else expected_ipr_haar(basis.dim)
        m, se = monte_carlo_ipr(spec, samples)
        return report("3/(N+2)" if real else "2/(N+1)", value, m, se)

    if name in ("spinj", "su2"):
        J = cfg.get("J")
        if J is None:
            raise ConfigError("spinJ needs J")
        h = spin_j(float(J))
        basis = SectorBasis(1, int(round(2 * float(J) + 1)))
        kind = EnsembleKind.HAAR_REAL if real else EnsembleKind.HAAR_COMPLEX
        spec = EnsembleSpec(kind, basis, seed)
        value = expected_purity_real(h) if real else expected_purity_haar(h)
        formula = "kappa 2 dim/(N+2)" if real else "1/(2J)"
    else:
        n = _n_from(cfg)
        m_sec = cfg.get("magnetization")
        h = named_set(name, n=n, N=2**n, q=cfg.get("q"))
        if m_sec is None:
            basis = SectorBasis.full(n)
            kind = EnsembleKind.HAAR_REAL if real else EnsembleKind.HAAR_COMPLEX
            try:
                value = expected_purity_real(h) if real else expected_purity_haar(h)
            except ValueError as exc:
                raise ConfigError(str(exc)) from exc
            formula = "kappa 2 dim/(N+2)" if real else "kappa dim/(N+1)"
        else:
            basis = enumerate_sector(n, int(m_sec))
            kind = EnsembleKind.HAAR_REAL_SECTOR if real else EnsembleKind.HAAR_COMPLEX_SECTOR
            value = expected_purity_sector(h, basis, real)
            formula = "kappa (c sum alpha^2 + sum beta^2)"
            if name == "bilocal" and real and int(m_sec) == 0:
                formula += f"; two-site closed form {bilocal_sz0_closed_form(n):.12g}"
        spec = EnsembleSpec(kind, basis, seed)
    m, se = monte_carlo_expected_purity(h, spec, samples, jobs=jobs)
    out = report(formula, value, m, se)
    out.update(set=name, ensemble=ensemble, samples=samples, dim=basis.dim)
    return out


def _n_from(cfg: dict) -> int:
    if cfg.get("n") is not None:
        return int(cfg["n"])
    if cfg.get("N") is not None:
        N = int(cfg["N"])
        n = N.bit_length() - 1
        if 2**n != N:
            raise ConfigError(f"N = {N} is not a power of two")
        return n
    raise ConfigError("need n or N")


def cmd_chain(args, cfg: dict, output: Output):
    try:
        ccfg = ChainConfig.from_dict(cfg)
    except (ValueError, TypeError) as exc:
        raise ConfigError(str(exc)) from exc
    ds = run_ensemble(ccfg, jobs=args.jobs)
    if len(ds.failures()) == len(ds.results):
        raise NumericalFailure("every realization failed")
    for stem, table in dataset_tables(ds).items():
        output.emit(stem, None, table)
    summary = dataset_summary(ds)
    output.emit("summary", summary)
    return summary


def cmd_fit(args) -> dict:
    try:
        with open(args.csv) as fh:
            rows = list(csv.DictReader(fh))
    except OSError as exc:
        raise ConfigError(str(exc)) from exc
    if not rows:
        raise ConfigError("empty CSV")
    try:
        sel = [r for r in rows if args.ratio is None or abs(float(r["ratio"]) - args.ratio) < 1e-12]
        x = np.array([float(r[args.x_col]) for r in sel])
        y = np.array([float(r[args.y_col]) for r in sel])
        w = np.array([float(r[args.weight_col]) for r in sel]) if args.weight_col else None
    except KeyError as exc:
        raise ConfigError(f"missing column {exc}") from exc
    if args.x_col == "npc_lo":
        x = x + 0.5
    fit = fit_hyperbola(x, y, w)
    return asdict(fit)


# -- argument parsing -------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="gepurity", description=__doc__)
    p.add_argument("--seed", type=int, default=None, help="master seed")
    p.add_argument("--jobs", type=int, default=1, help="worker processes")
    p.add_argument("--out-dir", default=None, help="write artifacts and a manifest here instead of stdout")
    p.add_argument("--format", choices=["csv", "json"], default="json")
    p.add_argument("-v", "--verbose", action="store_true")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("purity", help="h-purity of a state")
    s.add_argument("state", help="state JSON file")
    s.add_argument("--set", help="local, all, diag, bilocal, block, unilocal, spinJ")
    s.add_argument("--set-file", help="observable set JSON")
    s.add_argument("--q", type=int)
    s.add_argument("--d-a", type=int)
    s.add_argument("--d-b", type=int)
    s.add_argument("--J", type=float)

    s = sub.add_parser("npc", help="number of principal components")
    s.add_argument("state")
    s.add_argument("--basis", choices=["z", "x", "y", "canonical"], default="z")

    s = sub.add_parser("hamming-profile", help="distance-resolved pair averages A_f")
    s.add_argument("state")
    s.add_argument("--basis", choices=["z", "x", "y"], default="z")
    s.add_argument("--method", choices=["xor", "pairs"], default="xor")

    s = sub.add_parser("random-expect", help="closed-form expected purity with a Monte Carlo twin")
    s.add_argument("--config")
    s.add_argument("--set", help="local, bilocal, block, all, diag, spinJ, ipr")
    s.add_argument("--n", type=int)
    s.add_argument("--N", type=int)
    s.add_argument("--magnetization", type=int)
    s.add_argument("--J", type=float)
    s.add_argument("--q", type=int)
    s.add_argument("--ensemble", choices=["complex", "real"])
    s.add_argument("--samples", type=int)

    s = sub.add_parser("chain", help="disordered Heisenberg chain ensemble")
    s.add_argument("--config")
    s.add_argument("--n", type=int)
    s.add_argument("--ratios", type=float, nargs="+")
    s.add_argument("--realizations", type=int)

    s = sub.add_parser("fit", help="fit y = a/(x+b) + c to CSV columns")
    s.add_argument("csv")
    s.add_argument("--x-col", default="npc_lo")
    s.add_argument("--y-col", default="mean_p_loc")
    s.add_argument("--weight-col", default="count")
    s.add_argument("--ratio", type=float)
    return p


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.jobs < 1:
            raise ConfigError("--jobs must be >= 1")
        cmd = args.command
        if cmd == "random-expect":
            cfg = merged(load_config(args.config), args, ["set", "n", "N", "magnetization", "J", "q", "ensemble", "samples"])
            cfg["seed"] = args.seed if args.seed is not None else cfg.get("seed", 0)
            out = Output(args, cmd, cfg)
            cfg["jobs"] = args.jobs
            out.emit("random_expect", cmd_random_expect(args, cfg))
        elif cmd == "chain":
            cfg = merged(load_config(args.config), args, ["n", "ratios", "realizations"])
            cfg.pop("jobs", None)
            cfg.pop("out_dir", None)
            if args.seed is not None:
                cfg["master_seed"] = args.seed
            try:
                canonical = ChainConfig.from_dict(cfg).to_dict()
            except (ValueError, TypeError) as exc:
                raise ConfigError(str(exc)) from exc
            out = Output(args, cmd, canonical)
            cmd_chain(args, canonical, out)
        else:
            cfg = {k: v for k, v in vars(args).items() if k not in ("jobs", "out_dir", "format", "verbose")}
            out = Output(args, cmd, cfg)
            if cmd == "purity":
                out.emit("purity", cmd_purity(args))
            elif cmd == "npc":
                out.emit("npc", cmd_npc(args))
            elif cmd == "hamming-profile":
                cmd_hamming_profile(args, out)
            elif cmd == "fit":
                out.emit("fit", cmd_fit(args))
        out.finish()
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericalFailure, DiagonalizationError, FloatingPointError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_OK


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
