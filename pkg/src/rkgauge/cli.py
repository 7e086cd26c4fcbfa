"""Batch experiment runner.

Subcommands: geometry (solve a pair-array layout), sector (enumerate and
export a constrained basis), sweep (ground states over a lambda grid),
evolve (adiabatic ramp), verify (invariant suites).  Every run is driven
by an INI-style config file with key = value sections; unknown sections
or keys are rejected so a manifest stays reproducible.  Output files
carry the sha256 of the config bytes.

Exit codes: 0 success, 1 check failure, 2 usage or config error,
3 numerical failure.
"""
from __future__ import annotations

import argparse
import configparser
import hashlib
import json
import math
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from datetime import datetime, timezone

import numpy as np

from . import gauge
from .geometry import (
    BlockadeSolution,
    GeometryError,
    solution_from_json_dict,
    solve_ladder_geometry,
    solve_square_geometry,
)
from .hamiltonian import (
    BasisMismatchError,
    DimensionCapError,
    add_pinning,
    build_dual_rk,
    build_original_rk,
    build_pxp_chain,
    build_rydberg_rk,
    build_effective_spin,
    build_atom_level,
    pxp_chain_basis,
)
from .lattice import CHAIN, OPEN_SQUARE, PERIODIC_LADDER, LatticeSpec
from .observables import (
    MOMENTUM_PI_PI,
    MOMENTUM_ZERO,
    compute_report,
    flippable_count,
    rvbs_signature,
)
from .solver import (
    ConvergenceError,
    PulseSpec,
    StepBudgetError,
    TRAJECTORY_COLUMNS,
    adiabatic_sweep,
    dense_spectrum,
    ground_state,
)

SCHEMA_VERSION = 1
SUBCOMMANDS = ("geometry", "sector", "sweep", "evolve", "verify")

EXIT_OK = 0
EXIT_CHECK_FAILURE = 1
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3

SWEEP_COLUMNS = ("lambda", "E0", "S00z", "Sppz", "Sppx", "flippable_count")
REPORT_COLUMNS = ("lambda", "mu", "kx", "ky", "value")

NUMERICAL_ERRORS = (
    GeometryError,
    ConvergenceError,
    StepBudgetError,
    gauge.SectorSizeError,
    DimensionCapError,
    BasisMismatchError,
    ArithmeticError,
    np.linalg.LinAlgError,
)


class ConfigError(ValueError):
    """Malformed, out-of-range, or unknown configuration input."""


# ---------------------------------------------------------------------------
# config schema


def _parse_int(s: str) -> int:
    try:
        return int(s, 0)
    except ValueError:
        raise ConfigError(f"expected an integer, got {s!r}")


def _parse_float(s: str) -> float:
    try:
        return float(s)
    except ValueError:
        raise ConfigError(f"expected a number, got {s!r}")


def _parse_bool(s: str) -> bool:
    low = s.strip().lower()
    if low in ("true", "yes", "on", "1"):
        return True
    if low in ("false", "no", "off", "0"):
        return False
    raise ConfigError(f"expected a boolean, got {s!r}")


def _parse_float_list(s: str) -> tuple[float, ...]:
    items = [part.strip() for part in s.split(",")]
    if items == [""]:
        return ()
    return tuple(_parse_float(part) for part in items)


def _parse_str(s: str) -> str:
    return s.strip()


# key -> (parser, default); _REQUIRED as default marks mandatory keys.
_REQUIRED = object()

_SCHEMA = {
    "experiment": {
        "schema_version": (_parse_int, _REQUIRED),
        "command": (_parse_str, None),
        "seed": (_parse_int, 0),
        "threads": (_parse_int, 1),
    },
    "lattice": {
        "kind": (_parse_str, _REQUIRED),
        "nx": (_parse_int, _REQUIRED),
        "ny": (_parse_int, _REQUIRED),
    },
    "geometry": {
        "mode": (_parse_str, None),
        "eta": (_parse_float, None),
        "theta": (_parse_float, 0.0),
        "d_y": (_parse_float, 0.0),
        "c6": (_parse_float, 1.0),
        "geometry_file": (_parse_str, None),
    },
    "sector": {
        "picture": (_parse_str, "dual"),
        "quotient": (_parse_bool, False),
        "reference": (_parse_int, None),
        "format": (_parse_str, "binary"),
        "max_states": (_parse_int, gauge.DEFAULT_STATE_CAP),
    },
    "model": {
        "name": (_parse_str, "dual-rk"),
        "j": (_parse_float, 1.0),
        "pinning": (_parse_float, 0.0),
        "quotient": (_parse_bool, False),
    },
    "sweep": {
        "lambdas": (_parse_float_list, _REQUIRED),
        "tol": (_parse_float, 1e-10),
        "max_iter": (_parse_int, 5000),
        "report": (_parse_bool, True),
    },
    "evolve": {
        "t_f": (_parse_float, _REQUIRED),
        "j": (_parse_float, 1.0),
        "dt": (_parse_float, None),
        "delta": (_parse_float, 0.0),
        "record_every": (_parse_int, 50),
        "krylov_dim": (_parse_int, 20),
        "step_tol": (_parse_float, 1e-8),
        "initial_mask": (_parse_int, 0),
        "shape": (_parse_str, "sine-quarter"),
    },
    "verify": {
        "tol": (_parse_float, 1e-10),
    },
}

_REQUIRED_SECTIONS = {
    "geometry": ("experiment", "geometry"),
    "sector": ("experiment", "lattice"),
    "sweep": ("experiment", "lattice", "sweep"),
    "evolve": ("experiment", "lattice", "geometry", "evolve"),
    "verify": ("experiment",),
}


@dataclass
class ExperimentConfig:
    """Validated config plus the resolved command-line overrides."""

    command: str
    sections: dict
    config_hash: str
    out_dir: str
    seed: int
    threads: int
    no_timestamp: bool

    def section(self, name: str) -> dict:
        """Section values with schema defaults filled in."""
        values = dict(self.sections.get(name, {}))
        for key, (_, default) in _SCHEMA[name].items():
            if key not in values:
                if default is _REQUIRED:
                    raise ConfigError(
                        f"[{name}] {key} is required for this command")
                values[key] = default
        return values

    def has_section(self, name: str) -> bool:
        return name in self.sections


def load_config(path: str, args: argparse.Namespace) -> ExperimentConfig:
    try:
        with open(path, "rb") as fh:
            raw = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path!r}: {exc}")
    digest = hashlib.sha256(raw).hexdigest()

    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str
    try:
        parser.read_string(raw.decode("utf-8"))
    except (UnicodeDecodeError, configparser.Error) as exc:
        raise ConfigError(f"cannot parse config {path!r}: {exc}")

    sections: dict = {}
    for sec in parser.sections():
        if sec not in _SCHEMA:
            raise ConfigError(f"unknown config section [{sec}]")
        schema = _SCHEMA[sec]
        values = {}
        for key, value in parser.items(sec):
            if key not in schema:
                raise ConfigError(f"unknown key {key!r} in section [{sec}]")
            parse, _ = schema[key]
            try:
                values[key] = parse(value)
            except ConfigError as exc:
                raise ConfigError(f"[{sec}] {key}: {exc}")
        sections[sec] = values

    for sec in _REQUIRED_SECTIONS[args.command]:
        if sec not in sections:
            raise ConfigError(f"missing required section [{sec}]")

    exp = dict(sections["experiment"])
    version = exp.get("schema_version")
    if version is None:
        raise ConfigError("[experiment] schema_version is required")
    if version != SCHEMA_VERSION:
        raise ConfigError(
            f"unsupported schema_version {version}; this build reads "
            f"{SCHEMA_VERSION}")
    declared = exp.get("command")
    if declared is not None and declared != args.command:
        raise ConfigError(
            f"config declares command {declared!r} but {args.command!r} "
            "was invoked")

    seed = args.seed if args.seed is not None else exp.get("seed", 0)
    threads = args.threads if args.threads is not None else exp.get("threads", 1)
    if not 0 <= seed < 2 ** 64:
        raise ConfigError("seed must fit in an unsigned 64-bit integer")
    if threads < 1:
        raise ConfigError("threads must be at least 1")

    return ExperimentConfig(
        command=args.command,
        sections=sections,
        config_hash=digest,
        out_dir=args.out,
        seed=seed,
        threads=threads,
        no_timestamp=args.no_timestamp,
    )


def _build_lattice(cfg: ExperimentConfig) -> LatticeSpec:
    sec = cfg.section("lattice")
    kind = sec["kind"]
    if kind not in (OPEN_SQUARE, PERIODIC_LADDER, CHAIN):
        raise ConfigError(f"[lattice] kind: unknown kind {kind!r}")
    try:
        return LatticeSpec(kind, sec["nx"], sec["ny"])
    except ValueError as exc:
        raise ConfigError(f"[lattice] {exc}")


# ---------------------------------------------------------------------------
# output helpers


def _timestamp() -> str:
    return datetime.now(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


def _fmt_cell(x) -> str:
    if isinstance(x, str):
        return x
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


def _write_csv(path: str, columns, rows, cfg: ExperimentConfig) -> None:
    lines = [f"# schema_version={SCHEMA_VERSION}",
             f"# config_hash={cfg.config_hash}"]
    if not cfg.no_timestamp:
        lines.append(f"# generated={_timestamp()}")
    lines.append(",".join(columns))
    for row in rows:
        lines.append(",".join(_fmt_cell(x) for x in row))
    with open(path, "w", newline="") as fh:
        fh.write("\n".join(lines) + "\n")


def _write_json(path: str, doc: dict, cfg: ExperimentConfig) -> None:
    doc = dict(doc)
    doc["schema_version"] = SCHEMA_VERSION
    doc["config_hash"] = cfg.config_hash
    if not cfg.no_timestamp:
        doc["generated"] = _timestamp()
    with open(path, "w", newline="") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _out_path(cfg: ExperimentConfig, name: str) -> str:
    os.makedirs(cfg.out_dir, exist_ok=True)
    return os.path.join(cfg.out_dir, name)


# ---------------------------------------------------------------------------
# geometry


def _solve_geometry(cfg: ExperimentConfig, lattice: LatticeSpec | None):
    """BlockadeSolution from the [geometry] section (solve or load)."""
    sec = cfg.section("geometry")
    if sec["geometry_file"] is not None:
        path = sec["geometry_file"]
        if not os.path.exists(path):
            raise ConfigError(f"[geometry] geometry_file {path!r} not found")
        with open(path) as fh:
            doc = json.load(fh)
        if "solution" in doc:
            doc = doc["solution"]
        try:
            return solution_from_json_dict(doc, lattice=lattice)
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"[geometry] geometry_file: bad contents ({exc})")

    mode = sec["mode"]
    if mode is None:
        raise ConfigError("[geometry] needs mode = ladder|square or a "
                          "geometry_file")
    eta = sec["eta"]
    if eta is None:
        raise ConfigError("[geometry] eta is required when solving")
    c6 = sec["c6"]
    if c6 <= 0:
        raise ConfigError("[geometry] c6 must be positive")
    if mode == "ladder":
        if not 0 < eta < 0.5:
            raise ConfigError("[geometry] ladder mode needs 0 < eta < 0.5")
        return solve_ladder_geometry(eta, c6, lattice=lattice)
    if mode == "square":
        if eta <= 0:
            raise ConfigError("[geometry] eta must be positive")
        if not 0 <= sec["theta"] <= math.pi / 2:
            raise ConfigError("[geometry] theta must lie in [0, pi/2]")
        if sec["d_y"] < 0:
            raise ConfigError("[geometry] d_y must be nonnegative")
        return solve_square_geometry(eta, sec["theta"], sec["d_y"], c6,
                                     lattice=lattice)
    raise ConfigError(f"[geometry] mode: unknown mode {mode!r}")


def run_geometry(cfg: ExperimentConfig) -> int:
    lattice = _build_lattice(cfg) if cfg.has_section("lattice") else None
    sol = _solve_geometry(cfg, lattice)
    doc = {"mode": cfg.section("geometry")["mode"], "solution": sol.to_json_dict()}
    path = _out_path(cfg, "geometry.json")
    _write_json(path, doc, cfg)
    print(f"a_y = {float(sol.a_y)!r}")
    print(f"G = {float(sol.G)!r}")
    print(f"Lambda = {float(sol.Lambda)!r}")
    print(f"couplings tabulated: {len(sol.couplings)}")
    print(f"wrote {path}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# sector


def run_sector(cfg: ExperimentConfig) -> int:
    lattice = _build_lattice(cfg)
    sec = cfg.section("sector")
    picture = sec["picture"]
    if picture not in ("dual", "link"):
        raise ConfigError(f"[sector] picture: unknown picture {picture!r}")
    if sec["format"] not in ("binary", "json", "both"):
        raise ConfigError(f"[sector] format: unknown format {sec['format']!r}")
    if sec["quotient"] and picture != "dual":
        raise ConfigError("[sector] quotient applies to the dual picture")

    if picture == "dual":
        basis = gauge.enumerate_sector(
            lattice, reference=sec["reference"],
            identify_global_flip=sec["quotient"],
            max_states=sec["max_states"])
    else:
        basis = gauge.enumerate_link_sector(
            lattice, reference=sec["reference"], max_states=sec["max_states"])

    files = []
    if sec["format"] in ("binary", "both"):
        path = _out_path(cfg, "sector.bin")
        basis.export_binary(path)
        files.append(os.path.basename(path))
    if sec["format"] in ("json", "both"):
        path = _out_path(cfg, "sector.json")
        basis.export_json(path)
        files.append(os.path.basename(path))
    meta = {
        "kind": lattice.kind,
        "nx": lattice.nx,
        "ny": lattice.ny,
        "picture": picture,
        "quotient": sec["quotient"],
        "reference": int(basis.states[0]),
        "dim": basis.dim,
        "files": files,
    }
    meta_path = _out_path(cfg, "sector.meta.json")
    _write_json(meta_path, meta, cfg)
    print(f"{picture} sector on {lattice.kind} {lattice.nx}x{lattice.ny}: "
          f"{basis.dim} states (reference {int(basis.states[0])})")
    print(f"wrote {meta_path}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# sweep


def _sweep_basis_and_builder(cfg: ExperimentConfig, lattice: LatticeSpec):
    model = cfg.section("model")
    name = model["name"]
    j = model["j"]
    pinning = model["pinning"]
    if name == "pxp":
        if lattice.kind != CHAIN:
            raise ConfigError("[model] pxp needs a chain lattice")
        if pinning != 0.0:
            raise ConfigError("[model] pinning applies to dual-rk only")
        basis = pxp_chain_basis(lattice.nx)

        def build(lam: float):
            return build_pxp_chain(lattice.nx, j, lam)

        return basis, build
    if name == "link-rk":
        if pinning != 0.0:
            raise ConfigError("[model] pinning applies to dual-rk only")
        basis = gauge.enumerate_link_sector(lattice)

        def build(lam: float):
            return build_original_rk(basis, j, lam)

        return basis, build
    if name == "dual-rk":
        if model["quotient"] and lattice.kind != PERIODIC_LADDER:
            raise ConfigError("[model] quotient applies to the periodic ladder")
        if model["quotient"] and pinning != 0.0:
            raise ConfigError("[model] pinning breaks the global-flip "
                              "quotient; use quotient = false")
        basis = gauge.enumerate_sector(
            lattice, identify_global_flip=model["quotient"])

        def build(lam: float):
            op = build_dual_rk(basis, j, lam)
            if pinning != 0.0:
                op = add_pinning(op, pinning)
            return op

        return basis, build
    raise ConfigError(f"[model] name: unknown model {name!r}")


def _sweep_point(build, basis, lam: float, tol: float, max_iter: int,
                 seed: int):
    op = build(lam)
    result = ground_state(op, tol=tol, max_iter=max_iter, seed=seed)
    rep = compute_report(result.vector, basis)
    row = (
        lam,
        result.energy,
        rep.value("z", MOMENTUM_ZERO),
        rep.value("z", MOMENTUM_PI_PI),
        rep.value("x", MOMENTUM_PI_PI),
        flippable_count(result.vector, basis),
    )
    return row, rep


def run_sweep(cfg: ExperimentConfig) -> int:
    lattice = _build_lattice(cfg)
    sweep = cfg.section("sweep")
    lambdas = sorted(sweep["lambdas"])
    if not lambdas:
        raise ConfigError("[sweep] lambdas must be a nonempty list")
    if sweep["tol"] <= 0 or sweep["max_iter"] < 1:
        raise ConfigError("[sweep] tol must be positive and max_iter >= 1")
    basis, build = _sweep_basis_and_builder(cfg, lattice)

    def point(lam: float):
        return _sweep_point(build, basis, lam, sweep["tol"],
                            sweep["max_iter"], cfg.seed)

    outcomes: list = [None] * len(lambdas)
    if cfg.threads > 1:
        with ThreadPoolExecutor(max_workers=cfg.threads) as pool:
            futures = {i: pool.submit(point, lam)
                       for i, lam in enumerate(lambdas)}
            for i, fut in futures.items():
                try:
                    outcomes[i] = fut.result()
                except NUMERICAL_ERRORS as exc:
                    outcomes[i] = exc
    else:
        for i, lam in enumerate(lambdas):
            try:
                outcomes[i] = point(lam)
            except NUMERICAL_ERRORS as exc:
                outcomes[i] = exc

    rows = []
    report_rows = []
    failures = 0
    for lam, outcome in zip(lambdas, outcomes):
        if isinstance(outcome, Exception):
            failures += 1
            print(f"warning: lambda={lam!r} failed: {outcome}",
                  file=sys.stderr)
            continue
        row, rep = outcome
        rows.append(row)
        for mu, kx, ky, val in rep.csv_rows():
            report_rows.append((lam, mu, kx, ky, val))

    csv_path = _out_path(cfg, "sweep.csv")
    _write_csv(csv_path, SWEEP_COLUMNS, rows, cfg)
    print(f"wrote {csv_path} ({len(rows)} of {len(lambdas)} points)")
    if sweep["report"]:
        rep_path = _out_path(cfg, "report.csv")
        _write_csv(rep_path, REPORT_COLUMNS, report_rows, cfg)
        print(f"wrote {rep_path}")
    return EXIT_NUMERICAL if failures else EXIT_OK


# ---------------------------------------------------------------------------
# evolve


def run_evolve(cfg: ExperimentConfig) -> int:
    lattice = _build_lattice(cfg)
    sol = _solve_geometry(cfg, lattice)
    if sol.geometry is None:
        raise ConfigError("[geometry] solution carries no lattice layout")
    ev = cfg.section("evolve")
    if ev["record_every"] < 1 or ev["krylov_dim"] < 2 or ev["step_tol"] <= 0:
        raise ConfigError("[evolve] record_every >= 1, krylov_dim >= 2 and "
                          "step_tol > 0 are required")
    try:
        pulse = PulseSpec(J=ev["j"], t_f=ev["t_f"], dt=ev["dt"],
                          shape=ev["shape"])
    except ValueError as exc:
        raise ConfigError(f"[evolve] {exc}")

    result = adiabatic_sweep(
        sol.geometry, pulse, ev["delta"],
        record_every=ev["record_every"], m=ev["krylov_dim"],
        step_tol=ev["step_tol"], initial_mask=ev["initial_mask"])

    traj_path = _out_path(cfg, "trajectory.csv")
    _write_csv(traj_path, TRAJECTORY_COLUMNS, result.rows.tolist(), cfg)
    diag = result.diagnostic
    doc = {
        "pulse": {"J": pulse.J, "t_f": pulse.t_f, "dt": pulse.step,
                  "shape": pulse.shape},
        "delta": ev["delta"],
        "final_fidelity": result.final_fidelity,
        "sector_weight": result.sector_weight,
        "final_norm": result.final_norm,
        "max_step_error": result.max_step_error,
        "rvbs": {
            "ratio": diag.ratio,
            "x_peak": diag.x_peak,
            "x_baseline": diag.x_baseline,
            "ratio_threshold": diag.ratio_threshold,
            "verdict": diag.verdict,
        },
        "report": result.report.to_json_dict(),
        "status": "ok",
    }
    final_path = _out_path(cfg, "final.json")
    _write_json(final_path, doc, cfg)
    print(f"final fidelity {result.final_fidelity!r}, "
          f"rvbs verdict {diag.verdict}")
    print(f"wrote {traj_path}")
    print(f"wrote {final_path}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# verify

_VERIFY_SQUARES = (LatticeSpec(OPEN_SQUARE, 2, 2),
                   LatticeSpec(OPEN_SQUARE, 3, 3))
_VERIFY_LADDERS = (LatticeSpec(PERIODIC_LADDER, 2, 2),
                   LatticeSpec(PERIODIC_LADDER, 4, 2))
_SPECTRUM_LATTICES = (LatticeSpec(OPEN_SQUARE, 2, 2),
                      LatticeSpec(OPEN_SQUARE, 3, 3),
                      LatticeSpec(OPEN_SQUARE, 4, 4),
                      LatticeSpec(PERIODIC_LADDER, 2, 2),
                      LatticeSpec(PERIODIC_LADDER, 4, 2),
                      LatticeSpec(PERIODIC_LADDER, 6, 2))
_SPECTRUM_LAMBDAS = (-1.0, 0.0, 0.5, 1.0)


def _check_gauss(tol: float) -> tuple[bool, str]:
    allowed = gauge.list_physical_vertex_configs()
    if len(allowed) != 6:
        return False, f"expected 6 of 16 vertex patterns, got {len(allowed)}"
    for lattice in _VERIFY_SQUARES:
        direct = sum(
            1 for m in range(1 << lattice.n_links)
            if not gauge.check_gauss_law(lattice, m))
        basis = gauge.enumerate_sector(lattice)
        if direct != basis.dim:
            return False, (f"{lattice.kind} {lattice.nx}x{lattice.ny}: "
                           f"direct count {direct} != sector {basis.dim}")
    for lattice in _VERIFY_SQUARES + _VERIFY_LADDERS:
        link = gauge.enumerate_link_sector(lattice)
        for m in link.states:
            bad = gauge.check_gauss_law(lattice, int(m))
            if bad:
                return False, (f"{lattice.kind} {lattice.nx}x{lattice.ny}: "
                               f"link state {int(m)} violates sites {bad}")
    return True, "vertex patterns 6/16; filtered counts and sectors agree"


def _dual_basis_matching_links(lattice: LatticeSpec):
    """Dual sector in bijection with the link sector.

    The periodic ladder maps two dual configurations (global-flip pair)
    onto every link configuration, so there the quotient basis is the
    faithful one; open lattices pin the flip via the frozen boundary.
    """
    quotient = lattice.kind == PERIODIC_LADDER
    return gauge.enumerate_sector(lattice, identify_global_flip=quotient)


def _check_duality(tol: float) -> tuple[bool, str]:
    checked = 0
    for lattice in _VERIFY_SQUARES + _VERIFY_LADDERS:
        dual = _dual_basis_matching_links(lattice)
        link = gauge.enumerate_link_sector(lattice)
        images = [gauge.from_dual(lattice, int(m)) for m in dual.states]
        if sorted(images) != sorted(int(m) for m in link.states):
            return False, (f"{lattice.kind} {lattice.nx}x{lattice.ny}: dual "
                           "images do not match the link sector")
        for m, img in zip(dual.states, images):
            if gauge.to_dual(lattice, img) != int(m):
                return False, (f"{lattice.kind} {lattice.nx}x{lattice.ny}: "
                               f"round trip failed on {int(m)}")
            for p in range(lattice.n_plaquettes):
                dual_ok = gauge.dual_plaquette_flippable(lattice, int(m), p)
                link_ok = gauge.plaquette_flippable(lattice, img, p)
                if dual_ok != link_ok:
                    return False, (f"flippability mismatch at plaquette {p} "
                                   f"on {lattice.kind} {lattice.nx}x{lattice.ny}")
                if dual_ok:
                    lhs = gauge.from_dual(
                        lattice, gauge.apply_dual_plaquette(lattice, int(m), p))
                    rhs = gauge.apply_plaquette(lattice, img, p)
                    if lhs != rhs:
                        return False, (f"intertwining failed at plaquette {p} "
                                       f"on {lattice.kind} "
                                       f"{lattice.nx}x{lattice.ny}")
                checked += 1
    return True, f"{checked} state/plaquette pairs intertwine"


def _check_hermiticity(tol: float) -> tuple[bool, str]:
    ladder = LatticeSpec(PERIODIC_LADDER, 4, 2)
    sol = solve_ladder_geometry(0.38, lattice=ladder)
    ops = [
        build_dual_rk(gauge.enumerate_sector(ladder), 1.0, 0.3),
        build_original_rk(gauge.enumerate_link_sector(ladder), 1.0, -0.7),
        build_rydberg_rk(gauge.full_dual_basis(ladder), 0.05 * sol.G, sol),
        build_effective_spin(sol.geometry, 0.05, delta=0.1),
        build_atom_level(
            solve_ladder_geometry(
                0.38, lattice=LatticeSpec(PERIODIC_LADDER, 2, 2)).geometry,
             1.0, -100.0),
        build_pxp_chain(8, 1.0, 0.5),
    ]
    worst = max(op.hermiticity_defect() for op in ops)
    if worst > tol:
        return False, f"hermiticity defect {worst!r} exceeds {tol!r}"
    return True, f"{len(ops)} builders, worst defect {worst!r}"


def _check_spectrum(tol: float) -> tuple[bool, str]:
    worst = 0.0
    for lattice in _SPECTRUM_LATTICES:
        dual = _dual_basis_matching_links(lattice)
        link = gauge.enumerate_link_sector(lattice)
        if dual.dim != link.dim:
            return False, (f"{lattice.kind} {lattice.nx}x{lattice.ny}: "
                           f"sector sizes differ ({dual.dim} vs {link.dim})")
        for lam in _SPECTRUM_LAMBDAS:
            ev_dual = dense_spectrum(build_dual_rk(dual, 1.0, lam))
            ev_link = dense_spectrum(build_original_rk(link, 1.0, lam))
            worst = max(worst, float(np.max(np.abs(ev_dual - ev_link))))
    if worst > tol:
        return False, f"spectra differ by {worst!r} (tol {tol!r})"
    return True, (f"{len(_SPECTRUM_LATTICES)} lattices x "
                  f"{len(_SPECTRUM_LAMBDAS)} lambdas, worst gap {worst!r}")


VERIFY_CHECKS = (
    ("gauss-law", _check_gauss),
    ("duality", _check_duality),
    ("hermiticity", _check_hermiticity),
    ("spectrum-equivalence", _check_spectrum),
)


def run_verify(cfg: ExperimentConfig) -> int:
    tol = cfg.section("verify")["tol"]
    if tol <= 0:
        raise ConfigError("[verify] tol must be positive")
    results = []
    all_ok = True
    for name, fn in VERIFY_CHECKS:
        start = time.perf_counter()
        try:
            ok, detail = fn(tol)
        except NUMERICAL_ERRORS as exc:
            ok, detail = False, f"raised {type(exc).__name__}: {exc}"
        elapsed = time.perf_counter() - start
        results.append({"name": name, "ok": ok, "detail": detail,
                        "seconds": round(elapsed, 3)})
        all_ok = all_ok and ok
        print(f"{'PASS' if ok else 'FAIL'} {name}: {detail}")
    if cfg.out_dir != ".":
        path = _out_path(cfg, "verify.json")
        _write_json(path, {"checks": results, "all_ok": all_ok}, cfg)
        print(f"wrote {path}")
    print(f"verify: {'all checks passed' if all_ok else 'CHECKS FAILED'}")
    return EXIT_OK if all_ok else EXIT_CHECK_FAILURE


# ---------------------------------------------------------------------------
# entry point

_RUNNERS = {
    "geometry": run_geometry,
    "sector": run_sector,
    "sweep": run_sweep,
    "evolve": run_evolve,
    "verify": run_verify,
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="rkgauge",
        description="Constrained lattice models on decorated pair arrays: "
                    "geometry solves, sector enumeration, ground-state "
                    "sweeps, adiabatic ramps, invariant verification.")
    sub = ap.add_subparsers(dest="command", required=True)
    helps = {
        "geometry": "solve a pair-array layout and export the couplings",
        "sector": "enumerate a constrained sector and export the basis",
        "sweep": "ground states and structure factors over a lambda grid",
        "evolve": "adiabatic ramp of the pair-array spin model",
        "verify": "run the duality / Gauss-law / hermiticity / spectrum "
                  "suites",
    }
    for name in SUBCOMMANDS:
        p = sub.add_parser(name, help=helps[name])
        p.add_argument("--config", required=True, metavar="PATH",
                       help="INI config file (key = value sections)")
        p.add_argument("--out", default=".", metavar="DIR",
                       help="output directory (default: current directory)")
        p.add_argument("--seed", type=int, default=None, metavar="U64",
                       help="override [experiment] seed")
        p.add_argument("--threads", type=int, default=None, metavar="N",
                       help="override [experiment] threads")
        p.add_argument("--no-timestamp", action="store_true",
                       help="omit the generated= header for byte-stable "
                            "output")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config, args)
        return _RUNNERS[args.command](cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NUMERICAL_ERRORS as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
