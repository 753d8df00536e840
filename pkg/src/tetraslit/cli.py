"""Command-line interface.

Every output embeds the resolved configuration, so passing an output file
back through ``--config`` reproduces it.  Exit codes: 0 success, 2 invalid
configuration, 3 no solutions found, 4 I/O failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import labgeom, sicsearch, tomo, wavefield

EXIT_OK, EXIT_CONFIG, EXIT_NO_SOLUTIONS, EXIT_IO = 0, 2, 3, 4
OUTPUT_DIR_ENV = "TETRASLIT_OUTPUT_DIR"

_NOT_CONFIG = {"command", "config", "out", "func", "verbose"}

log = logging.getLogger("tetraslit")


class ConfigError(ValueError):
    pass


class NoSolutions(RuntimeError):
    pass


# --- helpers ---------------------------------------------------------------


def _reference_design(delta_xi=sicsearch.DEFAULT_DELTA_XI):
    sol = sicsearch.reference_solution()
    return sol, sicsearch.balanced_delta_for(sol), delta_xi


def design_record(sol, delta, delta_xi) -> dict:
    povm = sicsearch.build_povm(sol, delta, delta_xi)
    return {
        "solution": sicsearch.solution_record(sol),
        "delta": delta,
        "delta_xi": delta_xi,
        "xi": sicsearch.detector_positions(sol, delta).tolist(),
        "povm": {
            "weights": povm.weights.tolist(),
            "vectors": povm.vectors.tolist(),
            "closure_residual": povm.closure_residual,
        },
    }


def design_from_record(rec: dict):
    try:
        sol = sicsearch.solution_from_record(rec["solution"])
        return sol, float(rec["delta"]), float(rec["delta_xi"])
    except (KeyError, TypeError) as exc:
        raise ConfigError(f"malformed design record: {exc}") from exc


def _read_json(path) -> dict:
    try:
        with open(path) as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: not valid JSON ({exc})") from exc


def _load_design(args):
    if args.design:
        rec = _read_json(args.design)
        return design_from_record(rec.get("design", rec))
    if args.preset == "reference":
        return _reference_design(args.delta_xi)
    raise ConfigError("need --design FILE or --preset reference")


def parse_state(spec: str, vectors=None) -> np.ndarray:
    """Bloch vector from ``"x,y,z"`` or a name: mixed, slit1, slit2, vertex1..vertex4."""
    spec = spec.strip().lower()
    if spec == "mixed":
        return np.zeros(3)
    if spec in ("slit1", "slit2"):
        return wavefield.BlochState.slit(int(spec[-1])).r.copy()
    if spec.startswith("vertex"):
        if vectors is None:
            raise ConfigError("vertex states need a design")
        try:
            return np.array(vectors[int(spec[6:]) - 1], dtype=float)
        except (ValueError, IndexError) as exc:
            raise ConfigError(f"unknown vertex {spec!r}") from exc
    try:
        r = np.array([float(v) for v in spec.split(",")])
    except ValueError as exc:
        raise ConfigError(f"cannot parse state {spec!r}") from exc
    if r.shape != (3,):
        raise ConfigError("state vector needs three components")
    if np.linalg.norm(r) > 1 + wavefield.PHYSICAL_ATOL:
        raise ConfigError(f"unphysical state, |r| = {np.linalg.norm(r):.6g}")
    return r


def _resolved_config(args) -> dict:
    cfg = {k: v for k, v in vars(args).items() if k not in _NOT_CONFIG}
    return {"command": args.command, **cfg}


def _csv_text(header: list[str], rows, config: dict) -> str:
    buf = io.StringIO()
    buf.write(f"# tetraslit {config['command']}\n")
    buf.write("# config: " + json.dumps(config, sort_keys=True) + "\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([repr(float(v)) for v in row])
    return buf.getvalue()


def _json_text(payload: dict, config: dict) -> str:
    return json.dumps({"config": config, **payload}, indent=2, sort_keys=True) + "\n"


def _emit(args, text: str, suffix: str):
    target = args.out
    outdir = os.environ.get(OUTPUT_DIR_ENV)
    if target is None and outdir:
        target = f"{args.command}.{suffix}"
    if target is None or target == "-":
        sys.stdout.write(text)
        return
    path = Path(target)
    if outdir and not path.is_absolute():
        path = Path(outdir) / path
    path.write_text(text)
    log.info("wrote %s", path)


def _tabular(args, header, rows, meta=None):
    config = _resolved_config(args)
    if args.format == "json":
        payload = {"columns": header, "rows": [[float(v) for v in r] for r in rows]}
        if meta:
            payload.update(meta)
        _emit(args, _json_text(payload, config), "json")
    else:
        _emit(args, _csv_text(header, rows, config), "csv")


def _record(args, payload):
    if args.format == "csv":
        raise ConfigError(f"{args.command} writes JSON records only")
    _emit(args, _json_text(payload, _resolved_config(args)), "json")


# --- commands --------------------------------------------------------------


_SEARCH_DEFAULTS = {None: (0.0, 5.0, 2000), "reference": (0.0, 11.0, 20_000)}


def cmd_search(args):
    for name, value in zip(("zeta_min", "zeta_max", "starts"), _SEARCH_DEFAULTS[args.preset]):
        if getattr(args, name) is None:
            setattr(args, name, value)
    if not (0 <= args.zeta_min < args.zeta_max):
        raise ConfigError("need 0 <= --zeta-min < --zeta-max")
    if args.starts < 1 or args.tol <= 0:
        raise ConfigError("--starts must be >= 1 and --tol positive")
    sols = sicsearch.search_tetrahedra((args.zeta_min, args.zeta_max), args.starts, args.seed, args.tol)
    _record(args, {"solutions": [sicsearch.solution_record(s) for s in sols]})
    if not sols:
        raise NoSolutions(f"no tetrahedron found for zeta in ({args.zeta_min}, {args.zeta_max}]")


def cmd_design(args):
    if args.catalog and args.preset:
        raise ConfigError("give --catalog or --preset, not both")
    if args.catalog:
        cat = _read_json(args.catalog)
        try:
            rec = cat["solutions"][args.index]
        except (KeyError, IndexError) as exc:
            raise ConfigError(f"no solution {args.index} in {args.catalog}") from exc
        sol = sicsearch.solution_from_record(rec)
    else:
        sol = sicsearch.reference_solution()
    delta = args.delta if args.delta is not None else sicsearch.balanced_delta_for(sol)
    if delta is None:
        raise ConfigError("solution is not mirror-symmetric; pass --delta explicitly")
    _record(args, {"design": design_record(sol, delta, args.delta_xi)})


def _plane_from(args):
    if args.preset == "reference":
        sol, delta, _ = _reference_design()
        zeta = args.zeta if args.zeta is not None else sol.zeta
        deltas = args.delta or [delta]
        return sol, zeta, deltas
    if args.zeta is None or not args.delta:
        raise ConfigError("need --zeta and --delta, or --preset reference")
    return None, args.zeta, args.delta


def _with_detectors(args, xi, sol, delta):
    if sol is not None and args.include_detectors:
        return np.union1d(xi, sicsearch.detector_positions(sol, delta))
    return xi


def cmd_pattern(args):
    sol, zeta, deltas = _plane_from(args)
    if zeta < 0 or min(deltas) <= 0:
        raise ConfigError("need zeta >= 0 and delta > 0")
    r = parse_state(args.state, sol.bloch_vectors if sol is not None else None)
    grid = np.linspace(args.xi_min, args.xi_max, args.samples)
    rows = []
    for d in deltas:
        xi = _with_detectors(args, grid, sol, d)
        env = wavefield.intensity_envelope(xi, zeta, d)
        pdf = wavefield.detection_pdf(r, xi, zeta, d)
        rows.extend(zip(np.full_like(xi, d), xi, env, pdf))
    _tabular(args, ["delta", "xi", "envelope", "pdf"], rows)


def cmd_bloch_curve(args):
    sol, zeta, deltas = _plane_from(args)
    if len(deltas) != 1:
        raise ConfigError("bloch-curve takes a single --delta")
    xi = _with_detectors(args, np.linspace(args.xi_min, args.xi_max, args.samples), sol, deltas[0])
    s = wavefield.bloch_of_xi(xi, zeta, deltas[0])
    _tabular(args, ["xi", "s_x", "s_y", "s_z"], np.column_stack([xi, s]))


def cmd_simulate(args):
    sol, delta, delta_xi = _load_design(args)
    layout = sicsearch.layout_for(sol, delta, delta_xi)
    r = parse_state(args.state, sol.bloch_vectors)
    if (args.n_total is None) == (args.n_accepted is None):
        raise ConfigError("give exactly one of --n-total or --n-accepted")
    if args.positions_csv:
        if args.n_total is None:
            raise ConfigError("--positions-csv needs --n-total")
        pos = tomo.sample_positions(r, layout, args.n_total, args.seed)
        np.savetxt(args.positions_csv, pos, fmt="%.17g", header="xi", comments="")
        counts = tomo.bin_counts(pos, layout)
    elif args.n_total is not None:
        counts = tomo.sample_counts(r, layout, args.n_total, args.seed)
    else:
        counts = tomo.sample_accepted_counts(r, layout, args.n_accepted, args.seed)
    _record(
        args,
        {
            "counts": counts.to_dict(),
            "acceptance": counts.acceptance,
            "state": r.tolist(),
            "design": design_record(sol, delta, delta_xi),
        },
    )


def cmd_reconstruct(args):
    data = _read_json(args.counts)
    try:
        counts = tomo.CountRecord.from_dict(data["counts"])
        embedded = design_from_record(data["design"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"{args.counts}: malformed counts file ({exc})") from exc
    sol, delta, delta_xi = embedded
    if args.design:
        other = design_from_record(_read_json(args.design).get("design", {}))
        if not (np.allclose(other[0].w, sol.w) and np.isclose(other[0].zeta, sol.zeta)
                and np.isclose(other[1], delta) and np.isclose(other[2], delta_xi)):
            raise ConfigError("design file does not match the design the counts were taken with")
    if counts.accepted == 0:
        raise ConfigError("no accepted photons")
    povm = sicsearch.build_povm(sol, delta, delta_xi)
    truth = data.get("state")
    reports = [
        tomo.reconstruct(counts, povm, "linear", truth, balance=args.balance),
        tomo.reconstruct(counts, povm, "mle", truth),
    ]
    _record(
        args,
        {
            "counts": counts.to_dict(),
            "acceptance": counts.acceptance,
            "reports": [rep.to_dict() for rep in reports],
            "state": truth,
        },
    )


def cmd_geometry(args):
    if args.table2 or (args.preset == "reference" and not args.wavelength and not args.a):
        pairs = [p for p, _ in labgeom.TABLE2]
    else:
        if not args.wavelength or not args.a or len(args.wavelength) != len(args.a):
            raise ConfigError("give matching --lambda and --a values, or --table2")
        pairs = list(zip(args.wavelength, args.a))
    if any(lam <= 0 or a <= 0 for lam, a in pairs):
        raise ConfigError("lengths must be positive")
    if args.design:
        sol, delta, _ = design_from_record(_read_json(args.design).get("design", {}))
    else:
        sol, delta, _ = _reference_design()
    geoms = [labgeom.to_physical(sol, delta, lam, a) for lam, a in pairs]
    _tabular(
        args,
        list(labgeom.CSV_COLUMNS),
        [g.table_row() for g in geoms],
        {"geometries": [g.to_dict() for g in geoms]},
    )


# --- parser ----------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tetraslit", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    commands = parser.add_subparsers(dest="command", required=True)

    def add(name, help_):
        p = commands.add_parser(name, help=help_)
        p.add_argument("--config", help="JSON file of defaults (an earlier output works)")
        p.add_argument("--out", help="output path; '-' or omitted for stdout")
        p.add_argument("--seed", type=int, default=7)
        p.add_argument("--format", choices=("json", "csv"))
        return p

    p = add("search", "multistart tetrahedron search")
    p.add_argument("--preset", choices=("reference",), help="full catalogue settings: zeta in (0, 11], 20000 starts")
    p.add_argument("--zeta-min", type=float)
    p.add_argument("--zeta-max", type=float)
    p.add_argument("--starts", type=int)
    p.add_argument("--tol", type=float, default=1e-12)
    p.set_defaults(func=cmd_search, format="json")

    p = add("design", "balanced detector layout for one solution")
    p.add_argument("--catalog", help="search output to pick the solution from")
    p.add_argument("--preset", choices=("reference",), help="the zeta = 3.4678 solution (the default)")
    p.add_argument("--index", type=int, default=0)
    p.add_argument("--delta", type=float, help="slit half-separation (default: balanced)")
    p.add_argument("--delta-xi", type=float, default=sicsearch.DEFAULT_DELTA_XI)
    p.set_defaults(func=cmd_design, format="json")

    for name, func, help_ in (
        ("pattern", cmd_pattern, "envelope and detection density on a grid"),
        ("bloch-curve", cmd_bloch_curve, "Bloch vectors along the detection plane"),
    ):
        p = add(name, help_)
        p.add_argument("--preset", choices=("reference",))
        p.add_argument("--zeta", type=float)
        p.add_argument("--delta", type=float, action="append")
        p.add_argument("--xi-min", type=float, default=-10.0)
        p.add_argument("--xi-max", type=float, default=10.0)
        p.add_argument("--samples", type=int, default=2001)
        p.add_argument("--include-detectors", action="store_true", help="add the four detector positions")
        if name == "pattern":
            p.add_argument("--state", default="mixed")
        p.set_defaults(func=func, format="csv")

    p = add("simulate", "simulate photon counts")
    p.add_argument("--design")
    p.add_argument("--preset", choices=("reference",))
    p.add_argument("--delta-xi", type=float, default=sicsearch.DEFAULT_DELTA_XI)
    p.add_argument("--state", default="mixed")
    p.add_argument("--n-total", type=int)
    p.add_argument("--n-accepted", type=int)
    p.add_argument("--positions-csv", help="also write every sampled position here")
    p.set_defaults(func=cmd_simulate, format="json")

    p = add("reconstruct", "estimate the state from counts")
    p.add_argument("--counts", required=True)
    p.add_argument("--design", help="optional design file checked against the counts file")
    p.add_argument("--balance", action="store_true", help="artificially balance counts for the linear estimate")
    p.set_defaults(func=cmd_reconstruct, format="json")

    p = add("geometry", "laboratory geometry table")
    p.add_argument("--lambda", dest="wavelength", type=float, action="append", help="wavelength [m]")
    p.add_argument("--a", type=float, action="append", help="slit width [m]")
    p.add_argument("--table2", action="store_true", help="use the four published (lambda, a) pairs")
    p.add_argument("--preset", choices=("reference",), help="same as --table2 when no pairs are given")
    p.add_argument("--design")
    p.set_defaults(func=cmd_geometry, format="csv")
    return parser


def _config_defaults(path) -> dict:
    cfg = _read_json(path)
    cfg = cfg.get("config", cfg)
    return {k: v for k, v in cfg.items() if k not in _NOT_CONFIG}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        if args.config:
            defaults = _config_defaults(args.config)
            sub = parser._subparsers._group_actions[0].choices[args.command]
            sub.set_defaults(**defaults)
            args = parser.parse_args(argv)
        args.func(args)
    except NoSolutions as exc:
        log.warning("%s", exc)
        return EXIT_NO_SOLUTIONS
    except ConfigError as exc:
        log.error("error: %s", exc)
        return EXIT_CONFIG
    except OSError as exc:
        log.error("I/O error: %s", exc)
        return EXIT_IO
    except ValueError as exc:
        log.error("error: %s", exc)
        return EXIT_CONFIG
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
