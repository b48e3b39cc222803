"""Command-line interface: spec ingestion, dispatch, and result emission.

Problem specs are JSON documents; results are emitted as JSON bundles and
CSV tables written atomically into the output directory. Re-running a
command with the same spec and seed reproduces every emitted byte: output
carries no timestamps, floats are formatted deterministically, and NaN is
rejected outright (infinities become the literal string "inf").

Exit codes: 0 success, 2 validation error, 3 solver non-convergence,
4 inapplicability (e.g. empty dual feasibility set).
"""

from __future__ import annotations

import argparse
import dataclasses
import hashlib
import json
import math
import os
import sys
import tempfile
from typing import Any, Optional

import numpy as np

from . import __version__, ba, dual, loglik, rdp
from .core import Channel, LogBase, Pmf, convert, entropy
from .errors import (
    ConvergenceError,
    InapplicableError,
    InfeasibleError,
    LlrdError,
    ValidationError,
)

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_NONCONVERGENCE = 3
EXIT_INAPPLICABLE = 4

# Built-in problem specs for the figure-reproduction command. The first is
# a Ber(0.25) source observed through a BSC(0.1); the second a Ber(0.35)
# source with a three-symbol conditioning alphabet.
FIGURE_SPECS: dict[str, dict] = {
    "fig2": {
        "name": "fig2",
        "units": "bits",
        "source": {"alphabet": ["0", "1"], "probs": [0.75, 0.25]},
        "channel": {
            "input_alphabet": ["u0", "u1"],
            "matrix": [[0.9, 0.1], [0.1, 0.9]],
        },
    },
    "fig3": {
        "name": "fig3",
        "units": "bits",
        "source": {"alphabet": ["0", "1"], "probs": [0.65, 0.35]},
        "channel": {
            "input_alphabet": ["u1", "u2", "u3"],
            "matrix": [[0.8, 0.4, 0.2], [0.2, 0.6, 0.8]],
        },
    },
}


@dataclasses.dataclass(frozen=True)
class ProblemSpec:
    """A validated problem description plus solver overrides."""

    name: str
    source: Pmf
    channel: Optional[Channel]
    distortion: Optional[loglik.DistortionMatrix]
    units: LogBase
    solver: dict
    sha256: str


class SpecError(ValidationError):
    """Spec document failed validation; message names field and index."""


def _expect(cond: bool, where: str, msg: str) -> None:
    if not cond:
        raise SpecError(f"{where}: {msg}")


def _number(value: Any, where: str, allow_inf: bool = False) -> float:
    if isinstance(value, str) and allow_inf and value.strip().lower() in ("inf", "+inf", "infinity"):
        return math.inf
    _expect(isinstance(value, (int, float)) and not isinstance(value, bool), where, f"expected a number, got {value!r}")
    val = float(value)
    _expect(allow_inf or math.isfinite(val), where, "must be finite")
    _expect(not math.isnan(val), where, "must not be NaN")
    return val


def _labels(value: Any, where: str) -> tuple[str, ...]:
    _expect(isinstance(value, list) and value, where, "expected a non-empty list of labels")
    return tuple(str(x) for x in value)


def _matrix(value: Any, where: str, allow_inf: bool = False) -> np.ndarray:
    _expect(isinstance(value, list) and value, where, "expected a non-empty list of rows")
    rows = []
    width = None
    for i, row in enumerate(value):
        _expect(isinstance(row, list) and row, f"{where}[{i}]", "expected a non-empty row")
        if width is None:
            width = len(row)
        _expect(len(row) == width, f"{where}[{i}]", f"row length {len(row)} != {width}")
        rows.append([_number(x, f"{where}[{i}][{j}]", allow_inf) for j, x in enumerate(row)])
    return np.array(rows, dtype=np.float64)


def parse_spec(doc: dict, override_units: Optional[str] = None) -> ProblemSpec:
    """Validate a spec document into core objects.

    Raises SpecError naming the offending field and index on any problem.
    """
    _expect(isinstance(doc, dict), "spec", "top level must be an object")
    name = str(doc.get("name", "unnamed"))
    unknown = set(doc) - {"name", "units", "source", "channel", "distortion", "solver"}
    _expect(not unknown, "spec", f"unknown fields {sorted(unknown)}")

    units_str = override_units or doc.get("units", "bits")
    _expect(units_str in ("bits", "nats"), "units", f"must be 'bits' or 'nats', got {units_str!r}")
    units = LogBase.BITS if units_str == "bits" else LogBase.NATURAL

    _expect("source" in doc, "source", "missing")
    src = doc["source"]
    _expect(isinstance(src, dict), "source", "must be an object")
    alphabet = _labels(src.get("alphabet"), "source.alphabet")
    probs = [_number(x, f"source.probs[{i}]") for i, x in enumerate(src.get("probs", []))]
    _expect(len(probs) == len(alphabet), "source.probs", f"{len(probs)} entries for {len(alphabet)} labels")
    try:
        source = Pmf(alphabet, np.array(probs))
    except ValidationError as exc:
        raise SpecError(f"source: {exc}") from exc

    channel = None
    if "channel" in doc:
        chd = doc["channel"]
        _expect(isinstance(chd, dict), "channel", "must be an object")
        in_labels = _labels(chd.get("input_alphabet"), "channel.input_alphabet")
        out_labels = (
            _labels(chd["output_alphabet"], "channel.output_alphabet")
            if "output_alphabet" in chd
            else alphabet
        )
        mat = _matrix(chd.get("matrix"), "channel.matrix")
        _expect(
            mat.shape == (len(out_labels), len(in_labels)),
            "channel.matrix",
            f"shape {mat.shape} does not match ({len(out_labels)}, {len(in_labels)})",
        )
        try:
            channel = Channel(in_labels, out_labels, mat)
        except ValidationError as exc:
            raise SpecError(f"channel: {exc}") from exc
        _expect(
            channel.output_alphabet == alphabet,
            "channel.output_alphabet",
            "must equal the source alphabet",
        )

    distortion = None
    if "distortion" in doc:
        dd = doc["distortion"]
        _expect(isinstance(dd, dict), "distortion", "must be an object")
        rec = _labels(dd.get("recon_alphabet"), "distortion.recon_alphabet")
        src_labels = (
            _labels(dd["source_alphabet"], "distortion.source_alphabet")
            if "source_alphabet" in dd
            else alphabet
        )
        ent = _matrix(dd.get("entries"), "distortion.entries", allow_inf=True)
        _expect(
            ent.shape == (len(src_labels), len(rec)),
            "distortion.entries",
            f"shape {ent.shape} does not match ({len(src_labels)}, {len(rec)})",
        )
        try:
            distortion = loglik.DistortionMatrix(src_labels, rec, ent)
        except ValidationError as exc:
            raise SpecError(f"distortion: {exc}") from exc
        _expect(
            distortion.source_alphabet == alphabet,
            "distortion.source_alphabet",
            "must equal the source alphabet",
        )

    solver = doc.get("solver", {})
    _expect(isinstance(solver, dict), "solver", "must be an object")
    unknown = set(solver) - {"tol", "max_iters", "seed"}
    _expect(not unknown, "solver", f"unknown fields {sorted(unknown)}")

    canonical = json.dumps(doc, sort_keys=True, separators=(",", ":"))
    sha = hashlib.sha256(canonical.encode()).hexdigest()
    return ProblemSpec(
        name=name,
        source=source,
        channel=channel,
        distortion=distortion,
        units=units,
        solver=dict(solver),
        sha256=sha,
    )


def load_spec(path: str, override_units: Optional[str] = None) -> ProblemSpec:
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise SpecError(f"spec file: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise SpecError(f"spec file is not valid JSON: {exc}") from exc
    return parse_spec(doc, override_units)


def _ba_config(spec: ProblemSpec) -> ba.BaConfig:
    return ba.BaConfig(
        tol=float(spec.solver.get("tol", 1e-10)),
        max_iters=int(spec.solver.get("max_iters", 10**5)),
    )


# ---------------------------------------------------------------------------
# emission helpers
# ---------------------------------------------------------------------------

def _fmt(x: float) -> str:
    if math.isnan(x):
        raise RuntimeError("refusing to emit NaN")
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return format(float(x), ".12g")


def _sanitize(obj: Any) -> Any:
    """Recursively replace non-finite floats; refuse NaN entirely."""
    if isinstance(obj, dict):
        return {k: _sanitize(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_sanitize(v) for v in obj]
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        obj = obj.item()
    if isinstance(obj, float):
        if math.isnan(obj):
            raise RuntimeError("refusing to emit NaN")
        if math.isinf(obj):
            return "inf" if obj > 0 else "-inf"
    return obj


def _atomic_write(path: str, data: str) -> None:
    directory = os.path.dirname(path) or "."
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".llrd-")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _write_bundle(out_dir: str, filename: str, command: str, spec: ProblemSpec, config: dict, results: dict) -> str:
    bundle = {
        "meta": {
            "tool": "llrd",
            "version": __version__,
            "command": command,
            "spec_name": spec.name,
            "spec_sha256": spec.sha256,
            "units": spec.units.value,
            "config": _sanitize(config),
        },
        "results": _sanitize(results),
    }
    path = os.path.join(out_dir, filename)
    _atomic_write(path, json.dumps(bundle, indent=2, sort_keys=True, allow_nan=False) + "\n")
    return path


def _write_curve_csv(out_dir: str, filename: str, rows: list[dict]) -> str:
    header = "D,R_loglik,R_logloss_bound,slope,converged"
    lines = [header]
    for row in rows:
        lines.append(
            ",".join(
                [
                    _fmt(row["D"]),
                    _fmt(row["R_loglik"]),
                    _fmt(row["R_logloss_bound"]),
                    _fmt(row["slope"]),
                    "1" if row["converged"] else "0",
                ]
            )
        )
    path = os.path.join(out_dir, filename)
    _atomic_write(path, "\n".join(lines) + "\n")
    return path


def _pmf_dict(p: Pmf) -> dict:
    return {label: float(prob) for label, prob in zip(p.alphabet, p.probs)}


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def cmd_analyze(spec: ProblemSpec, args) -> int:
    if spec.channel is None:
        raise SpecError("channel: required for 'analyze'")
    factor = spec.units.factor
    p, ch = spec.source, spec.channel
    fr = loglik.feasible_range(p, ch)
    rmin = loglik.rate_at_dmin(p, ch)
    rep = loglik.consistency_polytope(p, ch)
    consistency: dict[str, Any] = {"feasible": rep.feasible}
    if rep.feasible:
        collapsed = abs(rep.d_star_max - rep.d_star_min) <= 1e-9
        consistency.update(
            {
                "witness_prior": _pmf_dict(rep.witness_prior),
                "d_star_min": rep.d_star_min * factor,
                "d_star_max": rep.d_star_max * factor,
                "unique": collapsed,
                "witness_min": _pmf_dict(rep.witness_min),
                "witness_max": _pmf_dict(rep.witness_max),
            }
        )
        if collapsed:
            consistency["d_star"] = 0.5 * (rep.d_star_min + rep.d_star_max) * factor
    results = {
        "h_x": entropy(p, spec.units),
        "d_min": fr.d_min * factor,
        "d_max": fr.d_max * factor,
        "rate_at_d_min": rmin.rate * factor,
        "ml_sets": {x: list(t) for x, t in zip(p.alphabet, loglik.ml_sets(ch).members)},
        "consistency": consistency,
    }
    path = _write_bundle(args.out, "analyze.json", "analyze", spec, _config_echo(args), results)
    u = spec.units.value
    print(f"H(X) = {results['h_x']:.6f} {u}")
    print(f"D in [{results['d_min']:.6f}, {results['d_max']:.6f}] {u}")
    print(f"R(D_min) = {results['rate_at_d_min']:.6f} {u}")
    if rep.feasible:
        print(
            f"consistent: yes, D* in [{consistency['d_star_min']:.6f}, "
            f"{consistency['d_star_max']:.6f}] {u}"
        )
    else:
        print("consistent: no")
    print(f"wrote {path}")
    return EXIT_OK


def _curve_rows(spec: ProblemSpec, n_points: int) -> list[dict]:
    p, ch = spec.source, spec.channel
    d = loglik.loglik_distortion(ch)
    curve = ba.rd_curve(p, d, n_points=n_points, cfg=_ba_config(spec))
    h = entropy(p)
    factor = spec.units.factor
    rows = []
    for pt in curve.points:
        rows.append(
            {
                "D": pt.distortion * factor,
                "R_loglik": pt.rate * factor,
                "R_logloss_bound": max(h - pt.distortion, 0.0) * factor,
                "slope": pt.slope,
                "converged": pt.converged,
            }
        )
    return rows


def cmd_curve(spec: ProblemSpec, args) -> int:
    if spec.channel is None:
        raise SpecError("channel: required for 'curve'")
    rows = _curve_rows(spec, args.points)
    if all(not r["converged"] for r in rows):
        raise ConvergenceError("every curve point failed to converge")
    path = _write_curve_csv(args.out, "curve.csv", rows)
    print(f"wrote {path} ({len(rows)} rows)")
    return EXIT_OK


def cmd_dual(spec: ProblemSpec, args) -> int:
    if spec.distortion is None:
        raise SpecError("distortion: required for 'dual'")
    if args.distortion is None:
        raise SpecError("--distortion: required for 'dual'")
    p, d = spec.source, spec.distortion
    if args.lambda_min is not None or args.lambda_max is not None:
        lo = args.lambda_min if args.lambda_min is not None else 1e-2
        hi = args.lambda_max if args.lambda_max is not None else 1e2
        if not (0 < lo < hi):
            raise SpecError("--lambda-min/--lambda-max: need 0 < min < max")
        grid = tuple(float(x) for x in np.geomspace(lo, hi, args.lambda_points))
    else:
        grid = dual.default_lambda_grid(d, args.lambda_points)
    res = dual.dual_rdf(p, d, args.distortion, lam_grid=grid)
    verdicts = dual.lambda_feasible_set(p, d, grid)
    results = {
        "rate": res.rate * spec.units.factor,
        "lambda_star_nats": res.lam_star,
        "distortion": args.distortion,
        "mu": [float(x) for x in res.mu],
        "feasible_set_sample": [
            {"lambda": t.lam, "feasible": t.feasible} for t in verdicts
        ],
    }
    path = _write_bundle(args.out, "dual.json", "dual", spec, _config_echo(args), results)
    print(f"R({args.distortion}) = {results['rate']:.6f} {spec.units.value}")
    print(f"lambda* = {res.lam_star:.6f} nats")
    print(f"wrote {path}")
    return EXIT_OK


def cmd_translate(spec: ProblemSpec, args) -> int:
    if spec.distortion is None:
        raise SpecError("distortion: required for 'translate'")
    if args.lambda0 is None:
        raise SpecError("--lambda0: required for 'translate'")
    p, d = spec.source, spec.distortion
    tr = dual.translate_to_loglik(p, d, args.lambda0)
    cfg = _ba_config(spec)
    fr = loglik.distortion_range(p, d)
    span = fr.d_max - fr.d_min
    factor = spec.units.factor
    table = []
    for t in np.linspace(0.05, 0.95, 10):
        d_classical = fr.d_min + t * span
        classical = ba.rd_at_distortion(p, d, d_classical, cfg)
        d_tilde = tr.affine.forward(d_classical)
        translated = ba.rd_at_distortion(
            p, loglik.loglik_distortion(tr.channel), d_tilde, cfg
        )
        table.append(
            {
                "d_classical": d_classical,
                "rate_classical": classical.rate * factor,
                "d_tilde": d_tilde * factor,
                "rate_loglik": translated.rate * factor,
            }
        )
    results = {
        "lambda0": args.lambda0,
        "channel": {
            "input_alphabet": list(tr.channel.input_alphabet),
            "output_alphabet": list(tr.channel.output_alphabet),
            "matrix": [[float(x) for x in row] for row in tr.channel.matrix],
        },
        "affine": {"lam0": tr.affine.lam0, "offset_nats": tr.affine.offset},
        "equivalence_table": table,
    }
    path = _write_bundle(args.out, "translate.json", "translate", spec, _config_echo(args), results)
    print(f"translated channel is {len(tr.channel.output_alphabet)}x{len(tr.channel.input_alphabet)}")
    print(f"D~ = {tr.affine.lam0:.6f} * D + {tr.affine.offset:.6f} (nats)")
    print(f"wrote {path}")
    return EXIT_OK


def _is_scaled_hamming(d: loglik.DistortionMatrix) -> Optional[float]:
    """Off-diagonal constant c with zero diagonal, or None."""
    ent = d.entries
    n, m = ent.shape
    if n != m or n < 2:
        return None
    if np.any(np.diag(ent) != 0):
        return None
    off = ent[~np.eye(n, dtype=bool)]
    if not np.all(np.isfinite(off)):
        return None
    c = float(off[0])
    if c <= 0 or np.any(np.abs(off - c) > 1e-12):
        return None
    return c


def cmd_rdp(spec: ProblemSpec, args) -> int:
    if spec.distortion is None:
        raise SpecError("distortion: required for 'rdp'")
    if args.distortion is None:
        raise SpecError("--distortion: required for 'rdp'")
    p, d = spec.source, spec.distortion
    seed = int(args.seed if args.seed is not None else spec.solver.get("seed", 0))
    sol = rdp.solve_perfect_perception(p, d, args.distortion)
    hamming_c = _is_scaled_hamming(d)
    if sol.slope == 0.0:
        base = rdp.CpFactorization(
            b=np.ones((len(p.alphabet), 1)), residual=0.0, method="numeric"
        )
    elif hamming_c is not None:
        base = rdp.hamming_cp_factor(len(p.alphabet), sol.slope * hamming_c)
    else:
        v = rdp.cp_exponential_matrix(d, sol.slope)
        base = rdp.cp_factor_numeric(v, seed=seed)
    scaled = rdp.scale_factorization_to_coupling(sol.coupling, base, sol.potential)
    scheme = rdp.construct_latent(scaled, p.alphabet)
    report = rdp.verify_scheme(scheme, p, d, args.distortion, sol.rate)
    factor = spec.units.factor
    results = {
        "rate": sol.rate * factor,
        "slope_nats": sol.slope,
        "achieved_distortion": sol.distortion,
        "coupling": [[float(x) for x in row] for row in sol.coupling.matrix],
        "cp_method": scaled.method,
        "cp_residual": scaled.residual,
        "latent": {
            "size": scheme.p_z.size,
            "p_z": _pmf_dict(scheme.p_z),
            "target_distortion": scheme.target_distortion * factor,
            "mixture_residual": scheme.mixture_residual,
        },
        "checks": [
            {
                "name": c.name,
                "value": c.value,
                "reference": c.reference,
                "passed": c.passed,
            }
            for c in report.checks
        ],
        "all_passed": report.all_passed,
    }
    path = _write_bundle(args.out, "rdp.json", "rdp", spec, _config_echo(args), results)
    print(f"R({args.distortion}, perfect perception) = {results['rate']:.6f} {spec.units.value}")
    print(f"checks passed: {report.all_passed} {report.failing() or ''}")
    print(f"wrote {path}")
    return EXIT_OK if report.all_passed else EXIT_NONCONVERGENCE


def cmd_reproduce(args) -> int:
    figure = args.figure
    spec = parse_spec(FIGURE_SPECS[figure])
    rows = _curve_rows(spec, args.points)
    csv_path = _write_curve_csv(args.out, f"{figure}.csv", rows)
    p, ch = spec.source, spec.channel
    factor = spec.units.factor
    fr = loglik.feasible_range(p, ch)
    rep = loglik.consistency_polytope(p, ch)
    markers = {
        "d_min": fr.d_min * factor,
        "d_max": fr.d_max * factor,
        "h_x": entropy(p, spec.units),
    }
    if rep.feasible:
        markers["d_star_lo"] = rep.d_star_min * factor
        markers["d_star_hi"] = rep.d_star_max * factor
        if abs(rep.d_star_max - rep.d_star_min) <= 1e-9:
            markers["d_star"] = 0.5 * (rep.d_star_min + rep.d_star_max) * factor
    doc = {
        "figure": figure,
        "units": spec.units.value,
        "markers": _sanitize(markers),
    }
    markers_path = os.path.join(args.out, "markers.json")
    _atomic_write(markers_path, json.dumps(doc, indent=2, sort_keys=True, allow_nan=False) + "\n")
    print(f"wrote {csv_path} ({len(rows)} rows)")
    print(f"wrote {markers_path}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# argument parsing and dispatch
# ---------------------------------------------------------------------------

def _config_echo(args) -> dict:
    echo = {}
    for key in ("units", "points", "distortion", "lambda0", "seed", "figure",
                "lambda_min", "lambda_max", "lambda_points"):
        if hasattr(args, key) and getattr(args, key) is not None:
            echo[key] = getattr(args, key)
    return echo


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="llrd",
        description="Rate-distortion toolkit for the log-likelihood distortion",
    )
    parser.add_argument("--version", action="version", version=f"llrd {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(sp, spec_required=True):
        if spec_required:
            sp.add_argument("--spec", required=True, help="path to a JSON problem spec")
            sp.add_argument("--units", choices=["bits", "nats"], default=None,
                            help="override the spec's reporting units")
        sp.add_argument("--out", default=".", help="output directory")

    sp = sub.add_parser("analyze", help="entropy, feasible range, consistency, D*")
    common(sp)

    sp = sub.add_parser("curve", help="sweep the rate-distortion curve to CSV")
    common(sp)
    sp.add_argument("--points", type=int, default=50, help="number of slopes")

    sp = sub.add_parser("dual", help="single-parameter dual evaluation of R(D)")
    common(sp)
    sp.add_argument("--distortion", type=float, required=True)
    sp.add_argument("--lambda-min", dest="lambda_min", type=float, default=None)
    sp.add_argument("--lambda-max", dest="lambda_max", type=float, default=None)
    sp.add_argument("--lambda-points", dest="lambda_points", type=int, default=60)

    sp = sub.add_parser("translate", help="recast a classical problem as log-likelihood")
    common(sp)
    sp.add_argument("--lambda0", type=float, required=True)

    sp = sub.add_parser("rdp", help="perfect-perception pipeline")
    common(sp)
    sp.add_argument("--distortion", type=float, required=True)
    sp.add_argument("--seed", type=int, default=None)

    sp = sub.add_parser("reproduce", help="write the built-in figure data files")
    sp.add_argument("--figure", choices=sorted(FIGURE_SPECS), required=True)
    sp.add_argument("--points", type=int, default=50)
    sp.add_argument("--out", default=".")
    return parser


def main(argv: Optional[list[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "reproduce":
            return cmd_reproduce(args)
        spec = load_spec(args.spec, args.units)
        handler = {
            "analyze": cmd_analyze,
            "curve": cmd_curve,
            "dual": cmd_dual,
            "translate": cmd_translate,
            "rdp": cmd_rdp,
        }[args.command]
        return handler(spec, args)
    except (SpecError, ValidationError, InfeasibleError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except ConvergenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NONCONVERGENCE
    except InapplicableError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INAPPLICABLE
    except LlrdError as exc:  # pragma: no cover - catch-all for new subtypes
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
