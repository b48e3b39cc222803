#!/usr/bin/env python3
"""Render a rate-distortion overlay figure from toolkit output files.

Reads the documented curve CSV (columns ``D``, ``R_loglik``,
``R_logloss_bound``) plus an optional ``markers.json``, and draws the
log-likelihood curve against the log-loss line with vertical markers at
the range endpoints and the special operating points. No computation
happens here beyond plotting; all math lives in the main toolkit.

Usage:
    python render.py --curve fig2.csv --markers markers.json --out fig2.png
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from typing import Optional

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402

REQUIRED_COLUMNS = ("D", "R_loglik", "R_logloss_bound")

# pinned so identical inputs yield identical image bytes
STYLE = {
    "figure.figsize": (6.4, 4.2),
    "figure.dpi": 120,
    "savefig.dpi": 120,
    "font.size": 10,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "svg.hashsalt": "llrd-plots",
}


class CurveFileError(Exception):
    """The curve or marker file violates the documented schema."""


def load_curve(path: str) -> dict[str, list[float]]:
    """Parse the curve CSV, insisting on the documented columns."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        fields = reader.fieldnames or []
        for col in REQUIRED_COLUMNS:
            if col not in fields:
                raise CurveFileError(f"missing column {col!r} in {path}")
        data: dict[str, list[float]] = {col: [] for col in REQUIRED_COLUMNS}
        for lineno, row in enumerate(reader, start=2):
            for col in REQUIRED_COLUMNS:
                raw = row.get(col)
                if raw is None:
                    raise CurveFileError(
                        f"missing value for column {col!r} at line {lineno} in {path}"
                    )
                try:
                    data[col].append(float(raw))
                except ValueError as exc:
                    raise CurveFileError(
                        f"non-numeric value {raw!r} in column {col!r} "
                        f"at line {lineno} in {path}"
                    ) from exc
    if not data["D"]:
        raise CurveFileError(f"no data rows in {path}")
    ds = data["D"]
    if any(b <= a for a, b in zip(ds, ds[1:])):
        raise CurveFileError(f"column 'D' is not strictly increasing in {path}")
    return data


def load_markers(path: Optional[str]) -> tuple[dict[str, float], Optional[str]]:
    """Read the marker file; an absent path or empty document means none."""
    if path is None:
        return {}, None
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise CurveFileError(f"marker file {path} is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise CurveFileError(f"marker file {path} must contain an object")
    markers = doc.get("markers", {})
    if not isinstance(markers, dict):
        raise CurveFileError(f"'markers' in {path} must be an object")
    out = {}
    for key, value in markers.items():
        if not isinstance(value, (int, float)):
            raise CurveFileError(f"marker {key!r} in {path} is not numeric")
        out[str(key)] = float(value)
    units = doc.get("units")
    return out, str(units) if units is not None else None


def render(
    curve_path: str,
    markers_path: Optional[str],
    out_path: str,
    units: Optional[str] = None,
) -> None:
    data = load_curve(curve_path)
    markers, marker_units = load_markers(markers_path)
    units = units or marker_units or "bits"

    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        ax.plot(
            data["D"],
            data["R_loglik"],
            color="#0072bd",
            lw=1.8,
            label="log-likelihood RDF",
        )
        if "h_x" in markers:
            h = markers["h_x"]
            ax.plot(
                [0.0, h],
                [h, 0.0],
                color="#d95319",
                lw=1.4,
                ls="--",
                label="log-loss line H(X) - D",
            )
        else:
            ax.plot(
                data["D"],
                data["R_logloss_bound"],
                color="#d95319",
                lw=1.4,
                ls="--",
                label="log-loss bound",
            )
        for key, label in (("d_min", "D_min"), ("d_max", "D_max")):
            if key in markers:
                ax.axvline(markers[key], color="0.45", lw=0.9, ls=":")
                ax.annotate(
                    label,
                    xy=(markers[key], ax.get_ylim()[1]),
                    xytext=(2, -10),
                    textcoords="offset points",
                    fontsize=8,
                    color="0.3",
                )
        lo, hi = markers.get("d_star_lo"), markers.get("d_star_hi")
        if lo is not None and hi is not None and hi - lo > 1e-9:
            ax.axvspan(lo, hi, color="#77ac30", alpha=0.18, label="special points D*")
        elif "d_star" in markers:
            ax.axvline(
                markers["d_star"], color="#77ac30", lw=1.2, ls="-.", label="D*"
            )
        ax.set_xlabel(f"distortion D ({units})")
        ax.set_ylabel(f"rate R ({units})")
        ax.set_ylim(bottom=0.0)
        ax.set_xlim(left=0.0)
        ax.legend(loc="upper right")
        fig.tight_layout()
        if out_path.lower().endswith(".png"):
            fig.savefig(out_path, metadata={"Software": None})
        else:
            fig.savefig(out_path)
        plt.close(fig)


def main(argv: Optional[list[str]] = None) -> int:
    parser = argparse.ArgumentParser(
        prog="render", description="Overlay figure from toolkit CSV output"
    )
    parser.add_argument("--curve", required=True, help="curve CSV path")
    parser.add_argument("--markers", default=None, help="markers JSON path (optional)")
    parser.add_argument("--out", required=True, help="output image path")
    parser.add_argument("--units", default=None, help="axis unit label override")
    args = parser.parse_args(argv)
    try:
        render(args.curve, args.markers, args.out, args.units)
    except (CurveFileError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
