"""Batch front door: ``holderweyl run <config.json>`` and ``holderweyl list``.

A run validates its JSON config, dispatches one experiment, and writes
``report.json``, ``rows.csv`` and (unless disabled) ``plot.svg`` into the
output directory.  Files are staged under temporary names and renamed only
once all of them are complete.  Exit status: 0 when every flag passes, 1
when some flag fails, 2 for an invalid config (nothing is written).
"""
from __future__ import annotations

import argparse
import copy
import json
import math
import os
import sys
import tempfile
from pathlib import Path

import jsonschema
import numpy as np

from . import experiments
from .errors import HolderWeylError, InvalidArgument, InvalidConfiguration
from .experiments import Flag, ScanReport
from .geometry import domain_from_dict, rasterize
from .operators import PotentialField, sample_potential
from .semiclassics import solve_parameters

__all__ = ["list_experiments", "load_config", "lambda_grid", "run", "render_svg", "main"]

CONFIG_SCHEMA = 1

# -- schemas --------------------------------------------------------------------------

_PROFILE = {
    "type": "object",
    "required": ["gamma", "amplitude"],
    "properties": {
        "gamma": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
        "amplitude": {"type": "number", "minimum": 0},
        "base": {"type": "integer", "minimum": 2},
        "terms": {"type": "integer", "minimum": 0},
        "offset": {"type": "number"},
    },
    "additionalProperties": False,
}

_DOMAIN = {
    "description": "Domain in length units.",
    "oneOf": [
        {"type": "object", "required": ["type"], "additionalProperties": False,
         "properties": {"type": {"const": "unit_square"}}},
        {"type": "object", "required": ["type", "width", "height"], "additionalProperties": False,
         "properties": {"type": {"const": "rectangle"}, "width": {"type": "number", "exclusiveMinimum": 0},
                        "height": {"type": "number", "exclusiveMinimum": 0}}},
        {"type": "object", "required": ["type", "radius"], "additionalProperties": False,
         "properties": {"type": {"const": "disk"}, "radius": {"type": "number", "exclusiveMinimum": 0}}},
        {"type": "object", "required": ["type", "profile"], "additionalProperties": False,
         "properties": {"type": {"const": "graph"}, "profile": _PROFILE,
                        "base": {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2},
                        "floor": {"type": "number"}}},
        {"type": "object", "required": ["type", "n_rooms"], "additionalProperties": False,
         "properties": {"type": {"const": "rooms_and_passages"}, "n_rooms": {"type": "integer", "minimum": 1}}},
    ],
}

_POTENTIAL = {
    "description": "Nonpositive potential in units of 1/length^2 (before the lambda scaling).",
    "oneOf": [
        {"type": "number", "maximum": 0},
        {"type": "object", "required": ["kind", "value"], "additionalProperties": False,
         "properties": {"kind": {"const": "constant"}, "value": {"type": "number", "maximum": 0}}},
        {"type": "object", "required": ["kind", "alpha"], "additionalProperties": False,
         "properties": {"kind": {"const": "distance_power"}, "alpha": {"type": "number", "exclusiveMinimum": 0},
                        "scale": {"type": "number", "minimum": 0}}},
        {"type": "object", "required": ["kind", "value", "x_split"], "additionalProperties": False,
         "properties": {"kind": {"const": "half"}, "value": {"type": "number", "maximum": 0},
                        "x_split": {"type": "number"}, "side": {"enum": ["left", "right"]}}},
        {"type": "object", "required": ["kind", "center", "radius", "depth"], "additionalProperties": False,
         "properties": {"kind": {"const": "bump"},
                        "center": {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2},
                        "radius": {"type": "number", "exclusiveMinimum": 0},
                        "depth": {"type": "number", "minimum": 0}}},
    ],
}

_LAMBDAS = {
    "description": "Spectral parameter grid (1/length^2): geometric {min, max, points} or an explicit list.",
    "oneOf": [
        {"type": "object", "required": ["min", "max", "points"], "additionalProperties": False,
         "properties": {"min": {"type": "number", "exclusiveMinimum": 0}, "max": {"type": "number"},
                        "points": {"type": "integer", "minimum": 2}}},
        {"type": "array", "items": {"type": "number"}, "minItems": 1},
    ],
}

_H = {"type": "number", "exclusiveMinimum": 0, "description": "grid spacing (length)"}

_PARAMETERS = {
    "type": "object",
    "description": "ParameterSet overrides: s > 1 fixes p_tilde; beta defaults to the placeholder rule.",
    "properties": {"s": {"type": "number", "exclusiveMinimum": 1}, "beta": {"type": "number", "exclusiveMinimum": 0},
                   "gamma": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1}},
    "additionalProperties": False,
}

_COMMON = {
    "schema": {"const": CONFIG_SCHEMA},
    "out": {"type": "string"},
    "seed": {"type": "integer", "minimum": 0},
    "plot": {"type": "boolean"},
}


def _schema(tag, required, properties):
    props = {"experiment": {"const": tag}, **_COMMON, **properties}
    return {
        "$schema": "http://json-schema.org/draft-07/schema#",
        "title": tag,
        "type": "object",
        "required": ["schema", "experiment", *required],
        "properties": props,
        "additionalProperties": False,
    }


_CATALOG = {
    "weyl_scan": (
        "Neumann counts against the leading Weyl term (potential zero).",
        _schema("weyl_scan", ["domain", "h", "lambdas"], {"domain": _DOMAIN, "h": _H, "lambdas": _LAMBDAS}),
        {"schema": 1, "experiment": "weyl_scan",
         "domain": {"type": "graph", "profile": {"gamma": 0.8, "amplitude": 0.1, "terms": 8, "offset": 1.0}},
         "h": 0.015625, "lambdas": {"min": 32, "max": 256, "points": 4}},
    ),
    "schrodinger_weyl_scan": (
        "Counts of -Delta^N + lambda V against the phase-space volume.",
        _schema("schrodinger_weyl_scan", ["domain", "potential", "h", "lambdas"],
                {"domain": _DOMAIN, "potential": _POTENTIAL, "h": _H, "lambdas": _LAMBDAS}),
        {"schema": 1, "experiment": "schrodinger_weyl_scan", "domain": {"type": "unit_square"},
         "potential": {"kind": "half", "value": -1, "x_split": 0.5}, "h": 0.015625, "lambdas": [50, 100, 200]},
    ),
    "splitting_check": (
        "Subadditivity of the split N(K + lam V) <= N((1-delta)K + lam V_n) + N(delta K + lam (V - V_n)).",
        _schema("splitting_check", ["domain", "potential", "h", "delta", "lambda"], {
            "domain": _DOMAIN, "potential": _POTENTIAL, "h": _H,
            "delta": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
            "lambda": {"type": "number", "minimum": 0},
            "truncation": {"type": "integer", "minimum": 1, "description": "n of the default approximant V_n"},
            "approximant": _POTENTIAL,
            "random_instances": {"type": "integer", "minimum": 0,
                                 "description": "extra seeded instances with random V <= V_n <= 0"},
            "strict": {"type": "boolean"},
        }),
        {"schema": 1, "experiment": "splitting_check", "domain": {"type": "unit_square"},
         "potential": {"kind": "distance_power", "alpha": 0.5}, "h": 0.0625, "delta": 0.5, "lambda": 50,
         "truncation": 4, "random_instances": 3, "seed": 7},
    ),
    "clr_scan": (
        "Boundedness proxy for N(lambda V)/lambda^(d/2) with the triple norm of V.",
        _schema("clr_scan", ["domain", "potential", "h", "lambdas", "parameters"], {
            "domain": _DOMAIN, "potential": _POTENTIAL, "h": _H, "lambdas": _LAMBDAS, "parameters": _PARAMETERS,
        }),
        {"schema": 1, "experiment": "clr_scan",
         "domain": {"type": "graph", "profile": {"gamma": 0.8, "amplitude": 0.1, "terms": 7, "offset": 1.0}},
         "potential": {"kind": "bump", "center": [0.5, 0.5], "radius": 0.3, "depth": 1.0},
         "h": 0.015625, "lambdas": {"min": 64, "max": 256, "points": 5}, "parameters": {"s": 2, "gamma": 0.8}},
    ),
    "blowup_scan": (
        "Exploratory: V = -dist^-alpha on a gamma-Hölder graph domain under h-refinement.",
        _schema("blowup_scan", ["gamma", "alpha", "h_sequence", "lambdas"], {
            "gamma": {"type": "number", "exclusiveMinimum": 0.5, "exclusiveMaximum": 1,
                      "description": "Hölder exponent of the boundary profile"},
            "alpha": {"type": "number", "exclusiveMinimum": 0,
                      "description": "blow-up exponent of V = -dist^-alpha"},
            "amplitude": {"type": "number", "minimum": 0},
            "h_sequence": {"type": "array", "items": _H, "minItems": 2},
            "lambdas": _LAMBDAS,
            "parameters": _PARAMETERS,
        }),
        {"schema": 1, "experiment": "blowup_scan", "gamma": 0.8, "alpha": 0.5, "h_sequence": [0.03125, 0.015625],
         "lambdas": {"min": 10, "max": 200, "points": 4}, "parameters": {"s": 50}},
    ),
    "rooms_probe": (
        "N(-Delta^N - lambda_small) along a growing chain of rooms and passages.",
        _schema("rooms_probe", ["n_rooms", "lambda_small", "h"], {
            "n_rooms": {"type": "array", "items": {"type": "integer", "minimum": 1}, "minItems": 1},
            "lambda_small": {"type": "number"},
            "h": _H,
        }),
        {"schema": 1, "experiment": "rooms_probe", "n_rooms": [1, 2], "lambda_small": 0.1, "h": 0.03125},
    ),
}


def list_experiments():
    """Catalog of experiment tags with their config schemas and an example config each."""
    return [
        {"experiment": tag, "description": desc, "schema": copy.deepcopy(schema), "example": copy.deepcopy(example)}
        for tag, (desc, schema, example) in _CATALOG.items()
    ]


# -- config handling ------------------------------------------------------------------


def load_config(source):
    """Parse and validate a config (path or dict); raises :class:`InvalidConfiguration`."""
    if isinstance(source, dict):
        config = copy.deepcopy(source)
    else:
        try:
            config = json.loads(Path(source).read_text())
        except (OSError, json.JSONDecodeError) as err:
            raise InvalidConfiguration(f"cannot read config: {err}") from err
    if not isinstance(config, dict):
        raise InvalidConfiguration("config must be a JSON object")
    tag = config.get("experiment")
    if tag not in _CATALOG:
        raise InvalidConfiguration(f"unknown experiment {tag!r}; known: {sorted(_CATALOG)}")
    try:
        jsonschema.validate(config, _CATALOG[tag][1])
    except jsonschema.ValidationError as err:
        path = "/".join(str(p) for p in err.absolute_path) or "<root>"
        raise InvalidConfiguration(f"{path}: {err.message}") from err
    if "lambdas" in config:
        lambda_grid(config["lambdas"])
    return config


def lambda_grid(spec):
    """Expand a geometric ``{min, max, points}`` grid or check an explicit list."""
    if isinstance(spec, dict):
        lo, hi, n = float(spec["min"]), float(spec["max"]), int(spec["points"])
        if not 0 < lo < hi or n < 2:
            raise InvalidConfiguration("geometric grid needs 0 < min < max and points >= 2")
        grid = np.geomspace(lo, hi, n).tolist()
        grid[0], grid[-1] = lo, hi
        return grid
    grid = [float(v) for v in spec]
    if not grid or any(b <= a for a, b in zip(grid, grid[1:])) or not all(math.isfinite(v) for v in grid):
        raise InvalidConfiguration("lambda grid must be finite and strictly increasing")
    return grid


def _parameters(config, gamma):
    p = config.get("parameters", {})
    return solve_parameters(2, p.get("gamma", gamma), p.get("s", 2.0), p.get("beta"))


def _random_split_instances(mask, count, seed):
    rng = np.random.default_rng(seed)
    for _ in range(count):
        v = -rng.uniform(0.0, 4.0, mask.n_cells)
        vn = v * rng.uniform(0.0, 1.0, mask.n_cells)
        yield PotentialField(v, "random"), PotentialField(vn, "random"), float(rng.uniform(0.05, 0.95))


def _splitting_report(config, seed):
    domain = domain_from_dict(config["domain"])
    h = config["h"]
    mask = rasterize(domain, h)
    V = sample_potential(mask, config["potential"])
    if "approximant" in config:
        Vn = sample_potential(mask, config["approximant"])
    else:
        Vn = int(config.get("truncation", max(1, round(0.25 / h))))
    lam = float(config["lambda"])
    strict = bool(config.get("strict", False))
    instances = [(V, Vn, float(config["delta"]))]
    instances += list(_random_split_instances(mask, int(config.get("random_instances", 0)), seed))
    rows = []
    for k, (v, vn, delta) in enumerate(instances):
        res = experiments.splitting_check(mask, v, vn, delta, lam, strict=strict)
        rows.append({"instance": k, "delta": delta, "lhs": res.lhs, "rhs1": res.rhs1, "rhs2": res.rhs2,
                     "n_clipped": res.n_clipped})
    holds = all(r["lhs"] <= r["rhs1"] + r["rhs2"] for r in rows)
    return ScanReport(
        "splitting_check",
        ("instance", "delta", "lhs", "rhs1", "rhs2", "n_clipped"),
        rows,
        params={"h": h, "lambda": lam, "domain": config["domain"], "seed": seed},
        flags=[Flag("split_subadditive", "lhs <= rhs1 + rhs2 on every instance", holds)],
    )


def _dispatch(config, seed, threads):
    tag = config["experiment"]
    if tag == "weyl_scan":
        return experiments.weyl_scan(domain_from_dict(config["domain"]), config["h"],
                                     lambda_grid(config["lambdas"]), workers=threads)
    if tag == "schrodinger_weyl_scan":
        return experiments.schrodinger_weyl_scan(domain_from_dict(config["domain"]), config["potential"],
                                                 config["h"], lambda_grid(config["lambdas"]), workers=threads)
    if tag == "splitting_check":
        return _splitting_report(config, seed)
    if tag == "clr_scan":
        domain = domain_from_dict(config["domain"])
        gamma = getattr(getattr(domain, "profile", None), "gamma", 0.8)
        params = _parameters(config, min(gamma, 0.999))
        return experiments.clr_scan(domain, config["potential"], params, config["h"],
                                    lambda_grid(config["lambdas"]), workers=threads)
    if tag == "blowup_scan":
        p = config.get("parameters", {})
        params = solve_parameters(2, config["gamma"], p.get("s", 50.0), p.get("beta"))
        return experiments.blowup_scan(config["gamma"], config["alpha"], config["h_sequence"],
                                       lambda_grid(config["lambdas"]), amplitude=config.get("amplitude", 0.1),
                                       params=params, workers=threads)
    if tag == "rooms_probe":
        return experiments.rooms_probe(config["n_rooms"], config["lambda_small"], config["h"], workers=threads)
    raise InvalidConfiguration(f"unknown experiment {tag!r}")


# -- SVG ------------------------------------------------------------------------------


def render_svg(report, width=640, height=420):
    """Log-log polyline of ``ratio`` (or ``count``) against the first column."""
    xname = report.columns[0]
    yname = next((c for c in ("ratio", "count") if c in report.columns), None)
    pts = [(float(r[xname]), float(r[yname])) for r in report.rows] if yname else []
    pts = [(x, y) for x, y in pts if x > 0 and y > 0 and math.isfinite(y)]
    margin = 60
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>',
        f'<text x="{width / 2:.1f}" y="20" text-anchor="middle" font-size="14">{report.experiment}</text>',
    ]
    if pts:
        lx = [math.log10(x) for x, _ in pts]
        ly = [math.log10(y) for _, y in pts]
        x0, x1 = min(lx), max(lx)
        y0, y1 = min(ly), max(ly)
        if x1 == x0:
            x0, x1 = x0 - 0.5, x1 + 0.5
        if y1 == y0:
            y0, y1 = y0 - 0.5, y1 + 0.5

        def sx(v):
            return margin + (v - x0) / (x1 - x0) * (width - 2 * margin)

        def sy(v):
            return height - margin - (v - y0) / (y1 - y0) * (height - 2 * margin)

        out.append(f'<line x1="{margin}" y1="{height - margin}" x2="{width - margin}" y2="{height - margin}" '
                   'stroke="black"/>')
        out.append(f'<line x1="{margin}" y1="{margin}" x2="{margin}" y2="{height - margin}" stroke="black"/>')
        for v in range(math.ceil(x0), math.floor(x1) + 1):
            out.append(f'<text x="{sx(v):.1f}" y="{height - margin + 16}" text-anchor="middle" '
                       f'font-size="11">1e{v}</text>')
        for v in range(math.ceil(y0), math.floor(y1) + 1):
            out.append(f'<text x="{margin - 6}" y="{sy(v) + 4:.1f}" text-anchor="end" font-size="11">1e{v}</text>')
        path = " ".join(f"{sx(a):.2f},{sy(b):.2f}" for a, b in zip(lx, ly))
        out.append(f'<polyline points="{path}" fill="none" stroke="steelblue" stroke-width="2"/>')
        for a, b in zip(lx, ly):
            out.append(f'<circle cx="{sx(a):.2f}" cy="{sy(b):.2f}" r="3" fill="steelblue"/>')
        out.append(f'<text x="{width / 2:.1f}" y="{height - 15}" text-anchor="middle" font-size="12">'
                   f'{xname} (log)</text>')
        out.append(f'<text x="15" y="{height / 2:.1f}" transform="rotate(-90 15 {height / 2:.1f})" '
                   f'text-anchor="middle" font-size="12">{yname} (log)</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


# -- running --------------------------------------------------------------------------


def _write_atomically(out_dir, files):
    out_dir.mkdir(parents=True, exist_ok=True)
    staged = []
    try:
        for name, text in files.items():
            fd, tmp = tempfile.mkstemp(prefix=f".{name}.", dir=out_dir)
            with os.fdopen(fd, "w", newline="") as fh:
                fh.write(text)
            staged.append((tmp, out_dir / name))
    except BaseException:
        for tmp, _ in staged:
            os.unlink(tmp)
        raise
    for tmp, final in staged:
        os.replace(tmp, final)


def run(config, out=None, seed=None, threads=None):
    """Validate, run and write one experiment; returns ``(exit_status, report)``.

    An invalid config raises :class:`InvalidConfiguration` before anything
    touches the disk.
    """
    config = load_config(config)
    seed = int(seed if seed is not None else config.get("seed", 0))
    threads = int(threads or 1)
    out_dir = Path(out or config.get("out", "out"))
    try:
        report = _dispatch(config, seed, threads)
    except InvalidConfiguration:
        raise
    except (InvalidArgument, ValueError) as err:
        raise InvalidConfiguration(str(err)) from err
    report.params = {**report.params, "config": config, "seed": seed}
    files = {"report.json": report.to_json() + "\n", "rows.csv": report.to_csv()}
    if config.get("plot", True):
        files["plot.svg"] = render_svg(report)
    _write_atomically(out_dir, files)
    return (0 if report.passed else 1), report


def _parser():
    shared = argparse.ArgumentParser(add_help=False)
    shared.add_argument("--out", default=argparse.SUPPRESS, help="output directory (default: config 'out' or ./out)")
    shared.add_argument("--seed", type=int, default=argparse.SUPPRESS, help="seed for randomized sweeps")
    shared.add_argument("--threads", type=int, default=argparse.SUPPRESS, help="worker threads for scans")
    parser = argparse.ArgumentParser(prog="holderweyl", parents=[shared], description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    run_p = sub.add_parser("run", parents=[shared], help="run the experiment described by a JSON config")
    run_p.add_argument("config", help="path to config.json")
    sub.add_parser("list", parents=[shared], help="print the experiment catalog as JSON")
    return parser


def main(argv=None):
    args = _parser().parse_args(argv)
    if args.command == "list":
        json.dump(list_experiments(), sys.stdout, indent=2)
        sys.stdout.write("\n")
        return 0
    threads = getattr(args, "threads", None)
    if threads is not None and threads < 1:
        print(json.dumps({"error": "invalid-configuration", "message": "--threads must be >= 1"}), file=sys.stderr)
        return 2
    try:
        status, report = run(args.config, getattr(args, "out", None), getattr(args, "seed", None), threads)
    except InvalidConfiguration as err:
        print(json.dumps({"error": "invalid-configuration", "message": str(err)}), file=sys.stderr)
        return 2
    except HolderWeylError as err:
        print(json.dumps({"error": type(err).__name__, "message": str(err)}), file=sys.stderr)
        return 2
    summary = {"experiment": report.experiment, "passed": report.passed,
               "failed_flags": [f.name for f in report.flags if not f.passed]}
    print(json.dumps(summary))
    return status


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
