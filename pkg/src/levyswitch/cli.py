"""Command line front end.

Numbers live in a JSON run config; flags only pick the command, the output
path, the seed and the mode.  Every command writes CSV.

Exit codes: 0 success, 2 bad config or input, 3 a standing assumption fails,
4 a numerical failure (including a failed ``verify`` check).
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
from dataclasses import replace
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np

from .errors import AssumptionViolation, ConfigError, DomainError, NumericalError
from .levy_model import Family, model_from_dict
from .numerics import QuadConfig
from .scale_fn import scale_table
from .simulator import SimConfig, estimate_exit_laplace, estimate_potential, estimate_ruin
from .switch_core import (ExitQuery, SwitchSpec, exit_down_one_sided, exit_down_two_sided,
                          exit_up_one_sided, exit_up_two_sided, potential_density, ruin_probability)
from .verify import VerifyPlan, format_measured, run_checks

log = logging.getLogger("levyswitch")

ROW_FIELDS = ("quantity", "q", "lambda", "b", "a", "x", "y", "value", "std_error", "n", "seed",
              "method")
EXIT_MODES = ("up2", "down2", "up1", "down1")
POTENTIAL_MODES = ("i", "ii", "iii", "iv")
POTENTIAL_NAMES = {"i": "two-sided", "ii": "below-only", "iii": "above-only", "iv": "none"}

# -- config schema -------------------------------------------------------------

_NUM = {"type": "number"}
_POS = {"type": "number", "exclusiveMinimum": 0}
_NONNEG = {"type": "number", "minimum": 0}
_GRID = {
    "oneOf": [
        {"type": "array", "items": {"type": "number"}, "minItems": 1},
        {"type": "object", "additionalProperties": False,
         "required": ["start", "stop", "num"],
         "properties": {"start": _NUM, "stop": _NUM, "num": {"type": "integer", "minimum": 1}}},
    ]
}
_NONNEG_GRID = {
    "oneOf": [
        {"type": "array", "items": _NONNEG, "minItems": 1},
        _GRID["oneOf"][1],
    ]
}
_MODEL = {
    "oneOf": [
        {"type": "object", "additionalProperties": False, "required": ["family", "c", "eta", "rho"],
         "properties": {"family": {"const": "cramer_lundberg_exp"}, "c": _POS, "eta": _POS,
                        "rho": _POS}},
        {"type": "object", "additionalProperties": False, "required": ["family", "mu", "sigma"],
         "properties": {"family": {"const": "brownian_drift"}, "mu": _NUM, "sigma": _POS}},
    ]
}

CONFIG_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "additionalProperties": False,
    "required": ["spec"],
    "properties": {
        "spec": {
            "type": "object", "additionalProperties": False,
            "required": ["model_x", "model_y", "barrier_b", "lambda"],
            "properties": {"model_x": _MODEL, "model_y": _MODEL, "barrier_b": _NONNEG,
                           "lambda": _POS},
        },
        "quad": {
            "type": "object", "additionalProperties": False,
            "properties": {"h": _POS, "quad_tol": _POS, "root_tol": _POS, "tail_eps": _POS,
                           "t_max": _POS, "gl_order": {"type": "integer", "minimum": 2},
                           "panel_width": _POS},
        },
        "sim": {
            "type": "object", "additionalProperties": False,
            "properties": {"n_paths": {"type": "integer", "minimum": 1},
                           "seed": {"type": "integer", "minimum": 0},
                           "t_cap": _POS, "h_sim": _POS, "bridge_correction": {"type": "boolean"}},
        },
        "exit": {
            "type": "object", "additionalProperties": False, "required": ["q", "x", "a"],
            "properties": {"mode": {"enum": list(EXIT_MODES)}, "q": _NONNEG_GRID, "x": _GRID,
                           "a": _POS},
        },
        "potential": {
            "type": "object", "additionalProperties": False, "required": ["q", "x", "y"],
            "properties": {"mode": {"enum": list(POTENTIAL_MODES)}, "q": _NONNEG, "x": _NUM,
                           "a": _POS, "y": _GRID, "bins": _GRID},
        },
        "ruin": {
            "type": "object", "additionalProperties": False, "required": ["delta", "x"],
            "properties": {"model_x": _MODEL, "delta": _NONNEG, "barrier_b": _NONNEG,
                           "lambda": _POS, "x": _GRID},
        },
        "dump_scale": {
            "type": "object", "additionalProperties": False, "required": ["q", "x_max", "step"],
            "properties": {"model": {"enum": ["x", "y"]}, "q": _NONNEG, "x_max": _POS,
                           "step": _POS},
        },
        "verify": {
            "type": "object", "additionalProperties": False,
            "properties": {"q": _POS, "a": _POS, "q_grid": _NONNEG_GRID, "x_grid": _GRID,
                           "far_a": _POS, "delta": _NONNEG, "ruin_x": _NONNEG,
                           "limit_model_x": _MODEL, "limit_model_y": _MODEL, "limit_q": _POS,
                           "limit_levels": _GRID},
        },
    },
}


def default_config_text() -> str:
    return resources.files("levyswitch").joinpath("data/default_config.json").read_text()


def load_config(path: str | None) -> dict:
    """Read and schema-validate a config; ``None`` loads the shipped default."""
    if path is None:
        text, where = default_config_text(), "<default config>"
    else:
        p = Path(path)
        if not p.is_file():
            raise ConfigError(f"config file not found: {path}")
        text, where = p.read_text(), path
    try:
        cfg = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{where} is not valid JSON: {exc}") from None
    try:
        jsonschema.validate(cfg, CONFIG_SCHEMA)
    except jsonschema.ValidationError as exc:
        loc = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"{where}: {loc}: {exc.message}") from None
    return cfg


def grid(block) -> list[float]:
    if isinstance(block, dict):
        return [float(v) for v in np.linspace(block["start"], block["stop"], block["num"])]
    if isinstance(block, list):
        return [float(v) for v in block]
    return [float(block)]


def build_spec(cfg: dict) -> SwitchSpec:
    s = cfg["spec"]
    return SwitchSpec(model_x=model_from_dict(s["model_x"]), model_y=model_from_dict(s["model_y"]),
                      barrier_b=float(s["barrier_b"]), lam=float(s["lambda"]))


def build_quad(cfg: dict) -> QuadConfig:
    return QuadConfig(**cfg.get("quad", {}))


def build_sim(cfg: dict, seed: int | None) -> SimConfig:
    sim = SimConfig(**cfg.get("sim", {}))
    return sim if seed is None else replace(sim, seed=seed)


def _block(cfg: dict, name: str) -> dict:
    if name not in cfg:
        raise ConfigError(f"config has no '{name}' block")
    return cfg[name]


# -- output --------------------------------------------------------------------

def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (int, np.integer)) and not isinstance(v, bool):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def write_csv(rows: list[dict], fields, out: str | None) -> None:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=list(fields), lineterminator="\n")
    w.writeheader()
    for row in rows:
        w.writerow({k: _fmt(row.get(k)) for k in fields})
    text = buf.getvalue()
    if out is None:
        sys.stdout.write(text)
    else:
        Path(out).write_text(text)


def _row(quantity, q, lam, b, a, x, y, value, method, std_error=None, n=None, seed=None) -> dict:
    return {"quantity": quantity, "q": q, "lambda": lam, "b": b, "a": a, "x": x, "y": y,
            "value": value, "std_error": std_error, "n": n, "seed": seed, "method": method}


# -- commands ------------------------------------------------------------------

def _exit_value(spec, mode, q, x, a, quad) -> float:
    if mode == "up2":
        return exit_up_two_sided(spec, ExitQuery(x0=x, a=a, q=q), quad)
    if mode == "down2":
        return exit_down_two_sided(spec, ExitQuery(x0=x, a=a, q=q), quad)
    if mode == "up1":
        return exit_up_one_sided(spec, q, x, a, quad)
    return exit_down_one_sided(spec, q, x, quad)


def cmd_exit(cfg: dict, mode: str | None) -> list[dict]:
    blk = _block(cfg, "exit")
    mode = mode or blk.get("mode", "up2")
    if mode not in EXIT_MODES:
        raise ConfigError(f"exit mode must be one of {EXIT_MODES}, got {mode!r}")
    spec, quad = build_spec(cfg), build_quad(cfg)
    a = float(blk["a"])
    rows = []
    for q in grid(blk["q"]):
        for x in grid(blk["x"]):
            val = _exit_value(spec, mode, q, x, a, quad)
            rows.append(_row(f"exit_{mode}", q, spec.lam, spec.barrier_b,
                             None if mode == "down1" else a, x, None, val, "analytic"))
    return rows


def cmd_potential(cfg: dict, mode: str | None) -> list[dict]:
    blk = _block(cfg, "potential")
    mode = mode or blk.get("mode", "i")
    if mode not in POTENTIAL_MODES:
        raise ConfigError(f"potential mode must be one of {POTENTIAL_MODES}, got {mode!r}")
    spec, quad = build_spec(cfg), build_quad(cfg)
    a = blk.get("a")
    if mode in ("i", "iii") and a is None:
        raise ConfigError(f"potential mode {mode} needs an upper level 'a'")
    q, x = float(blk["q"]), float(blk["x"])
    dens = potential_density(spec, mode, q, x, None if a is None else float(a), quad)
    ys = np.asarray(grid(blk["y"]))
    vals = np.atleast_1d(dens(ys))
    keep_a = a if mode in ("i", "iii") else None
    return [_row(f"potential_{mode}", q, spec.lam, spec.barrier_b, keep_a, x, float(y), float(v),
                 "analytic") for y, v in zip(ys, vals)]


def _ruin_params(cfg: dict):
    blk = _block(cfg, "ruin")
    mx = model_from_dict(blk["model_x"]) if "model_x" in blk else model_from_dict(cfg["spec"]["model_x"])
    b = float(blk.get("barrier_b", cfg["spec"]["barrier_b"]))
    lam = float(blk.get("lambda", cfg["spec"]["lambda"]))
    return mx, float(blk["delta"]), b, lam, grid(blk["x"])


def cmd_ruin(cfg: dict) -> list[dict]:
    mx, delta, b, lam, xs = _ruin_params(cfg)
    quad = build_quad(cfg)
    vals = np.atleast_1d(ruin_probability(mx, delta, b, lam, np.asarray(xs), quad))
    rows = [_row("ruin", 0.0, lam, b, None, x, None, float(v), "analytic") for x, v in zip(xs, vals)]
    if delta == 0.0 and mx.family is Family.CRAMER_LUNDBERG_EXP:
        c, eta, rho = mx.params
        for x in xs:
            v = eta / (c * rho) * np.exp(-(rho - eta / c) * max(x, 0.0)) if x >= 0 else 1.0
            rows.append(_row("ruin", 0.0, lam, b, None, x, None, float(v), "classical"))
    return rows


def cmd_simulate(cfg: dict, mode: str | None, sim: SimConfig) -> list[dict]:
    mode = mode or "up2"
    if mode == "ruin":
        mx, delta, b, lam, xs = _ruin_params(cfg)
        rows = []
        for x in xs:
            est = estimate_ruin(mx, delta, b, lam, x, sim)
            rows.append(_row("ruin", 0.0, lam, b, None, x, None, est.mean, "mc", est.std_error,
                             est.n_paths, est.seed))
        return rows
    spec = build_spec(cfg)
    if mode in EXIT_MODES:
        blk = _block(cfg, "exit")
        a = float(blk["a"])
        rows = []
        for q in grid(blk["q"]):
            for x in grid(blk["x"]):
                est = estimate_exit_laplace(spec, ExitQuery(x0=x, a=a, q=q), sim, mode)
                rows.append(_row(f"exit_{mode}", q, spec.lam, spec.barrier_b,
                                 None if mode == "down1" else a, x, None, est.mean, "mc",
                                 est.std_error, est.n_paths, est.seed))
        return rows
    if mode in POTENTIAL_MODES:
        blk = _block(cfg, "potential")
        if "bins" not in blk:
            raise ConfigError("simulating a potential needs 'bins' in the potential block")
        bins = np.asarray(grid(blk["bins"]))
        a = blk.get("a")
        if mode in ("i", "iii") and a is None:
            raise ConfigError(f"potential mode {mode} needs an upper level 'a'")
        q, x = float(blk["q"]), float(blk["x"])
        query = ExitQuery(x0=x, a=float(a) if a is not None else max(x, spec.barrier_b, 1.0), q=q)
        est = estimate_potential(spec, query, sim, bins, POTENTIAL_NAMES[mode])
        mids = 0.5 * (bins[:-1] + bins[1:])
        keep_a = a if mode in ("i", "iii") else None
        return [_row(f"potential_{mode}", q, spec.lam, spec.barrier_b, keep_a, x, float(y),
                     float(m), "mc", float(s), est.n_paths, est.seed)
                for y, m, s in zip(mids, est.mean, est.std_error)]
    raise ConfigError(f"unknown simulate mode {mode!r}")


def cmd_dump_scale(cfg: dict) -> list[dict]:
    blk = _block(cfg, "dump_scale")
    spec, quad = build_spec(cfg), build_quad(cfg)
    model = spec.model_y if blk.get("model", "x") == "y" else spec.model_x
    table = scale_table(model, float(blk["q"]), quad)
    x, w, z = table.dump(float(blk["x_max"]), float(blk["step"]))
    return [{"x": float(a), "W": float(b), "Z": float(c)} for a, b, c in zip(x, w, z)]


def verify_plan(cfg: dict, sim: SimConfig) -> VerifyPlan:
    blk = cfg.get("verify", {})
    kw = {}
    for key in ("q", "a", "far_a", "delta", "ruin_x", "limit_q"):
        if key in blk:
            kw[key] = float(blk[key])
    for key in ("q_grid", "x_grid", "limit_levels"):
        if key in blk:
            kw[key] = tuple(grid(blk[key]))
    if "limit_model_x" in blk:
        kw["limit_x"] = model_from_dict(blk["limit_model_x"])
    if "limit_model_y" in blk:
        kw["limit_y"] = model_from_dict(blk["limit_model_y"])
    return VerifyPlan(spec=build_spec(cfg), quad=build_quad(cfg), sim=sim, **kw)


def cmd_verify(cfg: dict, sim: SimConfig) -> tuple[list[dict], bool]:
    results = run_checks(verify_plan(cfg, sim))
    rows = [{"check": r.name, "measured": format_measured(r.measured),
             "tolerance": f"{r.tolerance:g}", "status": "pass" if r.passed else "FAIL",
             "detail": r.detail} for r in results]
    return rows, all(r.passed for r in results)


VERIFY_FIELDS = ("check", "measured", "tolerance", "status", "detail")


# -- entry point ---------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="levyswitch",
                                     description="Exit identities for a Poisson-switched Lévy process.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, helptext in (("exit", "exit Laplace transforms"),
                           ("potential", "potential densities"),
                           ("ruin", "ruin probability with switched dividends"),
                           ("simulate", "Monte Carlo counterparts"),
                           ("verify", "run the invariant suite"),
                           ("dump-scale", "tabulate W and Z")):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("--config", help="JSON run config (default: the shipped config)")
        p.add_argument("--out", help="output CSV path (default: stdout)")
        p.add_argument("--seed", type=int, help="override sim.seed")
        p.add_argument("--format", choices=["csv"], default="csv")
        if name in ("exit", "potential", "simulate"):
            p.add_argument("--mode", help="functional to compute")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config)
        if args.seed is not None and not (0 <= args.seed < 2 ** 64):
            raise ConfigError(f"--seed must be a 64-bit unsigned integer, got {args.seed}")
        sim = build_sim(cfg, args.seed)
        if args.command == "verify":
            rows, ok = cmd_verify(cfg, sim)
            write_csv(rows, VERIFY_FIELDS, args.out)
            if not ok:
                failed = ", ".join(r["check"] for r in rows if r["status"] != "pass")
                print(f"levyswitch: verify failed: {failed}", file=sys.stderr)
                return 4
            return 0
        if args.command == "dump-scale":
            write_csv(cmd_dump_scale(cfg), ("x", "W", "Z"), args.out)
            return 0
        if args.command == "exit":
            rows = cmd_exit(cfg, args.mode)
        elif args.command == "potential":
            rows = cmd_potential(cfg, args.mode)
        elif args.command == "ruin":
            rows = cmd_ruin(cfg)
        else:
            rows = cmd_simulate(cfg, args.mode, sim)
        write_csv(rows, ROW_FIELDS, args.out)
        return 0
    except (ConfigError, DomainError) as exc:
        print(f"levyswitch: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    except AssumptionViolation as exc:
        print(f"levyswitch: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3
    except NumericalError as exc:
        print(f"levyswitch: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
