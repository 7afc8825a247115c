"""Command-line driver: ``bellcv <command> --config run.json [--out path]``.

Exit codes: 0 success, 1 invariant failure, 2 configuration error,
3 numeric budget failure.
"""
from __future__ import annotations

import argparse
import datetime as _dt
import json
import math
import sys

import numpy as np

from . import __version__
from ._backend import BACKEND
from .chsh import ChshEngine, ChshSettings, ProbabilityError
from .config import ConfigError, RunConfig, default_config, load_config_file
from .explore import MODES, ScanSpec, default_seeds, misalignment_scan, optimize_chsh, scan_chsh
from .grids import Axis
from .numerics import QuadratureError, RecurrenceError
from .propagation import CompletenessError, SamplingError
from .states import TruncationError
from .validation import Check, run_suite
from .wigner import WignerGrid, default_axes, negativity_scan, wigner_product_4d

EXIT_OK, EXIT_INVARIANT, EXIT_CONFIG, EXIT_BUDGET = 0, 1, 2, 3


def _header(command: str, cfg: RunConfig, args, extra=()):
    lines = [f"bellcv {__version__} {command}", f"config: {cfg.to_json()}", f"backend: {BACKEND}"]
    lines += list(extra)
    if not args.no_timestamp:
        lines.append(f"timestamp: {_dt.datetime.now(_dt.timezone.utc).isoformat(timespec='seconds')}")
    return lines


def _emit(text: str, args):
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _axes(args, defaults):
    """--grid values override the per-axis defaults in order."""
    grids = [Axis.parse(g) for g in (args.grid or [])]
    if len(grids) > len(defaults):
        raise ConfigError(f"at most {len(defaults)} --grid flags apply to this command")
    return grids + list(defaults[len(grids):])


def _axis_from(section, key, fallback: Axis) -> Axis:
    return Axis(*section[key]) if key in section else fallback


def cmd_validate(cfg: RunConfig, args) -> int:
    try:
        state = cfg.build_state()
    except TruncationError as exc:
        check = Check("tail_certificate", math.inf, cfg.budget.tail_mass_limit)
        report = {"passed": False, "failures": [check.name], "checks": [check.as_dict()], "detail": str(exc),
                  "required_truncation": exc.required_n_max + 1}
        print(check.line())
        print(f"  {exc}")
        if args.out:
            with open(args.out, "w", encoding="utf-8") as fh:
                json.dump(report, fh, indent=2, sort_keys=True)
        return EXIT_BUDGET
    checks = [Check("tail_certificate", state.tail_mass, cfg.budget.tail_mass_limit)]
    checks += run_suite(state, cfg.optics)
    for c in checks:
        print(c.line())
    failures = [c.name for c in checks if not c.passed]
    report = {
        "passed": not failures,
        "failures": failures,
        "checks": [c.as_dict() for c in checks],
        "truncation": state.size,
        "header": _header("validate", cfg, args),
    }
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            json.dump(report, fh, indent=2, sort_keys=True)
    return EXIT_OK if not failures else EXIT_INVARIANT


def cmd_wigner(cfg: RunConfig, args) -> int:
    sec = cfg.section("wigner")
    part = args.part or sec.get("part", "minus")
    printed = bool(sec.get("printed", False))
    src = cfg.state_spec
    form = "as printed in the literature" if printed else "consistent with the amplitude"
    if part == "product":
        # slice through the origin: W(x1 = x, x2 = 0, k1 = k, k2 = 0)
        ax, ak = default_axes(src, "minus")
        dflt = (Axis(ax.lo * math.sqrt(2), ax.hi * math.sqrt(2), ax.step * math.sqrt(2)),
                Axis(ak.lo * math.sqrt(2), ak.hi * math.sqrt(2), ak.step * math.sqrt(2)))
        x_axis, k_axis = _axes(args, (_axis_from(sec, "x", dflt[0]), _axis_from(sec, "k", dflt[1])))
        X, K = np.meshgrid(x_axis.values(), k_axis.values(), indexing="ij")
        grid = WignerGrid(x_axis, k_axis, np.asarray(wigner_product_4d(src, X, 0.0, K, 0.0, printed=printed)), "product")
        desc = "W(x1=x, x2=0, k1=k, k2=0) = W_plus(x_plus, k_plus) * W_minus(x_minus, k_minus)"
        verdict = None
    else:
        dflt = default_axes(src, part)
        x_axis, k_axis = _axes(args, (_axis_from(sec, "x", dflt[0]), _axis_from(sec, "k", dflt[1])))
        grid, verdict = negativity_scan(src, x_axis, k_axis, part=part, printed=printed)
        desc = f"W_{part}(x_{part}, k_{part})"
    extra = [
        f"function: {desc}",
        f"form: {form}",
        f"sigma_plus_mm: {src.sigma_plus!r}",
        f"sigma_minus_mm: {src.sigma_minus!r}",
        f"min_value: {grid.min_value!r} at (x, k) = {grid.min_location}",
    ]
    if verdict is not None:
        extra.append(f"verdict: {verdict.kind.value} (negativity fraction {verdict.negativity_fraction!r})")
    _emit(grid.to_csv(header_lines=_header("wigner", cfg, args, extra)), args)
    return EXIT_OK


def _scan_spec(cfg: RunConfig, args, default_axis=Axis(-10.0, 10.0, 0.5)) -> ScanSpec:
    sec = cfg.section("scan")
    z1, z2 = _axes(args, (_axis_from(sec, "z1", default_axis), _axis_from(sec, "z2", default_axis)))
    return ScanSpec(
        args.mode or sec.get("mode", "symmetric_pair"),
        z1,
        z2,
        za_prime=sec.get("za_prime_mm", 0.0),
        zb_prime=sec.get("zb_prime_mm", 0.0),
        dx1=sec.get("dx1_mm", 0.0),
        dx2=sec.get("dx2_mm", 0.0),
    )


def cmd_chsh_scan(cfg: RunConfig, args) -> int:
    spec = _scan_spec(cfg, args)
    state = cfg.build_state()
    result = scan_chsh(state, spec, optics=cfg.optics, workers=cfg.workers)
    i, j = result.best()
    extra = [f"mode: {spec.mode}", f"truncation: {state.size}", f"best: s_max={result.s_max[i, j]!r} at "
             f"{json.dumps(result.settings_at(i, j).as_dict(), sort_keys=True)}"]
    _emit(result.to_csv(header_lines=_header("chsh-scan", cfg, args, extra)), args)
    return EXIT_OK


def cmd_chsh_opt(cfg: RunConfig, args) -> int:
    sec = cfg.section("optimize")
    state = cfg.build_state()
    engine = ChshEngine(state, cfg.optics)
    seed_scan = None
    if "seeds" in sec:
        seeds = [tuple(s) for s in sec["seeds"]]
    else:
        axis = Axis(*sec["seed_axis"]) if "seed_axis" in sec else Axis(-10.0, 10.0, 0.5)
        spec = _scan_spec(cfg, args, axis)
        seeds, scan = default_seeds(engine, spec=spec, count=sec.get("seed_count", 3), workers=cfg.workers)
        seed_scan = {"mode": spec.mode, "z1": spec.z1.as_list(), "z2": spec.z2.as_list(),
                     "max_s_max": float(scan.s_max.max())}
    opt = optimize_chsh(
        engine,
        bounds=sec.get("bounds", ((-20.0, 20.0),) * 4),
        seeds=seeds,
        max_evals=sec.get("max_evals", 3000),
        restarts=sec.get("restarts", 3),
    )
    out = {"header": _header("chsh-opt", cfg, args), "truncation": state.size, "seed_scan": seed_scan}
    out.update(opt.summary())
    _emit(json.dumps(out, indent=2, sort_keys=True) + "\n", args)
    return EXIT_OK


def cmd_misalign(cfg: RunConfig, args) -> int:
    sec = cfg.section("misalign")
    if args.base:
        vals = [float(v) for v in args.base.split(",")]
        if len(vals) != 4:
            raise ConfigError("--base needs four comma-separated distances za,za',zb,zb'")
    elif "base" in sec:
        b = sec["base"]
        vals = [b["za_mm"], b["za_prime_mm"], b["zb_mm"], b["zb_prime_mm"]]
    else:
        raise ConfigError("misalign needs base settings (config 'misalign.base' or --base)")
    base = ChshSettings(*vals)
    # parallel shifts act on the wide x_+ profile, anti-parallel ones on the narrow x_- profile
    sp, sm = cfg.state_spec.sigma_plus, cfg.state_spec.sigma_minus
    dflt_p, dflt_m = Axis(-0.2 * sp, 0.2 * sp, 0.1 * sp), Axis(-sm, sm, 0.5 * sm)
    dxp, dxm = _axes(args, (_axis_from(sec, "dxp", dflt_p), _axis_from(sec, "dxm", dflt_m)))
    state = cfg.build_state()
    result = misalignment_scan(state, base, dxp, dxm, optics=cfg.optics, workers=cfg.workers)
    i, j = result.argmax()
    extra = [f"base: {json.dumps(base.as_dict(), sort_keys=True)}", f"truncation: {state.size}",
             "dx1 = (dxp + dxm) / 2, dx2 = (dxp - dxm) / 2; s_minus_2 = s_max - 2",
             f"argmax: dxp={result.dxp[i]!r} dxm={result.dxm[j]!r} s_max={result.s_max[i, j]!r}"]
    _emit(result.to_csv(header_lines=_header("misalign", cfg, args, extra)), args)
    return EXIT_OK


COMMANDS = {
    "validate": cmd_validate,
    "wigner": cmd_wigner,
    "chsh-scan": cmd_chsh_scan,
    "chsh-opt": cmd_chsh_opt,
    "misalign": cmd_misalign,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="bellcv", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"bellcv {__version__} ({BACKEND})")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="JSON run configuration (default: Bell state, 1 mm / 0.01 mm, 650 nm)")
        p.add_argument("--out", help="output file (default: stdout)")
        p.add_argument("--no-timestamp", action="store_true", help="omit the timestamp for byte-identical output")
        p.add_argument("--grid", action="append", metavar="MIN:MAX:STEP", help="axis override; repeat per axis")
        p.add_argument("--mode", choices=MODES, help="settings convention for scans")
        if name == "wigner":
            p.add_argument("--part", choices=("plus", "minus", "product"))
        if name == "misalign":
            p.add_argument("--base", metavar="ZA,ZA',ZB,ZB'", help="base distances in mm")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config_file(args.config) if args.config else default_config()
        return COMMANDS[args.command](cfg, args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (TruncationError, QuadratureError, SamplingError) as exc:
        print(f"numeric budget failure: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except (CompletenessError, ProbabilityError, RecurrenceError) as exc:
        print(f"invariant failure: {exc}", file=sys.stderr)
        return EXIT_INVARIANT
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
