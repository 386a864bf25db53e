"""Command-line front end.

Subcommands::

    limits            capacity, dispersion and the approximate resolution (JSON)
    curve             approximate excess probability vs. resolution decay rate (CSV + JSON sidecar)
    simulate          Monte Carlo excess-resolution estimates (CSV + JSON manifest)
    track             one simulated episode (JSON trace, or motion CSV with --format csv)
    validate-channel  stochasticity and continuity diagnostics (JSON)

Every option may also come from a JSON file given with ``--config``; options
on the command line win.  Exit codes: 0 success, 1 runtime or budget error,
2 invalid usage.

simulate CSV columns: delta, rate, trials, excess_count, p_hat, ci_low, ci_high,
eps_hat, prior, regime.  curve CSV columns: rate, eps_hat, critical.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
import time

import numpy as np

from . import __version__
from .channel import ChannelError, ChannelSpec, transition_matrix, verify_continuity
from .info import channel_stats
from .limits import COEFFICIENT_NOTE, critical_rate, limit_report, phase_curve, velocity_regime
from .montecarlo import (
    CSV_COLUMNS,
    PRIORS,
    UNIFORM,
    ExperimentPlan,
    estimate_excess_prob,
    sample_initial,
)
from .motion import TargetState, locate_vector, unwrapped_position
from .scheme import BudgetError, TrajectoryDecoder, draw_codebook, plan_grid, run_episode

SUBCOMMANDS = ("limits", "curve", "simulate", "track", "validate-channel")

# key -> (type, default); None default means "required by some subcommands"
OPTIONS = {
    "zeta": (float, 0.2),
    "slope": (float, 2.0),
    "intercept": (float, 0.5),
    "n": (int, None),
    "d": (int, 1),
    "v_max": (float, 0.0),
    "eps": (float, 0.1),
    "delta": ("floats", None),
    "rate": ("floats", None),
    "rate_min": (float, None),
    "rate_max": (float, None),
    "points": (int, 41),
    "trials": (int, 2000),
    "seed": (int, 0),
    "prior": (str, UNIFORM),
    "grid_points": (int, 3),
    "s": ("floats", None),
    "v": ("floats", None),
    "p": (float, None),
    "budget": (int, 10**7),
    "fresh_codebook_per_trial": (bool, False),
    "threads": (int, None),
    "level": (float, 0.95),
    "out": (str, None),
    "manifest": (str, None),
    "format": (str, None),
    "q": ("floats", None),
    "xi": ("floats", None),
}

REQUIRED = {
    "limits": ("n",),
    "curve": ("n",),
    "simulate": ("n",),
    "track": ("n",),
    "validate-channel": (),
}


class UsageError(Exception):
    pass


def _parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qtrack",
        description=__doc__,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    parser.add_argument("--version", action="version", version=f"qtrack {__version__}")
    sub = parser.add_subparsers(dest="subcommand", required=True)
    for name in SUBCOMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="JSON file of option values")
        for key, (kind, _) in OPTIONS.items():
            flag = "--" + key.replace("_", "-")
            if kind is bool:
                p.add_argument(flag, dest=key, action="store_const", const=True, default=None)
            elif kind == "floats":
                p.add_argument(flag, dest=key, type=float, nargs="+", default=None)
            else:
                p.add_argument(flag, dest=key, type=kind, default=None)
    return parser


def _coerce(key, value):
    kind, _ = OPTIONS[key]
    try:
        if kind == "floats":
            vals = value if isinstance(value, list) else [value]
            return [float(v) for v in vals]
        if kind is bool:
            if not isinstance(value, bool):
                raise TypeError
            return value
        if kind is int and isinstance(value, float) and not value.is_integer():
            raise TypeError
        return kind(value)
    except (TypeError, ValueError):
        raise UsageError(f"invalid value for '{key}': {value!r}") from None


def parse_and_validate(argv):
    """Parse ``argv`` (without the program name) into a normalised config dict."""
    parser = _parser()
    ns = parser.parse_args(argv)
    flags = {k: v for k, v in vars(ns).items() if k in OPTIONS and v is not None}
    file_values = {}
    if ns.config:
        try:
            with open(ns.config) as fh:
                file_values = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config '{ns.config}': {exc}") from None
        if not isinstance(file_values, dict):
            raise UsageError("config file must hold a JSON object")
        unknown = sorted(set(file_values) - set(OPTIONS))
        if unknown:
            raise UsageError(f"unknown config key '{unknown[0]}'")
        file_values = {k: _coerce(k, v) for k, v in file_values.items()}

    resolved = {k: default for k, (_, default) in OPTIONS.items()}
    resolved.update(file_values)
    resolved.update(flags)
    if resolved["threads"] is None:
        env = os.environ.get("QTRACK_THREADS")
        resolved["threads"] = _coerce("threads", env) if env else 1

    cmd = ns.subcommand
    for key in REQUIRED[cmd]:
        if resolved[key] is None:
            raise UsageError(f"missing required option '{key}' for {cmd}")
    _validate(cmd, resolved)
    return {
        "subcommand": cmd,
        "config": resolved,
        "config_file": {"path": ns.config, "values": file_values} if ns.config else None,
        "flags": flags,
    }


def _validate(cmd, c):
    def bad(key, why):
        raise UsageError(f"invalid value for '{key}': {why}")

    if c["n"] is not None and c["n"] < 1:
        bad("n", "must be >= 1")
    if c["d"] < 1:
        bad("d", "must be >= 1")
    if c["v_max"] < 0:
        bad("v_max", "must be >= 0")
    if not 0 < c["eps"] < 1:
        bad("eps", "must lie in (0, 1)")
    if c["trials"] < 1:
        bad("trials", "must be >= 1")
    if c["threads"] < 1:
        bad("threads", "must be >= 1")
    if c["prior"] not in PRIORS:
        bad("prior", f"choose from {', '.join(PRIORS)}")
    if c["format"] not in (None, "csv", "json"):
        bad("format", "choose csv or json")
    if c["delta"] is not None and any(not 0 < x < 1 for x in c["delta"]):
        bad("delta", "every delta must lie in (0, 1)")
    if c["rate"] is not None and any(x <= 0 for x in c["rate"]):
        bad("rate", "rates must be positive")
    if cmd in ("simulate", "track") and c["delta"] is None and c["rate"] is None:
        raise UsageError(f"missing required option 'delta' (or 'rate') for {cmd}")
    if cmd == "track":
        for key in ("s", "v"):
            if c[key] is not None and len(c[key]) != c["d"]:
                bad(key, f"needs {c['d']} values")
    if c["q"] is not None:
        for q in c["q"]:
            if not 0 < q < 1:
                bad("q", "every q must lie in (0, 1)")
            if c["xi"] is not None and any(not 0 < xi < min(q, 1 - q) for xi in c["xi"]):
                bad("xi", "every xi must lie in (0, min(q, 1-q))")
    if cmd == "simulate" and c["prior"] == "fixed-state" and c["s"] is None:
        raise UsageError("missing required option 's' for the fixed-state prior")
    try:
        ChannelSpec.md_bsc(c["zeta"], c["slope"], c["intercept"])
    except ChannelError as exc:
        raise UsageError(f"invalid value for 'zeta/slope/intercept': {exc}") from None


def _channel(c) -> ChannelSpec:
    return ChannelSpec.md_bsc(c["zeta"], c["slope"], c["intercept"])


def _deltas(c):
    if c["delta"] is not None:
        return list(c["delta"])
    return [math.exp(-r * c["n"]) for r in c["rate"]]


def _fixed_state(c):
    if c["s"] is None:
        return None
    v = c["v"] if c["v"] is not None else [0.0] * len(c["s"])
    return TargetState(tuple(c["s"]), tuple(v), c["v_max"])


def _emit(text, path):
    if path:
        with open(path, "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _plain(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def _json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, default=_plain) + "\n"


def _manifest(parsed, extra):
    out = {
        "version": __version__,
        "subcommand": parsed["subcommand"],
        "config": parsed["config"],
        "config_file": parsed["config_file"],
        "flags": parsed["flags"],
    }
    out.update(extra)
    return out


def cmd_limits(parsed):
    c = parsed["config"]
    stats = channel_stats(_channel(c))
    report = limit_report(c["n"], c["d"], c["eps"], stats, c["v_max"])
    out = {
        "channel_stats": stats.to_dict(c["eps"]),
        "limits": report.to_dict(),
        "note": COEFFICIENT_NOTE,
    }
    _emit(_json(out), c["out"])


def cmd_curve(parsed):
    c = parsed["config"]
    stats = channel_stats(_channel(c))
    crit = critical_rate(c["d"], stats)
    lo = c["rate_min"] if c["rate_min"] is not None else crit / 2
    hi = c["rate_max"] if c["rate_max"] is not None else crit * 1.5
    if not 0 < lo < hi:
        raise UsageError("invalid value for 'rate_min/rate_max': need 0 < rate_min < rate_max")
    rows = phase_curve(c["n"], c["d"], stats, lo, hi, c["points"])
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["rate", "eps_hat", "critical"])
    for r, e in rows:
        w.writerow([repr(r), repr(e), int(r == crit)])
    _emit(buf.getvalue(), c["out"])
    regime, caveat = velocity_regime(c["n"], c["v_max"])
    sidecar = {
        "C": stats.C, "V": list(stats.V_at_pca), "p_ca": list(stats.p_ca_set),
        "critical_rate": crit, "critical_rate_units": "nats/query", "units": "nats",
        "n": c["n"], "d": c["d"], "regime": regime, "caveat": caveat,
        "note": COEFFICIENT_NOTE,
    }
    path = c["manifest"] or (c["out"] + ".json" if c["out"] else None)
    if path:
        with open(path, "w") as fh:
            fh.write(_json(_manifest(parsed, sidecar)))


def cmd_simulate(parsed):
    c = parsed["config"]
    channel = _channel(c)
    plan = ExperimentPlan(
        channel=channel, n=c["n"], d=c["d"], v_max=c["v_max"], deltas=_deltas(c),
        trials=c["trials"], seed=c["seed"], prior=c["prior"], grid_points=c["grid_points"],
        fixed_state=_fixed_state(c), p=c["p"], budget=c["budget"],
        fresh_codebook_per_trial=c["fresh_codebook_per_trial"], level=c["level"],
    )
    start = time.perf_counter()
    stats = channel_stats(channel)
    rows = estimate_excess_prob(plan, stats, threads=c["threads"])
    wall = time.perf_counter() - start
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for row in rows:
        d = row.to_dict()
        w.writerow([repr(d[k]) if isinstance(d[k], float) else d[k] for k in CSV_COLUMNS])
    _emit(buf.getvalue(), c["out"])
    path = c["manifest"] or (c["out"] + ".json" if c["out"] else None)
    if path:
        manifest = _manifest(parsed, {
            "plan": plan.to_dict(), "channel_stats": stats.to_dict(),
            "wall_time_s": wall, "caveat": rows[0].caveat,
        })
        with open(path, "w") as fh:
            fh.write(_json(manifest))


def cmd_track(parsed):
    c = parsed["config"]
    n, d = c["n"], c["d"]
    delta = _deltas(c)[0]
    rng = np.random.default_rng(c["seed"])
    state = _fixed_state(c) or sample_initial(UNIFORM, d, c["v_max"], rng)
    if c["format"] == "csv":
        times = np.arange(n + 1)
        loc = locate_vector(state, times)
        unwrapped = unwrapped_position(np.asarray(state.s)[None, :], np.asarray(state.v)[None, :],
                                       times[:, None])
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t"] + [f"loc_{i}" for i in range(d)] + [f"unwrapped_{i}" for i in range(d)])
        for t in times:
            w.writerow([int(t)] + [repr(float(x)) for x in loc[t]] + [repr(float(x)) for x in unwrapped[t]])
        _emit(buf.getvalue(), c["out"])
        return
    channel = _channel(c)
    stats = channel_stats(channel)
    p = c["p"] if c["p"] is not None else min(stats.p_ca_set)
    grid = plan_grid(delta, n, d, c["v_max"], c["budget"])
    codebook = draw_codebook(grid, p, c["seed"])
    decoder = TrajectoryDecoder(channel, grid, codebook, p)
    result = run_episode(channel, grid, codebook, state, delta, rng, decoder)
    trace = {
        "true_state": {"s": list(state.s), "v": list(state.v)},
        "grid": grid.to_dict(),
        "p": p,
        "delta": delta,
        "episode": result.to_dict(),
        "version": __version__,
    }
    _emit(_json(trace), c["out"])


def cmd_validate_channel(parsed):
    c = parsed["config"]
    channel = _channel(c)
    f = channel.size_map
    worst_row = 0.0
    for m in np.linspace(0.0, 1.0, 101):
        w = transition_matrix(channel, float(f(m)))
        worst_row = max(worst_row, float(np.abs(w.sum(axis=1) - 1.0).max()))
    qs = c["q"] or [0.25, 0.5, 0.75]
    checks = []
    for q in qs:
        xis = c["xi"] or [min(q, 1 - q) * k for k in (0.5, 0.1, 0.01)]
        for xi in xis:
            chk = verify_continuity(channel, q, xi)
            checks.append({"q": q, "xi": xi, "lhs": chk.lhs, "c_estimate": chk.c_estimate,
                           "c_ref": chk.c_ref, "ok": chk.ok})
    max_cross = channel.zeta * f.max_value
    out = {
        "channel": channel.to_dict(),
        "lipschitz_K": f.lipschitz,
        "max_crossover": max_cross,
        "anti_informative_states": bool(max_cross > 0.5),
        "row_sum_max_error": worst_row,
        "stochastic": worst_row <= 1e-12,
        "continuity": checks,
        "continuity_ok": all(ch["ok"] for ch in checks),
    }
    _emit(_json(out), c["out"])


DISPATCH = {
    "limits": cmd_limits,
    "curve": cmd_curve,
    "simulate": cmd_simulate,
    "track": cmd_track,
    "validate-channel": cmd_validate_channel,
}


def dispatch(parsed) -> int:
    try:
        DISPATCH[parsed["subcommand"]](parsed)
    except UsageError as exc:
        print(f"qtrack: error: {exc}", file=sys.stderr)
        return 2
    except (BudgetError, ChannelError, ValueError, RuntimeError, OSError) as exc:
        print(f"qtrack: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    return 0


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    try:
        parsed = parse_and_validate(argv)
    except UsageError as exc:
        print(f"qtrack: error: {exc}", file=sys.stderr)
        return 2
    except SystemExit as exc:  # argparse usage errors and --help
        return int(exc.code or 0)
    return dispatch(parsed)


if __name__ == "__main__":
    sys.exit(main())
