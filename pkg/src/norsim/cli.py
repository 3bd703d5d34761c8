"""Command-line front end.

Commands
--------
table1     render the reference operating table (display mimics the
           one-significant-figure engineering notation, exports keep
           full precision)
analytic   evaluate the closed-form error budget at one operating point
simulate   run the Monte Carlo engine (plain or tail-stratified)
sweep      scan a*delta0 values, report (E0, E2) series and the fitted
           log-log slope
roundtrip  exhaustive codec self-test

Every result document embeds a run manifest (command, parameters, tool
version, timestamp); rerunning with the recorded parameters reproduces
the numerical content byte-for-byte.  Exit status is nonzero exactly on
parameter or I/O errors, never on statistical outcomes.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import dataclass
from datetime import datetime, timezone

import numpy as np

from . import __version__
from .analytic import (
    ChannelPoint,
    baseline_approximation,
    baseline_rates,
    fit_loglog_slope,
    protected_rates,
    ratio_approximation,
    regime_approximations,
    scaling_sweep,
    table1,
)
from .codec import CodeBook, encode, enumerate_codewords, parity_ok, read_byte
from .channel import five_level_grid
from .montecarlo import (
    SimConfig,
    estimate_to_dict,
    run_stratified,
    run_trials,
)

__all__ = ["main", "format_sig1"]


def format_sig1(x: float) -> str:
    """One-significant-figure engineering notation, e.g. 5.E-06."""
    if x == 0:
        return "0.E+00"
    return f"{x:.0E}".replace("E", ".E")


@dataclass
class RunManifest:
    command: str
    params: dict
    out: str | None

    def to_dict(self) -> dict:
        return {
            "command": self.command,
            "version": __version__,
            "created_utc": datetime.now(timezone.utc).isoformat(),
            "params": self.params,
            "out": self.out,
        }


# ---------------------------------------------------------------- helpers


def _load_config_file(path: str) -> dict:
    """Flat key = value file mirroring flag names; '#' starts a comment."""
    values = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected 'key = value'")
            key, val = line.split("=", 1)
            values[key.strip().replace("-", "_")] = val.strip()
    return values


def _as_bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _resolve(args, key: str, default, cast):
    """Flag value if given, else config-file value, else default."""
    val = getattr(args, key, None)
    if val is None and args._config_values and key in args._config_values:
        raw = args._config_values[key]
        val = _as_bool(raw) if cast is bool else cast(raw)
    if val is None:
        return default
    return cast(val) if not isinstance(val, bool) else val


def _resolve_point(args) -> tuple[float, float, float]:
    """(a_delta0, a_w, tail) from --a-delta0 xor --exp-margin plus flags."""
    ad0 = _resolve(args, "a_delta0", None, float)
    em = _resolve(args, "exp_margin", None, float)
    if (ad0 is None) == (em is None):
        raise ValueError("give exactly one of --a-delta0 and --exp-margin")
    if em is not None:
        if not 0.0 < em < 1.0:
            raise ValueError(f"--exp-margin must be in (0, 1), got {em}")
        ad0 = -math.log(em)
    aw = _resolve(args, "aw", 0.0, float)
    tail = _resolve(args, "tail", 1.0, float)
    return ad0, aw, tail


def _emit(doc: dict, fmt: str, out: str | None, render_table) -> None:
    """Write the result document in the requested format."""
    if fmt == "json":
        text = json.dumps(doc, indent=2) + "\n"
    elif fmt == "csv":
        text = _render_csv(doc)
    else:
        text = render_table(doc)
    if out:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _manifest_comment_lines(doc: dict) -> list[str]:
    m = doc["manifest"]
    lines = [f"# command={m['command']} version={m['version']} created={m['created_utc']}"]
    params = " ".join(f"{k}={v}" for k, v in m["params"].items())
    lines.append(f"# params: {params}")
    return lines


def _render_csv(doc: dict) -> str:
    lines = _manifest_comment_lines(doc)
    rows = doc["results"].get("rows")
    if rows is None:
        flat = _flatten(doc["results"])
        lines.append(",".join(flat))
        lines.append(",".join(_csv_num(v) for v in flat.values()))
    else:
        header = list(rows[0])
        lines.append(",".join(header))
        for row in rows:
            lines.append(",".join(_csv_num(row.get(k)) for k in header))
        for k, v in doc["results"].items():
            if k != "rows":
                lines.append(f"# {k}={_csv_num(v)}")
    return "\n".join(lines) + "\n"


def _csv_num(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return str(v).lower()
    if isinstance(v, float):
        return f"{v:.17g}"
    if isinstance(v, dict):
        return json.dumps(v)
    return str(v)


def _flatten(d: dict, prefix: str = "") -> dict:
    out = {}
    for k, v in d.items():
        key = f"{prefix}{k}"
        if isinstance(v, dict):
            out.update(_flatten(v, key + "."))
        elif isinstance(v, (list, tuple)):
            for i, x in enumerate(v):
                out[f"{key}.{i}"] = x
        else:
            out[key] = v
    return out


# ---------------------------------------------------------------- commands


def cmd_table1(args) -> dict:
    rows = [
        {
            "exp_margin": r.exp_margin,
            "tail": r.tail,
            "e0": r.e0,
            "e2": r.e2,
            "ratio": r.ratio,
        }
        for r in table1()
    ]
    return {"rows": rows}


def _table1_text(doc: dict) -> str:
    lines = _manifest_comment_lines(doc)
    lines.append("exp_margin tail   e0     e2     e2/e0")
    for r in doc["results"]["rows"]:
        lines.append(
            f"{format_sig1(r['exp_margin'])} {format_sig1(r['tail'])} "
            f"{format_sig1(r['e0'])} {format_sig1(r['e2'])} {format_sig1(r['ratio'])}"
        )
    return "\n".join(lines) + "\n"


def cmd_analytic(args) -> dict:
    ad0, aw, tail = _resolve_point(args)
    point = ChannelPoint(a_delta0=ad0, a_w=aw, tail=tail)
    budget = protected_rates(point)
    e2_tail, e2_swap = regime_approximations(point)
    if tail == 0.0:
        regime = "noiseless"
    elif tail < math.exp(-aw):
        regime = "tail_dominated"
    else:
        regime = "swap_dominated"
    return {
        "point": {
            "a_delta0": ad0,
            "a_w": aw,
            "tail": tail,
            "a_delta": point.a_delta,
        },
        "baseline": {
            "p0": budget.p0,
            "e0": budget.e0,
            "e0_approx": baseline_approximation(point),
        },
        "protected": {
            "e2_i": budget.e2_i,
            "e2_ii": budget.e2_ii,
            "e2_iii": budget.e2_iii,
            "e2_total": budget.e2_total,
            "ratio": budget.ratio,
        },
        "approximations": {
            "ratio_width_like_margin": ratio_approximation(point),
            "e2_tail_dominated": e2_tail,
            "e2_swap_dominated": e2_swap,
            "applicable_regime": regime,
        },
    }


def _analytic_text(doc: dict) -> str:
    lines = _manifest_comment_lines(doc)
    for section, vals in doc["results"].items():
        lines.append(f"{section}:")
        for k, v in vals.items():
            lines.append(f"  {k:26s} {v if isinstance(v, str) else f'{v:.15e}'}")
    return "\n".join(lines) + "\n"


def _sim_config(args, a_delta0: float, aw: float, tail: float) -> SimConfig:
    subtrials = _resolve(args, "subtrials", None, float)
    return SimConfig(
        a=1.0,
        tail=tail,
        width=aw,
        delta0=a_delta0,
        protected=_resolve(args, "protected", True, bool),
        trials=int(_resolve(args, "trials", 1_000_000, float)),
        seed=int(_resolve(args, "seed", 0, float)),
        shards=int(_resolve(args, "shards", 1, float)),
        stratified=_resolve(args, "stratified", False, bool),
        data_mode=_resolve(args, "data_mode", "uniform", str),
        subtrials_per_stratum=int(subtrials) if subtrials else None,
    )


def cmd_simulate(args) -> dict:
    ad0, aw, tail = _resolve_point(args)
    config = _sim_config(args, ad0, aw, tail)
    est = run_stratified(config) if config.stratified else run_trials(config)
    doc = estimate_to_dict(est, config)
    point = config.point()
    nbits = est.trials * 8
    if config.protected:
        budget = protected_rates(point)
        doc["analytic"] = {
            "e2_i": budget.e2_i,
            "e2_ii": budget.e2_ii,
            "e2_iii": budget.e2_iii,
            "e2_total": budget.e2_total,
        }
        doc["empirical_rates"] = {
            "type_i": est.per_class["type_i"] / nbits,
            "type_ii": est.per_class["type_ii"] / nbits,
            "type_iii": est.per_class["type_iii"] / nbits,
            "other": est.per_class["other"] / nbits,
            "total": est.event_rate_per_bit,
        }
        doc["empirical_over_analytic"] = {
            "type_i": _safe_ratio(doc["empirical_rates"]["type_i"], budget.e2_i),
            "type_ii": _safe_ratio(doc["empirical_rates"]["type_ii"], budget.e2_ii),
            "type_iii": _safe_ratio(doc["empirical_rates"]["type_iii"], budget.e2_iii),
            "total": _safe_ratio(est.event_rate_per_bit, budget.e2_total),
        }
    else:
        p0, e0 = baseline_rates(point)
        doc["analytic"] = {"p0": p0, "e0": e0}
        doc["empirical_rates"] = {"total": est.event_rate_per_bit}
        doc["empirical_over_analytic"] = {
            "total": _safe_ratio(est.event_rate_per_bit, e0)
        }
    return doc


def _safe_ratio(num: float, den: float) -> float | None:
    return num / den if den > 0.0 else None


def _simulate_text(doc: dict) -> str:
    lines = _manifest_comment_lines(doc)
    est = doc["results"]["estimate"]
    lines.append(
        f"trials={est['trials']} events={est['word_error_events']} "
        f"event_rate_per_bit={est['event_rate_per_bit']:.6e} "
        f"ci95=({est['ci95'][0]:.3e}, {est['ci95'][1]:.3e})"
    )
    lines.append(f"hamming_rate={est['hamming_rate']:.6e}")
    lines.append("per_class: " + json.dumps(est["per_class"]))
    lines.append("analytic: " + json.dumps(doc["results"]["analytic"]))
    lines.append(
        "empirical/analytic: " + json.dumps(doc["results"]["empirical_over_analytic"])
    )
    return "\n".join(lines) + "\n"


def cmd_sweep(args) -> dict:
    grid_text = _resolve(args, "grid", None, str)
    if not grid_text:
        raise ValueError("sweep requires --grid with comma-separated a*delta0 values")
    values = [float(x) for x in grid_text.split(",") if x.strip()]
    if not values:
        raise ValueError("empty sweep grid")
    mode = _resolve(args, "mode", "analytic", str)
    if mode not in ("analytic", "simulate", "both"):
        raise ValueError(f"unknown sweep mode {mode!r}")
    aw = _resolve(args, "aw", 0.0, float)
    tail = _resolve(args, "tail", 1.0, float)

    e0s, e2s = scaling_sweep(values, tail=tail, a_w=aw)
    rows = []
    for ad0, e0, e2 in zip(values, e0s, e2s):
        rows.append({"a_delta0": ad0, "e0": float(e0), "e2_analytic": float(e2)})
    slopes = {}
    if mode != "simulate":
        slopes["analytic"] = fit_loglog_slope(e0s, e2s)
    if mode in ("simulate", "both"):
        sim = []
        for row in rows:
            config = _sim_config(args, row["a_delta0"], aw, tail)
            est = run_trials(config)
            row["e2_simulated"] = est.event_rate_per_bit
            row["ci95_lo"], row["ci95_hi"] = est.ci95
            sim.append(est.event_rate_per_bit)
        slopes["simulated"] = (
            fit_loglog_slope(e0s, sim) if len(sim) >= 2 and min(sim) > 0 else None
        )
    return {"rows": rows, "slopes": slopes}


def _sweep_text(doc: dict) -> str:
    lines = _manifest_comment_lines(doc)
    rows = doc["results"]["rows"]
    header = list(rows[0])
    lines.append(" ".join(f"{h:>14s}" for h in header))
    for row in rows:
        lines.append(" ".join(f"{_csv_num(row.get(k)):>14s}" for k in header))
    lines.append("slopes: " + json.dumps(doc["results"]["slopes"]))
    return "\n".join(lines) + "\n"


def cmd_roundtrip(args) -> dict:
    book = CodeBook.build(5)
    grid = five_level_grid(delta0=1.0, width=0.25)
    checks = {}
    checks["codeword_count_313"] = len(enumerate_codewords(5)) == 313
    ok = True
    for byte in range(256):
        word = encode(byte, book)
        volts = [grid.l0 + grid.pitch * s for s in word]
        out = read_byte(volts, grid, book)
        ok &= out.byte == byte and out.parity_passed and parity_ok(out.word)
    checks["zero_noise_roundtrip_256"] = bool(ok)
    rng = np.random.default_rng(0)
    valid = True
    for _ in range(500):
        volts = rng.uniform(-1.0, grid.levels[-1] + 1.0, 4)
        valid &= parity_ok(read_byte(volts, grid, book).word)
    checks["decoder_outputs_parity_valid"] = bool(valid)
    checks["all_ok"] = all(checks.values())
    return checks


def _roundtrip_text(doc: dict) -> str:
    lines = _manifest_comment_lines(doc)
    for k, v in doc["results"].items():
        lines.append(f"{'ok' if v else 'FAIL'}  {k}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------- driver

_COMMANDS = {
    "table1": (cmd_table1, _table1_text),
    "analytic": (cmd_analytic, _analytic_text),
    "simulate": (cmd_simulate, _simulate_text),
    "sweep": (cmd_sweep, _sweep_text),
    "roundtrip": (cmd_roundtrip, _roundtrip_text),
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="norsim",
        description="Five-level parity-coded NOR storage: analytics and simulation",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p, point=False, sim=False):
        p.add_argument("--config", help="flat key = value file mirroring flag names")
        p.add_argument("--out", help="write the report to this path")
        p.add_argument(
            "--format", choices=("table", "csv", "json"), default=None,
            help="output format (default table)",
        )
        if point:
            g = p.add_mutually_exclusive_group()
            g.add_argument("--a-delta0", type=float, help="dimensionless a*delta0")
            g.add_argument(
                "--exp-margin", type=float,
                help="exp(-a*delta0), alternative to --a-delta0",
            )
            p.add_argument("--aw", type=float, help="dimensionless a*width (default 0)")
            p.add_argument("--tail", type=float, help="tail fraction (default 1)")
        if sim:
            p.add_argument(
                "--protected", action=argparse.BooleanOptionalAction, default=None,
                help="5-level coded system (default) vs 4-level margin sensing",
            )
            p.add_argument("--trials", type=float, help="word trials (default 1e6)")
            p.add_argument("--seed", type=int, help="random seed (default 0)")
            p.add_argument("--shards", type=int, help="independent streams (default 1)")
            p.add_argument(
                "--stratified", action="store_true", default=None,
                help="tail-count stratified rare-event estimator",
            )
            p.add_argument(
                "--subtrials", type=float,
                help="sub-trials per stratum (stratified runs)",
            )
            p.add_argument(
                "--data-mode", choices=("uniform", "interior"), default=None,
                help="written data: uniform bytes or interior-level words",
            )

    add_common(sub.add_parser("table1", help="render the reference operating table"))
    add_common(sub.add_parser("analytic", help="closed-form error budget"), point=True)
    add_common(
        sub.add_parser("simulate", help="Monte Carlo error-rate estimate"),
        point=True,
        sim=True,
    )
    p_sweep = sub.add_parser("sweep", help="scan a*delta0 and fit the log-log slope")
    add_common(p_sweep, point=False, sim=True)
    p_sweep.add_argument("--grid", help="comma-separated a*delta0 values")
    p_sweep.add_argument("--aw", type=float, help="dimensionless a*width (default 0)")
    p_sweep.add_argument("--tail", type=float, help="tail fraction (default 1)")
    p_sweep.add_argument(
        "--mode", choices=("analytic", "simulate", "both"), default=None,
        help="which rates to compute per grid point",
    )
    add_common(sub.add_parser("roundtrip", help="exhaustive codec self-test"))
    return parser


def _public_params(args) -> dict:
    skip = {"command", "config", "out", "format", "_config_values"}
    return {
        k.replace("_", "-"): v
        for k, v in sorted(vars(args).items())
        if k not in skip and v is not None
    }


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        args._config_values = (
            _load_config_file(args.config) if getattr(args, "config", None) else {}
        )
        runner, renderer = _COMMANDS[args.command]
        results = runner(args)
        manifest = RunManifest(
            command=args.command, params=_public_params(args), out=args.out
        )
        doc = {"manifest": manifest.to_dict(), "results": results}
        fmt = _resolve(args, "format", "table", str)
        if fmt not in ("table", "csv", "json"):
            raise ValueError(f"unknown format {fmt!r}")
        _emit(doc, fmt, args.out, renderer)
    except (ValueError, OSError) as exc:
        print(f"norsim: error: {exc}", file=sys.stderr)
        return 2
    if args.command == "roundtrip" and not results["all_ok"]:
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
