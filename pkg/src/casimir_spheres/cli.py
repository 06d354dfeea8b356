"""Batch driver: run configurations, sweeps, route comparisons and
convergence reports, with CSV/JSON/pretty output.

Units are hbar = c = k_B = 1 throughout: lengths in the user's unit, energies
in inverse length, forces in inverse length squared, temperatures in inverse
length.
"""

from __future__ import annotations

import argparse
import concurrent.futures as futures
import json
import math
import os
import sys
from dataclasses import dataclass, field, replace

import numpy as np

from . import asymptotics, pfa, spectral
from .round_trip import (
    DIRICHLET,
    PEC,
    PERMEABLE,
    BoundaryPair,
    Condition,
    Field,
    Geometry,
    Mode,
    robin,
)
from .spectral import ConvergenceSpec, NotConvergedError, ResultKind

CSV_HEADER = ("route,field,cond_A,cond_B,alpha_A,alpha_B,mode,"
              "r_A,r_B,d,T,kind,value,est_rel_err,l_max,quad_pts,p_max")

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_NOT_CONVERGED = 3

ROUTES = ("exact", "pfa", "asym")
FORMATS = ("csv", "json", "pretty")


class ConfigError(ValueError):
    def __init__(self, field_name: str, message: str):
        super().__init__(f"{field_name}: {message}")
        self.field_name = field_name


@dataclass
class RunConfig:
    """Validated run configuration (geometry, pair, sweep, routes, output)."""

    r_A: float
    r_B: float
    mode: Mode
    field_type: Field
    cond_A: Condition
    cond_B: Condition
    d_values: list[float]
    temperatures: list[float]
    routes: list[str]
    observable: str = "energy"
    spec: ConvergenceSpec = field(default_factory=ConvergenceSpec)
    out_format: str = "pretty"
    out_path: str | None = None
    threads: int = 1
    deterministic: bool = False
    allow_partial: bool = False

    def geometry(self, d: float) -> Geometry:
        if self.mode is Mode.INTERIOR:
            return Geometry.interior(self.r_A, self.r_B, d=d)
        return Geometry.exterior(self.r_A, self.r_B, d=d)

    @property
    def pair(self) -> BoundaryPair:
        return BoundaryPair(self.field_type, self.cond_A, self.cond_B)


def _parse_condition(name: str, value: str, alpha: float | None) -> Condition:
    value = value.strip().lower()
    if value in ("dirichlet", "d"):
        return DIRICHLET
    if value in ("neumann", "n"):
        return robin(0.0)
    if value in ("robin", "r"):
        if alpha is None:
            raise ConfigError(name, "Robin condition requires an alpha value")
        return robin(alpha)
    if value in ("pec", "c", "conducting"):
        return PEC
    if value in ("permeable", "p"):
        return PERMEABLE
    raise ConfigError(name, f"unknown boundary condition {value!r}")


def parse_config_file(path: str) -> dict[str, str]:
    """Flat key=value configuration file; '#' starts a comment."""
    out: dict[str, str] = {}
    with open(path) as fh:
        for ln, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{ln}", "expected key=value")
            key, value = line.split("=", 1)
            out[key.strip()] = value.strip()
    return out


def _floats(name: str, text: str) -> list[float]:
    try:
        return [float(tok) for tok in text.split(",") if tok.strip()]
    except ValueError as exc:
        raise ConfigError(name, f"bad number list {text!r}") from exc


def _log_range(name: str, text: str) -> list[float]:
    try:
        start, stop, count = text.split(":")
        start, stop, count = float(start), float(stop), int(count)
    except ValueError as exc:
        raise ConfigError(name, "expected start:stop:count") from exc
    if start <= 0 or stop <= 0 or count < 2:
        raise ConfigError(name, "log range needs positive endpoints, count >= 2")
    return list(np.geomspace(start, stop, count))


def build_config(raw: dict[str, str]) -> RunConfig:
    def need(key: str) -> str:
        if key not in raw:
            raise ConfigError(key, "missing required key")
        return raw[key]

    try:
        r_A = float(need("r_A"))
        r_B = float(need("r_B"))
    except ValueError as exc:
        raise ConfigError("r_A/r_B", "radii must be numbers") from exc
    mode_txt = raw.get("mode", "interior").lower()
    if mode_txt not in ("interior", "exterior"):
        raise ConfigError("mode", f"unknown mode {mode_txt!r}")
    mode = Mode.INTERIOR if mode_txt == "interior" else Mode.EXTERIOR

    field_txt = raw.get("field", "scalar").lower()
    if field_txt not in ("scalar", "em"):
        raise ConfigError("field", f"unknown field {field_txt!r}")
    ftype = Field.SCALAR if field_txt == "scalar" else Field.EM

    alpha_A = float(raw["alpha_A"]) if "alpha_A" in raw else None
    alpha_B = float(raw["alpha_B"]) if "alpha_B" in raw else None
    cond_A = _parse_condition("cond_A", need("cond_A"), alpha_A)
    cond_B = _parse_condition("cond_B", need("cond_B"), alpha_B)
    if alpha_A is not None and cond_A.kind != "robin":
        raise ConfigError("alpha_A", "alpha given but cond_A is not Robin")
    if alpha_B is not None and cond_B.kind != "robin":
        raise ConfigError("alpha_B", "alpha given but cond_B is not Robin")
    try:
        pair = BoundaryPair(ftype, cond_A, cond_B)
    except ValueError as exc:
        raise ConfigError("cond_A/cond_B", str(exc)) from exc

    has_d = "d" in raw
    has_L = "L" in raw
    dval: float | None = None
    if has_d and has_L:
        raise ConfigError("d/L", "give exactly one of d or L")
    if has_d:
        dval = float(raw["d"])
    elif has_L:
        L = float(raw["L"])
        dval = (r_B - r_A - L) if mode is Mode.INTERIOR else (L - r_A - r_B)

    if "d_values" in raw and "d_range" in raw:
        raise ConfigError("d_values/d_range", "give at most one sweep spec")
    if "d_values" in raw:
        d_values = _floats("d_values", raw["d_values"])
    elif "d_range" in raw:
        d_values = _log_range("d_range", raw["d_range"])
    elif dval is not None:
        d_values = [dval]
    else:
        raise ConfigError("d", "no separation given (d, L, d_values or d_range)")
    for dv in d_values:
        if dv <= 0:
            raise ConfigError("d", f"derived gap {dv} is not positive")
        if mode is Mode.INTERIOR and dv >= r_B - r_A:
            raise ConfigError("d", f"gap {dv} leaves no room for the offset L")

    temperatures = _floats("T", raw.get("T", "0"))
    if any(t < 0 for t in temperatures):
        raise ConfigError("T", "temperatures must be non-negative")

    routes = [r.strip().lower() for r in raw.get("routes", "").split(",") if r.strip()]
    if not routes:
        raise ConfigError("routes", "at least one route is required")
    for r in routes:
        if r not in ROUTES:
            raise ConfigError("routes", f"unknown route {r!r}")
    if len(set(routes)) != len(routes):
        raise ConfigError("routes", "duplicate routes")

    observable = raw.get("observable", "energy").lower()
    if observable not in ("energy", "force"):
        raise ConfigError("observable", f"unknown observable {observable!r}")

    spec_kwargs = {}
    for key, cast in (("rel_tol", float), ("l_max_initial", int),
                      ("l_max_cap", int), ("quad_points_initial", int),
                      ("matsubara_tail_tol", float), ("ltilde_margin", int)):
        if key in raw:
            try:
                spec_kwargs[key] = cast(raw[key])
            except ValueError as exc:
                raise ConfigError(key, f"bad value {raw[key]!r}") from exc
    try:
        spec = ConvergenceSpec(**spec_kwargs)
    except ValueError as exc:
        raise ConfigError("convergence", str(exc)) from exc

    out_format = raw.get("format", "pretty").lower()
    if out_format not in FORMATS:
        raise ConfigError("format", f"unknown format {out_format!r}")

    threads = int(raw.get("threads", os.environ.get("CASIMIR_THREADS", "1")))
    if threads < 1:
        raise ConfigError("threads", "threads must be >= 1")

    return RunConfig(
        r_A=r_A, r_B=r_B, mode=mode, field_type=ftype,
        cond_A=cond_A, cond_B=cond_B, d_values=d_values,
        temperatures=temperatures, routes=routes, observable=observable,
        spec=spec, out_format=out_format, out_path=raw.get("out"),
        threads=threads,
        deterministic=raw.get("deterministic", "false").lower() in ("1", "true", "yes"),
        allow_partial=raw.get("allow_partial", "false").lower() in ("1", "true", "yes"),
    )


# ---------------------------------------------------------------------------
# Row evaluation
# ---------------------------------------------------------------------------

def _base_row(config: RunConfig, route: str, d: float, T: float) -> dict:
    pair = config.pair
    return {
        "route": route,
        "field": config.field_type.value,
        "cond_A": pair.cond_A.label(),
        "cond_B": pair.cond_B.label(),
        "alpha_A": pair.cond_A.alpha if pair.cond_A.kind == "robin" else None,
        "alpha_B": pair.cond_B.alpha if pair.cond_B.kind == "robin" else None,
        "mode": config.mode.value,
        "r_A": config.r_A,
        "r_B": config.r_B,
        "d": d,
        "T": T,
        "kind": None, "value": None, "est_rel_err": None,
        "l_max": None, "quad_pts": None, "p_max": None,
    }


def _kind_for(observable: str, T: float) -> str:
    if observable == "force":
        return ResultKind.FORCE.value
    return (ResultKind.ENERGY_T0 if T == 0.0 else ResultKind.FREE_ENERGY).value


def _pfa_force(geometry, pair, T):
    d = geometry.d
    h = 1e-3 * d

    def ev(dd):
        if geometry.mode is Mode.INTERIOR:
            geo = Geometry.interior(geometry.r_A, geometry.r_B, d=dd)
        else:
            geo = Geometry.exterior(geometry.r_A, geometry.r_B, d=dd)
        return pfa.pfa_free_energy(geo, pair, T)

    return -(ev(d - 2*h) - 8*ev(d - h) + 8*ev(d + h) - ev(d + 2*h)) / (12.0 * h)


def evaluate_point(config: RunConfig, route: str, d: float, T: float) -> tuple[dict, bool]:
    """One output row; the flag reports exact-route convergence failure."""
    row = _base_row(config, route, d, T)
    row["kind"] = _kind_for(config.observable, T)
    geometry = config.geometry(d)
    pair = config.pair
    failed = False
    if route == "exact":
        try:
            if config.observable == "force":
                rec = spectral.force(geometry, pair, T, config.spec)
            elif T == 0.0:
                rec = spectral.energy_T0(geometry, pair, config.spec)
            else:
                rec = spectral.free_energy(geometry, pair, T, config.spec)
        except NotConvergedError as exc:
            rec = exc.best
            failed = True
        row.update(value=rec.value, est_rel_err=rec.est_rel_err,
                   l_max=rec.l_max_used, quad_pts=rec.quad_points_used or None,
                   p_max=rec.p_max_used or None)
    elif route == "pfa":
        if config.observable == "force":
            row["value"] = _pfa_force(geometry, pair, T)
        else:
            row["value"] = pfa.pfa_free_energy(geometry, pair, T)
    else:  # asym
        if config.observable == "force":
            if T != 0.0:
                raise ConfigError("observable",
                                  "asym route has no finite-T force expansion")
            row["value"] = asymptotics.force_asym_T0(geometry, pair).value
        elif T == 0.0:
            row["value"] = asymptotics.energy_asym_T0(geometry, pair).value
        else:
            row["value"] = asymptotics.free_energy_leading(geometry, pair, T)
        hint = d / min(config.r_A, config.r_B)
        if hint > asymptotics.VALIDITY_WARN:
            print(f"warning: asym route used at d/min(r) = {hint:.3g} "
                  f"(> {asymptotics.VALIDITY_WARN})", file=sys.stderr)
    return row, failed


def _eval_index(args):
    config, route, d, T = args
    return evaluate_point(config, route, d, T)


def run(config: RunConfig) -> tuple[int, list[dict]]:
    """Execute all (route, d, T) points; rows come back in input order."""
    points = [(config, route, d, T)
              for d in config.d_values
              for T in config.temperatures
              for route in config.routes]
    any_failed = False
    if config.threads > 1 and len(points) > 1:
        with futures.ProcessPoolExecutor(max_workers=config.threads) as pool:
            results = list(pool.map(_eval_index, points))
    else:
        results = [_eval_index(p) for p in points]
    rows = []
    for row, failed in results:
        rows.append(row)
        any_failed = any_failed or failed
    if len(set(config.routes)) >= 2:
        _append_compare(rows, config)
    code = EXIT_OK
    if any_failed and not config.allow_partial:
        code = EXIT_NOT_CONVERGED
    return code, rows


def _append_compare(rows: list[dict], config: RunConfig) -> None:
    """Pairwise relative deviations between routes at each (d, T)."""
    pairs = []
    routes = sorted(set(config.routes))
    for i, r1 in enumerate(routes):
        for r2 in routes[i + 1:]:
            pairs.append((r1, r2))
    by_point: dict[tuple, dict[str, float]] = {}
    for row in rows:
        by_point.setdefault((row["d"], row["T"]), {})[row["route"]] = row["value"]
    for row in rows:
        vals = by_point[(row["d"], row["T"])]
        for r1, r2 in pairs:
            key = f"dev_{r1}_{r2}"
            if r1 in vals and r2 in vals and vals[r2] not in (None, 0.0) \
                    and vals[r1] is not None:
                row[key] = abs(vals[r1] / vals[r2] - 1.0)
            else:
                row[key] = None


# ---------------------------------------------------------------------------
# Output encoders
# ---------------------------------------------------------------------------

def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def encode_csv(rows: list[dict]) -> str:
    extra = [k for k in rows[0] if k.startswith("dev_")] if rows else []
    header = CSV_HEADER + ("," + ",".join(extra) if extra else "")
    lines = [header]
    base_keys = CSV_HEADER.split(",")
    for row in rows:
        vals = [_fmt(row.get(k)) for k in base_keys] + [_fmt(row.get(k)) for k in extra]
        lines.append(",".join(vals))
    return "\n".join(lines) + "\n"


def encode_json(rows: list[dict]) -> str:
    doc = {
        "units": "hbar = c = k_B = 1; energies in 1/length, forces in 1/length^2",
        "rows": rows,
    }
    return json.dumps(doc, indent=2, sort_keys=False) + "\n"


def encode_pretty(rows: list[dict]) -> str:
    if not rows:
        return "(no rows)\n"
    cols = CSV_HEADER.split(",") + [k for k in rows[0] if k.startswith("dev_")]
    cells = [[_fmt(r.get(c)) for c in cols] for r in rows]
    widths = [max(len(c), *(len(row[i]) for row in cells)) for i, c in enumerate(cols)]
    out = ["units: hbar = c = k_B = 1 (energy ~ 1/length, force ~ 1/length^2)"]
    out.append("  ".join(c.ljust(w) for c, w in zip(cols, widths)))
    for row in cells:
        out.append("  ".join(v.ljust(w) for v, w in zip(row, widths)))
    return "\n".join(out) + "\n"


def write_output(rows: list[dict], config: RunConfig) -> None:
    enc = {"csv": encode_csv, "json": encode_json, "pretty": encode_pretty}
    text = enc[config.out_format](rows)
    if config.out_path:
        with open(config.out_path, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


# ---------------------------------------------------------------------------
# Convergence report
# ---------------------------------------------------------------------------

def convergence_report(config: RunConfig) -> str:
    """Value versus l_max, quadrature and Matsubara resolution for the exact
    route at the first sweep point."""
    if "exact" not in config.routes:
        raise ConfigError("routes", "convergence report requires the exact route")
    d = config.d_values[0]
    T = config.temperatures[0]
    geometry = config.geometry(d)
    pair = config.pair
    spec = config.spec

    def value_at(l_max: int, n: int) -> float:
        pinned = replace(spec, l_max_initial=l_max, l_max_cap=l_max,
                         quad_points_initial=n)
        if T == 0.0:
            total, _, _ = spectral._integral_once(
                geometry, pair, l_max, pinned, spectral._T_EDGES, n)
            return total / (4.0 * math.pi * d)
        total, _, _ = spectral._matsubara_sum(geometry, pair, T, l_max, pinned)
        return T * total

    lines = [
        "convergence report",
        f"geometry: mode={config.mode.value} r_A={config.r_A!r} "
        f"r_B={config.r_B!r} d={d!r}",
        f"pair: field={config.field_type.value} {config.pair.label()}  T={T!r}",
        "",
        "l_max escalation (x1.5), fixed quadrature:",
        "  l_max  value                    |rel change|   rate",
    ]
    l0 = spec.l_max_initial or spectral._auto_l_max(geometry)
    n0 = spec.quad_points_initial
    seq = [max(4, math.ceil(l0 / 1.5 ** 2)), math.ceil(l0 / 1.5), l0,
           math.ceil(1.5 * l0)]
    vals = [value_at(l, n0) for l in seq]
    prev_delta = None
    for i, (l, v) in enumerate(zip(seq, vals)):
        if i == 0:
            lines.append(f"  {l:5d}  {v!r:24s}")
            continue
        delta = abs(v - vals[i - 1]) / max(abs(v), 1e-300)
        rate = "" if not prev_delta else f"{delta / prev_delta:.3f}"
        lines.append(f"  {l:5d}  {v!r:24s} {delta:.3e}      {rate}")
        prev_delta = delta
    lines.append("")
    lines.append("quadrature refinement at the largest l_max:"
                 if T == 0.0 else "Matsubara tail at the largest l_max:")
    if T == 0.0:
        lines.append("  nodes/panel  value                    |rel change|")
        prev = None
        for n in (n0, 2 * n0, 4 * n0):
            v = value_at(seq[-1], n)
            if prev is None:
                lines.append(f"  {n:11d}  {v!r:24s}")
            else:
                lines.append(f"  {n:11d}  {v!r:24s} "
                             f"{abs(v - prev) / max(abs(v), 1e-300):.3e}")
            prev = v
    else:
        pinned = replace(spec, l_max_initial=seq[-1], l_max_cap=seq[-1])
        dT = d * T
        p_hi = max(3, math.ceil(math.log(1.0 / spec.matsubara_tail_tol)
                                / (4.0 * math.pi * dT)) + 2)
        xis = np.empty(p_hi + 1)
        xis[0] = spectral._xi_floor(geometry)
        xis[1:] = 2.0 * math.pi * T * np.arange(1, p_hi + 1)
        g = spectral._trace_batch(xis, geometry, pair, seq[-1], pinned)
        lines.append("  p_max  value                    |rel change|")
        prev = None
        for p in range(1, p_hi + 1):
            v = T * (0.5 * g[0] + float(np.sum(g[1:p + 1])))
            if prev is None:
                lines.append(f"  {p:5d}  {v!r:24s}")
            else:
                lines.append(f"  {p:5d}  {v!r:24s} "
                             f"{abs(v - prev) / max(abs(v), 1e-300):.3e}")
            prev = v
    if config.field_type is Field.EM:
        k = asymptotics.cc_force_coefficients()
        fit = asymptotics.CC_FORCE_FIT_REFERENCE
        lines.append("")
        lines.append("mirror-pair force bracket coefficients:")
        lines.append(f"  exact: k1={k['k1']:.4f} k2={k['k2']:.4f} k3={k['k3']:.4f}")
        lines.append("  reference numeric fit: "
                     + " ".join(f"{name}={v:.2f}(+-{e:.2f})"
                                for name, (v, e) in fit.items()))
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Command line front end
# ---------------------------------------------------------------------------

def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="flat key=value configuration file")
    p.add_argument("--route", action="append", choices=ROUTES,
                   help="computation route (repeatable)")
    p.add_argument("--out", help="output path (default stdout)")
    p.add_argument("--format", choices=FORMATS, help="output format")
    p.add_argument("--threads", type=int,
                   help="worker processes for sweep points "
                        "(default CASIMIR_THREADS or 1)")
    p.add_argument("--deterministic", action="store_true",
                   help="pin deterministic summation/output ordering "
                        "(always on; flag asserts it)")
    p.add_argument("--allow-partial", action="store_true",
                   help="exit 0 even if an exact computation failed to converge")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                   help="override any config key (repeatable)")


def _collect_raw(args: argparse.Namespace) -> dict[str, str]:
    raw: dict[str, str] = {}
    if args.config:
        raw.update(parse_config_file(args.config))
    for item in args.set:
        if "=" not in item:
            raise ConfigError("--set", f"expected KEY=VALUE, got {item!r}")
        k, v = item.split("=", 1)
        raw[k.strip()] = v.strip()
    if args.route:
        raw["routes"] = ",".join(args.route)
    if args.out:
        raw["out"] = args.out
    if args.format:
        raw["format"] = args.format
    if args.threads is not None:
        raw["threads"] = str(args.threads)
    if args.deterministic:
        raw["deterministic"] = "true"
    if args.allow_partial:
        raw["allow_partial"] = "true"
    return raw


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="casimir-spheres",
        description="Casimir interaction between two spheres: exact "
                    "functional-determinant, PFA and asymptotic routes.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, hlp in (("compute", "single separation"),
                      ("sweep", "sweep over separations"),
                      ("compare", "sweep with at least two routes"),
                      ("convergence", "convergence report for the exact route")):
        p = sub.add_parser(name, help=hlp)
        _add_common(p)
    args = parser.parse_args(argv)

    try:
        raw = _collect_raw(args)
        config = build_config(raw)
        if args.command == "compute" and len(config.d_values) != 1:
            raise ConfigError("d_values", "compute expects a single separation")
        if args.command == "compare" and len(set(config.routes)) < 2:
            raise ConfigError("routes", "compare needs at least two routes")
        if args.command == "convergence":
            report = convergence_report(config)
            if config.out_path:
                with open(config.out_path, "w") as fh:
                    fh.write(report)
            else:
                sys.stdout.write(report)
            return EXIT_OK
        code, rows = run(config)
        write_output(rows, config)
        return code
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    raise SystemExit(main())
