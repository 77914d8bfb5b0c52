"""Command-line front end.

Examples:
  geodesic-lab psi --x 7
  geodesic-lab spectrum-validate
  geodesic-lab r-sum --x 1000 --t 20
  geodesic-lab mean-square psi --a 3
  geodesic-lab mean-square short --a 1e4 --eta 0.05
  geodesic-lab sweep --theorem 1 --a-min 1e3 --a-max 1e6 --points 12
  geodesic-lab sweep --theorem 2 --a-min 1e3 --a-max 1e6 --points 7 --t 5 10 tmax
  geodesic-lab explicit --x 5000 --force
  geodesic-lab partial-sum-check --x 1000 --t 30

Settings are resolved as flags > config file > environment > defaults.  The
config file (./geodesic-lab.toml unless --config is given) holds key = value
lines with keys spectrum_path, threads and out_format.  GEODESIC_LAB_DATA
points at a directory holding maass_pslz.txt.

Exit codes: 0 success, 2 validation error, 1 compute error.
"""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import arithmetic, explicit, meansquare, spectrum
from .errors import GeodesicLabError, ValidationError
from .report import Table

CONFIG_NAME = "geodesic-lab.toml"
CONFIG_KEYS = ("spectrum_path", "threads", "out_format")


@dataclass
class RunConfig:
    spectrum_path: Path
    out_format: str = "csv"
    out_path: Path | None = None
    threads: int = 1
    force: bool = False


def _parse_threads(value) -> int:
    if str(value).strip().lower() == "auto":
        return os.cpu_count() or 1
    try:
        n = int(value)
    except ValueError:
        raise ValidationError(f"threads must be a positive integer or AUTO, got {value!r}") from None
    if n < 1:
        raise ValidationError(f"threads must be >= 1, got {n}")
    return n


def read_config_file(path: Path) -> dict[str, str]:
    out = {}
    for lineno, raw in enumerate(path.read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValidationError(f"{path}:{lineno}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in CONFIG_KEYS:
            raise ValidationError(f"{path}:{lineno}: unknown key {key!r}")
        out[key] = value.strip("\"'")
    return out


def resolve_config(args: argparse.Namespace) -> RunConfig:
    settings = {"spectrum_path": str(spectrum.bundled_path()), "threads": "1", "out_format": "csv"}
    cfg_path = Path(args.config) if args.config else Path(CONFIG_NAME)
    if args.config and not cfg_path.is_file():
        raise ValidationError(f"config file not found: {cfg_path}")
    if cfg_path.is_file():
        settings.update(read_config_file(cfg_path))
    for key in CONFIG_KEYS:
        flag = getattr(args, key, None)
        if flag is not None:
            settings[key] = str(flag)
    fmt = settings["out_format"].lower()
    if fmt not in ("csv", "json"):
        raise ValidationError(f"out_format must be csv or json, got {fmt!r}")
    path = Path(settings["spectrum_path"])
    out_path = Path(args.out) if args.out else None
    if out_path is not None and not out_path.parent.exists():
        raise ValidationError(f"output directory does not exist: {out_path.parent}")
    return RunConfig(path, fmt, out_path, _parse_threads(settings["threads"]), args.force)


# ----------------------------------------------------------------------------
# subcommands; each returns a Table


def _build_spectrum(X: float, cfg: RunConfig) -> arithmetic.PsiStep:
    return arithmetic.length_spectrum(max(X, 4.0 + 1e-9), workers=cfg.threads)


def cmd_psi(args, cfg: RunConfig) -> Table:
    X = args.x
    if not X > 0:
        raise ValidationError(f"X must be positive, got {X}")
    step = _build_spectrum(X, cfg)
    if args.dump_spectrum:
        Path(args.dump_spectrum).write_text(step.to_csv())
    return Table(["X", "psi", "breakpoints"],
                 [[X, arithmetic.psi(X, step), len(step.traces)]])


def cmd_spectrum_validate(args, cfg: RunConfig) -> Table:
    path = Path(args.file) if args.file else cfg.spectrum_path
    table = _load(path)
    out = Table(["T", "count", "weyl_main", "residual"])
    out.comments.append(f"file: {path}")
    out.comments += [f"source: {line}" for line in table.source.splitlines()]
    out.comments.append(f"entries: {len(table)}; t_max: {table.t_max:.17g}; coverage: {table.coverage:.17g}")
    if table.t_max >= 10:
        worst = 0.0
        for T in np.linspace(10.0, table.t_max, args.points).tolist():
            r = spectrum.weyl_residual(table, T)
            worst = max(worst, abs(r))
            out.rows.append([T, table.count(T), T * T / 12.0, r])
        out.comments.append(f"max |weyl_residual|: {worst:.17g}")
    else:
        out.comments.append("table too short for the Weyl diagnostic (t_max < 10)")
    return out


def _load(path: Path) -> spectrum.SpectralTable:
    if not path.is_file():
        raise ValidationError(f"spectrum file not found: {path}")
    return spectrum.load_spectrum(path)


def _table(cfg: RunConfig) -> spectrum.SpectralTable:
    return _load(cfg.spectrum_path)


def cmd_r_sum(args, cfg: RunConfig) -> Table:
    table = _table(cfg)
    r = spectrum.r_sum(args.x, args.t, table)
    return Table(["X", "T", "count", "re", "im", "abs"],
                 [[args.x, args.t, table.count(args.t), r.real, r.imag, abs(r)]])


def cmd_mean_square(args, cfg: RunConfig) -> Table:
    kind = args.functional
    A = args.a
    if kind in ("psi", "short"):
        meansquare._check_A(A)
        step = _build_spectrum(2 * A, cfg)
        if kind == "psi":
            rep = meansquare.ms_psi_error(A, step)
        else:
            if args.eta is None:
                raise ValidationError("mean-square short needs --eta")
            rep = meansquare.ms_short_interval(A, args.eta, step)
    else:
        if args.t is None:
            raise ValidationError(f"mean-square {kind} needs --t")
        table = _table(cfg)
        fn = meansquare.ms_r_closed if kind == "r" else meansquare.ms_s_smooth
        rep = fn(A, args.t, table)
    return Table(["functional", "A", "T", "eta", "value", "method"],
                 [[rep.functional, rep.A, rep.T, rep.eta, rep.value, rep.method]])


def _parse_t_values(values, table) -> list[float]:
    out = []
    for v in values:
        if str(v).lower() == "tmax":
            out.append(table.t_max)
        else:
            try:
                out.append(float(v))
            except ValueError:
                raise ValidationError(f"bad --t value {v!r}") from None
    return out


def _fit_dict(fit: meansquare.ExponentFit) -> dict:
    return {"slope": fit.slope, "intercept": fit.intercept, "r2": fit.r2,
            "points": [list(p) for p in fit.points]}


def cmd_sweep(args, cfg: RunConfig) -> Table:
    th = meansquare.Theorem.parse(args.theorem)
    a_values = meansquare.log_grid(args.a_min, args.a_max, args.points)
    kwargs = {"workers": cfg.threads}
    if th is meansquare.Theorem.T2:
        table = _table(cfg)
        if not args.t:
            raise ValidationError("sweep --theorem 2 needs --t")
        kwargs.update(table=table, T_values=_parse_t_values(args.t, table))
    else:
        meansquare._check_A(min(a_values))
        kwargs["spectrum"] = _build_spectrum(2 * max(a_values), cfg)
        if th is meansquare.Theorem.T3:
            kwargs.update(eta_values=args.eta, eta_points=args.eta_points, eta_rule=args.eta_rule)
    res = meansquare.sweep(th, a_values, **kwargs)
    out = Table(["theorem", "A", "T", "eta", "value", "envelope", "ratio"])
    for row in res.rows:
        if row.error:
            out.comments.append(f"error row A={row.A:.17g} T={row.T} eta={row.eta}: {row.error}")
            continue
        out.rows.append([row.theorem, row.A, row.T, row.eta, row.value, row.envelope, row.ratio])
    out.fit = {}
    for key, fit in res.fits.items():
        out.comments.append(f"fit {key}: slope={fit.slope:.17g} intercept={fit.intercept:.17g} r2={fit.r2:.17g}")
        out.fit[key] = _fit_dict(fit)
    ratios = [r.ratio for r in res.rows if not r.error]
    if ratios:
        out.comments.append(f"max ratio: {max(ratios):.17g}")
    out.comments += res.notes
    if any(r.error for r in res.rows):
        args._row_errors = True
    return out


def cmd_explicit(args, cfg: RunConfig) -> Table:
    table = _table(cfg)
    X = args.x
    if not X > 2:
        raise ValidationError(f"X must exceed 2, got {X}")
    T = args.t if args.t is not None else explicit.default_truncation(X, table)
    step = _build_spectrum(X, cfg)
    rep = explicit.explicit_report(X, T, step, table, force=cfg.force)
    out = Table(["X", "T", "psi_exact", "psi_spectral", "residual", "bound"],
                [[rep.X, rep.T, rep.psi_exact, rep.psi_spectral, rep.residual, rep.bound]])
    if rep.forced:
        out.comments.append("forced: T outside the explicit-formula range 2 < T <= X^(1/2)/log^2 X")
    return out


def cmd_partial_sum_check(args, cfg: RunConfig) -> Table:
    d = explicit.partial_summation_check(args.x, args.t, _table(cfg))
    return Table(["X", "T", "discrepancy"], [[args.x, args.t, d]])


# ----------------------------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise ValidationError(message)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    g = common.add_argument_group("run settings")
    g.add_argument("--spectrum", dest="spectrum_path", help="spectral table file")
    g.add_argument("--format", dest="out_format", choices=["csv", "json"], type=str.lower)
    g.add_argument("--out", help="write output to this file instead of stdout")
    g.add_argument("--threads", help="worker count or AUTO")
    g.add_argument("--config", help=f"key=value config file (default ./{CONFIG_NAME})")
    g.add_argument("--force", action="store_true",
                   help="bypass the explicit-formula truncation range check")

    parser = _Parser(prog="geodesic-lab", description=__doc__.split("\n")[0],
                     epilog=__doc__.split("\n", 2)[2],
                     formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("psi", parents=[common], help="exact Psi(X)")
    p.add_argument("--x", type=float, required=True)
    p.add_argument("--dump-spectrum", metavar="CSV", help="also write the breakpoints (trace,log_norm,jump)")
    p.set_defaults(func=cmd_psi)

    p = sub.add_parser("spectrum-validate", parents=[common], help="load a table and report Weyl's law")
    p.add_argument("--file")
    p.add_argument("--points", type=int, default=50)
    p.set_defaults(func=cmd_spectrum_validate)

    p = sub.add_parser("r-sum", parents=[common], help="R(X,T) = sum_{t_j<=T} X^{i t_j}")
    p.add_argument("--x", type=float, required=True)
    p.add_argument("--t", type=float, required=True)
    p.set_defaults(func=cmd_r_sum)

    p = sub.add_parser("mean-square", parents=[common], help="square-mean functionals")
    p.add_argument("functional", choices=["psi", "r", "s", "short"])
    p.add_argument("--a", type=float, required=True)
    p.add_argument("--t", type=float)
    p.add_argument("--eta", type=float)
    p.set_defaults(func=cmd_mean_square)

    p = sub.add_parser("sweep", parents=[common], help="functional over an A grid with exponent fit")
    p.add_argument("--theorem", choices=["1", "2", "3"], required=True)
    p.add_argument("--a-min", type=float, required=True)
    p.add_argument("--a-max", type=float, required=True)
    p.add_argument("--points", type=int, required=True)
    p.add_argument("--t", nargs="+", help="T values for theorem 2 ('tmax' = table end)")
    p.add_argument("--eta", type=float, nargs="+", help="explicit eta values for theorem 3")
    p.add_argument("--eta-rule", choices=sorted(meansquare.ETA_RULES), default="theorem")
    p.add_argument("--eta-points", type=int, default=5)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("explicit", parents=[common], help="explicit formula residual")
    p.add_argument("--x", type=float, required=True)
    p.add_argument("--t", type=float)
    p.set_defaults(func=cmd_explicit)

    p = sub.add_parser("partial-sum-check", parents=[common], help="partial-summation identity")
    p.add_argument("--x", type=float, required=True)
    p.add_argument("--t", type=float, required=True)
    p.set_defaults(func=cmd_partial_sum_check)
    return parser


def run(argv=None) -> int:
    out_format = "csv"
    try:
        args = build_parser().parse_args(argv)
        cfg = resolve_config(args)
        out_format = cfg.out_format
        table = args.func(args, cfg)
        text = table.render(cfg.out_format)
        if cfg.out_path:
            cfg.out_path.write_text(text)
        else:
            sys.stdout.write(text)
        return 1 if getattr(args, "_row_errors", False) else 0
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except GeodesicLabError as exc:
        if out_format == "csv":
            sys.stdout.write(f"#error {exc}\n")
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except SystemExit as exc:  # --help
        return int(exc.code or 0)


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
