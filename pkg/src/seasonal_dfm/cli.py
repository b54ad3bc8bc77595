"""Command-line front end: ``seasonal-dfm <subcommand> ...``.

Exit codes: 0 success, 2 usage error, 3 data error, 4 numerical error.
"""
import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from ._io import atomic_write_text, sha256_file
from .dfm import FactorSpec, fit as fit_dfm, refit_residual_diagnostic, write_fit
from .exceptions import DataError, ImputationError, NumericalError, SeasonalDFMError
from .impute import BACKWARD_CUTOFF, HORIZON, impute_panel
from .panel import Panel, attach_meta, load_csv, load_station_meta, panel_to_csv_text, standardize
from .sarima import SarimaSpec, fit_sarima, monthly_pattern
from .sgcv import MODES, SYMMETRIZE, eigen_sequence
from .simulate import gen_scenario, load_scenario
from .svg import line_chart

log = logging.getLogger("seasonal_dfm")

EXIT_USAGE, EXIT_DATA, EXIT_NUMERICAL = 2, 3, 4
DEFAULT_SARIMA = ("2,0,0,0,1,1", "1,0,0,0,1,1")


class StageError(Exception):
    def __init__(self, stage, exc):
        self.stage = stage
        self.exc = exc
        super().__init__(f"[{stage}] {exc}")


class _stage:
    def __init__(self, name):
        self.name = name

    def __enter__(self):
        return self

    def __exit__(self, et, exc, tb):
        if exc is not None and isinstance(exc, (SeasonalDFMError, OSError)) and not isinstance(exc, StageError):
            raise StageError(self.name, exc) from exc
        return False


def _write_json(path, obj):
    atomic_write_text(path, json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _manifest(args, out, inputs):
    config = {k: v for k, v in sorted(vars(args).items()) if k not in ("func", "out", "verbose")}
    _write_json(
        Path(out) / "pipeline.json",
        {
            "tool": "seasonal-dfm",
            "version": __version__,
            "command": args.command,
            "config": config,
            "inputs": {str(p): sha256_file(p) for p in inputs},
        },
    )


def _load(args):
    with _stage("load"):
        panel = load_csv(args.input)
        if getattr(args, "stations", None):
            panel = attach_meta(panel, load_station_meta(args.stations))
    return panel


def _impute(args, panel, out):
    try:
        filled, report = impute_panel(panel, args.backward_cutoff, args.horizon, args.season)
    except ImputationError as exc:
        # CSV line of time t is t + 1 (header on line 1)
        line = f":{exc.t + 1}" if exc.t else ""
        raise StageError("impute", type(exc)(f"{args.input}{line}: {exc}")) from exc
    if report.entries:
        atomic_write_text(Path(out) / "imputation_report.csv", report.to_csv_text())
        atomic_write_text(Path(out) / "imputation_report.json", report.to_json())
    return filled, report


def _prepare(args, out):
    """load -> impute (if needed) -> standardize (unless ``--raw``)."""
    panel = _load(args)
    if panel.has_missing:
        panel, _ = _impute(args, panel, out)
    if getattr(args, "raw", False):
        return panel, panel, None
    with _stage("standardize"):
        z, params = standardize(panel)
    return panel, z, params


def _spec(args):
    return FactorSpec(args.r1, args.r2, args.r3, args.pca_lag, args.d, args.season)


def cmd_impute(args):
    out = Path(args.out)
    panel = _load(args)
    filled, report = _impute(args, panel, out)
    atomic_write_text(out / "imputed.csv", panel_to_csv_text(filled))
    atomic_write_text(out / "imputation_report.csv", report.to_csv_text())
    atomic_write_text(out / "imputation_report.json", report.to_json())
    _manifest(args, out, [args.input])
    print(f"imputed {len(report)} cells in {panel.n} series")
    return 0


def cmd_eigens(args):
    out = Path(args.out)
    _, z, _ = _prepare(args, out)
    with _stage("eigens"):
        seq = eigen_sequence(z, args.max_lag, min(args.top_k, z.n), args.d, args.season, args.mode)
    atomic_write_text(out / "eigens.csv", seq.to_csv_text())
    atomic_write_text(out / "eigens.svg", seq.to_svg(f"Top {seq.k} |eigenvalues| of C(h), {args.mode}"))
    _manifest(args, out, [args.input])
    print(f"wrote eigenvalue magnitudes for h=0..{args.max_lag}, k={seq.k}")
    return 0


def _sarima_specs(args, r):
    orders = list(args.sarima or DEFAULT_SARIMA)
    while len(orders) < r:
        orders.append(orders[-1])
    return [SarimaSpec.parse(o, args.season) for o in orders[:r]]


def cmd_fit(args):
    out = Path(args.out)
    panel, z, params = _prepare(args, out)
    with _stage("dfm"):
        fit = fit_dfm(z, _spec(args))
    std_rows = ["station,mean,sd"] + [f"{i},{m!r},{s!r}" for i, m, s in zip(z.ids, params.means, params.sds)]
    atomic_write_text(out / "standardization.csv", "\n".join(std_rows) + "\n")
    write_fit(fit, out / "dfm")

    time = z.time
    t_axis = np.arange(1, time.length + 1)
    sarima_summary = {}
    for j, name in enumerate(fit.factor_names):
        f = fit.factors[j]
        atomic_write_text(out / f"factor_{name}.svg", line_chart([(name, t_axis, f)], title=f"Factor {name}", xlabel="t"))
        pat = monthly_pattern(f, time)
        atomic_write_text(out / f"pattern_{name}.csv", pat.to_csv_text())
        atomic_write_text(out / f"pattern_{name}.svg", pat.to_svg(f"Monthly pattern of {name}"))
    if not args.no_sarima:
        for name, spec, f in zip(fit.factor_names, _sarima_specs(args, fit.spec.r), fit.factors):
            with _stage(f"sarima {name}"):
                res = fit_sarima(f, spec, seed=args.seed)
            atomic_write_text(out / f"sarima_{name}.json", res.to_json())
            sarima_summary[name] = {"order": str(spec), "converged": res.converged}
    for sid in args.plot_station or []:
        if sid not in z.ids:
            raise StageError("plot", DataError(f"unknown station {sid!r}"))
        i = z.ids.index(sid)
        styles = {"observed": {"stroke": "#888888"}, "common": {"stroke": "#d62728"}}
        svg = line_chart(
            [("observed", t_axis, z.values[i]), ("common", t_axis, fit.common[i])],
            title=f"{sid}: standardized series and common component", xlabel="t", styles=styles,
        )
        atomic_write_text(out / f"station_{sid}.svg", svg)
        pat = monthly_pattern(z.values[i], time)
        atomic_write_text(out / f"station_{sid}_pattern.svg", pat.to_svg(f"Monthly pattern of {sid}"))
    _manifest(args, out, [args.input])
    share = fit.explained[-1]
    print(f"explained share ({fit.spec.r} factors): {share:.4f}")
    for name, s in sarima_summary.items():
        print(f"{name}: {s['order']} converged={s['converged']}")
    return 0


def cmd_residual_eigens(args):
    out = Path(args.out)
    _, z, _ = _prepare(args, out)
    with _stage("dfm"):
        fit = fit_dfm(z, _spec(args))
    with _stage("residual-eigens"):
        seq = refit_residual_diagnostic(fit, args.max_lag, min(args.top_k, z.n), args.mode)
    atomic_write_text(out / "residual_eigens.csv", seq.to_csv_text())
    atomic_write_text(out / "residual_eigens.svg", seq.to_svg(f"Residual |eigenvalues| after r={fit.spec.r} factors"))
    _manifest(args, out, [args.input])
    print(f"wrote residual eigenvalue magnitudes for h=0..{args.max_lag}")
    return 0


def cmd_pattern(args):
    out = Path(args.out)
    panel = _load(args)
    cols = [c for c in panel.ids if c != "t"]
    if args.column:
        missing = [c for c in args.column if c not in cols]
        if missing:
            raise StageError("pattern", DataError(f"unknown column(s) {missing}"))
        cols = args.column
    for c in cols:
        x = panel.values[panel.ids.index(c)]
        if not np.all(np.isfinite(x)):
            raise StageError("pattern", DataError(f"column {c!r} has missing values; impute first"))
        pat = monthly_pattern(x, panel.time)
        atomic_write_text(out / f"pattern_{c}.csv", pat.to_csv_text())
        atomic_write_text(out / f"pattern_{c}.svg", pat.to_svg(f"Monthly pattern of {c}"))
    _manifest(args, out, [args.input])
    print(f"wrote monthly patterns for {len(cols)} series")
    return 0


def cmd_simulate(args):
    out = Path(args.out)
    with _stage("config"):
        scenario = load_scenario(args.config)
    if args.seed is not None:
        scenario.seed = args.seed
    with _stage("simulate"):
        sim = gen_scenario(scenario)
    sim.write(out)
    atomic_write_text(out / "scenario.json", Path(args.config).read_text(encoding="utf-8"))
    _manifest(args, out, [args.config])
    print(f"seed={scenario.seed} n={scenario.n} T={scenario.T} holes={int(sim.panel.missing.sum())}")
    return 0


def build_parser():
    fmt = argparse.ArgumentDefaultsHelpFormatter
    p = argparse.ArgumentParser(prog="seasonal-dfm", description=__doc__.splitlines()[0], formatter_class=fmt)
    p.add_argument("--version", action="version", version=__version__)
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, season=True):
        sp.add_argument("--out", required=True, help="output directory")
        if season:
            sp.add_argument("--season", type=int, default=12, help="season length S")

    def imputation(sp):
        sp.add_argument("--horizon", type=int, default=HORIZON, help="years averaged by each estimate")
        sp.add_argument("--backward-cutoff", type=int, default=BACKWARD_CUTOFF,
                        help="holes at t <= cutoff use the following years")
        sp.add_argument("--stations", help="optional id,name,latitude,longitude sidecar CSV")

    def sgcv_flags(sp):
        sp.add_argument("--d", type=int, default=1, help="integration order in the (S/T)^(2d) scale")
        sp.add_argument("--max-lag", type=int, default=36, help="largest lag H")
        sp.add_argument("--top-k", type=int, default=5, help="eigenvalues kept per lag")
        sp.add_argument("--mode", choices=MODES, default=SYMMETRIZE,
                        help="eigenvalues of (C+C')/2 or moduli of eigenvalues of C(h)")

    def factor_flags(sp):
        sp.add_argument("--r1", type=int, default=0, help="nonstationary nonseasonal factors")
        sp.add_argument("--r2", type=int, default=2, help="nonstationary seasonal factors")
        sp.add_argument("--r3", type=int, default=0, help="stationary factors")
        sp.add_argument("--pca-lag", type=int, default=12, help="lag h of C(h) used for the loadings")

    sp = sub.add_parser("impute", help="fill missing cells", formatter_class=fmt)
    sp.add_argument("input")
    common(sp)
    imputation(sp)
    sp.set_defaults(func=cmd_impute)

    sp = sub.add_parser("eigens", help="SGCV eigenvalue lag sweep", formatter_class=fmt)
    sp.add_argument("input")
    common(sp)
    imputation(sp)
    sgcv_flags(sp)
    sp.add_argument("--raw", action="store_true", help="skip standardization (use the values as given)")
    sp.set_defaults(func=cmd_eigens)

    sp = sub.add_parser("fit", help="fit the factor model and SARIMA models of the factors", formatter_class=fmt)
    sp.add_argument("input")
    common(sp)
    imputation(sp)
    factor_flags(sp)
    sp.add_argument("--d", type=int, default=1, help="integration order in the (S/T)^(2d) scale")
    sp.add_argument("--sarima", action="append", metavar="p,d,q,P,D,Q",
                    help=f"SARIMA order per factor, repeatable (default: {' and '.join(DEFAULT_SARIMA)})")
    sp.add_argument("--no-sarima", action="store_true", help="skip SARIMA fits")
    sp.add_argument("--seed", type=int, default=0, help="seed for SARIMA random starts")
    sp.add_argument("--plot-station", action="append", metavar="ID", help="write observed-vs-common SVG")
    sp.set_defaults(func=cmd_fit)

    sp = sub.add_parser("residual-eigens", help="SGCV eigenvalue sweep of fit residuals", formatter_class=fmt)
    sp.add_argument("input")
    common(sp)
    imputation(sp)
    factor_flags(sp)
    sgcv_flags(sp)
    sp.set_defaults(func=cmd_residual_eigens)

    sp = sub.add_parser("pattern", help="monthly seasonal pattern of each column", formatter_class=fmt)
    sp.add_argument("input", help="wide date,<col>... CSV (e.g. dfm/factors.csv)")
    common(sp, season=False)
    sp.add_argument("--column", action="append", help="restrict to these columns")
    sp.set_defaults(func=cmd_pattern)

    sp = sub.add_parser("simulate", help="generate a synthetic panel from a JSON scenario", formatter_class=fmt)
    sp.add_argument("config")
    common(sp, season=False)
    sp.add_argument("--seed", type=int, default=None, help="override the config seed")
    sp.set_defaults(func=cmd_simulate)
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except StageError as exc:
        print(f"seasonal-dfm: error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL if isinstance(exc.exc, NumericalError) else EXIT_DATA
    except NumericalError as exc:
        print(f"seasonal-dfm: numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (DataError, OSError) as exc:
        print(f"seasonal-dfm: error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
