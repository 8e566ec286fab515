"""Command-line front end.

Exit status: 0 on success, 2 on unusable input or configuration, and 1 when
``--fail-on-reject`` is given and the null hypothesis is rejected.
"""

import argparse
from dataclasses import dataclass, field
import json
import math
from pathlib import Path
import sys

from . import __version__
from .bootstrap import AsymptoticConfig, BootstrapConfig, TestReport, run_test
from .dgp import DgpSpec, generate, to_csv
from .experiments import ExperimentConfig, parse_cell_id, run_experiment, write_outputs
from .io import InputError, atomic_write_text, read_series_csv, sha256_file
from .limit import VarianceProfile, simulate_quantiles
from .series import InvalidSeriesError, as_series
from .statistics import DegenerateSeriesError, changepoint_estimate, cusum_statistic, \
    default_window

SCHEMA_VERSION = 1
EXIT_OK, EXIT_REJECT, EXIT_INPUT = 0, 1, 2


class UsageError(Exception):
    pass


@dataclass
class CliReport:
    """A machine-readable command result plus input provenance."""

    command: str
    result: dict
    input: dict | None = None
    version: str = __version__
    schema_version: int = SCHEMA_VERSION
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        d = {"schema_version": self.schema_version, "version": self.version,
             "command": self.command, "input": self.input, "result": self.result}
        if self.extra:
            d["extra"] = self.extra
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, allow_nan=False)

    @classmethod
    def from_json(cls, text: str):
        d = json.loads(text)
        return cls(command=d["command"], result=d["result"], input=d.get("input"),
                   version=d["version"], schema_version=d["schema_version"],
                   extra=d.get("extra", {}))


def _json_safe(x):
    if isinstance(x, float) and not math.isfinite(x):
        return "nan" if math.isnan(x) else ("inf" if x > 0 else "-inf")
    return x


def _load_input(path, label_column=None):
    values, labels, header = read_series_csv(path, label_column)
    try:
        y = as_series(values)
    except InvalidSeriesError as exc:
        raise InputError(f"{path}: {exc}") from None
    prov = {"path": str(path), "n": int(y.shape[0]), "sha256": sha256_file(path)}
    return y, labels, prov


def _load_profile(arg):
    if arg is None or arg == "linear":
        return VarianceProfile.constant()
    try:
        return VarianceProfile.from_dict(json.loads(Path(arg).read_text()))
    except (OSError, json.JSONDecodeError, TypeError, KeyError) as exc:
        raise InputError(f"cannot load eta profile {arg}: {exc}") from None


def _emit(report: CliReport, output):
    text = report.to_json() + "\n"
    if output:
        atomic_write_text(output, text)
    sys.stdout.write(text)


def _label(labels, tau):
    if labels is None or tau is None:
        return None
    return labels[tau - 1]


def cmd_test(args) -> int:
    y, labels, prov = _load_input(args.input, args.label_column)
    if args.stat == "cusum":
        if args.method == "bootstrap":
            raise UsageError("the CUSUM test is only available with asymptotic critical values")
        report = _cusum_report(y, args)
    elif args.method == "asymptotic":
        kind = "Q" if args.stat == "q" else "R"
        profile = _load_profile(args.eta)
        table = simulate_quantiles("S" if kind == "Q" else "T", profile, m=args.m,
                                   runs=args.runs, levels=(1.0 - args.alpha,),
                                   seed=args.seed, workers=args.workers)
        report = run_test(y, AsymptoticConfig(table, kind, args.alpha), args.workers)
        report.extra = {"eta": profile.id, "m": args.m, "runs": args.runs}
    else:
        cfg = BootstrapConfig(B=args.B, seed=args.seed,
                              statistic_kind="Q" if args.stat == "q" else "R", alpha=args.alpha)
        report = run_test(y, cfg, args.workers)
    result = report.to_dict()
    result["tau_hat_label"] = _label(labels, report.tau_hat)
    _emit(CliReport("test", result, prov), args.output)
    if args.fail_on_reject and report.reject:
        return EXIT_REJECT
    return EXIT_OK


def _cusum_report(y, args):
    M = args.M if args.M is not None else default_window(y.shape[0])
    if M < 1:
        raise UsageError("--M must be at least 1")
    table = simulate_quantiles("BB", m=args.m, runs=args.runs, levels=(1.0 - args.alpha,),
                               seed=args.seed, workers=args.workers)
    crit = table.quantile(1.0 - args.alpha)
    try:
        stat, degenerate = cusum_statistic(y, M), False
    except DegenerateSeriesError:
        stat, degenerate = 0.0, True
    p = 1.0 if degenerate else table.p_value(stat)
    report = TestReport("CUSUM", stat, "asymptotic", crit, p, stat > crit, args.alpha,
                        seed=args.seed, degenerate=degenerate,
                        extra={"M": M, "m": args.m, "runs": args.runs})
    if report.reject:
        report.tau_hat = changepoint_estimate(y, method="envelope").tau_hat
    return report


def cmd_estimate(args) -> int:
    y, labels, prov = _load_input(args.input, args.index_column)
    est = changepoint_estimate(y)
    result = {
        "tau_hat": est.tau_hat,
        "tau_hat_fraction": est.tau_hat / y.shape[0],
        "tau_hat_label": _label(labels, est.tau_hat),
        "objective": _json_safe(float(est.objective)),
        "runner_up_gap": _json_safe(float(est.runner_up_gap)),
    }
    _emit(CliReport("estimate", result, prov), args.output)
    return EXIT_OK


def _parse_levels(text):
    try:
        levels = [float(t) / 100.0 for t in text.split(",") if t.strip()]
    except ValueError:
        raise UsageError(f"cannot parse --levels {text!r}") from None
    if not levels or not all(0.0 < lv < 1.0 for lv in levels):
        raise UsageError("levels are percentages strictly between 0 and 100")
    return tuple(levels)


def cmd_crit(args) -> int:
    runs = args.runs if args.runs is not None else (20_000 if args.desk else 100_000)
    kind = {"s": "S", "t": "T", "bb": "BB"}[args.functional]
    profile = _load_profile(args.eta)
    table = simulate_quantiles(kind, profile, m=args.m, runs=runs,
                               levels=_parse_levels(args.levels), seed=args.seed,
                               workers=args.workers)
    json_path = None
    if args.output:
        out = Path(args.output)
        atomic_write_text(out.with_suffix(".csv"), table.to_csv())
        json_path = out.with_suffix(".json")
    _emit(CliReport("crit", table.to_dict()), json_path)
    return EXIT_OK


def cmd_generate(args) -> int:
    if args.spec:
        try:
            spec = DgpSpec.from_json(Path(args.spec).read_text())
        except (OSError, json.JSONDecodeError, TypeError) as exc:
            raise InputError(f"cannot load DGP spec {args.spec}: {exc}") from None
    else:
        if args.n is None:
            raise UsageError("--n is required without --spec")
        spec = DgpSpec(n=args.n, mu=args.mu, delta=args.delta, tau=args.tau, errors=args.dgp,
                       innovations=args.innovations)
    text = to_csv(generate(spec, args.seed))
    if args.output:
        atomic_write_text(args.output, text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_experiment(args) -> int:
    if args.config:
        try:
            d = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise InputError(f"cannot load config {args.config}: {exc}") from None
    else:
        d = {}
    if args.cells:
        d["cells"] = [c.strip() for c in args.cells.split(",") if c.strip()]
    if "cells" not in d:
        raise UsageError("no cells given; use --cells or --config")
    if not args.config:
        d.setdefault("repetitions", 1000 if args.desk else 5000)
        d.setdefault("B", 500 if args.desk else 2000)
    for key, val in (("repetitions", args.reps), ("B", args.B), ("master_seed", args.seed)):
        if val is not None:
            d[key] = val
    if args.methods:
        d["methods"] = [m.strip() for m in args.methods.split(",") if m.strip()]
    if isinstance(d.get("cells"), list):
        d["cells"] = [parse_cell_id(c) if isinstance(c, str) else c for c in d["cells"]]
    try:
        cfg = ExperimentConfig.from_dict(d)
    except TypeError as exc:
        raise UsageError(f"bad experiment config: {exc}") from None
    result = run_experiment(cfg, args.workers)
    write_outputs(result, args.outdir, atomic_write_text)
    _emit(CliReport("experiment", {"outdir": str(args.outdir), "rows": result.table.rows}),
          None)
    return EXIT_OK


def _add_sim(p, runs_default=100_000):
    p.add_argument("--m", type=int, default=1000, help="grid size for limit simulations")
    p.add_argument("--runs", type=int, default=runs_default,
                   help="Monte-Carlo runs for limit simulations")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sncusum", description="Self-normalized changepoint tests for a mean change.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("test", help="test for a change in the mean")
    p.add_argument("--input", required=True)
    p.add_argument("--stat", choices=("q", "r", "cusum"), default="q",
                   help="cusum is max|partial sum| / sqrt(n * Bartlett LRV), compared with "
                        "sup|Brownian bridge| quantiles")
    p.add_argument("--method", choices=("bootstrap", "asymptotic"), default=None,
                   help="critical values; default bootstrap (asymptotic for cusum)")
    p.add_argument("--B", type=int, default=2000)
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--eta", default="linear", help="'linear' or a JSON variance profile")
    p.add_argument("--M", type=int, default=None, help="Bartlett window for cusum")
    p.add_argument("--label-column", default=None)
    p.add_argument("--fail-on-reject", action="store_true")
    p.add_argument("--output", default=None)
    p.add_argument("--workers", type=int, default=1)
    _add_sim(p)
    p.set_defaults(func=cmd_test)

    p = sub.add_parser("estimate", help="estimate the changepoint location")
    p.add_argument("--input", required=True)
    p.add_argument("--index-column", default=None)
    p.add_argument("--output", default=None)
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("crit", help="simulate critical values of a limit functional")
    p.add_argument("--functional", choices=("s", "t", "bb"), required=True)
    p.add_argument("--eta", default="linear")
    p.add_argument("--m", type=int, default=1000)
    p.add_argument("--runs", type=int, default=None, help="default 100000 (20000 with --desk)")
    p.add_argument("--levels", default="90,95,97.5,99,99.5", help="comma-separated percentages")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--desk", action="store_true")
    p.add_argument("--output", default=None, help="path stem for the .json and .csv tables")
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_crit)

    p = sub.add_parser("generate", help="simulate a series from one of the study's models")
    p.add_argument("--dgp", default="iid", choices=("iid", "ar1", "ar1_ar1", "ar1_x10",
                                                     "arch1_inc"))
    p.add_argument("--innovations", default="normal", choices=("normal", "t3"))
    p.add_argument("--n", type=int, default=None)
    p.add_argument("--mu", type=float, default=0.0)
    p.add_argument("--delta", type=float, default=0.0)
    p.add_argument("--tau", type=int, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--spec", default=None, help="JSON model specification")
    p.add_argument("--output", default=None)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("experiment", help="run a size/power simulation study")
    p.add_argument("--config", default=None)
    p.add_argument("--cells", default=None, help="comma-separated cell ids, e.g. iid_null_n400")
    scale = p.add_mutually_exclusive_group()
    scale.add_argument("--desk", action="store_true", help="1000 repetitions, B=500")
    scale.add_argument("--full", action="store_true", help="5000 repetitions, B=2000 (default)")
    p.add_argument("--reps", type=int, default=None)
    p.add_argument("--B", type=int, default=None)
    p.add_argument("--methods", default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--outdir", default="experiment_out")
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_experiment)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if getattr(args, "method", "x") is None:
        args.method = "asymptotic" if args.stat == "cusum" else "bootstrap"
    try:
        return args.func(args)
    except (InputError, UsageError, InvalidSeriesError, ValueError, KeyError) as exc:
        print(f"sncusum {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
