"""Command-line entry point.

One executable, one subcommand per pipeline stage:

    gen       write a synthetic data CSV plus labels
    rank      univariate feature ranking (made or entropy)
    select    multivariate feature selection (rfe or rfe-kmed)
    train     fit a one-class model on a data CSV
    score     per-lot decision values for a trained model
    eval      Total/ECC table from labeled flag sets
    errorbar  random-removal ensemble calibration

Values may come from a JSON config file (``--config``); explicit flags win.
Exit codes: 0 success, 1 validation problem, 2 runtime failure. Diagnostics
go to stderr, data to the requested files or stdout.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from datetime import datetime, timezone

import numpy as np

from . import errorbars, harness, multivariate, ocsvm, univariate
from .data import (
    DataMatrix,
    IngestOptions,
    fmt_float,
    load_csv,
    load_labels,
    restrict,
    save_csv,
    save_labels,
)
from .errors import MalformedCsv, WaferscreenError


class _UsageError(Exception):
    def __init__(self, parser: argparse.ArgumentParser, message: str):
        super().__init__(message)
        self.parser = parser


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # print synopsis, exit 1 via main
        raise _UsageError(self, message)


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON file with default values for this subcommand")
    p.add_argument(
        "--no-timestamp",
        action="store_true",
        help="suppress the timestamp comment line in outputs",
    )


class Cfg:
    """Flag values with config-file fallback."""

    def __init__(self, ns: argparse.Namespace):
        self.ns = ns
        self.file: dict = {}
        if getattr(ns, "config", None):
            with open(ns.config, "r", encoding="utf-8") as fh:
                self.file = json.load(fh)
            if not isinstance(self.file, dict):
                raise ValueError(f"{ns.config}: config must be a JSON object")

    def get(self, key: str, default=None):
        flag = getattr(self.ns, key, None)
        if flag is not None:
            return flag
        if key in self.file:
            return self.file[key]
        return default


def _stamp(cfg: Cfg) -> str | None:
    if cfg.ns.no_timestamp or cfg.file.get("no_timestamp"):
        return None
    return f"generated {datetime.now(timezone.utc).isoformat()}"


def _write_lines(path, lines: list[str], comment: str | None) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        if comment is not None:
            fh.write(f"# {comment}\n")
        fh.write("\n".join(lines) + "\n")


def _read_id_list(path) -> list[str]:
    out = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line and not line.startswith("#"):
                out.append(line)
    return out


def _kernel(cfg: Cfg) -> ocsvm.KernelSpec | None:
    kind = cfg.get("kernel")
    gamma = cfg.get("gamma")
    if kind is None:
        return None
    if kind == ocsvm.RBF:
        return ocsvm.KernelSpec(ocsvm.RBF, float(gamma) if gamma is not None else None)
    return ocsvm.KernelSpec(kind)


def _load_matrix(cfg: Cfg, path) -> DataMatrix:
    return load_csv(path, IngestOptions(impute_missing=not cfg.get("no_impute", False)))


def cmd_gen(ns: argparse.Namespace) -> int:
    cfg = Cfg(ns)
    spec = harness.SyntheticSpec(
        n_lots=int(cfg.get("lots", 100)),
        n_parametric=int(cfg.get("parametric", 20)),
        n_yield=int(cfg.get("n_yield", 30)),
        n_bad_lots=int(cfg.get("bad", 3)),
        defect_shift=float(cfg.get("shift", 3.0)),
        yield_sparsity=float(cfg.get("sparsity", 0.8)),
        seed=int(cfg.get("seed", 0)),
    )
    matrix, labels, meta = harness.generate(spec)
    stamp = _stamp(cfg)
    save_csv(matrix, ns.out, header_comment=stamp)
    save_labels(labels, ns.labels, header_comment=stamp)
    if cfg.get("meta"):
        with open(cfg.get("meta"), "w", encoding="utf-8") as fh:
            json.dump(
                {
                    "informative_ids": list(meta.informative_ids),
                    "bad_lot_ids": list(meta.bad_lot_ids),
                    "defect_shift": meta.defect_shift,
                },
                fh,
                indent=2,
            )
            fh.write("\n")
    print(f"wrote {matrix.n_lots} lots x {matrix.n_params} params", file=sys.stderr)
    return 0


def cmd_rank(ns: argparse.Namespace) -> int:
    cfg = Cfg(ns)
    matrix = _load_matrix(cfg, ns.input)
    method = cfg.get("method", univariate.METHOD_ENTROPY)
    if method == univariate.METHOD_MADE:
        ranking = univariate.rank_by_made(matrix, float(cfg.get("n_factor", 3.0)))
    elif method == univariate.METHOD_ENTROPY:
        ranking = univariate.rank_by_entropy(matrix, int(cfg.get("bins", 32)))
    else:
        raise ValueError(f"rank method must be made or entropy, got {method!r}")
    stamp = _stamp(cfg)
    if ns.out:
        _write_lines(ns.out, ranking.to_csv_lines(), stamp)
    else:
        print("\n".join(ranking.to_csv_lines()))
    top = cfg.get("top")
    if top is not None:
        ids = univariate.select_top(ranking, int(top))
        ordered = [pid for pid, _ in ranking.entries if pid in ids]
        if not ns.ids_out:
            raise ValueError("--top needs --ids-out")
        _write_lines(ns.ids_out, ordered, stamp)
    return 0


def cmd_select(ns: argparse.Namespace) -> int:
    cfg = Cfg(ns)
    matrix = _load_matrix(cfg, ns.input)
    method = cfg.get("method", univariate.METHOD_RFE)
    rfe_cfg = multivariate.RfeConfig(
        target_size=int(cfg.get("target", 10)),
        batch_remove=int(cfg.get("batch", 1)),
        nu=float(cfg.get("nu", 0.5)),
        kernel=_kernel(cfg),
        seed=int(cfg.get("seed", 0)),
    )
    threads = int(cfg.get("threads", 1))
    stamp = _stamp(cfg)
    if method == univariate.METHOD_RFE:
        selected, trace = multivariate.rfe(matrix, rfe_cfg, threads=threads)
        if ns.trace:
            _write_lines(ns.trace, trace.to_csv_lines(), stamp)
    elif method == univariate.METHOD_RFE_KMED:
        p_raw = cfg.get("p", multivariate.AUTO)
        p = p_raw if p_raw == multivariate.AUTO else int(p_raw)
        selected = multivariate.rfe_kmedoid(
            matrix, p, int(cfg.get("target", 10)), rfe_cfg, threads=threads
        )
    else:
        raise ValueError(f"select method must be rfe or rfe-kmed, got {method!r}")
    ordered = [pid for pid in matrix.param_ids if pid in selected]
    _write_lines(ns.out, ordered, stamp)
    print(f"selected {len(ordered)} of {matrix.n_params} parameters", file=sys.stderr)
    return 0


def cmd_train(ns: argparse.Namespace) -> int:
    cfg = Cfg(ns)
    matrix = _load_matrix(cfg, ns.input)
    if ns.features:
        matrix = restrict(matrix, set(_read_id_list(ns.features)))
    model, report = ocsvm.train(
        matrix,
        nu=float(cfg.get("nu", 0.5)),
        kernel=_kernel(cfg),
        tol=float(cfg.get("tol", 1e-6)),
        seed=int(cfg.get("seed", 0)),
    )
    ocsvm.save_model(model, ns.out, header_comment=_stamp(cfg))
    note = "" if report.converged else " (NOT converged)"
    print(
        f"trained on {matrix.n_lots} lots, {matrix.n_params} params; "
        f"{report.iterations} iterations, kkt {report.max_kkt_violation:.2e}{note}",
        file=sys.stderr,
    )
    return 0


def _load_calibration(path) -> errorbars.ErrorBarCalibration:
    with open(path, "r", encoding="utf-8") as fh:
        rows = [r for r in csv.reader(ln for ln in fh if not ln.startswith("#"))]
    if len(rows) < 2:
        raise MalformedCsv(f"{path}: expected a header and one calibration row")
    head, vals = rows[0], rows[1]
    rec = dict(zip(head, vals))
    return errorbars.ErrorBarCalibration(
        removal_fraction=float(rec["removal_fraction"]),
        ratio=float(rec["ratio"]),
        r_squared=float(rec["r_squared"]),
        n_models=int(rec["n_models"]),
        n_removed=int(rec["n_removed"]),
    )


def cmd_score(ns: argparse.Namespace) -> int:
    cfg = Cfg(ns)
    matrix = _load_matrix(cfg, ns.input)
    model = ocsvm.load_model(ns.model)
    # align columns to the model's feature order
    X = np.column_stack(
        [matrix.values[:, matrix.param_index(pid)] for pid in model.feature_ids]
    )
    values = ocsvm.decision_matrix(model, X)
    threshold = float(cfg.get("threshold", 0.0))

    grey: set[str] | None = None
    if ns.calibration:
        calibration = _load_calibration(ns.calibration)
        sigma_var = cfg.get("sigma_variable")
        if sigma_var is None:
            sigma_var = float(np.median(np.std(matrix.values, axis=0, ddof=1)))
        report = errorbars.grey_zone(
            dict(zip(matrix.lot_ids, map(float, values))),
            calibration,
            float(sigma_var),
        )
        grey = set(report.grey_lot_ids)
        print(
            f"grey zone: sigma_pred={report.sigma_pred:.6g}, "
            f"{len(grey)}/{matrix.n_lots} lots",
            file=sys.stderr,
        )

    header = "lot,score,flag" + ("" if grey is None else ",grey")
    lines = [header]
    flagged = []
    for lot, v in zip(matrix.lot_ids, values):
        flag = 1 if v < threshold else 0
        if flag:
            flagged.append(lot)
        row = f"{lot},{fmt_float(v)},{flag}"
        if grey is not None:
            row += f",{1 if lot in grey else 0}"
        lines.append(row)
    stamp = _stamp(cfg)
    _write_lines(ns.out, lines, stamp)
    if ns.flags_out:
        _write_lines(ns.flags_out, flagged, stamp)
    return 0


def cmd_eval(ns: argparse.Namespace) -> int:
    cfg = Cfg(ns)
    labels = load_labels(ns.labels)
    flags: dict[str, set[str]] = {}
    for item in ns.flags or []:
        if "=" not in item:
            raise ValueError(f"--flags expects NAME=PATH, got {item!r}")
        name, _, path = item.partition("=")
        flags[name] = set(_read_id_list(path))
    if not flags:
        raise ValueError("eval needs at least one --flags NAME=PATH")
    table = harness.evaluate(flags, labels)
    print(table.to_text())
    if ns.out:
        _write_lines(ns.out, table.to_csv_lines(), _stamp(cfg))
    return 0


def cmd_errorbar(ns: argparse.Namespace) -> int:
    cfg = Cfg(ns)
    matrix = _load_matrix(cfg, ns.input)
    calibration, scores = errorbars.ensemble_experiment(
        matrix,
        n_models=int(cfg.get("models", 100)),
        n_removed=int(cfg.get("removed", 10)),
        nu=float(cfg.get("nu", 0.5)),
        kernel=_kernel(cfg),
        seed=int(cfg.get("seed", 0)),
        n_variable_draws=int(cfg.get("draws", errorbars.VARIABLE_DRAWS)),
        threads=int(cfg.get("threads", 1)),
    )
    stamp = _stamp(cfg)
    _write_lines(ns.out, calibration.to_csv_lines(), stamp)
    if ns.scores_out:
        n_train = matrix.n_lots // 2
        test_ids = matrix.lot_ids[n_train:]
        header = "lot," + ",".join(f"m{i:03d}" for i in range(scores.shape[1]))
        lines = [header]
        for lot, row in zip(test_ids, scores):
            lines.append(lot + "," + ",".join(fmt_float(v) for v in row))
        _write_lines(ns.scores_out, lines, stamp)
    print(
        f"ratio={calibration.ratio:.6g} r2={calibration.r_squared:.4f} "
        f"(fraction removed {calibration.removal_fraction:.3f})",
        file=sys.stderr,
    )
    return 0


def build_parser() -> _Parser:
    parser = _Parser(prog="waferscreen", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command")

    p = sub.add_parser("gen", parents=[], help="write synthetic data + labels")
    p.add_argument("--lots", type=int)
    p.add_argument("--parametric", type=int)
    p.add_argument("--yield", dest="n_yield", type=int)
    p.add_argument("--bad", type=int)
    p.add_argument("--shift", type=float)
    p.add_argument("--sparsity", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--out", required=True)
    p.add_argument("--labels", required=True)
    p.add_argument("--meta")
    _add_common(p)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("rank", help="univariate ranking CSV")
    p.add_argument("input")
    p.add_argument("--method", choices=[univariate.METHOD_MADE, univariate.METHOD_ENTROPY])
    p.add_argument("--bins", type=int)
    p.add_argument("--n-factor", dest="n_factor", type=float)
    p.add_argument("--out")
    p.add_argument("--top", type=int)
    p.add_argument("--ids-out", dest="ids_out")
    _add_common(p)
    p.set_defaults(func=cmd_rank)

    p = sub.add_parser("select", help="RFE / RFE+k-medoid id list")
    p.add_argument("input")
    p.add_argument(
        "--method", choices=[univariate.METHOD_RFE, univariate.METHOD_RFE_KMED]
    )
    p.add_argument("--target", type=int, help="final number of parameters")
    p.add_argument("--batch", type=int, help="eliminations per iteration")
    p.add_argument("--p", help="RFE iterations before clustering, or 'auto'")
    p.add_argument("--nu", type=float)
    p.add_argument("--kernel", choices=[ocsvm.LINEAR, ocsvm.RBF])
    p.add_argument("--gamma", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--threads", type=int)
    p.add_argument("--out", required=True)
    p.add_argument("--trace", help="write the per-iteration criterion CSV here")
    _add_common(p)
    p.set_defaults(func=cmd_select)

    p = sub.add_parser("train", help="fit and serialize a model")
    p.add_argument("input")
    p.add_argument("--features", help="newline-delimited parameter ids to keep")
    p.add_argument("--nu", type=float)
    p.add_argument("--kernel", choices=[ocsvm.LINEAR, ocsvm.RBF])
    p.add_argument("--gamma", type=float)
    p.add_argument("--tol", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--out", required=True)
    _add_common(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("score", help="per-lot decision values")
    p.add_argument("input")
    p.add_argument("--model", required=True)
    p.add_argument("--threshold", type=float)
    p.add_argument("--out", required=True)
    p.add_argument("--flags-out", dest="flags_out")
    p.add_argument("--calibration", help="errorbar CSV; adds the grey column")
    p.add_argument("--sigma-variable", dest="sigma_variable", type=float)
    _add_common(p)
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("eval", help="Total/ECC table")
    p.add_argument("--labels", required=True)
    p.add_argument(
        "--flags",
        action="append",
        help="NAME=PATH of a flagged-lot id list; repeatable",
    )
    p.add_argument("--out")
    _add_common(p)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("errorbar", help="random-removal ensemble calibration")
    p.add_argument("input")
    p.add_argument("--models", type=int)
    p.add_argument("--removed", type=int)
    p.add_argument("--nu", type=float)
    p.add_argument("--kernel", choices=[ocsvm.LINEAR, ocsvm.RBF])
    p.add_argument("--gamma", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--draws", type=int)
    p.add_argument("--threads", type=int)
    p.add_argument("--out", required=True)
    p.add_argument("--scores-out", dest="scores_out")
    _add_common(p)
    p.set_defaults(func=cmd_errorbar)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
    except _UsageError as exc:
        exc.parser.print_usage(sys.stderr)
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    if getattr(ns, "func", None) is None:
        parser.print_help(sys.stderr)
        return 1
    try:
        return ns.func(ns)
    except (WaferscreenError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # anything unexpected is a runtime failure
        print(f"runtime error: {exc}", file=sys.stderr)
        return 2


def entry() -> None:
    sys.exit(main(sys.argv[1:]))


if __name__ == "__main__":
    entry()
