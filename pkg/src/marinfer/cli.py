"""Command-line surface: fit models on CSV series, simulate paths, calibrate
the robust scale constant, and run the Monte-Carlo experiments.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical failure.
Every output embeds the tool version, the command line, and the seed, and
contains nothing wall-clock dependent, so bytes reproduce given the seed.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys

import numpy as np

from . import __version__
from .estimator import (
    FitOptions,
    FitResult,
    MarModel,
    NonConvergenceError,
    fit_mar,
    select_p,
    select_rs,
)
from .harness import ErfConfig, erf_table_text, run_erf, run_sd_growth, sd_growth_table_text
from .infer import (
    DegenerateHessianError,
    SingularInformationError,
    gamma_blocks,
    omega_standard_errors,
    sigma_block_hessian,
    sigma_classic,
    sigma_robust,
    standard_errors,
)
from .robustscale import (
    DegenerateSampleError,
    KSTAR_TABLE_NU,
    KSTAR_TABLE_T,
    calibrate_kstar,
    kstar_reference,
)
from .simulator import SimConfig, simulate_mar, spawn_seed
from .tdist import InfiniteVarianceError


class UsageError(Exception):
    pass


class DataError(Exception):
    pass


class NumericalError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _threads_default() -> int:
    try:
        return max(1, int(os.environ.get("MARINFER_THREADS", "1")))
    except ValueError:
        return 1


def _coeff_list(text: str) -> list[float]:
    text = text.strip()
    if not text:
        return []
    try:
        return [float(tok) for tok in text.split(",")]
    except ValueError as exc:
        raise UsageError(f"could not parse coefficient list {text!r}: {exc}") from exc


def read_series(path: str, column: str | None = None) -> np.ndarray:
    """Read one numeric column from a CSV file.

    Accepts one value per line, an optional header row, '#' comment lines,
    and --column (name or 0-based index) to pick a column when rows carry
    extra fields such as dates.
    """
    try:
        with open(path, "r", encoding="utf-8") as f:
            raw = f.readlines()
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    rows = []
    for lineno, line in enumerate(raw, start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        rows.append((lineno, next(csv.reader(io.StringIO(stripped)))))
    if not rows:
        raise DataError(f"{path}: no data rows")

    def _is_number(tok: str) -> bool:
        try:
            float(tok)
            return True
        except ValueError:
            return False

    header = None
    if not all(_is_number(tok) for tok in rows[0][1]):
        header = [tok.strip() for tok in rows[0][1]]
        rows = rows[1:]
        if not rows:
            raise DataError(f"{path}: header only, no data rows")

    ncols = len(rows[0][1])
    if column is None:
        if ncols != 1:
            raise DataError(f"{path}: {ncols} columns; select one with --column")
        idx = 0
    else:
        if header is not None and column in header:
            idx = header.index(column)
        else:
            try:
                idx = int(column)
            except ValueError:
                raise DataError(f"{path}: no column named {column!r} (header: {header})") from None
            if not 0 <= idx < ncols:
                raise DataError(f"{path}: column index {idx} out of range (0..{ncols - 1})")

    values = []
    for lineno, fields in rows:
        if len(fields) <= idx:
            raise DataError(f"{path}: line {lineno}: expected {idx + 1} fields, got {len(fields)}")
        tok = fields[idx].strip()
        try:
            values.append(float(tok))
        except ValueError:
            raise DataError(f"{path}: line {lineno}: could not parse {tok!r} as a number") from None
    return np.array(values)


def _meta_lines(args_ns, seed) -> list[str]:
    return [f"version={__version__}", f"command={args_ns._command_line}", f"seed={seed}"]


def _write_text(out: str | None, text: str) -> None:
    if out is None or out == "-":
        sys.stdout.write(text)
    else:
        with open(out, "w", encoding="utf-8", newline="\n") as f:
            f.write(text)


def _resolve_kstar(nu: float, T: int, source: str, n: int, seed: int):
    """k* for the robust construction at (nu-hat, T); None when unavailable."""
    if nu <= 1:
        return None, "nu<=1", None
    in_hull = KSTAR_TABLE_NU[0] <= nu <= KSTAR_TABLE_NU[-1] and KSTAR_TABLE_T[0] <= T <= KSTAR_TABLE_T[-1]
    if source in ("auto", "reference") and in_hull:
        return kstar_reference(nu, T), None, "reference"
    if source == "reference":
        return None, "outside reference table", None
    cal_seed = int(spawn_seed(seed, 424_243).generate_state(1)[0])
    return calibrate_kstar(nu, T, n, seed=cal_seed).kstar, None, "calibrate"


def _finite_or_none(v):
    v = float(v)
    return v if math.isfinite(v) else None


def _se_payload(se, fit: FitResult, omega):
    return {
        "phi": [_finite_or_none(v) for v in se[: fit.model.r]],
        "vphi": [_finite_or_none(v) for v in se[fit.model.r :]],
        "nu": _finite_or_none(omega[0]),
        "eta": _finite_or_none(omega[1]),
    }


def _fit_report(args) -> dict:
    y = read_series(args.input, args.column)
    mean = float(y.mean())
    opts = FitOptions(seed=args.seed)
    selected_p = None
    if args.r is not None or args.s is not None:
        if args.r is None or args.s is None:
            raise UsageError("--r and --s must be given together")
        r, s = args.r, args.s
        fit = fit_mar(y, r, s, opts)
    else:
        p = args.p if args.p is not None else select_p(y, args.p_max, args.criterion)
        selected_p = p
        try:
            r, s, fit = select_rs(y, p, opts)
        except (ValueError, NonConvergenceError) as exc:
            raise NumericalError(f"order search failed: {exc}") from exc

    model = fit.model
    blocks = gamma_blocks(model.phi_poly, model.vphi_poly)
    unavailable = {}
    se_block = {}

    try:
        omega = omega_standard_errors(y, fit)
    except (DegenerateHessianError, SingularInformationError) as exc:
        omega = (math.nan, math.nan)
        unavailable["omega"] = str(exc)

    try:
        se = standard_errors(sigma_classic(model, blocks), fit.T, model.p)
        se_block["classic"] = _se_payload(se, fit, omega)
    except InfiniteVarianceError:
        se_block["classic"] = None
        unavailable["classic"] = "nu<=2"
    except SingularInformationError as exc:
        se_block["classic"] = None
        unavailable["classic"] = str(exc)

    try:
        se = standard_errors(sigma_block_hessian(y, fit), fit.T, model.p)
        se_block["block_hessian"] = _se_payload(se, fit, omega)
    except (DegenerateHessianError, SingularInformationError) as exc:
        se_block["block_hessian"] = None
        unavailable["block_hessian"] = str(exc)

    kstar, kstar_reason, kstar_origin = _resolve_kstar(
        model.nu, fit.T, args.kstar_source, args.kstar_n, args.seed
    )
    if kstar is None:
        se_block["robust"] = None
        unavailable["robust"] = kstar_reason
    else:
        try:
            se = standard_errors(sigma_robust(fit, kstar, blocks), fit.T, model.p)
            se_block["robust"] = _se_payload(se, fit, omega)
        except (DegenerateSampleError, SingularInformationError) as exc:
            se_block["robust"] = None
            unavailable["robust"] = str(exc)

    return {
        "model": {
            "r": model.r,
            "s": model.s,
            "phi": [float(v) for v in model.phi],
            "vphi": [float(v) for v in model.vphi],
            "nu": float(model.nu),
            "eta": float(model.eta),
        },
        "loglik": float(fit.loglik),
        "se": se_block,
        "diagnostics": {
            "T": fit.T,
            "p": model.p,
            "mean_removed": mean,
            "selected_p": selected_p,
            "criterion": args.criterion,
            "converged": fit.converged,
            "n_starts_used": fit.n_starts_used,
            "kstar": kstar,
            "kstar_origin": kstar_origin,
            "se_unavailable": unavailable,
            "version": __version__,
            "command": args._command_line,
            "seed": args.seed,
        },
    }


def _fit_rows(report: dict):
    model, se = report["model"], report["se"]

    def col(method, kind, i):
        block = se[method]
        if block is None:
            return "/"
        v = block[kind][i] if kind in ("phi", "vphi") else block[kind]
        return "/" if v is None else f"{v:.6f}"

    rows = []
    for i in range(model["r"]):
        rows.append((f"phi_{i + 1}", f"{model['phi'][i]:.6f}",
                     col("classic", "phi", i), col("block_hessian", "phi", i), col("robust", "phi", i)))
    for i in range(model["s"]):
        rows.append((f"vphi_{i + 1}", f"{model['vphi'][i]:.6f}",
                     col("classic", "vphi", i), col("block_hessian", "vphi", i), col("robust", "vphi", i)))
    for name in ("eta", "nu"):
        rows.append((name, f"{model[name]:.6f}",
                     col("classic", name, 0), col("block_hessian", name, 0), col("robust", name, 0)))
    return rows


def _render_fit(report: dict, fmt: str, meta: list[str]) -> str:
    if fmt == "json":
        return json.dumps(report, indent=2, sort_keys=True) + "\n"
    rows = _fit_rows(report)
    header = ("parameter", "estimate", "se_classic", "se_block_hessian", "se_robust")
    lines = [f"# {m}" for m in meta]
    if fmt == "csv":
        lines.append(",".join(header))
        lines.extend(",".join(row) for row in rows)
    else:
        widths = [max(len(str(cell)) for cell in col) for col in zip(header, *rows)]
        lines.append("  ".join(h.ljust(w) for h, w in zip(header, widths)))
        lines.extend("  ".join(c.ljust(w) for c, w in zip(row, widths)) for row in rows)
        lines.append(f"loglik: {report['loglik']:.6f}")
    return "\n".join(lines) + "\n"


def cmd_fit(args) -> int:
    report = _fit_report(args)
    _write_text(args.out, _render_fit(report, args.format, _meta_lines(args, args.seed)))
    return 0


def cmd_simulate(args) -> int:
    model = MarModel(phi=_coeff_list(args.phi), vphi=_coeff_list(args.vphi), nu=args.nu, eta=args.eta)
    cfg = SimConfig(T=args.T, model=model, burn=args.burn, seed=args.seed)
    y = simulate_mar(cfg)
    lines = [f"# {m}" for m in _meta_lines(args, args.seed)]
    lines.append(
        f"# simconfig T={cfg.T} burn={cfg.burn} r={model.r} s={model.s} "
        f"phi={list(map(float, model.phi))} vphi={list(map(float, model.vphi))} nu={model.nu} eta={model.eta}"
    )
    lines.append("y")
    lines.extend(repr(float(v)) for v in y)
    _write_text(args.out, "\n".join(lines) + "\n")
    return 0


def cmd_calibrate_k(args) -> int:
    if args.table:
        lines = [f"# {m}" for m in _meta_lines(args, args.seed)]
        lines.append("T," + ",".join(f"nu={v:g}" for v in KSTAR_TABLE_NU))
        for i, T in enumerate(KSTAR_TABLE_T):
            cells = []
            for j, nu in enumerate(KSTAR_TABLE_NU):
                cal_seed = int(spawn_seed(args.seed, i, j).generate_state(1)[0])
                cells.append(f"{calibrate_kstar(float(nu), int(T), args.N, seed=cal_seed).kstar:.6f}")
            lines.append(f"{T}," + ",".join(cells))
        _write_text(args.out, "\n".join(lines) + "\n")
        return 0
    if not args.gaussian and args.nu is None:
        raise UsageError("calibrate-k requires --nu (or --gaussian)")
    cal = calibrate_kstar(
        nu=args.nu if args.nu is not None else math.inf,
        T=args.T,
        N=args.N,
        seed=args.seed,
        eta=args.eta,
        gaussian=args.gaussian,
        bandwidth=args.bandwidth,
        gridsize=args.gridsize,
    )
    _write_text(args.out, _render_calibration(cal, _meta_lines(args, args.seed)))
    return 0


def _render_calibration(cal, meta) -> str:
    lines = [f"# {m}" for m in meta]
    lines.append("nu,T,N,bandwidth,kstar,trimmed_fraction")
    nu_txt = "gaussian" if math.isinf(cal.nu) else repr(float(cal.nu))
    lines.append(
        f"{nu_txt},{cal.T},{cal.N},{float(cal.bandwidth)!r},{float(cal.kstar)!r},"
        f"{float(cal.trimmed_fraction)!r}"
    )
    lines.append("x,density")
    lines.extend(f"{float(x)!r},{float(d)!r}" for x, d in zip(cal.grid_x, cal.grid_density))
    return "\n".join(lines) + "\n"


def _config_from_json(path: str, threads: int) -> ErfConfig:
    try:
        with open(path, "r", encoding="utf-8") as f:
            raw = json.load(f)
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: invalid JSON: {exc}") from exc
    try:
        model = MarModel(
            phi=raw.get("phi", []),
            vphi=raw.get("vphi", []),
            nu=raw["nu"],
            eta=raw.get("eta", 1.0),
        )
        fit_opts = FitOptions(**raw.get("fit", {}))
        return ErfConfig(
            model=model,
            T_grid=tuple(raw["T_grid"]),
            N=int(raw["N"]),
            seed=int(raw["seed"]),
            nominal_level=float(raw.get("nominal_level", 0.05)),
            methods=tuple(raw.get("methods", ["classic", "block_hessian", "robust"])),
            burn=int(raw.get("burn", 500)),
            fit_options=fit_opts,
            kstar_source=raw.get("kstar_source", "auto"),
            kstar_N=int(raw.get("kstar_N", 100_000)),
            workers=threads,
        )
    except KeyError as exc:
        raise DataError(f"{path}: missing required config key {exc}") from exc
    except (TypeError, ValueError) as exc:
        raise DataError(f"{path}: bad config: {exc}") from exc


def cmd_erf(args) -> int:
    cfg = _config_from_json(args.config, args.threads)
    rows = run_erf(cfg)
    text = "".join(f"# {m}\n" for m in _meta_lines(args, cfg.seed)) + erf_table_text(rows)
    _write_text(args.out, text)
    return 0


def cmd_sd_growth(args) -> int:
    cfg = _config_from_json(args.config, args.threads)
    rows = run_sd_growth(cfg)
    text = "".join(f"# {m}\n" for m in _meta_lines(args, cfg.seed)) + sd_growth_table_text(rows)
    _write_text(args.out, text)
    return 0


def build_parser() -> _Parser:
    parser = _Parser(prog="marinfer", description=__doc__)
    parser.add_argument("--version", action="version", version=f"marinfer {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p_fit = sub.add_parser("fit", help="estimate a MAR model from a CSV series")
    p_fit.add_argument("--input", required=True)
    p_fit.add_argument("--column", default=None, help="column name or 0-based index")
    p_fit.add_argument("--p-max", type=int, default=8, dest="p_max")
    p_fit.add_argument("--criterion", choices=("aic", "bic"), default="bic")
    p_fit.add_argument("--p", type=int, default=None, help="skip order selection; search (r,s) with r+s=p")
    p_fit.add_argument("--r", type=int, default=None, help="fix the causal order (with --s)")
    p_fit.add_argument("--s", type=int, default=None, help="fix the noncausal order (with --r)")
    p_fit.add_argument("--seed", type=int, default=0)
    p_fit.add_argument("--format", choices=("table", "json", "csv"), default="table")
    p_fit.add_argument("--kstar-source", choices=("auto", "reference", "calibrate"), default="auto")
    p_fit.add_argument("--kstar-n", type=int, default=100_000)
    p_fit.add_argument("--out", default=None)
    p_fit.set_defaults(func=cmd_fit)

    p_sim = sub.add_parser("simulate", help="write a simulated MAR path as CSV")
    p_sim.add_argument("--T", type=int, required=True)
    p_sim.add_argument("--phi", default="", help="comma-separated causal coefficients")
    p_sim.add_argument("--vphi", default="", help="comma-separated noncausal coefficients")
    p_sim.add_argument("--nu", type=float, required=True)
    p_sim.add_argument("--eta", type=float, default=1.0)
    p_sim.add_argument("--burn", type=int, default=500)
    p_sim.add_argument("--seed", type=int, default=0)
    p_sim.add_argument("--out", default=None)
    p_sim.set_defaults(func=cmd_simulate)

    p_cal = sub.add_parser("calibrate-k", help="Monte-Carlo calibration of k*(nu, T)")
    p_cal.add_argument("--nu", type=float, default=None)
    p_cal.add_argument("--T", type=int, default=1000)
    p_cal.add_argument("--N", type=int, default=100_000)
    p_cal.add_argument("--seed", type=int, default=0)
    p_cal.add_argument("--eta", type=float, default=1.0)
    p_cal.add_argument("--gaussian", action="store_true", help="calibrate the Gaussian limit")
    p_cal.add_argument("--bandwidth", type=float, default=None, help="fixed KDE bandwidth (default: Silverman)")
    p_cal.add_argument("--gridsize", type=int, default=512)
    p_cal.add_argument("--table", action="store_true", help="regenerate the full reference grid")
    p_cal.add_argument("--out", default=None)
    p_cal.set_defaults(func=cmd_calibrate_k)

    for name, func, help_txt in (
        ("erf", cmd_erf, "empirical rejection frequencies from a JSON config"),
        ("sd-growth", cmd_sd_growth, "robust residual-scale quartiles from a JSON config"),
    ):
        p = sub.add_parser(name, help=help_txt)
        p.add_argument("--config", required=True)
        p.add_argument("--out", default=None)
        p.add_argument("--threads", type=int, default=_threads_default())
        p.set_defaults(func=func)

    return parser


def _echo_argv(argv: list[str]) -> list[str]:
    """Drop the output destination so bytes do not depend on where they land."""
    out, skip = [], False
    for tok in argv:
        if skip:
            skip = False
            continue
        if tok == "--out":
            skip = True
            continue
        if tok.startswith("--out="):
            continue
        out.append(tok)
    return out


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        args._command_line = "marinfer " + " ".join(_echo_argv(argv))
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2
    except (
        NumericalError,
        NonConvergenceError,
        DegenerateHessianError,
        DegenerateSampleError,
        SingularInformationError,
        InfiniteVarianceError,
        ValueError,
    ) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
