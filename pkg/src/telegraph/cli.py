"""Command-line front end: ``telegraph {simulate,bound,experiment,mgf-check,thresholds}``."""

from __future__ import annotations

import argparse
import csv
import dataclasses
import io
import logging
import math
import sys
from pathlib import Path
from typing import Iterable, Sequence, TextIO

from . import bounds
from .core_model import ModelParams, SimVariant, asian_call_spec, derive_scalings
from .mc_engine import ExperimentConfig, ExperimentRow, ols_loglog, run_experiment, validate_mgf
from .path_samplers import position_at, sample_sym_path
from .rng import DOMAIN_GENERIC, RngStream

CSV_COLUMNS = (
    "K",
    "sigma",
    "lambda",
    "n",
    "est_brownian",
    "se_brownian",
    "est_telegraph",
    "se_telegraph",
    "error",
    "bound_per_C",
    "variant",
    "seed",
)
_ROW_FIELDS = (
    "K",
    "sigma",
    "lam",
    "n",
    "est_brownian",
    "se_brownian",
    "est_telegraph",
    "se_telegraph",
    "error",
    "bound_per_C",
    "variant",
    "seed",
)


def _fmt(x) -> str:
    if isinstance(x, float):
        return format(x, ".17g")
    return str(x)


def _row_values(row: ExperimentRow) -> list[str]:
    return [_fmt(getattr(row, name)) for name in _ROW_FIELDS]


def _writer(handle: TextIO):
    return csv.writer(handle, lineterminator="\n")


def write_csv(rows: Iterable[ExperimentRow], path: str | Path, comments: Sequence[str] = ()) -> None:
    """Write experiment rows as UTF-8 CSV with LF line endings and 17 significant digits."""
    path = Path(path)
    try:
        with path.open("w", encoding="utf-8", newline="") as fh:
            for line in comments:
                fh.write(f"# {line}\n")
            w = _writer(fh)
            w.writerow(CSV_COLUMNS)
            for row in rows:
                w.writerow(_row_values(row))
    except OSError as exc:
        raise OSError(f"cannot write CSV to {path}: {exc.strerror or exc}") from exc


def read_csv(path: str | Path) -> list[ExperimentRow]:
    with Path(path).open(encoding="utf-8", newline="") as fh:
        lines = [line for line in fh if not line.startswith("#")]
    reader = csv.reader(lines)
    header = next(reader)
    if tuple(header) != CSV_COLUMNS:
        raise ValueError(f"unexpected CSV header {header}")
    rows = []
    for rec in reader:
        vals = dict(zip(_ROW_FIELDS, rec))
        rows.append(
            ExperimentRow(
                **{k: float(v) for k, v in vals.items() if k not in ("n", "variant", "seed")},
                n=int(vals["n"]),
                variant=vals["variant"],
                seed=int(vals["seed"]),
            )
        )
    return rows


# --------------------------------------------------------------------------
# argument parsing


def parse_grid(text: str) -> tuple[float, ...]:
    """``start:step:stop`` (inclusive) or a comma-separated list."""
    text = text.strip()
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise argparse.ArgumentTypeError("grid must be start:step:stop")
        start, step, stop = (float(p) for p in parts)
        if step <= 0 or stop < start:
            raise argparse.ArgumentTypeError("grid needs step > 0 and stop >= start")
        count = int(math.floor((stop - start) / step + 1e-9)) + 1
        return tuple(start + k * step for k in range(count))
    try:
        return tuple(float(p) for p in text.split(",") if p.strip())
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from exc


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        valid = sorted(
            opt for action in self._actions for opt in action.option_strings if opt.startswith("--")
        )
        if valid:
            message += "\nvalid options: " + " ".join(valid)
        self.exit(2, f"{self.prog}: error: {message}\n")


def _model_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--lambda", dest="lam", type=float, default=100.0, help="switching rate")
    p.add_argument("--T", type=float, default=1.0, help="time horizon")
    p.add_argument("--L", type=float, default=1.0, help="spatial scale")
    p.add_argument("--v0", type=float, default=1.0, help="speed")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="telegraph", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("simulate", help="sample exact telegraph paths")
    _model_flags(p)
    p.add_argument("--paths", type=int, default=5)
    p.add_argument("--variant", choices=[v.value for v in SimVariant], default="alternating")
    p.add_argument("--pin-initial-sign", action="store_true")
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--out", type=Path)

    p = sub.add_parser("bound", help="evaluate the closed-form error bound")
    _model_flags(p)
    p.add_argument("--v0-star", type=float, default=None, help="second speed; enables the asymmetric bound")
    p.add_argument("--sigma", type=float, default=None, help="sets a = sigma*sqrt(lambda), b = -sigma^2/2")
    p.add_argument("--a", type=float, default=None)
    p.add_argument("--b", type=float, default=None)
    p.add_argument("--C", type=float, default=1.0)
    p.add_argument("--out", type=Path)

    p = sub.add_parser("experiment", help="run the lambda-convergence Monte Carlo experiment")
    p.add_argument("--strike", type=parse_grid, default=(0.7, 1.0, 1.3))
    p.add_argument("--sigma", type=parse_grid, default=(0.3, 0.5, 0.7))
    p.add_argument("--lambda-grid", type=parse_grid, default=parse_grid("2.5:2.5:100"))
    p.add_argument("--samples", type=int, default=10**7)
    p.add_argument("--grid-steps", type=int, default=10**4)
    p.add_argument("--variant", choices=[v.value for v in SimVariant], default="alternating")
    p.add_argument("--pin-initial-sign", action="store_true")
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--C", type=float, default=1.0)
    p.add_argument("--share-brownian", action="store_true", help="one Brownian estimate per sigma, reused over lambda")
    p.add_argument("--standard-brownian", action="store_true", help="audit mode: unit Brownian diffusivity")
    p.add_argument("--fit", action="store_true", help="print the log-log regression per (sigma, K)")
    p.add_argument("--out", type=Path)

    p = sub.add_parser("mgf-check", help="compare empirical and closed-form MGF")
    p.add_argument("--lambda", dest="lam", type=float, default=1.0)
    p.add_argument("--a", type=float, default=0.5)
    p.add_argument("--s", type=parse_grid, default=(0.25, 0.5, 1.0))
    p.add_argument("--v0", type=float, default=1.0)
    p.add_argument("--L", type=float, default=1.0)
    p.add_argument("--samples", type=int, default=10**6)
    p.add_argument("--variant", choices=[v.value for v in SimVariant], default="alternating")
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--out", type=Path)

    p = sub.add_parser("thresholds", help="integrability thresholds in a")
    _model_flags(p)
    p.add_argument("--out", type=Path)
    parser.subcommands = sub.choices
    return parser


def _config_lines(args: argparse.Namespace) -> list[str]:
    skip = {"out", "verbose"}
    return [f"config {k}={v}" for k, v in sorted(vars(args).items()) if k not in skip]


def _emit(args, text: str) -> None:
    if args.out is not None:
        try:
            args.out.write_text(text, encoding="utf-8")
        except OSError as exc:
            raise OSError(f"cannot write {args.out}: {exc.strerror or exc}") from exc
    else:
        sys.stdout.write(text)


def _header(args) -> str:
    return "".join(f"# {line}\n" for line in _config_lines(args))


def _cmd_simulate(args) -> None:
    base = RngStream(args.seed, 0, (DOMAIN_GENERIC,))
    buf = io.StringIO()
    buf.write(_header(args))
    w = _writer(buf)
    w.writerow(["path", "initial_sign", "n_jumps", "position_T", "jump_times"])
    for i in range(args.paths):
        path = sample_sym_path(args.lam, abs(args.v0), args.T, args.variant, base.substream(i), args.pin_initial_sign)
        times = " ".join(_fmt(float(t)) for t in path.jump_times)
        w.writerow([i, path.initial_sign, path.n_jumps, _fmt(float(position_at(path, args.T)) / args.L), times])
    _emit(args, buf.getvalue())


def _cmd_bound(args) -> None:
    if args.sigma is not None:
        a = args.sigma * math.sqrt(args.lam)
        b = -0.5 * args.sigma**2
    else:
        if args.a is None:
            raise ValueError("give --sigma or --a")
        a = args.a
        b = args.b
    if args.v0_star is None:
        params = ModelParams.symmetric(args.lam, args.v0, args.T, args.L)
    else:
        params = ModelParams.asymmetric(args.lam, args.v0, args.v0_star, args.T, args.L)
    s = derive_scalings(params)
    if b is None:
        b = bounds.risk_neutral_b(a, s.sigma2)
    spec = asian_call_spec(a, b)
    report = (bounds.total_error_bound_sym if params.is_symmetric else bounds.total_error_bound_asym)(spec, params, args.C)
    lines = [_header(args)]
    lines.append(f"# resolved a={_fmt(a)} b={_fmt(b)} mode={params.mode.value}\n")
    for name, value in [
        ("T_star", s.T_star),
        ("L_star", s.L_star),
        ("sigma2", s.sigma2),
        ("drift", s.drift),
    ]:
        lines.append(f"{name}={_fmt(value)}\n")
    lines.append("# w2_bound and total are linear in C; at C=1 they read as bound/C\n")
    for name, value in report.as_dict().items():
        lines.append(f"{name}={_fmt(value)}\n")
    _emit(args, "".join(lines))


def _cmd_experiment(args) -> None:
    config = ExperimentConfig(
        strikes=args.strike,
        sigmas=args.sigma,
        lambda_grid=args.lambda_grid,
        n_samples=args.samples,
        n_grid_steps=args.grid_steps,
        variant=args.variant,
        pin_initial_sign=args.pin_initial_sign,
        seed=args.seed,
        C=args.C,
        share_brownian=args.share_brownian,
        standard_brownian=args.standard_brownian,
    )
    resolved = [
        f"config {f.name}={getattr(config, f.name)}"
        for f in dataclasses.fields(config)
        if f.name not in ("workers", "variant")
    ] + [f"config variant={config.variant.value}"]
    if args.out is not None:
        try:
            fh = args.out.open("w", encoding="utf-8", newline="")
        except OSError as exc:
            raise OSError(f"cannot write {args.out}: {exc.strerror or exc}") from exc
    else:
        fh = sys.stdout
    try:
        for line in resolved:
            fh.write(f"# {line}\n")
        w = _writer(fh)
        w.writerow(CSV_COLUMNS)

        def flush(row):
            w.writerow(_row_values(row))
            fh.flush()

        rows = run_experiment(config, on_row=flush)
    finally:
        if fh is not sys.stdout:
            fh.close()
    if args.fit:
        for sigma in config.sigmas:
            for K in config.strikes:
                pts = [(r.lam, r.error) for r in rows if r.sigma == sigma and r.K == K]
                if len(pts) < 2:
                    continue
                fit = ols_loglog(pts)
                sys.stderr.write(
                    f"fit sigma={sigma:g} K={K:g}: intercept={fit.intercept:.4f} slope={fit.slope:.4f} "
                    f"r2={fit.r_squared:.4f} negative_errors={fit.n_negative}\n"
                )


def _cmd_mgf(args) -> None:
    checks = validate_mgf(args.lam, args.a, args.s, args.samples, args.seed, args.variant, args.v0, args.L)
    buf = io.StringIO()
    buf.write(_header(args))
    w = _writer(buf)
    w.writerow(["s", "empirical", "analytic", "std_error", "z_score"])
    for c in checks:
        w.writerow([_fmt(c.s), _fmt(c.empirical), _fmt(c.analytic), _fmt(c.std_error), _fmt(c.z_score)])
    _emit(args, buf.getvalue())


def _cmd_thresholds(args) -> None:
    s = derive_scalings(ModelParams.symmetric(args.lam, args.v0, args.T, args.L))
    lo, hi = bounds.integrability_thresholds(s.T_star, s.L_star)
    _emit(args, f"{_header(args)}a_low={_fmt(lo)}\na_high={_fmt(hi)}\n")


_COMMANDS = {
    "simulate": _cmd_simulate,
    "bound": _cmd_bound,
    "experiment": _cmd_experiment,
    "mgf-check": _cmd_mgf,
    "thresholds": _cmd_thresholds,
}


def run_cli(argv: Sequence[str] | None = None) -> int:
    """Run the CLI; returns 0 on success, 2 on usage errors and 1 on runtime errors."""
    parser = build_parser()
    try:
        args, extra = parser.parse_known_args(argv)
        if extra:
            parser.subcommands[args.command].error(f"unrecognized arguments: {' '.join(extra)}")
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, stream=sys.stderr)
    try:
        _COMMANDS[args.command](args)
    except (ValueError, OverflowError, OSError, FloatingPointError) as exc:
        sys.stderr.write(f"telegraph {args.command}: error: {exc}\n")
        return 1
    return 0


def main() -> None:
    sys.exit(run_cli())


if __name__ == "__main__":
    main()
