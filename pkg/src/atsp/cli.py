"""Command line front end.

Subcommands: ``gen`` (synthetic instances), ``sparsify`` (run a pipeline
and emit Y plus a JSON report), ``verify`` (recheck a reduction against
its input), ``bench`` (sweep timings to CSV), ``leverage`` (dump
per-column scores).

Exit codes: 0 success, 1 internal error or malformed input, 2 radius
validation failure, 3 an applicable error bound was violated, 64 usage
error.
"""

from __future__ import annotations

import argparse
import contextlib
import csv
import json
import os
import sys
import time
import warnings
from dataclasses import asdict, dataclass

import numpy as np

# Environment-specific advisory about numba's optional TBB backend; the
# fallback threading layer is equally deterministic here.
warnings.filterwarnings("ignore", message=".*TBB threading layer.*")

from . import data as data_mod
from . import report as report_mod
from .attention import verify_reduction
from .errors import (
    ContractViolationError,
    InternalInvariantError,
    ParseError,
    RadiusValidationError,
)
from .leverage import (
    C_CHERNOFF,
    C_JL_COLS,
    C_SKETCH_ROWS,
    approx_leverage,
    build_probabilities,
    exact_leverage,
)
from .linalg import gram, inf_norm
from .rng import derive_seed
from .sparsify import (
    C_BSS,
    EPS_SIGMA_DEFAULT,
    InputMatrix,
    sparsify_deterministic,
    sparsify_randomized,
)

EXIT_OK = 0
EXIT_INTERNAL = 1
EXIT_RADIUS = 2
EXIT_BOUND = 3
EXIT_USAGE = 64

THREADS_ENV = "ATSP_THREADS"


@dataclass(frozen=True)
class RunConfig:
    """Echoed configuration for one pipeline run."""

    method: str = "rand"
    eps: float = 0.5
    delta: float = 0.05
    eps_sigma: float = EPS_SIGMA_DEFAULT
    delta_sigma: float | None = None
    r_target: float | None = None
    seed: int = 0
    c_chernoff: float = C_CHERNOFF
    c_bss: float = C_BSS
    c_s1: float = C_SKETCH_ROWS
    c_s2: float = C_JL_COLS
    validate_radius: bool = True
    threads: int | None = None

    def __post_init__(self):
        if self.method not in ("rand", "det"):
            raise ContractViolationError(f"method must be rand or det, got {self.method!r}")
        for name, value in (("eps", self.eps), ("eps_sigma", self.eps_sigma)):
            if not 0.0 < value < 1.0:
                raise ContractViolationError(f"{name} must lie in (0, 1), got {value}")
        if not 0.0 < self.delta < 0.1:
            raise ContractViolationError(f"delta must lie in (0, 0.1), got {self.delta}")
        if self.delta_sigma is not None and not 0.0 < self.delta_sigma < 1.0:
            raise ContractViolationError(
                f"delta_sigma must lie in (0, 1), got {self.delta_sigma}"
            )
        if self.r_target is not None and not 0.0 < self.r_target < 0.1:
            raise ContractViolationError(
                f"r must lie in (0, 0.1), got {self.r_target}"
            )
        if self.threads is not None and self.threads < 1:
            raise ContractViolationError("threads must be >= 1")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _add_common(p):
    p.add_argument("--seed", type=int, default=0, help="master seed")
    p.add_argument("--format", choices=data_mod.FORMATS, default="bin",
                   help="input matrix format")
    p.add_argument("--threads", type=int, default=None,
                   help=f"thread cap (fallback: ${THREADS_ENV})")


def _add_pipeline_flags(p):
    p.add_argument("--method", choices=("rand", "det"), default="rand")
    p.add_argument("--eps", type=float, default=0.5)
    p.add_argument("--delta", type=float, default=0.05)
    p.add_argument("--eps-sigma", type=float, default=EPS_SIGMA_DEFAULT)
    p.add_argument("--delta-sigma", type=float, default=None)
    p.add_argument("--r", type=float, default=None,
                   help="declared Gram radius (measured when omitted)")
    p.add_argument("--no-validate-radius", action="store_true")
    p.add_argument("--c-chernoff", type=float, default=C_CHERNOFF)
    p.add_argument("--c-bss", type=float, default=C_BSS)
    p.add_argument("--c-s1", type=float, default=C_SKETCH_ROWS)
    p.add_argument("--c-s2", type=float, default=C_JL_COLS)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="atsp", description=__doc__)
    sub = parser.add_subparsers(dest="cmd", required=True)

    p = sub.add_parser("gen", help="generate a Gaussian instance with a set Gram radius")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--r", type=float, default=0.05)
    p.add_argument("--density", type=float, default=1.0)
    p.add_argument("--out", required=True)
    _add_common(p)

    p = sub.add_parser("sparsify", help="compress a matrix and certify the result")
    p.add_argument("input")
    p.add_argument("--out", required=True, help="output path for Y (binary format)")
    p.add_argument("--report", default=None,
                   help="report path (default: OUT.report.json)")
    p.add_argument("--trials", type=int, default=1,
                   help="extra seeded runs summarized in the report")
    _add_pipeline_flags(p)
    _add_common(p)

    p = sub.add_parser("verify", help="check a reduction against its input")
    p.add_argument("input")
    p.add_argument("reduced", help="Y in the binary format")
    p.add_argument("--eps", type=float, default=0.5)
    p.add_argument("--report", default=None)
    _add_common(p)

    p = sub.add_parser("bench", help="run a sweep file and write CSV timings")
    p.add_argument("sweep", help="JSON sweep description")
    p.add_argument("--out", required=True, help="CSV output path")
    _add_common(p)

    p = sub.add_parser("leverage", help="dump per-column leverage scores")
    p.add_argument("input")
    p.add_argument("--exact", action="store_true", help="use the exact oracle")
    p.add_argument("--eps-sigma", type=float, default=EPS_SIGMA_DEFAULT)
    p.add_argument("--delta-sigma", type=float, default=0.1)
    p.add_argument("--out", default=None, help="write JSON here instead of stdout")
    _add_common(p)

    return parser


def _resolve_threads(flag):
    if flag is not None:
        return int(flag)
    env = os.environ.get(THREADS_ENV)
    return int(env) if env else None


def _thread_context(threads):
    if threads is None:
        return contextlib.nullcontext()
    import numba
    from threadpoolctl import threadpool_limits

    numba.set_num_threads(max(1, min(threads, numba.config.NUMBA_NUM_THREADS)))
    return threadpool_limits(limits=threads)


def _ingest_input(path, fmt):
    t0 = time.perf_counter()
    matrix = data_mod.ingest(path, fmt)
    return matrix, (time.perf_counter() - t0) * 1e3


def _input_stats(matrix, r_measured):
    n, d = matrix.shape
    return {
        "n": int(n),
        "d": int(d),
        "nnz": int(matrix.nnz) if hasattr(matrix, "nnz") else int(np.count_nonzero(matrix)),
        "r_measured": float(r_measured),
    }


def _resolve_radius(r_flag, r_measured):
    if r_flag is not None:
        return float(r_flag)
    if 0.0 < r_measured < 0.1:
        return float(r_measured)
    if r_measured == 0.0:
        return 0.05
    raise RadiusValidationError(
        f"measured Gram radius {r_measured:g} is not below 0.1; pass --r or "
        f"rescale the input"
    )


def _config_from_args(args) -> RunConfig:
    return RunConfig(
        method=getattr(args, "method", "rand"),
        eps=args.eps,
        delta=getattr(args, "delta", 0.05),
        eps_sigma=getattr(args, "eps_sigma", EPS_SIGMA_DEFAULT),
        delta_sigma=getattr(args, "delta_sigma", None),
        r_target=getattr(args, "r", None),
        seed=getattr(args, "seed", 0),
        c_chernoff=getattr(args, "c_chernoff", C_CHERNOFF),
        c_bss=getattr(args, "c_bss", C_BSS),
        c_s1=getattr(args, "c_s1", C_SKETCH_ROWS),
        c_s2=getattr(args, "c_s2", C_JL_COLS),
        validate_radius=not getattr(args, "no_validate_radius", False),
        threads=_resolve_threads(getattr(args, "threads", None)),
    )


def _run_pipeline(x: InputMatrix, config: RunConfig, seed, timings):
    if config.method == "rand":
        return sparsify_randomized(
            x, config.eps, config.delta, seed,
            eps_sigma=config.eps_sigma, delta_sigma=config.delta_sigma,
            c_chernoff=config.c_chernoff, c_rows=config.c_s1,
            c_cols=config.c_s2, timings=timings,
        )
    return sparsify_deterministic(x, config.eps, c_bss=config.c_bss,
                                  timings=timings)


def cmd_gen(args) -> int:
    matrix = data_mod.generate(args.n, args.d, args.r, args.density, args.seed)
    data_mod.emit(args.out, args.format, matrix)
    nnz = int(np.count_nonzero(matrix))
    print(f"wrote {args.out}: n={args.n} d={args.d} nnz={nnz} r={args.r}")
    return EXIT_OK


def cmd_sparsify(args) -> int:
    config = _config_from_args(args)
    total0 = time.perf_counter()
    matrix, ingest_ms = _ingest_input(args.input, args.format)
    r_measured = inf_norm(gram(matrix))
    radius = _resolve_radius(config.r_target, r_measured)
    x = InputMatrix(data=matrix, radius=radius,
                    validate_radius=config.validate_radius)

    timings = {"ingest_ms": ingest_ms}
    reduction = _run_pipeline(x, config, config.seed, timings)

    t0 = time.perf_counter()
    error = verify_reduction(x, reduction, config.eps)
    timings["verify_ms"] = (time.perf_counter() - t0) * 1e3

    data_mod.write_bin(args.out, reduction.data)

    trials_section = None
    if args.trials > 1:
        held = passed = 0
        for t in range(args.trials):
            trial_seed = derive_seed(config.seed, f"trial{t}")
            trial_red = _run_pipeline(x, config, trial_seed, {})
            trial_err = verify_reduction(x, trial_red, config.eps)
            held += int(trial_err.sandwich_holds)
            passed += int(bool(trial_err.bounds_pass))
        trials_section = {"count": args.trials, "sandwich_held": held,
                          "bounds_passed": passed}

    timings["total_ms"] = (time.perf_counter() - total0) * 1e3
    config_echo = asdict(config)
    config_echo.update({"input": args.input, "out": args.out,
                        "trials": args.trials})
    rep = report_mod.build_report(
        "sparsify", config_echo, _input_stats(matrix, r_measured),
        output_stats={"m": reduction.m,
                      "nonzero_weights": int(np.count_nonzero(reduction.weights))},
        attention_error=error.to_dict(), timings_ms=timings,
    )
    if trials_section is not None:
        rep["trials"] = trials_section
    text = report_mod.dumps(rep)
    report_path = args.report or (args.out + ".report.json")
    with open(report_path, "w", encoding="ascii") as fh:
        fh.write(text)
    sys.stdout.write(text)
    return EXIT_OK


def cmd_verify(args) -> int:
    matrix, ingest_ms = _ingest_input(args.input, args.format)
    reduced = data_mod.read_bin(args.reduced)
    r_measured = inf_norm(gram(matrix))

    timings = {"ingest_ms": ingest_ms}
    t0 = time.perf_counter()
    error = verify_reduction(matrix, reduced, args.eps)
    timings["verify_ms"] = (time.perf_counter() - t0) * 1e3

    config_echo = {"eps": args.eps, "input": args.input, "reduced": args.reduced,
                   "seed": args.seed}
    rep = report_mod.build_report(
        "verify", config_echo, _input_stats(matrix, r_measured),
        output_stats={"m": int(reduced.shape[1]), "nonzero_weights": -1},
        attention_error=error.to_dict(), timings_ms=timings,
    )
    rep["output"]["nonzero_weights"] = int(
        np.count_nonzero(np.any(reduced != 0.0, axis=0))
    )
    text = report_mod.dumps(rep)
    if args.report:
        with open(args.report, "w", encoding="ascii") as fh:
            fh.write(text)
    sys.stdout.write(text)
    if error.bounds_applicable and not error.bounds_pass:
        return EXIT_BOUND
    return EXIT_OK


def _bench_cell(cell) -> dict:
    method = cell.get("method", "rand")
    n, d = int(cell["n"]), int(cell["d"])
    r = float(cell.get("r", 0.05))
    density = float(cell.get("density", 1.0))
    eps = float(cell.get("eps", 0.5))
    delta = float(cell.get("delta", 0.05))
    seed = int(cell.get("seed", 0))
    repeats = int(cell.get("repeats", 1))

    matrix = data_mod.generate(n, d, r, density, seed)
    x = InputMatrix(data=matrix, radius=r, validate_radius=False)
    config = RunConfig(method=method, eps=eps, delta=delta, seed=seed)

    best = None
    for _ in range(max(1, repeats)):
        timings = {}
        t0 = time.perf_counter()
        reduction = _run_pipeline(x, config, seed, timings)
        timings["pipeline_ms"] = (time.perf_counter() - t0) * 1e3
        if best is None or timings["pipeline_ms"] < best[0]["pipeline_ms"]:
            best = (timings, reduction)
    timings, reduction = best

    t0 = time.perf_counter()
    error = verify_reduction(x, reduction, eps)
    verify_ms = (time.perf_counter() - t0) * 1e3

    return {
        "method": method, "n": n, "d": d, "nnz": x.nnz, "m": reduction.m,
        "r_measured": error.r_measured,
        "eps_star": error.eps_star if np.isfinite(error.eps_star) else "",
        "sandwich_holds": int(error.sandwich_holds),
        "attention_inf_err": error.attention_inf_err,
        "t_leverage_ms": timings.get("leverage_ms", timings.get("whiten_ms", 0.0)),
        "t_select_ms": timings.get("select_ms", 0.0),
        "t_pipeline_ms": timings["pipeline_ms"],
        "t_verify_ms": verify_ms,
        "status": "ok", "error": "",
    }


BENCH_COLUMNS = [
    "method", "n", "d", "nnz", "m", "r_measured", "eps_star",
    "sandwich_holds", "attention_inf_err", "t_leverage_ms", "t_select_ms",
    "t_pipeline_ms", "t_verify_ms", "status", "error",
]


def run_bench(cells) -> list[dict]:
    """Run every sweep cell; failures become rows, never exceptions."""
    rows = []
    for cell in cells:
        try:
            rows.append(_bench_cell(cell))
        except Exception as exc:  # recorded per cell by contract
            row = {k: "" for k in BENCH_COLUMNS}
            row.update({"method": cell.get("method", ""),
                        "n": cell.get("n", ""), "d": cell.get("d", ""),
                        "status": "error", "error": str(exc)})
            rows.append(row)
    return rows


def cmd_bench(args) -> int:
    with open(args.sweep, "r", encoding="ascii") as fh:
        sweep = json.load(fh)
    defaults = sweep.get("defaults", {})
    cells = [{**defaults, **cell} for cell in sweep.get("cells", [])]
    rows = run_bench(cells)
    with open(args.out, "w", newline="", encoding="ascii") as fh:
        writer = csv.DictWriter(fh, fieldnames=BENCH_COLUMNS)
        writer.writeheader()
        writer.writerows(rows)
    ok = sum(1 for row in rows if row["status"] == "ok")
    print(f"wrote {len(rows)} rows to {args.out} ({ok} ok, {len(rows) - ok} failed)")
    return EXIT_OK


def cmd_leverage(args) -> int:
    matrix, _ = _ingest_input(args.input, args.format)
    a_rows = matrix.T  # rows of A are columns of the input
    if args.exact:
        scores = exact_leverage(a_rows)
    else:
        scores = approx_leverage(a_rows, args.eps_sigma, args.delta_sigma,
                                 derive_seed(args.seed, "leverage"))
    _, beta = build_probabilities(scores)
    doc = {
        "schema": report_mod.SCHEMA_VERSION,
        "command": "leverage",
        "config": {"exact": bool(args.exact), "eps_sigma": scores.eps_sigma,
                   "delta_sigma": scores.delta_sigma, "seed": args.seed,
                   "input": args.input},
        "input": _input_stats(matrix, inf_norm(gram(matrix))),
        "leverage": {"exact": scores.exact, "sum": float(np.sum(scores.scores)),
                     "beta": float(beta), "scores": scores.scores.tolist()},
    }
    text = report_mod.dumps(doc)
    if args.out:
        with open(args.out, "w", encoding="ascii") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


_COMMANDS = {
    "gen": cmd_gen,
    "sparsify": cmd_sparsify,
    "verify": cmd_verify,
    "bench": cmd_bench,
    "leverage": cmd_leverage,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        with _thread_context(_resolve_threads(getattr(args, "threads", None))):
            return _COMMANDS[args.cmd](args)
    except RadiusValidationError as exc:
        print(f"atsp: radius validation failed: {exc}", file=sys.stderr)
        return EXIT_RADIUS
    except (ParseError, ContractViolationError, InternalInvariantError,
            OSError, json.JSONDecodeError) as exc:
        print(f"atsp: error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
