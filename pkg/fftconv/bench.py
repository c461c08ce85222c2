"""Command-line harness: correctness sweeps, per-layer micro-benchmarks, composed-network timings and cost-model tables.

    fftconv verify [--sizes 4,8,16,32] [--configs 15] [--precision f32|f64] [--seed X]
    fftconv bench  --config k,n,f,fp [--batch S] [--op output|gradinput|gradweight|all] [--method direct|fft|both]
                   [--iters N] [--warmup M] [--threads T] [--first-layer]
    fftconv net    [--preset NAME | --spec FILE] [--method direct|fft|both] [--iters N] [--warmup M]
    fftconv model  [--ram-table] [--crossover] [--ops] [--config k,n,f,fp --batch S] [--C 2.5] [--pow2]

Every subcommand takes --format csv|md, --out PATH, --threads, --seed and --precision. Inputs are drawn from
counter-based generators keyed by (seed, tensor role), so both methods always see the same data and repeated runs with
the same seed and thread count produce the same checksums.

Exit codes: 0 on success, 1 if verify found a tolerance violation, 2 on invalid input.

"""
from __future__ import annotations
import argparse
import logging
import sys
import time
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from fftconv.config import REFERENCE_BATCH, THREADS, LayerConfig
from fftconv.conv_direct import forward_direct, grad_input_direct, grad_weight_direct
from fftconv.conv_fft import ConvWorkspace, forward_fft, grad_input_fft, grad_weight_fft, workspace_for
from fftconv.cost_model import DEFAULT_C, CostParams, crossover_table, memory_table, op_count_table, ram_table
from fftconv.data import RealTensor4, Tensor4, WeightTensor4, rng_for, uniform_tensor
from fftconv.dtypes import DType, dtypes
from fftconv.errors import FFTConvError
from fftconv.helpers import DEBUG
from fftconv.network import Network, NetworkSpec, StageTimings, parse_spec_file, preset
from fftconv.ops import OP_ALIASES, ConvOps, Methods, Roles
from fftconv.report import Table

logger = logging.getLogger(__name__)

CSV_COLUMNS = tuple("op,method,k,n,f,fprime,S,iters,threads,seed,mean_ms,std_ms,min_ms,checksum".split(","))

# Max relative error allowed by verify, per precision and operation
TOLERANCES = {
    dtypes.float32: {ConvOps.UPDATE_OUTPUT: 1e-4, ConvOps.UPDATE_GRAD_INPUT: 1e-4, ConvOps.ACC_GRAD_PARAMETERS: 1e-3},
    dtypes.float64: dict.fromkeys(ConvOps, 1e-10),
}

DEFAULT_SIZES = (4, 7, 8, 13, 16, 24, 32)
DEFAULT_CONFIGS_PER_SIZE = 15

EXIT_OK, EXIT_TOLERANCE, EXIT_USAGE = 0, 1, 2


# ----------------------------------------------------------------------------------------------------------------------
# running one operation


@dataclass
class LayerInputs:
    x: RealTensor4
    w: WeightTensor4
    gy: RealTensor4


def make_inputs(config: LayerConfig, seed: int, dtype: DType = dtypes.float32) -> LayerInputs:
    """The seeded operands of a layer: input maps, kernels and output gradient."""
    c = config
    return LayerInputs(
        uniform_tensor(RealTensor4, (c.S, c.f, c.n, c.n), seed, Roles.X, dtype),
        uniform_tensor(WeightTensor4, (c.f_prime, c.f, c.k, c.k), seed, Roles.W, dtype),
        uniform_tensor(RealTensor4, (c.S, c.f_prime, c.n_out, c.n_out), seed, Roles.GY, dtype),
    )


def operation(
    op: str, method: str, inputs: LayerInputs, workspace: Optional[ConvWorkspace], threads: int
) -> Callable[[], Tensor4]:
    """A zero-argument callable computing op by method on inputs."""
    x, w, gy = inputs.x, inputs.w, inputs.gy
    if method == Methods.FFT:
        return {
            ConvOps.UPDATE_OUTPUT: lambda: forward_fft(workspace, x, w),
            ConvOps.UPDATE_GRAD_INPUT: lambda: grad_input_fft(workspace, gy, w),
            ConvOps.ACC_GRAD_PARAMETERS: lambda: grad_weight_fft(workspace, gy, x),
        }[op]
    return {
        ConvOps.UPDATE_OUTPUT: lambda: forward_direct(x, w, threads),
        ConvOps.UPDATE_GRAD_INPUT: lambda: grad_input_direct(gy, w, threads),
        ConvOps.ACC_GRAD_PARAMETERS: lambda: grad_weight_direct(gy, x, threads),
    }[op]


def relative_error(a: Tensor4, b: Tensor4) -> float:
    """max|a - b| / max|b|, the absolute error if b is all zeros."""
    diff = float(np.max(np.abs(a.data.astype(np.float64) - b.data)))
    scale = float(np.max(np.abs(b.data)))
    return diff / scale if scale > 0 else diff


# ----------------------------------------------------------------------------------------------------------------------
# verify


@dataclass
class VerifyResult:
    precision: DType
    op: str
    configs: int
    max_rel_err: float
    worst: Optional[LayerConfig]

    @property
    def tolerance(self) -> float:
        return TOLERANCES[self.precision][self.op]

    @property
    def ok(self) -> bool:
        return self.max_rel_err <= self.tolerance


def random_configs(seed: int, sizes: Sequence[int], per_size: int) -> list[LayerConfig]:
    """Random layers with n from sizes, k <= min(n, 11), S <= 4 and f, f' <= 8."""
    rng = rng_for(seed, 0)
    configs = []
    for n in sizes:
        for _ in range(per_size):
            k = int(rng.integers(1, min(n, 11) + 1))
            f, fp, S = (int(v) for v in rng.integers(1, [9, 9, 5]))
            configs.append(LayerConfig(k, n, f, fp, S))
    return configs


def verify(seed: int, sizes: Sequence[int], per_size: int, precisions: Sequence[DType]) -> list[VerifyResult]:
    """Runs all three operations by both methods over random configs and reports the worst relative error."""
    configs = random_configs(seed, sizes, per_size)
    results = []
    for dtype in precisions:
        worst = {op: (0.0, None) for op in ConvOps}
        for i, c in enumerate(configs):
            inputs = make_inputs(c, seed + i, dtype)
            ws = workspace_for([c], dtype)
            for op in ConvOps:
                fast = operation(op, Methods.FFT, inputs, ws, 1)()
                err = relative_error(fast, operation(op, Methods.DIRECT, inputs, None, 1)())
                if err > worst[op][0]:
                    worst[op] = (err, c)
        for op in ConvOps:
            results.append(VerifyResult(dtype, op, len(configs), *worst[op]))
            logger.debug("verify %s %s: max rel err %.3g", dtype.name, op, worst[op][0])
    return results


def verify_table(results: Sequence[VerifyResult]) -> Table:
    table = Table(("precision", "op", "configs", "max_rel_err", "tolerance", "worst_config", "ok"), title="verify")
    for r in results:
        worst = str(r.worst) if r.worst else None
        ok = "yes" if r.ok else "NO"
        table.add(r.precision.name, r.op, r.configs, f"{r.max_rel_err:.3e}", f"{r.tolerance:.0e}", worst, ok)
    return table


# ----------------------------------------------------------------------------------------------------------------------
# bench


@dataclass
class BenchResult:
    op: str
    method: str
    config: LayerConfig
    iters: int
    warmup: int
    threads: int
    seed: int
    mean_ms: Optional[float] = None
    std_ms: Optional[float] = None
    min_ms: Optional[float] = None
    median_ms: Optional[float] = None
    checksum: Optional[float] = None
    skipped: bool = False

    def __post_init__(self):
        assert self.iters >= 1, "a benchmark needs at least one iteration"
        if not self.skipped:
            assert self.mean_ms + 1e-9 >= self.min_ms >= 0, f"inconsistent timings {self.mean_ms} / {self.min_ms}"
            assert np.isfinite(self.checksum), f"checksum {self.checksum} is not finite"


def time_calls(fn: Callable[[], Tensor4], iters: int, warmup: int) -> tuple[np.ndarray, Tensor4]:
    """Wall times in ms of iters calls after warmup untimed calls, and the result of the last call."""
    for _ in range(warmup):
        fn()
    times = np.empty(iters)
    for i in range(iters):
        start = time.perf_counter()
        result = fn()
        times[i] = (time.perf_counter() - start) * 1e3
    return times, result


def bench(
    config: LayerConfig,
    ops: Sequence[str],
    methods: Sequence[str],
    iters: int = 10,
    warmup: int = 3,
    threads: int = THREADS,
    seed: int = 0,
    dtype: DType = dtypes.float32,
    first_layer: bool = False,
) -> list[BenchResult]:
    """Times each requested op by each requested method on one layer. A first layer skips updateGradInput."""
    inputs = make_inputs(config, seed, dtype)
    ws = workspace_for([config], dtype, threads) if Methods.FFT in methods else None
    results = []
    for op in ops:
        for method in methods:
            meta = dict(op=op, method=method, config=config, iters=iters, warmup=warmup, threads=threads, seed=seed)
            if first_layer and op == ConvOps.UPDATE_GRAD_INPUT:
                results.append(BenchResult(**meta, skipped=True))
                continue
            times, out = time_calls(operation(op, method, inputs, ws, threads), iters, warmup)
            results.append(
                BenchResult(
                    **meta,
                    mean_ms=float(times.mean()),
                    std_ms=float(times.std()),
                    min_ms=float(times.min()),
                    median_ms=float(np.median(times)),
                    checksum=out.checksum(),
                )
            )
            logger.debug("bench %s %s %s: %.3f ms", op, method, config, times.mean())
    return results


def _totals(results: Sequence[BenchResult]) -> dict[str, tuple[float, float, float]]:
    """Per method: sums of mean, min and median times over the measured ops."""
    totals = {}
    for r in results:
        if r.skipped:
            continue
        mean, mn, med = totals.get(r.method, (0.0, 0.0, 0.0))
        totals[r.method] = (mean + r.mean_ms, mn + r.min_ms, med + r.median_ms)
    return totals


def _csv_prefix(r: BenchResult, op: str, method: str) -> tuple:
    c = r.config
    return op, method, c.k, c.n, c.f, c.f_prime, c.S, r.iters, r.threads, r.seed


def bench_table(results: Sequence[BenchResult], fmt: str) -> Table:
    """Result rows grouped by op then method, followed by one total row per method.

    The CSV form uses the stable CSV_COLUMNS; skipped rows and totals leave the cells they have no value for empty.
    The Markdown form adds the median and highlights the faster method of each op in bold.

    """
    if fmt == "csv":
        table = Table(CSV_COLUMNS)
        for r in results:
            table.add(*_csv_prefix(r, r.op, r.method), r.mean_ms, r.std_ms, r.min_ms, r.checksum)
        for method, (mean, mn, _) in _totals(results).items():
            table.add(*_csv_prefix(results[0], "total", method), mean, None, mn, None)
        return table

    title = f"{results[0].config} threads={results[0].threads}" if results else None
    table = Table(("op", "method", "mean_ms", "median_ms", "std_ms", "min_ms", "checksum"), title=title)
    best: dict[str, tuple[float, int]] = {}
    for r in results:
        row = table.add(r.op, r.method, r.mean_ms, r.median_ms, r.std_ms, r.min_ms, r.checksum)
        if not r.skipped and (r.op not in best or r.mean_ms < best[r.op][0]):
            best[r.op] = (r.mean_ms, row)
    totals = _totals(results)
    for method, (mean, mn, med) in totals.items():
        row = table.add("Total", method, mean, med, None, mn, None)
        if "Total" not in best or mean < best["Total"][0]:
            best["Total"] = (mean, row)
    if len(set(r.method for r in results)) > 1:
        table.bold = {(row, "mean_ms") for _, row in best.values()}
    return table


# ----------------------------------------------------------------------------------------------------------------------
# net


def net_timings(
    spec: NetworkSpec,
    method: str,
    iters: int,
    warmup: int,
    threads: int,
    seed: int,
    dtype: DType,
) -> StageTimings:
    """Per-operation wall times of a training iteration of spec, averaged over iters runs after warmup runs."""
    net = Network(spec, method, seed, dtype, threads)
    batch = net.input_batch()
    for _ in range(warmup):
        net.run_iteration(batch)
    runs = [net.run_iteration(batch).timings for _ in range(iters)]
    return StageTimings(
        float(np.mean([t.update_output for t in runs])),
        float(np.mean([t.update_grad_input for t in runs])),
        float(np.mean([t.acc_grad_parameters for t in runs])),
    )


def net_table(timings: dict[str, StageTimings], title: Optional[str] = None) -> Table:
    columns = ("method",) + tuple(op for op, _ in StageTimings().rows()) + ("total",)
    table = Table(columns, title=title)
    for method, t in timings.items():
        table.add(method, *(ms for _, ms in t.rows()), t.total)
    if len(timings) > 1:
        fastest = min(range(len(table)), key=lambda i: table.rows[i][-1])
        table.bold = {(fastest, "total")}
    return table


# ----------------------------------------------------------------------------------------------------------------------
# command line


def _ints(text: str) -> list[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError as e:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from e


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--format", choices=("csv", "md"), default="md")
    common.add_argument("--out", help="write the tables to this file instead of stdout")
    common.add_argument("--threads", type=int, default=THREADS, help="workers per operation (env FFTCONV_THREADS)")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--precision", choices=("f32", "f64"), default=None)

    layer = argparse.ArgumentParser(add_help=False)
    layer.add_argument("--config", help="layer as k,n,f,fp")
    layer.add_argument("--batch", type=int, default=None, help="minibatch size S")

    runs = argparse.ArgumentParser(add_help=False)
    runs.add_argument("--method", choices=(*Methods, "both"), default="both")
    runs.add_argument("--iters", type=int, default=10)
    runs.add_argument("--warmup", type=int, default=3)

    parser = argparse.ArgumentParser(prog="fftconv", description="FFT-based convolution layers: checks and timings")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("verify", parents=[common], help="compare the FFT method against the direct method")
    p.add_argument("--sizes", type=_ints, default=list(DEFAULT_SIZES), help="image widths n, comma-separated")
    p.add_argument("--configs", type=int, default=DEFAULT_CONFIGS_PER_SIZE, help="random layers per size")

    p = sub.add_parser("bench", parents=[common, layer, runs], help="time the operations of one layer")
    p.add_argument("--op", choices=(*OP_ALIASES, "all"), default="all")
    p.add_argument("--first-layer", action="store_true", help="the layer gets the network input (no updateGradInput)")

    p = sub.add_parser("net", parents=[common, runs], help="time training iterations of a composed network")
    group = p.add_mutually_exclusive_group()
    group.add_argument("--preset", default="paper-net-small")
    group.add_argument("--spec", help="network spec file")

    p = sub.add_parser("model", parents=[common, layer], help="operation-count and memory model")
    p.add_argument("--ram-table", action="store_true", help="the FFT memory table of the reference layers")
    p.add_argument("--crossover", action="store_true", help="direct vs FFT operations of updateOutput over n")
    p.add_argument("--ops", action="store_true", help="operation counts of the three operations for --config")
    p.add_argument("--C", type=float, default=float(DEFAULT_C), help="hidden constant of the FFT operation count")
    p.add_argument("--pow2", action="store_true", help="evaluate FFT terms at the next power of 2")
    p.add_argument("--k", type=int, default=7)
    p.add_argument("--f", type=int, default=96)
    p.add_argument("--fp", type=int, default=256)
    p.add_argument("--S", type=int, default=REFERENCE_BATCH)
    p.add_argument("--n-values", type=_ints, default=[16, 24, 32, 40, 48, 56, 64])
    return parser


def _precision(args, default: str = "f32") -> DType:
    return dtypes.from_name(args.precision or default)


def _methods(args) -> list[str]:
    return list(Methods) if args.method == "both" else [args.method]


def _layer(args, default_batch: int) -> LayerConfig:
    return LayerConfig.parse(args.config, batch=args.batch if args.batch is not None else default_batch)


def cmd_verify(args) -> tuple[list[Table], int]:
    precisions = [_precision(args)] if args.precision else [dtypes.float32, dtypes.float64]
    results = verify(args.seed, args.sizes, args.configs, precisions)
    code = EXIT_OK if all(r.ok for r in results) else EXIT_TOLERANCE
    return [verify_table(results)], code


def cmd_bench(args) -> tuple[list[Table], int]:
    if args.config is None:
        raise argparse.ArgumentTypeError("bench needs --config k,n,f,fp")
    if args.iters < 1:
        raise argparse.ArgumentTypeError("--iters must be at least 1")
    config = _layer(args, default_batch=1)
    ops = list(ConvOps) if args.op == "all" else [OP_ALIASES[args.op]]
    dtype = _precision(args)
    methods = _methods(args)
    results = bench(config, ops, methods, args.iters, args.warmup, args.threads, args.seed, dtype, args.first_layer)
    return [bench_table(results, args.format)], EXIT_OK


def cmd_net(args) -> tuple[list[Table], int]:
    spec = parse_spec_file(args.spec) if args.spec else preset(args.preset)
    dtype = _precision(args)
    timings = {m: net_timings(spec, m, args.iters, args.warmup, args.threads, args.seed, dtype) for m in _methods(args)}
    title = f"{args.spec or args.preset} S={spec.batch} threads={args.threads}"
    return [net_table(timings, title)], EXIT_OK


def cmd_model(args) -> tuple[list[Table], int]:
    show_all = not (args.ram_table or args.crossover or args.ops or args.config)
    tables = []
    if args.config or args.ops or show_all:
        config = _layer(args, REFERENCE_BATCH) if args.config else LayerConfig(7, 32, 96, 256, REFERENCE_BATCH)
        tables.append(op_count_table(CostParams(config, args.C, args.pow2)))
        tables.append(memory_table(config))
    if args.crossover or show_all:
        tables.append(crossover_table(args.f, args.fp, args.S, args.k, args.C, args.n_values, args.pow2))
    if args.ram_table or show_all:
        tables.append(ram_table())
    return tables, EXIT_OK


COMMANDS = {"verify": cmd_verify, "bench": cmd_bench, "net": cmd_net, "model": cmd_model}


def main(argv: Optional[Sequence[str]] = None) -> int:
    logging.basicConfig(level=logging.DEBUG if DEBUG >= 1 else logging.WARNING, format="%(name)s: %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        tables, code = COMMANDS[args.command](args)
    except (FFTConvError, argparse.ArgumentTypeError) as e:
        print(f"fftconv {args.command}: {e}", file=sys.stderr)
        return EXIT_USAGE
    text = "\n".join(t.render(args.format) for t in tables)
    if args.out:
        with open(args.out, "w") as f:
            f.write(text)
    else:
        sys.stdout.write(text)
    return code


if __name__ == "__main__":
    sys.exit(main())
