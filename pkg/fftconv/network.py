"""Composes convolution layers with rectified linear units, max pooling and a fully connected prediction layer, and runs
training iterations through the composition with a chosen convolution engine.

A network is described by a NetworkSpec, an ordered list of stages, which can be read from a plain-text file:

    # comments and blank lines are ignored
    batch 8            minibatch size S (default 1)
    conv 11 32 3 12    convolution k n f f'
    relu
    pool               2x2 max pooling, stride 2
    pad 32             zero-pad the feature maps to 32 x 32 (top-left aligned)
    fc 1000            fully connected layer with 1000 outputs, must be the last stage

The first stage is a convolution, and shapes have to chain: every convolution's (f, n) equals the maps and the width
arriving at it.

A training iteration runs the forward pass (updateOutput), then goes back through the stages computing the gradients
w.r.t. the stage inputs (updateGradInput) and the parameters (accGradParameters). The loss is the sum of all scores.
The first convolution layer receives the input batch, whose gradient nobody needs, so its updateGradInput is skipped.

"""
from __future__ import annotations
import logging
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional, Sequence, Union

import numpy as np

from fftconv.config import THREADS, LayerConfig, reference_configs
from fftconv.conv_direct import forward_direct, grad_input_direct, grad_weight_direct
from fftconv.conv_fft import ConvWorkspace, forward_fft, grad_input_fft, grad_weight_fft, workspace_for
from fftconv.data import RealTensor4, WeightTensor4, crop, pad_to, uniform, uniform_tensor
from fftconv.dtypes import DType, dtypes
from fftconv.errors import ConfigError, ShapeError
from fftconv.nn import (
    fc_forward,
    fc_grad_input,
    fc_grad_params,
    maxpool_backward,
    maxpool_forward,
    relu_backward,
    relu_forward,
)
from fftconv.ops import ConvOps, Methods, Roles, Stages

logger = logging.getLogger(__name__)


# ----------------------------------------------------------------------------------------------------------------------
# network description


@dataclass(frozen=True)
class Stage:
    """One stage of a network. conv stages carry a config, pad stages a size, fc stages an output count."""

    kind: str
    config: Optional[LayerConfig] = None
    size: Optional[int] = None

    def __str__(self):
        if self.kind == Stages.CONV:
            c = self.config
            return f"conv {c.k} {c.n} {c.f} {c.f_prime}"
        if self.kind in (Stages.PAD, Stages.FC):
            return f"{self.kind} {self.size}"
        return self.kind


@dataclass(frozen=True)
class NetworkSpec:
    """An ordered, shape-consistent list of stages ending in a fully connected layer.

    Raises:
        ConfigError: If the stages do not chain.

    """

    stages: tuple[Stage, ...]
    batch: int = 1

    def __post_init__(self):
        object.__setattr__(self, "stages", tuple(self.stages))
        self._validate()

    def _validate(self):
        if not self.stages or self.stages[0].kind != Stages.CONV:
            raise ConfigError("a network starts with a conv stage")
        if self.stages[-1].kind != Stages.FC or sum(s.kind == Stages.FC for s in self.stages) != 1:
            raise ConfigError("a network ends with exactly one fc stage")
        if self.stages[-1].size is None or self.stages[-1].size < 1:
            raise ConfigError(f"fc needs at least one output, got {self.stages[-1].size}")
        maps, n = self.stages[0].config.f, self.stages[0].config.n
        for i, s in enumerate(self.stages):
            if s.kind == Stages.CONV:
                c = s.config
                if c.S != self.batch:
                    raise ConfigError(f"stage {i}: conv batch {c.S} differs from the network batch {self.batch}")
                if (c.f, c.n) != (maps, n):
                    raise ConfigError(f"stage {i}: conv expects {c.f} maps of {c.n}x{c.n}, gets {maps} of {n}x{n}")
                maps, n = c.f_prime, c.n_out
            elif s.kind == Stages.POOL:
                if n % 2:
                    raise ConfigError(f"stage {i}: cannot max-pool odd width {n}")
                n //= 2
            elif s.kind == Stages.PAD:
                if s.size is None or s.size < n:
                    raise ConfigError(f"stage {i}: cannot pad width {n} to {s.size}")
                n = s.size
            elif s.kind not in (Stages.RELU, Stages.FC):
                raise ConfigError(f"stage {i}: unknown kind {s.kind!r}")
        object.__setattr__(self, "_fc_inputs", maps * n * n)

    @property
    def conv_layers(self) -> list[LayerConfig]:
        return [s.config for s in self.stages if s.kind == Stages.CONV]

    @property
    def pool_after(self) -> list[bool]:
        """Per conv layer: whether a pooling stage follows it before the next conv or fc stage."""
        flags = []
        for s in self.stages:
            if s.kind == Stages.CONV:
                flags.append(False)
            elif s.kind == Stages.POOL:
                flags[-1] = True
        return flags

    @property
    def fc_outputs(self) -> int:
        return self.stages[-1].size

    @property
    def fc_inputs(self) -> int:
        """Length of the flattened feature maps entering the fc stage."""
        return self._fc_inputs

    def to_text(self) -> str:
        return "\n".join([f"batch {self.batch}"] + [str(s) for s in self.stages]) + "\n"


def parse_spec(text: str) -> NetworkSpec:
    """Reads a NetworkSpec from the line format described in the module docstring.

    Raises:
        ConfigError: On unknown stages, wrong argument counts, non-integer arguments or stages that do not chain.

    """
    batch, rows = 1, []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        kind, *args = line.split()
        try:
            values = [int(a) for a in args]
        except ValueError as e:
            raise ConfigError(f"line {lineno}: arguments must be integers: {raw!r}") from e
        arity = {"batch": 1, Stages.CONV: 4, Stages.RELU: 0, Stages.POOL: 0, Stages.PAD: 1, Stages.FC: 1}
        if kind not in arity:
            raise ConfigError(f"line {lineno}: unknown stage {kind!r}")
        if len(values) != arity[kind]:
            raise ConfigError(f"line {lineno}: {kind} takes {arity[kind]} arguments, got {len(values)}")
        if kind == "batch":
            batch = values[0]
        else:
            rows.append((kind, values))
    stages = []
    for kind, values in rows:
        if kind == Stages.CONV:
            stages.append(Stage(kind, config=LayerConfig(*values, S=batch)))
        else:
            stages.append(Stage(kind, size=values[0] if values else None))
    return NetworkSpec(tuple(stages), batch)


def parse_spec_file(path: Union[str, Path]) -> NetworkSpec:
    try:
        text = Path(path).read_text()
    except OSError as e:
        raise ConfigError(f"cannot read network spec {path}: {e}") from e
    return parse_spec(text)


def chain_layers(configs: Sequence[LayerConfig], batch: int, fc_outputs: int) -> NetworkSpec:
    """Builds a network from conv layer configs, taking every declared (k, n) as given.

    Each conv is followed by a relu. Where the produced width exceeds the next layer's declared n, a 2x2 max pooling is
    inserted; where it falls short, the maps are zero-padded to n.

    Raises:
        ConfigError: If the map counts do not chain or a width cannot be reached by pooling and padding.

    """
    configs = [c.with_batch(batch) for c in configs]
    stages = []
    for c, nxt in zip(configs, configs[1:] + [None]):
        stages += [Stage(Stages.CONV, config=c), Stage(Stages.RELU)]
        if nxt is None:
            break
        if nxt.f != c.f_prime:
            raise ConfigError(f"layer {c} produces {c.f_prime} maps, the next layer {nxt} expects {nxt.f}")
        n = c.n_out
        if n > nxt.n and n % 2 == 0:
            stages.append(Stage(Stages.POOL))
            n //= 2
        if n < nxt.n:
            stages.append(Stage(Stages.PAD, size=nxt.n))
    stages.append(Stage(Stages.FC, size=fc_outputs))
    return NetworkSpec(tuple(stages), batch)


def _scaled(batch: int, divisor: int) -> NetworkSpec:
    """The reference layers with all map counts but the 3 input channels divided by divisor."""
    configs = []
    for i, c in enumerate(reference_configs(batch)):
        f = c.f if i == 0 else c.f // divisor
        configs.append(LayerConfig(c.k, c.n, f, c.f_prime // divisor, batch))
    return chain_layers(configs, batch, 1000)


PRESETS: dict[str, Callable[[], NetworkSpec]] = {
    "paper-net": lambda: _scaled(128, 1),
    "paper-net-small": lambda: _scaled(8, 8),
}


def preset(name: str) -> NetworkSpec:
    if name not in PRESETS:
        raise ConfigError(f"unknown preset {name!r}, choose from {', '.join(PRESETS)}")
    return PRESETS[name]()


# ----------------------------------------------------------------------------------------------------------------------
# stages as layers


class Layer:
    """A stage with state: forward stores what the backward pass needs, backward maps output to input gradients."""

    def forward(self, x):
        raise NotImplementedError(f"forward not implemented for {type(self)}")

    def backward(self, grad_output):
        raise RuntimeError(f"backward not implemented for {type(self)}")


class ConvLayer(Layer):
    def __init__(self, weight: WeightTensor4, engine: str, workspace: Optional[ConvWorkspace], threads: int):
        self.weight, self.engine, self.workspace, self.threads = weight, engine, workspace, threads

    def forward(self, x: RealTensor4) -> RealTensor4:
        self.x = x
        if self.engine == Methods.FFT:
            return forward_fft(self.workspace, x, self.weight)
        return forward_direct(x, self.weight, self.threads)

    def backward(self, grad_output: RealTensor4) -> RealTensor4:
        if self.engine == Methods.FFT:
            return grad_input_fft(self.workspace, grad_output, self.weight)
        return grad_input_direct(grad_output, self.weight, self.threads)

    def grad_weight(self, grad_output: RealTensor4) -> WeightTensor4:
        if self.engine == Methods.FFT:
            return grad_weight_fft(self.workspace, grad_output, self.x)
        return grad_weight_direct(grad_output, self.x, self.threads)


class ReluLayer(Layer):
    def forward(self, x: RealTensor4) -> RealTensor4:
        self.x = x
        return relu_forward(x)

    def backward(self, grad_output: RealTensor4) -> RealTensor4:
        return relu_backward(grad_output, self.x)


class PoolLayer(Layer):
    def forward(self, x: RealTensor4) -> RealTensor4:
        y, self.argmax = maxpool_forward(x)
        return y

    def backward(self, grad_output: RealTensor4) -> RealTensor4:
        return maxpool_backward(grad_output, self.argmax)


class PadLayer(Layer):
    def __init__(self, size: int):
        self.size = size

    def forward(self, x: RealTensor4) -> RealTensor4:
        self.n = x.rows
        return pad_to(x, self.size, self.size)

    def backward(self, grad_output: RealTensor4) -> RealTensor4:
        return crop(grad_output, 0, 0, self.n, self.n)


class FcLayer(Layer):
    def __init__(self, weight: np.ndarray, bias: np.ndarray):
        self.weight, self.bias = weight, bias

    def forward(self, x: RealTensor4) -> np.ndarray:
        self.x = x
        return fc_forward(x, self.weight, self.bias)

    def backward(self, grad_output: np.ndarray) -> RealTensor4:
        return fc_grad_input(grad_output, self.x, self.weight)

    def grad_params(self, grad_output: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        return fc_grad_params(grad_output, self.x)


# ----------------------------------------------------------------------------------------------------------------------
# training iteration


@dataclass
class StageTimings:
    """Wall time in milliseconds spent in each of the three operations over all stages of one iteration."""

    update_output: float = 0.0
    update_grad_input: float = 0.0
    acc_grad_parameters: float = 0.0

    @property
    def total(self) -> float:
        return self.update_output + self.update_grad_input + self.acc_grad_parameters

    def rows(self) -> list[tuple[str, float]]:
        return [
            (ConvOps.UPDATE_OUTPUT, self.update_output),
            (ConvOps.UPDATE_GRAD_INPUT, self.update_grad_input),
            (ConvOps.ACC_GRAD_PARAMETERS, self.acc_grad_parameters),
        ]


@dataclass
class Gradients:
    """Gradients of the summed scores.

    Attributes:
        conv_weights: dL/dw per conv layer.
        conv_inputs: dL/dx per conv layer index, for every conv layer but the first.
        fc_weight: dL/dW of the fc layer.
        fc_bias: dL/db of the fc layer.

    """

    conv_weights: list[WeightTensor4] = field(default_factory=list)
    conv_inputs: dict[int, RealTensor4] = field(default_factory=dict)
    fc_weight: Optional[np.ndarray] = None
    fc_bias: Optional[np.ndarray] = None


@dataclass
class IterationResult:
    timings: StageTimings
    grads: Gradients
    loss: float


class _Clock:
    def __init__(self):
        self.elapsed = 0.0

    def __enter__(self):
        self._start = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.elapsed += (time.perf_counter() - self._start) * 1e3


class Network:
    """A NetworkSpec bound to seeded parameters and convolution engines.

    Conv weights, fc weight and fc bias are drawn uniform in [-1, 1) from the (seed, role, layer index) streams.
    engine is one method for all conv layers or one method per conv layer. A network owns a single workspace, shared by
    all its FFT layers, so one network runs one iteration at a time.

    """

    def __init__(
        self,
        spec: NetworkSpec,
        engine: Union[str, Sequence[str]] = Methods.FFT,
        seed: int = 0,
        dtype: DType = dtypes.float32,
        threads: int = THREADS,
    ):
        self.spec, self.seed, self.dtype, self.threads = spec, seed, dtype, threads
        convs = spec.conv_layers
        engines = [engine] * len(convs) if isinstance(engine, str) else list(engine)
        if len(engines) != len(convs) or any(e not in Methods for e in engines):
            raise ConfigError(f"need one of {tuple(Methods)} per conv layer ({len(convs)}), got {engine!r}")
        self.engines = engines
        self.workspace = workspace_for(convs, dtype, threads) if Methods.FFT in engines else None
        self.conv_weights = [
            uniform_tensor(WeightTensor4, (c.f_prime, c.f, c.k, c.k), seed, Roles.W, dtype, index=i)
            for i, c in enumerate(convs)
        ]
        self.fc_weight = uniform((spec.fc_outputs, spec.fc_inputs), seed, Roles.FC_W, dtype)
        self.fc_bias = uniform((spec.fc_outputs,), seed, Roles.FC_B, dtype)
        logger.debug("network with %d conv layers, engines %s, fc %d -> %d",
                     len(convs), engines, spec.fc_inputs, spec.fc_outputs)

    def input_batch(self) -> RealTensor4:
        """The seeded input batch matching the first conv layer."""
        c = self.spec.conv_layers[0]
        return uniform_tensor(RealTensor4, (c.S, c.f, c.n, c.n), self.seed, Roles.X, self.dtype)

    def _layers(self) -> list[Layer]:
        layers, conv_index = [], 0
        for s in self.spec.stages:
            if s.kind == Stages.CONV:
                engine = self.engines[conv_index]
                layers.append(ConvLayer(self.conv_weights[conv_index], engine, self.workspace, self.threads))
                conv_index += 1
            elif s.kind == Stages.RELU:
                layers.append(ReluLayer())
            elif s.kind == Stages.POOL:
                layers.append(PoolLayer())
            elif s.kind == Stages.PAD:
                layers.append(PadLayer(s.size))
            else:
                layers.append(FcLayer(self.fc_weight, self.fc_bias))
        return layers

    def _check_batch(self, batch: RealTensor4) -> RealTensor4:
        c = self.spec.conv_layers[0]
        if batch.shape != (c.S, c.f, c.n, c.n):
            raise ShapeError(f"batch {batch.shape} does not match the first layer {c}")
        return batch.cast(self.dtype)

    def loss(self, batch: RealTensor4) -> float:
        """Sum of the scores of a forward pass, accumulated in 64-bit."""
        x = self._check_batch(batch)
        for layer in self._layers():
            x = layer.forward(x)
        return float(np.sum(x, dtype=np.float64))

    def run_iteration(self, batch: RealTensor4) -> IterationResult:
        """Forward pass, then all input and parameter gradients of the summed scores, timed per operation."""
        x = self._check_batch(batch)
        layers = self._layers()
        out, grad_in, grad_params = _Clock(), _Clock(), _Clock()

        with out:
            for layer in layers:
                x = layer.forward(x)
        scores = x

        grads = Gradients()
        g = np.ones_like(scores)
        conv_index = len(self.conv_weights)
        for i in reversed(range(len(layers))):
            layer = layers[i]
            if isinstance(layer, FcLayer):
                with grad_params:
                    grads.fc_weight, grads.fc_bias = layer.grad_params(g)
            elif isinstance(layer, ConvLayer):
                conv_index -= 1
                with grad_params:
                    grads.conv_weights.insert(0, layer.grad_weight(g))
            if i == 0:
                break
            with grad_in:
                g = layer.backward(g)
            if isinstance(layer, ConvLayer):
                grads.conv_inputs[conv_index] = g

        timings = StageTimings(out.elapsed, grad_in.elapsed, grad_params.elapsed)
        logger.debug("iteration: %s", timings)
        return IterationResult(timings, grads, float(np.sum(scores, dtype=np.float64)))


def run_iteration(
    spec: NetworkSpec,
    engine: Union[str, Sequence[str]],
    batch: Optional[RealTensor4] = None,
    seed: int = 0,
    dtype: DType = dtypes.float32,
    threads: int = THREADS,
) -> IterationResult:
    """One training iteration of spec with freshly seeded parameters; batch defaults to the seeded input batch."""
    net = Network(spec, engine, seed, dtype, threads)
    return net.run_iteration(net.input_batch() if batch is None else batch)
