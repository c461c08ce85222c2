"""This module names the operations, methods and tensor roles the engine works with, using namedtuples.

Operation Types:
- ConvOps: The three per-layer training operations. updateOutput is the forward pass, updateGradInput the gradient
    w.r.t. the layer input and accGradParameters the gradient w.r.t. the weights.
- Methods: How a convolution is computed, either directly in the spatial domain or through the FFT.
- Roles: Which tensor a deterministic random draw is for. Keys of the benchmark input generator.
- Stages: Kinds of stages a network is composed of.

"""
from collections import namedtuple

ConvOps = namedtuple("ConvOps", ["UPDATE_OUTPUT", "UPDATE_GRAD_INPUT", "ACC_GRAD_PARAMETERS"])(
    "updateOutput", "updateGradInput", "accGradParameters"
)
Methods = namedtuple("Methods", ["DIRECT", "FFT"])("direct", "fft")
Roles = namedtuple("Roles", ["X", "W", "GY", "FC_W", "FC_B"])(1, 2, 3, 4, 5)
Stages = namedtuple("Stages", ["CONV", "RELU", "POOL", "PAD", "FC"])("conv", "relu", "pool", "pad", "fc")

# CLI spellings of the operations
OP_ALIASES = {
    "output": ConvOps.UPDATE_OUTPUT,
    "gradinput": ConvOps.UPDATE_GRAD_INPUT,
    "gradweight": ConvOps.ACC_GRAD_PARAMETERS,
}
