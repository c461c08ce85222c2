from fftconv.config import LayerConfig  # noqa: F401 # pylint:disable=unused-import
from fftconv.data import RealTensor4, WeightTensor4  # noqa: F401 # pylint:disable=unused-import
from fftconv.conv_direct import forward_direct, grad_input_direct, grad_weight_direct  # noqa: F401
from fftconv.conv_fft import ConvWorkspace, forward_fft, grad_input_fft, grad_weight_fft, workspace_for  # noqa: F401
