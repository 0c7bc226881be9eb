"""Spiking neural network image classification: LIF neurons, STDP and gradient training."""

__version__ = "0.1.0"

from .encoding import EncoderSpec, SpikeTrain, encode_image, incentive_image  # noqa: E402
from .errors import (ConfigError, DataError, DimensionError, DomainError, FormatError, ModelError,  # noqa: E402
                     NumericError, SnnError)
from .neuron import LifParams, NeuronState, SynapseMatrix, simulate_layer  # noqa: E402
from .stdp import (StdpParams, SubsegmentSchedule, UnsupervisedModel, classify,  # noqa: E402
                   train_unsupervised_bilayer, train_unsupervised_single)
from .supervised import (AdamConfig, AdamState, GuidanceBundle, HuberSpec, ResponseKernel,  # noqa: E402
                         SupervisedModel, classify_supervised, extract_guidance, train_supervised)

__all__ = [
    "AdamConfig", "AdamState", "ConfigError", "DataError", "DimensionError", "DomainError", "EncoderSpec",
    "FormatError", "GuidanceBundle", "HuberSpec", "LifParams", "ModelError", "NeuronState", "NumericError",
    "ResponseKernel", "SnnError", "SpikeTrain", "StdpParams", "SubsegmentSchedule", "SupervisedModel",
    "SynapseMatrix", "UnsupervisedModel", "classify", "classify_supervised", "encode_image", "extract_guidance",
    "incentive_image", "simulate_layer", "train_supervised", "train_unsupervised_bilayer",
    "train_unsupervised_single",
]
