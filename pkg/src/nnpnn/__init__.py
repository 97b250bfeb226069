"""Neural networks that take other neural networks as input."""

from .autodiff import Graph, ParamStore, finite_diff_check
from .model import NnpnnConfig, nnpnn_forward, nnpnn_init
from .networks import DenseNetwork, MetaNetwork, NetSpec, NetTemplate, generate_nn, random_input
from .rng import Rng

__version__ = "0.1.0"
