"""Hand-written recurrent network: coupled-gate LSTM layers, a linear
readout, backpropagation through time, and the Nadam optimizer.

Everything is float64 numpy; determinism and gradient-check fidelity matter
more than speed at this scale.
"""

from .lstm import LstmLayerParams, init_layer, lstm_layer_backward, lstm_layer_forward, sigmoid
from .nadam import Nadam
from .network import LstmNetwork, init_network
from .training import TrainConfig, TrainingReport, gradient_check, train_network

__all__ = [
    "LstmLayerParams",
    "LstmNetwork",
    "Nadam",
    "TrainConfig",
    "TrainingReport",
    "gradient_check",
    "init_layer",
    "init_network",
    "lstm_layer_backward",
    "lstm_layer_forward",
    "sigmoid",
    "train_network",
]
