"""Deep recurrent networks trained online by gradient descent through time and
space, with the data, metric, baseline and exploration tooling around them."""

from .netcore import NetworkConfig, NetworkState, forward_step, init_network, weight_counts
from .train import TrainingSchedule, train_series

__all__ = ["NetworkConfig", "NetworkState", "TrainingSchedule", "forward_step",
           "init_network", "train_series", "weight_counts"]
