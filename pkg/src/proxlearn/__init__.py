"""Mean-field training of shallow networks by a Wasserstein proximal recursion
over a weighted particle cloud."""

from .cloud import InitSpec, ParticleCloud, init_cloud, load_cloud, save_cloud
from .config import ProxConfig, load_config
from .errors import ConfigError, DataError, NumericalError, ProxLearnError
from .model import ModelSpec
from .trainer import evaluate, prox_learn_step, sweep, train

__all__ = [
    "ConfigError", "DataError", "InitSpec", "ModelSpec", "NumericalError", "ParticleCloud",
    "ProxConfig", "ProxLearnError", "evaluate", "init_cloud", "load_cloud", "load_config",
    "prox_learn_step", "save_cloud", "sweep", "train",
]
__version__ = "0.1.0"
