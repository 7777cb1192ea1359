from .data import SyntheticDataset, make_am_dataset
from .model import ParamVector, backward, forward, init_params
from .optim import TrainState, adam_step, early_stop, lr_schedule, project_constraints
from .train import evaluate, train

__all__ = [
    "ParamVector",
    "SyntheticDataset",
    "TrainState",
    "adam_step",
    "backward",
    "early_stop",
    "evaluate",
    "forward",
    "init_params",
    "lr_schedule",
    "make_am_dataset",
    "project_constraints",
    "train",
]
