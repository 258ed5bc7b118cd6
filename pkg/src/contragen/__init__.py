"""Contrastive graph pretraining with generator-learned views."""

__version__ = "0.1.0"

from .graphdata import Batch, Dataset, Graph, make_batch  # noqa: F401
from .ndtape import ParamStore, Tape, Tensor, backward, grad_check  # noqa: F401
from .objectives import RewardConfig, compute_rewards, contrastive_loss, infobn_loss  # noqa: F401
from .trainer import TrainConfig, pretrain, train_step  # noqa: F401
