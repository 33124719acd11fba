from .status import TrainingStatus
from .train_config import TrainConfig
from .runner import SweepRecord, TrainingRunner, train
from .ratio_sweep import run_ratio_sweep
