from enum import Enum, auto


class TrainingStatus(Enum):
    IDLE = auto()
    RUNNING = auto()
    CONVERGED = auto()
    FINISHED = auto()
    ABORTED = auto()
