from .baselines import Distiller, DistillDataset, JointTrainer
from .env import LocomotionEnv
from .evaluation import EvalMetrics, NormalizedReport, evaluate, normalize
from .network import NetConfig, OraclePolicy, ULTNet
from .trainer import UnifiedTrainer

__version__ = "0.1.0"

__all__ = [
    "LocomotionEnv",
    "NetConfig",
    "ULTNet",
    "OraclePolicy",
    "UnifiedTrainer",
    "JointTrainer",
    "Distiller",
    "DistillDataset",
    "EvalMetrics",
    "NormalizedReport",
    "evaluate",
    "normalize",
]
