"""MURIM: reputation-based incentives for federated learning, as a desk-scale simulator."""

from .config import RunConfig, parse_config
from .simulator import RunResult, RunSummary, attack_experiment, run, sweep

__all__ = ["RunConfig", "RunResult", "RunSummary", "attack_experiment", "parse_config", "run", "sweep"]
__version__ = "0.1.0"
