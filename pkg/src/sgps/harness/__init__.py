from .config import ExperimentConfig, make_task, parse_config, parse_config_text, run_stream
from .pgm import read_pgm, write_pgm
from .runner import run_experiment
from .svg import polyline_chart, write_chart

__all__ = [
    "ExperimentConfig",
    "make_task",
    "parse_config",
    "parse_config_text",
    "run_stream",
    "read_pgm",
    "write_pgm",
    "run_experiment",
    "polyline_chart",
    "write_chart",
]
