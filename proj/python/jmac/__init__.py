"""Joint multilingual knowledge graph completion and alignment."""

import json

from ._jmac import (
    ConfigError,
    DataError,
    Dataset,
    EntrError,
    SynthError,
    Trainer,
    TrainError,
    greedy_match,
    load_dataset,
    matrix_entropy,
    seed_budget,
    similarity_matrix,
    synth,
)
from . import _jmac

__all__ = [
    "ConfigError", "DataError", "Dataset", "EntrError", "SynthError", "Trainer", "TrainError",
    "default_config", "fit", "greedy_match", "load_dataset", "load_trainer", "make_trainer",
    "matrix_entropy", "seed_budget", "similarity_matrix", "synth",
]


def default_config():
    return json.loads(_jmac.default_config_json())


def _dump(config):
    return _jmac.normalize_config_json(json.dumps(config))


def make_trainer(data, config):
    return Trainer(data, _dump(config))


def fit(data, config):
    """Returns (checkpoint bytes, best epoch, per-epoch log)."""
    return _jmac.fit(data, _dump(config))


def load_trainer(data, checkpoint):
    return _jmac.load_trainer(data, checkpoint)
