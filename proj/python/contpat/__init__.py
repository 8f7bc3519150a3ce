"""Continuous pattern tokens for sentence-pair entailment.

Thin Python layer over the C++ core in ``contpat._core``. Reports and
analyses come back as dicts parsed from the core's JSON output.
"""

import json

from . import _core
from ._core import (
    ConfigError,
    DataError,
    Error,
    FormatError,
    LabelError,
    LengthError,
    ParameterError,
    ParseError,
    TrainingError,
    added_parameters,
    auc_percent,
    build_template,
    combine,
    decide,
    extend_vocabulary,
    pr_curve,
    segment_lengths,
    synth,
    tune_threshold,
)

__all__ = [
    "ConfigError", "DataError", "Error", "FormatError", "LabelError", "LengthError",
    "ParameterError", "ParseError", "TrainingError", "added_parameters", "analyze",
    "auc_percent", "build_template", "classification_report", "combine", "decide",
    "evaluate", "extend_vocabulary", "pr_curve", "segment_lengths", "sweep", "synth",
    "train", "transfer", "tune_threshold",
]


def classification_report(scores, labels, theta):
    return json.loads(_core.report_json(list(scores), list(labels), float(theta)))


def train(config, seed=None, out_dir=None):
    return _core.train(str(config), seed, None if out_dir is None else str(out_dir))


def _eval_result(raw):
    return {"report": json.loads(raw["report"]), "scores": raw["scores"], "score_file": raw["score_file"]}


def evaluate(checkpoint, test, theta="dev"):
    return _eval_result(_core.evaluate(str(checkpoint), str(test), str(theta)))


def transfer(checkpoint, test):
    return _eval_result(_core.transfer(str(checkpoint), str(test)))


def analyze(checkpoint, top=5):
    return json.loads(_core.analyze(str(checkpoint), top))


def sweep(config, n_list, k_list, out_dir, families=("alpha", "beta"), jobs=1, seed=None):
    """Returns the sweep CSV text (also written to out_dir/sweep.csv)."""
    return _core.sweep(str(config), list(n_list), list(k_list), str(out_dir), list(families), jobs, seed)
