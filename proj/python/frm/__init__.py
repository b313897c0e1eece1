"""Fatigue risk management engine: fatigue model, rating aggregation,
rotation planning and the fleet-shift simulator."""

import json as _json

from ._frm import (  # noqa: F401
    AlertnessState,
    FatigueContext,
    ModelParams,
    ParseError,
    ValidationError,
    __version__,
    aggregate,
    calibrate as _calibrate,
    compute_metrics,
    config_hash as _config_hash,
    default_config as _default_config,
    inter_rater_reliability,
    make_state,
    pfs_outcome,
    plan_rotation,
    run_scenario as _run_scenario,
    sa_evaluate,
    step_alertness,
    to_kss,
    to_ord_truth,
    weighted_kappa,
)


def _text(config):
    return config if isinstance(config, str) else _json.dumps(config)


def default_config():
    """Built-in scenario as a dict."""
    return _json.loads(_default_config())


def config_hash(config):
    return _config_hash(_text(config))


def run_scenario(config):
    """Run a scenario given as a dict or a JSON string."""
    return _run_scenario(_text(config))


def calibrate(config, null_model=False, sessions=5000):
    return _json.loads(_calibrate(_text(config), null_model, sessions))
