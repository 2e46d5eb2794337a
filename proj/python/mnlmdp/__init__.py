"""Python bindings for the mnlmdp library."""

import json

from . import _core
from ._core import (
    ConfidenceParams,
    ConfigError,
    DomainError,
    Env,
    IoError,
    Ocee,
    ParseError,
    ValidationError,
    ValueTable,
    hard_instance,
    hessian,
    log_sum_exp,
    nll_gradient,
    project_h_norm,
    riverswim,
    sha256_hex,
    sigma_squared,
    softmax,
)

__version__ = _core.__version__


def load_env(doc):
    """Builds an environment from a config dict or JSON string."""
    return _core.load_env(doc if isinstance(doc, str) else json.dumps(doc))


def validate_config(config):
    _core.validate_config(config if isinstance(config, str) else json.dumps(config))


def run_experiment(config):
    """Runs an experiment config (dict or JSON string).

    Returns a dict with the episodes CSV text, the per-episode regret curve and
    the parsed summary.
    """
    out = _core.run_experiment(config if isinstance(config, str) else json.dumps(config))
    out["summary"] = json.loads(out["summary"])
    return out


def env_to_dict(env):
    return json.loads(env.to_json())
