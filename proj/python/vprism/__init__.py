"""Python bindings for vprism."""

import json

from ._vprism import (
    Cloud,
    InputError,
    Model,
    NumericalError,
    Scene,
    bouchard_bound,
    entropy,
    log_sum_exp,
    preset_names,
)
from . import _vprism

__all__ = [
    "Cloud",
    "InputError",
    "Model",
    "NumericalError",
    "Scene",
    "bouchard_bound",
    "build_model",
    "default_hyperparams",
    "entropy",
    "evaluate",
    "log_sum_exp",
    "preset_names",
]


def default_hyperparams():
    """Default hyperparameters as a dict."""
    return json.loads(_vprism.default_hyperparams())


def build_model(cloud, **overrides):
    """Fit a model to a cloud. Keyword arguments override hyperparameters.

    Returns (model, stats) where stats is a dict of counts and timings.
    """
    model, stats = _vprism.build_model(cloud, json.dumps(overrides) if overrides else "")
    return model, json.loads(stats)


def evaluate(model, scene, class_to_object, seed=0):
    """Per-object IoU and chamfer against the scene's ground truth."""
    return json.loads(_vprism.evaluate(model, scene, class_to_object, seed))
