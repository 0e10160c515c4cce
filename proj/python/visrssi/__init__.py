"""Decomposed RSSI prediction: rssi = -pl + sh."""

from ._core import (
    Dataset,
    Model,
    VisrssiError,
    component_metrics,
    compose_rssi,
    evaluate,
    generate_dataset,
    interference_experiment,
    invert_distance,
    load_dataset,
    path_loss,
    sh_proxy_ground_truth,
    simulate,
    train,
)

__all__ = [
    "Dataset",
    "Model",
    "VisrssiError",
    "component_metrics",
    "compose_rssi",
    "evaluate",
    "generate_dataset",
    "interference_experiment",
    "invert_distance",
    "load_dataset",
    "path_loss",
    "sh_proxy_ground_truth",
    "simulate",
    "train",
]
