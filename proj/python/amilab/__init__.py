"""Deterministic lab for explanation-assisted adversarial-example detection.

Thin re-export of the compiled `_core` module; everything heavy lives in C++.
"""

from ._core import (  # noqa: F401
    AdversarialSet,
    AmiError,
    AmiUsageError,
    Dataset,
    Model,
    Tensor,
    WitnessMap,
    accuracy,
    aggregate_triples,
    attribute_predict,
    classify_case,
    detect,
    determinism_check,
    extract_witnesses,
    generate_dataset,
    load_adversarial,
    load_dataset,
    load_model,
    load_witness_map,
    predict,
    replay_log,
    run_attack,
    run_pipeline,
    save_adversarial,
    save_dataset,
    save_model,
    save_witness_map,
    split_dataset,
    strengthen_value,
    train,
    weaken_value,
)

__all__ = [
    "AdversarialSet",
    "AmiError",
    "AmiUsageError",
    "Dataset",
    "Model",
    "Tensor",
    "WitnessMap",
    "accuracy",
    "aggregate_triples",
    "attribute_predict",
    "classify_case",
    "detect",
    "determinism_check",
    "extract_witnesses",
    "generate_dataset",
    "load_adversarial",
    "load_dataset",
    "load_model",
    "load_witness_map",
    "predict",
    "replay_log",
    "run_attack",
    "run_pipeline",
    "save_adversarial",
    "save_dataset",
    "save_model",
    "save_witness_map",
    "split_dataset",
    "strengthen_value",
    "train",
    "weaken_value",
]
