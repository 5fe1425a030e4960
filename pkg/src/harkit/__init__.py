"""Personalized human-activity recognition toolkit.

From-scratch discretize/embed/conv networks over body-worn accelerometer
segments, classifier-only transfer personalization, and a leave-one-subject-out
evaluation harness.
"""

__version__ = "0.1.0"

from .datasets import Dataset, SynthConfig, load_sda, load_synth, load_wisdm, synth_generate
from .model import ConvBlockConfig, NetworkConfig, TrainedModel, build_network, forward, predict, train
from .signal import (ActivityLabel, DiscretizerSpec, RawSample, SegmentTensor,
                     discretize, fit_discretizer, segment, smooth, stack_channels)
from .tensor import AdamState, Parameter, Tensor, adam_step
from .transfer import (TransferSpec, TransferSplit, fine_tune,
                       freeze_all_but_classifier, sample_transfer_instances)
from .evaluate import (EvalReport, FoldResult, evaluate, export_report,
                       extract_shallow_features, loso_folds, run_experiment,
                       train_lr_baseline)

__all__ = [
    "ActivityLabel", "AdamState", "ConvBlockConfig", "Dataset", "DiscretizerSpec",
    "EvalReport", "FoldResult", "NetworkConfig", "Parameter", "RawSample",
    "SegmentTensor", "SynthConfig", "Tensor", "TrainedModel", "TransferSpec",
    "TransferSplit", "adam_step", "build_network", "discretize", "evaluate",
    "export_report", "extract_shallow_features", "fine_tune",
    "fit_discretizer", "forward", "freeze_all_but_classifier", "load_sda",
    "load_synth", "load_wisdm", "loso_folds", "predict", "run_experiment",
    "sample_transfer_instances", "segment", "smooth", "stack_channels",
    "synth_generate", "train", "train_lr_baseline",
]
