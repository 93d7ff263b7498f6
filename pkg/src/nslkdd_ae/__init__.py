"""LSTM-autoencoder anomaly detection for NSL-KDD traffic records."""

from .autoencoder import Architecture, ModelParams, forward, gradients, init_params, lstm_cell
from .dataset import (EncodedDataset, EncodedSample, FeatureSchema, RawRecord, TrafficClass,
                      build_schema, encode, encode_many, map_attack_label, parse_nslkdd)
from .detector import Verdict, classify, reconstruction_error, select_threshold, sweep_thresholds
from .evaluation import auc, confusion, metrics, roc_curve
from .trainer import TrainConfig, adam_step, train

__version__ = "0.1.0"

__all__ = [
    "Architecture", "ModelParams", "forward", "gradients", "init_params", "lstm_cell",
    "EncodedDataset", "EncodedSample", "FeatureSchema", "RawRecord", "TrafficClass",
    "build_schema", "encode", "encode_many", "map_attack_label", "parse_nslkdd",
    "Verdict", "classify", "reconstruction_error", "select_threshold", "sweep_thresholds",
    "auc", "confusion", "metrics", "roc_curve",
    "TrainConfig", "adam_step", "train",
]
