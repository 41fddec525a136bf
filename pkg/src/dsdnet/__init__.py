"""Segmented dynamic movement primitives predicted from images."""

from .baseline import CIMEDNet, baseline_fit_labels
from .dmp import BasisSet, DmpParams, Trajectory, concat_segments, rollout, rollout_batch
from .fitting import FitConfig, fit_segment
from .metrics import EvalReport, aggregate, dtw, rmse
from .model import DSDNet, NetworkSpec, Prediction
from .segmentation import SegmentedRecord, detect_pauses, encode_demo, pad_records, split

__version__ = "0.1.0"

__all__ = [
    "BasisSet", "CIMEDNet", "DSDNet", "DmpParams", "EvalReport", "FitConfig", "NetworkSpec",
    "Prediction", "SegmentedRecord", "Trajectory", "aggregate", "baseline_fit_labels",
    "concat_segments", "detect_pauses", "dtw", "encode_demo", "fit_segment", "pad_records",
    "rmse", "rollout", "rollout_batch", "split",
]
