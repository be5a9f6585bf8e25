"""Reject inference for credit scoring: CI-EX, classical baselines and kickout metrics."""
from .classifier import ClassifierSpec, FittedClassifier
from .data import Dataset, SplitSpec, TrainState, from_arrays, synth_credit
from .framework import CiexSpec, IterationRecord, expand_dataset, retrieve_confident, run_ciex, select_iteration
from .isoforest import IsoForestSpec
from .metrics import KickoutInputs, auc, auk, kickout
from .topsis import topsis_select

__version__ = "0.1.0"
