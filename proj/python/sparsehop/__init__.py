# Copyright 2026 The SparseHop Authors.
# SPDX-License-Identifier: Apache-2.0

"""Sparse modern Hopfield networks for tabular data."""

from sparsehop._core import (
    InputError,
    Model,
    NumericalError,
    binary_auc,
    energy,
    entmax,
    entmax_conjugate,
    entmax_jacobian,
    retrieval_step,
    retrieve,
    run_experiment,
    tsallis_entropy,
)

__all__ = [
    "InputError",
    "Model",
    "NumericalError",
    "binary_auc",
    "energy",
    "entmax",
    "entmax_conjugate",
    "entmax_jacobian",
    "retrieval_step",
    "retrieve",
    "run_experiment",
    "tsallis_entropy",
]
