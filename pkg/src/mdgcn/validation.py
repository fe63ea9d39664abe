"""Argument-checking helpers shared across the package."""

import numpy as np

__all__ = [
    "check_open_fraction",
    "check_unit_interval",
    "check_positive_int",
    "check_probability",
    "check_dim",
    "check_matrix",
]


def check_open_fraction(name, value):
    """Require ``value`` in the open interval (0, 1)."""
    if not 0.0 < value < 1.0:
        raise ValueError(f"{name} must lie strictly between 0 and 1, got {value}")
    return float(value)


def check_unit_interval(name, value):
    """Require ``value`` in the closed interval [0, 1]."""
    if not 0.0 <= value <= 1.0:
        raise ValueError(f"{name} must lie in [0, 1], got {value}")
    return float(value)


def check_probability(name, value):
    return check_unit_interval(name, value)


def check_positive_int(name, value):
    if int(value) != value or value < 1:
        raise ValueError(f"{name} must be a positive integer, got {value}")
    return int(value)


def check_dim(graph, dim):
    if not 0 <= dim < graph.num_dims:
        raise ValueError(
            f"dimension {dim} out of range for graph with {graph.num_dims} dimensions"
        )
    return int(dim)


def check_matrix(name, array, rows=None, cols=None):
    """Require a 2-d float array, optionally with fixed row / column counts."""
    array = np.asarray(array, dtype=np.float64)
    if array.ndim != 2:
        raise ValueError(f"{name} must be 2-dimensional, got shape {array.shape}")
    if rows is not None and array.shape[0] != rows:
        raise ValueError(f"{name} must have {rows} rows, got {array.shape[0]}")
    if cols is not None and array.shape[1] != cols:
        raise ValueError(f"{name} must have {cols} columns, got {array.shape[1]}")
    return array
