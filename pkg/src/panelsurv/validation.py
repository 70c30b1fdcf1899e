"""Input validation helpers for the estimator kernels."""

import numpy as np


def check_durations_events(durations, events):
    """Coerce to aligned (int64 durations, bool events) arrays and validate."""
    durations = np.asarray(durations)
    events = np.asarray(events, dtype=bool)
    if durations.ndim != 1 or events.ndim != 1:
        raise ValueError("durations and events must be one-dimensional")
    if durations.shape != events.shape:
        raise ValueError(
            f"durations and events disagree in length: "
            f"{durations.shape[0]} vs {events.shape[0]}")
    if durations.size and not np.issubdtype(durations.dtype, np.integer):
        as_int = durations.astype(np.int64)
        if not np.array_equal(as_int, durations):
            raise ValueError("durations must be whole quarters")
        durations = as_int
    durations = durations.astype(np.int64)
    if durations.size and durations.min() < 1:
        raise ValueError("durations must be at least one quarter")
    return durations, events


def check_age(age):
    """Validate a non-negative integer age in quarters."""
    age = int(age)
    if age < 0:
        raise ValueError(f"age must be non-negative, got {age}")
    return age
