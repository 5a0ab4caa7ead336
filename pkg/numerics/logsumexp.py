"""Streaming log-sum-exp accumulator."""
import numpy as np
from scipy.special import logsumexp


class StreamingLogSumExp:
    """Accumulates log Σ exp(x) over chunks while tracking the running max."""

    def __init__(self):
        self.max = -np.inf
        self._scaled_sum = 0.0
        self.count = 0

    def update(self, values: np.ndarray) -> None:
        values = np.asarray(values, dtype=float).ravel()
        if values.size == 0:
            return
        chunk_max = float(values.max())
        if chunk_max > self.max:
            self._scaled_sum *= np.exp(self.max - chunk_max)
            self.max = chunk_max
        self._scaled_sum += float(np.exp(logsumexp(values) - self.max))
        self.count += values.size

    def merge(self, other: "StreamingLogSumExp") -> None:
        if other.count == 0:
            return
        if other.max > self.max:
            self._scaled_sum *= np.exp(self.max - other.max)
            self.max = other.max
        self._scaled_sum += other._scaled_sum * np.exp(other.max - self.max)
        self.count += other.count

    @property
    def value(self) -> float:
        if self.count == 0:
            return -np.inf
        return float(self.max + np.log(self._scaled_sum))
