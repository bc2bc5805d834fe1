"""Uniform-bin histogram container shared by the counting and fitting code."""
from dataclasses import dataclass

import numpy as np


@dataclass
class Histogram:
    """Counts over a uniform time axis.

    ``origin`` is the left edge of bin 0 in seconds (negative for delay
    axes), ``bin_width`` is in seconds.
    """

    bin_width: float
    origin: float
    counts: np.ndarray

    def __post_init__(self):
        self.counts = np.asarray(self.counts, dtype=np.int64)
        if not self.bin_width > 0:
            raise ValueError("bin_width must be positive")
        if np.any(self.counts < 0):
            raise ValueError("histogram counts must be non-negative")

    def __len__(self):
        return len(self.counts)

    @property
    def edges(self):
        return self.origin + self.bin_width * np.arange(len(self.counts) + 1)

    @property
    def centers(self):
        return self.origin + self.bin_width * (np.arange(len(self.counts)) + 0.5)

    @property
    def total(self):
        return int(self.counts.sum())

    def reversed(self):
        """Histogram of the negated axis (swap the roles of the two channels)."""
        return Histogram(self.bin_width, -(self.origin + self.bin_width * len(self.counts)),
                         self.counts[::-1].copy())

    def to_csv(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("bin_center_s,count\n")
            for c, n in zip(self.centers, self.counts):
                fh.write(f"{c:.6e},{int(n)}\n")

    @classmethod
    def from_csv(cls, path):
        data = np.loadtxt(path, delimiter=",", skiprows=1, comments="#", ndmin=2)
        centers, counts = data[:, 0], data[:, 1]
        if len(centers) < 2:
            raise ValueError(f"{path}: need at least two bins")
        width = float(np.median(np.diff(centers)))
        return cls(width, float(centers[0] - 0.5 * width), np.rint(counts).astype(np.int64))
