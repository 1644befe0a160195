"""Per-iteration run records shared by all solvers."""

import numpy as np
from dataclasses import dataclass, field
from typing import Optional


@dataclass
class TraceRow:
    iteration: int
    samples: int
    objective: float = float("nan")
    gap: float = float("nan")
    metric: float = float("nan")
    trunc_y: int = 0
    trunc_z: int = 0


@dataclass
class RunTrace:
    rows: list = field(default_factory=list)
    final_point: Optional[np.ndarray] = None
    averaged_point: Optional[np.ndarray] = None
    diagnostics: dict = field(default_factory=dict)

    def append(self, row):
        if self.rows and row.samples <= self.rows[-1].samples:
            raise ValueError("cumulative samples must be strictly increasing")
        self.rows.append(row)

    @property
    def total_samples(self):
        return self.rows[-1].samples if self.rows else 0


def concat_traces(traces):
    """Merge stage traces; sample counters are already cumulative."""
    out = RunTrace()
    for tr in traces:
        for row in tr.rows:
            out.append(row)
        out.final_point = tr.final_point
        out.averaged_point = tr.averaged_point
    return out
