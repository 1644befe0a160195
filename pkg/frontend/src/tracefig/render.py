"""Render mean +/- std convergence curves from aggregate CSVs.

Input files follow the experiment harness aggregate format: a literal
`samples,mean,std` header followed by one row per checkpoint. Alongside the
image a JSON legend sidecar is written so tests (and scripts) can inspect
what was plotted without decoding pixels.
"""

import json
import os
from dataclasses import dataclass, field
from typing import List, Tuple

HEADER = "samples,mean,std"


class CsvFormatError(ValueError):
    pass


@dataclass
class PlotSpec:
    """One figure: labelled input CSVs plus output path and axis options."""

    entries: List[Tuple[str, str]]  # (label, csv path), plot order
    out: str
    title: str = ""
    x_log: bool = True
    y_log: bool = False

    def __post_init__(self):
        if not self.entries:
            raise ValueError("need at least one labelled input")
        labels = [label for label, _ in self.entries]
        if len(set(labels)) != len(labels):
            raise ValueError("labels must be unique: %r" % (labels,))


def read_aggregate(path):
    """Parse one aggregate CSV into (samples, means, stds) float lists."""
    with open(path) as fh:
        header = fh.readline().strip()
        if header != HEADER:
            raise CsvFormatError("%s: expected header %r, got %r"
                                 % (path, HEADER, header))
        samples, means, stds = [], [], []
        for lineno, line in enumerate(fh, start=2):
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            if len(parts) != 3:
                raise CsvFormatError("%s: line %d has %d columns, expected 3"
                                     % (path, lineno, len(parts)))
            try:
                samples.append(int(parts[0]))
                means.append(float(parts[1]))
                stds.append(float(parts[2]))
            except ValueError:
                raise CsvFormatError("%s: line %d: malformed value"
                                     % (path, lineno))
            if stds[-1] < 0:
                raise CsvFormatError("%s: line %d: negative std" % (path, lineno))
    if not samples:
        raise CsvFormatError("%s: no data rows" % path)
    return samples, means, stds


def _write_sidecar(spec, curves, path):
    # fixed key order and no timestamps so identical inputs give identical bytes
    payload = {
        "image": os.path.basename(spec.out),
        "title": spec.title,
        "x_log": spec.x_log,
        "y_log": spec.y_log,
        "curves": [
            {"label": label, "source": os.path.basename(src), "points": n}
            for (label, src), n in curves
        ],
    }
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def render_errorbars(spec):
    """Draw one error-bar curve per input and write image plus legend sidecar.

    Returns (image_path, sidecar_path). The sidecar is `<image>.legend.json`.
    """
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    data = [(entry, read_aggregate(entry[1])) for entry in spec.entries]

    fig, ax = plt.subplots(figsize=(6, 4))
    for (label, _), (samples, means, stds) in data:
        ax.errorbar(samples, means, yerr=stds, label=label, capsize=2)
    if spec.x_log:
        ax.set_xscale("log")
    if spec.y_log:
        ax.set_yscale("log")
    ax.set_xlabel("samples")
    ax.set_ylabel("mean")
    if spec.title:
        ax.set_title(spec.title)
    ax.legend()
    fig.tight_layout()
    fig.savefig(spec.out)
    plt.close(fig)

    sidecar = spec.out + ".legend.json"
    _write_sidecar(spec, [(entry, len(cols[0])) for entry, cols in data], sidecar)
    return spec.out, sidecar
