"""Labeled amplitude samples and the CSV interchange format.

A dataset file has the header ``cell_id,label,amplitude`` and one sample
per row. Labels are ``clutter``, ``primary`` or ``secondary``; a cell's
label must be the same on all of its rows. Rows of a cell keep their file
order, and cells are returned in order of first appearance.
"""

import csv
from dataclasses import dataclass, field
from enum import Enum
import math
import os

import numpy as np

from .errors import DegenerateDataError, ParseError, SchemaError

HEADER = ("cell_id", "label", "amplitude")
NORMALIZE_ENV = "SEAKDE_NORMALIZE"


class CellLabel(str, Enum):
    CLUTTER_ONLY = "clutter"
    PRIMARY = "primary"
    SECONDARY = "secondary"


class NormalizeMode(str, Enum):
    MAX_ABS = "maxabs"
    RMS = "rms"

    @classmethod
    def parse(cls, value):
        if isinstance(value, cls):
            return value
        key = str(value).strip().lower().replace("_", "").replace("-", "")
        aliases = {"maxabs": cls.MAX_ABS, "max": cls.MAX_ABS, "rms": cls.RMS,
                   "rootmeansquare": cls.RMS}
        if key not in aliases:
            raise SchemaError(f"unknown normalization mode {value!r}")
        return aliases[key]

    @classmethod
    def from_env(cls, default="maxabs"):
        return cls.parse(os.environ.get(NORMALIZE_ENV, default))


@dataclass(frozen=True)
class SampleSet:
    cell_id: int
    label: CellLabel
    amplitudes: np.ndarray
    source: str = ""

    def __post_init__(self):
        amps = np.array(self.amplitudes, dtype=float, copy=True).ravel()
        if amps.size == 0:
            raise DegenerateDataError(f"cell {self.cell_id}: no amplitudes")
        if not np.all(np.isfinite(amps)):
            raise DegenerateDataError(f"cell {self.cell_id}: non-finite amplitude")
        if np.any(amps < 0):
            raise DegenerateDataError(f"cell {self.cell_id}: negative amplitude")
        amps.setflags(write=False)
        object.__setattr__(self, "amplitudes", amps)
        object.__setattr__(self, "label", CellLabel(self.label))
        object.__setattr__(self, "cell_id", int(self.cell_id))

    def __len__(self):
        return self.amplitudes.size

    def with_amplitudes(self, amplitudes, source=None):
        return SampleSet(self.cell_id, self.label, amplitudes,
                         self.source if source is None else source)


@dataclass(frozen=True)
class Dataset:
    name: str
    cells: tuple = field(default_factory=tuple)

    def __post_init__(self):
        cells = tuple(self.cells)
        ids = [c.cell_id for c in cells]
        if len(set(ids)) != len(ids):
            raise SchemaError(f"dataset {self.name!r}: duplicate cell ids")
        if sum(c.label is CellLabel.PRIMARY for c in cells) > 1:
            raise SchemaError(f"dataset {self.name!r}: more than one primary cell")
        object.__setattr__(self, "cells", cells)

    def by_label(self, label):
        label = CellLabel(label)
        return [c for c in self.cells if c.label is label]

    @property
    def clutter_cells(self):
        return self.by_label(CellLabel.CLUTTER_ONLY)

    @property
    def primary(self):
        found = self.by_label(CellLabel.PRIMARY)
        return found[0] if found else None

    def cell(self, cell_id):
        for c in self.cells:
            if c.cell_id == cell_id:
                return c
        raise KeyError(cell_id)

    def normalized(self, mode=NormalizeMode.MAX_ABS, joint=False):
        """Normalize every cell.

        ``joint=True`` takes one scale from the pooled clutter-only cells and
        applies it to all cells, which keeps target and clutter amplitudes
        comparable for detection.
        """
        if not joint:
            return Dataset(self.name, tuple(normalize(c, mode) for c in self.cells))
        pool = self.clutter_cells or list(self.cells)
        ref = SampleSet(-1, CellLabel.CLUTTER_ONLY, np.concatenate([c.amplitudes for c in pool]))
        scale = normalization_scale(ref, mode)
        return Dataset(self.name, tuple(c.with_amplitudes(c.amplitudes / scale) for c in self.cells))


def normalize(samples: SampleSet, mode=NormalizeMode.MAX_ABS) -> SampleSet:
    """Rescale a cell to unit peak (``maxabs``) or unit mean square (``rms``)."""
    return samples.with_amplitudes(samples.amplitudes / normalization_scale(samples, mode))


def normalization_scale(samples: SampleSet, mode=NormalizeMode.MAX_ABS) -> float:
    mode = NormalizeMode.parse(mode)
    amps = samples.amplitudes
    if mode is NormalizeMode.MAX_ABS:
        scale = float(np.max(np.abs(amps)))
    else:
        scale = math.sqrt(float(np.mean(amps * amps)))
    if scale == 0.0:
        raise DegenerateDataError(f"cell {samples.cell_id}: all amplitudes are zero")
    return scale


def load_amplitude_csv(path, name=None) -> Dataset:
    """Parse a dataset file; errors name the offending line."""
    path = os.fspath(path)
    rows = {}
    labels = {}
    order = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise SchemaError(f"{path}: empty file")
        if tuple(h.strip() for h in header) != HEADER:
            raise SchemaError(f"{path}: header must be {','.join(HEADER)}, got {','.join(header)}")
        for row in reader:
            line = reader.line_num
            if not row or all(not f.strip() for f in row):
                continue
            if len(row) != 3:
                raise ParseError(f"expected 3 fields, got {len(row)}", line)
            try:
                cell_id = int(row[0])
            except ValueError:
                raise ParseError(f"bad cell_id {row[0]!r}", line) from None
            try:
                label = CellLabel(row[1].strip().lower())
            except ValueError:
                raise SchemaError(f"line {line}: unknown label {row[1]!r}") from None
            try:
                amp = float(row[2])
            except ValueError:
                raise ParseError(f"bad amplitude {row[2]!r}", line) from None
            if not math.isfinite(amp) or amp < 0:
                raise ParseError(f"amplitude must be finite and >= 0, got {row[2]!r}", line)
            if cell_id not in rows:
                rows[cell_id] = []
                labels[cell_id] = label
                order.append(cell_id)
            elif labels[cell_id] is not label:
                raise SchemaError(f"line {line}: cell {cell_id} relabeled "
                                  f"{labels[cell_id].value} -> {label.value}")
            rows[cell_id].append(amp)
    if not order:
        raise SchemaError(f"{path}: no data rows")
    src = os.path.basename(path)
    cells = [SampleSet(cid, labels[cid], rows[cid], source=f"{src}#cell{cid}") for cid in order]
    return Dataset(name or os.path.splitext(src)[0], tuple(cells))


def save_amplitude_csv(dataset: Dataset, path):
    """Write a dataset; ``repr`` floats make load/save round-trip exactly."""
    with open(os.fspath(path), "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(HEADER)
        for cell in dataset.cells:
            lab = cell.label.value
            for amp in cell.amplitudes:
                w.writerow((cell.cell_id, lab, repr(float(amp))))
