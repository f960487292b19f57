"""Synthetic source/target domain pairs with a controllable shift.

The generator places one Gaussian cluster per class, class means evenly
spaced on a radius-4 circle in the first two coordinates (remaining
coordinates are pure noise).  The target domain is drawn fresh from the same
process, then rotated in the first two coordinates and translated.  Rotation
angle, translation, and noise scale act as a monotone difficulty knob.

Target ground truth is retained in ``hidden_labels`` strictly for
evaluation; training code receives views with that field stripped.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, replace

import numpy as np

from .numeric import Rng, as_matrix

CIRCLE_RADIUS = 4.0


@dataclass
class LabeledDomain:
    """Feature matrix plus integer class labels."""

    features: np.ndarray
    labels: np.ndarray
    num_classes: int
    name: str = "source"

    def __post_init__(self):
        self.features = as_matrix(self.features, f"{self.name} features")
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.labels.ndim != 1 or len(self.labels) != self.features.shape[0]:
            raise ValueError(
                f"{self.name}: got {len(self.labels)} labels for "
                f"{self.features.shape[0]} feature rows"
            )
        if self.num_classes < 1:
            raise ValueError(f"{self.name}: num_classes must be >= 1")
        if self.labels.size and (self.labels.min() < 0 or self.labels.max() >= self.num_classes):
            raise ValueError(
                f"{self.name}: labels must lie in [0, {self.num_classes})"
            )
        if self.features.shape[0] < self.num_classes:
            raise ValueError(f"{self.name}: need at least one sample per class")

    def __len__(self) -> int:
        return self.features.shape[0]


@dataclass
class UnlabeledDomain:
    """Feature matrix without labels.  ``hidden_labels``, when present, is
    ground truth for evaluation only and must never feed training."""

    features: np.ndarray
    num_classes: int
    name: str = "target"
    hidden_labels: np.ndarray | None = None

    def __post_init__(self):
        self.features = as_matrix(self.features, f"{self.name} features")
        if self.num_classes < 1:
            raise ValueError(f"{self.name}: num_classes must be >= 1")
        if self.hidden_labels is not None:
            self.hidden_labels = np.asarray(self.hidden_labels, dtype=np.int64)
            if len(self.hidden_labels) != self.features.shape[0]:
                raise ValueError(
                    f"{self.name}: hidden_labels length {len(self.hidden_labels)} "
                    f"!= {self.features.shape[0]} rows"
                )
            if self.hidden_labels.size and (
                self.hidden_labels.min() < 0 or self.hidden_labels.max() >= self.num_classes
            ):
                raise ValueError(f"{self.name}: hidden labels must lie in [0, {self.num_classes})")

    def __len__(self) -> int:
        return self.features.shape[0]

    def without_hidden_labels(self) -> "UnlabeledDomain":
        """Training-safe view of this domain (evaluation field stripped)."""
        return replace(self, hidden_labels=None)


@dataclass
class ShiftSpec:
    """Parameters of one synthetic source/target pair."""

    num_classes: int = 3
    dim: int = 2
    per_class_count: int = 100
    rotation_deg: float = 0.0
    translation: np.ndarray | None = None
    noise_sigma: float = 0.4
    seed: int = 0

    def __post_init__(self):
        if not (2 <= self.num_classes <= 16):
            raise ValueError(f"num_classes must be in [2, 16], got {self.num_classes}")
        if self.dim < 2:
            raise ValueError(f"dim must be >= 2, got {self.dim}")
        if self.per_class_count < 1:
            raise ValueError(f"per_class_count must be >= 1, got {self.per_class_count}")
        if not self.noise_sigma > 0:
            raise ValueError(f"noise_sigma must be > 0, got {self.noise_sigma}")
        if self.translation is None:
            self.translation = np.zeros(self.dim, dtype=np.float64)
        else:
            self.translation = np.asarray(self.translation, dtype=np.float64)
            if self.translation.shape != (self.dim,):
                raise ValueError(
                    f"translation must be a {self.dim}-vector, got shape {self.translation.shape}"
                )


def _class_means(num_classes: int, dim: int) -> np.ndarray:
    means = np.zeros((num_classes, dim), dtype=np.float64)
    for c in range(num_classes):
        angle = 2.0 * math.pi * c / num_classes
        means[c, 0] = CIRCLE_RADIUS * math.cos(angle)
        means[c, 1] = CIRCLE_RADIUS * math.sin(angle)
    return means


def _draw_clusters(spec: ShiftSpec, rng: Rng) -> tuple[np.ndarray, np.ndarray]:
    """Class-major draws: all of class 0's samples, then class 1, ..."""
    means = _class_means(spec.num_classes, spec.dim)
    n_total = spec.num_classes * spec.per_class_count
    feats = np.empty((n_total, spec.dim), dtype=np.float64)
    labels = np.empty(n_total, dtype=np.int64)
    row = 0
    for c in range(spec.num_classes):
        for _ in range(spec.per_class_count):
            for d in range(spec.dim):
                feats[row, d] = means[c, d] + spec.noise_sigma * rng.gaussian()
            labels[row] = c
            row += 1
    return feats, labels


def generate_pair(spec: ShiftSpec) -> tuple[LabeledDomain, UnlabeledDomain]:
    """Deterministic source/target pair; the target is rotated and translated."""
    rng = Rng(spec.seed)
    src_feats, src_labels = _draw_clusters(spec, rng)
    tgt_feats, tgt_labels = _draw_clusters(spec, rng)

    phi = math.radians(spec.rotation_deg)
    cos_p, sin_p = math.cos(phi), math.sin(phi)
    x0 = tgt_feats[:, 0].copy()
    x1 = tgt_feats[:, 1].copy()
    tgt_feats[:, 0] = cos_p * x0 - sin_p * x1
    tgt_feats[:, 1] = sin_p * x0 + cos_p * x1
    tgt_feats += spec.translation

    source = LabeledDomain(src_feats, src_labels, spec.num_classes, name="source")
    target = UnlabeledDomain(
        tgt_feats, spec.num_classes, name="target", hidden_labels=tgt_labels
    )
    return source, target


def save_domain(domain: LabeledDomain | UnlabeledDomain, path: str | os.PathLike) -> None:
    """Write a domain as plain text.

    Line 1: ``rows cols num_classes labeled`` (labeled is 0 or 1), then one
    line per sample with space-separated features at 17 significant digits
    (exact float64 round-trip), plus the label when labeled.  Hidden labels
    of unlabeled domains are evaluation-only and are never serialized.
    """
    labeled = isinstance(domain, LabeledDomain)
    feats = domain.features
    rows, cols = feats.shape
    lines = [f"{rows} {cols} {domain.num_classes} {1 if labeled else 0}"]
    for i in range(rows):
        cells = [f"{v:.17g}" for v in feats[i]]
        if labeled:
            cells.append(str(int(domain.labels[i])))
        lines.append(" ".join(cells))
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def load_domain(path: str | os.PathLike, name: str | None = None) -> LabeledDomain | UnlabeledDomain:
    """Read a domain written by :func:`save_domain`; bit-exact round trip."""
    with open(path, "r", encoding="utf-8") as fh:
        raw_lines = fh.read().splitlines()
    if not raw_lines:
        raise ValueError(f"{path}: empty dataset file")
    header = raw_lines[0].split()
    if len(header) != 4:
        raise ValueError(f"{path}: line 1: header must be 'rows cols num_classes labeled'")
    try:
        rows, cols, num_classes, labeled = (int(tok) for tok in header)
    except ValueError:
        raise ValueError(f"{path}: line 1: header fields must be integers") from None
    if labeled not in (0, 1):
        raise ValueError(f"{path}: line 1: labeled flag must be 0 or 1, got {labeled}")
    if len(raw_lines) - 1 < rows:
        raise ValueError(f"{path}: expected {rows} sample lines, found {len(raw_lines) - 1}")

    feats = np.empty((rows, cols), dtype=np.float64)
    labels = np.empty(rows, dtype=np.int64) if labeled else None
    want = cols + (1 if labeled else 0)
    for i in range(rows):
        lineno = i + 2
        toks = raw_lines[i + 1].split()
        if len(toks) != want:
            raise ValueError(f"{path}: line {lineno}: expected {want} fields, found {len(toks)}")
        for j in range(cols):
            try:
                feats[i, j] = float(toks[j])
            except ValueError:
                raise ValueError(
                    f"{path}: line {lineno}: feature column {j + 1} is not a number: {toks[j]!r}"
                ) from None
        if labeled:
            try:
                lab = int(toks[cols])
            except ValueError:
                raise ValueError(
                    f"{path}: line {lineno}: label field is not an integer: {toks[cols]!r}"
                ) from None
            if not (0 <= lab < num_classes):
                raise ValueError(
                    f"{path}: line {lineno}: label {lab} out of range for {num_classes} classes"
                )
            labels[i] = lab

    if labeled:
        return LabeledDomain(feats, labels, num_classes, name=name or "loaded")
    return UnlabeledDomain(feats, num_classes, name=name or "loaded")
