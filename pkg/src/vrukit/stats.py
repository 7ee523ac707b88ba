"""Class histograms, imbalance weights, dataset summaries and training manifests."""

from __future__ import annotations

import csv
import enum
import io
import json
from dataclasses import asdict, dataclass, field
from typing import Iterable, Mapping, Sequence

from .errors import ValidationError
from .geometry import Annotation, Modality
from .ingest import DatasetIndex
from .labels import DONT_CARE, UNIFIED_CLASSES, FilterName


@dataclass
class ClassHistogram:
    """Instance counts per class name plus a separate Don't-care bucket."""

    classes: tuple[str, ...]
    counts: dict[str, int]
    dont_care: int = 0
    split: str = "train"
    modality: Modality = Modality.RGB

    @property
    def total(self) -> int:
        return sum(self.counts.values())

    def __add__(self, other: "ClassHistogram") -> "ClassHistogram":
        if other.classes != self.classes:
            raise ValidationError("cannot merge histograms over different class sets")
        merged = {c: self.counts[c] + other.counts[c] for c in self.classes}
        return ClassHistogram(self.classes, merged, self.dont_care + other.dont_care, self.split, self.modality)

    def to_dict(self) -> dict:
        return {
            "split": self.split,
            "modality": self.modality.value,
            "counts": {c: self.counts[c] for c in self.classes},
            DONT_CARE: self.dont_care,
            "total": self.total,
        }


def count_instances(
    annos: Iterable[Annotation],
    classes: Sequence[str] = UNIFIED_CLASSES,
    split: str = "train",
    modality: Modality = Modality.RGB,
) -> ClassHistogram:
    counts = [0] * len(classes)
    dont_care = 0
    for a in annos:
        if a.ignore:
            dont_care += 1
        else:
            counts[a.class_id] += 1
    return ClassHistogram(tuple(classes), dict(zip(classes, counts)), dont_care, split, Modality(modality))


class WeightScheme(str, enum.Enum):
    INVERSE_FREQ = "inverse_freq"
    INVERSE_SQRT = "inverse_sqrt"
    UNIFORM = "uniform"


@dataclass
class ClassWeights:
    weights: dict[int, float]
    names: tuple[str, ...]
    scheme: WeightScheme
    cap: float

    def by_name(self) -> dict[str, float]:
        return {self.names[i]: w for i, w in sorted(self.weights.items())}


def _cap_and_normalize(raw: list[float], cap: float) -> list[float]:
    """Rescale to mean 1 with no value above ``cap``.

    Values that would exceed the cap are pinned to it and the remainder is
    rescaled to keep the mean at 1; repeated until no new value is pinned.
    """
    k = len(raw)
    pinned = [False] * k
    while not all(pinned):
        free_sum = sum(r for r, p in zip(raw, pinned) if not p)
        budget = k - cap * sum(pinned)
        scale = budget / free_sum
        out = [cap if p else r * scale for r, p in zip(raw, pinned)]
        newly = [i for i, (v, p) in enumerate(zip(out, pinned)) if not p and v > cap]
        if not newly:
            return out
        for i in newly:
            pinned[i] = True
    return [cap] * k


def compute_class_weights(
    hist: ClassHistogram,
    scheme: WeightScheme | str = WeightScheme.INVERSE_FREQ,
    cap: float = 10.0,
    epsilon: int = 1,
) -> ClassWeights:
    """Loss weights that grow as a class gets rarer.

    Inverse frequency uses ``N / (K * max(n_c, epsilon))`` over the K classes
    with nonzero counts; the sqrt scheme takes the square root of that. Weights
    are capped and normalized to mean 1 over those K classes. Classes with no
    instances get the cap.
    """
    scheme = WeightScheme(scheme)
    if cap < 1:
        raise ValidationError(f"cap must be >= 1, got {cap}")
    if epsilon < 1:
        raise ValidationError(f"epsilon must be >= 1, got {epsilon}")
    counts = [hist.counts[c] for c in hist.classes]
    nonzero = [i for i, n in enumerate(counts) if n > 0]
    if not nonzero:
        raise ValidationError("all class counts are zero")

    if scheme is WeightScheme.UNIFORM:
        return ClassWeights({i: 1.0 for i in range(len(counts))}, hist.classes, scheme, cap)

    total = sum(counts)
    k = len(nonzero)
    raw = [total / (k * max(counts[i], epsilon)) for i in nonzero]
    if scheme is WeightScheme.INVERSE_SQRT:
        raw = [r ** 0.5 for r in raw]
    normalized = _cap_and_normalize(raw, cap)

    weights = {i: float(cap) for i in range(len(counts))}
    for i, w in zip(nonzero, normalized):
        weights[i] = w
    return ClassWeights(weights, hist.classes, scheme, cap)


@dataclass(frozen=True)
class SummaryRow:
    split: str
    modality: str
    images: int
    labels: int


_SPLIT_ORDER = {"train": 0, "val": 1, "test": 2}


def dataset_summary(indexes: Iterable[DatasetIndex]) -> list[SummaryRow]:
    """Image and label-file counts per (modality, split), plus a total row."""
    acc: dict[tuple[str, str], list[int]] = {}
    for idx in indexes:
        key = (Modality(idx.modality).value, idx.split)
        pair = acc.setdefault(key, [0, 0])
        pair[0] += idx.image_count
        pair[1] += idx.label_file_count
    if not acc:
        return []
    keys = sorted(acc, key=lambda k: (k[0], _SPLIT_ORDER.get(k[1], 99), k[1]))
    rows = [SummaryRow(split, modality, *acc[(modality, split)]) for modality, split in keys]
    rows.append(SummaryRow("total", "all", sum(r.images for r in rows), sum(r.labels for r in rows)))
    return rows


def summary_csv(rows: Sequence[SummaryRow]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["modality", "split", "images", "labels"])
    for r in rows:
        writer.writerow([r.modality, r.split, r.images, r.labels])
    return buf.getvalue()


def render_table(header: Sequence[str], rows: Sequence[Sequence[object]]) -> str:
    cells = [[str(h) for h in header]] + [[str(c) for c in row] for row in rows]
    widths = [max(len(r[i]) for r in cells) for i in range(len(header))]
    lines = []
    for n, row in enumerate(cells):
        lines.append("  ".join(c.ljust(w) if i == 0 else c.rjust(w) for i, (c, w) in enumerate(zip(row, widths))))
        if n == 0:
            lines.append("  ".join("-" * w for w in widths))
    return "\n".join(lines) + "\n"


def summary_text(rows: Sequence[SummaryRow]) -> str:
    return render_table(
        ["dataset", "images", "labels"],
        [(f"{r.modality} {r.split}", r.images, r.labels) for r in rows],
    )


class AugmentationLevel(str, enum.Enum):
    NONE = "none"
    LIGHT = "light"
    HEAVY = "heavy"


@dataclass
class ExperimentConfig:
    """Training settings handed to an external trainer; defaults are the final setup."""

    resolution: int = 640
    freeze_layers: int = 6
    batch: int = 4
    epochs: int = 100
    patience: int = 50
    class_filter: FilterName = FilterName.SEVEN_CLASS
    weights_file: str | None = None
    augmentation_level: AugmentationLevel = AugmentationLevel.NONE
    extra: dict = field(default_factory=dict)

    def validate(self) -> None:
        if not isinstance(self.resolution, int) or self.resolution <= 0:
            raise ValidationError(f"resolution must be a positive integer, got {self.resolution}")
        if not isinstance(self.freeze_layers, int) or not (0 <= self.freeze_layers <= 10):
            raise ValidationError(f"freeze_layers must be in [0, 10], got {self.freeze_layers}")
        if not isinstance(self.batch, int) or self.batch <= 0:
            raise ValidationError(f"batch must be positive, got {self.batch}")
        if not isinstance(self.epochs, int) or self.epochs <= 0:
            raise ValidationError(f"epochs must be positive, got {self.epochs}")
        if not isinstance(self.patience, int) or self.patience < 0:
            raise ValidationError(f"patience must be non-negative, got {self.patience}")
        try:
            self.class_filter = FilterName(self.class_filter)
            self.augmentation_level = AugmentationLevel(self.augmentation_level)
        except ValueError as exc:
            raise ValidationError(str(exc)) from None


def emit_experiment_manifest(config: ExperimentConfig | None = None) -> str:
    config = config or ExperimentConfig()
    config.validate()
    data = asdict(config)
    data["class_filter"] = config.class_filter.value
    data["augmentation_level"] = config.augmentation_level.value
    if not data["extra"]:
        del data["extra"]
    return json.dumps(data, indent=2, sort_keys=True) + "\n"


def weights_json(weights: ClassWeights) -> str:
    return json.dumps(weights.by_name(), indent=2) + "\n"


def histogram_json(hists: Mapping[str, ClassHistogram]) -> str:
    return json.dumps({k: h.to_dict() for k, h in hists.items()}, indent=2) + "\n"
