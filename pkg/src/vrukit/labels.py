"""Unified class set, per-dataset label maps and experiment class filters."""

from __future__ import annotations

import enum
import json
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from types import MappingProxyType
from typing import Iterable, Mapping, Sequence

from .errors import ConfigError, MappingError
from .geometry import IGNORE_CLASS_ID, Annotation
from .ingest import SourceAnnotation, SourceDataset

UNIFIED_CLASSES: tuple[str, ...] = (
    "Car",
    "Pedestrian",
    "Cyclist",
    "Bus",
    "Truck",
    "Animal",
    "Motorcycle",
    "Scooter",
    "OtherVehicle",
)
DONT_CARE = "Don't care"

IGNORE = "Ignore"
DROP = "Drop"
WILDCARD = "*"


def fold(name: str) -> str:
    return name.strip().casefold()


# One row per unified class; cells are the source class strings of each dataset.
_DEFAULT_TABLE: dict[str, dict[SourceDataset, tuple[str, ...]]] = {
    "Car": {
        SourceDataset.KITTI: ("Car", "Van"),
        SourceDataset.BDD100K: ("Car",),
        SourceDataset.FLIR: ("Car",),
    },
    "Pedestrian": {
        SourceDataset.KITTI: ("Pedestrian", "Person_sitting"),
        SourceDataset.BDD100K: ("Person", "rider"),
        SourceDataset.FLIR: ("Person", "people", "stroller"),
    },
    "Cyclist": {
        SourceDataset.KITTI: ("Cyclist",),
        SourceDataset.BDD100K: ("Bike",),
        SourceDataset.FLIR: ("Bike",),
    },
    "Bus": {
        SourceDataset.KITTI: ("Bus",),
        SourceDataset.BDD100K: ("Bus",),
        SourceDataset.FLIR: ("Bus",),
    },
    "Truck": {
        SourceDataset.KITTI: ("Truck",),
        SourceDataset.BDD100K: ("truck",),
        SourceDataset.FLIR: ("truck",),
    },
    "Animal": {
        SourceDataset.KITTI: ("Animal",),
        SourceDataset.FLIR: ("Dog",),
    },
    "Motorcycle": {
        SourceDataset.KITTI: ("Motorcycle",),
        SourceDataset.BDD100K: ("Motor",),
        SourceDataset.FLIR: ("Motor",),
    },
    "Scooter": {
        SourceDataset.KITTI: ("Scooter",),
        SourceDataset.FLIR: ("Scooter",),
    },
    "OtherVehicle": {
        SourceDataset.KITTI: ("Tram", "Misc"),
        SourceDataset.BDD100K: ("Train",),
        SourceDataset.FLIR: ("Train", "other vehicle"),
    },
    # KITTI files spell the class "DontCare"; both spellings are accepted.
    IGNORE: {
        SourceDataset.KITTI: ("Don't care", "DontCare"),
        SourceDataset.BDD100K: ("Traffic sign", "traffic light"),
        SourceDataset.FLIR: ("Skateboard", "light", "hydrant", "sign"),
    },
}


@dataclass(frozen=True)
class LabelMap:
    """Total map from ``(dataset, folded class)`` to a class name, Ignore or Drop.

    A ``"*"`` entry for a dataset routes every otherwise unknown class of that
    dataset to its target (normally Drop).
    """

    entries: Mapping[tuple[SourceDataset, str], str]
    classes: tuple[str, ...] = UNIFIED_CLASSES

    def __post_init__(self) -> None:
        valid = set(self.classes) | {IGNORE, DROP}
        for (ds, name), target in self.entries.items():
            if target not in valid:
                raise ConfigError(f"{ds.value}/{name}: unknown target {target!r}")
        object.__setattr__(self, "entries", MappingProxyType(dict(self.entries)))

    def lookup(self, dataset: SourceDataset, source_class: str) -> str | None:
        key = (SourceDataset(dataset), fold(source_class))
        if key in self.entries:
            return self.entries[key]
        return self.entries.get((key[0], WILDCARD))

    def class_id(self, name: str) -> int:
        return self.classes.index(name)

    def with_overrides(self, overrides: Mapping[str, Mapping[str, str]]) -> "LabelMap":
        entries = dict(self.entries)
        for ds_name, table in overrides.items():
            try:
                ds = SourceDataset(fold(ds_name))
            except ValueError:
                raise ConfigError(f"unknown dataset {ds_name!r} in label-map override") from None
            if not isinstance(table, Mapping):
                raise ConfigError(f"override for {ds_name!r} must be an object")
            for source_class, target in table.items():
                key = WILDCARD if source_class.strip() == WILDCARD else fold(source_class)
                entries[(ds, key)] = _canonical_target(str(target), self.classes)
        return LabelMap(entries, self.classes)


def _canonical_target(target: str, classes: Sequence[str]) -> str:
    by_fold = {fold(c): c for c in (*classes, IGNORE, DROP)}
    try:
        return by_fold[fold(target)]
    except KeyError:
        raise ConfigError(f"unknown label-map target {target!r}") from None


def default_label_map() -> LabelMap:
    entries: dict[tuple[SourceDataset, str], str] = {}
    for target, per_ds in _DEFAULT_TABLE.items():
        for ds, names in per_ds.items():
            for name in names:
                key = (ds, fold(name))
                if key in entries:
                    raise AssertionError(f"duplicate default entry {key}")
                entries[key] = target
    return LabelMap(entries)


def load_label_map(path: str | Path, base: LabelMap | None = None) -> LabelMap:
    """Load a ``{dataset: {source_class: target}}`` override file onto ``base``."""
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"label-map file {path}: {exc}") from None
    if not isinstance(data, dict):
        raise ConfigError(f"label-map file {path} must hold a JSON object")
    return (base or default_label_map()).with_overrides(data)


@dataclass
class SkipReport:
    """Per source-class accounting of a mapping pass."""

    input_counts: Counter = field(default_factory=Counter)
    mapped: Counter = field(default_factory=Counter)
    ignored: Counter = field(default_factory=Counter)
    dropped: Counter = field(default_factory=Counter)

    def to_dict(self) -> dict:
        def enc(c: Counter) -> dict:
            return {f"{ds.value}/{name}": n for (ds, name), n in sorted(c.items(), key=lambda kv: (kv[0][0].value, kv[0][1]))}

        return {
            "input": enc(self.input_counts),
            "mapped": enc(self.mapped),
            "ignored": enc(self.ignored),
            "dropped": enc(self.dropped),
        }


def apply_label_map(
    annos: Iterable[SourceAnnotation], label_map: LabelMap
) -> tuple[list[Annotation], SkipReport]:
    """Route source annotations through ``label_map``.

    Raises :class:`MappingError` on the first class the map does not cover;
    nothing is returned in that case.
    """
    out: list[Annotation] = []
    report = SkipReport()
    for a in annos:
        target = label_map.lookup(a.source_dataset, a.source_class)
        if target is None:
            raise MappingError(
                f"unmapped class {a.source_class!r} from dataset {a.source_dataset.value} "
                f"in frame {a.frame_id!r}"
            )
        key = (a.source_dataset, a.source_class)
        report.input_counts[key] += 1
        if target == DROP:
            report.dropped[key] += 1
        elif target == IGNORE:
            report.ignored[key] += 1
            out.append(Annotation(IGNORE_CLASS_ID, a.box, True, a.source_dataset.value, a.frame_id))
        else:
            report.mapped[key] += 1
            out.append(Annotation(label_map.class_id(target), a.box, False, a.source_dataset.value, a.frame_id))
    return out, report


class FilterName(str, enum.Enum):
    FULL = "full"
    SEVEN_CLASS = "seven_class"
    FOUR_CLASS = "four_class"
    CUSTOM = "custom"


@dataclass(frozen=True)
class ClassFilter:
    name: FilterName
    kept: tuple[str, ...]

    @classmethod
    def full(cls, classes: Sequence[str] = UNIFIED_CLASSES) -> "ClassFilter":
        return cls(FilterName.FULL, tuple(classes))

    @classmethod
    def seven_class(cls) -> "ClassFilter":
        return cls(
            FilterName.SEVEN_CLASS,
            ("Car", "Pedestrian", "Cyclist", "Truck", "Bus", "Motorcycle", "Scooter"),
        )

    @classmethod
    def four_class(cls) -> "ClassFilter":
        return cls(FilterName.FOUR_CLASS, ("Pedestrian", "Cyclist", "Motorcycle", "Scooter"))

    @classmethod
    def named(cls, name: str | FilterName) -> "ClassFilter":
        name = FilterName(name)
        if name is FilterName.CUSTOM:
            raise ConfigError("custom filters need an explicit class list")
        return {
            FilterName.FULL: cls.full,
            FilterName.SEVEN_CLASS: cls.seven_class,
            FilterName.FOUR_CLASS: cls.four_class,
        }[name]()

    @classmethod
    def custom(cls, kept: Iterable[str]) -> "ClassFilter":
        return cls(FilterName.CUSTOM, tuple(kept))


def apply_class_filter(
    annos: Iterable[Annotation],
    class_filter: ClassFilter,
    classes: Sequence[str] = UNIFIED_CLASSES,
) -> list[Annotation]:
    """Keep annotations of the filter's classes, re-indexed densely in filter order.

    Ignore regions pass through untouched.
    """
    if not class_filter.kept:
        raise ConfigError("class filter keeps no classes")
    unknown = [c for c in class_filter.kept if c not in classes]
    if unknown:
        raise ConfigError(f"class filter names unknown classes {unknown}")
    remap = {classes.index(name): dense for dense, name in enumerate(class_filter.kept)}
    out = []
    for a in annos:
        if a.ignore:
            out.append(a)
        elif a.class_id in remap:
            out.append(Annotation(remap[a.class_id], a.box, False, a.source_dataset, a.frame_id))
    return out
