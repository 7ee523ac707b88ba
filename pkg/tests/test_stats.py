import itertools
import json

import pytest
from hypothesis import assume, given, strategies as st

from vrukit.errors import ValidationError
from vrukit.geometry import Annotation, BoundingBox, Modality
from vrukit.ingest import DatasetIndex
from vrukit.labels import FilterName, UNIFIED_CLASSES
from vrukit.stats import (
    AugmentationLevel,
    ClassHistogram,
    ExperimentConfig,
    WeightScheme,
    compute_class_weights,
    count_instances,
    dataset_summary,
    emit_experiment_manifest,
    summary_csv,
    summary_text,
)

BOX = BoundingBox(0, 0, 1, 1)


def hist(counts, names=None):
    names = tuple(names or [f"c{i}" for i in range(len(counts))])
    return ClassHistogram(names, dict(zip(names, counts)))


def oracle_weights(counts, cap, sqrt=False):
    """Capped mean-1 inverse-frequency weights, solved by trying every pin set.

    Pinning the m largest raw values at ``cap`` leaves the rest scaled by s so
    the mean is 1; the right m is the smallest one whose free values all stay
    at or below the cap.
    """
    nz = [n for n in counts if n > 0]
    k = len(nz)
    raw = [sum(counts) / (k * n) for n in nz]
    if sqrt:
        raw = [r ** 0.5 for r in raw]
    order = sorted(range(k), key=lambda i: -raw[i])
    for m in range(k + 1):
        pinned = set(order[:m])
        free = [raw[i] for i in range(k) if i not in pinned]
        if not free:
            out_nz = [cap] * k
            break
        s = (k - cap * m) / sum(free)
        if all(raw[i] * s <= cap * (1 + 1e-12) for i in range(k) if i not in pinned):
            out_nz = [cap if i in pinned else raw[i] * s for i in range(k)]
            break
    it = iter(out_nz)
    return [next(it) if n > 0 else cap for n in counts]


def test_worked_example():
    w = compute_class_weights(hist([900, 100]), cap=10)
    assert w.weights[0] == pytest.approx(0.2, abs=1e-12)
    assert w.weights[1] == pytest.approx(1.8, abs=1e-12)


def test_equal_and_uniform():
    w = compute_class_weights(hist([50, 50]))
    assert list(w.weights.values()) == pytest.approx([1.0, 1.0], abs=1e-12)
    u = compute_class_weights(hist([1, 1000, 0]), "uniform")
    assert list(u.weights.values()) == [1.0, 1.0, 1.0]


def test_zero_count_gets_cap_and_errors():
    w = compute_class_weights(hist([10, 0, 30]), cap=5)
    assert w.weights[1] == 5
    assert (w.weights[0] + w.weights[2]) / 2 == pytest.approx(1.0, abs=1e-12)
    with pytest.raises(ValidationError):
        compute_class_weights(hist([0, 0]))
    with pytest.raises(ValidationError):
        compute_class_weights(hist([1, 2]), cap=0.5)
    with pytest.raises(ValidationError):
        compute_class_weights(hist([1, 2]), epsilon=0)


def test_cap_binds():
    # one very rare class would get about 2.0 uncapped; cap 1.5 pins it
    w = compute_class_weights(hist([1000, 1000, 10]), cap=1.5)
    vals = list(w.weights.values())
    assert max(vals) <= 1.5 + 1e-12
    assert sum(vals) / 3 == pytest.approx(1.0, abs=1e-12)
    assert vals == pytest.approx(oracle_weights([1000, 1000, 10], 1.5), abs=1e-12)


counts_st = st.lists(st.integers(0, 10**6), min_size=1, max_size=10).filter(lambda c: any(c))


@given(counts_st, st.floats(1.0, 20.0), st.sampled_from(["inverse_freq", "inverse_sqrt"]))
def test_matches_oracle_and_invariants(counts, cap, scheme):
    w = compute_class_weights(hist(counts), scheme, cap)
    vals = [w.weights[i] for i in range(len(counts))]
    assert vals == pytest.approx(oracle_weights(counts, cap, scheme == "inverse_sqrt"), rel=1e-9, abs=1e-9)
    nz = [v for v, n in zip(vals, counts) if n > 0]
    assert abs(sum(nz) / len(nz) - 1.0) <= 1e-9
    assert all(0 < v <= cap + 1e-9 for v in vals)
    for (na, wa), (nb, wb) in itertools.combinations(zip(counts, vals), 2):
        if na < nb:
            assert wa >= wb - 1e-12
        elif nb < na:
            assert wb >= wa - 1e-12


@given(counts_st, st.integers(2, 1000), st.sampled_from(list(WeightScheme)))
def test_scale_invariance(counts, k, scheme):
    a = compute_class_weights(hist(counts), scheme)
    b = compute_class_weights(hist([n * k for n in counts]), scheme)
    for i in a.weights:
        assert a.weights[i] == pytest.approx(b.weights[i], abs=1e-9)


# --- counting --------------------------------------------------------------


def anno(cls, ignore=False):
    return Annotation(-1 if ignore else cls, BOX, ignore)


def test_count_examples():
    h = count_instances([anno(1), anno(1), anno(1), anno(0)])
    assert h.counts["Pedestrian"] == 3 and h.counts["Car"] == 1 and h.total == 4
    assert count_instances([]).counts == {c: 0 for c in UNIFIED_CLASSES}
    h = count_instances([anno(0), anno(0, ignore=True)])
    assert h.dont_care == 1 and h.total == 1


@given(st.lists(st.tuples(st.integers(0, 8), st.booleans()), max_size=50), st.integers(0, 50))
def test_count_additive(items, cut):
    annos = [anno(c, i) for c, i in items]
    whole = count_instances(annos)
    parts = count_instances(annos[:cut]) + count_instances(annos[cut:])
    assert whole.counts == parts.counts and whole.dont_care == parts.dont_care
    swapped = count_instances(annos[cut:]) + count_instances(annos[:cut])
    assert swapped.counts == whole.counts


# --- summary ---------------------------------------------------------------


def test_summary_example():
    rows = dataset_summary([
        DatasetIndex(10, 8, split="train", modality=Modality.THERMAL),
        DatasetIndex(5, 5, split="val", modality=Modality.THERMAL),
    ])
    assert [(r.images, r.labels) for r in rows] == [(10, 8), (5, 5), (15, 13)]
    assert rows[-1].split == "total"
    assert summary_csv(rows).splitlines()[0] == "modality,split,images,labels"
    assert "thermal train" in summary_text(rows)
    assert dataset_summary([]) == []


# --- manifest --------------------------------------------------------------


def test_manifest_defaults():
    m = json.loads(emit_experiment_manifest())
    assert (m["resolution"], m["freeze_layers"], m["batch"], m["epochs"], m["patience"]) == (640, 6, 4, 100, 50)
    assert m["class_filter"] == "seven_class"
    assert m["augmentation_level"] in ("none", "light")
    assert set(m) == {"resolution", "freeze_layers", "batch", "epochs", "patience", "class_filter",
                      "weights_file", "augmentation_level"}


def test_manifest_values_and_errors():
    m = json.loads(emit_experiment_manifest(ExperimentConfig(resolution=320, augmentation_level=AugmentationLevel.HEAVY,
                                                             class_filter=FilterName.FOUR_CLASS)))
    assert m["resolution"] == 320 and m["augmentation_level"] == "heavy" and m["class_filter"] == "four_class"
    for bad in (dict(freeze_layers=11), dict(freeze_layers=-1), dict(batch=0), dict(resolution=0),
                dict(augmentation_level="extreme")):
        with pytest.raises(ValidationError):
            emit_experiment_manifest(ExperimentConfig(**bad))
