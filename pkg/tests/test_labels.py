import json
from collections import Counter

import pytest
from hypothesis import given, strategies as st

from mapping_cells import CELLS, CLASS_ORDER, NOT_AVAILABLE
from vrukit.errors import ConfigError, MappingError
from vrukit.geometry import BoundingBox
from vrukit.ingest import SourceAnnotation, SourceDataset
from vrukit.labels import (
    DROP,
    IGNORE,
    UNIFIED_CLASSES,
    ClassFilter,
    apply_class_filter,
    apply_label_map,
    default_label_map,
    load_label_map,
)

BOX = BoundingBox(0, 0, 10, 10)


def src(ds, name, fid="f"):
    return SourceAnnotation(ds, name, BOX, fid)


@pytest.mark.parametrize("ds,name,target", CELLS, ids=[f"{d.value}-{n}" for d, n, _ in CELLS])
def test_default_map_cell(ds, name, target):
    m = default_label_map()
    assert m.lookup(ds, name) == target
    assert m.lookup(ds, name.upper()) == target
    assert m.lookup(ds, f"  {name.lower()} ") == target


def test_class_order():
    assert list(UNIFIED_CLASSES) == CLASS_ORDER
    assert default_label_map().classes == UNIFIED_CLASSES


def test_no_extra_entries():
    m = default_label_map()
    expected = {(ds, name.casefold()) for ds, name, _ in CELLS} | {(SourceDataset.KITTI, "dontcare")}
    assert set(m.entries) == expected
    for ds, target in NOT_AVAILABLE:
        assert target not in [t for (d, _), t in m.entries.items() if d is ds]


def test_kitti_file_spelling_dontcare():
    (a,), _ = apply_label_map([src(SourceDataset.KITTI, "DontCare")], default_label_map())
    assert a.ignore and a.class_id == -1


def test_apply_examples():
    annos, rep = apply_label_map(
        [src(SourceDataset.KITTI, "Person_sitting"), src(SourceDataset.KITTI, "Van")], default_label_map()
    )
    assert [a.class_id for a in annos] == [1, 0]
    assert not any(a.ignore for a in annos)
    assert rep.mapped[(SourceDataset.KITTI, "Van")] == 1


def test_unmapped_class_is_error():
    with pytest.raises(MappingError, match="unicycle.*kitti.*f7"):
        apply_label_map([src(SourceDataset.KITTI, "Car"), src(SourceDataset.KITTI, "unicycle", "f7")], default_label_map())


def test_overrides_and_wildcard(tmp_path):
    path = tmp_path / "m.json"
    path.write_text(json.dumps({"kitti": {"Misc": "drop", "*": "Drop"}, "bdd100k": {"traffic light": "car"}}))
    m = load_label_map(path)
    assert m.lookup(SourceDataset.KITTI, "misc") == DROP
    assert m.lookup(SourceDataset.KITTI, "unicycle") == DROP
    assert m.lookup(SourceDataset.BDD100K, "Traffic Light") == "Car"
    assert m.lookup(SourceDataset.FLIR, "unicycle") is None
    annos, rep = apply_label_map([src(SourceDataset.KITTI, "unicycle"), src(SourceDataset.KITTI, "Car")], m)
    assert len(annos) == 1 and rep.dropped[(SourceDataset.KITTI, "unicycle")] == 1
    path.write_text(json.dumps({"kitti": {"Car": "Spaceship"}}))
    with pytest.raises(ConfigError):
        load_label_map(path)
    path.write_text(json.dumps({"mars": {"Car": "Car"}}))
    with pytest.raises(ConfigError):
        load_label_map(path)


def test_label_map_immutable():
    m = default_label_map()
    with pytest.raises(TypeError):
        m.entries[(SourceDataset.KITTI, "x")] = "Car"


all_pairs = [(ds, name) for ds, name, _ in CELLS] + [(SourceDataset.KITTI, "unicycle")]


@given(st.lists(st.sampled_from(all_pairs), max_size=60), st.booleans())
def test_mapping_conserves_mass(pairs, drop_unknown):
    m = default_label_map()
    if drop_unknown:
        m = m.with_overrides({"kitti": {"*": "Drop", "Misc": "Drop"}})
    annos = [src(ds, name) for ds, name in pairs]
    try:
        out, rep = apply_label_map(annos, m)
    except MappingError:
        assert not drop_unknown and (SourceDataset.KITTI, "unicycle") in pairs
        return
    assert len(annos) == len(out) + sum(rep.dropped.values())
    for key, n in rep.input_counts.items():
        assert n == rep.mapped[key] + rep.ignored[key] + rep.dropped[key]
    assert Counter((a.source_dataset, a.source_class) for a in annos) == rep.input_counts


def test_identity_remap_is_identity():
    m = default_label_map()
    identity = m.with_overrides({ds.value: {c: c for c in UNIFIED_CLASSES} for ds in SourceDataset})
    annos = [src(SourceDataset.FLIR, c) for c in UNIFIED_CLASSES]
    out, _ = apply_label_map(annos, identity)
    assert [a.class_id for a in out] == list(range(len(UNIFIED_CLASSES)))


# --- filters ---------------------------------------------------------------


def unified(*names, ignore=0):
    out = [src(SourceDataset.KITTI, n) for n in names]
    mapped, _ = apply_label_map(out, default_label_map())
    return mapped + [mapped[0].__class__(-1, BOX, True) for _ in range(ignore)]


def test_filter_sets():
    assert set(ClassFilter.seven_class().kept) == {"Car", "Pedestrian", "Cyclist", "Truck", "Bus", "Motorcycle", "Scooter"}
    assert set(ClassFilter.four_class().kept) == {"Pedestrian", "Cyclist", "Motorcycle", "Scooter"}


def test_four_class_drops_car():
    out = apply_class_filter(unified("Car", "Pedestrian"), ClassFilter.four_class())
    assert [(a.class_id, ClassFilter.four_class().kept[a.class_id]) for a in out] == [(0, "Pedestrian")]


def test_full_is_identity():
    annos = unified("Car", "Tram", "Animal", "Scooter", ignore=2)
    assert apply_class_filter(annos, ClassFilter.full()) == annos


def test_ignore_always_kept_and_errors():
    out = apply_class_filter(unified("Car", ignore=3), ClassFilter.four_class())
    assert len(out) == 3 and all(a.ignore for a in out)
    with pytest.raises(ConfigError):
        apply_class_filter([], ClassFilter.custom([]))
    with pytest.raises(ConfigError):
        apply_class_filter([], ClassFilter.custom(["Spaceship"]))


def test_table6_pattern():
    # per-class counts in the proportions of the 7-/4-class instance table (scaled down)
    counts = {"Car": 313, "Pedestrian": 49, "Cyclist": 6, "Truck": 13, "Bus": 5, "Motorcycle": 2, "Scooter": 1,
              "Animal": 1, "OtherVehicle": 3}
    kitti_name = {c: c for c in counts} | {"OtherVehicle": "Tram"}
    annos = unified(*[kitti_name[c] for c, n in counts.items() for _ in range(n)])
    seven = apply_class_filter(annos, ClassFilter.seven_class())
    seven_counts = Counter(ClassFilter.seven_class().kept[a.class_id] for a in seven)
    assert seven_counts == {c: counts[c] for c in ClassFilter.seven_class().kept}
    four = apply_class_filter(annos, ClassFilter.four_class())
    four_counts = Counter(ClassFilter.four_class().kept[a.class_id] for a in four)
    for c in ClassFilter.seven_class().kept:
        expected = 0 if c in ("Car", "Truck", "Bus") else counts[c]
        assert four_counts.get(c, 0) == expected


@given(st.lists(st.sampled_from(UNIFIED_CLASSES), max_size=40), st.sets(st.sampled_from(UNIFIED_CLASSES), min_size=1))
def test_filter_monotone_and_bijective(names, kept):
    kitti = {c: c for c in UNIFIED_CLASSES} | {"OtherVehicle": "Tram"}
    annos = unified(*[kitti[n] for n in names]) if names else []
    big = ClassFilter.custom(sorted(kept))
    out = apply_class_filter(annos, big)
    sub = ClassFilter.custom(sorted(kept)[: max(1, len(kept) // 2)])
    assert len(apply_class_filter(annos, sub)) <= len(out)
    # dense id -> original class is a bijection onto kept classes
    orig = [UNIFIED_CLASSES[a.class_id] for a in annos if UNIFIED_CLASSES[a.class_id] in kept]
    assert [big.kept[a.class_id] for a in out] == orig
