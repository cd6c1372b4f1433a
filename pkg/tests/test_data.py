import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from uwstereo.data import (
    CleaningConfig, DatasetManifest, DisparityHistogram, FrameRecord, ManifestError, apply_cleaning_rules,
    disparity_histogram, disparity_stats, select_low_disparity_drops, split_dataset, write_pfm,
)


def rec(i, scene="default-like", mean=50.0, over=0.0, **kw):
    return FrameRecord(f"{scene}_{i:05d}", scene, i, 12.0, 0, 1.0, "blue",
                       {"disparity": f"d/{scene}_{i}.pfm"}, mean, over, **kw)


def oracle_drops(ids, fraction, seed):
    ids = sorted(ids)
    k = int(fraction * len(ids) // 1)
    idx = np.random.default_rng(seed).choice(len(ids), size=k, replace=False)
    return {ids[i] for i in idx}


def test_interval_rule():
    out = apply_cleaning_rules(DatasetManifest([rec(i) for i in range(16)]), CleaningConfig())
    assert sorted(r.frame_index for r in out.records) == [0, 4, 8, 12]


def test_over_cap_rule():
    m = DatasetManifest([rec(0, over=0.11), rec(4, over=0.10), rec(8, over=0.0)])
    out = apply_cleaning_rules(m, CleaningConfig())
    assert [r.frame_index for r in out.records] == [4, 8]
    assert out.provenance["cleaning"][0]["removed"]["over_cap"] == 1


def test_low_disparity_rule_matches_oracle():
    m = DatasetManifest([rec(i, mean=5.0) for i in range(10)])
    cfg = CleaningConfig(interval=1, seed=7)
    out = apply_cleaning_rules(m, cfg)
    assert len(out) == 5
    removed = {r.frame_id for r in m.records} - {r.frame_id for r in out.records}
    assert removed == oracle_drops([r.frame_id for r in m.records], 0.5, 7)


def test_rule_order_and_counts():
    recs = [rec(i, mean=5.0 if i % 8 == 0 else 40.0, over=0.5 if i == 4 else 0.0) for i in range(32)]
    out = apply_cleaning_rules(DatasetManifest(recs), CleaningConfig(seed=3))
    removed = out.provenance["cleaning"][0]["removed"]
    # 8 survive rule 1, 4 of them are low-disparity -> 2 dropped, index 4 over cap
    assert removed == {"interval": 24, "low_disparity": 2, "over_cap": 1}
    assert len(out) == 5


def test_idempotent():
    recs = [rec(i, mean=float(i % 13), over=0.2 if i % 20 == 0 else 0.0) for i in range(200)]
    cfg = CleaningConfig(seed=11)
    once = apply_cleaning_rules(DatasetManifest(recs), cfg)
    twice = apply_cleaning_rules(once, cfg)
    assert once.dumps() == twice.dumps()


def test_missing_stats_named():
    m = DatasetManifest([rec(0), FrameRecord("x_1", "default-like", 1, 6.0, 0, 1.0, "blue")])
    with pytest.raises(ManifestError, match="x_1"):
        apply_cleaning_rules(m)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 60), st.floats(0.0, 1.0), st.integers(0, 1000))
def test_drop_count_floor(k, frac, seed):
    drops = select_low_disparity_drops([f"id{i}" for i in range(k)], frac, seed)
    assert len(drops) == math.floor(frac * k)


def test_disparity_stats():
    d = np.array([[10.0, 200.0], [30.0, 193.0]])
    assert disparity_stats(d, 192) == (108.25, 0.5)


def test_split_counts_and_determinism():
    recs = [rec(i) for i in range(100)]
    a = split_dataset(DatasetManifest(recs), 0.1, seed=4)
    assert a.counts()["default-like"] == {"train": 90, "test": 10, "unassigned": 0}
    assert a.dumps() == split_dataset(DatasetManifest(recs), 0.1, seed=4).dumps()
    assert a.dumps() != split_dataset(DatasetManifest(recs), 0.1, seed=5).dumps()


def test_split_stratified():
    recs = [rec(i, "coral-like") for i in range(50)] + [rec(i, "ship-like") for i in range(50)]
    out = split_dataset(DatasetManifest(recs), 0.1, 0)
    assert {k: v["test"] for k, v in out.counts().items()} == {"coral-like": 5, "ship-like": 5}
    train = {r.frame_id for r in out.split("train")}
    test = {r.frame_id for r in out.split("test")}
    assert not train & test and len(train | test) == 100


@pytest.mark.parametrize("frac", [0.0, 1.0, -0.1])
def test_split_fraction_bounds(frac):
    with pytest.raises(ValueError):
        split_dataset(DatasetManifest([rec(0), rec(1)]), frac)


def test_split_needs_two_per_scene():
    with pytest.raises(ManifestError, match="ship-like"):
        split_dataset(DatasetManifest([rec(0), rec(1), rec(0, "ship-like")]), 0.5)


def test_manifest_roundtrip(tmp_path):
    m = DatasetManifest([rec(i) for i in range(3)], {"seed": 9})
    path = m.save(tmp_path / "m.json")
    back = DatasetManifest.load(path)
    assert back.dumps() == m.dumps()
    data = json.loads(path.read_text())
    assert set(data) == {"version", "provenance", "counts", "records"}


def test_manifest_duplicates_and_validation():
    with pytest.raises(ManifestError, match="duplicate"):
        DatasetManifest([rec(0), rec(0)])
    with pytest.raises(ManifestError):
        rec(0, over=1.5)
    with pytest.raises(ManifestError):
        rec(0, split="val")


def test_histogram_uniform_ten(tmp_path):
    write_pfm(tmp_path / "a.pfm", np.full((4, 4), 10.0))
    r = FrameRecord("a", "default-like", 0, 6.0, 0, 1.0, "blue", {"disparity": "a.pfm"}, 10.0, 0.0)
    h = disparity_histogram([r], 8, 192, root=tmp_path)
    fr = h.fractions
    assert fr[1] == 1.0 and fr.sum() == 1.0


def test_histogram_overflow_and_mass(rng):
    h = DisparityHistogram.empty(8, 192)
    d = rng.uniform(0, 300, 10000)
    h.add(d)
    assert abs(h.fractions.sum() - 1) < 1e-9
    assert h.counts[-1] == np.count_nonzero(d >= 192)
    assert h.mass_below(72) == pytest.approx(np.mean(d < 72))


def test_histogram_errors(tmp_path):
    with pytest.raises(ValueError):
        disparity_histogram([])
    r = FrameRecord("a", "default-like", 0, 6.0, 0, 1.0, "blue", {"disparity": "missing.pfm"}, 1.0, 0.0)
    with pytest.raises(OSError, match="missing.pfm"):
        disparity_histogram([r], root=tmp_path)
