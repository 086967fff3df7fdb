import math

import numpy as np
import pytest

from foodcal import maskgeom, measurement, preprocess, synth
from foodcal.errors import PlacementFailure
from foodcal.measurement import FOOD_CLASSES, ClassLabel


def noiseless_cfg(**kw):
    return synth.SceneConfig(boundary_noise=0.0, **kw)


def scene_food_pairs(scene):
    """(record, truth) pairs for the food instances of one scene."""
    scale = measurement.scale_from_detections(scene.instances)
    recs = measurement.extract_features(scene.instances, scale)
    truths = [t for t in scene.truth.instances if t.label is not ClassLabel.COIN]
    return list(zip(recs, truths)), scene.truth.mm_per_px


# ---------------------------------------------------------------------------
# scene structure and determinism


def test_same_seed_identical_scene():
    cfg = synth.SceneConfig()
    a = synth.generate_scene(cfg, 3)
    b = synth.generate_scene(cfg, 3)
    assert len(a.instances) == len(b.instances)
    for ia, ib in zip(a.instances, b.instances):
        assert ia.label is ib.label and ia.bbox == ib.bbox and ia.confidence == ib.confidence
        assert np.array_equal(ia.mask, ib.mask)
    assert a.truth == b.truth


def test_exactly_one_coin_per_scene():
    cfg = synth.SceneConfig()
    for seed in range(10):
        scene = synth.generate_scene(cfg, seed)
        coins = [i for i in scene.instances if i.label is ClassLabel.COIN]
        assert len(coins) == 1
        assert scene.instances[0].label is ClassLabel.COIN


def test_masks_are_disjoint():
    scene = synth.generate_scene(synth.SceneConfig(), 5)
    total = np.zeros((scene.height, scene.width), dtype=np.int32)
    for inst in scene.instances:
        total += inst.mask
    assert total.max() == 1


def test_placement_failure_when_too_crowded():
    cfg = synth.SceneConfig(width=90, height=90, items_per_scene=6, max_placement_tries=30)
    with pytest.raises(PlacementFailure):
        for seed in range(5):
            synth.generate_scene(cfg, seed)


# ---------------------------------------------------------------------------
# coin scale recovery


def test_scale_recovery_exact_for_even_diameter_coins():
    # coin bbox equals the nominal diameter by construction, so the
    # recovered factor is exact, well within the 2% discretization bound
    cfg = noiseless_cfg()
    for seed in range(100):
        scene = synth.generate_scene(cfg, seed)
        assert scene.instances[0].bbox[2] >= 40
        sf = measurement.scale_from_detections(scene.instances)
        assert abs(sf.s_f - scene.truth.mm_per_px) / scene.truth.mm_per_px < 0.02
        assert sf.s_f == pytest.approx(scene.truth.mm_per_px, rel=1e-12)


# ---------------------------------------------------------------------------
# rasterization fidelity


def test_ellipse_raster_pixel_area_within_3_percent():
    rng = np.random.default_rng(0)
    for _ in range(30):
        a = float(rng.uniform(20, 55))
        b = float(rng.uniform(20, a + 1))
        theta = float(rng.uniform(0, math.pi))
        e = synth._Ellipse(120.3, 119.7, a, b, theta)
        mask = synth._rasterize(e, 260, 260)
        assert abs(int(mask.sum()) - math.pi * a * b) / (math.pi * a * b) < 0.03


def test_ellipse_contour_area_matches_half_pixel_inset():
    # the traced polygon passes through boundary pixel centers, a half-pixel
    # inside the true boundary; the analytic inset area is A - P/2
    rng = np.random.default_rng(1)
    for _ in range(20):
        a = float(rng.uniform(20, 55))
        b = float(rng.uniform(20, a + 1))
        e = synth._Ellipse(120.0, 120.0, a, b, float(rng.uniform(0, math.pi)))
        mask = synth._rasterize(e, 260, 260)
        st = maskgeom.shape_stats(maskgeom.trace_contour(mask))
        area, perim, _, _ = e.truth()
        assert st.area_px == pytest.approx(area - perim / 2.0, rel=0.05)


# ---------------------------------------------------------------------------
# pipeline features vs analytic truth (noiseless shapes, >= 30 px)


def test_bbox_features_within_5_percent_of_truth():
    cfg = noiseless_cfg()
    for seed in range(40):
        pairs, s = scene_food_pairs(synth.generate_scene(cfg, seed))
        for rec, tr in pairs:
            assert min(tr.bbox_w_px, tr.bbox_h_px) >= 30
            assert rec.height_mm == pytest.approx(tr.bbox_h_px * s, rel=0.05)
            assert rec.width_mm == pytest.approx(tr.bbox_w_px * s, rel=0.05)


def test_area_feature_within_5_percent_of_inset_truth():
    cfg = noiseless_cfg()
    for seed in range(40):
        pairs, s = scene_food_pairs(synth.generate_scene(cfg, seed))
        for rec, tr in pairs:
            inset = (tr.area_px - tr.perimeter_px / 2.0) * s * s
            assert rec.area_mm2 == pytest.approx(inset, rel=0.05)


def test_perimeter_feature_within_chain_length_bounds():
    # an 8-connected chain measures diagonal-ish smooth arcs up to
    # cos(22.5deg) + (sqrt(2)-1) sin(22.5deg) ~ 1.0824 times their length,
    # while pixel-center tracing shortens it slightly
    cfg = noiseless_cfg()
    for seed in range(40):
        pairs, s = scene_food_pairs(synth.generate_scene(cfg, seed))
        for rec, tr in pairs:
            ratio = rec.perimeter_mm / (tr.perimeter_px * s)
            assert 0.95 <= ratio <= 1.085


# ---------------------------------------------------------------------------
# dataset generation


def test_dataset_row_count_and_balance():
    cfg = synth.SceneConfig()
    records, _ = synth.generate_regression_dataset(cfg, 644, seed=0)
    assert len(records) == 644
    counts = {label: 0 for label in FOOD_CLASSES}
    for r in records:
        counts[r.label] += 1
    assert max(counts.values()) - min(counts.values()) <= 2 * cfg.views_per_item


def test_dataset_calories_positive_and_linear_in_weight():
    cfg = synth.SceneConfig()
    records, scenes = synth.generate_regression_dataset(cfg, 120, seed=1)
    assert all(r.calories_kcal > 0 for r in records)
    for scene in scenes[:10]:
        for t in scene.truth.instances:
            if t.label is ClassLabel.COIN:
                continue
            rate = measurement.DEFAULT_DENSITIES[t.label]
            assert t.calories_kcal == pytest.approx(t.weight_g * rate, rel=1e-12)


def test_dataset_regeneration_bit_identical(tmp_path):
    cfg = synth.SceneConfig()
    a, _ = synth.generate_regression_dataset(cfg, 90, seed=7)
    b, _ = synth.generate_regression_dataset(cfg, 90, seed=7)
    pa, pb = tmp_path / "a.csv", tmp_path / "b.csv"
    preprocess.write_csv(pa, a)
    preprocess.write_csv(pb, b)
    assert pa.read_bytes() == pb.read_bytes()


def test_multi_view_items_share_calorie_label():
    cfg = synth.SceneConfig(items_per_scene=1, views_per_item=4)
    records, _ = synth.generate_regression_dataset(cfg, 40, seed=3)
    # 10 items x 4 views, grouped per round: views v of item i appear at
    # index v * 10 + i
    n_items = 10
    for i in range(n_items):
        cals = {round(records[v * n_items + i].calories_kcal, 9) for v in range(4)}
        labels = {records[v * n_items + i].label for v in range(4)}
        assert len(cals) == 1 and len(labels) == 1


def test_views_of_one_item_vary_in_features():
    cfg = synth.SceneConfig(items_per_scene=1, views_per_item=4)
    records, _ = synth.generate_regression_dataset(cfg, 40, seed=3)
    heights = {round(records[v * 10].height_mm, 6) for v in range(4)}
    assert len(heights) > 1


def test_thickness_constants_positive():
    for label in FOOD_CLASSES:
        assert synth.THICKNESS_G_PER_MM2[label] > 0
