"""Shot sampling, the shots file format, and the product-mean classifier."""
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from squeezecount import analytic, fock, inference
from squeezecount.params import DeviceParams, InputState


def small_dist():
    # tiny hand-made joint table, easy to reason about
    d = np.array([[0.5, 0.1], [0.2, 0.2]])
    return d


def test_sampling_is_deterministic_per_seed():
    d = small_dist()
    a = inference.sample_shots(d, 200, seed=7)
    b = inference.sample_shots(d, 200, seed=7)
    c = inference.sample_shots(d, 200, seed=8)
    np.testing.assert_array_equal(a.na, b.na)
    np.testing.assert_array_equal(a.nb, b.nb)
    assert not (np.array_equal(a.na, c.na) and np.array_equal(a.nb, c.nb))


def test_sample_mean_converges_to_table_mean():
    p = DeviceParams(ns=0.5, nalpha=1.0)
    state = fock.run_pipeline(p, InputState.fock(1), (40, 40))
    d = inference.joint_distribution(state)
    want = analytic.correlation_signal(p, 1)
    rec = inference.sample_shots(d, 200_000, seed=123)
    # CLT: standard error = sqrt(var / M)
    var = analytic.correlation_variance(p, 1)
    se = math.sqrt(var / rec.shots)
    assert abs(rec.product_mean - want) < 5.0 * se
    assert rec.shots == 200_000
    np.testing.assert_array_equal(rec.products, rec.na * rec.nb)


def test_sample_shots_validation():
    with pytest.raises(ValueError, match="2-D"):
        inference.sample_shots(np.ones(4), 10, seed=0)
    with pytest.raises(ValueError, match="shots"):
        inference.sample_shots(small_dist(), 0, seed=0)
    with pytest.raises(ValueError, match="positive mass"):
        inference.sample_shots(np.zeros((2, 2)), 10, seed=0)
    with pytest.raises(ValueError, match="non-negative"):
        inference.sample_shots(np.array([[0.5, -0.2], [0.4, 0.3]]), 10, seed=0)


def test_shots_file_round_trip(tmp_path):
    rec = inference.sample_shots(small_dist(), 50, seed=42)
    path = str(tmp_path / "shots.txt")
    inference.save_shots(rec, path)
    back = inference.load_shots(path)
    assert back.seed == 42
    np.testing.assert_array_equal(back.na, rec.na)
    np.testing.assert_array_equal(back.nb, rec.nb)


def test_load_shots_rejects_other_files(tmp_path):
    path = str(tmp_path / "junk.txt")
    with open(path, "w") as fh:
        fh.write("1 2\n3 4\n")
    with pytest.raises(ValueError, match="not a shots file"):
        inference.load_shots(path)
    empty = str(tmp_path / "empty.txt")
    with open(empty, "w") as fh:
        fh.write("# squeezecount shots v1\n# seed: 3\n")
    with pytest.raises(ValueError, match="no shots"):
        inference.load_shots(empty)


def test_classifier_levels_at_working_point():
    model = inference.build_classifier(DeviceParams(ns=2.0, nalpha=25.0), n_max=2)
    np.testing.assert_allclose(model.levels, [4310.0, 4957.0, 5616.0], rtol=1e-12)
    assert model.n_max == 2
    np.testing.assert_allclose(model.boundaries, [4633.5, 5286.5], rtol=1e-12)


def test_classifier_levels_scale_with_loss():
    p = DeviceParams(ns=2.0, nalpha=25.0)
    lossy = p.replace(eta1=0.5, eta2=0.8)
    a = inference.build_classifier(p, n_max=3).levels
    b = inference.build_classifier(lossy, n_max=3).levels
    np.testing.assert_allclose(b, 0.5 * 0.8 * a, rtol=1e-12)


def test_classify_nearest_level():
    model = inference.build_classifier(DeviceParams(ns=2.0, nalpha=25.0), n_max=3)
    for n in range(4):
        res = inference.classify(model, float(model.levels[n]))
        assert res.n_hat == n
        assert not res.saturated
        assert res.margin > 0


def test_classify_tie_goes_to_smaller_n():
    model = inference.build_classifier(DeviceParams(ns=2.0, nalpha=25.0), n_max=2)
    mid = float(model.boundaries[0])  # exactly between N=0 and N=1
    res = inference.classify(model, mid)
    assert res.n_hat == 0
    assert res.margin == 0.0


def test_classify_saturation():
    model = inference.build_classifier(DeviceParams(ns=2.0, nalpha=25.0), n_max=2)
    res = inference.classify(model, float(model.levels[-1]) + 500.0)
    assert res.n_hat == 2
    assert res.saturated
    below = inference.classify(model, 0.0)
    assert below.n_hat == 0
    assert not below.saturated


def test_classify_rejects_non_finite():
    model = inference.build_classifier(DeviceParams(ns=2.0, nalpha=25.0), n_max=1)
    with pytest.raises(ValueError, match="finite"):
        inference.classify(model, math.nan)


def test_classifier_model_validation():
    with pytest.raises(ValueError, match="at least one"):
        inference.ClassifierModel(DeviceParams(ns=1.0), np.array([]))
    with pytest.raises(ValueError, match="strictly increasing"):
        inference.ClassifierModel(DeviceParams(ns=1.0), np.array([3.0, 2.0]))
    with pytest.raises(ValueError, match="n_max"):
        inference.build_classifier(DeviceParams(ns=1.0), -1)


def test_required_shots_frozen_value():
    model = inference.build_classifier(DeviceParams(ns=2.0, nalpha=25.0), n_max=10)
    assert inference.required_shots(model, 1, 0.95) == 465


def test_required_shots_scales_with_z_squared():
    model = inference.build_classifier(DeviceParams(ns=2.0, nalpha=25.0), n_max=10)
    m95 = inference.required_shots(model, 2, 0.95)
    m99 = inference.required_shots(model, 2, 0.99)
    z95 = analytic.confidence_z(0.95)
    z99 = analytic.confidence_z(0.99)
    assert m99 > m95
    # integer ceiling hides at most one count
    assert m99 == pytest.approx(m95 * (z99 / z95) ** 2, abs=2.0)


def test_required_shots_floor_is_two():
    # a huge gap relative to the noise still demands two shots
    model = inference.build_classifier(DeviceParams(ns=0.05, nalpha=1e6), n_max=1)
    assert inference.required_shots(model, 0, 0.51) >= 2


def test_required_shots_validation():
    model = inference.build_classifier(DeviceParams(ns=2.0, nalpha=25.0), n_max=2)
    with pytest.raises(ValueError, match="outside"):
        inference.required_shots(model, 5, 0.95)
    single = inference.build_classifier(DeviceParams(ns=2.0, nalpha=25.0), n_max=0)
    with pytest.raises(ValueError, match="no gap"):
        inference.required_shots(single, 0, 0.95)


@settings(max_examples=25, deadline=None)
@given(mean=st.floats(min_value=0.0, max_value=7000.0))
def test_classify_monotone_in_measured_mean(mean):
    model = inference.build_classifier(DeviceParams(ns=2.0, nalpha=25.0), n_max=4)
    res = inference.classify(model, mean)
    assert 0 <= res.n_hat <= 4
    # nearest level in product-mean distance
    dists = np.abs(model.levels - mean)
    assert dists[res.n_hat] == pytest.approx(dists.min())


def test_end_to_end_classification_accuracy():
    # moderate squeezing keeps the fock table small; the acceptance module
    # runs the working point
    p = DeviceParams(ns=2.0, nalpha=25.0)
    model = inference.build_classifier(p, n_max=10)
    state = fock.run_pipeline(p, InputState.fock(2), (176, 220), max_deficit=1e-5)
    d = inference.joint_distribution(state)
    shots = inference.required_shots(model, 2, 0.95)
    hits = 0
    trials = 60
    for t in range(trials):
        rec = inference.sample_shots(d, shots, seed=1000 + t)
        if inference.classify(model, rec.product_mean).n_hat == 2:
            hits += 1
    assert hits / trials >= 0.9
