import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from blindaug.core import gaussian_blur
from blindaug.estimation import (
    ModelSet,
    SceneBundle,
    aggregate_models,
    dof_sigma_grid,
    estimate_sigma_map,
    fit_all,
    fit_dof_model,
    fit_mb_exposure,
    fit_noise_model,
    mb_beta_grid,
    texture_mask,
)
from blindaug.exceptions import DegenerateFitError, InvalidInputError
from blindaug.harness import heteroscedastic_noise
from blindaug.synthesis import (
    DofModel,
    MbModel,
    NoiseModel,
    predict_noise_std,
    synthesize_dof,
    synthesize_mb,
    synthesize_noise,
)

from conftest import checkerboard


def ramp_image(size=512):
    return np.repeat(np.tile(np.linspace(0, 1, size), (size, 1))[..., None], 3, axis=2)


# -- noise ---------------------------------------------------------------------------


def test_noise_fit_zero_residual(rng):
    img = rng.random((128, 128, 3))
    m = fit_noise_model(img, img)
    assert not np.any(m.maps)


def test_noise_fit_parameter_count():
    ramp = ramp_image()
    m = fit_noise_model(heteroscedastic_noise(ramp, 0.01, 0.02, seed=1), ramp)
    assert m.maps.shape == (4, 2, 3) and m.n_params == 24
    assert len(json.loads(ModelSet(noise=m).to_json())["noise"]["maps"]) == 4


def test_noise_fit_round_trip():
    ramp = ramp_image()
    gt = fit_noise_model(heteroscedastic_noise(ramp, 0.01, 0.03, seed=5), ramp)
    fit = fit_noise_model(synthesize_noise(ramp, gt, seed=9), ramp)
    for y in (0.2, 0.5, 0.8):
        for lvl in range(4):
            want = predict_noise_std(gt, y, lvl)
            got = predict_noise_std(fit, y, lvl)
            np.testing.assert_array_less(np.abs(got - want), 0.15 * want)


def test_noise_fit_flat_luminance_is_flagged():
    flat = np.full((128, 128, 3), 0.4)
    noisy = heteroscedastic_noise(flat, 0.02, 0.0, seed=2)
    m = fit_noise_model(noisy, flat)
    assert all(info["degenerate"] for info in m.fit_info_)
    assert not np.any(m.maps[:, 0])
    assert np.all(m.maps[:, 1] > 0)


def test_noise_fit_ignores_residual(rng):
    ramp = ramp_image(128)
    noisy = heteroscedastic_noise(ramp, 0.01, 0.02, seed=3)
    a = fit_noise_model(noisy, ramp)
    b = fit_noise_model(noisy + 0.3, ramp)
    np.testing.assert_allclose(a.maps, b.maps, atol=1e-10)


def test_noise_fit_dimension_mismatch(rng):
    with pytest.raises(InvalidInputError):
        fit_noise_model(rng.random((64, 64, 3)), rng.random((64, 60, 3)))


# -- depth of field -------------------------------------------------------------------


def test_sigma_map_sharp_input():
    sharp = checkerboard(64, 64)
    mask = texture_mask(sharp)
    sig = estimate_sigma_map(sharp, sharp)
    assert np.all(sig[mask] == 0)


def test_sigma_map_recovers_uniform_blur():
    sharp = checkerboard(96, 96)
    sig = estimate_sigma_map(gaussian_blur(sharp, 3.0), sharp)
    mask = texture_mask(sharp)
    # a lone pixel can match a second sigma where its blurred value is
    # non-monotonic in sigma (checker corners); those are rare
    assert np.mean(np.abs(sig[mask] - 3.0) <= 0.101) >= 0.99
    assert np.median(sig[mask]) == pytest.approx(3.0, abs=0.101)
    assert sig.min() >= 0 and sig.max() <= 10


def test_sigma_map_range(rng):
    sig = estimate_sigma_map(rng.random((40, 40, 3)), rng.random((40, 40, 3)))
    assert sig.min() >= 0 and sig.max() <= 10
    assert np.all(np.isin(sig, dof_sigma_grid()))
    with pytest.raises(InvalidInputError):
        estimate_sigma_map(rng.random((40, 40, 3)), rng.random((40, 41, 3)))


def test_texture_mask_cases():
    assert not np.any(texture_mask(np.full((40, 40, 3), 0.5)))
    assert texture_mask(checkerboard(128, 128)).mean() > 0.95
    img = np.full((64, 96, 3), 0.5)
    img[:, :48] = checkerboard(64, 48)
    mask = texture_mask(img)
    # pooling sigma 2 -> radius 6
    assert not np.any(mask[:, 48 + 6:])
    assert mask[:, :40].mean() > 0.95


def quadratic_sigmas(rng, coef=(0.02, -0.3, 1.5), shape=(50, 60)):
    depth = rng.uniform(2.0, 10.0, shape)
    a, b, c = coef
    return a * depth ** 2 + b * depth + c, depth


def test_fit_dof_zero(rng):
    _, depth = quadratic_sigmas(rng)
    m = fit_dof_model(np.zeros(depth.shape), depth, np.ones(depth.shape, bool))
    np.testing.assert_allclose(m.coef, 0, atol=1e-15)


def test_fit_dof_exact_quadratic(rng):
    sig, depth = quadratic_sigmas(rng)
    m = fit_dof_model(sig, depth, np.ones(depth.shape, bool))
    np.testing.assert_allclose(m.coef, [0.02, -0.3, 1.5], atol=1e-6)
    assert m.residual_rms_ < 1e-6


def test_fit_dof_degenerate():
    depth = np.where(np.arange(40) < 20, 2.0, 5.0)[None].repeat(30, 0)
    with pytest.raises(DegenerateFitError, match="distinct depths"):
        fit_dof_model(np.ones(depth.shape), depth, np.ones(depth.shape, bool))
    with pytest.raises(DegenerateFitError):
        fit_dof_model(np.ones((4, 4)), np.ones((4, 4)), np.zeros((4, 4), bool))


@settings(max_examples=20, deadline=None)
@given(st.floats(-5, 5).filter(lambda k: abs(k) > 1e-3), st.integers(0, 2**32 - 1))
def test_fit_dof_scale_consistent(k, seed):
    rng = np.random.default_rng(seed)
    sig, depth = quadratic_sigmas(rng, coef=tuple(rng.normal(0, 1, 3)), shape=(20, 20))
    sig = sig + rng.normal(0, 0.1, sig.shape)
    mask = np.ones(sig.shape, bool)
    base = fit_dof_model(sig, depth, mask).coef
    scaled = fit_dof_model(k * sig, depth, mask).coef
    np.testing.assert_allclose(scaled, k * base, rtol=1e-6, atol=1e-9)


# -- motion blur ---------------------------------------------------------------------


def uniform_flow(h, w, vx, vy=0.0):
    flow = np.zeros((h, w, 2))
    flow[..., 0], flow[..., 1] = vx, vy
    return flow


def test_mb_sharp_input_gives_zero():
    sharp = checkerboard(64, 64, cell=6)
    flow = uniform_flow(64, 64, 12.0, -3.0)
    assert fit_mb_exposure(sharp, sharp, flow).beta == 0.0


def test_mb_grid_aligned_recovery():
    sharp = checkerboard(96, 96, cell=6)
    flow = uniform_flow(96, 96, 12.0)
    beta = mb_beta_grid()[5]
    np.testing.assert_allclose(beta, 5 / 9)
    m = fit_mb_exposure(synthesize_mb(sharp, MbModel(beta), flow), sharp, flow)
    assert m.beta == beta
    assert len(m.losses_) == 10 and m.losses_[5] == 0


@settings(max_examples=10, deadline=None)
@given(st.floats(-1, 1), st.integers(0, 9))
def test_mb_constant_shift_invariance(shift, k):
    sharp = checkerboard(48, 48, cell=5)
    flow = uniform_flow(48, 48, 9.0, 4.0)
    observed = synthesize_mb(sharp, MbModel(mb_beta_grid()[k]), flow)
    base = fit_mb_exposure(observed, sharp, flow)
    moved = fit_mb_exposure(observed + shift, sharp + shift, flow)
    assert moved.beta == base.beta
    assert moved.beta in mb_beta_grid()


def test_mb_dimension_mismatch(rng):
    with pytest.raises(InvalidInputError):
        fit_mb_exposure(rng.random((20, 20, 3)), rng.random((20, 21, 3)), np.zeros((20, 20, 2)))


# -- model set -----------------------------------------------------------------------


def sample_models(rng):
    return ModelSet(mb=MbModel(1 / 3), dof=DofModel(0.1 / 3, -2 / 7, 1e-17),
                    noise=NoiseModel(maps=rng.normal(0, 0.02, (4, 2, 3))),
                    provenance={"frame_id": "x"})


def test_model_json_round_trip(rng):
    m = sample_models(rng)
    doc = json.loads(m.to_json())
    assert set(doc) == {"version", "mb", "dof", "noise", "provenance"}
    assert doc["noise"]["levels"] == 4 and doc["version"] == 1
    back = ModelSet.from_json(m.to_json())
    assert back.mb.beta == m.mb.beta
    assert np.array_equal(back.dof.coef, m.dof.coef)
    assert np.array_equal(back.noise.maps, m.noise.maps)
    assert back.to_json() == m.to_json()


@pytest.mark.parametrize("edit", [
    lambda d: d.pop("mb"),
    lambda d: d.update(version=2),
    lambda d: d["noise"].update(levels=3),
    lambda d: d["mb"].update(beta=1.5),
])
def test_model_json_malformed(rng, edit):
    doc = sample_models(rng).to_dict()
    edit(doc)
    with pytest.raises(InvalidInputError):
        ModelSet.from_dict(doc)


def test_aggregate_median(rng):
    ms = [ModelSet(mb=MbModel(b), dof=DofModel(b, 0, 1)) for b in (0.0, 1 / 9, 1.0)]
    agg = aggregate_models(ms)
    assert agg.mb.beta == 1 / 9 and agg.dof.a == 1 / 9
    with pytest.raises(InvalidInputError):
        aggregate_models([])


# -- fit_all -----------------------------------------------------------------------


def test_fit_all_undistorted(small_scene):
    b = small_scene[0]
    bundle = SceneBundle(clean=b.clean, depth=b.depth, flow=b.flow, distorted=b.clean)
    m = fit_all(bundle)
    assert m.mb.beta == 0
    np.testing.assert_allclose(m.dof.coef, 0, atol=1e-6)
    np.testing.assert_allclose(m.noise.maps, 0, atol=1e-12)
    for stage in ("noise", "dof", "mb"):
        assert m.provenance["stages"][stage]["status"] == "ok"
        assert m.provenance["stages"][stage]["seconds"] >= 0


def test_fit_all_round_trip(small_scene):
    b = small_scene[0]
    gt = DofModel(0.1, -0.4, 0.4)  # G(2) = 0
    observed = synthesize_dof(b.clean, gt, b.depth)
    m = fit_all(SceneBundle(b.clean, b.depth, b.flow, observed), skip=("noise", "mb"))
    z = np.array([2.0, 5.0, 9.0])
    assert np.mean(np.abs(m.dof(z) - gt(z))) <= 0.3
    assert m.provenance["stages"]["noise"]["status"] == "skipped"


def test_fit_all_records_degenerate(small_scene):
    b = small_scene[0]
    bundle = SceneBundle(clean=b.clean, depth=np.full(b.depth.shape, 3.0), flow=b.flow,
                         distorted=b.clean)
    m = fit_all(bundle)
    assert m.provenance["stages"]["dof"]["status"] == "degenerate"
    assert m.dof.is_identity()


def test_fit_all_needs_observation(small_scene):
    with pytest.raises(InvalidInputError):
        fit_all(small_scene[0])
