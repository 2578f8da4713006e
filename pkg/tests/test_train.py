"""Training loop, densification surgery and determinism."""

import numpy as np
import pytest

from semsplat.errors import ConfigurationError, InvalidParameterError
from semsplat.optim import Adam
from semsplat.scene import GaussianSoA, SemanticDictionary, look_at_camera
from semsplat.training import (LossConfig, TrainConfig, camera_extent,
                               densify_and_prune, evaluate_scene, init_scene,
                               reset_opacity, train)


def strip_wall_clock(log):
    return [{k: v for k, v in entry.items() if k != "wall_ms"} for entry in log]


class TestConfigs:
    def test_defaults_validate(self):
        TrainConfig().validate()
        LossConfig().validate()

    def test_bad_values_rejected(self):
        with pytest.raises(InvalidParameterError):
            TrainConfig(iterations=0).validate()
        with pytest.raises(InvalidParameterError):
            TrainConfig(lr_means=-1.0).validate()
        with pytest.raises(InvalidParameterError):
            LossConfig(dssim_weight=2.0).validate()
        with pytest.raises(InvalidParameterError):
            LossConfig(semantic_weight=-0.1).validate()


class TestCameraExtent:
    def test_known_rig(self):
        cams = [look_at_camera(eye=e, target=(0, 0, 0), fx=30, fy=30, cx=8,
                               cy=8, width=16, height=16)
                for e in [(-2.0, 0.0, 0.0), (2.0, 0.0, 0.0), (0.0, 0.0, 3.0)]]
        # centroid (0, 0, 1); farthest camera is (0,0,3) at distance 2.236
        expected = np.linalg.norm([2.0, 0.0, -1.0])
        assert camera_extent(cams) == pytest.approx(expected, rel=1e-9)

    def test_floor_for_degenerate_rig(self):
        cam = look_at_camera(eye=(0, 0, -5), target=(0, 0, 0), fx=30, fy=30,
                             cx=8, cy=8, width=16, height=16)
        assert camera_extent([cam, cam]) == 1.0


class TestInitScene:
    def test_shapes_and_wiring(self, small_fixture):
        dataset = small_fixture[0]
        scene = init_scene(dataset, num_gaussians=50, sh_degree=2, seed=3)
        scene.validate()
        assert len(scene.gaussians) == 50
        assert scene.gaussians.sh_coeffs.shape == (50, 3, 9)
        assert scene.dictionary is dataset.dictionary
        assert scene.head.num_classes == len(dataset.dictionary) + 1
        # symmetry-broken semantics: neither codes nor head may be all zero
        assert np.any(scene.gaussians.semantic_codes != 0.0)
        assert np.any(scene.head.matrix != 0.0)

    def test_deterministic_per_seed(self, small_fixture):
        dataset = small_fixture[0]
        a = init_scene(dataset, num_gaussians=20, seed=9)
        b = init_scene(dataset, num_gaussians=20, seed=9)
        np.testing.assert_array_equal(a.gaussians.means, b.gaussians.means)


def trace_setup(rng):
    """Three Gaussians arranged so densification does one of each action:
    index 0 clones (small, high grad), index 1 splits (large, high grad),
    index 2 is pruned (transparent)."""
    n = 3
    quats = np.zeros((n, 4), dtype=np.float32)
    quats[:, 0] = 1.0
    g = GaussianSoA(
        means=np.arange(n * 3, dtype=np.float32).reshape(n, 3),
        quats=quats,
        log_scales=np.log(np.float32([[0.005, 0.005, 0.005],
                                      [0.5, 0.5, 0.5],
                                      [0.01, 0.01, 0.01]])),
        opacity_logits=np.float32([2.0, 2.0, -8.0]),
        sh_coeffs=rng.standard_normal((n, 3, 1)).astype(np.float32),
        semantic_codes=rng.standard_normal((n, 3)).astype(np.float32))

    cfg = TrainConfig(densify_grad_threshold=2e-4, densify_size_fraction=0.01,
                      split_samples=2, split_scale_factor=1.6)
    extent = 4.0  # size limit = 0.04: 0.005 clones, 0.5 splits
    accum_grad = np.float32([1e-3, 1e-3, 1e-3])
    accum_count = np.float32([1.0, 1.0, 1.0])
    return g, cfg, extent, accum_grad, accum_count


class TestDensify:
    def make_scene(self, g, true_fixture):
        scene = true_fixture[0].copy()
        scene.gaussians = g
        scene.sh_degree = 0
        return scene

    def test_clone_split_prune_trace(self, rng, true_fixture):
        g, cfg, extent, accum_grad, accum_count = trace_setup(rng)
        scene = self.make_scene(g, true_fixture)
        adam = Adam({name: 0.01 for name in
                     ("means", "quats", "log_scales", "opacity_logits",
                      "sh_coeffs", "semantic_codes")})
        for name in adam.lrs:
            param = getattr(scene.gaussians, name)
            adam.step(name, param, rng.standard_normal(param.shape).astype(np.float32))
        original = scene.gaussians.copy()  # after the seeding step mutated params
        m_means = adam.state["means"]["m"].copy()

        densify_and_prune(scene, adam, accum_grad, accum_count, cfg, extent,
                          np.random.default_rng(0))
        out = scene.gaussians
        # kept source of the clone, the clone, two split samples
        assert len(out) == 4

        np.testing.assert_array_equal(out.means[0], original.means[0])
        np.testing.assert_array_equal(out.means[1], original.means[0])
        np.testing.assert_array_equal(out.semantic_codes[1],
                                      original.semantic_codes[0])

        # split samples: shrunk scales, inherited codes, moved centers
        expected_ls = original.log_scales[1] - np.log(np.float32(1.6))
        np.testing.assert_allclose(out.log_scales[2], expected_ls, rtol=1e-6)
        np.testing.assert_allclose(out.log_scales[3], expected_ls, rtol=1e-6)
        np.testing.assert_array_equal(out.semantic_codes[2],
                                      original.semantic_codes[1])
        assert not np.allclose(out.means[2], original.means[1])
        assert not np.allclose(out.means[2], out.means[3])

        # the transparent Gaussian is gone
        assert not np.any(np.all(out.means == original.means[2], axis=1))

        # optimizer rows: survivor keeps its moments, new rows start fresh
        st = adam.state["means"]
        assert st["m"].shape == (4, 3)
        np.testing.assert_array_equal(st["m"][0], m_means[0])
        assert np.all(st["m"][1:] == 0.0)

    def test_low_gradient_is_left_alone(self, rng, true_fixture):
        g, cfg, extent, _, accum_count = trace_setup(rng)
        g.opacity_logits[2] = 2.0  # nothing to prune either
        scene = self.make_scene(g, true_fixture)
        adam = Adam({"means": 0.01})
        densify_and_prune(scene, adam, np.zeros(3, np.float32), accum_count,
                          cfg, extent, rng)
        assert len(scene.gaussians) == 3

    def test_split_positions_follow_seeded_rng(self, rng, true_fixture):
        results = []
        for _ in range(2):
            g, cfg, extent, accum_grad, accum_count = trace_setup(
                np.random.default_rng(4))
            scene = self.make_scene(g, true_fixture)
            densify_and_prune(scene, Adam({"means": 0.01}), accum_grad,
                              accum_count, cfg, extent,
                              np.random.default_rng(123))
            results.append(scene.gaussians.means.copy())
        np.testing.assert_array_equal(results[0], results[1])


class TestOpacityReset:
    def test_clamps_and_clears_moments(self, rng, true_fixture):
        scene = true_fixture[0].copy()
        adam = Adam({"opacity_logits": 0.05})
        adam.step("opacity_logits", scene.gaussians.opacity_logits,
                  rng.standard_normal(len(scene.gaussians)).astype(np.float32))
        reset_opacity(scene, adam, ceiling=0.01)
        assert scene.gaussians.opacities().max() <= 0.01 + 1e-6
        assert np.all(adam.state["opacity_logits"]["m"] == 0.0)


class TestTrainLoop:
    def test_log_schema_and_improvement(self, small_fixture):
        dataset, init, _, _ = small_fixture
        cfg = TrainConfig(iterations=60, seed=0, densify_interval=0,
                          opacity_reset_interval=0)
        scene, log = train(dataset, cfg, scene=init.copy())
        assert len(log) == 60
        assert [e["iteration"] for e in log] == list(range(60))
        expected_keys = {"iteration", "L_gs", "L_ce", "psnr", "num_gaussians",
                         "wall_ms"}
        assert all(set(e) == expected_keys for e in log)
        assert log[-1]["num_gaussians"] == len(scene.gaussians)
        # quality moves in the right direction even in a short run
        assert np.mean([e["psnr"] for e in log[-10:]]) > log[0]["psnr"]
        assert np.mean([e["L_ce"] for e in log[-10:]]) < log[0]["L_ce"]

    def test_deterministic_given_seed(self, small_fixture):
        dataset, init, _, _ = small_fixture
        cfg = TrainConfig(iterations=40, seed=5)
        scene_a, log_a = train(dataset, cfg, scene=init.copy())
        scene_b, log_b = train(dataset, cfg, scene=init.copy())
        assert strip_wall_clock(log_a) == strip_wall_clock(log_b)
        for name in GaussianSoA.FIELDS:
            np.testing.assert_array_equal(getattr(scene_a.gaussians, name),
                                          getattr(scene_b.gaussians, name))
        np.testing.assert_array_equal(scene_a.head.matrix, scene_b.head.matrix)

    def test_zero_semantic_weight_freezes_semantics(self, small_fixture):
        dataset, init, _, _ = small_fixture
        cfg = TrainConfig(iterations=25, seed=0, densify_interval=0,
                          opacity_reset_interval=0)
        scene, _ = train(dataset, cfg, LossConfig(semantic_weight=0.0),
                         scene=init.copy())
        np.testing.assert_array_equal(scene.gaussians.semantic_codes,
                                      init.gaussians.semantic_codes)
        np.testing.assert_array_equal(scene.head.matrix, init.head.matrix)
        np.testing.assert_array_equal(scene.head.bias, init.head.bias)
        # geometry still trained
        assert not np.array_equal(scene.gaussians.means, init.gaussians.means)

    def test_joint_training_moves_all_groups(self, small_fixture):
        dataset, init, _, _ = small_fixture
        cfg = TrainConfig(iterations=25, seed=0, densify_interval=0,
                          opacity_reset_interval=0)
        scene, _ = train(dataset, cfg, scene=init.copy())
        for name in GaussianSoA.FIELDS:
            assert not np.array_equal(getattr(scene.gaussians, name),
                                      getattr(init.gaussians, name)), name
        assert not np.array_equal(scene.head.matrix, init.head.matrix)

    def test_objective_trend_decreases(self, small_fixture):
        """Block means of the optimized objective (photometric + semantic)
        decrease monotonically; the photometric term alone may trade off
        against the cross-entropy and is only required to improve overall."""
        dataset, init, _, _ = small_fixture
        cfg = TrainConfig(iterations=240, seed=1, densify_interval=0,
                          opacity_reset_interval=0)
        _, log = train(dataset, cfg, scene=init.copy())
        total = np.array([e["L_gs"] + e["L_ce"] for e in log])
        blocks = total.reshape(-1, 40).mean(axis=1)  # 10 epochs per block
        assert np.all(np.diff(blocks) < 1e-6), f"objective rose: {blocks}"
        photo = np.array([e["L_gs"] for e in log]).reshape(-1, 40).mean(axis=1)
        assert photo.min() < 0.5 * photo[0]

    def test_densification_grows_scene(self, small_fixture):
        dataset, init, _, _ = small_fixture
        cfg = TrainConfig(iterations=80, seed=0, densify_start=10,
                          densify_interval=20, densify_stop=80,
                          densify_grad_threshold=1e-6,
                          opacity_reset_interval=0)
        scene, log = train(dataset, cfg, scene=init.copy())
        assert len(scene.gaussians) > len(init.gaussians)
        counts = [e["num_gaussians"] for e in log]
        assert counts[0] == len(init.gaussians)
        assert max(counts) == counts[-1]

    def test_empty_dataset_rejected(self, small_fixture):
        dataset = small_fixture[0]

        class Empty:
            cameras = []
            images = []
            label_maps = []
            dictionary = dataset.dictionary
            embeddings = dataset.embeddings

        with pytest.raises(ConfigurationError):
            train(Empty(), TrainConfig(iterations=1))

    def test_head_dictionary_mismatch_rejected(self, small_fixture):
        dataset, init, _, _ = small_fixture
        scene = init.copy()
        scene.dictionary = SemanticDictionary(["just one"])
        object.__setattr__  # keep flake quiet; dictionary swap is the point
        with pytest.raises(ConfigurationError):
            train(dataset, TrainConfig(iterations=1), scene=scene)


class TestEvaluate:
    def test_true_scene_is_perfect(self, small_fixture):
        dataset, _, true_scene, _ = small_fixture
        report = evaluate_scene(true_scene, dataset)
        assert report["psnr"] == pytest.approx(99.0)
        assert report["ssim"] == pytest.approx(1.0, abs=1e-9)
        assert report["miou"] == 1.0
        assert report["localization_accuracy"] == 1.0
        assert report["num_gaussians"] == 20
        assert report["wall_ms"] > 0.0
