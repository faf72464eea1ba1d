"""Tests for the reconstruction orchestrator, the comparison table and two-step training."""

import numpy as np
import pytest

from svct.baselines import linear_fbp_baseline, sparse_fbp_baseline
from svct.config import load_config
from svct.errors import CheckpointMismatchError, GeometryMismatchError
from svct.filtering import fbp
from svct.geometry import radon_forward
from svct.metrics import psnr_roi
from svct.models import FistaConfig, Geometry
from svct.phantoms import phantom_set
from svct.pipeline import (
    build_prn_network,
    build_sin_network,
    compare_methods,
    learned_label,
    load_network,
    pad_angles,
    prn_input,
    run_pipeline,
    sin_inpaint,
)
from svct.sinogram_ops import sparse_sample, two_ends_extend
from svct.storage.tensorfile import load_tensor
from svct.training.two_step import augmented_phantoms, build_prn_pairs, build_sin_pairs, simulate, train_two_step
from tests.conftest import make_sinogram, make_smooth


@pytest.fixture
def sparse32(small_pipeline):
    full = radon_forward(make_smooth(32, sigma=5.0, offset=(3.0, -2.0)), small_pipeline.geometry())
    return sparse_sample(full, small_pipeline.sparse_every)


class TestPadAngles:
    def test_two_ends_is_the_flip_extension(self):
        sino = make_sinogram(16, 24)
        assert np.array_equal(pad_angles(sino, 4).data, two_ends_extend(sino, 4).data)

    def test_edge_padding(self):
        sino = make_sinogram(16, 24)
        padded = pad_angles(sino, 4, two_ends=False)
        assert padded.data.shape == (16, 32)
        assert np.array_equal(padded.data[:, :4], np.repeat(sino.data[:, :1], 4, axis=1))
        assert np.array_equal(padded.data[:, -4:], np.repeat(sino.data[:, -1:], 4, axis=1))
        assert np.all(np.diff(padded.angle_array) > 0)

    def test_edge_padding_zero(self):
        sino = make_sinogram(16, 24)
        assert pad_angles(sino, 0, two_ends=False) is sino


class TestRunPipeline:
    def test_without_networks_gives_linear_fbp(self, sparse32, small_pipeline):
        geom = small_pipeline.geometry()
        image = run_pipeline(sparse32, None, None, geom, small_pipeline)
        assert np.allclose(image.pixels, linear_fbp_baseline(sparse32, geom).pixels, atol=1e-10)

    def test_untrained_residual_networks_are_identity(self, sparse32, small_pipeline, small_network):
        geom = small_pipeline.geometry()
        sin_net = build_sin_network(small_network, seed=0, dtype="float64")
        prn_net = build_prn_network(small_network, seed=1, dtype="float64")
        refined = run_pipeline(sparse32, sin_net, prn_net, geom, small_pipeline)
        linear = run_pipeline(sparse32, None, None, geom, small_pipeline)
        assert np.allclose(refined.pixels, linear.pixels, atol=1e-8)

    def test_dumps_every_intermediate(self, tmp_path, sparse32, small_pipeline):
        run_pipeline(sparse32, None, None, small_pipeline.geometry(), small_pipeline, dump_dir=tmp_path)
        names = sorted(p.name for p in tmp_path.iterdir())
        assert names == [
            "01_upsampled.ctt", "02_extended.ctt", "03_inpainted_extended.ctt",
            "04_inpainted.ctt", "05_cascade.ctt", "06_refined.ctt",
        ]
        assert load_tensor(tmp_path / "02_extended.ctt").shape == (32, 64)
        assert load_tensor(tmp_path / "05_cascade.ctt").shape == (4, 32, 32)

    def test_geometry_mismatch(self, sparse32, small_pipeline):
        with pytest.raises(GeometryMismatchError):
            run_pipeline(sparse32, None, None, Geometry.parallel(32, 24), small_pipeline)
        with pytest.raises(GeometryMismatchError):
            run_pipeline(sparse32, None, None, Geometry.parallel(16, 48), small_pipeline)

    def test_sin_inpaint_keeps_measured_views_without_network(self, sparse32, small_pipeline):
        inpainted = sin_inpaint(sparse32, None, small_pipeline)
        assert inpainted.data.shape == (32, 48)
        assert np.array_equal(inpainted.data[:, ::4], sparse32.data)

    @pytest.mark.parametrize("mode, channels", [("cascade", 4), ("single", 1), ("sparse", 1)])
    def test_prn_input_modes(self, sparse32, small_pipeline, mode, channels):
        geom = small_pipeline.geometry()
        stack = prn_input(sparse32, sin_inpaint(sparse32, None, small_pipeline), geom, mode)
        assert stack.shape == (channels, 32, 32)
        if mode == "sparse":
            assert np.allclose(stack[0], sparse_fbp_baseline(sparse32, geom).pixels)

    def test_load_network_names_the_role(self, small_network):
        net = build_sin_network(small_network)
        with pytest.raises(CheckpointMismatchError, match="sin_generator"):
            load_network(net, {})


class TestCompareMethods:
    def test_rows_per_case_and_method(self, small_pipeline):
        phantoms = phantom_set(32, 2, 5, seed=3)
        fista = FistaConfig(outer_iterations=5, tv_prox_iterations=5, power_iterations=10)
        comparison = compare_methods(phantoms, small_pipeline.geometry(), small_pipeline, fista, [1.0, 10.0])
        assert len(comparison.reports) == 6
        assert [s.method for s in comparison.summary] == ["sparse_fbp", "linear_fbp", "fista_tv"]
        assert all(s.count == 2 for s in comparison.summary)
        assert comparison.fista_weight in (1.0, 10.0)
        assert {r.case_id for r in comparison.reports} == {"case000", "case001"}

    def test_sin_alone_adds_an_inpainting_row(self, small_pipeline, small_network):
        phantoms = phantom_set(32, 1, 5, seed=3)
        fista = FistaConfig(outer_iterations=3, tv_prox_iterations=5, power_iterations=10)
        sin_net = build_sin_network(small_network, seed=0, dtype="float64")
        comparison = compare_methods(
            phantoms, small_pipeline.geometry(), small_pipeline, fista, [10.0], sin_net=sin_net
        )
        methods = [r.method for r in comparison.reports]
        assert methods == ["sparse_fbp", "linear_fbp", "fista_tv", "sin_fbp"]
        by_method = {r.method: r for r in comparison.reports}
        # an untrained residual SIN returns the linear interpolation
        assert by_method["sin_fbp"].psnr_db == pytest.approx(by_method["linear_fbp"].psnr_db, abs=1e-6)

    def test_rows_are_labelled_by_composition(self, small_pipeline, small_network):
        phantoms = phantom_set(32, 1, 5, seed=3)
        fista = FistaConfig(outer_iterations=3, tv_prox_iterations=5, power_iterations=10)
        sin_net = build_sin_network(small_network, seed=0, dtype="float64")
        prn_net = build_prn_network(small_network, "single", seed=1, dtype="float64")
        comparison = compare_methods(
            phantoms, small_pipeline.geometry(), small_pipeline, fista, [10.0],
            sin_net=sin_net, prn_net=prn_net, prn_mode="single", two_ends=False,
        )
        assert comparison.reports[-1].method == "pipeline_single_no_te"
        assert learned_label("pipeline") == "pipeline"
        assert learned_label("sin_fbp", two_ends=False) == "sin_fbp_no_te"

    def test_prn_without_sin_is_rejected(self, small_pipeline, small_network):
        prn_net = build_prn_network(small_network, seed=1, dtype="float64")
        with pytest.raises(CheckpointMismatchError, match="sin network"):
            compare_methods(
                phantom_set(32, 1, 5, seed=3), small_pipeline.geometry(), small_pipeline,
                FistaConfig(outer_iterations=1), [10.0], prn_net=prn_net,
            )


class TestTwoStepData:
    def test_augmented_phantoms_are_seeded(self, quick_train):
        phantoms = phantom_set(32, 2, 5, seed=1)
        config = quick_train.model_copy(update={"augment_copies": 2})
        first = augmented_phantoms(phantoms, config, seed=7)
        second = augmented_phantoms(phantoms, config, seed=7)
        assert len(first) == 6
        assert first[0] is phantoms[0]
        assert all(np.array_equal(a.pixels, b.pixels) for a, b in zip(first, second))

    def test_worker_count_does_not_change_results(self, quick_train):
        phantoms = phantom_set(32, 3, 5, seed=1)
        serial = augmented_phantoms(phantoms, quick_train.model_copy(update={"augment_copies": 1}), seed=2)
        threaded = augmented_phantoms(
            phantoms, quick_train.model_copy(update={"augment_copies": 1, "num_workers": 3}), seed=2
        )
        assert all(np.array_equal(a.pixels, b.pixels) for a, b in zip(serial, threaded))

    def test_sin_pairs_are_normalized_and_padded(self, small_pipeline, quick_train):
        phantoms = phantom_set(32, 2, 5, seed=1)
        inputs, targets = build_sin_pairs(phantoms, small_pipeline, quick_train)
        assert inputs.shape == targets.shape == (2, 1, 32, 64)
        full, _ = simulate(phantoms[0], small_pipeline)
        assert np.allclose(targets[0, 0, :, 8:-8], full.data / 32, atol=1e-6)
        assert np.allclose(inputs[0, 0, :, 8:-8:4], targets[0, 0, :, 8:-8:4], atol=1e-6)

    def test_oracle_cascade_ends_with_full_view_fbp(self, small_pipeline, quick_train):
        phantoms = phantom_set(32, 2, 5, seed=1)
        inputs, targets = build_prn_pairs(phantoms, None, small_pipeline, quick_train, oracle=True)
        assert inputs.shape == (2, 4, 32, 32)
        full, _ = simulate(phantoms[1], small_pipeline)
        expected = fbp(full, small_pipeline.geometry()).pixels
        assert np.allclose(inputs[1, 3], expected, atol=1e-5 * np.abs(expected).max())
        assert np.allclose(targets[1, 0], phantoms[1].pixels, atol=1e-6)


@pytest.mark.slow
class TestTwoStepTraining:
    def test_end_to_end_beats_sparse_fbp(self, small_pipeline, small_network, quick_train):
        phantoms = phantom_set(32, 8, 5, seed=11)
        train, held_out = phantoms[:6], phantoms[6:]
        config = quick_train.model_copy(update={"iterations": 20, "dtype": "float64", "learning_rate": 1e-4})
        result = train_two_step(train, small_pipeline, small_network, config, config, progress=False)
        assert len(result.sin.series("total")) == 20
        assert len(result.prn.series("total")) == 20
        assert set(result.sin_params) == set(result.sin.generator.state_dict())

        geom = small_pipeline.geometry()
        pipeline_scores, sparse_scores = [], []
        for phantom in held_out:
            _, sparse = simulate(phantom, small_pipeline)
            image = run_pipeline(sparse, result.sin.generator, result.prn.generator, geom, small_pipeline)
            pipeline_scores.append(psnr_roi(image, phantom))
            sparse_scores.append(psnr_roi(sparse_fbp_baseline(sparse, geom), phantom))
        assert np.mean(pipeline_scores) > np.mean(sparse_scores)

    def test_desk_scale_two_step(self):
        """desk.ini: 50 training phantoms, 200 iterations per stage, 10 held out."""
        bundle = load_config()
        pipeline = bundle.pipeline
        phantoms = phantom_set(pipeline.image_size, pipeline.num_phantoms, pipeline.ellipse_count, seed=1234)
        cut = pipeline.num_phantoms - pipeline.held_out
        result = train_two_step(
            phantoms[:cut], pipeline, bundle.network, bundle.train_sin, bundle.train_prn, progress=False
        )

        geom = pipeline.geometry()
        sin_mse, linear_mse, pipeline_scores, sparse_scores = [], [], [], []
        for phantom in phantoms[cut:]:
            full, sparse = simulate(phantom, pipeline)
            inpainted = sin_inpaint(sparse, result.sin.generator, pipeline)
            linear = sin_inpaint(sparse, None, pipeline)
            sin_mse.append(np.mean((inpainted.data - full.data) ** 2))
            linear_mse.append(np.mean((linear.data - full.data) ** 2))
            image = run_pipeline(sparse, result.sin.generator, result.prn.generator, geom, pipeline)
            pipeline_scores.append(psnr_roi(image, phantom))
            sparse_scores.append(psnr_roi(sparse_fbp_baseline(sparse, geom), phantom))
        assert np.mean(sin_mse) < np.mean(linear_mse)
        assert np.mean(pipeline_scores) > np.mean(sparse_scores)
