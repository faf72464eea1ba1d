"""End-to-end tests of the svct command line through main()."""

import csv
import io

import numpy as np
import pytest

from svct.main import build_parser, main
from svct.storage.tensorfile import load_checkpoint, load_sinogram, load_tensor

SMALL = [
    "--set", "pipeline.image_size=32", "--set", "pipeline.full_views=48",
    "--set", "pipeline.sparse_every=4", "--set", "pipeline.te_pad=8",
    "--set", "pipeline.num_phantoms=4", "--set", "pipeline.held_out=1",
    "--set", "network.sin_base_channels=2", "--set", "network.prn_base_channels=2",
    "--set", "network.disc_base_channels=4",
    "--set", "train.sin.augment_copies=0", "--set", "train.sin.batch_size=2",
    "--set", "train.prn.batch_size=2",
]


@pytest.fixture
def phantom_file(tmp_path):
    path = tmp_path / "phantom.ctt"
    assert main(["phantom", "--size", "64", "-o", str(path)]) == 0
    return path


@pytest.fixture
def sino_file(tmp_path, phantom_file):
    path = tmp_path / "full.ctc"
    assert main(["project", "-i", str(phantom_file), "--angles", "180", "-o", str(path)]) == 0
    return path


def read_csv(text):
    return list(csv.DictReader(io.StringIO(text)))


class TestParser:
    def test_every_command_is_registered(self):
        parser = build_parser()
        choices = parser._subparsers._group_actions[0].choices
        assert set(choices) == {
            "phantom", "project", "sparse", "fbp", "upsample", "te-extend",
            "fista", "recon", "train-sin", "train-prn", "eval", "gradcheck", "compare",
        }

    def test_missing_command_is_a_usage_error(self):
        with pytest.raises(SystemExit) as info:
            main([])
        assert info.value.code == 2


class TestOperators:
    def test_phantom_project_fbp_eval(self, tmp_path, capsys, phantom_file, sino_file):
        recon = tmp_path / "recon.pgm"
        assert main(["fbp", "-i", str(sino_file), "-o", str(recon)]) == 0
        capsys.readouterr()
        assert main(["eval", "--pred", str(recon), "--target", str(phantom_file), "--method", "fbp"]) == 0
        rows = read_csv(capsys.readouterr().out)
        assert rows[0]["method"] == "fbp" and rows[0]["case_id"] == "case000"
        assert float(rows[0]["psnr_db"]) > 12.0

    def test_sparse_upsample_extend_chain(self, tmp_path, sino_file):
        sparse, up, ext, crop = (tmp_path / f"{n}.ctc" for n in ("sparse", "up", "ext", "crop"))
        assert main(["sparse", "-i", str(sino_file), "--every", "8", "-o", str(sparse)]) == 0
        assert load_sinogram(sparse).data.shape == (64, 23)
        assert main(["upsample", "-i", str(sparse), "--angles", "180", "-o", str(up)]) == 0
        assert main(["te-extend", "-i", str(up), "--pad", "6", "-o", str(ext)]) == 0
        assert load_sinogram(ext).data.shape == (64, 192)
        assert main(["te-extend", "-i", str(ext), "--pad", "6", "--crop", "-o", str(crop)]) == 0
        assert np.array_equal(load_sinogram(crop).data, load_sinogram(up).data)

    def test_random_phantom_uses_the_seed(self, tmp_path):
        a, b = tmp_path / "a.ctt", tmp_path / "b.ctt"
        for path in (a, b):
            assert main(["phantom", "--kind", "random_ellipses", "--size", "32", "--seed", "4", "-o", str(path)]) == 0
        assert np.array_equal(load_tensor(a), load_tensor(b))

    def test_missing_input_exits_two(self, tmp_path, capsys):
        assert main(["fbp", "-i", str(tmp_path / "absent.ctc")]) == 2
        assert capsys.readouterr().err.startswith("svct fbp:")

    def test_bad_override_exits_two(self, capsys, sino_file):
        assert main(["fista", "-i", str(sino_file), "--set", "fista.bogus=1"]) == 2
        assert "unknown key" in capsys.readouterr().err

    def test_compare_refinement_without_inpainting_exits_two(self, tmp_path, capsys):
        assert main(["compare", "--prn", str(tmp_path / "prn.ctc")]) == 2
        assert "svct compare: --prn needs" in capsys.readouterr().err


class TestFista:
    def test_writes_image_and_trace(self, tmp_path, phantom_file):
        sparse = tmp_path / "sparse.ctc"
        assert main(["project", "-i", str(phantom_file), "--angles", "16", "-o", str(sparse)]) == 0
        out, trace = tmp_path / "fista.ctt", tmp_path / "trace.csv"
        assert main(["fista", "-i", str(sparse), "--iterations", "5", "--trace", str(trace), "-o", str(out)]) == 0
        assert load_tensor(out).shape == (64, 64)
        rows = read_csv(trace.read_text())
        assert len(rows) == 6
        assert float(rows[-1]["objective"]) <= float(rows[0]["objective"])


class TestGradcheck:
    def test_suite_passes(self, capsys):
        assert main(["gradcheck"]) == 0
        assert "gradient checks passed" in capsys.readouterr().out


@pytest.mark.slow
class TestTrainingCommands:
    def test_train_recon_compare(self, tmp_path, capsys):
        sin, prn, trace = tmp_path / "sin.ctc", tmp_path / "prn.ctc", tmp_path / "sin.csv"
        assert main(["train-sin", *SMALL, "--iterations", "3", "--no-progress",
                     "--out", str(sin), "--trace", str(trace)]) == 0
        assert load_checkpoint(sin)
        assert trace.read_text().startswith("iteration,loss_name,value")
        assert main(["train-prn", *SMALL, "--iterations", "3", "--no-progress",
                     "--sin", str(sin), "--out", str(prn)]) == 0

        phantom, full, sparse, recon = (tmp_path / n for n in ("p.ctt", "full.ctc", "sparse.ctc", "r.ctt"))
        assert main(["phantom", "--size", "32", "-o", str(phantom)]) == 0
        assert main(["project", "-i", str(phantom), "--angles", "48", "-o", str(full)]) == 0
        assert main(["sparse", "-i", str(full), "--every", "4", "-o", str(sparse)]) == 0
        dumps = tmp_path / "dumps"
        assert main(["recon", *SMALL, "-i", str(sparse), "--sin", str(sin), "--prn", str(prn),
                     "--dump-dir", str(dumps), "-o", str(recon)]) == 0
        assert load_tensor(recon).shape == (32, 32)
        assert len(list(dumps.iterdir())) == 6

        capsys.readouterr()
        assert main(["compare", *SMALL, "--set", "fista.outer_iterations=5", "--set", "fista.grid.tv_weights=10",
                     "--sin", str(sin), "--prn", str(prn), "--out", str(tmp_path / "cases.csv")]) == 0
        summary = read_csv(capsys.readouterr().out)
        assert [row["method"] for row in summary] == ["sparse_fbp", "linear_fbp", "fista_tv", "pipeline"]

        assert main(["compare", *SMALL, "--set", "fista.outer_iterations=5", "--set", "fista.grid.tv_weights=10",
                     "--sin", str(sin)]) == 0
        summary = read_csv(capsys.readouterr().out)
        assert [row["method"] for row in summary][-1] == "sin_fbp"

    def test_recon_rejects_wrong_detector_count(self, tmp_path, sino_file):
        sin = tmp_path / "sin.ctc"
        assert main(["train-sin", *SMALL, "--iterations", "1", "--no-progress", "--out", str(sin)]) == 0
        assert main(["recon", *SMALL, "-i", str(sino_file), "--sin", str(sin), "--prn", str(sin)]) == 2
