import numpy as np
import pytest

import superseg.cli as cli
from superseg import IterationCapExceeded, read_partition
from superseg.cli import main


@pytest.fixture(scope="session")
def tiny_ply(tmp_path_factory):
    """Small labeled scene shared by the command tests."""
    path = tmp_path_factory.mktemp("clouds") / "tiny.ply"
    code = main(["synth", "--scene", "rooms", "--n-points", "1500",
                 "--seed", "3", "--output", str(path)])
    assert code == 0
    return path


@pytest.fixture(scope="session")
def tiny_n(tiny_ply):
    """Actual point count (synth rounds per surface patch)."""
    from superseg import read_ply
    return read_ply(tiny_ply).n_points


def run_partition(tiny_ply, out, *extra):
    return main(["partition", "--input", str(tiny_ply), "--output",
                 str(out), "--seed", "1", *extra])


class TestExitCodes:
    def test_missing_input_is_io_error(self, tmp_path, capsys):
        code = main(["partition", "--input", str(tmp_path / "absent.ply")])
        assert code == 2
        assert "error" in capsys.readouterr().err

    def test_malformed_ply_is_io_error(self, tmp_path, capsys):
        bad = tmp_path / "bad.ply"
        bad.write_text("not a ply at all\n")
        code = main(["partition", "--input", str(bad)])
        assert code == 2

    def test_min_size_zero_is_config_error(self, tiny_ply, capsys):
        code = main(["partition", "--input", str(tiny_ply),
                     "--min-sizes", "0"])
        assert code == 3
        assert "sigma_min >= 1" in capsys.readouterr().err

    def test_unknown_flag_is_usage_error(self, capsys):
        assert main(["partition", "--frobnicate"]) == 3

    def test_unknown_scene_is_io_error(self, tmp_path, capsys):
        code = main(["synth", "--scene", "atlantis", "--output",
                     str(tmp_path / "x.ply")])
        assert code == 2
        err = capsys.readouterr().err
        assert "rooms" in err and "bench" in err

    def test_internal_failure_is_exit_4(self, tiny_ply, tmp_path,
                                        monkeypatch, capsys):
        def blow_up(*args, **kwargs):
            raise IterationCapExceeded("merge loop exceeded 99 iterations")

        monkeypatch.setattr(cli, "hierarchical_partition", blow_up)
        code = run_partition(tiny_ply, tmp_path / "out.partition.csv")
        assert code == 4
        assert "99 iterations" in capsys.readouterr().err


class TestPartitionCommand:
    def test_writes_table_and_sidecar(self, tiny_ply, tiny_n, tmp_path,
                                      capsys):
        out = tmp_path / "out.partition.csv"
        assert run_partition(tiny_ply, out) == 0
        stdout = capsys.readouterr().out
        assert "superpoints per level:" in stdout
        assert f"wrote {out}" in stdout
        table = read_partition(out)
        assert table.shape == (tiny_n, 3)
        # levels nest: coarser ids are a function of finer ids
        for lvl in range(2):
            mapping = {}
            for a, b in zip(table[:, lvl].tolist(),
                            table[:, lvl + 1].tolist()):
                assert mapping.setdefault(a, b) == b
        assert (tmp_path / "out.partition.csv.config").exists()

    def test_default_output_next_to_input(self, tiny_ply, capsys):
        assert main(["partition", "--input", str(tiny_ply),
                     "--seed", "1"]) == 0
        expected = tiny_ply.parent / "tiny.partition.csv"
        assert expected.exists()

    def test_repeat_runs_bit_identical(self, tiny_ply, tmp_path):
        a, b = tmp_path / "a.partition.bin", tmp_path / "b.partition.bin"
        run_partition(tiny_ply, a, "--format", "bin")
        run_partition(tiny_ply, b, "--format", "bin")
        assert a.read_bytes() == b.read_bytes()

    def test_thread_count_does_not_change_result(self, tiny_ply, tmp_path):
        a, b = tmp_path / "t1.partition.bin", tmp_path / "t8.partition.bin"
        run_partition(tiny_ply, a, "--format", "bin", "--threads", "1")
        run_partition(tiny_ply, b, "--format", "bin", "--threads", "8")
        assert a.read_bytes() == b.read_bytes()

    def test_csv_and_bin_agree(self, tiny_ply, tmp_path):
        a, b = tmp_path / "a.partition.csv", tmp_path / "b.partition.bin"
        run_partition(tiny_ply, a, "--format", "csv")
        run_partition(tiny_ply, b, "--format", "bin")
        np.testing.assert_array_equal(read_partition(a), read_partition(b))

    def test_config_file_with_flag_override(self, tiny_ply, tmp_path):
        conf = tmp_path / "run.conf"
        conf.write_text("[partition]\nlambda = 0.5\nmin_sizes = 4, 16\n")
        out = tmp_path / "c.partition.csv"
        assert run_partition(tiny_ply, out, "--config", str(conf),
                             "--lambda", "0.02") == 0
        sidecar = (tmp_path / "c.partition.csv.config").read_text()
        assert "lambda = 0.02" in sidecar     # flag wins
        assert "min_sizes = 4, 16" in sidecar  # file value survives
        assert read_partition(out).shape[1] == 2

    def test_sidecar_deterministic(self, tiny_ply, tmp_path):
        out = tmp_path / "a.partition.csv"
        run_partition(tiny_ply, out)
        first = (tmp_path / "a.partition.csv.config").read_text()
        run_partition(tiny_ply, out)
        assert (tmp_path / "a.partition.csv.config").read_text() == first
        assert "seed = 1" in first

    def test_voxel_size_keeps_full_point_count(self, tiny_ply, tiny_n,
                                               tmp_path):
        out = tmp_path / "v.partition.csv"
        assert run_partition(tiny_ply, out, "--voxel-size", "0.2") == 0
        assert read_partition(out).shape == (tiny_n, 3)


class TestEvalCommand:
    def test_scores_each_level(self, tiny_ply, tmp_path, capsys):
        part = tmp_path / "p.partition.csv"
        run_partition(tiny_ply, part)
        capsys.readouterr()
        assert main(["eval", "--input", str(tiny_ply), "--partition",
                     str(part)]) == 0
        lines = capsys.readouterr().out.strip().split("\n")
        assert lines[0].startswith("n_superpoints,oracle_miou")
        assert len(lines) == 4
        assert lines[1].startswith("level0,")

    def test_report_files(self, tiny_ply, tmp_path):
        part = tmp_path / "p.partition.csv"
        run_partition(tiny_ply, part)
        out = tmp_path / "scores.csv"
        assert main(["eval", "--input", str(tiny_ply), "--partition",
                     str(part), "--output", str(out)]) == 0
        assert out.exists()
        assert (tmp_path / "scores.png").exists()
        assert (tmp_path / "scores.csv.config").exists()
        header = out.read_text().split("\n", 1)[0]
        assert header.startswith("level,n_superpoints,oracle_miou")

    def test_partition_required(self, tiny_ply, capsys):
        assert main(["eval", "--input", str(tiny_ply)]) == 3

    def test_point_count_mismatch(self, tiny_ply, tmp_path, capsys):
        part = tmp_path / "short.partition.csv"
        with open(part, "w") as fh:
            fh.write("point_id,level0\n0,0\n1,0\n")
        code = main(["eval", "--input", str(tiny_ply), "--partition",
                     str(part)])
        assert code == 3


class TestFitCommand:
    def test_writes_embeddings_and_reports(self, tiny_ply, tiny_n,
                                           tmp_path, capsys):
        out = tmp_path / "emb.bin"
        assert main(["fit", "--input", str(tiny_ply), "--steps", "3",
                     "--seed", "2", "--output", str(out)]) == 0
        stdout = capsys.readouterr().out
        assert "initial loss" in stdout
        from superseg import read_embeddings
        emb = read_embeddings(out)
        assert emb.shape[0] == tiny_n
        weights = np.loadtxt(str(out) + ".weights.csv", delimiter=",")
        assert weights.shape == (emb.shape[1], emb.shape[1])
        loss_lines = (tmp_path / "emb.bin.loss.csv").read_text() \
            .strip().split("\n")
        assert loss_lines[0] == "step,sampled_loss,full_loss"
        assert len(loss_lines) == 5  # header + init + 3 steps
        assert (tmp_path / "emb.png").exists()
        assert (tmp_path / "emb.bin.config").exists()

    def test_partition_consumes_fitted_embeddings(self, tiny_ply,
                                                  tiny_n, tmp_path):
        emb = tmp_path / "emb.bin"
        main(["fit", "--input", str(tiny_ply), "--steps", "2",
              "--output", str(emb)])
        out = tmp_path / "e.partition.csv"
        assert run_partition(tiny_ply, out, "--embeddings", str(emb)) == 0
        assert read_partition(out).shape == (tiny_n, 3)


class TestBenchCommand:
    def test_synthetic_bench_run(self, tmp_path, capsys):
        out = tmp_path / "bench.csv"
        assert main(["bench", "--n-points", "2000", "--repeats", "2",
                     "--seed", "4", "--output", str(out)]) == 0
        stdout = capsys.readouterr().out
        assert "mean of 2 runs:" in stdout
        assert "superpoints per level:" in stdout
        lines = out.read_text().strip().split("\n")
        assert lines[0] == "stage,mean_s,min_s,max_s,mean_pts_per_s"
        stages = [l.split(",")[0] for l in lines[1:]]
        assert stages == ["knn", "point_features", "partition",
                          "superpoint_features", "end_to_end"]
        assert (tmp_path / "bench.png").exists()

    def test_bench_on_existing_cloud(self, tiny_ply, capsys):
        assert main(["bench", "--input", str(tiny_ply), "--repeats",
                     "1"]) == 0
        assert "tiny.ply" in capsys.readouterr().out


class TestSynthCommand:
    def test_ascii_output(self, tmp_path):
        out = tmp_path / "scene.ply"
        assert main(["synth", "--scene", "rooms", "--n-points", "900",
                     "--ascii", "--output", str(out)]) == 0
        head = out.read_text().split("\n", 2)
        assert head[0] == "ply"
        assert head[1] == "format ascii 1.0"

    def test_output_required(self, capsys):
        assert main(["synth", "--scene", "rooms"]) == 3

    def test_density_scale(self, tmp_path, capsys):
        out = tmp_path / "dense.ply"
        assert main(["synth", "--scene", "rooms", "--density-scale",
                     "0.02", "--output", str(out)]) == 0
        assert "points" in capsys.readouterr().out
