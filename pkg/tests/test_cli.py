import json

import numpy as np
import pytest

import perigeo as pg
from perigeo.cli import main
from perigeo.io import ParseError, parse_set_file, parse_set_text, write_set_text

S15_TEXT = """dim 1
15
motif 9
0 A
0.0666666666667
0.2
0.2666666666667
0.3333333333333
0.4666666666667
0.6
0.6666666666667
0.8
"""


def s15_points():
    return [0, 1, 3, 4, 5, 7, 9, 10, 12]


def write_1d(path, points, period):
    lines = [f"dim 1", f"{period}", f"motif {len(points)}"]
    lines += [f"{p / period:.15g}" for p in points]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return str(path)


class TestParsing:
    def test_s15_fixture(self, tmp_path):
        path = tmp_path / "s15.txt"
        path.write_text(S15_TEXT, encoding="utf-8")
        S = parse_set_file(path)
        assert S.dim == 1 and S.m == 9
        assert S.cell.basis[0, 0] == 15
        assert S.labels[0] == "A"
        cart = np.sort(S.motif[:, 0] * 15)
        assert np.allclose(cart, s15_points(), atol=1e-9)

    def test_empty_motif_rejected(self):
        text = "dim 1\n1\nmotif 0\n"
        with pytest.raises(ParseError, match="at least one point"):
            parse_set_text(text)

    def test_degenerate_cell_rejected(self):
        text = "dim 2\n1 0\n2 0\nmotif 1\n0.5 0.5\n"
        with pytest.raises(ParseError, match="degenerate"):
            parse_set_text(text)

    def test_fraction_out_of_range_reports_line(self):
        text = "dim 1\n1\nmotif 2\n0.5\n1.5\n"
        with pytest.raises(ParseError) as err:
            parse_set_text(text)
        assert err.value.line == 5

    def test_json_roundtrip(self, tmp_path):
        rng = np.random.default_rng(2)
        cell = pg.UnitCell(np.eye(2) + 0.1 * rng.normal(size=(2, 2)))
        S = pg.PeriodicSet(cell, rng.random((3, 2)), labels=("a", "b", "c"))
        path = tmp_path / "set.json"
        path.write_text(pg.write_set_json(S), encoding="utf-8")
        T = parse_set_file(path)
        assert np.allclose(T.cell.basis, S.cell.basis, rtol=1e-11)
        assert np.allclose(T.motif, S.motif, rtol=1e-11)
        assert T.labels == S.labels

    def test_text_roundtrip(self):
        rng = np.random.default_rng(3)
        cell = pg.UnitCell(np.eye(3) + 0.1 * rng.normal(size=(3, 3)))
        S = pg.PeriodicSet(cell, rng.random((2, 3)))
        T = parse_set_text(write_set_text(S))
        assert np.allclose(T.cell.basis, S.cell.basis, rtol=1e-11)
        assert np.allclose(T.motif, S.motif, rtol=1e-11)


class TestExitCodes:
    def test_usage_error_is_one(self, capsys):
        assert main(["amd"]) == 1
        assert main(["nonsense"]) == 1

    def test_data_error_is_two(self, tmp_path, capsys):
        bad = tmp_path / "bad.txt"
        bad.write_text("dim 1\n1\nmotif 0\n", encoding="utf-8")
        assert main(["amd", str(bad), "-k", "4"]) == 2
        err = capsys.readouterr().err
        assert "at least one point" in err

    def test_success_is_zero(self, tmp_path, capsys):
        path = write_1d(tmp_path / "z.txt", [0], 1)
        assert main(["amd", path, "-k", "3"]) == 0


class TestCommands:
    def test_amd_json_and_csv(self, tmp_path, capsys):
        path = write_1d(tmp_path / "s15.txt", s15_points(), 15)
        assert main(["amd", path, "-k", "4"]) == 0
        data = json.loads(capsys.readouterr().out)
        assert data["schema"] == 1
        assert np.allclose(data["amd"], [11 / 9, 19 / 9, 25 / 9, 34 / 9])
        assert len(data["per_point"]) == 9
        assert main(["amd", path, "-k", "2", "--format", "csv"]) == 0
        lines = capsys.readouterr().out.strip().splitlines()
        assert lines[0] == "k,amd"
        assert lines[1].startswith("1,")

    def test_density_exact(self, tmp_path, capsys):
        path = write_1d(tmp_path / "s.txt", [0, 5, 7.5], 15)
        assert main(["density", path, "-k", "1"]) == 0
        data = json.loads(capsys.readouterr().out)
        assert data["mode"] == "exact"
        corners = np.array(data["psi"][0]["corners"])
        expected = [(0, 1), (1 / 12, 1 / 2), (1 / 6, 1 / 6), (1 / 4, 0)]
        assert np.allclose(corners, expected, atol=1e-9)
        original = np.array(data["psi"][0]["corners_original_units"])
        assert np.allclose(original[:, 0], corners[:, 0] * 15, atol=1e-9)

    def test_density_sampled_and_plot_csv(self, tmp_path, capsys):
        path = write_1d(tmp_path / "s.txt", [0, 5, 7.5], 15)
        prefix = tmp_path / "plot"
        code = main([
            "density", path, "-k", "1", "--samples", "500",
            "--grid", "0.5:3:4", "--seed", "5",
            "--plot-csv", str(prefix),
        ])
        assert code == 0
        data = json.loads(capsys.readouterr().out)
        assert data["mode"] == "sampled" and data["seed"] == 5
        assert (tmp_path / "plot_k0.csv").exists()
        assert (tmp_path / "plot_k1.csv").exists()
        rows = (tmp_path / "plot_k1.csv").read_text().strip().splitlines()
        assert len(rows) == 4 and all("," in r for r in rows)

    def test_isoset_stable(self, tmp_path, capsys):
        path = write_1d(tmp_path / "s4.txt", [0, 0.25, 1 / 3, 0.5], 1)
        assert main(["isoset", path]) == 0
        data = json.loads(capsys.readouterr().out)
        assert data["alpha"] == pytest.approx(0.75)
        assert data["beta"] == pytest.approx(0.5)
        assert data["regularity"] == 4
        weights = sorted(c["weight_float"] for c in data["classes"])
        assert np.allclose(weights, 0.25)

    def test_isotree(self, tmp_path, capsys):
        path = write_1d(tmp_path / "s4.txt", [0, 0.25, 1 / 3, 0.5], 1)
        assert main(["isotree", path, "--alpha-max", "0.75"]) == 0
        out = capsys.readouterr().out
        data = json.loads(out[: out.index("\nalpha=") + 1])
        sizes = [len(p) for p in data["partitions"]]
        assert sizes[0] == 1 and sizes[-1] == 4
        assert "alpha=" in out

    def test_compare(self, tmp_path, capsys):
        # gap cycles (1,2,2) vs (1,1,3): not related by rotation/reflection
        a = write_1d(tmp_path / "a.txt", [0, 1, 3], 5)
        b = write_1d(tmp_path / "b.txt", [0, 1, 2], 5)
        assert main(["compare", a, a]) == 0
        assert json.loads(capsys.readouterr().out)["isometric"] is True
        assert main(["compare", a, b]) == 0
        assert json.loads(capsys.readouterr().out)["isometric"] is False

    def test_emd_and_dcluster(self, tmp_path, capsys):
        a = write_1d(tmp_path / "a.txt", [0, 1, 3], 4)
        b = write_1d(tmp_path / "b.txt", [0, 1.1, 3], 4)
        assert main(["emd", a, b, "--dr", "exact"]) == 0
        data = json.loads(capsys.readouterr().out)
        assert data["cost"] >= 0
        assert abs(sum(map(sum, data["plan"])) - 1) < 1e-9
        assert main([
            "dcluster", a, b, "--points", "0", "1", "--alpha", "2.0",
        ]) == 0
        data = json.loads(capsys.readouterr().out)
        assert data["d_cluster"] >= 0

    def test_batch_amd_matrix(self, tmp_path, capsys):
        s15 = write_1d(tmp_path / "s15.txt", s15_points(), 15)
        q15 = write_1d(tmp_path / "q15.txt", [0, 1, 3, 4, 6, 8, 9, 12, 14], 15)
        # 4 - S15 is isometric to S15 (reflected and shifted)
        refl = write_1d(
            tmp_path / "r15.txt",
            sorted((4 - p) % 15 for p in s15_points()), 15,
        )
        assert main([
            "batch", s15, q15, refl, "--mode", "amd", "-k", "4",
        ]) == 0
        data = json.loads(capsys.readouterr().out)
        m = np.array(data["matrix"])
        assert m[0, 2] == pytest.approx(0.0, abs=1e-9)
        assert m[0, 1] > 1e-3 and m[1, 2] > 1e-3

    def test_batch_isoset_mode(self, tmp_path, capsys):
        a = write_1d(tmp_path / "a.txt", [0, 1, 3], 5)
        b = write_1d(tmp_path / "b.txt", [0, 1, 2], 5)
        assert main(["batch", a, b, "--mode", "isoset"]) == 0
        data = json.loads(capsys.readouterr().out)
        assert data["matrix"][0][1] == 0.0

    def test_batch_continues_past_bad_file(self, tmp_path, capsys):
        good = write_1d(tmp_path / "good.txt", [0, 1, 3], 4)
        bad = tmp_path / "bad.txt"
        bad.write_text("dim 1\n1\nmotif 0\n", encoding="utf-8")
        assert main([
            "batch", good, str(bad), "--mode", "amd", "-k", "2",
        ]) == 0
        captured = capsys.readouterr()
        data = json.loads(captured.out)
        assert len(data["files"]) == 1
        assert len(data["failures"]) == 1
        assert "warning" in captured.err

    def test_batch_csv_format(self, tmp_path, capsys):
        a = write_1d(tmp_path / "a.txt", [0, 1, 3], 4)
        b = write_1d(tmp_path / "b.txt", [0, 1, 2], 4)
        assert main([
            "batch", a, b, "--mode", "amd", "-k", "2", "--format", "csv",
        ]) == 0
        lines = capsys.readouterr().out.strip().splitlines()
        assert lines[0].startswith("file,")
        assert len(lines) == 3

    def test_tolerance_env_override(self, tmp_path, capsys, monkeypatch):
        a = write_1d(tmp_path / "a.txt", [0, 1, 3], 4)
        b = write_1d(tmp_path / "b.txt", [0, 1.0005, 3], 4)
        monkeypatch.setenv("PERIGEO_TOL", "0.01")
        assert main(["compare", a, b]) == 0
        assert json.loads(capsys.readouterr().out)["isometric"] is True
        monkeypatch.delenv("PERIGEO_TOL")
        assert main(["compare", a, b]) == 0
        assert json.loads(capsys.readouterr().out)["isometric"] is False
