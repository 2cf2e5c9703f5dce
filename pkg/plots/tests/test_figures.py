import os

import pytest

from knnlab_plots import (ConfigError, FigureSpec, SchemaError,
                          parse_figure_spec, read_summary, render,
                          render_standard)
from knnlab_plots.cli import main

HERE = os.path.dirname(__file__)
DATA = os.path.join(HERE, "data")
GOLDEN = os.path.join(HERE, "golden")
COMPARE = os.path.join(DATA, "compare_summary.csv")
SCAN = os.path.join(DATA, "scan_summary.csv")


def _golden_check(tmp_path, name, spec_kwargs):
    out = str(tmp_path / name)
    render(FigureSpec(output=out, **spec_kwargs))
    with open(out, "rb") as fh:
        got = fh.read()
    with open(os.path.join(GOLDEN, name), "rb") as fh:
        want = fh.read()
    assert got == want, f"{name} differs from golden file"


class TestGoldenFiles:
    def test_regret_vs_n(self, tmp_path):
        _golden_check(tmp_path, "regret_vs_n.png",
                      dict(inputs=(COMPARE,), kind="regret_vs_n"))

    def test_ratio_vs_n(self, tmp_path):
        _golden_check(tmp_path, "ratio_vs_n.png",
                      dict(inputs=(COMPARE,), kind="ratio_vs_n", logy=False))

    def test_regret_vs_omega(self, tmp_path):
        _golden_check(tmp_path, "regret_vs_omega.png",
                      dict(inputs=(SCAN,), kind="regret_vs_omega"))

    def test_render_twice_identical(self, tmp_path):
        spec1 = FigureSpec(inputs=(COMPARE,), kind="regret_vs_n",
                           output=str(tmp_path / "a.png"))
        spec2 = FigureSpec(inputs=(COMPARE,), kind="regret_vs_n",
                           output=str(tmp_path / "b.png"))
        render(spec1)
        render(spec2)
        assert (tmp_path / "a.png").read_bytes() == (tmp_path / "b.png").read_bytes()


class TestSchema:
    def test_read_summary_roundtrip(self):
        rows = read_summary(COMPARE)
        assert {r.variant for r in rows} == {"knn", "pre1nn"}
        assert all(r.metric == "regret" for r in rows)

    def test_missing_column_named(self, tmp_path):
        p = tmp_path / "bad.csv"
        p.write_text("experiment_id,variant,metric,d,n,k\nexp,knn,regret,3,128,14\n")
        with pytest.raises(SchemaError, match="omega"):
            read_summary(str(p))

    def test_empty_csv_no_file_written(self, tmp_path):
        p = tmp_path / "empty.csv"
        p.write_text("experiment_id,variant,metric,d,n,k,omega,"
                     "corruption_mode,reps,mean,se\n")
        out = tmp_path / "fig.png"
        with pytest.raises(SchemaError, match="no data rows"):
            render(FigureSpec(inputs=(str(p),), kind="regret_vs_n",
                              output=str(out)))
        assert not out.exists()

    def test_non_numeric_cell_located(self, tmp_path):
        p = tmp_path / "bad.csv"
        p.write_text("experiment_id,variant,metric,d,n,k,omega,"
                     "corruption_mode,reps,mean,se\n"
                     "exp,knn,regret,3,oops,14,0.0,random,4,0.1,0.01\n")
        with pytest.raises(SchemaError, match="line 2"):
            read_summary(str(p))

    def test_ratio_needs_baseline(self, tmp_path):
        out = tmp_path / "fig.png"
        with pytest.raises(SchemaError, match="baseline"):
            render(FigureSpec(inputs=(SCAN,), kind="ratio_vs_n",
                              output=str(out), baseline="pre1nn"))

    def test_unknown_kind_rejected(self):
        with pytest.raises(ValueError, match="kind"):
            FigureSpec(inputs=(COMPARE,), kind="pie", output="x.png")


class TestRenderStandard:
    def test_compare_bundle(self, tmp_path):
        written = render_standard(COMPARE, str(tmp_path))
        names = sorted(os.path.basename(p) for p in written)
        assert names == ["ratio_vs_n.png", "regret_vs_n.png"]
        assert all(os.path.getsize(p) > 0 for p in written)

    def test_scan_bundle(self, tmp_path):
        written = render_standard(SCAN, str(tmp_path))
        assert [os.path.basename(p) for p in written] == ["regret_vs_omega.png"]


class TestConfigAndCli:
    def _spec_file(self, tmp_path, text):
        p = tmp_path / "fig.cfg"
        p.write_text(text)
        return str(p)

    def test_parse_figure_spec(self, tmp_path):
        path = self._spec_file(tmp_path, f"""
            # a comment
            input = {COMPARE}
            kind = regret_vs_n
            output = {tmp_path}/out.png
            logy = false
            title = regret curves
        """)
        spec = parse_figure_spec(path)
        assert spec.kind == "regret_vs_n"
        assert spec.logx and not spec.logy
        assert spec.title == "regret curves"

    def test_parse_errors(self, tmp_path):
        with pytest.raises(ConfigError, match="key = value"):
            parse_figure_spec(self._spec_file(tmp_path, "nonsense line\n"))
        with pytest.raises(ConfigError, match="unknown key"):
            parse_figure_spec(self._spec_file(tmp_path, "shape = round\n"))
        with pytest.raises(ConfigError, match="kind"):
            parse_figure_spec(self._spec_file(tmp_path, f"input = {COMPARE}\n"))

    def test_cli_renders(self, tmp_path, capsys):
        path = self._spec_file(tmp_path, f"input = {COMPARE}\n"
                                         f"kind = regret_vs_n\n"
                                         f"output = {tmp_path}/out.png\n")
        assert main(["render", "--spec", path]) == 0
        assert (tmp_path / "out.png").exists()

    def test_cli_schema_mismatch_exit_code(self, tmp_path, capsys):
        bad = tmp_path / "bad.csv"
        bad.write_text("not,the,schema\n1,2,3\n")
        path = self._spec_file(tmp_path, f"input = {bad}\n"
                                         f"kind = regret_vs_n\n"
                                         f"output = {tmp_path}/out.png\n")
        assert main(["render", "--spec", path]) == 2
        assert "missing column" in capsys.readouterr().err
        assert not (tmp_path / "out.png").exists()
