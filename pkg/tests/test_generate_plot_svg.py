import pytest

from generate_plot_svg import emit_plot, load_rows


@pytest.fixture
def numerics_csv(tmp_path):
    path = tmp_path / "numerics.csv"
    path.write_text(
        "# config_hash: abc\n"
        "# seed: 1\n"
        "n,t,mean_grad_inf_norm,std_error,mean_entropy_2q,samples\n"
        "4,0,0.5,0.01,0,10\n"
        "4,1,0.3,0.01,0.4,10\n"
        "6,0,0.5,0.01,0,10\n"
        "6,1,0.2,0.01,0.6,10\n"
    )
    return path


def test_one_group_per_series(numerics_csv):
    svg = emit_plot(numerics_csv, "numerics").read_text()
    assert svg.count('id="series-4"') == 1
    assert svg.count('id="series-6"') == 1


def test_output_is_byte_identical(numerics_csv, tmp_path):
    a = emit_plot(numerics_csv, "numerics", tmp_path / "a.svg").read_bytes()
    b = emit_plot(numerics_csv, "numerics", tmp_path / "b.svg").read_bytes()
    assert a == b


def test_log_scale(numerics_csv, tmp_path):
    linear = emit_plot(numerics_csv, "numerics", tmp_path / "lin.svg").read_bytes()
    log = emit_plot(numerics_csv, "numerics", tmp_path / "log.svg", log_y=True).read_bytes()
    assert linear != log


def test_single_series_kind(tmp_path):
    path = tmp_path / "discriminate.csv"
    path.write_text("iteration,loss\n0,0.6\n1,0.5\n2,0.45\n")
    assert 'id="series-0"' in emit_plot(path, "discriminate").read_text()


def test_empty_csv_writes_nothing(tmp_path):
    path = tmp_path / "gde_sff.csv"
    path.write_text("# seed: 1\nk,t,empirical_mean,std_error,analytic\n")
    with pytest.raises(ValueError):
        emit_plot(path, "gde-sff")
    assert list(tmp_path.glob("*.svg")) == []


def test_schema_mismatch(numerics_csv, tmp_path):
    with pytest.raises(ValueError):
        emit_plot(numerics_csv, "gde-sff")
    with pytest.raises(ValueError):
        load_rows(numerics_csv, "histogram")
    assert list(tmp_path.glob("*.svg")) == []
