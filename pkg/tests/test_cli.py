import json
import math
import re
import subprocess
import sys

import pytest

from expweights.cli import parse_and_dispatch
from expweights.harness import ResultTable, THEOREM_A_COLUMNS
from expweights.serialize import emit_csv, parse_csv, rate_plot_svg


def run(argv, capsys):
    code = parse_and_dispatch([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


# ---------------------------------------------------------------- exp


def test_theorem_a_happy_path(tmp_path, capsys):
    out = tmp_path / "a.csv"
    code, _, _ = run(["exp", "theorem-a", "--n", 101, "--temperature", 0.1, "--trials", 20000, "--seed", 42,
                      "--out", out], capsys)
    assert code == 0
    lines = out.read_bytes().split(b"\n")
    assert lines[0].decode() == ",".join(THEOREM_A_COLUMNS)
    assert lines[-1] == b"" and b"\r" not in out.read_bytes()
    row = dict(zip(THEOREM_A_COLUMNS, lines[1].decode().split(",")))
    assert row["n"] == "101" and row["seed"] == "42" and row["trials"] == "20000"
    assert float(row["exact_mean_excess"]) == pytest.approx(0.004261875354321453, rel=1e-11)


def test_even_n_is_a_config_error(capsys):
    code, out, err = run(["exp", "theorem-a", "--n", 100, "--temperature", 0.1, "--trials", 10, "--seed", 1], capsys)
    assert code == 2 and out == ""
    assert "n must be odd and ≥ 5" in err


def test_missing_seed_and_unknown_flag(capsys):
    assert run(["exp", "theorem-a", "--n", 101], capsys)[0] == 2
    code, _, err = run(["exp", "theorem-a", "--n", 101, "--seed", 1, "--bogus", 3], capsys)
    assert code == 2 and "usage" in err
    assert run([], capsys)[0] == 2


def test_csv_goes_to_stdout_without_out(capsys):
    code, out, err = run(["exp", "theorem-a", "--n", "101,201", "--trials", 50, "--seed", 3], capsys)
    assert code == 0
    table = parse_csv(out)
    assert table.column("n") == [101, 201] and table.column("T") == [0.1, 0.1]
    assert "sqrt_n_excess" in err


def test_unwritable_output_is_runtime_error(tmp_path, capsys):
    bad = tmp_path / "missing" / "a.csv"
    code, _, err = run(["exp", "theorem-a", "--n", 101, "--trials", 10, "--seed", 1, "--out", bad], capsys)
    assert code == 1 and "error" in err


def test_config_precedence(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"n": "101", "temperature": 0.5, "trials": 30, "seed": 9}))
    out = tmp_path / "o.csv"
    # file values used when no flag is given
    assert run(["exp", "theorem-a", "--config", cfg, "--out", out], capsys)[0] == 0
    row = parse_csv(out.read_text()).rows[0]
    assert (row["T"], row["trials"], row["seed"]) == (0.5, 30, 9)
    # flags win over the file
    assert run(["exp", "theorem-a", "--config", cfg, "--trials", 40, "--out", out], capsys)[0] == 0
    row = parse_csv(out.read_text()).rows[0]
    assert (row["T"], row["trials"]) == (0.5, 40)
    # and built-in defaults fill what neither gives
    cfg.write_text(json.dumps({"n": 101, "seed": 9, "trials": 5}))
    assert run(["exp", "theorem-a", "--config", cfg, "--out", out], capsys)[0] == 0
    assert parse_csv(out.read_text()).rows[0]["T"] == 0.1


def test_config_file_errors(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"n": 101, "seed": 1, "colour": "red"}))
    assert run(["exp", "theorem-a", "--config", cfg], capsys)[0] == 2
    cfg.write_text("{not json")
    assert run(["exp", "theorem-a", "--config", cfg], capsys)[0] == 2
    assert run(["exp", "theorem-a", "--config", tmp_path / "nope.json"], capsys)[0] == 2


def test_config_file_is_not_modified(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    text = json.dumps({"n": 101, "seed": 1, "trials": 5})
    cfg.write_text(text)
    run(["exp", "theorem-a", "--config", cfg, "--out", tmp_path / "o.csv"], capsys)
    assert cfg.read_text() == text


def test_constants_flag(tmp_path, capsys):
    out = tmp_path / "c.csv"
    code, _, _ = run(["exp", "theorem-c", "--n", "100,400", "--temperature", 0.8, "--trials", 50, "--seed", 1,
                      "--constants", "lambda_c=1.0,kappa1=1.0", "--out", out], capsys)
    assert code == 0
    base = parse_csv(out.read_text()).rows
    run(["exp", "theorem-c", "--n", "100,400", "--temperature", 0.8, "--trials", 50, "--seed", 1,
         "--constants", "lambda_c=0.2", "--out", out], capsys)
    strict = parse_csv(out.read_text()).rows
    assert all(s["lambda_x"] < b["lambda_x"] for s, b in zip(strict, base))
    # unknown key for the experiment, malformed pair
    assert run(["exp", "theorem-b", "--n", 1000, "--seed", 1, "--constants", "kappa1=1"], capsys)[0] == 2
    assert run(["exp", "theorem-c", "--n", 100, "--seed", 1, "--constants", "lambda_c"], capsys)[0] == 2


def test_theorem_b_and_json(tmp_path, capsys):
    js = tmp_path / "b.json"
    code, out, _ = run(["exp", "theorem-b", "--n", 1000, "--trials", 16, "--seed", 2, "--json", js], capsys)
    assert code == 0
    doc = json.loads(js.read_text())
    assert doc["rows"][0]["implication_violations"] == 0
    assert doc["columns"] == parse_csv(out).columns


def test_plot_needs_two_points(tmp_path, capsys):
    code, _, err = run(["exp", "theorem-a", "--n", 101, "--trials", 10, "--seed", 1, "--plot", tmp_path / "p.svg"],
                       capsys)
    assert code == 1 and "two" in err
    code, _, _ = run(["exp", "theorem-a", "--n", "101,401", "--trials", 10, "--seed", 1,
                      "--plot", tmp_path / "p.svg"], capsys)
    assert code == 0 and (tmp_path / "p.svg").read_text().startswith("<?xml")


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "expweights", "psi", "--deltas", "0,1.5,3", "--r", "1"],
                          capture_output=True, text=True)
    assert proc.returncode == 0 and proc.stdout == "1.2130\n"


# ---------------------------------------------------------------- small subcommands


def test_psi_example(capsys):
    assert run(["psi", "--deltas", "0,1.5,3", "--r", 1], capsys)[:2] == (0, "1.2130\n")
    code, out, _ = run(["psi", "--deltas", "0,1.5,3", "--r", 1, "--verbose"], capsys)
    assert json.loads(out.splitlines()[1])["1"] == 1
    assert run(["psi", "--deltas", "0.1,1", "--r", 1], capsys)[0] == 2      # no zero entry
    assert run(["psi", "--deltas", "0,1", "--r", 0], capsys)[0] == 2


def test_weights(capsys):
    code, out, _ = run(["weights", "--risks", "0,0.1", "--n", 10, "--temperature", 1], capsys)
    assert code == 0
    w = [float(v) for v in out.strip().split(",")]
    assert w[0] == pytest.approx(1 / (1 + math.exp(-1)), rel=1e-9)
    assert run(["weights", "--risks", "0.3,0.1,0.1", "--n", 5, "--method", "erm"], capsys)[1] == "2,3\n"
    assert run(["weights", "--risks", "0,nan", "--n", 5], capsys)[0] == 2
    assert run(["weights", "--risks", "0,1", "--n", 5, "--temperature", 0], capsys)[0] == 2


def test_gamma1(capsys):
    code, out, _ = run(["gamma1", "--ell", 1, "--level-n", 4, "--kind", "uniform"], capsys)
    assert code == 0 and float(out) == pytest.approx(math.sqrt(3) / 2, rel=1e-9)
    assert run(["gamma1", "--ell", 3, "--level-n", 10, "--kind", "rademacher"], capsys)[0] == 2
    assert run(["gamma1", "--ell", 3, "--level-n", 10, "--method", "mc"], capsys)[0] == 2     # no seed
    code, out, _ = run(["gamma1", "--ell", 1000, "--level-n", 1e4, "--inner-n", 10000, "--checks"], capsys)
    report = json.loads(out)
    assert report["part2_premise"] is True and report["part3_holds"] is True


def test_be_check(capsys):
    code, out, _ = run(["be-check", "--kind", "uniform", "--inner-n", 4, "--samples", 100000, "--seed", 1], capsys)
    assert code == 0 and out.strip().endswith("within=yes")
    assert run(["be-check", "--inner-n", 4, "--samples", 1000, "--seed", 1], capsys)[0] == 2
    assert run(["be-check", "--inner-n", 4], capsys)[0] == 2


# ---------------------------------------------------------------- serializers


def _table(rows):
    t = ResultTable(["n", "mean_excess", "label"])
    for n, v in rows:
        t.add(n=n, mean_excess=v, label="x")
    return t


def test_csv_round_trip(tmp_path):
    t = _table([(100, 1 / 3), (400, math.pi * 1e-7), (1600, 2.5e-300)])
    path = tmp_path / "t.csv"
    emit_csv(t, path)
    back = parse_csv(path.read_text(encoding="utf-8"))
    assert back.columns == t.columns and back.rows == t.rows
    assert path.read_text(encoding="utf-8") == t.to_csv()


def test_empty_table_is_header_only(tmp_path):
    path = tmp_path / "e.csv"
    emit_csv(ResultTable(["a", "b"]), path)
    assert path.read_bytes() == b"a,b\n"


def test_csv_decimal_point_ignores_locale(tmp_path, monkeypatch):
    import locale
    for name in ("de_DE.UTF-8", "fr_FR.UTF-8"):
        try:
            locale.setlocale(locale.LC_NUMERIC, name)
            break
        except locale.Error:
            continue
    try:
        text = _table([(100, 0.5)]).to_csv()
    finally:
        locale.setlocale(locale.LC_NUMERIC, "C")
    assert "0.5" in text and "0,5" not in text


def _viewbox(svg):
    return [float(v) for v in re.search(r'viewBox="([^"]+)"', svg).group(1).split()]


def test_svg_deterministic_and_self_contained():
    t = _table([(100, 0.01), (400, 0.0026), (1600, 0.0006)])
    a, b = rate_plot_svg(t), rate_plot_svg(_table([(100, 0.01), (400, 0.0026), (1600, 0.0006)]))
    assert a == b
    assert "href" not in a and "<image" not in a


def test_svg_viewbox_margin():
    pts = [(100, 0.01), (400, 0.0026), (1600, 0.0006)]
    x0, y0, w, h = _viewbox(rate_plot_svg(_table(pts)))
    lx = [math.log10(n) for n, _ in pts]
    ly = [-math.log10(v) for _, v in pts]
    dx, dy = max(lx) - min(lx), max(ly) - min(ly)
    assert x0 == pytest.approx(min(lx) - 0.05 * dx, abs=1e-6)
    assert x0 + w == pytest.approx(max(lx) + 0.05 * dx, abs=1e-6)
    assert y0 == pytest.approx(min(ly) - 0.05 * dy, abs=1e-6)
    assert y0 + h == pytest.approx(max(ly) + 0.05 * dy, abs=1e-6)


def test_svg_reference_line_through_first_point():
    pts = [(100, 0.01), (400, 0.0026), (1600, 0.0006)]
    svg = rate_plot_svg(_table(pts))
    fx, fy = 2.0, -math.log10(0.01)
    lines = re.findall(r'<line[^>]*data-slope="([^"]+)" x1="([^"]+)" y1="([^"]+)" x2="([^"]+)" y2="([^"]+)"', svg)
    slopes = {float(s): tuple(map(float, v)) for s, *v in lines}
    assert set(slopes) == {-0.5, -1.0}
    x1, y1, x2, y2 = slopes[-1.0]
    assert (x1, y1) == pytest.approx((fx, fy), abs=1e-6)
    # slope -1 in data space is +1 in the y-negated drawing
    assert (y2 - y1) / (x2 - x1) == pytest.approx(1.0, abs=1e-5)


def test_svg_needs_two_points():
    with pytest.raises(ValueError):
        rate_plot_svg(_table([(100, 0.01)]))
    with pytest.raises(ValueError):
        rate_plot_svg(_table([(100, 0.01), (400, -1.0)]))
