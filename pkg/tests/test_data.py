import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from deepport.data import (
    ReturnsMatrix,
    SplitSpec,
    depth_example,
    format_returns_csv,
    load_returns_csv,
    prices_to_returns,
    simple_returns,
    split,
    synth_market,
    weekly_dates,
    write_returns_csv,
)
from deepport.errors import DataError, DomainError, ParseError, SchemaError, SplitError


def _write(tmp_path, text, name="x.csv"):
    p = tmp_path / name
    p.write_text(text, encoding="utf-8")
    return p


def test_load_wide(tmp_path):
    p = _write(tmp_path, "date,A,B\n2020-01-01,0.01,-0.02\n2020-01-08,0.00,0.03\n2020-01-15,0.02,0.01\n")
    m = load_returns_csv(p)
    assert m.shape == (3, 2)
    assert m.tickers == ("A", "B")
    np.testing.assert_array_equal(m.values, [[0.01, -0.02], [0.0, 0.03], [0.02, 0.01]])


def test_load_wide_sorts_rows(tmp_path):
    p = _write(tmp_path, "date,A\n2020-01-15,3\n2020-01-01,1\n2020-01-08,2\n")
    m = load_returns_csv(p)
    assert m.timestamps == ("2020-01-01", "2020-01-08", "2020-01-15")
    np.testing.assert_array_equal(m.values[:, 0], [1, 2, 3])


def test_load_long(tmp_path):
    p = _write(tmp_path, "date,ticker,value\n2020-01-01,A,0.1\n2020-01-01,B,0.2\n"
                         "2020-01-08,A,0.3\n2020-01-08,B,0.4\n")
    m = load_returns_csv(p, "long")
    assert m.shape == (2, 2)
    np.testing.assert_array_equal(m.values, [[0.1, 0.2], [0.3, 0.4]])


def test_load_long_missing_cell_names_gap(tmp_path):
    p = _write(tmp_path, "date,ticker,value\n2020-01-01,A,0.1\n2020-01-01,B,0.2\n2020-01-08,A,0.3\n")
    with pytest.raises(DataError, match=r"2020-01-08, B"):
        load_returns_csv(p, "long")


def test_malformed_row_reports_line(tmp_path):
    p = _write(tmp_path, "date,A,B\n2020-01-01,0.1,0.2\n2020-01-08,0.3\n")
    with pytest.raises(ParseError) as info:
        load_returns_csv(p)
    assert info.value.line == 3
    p = _write(tmp_path, "date,A\n2020-01-01,0.1\n2020-01-08,abc\n", "y.csv")
    with pytest.raises(ParseError, match="line 3"):
        load_returns_csv(p)


def test_duplicate_ticker_is_schema_error(tmp_path):
    p = _write(tmp_path, "date,A,A\n2020-01-01,0.1,0.2\n2020-01-08,0.3,0.4\n")
    with pytest.raises(SchemaError):
        load_returns_csv(p)


@pytest.mark.parametrize("bad", ["nan", "inf", "-inf"])
def test_non_finite_is_data_error(tmp_path, bad):
    p = _write(tmp_path, f"date,A\n2020-01-01,0.1\n2020-01-08,{bad}\n")
    with pytest.raises(DataError):
        load_returns_csv(p)


def test_matrix_invariants():
    with pytest.raises(SchemaError):
        ReturnsMatrix(np.zeros((1, 2)), ("A", "B"), ("t0",))
    with pytest.raises(DataError):
        ReturnsMatrix(np.zeros((2, 1)), ("A",), ("t1", "t0"))
    with pytest.raises(SchemaError):
        ReturnsMatrix(np.zeros((2, 2)), ("A", "A"), ("t0", "t1"))
    m = ReturnsMatrix(np.zeros((2, 1)), ("A",), ("t0", "t1"))
    with pytest.raises(ValueError):
        m.values[0, 0] = 1.0


@pytest.mark.parametrize("layout", ["wide", "long"])
def test_roundtrip_exact(tmp_path, layout):
    m = synth_market(5, 12, 2, seed=3)
    # restrict to values representable in 10 significant digits
    m = ReturnsMatrix(np.array([[float(f"{v:.10g}") for v in row] for row in m.values]),
                      m.tickers, m.timestamps)
    path = tmp_path / "m.csv"
    write_returns_csv(m, path, layout)
    back = load_returns_csv(path, layout)
    assert back == m
    assert format_returns_csv(back, layout) == path.read_text()


@settings(max_examples=50, deadline=None)
@given(st.lists(st.lists(st.floats(-1, 1, allow_nan=False), min_size=3, max_size=3),
                min_size=2, max_size=6))
def test_roundtrip_text_is_stable(tmp_path_factory, rows):
    m = ReturnsMatrix(np.array(rows), ("A", "B", "C"), weekly_dates(len(rows)))
    text = format_returns_csv(m)
    p = tmp_path_factory.mktemp("rt") / "m.csv"
    p.write_text(text)
    assert format_returns_csv(load_returns_csv(p)) == text


def test_simple_returns_examples():
    np.testing.assert_allclose(simple_returns([100.0, 110.0]), [0.10])
    np.testing.assert_array_equal(simple_returns([50.0, 50.0, 50.0]), [0.0, 0.0])
    # hand computation: 90/100 - 1 = -0.10, 99/90 - 1 = 0.10
    np.testing.assert_allclose(simple_returns([100.0, 90.0, 99.0]), [-0.10, 0.10])


def test_prices_to_returns_matrix():
    prices = ReturnsMatrix(np.array([[100.0, 50.0], [90.0, 50.0], [99.0, 50.0]]), ("A", "B"),
                           ("d0", "d1", "d2"))
    r = prices_to_returns(prices)
    assert r.T == 2 and r.timestamps == ("d1", "d2")
    np.testing.assert_allclose(r.values, [[-0.1, 0.0], [0.1, 0.0]])


def test_prices_to_returns_rejects_nonpositive():
    prices = ReturnsMatrix(np.array([[1.0], [0.0], [2.0]]), ("A",), ("d0", "d1", "d2"))
    with pytest.raises(DomainError):
        prices_to_returns(prices)


@given(st.floats(0.5, 2.0), st.integers(3, 20))
def test_geometric_prices_give_constant_return(g, n):
    p = 10.0 * g ** np.arange(n)
    r = simple_returns(p)
    assert r.shape == (n - 1,)
    np.testing.assert_allclose(r, g - 1.0, rtol=1e-12, atol=1e-12)


def _ten_rows():
    return ReturnsMatrix(np.arange(20.0).reshape(10, 2), ("A", "B"), [f"t{i:02d}" for i in range(1, 11)])


def test_split_shapes():
    m = _ten_rows()
    cal, val = split(m, SplitSpec((None, "t07"), ("t07", None)))
    assert cal.shape == (6, 2) and val.shape == (4, 2)
    assert cal.tickers == val.tickers == m.tickers
    assert not set(cal.timestamps) & set(val.timestamps)
    np.testing.assert_array_equal(np.vstack([cal.values, val.values]), m.values)


def test_split_gap_rows_are_dropped():
    m = _ten_rows()
    cal, val = split(m, SplitSpec(("t01", "t06"), ("t08", None)))
    assert cal.timestamps == ("t01", "t02", "t03", "t04", "t05")
    assert val.timestamps == ("t08", "t09", "t10")


def test_split_errors():
    with pytest.raises(SplitError):
        SplitSpec((None, "t07"), ("t05", None))
    with pytest.raises(SplitError):
        SplitSpec(("t07", None), (None, "t03"))
    with pytest.raises(SplitError):
        split(_ten_rows(), SplitSpec((None, "t02"), ("t02", None)))


def test_synth_is_deterministic():
    a = synth_market(8, 30, 2, seed=11)
    b = synth_market(8, 30, 2, seed=11)
    assert a == b
    assert synth_market(8, 30, 2, seed=12) != a


def test_synth_drawdown_is_additive():
    base = synth_market(10, 30, 2, seed=5)
    hit = synth_market(10, 30, 2, drawdown=(3, 15, -0.5), seed=5)
    diff = hit.values - base.values
    assert diff[15, 3] == pytest.approx(-0.5, abs=1e-15)
    diff[15, 3] = 0.0
    assert not diff.any()


def test_synth_rank_one_noiseless_is_perfectly_correlated():
    m = synth_market(6, 40, 1, seed=2, noise_scale=0.0)
    c = np.corrcoef(m.values.T)
    np.testing.assert_allclose(np.abs(c), 1.0, atol=1e-12)


def test_synth_validation():
    with pytest.raises(DomainError):
        synth_market(5, 20, 6)
    with pytest.raises(DomainError):
        synth_market(5, 20, 2, drawdown=(5, 0, -0.1))
    with pytest.raises(DomainError):
        synth_market(5, 20, 2, drawdown=(0, 20, -0.1))


def test_depth_example_structure():
    m = depth_example()
    assert m.tickers == ("B", "X2", "X3") and m.T == 30
    B, X2, X3 = m.values.T
    assert B[15] == pytest.approx(0.06)
    assert X3[15] == pytest.approx(B[15] - 0.17)
    assert np.all(np.delete(B, 15) >= 0.07)
    assert depth_example(seed=4) == depth_example(seed=4)
    with pytest.raises(DomainError):
        depth_example(t_star=30)
