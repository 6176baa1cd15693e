import numpy as np
import pytest

from hyperrag.chains import PseudoTriple as T
from hyperrag.dde import DdeConfig, init_indicator, propagate, triple_encoding


def test_indicator_marks_heads():
    assert init_indicator([T("A", "f", "B")]) == {"A": 1.0, "B": 0.0}
    full = {T(h, "f", t) for h in "ABC" for t in "ABC" if h != t}
    assert init_indicator(full) == {"A": 1.0, "B": 1.0, "C": 1.0}


def test_single_edge_channels():
    table = propagate([T("A", "f", "B")], DdeConfig(1))
    assert table["A"].tolist() == [1.0, 0.0, 0.0]
    assert table["B"].tolist() == [0.0, 1.0, 0.0]
    assert "Z" not in table


def test_mean_of_in_neighbours():
    table = propagate([T("A", "f", "B"), T("C", "g", "B")], DdeConfig(1), indicator={"A": 1.0})
    assert table["B"][1] == 0.5


def test_symmetric_all_ones_stay_ones():
    full = {T(h, "f", t) for h in "ABC" for t in "ABC" if h != t}
    table = propagate(full, DdeConfig(3))
    assert all(np.all(v == 1.0) for v in table.values())


def test_dimensions():
    cfg = DdeConfig(2)
    assert cfg.triple_dim == 10
    table = propagate([T("A", "f", "B"), T("B", "g", "C")], cfg)
    assert triple_encoding(table, T("A", "f", "B")).shape == (10,)
    with pytest.raises(ValueError):
        DdeConfig(0)
    with pytest.raises(KeyError):
        triple_encoding(table, T("A", "f", "Q"))


def test_order_independent_bitwise():
    rng = np.random.default_rng(0)
    triples = [T(f"e{a}", f"f{a % 3}", f"e{b}") for a, b in rng.integers(12, size=(40, 2)) if a != b]
    a = propagate(triples, DdeConfig(3))
    b = propagate(list(reversed(triples)), DdeConfig(3))
    assert a.keys() == b.keys()
    assert all(a[k].tobytes() == b[k].tobytes() for k in a)
