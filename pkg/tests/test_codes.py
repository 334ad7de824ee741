import itertools

import numpy as np
import pytest

from sosdecoder import CssCode, build_code, build_color_code, build_rotated_surface, gf2
from sosdecoder.codes import validate


def _min_logical_weight(code, kind="x"):
    """Minimum weight over all nontrivial logical representatives, by brute force."""
    if kind == "x":
        ker, stab = code.hz, code.hx
    else:
        ker, stab = code.hx, code.hz
    best = code.n
    for bits in itertools.product([0, 1], repeat=code.n):
        v = np.array(bits, dtype=np.uint8)
        if v.any() and not gf2.matvec(ker, v).any() and not gf2.in_rowspace(stab, v):
            best = min(best, int(v.sum()))
    return best


def test_surface_d3_layout():
    code = build_rotated_surface(3)
    assert code.n == 9 and code.k == 1
    assert code.hx.shape == (4, 9) and code.hz.shape == (4, 9)
    assert gf2.rank(code.hz) == 4
    assert set(code.hz.sum(axis=1).tolist()) <= {2, 4}
    assert validate(code) == []


@pytest.mark.parametrize("d", [3, 5])
def test_surface_parameters(d):
    code = build_rotated_surface(d)
    assert code.n == d * d and code.k == 1
    assert validate(code) == []


def test_surface_distance_three():
    code = build_rotated_surface(3)
    assert _min_logical_weight(code, "x") == 3
    assert _min_logical_weight(code, "z") == 3


def test_color_d3():
    code = build_color_code(3)
    assert code.n == 7 and code.hx.shape[0] == 3
    assert np.array_equal(code.hx, code.hz)
    assert set(code.hx.sum(axis=1).tolist()) == {4}
    assert validate(code) == []
    assert _min_logical_weight(code) == 3


@pytest.mark.parametrize("d", [5, 7])
def test_color_larger(d):
    code = build_color_code(d)
    assert np.array_equal(code.hx, code.hz)
    assert code.k == 1 and validate(code) == []
    assert code.hx.sum(axis=1).max() == 6


def test_logicals():
    code = build_rotated_surface(3)
    assert not gf2.matmul(code.hz, code.logicals_x.T).any()
    assert gf2.matmul(code.logicals_x, code.logicals_z.T).tolist() == [[1]]


def test_validate_reports_broken_codes():
    code = build_rotated_surface(3)
    hx = code.hx.copy()
    hx[0, np.flatnonzero(hx[0])[0]] ^= 1
    broken = CssCode("surface", 3, hx, code.hz, code.logicals_x, code.logicals_z)
    assert any("commutation" in v for v in validate(broken))
    empty = CssCode("surface", 3, code.hx, code.hz, np.zeros((0, 9)), np.zeros((0, 9)))
    assert any("missing" in v for v in validate(empty))


def test_json_roundtrip(tmp_path):
    code = build_code("color", 5)
    path = tmp_path / "c.json"
    code.save(path)
    back = CssCode.load(path)
    assert np.array_equal(back.hx, code.hx) and np.array_equal(back.logicals_z, code.logicals_z)


def test_bad_arguments():
    with pytest.raises(ValueError):
        build_code("toric", 3)
    with pytest.raises(ValueError):
        build_rotated_surface(1)
    with pytest.raises(ValueError):
        build_color_code(4)
