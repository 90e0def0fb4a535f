import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bcodex.codes import binomial_code, cat_code, gkp_approx_code
from bcodex.fock_core import FockOperator, FockVector, displacement
from bcodex.serialize import (
    code_from_dict,
    code_to_dict,
    csv_text,
    dumps,
    fmt17,
    fock_operator_from_dict,
    fock_operator_to_dict,
    fock_vector_from_dict,
    fock_vector_to_dict,
    read_csv,
)

doubles = st.floats(allow_nan=False, allow_infinity=False, width=64)


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
@given(st.lists(st.tuples(doubles, doubles), min_size=4, max_size=4))
@settings(max_examples=50, deadline=None)
def test_vector_round_trip_bit_exact(pairs):
    amps = np.array([complex(a, b) for a, b in pairs])
    vec = FockVector((2, 2), amps)
    back = fock_vector_from_dict(json.loads(dumps(fock_vector_to_dict(vec))))
    assert back.cutoffs == (2, 2)
    assert np.array_equal(back.amplitudes.view(np.uint64), vec.amplitudes.view(np.uint64))


def test_operator_round_trip():
    op = displacement(0.3, -0.2, 12)
    back = fock_operator_from_dict(json.loads(dumps(fock_operator_to_dict(op))))
    assert isinstance(back, FockOperator)
    assert np.array_equal(back.matrix, op.matrix)


def test_document_shape():
    doc = fock_vector_to_dict(FockVector((3,), [1, 0, 0]))
    assert set(doc) == {"cutoffs", "re", "im", "format_version"}
    assert doc["format_version"] == 1


def test_code_round_trip():
    for code in (binomial_code(2, 1, 10), cat_code(2, 1.5, 30), gkp_approx_code(0.4, 120)):
        back = code_from_dict(json.loads(dumps(code_to_dict(code))))
        assert back.family == code.family and back.params == code.params
        assert np.array_equal(back.isometry, code.isometry)


def test_bad_version_rejected():
    doc = fock_vector_to_dict(FockVector((2,), [1, 0]))
    doc["format_version"] = 2
    try:
        fock_vector_from_dict(doc)
    except ValueError:
        return
    raise AssertionError("expected ValueError")


def test_dumps_is_stable_and_nan_safe():
    text = dumps({"b": 1, "a": [np.float64(0.1), math.nan, np.int64(3)]})
    assert text == dumps({"a": [0.1, math.nan, 3], "b": 1})
    assert text.endswith("\n") and "\r" not in text
    assert json.loads(text)["a"][1] == "nan"


def test_csv_layout():
    text = csv_text(("chi", "p"), [(0.1, math.nan), (2, 1e-300)], {"seed": 7})
    lines = text.splitlines()
    assert lines[0] == "# seed: 7"
    assert lines[1] == "chi,p"
    assert lines[2] == "0.10000000000000001,nan"
    header, rows = read_csv(text)
    assert header == ["chi", "p"]
    assert rows[1] == [2.0, 1e-300]


@given(doubles)
def test_fmt17_round_trips(x):
    assert float(fmt17(x)) == x
