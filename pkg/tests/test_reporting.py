import json
import math
from dataclasses import dataclass

import numpy as np
from hypothesis import given
from hypothesis import strategies as st

from attractor_lab.reporting import csv_text, dumps, to_plain, write_csv, write_json


@dataclass
class Pair:
    left: float
    right: np.ndarray


class TestPlain:
    def test_non_finite_floats_become_strings(self):
        assert to_plain([math.inf, -math.inf, math.nan, 1.5]) == ["inf", "-inf", "nan", 1.5]

    def test_numpy_and_dataclasses(self):
        out = to_plain(Pair(np.float64(0.25), np.array([1, 2])))
        assert out == {"left": 0.25, "right": [1, 2]}
        assert to_plain({np.int64(3): np.bool_(True)}) == {"3": True}
        assert to_plain(frozenset({3, 1})) == [1, 3]

    def test_to_dict_is_preferred(self):
        class Thing:
            def to_dict(self):
                return {"x": np.float32(0.5)}

        assert to_plain(Thing()) == {"x": 0.5}


class TestDumps:
    def test_sorted_and_strict(self):
        text = dumps({"b": 1, "a": math.nan})
        assert text.index('"a"') < text.index('"b"')
        assert json.loads(text) == {"a": "nan", "b": 1}

    @given(st.dictionaries(st.text(max_size=5), st.floats(allow_nan=True) | st.integers()))
    def test_deterministic(self, d):
        assert dumps(d) == dumps(dict(reversed(list(d.items()))))


class TestCsv:
    def test_float_round_trip(self):
        text = csv_text(["t", "v"], [(0, 0.1), (1, np.float64(1 / 3))])
        rows = [line.split(",") for line in text.strip().split("\n")]
        assert rows[0] == ["t", "v"]
        assert float(rows[2][1]) == 1 / 3

    def test_writers_create_directories(self, tmp_path):
        p = write_json({"k": 1}, tmp_path / "x" / "r.json")
        q = write_csv(tmp_path / "y" / "r.csv", ["a"], [(1,)])
        assert json.loads(p.read_text()) == {"k": 1}
        assert q.read_text() == "a\n1\n"
