import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from maxrep.extract import ExtremeEventSet
from maxrep.grid import Field, Grid
from maxrep import io


@settings(max_examples=30)
@given(st.integers(1, 6), st.integers(1, 4),
       st.floats(-100, 100), st.floats(1e-3, 10), st.data())
def test_field_csv_round_trip_is_bitwise(n1, n2, lo, step, data):
    g = Grid((lo, 0.0), (lo + (n1 - 1) * step, (n2 - 1) * 0.3), (step, 0.3))
    vals = data.draw(arrays(float, g.shape, elements=st.floats(allow_nan=False, allow_infinity=False)))
    back = io.parse_field_csv(io.format_field_csv(Field(g, vals, kind="profile")))
    assert back.grid == g and back.kind == "profile"
    assert np.array_equal(back.values, vals)


@pytest.mark.parametrize("text,msg", [
    ("1,2\n", "before grid"),
    ("# grid: 1 0.0 1.0 1.0\n0.0,1.0\n", "rows"),
    ("# grid: 1 0.0 1.0\n", "numbers"),
    ("# grid: 1 0.0 1.0 1.0\n0.0,1.0,2.0\n1.0,1.0\n", "columns"),
])
def test_field_csv_errors(text, msg):
    with pytest.raises(ValueError, match=msg):
        io.parse_field_csv(text)


def test_manifest_round_trip(tmp_path):
    m = io.RunManifest("simulate", {"grid": "0:1:1"}, 7, "0.1.0", outputs=["rep-0.csv"],
                       counters={"replicates": 1}, info={"x": np.float64(0.5)})
    m.write(tmp_path)
    back = io.RunManifest.read(tmp_path)
    assert back.seed == 7 and back.info == {"x": 0.5} and back.outputs == ["rep-0.csv"]
    with pytest.raises(FileExistsError):
        io.prepare_output_dir(tmp_path)


def test_event_set_round_trip(tmp_path):
    K = Grid.parse("-1:1:0.5")
    ev = ExtremeEventSet("shapes", K, np.random.default_rng(0).random((3, 5)), [1.5, 2.0, 3.0],
                         [4, 9, 11], 10.0, anchor={"K": K.spec()}, dropped={"window_outside_grid": 1})
    names, meta = io.write_event_set(tmp_path, ev)
    io.RunManifest("extract", {}, None, "0", outputs=names, info={"events": meta}).write(tmp_path)
    back = io.read_event_set(tmp_path)
    assert np.array_equal(back.samples, ev.samples)
    assert list(back.selection) == [4, 9, 11] and back.dropped == ev.dropped
    assert back.grid == K


def test_read_replicates_requires_files(tmp_path):
    io.RunManifest("simulate", {}, 1, "0").write(tmp_path)
    with pytest.raises(ValueError):
        io.read_replicates(tmp_path)
