import csv
import json

import numpy as np
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from cxlegendre import Box, Euclidean, GaussianBump, SampledFunction, estimate_neighborhood
from cxlegendre.export import read_field, write_field, write_map, write_series
from cxlegendre.gradient_map import gradient_map

BOX = Box.cube(1, 1.0, 5)
finite = st.floats(allow_nan=False, allow_infinity=False, width=64)


@given(arrays(np.float64, BOX.shape, elements=finite))
def test_field_round_trip_is_bit_exact(values):
    import tempfile
    from pathlib import Path

    with tempfile.TemporaryDirectory() as d:
        path = Path(d) / "f.csv"
        write_field(path, SampledFunction(BOX, values), tolerance=1e-8)
        back = read_field(path)
    assert back.domain.to_dict() == BOX.to_dict()
    assert np.array_equal(back.values.view(np.int64), values.view(np.int64))


def test_field_sidecar_and_header(tmp_path):
    path = write_field(tmp_path / "out" / "t.csv", SampledFunction(BOX, np.zeros(BOX.shape)),
                       solver={"worst_grad_norm": 1e-12})
    meta = json.loads(path.with_suffix(".json").read_text())
    assert meta["solver"]["worst_grad_norm"] == 1e-12
    with path.open() as fh:
        assert next(csv.reader(fh)) == ["i0", "i1", "value"]


def test_map_export(tmp_path):
    box = Box.cube(1, 1.0, 9)
    nb = estimate_neighborhood(Euclidean(), box)
    gmap = gradient_map(GaussianBump(0.05, [0j], 0.5), Euclidean(), nb, box)
    path = write_map(tmp_path / "m.csv", gmap, {"composition": 1e-11})
    rows = list(csv.DictReader(path.open()))
    assert len(rows) == box.points**2
    r = rows[10]
    idx = (int(r["i0"]), int(r["i1"]))
    assert float(r["g0_re"]) == gmap.map_values[idx][0].real
    assert float(r["det_jacobian"]) == gmap.determinants[idx]


def test_series_export(tmp_path):
    path = write_series(tmp_path / "s.csv", [(0.1, 1e-3, "pullback"), (0.05, 2.5e-4, "pullback")])
    rows = list(csv.reader(path.open()))
    assert rows[0] == ["x", "y", "series"] and float(rows[2][1]) == 2.5e-4
