import json
import math

import numpy as np

from app.schemas.common import ComplexValue
from app.services.artifacts import to_jsonable, versions, write_csv, write_manifest


def test_to_jsonable_plain_types():
    document = to_jsonable(
        {
            "nan": math.nan,
            "inf": np.float64(math.inf),
            "z": 1 + 2j,
            "flag": np.bool_(True),
            "count": np.int64(3),
            "pair": (0.5, ComplexValue.of(-1j)),
        }
    )
    assert document == {
        "nan": None,
        "inf": None,
        "z": {"re": 1.0, "im": 2.0},
        "flag": True,
        "count": 3,
        "pair": [0.5, {"re": -0.0, "im": -1.0}],
    }


def test_manifest_is_deterministic(tmp_path):
    kwargs = dict(config={"tol": 1e-6, "radius": 1.0}, seed=7, results={"b": 1, "a": [1j]})
    first = write_manifest(tmp_path / "one", "bounds", **kwargs).read_bytes()
    second = write_manifest(tmp_path / "two", "bounds", **kwargs).read_bytes()
    assert first == second

    document = json.loads(first)
    assert list(document) == sorted(document)
    assert document["versions"] == versions()
    assert document["failures"] == []
    assert document["results"]["a"] == [{"re": 0.0, "im": 1.0}]


def test_csv_uses_unix_newlines(tmp_path):
    path = write_csv(tmp_path / "nested" / "table.csv", ("n", "value"), [(0, 0.1), (1, 1e-300)])
    assert path.read_bytes() == b"n,value\n0,0.1\n1,1e-300\n"
