import json

import numpy as np
import pytest

from rigidlab.catalog import CATALOG
from rigidlab.errors import GFQIError
from rigidlab.gfqi import load_grid_gfqi, save_grid_gfqi
from rigidlab.gfqi.grid_import import HEADER_SCHEMA

BASE = {"n": 1, "k": 0, "resolutions": [4], "cutoff": 1.0, "radius": 1.0}


def _write(path, header, samples):
    with open(path, "wb") as f:
        f.write(json.dumps(header).encode("utf-8") + b"\n")
        f.write(np.asarray(samples, dtype="<f8").tobytes())


@pytest.fixture
def qai():
    return CATALOG["qai_fiber"].build()


def test_round_trip_at_grid_nodes(tmp_path, qai):
    path = tmp_path / "qai.gfqi"
    save_grid_gfqi(qai, path, [16, 17], radius=4.0)
    loaded = load_grid_gfqi(path)
    assert (loaded.n, loaded.k, loaded.cutoff) == (1, 1, 3.0)
    assert loaded.quad == qai.quad
    assert loaded.name == "qai_fiber"

    q = np.arange(16) / 16
    xi = np.linspace(-4.0, 4.0, 17)
    mesh = np.meshgrid(q, xi, indexing="ij")
    nodes = np.stack([m.reshape(-1) for m in mesh], axis=1)
    np.testing.assert_allclose(loaded.values(nodes), qai.values(nodes), atol=1e-12)


def test_loaded_function_is_periodic_and_quadratic(tmp_path, qai):
    path = tmp_path / "qai.gfqi"
    save_grid_gfqi(qai, path, [16, 17], radius=4.0)
    loaded = load_grid_gfqi(path)
    # beyond the sampled box the quadratic form takes over
    far = np.array([[0.3, 6.0], [0.3, -5.0]])
    np.testing.assert_allclose(loaded.values(far), [36.0, 25.0], atol=1e-12)
    wrapped = np.array([[1.3, 0.5]])
    np.testing.assert_allclose(
        loaded.values(wrapped), loaded.values(np.array([[0.3, 0.5]])), atol=1e-12
    )


def test_fiberless_file_has_no_form(tmp_path):
    S = CATALOG["cos_gfqi"].build()
    path = tmp_path / "cos.gfqi"
    save_grid_gfqi(S, path, [32])
    header = json.loads(path.read_bytes().split(b"\n", 1)[0])
    assert "Q" not in header
    assert header["resolutions"] == [32]
    loaded = load_grid_gfqi(path)
    assert loaded.quad is None
    assert loaded.values(np.array([[0.0]]))[0] == pytest.approx(1.0, abs=1e-12)


def test_truncated_payload(tmp_path, qai):
    path = tmp_path / "qai.gfqi"
    save_grid_gfqi(qai, path, [16, 17], radius=4.0)
    data = path.read_bytes()
    path.write_bytes(data[:-8])
    with pytest.raises(GFQIError, match="bytes of samples"):
        load_grid_gfqi(path)


@pytest.mark.parametrize(
    "changes, match",
    [
        ({"n": 3}, "invalid header"),
        ({"cutoff": 0.0}, "invalid header"),
        ({"cutoff": None}, "invalid header"),
        ({"x": 1}, "invalid header"),
        ({"k": 1}, "resolutions"),
        ({"k": 1, "resolutions": [4, 4]}, "Q must be present"),
        ({"Q": [[1.0]]}, "Q must be present"),
    ],
)
def test_header_validation(tmp_path, changes, match):
    header = {**BASE, **changes}
    header = {key: value for key, value in header.items() if value is not None}
    path = tmp_path / "bad.gfqi"
    size = int(np.prod(header["resolutions"]))
    _write(path, header, np.zeros(size))
    with pytest.raises(GFQIError, match=match):
        load_grid_gfqi(path)


def test_malformed_header_and_samples(tmp_path):
    path = tmp_path / "bad.gfqi"
    path.write_bytes(b"{not json\n" + np.zeros(4).tobytes())
    with pytest.raises(GFQIError, match="malformed JSON header"):
        load_grid_gfqi(path)

    _write(path, BASE, [0.0, np.nan, 0.0, 0.0])
    with pytest.raises(GFQIError, match="non-finite"):
        load_grid_gfqi(path)


def test_save_checks_resolution_count(tmp_path, qai):
    with pytest.raises(GFQIError):
        save_grid_gfqi(qai, tmp_path / "x.gfqi", [16])


def test_schema_requires_core_fields():
    assert set(HEADER_SCHEMA["required"]) == set(BASE)
