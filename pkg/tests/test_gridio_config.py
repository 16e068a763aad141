import struct

import numpy as np
import pytest

from cgolab import gridio
from cgolab.config import ConfigError, ExperimentConfig


@pytest.mark.parametrize("arr", [np.arange(6.0).reshape(2, 3), np.array([[1 + 2j, -3.5j]]),
                                 np.zeros((2, 1, 3)), np.array(4.25)])
def test_grid_round_trip(tmp_path, arr):
    p = tmp_path / "a.cgog"
    gridio.write_grid(p, arr)
    back = gridio.read_grid(p)
    assert back.shape == arr.shape and back.dtype == (complex if np.iscomplexobj(arr) else float)
    assert np.array_equal(back, arr)


def test_grid_layout_is_little_endian(tmp_path):
    p = tmp_path / "a.cgog"
    gridio.write_grid(p, np.array([[1.0, 2.0, 3.0]]))
    expect = b"CGOG" + struct.pack("<HBBQQ", 1, 2, 0, 1, 3) + struct.pack("<3d", 1.0, 2.0, 3.0)
    assert p.read_bytes() == expect
    gridio.write_grid(p, np.array([1 - 1j]))
    assert p.read_bytes()[-16:] == struct.pack("<2d", 1.0, -1.0)


def test_grid_rejects_bad_files(tmp_path):
    p = tmp_path / "bad.cgog"
    p.write_bytes(b"NOPE" + bytes(16))
    with pytest.raises(gridio.GridFormatError):
        gridio.read_grid(p)
    gridio.write_grid(p, np.ones(4))
    p.write_bytes(p.read_bytes()[:-8])
    with pytest.raises(gridio.GridFormatError):
        gridio.read_grid(p)


def test_csv_crlf_and_round_trip(tmp_path):
    p = tmp_path / "t.csv"
    gridio.write_csv(p, ["name", "value"], [("a,b", 0.1), ("c", np.int64(3))])
    raw = p.read_bytes()
    assert raw.count(b"\r\n") == 3 and b'"a,b"' in raw
    header, rows = gridio.read_csv(p)
    assert header == ["name", "value"] and rows == [["a,b", "0.1"], ["c", "3"]]


def test_config_ini_round_trip(tmp_path):
    cfg = ExperimentConfig(amplitude=0.25, tau_schedule=(16.0,), bumps=((0.1, 0.2, 0.3, 1.0),), seed=7)
    p = tmp_path / "c.ini"
    cfg.to_ini(p)
    assert ExperimentConfig.from_ini(p) == cfg


def test_config_defaults_validate():
    cfg = ExperimentConfig().validate()
    assert np.allclose(cfg.lambdas, np.arange(-5, 6) * 0.1)
    assert cfg.n_x1 == 193


@pytest.mark.parametrize("text", [
    "[lambda]\nlam_max = 0.8\n",
    "[lambda]\nlam_step = 0.2\n",
    "[probes]\nomega_radius = 0.9\n",
    "[cgo]\ntau_schedule = 2\n",
    "[inversion]\ncolour = blue\n",
    "[extra]\nx = 1\n",
    "[potential]\nbumps = 0.1 0.2 0.3\n",
])
def test_config_rejects_bad_input(text):
    with pytest.raises(ConfigError):
        ExperimentConfig.from_string(text)


def test_config_missing_file(tmp_path):
    with pytest.raises(ConfigError):
        ExperimentConfig.from_ini(tmp_path / "missing.ini")
