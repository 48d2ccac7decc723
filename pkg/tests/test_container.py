import struct

import numpy as np
import pytest

from cflow.exceptions import FieldError
from cflow.grid.container import MAGIC, read_field, read_sidecar, write_field, write_sidecar
from cflow.grid.field import Field
from cflow.grid.lattice import Grid4
from cflow.maps.map_field import MapField
from cflow.target.torus import FlatTorus


@pytest.mark.parametrize("rank,comp", [("scalar", ()), ("sym2", (4, 4)), ("target", (3,))])
def test_roundtrip_is_bit_exact(tmp_path, rank, comp):
    grid = Grid4((8, 10, 8, 8), (1.0, 0.5, 2.0, 1.0))
    vals = np.random.default_rng(0).normal(size=grid.dims + comp)
    path = tmp_path / f"{rank}.cflow"

    write_field(str(path), Field(grid, rank, vals))
    back = read_field(str(path))

    assert back.grid == grid
    assert back.rank == rank
    assert back.values.tobytes() == vals.astype("<f8").tobytes()


def test_layout_header_then_row_major_payload(tmp_path):
    grid = Grid4((8, 8, 8, 8))
    vals = np.arange(grid.n_nodes, dtype=float).reshape(grid.dims)
    path = tmp_path / "f.cflow"
    write_field(str(path), Field(grid, "scalar", vals))

    blob = path.read_bytes()
    assert blob[:8] == MAGIC
    (n,) = struct.unpack("<Q", blob[8:16])
    payload = np.frombuffer(blob[16 + n:], dtype="<f8")
    # axis 3 fastest
    assert payload[1] == vals[0, 0, 0, 1]
    assert payload[8] == vals[0, 0, 1, 0]


def test_bad_magic_and_truncated_payload(tmp_path):
    bad = tmp_path / "bad.cflow"
    bad.write_bytes(b"NOTAFLD!" + b"\x00" * 32)
    with pytest.raises(FieldError):
        read_field(str(bad))

    grid = Grid4((8, 8, 8, 8))
    good = tmp_path / "good.cflow"
    write_field(str(good), Field(grid, "scalar", np.zeros(grid.dims)))
    short = tmp_path / "short.cflow"
    short.write_bytes(good.read_bytes()[:-8])
    with pytest.raises(FieldError):
        read_field(str(short))


def test_map_snapshot_sidecar(tmp_path):
    grid = Grid4((8, 8, 8, 8))
    u = MapField.affine(grid, FlatTorus(2, periods=[1.0, 2.0]), [[1, 0, 0, 0], [0, -2, 0, 0]], [0.25, 0.5])

    write_field(str(tmp_path / "u.cflow"), u.as_field())
    write_sidecar(str(tmp_path / "u.json"), u.sidecar())

    side = read_sidecar(str(tmp_path / "u.json"))
    back = read_field(str(tmp_path / "u.cflow"))
    v = MapField(grid, FlatTorus(2, periods=side["target"]["periods"]), np.asarray(side["linear_part"]), back.values)

    assert v.same_class(u)
    assert np.array_equal(v.disp, u.disp)


@pytest.mark.parametrize("blob", [
    b"",
    MAGIC + b"\x01\x02",
    MAGIC + struct.pack("<Q", 9) + b'{"rank":1',
    MAGIC + struct.pack("<Q", 15) + b'{"rank":"x"}   ',
    MAGIC + struct.pack("<Q", 3) + b"[1]",
])
def test_short_or_headless_files_raise_field_error(tmp_path, blob):
    path = tmp_path / "broken.cflow"
    path.write_bytes(blob)
    with pytest.raises(FieldError):
        read_field(str(path))
