import struct
import zlib

import numpy as np
import pytest

from emberlab import container
from emberlab.errors import ContainerFormatError


RNG = np.random.default_rng(77)


class TestTensorRoundTrip:
    def test_values_exact(self, tmp_path):
        values = RNG.normal(size=(3, 5, 2))
        path = tmp_path / "t.embr"
        container.save_tensor(path, values)
        np.testing.assert_array_equal(container.load_tensor(path), values)

    def test_bytes_identical_across_saves(self, tmp_path):
        values = RNG.normal(size=(4, 4))
        a, b = tmp_path / "a.embr", tmp_path / "b.embr"
        container.save_tensor(a, values)
        container.save_tensor(b, values)
        assert a.read_bytes() == b.read_bytes()

    def test_save_load_save_bytes_identical(self, tmp_path):
        values = RNG.normal(size=(2, 7))
        a, b = tmp_path / "a.embr", tmp_path / "b.embr"
        container.save_tensor(a, values)
        container.save_tensor(b, container.load_tensor(a))
        assert a.read_bytes() == b.read_bytes()

    def test_scalar_and_1d(self, tmp_path):
        for values in (np.array(3.25), np.arange(6.0)):
            path = tmp_path / "t.embr"
            container.save_tensor(path, values)
            loaded = container.load_tensor(path)
            assert loaded.shape == values.shape
            np.testing.assert_array_equal(loaded, values)

    def test_header_layout(self, tmp_path):
        path = tmp_path / "t.embr"
        container.save_tensor(path, np.zeros((2, 3)))
        raw = path.read_bytes()
        assert raw[:4] == b"EMBR"
        version, dtype, ndim = struct.unpack_from("<HBB", raw, 4)
        assert (version, dtype, ndim) == (1, 1, 2)
        assert struct.unpack_from("<2I", raw, 8) == (2, 3)
        assert len(raw) == 8 + 8 + 48 + 4


class TestCorruption:
    def make(self, tmp_path):
        path = tmp_path / "t.embr"
        container.save_tensor(path, RNG.normal(size=(3, 3)))
        return path

    def test_bad_magic(self, tmp_path):
        path = self.make(tmp_path)
        raw = bytearray(path.read_bytes())
        raw[0] = ord("X")
        path.write_bytes(bytes(raw))
        with pytest.raises(ContainerFormatError):
            container.load_tensor(path)

    def test_flipped_payload_byte_fails_crc(self, tmp_path):
        path = self.make(tmp_path)
        raw = bytearray(path.read_bytes())
        raw[20] ^= 0xFF
        path.write_bytes(bytes(raw))
        with pytest.raises(ContainerFormatError):
            container.load_tensor(path)

    def test_truncated(self, tmp_path):
        path = self.make(tmp_path)
        path.write_bytes(path.read_bytes()[:-5])
        with pytest.raises(ContainerFormatError):
            container.load_tensor(path)

    def test_bad_version_and_dtype(self, tmp_path):
        path = self.make(tmp_path)
        raw = bytearray(path.read_bytes())
        raw[4] = 9
        path.write_bytes(bytes(raw))
        with pytest.raises(ContainerFormatError):
            container.load_tensor(path)
        raw[4] = 1
        raw[6] = 7
        path.write_bytes(bytes(raw))
        with pytest.raises(ContainerFormatError):
            container.load_tensor(path)


class TestBundle:
    def test_round_trip_with_meta(self, tmp_path):
        tensors = {"cell0.w_i": RNG.normal(size=(3, 3, 6, 2)),
                   "b_out": np.zeros(1)}
        meta = {"mode": "pgcl", "epochs": "40"}
        container.save_bundle(tmp_path / "ck", tensors, meta)
        loaded, got_meta = container.load_bundle(tmp_path / "ck")
        assert got_meta == meta
        assert set(loaded) == set(tensors)
        for name in tensors:
            np.testing.assert_array_equal(loaded[name], tensors[name])

    def test_missing_manifest(self, tmp_path):
        with pytest.raises(ContainerFormatError):
            container.load_bundle(tmp_path)

    def test_unsafe_name_rejected(self, tmp_path):
        with pytest.raises(ContainerFormatError):
            container.save_bundle(tmp_path / "ck", {"a/b": np.zeros(1)}, {})
