import struct

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from uwstereo.data.pfm import (
    PFMError, PFMFormatError, PFMTruncatedError, decode_pfm, encode_pfm, read_pfm, write_pfm,
)


def reference_pfm(rows):
    """Independent writer: struct packing, bottom row first, little-endian."""
    h, w = len(rows), len(rows[0])
    out = b"Pf\n%d %d\n-1.0\n" % (w, h)
    for row in reversed(rows):
        out += struct.pack("<%df" % w, *row)
    return out


def test_golden_2x2():
    m = [[1.0, 2.0], [3.0, 4.0]]
    assert encode_pfm(np.array(m, np.float32)) == reference_pfm(m)


def test_header_prefix():
    assert encode_pfm(np.zeros((3, 5))).startswith(b"Pf\n")


@settings(max_examples=40, deadline=None)
@given(arrays(np.float32, st.tuples(st.integers(1, 9), st.integers(1, 9)),
              elements=st.floats(-1e6, 1e6, width=32)),
       st.sampled_from(["little", "big"]))
def test_roundtrip_both_orders(m, order):
    out = decode_pfm(encode_pfm(m, order))
    np.testing.assert_array_equal(out, m)


def test_big_endian_scale_sign():
    assert b"\n1.0\n" in encode_pfm(np.ones((1, 1)), "big")


def test_three_channel_rejected():
    data = b"PF\n1 1\n-1.0\n" + b"\0" * 12
    with pytest.raises(PFMFormatError, match="3-channel"):
        decode_pfm(data)


def test_malformed_and_truncated():
    with pytest.raises(PFMFormatError):
        decode_pfm(b"P5\n1 1\n255\n\0")
    with pytest.raises(PFMTruncatedError):
        decode_pfm(encode_pfm(np.ones((4, 4)))[:-3])
    assert not issubclass(PFMTruncatedError, PFMFormatError)


def test_non_finite_rejected():
    with pytest.raises(PFMError):
        encode_pfm(np.array([[np.nan]]))


def test_file_roundtrip(tmp_path, rng):
    m = rng.uniform(0, 200, (7, 11)).astype(np.float32)
    write_pfm(tmp_path / "d.pfm", m)
    np.testing.assert_array_equal(read_pfm(tmp_path / "d.pfm"), m)


def test_payload_starting_with_whitespace_bytes():
    # 0x0a / 0x20 as the first payload byte must not be taken as header padding
    for first in (b"\n", b" ", b"\t"):
        raw = np.frombuffer(first + b"\x00\x00\x00" + b"\x00" * 4, dtype="<f4").reshape(1, 2)
        m = np.flipud(raw).astype(np.float32)
        assert decode_pfm(encode_pfm(m)).tobytes() == m.tobytes()
