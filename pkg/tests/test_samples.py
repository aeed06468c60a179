import numpy as np
import pytest
from hypothesis import given, strategies as st

from bilevelbench.samples import OracleTag, Sample, Stream


def test_same_sample_bit_identical():
    s = Sample(Stream.PI, 17, 123456789)
    a = s.generator().standard_normal(8)
    b = s.generator().standard_normal(8)
    assert np.array_equal(a, b)


def test_streams_are_distinct():
    draws = {
        stream: Sample(stream, 0, 7).generator().standard_normal(4).tobytes()
        for stream in Stream
    }
    assert len(set(draws.values())) == len(Stream)


def test_counters_are_distinct():
    a = Sample(Stream.XI, 0, 7).generator().standard_normal(4)
    b = Sample(Stream.XI, 1, 7).generator().standard_normal(4)
    assert not np.array_equal(a, b)


def test_tags_split_one_sample():
    s = Sample(Stream.ZETA, 3, 7)
    a = s.generator(OracleTag.HVP_YY_G).standard_normal(4)
    b = s.generator(OracleTag.HVP_XY_G).standard_normal(4)
    assert not np.array_equal(a, b)


def test_negative_counter_rejected():
    with pytest.raises(ValueError):
        Sample(Stream.XI, -1, 0)


@given(seed=st.integers(min_value=0, max_value=2**64 - 1),
       counter=st.integers(min_value=0, max_value=2**32),
       stream=st.sampled_from(list(Stream)))
def test_determinism_property(seed, counter, stream):
    s1 = Sample(stream, counter, seed)
    s2 = Sample(stream, counter, seed)
    assert np.array_equal(s1.generator().standard_normal(3),
                          s2.generator().standard_normal(3))
