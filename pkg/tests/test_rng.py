from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from glfield.rng import generator, philox4x32, seed_key, uniforms

# Random123 known-answer vectors for Philox4x32-10
KAT = [
    ((0, 0, 0, 0), (0, 0), (0x6627E8D5, 0xE169C58D, 0xBC57AC4C, 0x9B00DBD8)),
    ((0xFFFFFFFF,) * 4, (0xFFFFFFFF,) * 2, (0x408F276D, 0x41C83B0E, 0xA20BC7C6, 0x6D5451FD)),
    ((0x243F6A88, 0x85A308D3, 0x13198A2E, 0x03707344), (0xA4093822, 0x299F31D0),
     (0xD16CFE09, 0x94FDCCEB, 0x5001E420, 0x24126EA1)),
]


@pytest.mark.parametrize("counter,key,expected", KAT)
def test_philox_known_answers(counter, key, expected):
    assert philox4x32(counter, key) == expected


def test_seed_key_split():
    assert seed_key(0) == (0, 0)
    assert seed_key((7 << 32) | 5) == (5, 7)
    with pytest.raises(ValueError):
        seed_key(-1)
    with pytest.raises(ValueError):
        seed_key(2**64)


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 2**64 - 1), trial=st.integers(0, 2**31), stream=st.integers(0, 2**31))
def test_uniforms_open_unit_interval_and_deterministic(seed, trial, stream):
    u = uniforms(seed, trial, "exp", stream, 16)
    assert np.all((u > 0) & (u < 1))
    assert np.array_equal(u, uniforms(seed, trial, "exp", stream, 16))


def test_streams_differ_by_purpose_trial_and_seed():
    base = uniforms(1, 0, "exp", 0, 8)
    assert not np.array_equal(base, uniforms(1, 0, "route", 0, 8))
    assert not np.array_equal(base, uniforms(1, 1, "exp", 0, 8))
    assert not np.array_equal(base, uniforms(2, 0, "exp", 0, 8))


def test_uniforms_are_uniform():
    u = uniforms(3, 0, "init", 0, 20_000)
    from scipy.stats import kstest

    assert kstest(u, "uniform").pvalue > 0.01


def test_generator_substreams():
    a = generator(5, 1, 2).random(4)
    assert np.array_equal(a, generator(5, 1, 2).random(4))
    assert not np.array_equal(a, generator(5, 1, 3).random(4))
