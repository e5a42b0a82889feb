import os

from hypothesis import given, settings, strategies as st

from aegis.hashing import keccak256
from keccak_ref import keccak256 as keccak_ref

EMPTY = "c5d2460186f7233c927e7db2dcc703c0e500b653ca82273b7bfad8045d85a470"
ABC = "4e03657aea45a94fc7d47ba826c8d667c0d1e6e33a64a036ec44f58fa12d6c45"


def test_published_vectors():
    assert keccak256(b"").hex() == EMPTY
    assert keccak256(b"abc").hex() == ABC
    assert keccak_ref(b"").hex() == EMPTY
    assert keccak_ref(b"abc").hex() == ABC


def test_not_nist_sha3():
    import hashlib

    assert hashlib.sha3_256(b"").hexdigest() != EMPTY


def test_rate_boundaries():
    for n in (135, 136, 137, 272, 273):
        data = os.urandom(n)
        assert keccak256(data) == keccak_ref(data)


@settings(max_examples=200, deadline=None)
@given(st.binary(max_size=600))
def test_matches_reference(data):
    assert keccak256(data) == keccak_ref(data)
