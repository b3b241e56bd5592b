import pytest
from hypothesis import given, strategies as st

from oracles import hand_traced_quorums, min_quorum_intersection
from rtbyzcast.core import (
    BroadcastPayload,
    HbBody,
    MsgKind,
    ParameterError,
    ProtocolMessage,
    SignatureSet,
    SystemParams,
    instance_key,
    live_quorum,
    message_size,
    quorum_size,
)


def test_instance_key_projection():
    assert instance_key(BroadcastPayload(3, 7, b"a")) == (3, 7)
    assert instance_key(BroadcastPayload(0, 0, b"")) == (0, 0)
    assert instance_key(BroadcastPayload(2, 5, b"x")) == instance_key(BroadcastPayload(2, 5, b"y"))


def test_canonical_encoding():
    p = BroadcastPayload(1, 258, b"hi")
    assert p.encode() == bytes(7) + b"\x01" + bytes(6) + b"\x01\x02" + b"hi"
    import hashlib

    assert p.digest == hashlib.sha256(p.encode()).digest()


@pytest.mark.parametrize("n,rep,expected", [(4, 0, 3), (6, 1, 4), (7, 0, 5), (10, 0, 7)])
def test_quorum_examples(n, rep, expected):
    assert quorum_size(SystemParams(n=n, R=4, rep=rep)) == expected


def test_quorum_shrinks_with_detected_crashes():
    params = SystemParams(n=3 * 2 + 3 + 1, R=4, rep=3)
    assert params.f == 2
    got = [live_quorum(params, k) for k in range(6)]
    assert got == hand_traced_quorums(2, 3, 5)
    assert got == [8, 7, 6, 5, 5, 5]


def test_params_invariants():
    with pytest.raises(ParameterError):
        SystemParams(n=4, R=3, k=1)  # R < 2k+2
    with pytest.raises(ParameterError):
        SystemParams(n=4, R=4, f=2)
    p = SystemParams(n=10, R=6)
    assert (p.f, p.k) == (3, 2)
    assert SystemParams(n=6, R=4, rep=1).f == 1


@pytest.mark.parametrize("f", [1, 2, 3])
def test_quorums_intersect_in_a_correct_process(f):
    n = 3 * f + 1
    assert min_quorum_intersection(n, 2 * f + 1) >= f + 1


sig_maps = st.dictionaries(st.integers(0, 12), st.binary(min_size=1, max_size=4), max_size=6)


@given(sig_maps, sig_maps, sig_maps)
def test_signature_set_union_laws(a, b, c):
    A, B, C = SignatureSet(a), SignatureSet(b), SignatureSet(c)
    assert (A | B).signers() == (B | A).signers()
    assert ((A | B) | C).signers() == (A | (B | C)).signers()
    assert A | A == A
    assert len(A | B) == len(set(a) | set(b))


@given(sig_maps)
def test_signature_set_one_entry_per_signer(a):
    s = SignatureSet(a)
    for k in a:
        assert s.with_entry(k, b"other")[k] == a[k]
    assert len(s.trimmed(2)) == min(2, len(a))


def test_message_sizes():
    hb = ProtocolMessage(MsgKind.HB, 0, HbBody(0, 1), SignatureSet({0: b"s"}))
    assert message_size(hb) == 24 + 16 + 97
    p = BroadcastPayload(0, 1, bytes(16))
    echo = ProtocolMessage(MsgKind.ECHO, 1, p, SignatureSet({1: b"s", 2: b"t"}), origin_sig=b"o")
    assert message_size(echo) == 24 + 32 + 3 * 97
    dlv = ProtocolMessage(MsgKind.DELIVER, 1, p, SignatureSet({1: b"s"}), inner=SignatureSet({0: b"a", 1: b"b", 2: b"c"}))
    assert message_size(dlv) == 24 + 32 + 97 + 3 * 97
