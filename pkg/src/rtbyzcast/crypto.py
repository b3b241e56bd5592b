"""Signature backends.

``sim`` is a keyed SHA-256 MAC per process: deterministic, fast, and enough for
a simulator whose adversaries cannot forge keys.  ``ecdsa-p256`` uses real
ECDSA over P-256 through ``cryptography``; its keys are derived from the world
seed so runs stay reproducible (signatures themselves are randomized by the
library, which does not affect event logs).
"""

from __future__ import annotations

import hashlib
import hmac
from dataclasses import dataclass
from typing import Iterable, Mapping

from .core import ProcessId, SignatureSet

BACKENDS = ("sim", "ecdsa-p256")


@dataclass(frozen=True)
class KeyPair:
    owner: ProcessId
    secret: bytes
    public: bytes


@dataclass(frozen=True)
class VerifyResult:
    valid_subset: SignatureSet
    rejected: list[ProcessId]


class SimBackend:
    name = "sim"

    def keygen(self, owner: ProcessId, seed: int) -> KeyPair:
        secret = hashlib.sha256(b"rtbyzcast-key" + seed.to_bytes(16, "big", signed=True) + owner.to_bytes(8, "big")).digest()
        # the "public key" of a MAC scheme is the verifier's copy of the secret
        return KeyPair(owner, secret, secret)

    def sign(self, key: KeyPair, digest: bytes) -> bytes:
        if not digest:
            raise ValueError("digest must be non-empty")
        return hmac.new(key.secret, digest, hashlib.sha256).digest()

    def verify(self, public: bytes, digest: bytes, sig: bytes) -> bool:
        return hmac.compare_digest(hmac.new(public, digest, hashlib.sha256).digest(), sig)


class EcdsaBackend:
    name = "ecdsa-p256"

    def __init__(self) -> None:
        from cryptography.hazmat.primitives.asymmetric import ec

        self._ec = ec
        self._private: dict[bytes, object] = {}
        self._public: dict[bytes, object] = {}

    def keygen(self, owner: ProcessId, seed: int) -> KeyPair:
        from cryptography.hazmat.primitives import serialization

        ec = self._ec
        order = 0xFFFFFFFF00000000FFFFFFFFFFFFFFFFBCE6FAADA7179E84F3B9CAC2FC632551
        material = hashlib.sha256(b"rtbyzcast-ecdsa" + seed.to_bytes(16, "big", signed=True) + owner.to_bytes(8, "big")).digest()
        scalar = int.from_bytes(material, "big") % (order - 1) + 1
        priv = ec.derive_private_key(scalar, ec.SECP256R1())
        pub = priv.public_key().public_bytes(serialization.Encoding.X962, serialization.PublicFormat.CompressedPoint)
        secret = scalar.to_bytes(32, "big")
        self._private[secret] = priv
        self._public[pub] = priv.public_key()
        return KeyPair(owner, secret, pub)

    def sign(self, key: KeyPair, digest: bytes) -> bytes:
        from cryptography.hazmat.primitives import hashes

        if not digest:
            raise ValueError("digest must be non-empty")
        return self._private[key.secret].sign(digest, self._ec.ECDSA(hashes.SHA256()))

    def verify(self, public: bytes, digest: bytes, sig: bytes) -> bool:
        from cryptography.exceptions import InvalidSignature
        from cryptography.hazmat.primitives import hashes

        pub = self._public.get(public)
        if pub is None:
            pub = self._ec.EllipticCurvePublicKey.from_encoded_point(self._ec.SECP256R1(), public)
            self._public[public] = pub
        try:
            pub.verify(sig, digest, self._ec.ECDSA(hashes.SHA256()))
        except InvalidSignature:
            return False
        return True


def make_backend(name: str):
    if name == "sim":
        return SimBackend()
    if name == "ecdsa-p256":
        return EcdsaBackend()
    raise ValueError(f"unknown crypto backend {name!r}; choose from {BACKENDS}")


def sign(key: KeyPair, digest: bytes, backend=None) -> bytes:
    return (backend or _DEFAULT).sign(key, digest)


def verify(public: bytes, digest: bytes, sig: bytes, backend=None) -> bool:
    return (backend or _DEFAULT).verify(public, digest, sig)


def verify_set(publics: Mapping[ProcessId, bytes], digest: bytes, sigs: Mapping[ProcessId, bytes], backend=None) -> VerifyResult:
    """Split ``sigs`` into entries that verify and the ids of those that do not."""
    backend = backend or _DEFAULT
    good: dict[ProcessId, bytes] = {}
    rejected: list[ProcessId] = []
    for signer, sig in sigs.items():
        pub = publics.get(signer)
        if pub is not None and backend.verify(pub, digest, sig):
            good[signer] = sig
        else:
            rejected.append(signer)
    return VerifyResult(SignatureSet(good), sorted(rejected))


_DEFAULT = SimBackend()


class KeyRegistry:
    """Static in-world PKI with a verification cache.

    Each node verifies every signature it receives (the cache is keyed per
    verifier when ``per_node_cache`` is set, which the latency experiment uses
    so wall-clock costs reflect independent verification).
    """

    def __init__(self, ids: Iterable[ProcessId], seed: int, backend: str = "sim", per_node_cache: bool = False):
        self.backend = make_backend(backend)
        self.seed = seed
        self.keys: dict[ProcessId, KeyPair] = {}
        self.publics: dict[ProcessId, bytes] = {}
        self.per_node_cache = per_node_cache
        self._cache: dict[tuple, bool] = {}
        for pid in ids:
            self.add(pid)

    def add(self, pid: ProcessId) -> KeyPair:
        if pid not in self.keys:
            kp = self.backend.keygen(pid, self.seed)
            self.keys[pid] = kp
            self.publics[pid] = kp.public
        return self.keys[pid]

    def sign(self, pid: ProcessId, digest: bytes) -> bytes:
        return self.backend.sign(self.keys[pid], digest)

    def verify(self, signer: ProcessId, digest: bytes, sig: bytes, verifier: ProcessId | None = None) -> bool:
        ck = (verifier, signer, digest, sig) if self.per_node_cache else (signer, digest, sig)
        hit = self._cache.get(ck)
        if hit is None:
            pub = self.publics.get(signer)
            if pub is None:
                return False
            hit = self.backend.verify(pub, digest, sig)
            self._cache[ck] = hit
        return hit

    def filter(self, digest: bytes, sigs: Mapping[ProcessId, bytes], verifier: ProcessId | None = None) -> tuple[SignatureSet, bool]:
        """Valid subset of ``sigs`` plus a flag telling whether anything was stripped."""
        good = {s: b for s, b in sigs.items() if self.verify(s, digest, b, verifier)}
        if len(good) == len(sigs):
            return (sigs if isinstance(sigs, SignatureSet) else SignatureSet(good)), False
        return SignatureSet(good), True
