"""Proof backends: setup / prove / verify over a constraint system.

The reference backend is *transparent*: the proof simply discloses the
witness and the verifier replays every constraint.  That gives full
soundness for testing at zero cryptographic cost, but no zero-knowledge;
a succinct SNARK backend can drop in behind the same interface (the
`is_zero_knowledge` flag tells callers which guarantees they get).
"""

from __future__ import annotations

from dataclasses import dataclass, field

from ..errors import DigestMismatch, MalformedProof
from .builder import ConstraintSystem
from .compiler import Witness


@dataclass
class ProvingKey:
    backend: str
    digest: str  # constraint-system digest this key is bound to


@dataclass
class VerificationKey:
    backend: str
    digest: str
    p: int
    num_variables: int
    public_inputs: tuple
    constraints: tuple
    _compiled: list | None = field(default=None, repr=False)

    def to_json(self) -> dict:
        return {
            "backend": self.backend,
            "digest": self.digest,
            "p": str(self.p),
            "num_variables": self.num_variables,
            "public_inputs": list(self.public_inputs),
            "constraints": [
                [[[i, str(c)] for i, c in side] for side in con]
                for con in self.constraints
            ],
        }

    @classmethod
    def from_json(cls, obj: dict) -> "VerificationKey":
        return cls(
            backend=obj["backend"],
            digest=obj["digest"],
            p=int(obj["p"]),
            num_variables=int(obj["num_variables"]),
            public_inputs=tuple(obj["public_inputs"]),
            constraints=tuple(
                tuple(tuple((int(i), int(c)) for i, c in side) for side in con)
                for con in obj["constraints"]
            ),
        )


@dataclass
class KeyPair:
    proving_key: ProvingKey
    verification_key: VerificationKey


@dataclass
class Proof:
    """Backend-tagged attestation plus an echo of the claimed public inputs."""

    backend: str
    payload: dict
    public_inputs: list

    def to_json(self) -> dict:
        return {
            "backend": self.backend,
            "payload": {
                "digest": self.payload["digest"],
                "assignment": [str(v) for v in self.payload["assignment"]],
            },
            "public_inputs": [str(v) for v in self.public_inputs],
        }

    @classmethod
    def from_json(cls, obj: dict) -> "Proof":
        return cls(
            backend=obj["backend"],
            payload={
                "digest": obj["payload"]["digest"],
                "assignment": [int(v) for v in obj["payload"]["assignment"]],
            },
            public_inputs=[int(v) for v in obj["public_inputs"]],
        )


class TransparentBackend:
    """Witness-replay backend: sound, deterministic, not zero-knowledge."""

    name = "transparent"
    is_zero_knowledge = False

    def setup(self, cs: ConstraintSystem) -> KeyPair:
        return KeyPair(
            proving_key=ProvingKey(backend=self.name, digest=cs.digest),
            verification_key=VerificationKey(
                backend=self.name,
                digest=cs.digest,
                p=cs.p,
                num_variables=cs.num_variables,
                public_inputs=cs.public_inputs,
                constraints=cs.constraints,
            ),
        )

    def prove(self, cs: ConstraintSystem, witness: Witness, proving_key: ProvingKey) -> Proof:
        if proving_key.backend != self.name:
            raise DigestMismatch(f"proving key belongs to backend {proving_key.backend!r}")
        if proving_key.digest != cs.digest:
            raise DigestMismatch("proving key bound to a different constraint system")
        if len(witness.values) != cs.num_variables:
            raise MalformedProof("witness length does not match the system")
        return Proof(
            backend=self.name,
            payload={"digest": cs.digest, "assignment": list(witness.values)},
            public_inputs=witness.public_values(cs),
        )

    def verify(self, verification_key: VerificationKey, public_inputs: list, proof: Proof) -> bool:
        """Replay every constraint; accept only a fully satisfying assignment
        whose public wires match the claimed public inputs."""
        if proof.backend != self.name or verification_key.backend != self.name:
            return False
        payload = proof.payload
        if not isinstance(payload, dict) or "assignment" not in payload or "digest" not in payload:
            raise MalformedProof("transparent proof payload must carry digest and assignment")
        if payload["digest"] != verification_key.digest:
            return False
        z = payload["assignment"]
        if len(z) != verification_key.num_variables:
            return False
        p = verification_key.p
        if z[0] != 1:
            return False
        if len(public_inputs) != len(verification_key.public_inputs):
            return False
        for idx, claimed in zip(verification_key.public_inputs, public_inputs):
            if z[idx] != claimed % p:
                return False
        for a, b, c in self._compiled_constraints(verification_key):
            av = 0
            for i, coeff in a:
                av += coeff * z[i]
            bv = 0
            for i, coeff in b:
                bv += coeff * z[i]
            cv = 0
            for i, coeff in c:
                cv += coeff * z[i]
            if (av * bv - cv) % p:
                return False
        return True

    @staticmethod
    def _compiled_constraints(vk: VerificationKey) -> list:
        # signed small coefficients keep the dot products on machine-sized
        # ints for honest witnesses, which is much faster than modular
        # accumulation of 127-bit values
        if vk._compiled is None:
            half = vk.p >> 1
            vk._compiled = [
                tuple(
                    tuple((i, c - vk.p if c > half else c) for i, c in side)
                    for side in con
                )
                for con in vk.constraints
            ]
        return vk._compiled


BACKENDS = {TransparentBackend.name: TransparentBackend()}


def get_backend(name: str):
    if name not in BACKENDS:
        raise KeyError(f"unknown proof backend {name!r}")
    return BACKENDS[name]


def setup(cs: ConstraintSystem, backend: str = TransparentBackend.name) -> KeyPair:
    return get_backend(backend).setup(cs)


def prove(cs: ConstraintSystem, witness: Witness, proving_key: ProvingKey) -> Proof:
    return get_backend(proving_key.backend).prove(cs, witness, proving_key)


def verify(verification_key: VerificationKey, public_inputs: list, proof: Proof) -> bool:
    return get_backend(verification_key.backend).verify(verification_key, public_inputs, proof)
