"""Versioned on-disk artifacts (constraint systems, keys, snapshots).

Artifacts are gzip-compressed canonical JSON with a small envelope:
{"kind", "version", "body"}.  The gzip stream is written with a zeroed
mtime so identical content produces identical bytes.
"""

from __future__ import annotations

import gzip
import io
import json
import zlib
from pathlib import Path

from ..errors import ArtifactMismatch
from .backend import KeyPair, ProvingKey, VerificationKey
from .builder import ConstraintSystem

FORMAT_VERSION = 1


def canonical_json(obj) -> bytes:
    return json.dumps(obj, sort_keys=True, separators=(",", ":")).encode()


def save_artifact(path, kind: str, body: dict):
    envelope = {"kind": kind, "version": FORMAT_VERSION, "body": body}
    buf = io.BytesIO()
    with gzip.GzipFile(fileobj=buf, mode="wb", mtime=0) as fh:
        fh.write(canonical_json(envelope))
    Path(path).write_bytes(buf.getvalue())


def load_artifact(path, kind: str) -> dict:
    try:
        raw = gzip.decompress(Path(path).read_bytes())
        envelope = json.loads(raw)
    except (OSError, ValueError, EOFError, zlib.error) as exc:
        raise ArtifactMismatch(f"cannot read artifact {path}: {exc}") from exc
    if envelope.get("kind") != kind:
        raise ArtifactMismatch(
            f"{path} holds {envelope.get('kind')!r}, expected {kind!r}"
        )
    if envelope.get("version") != FORMAT_VERSION:
        raise ArtifactMismatch(f"{path} has unsupported version {envelope.get('version')}")
    return envelope["body"]


def save_constraint_system(path, cs: ConstraintSystem):
    save_artifact(path, "constraint-system", cs.to_json())


def load_constraint_system(path) -> ConstraintSystem:
    body = load_artifact(path, "constraint-system")
    cs = ConstraintSystem.from_json(body)
    if cs.digest != body["digest"]:
        raise ArtifactMismatch(f"{path}: recomputed digest differs from stored digest")
    return cs


def save_keypair(path, keys: KeyPair):
    save_artifact(
        path,
        "keypair",
        {
            "proving_key": {"backend": keys.proving_key.backend, "digest": keys.proving_key.digest},
            "verification_key": keys.verification_key.to_json(),
        },
    )


def load_keypair(path) -> KeyPair:
    body = load_artifact(path, "keypair")
    return KeyPair(
        proving_key=ProvingKey(
            backend=body["proving_key"]["backend"], digest=body["proving_key"]["digest"]
        ),
        verification_key=VerificationKey.from_json(body["verification_key"]),
    )
