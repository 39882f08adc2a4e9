"""Constraint-system pipeline: compile, setup, compute witness, prove, verify."""

from .backend import (
    BACKENDS,
    KeyPair,
    Proof,
    ProvingKey,
    TransparentBackend,
    VerificationKey,
    get_backend,
    prove,
    setup,
    verify,
)
from .builder import CircuitBuilder, ConstraintSystem
from .compiler import (
    DEFAULT_PRIME,
    Witness,
    compile_train_step,
    compute_witness,
    constraint_census,
    public_inputs_vector,
)
from .serialize import (
    load_artifact,
    load_constraint_system,
    load_keypair,
    save_artifact,
    save_constraint_system,
    save_keypair,
)

__all__ = [
    "BACKENDS",
    "CircuitBuilder",
    "ConstraintSystem",
    "DEFAULT_PRIME",
    "KeyPair",
    "Proof",
    "ProvingKey",
    "TransparentBackend",
    "VerificationKey",
    "Witness",
    "compile_train_step",
    "compute_witness",
    "constraint_census",
    "get_backend",
    "load_artifact",
    "load_constraint_system",
    "load_keypair",
    "prove",
    "public_inputs_vector",
    "save_artifact",
    "save_constraint_system",
    "save_keypair",
    "setup",
    "verify",
]
