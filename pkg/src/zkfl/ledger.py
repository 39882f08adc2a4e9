"""Deterministic emulation of the on-chain aggregator.

A single-writer state machine with logical blocks: the learning side
(cycle management, fairness, liveness, moving-average aggregation, two
model versions) plus the verifier side (proof check before any update is
applied).  Replaying the same ordered sequence of transactions and block
advances on two replicas yields bit-identical states.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from enum import Enum

from .circuit.backend import Proof, VerificationKey, get_backend
from .circuit.compiler import public_inputs_vector
from .errors import ConfigError
from .fixedpoint import FxConfig, FxNum, fx_add, fx_div_int, fx_sub
from .nn import Model, model_digest


class RejectReason(str, Enum):
    UNREGISTERED = "unregistered"
    DUPLICATE_IN_CYCLE = "duplicate_in_cycle"
    STALE_MODEL = "stale_model"
    INVALID_PROOF = "invalid_proof"


@dataclass(frozen=True)
class CostRule:
    """Chain-flavoured cost units: invented, configurable, logged per tx."""

    base: int = 21000
    per_byte: int = 16
    per_constraint: int = 1


@dataclass
class UpdateTx:
    sender: str
    local_model: Model
    proof: Proof
    claimed_old_model_digest: str

    def to_json(self, cfg: FxConfig) -> dict:
        return {
            "sender": self.sender,
            "model": self.local_model.to_json(cfg),
            "proof": self.proof.to_json(),
            "old_digest": self.claimed_old_model_digest,
        }

    @classmethod
    def from_json(cls, obj: dict, cfg: FxConfig) -> "UpdateTx":
        return cls(
            sender=obj["sender"],
            local_model=Model.from_json(obj["model"], cfg),
            proof=Proof.from_json(obj["proof"]),
            claimed_old_model_digest=obj["old_digest"],
        )


# fixed-width byte sizes for the canonical wire encoding, so cost depends
# on transaction shape, not on the decimal digits of individual values
_ADDR_BYTES = 20
_DIGEST_BYTES = 32
_FX_BYTES = 7  # 48-bit magnitude + sign
_FIELD_BYTES = 16  # one element of a <=127-bit field


def tx_wire_size(tx: UpdateTx) -> int:
    model_entries = tx.local_model.n * tx.local_model.m + tx.local_model.m
    assignment = tx.proof.payload.get("assignment", ())
    return (
        _ADDR_BYTES
        + 2 * _DIGEST_BYTES  # claimed old digest + proof digest
        + model_entries * _FX_BYTES
        + len(tx.proof.public_inputs) * _FX_BYTES
        + len(assignment) * _FIELD_BYTES
    )


@dataclass
class TxResult:
    accepted: bool
    reason: RejectReason | None
    cost: int


class Ledger:
    """Learning + verifier contract state; mutate only through methods."""

    def __init__(self, *, registered, initial_model: Model, verification_key: VerificationKey,
                 alpha_eff: FxNum, fx_config: FxConfig, cycle_length_blocks: int = 100,
                 cost_rule: CostRule = CostRule(), verifier=None):
        if not registered:
            raise ConfigError("at least one registered account is required")
        if len(set(registered)) != len(registered):
            raise ConfigError("duplicate account addresses")
        if cycle_length_blocks < 1:
            raise ConfigError("cycle_length_blocks must be >= 1")
        if verification_key is None:
            raise ConfigError("a verification key is required")
        self.registered = tuple(registered)
        self._registered_set = frozenset(registered)
        self.fx_config = fx_config
        self.alpha_eff = alpha_eff
        self.verification_key = verification_key
        self.cycle_length_blocks = cycle_length_blocks
        self.cost_rule = cost_rule
        # test harnesses may stub the verifier; by default dispatch on the key
        self._verifier = verifier or get_backend(verification_key.backend).verify

        self.block_height = 0
        self.cycle_index = 0
        self.cycle_start_block = 0
        self.committed_model = initial_model
        self.temp_model = initial_model
        self.updates_this_cycle = {}
        self.update_count_this_cycle = 0
        self.cost_log = []  # (tx id, cost units)
        self.events = []
        self._tx_counter = 0

    # -- reads -----------------------------------------------------------

    def read_global(self) -> tuple:
        """Committed model only; the in-cycle temporary version stays internal."""
        return self.committed_model, self.cycle_index

    def state_digest(self) -> str:
        """Digest of the full replayable state, for replica comparison."""
        cfg = self.fx_config
        snap = {
            "block_height": self.block_height,
            "cycle_index": self.cycle_index,
            "cycle_start_block": self.cycle_start_block,
            "committed": self.committed_model.to_json(cfg),
            "temp": self.temp_model.to_json(cfg),
            "updates": sorted(self.updates_this_cycle),
            "count": self.update_count_this_cycle,
            "cost_log": self.cost_log,
        }
        blob = json.dumps(snap, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()

    # -- transitions -------------------------------------------------------

    def submit_update(self, tx: UpdateTx) -> TxResult:
        """Apply the fairness and verification rules; never raises."""
        self._tx_counter += 1
        tx_id = self._tx_counter
        verified_constraints = 0

        if tx.sender not in self._registered_set:
            reason = RejectReason.UNREGISTERED
        elif tx.sender in self.updates_this_cycle:
            reason = RejectReason.DUPLICATE_IN_CYCLE
        elif tx.claimed_old_model_digest != model_digest(self.committed_model, self.fx_config):
            reason = RejectReason.STALE_MODEL
        else:
            verified_constraints = len(self.verification_key.constraints)
            reason = None
            try:
                public = public_inputs_vector(
                    self.committed_model, self.alpha_eff, tx.local_model
                )
                if not self._verifier(self.verification_key, public, tx.proof):
                    reason = RejectReason.INVALID_PROOF
            except Exception:
                reason = RejectReason.INVALID_PROOF

        cost = self.estimate_cost(tx, verified_constraints)
        self.cost_log.append([tx_id, cost])

        if reason is not None:
            self.events.append(
                {
                    "event": "reject",
                    "block": self.block_height,
                    "cycle": self.cycle_index,
                    "sender": tx.sender,
                    "reason": reason.value,
                    "cost": cost,
                }
            )
            return TxResult(accepted=False, reason=reason, cost=cost)

        k = self.update_count_this_cycle + 1
        self.temp_model = _fold_running_mean(self.temp_model, tx.local_model, k, self.fx_config)
        self.updates_this_cycle[tx.sender] = True
        self.update_count_this_cycle = k
        self.events.append(
            {
                "event": "accept",
                "block": self.block_height,
                "cycle": self.cycle_index,
                "sender": tx.sender,
                "update_index": k,
                "cost": cost,
            }
        )
        return TxResult(accepted=True, reason=None, cost=cost)

    def advance_block(self, k: int):
        """Advance the logical clock, finalizing every crossed boundary."""
        if k < 1:
            raise ValueError("must advance by at least one block")
        self.block_height += k
        while self.block_height - self.cycle_start_block >= self.cycle_length_blocks:
            self.finalize_cycle()

    def finalize_cycle(self):
        """Close the current cycle (pre: boundary reached).

        With at least one accepted update the temporary model replaces the
        committed one; otherwise the committed model is kept.  Either way a
        new cycle opens.
        """
        if self.update_count_this_cycle > 0:
            self.committed_model = self.temp_model
        self.temp_model = self.committed_model
        self.events.append(
            {
                "event": "finalize",
                "block": self.block_height,
                "cycle": self.cycle_index,
                "updates": self.update_count_this_cycle,
                "model_digest": model_digest(self.committed_model, self.fx_config),
            }
        )
        self.updates_this_cycle = {}
        self.update_count_this_cycle = 0
        self.cycle_index += 1
        self.cycle_start_block += self.cycle_length_blocks

    # -- cost model ---------------------------------------------------------

    def estimate_cost(self, tx: UpdateTx, verified_constraints: int) -> int:
        rule = self.cost_rule
        return (
            rule.base
            + rule.per_byte * tx_wire_size(tx)
            + rule.per_constraint * verified_constraints
        )

    # -- snapshots ------------------------------------------------------------

    def to_snapshot(self) -> dict:
        cfg = self.fx_config
        return {
            "registered": list(self.registered),
            "cycle_length_blocks": self.cycle_length_blocks,
            "fx_config": cfg.to_json(),
            "alpha_eff": [str(self.alpha_eff.magnitude), 1 if self.alpha_eff.negative else 0],
            "cost_rule": {
                "base": self.cost_rule.base,
                "per_byte": self.cost_rule.per_byte,
                "per_constraint": self.cost_rule.per_constraint,
            },
            "committed_model": self.committed_model.to_json(cfg),
            "verification_key_digest": self.verification_key.digest,
        }

    @classmethod
    def from_snapshot(cls, snap: dict, verification_key: VerificationKey, verifier=None) -> "Ledger":
        from .errors import ArtifactMismatch

        if snap["verification_key_digest"] != verification_key.digest:
            raise ArtifactMismatch("snapshot bound to a different verification key")
        cfg = FxConfig.from_json(snap["fx_config"])
        mag, neg = snap["alpha_eff"]
        rule = snap["cost_rule"]
        return cls(
            registered=snap["registered"],
            initial_model=Model.from_json(snap["committed_model"], cfg),
            verification_key=verification_key,
            alpha_eff=FxNum(int(mag), bool(neg)),
            fx_config=cfg,
            cycle_length_blocks=snap["cycle_length_blocks"],
            cost_rule=CostRule(rule["base"], rule["per_byte"], rule["per_constraint"]),
            verifier=verifier,
        )


def deploy(*, registered, initial_model: Model, verification_key: VerificationKey,
           alpha_eff: FxNum, fx_config: FxConfig, cycle_length_blocks: int = 100,
           cost_rule: CostRule = CostRule(), verifier=None) -> Ledger:
    """One-time deployment: cycle 0 opens at block 0 with the initial model."""
    return Ledger(
        registered=registered,
        initial_model=initial_model,
        verification_key=verification_key,
        alpha_eff=alpha_eff,
        fx_config=fx_config,
        cycle_length_blocks=cycle_length_blocks,
        cost_rule=cost_rule,
        verifier=verifier,
    )


def _fold_running_mean(temp: Model, local: Model, k: int, cfg: FxConfig) -> Model:
    """temp + (local - temp)/k per entry, with truncating division.

    For k = 1 this is exactly `local`, so the first accepted update of a
    cycle replaces the reset temporary model.
    """

    def fold(t: FxNum, l: FxNum) -> FxNum:
        return fx_add(t, fx_div_int(fx_sub(l, t, cfg), k), cfg)

    weights = tuple(
        tuple(fold(t, l) for t, l in zip(trow, lrow))
        for trow, lrow in zip(temp.weights, local.weights)
    )
    biases = tuple(fold(t, l) for t, l in zip(temp.biases, local.biases))
    return Model(weights=weights, biases=biases)
