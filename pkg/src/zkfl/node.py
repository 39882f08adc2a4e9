"""Off-chain learning node: batch inbox, training pipeline, submission.

Per cycle a node reads the committed global model, computes the witness
for one training step, generates the proof and submits the update
transaction.  Byzantine variants tamper with a chosen stage and exist
only so the test harness can demonstrate that tampered submissions are
rejected and leave the global model untouched.
"""

from __future__ import annotations

import queue
import time
from dataclasses import dataclass

from .circuit.backend import ProvingKey, prove
from .circuit.builder import ConstraintSystem
from .circuit.compiler import Witness, compute_witness
from .errors import QueueFull
from .fixedpoint import FxConfig, encode, fx_add
from .ledger import Ledger, UpdateTx
from .nn import Batch, Hyperparams, Model, alpha_eff, model_digest

BYZANTINE_MODES = ("corrupt_model", "corrupt_witness", "replay_proof")


@dataclass
class CycleReport:
    cycle_index: int
    submitted: bool
    accepted: bool
    reason: str | None  # reject reason, or why the node skipped
    witness_seconds: float = 0.0
    prove_seconds: float = 0.0

    def to_json(self) -> dict:
        return {
            "cycle": self.cycle_index,
            "submitted": self.submitted,
            "accepted": self.accepted,
            "reason": self.reason,
            "witness_seconds": self.witness_seconds,
            "prove_seconds": self.prove_seconds,
        }


class LearningNode:
    """Owns its queue, keys and metrics; communicates only via the ledger."""

    def __init__(self, address: str, hp: Hyperparams, cfg: FxConfig,
                 cs: ConstraintSystem, proving_key: ProvingKey,
                 inbox_capacity: int = 8, byzantine_mode: str | None = None):
        if byzantine_mode is not None and byzantine_mode not in BYZANTINE_MODES:
            raise ValueError(f"unknown byzantine mode {byzantine_mode!r}")
        self.address = address
        self.hp = hp
        self.cfg = cfg
        self.cs = cs
        self.proving_key = proving_key
        self.inbox = queue.Queue(maxsize=inbox_capacity)
        self.byzantine_mode = byzantine_mode
        self.last_seen_cycle = -1
        self.metrics = []
        self._replay_stash = None  # previous cycle's tx, for replay mode

    def enqueue_batch(self, batch: Batch, block: bool = False):
        """FIFO enqueue; balks with QueueFull when the inbox is at capacity."""
        if batch.size != self.hp.batch_size or any(
            len(row) != self.hp.n for row in batch.inputs
        ):
            raise ValueError("batch shape does not match hyperparameters")
        try:
            self.inbox.put(batch, block=block)
        except queue.Full:
            raise QueueFull(f"inbox of {self.address} is full") from None

    def run_cycle(self, ledger: Ledger) -> CycleReport:
        """Read global model, train, prove, submit; one tx per cycle at most."""
        global_model, cycle = ledger.read_global()
        if cycle <= self.last_seen_cycle:
            report = CycleReport(cycle, False, False, "already_ran_this_cycle")
            self.metrics.append(report)
            return report
        try:
            batch = self.inbox.get_nowait()
        except queue.Empty:
            report = CycleReport(cycle, False, False, "no_batch")
            self.metrics.append(report)
            return report

        a_eff = alpha_eff(self.hp, self.cfg)
        t0 = time.perf_counter()
        witness, local_model = compute_witness(self.cs, global_model, a_eff, batch, self.cfg)
        witness_seconds = time.perf_counter() - t0

        if self.byzantine_mode == "corrupt_witness":
            witness = _flip_private_wire(self.cs, witness)

        t0 = time.perf_counter()
        proof = prove(self.cs, witness, self.proving_key)
        prove_seconds = time.perf_counter() - t0

        tx = UpdateTx(
            sender=self.address,
            local_model=local_model,
            proof=proof,
            claimed_old_model_digest=model_digest(global_model, self.cfg),
        )
        if self.byzantine_mode == "corrupt_model":
            tx.local_model = _bump_weight(local_model, self.cfg)
        elif self.byzantine_mode == "replay_proof":
            tx, self._replay_stash = self._replay_stash, tx
            if tx is None:
                self.last_seen_cycle = cycle
                report = CycleReport(cycle, False, False, "no_replay_available",
                                     witness_seconds, prove_seconds)
                self.metrics.append(report)
                return report

        result = ledger.submit_update(tx)
        self.last_seen_cycle = cycle
        report = CycleReport(
            cycle_index=cycle,
            submitted=True,
            accepted=result.accepted,
            reason=None if result.reason is None else result.reason.value,
            witness_seconds=witness_seconds,
            prove_seconds=prove_seconds,
        )
        self.metrics.append(report)
        return report


def byzantine_variant(node: LearningNode, mode: str) -> LearningNode:
    """Turn a node adversarial (test harness only); returns the node."""
    if mode not in BYZANTINE_MODES:
        raise ValueError(f"unknown byzantine mode {mode!r}")
    node.byzantine_mode = mode
    return node


def _bump_weight(model: Model, cfg: FxConfig) -> Model:
    """Add +10.0 to one weight after proving, invalidating the proof."""
    bumped = fx_add(model.weights[0][0], encode(10, cfg), cfg)
    first_row = (bumped,) + model.weights[0][1:]
    return Model(weights=(first_row,) + model.weights[1:], biases=model.biases)


def _flip_private_wire(cs: ConstraintSystem, witness: Witness) -> Witness:
    """Add 1 to the first private feature wire of the assignment."""
    wire = cs.io["x"][0][0][0]
    values = list(witness.values)
    values[wire] = (values[wire] + 1) % cs.p
    return Witness(values=values)
