"""Rank-1 constraint system builder with sign-magnitude gadgets.

Constraints have the form <A,z> * <B,z> = <C,z> over a prime field, with
wire 0 pinned to the constant 1.  Linear forms are dicts {wire: coeff};
the constant term lives under key 0.

Every allocated non-input wire carries a *hint*: a small opcode tuple
describing how to fill it during witness generation.  The hints replay
the native fixed-point arithmetic (divmod, bit split, sign/magnitude
split), while the constraints independently pin those values down, so a
witness passes verification exactly when it encodes a correct
computation.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field

# hint opcodes
OP_MULW = 0  # z[dst] = z[a] * z[b]
OP_MULF = 1  # z[dst] = eval(af) * eval(bf)
OP_DIVMOD = 2  # z[q], z[r] = divmod(signed_eval(form), divisor)
OP_BITS = 3  # z[base+k] = bit k of z[src]
OP_NZINV = 4  # z[inv], z[nz] = modular inverse and is-nonzero flag of z[src]
OP_SIGNMAG = 5  # z[mag], z[sign] = |v|, v < 0 for v = signed_eval(form)


def _form(lc: dict) -> tuple:
    """Split a linear form into (const, ((wire, coeff), ...)) for hints."""
    const = lc.get(0, 0)
    pairs = tuple((i, c) for i, c in lc.items() if i != 0 and c != 0)
    return const, pairs


@dataclass
class ConstraintSystem:
    """Compiled, immutable constraint system plus its witness program."""

    p: int
    num_variables: int
    public_inputs: tuple  # ordered wire indices
    constraints: tuple  # ((A, B, C), ...) with each side ((wire, coeff), ...)
    hints: tuple
    input_wires: tuple  # wires filled from caller-provided inputs, in order
    io: dict  # named wire layout (nested lists of indices)
    manifest: dict  # wire name -> index
    meta: dict  # n, m, batch_size, scale_bits, magnitude_bits
    _digest: str | None = field(default=None, repr=False)

    @property
    def digest(self) -> str:
        """SHA-256 over the verifier-relevant content (field, layout, constraints)."""
        if self._digest is None:
            h = hashlib.sha256()
            header = json.dumps(
                {
                    "p": self.p,
                    "num_variables": self.num_variables,
                    "public_inputs": list(self.public_inputs),
                },
                sort_keys=True,
            )
            h.update(header.encode())
            for con in self.constraints:
                h.update(repr(con).encode())
            self._digest = h.hexdigest()
        return self._digest

    def compute_assignment(self, inputs: dict) -> list:
        """Fill input wires from `inputs` and run the hint program.

        Raises OverflowError when a value exceeds its gadget range.
        """
        missing = [w for w in self.input_wires if w not in inputs]
        if missing:
            raise ValueError(f"unassigned input wires: {missing[:5]}...")
        p = self.p
        half = p >> 1
        z = [0] * self.num_variables
        z[0] = 1
        for w in self.input_wires:
            z[w] = inputs[w] % p

        # inverse wires are only read by the verifier, so their values can
        # be batched into a single field exponentiation at the end
        pending_inv = []
        for hint in self.hints:
            op = hint[0]
            if op == OP_MULW:
                _, dst, a, b = hint
                z[dst] = z[a] * z[b] % p
            elif op == OP_BITS:
                _, base, count, src = hint
                v = z[src]
                if v >> count:
                    raise OverflowError(f"value {v} exceeds {count}-bit range")
                for k in range(count):
                    z[base + k] = (v >> k) & 1
            elif op == OP_DIVMOD:
                _, q, r, const, pairs, divisor, q_limit = hint
                v = const
                for i, c in pairs:
                    x = z[i]
                    v += c * (x - p) if x > half else c * x
                if v < 0:
                    raise OverflowError("negative value in unsigned division")
                qv, rv = divmod(v, divisor)
                if qv >= q_limit:
                    raise OverflowError("quotient exceeds gadget range")
                z[q] = qv
                z[r] = rv
            elif op == OP_NZINV:
                _, inv, nz, src = hint
                v = z[src]
                if v:
                    z[nz] = 1
                    pending_inv.append((inv, v))
            elif op == OP_SIGNMAG:
                _, mag, sign, const, pairs, limit = hint
                v = const
                for i, c in pairs:
                    x = z[i]
                    v += c * (x - p) if x > half else c * x
                mv = -v if v < 0 else v
                if mv >= limit:
                    raise OverflowError("magnitude exceeds gadget range")
                z[mag] = mv
                z[sign] = 1 if v < 0 else 0
            elif op == OP_MULF:
                _, dst, af, bf = hint
                ca, pa = af
                va = ca
                for i, c in pa:
                    va += c * z[i]
                cb, pb = bf
                vb = cb
                for i, c in pb:
                    vb += c * z[i]
                z[dst] = va * vb % p
            else:
                raise ValueError(f"unknown hint opcode {op}")

        if pending_inv:
            prefix = []
            acc = 1
            for _, v in pending_inv:
                acc = acc * v % p
                prefix.append(acc)
            inv_acc = pow(acc, p - 2, p)
            for k in range(len(pending_inv) - 1, 0, -1):
                wire, v = pending_inv[k]
                z[wire] = inv_acc * prefix[k - 1] % p
                inv_acc = inv_acc * v % p
            z[pending_inv[0][0]] = inv_acc
        return z

    def to_json(self) -> dict:
        return {
            "p": str(self.p),
            "num_variables": self.num_variables,
            "public_inputs": list(self.public_inputs),
            "constraints": [
                [[[i, str(c)] for i, c in side] for side in con]
                for con in self.constraints
            ],
            "hints": [list(h) for h in self.hints],  # nested tuples serialize as arrays
            "input_wires": list(self.input_wires),
            "io": self.io,
            "meta": self.meta,
            "digest": self.digest,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "ConstraintSystem":
        constraints = tuple(
            tuple(tuple((int(i), int(c)) for i, c in side) for side in con)
            for con in obj["constraints"]
        )
        cs = cls(
            p=int(obj["p"]),
            num_variables=int(obj["num_variables"]),
            public_inputs=tuple(obj["public_inputs"]),
            constraints=constraints,
            hints=tuple(_hint_from_json(h) for h in obj["hints"]),
            input_wires=tuple(obj["input_wires"]),
            io=obj["io"],
            manifest={},
            meta=obj["meta"],
        )
        return cs


def _hint_from_json(h: list) -> tuple:
    op = h[0]
    if op == OP_DIVMOD:
        _, q, r, const, pairs, divisor, q_limit = h
        return (op, q, r, const, tuple((i, c) for i, c in pairs), divisor, q_limit)
    if op == OP_SIGNMAG:
        _, mag, sign, const, pairs, limit = h
        return (op, mag, sign, const, tuple((i, c) for i, c in pairs), limit)
    if op == OP_MULF:
        _, dst, af, bf = h

        def form(f):
            const, pairs = f
            return const, tuple((i, c) for i, c in pairs)

        return (op, dst, form(af), form(bf))
    return tuple(h)


class CircuitBuilder:
    """Accumulates wires, constraints and witness hints."""

    def __init__(self, p: int):
        self.p = p
        self.num_variables = 1  # wire 0 is the constant 1
        self.constraints = []
        self.hints = []
        self.public_inputs = []
        self.input_wires = []
        self.manifest = {"one": 0}

    # -- wires ---------------------------------------------------------

    def alloc(self, label=None) -> int:
        idx = self.num_variables
        self.num_variables += 1
        if label is not None:
            self.manifest[label] = idx
        return idx

    def alloc_block(self, count: int) -> int:
        base = self.num_variables
        self.num_variables += count
        return base

    def alloc_input(self, label, public: bool) -> int:
        idx = self.alloc(label)
        self.input_wires.append(idx)
        if public:
            self.public_inputs.append(idx)
        return idx

    def mark_public(self, idx: int):
        self.public_inputs.append(idx)

    # -- raw constraints -------------------------------------------------

    def add_constraint(self, a: dict, b: dict, c: dict):
        p = self.p
        self.constraints.append(
            (
                tuple(sorted((i, v % p) for i, v in a.items() if v % p)),
                tuple(sorted((i, v % p) for i, v in b.items() if v % p)),
                tuple(sorted((i, v % p) for i, v in c.items() if v % p)),
            )
        )

    def assert_linear_zero(self, lc: dict):
        self.add_constraint(lc, {0: 1}, {})

    def assert_bool(self, s: int):
        self.add_constraint({s: 1}, {s: 1, 0: -1}, {})

    # -- gadgets ---------------------------------------------------------

    def range_bits(self, value_wire: int, nbits: int, label=None):
        """Prove 0 <= z[value_wire] < 2**nbits via bit decomposition."""
        base = self.alloc_block(nbits)
        if label is not None:
            self.manifest[f"{label}.bits"] = base
        self.hints.append((OP_BITS, base, nbits, value_wire))
        binding = {value_wire: -1}
        for k in range(nbits):
            self.assert_bool(base + k)
            binding[base + k] = 1 << k
        self.assert_linear_zero(binding)

    def nonzero_flag(self, value_wire: int, label=None) -> int:
        """nz = 1 if z[value_wire] != 0 else 0 (with inverse witness)."""
        inv = self.alloc(None if label is None else f"{label}.inv")
        nz = self.alloc(None if label is None else f"{label}.nz")
        self.hints.append((OP_NZINV, inv, nz, value_wire))
        self.add_constraint({value_wire: 1}, {inv: 1}, {nz: 1})
        self.add_constraint({value_wire: 1}, {0: 1, nz: -1}, {})
        return nz

    def mul_wire(self, a: int, b: int, label=None) -> int:
        dst = self.alloc(label)
        self.hints.append((OP_MULW, dst, a, b))
        self.add_constraint({a: 1}, {b: 1}, {dst: 1})
        return dst

    def mul_form(self, af: dict, bf: dict, label=None) -> int:
        dst = self.alloc(label)
        self.hints.append((OP_MULF, dst, _form(af), _form(bf)))
        self.add_constraint(af, bf, {dst: 1})
        return dst

    def signed_mul(self, a_mag, a_sign, b_mag, b_sign, label) -> tuple:
        """Magnitude product plus XOR sign, canonicalized at zero.

        Returns (product_wire, sign_wire); the product is the raw
        magnitude product, before any rescale.
        """
        t = self.mul_wire(a_sign, b_sign, f"{label}.t")
        prod = self.mul_wire(a_mag, b_mag, f"{label}.prod")
        nz = self.nonzero_flag(prod, f"{label}.prodnz")
        xor = {a_sign: 1, b_sign: 1, t: -2}
        sign = self.mul_form(xor, {nz: 1}, f"{label}.sign")
        return prod, sign

    def rescale(self, value_form: dict, sign_in: int, scale_bits: int,
                magnitude_bits: int, label) -> tuple:
        """Truncating division by S = 2**scale_bits with range proofs.

        value = q*S + r, r < S, q < 2**magnitude_bits; the output sign is
        the incoming sign re-canonicalized on the post-rescale magnitude
        (a nonzero product can truncate to zero).
        Returns (q_wire, r_wire, sign_wire).
        """
        q = self.alloc(f"{label}.q")
        r = self.alloc(f"{label}.r")
        self.hints.append(
            (OP_DIVMOD, q, r, *_form(value_form), 1 << scale_bits, 1 << magnitude_bits)
        )
        binding = dict(value_form)
        binding[q] = binding.get(q, 0) - (1 << scale_bits)
        binding[r] = binding.get(r, 0) - 1
        self.assert_linear_zero(binding)
        self.range_bits(r, scale_bits, f"{label}.r")
        self.range_bits(q, magnitude_bits, f"{label}.q")
        nz = self.nonzero_flag(q, f"{label}.qnz")
        sign = self.mul_form({sign_in: 1}, {nz: 1}, f"{label}.qsign")
        return q, r, sign

    def signed_value(self, mag: int, sign: int, label=None) -> int:
        """v = mag * (1 - 2*sign): the field element the pair represents."""
        return self.mul_form({mag: 1}, {0: 1, sign: -2}, label)

    def bind_sign_magnitude(self, value_form: dict, mag: int, sign: int,
                            magnitude_bits: int, label):
        """Constrain (mag, sign) to be the canonical split of a signed form."""
        self.hints.append(
            (OP_SIGNMAG, mag, sign, *_form(value_form), 1 << magnitude_bits)
        )
        self.assert_bool(sign)
        self.range_bits(mag, magnitude_bits, f"{label}.mag")
        self.add_constraint({mag: 1}, {0: 1, sign: -2}, value_form)
        nz = self.nonzero_flag(mag, f"{label}.magnz")
        self.add_constraint({sign: 1}, {0: 1, nz: -1}, {})

    def split_sign_magnitude(self, value_form: dict, magnitude_bits: int, label) -> tuple:
        mag = self.alloc(f"{label}.mag")
        sign = self.alloc(f"{label}.sign")
        self.bind_sign_magnitude(value_form, mag, sign, magnitude_bits, label)
        return mag, sign

    # -- finalize ----------------------------------------------------------

    def build(self, io: dict, meta: dict) -> ConstraintSystem:
        return ConstraintSystem(
            p=self.p,
            num_variables=self.num_variables,
            public_inputs=tuple(self.public_inputs),
            constraints=tuple(self.constraints),
            hints=tuple(self.hints),
            input_wires=tuple(self.input_wires),
            io=io,
            manifest=self.manifest,
            meta=meta,
        )
