"""Compiles one fixed-point training step into a constraint system.

The emitted system proves, over a prime field, that the public new
model equals `nn.train_step(old model, batch)` for some private batch:

* every fixed-point product goes through a signed-mul gadget followed by
  a truncating rescale with full range proofs,
* sums run as exact field linear forms over signed value wires and are
  re-split into (magnitude, sign) pairs wherever a magnitude is needed,
* public wires: old model, effective learning rate, new model; private
  wires: batch features, one-hot labels, and every intermediate.
"""

from __future__ import annotations

from dataclasses import dataclass

from ..errors import ConfigError
from ..fixedpoint import FxConfig, FxNum, fx_check
from ..nn import Batch, Hyperparams, Model, one_over_m
from .builder import CircuitBuilder, ConstraintSystem

# Default modulus: the Mersenne prime 2**127 - 1.  Large enough for a
# 48-bit magnitude configuration (needs > 2**98) with fast reduction.
DEFAULT_PRIME = (1 << 127) - 1

_SMALL_PRIMES = (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37)


def is_probable_prime(n: int) -> bool:
    """Miller-Rabin with fixed bases; exact below 3.3e24, heuristic above."""
    if n < 2:
        return False
    for sp in _SMALL_PRIMES:
        if n % sp == 0:
            return n == sp
    d, s = n - 1, 0
    while d % 2 == 0:
        d //= 2
        s += 1
    for a in _SMALL_PRIMES:
        x = pow(a, d, n)
        if x in (1, n - 1):
            continue
        for _ in range(s - 1):
            x = x * x % n
            if x == n - 1:
                break
        else:
            return False
    return True


@dataclass
class Witness:
    """Full variable assignment for one execution of a constraint system."""

    values: list

    def public_values(self, cs: ConstraintSystem) -> list:
        return [self.values[i] for i in cs.public_inputs]


def _check_field(p: int, cfg: FxConfig):
    if not is_probable_prime(p):
        raise ConfigError(f"modulus {p} is not prime")
    if p <= 1 << (2 * cfg.magnitude_bits + 2):
        raise ConfigError("field too small for one un-rescaled product")
    if 2 * cfg.magnitude_bits + 1 >= p.bit_length():
        raise ConfigError("magnitude width too large for the field")


def compile_train_step(hp: Hyperparams, cfg: FxConfig, p: int = DEFAULT_PRIME) -> ConstraintSystem:
    """Build the constraint system for one batch update at fixed shapes."""
    _check_field(p, cfg)
    n, m, batch = hp.n, hp.m, hp.batch_size
    sb, mb = cfg.scale_bits, cfg.magnitude_bits
    scale = cfg.scale
    b = CircuitBuilder(p)

    # Public inputs, in the order the verifier receives them:
    # old weights, old biases, alpha_eff, new weights, new biases.
    old_w = [
        [
            (b.alloc_input(f"w[{i}][{j}].mag", True), b.alloc_input(f"w[{i}][{j}].sign", True))
            for j in range(m)
        ]
        for i in range(n)
    ]
    old_b = [
        (b.alloc_input(f"b[{j}].mag", True), b.alloc_input(f"b[{j}].sign", True))
        for j in range(m)
    ]
    alpha = (b.alloc_input("alpha_eff.mag", True), b.alloc_input("alpha_eff.sign", True))
    new_w = []
    for i in range(n):
        row = []
        for j in range(m):
            mag = b.alloc(f"w_new[{i}][{j}].mag")
            sign = b.alloc(f"w_new[{i}][{j}].sign")
            b.mark_public(mag)
            b.mark_public(sign)
            row.append((mag, sign))
        new_w.append(row)
    new_b = []
    for j in range(m):
        mag = b.alloc(f"b_new[{j}].mag")
        sign = b.alloc(f"b_new[{j}].sign")
        b.mark_public(mag)
        b.mark_public(sign)
        new_b.append((mag, sign))

    # Private inputs: the batch.
    x = [
        [
            (b.alloc_input(f"x[{k}][{i}].mag", False), b.alloc_input(f"x[{k}][{i}].sign", False))
            for i in range(n)
        ]
        for k in range(batch)
    ]
    y = [[b.alloc_input(f"y[{k}][{j}]", False) for j in range(m)] for k in range(batch)]

    # Range-constrain all inputs (new-model ranges come from the output
    # bindings below).
    for i in range(n):
        for j in range(m):
            mag, sign = old_w[i][j]
            b.assert_bool(sign)
            b.range_bits(mag, mb, f"w[{i}][{j}]")
    for j in range(m):
        mag, sign = old_b[j]
        b.assert_bool(sign)
        b.range_bits(mag, mb, f"b[{j}]")
    b.assert_bool(alpha[1])
    b.range_bits(alpha[0], mb, "alpha_eff")
    for k in range(batch):
        for i in range(n):
            mag, sign = x[k][i]
            b.assert_bool(sign)
            b.range_bits(mag, mb, f"x[{k}][{i}]")
        for j in range(m):
            # one-hot entries are exactly 0 or 1.0 (= S in fixed point)
            b.add_constraint({y[k][j]: 1}, {y[k][j]: 1, 0: -scale}, {})

    # Signed value wires for the parameters entering sums.
    wv = [
        [b.signed_value(old_w[i][j][0], old_w[i][j][1], f"w[{i}][{j}].val") for j in range(m)]
        for i in range(n)
    ]
    bv = [b.signed_value(old_b[j][0], old_b[j][1], f"b[{j}].val") for j in range(m)]

    inv_m_mag = one_over_m(m, cfg).magnitude

    # Per-sample forward pass and delta = (1/m) * (yhat - y).
    delta = []  # per k, per j: (mag_wire, sign_wire, value_wire)
    for k in range(batch):
        row = []
        for j in range(m):
            diff_form = {bv[j]: 1, y[k][j]: -1}
            for i in range(n):
                lbl = f"fwd[{k}][{j}][{i}]"
                prod, psign = b.signed_mul(x[k][i][0], x[k][i][1], old_w[i][j][0], old_w[i][j][1], lbl)
                q, _, qsign = b.rescale({prod: 1}, psign, sb, mb, lbl)
                pv = b.signed_value(q, qsign, f"{lbl}.val")
                diff_form[pv] = 1
            dmag, dsign = b.split_sign_magnitude(diff_form, mb, f"diff[{k}][{j}]")
            dq, _, dqsign = b.rescale({dmag: inv_m_mag}, dsign, sb, mb, f"delta[{k}][{j}]")
            dv = b.signed_value(dq, dqsign, f"delta[{k}][{j}].val")
            row.append((dq, dqsign, dv))
        delta.append(row)

    # Weight updates: w' = w - alpha_eff * sum_k delta[k][j] * x[k][i].
    for i in range(n):
        for j in range(m):
            grad_form = {}
            for k in range(batch):
                lbl = f"grad[{i}][{j}][{k}]"
                dq, dqsign, _ = delta[k][j]
                prod, psign = b.signed_mul(dq, dqsign, x[k][i][0], x[k][i][1], lbl)
                q, _, qsign = b.rescale({prod: 1}, psign, sb, mb, lbl)
                grad_form[b.signed_value(q, qsign, f"{lbl}.val")] = 1
            gmag, gsign = b.split_sign_magnitude(grad_form, mb, f"g[{i}][{j}]")
            lbl = f"upd_w[{i}][{j}]"
            prod, psign = b.signed_mul(alpha[0], alpha[1], gmag, gsign, lbl)
            uq, _, uqsign = b.rescale({prod: 1}, psign, sb, mb, lbl)
            uv = b.signed_value(uq, uqsign, f"{lbl}.val")
            b.bind_sign_magnitude({wv[i][j]: 1, uv: -1}, new_w[i][j][0], new_w[i][j][1], mb, f"w_new[{i}][{j}]")

    # Bias updates: b' = b - alpha_eff * sum_k delta[k][j].
    for j in range(m):
        bias_form = {}
        for k in range(batch):
            bias_form[delta[k][j][2]] = 1
        hmag, hsign = b.split_sign_magnitude(bias_form, mb, f"h[{j}]")
        lbl = f"upd_b[{j}]"
        prod, psign = b.signed_mul(alpha[0], alpha[1], hmag, hsign, lbl)
        uq, _, uqsign = b.rescale({prod: 1}, psign, sb, mb, lbl)
        uv = b.signed_value(uq, uqsign, f"{lbl}.val")
        b.bind_sign_magnitude({bv[j]: 1, uv: -1}, new_b[j][0], new_b[j][1], mb, f"b_new[{j}]")

    io = {
        "old_w": [[list(old_w[i][j]) for j in range(m)] for i in range(n)],
        "old_b": [list(old_b[j]) for j in range(m)],
        "alpha_eff": list(alpha),
        "new_w": [[list(new_w[i][j]) for j in range(m)] for i in range(n)],
        "new_b": [list(new_b[j]) for j in range(m)],
        "x": [[list(x[k][i]) for i in range(n)] for k in range(batch)],
        "y": [[y[k][j] for j in range(m)] for k in range(batch)],
    }
    meta = {
        "n": n,
        "m": m,
        "batch_size": batch,
        "scale_bits": sb,
        "magnitude_bits": mb,
        "alpha_magnitude": hp.alpha.magnitude,
    }
    return b.build(io, meta)


def constraint_census(n: int, m: int, batch: int, cfg: FxConfig) -> int:
    """Hand-counted constraint total per gadget, for cross-checking compiles.

    Gadget costs (sb = scale_bits, mb = magnitude_bits):
      range proof of k bits   k + 1     (booleans plus the binding sum)
      input pair              mb + 2    (range proof plus sign boolean)
      nonzero flag            2
      signed mul              5         (sign product, magnitude product,
                                         nonzero flag, canonical sign)
      rescale                 sb + mb + 6 (q/S/r binding, both ranges,
                                         nonzero flag, canonical sign)
      sign/magnitude split    mb + 6    (sign boolean, magnitude range,
                                         value binding, nonzero flag,
                                         canonical zero)
      signed value wire       1
      one-hot label wire      1
    """
    sb, mb = cfg.scale_bits, cfg.magnitude_bits
    input_pair = mb + 2
    full_mul = 5 + (sb + mb + 6) + 1  # signed mul + rescale + value wire
    const_mul = (sb + mb + 6) + 1  # rescale of coefficient product + value wire
    split = mb + 6

    count = 0
    count += (n * m + m + 1) * input_pair  # old model and alpha_eff
    count += (n * m + m) * 1  # parameter value wires
    count += batch * n * input_pair  # features
    count += batch * m * 1  # one-hot labels
    count += batch * n * m * full_mul  # forward products
    count += batch * m * split  # yhat - y splits
    count += batch * m * const_mul  # deltas
    count += batch * n * m * full_mul  # gradient products
    count += n * m * split + m * split  # gradient sums
    count += (n * m + m) * full_mul  # alpha_eff scaling
    count += (n * m + m) * split  # new-model output bindings
    return count


def compute_witness(cs: ConstraintSystem, old_model: Model, alpha_eff_fx: FxNum,
                    batch: Batch, cfg: FxConfig) -> tuple:
    """Execute the constraint system; returns (witness, new model).

    The extracted new-model wires are bit-identical to the native
    `nn.train_step` on the same inputs.
    """
    meta = cs.meta
    if cfg.scale_bits != meta["scale_bits"] or cfg.magnitude_bits != meta["magnitude_bits"]:
        raise ConfigError("fixed-point config does not match the compiled system")
    n, m, bsz = meta["n"], meta["m"], meta["batch_size"]
    if old_model.n != n or old_model.m != m or batch.size != bsz:
        raise ConfigError("input shapes do not match the compiled system")

    io = cs.io
    inputs = {}

    def put_pair(pair, value: FxNum):
        fx_check(value, cfg)
        inputs[pair[0]] = value.magnitude
        inputs[pair[1]] = 1 if value.negative else 0

    for i in range(n):
        for j in range(m):
            put_pair(io["old_w"][i][j], old_model.weights[i][j])
    for j in range(m):
        put_pair(io["old_b"][j], old_model.biases[j])
    put_pair(io["alpha_eff"], alpha_eff_fx)
    for k in range(bsz):
        for i in range(n):
            put_pair(io["x"][k][i], batch.inputs[k][i])
        label = batch.labels[k]
        for j in range(m):
            inputs[io["y"][k][j]] = cfg.scale if j == label else 0

    values = cs.compute_assignment(inputs)

    new_weights = tuple(
        tuple(
            FxNum(values[io["new_w"][i][j][0]], bool(values[io["new_w"][i][j][1]]))
            for j in range(m)
        )
        for i in range(n)
    )
    new_biases = tuple(
        FxNum(values[io["new_b"][j][0]], bool(values[io["new_b"][j][1]])) for j in range(m)
    )
    return Witness(values=values), Model(weights=new_weights, biases=new_biases)


def public_inputs_vector(old_model: Model, alpha_eff_fx: FxNum, new_model: Model) -> list:
    """Field values for the public wires, in verifier order.

    The order mirrors the compile-time wire allocation: old weights and
    biases, alpha_eff, new weights and biases, each as (magnitude, sign).
    """
    n, m = old_model.n, old_model.m
    if new_model.n != n or new_model.m != m:
        raise ConfigError("old and new model shapes differ")
    out = []
    for model in (old_model,):
        for i in range(n):
            for j in range(m):
                w = model.weights[i][j]
                out.extend((w.magnitude, 1 if w.negative else 0))
        for j in range(m):
            bj = model.biases[j]
            out.extend((bj.magnitude, 1 if bj.negative else 0))
    out.extend((alpha_eff_fx.magnitude, 1 if alpha_eff_fx.negative else 0))
    for i in range(n):
        for j in range(m):
            w = new_model.weights[i][j]
            out.extend((w.magnitude, 1 if w.negative else 0))
    for j in range(m):
        bj = new_model.biases[j]
        out.extend((bj.magnitude, 1 if bj.negative else 0))
    return out
