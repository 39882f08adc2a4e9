import random

import pytest

from zkfl.fixedpoint import FxConfig, FxNum, encode
from zkfl.nn import Batch, Hyperparams, Model
from zkfl.circuit import compile_train_step, setup


@pytest.fixture(scope="session")
def cfg():
    return FxConfig()


def rand_fx(rng: random.Random, cfg: FxConfig, lim: float = 1.0) -> FxNum:
    return encode(rng.uniform(-lim, lim), cfg)


def rand_model(rng: random.Random, cfg: FxConfig, n: int, m: int, lim: float = 1.0) -> Model:
    return Model(
        weights=tuple(tuple(rand_fx(rng, cfg, lim) for _ in range(m)) for _ in range(n)),
        biases=tuple(rand_fx(rng, cfg, lim) for _ in range(m)),
    )


def rand_batch(rng: random.Random, cfg: FxConfig, batch: int, n: int, m: int,
               lim: float = 1.0) -> Batch:
    return Batch(
        inputs=tuple(tuple(rand_fx(rng, cfg, lim) for _ in range(n)) for _ in range(batch)),
        labels=tuple(rng.randrange(m) for _ in range(batch)),
    )


@pytest.fixture(scope="session")
def tiny_circuit(cfg):
    """n=1, m=1, B=1 circuit with keys; cheap enough for many tests."""
    hp = Hyperparams(alpha=encode(1.0, cfg), batch_size=1, n=1, m=1)
    cs = compile_train_step(hp, cfg)
    return hp, cs, setup(cs)


@pytest.fixture(scope="session")
def small_circuit(cfg):
    """n=2, m=2, B=2 circuit with keys."""
    hp = Hyperparams(alpha=encode(0.5, cfg), batch_size=2, n=2, m=2)
    cs = compile_train_step(hp, cfg)
    return hp, cs, setup(cs)
