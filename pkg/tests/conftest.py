"""Shared fixtures: the desk-scale corpora and trained models reused
across the retrieval-property and acceptance tests.

Training the session models is the expensive part of the suite (several
minutes each); they are built once here and shared read-only.  Each
trained fixture also reports its wall-clock training time so acceptance
tests can charge it against their runtime budgets."""

import time

import numpy as np
import pytest

from pcam import core, data, memory
from pcam.core import Activation, TrainConfig
from pcam.memory import RetrievalConfig

CORPUS_SEED = 100


def train_staged(model, ds, stages):
    """store() in stages: (T, gamma, alpha, epochs) tuples; the gamma
    schedule keeps inference inside its stability region as gains grow.

    Returns (model, energy trace, wall seconds).
    """
    trace = []
    t0 = time.time()
    for T, gamma, alpha, epochs in stages:
        cfg = TrainConfig(
            T=T, gamma=gamma, alpha=alpha, max_epochs=epochs,
            energy_tol=1e-5, batch_mode=True,
        )
        model, t = memory.store(model, ds, cfg)
        trace.extend(t.tolist())
        if trace[-1] < cfg.energy_tol:
            break
    return model, np.asarray(trace), time.time() - t0


# criterion-3/4/7 model: 2-layer, width 256, 50 procedural 3x32x32 images
C3_STAGES = [
    (16, 0.05, 0.02, 1100),
    (16, 0.02, 0.02, 4200),
]
C3_RETRIEVAL = dict(T_retrieval=500, gamma=0.02)


@pytest.fixture(scope="session")
def corpus50():
    return data.make_images(50, shape=(3, 32, 32), seed=CORPUS_SEED)


@pytest.fixture(scope="session")
def model50(corpus50):
    model = core.init_model([3072, 256, 256], Activation.RELU, seed=0)
    model, trace, seconds = train_staged(model, corpus50, C3_STAGES)
    return model, trace, seconds


@pytest.fixture(scope="session")
def retrieval_cfg():
    """Retrieval settings matched to the trained model's stability region."""
    def make(**kw):
        base = dict(C3_RETRIEVAL)
        base.update(kw)
        return RetrievalConfig(**base)
    return make
