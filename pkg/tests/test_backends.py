"""Parity between the compiled kernels and the numpy fallback, plus the
import-time dispatch contract."""

import numpy as np
import pytest

from pcam import backend, core
from pcam.core import Activation

cython_missing = "cython" not in backend.available()
needs_ext = pytest.mark.skipif(cython_missing, reason="extension not built")


def _setup(widths, act, seed, batch):
    model = core.init_model(widths, act, seed=seed)
    rng = np.random.default_rng(seed + 99)
    xs = [rng.uniform(-1, 1, (batch, n)) for n in widths]
    return model, xs


@needs_ext
@pytest.mark.parametrize("act", list(Activation))
@pytest.mark.parametrize("batch", [1, 7])
def test_refresh_parity(act, batch):
    model, xs = _setup([9, 6, 4], act, 3, batch)
    results = {}
    for name, mod in backend.available().items():
        mus = [np.zeros_like(x) for x in xs]
        eps = [np.zeros_like(x) for x in xs]
        mod.refresh(model.weights, model.memory, act.id,
                    [x.copy() for x in xs], mus, eps)
        results[name] = (mus, eps)
    for a, b in zip(results["numpy"][0], results["cython"][0]):
        np.testing.assert_allclose(a, b, rtol=1e-13, atol=1e-13)
    for a, b in zip(results["numpy"][1], results["cython"][1]):
        np.testing.assert_allclose(a, b, rtol=1e-13, atol=1e-13)


@needs_ext
@pytest.mark.parametrize("act", list(Activation))
def test_relax_parity(act):
    model, xs = _setup([9, 6, 4], act, 5, 4)
    free = np.zeros((4, 9))
    free[:, :4] = 1.0  # first four sensory entries free to move
    out = {}
    for name, mod in backend.available().items():
        xs_run = [x.copy() for x in xs]
        mus, eps = mod.relax(model.weights, model.memory, act.id,
                             xs_run, free, 0.05, 60)
        out[name] = (xs_run, mus, eps)
    for part in range(3):
        for a, b in zip(out["numpy"][part], out["cython"][part]):
            np.testing.assert_allclose(a, b, rtol=1e-10, atol=1e-12)


@needs_ext
def test_feed_backward_parity():
    model, _ = _setup([9, 6, 4], Activation.TANH, 8, 1)
    outs = {
        name: mod.feed_backward(model.weights, model.memory, 2, 5)
        for name, mod in backend.available().items()
    }
    for a, b in zip(outs["numpy"], outs["cython"]):
        np.testing.assert_allclose(a, b, rtol=1e-13, atol=1e-14)


@needs_ext
def test_train_epoch_parity():
    rng = np.random.default_rng(0)
    data = rng.uniform(0, 1, (6, 9))
    results = {}
    for name, mod in backend.available().items():
        model = core.init_model([9, 6, 4], Activation.RELU, seed=1)
        en = mod.train_epoch(model.weights, model.memory, 1, data, 12, 0.05, 1e-3)
        results[name] = (en, model)
    np.testing.assert_allclose(results["numpy"][0], results["cython"][0],
                               rtol=1e-10, atol=1e-13)
    for a, b in zip(results["numpy"][1].weights, results["cython"][1].weights):
        np.testing.assert_allclose(a, b, rtol=1e-10, atol=1e-13)
    np.testing.assert_allclose(results["numpy"][1].memory,
                               results["cython"][1].memory,
                               rtol=1e-10, atol=1e-13)


@needs_ext
def test_apply_updates_parity():
    model, xs = _setup([9, 6, 4], Activation.TANH, 13, 3)
    rng = np.random.default_rng(14)
    eps = [rng.normal(size=x.shape) for x in xs]
    models = {}
    for name, mod in backend.available().items():
        m = model.copy()
        mod.apply_updates(m.weights, m.memory, Activation.TANH.id,
                          [x.copy() for x in xs], [e.copy() for e in eps],
                          0.01, scale=3.0)
        models[name] = m
    for a, b in zip(models["numpy"].weights, models["cython"].weights):
        np.testing.assert_allclose(a, b, rtol=1e-13, atol=1e-15)
    np.testing.assert_allclose(models["numpy"].memory, models["cython"].memory,
                               rtol=1e-13, atol=1e-15)


def test_use_switches_and_restores():
    original = backend.active().NAME
    try:
        mod = backend.use("numpy")
        assert backend.active() is mod
        with pytest.raises(ValueError):
            backend.use("no-such-backend")
    finally:
        backend.use(original)


def test_backend_env_override(monkeypatch):
    # re-importing with the override must select the fallback
    import importlib
    import pcam.backend as bk

    monkeypatch.setenv("PCAM_BACKEND", "numpy")
    mod = importlib.reload(bk)
    try:
        assert mod.active().NAME == "numpy"
    finally:
        monkeypatch.delenv("PCAM_BACKEND")
        importlib.reload(bk)
