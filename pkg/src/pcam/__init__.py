"""Predictive-coding associative memories with Hopfield and autoencoder
baselines, plus the experiment harness behind the ``pcam`` CLI."""

from .core import (
    Activation,
    ClampSpec,
    InferenceState,
    PcnModel,
    TrainConfig,
    energy,
    inference_step,
    init_model,
    make_state,
    refresh,
    run_inference,
    update_parameters,
)
from .memory import (
    ExemplarSet,
    ModalityLayout,
    RetrievalConfig,
    RetrievalReport,
    complete_retrieve,
    denoise_retrieve,
    evaluate_retrieval,
    hetero_retrieve,
    store,
)

__version__ = "0.1.0"
