"""Single-channel source separation with one output channel per source class."""

from .algorithms import (
    Alg1Model,
    Alg2Model,
    Arch,
    Autoencoder,
    LatentSearchConfig,
    LatentSearchResult,
    SeparatorModel,
    latent_search,
    load_model,
    save_model,
    separate,
    train_alg1,
    train_autoencoder,
    train_separator,
)
from .dataset import CATEGORIES, CLASSES, DatasetConfig, MixtureRecord, build_dataset, load_manifest, validate_manifest
from .engine import AdamState, Network, TrainConfig, adam_step, backward, forward, init_network, train
from .metrics import EvalReport, evaluate_dataset, mse_s, mse_z, render_tables, sdr, si_snr, si_snr_z
from .signals import FrameMatrix, Waveform, frame, mix, overlap_add, scale_to_snr, snr_db
from .wavio import read_wav, write_wav

__version__ = "0.1.0"
