"""
Training loop with periodic dev evaluation and early stopping.
"""

import json
import logging
import math
import os
import time
from dataclasses import asdict, dataclass, field, fields

import numpy as np
import pandas as pd

from data_processor import bucket_batches, check_disjoint, make_batch
from errors import ConfigError, InputError
from numcore import OptimizerState, adam_step, backward, no_grad
from training.loss import NORMALIZATIONS, joint_loss
from utils import derive_seed, make_rng

# Set up logging
logging.basicConfig(level=logging.INFO, format='%(asctime)s - %(name)s - %(levelname)s - %(message)s')
logger = logging.getLogger(__name__)

MODES = ("scratch", "finetune")
SELECTION_METRICS = ("loss", "bleu")


@dataclass
class TrainConfig:
    """
    Training hyperparameters.

    Fine-tuning uses finetune_lr at a fixed rate; scratch training warms up
    linearly to peak_lr and then decays with the inverse square root.
    """
    batch_tokens: int = 8192
    max_steps: int = 100000
    patience: int = 4
    eval_interval: int = 1000
    seed: int = 1
    mode: str = "scratch"
    peak_lr: float = 7e-4
    warmup_steps: int = 4000
    lr_mode: str = "inverse-sqrt"
    finetune_lr: float = 8e-5
    label_smoothing: float = 0.1
    loss_normalization: str = "token"
    selection_metric: str = "loss"
    wait_k1: int = 0
    wait_k2: int = 0
    dev_fraction: float = 0.1
    dev_max_len: int = 100

    def __post_init__(self):
        if self.patience < 1:
            raise ConfigError("training.patience must be >= 1")
        if self.batch_tokens < 1 or self.max_steps < 1 or self.eval_interval < 1:
            raise ConfigError("training.batch_tokens, max_steps and eval_interval must be positive")
        if self.mode not in MODES:
            raise ConfigError(f"Unknown training mode {self.mode!r}, expected one of {MODES}")
        if self.selection_metric not in SELECTION_METRICS:
            raise ConfigError(f"Unknown selection metric {self.selection_metric!r}")
        if self.loss_normalization not in NORMALIZATIONS:
            raise ConfigError(f"Unknown loss normalization {self.loss_normalization!r}")
        if self.wait_k1 < 0 or self.wait_k2 < 0 or (self.wait_k1 and self.wait_k2):
            raise ConfigError("At most one of wait_k1 / wait_k2 may be non-zero, and neither negative")
        if not 0.0 <= self.label_smoothing < 1.0:
            raise ConfigError("training.label_smoothing must be in [0, 1)")

    def optimizer_state(self):
        if self.mode == "finetune":
            return OptimizerState(peak_lr=self.finetune_lr, warmup_steps=self.warmup_steps, mode="fixed")
        return OptimizerState(peak_lr=self.peak_lr, warmup_steps=self.warmup_steps, mode=self.lr_mode)

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, values):
        known = {f.name for f in fields(cls)}
        unknown = set(values) - known
        if unknown:
            raise ConfigError(f"Unknown training settings: {sorted(unknown)}")
        return cls(**values)


@dataclass
class TrainResult:
    """Outcome of a training run; the model holds the best parameters."""
    model: object
    best_step: int
    best_value: float
    steps: int
    stopped_early: bool
    history: list = field(default_factory=list)


def dev_loss(model, dev_samples, config):
    """Mean per-batch joint loss on the dev set, no label smoothing, eval mode."""
    model.eval()
    batches = bucket_batches(dev_samples, config.batch_tokens, None, config.wait_k1, config.wait_k2)
    total = 0.0
    with no_grad():
        for group in batches:
            batch = make_batch(group, config.wait_k1, config.wait_k2)
            total += joint_loss(model, batch, 0.0, config.loss_normalization).item()
    return total / len(batches)


def dev_bleu(model, dev_samples, config):
    """Negated mean BLEU of both sides under greedy decoding (lower is better)."""
    from evaluation.bleu import corpus_bleu
    from search import SearchConfig, greedy_decode, greedy_dual_decode

    model.eval()
    search = SearchConfig(beam_size=1, max_len=config.dev_max_len)
    hyps = {1: [], 2: []}
    for sample in dev_samples:
        if model.config.num_decoders == 1:
            hyps[1].append(greedy_decode(model, sample.src, search).output)
        else:
            result = greedy_dual_decode(model, sample.src, search)
            hyps[1].append(result.output1)
            hyps[2].append(result.output2)

    def as_text(ids):
        return " ".join(str(i) for i in ids)

    scores = []
    for side, outputs in hyps.items():
        if not outputs:
            continue
        refs = [as_text(s.tgt1 if side == 1 else s.tgt2) for s in dev_samples]
        scores.append(corpus_bleu([as_text(o) for o in outputs], refs, smoothing="add-k").score)
    return -float(np.mean(scores))


EVALUATORS = {"loss": dev_loss, "bleu": dev_bleu}


def append_metrics(path, record):
    """Append one JSON line to the metrics log."""
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    with open(path, "a", encoding="utf-8") as handle:
        handle.write(json.dumps(record, sort_keys=True) + "\n")


def load_metrics(path):
    """Metrics log as a DataFrame, one row per evaluation."""
    if not os.path.exists(path) or os.path.getsize(path) == 0:
        return pd.DataFrame(columns=["step", "train_loss", "dev_loss", "lr", "wall_ms"])
    return pd.read_json(path, lines=True)


def train(model, train_samples, dev_samples, config, metrics_path=None, on_record=None, on_improve=None):
    """
    Train a model with Adam and early stopping.

    Every eval_interval updates the dev metric is computed and a record
    {step, train_loss, dev_loss, lr, wall_ms} is appended to the metrics log.
    Training stops after `patience` evaluations without improvement or at
    max_steps; the model is left holding the best evaluated parameters.

    Args:
        model (DualModel): model to train, updated in place
        train_samples (list): id TriSample objects
        dev_samples (list): id TriSample objects, disjoint from train_samples
        config (TrainConfig): hyperparameters
        metrics_path (str, optional): JSON-lines metrics log
        on_record (callable, optional): called with each metrics record
        on_improve (callable, optional): called with (model, record) on a new best

    Returns:
        TrainResult: best step, best value and history

    Raises:
        InputError: empty train or dev set, or overlapping sets
    """
    if not train_samples:
        raise InputError("Training set is empty")
    if not dev_samples:
        raise InputError("Dev set is empty")
    check_disjoint(train_samples, dev_samples)

    evaluate = EVALUATORS[config.selection_metric]
    batch_rng = make_rng(derive_seed(config.seed, "batches"))
    model.rng = make_rng(derive_seed(config.seed, "dropout"))
    state = config.optimizer_state()
    params = model.parameters()

    logger.info(f"Training {model.config.coupling} model ({model.num_parameters()} parameters) on "
                f"{len(train_samples)} samples, mode={config.mode}, max_steps={config.max_steps}")

    step, bad_evals, stopped_early = 0, 0, False
    best_value, best_step = math.inf, 0
    best_arrays = model.state_arrays()
    window_losses, history = [], []
    started = time.perf_counter()

    while step < config.max_steps and not stopped_early:
        for group in bucket_batches(train_samples, config.batch_tokens, batch_rng, config.wait_k1, config.wait_k2):
            model.train()
            model.zero_grad()
            batch = make_batch(group, config.wait_k1, config.wait_k2)
            loss = joint_loss(model, batch, config.label_smoothing, config.loss_normalization)
            backward(loss)
            lr = adam_step(params, [p.grad for p in params], state)
            step += 1
            window_losses.append(loss.item())
            logger.debug(f"step {step}: loss {window_losses[-1]:.4f} lr {lr:.3e} batch {batch.size}")

            if step % config.eval_interval == 0 or step == config.max_steps:
                value = evaluate(model, dev_samples, config)
                record = {
                    "step": step,
                    "train_loss": float(np.mean(window_losses)),
                    "dev_loss": float(value),
                    "lr": float(lr),
                    "wall_ms": int((time.perf_counter() - started) * 1000),
                }
                window_losses = []
                history.append(record)
                if metrics_path:
                    append_metrics(metrics_path, record)
                if on_record is not None:
                    on_record(record)

                if value < best_value:
                    best_value, best_step, bad_evals = value, step, 0
                    best_arrays = model.state_arrays()
                    if on_improve is not None:
                        on_improve(model, record)
                    logger.info(f"step {step}: dev {config.selection_metric} {value:.4f} (new best)")
                else:
                    bad_evals += 1
                    logger.info(f"step {step}: dev {config.selection_metric} {value:.4f} "
                                f"(no improvement {bad_evals}/{config.patience})")
                    if bad_evals >= config.patience:
                        stopped_early = True
                        break
            if step >= config.max_steps:
                break

    model.load_state_arrays(best_arrays)
    model.eval()
    logger.info(f"Training finished after {step} steps; best step {best_step} ({best_value:.4f})")
    return TrainResult(model, best_step, best_value, step, stopped_early, history)
