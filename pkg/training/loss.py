"""
Joint log-likelihood objective.

Each decoder's negative log-likelihood is summed over its non-PAD target
positions (scaled by sample weight). Under "token" normalization each side
is divided by its own number of target tokens before the two sides are
added, which keeps the sides balanced when their lengths differ; "sum"
keeps the raw summed log-likelihood.
"""

import logging

import numpy as np

from errors import InputError, NumericError
from model import decoder_forward, dual_forward, encode
from numcore import log_softmax, nll_loss, no_grad
from subword import PAD_ID

# Set up logging
logging.basicConfig(level=logging.INFO, format='%(asctime)s - %(name)s - %(levelname)s - %(message)s')
logger = logging.getLogger(__name__)

NORMALIZATIONS = ("token", "sum")


def forward_batch(model, batch, coupling="rank-aligned"):
    """Logits per decoder side for a Batch: {side: Tensor (B, L, V)}."""
    enc = encode(model, batch.src)
    if model.config.num_decoders == 1:
        return {1: decoder_forward(model, enc, batch.inputs1, side=1)}
    logits1, logits2 = dual_forward(model, enc, batch.inputs1, batch.inputs2, coupling)
    return {1: logits1, 2: logits2}


def _targets(batch, side):
    return batch.outputs1 if side == 1 else batch.outputs2


def side_losses(model, batch, label_smoothing=0.0, normalization="token", coupling="rank-aligned"):
    """
    Per-decoder losses.

    Returns:
        dict: side -> scalar Tensor
    """
    if normalization not in NORMALIZATIONS:
        raise InputError(f"Unknown loss normalization {normalization!r}")
    if batch.size == 0:
        raise InputError("Cannot compute a loss on an empty batch")

    losses = {}
    for side, logits in forward_batch(model, batch, coupling).items():
        targets = _targets(batch, side)
        length = logits.shape[1]
        targets = targets[:, :length]
        mask = targets != PAD_ID
        weights = mask * batch.weights[:, None]
        loss = nll_loss(log_softmax(logits, axis=-1), targets, weights, label_smoothing)
        if normalization == "token":
            loss = loss * (1.0 / max(int(mask.sum()), 1))
        losses[side] = loss
    return losses


def joint_loss(model, batch, label_smoothing=0.0, normalization="token", coupling="rank-aligned"):
    """
    Combined loss of both decoders on one batch.

    Args:
        model (DualModel): model in train or eval mode
        batch (Batch): padded batch
        label_smoothing (float): probability mass spread over the vocabulary
        normalization (str): "token" or "sum"
        coupling (str): cross-row coupling scheme for the forward pass

    Returns:
        Tensor: scalar loss

    Raises:
        NumericError: the loss is not finite
    """
    losses = side_losses(model, batch, label_smoothing, normalization, coupling)
    total = None
    for side in sorted(losses):
        total = losses[side] if total is None else total + losses[side]
    if not np.isfinite(total.data).all():
        raise NumericError(f"Non-finite loss {total.item()}")
    return total


def token_accuracy(model, batch):
    """
    Teacher-forced next-token accuracy per side over non-PAD targets.

    Returns:
        dict: side -> fraction of correctly predicted tokens
    """
    was_training = model.training
    model.eval()
    try:
        with no_grad():
            logits = forward_batch(model, batch)
    finally:
        model.training = was_training

    accuracy = {}
    for side, side_logits in logits.items():
        targets = _targets(batch, side)[:, :side_logits.shape[1]]
        mask = targets != PAD_ID
        predicted = side_logits.data.argmax(axis=-1)
        accuracy[side] = float((predicted == targets)[mask].mean()) if mask.any() else 0.0
    return accuracy
