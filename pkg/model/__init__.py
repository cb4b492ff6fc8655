"""
Transformer encoder with one or two decoders.
"""

from model.config import COUPLINGS, CROSS_POSITIONS, TIE_MODES, ModelConfig
from model.dual_model import (
    COUPLING_SCHEMES, DualModel, EncoderOutput, decoder_forward, dual_forward,
    encode, init_from_pretrained, next_token_log_probs,
)
from model.checkpoint import load_checkpoint, save_checkpoint
