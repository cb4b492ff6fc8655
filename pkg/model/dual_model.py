"""
Encoder plus one or two decoders.

With coupling "dual", every decoder layer carries a cross-decoder attention
sublayer. Both decoders advance sublayer by sublayer together; the cross
sublayer of decoder s reads the other decoder's states from the same layer.
The other decoder's states are shifted right by one position behind a zero
slot, so query t only sees the other stream's positions < t, which are the
tokens both decoders have already committed to at step t.
"""

import copy
import logging
import math
from dataclasses import dataclass

import numpy as np

from errors import CheckpointError, ContractError, InputError
from model.config import ModelConfig
from model.layers import (
    attention_mask, attention_params, causal_mask, constant, embedding_params,
    feed_forward, ffn_params, multi_head_attention, norm_params, normalize,
    residual, sinusoidal_positions,
)
from numcore import Tensor, concat, dropout, embedding, get_default_dtype, log_softmax, matmul
from subword import BOS_ID, PAD_ID
from utils import make_rng

# Set up logging
logging.basicConfig(level=logging.INFO, format='%(asctime)s - %(name)s - %(levelname)s - %(message)s')
logger = logging.getLogger(__name__)

COUPLING_SCHEMES = ("rank-aligned", "attend-best", "attend-average")


@dataclass
class EncoderOutput:
    """Encoder states (batch, S, d_model) with the source validity mask (batch, S)."""
    states: Tensor
    mask: np.ndarray

    @property
    def batch_size(self):
        return self.states.shape[0]

    def select(self, rows):
        """Rows of the encoding, detached; used to line encodings up with beam entries."""
        rows = np.asarray(rows, dtype=np.int64)
        return EncoderOutput(Tensor(self.states.data[rows]), self.mask[rows])


class DualModel:
    """
    Parameter container for the encoder and decoders.

    Parameters are stored by name. Under tie_mode "all-four" both decoders
    read the single matrix "dec.embed" for their input embedding and output
    projection; under "per-decoder" each decoder owns "dec{s}.embed".
    """

    def __init__(self, config, params=None):
        if not isinstance(config, ModelConfig):
            config = ModelConfig.from_dict(dict(config))
        self.config = config
        self.rng = make_rng(config.seed)
        self.training = False
        self.params = params if params is not None else self._init_params()
        self._position_cache = None

    # ----- construction -----

    def _init_params(self):
        cfg = self.config
        rng = make_rng(cfg.seed)
        d = cfg.d_model
        params = {}

        params.update(embedding_params(rng, cfg.src_vocab_size, d, "enc.embed"))
        for layer in range(cfg.enc_layers):
            prefix = f"enc.layers.{layer}"
            params.update(norm_params(d, f"{prefix}.self_ln"))
            params.update(attention_params(rng, d, f"{prefix}.self_attn"))
            params.update(norm_params(d, f"{prefix}.ffn_ln"))
            params.update(ffn_params(rng, d, cfg.d_ff, f"{prefix}.ffn"))
        params.update(norm_params(d, "enc.ln_final"))

        if cfg.tie_mode == "all-four" and cfg.num_decoders == 2:
            params.update(embedding_params(rng, cfg.tgt_vocab_size, d, "dec.embed"))
        for side in self.sides:
            if self.embedding_name(side) not in params:
                params.update(embedding_params(rng, cfg.tgt_vocab_size, d, self.embedding_name(side)))
            for layer in range(cfg.dec_layers):
                prefix = f"dec{side}.layers.{layer}"
                params.update(norm_params(d, f"{prefix}.self_ln"))
                params.update(attention_params(rng, d, f"{prefix}.self_attn"))
                params.update(norm_params(d, f"{prefix}.encdec_ln"))
                params.update(attention_params(rng, d, f"{prefix}.encdec_attn"))
                if cfg.has_cross_attention:
                    params.update(norm_params(d, f"{prefix}.cross_ln"))
                    params.update(norm_params(d, f"{prefix}.cross_kv_ln"))
                    params.update(attention_params(rng, d, f"{prefix}.cross_attn"))
                params.update(norm_params(d, f"{prefix}.ffn_ln"))
                params.update(ffn_params(rng, d, cfg.d_ff, f"{prefix}.ffn"))
            params.update(norm_params(d, f"dec{side}.ln_final"))

        logger.debug(f"Initialized {len(params)} parameter tensors")
        return params

    @property
    def sides(self):
        return (1,) if self.config.num_decoders == 1 else (1, 2)

    def embedding_name(self, side):
        if self.config.tie_mode == "all-four" and self.config.num_decoders == 2:
            return "dec.embed"
        return f"dec{side}.embed"

    def embedding_matrix(self, side):
        return self.params[self.embedding_name(side)]

    def output_matrix(self, side):
        # output projection is tied to the input embedding of the same decoder
        return self.params[self.embedding_name(side)]

    # ----- parameter access -----

    def named_parameters(self):
        """(name, tensor) pairs in sorted name order, each tensor once."""
        seen, pairs = set(), []
        for name in sorted(self.params):
            tensor = self.params[name]
            if id(tensor) in seen:
                continue
            seen.add(id(tensor))
            pairs.append((name, tensor))
        return pairs

    def parameters(self):
        return [tensor for _, tensor in self.named_parameters()]

    def num_parameters(self):
        return int(sum(tensor.size for tensor in self.parameters()))

    def zero_grad(self):
        for tensor in self.parameters():
            tensor.zero_grad()

    def train(self):
        self.training = True
        return self

    def eval(self):
        self.training = False
        return self

    def clone(self):
        """Deep copy with independent parameter arrays."""
        twin = DualModel(self.config, params=copy.deepcopy(self.params))
        twin.training = self.training
        return twin

    def state_arrays(self):
        return {name: tensor.data.copy() for name, tensor in self.named_parameters()}

    def load_state_arrays(self, arrays):
        for name, tensor in self.named_parameters():
            tensor.data = np.array(arrays[name], dtype=tensor.data.dtype)

    def swap_decoders(self):
        """
        Model with decoder 1 and decoder 2 exchanged, sharing parameter tensors.

        Raises:
            ContractError: the model has a single decoder
        """
        if self.config.num_decoders != 2:
            raise ContractError("swap_decoders needs a two-decoder model")
        swapped = {}
        for name, tensor in self.params.items():
            if name.startswith("dec1."):
                name = "dec2." + name[len("dec1."):]
            elif name.startswith("dec2."):
                name = "dec1." + name[len("dec2."):]
            swapped[name] = tensor
        return DualModel(self.config, params=swapped)

    def positions(self, length):
        cfg = self.config
        if length > cfg.max_positions:
            raise InputError(f"Sequence of length {length} exceeds max_positions={cfg.max_positions}")
        dtype = get_default_dtype()
        if self._position_cache is None or self._position_cache.dtype != dtype:
            self._position_cache = sinusoidal_positions(cfg.max_positions, cfg.d_model).astype(dtype)
        return self._position_cache[:length]


# ----- forward passes -----

def _as_ids(ids, what):
    array = np.asarray(ids, dtype=np.int64)
    if array.ndim == 1:
        array = array[None, :]
    if array.ndim != 2 or array.shape[1] == 0:
        raise InputError(f"{what} must be a non-empty (batch, length) id array, got shape {array.shape}")
    return array


def _embed(model, weight, ids):
    d = model.config.d_model
    x = embedding(weight, ids) * math.sqrt(d) + model.positions(ids.shape[1])
    return dropout(x, model.config.dropout, model.rng, model.training)


def encode(model, src_ids):
    """
    Run the encoder over a batch of source id sequences.

    Args:
        model (DualModel): the model
        src_ids (array-like of int): (batch, S), PAD-padded on the right

    Returns:
        EncoderOutput: states and validity mask

    Raises:
        InputError: empty source, or a row with no real token
    """
    cfg = model.config
    ids = _as_ids(src_ids, "Source")
    mask = ids != PAD_ID
    if not mask.any(axis=1).all():
        raise InputError("Source batch contains an empty sentence")
    if ids.max() >= cfg.src_vocab_size:
        raise InputError(f"Source id {ids.max()} outside vocabulary of {cfg.src_vocab_size}")

    p = model.params
    x = _embed(model, p["enc.embed"], ids)
    self_mask = attention_mask(mask, ids.shape[1], causal=False)
    for layer in range(cfg.enc_layers):
        prefix = f"enc.layers.{layer}"
        h = normalize(p, f"{prefix}.self_ln", x, cfg.ln_eps)
        x = residual(x, multi_head_attention(p, f"{prefix}.self_attn", h, h, self_mask, cfg.heads),
                     cfg.dropout, model.rng, model.training)
        h = normalize(p, f"{prefix}.ffn_ln", x, cfg.ln_eps)
        x = residual(x, feed_forward(p, f"{prefix}.ffn", h), cfg.dropout, model.rng, model.training)
    return EncoderOutput(normalize(p, "enc.ln_final", x, cfg.ln_eps), mask)


def _check_prefix(model, ids):
    if (ids[:, 0] != BOS_ID).any():
        raise InputError("Every decoder prefix must start with BOS")
    if ids.max() >= model.config.tgt_vocab_size:
        raise InputError(f"Target id {ids.max()} outside vocabulary of {model.config.tgt_vocab_size}")


def _pad_to(ids, length):
    if ids.shape[1] == length:
        return ids
    return np.pad(ids, ((0, 0), (0, length - ids.shape[1])), constant_values=PAD_ID)


def _cross_exchange(model, layer, states, key_masks, coupling):
    """Cross-decoder attention for both decoders on the states entering this sublayer."""
    cfg = model.config
    p = model.params
    updated = {}
    for side, other in ((1, 2), (2, 1)):
        prefix = f"dec{side}.layers.{layer}"
        memory = normalize(p, f"{prefix}.cross_kv_ln", states[other], cfg.ln_eps)
        batch, length, width = memory.shape
        null_slot = constant(np.zeros((batch, 1, width)))
        memory = concat([null_slot, memory[:, :length - 1, :]], axis=1)
        keys = np.concatenate([np.ones((batch, 1), dtype=bool), key_masks[other][:, :length - 1]], axis=1)

        if coupling == "attend-best":
            memory, keys = memory[0:1], keys[0:1]
        elif coupling == "attend-average":
            memory, keys = memory.mean(axis=0, keepdims=True), keys.any(axis=0, keepdims=True)

        mask = keys[:, None, None, :] & causal_mask(length)[None, None, :, :]
        query = normalize(p, f"{prefix}.cross_ln", states[side], cfg.ln_eps)
        branch = multi_head_attention(p, f"{prefix}.cross_attn", query, memory, mask, cfg.heads)
        updated[side] = residual(states[side], branch, cfg.dropout, model.rng, model.training)
    return updated


def _run_decoders(model, enc, prefixes, coupling):
    cfg = model.config
    p = model.params
    if coupling not in COUPLING_SCHEMES:
        raise ContractError(f"Unknown coupling scheme {coupling!r}, expected one of {COUPLING_SCHEMES}")

    sides = sorted(prefixes)
    length = max(ids.shape[1] for ids in prefixes.values())
    batch = prefixes[sides[0]].shape[0]
    ids = {}
    for side in sides:
        if prefixes[side].shape[0] != batch:
            raise InputError("Decoder prefixes disagree on batch size")
        ids[side] = _pad_to(prefixes[side], length)
        _check_prefix(model, ids[side])
    if enc.batch_size not in (1, batch):
        raise InputError(f"Encoder batch {enc.batch_size} does not match decoder batch {batch}")

    key_masks = {side: ids[side] != PAD_ID for side in sides}
    self_masks = {side: attention_mask(key_masks[side], length, causal=True) for side in sides}
    enc_mask = enc.mask[:, None, None, :]
    exchange = cfg.has_cross_attention and len(sides) == 2

    h = {side: _embed(model, model.embedding_matrix(side), ids[side]) for side in sides}
    for layer in range(cfg.dec_layers):
        for side in sides:
            prefix = f"dec{side}.layers.{layer}"
            normed = normalize(p, f"{prefix}.self_ln", h[side], cfg.ln_eps)
            branch = multi_head_attention(p, f"{prefix}.self_attn", normed, normed, self_masks[side], cfg.heads)
            h[side] = residual(h[side], branch, cfg.dropout, model.rng, model.training)
        if exchange and cfg.cross_attn_position == "before-encdec":
            h = _cross_exchange(model, layer, h, key_masks, coupling)
        for side in sides:
            prefix = f"dec{side}.layers.{layer}"
            normed = normalize(p, f"{prefix}.encdec_ln", h[side], cfg.ln_eps)
            branch = multi_head_attention(p, f"{prefix}.encdec_attn", normed, enc.states, enc_mask, cfg.heads)
            h[side] = residual(h[side], branch, cfg.dropout, model.rng, model.training)
        if exchange and cfg.cross_attn_position == "after-encdec":
            h = _cross_exchange(model, layer, h, key_masks, coupling)
        for side in sides:
            prefix = f"dec{side}.layers.{layer}"
            normed = normalize(p, f"{prefix}.ffn_ln", h[side], cfg.ln_eps)
            h[side] = residual(h[side], feed_forward(p, f"{prefix}.ffn", normed), cfg.dropout, model.rng, model.training)

    logits = {}
    for side in sides:
        final = normalize(p, f"dec{side}.ln_final", h[side], cfg.ln_eps)
        logits[side] = matmul(final, model.output_matrix(side).transpose(1, 0))
    return logits


def dual_forward(model, enc, prefix1, prefix2, coupling="rank-aligned"):
    """
    Run both decoders over their prefixes.

    Args:
        model (DualModel): a two-decoder model
        enc (EncoderOutput): encoder output, batch 1 or matching the prefixes
        prefix1, prefix2 (array-like of int): (batch, L1) and (batch, L2),
            each row starting with BOS; the shorter one is right-padded
        coupling (str): how rows of the batch see each other in the cross
            sublayer: "rank-aligned" (row i with row i), "attend-best"
            (every row attends to row 0 of the other decoder) or
            "attend-average" (every row attends to the row mean)

    Returns:
        tuple: (logits1, logits2), each a Tensor of shape (batch, L, V)
    """
    if model.config.num_decoders != 2:
        raise ContractError("dual_forward needs a two-decoder model")
    logits = _run_decoders(model, enc, {1: _as_ids(prefix1, "Prefix 1"), 2: _as_ids(prefix2, "Prefix 2")},
                           coupling)
    return logits[1], logits[2]


def decoder_forward(model, enc, prefix, side=1):
    """
    Run one decoder alone. Valid for single-decoder and independent models.

    Raises:
        ContractError: the model couples its decoders through cross attention
    """
    if model.config.has_cross_attention:
        raise ContractError("A cross-attending decoder cannot run without its partner; use dual_forward")
    if side not in model.sides:
        raise ContractError(f"Model has no decoder {side}")
    return _run_decoders(model, enc, {side: _as_ids(prefix, "Prefix")}, "rank-aligned")[side]


def next_token_log_probs(logits):
    """Log-distribution over the vocabulary at the last position: (batch, V) array."""
    return log_softmax(logits[:, -1, :], axis=-1).data


# ----- initialization from a pre-trained single decoder model -----

_ARCH_FIELDS = ("src_vocab_size", "tgt_vocab_size", "d_model", "d_ff", "heads",
                "enc_layers", "dec_layers", "max_positions")


def init_from_pretrained(pretrained, config):
    """
    Build a two-decoder model whose encoder and both decoders start from a
    pre-trained single-decoder model. Decoder 1 cross-attention parameters
    keep their fresh initialization from config.seed and decoder 2 receives a
    copy, so the two decoders start bit-identical.

    Args:
        pretrained (DualModel): model with coupling "single"
        config (ModelConfig): target configuration, coupling "dual" or "independent"

    Returns:
        DualModel: the initialized model

    Raises:
        CheckpointError: incompatible architectures
    """
    source = pretrained.config
    if source.coupling != "single":
        raise CheckpointError(f"Pre-trained model must have coupling 'single', got {source.coupling!r}")
    if config.num_decoders != 2:
        raise CheckpointError("Initialization target must have two decoders")
    mismatched = [name for name in _ARCH_FIELDS if getattr(source, name) != getattr(config, name)]
    if mismatched:
        raise CheckpointError(f"Architecture mismatch with pre-trained model on {mismatched}")

    model = DualModel(config)
    for name, tensor in model.params.items():
        if name.startswith("enc."):
            source_name = name
        elif name == "dec.embed" or name.endswith(".embed"):
            source_name = "dec1.embed"
        elif ".cross_" in name:
            if name.startswith("dec1."):
                continue
            source_name = "dec1." + name.split(".", 1)[1]
            tensor.data = model.params[source_name].data.copy()
            continue
        else:
            source_name = "dec1." + name.split(".", 1)[1]
        tensor.data = pretrained.params[source_name].data.astype(tensor.data.dtype, copy=True)
    logger.info(f"Initialized {config.coupling} model from pre-trained single-decoder weights")
    return model
