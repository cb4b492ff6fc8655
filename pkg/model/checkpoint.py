"""
Checkpoint persistence.

A checkpoint is a numpy .npz archive holding one array per unique parameter
("param/<name>") plus "__meta__", a JSON document with the format tag,
version, model configuration and parameter names. Files are written through
a temporary file and renamed, so an interrupted save never leaves a partial
checkpoint behind.
"""

import io
import json
import logging
import os
import zipfile

import numpy as np

from errors import CheckpointError
from model.config import ModelConfig
from model.dual_model import DualModel
from utils import atomic_write_bytes

# Set up logging
logging.basicConfig(level=logging.INFO, format='%(asctime)s - %(name)s - %(levelname)s - %(message)s')
logger = logging.getLogger(__name__)

FORMAT_TAG = "dualdec-checkpoint"
FORMAT_VERSION = 1


def save_checkpoint(model, path, extra=None):
    """
    Save model parameters and configuration.

    Args:
        model (DualModel): Model to save
        path (str): Destination file
        extra (dict, optional): JSON-serializable metadata (step, dev loss, ...)
    """
    named = model.named_parameters()
    meta = {
        "format": FORMAT_TAG,
        "version": FORMAT_VERSION,
        "config": model.config.to_dict(),
        "params": [name for name, _ in named],
        "extra": extra or {},
    }
    arrays = {f"param/{name}": tensor.data for name, tensor in named}
    arrays["__meta__"] = np.array(json.dumps(meta, sort_keys=True))

    buffer = io.BytesIO()
    np.savez(buffer, **arrays)
    atomic_write_bytes(path, buffer.getvalue())
    logger.info(f"Checkpoint saved to {path} ({model.num_parameters()} values)")


def read_checkpoint_meta(path):
    """Return (meta dict, archive) for a checkpoint file, raising CheckpointError on damage."""
    if not os.path.exists(path):
        raise CheckpointError(f"No such checkpoint: {path}")
    try:
        with open(path, "rb") as handle:
            archive = np.load(io.BytesIO(handle.read()), allow_pickle=False)
        meta = json.loads(archive["__meta__"].item())
    except (OSError, ValueError, KeyError, EOFError, zipfile.BadZipFile) as exc:
        raise CheckpointError(f"{path}: unreadable checkpoint ({exc})") from exc
    if meta.get("format") != FORMAT_TAG:
        raise CheckpointError(f"{path}: not a {FORMAT_TAG} file")
    if meta.get("version") != FORMAT_VERSION:
        raise CheckpointError(f"{path}: unsupported checkpoint version {meta.get('version')}")
    return meta, archive


def load_checkpoint(path, expected=None):
    """
    Load a model from a checkpoint.

    Args:
        path (str): Checkpoint file
        expected (ModelConfig, optional): When given, the stored architecture
            and coupling must match it exactly

    Returns:
        DualModel: Restored model

    Raises:
        CheckpointError: missing, truncated or incompatible checkpoint
    """
    meta, archive = read_checkpoint_meta(path)
    try:
        config = ModelConfig.from_dict(meta["config"])
    except Exception as exc:
        raise CheckpointError(f"{path}: invalid stored configuration ({exc})") from exc

    if expected is not None:
        stored, wanted = config.to_dict(), expected.to_dict()
        differing = sorted(key for key in wanted if key not in ("dropout", "seed") and stored[key] != wanted[key])
        if differing:
            details = ", ".join(f"{key}: checkpoint={stored[key]!r} requested={wanted[key]!r}" for key in differing)
            raise CheckpointError(f"{path}: checkpoint does not match the requested model ({details})")

    model = DualModel(config)
    names = [name for name, _ in model.named_parameters()]
    if sorted(names) != sorted(meta.get("params", [])):
        raise CheckpointError(f"{path}: parameter set does not match its configuration")

    try:
        for name, tensor in model.named_parameters():
            array = archive[f"param/{name}"]
            if array.shape != tensor.shape:
                raise CheckpointError(f"{path}: parameter {name} has shape {array.shape}, expected {tensor.shape}")
            tensor.data = array.astype(tensor.data.dtype)
    except (OSError, ValueError, KeyError, EOFError, zipfile.BadZipFile) as exc:
        raise CheckpointError(f"{path}: unreadable parameter data ({exc})") from exc

    logger.info(f"Loaded {config.coupling} model from {path}")
    return model
