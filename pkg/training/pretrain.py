"""
Tag-steered multilingual pre-training.

One encoder and one decoder learn both translation directions from two
bilingual corpora that share their source language. A target-language tag
token is the first source position and selects the output language. The
resulting single-decoder model initializes both decoders of a dual model.
"""

import logging
from dataclasses import replace

from data_processor import encode_samples, split_dev
from datakit.corpus import TriSample
from errors import ConfigError, InputError
from model import DualModel
from training.trainer import train

# Set up logging
logging.basicConfig(level=logging.INFO, format='%(asctime)s - %(name)s - %(levelname)s - %(message)s')
logger = logging.getLogger(__name__)


def tagged_samples(bitext, tag, src_model, tgt_model):
    """Encode a bitext for the single decoder: tagged source, target on side 1."""
    sentences = [TriSample(src, tgt, tgt) for src, tgt in bitext.pairs()]
    return encode_samples(sentences, src_model, tgt_model, src_tag=tag)


def pretrain_multilingual(bitext1, bitext2, src_model, tgt_model, tags, model_config, train_config,
                          metrics_path=None, on_record=None, on_improve=None):
    """
    Train a single-decoder model on two bitexts.

    Args:
        bitext1 (Bitext): source to language 1
        bitext2 (Bitext): source to language 2
        src_model (SubwordModel): source subwords; must declare both tags
        tgt_model (SubwordModel): target subwords covering both languages
        tags (tuple): (tag for language 1, tag for language 2)
        model_config (ModelConfig): architecture; coupling is forced to "single"
        train_config (TrainConfig): training settings; dev_fraction carves the dev set

    Returns:
        TrainResult: the trained single-decoder model and its history

    Raises:
        ConfigError: undeclared or duplicate tags
        InputError: empty corpora
    """
    tag1, tag2 = tags
    if tag1 == tag2:
        raise ConfigError(f"The two target tags must differ, got {tag1!r} twice")
    if len(bitext1) == 0 or len(bitext2) == 0:
        raise InputError("Both bitexts must be non-empty")
    for tag in tags:
        src_model.tag_id(tag)

    samples = (tagged_samples(bitext1, tag1, src_model, tgt_model)
               + tagged_samples(bitext2, tag2, src_model, tgt_model))
    train_samples, dev_samples = split_dev(samples, train_config.dev_fraction, train_config.seed)
    train_keys = {(s.src, s.tgt1) for s in train_samples}
    dev_samples = [s for s in dev_samples if (s.src, s.tgt1) not in train_keys]
    if not dev_samples:
        raise InputError("Dev split is empty after removing duplicates of training samples")

    config = replace(model_config, coupling="single", src_vocab_size=len(src_model),
                     tgt_vocab_size=len(tgt_model))
    model = DualModel(config)
    logger.info(f"Pre-training single decoder with tags {tag1}/{tag2} on {len(train_samples)} samples")
    return train(model, train_samples, dev_samples, train_config, metrics_path, on_record, on_improve)
