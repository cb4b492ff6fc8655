"""
Model configuration.
"""

import logging
from dataclasses import asdict, dataclass, fields

from errors import ConfigError

# Set up logging
logging.basicConfig(level=logging.INFO, format='%(asctime)s - %(name)s - %(levelname)s - %(message)s')
logger = logging.getLogger(__name__)

COUPLINGS = ("dual", "independent", "single")
CROSS_POSITIONS = ("after-encdec", "before-encdec")
TIE_MODES = ("per-decoder", "all-four")


@dataclass
class ModelConfig:
    """
    Architecture hyperparameters.

    coupling:
        dual         two decoders with cross-decoder attention
        independent  two decoders sharing the encoder, no cross attention
        single       one tag-steered decoder (multilingual pre-training)
    """
    src_vocab_size: int = 8000
    tgt_vocab_size: int = 8000
    d_model: int = 512
    d_ff: int = 2048
    heads: int = 8
    enc_layers: int = 6
    dec_layers: int = 6
    coupling: str = "dual"
    cross_attn_position: str = "after-encdec"
    tie_mode: str = "per-decoder"
    dropout: float = 0.1
    max_positions: int = 1024
    ln_eps: float = 1e-6
    seed: int = 1

    def __post_init__(self):
        for name in ("src_vocab_size", "tgt_vocab_size", "d_model", "d_ff", "heads",
                     "enc_layers", "dec_layers", "max_positions"):
            if int(getattr(self, name)) < 1:
                raise ConfigError(f"model.{name} must be positive")
        if self.d_model % self.heads:
            raise ConfigError(f"d_model={self.d_model} is not divisible by heads={self.heads}")
        if self.coupling not in COUPLINGS:
            raise ConfigError(f"Unknown coupling {self.coupling!r}, expected one of {COUPLINGS}")
        if self.cross_attn_position not in CROSS_POSITIONS:
            raise ConfigError(f"Unknown cross_attn_position {self.cross_attn_position!r}")
        if self.tie_mode not in TIE_MODES:
            raise ConfigError(f"Unknown tie_mode {self.tie_mode!r}")
        if not 0.0 <= self.dropout < 1.0:
            raise ConfigError("model.dropout must be in [0, 1)")

    @property
    def num_decoders(self):
        return 1 if self.coupling == "single" else 2

    @property
    def has_cross_attention(self):
        return self.coupling == "dual"

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, values):
        known = {f.name for f in fields(cls)}
        unknown = set(values) - known
        if unknown:
            raise ConfigError(f"Unknown model settings: {sorted(unknown)}")
        return cls(**values)
