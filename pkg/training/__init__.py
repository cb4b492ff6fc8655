"""
Joint maximum-likelihood training, early stopping and multilingual pre-training.
"""

from training.loss import joint_loss, side_losses, token_accuracy
from training.trainer import TrainConfig, TrainResult, dev_loss, load_metrics, train
from training.pretrain import pretrain_multilingual
