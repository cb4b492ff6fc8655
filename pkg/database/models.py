"""
Database models for the dual-decoding toolkit.

This module defines the database models for storing training runs, their
metric records and evaluation reports.
"""

import logging
import json
from datetime import datetime

from sqlalchemy import Column, DateTime, Float, ForeignKey, Integer, String, Text
from sqlalchemy.orm import relationship

from database.connection import Base

# Set up logging
logging.basicConfig(level=logging.INFO, format='%(asctime)s - %(name)s - %(levelname)s - %(message)s')
logger = logging.getLogger(__name__)


class TrainingRun(Base):
    """Model for one training or pre-training run."""
    __tablename__ = 'training_runs'

    id = Column(Integer, primary_key=True)
    started_at = Column(DateTime, default=datetime.utcnow, index=True)
    finished_at = Column(DateTime, nullable=True)
    kind = Column(String(20))  # train or pretrain
    coupling = Column(String(20))
    seed = Column(Integer)
    config_json = Column(Text)
    status = Column(String(20), default='running')
    best_step = Column(Integer, nullable=True)
    best_value = Column(Float, nullable=True)
    checkpoint_path = Column(String(500), nullable=True)

    # Relationships
    metrics = relationship("MetricRecord", back_populates="run", cascade="all, delete-orphan")

    def to_dict(self):
        """Convert model to dictionary."""
        return {
            'id': self.id,
            'started_at': self.started_at.strftime("%Y-%m-%d %H:%M:%S") if self.started_at else None,
            'finished_at': self.finished_at.strftime("%Y-%m-%d %H:%M:%S") if self.finished_at else None,
            'kind': self.kind,
            'coupling': self.coupling,
            'seed': self.seed,
            'config': json.loads(self.config_json) if self.config_json else {},
            'status': self.status,
            'best_step': self.best_step,
            'best_value': self.best_value,
            'checkpoint_path': self.checkpoint_path,
        }


class MetricRecord(Base):
    """Model for one dev evaluation of a run."""
    __tablename__ = 'metric_records'

    id = Column(Integer, primary_key=True)
    run_id = Column(Integer, ForeignKey('training_runs.id'), index=True)
    step = Column(Integer)
    train_loss = Column(Float)
    dev_loss = Column(Float)
    lr = Column(Float)
    wall_ms = Column(Integer)

    # Relationships
    run = relationship("TrainingRun", back_populates="metrics")

    def to_dict(self):
        """Convert model to dictionary."""
        return {
            'step': self.step,
            'train_loss': self.train_loss,
            'dev_loss': self.dev_loss,
            'lr': self.lr,
            'wall_ms': self.wall_ms,
        }


class EvalReport(Base):
    """Model for storing an evaluation report."""
    __tablename__ = 'eval_reports'

    id = Column(Integer, primary_key=True)
    created_at = Column(DateTime, default=datetime.utcnow, index=True)
    metric = Column(String(30))  # bleu, consistency, copy
    score = Column(Float)
    details_json = Column(Text)

    def to_dict(self):
        """Convert model to dictionary."""
        return {
            'id': self.id,
            'created_at': self.created_at.strftime("%Y-%m-%d %H:%M:%S") if self.created_at else None,
            'metric': self.metric,
            'score': self.score,
            'details': json.loads(self.details_json) if self.details_json else {},
        }
