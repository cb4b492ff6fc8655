"""
Repository module for database operations.

This module provides functions for storing training runs, metrics and
evaluation reports. Every function returns None/False on failure and logs
the error, so an unavailable run store never interrupts training.
"""

import logging
import json
from datetime import datetime

import pandas as pd

from database.connection import get_session
from database.models import EvalReport, MetricRecord, TrainingRun

# Set up logging
logging.basicConfig(level=logging.INFO, format='%(asctime)s - %(name)s - %(levelname)s - %(message)s')
logger = logging.getLogger(__name__)

# ----- TrainingRun Repository Methods -----


def create_run(kind, coupling, seed, config):
    """
    Register a new training run.

    Args:
        kind (str): "train" or "pretrain"
        coupling (str): model coupling
        seed (int): run seed
        config (dict): full configuration

    Returns:
        int: ID of the run, or None
    """
    session = get_session()
    if not session:
        return None

    try:
        run = TrainingRun(kind=kind, coupling=coupling, seed=seed,
                          config_json=json.dumps(config, sort_keys=True))
        session.add(run)
        session.commit()
        logger.info(f"Registered {kind} run with ID: {run.id}")
        return run.id

    except Exception as e:
        session.rollback()
        logger.error(f"Error creating training run: {str(e)}")
        return None

    finally:
        session.close()


def add_metric(run_id, record):
    """
    Append one metrics record to a run.

    Args:
        run_id (int): run ID
        record (dict): {step, train_loss, dev_loss, lr, wall_ms}

    Returns:
        bool: True if saved
    """
    if run_id is None:
        return False
    session = get_session()
    if not session:
        return False

    try:
        session.add(MetricRecord(run_id=run_id, **{key: record[key] for key in
                                                   ("step", "train_loss", "dev_loss", "lr", "wall_ms")}))
        session.commit()
        return True

    except Exception as e:
        session.rollback()
        logger.error(f"Error saving metric record for run {run_id}: {str(e)}")
        return False

    finally:
        session.close()


def finish_run(run_id, best_step, best_value, checkpoint_path=None, status='finished'):
    """
    Mark a run as finished with its best result.

    Returns:
        bool: True if updated
    """
    if run_id is None:
        return False
    session = get_session()
    if not session:
        return False

    try:
        run = session.query(TrainingRun).filter(TrainingRun.id == run_id).first()
        if not run:
            logger.warning(f"No training run found with ID: {run_id}")
            return False
        run.finished_at = datetime.utcnow()
        run.best_step = best_step
        run.best_value = best_value
        run.checkpoint_path = checkpoint_path
        run.status = status
        session.commit()
        logger.info(f"Run {run_id} {status}: best step {best_step}")
        return True

    except Exception as e:
        session.rollback()
        logger.error(f"Error finishing run {run_id}: {str(e)}")
        return False

    finally:
        session.close()


def get_run(run_id):
    """
    Get a training run by ID.

    Returns:
        dict: run as dictionary, or None
    """
    session = get_session()
    if not session:
        return None

    try:
        run = session.query(TrainingRun).filter(TrainingRun.id == run_id).first()
        return run.to_dict() if run else None

    except Exception as e:
        logger.error(f"Error getting run {run_id}: {str(e)}")
        return None

    finally:
        session.close()


def get_run_metrics(run_id):
    """
    Load the metric records of a run.

    Returns:
        pandas.DataFrame: one row per evaluation ordered by step, or None
    """
    session = get_session()
    if not session:
        return None

    try:
        records = (session.query(MetricRecord)
                   .filter(MetricRecord.run_id == run_id)
                   .order_by(MetricRecord.step)
                   .all())
        return pd.DataFrame([r.to_dict() for r in records],
                            columns=["step", "train_loss", "dev_loss", "lr", "wall_ms"])

    except Exception as e:
        logger.error(f"Error getting metrics for run {run_id}: {str(e)}")
        return None

    finally:
        session.close()

# ----- EvalReport Repository Methods -----


def save_eval_report(metric, score, details):
    """
    Store an evaluation report.

    Returns:
        int: ID of the report, or None
    """
    session = get_session()
    if not session:
        return None

    try:
        report = EvalReport(metric=metric, score=score, details_json=json.dumps(details, sort_keys=True))
        session.add(report)
        session.commit()
        logger.info(f"Saved {metric} report with ID: {report.id}")
        return report.id

    except Exception as e:
        session.rollback()
        logger.error(f"Error saving eval report: {str(e)}")
        return None

    finally:
        session.close()


def get_eval_reports(metric=None):
    """
    List stored evaluation reports, newest first.

    Returns:
        list: reports as dictionaries
    """
    session = get_session()
    if not session:
        return []

    try:
        query = session.query(EvalReport)
        if metric:
            query = query.filter(EvalReport.metric == metric)
        return [r.to_dict() for r in query.order_by(EvalReport.id.desc()).all()]

    except Exception as e:
        logger.error(f"Error listing eval reports: {str(e)}")
        return []

    finally:
        session.close()
