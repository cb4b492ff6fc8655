"""
Database connection module for the dual-decoding toolkit.

This module handles database connection management and session creation.
The run store is optional: it is enabled when a URL is configured, either
through the DUALDEC_DATABASE_URL environment variable or the "database.url"
config setting.
"""

import logging
import os

from sqlalchemy import create_engine
from sqlalchemy.orm import declarative_base, scoped_session, sessionmaker

# Set up logging
logging.basicConfig(level=logging.INFO, format='%(asctime)s - %(name)s - %(levelname)s - %(message)s')
logger = logging.getLogger(__name__)

# Get database URL from environment variable; empty disables the run store
DATABASE_URL = os.environ.get('DUALDEC_DATABASE_URL', '')

engine = None
Session = None

# Create base class for declarative models
Base = declarative_base()


def configure(url=None):
    """
    Create the engine and session factory for a database URL.

    Args:
        url (str, optional): SQLAlchemy URL; defaults to DATABASE_URL

    Returns:
        bool: True if the database is usable
    """
    global engine, Session
    url = url if url is not None else DATABASE_URL
    if Session is not None:
        Session.remove()
    engine, Session = None, None
    if not url:
        logger.debug("No database URL configured; run store disabled")
        return False

    try:
        engine = create_engine(url)
        Session = scoped_session(sessionmaker(bind=engine))
        logger.info(f"Database engine created with URL: {url}")
    except Exception as e:
        logger.error(f"Error creating database engine: {str(e)}")
        engine, Session = None, None
        return False
    return init_db()


def is_enabled():
    return Session is not None


def get_session():
    """
    Get a database session.

    Returns:
        Session: A database session object, or None when the store is disabled
    """
    if Session is None:
        logger.debug("Cannot create session, run store is disabled")
        return None

    try:
        return Session()
    except Exception as e:
        logger.error(f"Error creating session: {str(e)}")
        return None


def init_db():
    """
    Initialize database schema.

    Creates all tables defined in the models.
    """
    if engine is None:
        logger.error("Cannot initialize database, engine is None")
        return False

    try:
        # Import models here to avoid circular imports
        from database.models import EvalReport, MetricRecord, TrainingRun  # noqa: F401

        Base.metadata.create_all(engine)
        logger.info("Database tables created successfully")
        return True
    except Exception as e:
        logger.error(f"Error initializing database: {str(e)}")
        return False


if DATABASE_URL:
    configure(DATABASE_URL)
