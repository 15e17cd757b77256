import os
import logging
from dotenv import load_dotenv

load_dotenv()

class Config:
    LOG_LEVEL = os.environ.get('LOG_LEVEL') or 'INFO'
    LOG_FORMAT = os.environ.get('LOG_FORMAT') or '%(asctime)s %(levelname)s %(name)s: %(message)s'


def setup_logging(level=None):
    """Configure root logging once for command-line runs"""
    level_name = (level or Config.LOG_LEVEL).upper()
    logging.basicConfig(level=getattr(logging, level_name, logging.INFO), format=Config.LOG_FORMAT)
