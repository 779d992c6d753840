"""
Configuration file for the transfer-learning workbench
All parameters are loaded from environment variables or defaults
"""
import os
from dotenv import load_dotenv

# Load environment variables from .env file
load_dotenv()

VERSION = '1.0.0'

# Experiment files and output
EXPERIMENT_FILE = os.getenv('TSFT_EXPERIMENT_FILE', 'config/experiment.json')
OUTPUT_ROOT = os.getenv('TSFT_OUTPUT_ROOT', 'runs')
EXPERIMENT_FORMAT_VERSION = 1

# Domain distance defaults (overridable per experiment file)
MMD_SUBSAMPLE = int(os.getenv('TSFT_MMD_SUBSAMPLE', '2000'))
MMD_MAX_PAIRS = int(os.getenv('TSFT_MMD_MAX_PAIRS', '1000'))

# Logging Configuration
# Kept outside the run directories so artifact trees stay reproducible
LOG_LEVEL = os.getenv('LOG_LEVEL', 'INFO')
LOG_FILE = os.getenv('LOG_FILE', 'logs/workbench.log')
