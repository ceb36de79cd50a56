"""
Environment-level settings for the PINC toolkit.

This module holds process-wide settings read from the environment:
- Seed override for reproducible runs
- Logging destination and level
- Preset lookup for grid files
- Worker counts for parallel generation and grid cells
"""

import os
from dotenv import load_dotenv

# Load environment variables from .env file
load_dotenv()

# Reproducibility
PINC_SEED = os.getenv("PINC_SEED")  # overrides every configured seed when set

# Presets
PRESET_DIR = os.getenv("PINC_PRESET_DIR", os.path.join(os.path.dirname(os.path.abspath(__file__)), "presets"))

# Compute Settings
PARALLEL_WORKERS = int(os.getenv("PINC_PARALLEL_WORKERS", "1"))

# Logging Settings
LOG_LEVEL = os.getenv("LOG_LEVEL", "INFO")
LOG_FILE = os.getenv("LOG_FILE", "")
