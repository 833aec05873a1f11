"""
HEPFAC command-line entry point.

Usage: python hepfac.py <gen|build|compress|stats|match|prefix|bench> [options]
"""

import os
import sys

sys.path.insert(0, os.path.join(os.path.dirname(__file__), 'src'))

from config import load_env_file

# Load .env file if it exists (HEPFAC_WORKERS and friends)
load_env_file(os.path.join(os.path.dirname(__file__), '.env'))

from cli import run

if __name__ == "__main__":
    sys.exit(run())
