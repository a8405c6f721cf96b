#!/usr/bin/env python3
"""
RIS-aided THz link simulator - Setup Script
This script installs the numerical stack and checks that the simulator imports.
"""

import sys
import subprocess
import logging
from pathlib import Path

# Configure logging
logging.basicConfig(
    level=logging.INFO,
    format='%(asctime)s - %(levelname)s - %(message)s'
)
logger = logging.getLogger(__name__)


def check_python_version():
    """Check if Python version is compatible"""
    if sys.version_info < (3, 8):
        logger.error("❌ Python 3.8 or higher is required")
        return False
    logger.info(f"✅ Python {sys.version_info.major}.{sys.version_info.minor} detected")
    if sys.version_info < (3, 11):
        logger.info("📋 TOML configuration files need Python 3.11+; JSON works everywhere")
    return True


def install_python_dependencies():
    """Install Python dependencies"""
    try:
        logger.info("📦 Installing Python dependencies...")
        subprocess.check_call([sys.executable, "-m", "pip", "install", "-r", "requirements.txt"])
        logger.info("✅ Python dependencies installed successfully")
        return True
    except subprocess.CalledProcessError as e:
        logger.error(f"❌ Failed to install Python dependencies: {e}")
        return False


def create_directories():
    """Create the directory experiment CSVs are written to"""
    for directory in ['results']:
        Path(directory).mkdir(exist_ok=True)
        logger.info(f"📁 Directory ready: {directory}")


def test_imports():
    """Test if all modules can be imported and the default config loads"""
    try:
        logger.info("🧪 Testing module imports...")

        from utils.harness import run_oracle, run_throughput
        from utils.optimizers import bcd
        from utils.sdr import bisection_sdr
        from config import load_default_config

        cfg = load_default_config()
        logger.info(f"✅ All modules imported; default carrier {cfg.scenario.frequency_hz / 1e9:.0f} GHz")
        return True
    except Exception as e:
        logger.error(f"❌ Import error: {e}")
        return False


def main():
    """Main setup function"""
    logger.info("🚀 Setting up the RIS-aided THz link simulator...")

    # Check Python version
    if not check_python_version():
        sys.exit(1)

    # Install Python dependencies
    if not install_python_dependencies():
        sys.exit(1)

    # Create directories
    create_directories()

    # Test imports
    if not test_imports():
        logger.error("❌ Setup incomplete - some modules failed to import")
        sys.exit(1)

    logger.info("🎉 Setup completed successfully!")
    logger.info("📡 Run the closed-form self-checks with: python app.py oracle")
    logger.info("📈 Run an experiment with: python app.py throughput --sweep N=16,36,64 --out results/throughput.csv")


if __name__ == '__main__':
    if len(sys.argv) > 1:
        # Invoked by a build backend (pip install); metadata lives in pyproject.toml
        from setuptools import setup
        setup()
    else:
        main()
