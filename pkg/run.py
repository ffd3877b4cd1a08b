#!/usr/bin/env python3
"""
Quick Start Script
==================

Runs the fast invariant checks with the default parameters.
"""

import sys
import os

# Add src to Python path
sys.path.insert(0, os.path.join(os.path.dirname(__file__), 'src'))

from cli import main
from config.sim_config import SimulationConfig

if __name__ == '__main__':
    print("🚀 OPTOMECHANICAL FOCK-STATE PREPARATION - Quick Start")
    print("=" * 55)
    print(f"🔧 k = {SimulationConfig.K:.5f}, eta_max = {SimulationConfig.ETA_MAX}, "
          f"horizon = {SimulationConfig.HORIZON_BLOCKS} blocks")
    print(f"📐 Truncation: cavity {SimulationConfig.CAVITY_DIM} x mechanics {SimulationConfig.MECH_DIM}")
    print("=" * 55)

    sys.exit(main(["verify", "--quick"]))
