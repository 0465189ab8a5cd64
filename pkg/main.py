#!/usr/bin/env python3
"""
Main CLI interface for modal-jumps simulations.

Thin wrapper so the simulator runs from a checkout without installing:
    python main.py trajectory --preset single-mode
The installed console script `modal-jumps` calls the same entry point.
"""
import sys
from pathlib import Path

# Import our modules
sys.path.insert(0, str(Path(__file__).resolve().parent))
from modaljump.cli import main

if __name__ == "__main__":
    sys.exit(main())
