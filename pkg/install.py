#!/usr/bin/env python3
"""Install requirements.txt and check that every package imports."""
import importlib
import subprocess
import sys

IMPORT_NAMES = ["numpy", "scipy", "pandas", "matplotlib", "tqdm", "yaml", "pytest", "hypothesis"]

subprocess.check_call([sys.executable, "-m", "pip", "install", "-r", "requirements.txt"])

missing = []
for name in IMPORT_NAMES:
    try:
        importlib.import_module(name)
    except ImportError:
        missing.append(name)
if missing:
    print(f"ERROR: could not import {', '.join(missing)}")
    sys.exit(1)
print(f"OK: {len(IMPORT_NAMES)} packages importable")
