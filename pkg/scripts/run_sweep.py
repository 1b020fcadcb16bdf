#!/usr/bin/env python3
"""Run the default delay sweep (or pass the same flags the CLI takes)."""

import sys

from voipsim.cli import main

if __name__ == "__main__":
    sys.exit(main())
