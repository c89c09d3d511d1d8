# main.py - Entry point for LosaTAL
# Runs the command-line front end (generate, train, eval, ablate, gradcheck, memreport).

import os
import sys

# Add the project root to the Python path to ensure modules are found
project_root = os.path.dirname(os.path.abspath(__file__))
sys.path.insert(0, project_root)

from Core.log_utils import log  # noqa: E402


def main():
    # Main entry point for the LosaTAL command line.
    try:
        from Cli import cli_app
        return cli_app.main()
    except Exception as e:
        log(f"Unhandled failure: {e}")
        raise


if __name__ == "__main__":
    if sys.version_info < (3, 9):
        log("This application requires Python 3.9 or higher.")
        sys.exit(1)
    sys.exit(main())
