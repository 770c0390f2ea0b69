import sys

from src.ui.cli_app import main

if __name__ == "__main__":
    sys.exit(main())
