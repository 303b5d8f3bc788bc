"""Allow ``python -m gridcraft``."""

import sys

from .cli import main

if __name__ == "__main__":
    sys.exit(main())
