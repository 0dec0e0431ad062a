"""Allow ``python -m mbdyn``."""

import sys

from .cli import main

sys.exit(main())
