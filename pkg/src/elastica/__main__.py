"""Module execution shim: python -m elastica ..."""

import sys

from .cli import main

sys.exit(main())
