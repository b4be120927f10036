import sys

from dpcompozer.cli import main

sys.exit(main())
