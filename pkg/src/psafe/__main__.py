import sys

from psafe.cli import main

sys.exit(main())
