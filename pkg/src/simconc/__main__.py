import sys

from simconc.cli import main

sys.exit(main())
