import sys

from slotexchange.cli import main

sys.exit(main())
