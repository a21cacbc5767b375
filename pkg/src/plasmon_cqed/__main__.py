import sys

from plasmon_cqed.cli import main

sys.exit(main())
