import sys

from rahl.cli import main

sys.exit(main())
