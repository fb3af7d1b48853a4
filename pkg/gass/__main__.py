import sys

from gass.cli import main

sys.exit(main())
