import sys

from texfield.cli import main

sys.exit(main())
