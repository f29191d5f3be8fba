import sys

from ordinal_qwk.cli import main

sys.exit(main())
