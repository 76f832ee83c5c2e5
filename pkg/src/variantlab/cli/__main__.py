import sys

from variantlab.cli import main

sys.exit(main())
