import sys

from bmadex.cli import main

sys.exit(main())
