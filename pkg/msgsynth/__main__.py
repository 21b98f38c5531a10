import sys

from msgsynth.cli import main

sys.exit(main())
