import sys

from gmsdi.cli import entry

sys.exit(entry())
