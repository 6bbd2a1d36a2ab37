import sys

from chromalex.cli import main

sys.exit(main())
