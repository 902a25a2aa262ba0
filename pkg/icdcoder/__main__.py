import sys

from entrypoints.run_pipeline import main

sys.exit(main())
