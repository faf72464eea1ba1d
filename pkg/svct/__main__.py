import sys

from svct.main import main

sys.exit(main())
