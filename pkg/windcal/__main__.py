import sys

from windcal.main import main

sys.exit(main())
