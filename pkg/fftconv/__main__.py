import sys

from fftconv.bench import main

sys.exit(main())
