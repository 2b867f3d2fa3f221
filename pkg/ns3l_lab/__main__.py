import sys

from ns3l_lab.main import main

sys.exit(main())
