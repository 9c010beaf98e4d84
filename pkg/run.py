"""
OptConn Startup Wrapper
Runs the command line from a source checkout
"""

import os
import sys

# Make the project root importable when started from elsewhere
sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

if __name__ == '__main__':
    from app import main
    raise SystemExit(main())
