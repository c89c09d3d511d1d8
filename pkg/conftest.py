# conftest.py - Puts the project root on sys.path for the test suite, as main.py does.

import os
import sys

project_root = os.path.dirname(os.path.abspath(__file__))
sys.path.insert(0, project_root)
