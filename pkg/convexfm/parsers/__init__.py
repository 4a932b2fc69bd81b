"""
Readers and writers for the data formats ``convexfm`` understands.
"""

from . import libfm
from . import movielens
