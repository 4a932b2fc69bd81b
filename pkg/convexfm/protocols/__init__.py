"""
Contains protocols and such that ``convexfm`` uses.

Enums, typed dictionaries and abstract base classes live here so the solver
modules can share them without importing each other.
"""

from . import cfm
