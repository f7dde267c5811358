"""Pose-guided person image synthesis: python bindings for the C++ core."""

try:
    from ptgan._ptgan import *  # noqa: F401,F403  (installed package layout)
except ImportError:  # in-tree build: extension sits directly on PYTHONPATH
    from _ptgan import *  # noqa: F401,F403
