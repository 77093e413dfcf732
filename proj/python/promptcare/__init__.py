"""Prompt watermarking toolkit: pipeline operations and statistics primitives."""

try:
    from . import _promptcare as _core  # installed layout: extension inside the package
    from ._promptcare import *  # noqa: F401,F403
except ImportError:  # build-tree layout: extension sits directly on sys.path
    import _promptcare as _core
    from _promptcare import *  # noqa: F401,F403

__version__ = "0.1.0"
__all__ = [name for name in dir(_core) if not name.startswith("_")]
