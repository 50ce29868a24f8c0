"""1-D arterial network simulation with sparse kernel surrogates."""

try:
    from ._stenoflow_core import *  # noqa: F401,F403  (installed wheel layout)
    from ._stenoflow_core import __version__  # noqa: F401
except ImportError:  # build-tree layout: extension sits on PYTHONPATH
    from _stenoflow_core import *  # noqa: F401,F403
    from _stenoflow_core import __version__  # noqa: F401
