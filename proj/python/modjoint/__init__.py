from modjoint._core import *  # noqa: F401,F403
from modjoint._core import __version__  # noqa: F401
