"""Select the compiled kernels when available, else the pure-Python ones."""
import logging
import os

from . import _fallback

logger = logging.getLogger(__name__)

compiled = None
if not os.environ.get("PRIVPCA_PURE_PYTHON"):
    try:
        from . import _kernels as compiled
    except ImportError:  # extension not built
        logger.debug("privpca._kernels unavailable; using pure-Python kernels")
        compiled = None

kernels = compiled if compiled is not None else _fallback
BACKEND = "cython" if compiled is not None else "python"


def get_kernels(name: str | None = None):
    """Kernel module by name ("cython" or "python"); default is the active one."""
    if name is None:
        return kernels
    if name == "python":
        return _fallback
    if name == "cython":
        if compiled is None:
            raise RuntimeError("compiled kernels are not available")
        return compiled
    raise ValueError(f"unknown backend {name!r}")
