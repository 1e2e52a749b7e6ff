"""Hot-kernel backend selection.

The contraction kernels dominating the flow stepper exist twice: a compiled
extension (`curvlab._kernels._ext`, Cython) and a pure-numpy fallback. The
backend is chosen once at import time:

  CURVLAB_KERNELS=ext     require the compiled extension (ImportError if absent)
  CURVLAB_KERNELS=python  force the numpy fallback
  unset / auto            compiled if importable, else numpy

`backend.NAME` reports which one is active. Results agree between backends to
round-off (summation orders differ), and each backend is individually
deterministic; see benchmarks/bench_kernels.py for the speed comparison.
"""

import os

from . import numpy_backend

_choice = os.environ.get("CURVLAB_KERNELS", "auto").lower()

if _choice == "python":
    backend = numpy_backend
elif _choice == "ext":
    from . import _ext as backend  # noqa: F401
else:
    try:
        from . import _ext as backend  # type: ignore[no-redef]
    except ImportError:
        backend = numpy_backend

NAME = backend.NAME
