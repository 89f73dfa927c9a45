"""Q-network kernel dispatch.

The compiled extension is used when it was built; otherwise the numpy
implementation is loaded. Set ``RIL_PURE_PYTHON=1`` to force the fallback.
"""

import os

if os.environ.get("RIL_PURE_PYTHON"):
    from . import _kernels_py as _impl
else:
    try:
        from . import _kernels as _impl
    except ImportError:
        from . import _kernels_py as _impl

BACKEND = _impl.BACKEND
q_forward = _impl.q_forward
q_forward_batch = _impl.q_forward_batch
greedy = _impl.greedy
loss_and_grad = _impl.loss_and_grad
sgd_step = _impl.sgd_step
bellman_targets = _impl.bellman_targets
dqn_update = _impl.dqn_update


def load(backend):
    """Return the kernel module for ``backend`` ("cython" or "python")."""
    if backend == "python":
        from . import _kernels_py

        return _kernels_py
    if backend == "cython":
        from . import _kernels

        return _kernels
    raise ValueError(f"unknown kernel backend {backend!r}")
