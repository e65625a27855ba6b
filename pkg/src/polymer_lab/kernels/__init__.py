"""Kernel lane selection: compiled core when available, numpy fallback otherwise.

``LANE`` names the active lane ("compiled" or "python"); the environment
variable POLYMER_LAB_KERNEL=python forces the fallback.  Both lanes share
the cost-array conventions documented in ``fallback``.
"""

import os

from . import fallback

try:
    from . import _core
except ImportError:
    _core = None

_forced = os.environ.get("POLYMER_LAB_KERNEL", "").strip().lower()
if _core is not None and _forced != "python":
    _impl = _core
    LANE = "compiled"
else:
    _impl = fallback
    LANE = "python"

dp_solve = _impl.dp_solve
transfer_forward = _impl.transfer_forward
transfer_backward = _impl.transfer_backward
transfer_marginals = _impl.transfer_marginals


def available_lanes():
    lanes = {"python": fallback}
    if _core is not None:
        lanes["compiled"] = _core
    return lanes
