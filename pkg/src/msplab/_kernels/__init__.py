"""Kernel selection: compiled extension if available, pure Python otherwise.

Set ``MSPLAB_PURE_PYTHON=1`` to force the fallback (used by the benchmark
and the cross-implementation tests). Both implementations consume identical
random streams and must produce identical outputs.
"""

import os

from . import _pure

if os.environ.get("MSPLAB_PURE_PYTHON", "") not in ("", "0"):
    _impl = _pure
else:
    try:
        from . import _compiled as _impl  # type: ignore[attr-defined]
    except ImportError:
        _impl = _pure

IMPLEMENTATION = _impl.IMPLEMENTATION

hat_supergreedy_batch = _impl.hat_supergreedy_batch
hat_supergreedy_trace = _impl.hat_supergreedy_trace
uniform_dynkin_batch = _impl.uniform_dynkin_batch
partition_dynkin_batch = _impl.partition_dynkin_batch
broom_batch = _impl.broom_batch

hat_scaled_weights = _pure.hat_scaled_weights
rank_order_for_weights = _pure.rank_order_for_weights
kp_parts_from_keys = _pure.kp_parts_from_keys
pure = _pure
