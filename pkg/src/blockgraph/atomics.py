"""Atomic read-modify-write on numpy array cells.

The primitives lower to LLVM ``cmpxchg`` / ``atomicrmw`` so they stay atomic
when jitted kernels run concurrently with the GIL released.  Both functions
are ordinary numba ``njit`` functions: kernels call them inline and Python
code can call them directly.
"""

from numba import njit, types
from numba.core import cgutils
from numba.extending import intrinsic

__all__ = ["cas", "atomic_add", "atomic_min"]


def _cell_pointer(context, builder, arrty, ary, idx):
    array = context.make_array(arrty)(context, builder, ary)
    return cgutils.get_item_pointer(context, builder, arrty, array, [idx], wraparound=False)


@intrinsic
def _cmpxchg(typingctx, arr, idx, old, new):
    if not isinstance(arr, types.Array) or not isinstance(arr.dtype, types.Integer):
        return None

    def codegen(context, builder, sig, args):
        arrty, idxty, oldty, newty = sig.args
        ary, i, o, nw = args
        i = context.cast(builder, i, idxty, types.intp)
        ptr = _cell_pointer(context, builder, arrty, ary, i)
        o = context.cast(builder, o, oldty, arrty.dtype)
        nw = context.cast(builder, nw, newty, arrty.dtype)
        res = builder.cmpxchg(ptr, o, nw, "seq_cst", "seq_cst")
        return builder.extract_value(res, 1)

    return types.boolean(arr, idx, old, new), codegen


@intrinsic
def _fetch_add(typingctx, arr, idx, val):
    if not isinstance(arr, types.Array) or not isinstance(arr.dtype, (types.Integer, types.Float)):
        return None

    def codegen(context, builder, sig, args):
        arrty, idxty, valty = sig.args
        ary, i, v = args
        i = context.cast(builder, i, idxty, types.intp)
        ptr = _cell_pointer(context, builder, arrty, ary, i)
        v = context.cast(builder, v, valty, arrty.dtype)
        op = "fadd" if isinstance(arrty.dtype, types.Float) else "add"
        return builder.atomic_rmw(op, ptr, v, "seq_cst")

    return arr.dtype(arr, idx, val), codegen


@intrinsic
def _fetch_min(typingctx, arr, idx, val):
    if not isinstance(arr, types.Array) or not isinstance(arr.dtype, types.Integer):
        return None

    def codegen(context, builder, sig, args):
        arrty, idxty, valty = sig.args
        ary, i, v = args
        i = context.cast(builder, i, idxty, types.intp)
        ptr = _cell_pointer(context, builder, arrty, ary, i)
        v = context.cast(builder, v, valty, arrty.dtype)
        op = "min" if arrty.dtype.signed else "umin"
        return builder.atomic_rmw(op, ptr, v, "seq_cst")

    return arr.dtype(arr, idx, val), codegen


@njit(nogil=True, cache=True)
def cas(arr, idx, old, new):
    """Set ``arr[idx] = new`` iff it currently equals ``old``; report success."""
    return _cmpxchg(arr, idx, old, new)


@njit(nogil=True, cache=True)
def atomic_add(arr, idx, delta):
    """Add ``delta`` to ``arr[idx]`` atomically and return the previous value."""
    return _fetch_add(arr, idx, delta)


@njit(nogil=True, cache=True)
def atomic_min(arr, idx, value):
    return _fetch_min(arr, idx, value)
