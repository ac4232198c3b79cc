"""Canned litmus histories."""

from __future__ import annotations

from .history import History, inv_read, inv_write, res_read, res_write


def store_buffer() -> History:
    """P0: w(x,1); r(y)=0  ||  P1: w(y,1); r(x)=0.

    Neither read sees the other process's write.  Op ids: 0 = w(x,1),
    1 = w(y,1), 2 = r(y), 3 = r(x).  The interleaving lets r(y) overlap
    w(y,1); program order makes it impossible for both reads to overlap.
    """
    return History((
        inv_write(0, 0, "x", 1),
        inv_write(1, 1, "y", 1),
        res_write(0, 0, "x"),
        inv_read(2, 0, "y"),
        res_read(2, 0, "y", 0),
        res_write(1, 1, "y"),
        inv_read(3, 1, "x"),
        res_read(3, 1, "x", 0),
    ))
