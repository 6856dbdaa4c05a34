"""Event loops for busy periods and stand-alone cascades.

Each kernel fills ``out_*[i0:n]`` from a buffer of uniforms starting at
``pos``. When the buffer cannot finish the current sample the kernel returns
``(i, start)`` where ``start`` is the buffer position at which sample ``i``
began; the driver prepends ``u[start:]`` to fresh uniforms and calls again, so
the consumed stream is the same as with one infinite buffer.
"""
import math

import numpy as np

from ._jit import njit
from .distributions import draw


@njit
def rate_at(edges, values, t, n):
    """Piecewise-constant rate: row by time interval, column by queue length."""
    row = 0
    while row < edges.shape[0] and t >= edges[row]:
        row += 1
    col = n if n < values.shape[1] else values.shape[1] - 1
    return values[row, col]


@njit
def next_edge(edges, t):
    for j in range(edges.shape[0]):
        if edges[j] > t:
            return edges[j]
    return math.inf


@njit
def mg1_busy(u, pos, i0, n, lam, code, p1, p2, emp, max_dur, out_dur, out_served, out_trunc):
    """M/G/1 busy periods without reneging.

    The busy period is the total work of everyone who arrives before the
    accumulated work runs out, so no queue needs to be stored.
    """
    nu = u.shape[0]
    i = i0
    while i < n:
        start = pos
        if pos + 2 > nu:
            return i, start
        end, pos = draw(code, p1, p2, emp, u, pos)
        a = 0.0
        served = 1
        trunc = end > max_dur
        complete = True
        while not trunc:
            if pos + 2 > nu:
                complete = False
                break
            a += -math.log1p(-u[pos]) / lam
            pos += 1
            # an arrival exactly at the end finds the server already idle
            if a >= end:
                break
            y, pos = draw(code, p1, p2, emp, u, pos)
            end += y
            served += 1
            if end > max_dur:
                trunc = True
                break
        if not complete:
            return i, start
        out_dur[i] = end
        out_served[i] = served
        out_trunc[i] = trunc
        i += 1
    return i, pos


@njit
def general_busy(
    u,
    pos,
    i0,
    n,
    arr_edges,
    arr_vals,
    ren_edges,
    ren_vals,
    anti_edges,
    anti_vals,
    code,
    p1,
    p2,
    emp,
    acode,
    ap1,
    ap2,
    aemp,
    max_dur,
    out_dur,
    out_served,
    out_reneged,
    out_work,
    out_trunc,
):
    """Busy periods with an explicit FIFO queue.

    Supports rates that depend on time and on the number in system, classical
    reneging (each waiting customer leaves at the reneging rate; the customer
    in service never does) and anti-customers that cancel queued work from the
    back of the queue, down to and including the customer in service.
    """
    nu = u.shape[0]
    cap = 64
    q = np.empty(cap)
    i = i0
    while i < n:
        start = pos
        if pos + 1 > nu:
            return i, start
        y, pos = draw(code, p1, p2, emp, u, pos)
        q[0] = y
        head = 0
        tail = 1
        t = 0.0
        served = 0
        reneged = 0
        # demand that actually gets served: arrivals minus reneged and cancelled work
        work = y
        trunc = False
        complete = True
        while tail > head:
            if pos + 4 > nu:
                complete = False
                break
            nsys = tail - head
            lam = rate_at(arr_edges, arr_vals, t, nsys)
            th = rate_at(ren_edges, ren_vals, t, nsys) * (nsys - 1)
            anti = rate_at(anti_edges, anti_vals, t, nsys)
            total = lam + th + anti
            t_dep = t + q[head]
            t_brk = min(next_edge(arr_edges, t), min(next_edge(ren_edges, t), next_edge(anti_edges, t)))
            if total > 0.0:
                dt = -math.log1p(-u[pos]) / total
                pos += 1
            else:
                dt = math.inf
            t_ev = t + dt
            if t_dep <= t_ev and t_dep <= t_brk:
                t = t_dep
                head += 1
                served += 1
            elif t_brk < t_ev:
                # rates change; exponential clocks restart memorylessly
                q[head] -= t_brk - t
                t = t_brk
            else:
                q[head] -= dt
                t = t_ev
                v = u[pos] * total
                pos += 1
                if v < lam:
                    if tail == cap:
                        if head > 0:
                            q[: tail - head] = q[head:tail].copy()
                            tail -= head
                            head = 0
                        if tail == cap:
                            bigger = np.empty(2 * cap)
                            bigger[:tail] = q[:tail]
                            q = bigger
                            cap *= 2
                    y, pos = draw(code, p1, p2, emp, u, pos)
                    q[tail] = y
                    tail += 1
                    work += y
                elif v < lam + th:
                    j = head + 1 + int(u[pos] * (nsys - 1))
                    pos += 1
                    work -= q[j]
                    q[j] = q[tail - 1]
                    tail -= 1
                    reneged += 1
                else:
                    size, pos = draw(acode, ap1, ap2, aemp, u, pos)
                    while size > 0.0 and tail > head:
                        last = q[tail - 1]
                        if last <= size:
                            size -= last
                            work -= last
                            tail -= 1
                            reneged += 1
                        else:
                            q[tail - 1] = last - size
                            work -= size
                            size = 0.0
            if t > max_dur:
                trunc = True
                break
        if not complete:
            return i, start
        out_dur[i] = t
        out_served[i] = served
        out_reneged[i] = reneged
        out_work[i] = work
        out_trunc[i] = trunc
        i += 1
    return i, pos


@njit
def poisson_cascades(u, pos, i0, n, rate, anti_frac, code, p1, p2, emp, max_switches, out_drop, out_switches, out_bounce, out_trunc):
    """Cascades through a Poisson field of thresholds, generated lazily.

    Depths are measured downward from the starting log-price. Sizes from the
    distribution are already price jumps (``2 * kappa * w / W``). The front is
    how far the price has been pushed; thresholds are met in order of depth and
    switch while they lie at or above the front. An opposite-state switch
    pulls the front back up, but not past the threshold being processed; the
    remainder is the terminal bounce.
    """
    nu = u.shape[0]
    i = i0
    while i < n:
        start = pos
        if pos + 1 > nu:
            return i, start
        front, pos = draw(code, p1, p2, emp, u, pos)
        x = 0.0
        switches = 1
        bounce = 0.0
        trunc = False
        complete = True
        while True:
            if pos + 3 > nu:
                complete = False
                break
            x += -math.log1p(-u[pos]) / rate
            pos += 1
            if x > front:
                break
            is_anti = False
            if anti_frac > 0.0:
                is_anti = u[pos] < anti_frac
                pos += 1
            jump, pos = draw(code, p1, p2, emp, u, pos)
            switches += 1
            if is_anti:
                room = front - x
                if jump >= room:
                    bounce = jump - room
                    front = x
                    break
                front -= jump
            else:
                front += jump
            if switches >= max_switches:
                trunc = True
                break
        if not complete:
            return i, start
        out_drop[i] = front
        out_switches[i] = switches
        out_bounce[i] = bounce
        out_trunc[i] = trunc
        i += 1
    return i, pos


def run_buffered(kernel, rng, n, buffer_size, *args):
    """Drive a buffered kernel until all ``n`` samples are filled."""
    buf = rng.random(buffer_size)
    pos = 0
    i = 0
    while True:
        i, pos = kernel(buf, pos, i, n, *args)
        if i >= n:
            return
        rest = buf[pos:]
        buf = np.concatenate([rest, rng.random(max(buffer_size, rest.size))])
        pos = 0
