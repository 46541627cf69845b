"""Slot-loop kernels for PU service and SU sensing.

Each kernel advances one chunk of slots in place on caller-owned state
arrays and consumes pre-drawn randomness, so the numba and fallback paths
see identical inputs and must produce identical outputs.

Sensing codes written to ``sensed`` (per slot, per channel):
0 not sensed, 1 busy in the sensing list (or random scan), 2 idle,
3 busy in the backup list.
"""

import numpy as np

from ._accel import HAVE_NUMBA, USE_NUMBA, jit

RANDOM = 0
ADAPTIVE = 1
SINGLE_CHANNEL = 2

NOT_SENSED, SENSED_BUSY, SENSED_IDLE, SENSED_BUSY_BACKUP = 0, 1, 2, 3


def _pu_chunk_loops(arrivals, receptions, unit, queue, serving, counts, delivered, busy_out, queue_out):
    T, N = arrivals.shape
    L = receptions.shape[2]
    for t in range(T):
        for j in range(N):
            queue[j] += arrivals[t, j]
            if not serving[j] and queue[j] >= unit:
                serving[j] = True
                queue[j] -= unit
                for r in range(L):
                    counts[j, r] = 0
            if serving[j]:
                busy_out[t, j] = 1
                done = True
                for r in range(L):
                    if counts[j, r] < unit and receptions[t, j, r]:
                        counts[j, r] += 1
                    if counts[j, r] < unit:
                        done = False
                if done:
                    serving[j] = False
                    delivered[j] += unit
            else:
                busy_out[t, j] = 0
            queue_out[t, j] = queue[j]


def pu_chunk_numpy(arrivals, receptions, unit, queue, serving, counts, delivered, busy_out, queue_out):
    """Same contract as the loop kernel, vectorized over channels."""
    for t in range(arrivals.shape[0]):
        queue += arrivals[t]
        start = ~serving & (queue >= unit)
        if start.any():
            queue[start] -= unit
            counts[start] = 0
            serving |= start
        busy_out[t] = serving
        if serving.any():
            counts += receptions[t] & serving[:, None] & (counts < unit)
            done = serving & (counts >= unit).all(axis=1)
            delivered[done] += unit
            serving &= ~done
        queue_out[t] = queue


def _su_chunk_loops(busy, u, strategy, budget, k, m_backoff, timers, counter, d_out, success_out, channel_out, listed_out, sensed):
    T, N = busy.shape
    S = min(N, budget)
    order = np.empty(N, dtype=np.int64)
    for t in range(T):
        for j in range(N):
            sensed[t, j] = 0
        d = 0
        found = -1

        if strategy == SINGLE_CHANNEL:
            listed_out[t] = 1 if counter[0] == 0 else 0
            if counter[0] > 0:
                counter[0] -= 1
            else:
                d = 1
                if busy[t, 0]:
                    sensed[t, 0] = 1
                    counter[0] = m_backoff
                else:
                    sensed[t, 0] = 2
                    found = 0
        else:
            n = 0
            if strategy == RANDOM:
                for j in range(N):
                    order[j] = j
                n = N
            else:
                for j in range(N):
                    if timers[j] == 0:
                        order[n] = j
                        n += 1
                nb = n
                for j in range(N):
                    if timers[j] != 0:
                        order[nb] = j
                        nb += 1
            listed_out[t] = n

            # stage one: uniform order without replacement over the list
            draw = 0
            first = min(n, S)
            for i in range(first):
                idx = i + int(u[t, draw] * (n - i))
                if idx >= n:
                    idx = n - 1
                draw += 1
                tmp = order[i]
                order[i] = order[idx]
                order[idx] = tmp
                ch = order[i]
                d += 1
                if busy[t, ch]:
                    sensed[t, ch] = 1
                else:
                    sensed[t, ch] = 2
                    found = ch
                    break

            # stage two: backup list, within what is left of the budget
            if found < 0 and d < S:
                nbk = N - n
                for i in range(S - d):
                    idx = n + i + int(u[t, draw] * (nbk - i))
                    if idx >= N:
                        idx = N - 1
                    draw += 1
                    tmp = order[n + i]
                    order[n + i] = order[idx]
                    order[idx] = tmp
                    ch = order[n + i]
                    d += 1
                    if busy[t, ch]:
                        sensed[t, ch] = 3
                    else:
                        sensed[t, ch] = 2
                        found = ch
                        break

            if strategy == ADAPTIVE:
                for j in range(N):
                    if sensed[t, j] == 1:
                        timers[j] = k
                    elif sensed[t, j] == 2:
                        timers[j] = 0
                    elif timers[j] > 0:
                        timers[j] -= 1

        d_out[t] = d
        success_out[t] = found >= 0
        channel_out[t] = found


pu_chunk_python = _pu_chunk_loops
su_chunk_python = _su_chunk_loops

if HAVE_NUMBA:
    pu_chunk_numba = jit(_pu_chunk_loops)
    su_chunk_numba = jit(_su_chunk_loops)
else:  # pragma: no cover
    pu_chunk_numba = su_chunk_numba = None

if USE_NUMBA:
    pu_chunk = pu_chunk_numba
    su_chunk = su_chunk_numba
else:
    pu_chunk = pu_chunk_numpy
    su_chunk = su_chunk_python
