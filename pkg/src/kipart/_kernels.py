"""Compiled SpaceSaving update over integer key ids.

Counters live in fixed slots; ``heap`` is a min-heap of slots ordered by
(count, slot) and ``pos[slot]`` is the slot's heap position.
"""

import numba
import numpy as np


@numba.njit(cache=True, nogil=True)
def _less(count, a, b):
    return count[a] < count[b] or (count[a] == count[b] and a < b)


@numba.njit(cache=True, nogil=True)
def _sift_up(heap, pos, count, i):
    s = heap[i]
    while i > 0:
        parent = (i - 1) >> 1
        t = heap[parent]
        if not _less(count, s, t):
            break
        heap[i] = t
        pos[t] = i
        i = parent
    heap[i] = s
    pos[s] = i


@numba.njit(cache=True, nogil=True)
def _sift_down(heap, pos, count, i, size):
    s = heap[i]
    while True:
        child = 2 * i + 1
        if child >= size:
            break
        if child + 1 < size and _less(count, heap[child + 1], heap[child]):
            child += 1
        t = heap[child]
        if not _less(count, t, s):
            break
        heap[i] = t
        pos[t] = i
        i = child
    heap[i] = s
    pos[s] = i


@numba.njit(cache=True, nogil=True)
def space_saving_offer(ids, slot_key, count, err, heap, pos, id_slot, size):
    """Offer each id in ``ids`` once; returns the new number of used slots."""
    capacity = slot_key.size
    for j in range(ids.size):
        k = ids[j]
        s = id_slot[k]
        if s >= 0:
            count[s] += 1.0
            _sift_down(heap, pos, count, pos[s], size)
        elif size < capacity:
            s = size
            slot_key[s] = k
            count[s] = 1.0
            err[s] = 0.0
            id_slot[k] = s
            heap[size] = s
            pos[s] = size
            size += 1
            _sift_up(heap, pos, count, size - 1)
        else:
            s = heap[0]
            id_slot[slot_key[s]] = -1
            m = count[s]
            slot_key[s] = k
            id_slot[k] = s
            err[s] = m
            count[s] = m + 1.0
            _sift_down(heap, pos, count, 0, size)
    return size


@numba.njit(cache=True, nogil=True)
def heapify(heap, pos, count, size):
    for i in range(size // 2 - 1, -1, -1):
        _sift_down(heap, pos, count, i, size)


def warmup():
    """Trigger compilation on tiny inputs."""
    z = np.zeros(2, dtype=np.int64)
    space_saving_offer(np.zeros(1, dtype=np.int64), z.copy(), np.zeros(2), np.zeros(2), z.copy(), z.copy(),
                       np.full(1, -1, dtype=np.int64), 0)
    heapify(z.copy(), z.copy(), np.zeros(2), 0)
