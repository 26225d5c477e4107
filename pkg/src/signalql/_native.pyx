# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Native automaton match kernel.

Same contract as _kernels_py.match_cases; uses typed memoryviews over the
caller's numpy arrays, no numpy C API involved.
"""

import numpy as np


cdef inline int _lowest_bit(unsigned long long x) nogil:
    cdef int n = 0
    while not (x & 1):
        x >>= 1
        n += 1
    return n


def match_cases(const unsigned long long[::1] match_masks,
                const long long[::1] offsets,
                const unsigned long long[::1] follow,
                unsigned long long accept,
                bint anchored_start,
                bint anchored_end):
    cdef Py_ssize_t n_cases = offsets.shape[0] - 1
    out = np.zeros(n_cases, dtype=np.bool_)
    cdef unsigned char[::1] out_v = out.view(np.uint8)
    cdef Py_ssize_t c, i, start, end
    cdef unsigned long long mask, reach, m
    cdef bint matched

    with nogil:
        for c in range(n_cases):
            start = offsets[c]
            end = offsets[c + 1]
            mask = 1
            if (not anchored_end) and (mask & accept):
                out_v[c] = 1
                continue
            matched = False
            for i in range(start, end):
                if not anchored_start:
                    mask |= 1
                reach = 0
                m = mask
                while m:
                    reach |= follow[_lowest_bit(m)]
                    m &= m - 1
                mask = reach & match_masks[i]
                if (not anchored_end) and (mask & accept):
                    matched = True
                    break
                if mask == 0 and anchored_start:
                    break
            if anchored_end and not matched:
                if not anchored_start:
                    mask |= 1
                matched = (mask & accept) != 0
            out_v[c] = 1 if matched else 0
    return out
