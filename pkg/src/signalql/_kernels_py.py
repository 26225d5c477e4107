"""Pure-Python fallback for the automaton match kernel.

Runs the position automaton as a lazily cached DFA: distinct
(state mask, event mask) pairs are resolved once per call, so the per-event
cost is a dict lookup for all but the first occurrence of each pair.
"""

from __future__ import annotations

import numpy as np


def match_cases(match_masks, offsets, follow, accept, anchored_start, anchored_end):
    mm = match_masks.tolist()
    offs = offsets.tolist()
    follow_int = [int(x) for x in follow]
    accept = int(accept)
    n_cases = len(offs) - 1
    out = np.zeros(n_cases, dtype=np.bool_)
    trans: dict[tuple[int, int], int] = {}
    for c in range(n_cases):
        start, end = offs[c], offs[c + 1]
        mask = 1
        if not anchored_end and mask & accept:
            out[c] = True  # nullable, the empty window at the start matches
            continue
        matched = False
        for i in range(start, end):
            if not anchored_start:
                mask |= 1
            key = (mask, mm[i])
            nxt = trans.get(key)
            if nxt is None:
                reach = 0
                m = mask
                while m:
                    reach |= follow_int[(m & -m).bit_length() - 1]
                    m &= m - 1
                nxt = reach & key[1]
                trans[key] = nxt
            mask = nxt
            if not anchored_end and mask & accept:
                matched = True
                break
            if mask == 0 and anchored_start:
                break
        if anchored_end and not matched:
            if not anchored_start:
                mask |= 1  # empty window at the end
            matched = bool(mask & accept)
        out[c] = matched
    return out
