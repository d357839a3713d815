"""Independent brute-force oracles used to check the production paths.

These deliberately share no code with the package: components come from
a naive flood fill over pixel sets, and frame classification recomputes
station involvement with plain Python loops. Slow and obviously
correct, for small inputs only.
"""

from __future__ import annotations

import numpy as np


def flood_components(mask, connectivity: int = 8) -> list[frozenset]:
    """All connected components of a binary mask via stack-based flood
    fill, ordered by their smallest (row, col) pixel."""
    mask = np.asarray(mask, dtype=bool)
    h, w = mask.shape
    remaining = {(r, c) for r in range(h) for c in range(w) if mask[r, c]}
    components = []
    while remaining:
        start = min(remaining)
        remaining.discard(start)
        stack = [start]
        component = {start}
        while stack:
            r, c = stack.pop()
            if connectivity == 8:
                neighbours = [
                    (r + dr, c + dc)
                    for dr in (-1, 0, 1)
                    for dc in (-1, 0, 1)
                    if (dr, dc) != (0, 0)
                ]
            else:
                neighbours = [(r - 1, c), (r + 1, c), (r, c - 1), (r, c + 1)]
            for n in neighbours:
                if n in remaining:
                    remaining.discard(n)
                    component.add(n)
                    stack.append(n)
        components.append(frozenset(component))
    components.sort(key=lambda comp: min(comp))
    return components


def naive_station_vector(frame, constants) -> tuple[bool, ...]:
    """Recompute the frame's station vector the slow way: flood-fill the
    thresholded carcinomatosis pixels, pick each blob's winning organ by
    (overlap count, overlap confidence sum, lowest code), and mark the
    winning organs' stations."""
    organ_thr = np.float32(constants.organ_confidence_threshold)
    pc_thr = np.float32(constants.pc_confidence_threshold)
    h, w = frame.pc_conf.shape
    pc_mask = np.zeros((h, w), dtype=bool)
    for r in range(h):
        for c in range(w):
            pc_mask[r, c] = frame.pc_conf[r, c] >= pc_thr
    organ_pixels = []
    for o in range(8):
        organ_pixels.append(
            {
                (r, c)
                for r in range(h)
                for c in range(w)
                if frame.organ_conf[o, r, c] >= organ_thr
            }
        )
    stations = [False] * 6
    organ_station = [0, 1, 2, 2, 2, 3, 4, 5]
    for component in flood_components(pc_mask, connectivity=8):
        if len(component) < constants.min_nodule_pixels:
            continue
        best = None
        best_key = None
        for o in range(8):
            overlap = component & organ_pixels[o]
            if not overlap:
                continue
            conf_sum = sum(float(frame.organ_conf[o, r, c]) for r, c in sorted(overlap))
            key = (len(overlap), conf_sum)
            if best is None or key > best_key:
                best, best_key = o, key
        if best is not None:
            stations[organ_station[best]] = True
    return tuple(stations)
