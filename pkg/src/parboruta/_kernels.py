"""Compiled CART growth and forest traversal kernels.

Everything here runs under ``nogil`` so the thread pools in ``forest`` and
``importance`` get real parallelism. Trees are stored as flat node arrays;
``feature == -1`` marks a leaf.
"""

import numpy as np
from numba import njit

LEAF = -1


@njit(cache=True, nogil=True)
def _choose_features(n_features, n_candidates):
    # partial Fisher-Yates; the draw order doubles as the tie-break order so
    # that no column position (e.g. real before shadow) is favoured
    pool = np.arange(n_features)
    for i in range(n_candidates):
        j = i + np.random.randint(0, n_features - i)
        tmp = pool[i]
        pool[i] = pool[j]
        pool[j] = tmp
    return pool[:n_candidates].copy()


@njit(cache=True, nogil=True)
def build_tree(X, y, n_classes, sample_idx, max_features, max_depth,
               min_samples_split, seed):
    """Grow one CART tree on the rows ``sample_idx`` (duplicates allowed).

    ``n_classes == 0`` selects variance impurity on real ``y``; otherwise
    ``y`` holds class indices and Gini impurity is used. ``max_depth < 0``
    means unlimited.
    """
    np.random.seed(seed)
    n_features = X.shape[1]
    m = sample_idx.shape[0]
    width = n_classes if n_classes > 0 else 1
    cap = 2 * m + 1

    feature = np.full(cap, LEAF, dtype=np.int64)
    threshold = np.zeros(cap)
    gain = np.zeros(cap)
    impurity = np.zeros(cap)
    count = np.zeros(cap, dtype=np.int64)
    left = np.full(cap, -1, dtype=np.int64)
    right = np.full(cap, -1, dtype=np.int64)
    depth = np.zeros(cap, dtype=np.int64)
    value = np.zeros((cap, width))

    idx = sample_idx.copy()
    stack_start = np.empty(cap, dtype=np.int64)
    stack_end = np.empty(cap, dtype=np.int64)
    stack_node = np.empty(cap, dtype=np.int64)
    top = 0
    stack_start[0] = 0
    stack_end[0] = m
    stack_node[0] = 0
    top = 1
    n_nodes = 1

    vals = np.empty(m)
    ys = np.empty(m)
    cls = np.empty(m, dtype=np.int64)
    counts = np.zeros(width)
    left_counts = np.zeros(width)

    while top > 0:
        top -= 1
        start = stack_start[top]
        end = stack_end[top]
        node = stack_node[top]
        cnt = end - start
        count[node] = cnt

        # node statistics; regression targets are centred on the node mean
        pure = True
        if n_classes == 0:
            total = 0.0
            first = y[idx[start]]
            for k in range(start, end):
                v = y[idx[k]]
                total += v
                if v != first:
                    pure = False
            mean = total / cnt
            sse = 0.0
            for k in range(start, end):
                d = y[idx[k]] - mean
                sse += d * d
            value[node, 0] = mean
            impurity[node] = sse / cnt
        else:
            counts[:] = 0.0
            for k in range(start, end):
                counts[int(y[idx[k]])] += 1.0
            sq = 0.0
            for c in range(n_classes):
                value[node, c] = counts[c] / cnt
                sq += counts[c] * counts[c]
                if counts[c] != 0.0 and counts[c] != cnt:
                    pure = False
            impurity[node] = max(1.0 - sq / (cnt * cnt), 0.0)

        if pure or cnt < min_samples_split or (max_depth >= 0 and depth[node] >= max_depth):
            continue

        candidates = _choose_features(n_features, max_features)
        best_score = -np.inf
        best_feature = -1
        best_threshold = 0.0
        for f in candidates:
            for k in range(cnt):
                vals[k] = X[idx[start + k], f]
            order = np.argsort(vals[:cnt], kind="quicksort")
            if vals[order[0]] == vals[order[cnt - 1]]:
                continue
            if n_classes == 0:
                total = 0.0
                for k in range(cnt):
                    ys[k] = y[idx[start + order[k]]] - value[node, 0]
                    total += ys[k]
                s_left = 0.0
                for k in range(cnt - 1):
                    s_left += ys[k]
                    a = vals[order[k]]
                    b = vals[order[k + 1]]
                    if a == b:
                        continue
                    n_left = k + 1
                    n_right = cnt - n_left
                    s_right = total - s_left
                    score = s_left * s_left / n_left + s_right * s_right / n_right
                    if score > best_score:
                        best_score = score
                        best_feature = f
                        mid = 0.5 * (a + b)
                        best_threshold = a if mid == b else mid
            else:
                for k in range(cnt):
                    cls[k] = int(y[idx[start + order[k]]])
                left_counts[:] = 0.0
                for k in range(cnt - 1):
                    left_counts[cls[k]] += 1.0
                    a = vals[order[k]]
                    b = vals[order[k + 1]]
                    if a == b:
                        continue
                    n_left = k + 1
                    n_right = cnt - n_left
                    sq_left = 0.0
                    sq_right = 0.0
                    for c in range(n_classes):
                        sq_left += left_counts[c] * left_counts[c]
                        r = counts[c] - left_counts[c]
                        sq_right += r * r
                    score = sq_left / n_left + sq_right / n_right
                    if score > best_score:
                        best_score = score
                        best_feature = f
                        mid = 0.5 * (a + b)
                        best_threshold = a if mid == b else mid

        if best_feature < 0:
            continue

        # stored gain is the unweighted impurity decrease at this node
        if n_classes == 0:
            total = 0.0
            for k in range(start, end):
                total += y[idx[k]] - value[node, 0]
            g = (best_score - total * total / cnt) / cnt
        else:
            sq = 0.0
            for c in range(n_classes):
                sq += counts[c] * counts[c]
            g = (best_score - sq / cnt) / cnt
        gain[node] = max(g, 0.0)
        feature[node] = best_feature
        threshold[node] = best_threshold

        # partition idx[start:end] so rows with x <= threshold come first
        lo = start
        hi = end - 1
        while lo <= hi:
            if X[idx[lo], best_feature] <= best_threshold:
                lo += 1
            else:
                tmp = idx[lo]
                idx[lo] = idx[hi]
                idx[hi] = tmp
                hi -= 1
        mid_pos = lo

        left_id = n_nodes
        right_id = n_nodes + 1
        n_nodes += 2
        left[node] = left_id
        right[node] = right_id
        depth[left_id] = depth[node] + 1
        depth[right_id] = depth[node] + 1

        stack_start[top] = mid_pos
        stack_end[top] = end
        stack_node[top] = right_id
        top += 1
        stack_start[top] = start
        stack_end[top] = mid_pos
        stack_node[top] = left_id
        top += 1

    return (feature[:n_nodes].copy(), threshold[:n_nodes].copy(),
            gain[:n_nodes].copy(), impurity[:n_nodes].copy(),
            count[:n_nodes].copy(), left[:n_nodes].copy(),
            right[:n_nodes].copy(), depth[:n_nodes].copy(),
            value[:n_nodes].copy())


@njit(cache=True, nogil=True)
def predict_rows(X, row_start, row_end, roots, feature, threshold, left, right,
                 value, swap_col, swap_values, out):
    """Average leaf payloads over trees for rows ``[row_start, row_end)``.

    When ``swap_col >= 0`` column ``swap_col`` is read from ``swap_values``
    instead of ``X``. Trees are summed in index order for every row, so the
    result does not depend on how rows are chunked across workers.
    """
    n_trees = roots.shape[0]
    width = value.shape[1]
    for r in range(row_start, row_end):
        for c in range(width):
            out[r, c] = 0.0
    # tree-outer keeps one tree's nodes hot in cache; each row still sums
    # its trees in index order
    for t in range(n_trees):
        for r in range(row_start, row_end):
            node = roots[t]
            while feature[node] != LEAF:
                f = feature[node]
                x = swap_values[r] if f == swap_col else X[r, f]
                if x <= threshold[node]:
                    node = left[node]
                else:
                    node = right[node]
            for c in range(width):
                out[r, c] += value[node, c]
    for r in range(row_start, row_end):
        for c in range(width):
            out[r, c] /= n_trees
