"""Binary regression trees grown and pruned on absolute deviation.

Each split minimizes the summed absolute deviation of the two children
around their own medians; leaves predict the median of their cases. Pruning
collapses, one at a time, the internal node whose collapse costs the least
training error per internal node removed.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .dataset import Dataset
from .metrics import gcv, median
from .rules import EQ, LE, Condition, Rule, RuleSet, collapse
from .selection import select_by_cv


@dataclass(eq=False)
class TreeNode:
    """Leaf (``split is None``) or internal node sending ``split``-true cases left."""

    value: float
    roster: np.ndarray
    sad: float                       # sum of |y - value| over the roster
    split: Condition | None = None
    left: "TreeNode | None" = None
    right: "TreeNode | None" = None

    @property
    def is_leaf(self) -> bool:
        return self.split is None

    def as_leaf(self) -> "TreeNode":
        return TreeNode(self.value, self.roster, self.sad)


@njit(cache=True)
def prefix_sad(v):
    """Sum of absolute deviations from the median of every prefix of ``v``."""
    n = v.shape[0]
    out = np.zeros(n)
    if n == 0:
        return out
    lower = [-v[0]]          # max-heap (negated) holding the lower half
    upper = [v[0]]
    upper.pop()
    s_lo, s_hi = v[0], 0.0
    for i in range(1, n):
        x = v[i]
        if x <= -lower[0]:
            heapq.heappush(lower, -x)
            s_lo += x
        else:
            heapq.heappush(upper, x)
            s_hi += x
        if len(lower) > len(upper) + 1:
            t = -heapq.heappop(lower)
            s_lo -= t
            heapq.heappush(upper, t)
            s_hi += t
        elif len(upper) > len(lower):
            t = heapq.heappop(upper)
            s_hi -= t
            heapq.heappush(lower, -t)
            s_lo += t
        if len(lower) > len(upper):
            out[i] = s_hi - (s_lo + lower[0])
        else:
            out[i] = s_hi - s_lo
    return out


def sad(y) -> float:
    y = np.asarray(y, dtype=float)
    return float(np.abs(y - median(y)).sum()) if y.size else 0.0


def best_split(data: Dataset, rows: np.ndarray):
    """Lowest summed child deviation over all splits of ``rows``.

    Continuous features split at midpoints between adjacent distinct values,
    categorical features one level against the rest. Returns
    ``(score, condition)``, or ``(inf, None)`` when no split exists. Scores
    within rounding noise of each other count as ties and go to the lowest
    feature, then the smallest threshold (or level).
    """
    y = data.y[rows]
    eps = 1e-9 * max(1.0, float(np.abs(y).sum()))
    best, cond = np.inf, None
    for f, feat in enumerate(data.schema.features):
        col = data.X[rows, f]
        if feat.is_categorical:
            for code in np.unique(col):
                inside = col == code
                if inside.all():
                    break
                score = sad(y[inside]) + sad(y[~inside])
                if score < best - eps:
                    best, cond = score, Condition(f, EQ, data.levels[f][int(code)])
            continue
        order = np.argsort(col, kind="stable")
        xs, ys = col[order], y[order]
        cut = np.flatnonzero(xs[1:] != xs[:-1])
        if cut.size == 0:
            continue
        left = prefix_sad(ys)[cut]
        right = prefix_sad(ys[::-1].copy())[len(ys) - 2 - cut]
        scores = left + right
        j = int(np.argmin(scores))
        # earliest threshold within noise of the minimum
        j = int(np.flatnonzero(scores <= scores[j] + eps)[0])
        if scores[j] < best - eps:
            thr = (xs[cut[j]] + xs[cut[j] + 1]) / 2.0
            if not thr < xs[cut[j] + 1]:
                thr = xs[cut[j]]
            best, cond = float(scores[j]), Condition(f, LE, float(thr))
    return best, cond


def grow_tree(train: Dataset, min_node: int = 3) -> TreeNode:
    """Recursive partitioning until nodes are small, pure, or no split helps."""
    if train.n == 0:
        raise ValueError("empty dataset")
    if min_node < 1:
        raise ValueError("min_node must be at least 1")

    def leaf(rows):
        v = median(train.y[rows])
        return TreeNode(v, rows, float(np.abs(train.y[rows] - v).sum()))

    root = leaf(np.arange(train.n))
    stack = [root]
    while stack:
        node = stack.pop()
        rows = node.roster
        ys = train.y[rows]
        if rows.size < min_node or rows.size < 2 or np.all(ys == ys[0]):
            continue
        score, cond = best_split(train, rows)
        if cond is None or not score < node.sad - 1e-9 * max(1.0, node.sad):
            continue
        inside = cond.mask(train)[rows]
        node.split = cond
        node.left, node.right = leaf(rows[inside]), leaf(rows[~inside])
        stack += [node.right, node.left]
    return root


def leaves(root: TreeNode) -> list[TreeNode]:
    """Leaves in depth-first, left-first order."""
    out, stack = [], [root]
    while stack:
        node = stack.pop()
        if node.is_leaf:
            out.append(node)
        else:
            stack += [node.right, node.left]
    return out


def internal_count(root: TreeNode) -> int:
    return len(leaves(root)) - 1


def tree_predict(root: TreeNode, x) -> float:
    """Prediction for one case given as raw feature values."""
    node = root
    while not node.is_leaf:
        node = node.left if node.split.holds(x[node.split.feature]) else node.right
    return node.value


def leaf_index(root: TreeNode, data: Dataset) -> np.ndarray:
    """Depth-first leaf number reached by every case of ``data``."""
    out = np.empty(data.n, dtype=int)
    counter = 0
    stack = [(root, np.arange(data.n))]
    while stack:
        node, rows = stack.pop()
        if node.is_leaf:
            out[rows] = counter
            counter += 1
            continue
        inside = node.split.mask(data)[rows]
        stack += [(node.right, rows[~inside]), (node.left, rows[inside])]
    return out


def predict_tree(root: TreeNode, data: Dataset) -> np.ndarray:
    values = np.array([leaf.value for leaf in leaves(root)])
    return values[leaf_index(root, data)]


# --------------------------------------------------------------------------
# weakest-link pruning
# --------------------------------------------------------------------------

class _Flat:
    """Preorder arrays of a grown tree, shared by every tree on its pruning ladder."""

    def __init__(self, root: TreeNode):
        self.nodes = []
        stack = [(root, -1, 0)]
        parent, depth = [], []
        while stack:
            node, par, dep = stack.pop()
            self.nodes.append(node)
            parent.append(par)
            depth.append(dep)
            if not node.is_leaf:
                me = len(self.nodes) - 1
                stack += [(node.right, me, dep + 1), (node.left, me, dep + 1)]
        m = len(self.nodes)
        self.parent = np.array(parent, dtype=int)
        self.depth = np.array(depth, dtype=int)
        self.sad = np.array([nd.sad for nd in self.nodes])
        self.value = np.array([nd.value for nd in self.nodes])
        self.internal = np.array([not nd.is_leaf for nd in self.nodes])
        self.index = {id(nd): i for i, nd in enumerate(self.nodes)}
        # subtree of node i occupies preorder positions [i, end[i])
        self.end = np.arange(1, m + 1)
        for i in range(m - 1, 0, -1):
            self.end[self.parent[i]] = max(self.end[self.parent[i]], self.end[i])
        self.collapsed_at = np.full(m, np.iinfo(np.int64).max)

    def materialize(self, step: int) -> TreeNode:
        """The tree after the first ``step`` collapses."""
        def build(i):
            nd = self.nodes[i]
            if nd.is_leaf:
                return nd
            if self.collapsed_at[i] <= step:
                return nd.as_leaf()
            left, right = build(i + 1), build(int(self.end[i + 1]))
            if left is nd.left and right is nd.right:
                return nd
            return TreeNode(nd.value, nd.roster, nd.sad, nd.split, left, right)
        return build(0)

    def paths(self, data: Dataset) -> np.ndarray:
        """Preorder ids of the nodes each case visits, by depth, padded with -1."""
        out = np.full((data.n, int(self.depth.max()) + 1), -1, dtype=int)
        stack = [(0, np.arange(data.n))]
        while stack:
            i, rows = stack.pop()
            out[rows, self.depth[i]] = i
            if self.internal[i]:
                inside = self.nodes[i].split.mask(data)[rows]
                stack += [(int(self.end[i + 1]), rows[~inside]), (i + 1, rows[inside])]
        return out

    def predict_steps(self, data: Dataset, steps) -> list[np.ndarray]:
        path = self.paths(data)
        valid = path >= 0
        leaf = path[np.arange(data.n), valid.sum(axis=1) - 1]
        at = np.where(valid, self.collapsed_at[np.maximum(path, 0)], np.iinfo(np.int64).max)
        out = []
        for s in steps:
            hit = at <= s
            first = hit.argmax(axis=1)
            node = np.where(hit.any(axis=1), path[np.arange(data.n), first], leaf)
            out.append(self.value[node])
        return out


class TreeEntry:
    """One tree on a pruning ladder: the grown tree after ``step`` collapses."""

    def __init__(self, flat: _Flat, step: int, complexity: int, train_mad: float):
        self.flat, self.step = flat, step
        self.complexity, self.train_mad = complexity, train_mad
        self.est_mad = float("nan")
        self._tree = None

    @property
    def tree(self) -> TreeNode:
        if self._tree is None:
            self._tree = self.flat.materialize(self.step)
        return self._tree


@dataclass(eq=False)
class TreeLadder:
    saved: list[TreeEntry] = field(default_factory=list)

    def __len__(self):
        return len(self.saved)

    def __iter__(self):
        return iter(self.saved)

    def best(self) -> TreeEntry:
        return min(self.saved, key=lambda e: (e.est_mad, e.complexity))

    def predict_all(self, data: Dataset) -> list[np.ndarray]:
        if not self.saved:
            return []
        return self.saved[0].flat.predict_steps(data, [e.step for e in self.saved])

    def dump(self) -> str:
        lines = ["complexity  train_mad  est_mad"]
        for e in self.saved:
            lines.append(f"{e.complexity:10d}  {e.train_mad:9.4f}  {e.est_mad:7.4f}")
        return "\n".join(lines)


def prune_tree(root: TreeNode, train: Dataset) -> TreeLadder:
    """Every tree met while collapsing weakest links down to the root leaf.

    Each step collapses the internal node with the smallest training-error
    increase per internal node removed; ties go to the node removing more
    internal nodes, then to the earlier node in preorder.
    """
    flat = _Flat(root)
    m, n = len(flat.nodes), train.n
    leaf_sum = np.where(flat.internal, 0.0, flat.sad)
    n_int = flat.internal.astype(int)
    for i in range(m - 1, 0, -1):
        leaf_sum[flat.parent[i]] += leaf_sum[i]
        n_int[flat.parent[i]] += n_int[i]
    alive = flat.internal.copy()
    pos = np.arange(m)

    ladder = TreeLadder([TreeEntry(flat, 0, int(n_int[0]), leaf_sum[0] / n)])
    step = 0
    while alive[0]:
        cand = np.flatnonzero(alive)
        ratio = (flat.sad[cand] - leaf_sum[cand]) / n / n_int[cand]
        t = int(cand[np.lexsort((pos[cand], -n_int[cand], ratio))[0]])
        step += 1
        flat.collapsed_at[t] = step
        alive[t:flat.end[t]] = False
        gain, lost = flat.sad[t] - leaf_sum[t], n_int[t]
        a = t
        while a >= 0:
            leaf_sum[a] += gain
            n_int[a] -= lost
            a = flat.parent[a]
        ladder.saved.append(TreeEntry(flat, step, int(n_int[0]), leaf_sum[0] / n))
    return ladder


def train_tree(train: Dataset, min_node: int = 3, folds: int = 10, seed: int = 0,
               selection: str = "cv") -> tuple[TreeNode, TreeLadder]:
    """Grow, prune, and pick the pruned tree with the lowest estimated error."""
    def make(data):
        return prune_tree(grow_tree(data, min_node), data).saved

    if selection == "cv" and train.n >= folds:
        entries, est = select_by_cv(train, make, folds, seed,
                                    predict_ladder=lambda es, d: TreeLadder(es).predict_all(d))
    else:
        entries = make(train)
        est = [gcv(e.train_mad, e.complexity, train.n) if e.complexity < train.n
               else float("inf") for e in entries]
    for e, v in zip(entries, est):
        e.est_mad = float(v)
    ladder = TreeLadder(entries)
    return ladder.best().tree, ladder


# --------------------------------------------------------------------------
# conversion and display
# --------------------------------------------------------------------------

def tree_to_rules(root: TreeNode, schema=None) -> RuleSet:
    """One rule per leaf (path conjunction), depth-first; the default is never reached."""
    rules, rosters = [], []
    stack = [(root, ())]
    while stack:
        node, path = stack.pop()
        if node.is_leaf:
            rules.append(Rule(collapse(path), node.value))
            rosters.append(node.roster)
            continue
        stack += [(node.right, path + (node.split.negate(),)), (node.left, path + (node.split,))]
    return RuleSet(tuple(rules), root.value, schema, tuple(rosters), np.zeros(0, dtype=int))


def format_tree(root: TreeNode, schema=None, indent: str = "  ") -> str:
    """Indented text rendering, one line per node."""
    lines = []
    stack = [(root, 0, "")]
    while stack:
        node, depth, label = stack.pop()
        pad = indent * depth
        if node.is_leaf:
            lines.append(f"{pad}{label}y = {node.value:.6g} (covers {len(node.roster)})")
            continue
        lines.append(f"{pad}{label}split on {node.split.describe(schema)}")
        stack += [(node.right, depth + 1, "else: "), (node.left, depth + 1, "then: ")]
    return "\n".join(lines)

