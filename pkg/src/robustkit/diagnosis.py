"""Local instability diagnosis: worst-volatility subset, PSI ranking,
a variance-reduction partition tree on per-observation volatility, and
single-variable follow-up with PDP and monotone-violation counts."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .data import ColumnStats, Dataset, column_stats, pearson_correlation, quantile_buckets
from .errors import ContractError
from .metrics import summarize_batch
from .models import pdp, pdp_grid, predict_batch_perturbed
from .noise import sample_noise
from .numeric import NumericPerturbPlan, perturb


def worst_subset(per_obs: np.ndarray, q: float) -> np.ndarray:
    """Boolean mask of the ceil(q*n) largest values; ties broken by index."""
    if not 0.0 < q < 1.0:
        raise ContractError("q must be in (0, 1)")
    per_obs = np.asarray(per_obs, dtype=float)
    n = len(per_obs)
    m = math.ceil(q * n)
    order = np.argsort(-per_obs, kind="stable")  # equal values keep ascending index
    mask = np.zeros(n, dtype=bool)
    mask[order[:m]] = True
    return mask


@dataclass(frozen=True)
class PsiRow:
    bin_label: str
    base: float
    new: float
    ln_ratio: float
    diff: float
    index: float


@dataclass(frozen=True)
class PsiResult:
    value: float
    rows: tuple[PsiRow, ...]


def psi_from_proportions(base, new, labels=None) -> PsiResult:
    """PSI = sum (new - base) * ln(new / base) over aligned proportion bins.

    A bin empty on exactly one side contributes +inf (no epsilon smoothing);
    a bin empty on both sides contributes 0.
    """
    base = np.asarray(base, dtype=float)
    new = np.asarray(new, dtype=float)
    if base.shape != new.shape:
        raise ContractError("base and new proportion vectors differ in length")
    if labels is None:
        labels = [str(i) for i in range(len(base))]
    rows = []
    total = 0.0
    for lbl, b, nw in zip(labels, base, new):
        diff = nw - b
        if b == 0.0 and nw == 0.0:
            ln_ratio, index = 0.0, 0.0
        elif b == 0.0 or nw == 0.0:
            ln_ratio = math.inf if b == 0.0 else -math.inf
            index = math.inf
        else:
            ln_ratio = math.log(nw / b)
            index = diff * ln_ratio
        rows.append(PsiRow(str(lbl), float(b), float(nw), ln_ratio, float(diff), index))
        total += index
    return PsiResult(value=float(total), rows=tuple(rows))


def _numeric_bins(base_values: np.ndarray, n_bins: int = 10) -> np.ndarray:
    """Equal-frequency bin edges from the base group, deduplicated."""
    edges = np.quantile(base_values, np.linspace(0.0, 1.0, n_bins + 1))
    return np.unique(edges)


def _bin_counts(values: np.ndarray, edges: np.ndarray) -> np.ndarray:
    # open-ended outer bins so no observation falls off the histogram
    idx = np.clip(np.searchsorted(edges[1:-1], values, side="right"), 0, len(edges) - 2)
    return np.bincount(idx, minlength=len(edges) - 1)


def psi(
    values: np.ndarray,
    mask: np.ndarray,
    kind: str = "continuous",
    levels: tuple[str, ...] = (),
    n_bins: int = 10,
    epsilon: float = 0.0,
) -> PsiResult:
    """PSI between the masked ('new') and unmasked ('base') groups.

    Categorical: one bin per declared level.  Discrete: one bin per distinct
    observed value.  Continuous: equal-frequency bins with edges from the
    base group.  `epsilon` > 0 floors proportions to keep PSI finite.
    """
    mask = np.asarray(mask, dtype=bool)
    if not mask.any() or mask.all():
        raise ContractError("both PSI groups must be non-empty")
    new_vals, base_vals = values[mask], values[~mask]
    if kind == "categorical":
        m = len(levels)
        base_c = np.bincount(base_vals.astype(int), minlength=m)
        new_c = np.bincount(new_vals.astype(int), minlength=m)
        labels = list(levels)
    elif kind == "discrete":
        uniq = np.unique(values)
        base_c = np.array([(base_vals == u).sum() for u in uniq])
        new_c = np.array([(new_vals == u).sum() for u in uniq])
        labels = [format(u, "g") for u in uniq]
    else:
        edges = _numeric_bins(base_vals, n_bins)
        if len(edges) < 2:
            edges = np.array([edges[0] - 0.5, edges[0] + 0.5]) if len(edges) else np.array([0.0, 1.0])
        base_c = _bin_counts(base_vals, edges)
        new_c = _bin_counts(new_vals, edges)
        labels = [f"[{lo:g}, {hi:g}]" for lo, hi in zip(edges[:-1], edges[1:])]
    base_p = base_c / base_c.sum()
    new_p = new_c / new_c.sum()
    if epsilon > 0:
        base_p = np.maximum(base_p, epsilon)
        new_p = np.maximum(new_p, epsilon)
    return psi_from_proportions(base_p, new_p, labels)


def psi_rank(ds: Dataset, per_obs: np.ndarray, q: float, epsilon: float = 0.0):
    """One PSI per predictor column, sorted descending; +inf sorts on top.

    Returns a list of (column_name, psi_value, PsiResult).
    """
    mask = worst_subset(per_obs, q)
    results = []
    for col in ds.schema:
        if col.kind == "categorical":
            vals = ds.categorical_codes[:, ds.categorical_index(col.name)]
            res = psi(vals, mask, "categorical", col.levels, epsilon=epsilon)
        else:
            vals = ds.numeric_values[:, ds.numeric_index(col.name)]
            res = psi(vals, mask, col.kind, epsilon=epsilon)
        results.append((col.name, res.value, res))
    results.sort(key=lambda r: (-r[1], r[0]))
    return results


@dataclass
class TreeNode:
    mean: float
    count: int
    column: str | None = None
    threshold: float | None = None  # numeric split: go left iff value <= threshold
    level_subset: tuple[str, ...] | None = None  # categorical: go left iff level in subset
    left: "TreeNode | None" = None
    right: "TreeNode | None" = None

    @property
    def is_leaf(self) -> bool:
        return self.left is None

    def to_dict(self) -> dict:
        d = {"mean": self.mean, "count": self.count}
        if not self.is_leaf:
            d["column"] = self.column
            if self.threshold is not None:
                d["threshold"] = self.threshold
            if self.level_subset is not None:
                d["level_subset"] = list(self.level_subset)
            d["left"] = self.left.to_dict()
            d["right"] = self.right.to_dict()
        return d


@dataclass(frozen=True)
class DiagnosticTree:
    root: TreeNode
    max_depth: int
    min_leaf: int

    def predict_one(self, numeric_row, cat_row, ds: Dataset) -> float:
        node = self.root
        while not node.is_leaf:
            col = next(c for c in ds.schema if c.name == node.column)
            if col.kind == "categorical":
                level = col.levels[int(cat_row[ds.categorical_index(col.name)])]
                node = node.left if level in node.level_subset else node.right
            else:
                v = numeric_row[ds.numeric_index(col.name)]
                node = node.left if v <= node.threshold else node.right
        return node.mean


def _sse(y: np.ndarray) -> float:
    return float(((y - y.mean()) ** 2).sum()) if len(y) else 0.0


def _best_numeric_split(x: np.ndarray, y: np.ndarray, min_leaf: int):
    order = np.argsort(x, kind="stable")
    xs, ys = x[order], y[order]
    n = len(xs)
    csum = np.cumsum(ys)
    csq = np.cumsum(ys**2)
    total_sum, total_sq = csum[-1], csq[-1]
    best = None
    for i in range(min_leaf - 1, n - min_leaf):
        if xs[i] == xs[i + 1]:
            continue
        nl = i + 1
        sse_l = csq[i] - csum[i] ** 2 / nl
        nr = n - nl
        rs = total_sum - csum[i]
        sse_r = (total_sq - csq[i]) - rs**2 / nr
        score = sse_l + sse_r
        if best is None or score < best[0] - 1e-12:
            best = (score, (xs[i] + xs[i + 1]) / 2.0)
    return best  # (children sse, threshold) or None


def _best_categorical_split(codes: np.ndarray, y: np.ndarray, levels, min_leaf: int):
    # mean-ordering heuristic: sort observed levels by mean response, then
    # scan ordered prefixes as candidate left subsets
    observed = np.unique(codes)
    if len(observed) < 2:
        return None
    means = [(y[codes == c].mean(), c) for c in observed]
    means.sort()
    ordered = [c for _, c in means]
    best = None
    left = np.zeros(len(codes), dtype=bool)
    for cut in range(len(ordered) - 1):
        left |= codes == ordered[cut]
        nl = int(left.sum())
        if nl < min_leaf or len(codes) - nl < min_leaf:
            continue
        score = _sse(y[left]) + _sse(y[~left])
        if best is None or score < best[0] - 1e-12:
            subset = tuple(levels[c] for c in sorted(ordered[: cut + 1]))
            best = (score, subset)
    return best


def _grow(ds: Dataset, idx: np.ndarray, y: np.ndarray, depth, max_depth, min_leaf) -> TreeNode:
    node = TreeNode(mean=float(y.mean()), count=len(idx))
    if depth >= max_depth or len(idx) < 2 * min_leaf:
        return node
    parent_sse = _sse(y)
    if parent_sse <= 0:
        return node
    best = None  # (children sse, col order, descriptor)
    for order, col in enumerate(ds.schema):
        if col.kind == "categorical":
            codes = ds.categorical_codes[idx, ds.categorical_index(col.name)]
            cand = _best_categorical_split(codes, y, col.levels, min_leaf)
            if cand is not None:
                key = (cand[0], order)
                if best is None or key < best[:2]:
                    best = (cand[0], order, ("cat", col, cand[1]))
        else:
            x = ds.numeric_values[idx, ds.numeric_index(col.name)]
            cand = _best_numeric_split(x, y, min_leaf)
            if cand is not None:
                key = (cand[0], order)
                if best is None or key < best[:2]:
                    best = (cand[0], order, ("num", col, cand[1]))
    if best is None or best[0] >= parent_sse - 1e-12:  # no strict variance gain
        return node
    kind, col, desc = best[2]
    if kind == "num":
        x = ds.numeric_values[idx, ds.numeric_index(col.name)]
        go_left = x <= desc
        node.column, node.threshold = col.name, float(desc)
    else:
        codes = ds.categorical_codes[idx, ds.categorical_index(col.name)]
        left_codes = {col.levels.index(lvl) for lvl in desc}
        go_left = np.isin(codes, list(left_codes))
        node.column, node.level_subset = col.name, desc
    node.left = _grow(ds, idx[go_left], y[go_left], depth + 1, max_depth, min_leaf)
    node.right = _grow(ds, idx[~go_left], y[~go_left], depth + 1, max_depth, min_leaf)
    return node


def fit_diagnostic_tree(
    ds: Dataset,
    per_obs: np.ndarray,
    max_depth: int = 3,
    min_leaf: int | None = None,
) -> DiagnosticTree:
    """Greedy binary partitioning of the covariate space on per-observation
    volatility, minimizing weighted within-node variance (CART regression)."""
    per_obs = np.asarray(per_obs, dtype=float)
    if min_leaf is None:
        min_leaf = max(30, ds.n_rows // 100)
    if ds.n_rows < 2 * min_leaf:
        raise ContractError("too few observations for the requested min_leaf")
    root = _grow(ds, np.arange(ds.n_rows), per_obs, 0, max_depth, min_leaf)
    return DiagnosticTree(root=root, max_depth=max_depth, min_leaf=min_leaf)


def monotone_violations(var_values, preds) -> int:
    """Sign changes of successive prediction differences along one variable.

    Pairs are sorted by variable value (stable); zero differences are dropped
    before counting sign changes.  Fewer than 3 points count as 0.
    """
    var_values = np.asarray(var_values, dtype=float)
    preds = np.asarray(preds, dtype=float)
    if len(preds) < 3:
        return 0
    order = np.argsort(var_values, kind="stable")
    diffs = np.diff(preds[order])
    signs = np.sign(diffs)
    signs = signs[signs != 0]
    if len(signs) < 2:
        return 0
    return int((signs[1:] != signs[:-1]).sum())


@dataclass(frozen=True)
class SingleVarDiagnosis:
    column: str
    per_obs: np.ndarray  # rPPV under single-variable perturbation
    violations: np.ndarray  # monotone-violation count per observation
    pdp_curve: list  # (grid value, mean prediction) pairs
    scatter: np.ndarray  # (n, 2): observed value, rPPV
    budget: float
    strategy: str


def single_variable_diagnosis(
    scorer,
    ds: Dataset,
    column: str,
    budget: float,
    k: int,
    master_seed: int,
    strategy: str = "raw",
    mode: str = "independent",
    grid_size: int = 50,
    stats: ColumnStats | None = None,
    clip: bool = True,
) -> SingleVarDiagnosis:
    """Perturb one numeric column only, keeping everything else fixed."""
    if stats is None:
        stats = column_stats(ds)
    corr = pearson_correlation(ds)
    noise = sample_noise(ds.n_rows, k, corr, mode, master_seed)
    plan = NumericPerturbPlan(
        budget=budget, strategy=strategy, mode=mode, clip=clip, target_columns=(column,)
    )
    buckets = quantile_buckets(ds) if strategy == "adaptive" else None
    batch = perturb(ds, stats, noise, plan, buckets)
    yhat, yhat_ik = predict_batch_perturbed(scorer, ds, numeric_batch=batch)
    summary = summarize_batch(yhat, yhat_ik)
    j = ds.numeric_index(column)
    violations = np.array(
        [
            monotone_violations(batch.values[i, :, j], yhat_ik[i])
            for i in range(ds.n_rows)
        ]
    )
    curve = pdp(scorer, ds, column, pdp_grid(ds, column, grid_size))
    scatter = np.column_stack([ds.numeric_values[:, j], summary.per_obs])
    return SingleVarDiagnosis(
        column=column,
        per_obs=summary.per_obs,
        violations=violations,
        pdp_curve=curve,
        scatter=scatter,
        budget=budget,
        strategy=strategy,
    )
