"""Contextual collection statistics.

Counts are always numbers of unique websites: N[t|w,f] is how many sites in
category w collect PI type t through form type f, with '*' matching every
value of a coordinate. Rates in a context are compared against all other
contexts with Welch's t-test over per-(site, context) Bernoulli indicators.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

from .dataset import AnnotatedForm

WILDCARD = "*"
DEFAULT_ALPHA = 0.05
DEFAULT_UNCOMMON_THRESHOLD = 0.025


def count_context(records: list[AnnotatedForm], pi_type: str | None = None,
                  category: str | None = None, form_type: str | None = None) -> int:
    """Unique sites matching a (t, w, f) triple; None or '*' is a wildcard.

    Categories match on either the full level1/level2 string or the level-1
    name alone.
    """
    matched = set()
    for record in records:
        if not _matches(record, pi_type, category, form_type):
            continue
        matched.add(record.domain)
    return len(matched)


def _matches(record: AnnotatedForm, pi_type, category, form_type) -> bool:
    if pi_type not in (None, WILDCARD) and pi_type not in record.pi_types:
        return False
    if form_type not in (None, WILDCARD) and record.form_type != form_type:
        return False
    if category not in (None, WILDCARD):
        names = {str(c) for c in record.categories} | {c.level1 for c in record.categories}
        if category not in names:
            return False
    return True


# ---------------------------------------------------------------------------
# Welch's t-test with a regularized-incomplete-beta p-value

@dataclass(frozen=True)
class WelchResult:
    t: float
    dof: float
    p: float


def welch_test(group_a, group_b) -> WelchResult:
    """Two-sided Welch's t-test on two sequences of observations.

    Degenerate inputs where both groups have zero variance short-circuit to
    p=1 (equal means) or p=0.
    """
    a = [float(x) for x in group_a]
    b = [float(x) for x in group_b]
    if len(a) < 2 or len(b) < 2:
        raise ValueError("welch_test needs at least 2 observations per group "
                         "(sample variance undefined)")
    mean_a = sum(a) / len(a)
    mean_b = sum(b) / len(b)
    var_a = sum((x - mean_a) ** 2 for x in a) / (len(a) - 1)
    var_b = sum((x - mean_b) ** 2 for x in b) / (len(b) - 1)
    if var_a == 0.0 and var_b == 0.0:
        if mean_a == mean_b:
            return WelchResult(0.0, float(len(a) + len(b) - 2), 1.0)
        sign = 1.0 if mean_a > mean_b else -1.0
        return WelchResult(sign * math.inf, float(len(a) + len(b) - 2), 0.0)
    sa = var_a / len(a)
    sb = var_b / len(b)
    t = (mean_a - mean_b) / math.sqrt(sa + sb)
    dof = (sa + sb) ** 2 / (sa ** 2 / (len(a) - 1) + sb ** 2 / (len(b) - 1))
    return WelchResult(t, dof, student_t_two_sided_p(t, dof))


def student_t_two_sided_p(t: float, dof: float) -> float:
    if math.isinf(t):
        return 0.0
    if t == 0.0:
        return 1.0
    x = dof / (dof + t * t)
    return regularized_incomplete_beta(dof / 2.0, 0.5, x)


def regularized_incomplete_beta(a: float, b: float, x: float) -> float:
    """I_x(a, b) via the continued-fraction expansion (modified Lentz)."""
    if x <= 0.0:
        return 0.0
    if x >= 1.0:
        return 1.0
    ln_front = (math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
                + a * math.log(x) + b * math.log1p(-x))
    front = math.exp(ln_front)
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _beta_cf(a, b, x) / a
    return 1.0 - front * _beta_cf(b, a, 1.0 - x) / b


def _beta_cf(a: float, b: float, x: float, max_iter: int = 300,
             eps: float = 1e-15) -> float:
    tiny = 1e-300
    qab = a + b
    qap = a + 1.0
    qam = a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < tiny:
        d = tiny
    d = 1.0 / d
    h = d
    for m in range(1, max_iter + 1):
        m2 = 2 * m
        num = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + num * d
        if abs(d) < tiny:
            d = tiny
        c = 1.0 + num / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        h *= d * c
        num = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + num * d
        if abs(d) < tiny:
            d = tiny
        c = 1.0 + num / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < eps:
            return h
    return h  # converged or best effort at max_iter


# ---------------------------------------------------------------------------
# significance-filtered heatmap

@dataclass
class ContextCell:
    pi_type: str
    category: str  # category name or '*'
    form_type: str  # form type or '*'
    n_collect: int
    n_total: int
    rate: float | None
    t_stat: float | None = None
    dof: float | None = None
    p_value: float | None = None
    significant: bool = False
    insufficient: bool = False
    complement_empty: bool = False

    def to_json(self) -> dict:
        return {"pi_type": self.pi_type, "category": self.category,
                "form_type": self.form_type, "n_collect": self.n_collect,
                "n_total": self.n_total, "rate": self.rate,
                "t_stat": self.t_stat, "dof": self.dof, "p_value": self.p_value,
                "significant": self.significant,
                "insufficient": self.insufficient,
                "complement_empty": self.complement_empty}


def _site_context_observations(records, pi_type, axis):
    """Per-(site, context) Bernoulli indicators for one grid axis.

    axis 'wf' keys contexts by (category, form type), 'w' by category alone,
    'f' by form type alone. The indicator marks whether the site collects the
    PI type in that context.
    """
    obs: dict[tuple, int] = {}
    for record in records:
        contexts: list[tuple]
        if axis == "wf":
            contexts = [(str(c), record.form_type) for c in record.categories]
        elif axis == "w":
            contexts = [(str(c),) for c in record.categories]
        else:
            contexts = [(record.form_type,)]
        collects = 1 if pi_type in record.pi_types else 0
        for ctx in contexts:
            key = (record.domain, ctx)
            obs[key] = max(obs.get(key, 0), collects)
    return obs


def heatmap(records: list[AnnotatedForm], pi_type: str,
            alpha: float = DEFAULT_ALPHA,
            categories: list[str] | None = None,
            form_types: list[str] | None = None) -> list[ContextCell]:
    """Context grid for one PI type, including wildcard row and column.

    Each cell's group A holds the per-(site, context) indicators inside the
    cell; group B holds every observation outside it on the same axis. Cells
    with fewer than 2 observations are marked insufficient; a cell whose
    complement is empty is flagged instead of tested.
    """
    if categories is None:
        categories = sorted({str(c) for r in records for c in r.categories})
    if form_types is None:
        form_types = sorted({r.form_type for r in records})

    cells = []
    obs_by_axis = {axis: _site_context_observations(records, pi_type, axis)
                   for axis in ("wf", "w", "f")}

    grid = [(w, f) for w in [WILDCARD, *categories] for f in [WILDCARD, *form_types]]
    for w, f in grid:
        n_collect = count_context(records, pi_type, w, f)
        n_total = count_context(records, None, w, f)
        rate = n_collect / n_total if n_total else None
        cell = ContextCell(pi_type, w, f, n_collect, n_total, rate)
        if w == WILDCARD and f == WILDCARD:
            cells.append(cell)  # the dataset-average cell is the baseline
            continue
        if w == WILDCARD:
            axis, key = "f", (f,)
        elif f == WILDCARD:
            axis, key = "w", (w,)
        else:
            axis, key = "wf", (w, f)
        inside = [v for (_, ctx), v in obs_by_axis[axis].items() if ctx == key]
        outside = [v for (_, ctx), v in obs_by_axis[axis].items() if ctx != key]
        if len(inside) < 2:
            cell.insufficient = True
        elif not outside:
            cell.complement_empty = True
        elif len(outside) < 2:
            cell.insufficient = True
        else:
            result = welch_test(inside, outside)
            cell.t_stat, cell.dof, cell.p_value = result.t, result.dof, result.p
            cell.significant = result.p < alpha
        cells.append(cell)
    return cells


# ---------------------------------------------------------------------------
# uncommon-case rule

class RateTable:
    """P[t|w,f] lookup over a cleaned dataset, categories by full name."""

    def __init__(self, records: list[AnnotatedForm]):
        self.records = records
        self._cache: dict[tuple, float | None] = {}

    def rate(self, pi_type: str, category: str, form_type: str) -> float | None:
        key = (pi_type, category, form_type)
        if key not in self._cache:
            total = count_context(self.records, None, category, form_type)
            collect = count_context(self.records, pi_type, category, form_type)
            self._cache[key] = collect / total if total else None
        return self._cache[key]


def uncommon(record: AnnotatedForm, pi_type: str, rates: RateTable,
             threshold: float = DEFAULT_UNCOMMON_THRESHOLD) -> bool:
    """True when the record collects the PI type and every category context
    of its site has a collection rate below the threshold. Sites without
    categories are judged on the wildcard-category rate."""
    if pi_type not in record.pi_types:
        return False
    if record.categories:
        contexts = [str(c) for c in record.categories]
    else:
        contexts = [WILDCARD]
    for category in contexts:
        rate = rates.rate(pi_type, category, record.form_type)
        if rate is None or rate >= threshold:
            return False
    return True


def uncommon_cases(records: list[AnnotatedForm],
                   threshold: float = DEFAULT_UNCOMMON_THRESHOLD) -> list[dict]:
    """Scan a cleaned dataset for uncommon (form, PI type) pairs."""
    rates = RateTable(records)
    out = []
    for record in records:
        for pi_type in sorted(record.pi_types):
            if uncommon(record, pi_type, rates, threshold):
                context_rates = [rates.rate(pi_type, str(c), record.form_type)
                                 for c in record.categories] or \
                    [rates.rate(pi_type, WILDCARD, record.form_type)]
                out.append({"domain": record.domain, "form_id": record.form_id,
                            "form_type": record.form_type, "pi_type": pi_type,
                            "max_context_rate": max(r for r in context_rates
                                                    if r is not None)})
    return out
