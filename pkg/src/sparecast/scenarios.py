"""Enumeration of random/wearout assignment scenarios over uncertain modes.

A group of n uncertain modes spans 2^n assignments. Each assignment has a
probability (product of the per-mode assignment probabilities) and a
combined rate set (random sum plus wearout maximum). Assignments whose
combined sets coincide are collapsed into one entry with their
probabilities summed; the all-random case and every exactly-one-wearout
case always combine the same multiset of estimates, so at least n + 1 raw
scenarios merge.

Certain modes (p_wearout exactly 0 or 1) contribute no branching: they are
folded into a fixed base before the sweep, so enumeration cost is governed
by the uncertain-mode count alone. Impossible assignments (those flipping
a certain mode) carry probability zero and are dropped after collapse.

Subset sums of best estimates are accumulated in compensated
(double-double) arithmetic so that every assignment's combined best equals
the correctly rounded sum of its estimate multiset, matching the scalar
``combine_random`` (which uses ``math.fsum``) bit for bit. That keeps the
n + 1 coincidence exact under collapse for arbitrary float inputs.
Collapse keys quantize the three elements to 1e-9 fpmc.

Three sweep implementations share one collapse: a scalar shortcut when
nothing is uncertain, a vectorised doubling sweep for small groups, and a
JIT kernel (``_sweep``) for large ones. All three are bit-compatible.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import EmptyInput, TooManyModes
from .rates import (
    WEIGHT_BEST,
    WEIGHT_HIGH,
    WEIGHT_LOW,
    FailureMode,
    RangeEstimate,
    combine_mixed,
)

DEFAULT_MODE_CAP = 20
KEY_DECIMALS = 9
# tiny groups sweep fastest in plain Python; mid-size groups vectorise;
# large groups go through the JIT kernel
_SCALAR_MAX_K = 6
_JIT_THRESHOLD = 14


def quantize(value: float) -> float:
    """Collapse-key quantization: 1e-9 fpmc grid (np.round semantics everywhere)."""
    return float(np.round(value, KEY_DECIMALS))


@dataclass(frozen=True)
class ScenarioEntry:
    """One collapsed scenario: a representative assignment (True = wearout,
    positions match the input mode list), total probability, combined set."""

    assignment: tuple[bool, ...]
    probability: float
    combined: RangeEstimate


@dataclass
class ScenarioDistribution:
    """Collapsed scenario list for one uncertain-mode group.

    Entries are held columnar (numpy) and materialised lazily; a 2^20
    enumeration never needs a million Python objects unless asked for.
    ``n`` counts uncertain modes only. Probabilities sum to 1. Entry order
    is descending probability, ties by ascending best estimate (then low,
    high, representative mask).
    """

    modes: tuple[FailureMode, ...]
    n: int
    ambiguous: bool = False
    _uncertain_idx: tuple[int, ...] = ()
    _prob: np.ndarray = field(default=None, repr=False)
    _low: np.ndarray = field(default=None, repr=False)
    _best: np.ndarray = field(default=None, repr=False)
    _high: np.ndarray = field(default=None, repr=False)
    _key_low: np.ndarray = field(default=None, repr=False)
    _key_best: np.ndarray = field(default=None, repr=False)
    _key_high: np.ndarray = field(default=None, repr=False)
    _rep_mask: np.ndarray = field(default=None, repr=False)
    _entries: list[ScenarioEntry] | None = field(default=None, repr=False)
    _key_index: dict | None = field(default=None, repr=False)

    def __len__(self) -> int:
        return len(self._prob)

    def assignment_from_mask(self, mask: int) -> tuple[bool, ...]:
        """Expand an uncertain-bits mask to a full-length assignment tuple."""
        bits = {idx: bool(mask >> b & 1) for b, idx in enumerate(self._uncertain_idx)}
        return tuple(bits.get(i, m.p_wearout == 1.0) for i, m in enumerate(self.modes))

    def entry_at(self, index: int) -> ScenarioEntry:
        return ScenarioEntry(
            assignment=self.assignment_from_mask(int(self._rep_mask[index])),
            probability=float(self._prob[index]),
            combined=RangeEstimate(
                float(self._low[index]), float(self._best[index]), float(self._high[index])
            ),
        )

    @property
    def entries(self) -> list[ScenarioEntry]:
        if self._entries is None:
            self._entries = [self.entry_at(i) for i in range(len(self._prob))]
        return self._entries

    def probability_total(self) -> float:
        return float(self._prob.sum())

    @property
    def probabilities(self) -> np.ndarray:
        return self._prob

    def find_entry(self, combined: RangeEstimate) -> int | None:
        """Index of the entry whose collapse key matches the given set, else None."""
        if self._key_index is None:
            self._key_index = {
                (self._key_low[i], self._key_best[i], self._key_high[i]): i
                for i in range(len(self._prob))
            }
        key = (quantize(combined.low), quantize(combined.best), quantize(combined.high))
        return self._key_index.get(key)

    @property
    def best_range(self) -> tuple[float, float]:
        return float(self._best.min()), float(self._best.max())


@dataclass(frozen=True)
class ScenarioSummary:
    """The three decision scenarios: all-random maximum, all-wearout minimum,
    and the per-mode most-probable assignment."""

    maximum: ScenarioEntry
    minimum: ScenarioEntry
    most_probable: ScenarioEntry


def evaluate_assignment(
    modes: list[FailureMode] | tuple[FailureMode, ...], wearout: tuple[bool, ...]
) -> tuple[float, RangeEstimate]:
    """Scalar evaluation of one assignment: (probability, combined set)."""
    randoms = [m.rate for m, w in zip(modes, wearout) if not w]
    wearouts = [m.rate for m, w in zip(modes, wearout) if w]
    prob = math.prod(m.p_wearout if w else m.p_random for m, w in zip(modes, wearout))
    return prob, combine_mixed(randoms, wearouts)


def _base_state(base_r: list[RangeEstimate], base_w: list[RangeEstimate]):
    """Fold certain modes into the sweep's initial per-mask state."""
    shi = slo = 0.0
    rup = rdn = -math.inf
    for est in base_r:
        b = est.best
        s = shi + b
        t = s - shi
        slo += (shi - (s - t)) + (b - t)
        shi = s
        rup = max(rup, est.high - est.best)
        rdn = max(rdn, est.best - est.low)
    wlo = whe = whi = -math.inf
    for est in base_w:
        wlo = max(wlo, est.low)
        whe = max(whe, est.best)
        whi = max(whi, est.high)
    return shi, slo, rup, rdn, wlo, whe, whi


def _sweep_numpy(unc: list[FailureMode], base, base_has_r: bool):
    """Doubling sweep: after step b the first 2^(b+1) rows hold every mask of
    the first b+1 uncertain modes; bit b set means that mode is wearout."""
    k = len(unc)
    size = 1 << k
    shi0, slo0, rup0, rdn0, wlo0, wbe0, whi0 = base
    sum_hi = np.zeros(size)
    sum_lo = np.zeros(size)
    rup = np.full(size, -np.inf)
    rdn = np.full(size, -np.inf)
    wlo = np.full(size, -np.inf)
    wbe = np.full(size, -np.inf)
    whi = np.full(size, -np.inf)
    prob = np.ones(size)
    sum_hi[0], sum_lo[0], rup[0], rdn[0] = shi0, slo0, rup0, rdn0
    wlo[0], wbe[0], whi[0] = wlo0, wbe0, whi0

    for b, mode in enumerate(unc):
        m = 1 << b
        lo_v, be_v, hi_v = mode.rate.low, mode.rate.best, mode.rate.high
        first, second = slice(0, m), slice(m, 2 * m)
        # wearout half: sums/deviations unchanged, maxima absorb the mode
        sum_hi[second] = sum_hi[first]
        sum_lo[second] = sum_lo[first]
        rup[second] = rup[first]
        rdn[second] = rdn[first]
        np.maximum(wlo[first], lo_v, out=wlo[second])
        np.maximum(wbe[first], be_v, out=wbe[second])
        np.maximum(whi[first], hi_v, out=whi[second])
        np.multiply(prob[first], mode.p_wearout, out=prob[second])
        # random half: mode joins the sum and the deviation maxima
        s = sum_hi[first] + be_v
        t = s - sum_hi[first]
        sum_lo[first] += (sum_hi[first] - (s - t)) + (be_v - t)
        sum_hi[first] = s
        np.maximum(rup[first], hi_v - be_v, out=rup[first])
        np.maximum(rdn[first], be_v - lo_v, out=rdn[first])
        prob[first] *= mode.p_random

    with np.errstate(invalid="ignore"):
        s = sum_hi + wbe
        t = s - sum_hi
        best = s + (sum_lo + ((sum_hi - (s - t)) + (wbe - t)))
        dev_up = np.maximum(rup, whi - wbe)
        dev_dn = np.maximum(rdn, wbe - wlo)
        high = best + dev_up
        low = np.maximum(best - dev_dn, 0.0)
    if not np.isfinite(wbe[0]):
        # no wearout element anywhere in the base: the all-random row has no
        # wearout side and reduces to the plain random combination
        b0 = sum_hi[0] + sum_lo[0]
        best[0], high[0] = b0, b0 + rup[0]
        low[0] = max(b0 - rdn[0], 0.0)
    if not base_has_r:
        # all-wearout row has no random elements: element-wise maxima apply exactly
        low[-1], best[-1], high[-1] = wlo[-1], wbe[-1], whi[-1]
    key_low = np.round(low, KEY_DECIMALS)
    key_best = np.round(best, KEY_DECIMALS)
    key_high = np.round(high, KEY_DECIMALS)
    return low, best, high, prob, key_low, key_best, key_high


def _sweep_scalar(unc: list[FailureMode], base, base_has_r: bool):
    """Plain-Python sweep for tiny groups; operation-for-operation the same
    arithmetic as the vectorised and JIT sweeps, so results are bit-equal."""
    k = len(unc)
    size = 1 << k
    lows = [m.rate.low for m in unc]
    bests = [m.rate.best for m in unc]
    highs = [m.rate.high for m in unc]
    p_wear = [m.p_wearout for m in unc]
    shi0, slo0, rup0, rdn0, wlo0, wbe0, whi0 = base
    out_low = [0.0] * size
    out_best = [0.0] * size
    out_high = [0.0] * size
    out_prob = [0.0] * size
    neg_inf = -math.inf
    full = size - 1
    for mask in range(size):
        shi, slo = shi0, slo0
        rup, rdn = rup0, rdn0
        wlo, wbe, whi = wlo0, wbe0, whi0
        p = 1.0
        for i in range(k):
            if mask >> i & 1:
                if lows[i] > wlo:
                    wlo = lows[i]
                if bests[i] > wbe:
                    wbe = bests[i]
                if highs[i] > whi:
                    whi = highs[i]
                p *= p_wear[i]
            else:
                b = bests[i]
                s = shi + b
                t = s - shi
                slo += (shi - (s - t)) + (b - t)
                shi = s
                d = highs[i] - b
                if d > rup:
                    rup = d
                d = b - lows[i]
                if d > rdn:
                    rdn = d
                p *= 1.0 - p_wear[i]
        if (not base_has_r) and mask == full:
            lo_v, be_v, hi_v = wlo, wbe, whi
        elif wbe == neg_inf:
            be_v = shi + slo
            hi_v = be_v + rup
            lo_v = be_v - rdn
            if lo_v < 0.0:
                lo_v = 0.0
        else:
            s = shi + wbe
            t = s - shi
            slo2 = slo + ((shi - (s - t)) + (wbe - t))
            be_v = s + slo2
            du = whi - wbe
            if rup > du:
                du = rup
            dn = wbe - wlo
            if rdn > dn:
                dn = rdn
            hi_v = be_v + du
            lo_v = be_v - dn
            if lo_v < 0.0:
                lo_v = 0.0
        out_low[mask] = lo_v
        out_best[mask] = be_v
        out_high[mask] = hi_v
        out_prob[mask] = p
    low = np.array(out_low)
    best = np.array(out_best)
    high = np.array(out_high)
    return (
        low,
        best,
        high,
        np.array(out_prob),
        np.round(low, KEY_DECIMALS),
        np.round(best, KEY_DECIMALS),
        np.round(high, KEY_DECIMALS),
    )


def _sweep_jit(unc: list[FailureMode], base, base_has_r: bool):
    from . import _sweep  # deferred: importing numba is not free

    if not _sweep.HAVE_NUMBA:
        return _sweep_numpy(unc, base, base_has_r)
    k = len(unc)
    size = 1 << k
    lows = np.array([m.rate.low for m in unc])
    bests = np.array([m.rate.best for m in unc])
    highs = np.array([m.rate.high for m in unc])
    p_wear = np.array([m.p_wearout for m in unc])
    out = [np.empty(size) for _ in range(7)]
    _sweep.sweep(lows, bests, highs, p_wear, *base, base_has_r, *out)
    return tuple(out)


def enumerate_scenarios(
    modes: list[FailureMode] | tuple[FailureMode, ...],
    cap: int = DEFAULT_MODE_CAP,
) -> ScenarioDistribution:
    """Evaluate every possible assignment of the group, collapse duplicates.

    Raises TooManyModes when the uncertain-mode count exceeds ``cap``;
    the caller must prune the group or escalate to the user.
    """
    modes = tuple(modes)
    if not modes:
        raise EmptyInput("scenario enumeration requires at least one mode")
    uncertain_idx = tuple(i for i, m in enumerate(modes) if 0.0 < m.p_wearout < 1.0)
    k = len(uncertain_idx)
    if k > cap:
        raise TooManyModes(
            f"{k} uncertain modes exceed the enumeration cap of {cap}", count=k, cap=cap
        )

    base_r = [m.rate for m in modes if m.p_wearout == 0.0]
    base_w = [m.rate for m in modes if m.p_wearout == 1.0]
    unc = [modes[i] for i in uncertain_idx]

    if k == 0:
        combined = combine_mixed(base_r, base_w)
        return ScenarioDistribution(
            modes=modes,
            n=0,
            _uncertain_idx=(),
            _prob=np.array([1.0]),
            _low=np.array([combined.low]),
            _best=np.array([combined.best]),
            _high=np.array([combined.high]),
            _key_low=np.array([quantize(combined.low)]),
            _key_best=np.array([quantize(combined.best)]),
            _key_high=np.array([quantize(combined.high)]),
            _rep_mask=np.zeros(1, dtype=np.uint64),
        )

    base = _base_state(base_r, base_w)
    use_hash = False
    if k >= _JIT_THRESHOLD:
        sweep = _sweep_jit
        from . import _sweep as _sweep_mod

        use_hash = _sweep_mod.HAVE_NUMBA
    elif k <= _SCALAR_MAX_K:
        sweep = _sweep_scalar
    else:
        sweep = _sweep_numpy
    low, best, high, prob, key_low, key_best, key_high = sweep(unc, base, bool(base_r))

    # Group identical collapse keys. Both grouping strategies keep the lowest
    # mask as the representative and accumulate probability in ascending mask
    # order, so their results are bit-identical.
    size = 1 << k
    tie_safe = False
    if use_hash:
        # O(n) open-addressing grouping on the key bit patterns
        rep, group_prob = _sweep_mod.group_triples(
            (key_low + 0.0).view(np.uint64),
            (key_best + 0.0).view(np.uint64),
            (key_high + 0.0).view(np.uint64),
            prob,
        )
    else:
        # sort with the best estimate as the primary key: groups come out in
        # ascending (best, low, high) order, which also settles probability
        # ties below by plain stability
        order = np.lexsort((key_high, key_low, key_best))
        kb_s = key_best[order]
        kl_s = key_low[order]
        kh_s = key_high[order]
        boundary = np.empty(size, dtype=bool)
        boundary[0] = True
        np.not_equal(kb_s[1:], kb_s[:-1], out=boundary[1:])
        boundary[1:] |= kl_s[1:] != kl_s[:-1]
        boundary[1:] |= kh_s[1:] != kh_s[:-1]
        starts = np.flatnonzero(boundary)
        group_prob = np.add.reduceat(prob[order], starts)
        rep = order[starts]
        tie_safe = True

    keep = group_prob != 0.0
    group_prob, rep = group_prob[keep], rep[keep]

    # descending probability, ties by ascending best (then low, high)
    final = np.argsort(-group_prob, kind="stable")
    if not tie_safe:
        sorted_prob = group_prob[final]
        if np.any(sorted_prob[1:] == sorted_prob[:-1]):
            final = np.lexsort(
                (key_high[rep], key_low[rep], key_best[rep], -group_prob)
            )
    rep = rep[final]

    return ScenarioDistribution(
        modes=modes,
        n=k,
        _uncertain_idx=uncertain_idx,
        _prob=group_prob[final],
        _low=low[rep],
        _best=best[rep],
        _high=high[rep],
        _key_low=key_low[rep],
        _key_best=key_best[rep],
        _key_high=key_high[rep],
        _rep_mask=rep.astype(np.uint64),
    )


def summarize(
    distribution: ScenarioDistribution, modes: tuple[FailureMode, ...] | None = None
) -> ScenarioSummary:
    """Locate the maximum (all-random), minimum (all-wearout) and
    most-probable entries of a distribution.

    Mode ties at p_wearout = 0.5 break toward random, the conservative
    rate-summing choice. When an extreme assignment is impossible
    (probability zero because some mode is certain), the realisable
    extreme-best entry stands in for it.
    """
    modes = distribution.modes if modes is None else tuple(modes)

    def entry_for(assignment: tuple[bool, ...], fallback: str) -> ScenarioEntry:
        prob, combined = evaluate_assignment(modes, assignment)
        idx = distribution.find_entry(combined)
        if idx is not None and prob > 0.0:
            return distribution.entry_at(idx)
        if fallback == "top":
            which = 0  # entries are sorted by descending probability
        elif fallback == "max":
            which = int(np.argmax(distribution._best))
        else:
            which = int(np.argmin(distribution._best))
        return distribution.entry_at(which)

    all_r = tuple(m.p_wearout == 1.0 for m in modes)  # certain wearouts stay wearout
    all_w = tuple(m.p_wearout != 0.0 for m in modes)  # certain randoms stay random
    likely = tuple(m.p_wearout > 0.5 for m in modes)
    return ScenarioSummary(
        maximum=entry_for(all_r, "max"),
        minimum=entry_for(all_w, "min"),
        most_probable=entry_for(likely, "top"),
    )


def element_masses_above(distribution: ScenarioDistribution, threshold: float) -> np.ndarray:
    """Per-entry 0.1/0.8/0.1 element mass strictly above a threshold."""
    t = threshold
    return (
        WEIGHT_LOW * (distribution._low > t)
        + WEIGHT_BEST * (distribution._best > t)
        + WEIGHT_HIGH * (distribution._high > t)
    )


def exceedance(distribution: ScenarioDistribution, threshold: float) -> float:
    """Probability mass strictly above a threshold, extending the expert
    0.1/0.8/0.1 element weights to probability: sum over entries of
    Ps * (0.1[low > t] + 0.8[best > t] + 0.1[high > t])."""
    return float(np.dot(distribution._prob, element_masses_above(distribution, threshold)))


def _point_masses(distribution: ScenarioDistribution):
    values = np.concatenate([distribution._low, distribution._best, distribution._high])
    p = distribution._prob
    masses = np.concatenate([WEIGHT_LOW * p, WEIGHT_BEST * p, WEIGHT_HIGH * p])
    return values, masses


def ambiguity_flag(distribution: ScenarioDistribution) -> bool:
    """The recollapse ambiguity rule without the quantile sort: merge the
    0.1/0.8/0.1 point masses by quantized value and test whether the
    runner-up merged mass reaches 0.25. Sets ``distribution.ambiguous``.

    Large distributions use a sound pruning step: a value's low and high
    components together carry at most 0.2 of the mass, so a value can only
    reach the 0.25 bound when its best-element share is at least 0.0625.
    Grouping the bests alone finds every candidate (at most 16); the exact
    mass is then evaluated just for those.
    """
    if len(distribution) <= 1:
        distribution.ambiguous = False
        return False
    if len(distribution) >= 4096:
        from . import _sweep as _sweep_mod

        if _sweep_mod.HAVE_NUMBA:
            kb = distribution._key_best + 0.0
            bits = kb.view(np.uint64)
            rep, best_mass = _sweep_mod.group_triples(bits, bits, bits, distribution._prob)
            p_total = float(distribution._prob.sum())
            heavy = best_mass >= 0.0625 * p_total
            hits = 0
            for row, b_mass in zip(rep[heavy], best_mass[heavy]):
                v = kb[row]
                mass = (
                    WEIGHT_BEST * float(b_mass)
                    + WEIGHT_LOW
                    * float(distribution._prob[distribution._key_low == v].sum())
                    + WEIGHT_HIGH
                    * float(distribution._prob[distribution._key_high == v].sum())
                )
                hits += mass / p_total >= 0.25
            flag = hits >= 2
            distribution.ambiguous = flag
            return flag
    values, masses = _point_masses(distribution)
    keys = np.round(values, KEY_DECIMALS) + 0.0
    order = np.argsort(keys, kind="stable")
    keys_s = keys[order]
    boundary = np.empty(order.size, dtype=bool)
    boundary[0] = True
    np.not_equal(keys_s[1:], keys_s[:-1], out=boundary[1:])
    merged = np.add.reduceat(masses[order], np.flatnonzero(boundary))
    if merged.size < 2:
        distribution.ambiguous = False
        return False
    top_two = np.partition(merged / merged.sum(), -2)[-2:]
    flag = bool(np.min(top_two) >= 0.25)
    distribution.ambiguous = flag
    return flag


def recollapse(distribution: ScenarioDistribution) -> RangeEstimate:
    """Collapse a distribution back to a single three-element set.

    Every entry expands into three point masses (0.1/0.8/0.1 of its
    probability at low/best/high); equal values merge. The result is the
    {10th percentile, weighted median, 90th percentile} of the mass, with
    the 10th/50th taken as lower quantiles and the 90th as an upper
    quantile so a single-entry distribution recollapses to itself.

    Side effect: sets ``distribution.ambiguous`` when the second-largest
    merged mass is at least 0.25, i.e. when a runner-up value cluster is
    nearly as credible as the winner.
    """
    if len(distribution) == 1:
        # a lone entry recollapses to itself and cannot be ambiguous
        distribution.ambiguous = False
        return RangeEstimate(
            float(distribution._low[0]),
            float(distribution._best[0]),
            float(distribution._high[0]),
        )
    values, masses = _point_masses(distribution)
    keys = np.round(values, KEY_DECIMALS)
    # stable single-key sort: groups are contiguous, the first member (in
    # entry order) stands for the merged value
    order = np.argsort(keys, kind="stable")
    keys_s, values_s, masses_s = keys[order], values[order], masses[order]
    boundary = np.empty(order.size, dtype=bool)
    boundary[0] = True
    np.not_equal(keys_s[1:], keys_s[:-1], out=boundary[1:])
    starts = np.flatnonzero(boundary)
    merged_mass = np.add.reduceat(masses_s, starts)
    merged_values = values_s[starts]

    total = merged_mass.sum()
    cum = np.cumsum(merged_mass / total)

    def lower_q(q: float) -> float:
        idx = int(np.searchsorted(cum, q, side="left"))
        return float(merged_values[min(idx, len(merged_values) - 1)])

    def upper_q(q: float) -> float:
        idx = int(np.searchsorted(cum, q, side="right"))
        return float(merged_values[min(idx, len(merged_values) - 1)])

    result = RangeEstimate(lower_q(0.1), lower_q(0.5), upper_q(0.9))
    if len(merged_mass) > 1:
        top_two = np.partition(merged_mass / total, -2)[-2:]
        distribution.ambiguous = bool(np.min(top_two) >= 0.25)
    else:
        distribution.ambiguous = False
    return result
