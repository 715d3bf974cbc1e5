"""JIT-compiled assignment sweep for large uncertain-mode groups.

Optional fast path: imported lazily by the scenario engine only when an
enumeration is big enough to need it. The per-mask arithmetic mirrors the
pure-numpy doubling sweep operation for operation (same compensated-sum
order, same quantization), so both paths produce bit-identical results.
"""

import numpy as np

try:
    import numba
except ImportError:  # pragma: no cover - exercised only without numba
    numba = None

HAVE_NUMBA = numba is not None

if HAVE_NUMBA:

    @numba.njit(parallel=True, cache=True)
    def sweep(
        lows,
        bests,
        highs,
        p_wear,
        base_sum_hi,
        base_sum_lo,
        base_rup,
        base_rdn,
        base_wlo,
        base_wbe,
        base_whi,
        base_has_random,
        low,
        best,
        high,
        prob,
        key_low,
        key_best,
        key_high,
    ):
        k = lows.size
        size = low.size
        full = size - 1
        for mask in numba.prange(size):
            shi = base_sum_hi
            slo = base_sum_lo
            rup = base_rup
            rdn = base_rdn
            wlo = base_wlo
            wbe = base_wbe
            whi = base_whi
            p = 1.0
            for i in range(k):
                if (mask >> i) & 1:
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
            if (not base_has_random) and mask == full:
                lo_v, be_v, hi_v = wlo, wbe, whi
            elif wbe == -np.inf:
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
            low[mask] = lo_v
            best[mask] = be_v
            high[mask] = hi_v
            prob[mask] = p
            key_low[mask] = np.rint(lo_v * 1e9) / 1e9
            key_best[mask] = np.rint(be_v * 1e9) / 1e9
            key_high[mask] = np.rint(hi_v * 1e9) / 1e9

    @numba.njit(cache=True)
    def group_triples(kl_bits, kb_bits, kh_bits, prob):
        """Group rows with identical key triples by open-addressing hash.

        Keys arrive as uint64 bit patterns of the quantized floats (sign
        normalised, no NaNs), so equality of bits is equality of keys.
        Groups keep first-encounter (lowest mask) representatives and
        accumulate probability in row order, matching the sorted-reduce
        path bit for bit.
        """
        n = kl_bits.size
        log2 = 2
        while (1 << log2) < 2 * n:
            log2 += 1
        size = 1 << log2
        mask = size - 1
        slot_row = np.full(size, -1, np.int64)
        slot_group = np.empty(size, np.int64)
        group_rep = np.empty(n, np.int64)
        group_prob = np.empty(n)
        count = 0
        for i in range(n):
            a = kl_bits[i]
            b = kb_bits[i]
            c = kh_bits[i]
            h = (a ^ (b << np.uint64(1)) ^ (c << np.uint64(2))) * np.uint64(
                0x9E3779B97F4A7C15
            )
            h ^= h >> np.uint64(29)
            h *= np.uint64(0xBF58476D1CE4E5B9)
            h ^= h >> np.uint64(32)
            slot = np.int64(h & np.uint64(mask))
            while True:
                row = slot_row[slot]
                if row == -1:
                    slot_row[slot] = i
                    slot_group[slot] = count
                    group_rep[count] = i
                    group_prob[count] = prob[i]
                    count += 1
                    break
                if kl_bits[row] == a and kb_bits[row] == b and kh_bits[row] == c:
                    group_prob[slot_group[slot]] += prob[i]
                    break
                slot = (slot + 1) & mask
        return group_rep[:count].copy(), group_prob[:count].copy()

else:  # pragma: no cover
    sweep = None
    group_triples = None
