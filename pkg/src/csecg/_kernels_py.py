"""Pure-Python/numpy reference versions of the compiled kernels.

Every function here mirrors ``_kernels.pyx`` operation for operation, so the
two backends return bit-identical results.
"""
import numpy as np


def decode_212(buf, total):
    """Unpack ``total`` interleaved 12-bit samples from format-212 bytes."""
    raw = np.frombuffer(bytes(buf), dtype=np.uint8)
    npairs = (total + 1) // 2
    need = 3 * npairs
    if raw.size < need:
        # odd totals may omit the padding byte of the final triplet
        raw = np.concatenate([raw, np.zeros(need - raw.size, dtype=np.uint8)])
    trip = raw[:need].reshape(npairs, 3).astype(np.int16)
    out = np.empty(2 * npairs, dtype=np.int16)
    out[0::2] = ((trip[:, 1] & 0x0F) << 8) | trip[:, 0]
    out[1::2] = ((trip[:, 1] & 0xF0) << 4) | trip[:, 2]
    out[out >= 2048] -= 4096
    return out[:total]


def block_sum(x, d):
    """Non-overlapping sums of ``d`` consecutive samples, accumulated left to right."""
    x = np.ascontiguousarray(x)
    m = x.shape[0] // d
    out = x[0:m * d:d].copy()
    for k in range(1, d):
        out += x[k:m * d:d]
    return out


def pick_qrs(env, slope, cand, refractory, twave, slope_win, spki, npki,
             c_signal, c_noise, thr_frac, searchback, sb_factor, sb_coef):
    """Adaptive-threshold classification of envelope peaks into QRS / noise.

    Returns the accepted envelope-peak indices in ascending order.
    """
    qrs = []
    rr = []
    last = -1
    last_slope = 0.0
    sb_start = 0
    thr = npki + thr_frac * (spki - npki)
    for ci in range(len(cand)):
        p = int(cand[ci])
        if searchback and last >= 0 and rr:
            rr_avg = sum(rr) / len(rr)
            if p - last > sb_factor * rr_avg:
                best = -1
                bestv = 0.0
                for cj in range(sb_start, ci):
                    q = int(cand[cj])
                    if q - last < refractory:
                        continue
                    v = env[q]
                    if v > 0.5 * thr and v > bestv:
                        best = q
                        bestv = v
                        sb_start_next = cj + 1
                if best >= 0:
                    spki = sb_coef * bestv + (1.0 - sb_coef) * spki
                    rr.append(best - last)
                    if len(rr) > 8:
                        rr.pop(0)
                    last_slope = _window_max(slope, best, slope_win)
                    last = best
                    qrs.append(best)
                    sb_start = sb_start_next
                    thr = npki + thr_frac * (spki - npki)
        v = env[p]
        if last >= 0 and p - last < refractory:
            continue
        if v > thr:
            s = _window_max(slope, p, slope_win)
            if last >= 0 and p - last < twave and s < 0.5 * last_slope:
                npki = c_noise * v + (1.0 - c_noise) * npki
            else:
                spki = c_signal * v + (1.0 - c_signal) * spki
                if last >= 0:
                    rr.append(p - last)
                    if len(rr) > 8:
                        rr.pop(0)
                last = p
                last_slope = s
                qrs.append(p)
                sb_start = ci + 1
        else:
            npki = c_noise * v + (1.0 - c_noise) * npki
        thr = npki + thr_frac * (spki - npki)
    return np.asarray(qrs, dtype=np.int64)


def _window_max(a, p, win):
    lo = p - win
    if lo < 0:
        lo = 0
    m = a[lo]
    for i in range(lo + 1, p + 1):
        if a[i] > m:
            m = a[i]
    return m
