"""Brute-force oracle for the synthetic drift scenario used by the acceptance suite.

Computes, from closed-form unigram counts, the per-bucket BPC, the OLS slope over
post-cutoff buckets, base BPC and offset changes, and the question-stream
accuracies with their one-sided p-values. Run with python3; prints the values
that are frozen into tests/acceptance/acceptance_main.cpp.
"""
import math
from datetime import date

import numpy as np
from scipy.stats import norm

ALPHA = 16
MONTHS = 24
CUTOFF = 12
DOC_LEN = 23 * 136  # 3128


def counts(m):
    return [(23 - m) * (16 - c) + m * (c + 1) for c in range(ALPHA)]


train = [0] * ALPHA
for m in range(CUTOFF):
    for c, n in enumerate(counts(m)):
        train[c] += n
total = sum(train)
q = [(train[c] + 1) / (total + ALPHA) for c in range(ALPHA)]

bpc = []
for m in range(MONTHS):
    n = counts(m)
    assert sum(n) == DOC_LEN
    bits = sum(n[c] * -math.log2(q[c]) for c in range(ALPHA))
    bpc.append(bits / DOC_LEN)

for m, v in enumerate(bpc):
    print(f"bpc[{m}] = {v:.15f}")

post = np.arange(CUTOFF, MONTHS)
slope, intercept = np.polyfit(post, np.array(bpc[CUTOFF:]), 1)
print(f"tbi_post = {slope:.15e}")
slope_all, _ = np.polyfit(np.arange(MONTHS), np.array(bpc), 1)
print(f"tbi_all = {slope_all:.15e}")


def month_start(m):
    return date(2022 + m // 12, m % 12 + 1, 1)


release = date(2023, 1, 1)


def add_months(d, k):
    y, mo = divmod(d.month - 1 + k, 12)
    return date(d.year + y, mo + 1, d.day)


base_idx = []
for m in range(MONTHS):
    s, e = month_start(m), month_start(m + 1) if m + 1 < 24 else date(2024, 1, 1)
    mid2 = s.toordinal() + e.toordinal()
    if 2 * add_months(release, -6).toordinal() <= mid2 < 2 * release.toordinal():
        base_idx.append(m)
base = sum(bpc[m] for m in base_idx) / len(base_idx)
print("base buckets", base_idx, f"base = {base:.15f}")

for off in (3, 6, 9, 12):
    t2 = 2 * add_months(release, off).toordinal()
    best = None
    for m in range(MONTHS):
        s = month_start(m)
        e = month_start(m + 1) if m + 1 < 24 else date(2024, 1, 1)
        d = abs(s.toordinal() + e.toordinal() - t2)
        if d <= e.toordinal() - s.toordinal() and (best is None or d < best[0]):
            best = (d, m)
    m = best[1]
    print(f"change[{off}] bucket {m} = {(bpc[m] - base) / base * 100:.12f}")

# Question stream
PER_MONTH = 60


def correct_count(m):
    return 39 if m < CUTOFF else 39 - 2 * (m - 11)


pre_c = sum(correct_count(m) for m in range(CUTOFF))
pre_n = PER_MONTH * CUTOFF
print(f"pre pooled {pre_c}/{pre_n}")


def window_of(m, day):
    # months after release, partial months rounded up
    close = date(2022 + m // 12, m % 12 + 1, day)
    k = 0
    while add_months(release, k) < close:
        k += 1
    return k // 2


win = {}
for m in range(CUTOFF, MONTHS):
    for k in range(PER_MONTH):
        w = window_of(m, 2 + k % 27)
        c, n = win.get(w, (0, 0))
        win[w] = (c + (1 if k < correct_count(m) else 0), n + 1)


def p_one_sided(c1, n1, c2, n2):
    a1, a2 = c1 / n1, c2 / n2
    z = (a1 - a2) / math.sqrt(a1 * (1 - a1) / n1 + a2 * (1 - a2) / n2)
    return z, norm.sf(z)


for w in sorted(win):
    c, n = win[w]
    z, p = p_one_sided(pre_c, pre_n, c, n)
    print(f"window {w}: {c}/{n} z={z:.12f} p={p:.12e}")

fc = sum(c for c, _ in win.values())
fn = sum(n for _, n in win.values())
z, p = p_one_sided(pre_c, pre_n, fc, fn)
print(f"future pooled {fc}/{fn} z={z:.12f} p={p:.12e}")
