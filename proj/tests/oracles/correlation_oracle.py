"""Direct-formula Pearson r between parameter count and Wiki TBI.

Sizes come from the attribute fixture when a row exists, otherwise from the
model name ("7B", "1.8B", ...). Prints r and n; the values are frozen into the
acceptance test.
"""
import csv
import math
import pathlib
import re
from fractions import Fraction

here = pathlib.Path(__file__).resolve().parent.parent / "fixtures"
trends = list(csv.DictReader(open(here / "published_tbi_wiki.csv")))
attrs = {r["model"]: r for r in csv.DictReader(open(here / "model_attributes.csv"))}
size_re = re.compile(r"(?:^|[-_ ])(\d+(?:\.\d+)?)[Bb](?![A-Za-z0-9])")

xs, ys = [], []
for row in trends:
    name = row["model"]
    if name in attrs and attrs[name]["size_params"]:
        size = Fraction(attrs[name]["size_params"].replace("e9", "")) * 10**9
    else:
        m = size_re.search(name)
        if not m:
            continue
        size = Fraction(m.group(1)) * 10**9
    xs.append(size)
    ys.append(Fraction(row["tbi"]))

# Exact rational sums; a single square root at the end.
n = len(xs)
mx, my = sum(xs) / n, sum(ys) / n
sxy = sum((x - mx) * (y - my) for x, y in zip(xs, ys))
sxx = sum((x - mx) ** 2 for x in xs)
syy = sum((y - my) ** 2 for y in ys)
r2 = sxy * sxy / (sxx * syy)
r = math.copysign(math.sqrt(r2), sxy)
print(f"n={n}")
print(f"r={r!r}")
