"""Regenerates fisher_oracle.csv: 1000 random (r1, n1, r2, n2) tuples with
the Fisher z statistic and two-sided p-value at 50 significant digits."""

import random

import mpmath as mp

mp.mp.dps = 50
rng = random.Random(20240917)

print("r1,n1,r2,n2,statistic,p_value")
for _ in range(1000):
    r1 = rng.uniform(-0.995, 0.995)
    r2 = rng.uniform(-0.995, 0.995)
    n1 = rng.randint(4, 5000)
    n2 = rng.randint(4, 5000)
    se = mp.sqrt(mp.mpf(1) / (n1 - 3) + mp.mpf(1) / (n2 - 3))
    t = (mp.atanh(mp.mpf(r1)) - mp.atanh(mp.mpf(r2))) / se
    p = mp.erfc(abs(t) / mp.sqrt(2))
    print(f"{r1!r},{n1},{r2!r},{n2},{mp.nstr(t, 25)},{mp.nstr(p, 25)}")
