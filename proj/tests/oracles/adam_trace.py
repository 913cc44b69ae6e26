"""Two Adam steps on one scalar with g = 1, computed with exact rationals."""
from fractions import Fraction as Fr
from decimal import Decimal, getcontext

getcontext().prec = 40
b1, b2, eps, lr = Fr(9, 10), Fr(999, 1000), Fr(1, 10**8), Fr(1, 1000)
theta, m, v = Fr(1, 2), Fr(0), Fr(0)
for t in (1, 2):
    g = Fr(1)
    m = b1 * m + (1 - b1) * g
    v = b2 * v + (1 - b2) * g * g
    mhat = m / (1 - b1**t)
    vhat = v / (1 - b2**t)
    # sqrt(vhat) is exactly 1 here, so the update stays rational
    assert vhat == 1
    theta -= lr * mhat / (1 + eps)
    print(t, Decimal(theta.numerator) / Decimal(theta.denominator), "m", float(m), "v", float(v))
