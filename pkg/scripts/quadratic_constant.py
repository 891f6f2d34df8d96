"""Where does (log k)^2 E A_k go for the quadratic law?

Compares the partial sums against the published constant 2 (a0 / (a1 - a0))^2
and the Laplace constant a0 2^a0 2 a0^2 / (a1 - a0)^2, together with the
quadrature value of E A_k.
"""
import math

from lsvlab import asymptotics as asy
from lsvlab.noise import ParamDistribution, laplace_signature, signature

Q = ParamDistribution.quadratic(0.3, 0.6)
ELLS = [10**3, 10**4, 10**5, 10**6, 10**7]

c_pub = signature(Q).c_nu
c_lap = laplace_signature(Q).c_nu
print(f"published c = {c_pub:.6f}   laplace c = {c_lap:.6f}")
print(f"{'l':>10} {'(log l)^2 E A_l':>16} {'S_l':>10} {'S/c_pub':>9} {'S/c_lap':>9}")
sums = asy.a1_partial_sums(Q, ELLS)
for ell, s in zip(ELLS, sums):
    ea = asy.expected_a(Q, ell, method="quadrature")
    print(f"{ell:>10} {math.log(ell) ** 2 * ea:>16.6f} {s:>10.6f} {s / c_pub:>9.4f} {s / c_lap:>9.4f}")
