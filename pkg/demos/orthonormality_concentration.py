"""Concentration of empirical inner products of a bounded orthonormal basis.

For n design points drawn uniformly on [0, 1] and the cosine basis, the
empirical Gram matrix of the first M basis functions concentrates around
n * identity: deviations are of order sqrt(n log n), and the probability of
exceeding C sqrt(n log n) decays like M^2 n^(-(C/C_phi^2)^2/2).

The script samples the maximal deviation at two sample sizes, showing the
sqrt(n) growth of the raw deviations and the absence of exceedances at the
threshold C = 4 C_phi^2.

Run:  python demos/orthonormality_concentration.py
"""

import numpy as np

from eigengp import KernelSpec, empirical_orthonormality, operator_eigensystem

basis = operator_eigensystem(KernelSpec("RandomSeries", alpha=1.0, series_truncation=100))

checks = [
    empirical_orthonormality(basis, n=n, M=30, reps=150, seed=5)
    for n in (1000, 4000)
]

print(f"{'n':>6} {'median dev':>11} {'max dev':>9} {'exceed frac':>12} {'bound':>9}")
raw = []
for check in checks:
    med = float(np.median(check.deviations))
    raw.append(med * np.sqrt(check.n * np.log(check.n)))
    print(
        f"{check.n:>6} {med:>11.3f} {check.deviations.max():>9.3f} "
        f"{check.exceedance_fraction:>12.4f} {check.exceedance_bound:>9.2e}"
    )

print(f"\nratio of raw median deviations (n=4000 vs n=1000): {raw[1] / raw[0]:.2f}")
print("about 2 = sqrt(4): deviations grow like sqrt(n), as the Hoeffding bound predicts")
