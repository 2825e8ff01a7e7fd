"""
Confidence intervals for a sparse IV regression
===============================================

Draw one dataset with ten endogenous regressors and twenty instruments,
run the two-step penalized GMM fit, debias it and print a coefficient table.
"""

import numpy as np

from hdgmm import CvConfig, DesignSpec, desparsified_gmm, generate_dataset

# Design 1: Z is Gaussian with Toeplitz correlation, X = pi'Z + v, and the
# structural error is heteroskedastic in ||Z_i||.
spec = DesignSpec(design_id=1, n=300, p=10, q=20, base_seed=7)
data = generate_dataset(spec, rep_index=0)
print("X", data.X.shape, "Z", data.Z.shape)
print("true beta0:", data.beta0)

res = desparsified_gmm(data.X, data.Z, data.Y, cv=CvConfig(folds=5, grid_size=50))

# the penalized fit is sparse, the debiased one is not
print("lambda (first, second step): %.3g, %.3g" % (res.first_fit.lam, res.second_fit.lam))
print("nonzero penalized coefficients:", res.second_fit.active_set)

print("\n  j   beta0   beta_hat    b_hat      se    95% interval")
for j in range(spec.p):
    print("%3d %7.2f %9.4f %9.4f %7.4f   [%7.4f, %7.4f]" % (
        j + 1, data.beta0[j], res.beta_hat[j], res.b_hat[j], res.se[j],
        res.ci_lower[j], res.ci_upper[j]))

covered = (res.ci_lower <= data.beta0) & (data.beta0 <= res.ci_upper)
print("\nintervals covering the truth: %d of %d" % (covered.sum(), spec.p))

# the approximate inverse satisfies its row constraints
print("max row residual minus mu:", np.max(res.clime.feasibility_slack - res.clime.mu))
