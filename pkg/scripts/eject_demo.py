#!/usr/bin/env python3
"""Run the documented eigenvalue-ejection experiment and print the scan.

The unperturbed model (n=3, K=1, degree 0, rank 1) has a one-dimensional
kernel: the constant section.  Perturbing with a cosine connection whose
direction is orthogonal to its own frequency pushes the zero eigenvalue
onto the positive axis at second order; the quadratic fit against the
predicted second variation settles the curvature factor.
"""

import numpy as np

from cktlab import torusmodel as tm

cfg = tm.TorusConfig(n=3, K=1, m=0, r=1)
conn0 = tm.FourierConnection.zero(r=1, n=3)
A = tm.FourierConnection.cosine_mode(3, (0, 1, 0), 0, 0.5j * np.eye(1))

res = tm.lambda_scan(cfg, conn0, A, np.linspace(-0.1, 0.1, 9))

print(f"window radius           : {res.window_radius:.6f}")
print(f"predicted 2nd variation : {res.predicted_second_variation:.10f}")
print(f"lambda_dot (fit)        : {res.lambda_dot_fit:.3e}")
print(f"lambda_ddot (fit)       : {res.lambda_ddot_fit:.10f}")
print(f"curvature factor        : {res.curvature_factor:.6f}  "
      "(lambda_ddot / (2 x predicted))")
print()
print(f"{'s':>10} {'lambda':>16} {'kernel_dim':>11}")
for s, lam, kd in zip(res.s_values, res.lambdas, res.kernel_dims):
    print(f"{s:>10.4f} {lam:>16.10f} {kd:>11d}")
