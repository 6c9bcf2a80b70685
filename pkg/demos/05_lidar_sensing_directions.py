"""Choosing LIDAR sensing directions for an advection-diffusion plume.

A LIDAR at the origin of the unit disk picks a fraction of beam
directions; measurements along each beam at five times feed a Bayesian
reconstruction of the initial condition of

    u_t + c1 u_x + c2 u_y - mu (u_xx + u_yy) = source.

The forward map is the truncated Fourier propagation kernel, compressed
with Chebyshev interpolation; one weight per sector is optimized and
rounded.  With wind blowing along +x and c2 = 0 the chosen directions
are symmetric about the x axis.
"""

import numpy as np

import sensorplace as sp

cfg = sp.LidarConfig()  # c1=0.1, c2=0, mu=1, 30 sectors, select 20%
print(f"sectors: {cfg.n_d}, beams to select: {cfg.budget}, "
      f"measurement times: {cfg.times}")

# sanity: the truncation order p is enough once reconstruction stabilizes
def u0(x, y):
    return np.sin(np.pi * x) * np.sin(np.pi * y)

xs = np.linspace(-1, 1, 61)
gx, gy = np.meshgrid(xs, xs, indexing="ij")
norm = np.linalg.norm(u0(gx, gy))
print("\nreconstruction error of the test initial state by mode cutoff:")
for p in (1, 2, 3, 5):
    coeffs = sp.fourier_coefficients_u0(u0, p)
    err = np.linalg.norm(sp.reconstruct_u0(coeffs, gx, gy) - u0(gx, gy)) / norm
    print(f"  p={p}: relative L2 error {err:.2e}")

problem = sp.build_lidar_problem(cfg, node_constant=8.0)
result = sp.solve_relaxed(
    problem.lowrank,
    problem.setup,
    float(problem.budget),
    sp.SqpConfig(epsilon=1e-3),
    row_group=problem.row_group,
)
w = result.weights.w
rounded = sp.sum_up_round(result.weights, sp.angular_plan(problem.sector_angles))
gap = sp.integrality_gap(problem.lowrank, problem.setup, result.weights, rounded)

print(f"\nSQP: {result.status} after {result.iterations} iterations, "
      f"objective {result.objective_trace[-1]:.2f}")
print(f"x-axis symmetry of the relaxed design: {np.abs(w - w[::-1]).max():.1e}")
print(f"surrogate integrality gap: {gap.surrogate:.3e}")

print("\nsector weights (angle in degrees, relaxed weight, selected):")
for k in np.argsort(-w)[: cfg.budget + 2]:
    angle = np.degrees(problem.sector_angles[k])
    mark = "*" if rounded.w[k] > 0.5 else " "
    print(f"  {angle:6.1f}  {w[k]:.3f}  {mark}")
