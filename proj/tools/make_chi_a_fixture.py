"""chi_a(1, x) on [-2, 2] from an independent Frenet integration (scipy, tight tolerances).

Curvature a, torsion x/2, Frenet frame canonical at x = 0, chi(0) = 2a e_z.
Writes the curve CSV layout read by read_curve_csv: x,chi_x,chi_y,chi_z,T_x,T_y,T_z.
"""

import sys

import numpy as np
from scipy.integrate import solve_ivp


def rhs(s, y, a):
    T, n, b = y[3:6], y[6:9], y[9:12]
    tau = 0.5 * s
    return np.concatenate([T, a * n, -a * T + tau * b, -tau * n])


def main():
    a = float(sys.argv[1]) if len(sys.argv) > 1 else 0.5
    out = sys.argv[2] if len(sys.argv) > 2 else "chi_a_05_t1.csv"
    xs = np.linspace(-2.0, 2.0, 401)
    y0 = np.concatenate([[0, 0, 2 * a], [1, 0, 0], [0, 1, 0], [0, 0, 1]])
    rows = {}
    for side in (xs[xs >= 0], xs[xs <= 0][::-1]):
        sol = solve_ivp(rhs, (0.0, side[-1]), y0, t_eval=side, args=(a,), method="DOP853", rtol=1e-13, atol=1e-14)
        for k, x in enumerate(sol.t):
            rows[round(x, 12)] = sol.y[:, k]
    with open(out, "w") as f:
        f.write("x,chi_x,chi_y,chi_z,T_x,T_y,T_z\n")
        for x in xs:
            y = rows[round(x, 12)]
            f.write(",".join(repr(float(v)) for v in [x, *y[0:6]]) + "\n")


if __name__ == "__main__":
    main()
