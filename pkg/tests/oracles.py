"""Independent reference computations used to freeze expected values."""
import math

import numpy as np
from scipy.integrate import quad, solve_ivp


def shoot_ivp(q0, N, p, b, r0=1e-6, r_max=25.0, rtol=1e-13):
    """Adaptive DOP853 trajectory of the radial ground-state ODE in ``r``.

    Returns +1 if it crosses zero, -1 if it turns upward, plus the solution.
    """
    q = q0 + q0 / (2 * N) * r0 ** 2 - q0 ** p / ((2 - b) * (N - b)) * r0 ** (2 - b)
    dq = q0 / N * r0 - q0 ** p / (N - b) * r0 ** (1 - b)

    def f(r, y):
        return [y[1], -(N - 1) / r * y[1] + y[0] - r ** (-b) * abs(y[0]) ** (p - 1) * y[0]]

    def cross(r, y):
        return y[0]
    cross.terminal = True

    def turn(r, y):
        return y[1]
    turn.terminal = True

    sol = solve_ivp(f, (r0, r_max), [q, dq], method="DOP853", rtol=rtol, atol=1e-15,
                    events=(cross, turn), dense_output=True)
    if sol.t_events[0].size:
        return 1, sol
    if sol.t_events[1].size:
        return -1, sol
    y = sol.y[:, -1]
    return (-1 if y[0] + y[1] > 0 else 1), sol


def ground_state_ivp(N, p, b, lo=1.0, hi=20.0, iters=60):
    while shoot_ivp(lo, N, p, b)[0] != -1:
        lo /= 2
    while shoot_ivp(hi, N, p, b)[0] != 1:
        hi *= 2
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if mid in (lo, hi):
            break
        if shoot_ivp(mid, N, p, b)[0] == 1:
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


def norms_ivp(q0, N, p, b, r_cut=12.0):
    """Radial norms of the oracle trajectory on [0, r_cut] by adaptive quadrature."""
    _, sol = shoot_ivp(q0, N, p, b, r_max=r_cut)
    area = 2 * math.pi ** (N / 2) / math.gamma(N / 2)
    r_end = sol.t[-1]
    Q = lambda r: sol.sol(r)[0]
    dQ = lambda r: sol.sol(r)[1]
    kw = dict(limit=400, epsabs=1e-14, epsrel=1e-13)
    pts = np.linspace(sol.t[0], r_end, 40)[1:-1]
    m = quad(lambda r: Q(r) ** 2 * r ** (N - 1), sol.t[0], r_end, points=pts, **kw)[0]
    k = quad(lambda r: dQ(r) ** 2 * r ** (N - 1), sol.t[0], r_end, points=pts, **kw)[0]
    pot = quad(lambda r: r ** (-b) * Q(r) ** (p + 1) * r ** (N - 1), sol.t[0], r_end,
               points=pts, **kw)[0]
    return area * m, area * k, area * pot


def free_gaussian(x2_sum_axes, t, sigma, dim):
    """``e^{it Laplacian}`` of ``exp(-|x|^2/(2 sigma^2))`` in closed form."""
    z = sigma ** 2 + 2j * t
    return (sigma ** 2 / z) ** (dim / 2) * np.exp(-x2_sum_axes / (2 * z))
