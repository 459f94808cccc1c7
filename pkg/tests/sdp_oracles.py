"""Independent reference solutions for small Hermitian SDPs."""

from __future__ import annotations

import warnings

import numpy as np
from scipy.optimize import minimize

from mswpt.sdp import Constraint, Sense, SdpProblem

PAULI = (
    np.array([[0, 1], [1, 0]], dtype=complex),
    np.array([[0, -1j], [1j, 0]], dtype=complex),
    np.array([[1, 0], [0, -1]], dtype=complex),
)


def _crandn(rng, *shape):
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2)


def _herm(rng, n):
    a = _crandn(rng, n, n)
    return (a + a.conj().T) / 2


def random_instance(rng, n_blocks=None, max_dim=5, n_cons=None):
    """Random bounded, strictly feasible block SDP with mixed senses.

    Right-hand sides come from a random full-rank point ``X0`` moved by a
    positive margin, and each block carries a trace bound.
    """
    n_blocks = n_blocks or int(rng.integers(1, 3))
    dims = [int(d) for d in rng.integers(2, max_dim + 1, size=n_blocks)]
    x0 = []
    for d in dims:
        g = _crandn(rng, d, d)
        x0.append(g @ g.conj().T / d + 0.1 * np.eye(d))
    cons = []
    for b, d in enumerate(dims):
        cons.append(Constraint({b: np.eye(d)}, Sense.LE, np.trace(x0[b]).real + 1.0))
    n_cons = n_cons if n_cons is not None else int(rng.integers(1, 4))
    for _ in range(n_cons):
        coeffs = {b: _herm(rng, d) for b, d in enumerate(dims) if rng.random() < 0.8 or len(dims) == 1}
        if not coeffs:
            coeffs = {0: _herm(rng, dims[0])}
        val = sum(np.real(np.vdot(a, x0[b])) for b, a in coeffs.items())
        sense = Sense(rng.choice(["<=", "=", ">="]))
        margin = float(rng.uniform(0.1, 1.0))
        rhs = val + margin if sense is Sense.LE else val - margin if sense is Sense.GE else val
        cons.append(Constraint(coeffs, sense, rhs))
    obj = {b: _herm(rng, d) for b, d in enumerate(dims)}
    return SdpProblem(dims, obj, cons, offset=float(rng.standard_normal()))


def cvxpy_solve(p: SdpProblem) -> float:
    """Optimal value from cvxpy with Clarabel at tightened tolerances."""
    import cvxpy as cp

    xs = [cp.Variable((d, d), hermitian=True) for d in p.dims]
    cons = [x >> 0 for x in xs]

    def lin(coeffs):
        return sum(cp.real(cp.trace(a @ xs[b])) for b, a in coeffs.items())

    for c in p.constraints:
        f = lin(c.coeffs)
        cons.append(f <= c.rhs if c.sense is Sense.LE else f >= c.rhs if c.sense is Sense.GE else f == c.rhs)
    prob = cp.Problem(cp.Minimize(lin(p.objective) + p.offset), cons)
    with warnings.catch_warnings():
        # "optimal_inaccurate" at these tolerances is still far tighter than the comparison
        warnings.simplefilter("ignore", UserWarning)
        prob.solve(solver=cp.CLARABEL, tol_gap_abs=1e-10, tol_gap_rel=1e-10, tol_feas=1e-10, max_iter=500)
    if prob.status not in ("optimal", "optimal_inaccurate"):
        raise RuntimeError(f"oracle solve failed: {prob.status}")
    return float(prob.value)


def bloch_coefficients(a: np.ndarray):
    """``(t_coef, vec)`` with ``Tr{A X} = t_coef * t + vec @ (x, y, z)``.

    ``X = t I + x sx + y sy + z sz`` is the Pauli expansion of a 2x2
    Hermitian matrix; ``X >= 0`` iff ``|(x, y, z)| <= t``.
    """
    a = np.asarray(a, dtype=complex)
    t_coef = float(np.real(a[0, 0] + a[1, 1]))
    vec = np.array([2 * a[0, 1].real, -2 * a[0, 1].imag, float(np.real(a[0, 0] - a[1, 1]))])
    return t_coef, vec


def bloch_matrix(t, v):
    return t * np.eye(2) + sum(vi * s for vi, s in zip(v, PAULI))


def two_by_two_closed_form(c, a, b):
    """Minimize ``Tr{C X}`` over ``Tr X = 1``, ``Tr{A X} <= b``, ``X >= 0``.

    The feasible set is a ball of radius 1/2 cut by a half-space, so the
    optimum is either the unconstrained ball minimizer or the minimizer
    over the disk where the plane meets the ball.
    """
    t = 0.5
    ct, cv = bloch_coefficients(c)
    at, av = bloch_coefficients(a)
    beta = b - at * t
    if np.linalg.norm(cv) == 0:
        return ct * t, bloch_matrix(t, np.zeros(3))
    v = -t * cv / np.linalg.norm(cv)
    if av @ v <= beta:
        return ct * t + cv @ v, bloch_matrix(t, v)
    an = av @ av
    v0 = beta * av / an
    rho2 = t * t - v0 @ v0
    if rho2 < 0:
        raise ValueError("infeasible instance")
    perp = cv - (cv @ av) / an * av
    pn = np.linalg.norm(perp)
    v = v0 if pn == 0 else v0 - np.sqrt(rho2) * perp / pn
    return ct * t + cv @ v, bloch_matrix(t, v)


def two_by_two_grid(c, a, b, n_theta=721, n_phi=1441):
    """Brute-force scan of the same problem over the closed Bloch ball.

    The optimum of a linear objective sits on the boundary of the feasible
    set, i.e. on the sphere or on the cutting plane, so both are scanned.
    """
    t = 0.5
    ct, cv = bloch_coefficients(c)
    at, av = bloch_coefficients(a)
    beta = b - at * t
    th = np.linspace(0, np.pi, n_theta)[:, None]
    ph = np.linspace(0, 2 * np.pi, n_phi)[None, :]
    pts = t * np.stack([np.sin(th) * np.cos(ph), np.sin(th) * np.sin(ph), np.cos(th) * np.ones_like(ph)], -1)
    pts = pts.reshape(-1, 3)
    an = av @ av
    v0 = beta * av / an
    rho2 = t * t - v0 @ v0
    if rho2 >= 0:
        e1 = np.linalg.svd(av[None, :])[2][1]
        e2 = np.cross(av / np.sqrt(an), e1)
        ang = np.linspace(0, 2 * np.pi, n_phi)
        rad = np.sqrt(rho2) * np.linspace(0, 1, 201)[:, None]
        disk = v0 + (rad[..., None] * (np.cos(ang)[None, :, None] * e1 + np.sin(ang)[None, :, None] * e2)).reshape(-1, 3)
        pts = np.vstack([pts, disk])
    feas = pts @ av <= beta + 1e-12
    return float(ct * t + np.min(pts[feas] @ cv))


def burer_monteiro(p: SdpProblem, rng, restarts=20):
    """Best local optimum of the single-block problem over ``X = V V^H``.

    Each start runs SLSQP on the real and imaginary parts of a full-size
    factor ``V``; with a square factor every PSD matrix is reachable.
    """
    (n,) = p.dims
    c = p.objective.get(0, np.zeros((n, n)))

    def unpack(z):
        v = (z[: n * n] + 1j * z[n * n :]).reshape(n, n)
        return v @ v.conj().T

    def lin(a):
        return lambda z: float(np.real(np.vdot(a, unpack(z))))

    cons = []
    for con in p.constraints:
        f = lin(con.coeffs[0])
        if con.sense is Sense.EQ:
            cons.append({"type": "eq", "fun": lambda z, f=f, r=con.rhs: f(z) - r})
        elif con.sense is Sense.LE:
            cons.append({"type": "ineq", "fun": lambda z, f=f, r=con.rhs: r - f(z)})
        else:
            cons.append({"type": "ineq", "fun": lambda z, f=f, r=con.rhs: f(z) - r})
    best = np.inf
    obj = lin(c)
    for _ in range(restarts):
        z0 = rng.standard_normal(2 * n * n) / np.sqrt(n)
        res = minimize(obj, z0, method="SLSQP", constraints=cons, options={"ftol": 1e-14, "maxiter": 1000})
        x = unpack(res.x)
        if np.max(p.violations([x])) <= 1e-8:
            best = min(best, res.fun + p.offset)
    return best


def two_by_two_parametric(c, a, b, n_angles=3600):
    """Parametric search of the same problem without the closed-form projection.

    A linear objective attains its minimum over the ball-halfspace
    intersection either at the unconstrained sphere minimizer or on the
    circle where the plane cuts the sphere. The circle is scanned by angle
    and the best sample refined with a bounded scalar search.
    """
    from scipy.optimize import minimize_scalar

    t = 0.5
    ct, cv = bloch_coefficients(c)
    at, av = bloch_coefficients(a)
    beta = b - at * t
    cands = []
    if np.linalg.norm(cv) > 0:
        v = -t * cv / np.linalg.norm(cv)
        if av @ v <= beta:
            cands.append(cv @ v)
    an = av @ av
    v0 = beta * av / an
    rho2 = t * t - v0 @ v0
    if rho2 >= 0:
        basis = np.linalg.svd(av[None, :])[2][1:]
        rho = np.sqrt(rho2)

        def f(phi):
            return cv @ (v0 + rho * (np.cos(phi) * basis[0] + np.sin(phi) * basis[1]))

        phis = np.linspace(0, 2 * np.pi, n_angles, endpoint=False)
        vals = np.array([f(p) for p in phis])
        i = int(np.argmin(vals))
        step = 2 * np.pi / n_angles
        res = minimize_scalar(f, bounds=(phis[i] - step, phis[i] + step), method="bounded", options={"xatol": 1e-13})
        cands.append(min(res.fun, vals[i]))
    if not cands:
        raise ValueError("infeasible instance")
    return float(ct * t + min(cands))
