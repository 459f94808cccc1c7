"""Small dense complex semidefinite programming.

The solver handles programs of the form

    minimize    sum_b Tr{C_b X_b}
    subject to  sum_b Tr{A_ib X_b}  (<=, =, >=)  b_i,   X_b >= 0,

with complex Hermitian blocks. Inequalities receive nonnegative scalar
slacks, which together form a linear cone next to the PSD blocks.

The method is an infeasible primal-dual path-following scheme with the
HKM search direction and a Mehrotra predictor-corrector step. Problem
data are equilibrated before solving (rows by their norms, the objective
by its norm and the variables by the right-hand side magnitude) and
results are mapped back to the original scaling.

Rank reduction follows the classical null-space argument: with
``X_b = V_b V_b^H`` any Hermitian ``Delta_b`` satisfying
``sum_b Tr{V_b^H A_ib V_b Delta_b} = 0`` for all constraints leaves every
constraint function unchanged along ``V_b (I + alpha Delta_b) V_b^H``, and
choosing ``alpha`` on the PSD boundary lowers the rank.
"""

from __future__ import annotations

import enum
import io
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .linalg import herm_eig, hermitian

__all__ = [
    "Sense",
    "Constraint",
    "SdpProblem",
    "SdpStatus",
    "SdpSolution",
    "solve_sdp",
    "RankReduction",
    "rank_reduce",
    "rank1_preserving_vector",
    "randomize_gaussian_rank1",
    "dump_problem",
    "load_problem",
]


class Sense(enum.Enum):
    LE = "<="
    EQ = "="
    GE = ">="


@dataclass
class Constraint:
    """Linear constraint ``sum_b Tr{coeffs[b] X_b} (sense) rhs``.

    Attributes
    ----------
    coeffs : dict
        Block index to Hermitian coefficient matrix; absent blocks are zero.
    """

    coeffs: dict
    sense: Sense
    rhs: float

    def __post_init__(self):
        self.sense = Sense(self.sense)
        self.coeffs = {int(b): hermitian(a) for b, a in self.coeffs.items()}
        self.rhs = float(self.rhs)


@dataclass
class SdpProblem:
    """Block PSD program with traced linear constraints.

    Attributes
    ----------
    dims : list of int
        Sizes of the PSD blocks.
    objective : dict
        Block index to Hermitian objective coefficient.
    constraints : list of Constraint
    offset : float
        Constant added to the reported objective.
    """

    dims: list
    objective: dict
    constraints: list
    offset: float = 0.0

    def __post_init__(self):
        self.dims = [int(d) for d in self.dims]
        if not self.dims or min(self.dims) < 1:
            raise ValueError("need at least one block of positive size")
        self.objective = {int(b): hermitian(c) for b, c in self.objective.items()}
        for b, c in self.objective.items():
            self._check_block(b, c)
        for con in self.constraints:
            for b, a in con.coeffs.items():
                self._check_block(b, a)

    def _check_block(self, b, a):
        if not 0 <= b < len(self.dims):
            raise ValueError(f"block index {b} out of range")
        if a.shape != (self.dims[b], self.dims[b]):
            raise ValueError(f"block {b} coefficient has shape {a.shape}, expected {self.dims[b]}")

    @property
    def m(self) -> int:
        return len(self.constraints)

    def objective_value(self, xs) -> float:
        val = self.offset
        for b, c in self.objective.items():
            val += float(np.real(np.vdot(c, xs[b])))
        return val

    def constraint_values(self, xs) -> np.ndarray:
        """Constraint functions ``sum_b Tr{A_ib X_b}`` at the given blocks."""
        out = np.zeros(self.m)
        for i, con in enumerate(self.constraints):
            out[i] = sum(float(np.real(np.vdot(a, xs[b]))) for b, a in con.coeffs.items())
        return out

    def violations(self, xs) -> np.ndarray:
        """Signed violation per constraint (positive means violated)."""
        vals = self.constraint_values(xs)
        rhs = np.array([c.rhs for c in self.constraints])
        sense = [c.sense for c in self.constraints]
        v = vals - rhs
        return np.array(
            [abs(d) if s is Sense.EQ else (d if s is Sense.LE else -d) for d, s in zip(v, sense)]
        )


class SdpStatus(enum.Enum):
    OPTIMAL = "optimal"
    MAX_ITER = "max_iter"
    INFEASIBLE = "infeasible"


@dataclass
class SdpSolution:
    """Primal-dual result of :func:`solve_sdp`.

    Attributes
    ----------
    x : list of numpy.ndarray
        Primal PSD blocks.
    y : numpy.ndarray
        Multipliers, one per constraint (Lagrangian ``C - sum y_i A_i = Z``).
    z : list of numpy.ndarray
        Dual slack blocks.
    slack : numpy.ndarray
        Scalar slacks of the inequality constraints, in constraint order.
    primal_objective, dual_objective : float
        Include the problem offset.
    gap : float
        Relative duality gap ``|p - d| / (1 + |p| + |d|)``.
    primal_residual, dual_residual : float
        Relative infeasibilities of the equilibrated problem.
    """

    x: list
    y: np.ndarray
    z: list
    slack: np.ndarray
    primal_objective: float
    dual_objective: float
    gap: float
    primal_residual: float
    dual_residual: float
    status: SdpStatus
    iterations: int
    message: str = ""


def _sym(a):
    return 0.5 * (a + np.conj(np.swapaxes(a, -1, -2)))


def _max_step(x, dx):
    """Largest ``alpha`` with ``x + alpha dx`` PSD (``inf`` if unbounded)."""
    lower = np.linalg.cholesky(x)
    li = sla.solve_triangular(lower, np.eye(x.shape[0]), lower=True)
    w = np.linalg.eigvalsh(_sym(li @ dx @ li.conj().T))
    return np.inf if w[0] >= 0 else -1.0 / w[0]


def _max_step_lp(x, dx):
    neg = dx < 0
    return np.inf if not np.any(neg) else float(np.min(-x[neg] / dx[neg]))


class _Standard:
    """Equilibrated standard-form data used inside the interior point."""

    def __init__(self, p: SdpProblem):
        m = p.m
        self.dims = p.dims
        self.a = [np.zeros((m, d, d), dtype=complex) for d in p.dims]
        ineq = [i for i, c in enumerate(p.constraints) if c.sense is not Sense.EQ]
        self.ineq = ineq
        self.al = np.zeros((m, len(ineq)))
        for j, i in enumerate(ineq):
            self.al[i, j] = 1.0 if p.constraints[i].sense is Sense.LE else -1.0
        for i, con in enumerate(p.constraints):
            for b, a in con.coeffs.items():
                self.a[b][i] = a
        self.b = np.array([c.rhs for c in p.constraints], dtype=float)
        self.c = [p.objective.get(b, np.zeros((d, d), dtype=complex)) for b, d in enumerate(p.dims)]

        rows = np.sqrt(
            sum(np.sum(np.abs(a) ** 2, axis=(1, 2)) for a in self.a) + np.sum(self.al**2, axis=1)
        )
        rows[rows == 0] = 1.0
        self.row_scale = rows
        for a in self.a:
            a /= rows[:, None, None]
        self.al /= rows[:, None]
        self.b = self.b / rows
        cn = np.sqrt(sum(np.sum(np.abs(c) ** 2) for c in self.c))
        self.obj_scale = cn if cn > 0 else 1.0
        self.c = [c / self.obj_scale for c in self.c]
        bmax = np.max(np.abs(self.b)) if m else 0.0
        self.var_scale = bmax if bmax > 0 else 1.0
        self.b = self.b / self.var_scale
        self.nu = sum(self.dims) + self.al.shape[1]

    def op(self, xs, xl):
        out = self.al @ xl
        for a, x in zip(self.a, xs):
            out = out + np.real(np.einsum("iac,ca->i", a, x))
        return out

    def adj(self, y):
        return [np.einsum("i,iab->ab", y, a) for a in self.a], self.al.T @ y


def solve_sdp(
    p: SdpProblem,
    tol: float = 1e-7,
    feastol: float = 1e-9,
    max_iter: int = 100,
    callback=None,
) -> SdpSolution:
    """Solve a block PSD program by a primal-dual interior-point method.

    Parameters
    ----------
    p : SdpProblem
    tol : float
        Target relative duality gap.
    feastol : float
        Target relative primal and dual infeasibility.
    max_iter : int
    callback : callable, optional
        Called once per iteration with a dict holding ``iteration``,
        ``primal``, ``dual`` (objectives including the offset), ``mu``,
        ``primal_infeasibility`` and ``dual_infeasibility``.

    Returns
    -------
    SdpSolution
        ``status`` is OPTIMAL when both targets are met, INFEASIBLE when a
        Farkas certificate ``b^T y > 0, sum y_i A_i <= 0`` is found and
        MAX_ITER otherwise (including numerical breakdown).
    """
    s = _Standard(p)
    nb = len(s.dims)
    bnorm = 1.0 + np.linalg.norm(s.b)
    cnorm = 1.0 + np.sqrt(sum(np.sum(np.abs(c) ** 2) for c in s.c))
    anorm = max(
        [np.sqrt(np.sum(np.abs(a) ** 2, axis=(1, 2))).max() if s.b.size else 0.0 for a in s.a]
        + [1.0]
    )
    xi = max(10.0, np.sqrt(s.nu), s.nu * np.max(1.0 + np.abs(s.b), initial=1.0) / (1.0 + anorm))
    eta = max(10.0, np.sqrt(s.nu), anorm, cnorm)
    xs = [xi * np.eye(d, dtype=complex) for d in s.dims]
    zs = [eta * np.eye(d, dtype=complex) for d in s.dims]
    nl = s.al.shape[1]
    xl = np.full(nl, xi)
    zl = np.full(nl, eta)
    y = np.zeros(p.m)
    status = SdpStatus.MAX_ITER
    message = "iteration limit reached"
    it = 0
    relgap = pinf = dinf = np.inf
    rhs_orig = np.array([c.rhs for c in p.constraints])

    for it in range(1, max_iter + 1):
        aty, atyl = s.adj(y)
        rp = s.b - s.op(xs, xl)
        rd = [c - a - z for c, a, z in zip(s.c, aty, zs)]
        rdl = -atyl - zl
        # objectives in the caller's units so that the reported gap is the tested one
        pobj = p.objective_value([s.var_scale * x for x in xs])
        dobj = float(rhs_orig @ (s.obj_scale * y / s.row_scale)) + p.offset
        mu = (sum(float(np.real(np.vdot(z, x))) for x, z in zip(xs, zs)) + xl @ zl) / s.nu
        relgap = abs(pobj - dobj) / (1.0 + abs(pobj) + abs(dobj))
        pinf = np.linalg.norm(rp) / bnorm
        dinf = np.sqrt(sum(np.sum(np.abs(r) ** 2) for r in rd) + rdl @ rdl) / cnorm
        if callback is not None:
            callback(
                {
                    "iteration": it,
                    "primal": pobj,
                    "dual": dobj,
                    "mu": mu,
                    "primal_infeasibility": float(pinf),
                    "dual_infeasibility": float(dinf),
                }
            )
        if relgap <= tol and pinf <= feastol and dinf <= feastol:
            status, message = SdpStatus.OPTIMAL, "converged"
            break
        dobj_eq = float(s.b @ y)
        if dobj_eq > 0:
            yh = y / dobj_eq
            ray, rayl = s.adj(yh)
            lam = max(
                [np.linalg.eigvalsh(_sym(r))[-1] for r in ray] + ([rayl.max()] if nl else [])
            )
            if lam <= 1e-8:
                status, message = SdpStatus.INFEASIBLE, "Farkas certificate found"
                break
        try:
            zinv = [sla.cho_solve(sla.cho_factor(z, lower=True), np.eye(z.shape[0])) for z in zs]
            schur = s.al @ (s.al * (xl / zl)).T
            for a, x, zi in zip(s.a, xs, zinv):
                g = x @ a @ zi
                schur += np.real(np.einsum("jac,ica->ij", a, g))
            schur = 0.5 * (schur + schur.T)
            chol = sla.cho_factor(schur, lower=True)
        except (np.linalg.LinAlgError, ValueError) as exc:
            message = f"numerical breakdown: {exc}"
            break

        def direction(target, corr):
            rc = [target * zi - x for x, zi in zip(xs, zinv)]
            rcl = target / zl - xl
            if corr is not None:
                dxa, dza, dxla, dzla = corr
                rc = [r - dx @ dz @ zi for r, dx, dz, zi in zip(rc, dxa, dza, zinv)]
                rcl = rcl - dxla * dzla / zl
            xrz = [x @ r @ zi for x, r, zi in zip(xs, rd, zinv)]
            rhs = rp - s.op(rc, rcl) + s.op(xrz, xl * rdl / zl)
            dy = sla.cho_solve(chol, rhs)
            atdy, atdyl = s.adj(dy)
            dz = [r - a for r, a in zip(rd, atdy)]
            dzl = rdl - atdyl
            dx = [_sym(r - x @ d @ zi) for r, x, d, zi in zip(rc, xs, dz, zinv)]
            dxl = rcl - xl * dzl / zl
            return dx, dy, dz, dxl, dzl

        def steps(dx, dz, dxl, dzl):
            ap = min([_max_step(x, d) for x, d in zip(xs, dx)] + [_max_step_lp(xl, dxl)])
            ad = min([_max_step(z, d) for z, d in zip(zs, dz)] + [_max_step_lp(zl, dzl)])
            return ap, ad

        try:
            dx, dy, dz, dxl, dzl = direction(0.0, None)
            ap, ad = steps(dx, dz, dxl, dzl)
            ap, ad = min(1.0, ap), min(1.0, ad)
            mu_aff = (
                sum(
                    float(np.real(np.vdot(z + ad * d2, x + ap * d1)))
                    for x, z, d1, d2 in zip(xs, zs, dx, dz)
                )
                + (xl + ap * dxl) @ (zl + ad * dzl)
            ) / s.nu
            sigma = min(1.0, max(0.0, mu_aff / mu) ** 3)
            dx, dy, dz, dxl, dzl = direction(sigma * mu, (dx, dz, dxl, dzl))
            ap, ad = steps(dx, dz, dxl, dzl)
        except (np.linalg.LinAlgError, ValueError) as exc:
            message = f"numerical breakdown: {exc}"
            break
        gamma = 0.98
        ap, ad = min(1.0, gamma * ap), min(1.0, gamma * ad)
        xs = [_sym(x + ap * d) for x, d in zip(xs, dx)]
        xl = xl + ap * dxl
        y = y + ad * dy
        zs = [_sym(z + ad * d) for z, d in zip(zs, dz)]
        zl = zl + ad * dzl

    # undo the equilibration
    xo = [s.var_scale * x for x in xs]
    slack = s.var_scale * xl
    yo = s.obj_scale * y / s.row_scale
    zo = [s.obj_scale * z for z in zs]
    pval = p.objective_value(xo)
    dval = float(np.array([c.rhs for c in p.constraints]) @ yo) + p.offset
    gap = abs(pval - dval) / (1.0 + abs(pval) + abs(dval))
    return SdpSolution(
        x=xo,
        y=yo,
        z=zo,
        slack=slack,
        primal_objective=pval,
        dual_objective=dval,
        gap=gap,
        primal_residual=float(pinf),
        dual_residual=float(dinf),
        status=status,
        iterations=it,
        message=message,
    )


@dataclass
class RankReduction:
    """Outcome of :func:`rank_reduce`.

    Attributes
    ----------
    x : list of numpy.ndarray
        Reduced PSD blocks.
    factors : list of numpy.ndarray
        ``V_b`` with ``X_b = V_b V_b^H`` (``n_b x r_b``).
    ranks : list of int
    steps : int
        Number of null-space updates performed.
    status : str
        ``"ok"`` or a note explaining an early stop.
    """

    x: list
    factors: list
    ranks: list
    steps: int
    status: str = "ok"


def _factor(x: np.ndarray, rtol: float) -> np.ndarray:
    dec = herm_eig(x)
    w = dec.eigenvalues
    top = w[-1]
    if top <= 0:
        return np.zeros((x.shape[0], 0), dtype=complex)
    keep = w > rtol * top
    return dec.eigenvectors[:, keep] * np.sqrt(w[keep])


def _herm_basis_row(b: np.ndarray) -> np.ndarray:
    """Coefficients of ``Tr{B Delta}`` in the real parameterization of ``Delta``."""
    r = b.shape[0]
    iu = np.triu_indices(r, 1)
    return np.concatenate([np.real(np.diag(b)), 2.0 * np.real(b[iu]), 2.0 * np.imag(b[iu])])


def _herm_from_params(v: np.ndarray, r: int) -> np.ndarray:
    d = np.diag(v[:r]).astype(complex)
    iu = np.triu_indices(r, 1)
    k = len(iu[0])
    d[iu] = v[r : r + k] + 1j * v[r + k :]
    return d + np.triu(d, 1).conj().T


def rank_reduce(
    xs,
    p: SdpProblem,
    rank_rtol: float = 1e-12,
    keep_objective: bool = True,
    max_steps: int = 10_000,
) -> RankReduction:
    """Lower the ranks of a feasible solution without changing constraint values.

    Parameters
    ----------
    xs : list of numpy.ndarray or SdpSolution
        Feasible PSD blocks of ``p``.
    p : SdpProblem
        Problem with ``m`` constraints.
    rank_rtol : float
        Eigenvalues below ``rank_rtol`` times a block's largest eigenvalue
        are treated as zero.
    keep_objective : bool
        Also hold the objective value fixed whenever the null space allows.

    Returns
    -------
    RankReduction
        Blocks with ``sum_b rank(X_b)^2 <= m``.
    """
    if isinstance(xs, SdpSolution):
        xs = xs.x
    vs = [_factor(x, rank_rtol) for x in xs]
    m = p.m
    rows_c = [dict(c.coeffs) for c in p.constraints]
    obj = dict(p.objective)
    steps = 0
    status = "ok"
    while sum(v.shape[1] ** 2 for v in vs) > m:
        if steps >= max_steps:
            status = "step limit reached"
            break
        sizes = [v.shape[1] for v in vs]
        cols = sum(r * r for r in sizes)

        def block_rows(coeff_list):
            out = np.zeros((len(coeff_list), cols))
            for i, coeffs in enumerate(coeff_list):
                off = 0
                for b, v in enumerate(vs):
                    r = sizes[b]
                    if r and b in coeffs:
                        out[i, off : off + r * r] = _herm_basis_row(v.conj().T @ coeffs[b] @ v)
                    off += r * r
            norms = np.linalg.norm(out, axis=1)
            norms[norms == 0] = 1.0
            return out / norms[:, None]

        mat = block_rows(rows_c)
        if keep_objective and obj:
            with_obj = np.vstack([mat, block_rows([obj])])
            null = sla.null_space(with_obj, rcond=1e-10)
            if null.shape[1] == 0:
                null = sla.null_space(mat, rcond=1e-10)
        else:
            null = sla.null_space(mat, rcond=1e-10)
        if null.shape[1] == 0:
            status = "no null-space direction"
            break
        vec = null[:, -1]
        deltas, off = [], 0
        for r in sizes:
            deltas.append(_herm_from_params(vec[off : off + r * r], r) if r else None)
            off += r * r
        lam = 0.0
        for d in deltas:
            if d is not None:
                w = np.linalg.eigvalsh(d)
                cand = w[np.argmax(np.abs(w))]
                if abs(cand) > abs(lam):
                    lam = cand
        alpha = -1.0 / lam
        new_vs = []
        for v, d in zip(vs, deltas):
            if d is None:
                new_vs.append(v)
                continue
            r = v.shape[1]
            w, u = np.linalg.eigh(np.eye(r) + alpha * d)
            keep = w > 1e-12 * max(1.0, w.max())
            new_vs.append((v @ u[:, keep]) * np.sqrt(w[keep]))
        vs = new_vs
        steps += 1
    out = [v @ v.conj().T for v in vs]
    return RankReduction(x=out, factors=vs, ranks=[v.shape[1] for v in vs], steps=steps, status=status)


def rank1_preserving_vector(q: np.ndarray, rng: np.random.Generator | None = None) -> np.ndarray:
    """Unit-modulus vector ``v`` with ``v^H Q v = Tr{Q}``.

    Phases are fixed one entry at a time so that the accumulated
    off-diagonal contribution keeps a zero real part; when the
    accumulated cross term vanishes the phase is free and is drawn from
    ``rng``.
    """
    q = hermitian(q)
    r = q.shape[0]
    rng = rng if rng is not None else np.random.default_rng()
    v = np.ones(r, dtype=complex)
    scale = np.linalg.norm(q)
    for i in range(1, r):
        c = np.vdot(v[:i], q[:i, i])
        if abs(c) <= 1e-15 * (1.0 + scale):
            theta = rng.uniform(0.0, 2.0 * np.pi)
        else:
            theta = np.pi / 2.0 - np.angle(c)
        v[i] = np.exp(1j * theta)
    return v


def randomize_gaussian_rank1(
    x: np.ndarray, t: int, rng: np.random.Generator, rank_rtol: float = 1e-12
) -> np.ndarray:
    """Random rank-one candidates ``U Sigma^(1/2) v`` from a PSD matrix.

    Each ``v`` has independent uniformly distributed unit-modulus entries,
    so ``E{v v^H} = I`` and every candidate has squared norm ``Tr{X}``.

    Returns
    -------
    numpy.ndarray
        ``(t, n)`` array of candidate vectors.
    """
    if t < 1:
        raise ValueError("need at least one candidate")
    f = _factor(x, rank_rtol)
    theta = rng.uniform(0.0, 2.0 * np.pi, size=(t, f.shape[1]))
    # elementwise sum rather than a matrix product keeps every row bit-identical
    # whatever t is, so smaller candidate sets are exact prefixes of larger ones
    return np.sum(np.exp(1j * theta)[:, None, :] * f[None, :, :], axis=2)


def _write_matrix(buf, a):
    for row in a:
        buf.write(" ".join(f"{float(z.real)!r},{float(z.imag)!r}" for z in row) + "\n")


def dump_problem(p: SdpProblem) -> str:
    """Plain-text serialization of a problem."""
    buf = io.StringIO()
    buf.write("sdp 1\n")
    buf.write("blocks " + " ".join(str(d) for d in p.dims) + "\n")
    buf.write(f"offset {p.offset!r}\n")
    buf.write(f"objective {len(p.objective)}\n")
    for b, c in sorted(p.objective.items()):
        buf.write(f"block {b}\n")
        _write_matrix(buf, c)
    buf.write(f"constraints {p.m}\n")
    for con in p.constraints:
        buf.write(f"constraint {con.sense.value} {con.rhs!r} {len(con.coeffs)}\n")
        for b, a in sorted(con.coeffs.items()):
            buf.write(f"block {b}\n")
            _write_matrix(buf, a)
    return buf.getvalue()


def load_problem(text: str) -> SdpProblem:
    """Inverse of :func:`dump_problem`."""
    lines = iter(text.splitlines())

    def take(prefix):
        parts = next(lines).split()
        if parts[0] != prefix:
            raise ValueError(f"expected {prefix!r}, got {parts[0]!r}")
        return parts[1:]

    if take("sdp") != ["1"]:
        raise ValueError("unsupported dump version")
    dims = [int(d) for d in take("blocks")]
    offset = float(take("offset")[0])

    def read_blocks(count):
        out = {}
        for _ in range(count):
            b = int(take("block")[0])
            rows = []
            for _ in range(dims[b]):
                rows.append([complex(*map(float, z.split(","))) for z in next(lines).split()])
            out[b] = np.array(rows, dtype=complex)
        return out

    obj = read_blocks(int(take("objective")[0]))
    cons = []
    for _ in range(int(take("constraints")[0])):
        sense, rhs, count = take("constraint")
        cons.append(Constraint(read_blocks(int(count)), Sense(sense), float(rhs)))
    return SdpProblem(dims, obj, cons, offset)
