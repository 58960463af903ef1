"""Primal-dual interior-point method for second-order cone programs.

Solves

    minimize    c^T x
    subject to  G x + s = h,   s in C

where ``C`` is a product of a nonnegative orthant (the first ``n_lin``
entries) and second-order cones ``{(u0, u1): ||u1|| <= u0}``. The dual is

    maximize    -h^T z
    subject to  G^T z + c = 0,  z in C.

Iterations use Nesterov-Todd scaling and Mehrotra's predictor-corrector. The
Newton systems reduce to ``(G^T W^-2 G) dx = r``; the factorization of that
matrix is delegated to a *KKT factory* so callers with structured ``G`` can
avoid forming it densely (see :func:`dense_kkt` for the generic version).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import linalg


@dataclass(frozen=True)
class ConeSpec:
    """Orthant size followed by the dimensions of the second-order cones."""

    n_lin: int
    soc_dims: tuple[int, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "soc_dims", tuple(int(d) for d in self.soc_dims))
        if self.n_lin < 0 or any(d < 1 for d in self.soc_dims):
            raise ValueError("invalid cone dimensions")

    @property
    def m(self) -> int:
        return self.n_lin + sum(self.soc_dims)

    @property
    def degree(self) -> int:
        return self.n_lin + len(self.soc_dims)


class _Soc:
    """Index bookkeeping for vectorized operations on all SOC blocks."""

    def __init__(self, spec: ConeSpec):
        dims = np.asarray(spec.soc_dims, dtype=int)
        self.n = len(dims)
        self.lin = spec.n_lin
        self.starts = np.concatenate([[0], np.cumsum(dims)[:-1]]).astype(int) if self.n else np.zeros(0, int)
        self.seg = np.repeat(np.arange(self.n), dims)
        self.J = -np.ones(int(dims.sum()))
        self.J[self.starts] = 1.0
        self.size = int(dims.sum())

    def sum(self, x: np.ndarray) -> np.ndarray:
        if not self.n:
            return np.zeros((0,) + x.shape[1:])
        return np.add.reduceat(x, self.starts, axis=0)

    def dot(self, u, v):
        return self.sum(u * v)

    def jdot(self, u, v):
        return self.sum(self.J * u * v)

    def expand(self, per_cone: np.ndarray) -> np.ndarray:
        return per_cone[self.seg]


class Scaling:
    """Nesterov-Todd scaling ``W`` with ``W z = W^-1 s = lam``."""

    def __init__(self, soc: _Soc, s: np.ndarray, z: np.ndarray, identity: bool = False):
        self.soc = soc
        nl = soc.lin
        if identity:
            self.d = np.ones(nl)
            self.eta = np.ones(soc.n)
            v = np.zeros(soc.size)
            v[soc.starts] = 1.0
            self.v = v
            self.lam = None
            return
        sl, zl = s[:nl], z[:nl]
        self.d = np.sqrt(sl / zl)
        ss, zs = s[nl:], z[nl:]
        s_n = np.sqrt(soc.jdot(ss, ss))
        z_n = np.sqrt(soc.jdot(zs, zs))
        sb = ss / soc.expand(s_n)
        zb = zs / soc.expand(z_n)
        gamma = np.sqrt((1.0 + soc.dot(sb, zb)) / 2.0)
        # NT point wb, then the hyperbolic reflection vector v with H_v e = wb
        wb = (sb + soc.J * zb) / soc.expand(2.0 * gamma)
        wb0 = wb[soc.starts]
        v = wb.copy()
        v[soc.starts] += 1.0
        self.v = v / soc.expand(np.sqrt(2.0 * (wb0 + 1.0)))
        self.eta = np.sqrt(s_n / z_n)
        self.lam = self.apply(z)

    def apply(self, x: np.ndarray) -> np.ndarray:
        """``W x`` for a vector or a matrix with ``m`` rows."""
        soc, nl = self.soc, self.soc.lin
        out = np.empty_like(x)
        d = self.d if x.ndim == 1 else self.d[:, None]
        out[:nl] = d * x[:nl]
        xs = x[nl:]
        v = self.v if x.ndim == 1 else self.v[:, None]
        J = soc.J if x.ndim == 1 else soc.J[:, None]
        eta = soc.expand(self.eta)
        if x.ndim > 1:
            eta = eta[:, None]
        out[nl:] = eta * (2.0 * v * soc.expand(soc.sum(v * xs)) - J * xs)
        return out

    def apply_inv(self, x: np.ndarray) -> np.ndarray:
        """``W^-1 x`` for a vector or a matrix with ``m`` rows."""
        soc, nl = self.soc, self.soc.lin
        out = np.empty_like(x)
        d = self.d if x.ndim == 1 else self.d[:, None]
        out[:nl] = x[:nl] / d
        xs = x[nl:]
        J = soc.J if x.ndim == 1 else soc.J[:, None]
        u = soc.J * self.v
        if x.ndim > 1:
            u = u[:, None]
        eta = soc.expand(self.eta)
        if x.ndim > 1:
            eta = eta[:, None]
        out[nl:] = (2.0 * u * soc.expand(soc.sum(u * xs)) - J * xs) / eta
        return out

    def soc_inv_square_blocks(self, cones: np.ndarray) -> np.ndarray:
        """Dense ``W^-2`` blocks for a set of equal-dimension SOCs, shape (c, d, d)."""
        soc = self.soc
        dim = int(np.diff(np.append(soc.starts, soc.size))[cones[0]])
        idx = soc.starts[cones][:, None] + np.arange(dim)[None, :]
        v = self.v[idx]
        u = soc.J[idx] * v
        uu = (u * u).sum(axis=1)
        eye = np.eye(dim)[None]
        out = (
            eye
            + 4.0 * uu[:, None, None] * u[:, :, None] * u[:, None, :]
            - 2.0 * (u[:, :, None] * v[:, None, :] + v[:, :, None] * u[:, None, :])
        )
        return out / (self.eta[cones] ** 2)[:, None, None]


def _identity(soc: _Soc) -> np.ndarray:
    e = np.ones(soc.lin + soc.size)
    e[soc.lin:] = 0.0
    e[soc.lin + soc.starts] = 1.0
    return e


def _jordan(soc: _Soc, u, v):
    nl = soc.lin
    out = np.empty_like(u)
    out[:nl] = u[:nl] * v[:nl]
    us, vs = u[nl:], v[nl:]
    out[nl:] = soc.expand(us[soc.starts]) * vs + soc.expand(vs[soc.starts]) * us
    out[nl + soc.starts] = soc.dot(us, vs)
    return out


def _jordan_solve(soc: _Soc, lam, b):
    """``x`` with ``lam o x = b``."""
    nl = soc.lin
    out = np.empty_like(b)
    out[:nl] = b[:nl] / lam[:nl]
    ls, bs = lam[nl:], b[nl:]
    l0 = ls[soc.starts]
    b0 = bs[soc.starts]
    x0 = (l0 * b0 - (soc.dot(ls, bs) - l0 * b0)) / soc.jdot(ls, ls)
    xs = (bs - soc.expand(x0) * ls) / soc.expand(l0)
    xs[soc.starts] = x0
    out[nl:] = xs
    return out


def min_eigenvalue(soc: _Soc, u: np.ndarray) -> np.ndarray:
    """Smallest Jordan eigenvalue of every cone block (orthant entries first)."""
    nl = soc.lin
    us = u[nl:]
    tail = np.sqrt(np.maximum(soc.sum(us * us) - us[soc.starts] ** 2, 0.0))
    return np.concatenate([u[:nl], us[soc.starts] - tail])


def max_step(soc: _Soc, u: np.ndarray, du: np.ndarray) -> float:
    """Largest ``t >= 0`` keeping ``u + t du`` in the cone (``inf`` if unbounded)."""
    nl = soc.lin
    t = np.inf
    neg = du[:nl] < 0
    if np.any(neg):
        t = min(t, float(np.min(-u[:nl][neg] / du[:nl][neg])))
    if soc.n:
        us, ds = u[nl:], du[nl:]
        A = soc.jdot(ds, ds)
        Bq = soc.jdot(us, ds)
        C = soc.jdot(us, us)
        roots = np.full(soc.n, np.inf)
        disc = Bq * Bq - A * C
        lin_case = np.abs(A) <= 1e-300
        with np.errstate(divide="ignore", invalid="ignore"):
            lr = np.where((Bq < 0) & lin_case, -C / (2.0 * Bq), np.inf)
            sq = np.sqrt(np.maximum(disc, 0.0))
            q = -(Bq + np.copysign(sq, Bq))
            r1 = np.where(q != 0, C / q, np.inf)
            r2 = np.where(A != 0, q / A, np.inf)
        r1 = np.where(r1 > 0, r1, np.inf)
        r2 = np.where(r2 > 0, r2, np.inf)
        quad = np.minimum(r1, r2)
        quad = np.where(disc < 0, np.inf, quad)
        roots = np.where(lin_case, lr, quad)
        # a head that turns negative also leaves the cone
        h0 = us[soc.starts]
        d0 = ds[soc.starts]
        with np.errstate(divide="ignore"):
            hr = np.where(d0 < 0, -h0 / d0, np.inf)
        t = min(t, float(np.min(np.minimum(roots, hr))))
    return t


REFINE_BELOW = 1e-3

KKTFactory = Callable[[Scaling], Callable[[np.ndarray], np.ndarray]]


def dense_kkt(G: np.ndarray, soc: _Soc) -> KKTFactory:
    """Generic factory: forms ``(W^-1 G)^T (W^-1 G)`` and Cholesky-factors it."""

    def factor(W: Scaling):
        Gs = W.apply_inv(G)
        Hm = Gs.T @ Gs
        return _cholesky_solver(Hm)

    return factor


def _cholesky_solver(Hm: np.ndarray):
    n = Hm.shape[0]
    reg = 0.0
    scale = max(np.abs(np.diag(Hm)).max(), 1.0) if n else 1.0
    for _ in range(6):
        try:
            cf = linalg.cho_factor(Hm + reg * np.eye(n), lower=True, check_finite=False)
            return lambda r: linalg.cho_solve(cf, r, check_finite=False)
        except linalg.LinAlgError:
            reg = scale * (1e-14 if reg == 0.0 else reg / scale * 100.0)
    lu = linalg.lu_factor(Hm + reg * np.eye(n), check_finite=False)
    return lambda r: linalg.lu_solve(lu, r, check_finite=False)


@dataclass
class ConicResult:
    x: np.ndarray
    s: np.ndarray
    z: np.ndarray
    status: str  # "optimal" | "max-iter" | "failed"
    iterations: int
    primal_residual: float
    dual_residual: float
    gap: float
    primal_objective: float
    dual_objective: float
    history: list = field(default_factory=list)

    @property
    def kkt_residual(self) -> float:
        rel_gap = self.gap / max(1.0, abs(self.primal_objective))
        return max(self.primal_residual, self.dual_residual, rel_gap)


def solve_conic(
    c: np.ndarray,
    G: np.ndarray,
    h: np.ndarray,
    cones: ConeSpec,
    x0: Optional[np.ndarray] = None,
    kkt: Optional[Callable[[_Soc], KKTFactory]] = None,
    tol: float = 1e-8,
    max_iter: int = 100,
    mu0: Optional[float] = None,
    refine: int = 2,
) -> ConicResult:
    """Solve the cone program; see the module docstring for the form.

    ``x0``: optional primal starting point (``s`` is shifted into the cone
    interior if needed). ``kkt``: optional ``soc -> factory`` hook replacing
    :func:`dense_kkt`. Residuals are relative to ``max(1, ||h||)`` and
    ``max(1, ||c||)``; the gap is relative to ``max(1, |c^T x|)``.
    """
    c = np.asarray(c, dtype=float)
    h = np.asarray(h, dtype=float)
    m, n = G.shape
    if m != cones.m or h.shape != (m,) or c.shape != (n,):
        raise ValueError("dimension mismatch between c, G, h and cones")
    soc = _Soc(cones)
    factory = kkt(soc) if kkt is not None else dense_kkt(G, soc)
    e = _identity(soc)
    nu = cones.degree
    hnorm = max(1.0, np.linalg.norm(h))
    cnorm = max(1.0, np.linalg.norm(c))

    if x0 is None:
        solve0 = factory(Scaling(soc, None, None, identity=True))
        x = solve0(G.T @ h)
    else:
        x = np.array(x0, dtype=float)
    s = h - G @ x
    s = _push_interior(soc, s, e, 1e-4)
    if mu0 is None:
        solve0 = factory(Scaling(soc, None, None, identity=True))
        z = -G @ solve0(c)
        z = _push_interior(soc, z, e, 1.0, relative=False)
    else:
        z = mu0 * _jordan_solve(soc, s, e)

    status = "max-iter"
    history = []
    it = 0
    best = None
    for it in range(max_iter + 1):
        rx = G.T @ z + c
        rz = G @ x + s - h
        gap = float(s @ z)
        pcost = float(c @ x)
        dcost = float(-h @ z + rz @ z)
        pres = np.linalg.norm(rz) / hnorm
        dres = np.linalg.norm(rx) / cnorm
        rel_gap = gap / max(1.0, abs(pcost))
        history.append((pcost, dcost, pres, dres, gap))
        score = max(pres, dres, rel_gap)
        if best is None or score < best[0]:
            best = (score, it, x, s, z, pres, dres, gap, pcost, dcost)
        if pres <= tol and dres <= tol and rel_gap <= tol:
            status = "optimal"
            break
        if it == max_iter:
            break
        try:
            with np.errstate(divide="raise", invalid="raise"):
                W = Scaling(soc, s, z)
            lam = W.lam
            solve = factory(W)
        except (FloatingPointError, ValueError, linalg.LinAlgError):
            status = "failed"
            break
        if not np.all(np.isfinite(lam)):
            status = "failed"
            break
        mu = gap / nu

        def newton_raw(r1, r2, r3):
            # G^T dz = r1 ; G dx + ds = r2 ; lam o (W^-1 ds + W dz) = r3
            tt = _jordan_solve(soc, lam, r3)
            rhs = r1 + G.T @ W.apply_inv(W.apply_inv(r2) - tt)
            dx = solve(rhs)
            dz = W.apply_inv(W.apply_inv(G @ dx - r2) + tt)
            ds = W.apply(tt - W.apply(dz))
            return dx, ds, dz

        # refinement only pays off once the residuals approach the tolerance
        n_ref = refine if max(pres, dres, rel_gap) < REFINE_BELOW else 0

        def newton(bs):
            dx, ds, dz = newton_raw(-rx, -rz, bs)
            for _ in range(n_ref):
                e1 = -rx - G.T @ dz
                e2 = -rz - G @ dx - ds
                e3 = bs - _jordan(soc, lam, W.apply_inv(ds) + W.apply(dz))
                cx, cs, cz = newton_raw(e1, e2, e3)
                dx, ds, dz = dx + cx, ds + cs, dz + cz
            return dx, ds, dz

        lam_sq = _jordan(soc, lam, lam)
        dx, ds, dz = newton(-lam_sq)
        a_aff = min(1.0, max_step(soc, s, ds), max_step(soc, z, dz))
        rho = float((s + a_aff * ds) @ (z + a_aff * dz)) / max(gap, 1e-300)
        sigma = min(1.0, max(0.0, rho)) ** 3
        corr = _jordan(soc, W.apply_inv(ds), W.apply(dz))
        dx, ds, dz = newton(-lam_sq - corr + sigma * mu * e)
        step = min(1.0, 0.99 * min(max_step(soc, s, ds), max_step(soc, z, dz)))
        if not np.isfinite(step) or step <= 0:
            status = "failed"
            break
        xn, sn, zn = x + step * dx, s + step * ds, z + step * dz
        if not (np.all(np.isfinite(xn)) and np.all(np.isfinite(zn))):
            status = "failed"
            break
        x, s, z = xn, sn, zn

    if status != "optimal":
        # past the attainable accuracy the iterates can degrade: keep the best
        _, _, x, s, z, pres, dres, gap, pcost, dcost = best
    return ConicResult(
        x=x, s=s, z=z, status=status, iterations=it,
        primal_residual=float(pres), dual_residual=float(dres), gap=float(gap),
        primal_objective=pcost, dual_objective=dcost, history=history,
    )


def _push_interior(soc: _Soc, u: np.ndarray, e: np.ndarray, margin: float, relative: bool = True):
    """Shift each cone block so its smallest eigenvalue is at least ``margin``.

    With ``relative=False`` the whole vector is shifted by a common amount,
    ``(1 + max(0, -min_eig)) e`` when it is not already interior.
    """
    lam_min = min_eigenvalue(soc, u)
    if not relative:
        lm = float(lam_min.min()) if lam_min.size else 1.0
        if lm <= 0:
            return u + (margin - lm) * e
        return u
    u = u.copy()
    nl = soc.lin
    low = lam_min < margin
    if np.any(low[:nl]):
        idx = np.flatnonzero(low[:nl])
        u[idx] += margin - lam_min[idx]
    cone_low = np.flatnonzero(low[nl:])
    if cone_low.size:
        u[nl + soc.starts[cone_low]] += margin - lam_min[nl + cone_low]
    return u
