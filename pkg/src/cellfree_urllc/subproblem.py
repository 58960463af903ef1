"""Convex max-min subproblems around an expansion point, as cone programs.

Variables are ``x = [z, y]``: ``z`` holds the real and imaginary parts of the
normalized precoder ``W / sqrt(p_max)`` (user-major, ``[Re w_i; Im w_i]``)
and ``y`` the epigraph variable ``tau`` followed by per-user auxiliaries.
All user-``k`` constraints see the precoder only through the normalized
inner products ``xi_ki = h_k^H w_i / sqrt(beta_k)``, which keeps the data
well scaled regardless of path loss and makes the Newton matrix cheap to
assemble (:func:`structured_kkt`).

Per user ``k`` (``'`` marks quantities divided by ``beta_k``):

* ``tau <= a_bar - r - p - a*d + 4 a al' e Lam' - 2 a al'^2 e sig' - a e m``  (orthant row)
* ``r * D' >= 1`` with ``D'`` the normalized trust-region form    (rotated cone, dim 3)
* ``p >= b1 |xi_kk|^2 + b2 sum_{i!=k} |xi_ki|^2``                   (rotated cone)
* ``s >= sum_{i!=k} |xi_ki|^2 + sig'``, ``m >= s^2``                 (cones, ``a > 0`` only)
* ``||xi_k||^2 <= 2 - sig'`` and ``||xi_k||^2 + sig' <= (2/al') Lam'``  (``a > 0`` only)

plus one cone ``||w_l|| <= 1`` per AP. With ``a = 0`` the penalty terms and
their trust-region constraints vanish and the program is the Shannon-rate
(initialization) problem.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import surrogates as sg
from .rates import gram, per_ap_power
from .socp import ConeSpec, Scaling, _cholesky_solver, _Soc, solve_conic

_START_SHRINK = 1.0 - 1e-6


@dataclass
class ConeProgram:
    """Cone program ``min c^T x  s.t.  G x + s = h, s in cones`` plus the
    structure needed to map solutions back to precoders."""

    c: np.ndarray
    G: np.ndarray
    h: np.ndarray
    cones: ConeSpec
    # structure
    A: np.ndarray  # (K, 2, 2LN) maps z_i -> (Re, Im) xi_ki
    P: np.ndarray  # (m, 2K) row coefficients on the owning user's xi
    Q: np.ndarray  # (m, q) row coefficients on y
    user_rows: list
    power_cones: np.ndarray  # SOC indices of the per-AP cones
    ap_index: np.ndarray  # (L, 2NK) z indices of each AP, in cone order
    # context
    state: sg.SurrogateState
    H: np.ndarray
    p_max: float
    N: int
    with_g: bool
    kind: str

    @property
    def K(self) -> int:
        return self.A.shape[0]

    @property
    def L(self) -> int:
        return self.ap_index.shape[0]

    @property
    def n_z(self) -> int:
        return 2 * self.H.shape[0] * self.K

    @property
    def n_y(self) -> int:
        return self.Q.shape[1]

    def to_z(self, W: np.ndarray) -> np.ndarray:
        Wn = W / np.sqrt(self.p_max)
        return np.concatenate([np.concatenate([Wn[:, i].real, Wn[:, i].imag]) for i in range(self.K)])

    def precoder(self, x: np.ndarray) -> np.ndarray:
        LN = self.H.shape[0]
        z = x[: self.n_z].reshape(self.K, 2, LN)
        return (z[:, 0, :] + 1j * z[:, 1, :]).T * np.sqrt(self.p_max)

    def objective_at(self, W: np.ndarray) -> np.ndarray:
        """Per-user surrogate values at ``W`` (``f^(n)`` or ``R^(n)``)."""
        G = gram(self.H, W)
        if self.with_g:
            return sg.r_lower_from_gram(self.state, G)
        return sg.f_lower_from_gram(self.state, G)

    def feasible(self, W: np.ndarray, rtol: float = 1e-10) -> bool:
        G = gram(self.H, W)
        ok = bool(sg.in_trust_region(self.state, G, with_g=self.with_g)[()])
        return ok and bool(np.all(per_ap_power(W, self.L) <= self.p_max * (1 + rtol)))

    def start_point(self, W: np.ndarray) -> np.ndarray:
        """Primal point with ``z`` from ``W`` and strictly feasible auxiliaries."""
        z = self.to_z(W) * _START_SHRINK
        y = np.zeros(self.n_y)
        x = np.concatenate([z, y])
        # each auxiliary appears with coefficient -1 (or -const) in its cones;
        # raise it until every row constraint is slack
        s = self.h - self.G @ x
        K = self.K
        st = self.state
        xi = self._xi(z)
        sig = st.sigma2 / st.beta
        alp = st.alpha / st.beta
        u = st.signal / st.beta
        Dp = 2.0 * np.real(np.conj(np.diag(st.inner) / np.sqrt(st.beta)) * np.diag(xi)) / u - 1.0
        absq = np.abs(xi) ** 2
        own = np.diag(absq)
        others = absq.sum(axis=1) - own
        b1, b2 = self._quad_weights()
        r = 1.0 / np.maximum(Dp, 1e-12)
        p = b1 * own + b2 * others
        y[1 : 1 + K] = r * 1.01 + 1e-3
        y[1 + K : 1 + 2 * K] = p * 1.01 + 1e-3
        if self.with_g:
            sv = others + sig
            y[1 + 2 * K : 1 + 3 * K] = sv * 1.01 + 1e-3
            y[1 + 3 * K : 1 + 4 * K] = y[1 + 2 * K : 1 + 3 * K] ** 2 * 1.01 + 1e-3
        x = np.concatenate([z, y])
        slack = (self.h - self.G @ x)[:K]
        x[self.n_z] = float(slack.min()) - 1e-3 * (1.0 + abs(float(slack.min())))
        return x

    def _xi(self, z):
        K = self.K
        zz = z.reshape(K, -1)
        # xi[k, i] = A_k z_i
        re_im = np.einsum("kap,ip->kia", self.A, zz)
        return re_im[..., 0] + 1j * re_im[..., 1]

    def _quad_weights(self):
        st = self.state
        alp = st.alpha / st.beta
        u = st.signal / st.beta
        extra = 2.0 * st.a * alp**2 * st.e if self.with_g else 0.0
        return alp / u + extra, u / alp + extra

    def dump(self, path: str | Path) -> None:
        """Write the program in a plain text format.

        Layout: a header line ``n m n_lin n_soc``, a line of SOC dimensions,
        then sections ``c``, ``h`` (one value per line) and ``G`` as
        ``row col value`` triplets of the nonzero entries (0-based).
        """
        m, n = self.G.shape
        rows, cols = np.nonzero(self.G)
        with open(path, "w") as fh:
            fh.write(f"# cone program ({self.kind}): minimize c'x s.t. Gx + s = h, s in K\n")
            fh.write(f"{n} {m} {self.cones.n_lin} {len(self.cones.soc_dims)}\n")
            fh.write(" ".join(str(d) for d in self.cones.soc_dims) + "\n")
            fh.write("c\n")
            fh.writelines(f"{v:.17g}\n" for v in self.c)
            fh.write("h\n")
            fh.writelines(f"{v:.17g}\n" for v in self.h)
            fh.write(f"G {len(rows)}\n")
            fh.writelines(f"{r} {c} {self.G[r, c]:.17g}\n" for r, c in zip(rows, cols))


def load_dump(path: str | Path):
    """Read a file written by :meth:`ConeProgram.dump` -> ``(c, G, h, cones)``."""
    lines = Path(path).read_text().splitlines()
    pos = 1
    n, m, n_lin, n_soc = map(int, lines[pos].split())
    dims = tuple(int(d) for d in lines[pos + 1].split()) if n_soc else ()
    pos += 3
    c = np.array([float(v) for v in lines[pos : pos + n]])
    pos += n + 1
    h = np.array([float(v) for v in lines[pos : pos + m]])
    pos += m
    nnz = int(lines[pos].split()[1])
    G = np.zeros((m, n))
    for line in lines[pos + 1 : pos + 1 + nnz]:
        r, cc, v = line.split()
        G[int(r), int(cc)] = float(v)
    return c, G, h, ConeSpec(n_lin, dims)


def _ap_index(L: int, N: int, K: int) -> np.ndarray:
    LN = L * N
    idx = np.empty((L, 2 * N * K), dtype=int)
    for l in range(L):
        parts = []
        for i in range(K):
            base = i * 2 * LN
            parts.append(base + l * N + np.arange(N))
            parts.append(base + LN + l * N + np.arange(N))
        idx[l] = np.concatenate(parts)
    return idx


def _build(state: sg.SurrogateState, H: np.ndarray, N: int, p_max: float, with_g: bool, kind: str):
    LN, K = H.shape
    if LN % N:
        raise ValueError("channel rows are not a multiple of N")
    L = LN // N
    a = state.a if with_g else 0.0
    beta, alpha, e, d = state.beta, state.alpha, state.e, state.d
    rho = np.sqrt(beta)
    sig = state.sigma2 / beta
    alp = alpha / beta
    u = state.signal / beta
    xib = state.inner / rho[:, None]  # expansion-point xi

    # A_k: z_i = [Re w; Im w] -> (Re, Im) of h_k^H w * sqrt(p)/rho_k
    hr, hi = H.real.T, H.imag.T  # (K, LN)
    scale = (np.sqrt(p_max) / rho)[:, None]
    A = np.empty((K, 2, 2 * LN))
    A[:, 0, :LN] = hr * scale
    A[:, 0, LN:] = hi * scale
    A[:, 1, :LN] = -hi * scale
    A[:, 1, LN:] = hr * scale

    n_y = 1 + (4 * K if with_g else 2 * K)
    it, ir, ip, is_, im = 0, 1, 1 + K, 1 + 2 * K, 1 + 3 * K
    extra = 2.0 * a * alp**2 * e if with_g else np.zeros(K)
    b1 = alp / u + extra
    b2 = u / alp + extra

    soc_dims: list[int] = []
    P_rows, Q_rows, h_rows, owners = [], [], [], []

    def add(p_row, q_row, h_val, owner):
        P_rows.append(p_row)
        Q_rows.append(q_row)
        h_rows.append(h_val)
        owners.append(owner)

    def zero_p():
        return np.zeros(2 * K)

    def zero_q():
        return np.zeros(n_y)

    # orthant: epigraph rows
    for k in range(K):
        p_row = zero_p()
        q_row = zero_q()
        q_row[it] = 1.0
        q_row[ir + k] = 1.0
        q_row[ip + k] = 1.0
        rhs = state.a_bar[k]
        if with_g:
            coef = 4.0 * a * alp[k] * e[k]
            others = [i for i in range(K) if i != k]
            for i in others:
                p_row[2 * i] = -coef * 2.0 * xib[k, i].real
                p_row[2 * i + 1] = -coef * 2.0 * xib[k, i].imag
            q_row[im + k] = a * e[k]
            interf_n = sum(abs(xib[k, i]) ** 2 for i in others)
            rhs = rhs - a * d[k] - 2.0 * a * alp[k] ** 2 * e[k] * sig[k] + coef * (sig[k] - interf_n)
        add(p_row, q_row, rhs, k)

    for k in range(K):
        others = [i for i in range(K) if i != k]
        # r * D' >= 1, D' = dvec . xi_kk - 1
        dvec = np.zeros(2 * K)
        dvec[2 * k] = 2.0 * xib[k, k].real / u[k]
        dvec[2 * k + 1] = 2.0 * xib[k, k].imag / u[k]
        q = zero_q()
        q[ir + k] = -1.0
        add(-dvec, q, -1.0, k)
        add(zero_p(), zero_q(), 2.0, k)
        q = zero_q()
        q[ir + k] = -1.0
        add(dvec, q, 1.0, k)
        soc_dims.append(3)
        # p >= b1 |xi_kk|^2 + b2 sum |xi_ki|^2
        q = zero_q()
        q[ip + k] = -1.0
        add(zero_p(), q, 1.0, k)
        add(zero_p(), q.copy(), -1.0, k)
        for i in range(K):
            w = np.sqrt(b1[k] if i == k else b2[k])
            for c in range(2):
                p_row = zero_p()
                p_row[2 * i + c] = -2.0 * w
                add(p_row, zero_q(), 0.0, k)
        soc_dims.append(2 + 2 * K)
        if not with_g:
            continue
        # s >= sum_{i!=k} |xi_ki|^2 + sig'
        q = zero_q()
        q[is_ + k] = -1.0
        add(zero_p(), q, 1.0 - sig[k], k)
        add(zero_p(), q.copy(), -1.0 - sig[k], k)
        for i in others:
            for c in range(2):
                p_row = zero_p()
                p_row[2 * i + c] = -2.0
                add(p_row, zero_q(), 0.0, k)
        soc_dims.append(2 + 2 * len(others))
        # m >= s^2
        q = zero_q()
        q[im + k] = -1.0
        add(zero_p(), q, 1.0, k)
        add(zero_p(), q.copy(), -1.0, k)
        q = zero_q()
        q[is_ + k] = -2.0
        add(zero_p(), q, 0.0, k)
        soc_dims.append(3)
        # received-power cap: ||xi_k|| <= sqrt(2 - sig')
        add(zero_p(), zero_q(), np.sqrt(2.0 - sig[k]), k)
        for i in range(K):
            for c in range(2):
                p_row = zero_p()
                p_row[2 * i + c] = -1.0
                add(p_row, zero_q(), 0.0, k)
        soc_dims.append(1 + 2 * K)
        # ||xi_k||^2 <= qv := (2/al') Lam' - sig'
        lvec = np.zeros(2 * K)
        for i in others:
            lvec[2 * i] = 2.0 / alp[k] * 2.0 * xib[k, i].real
            lvec[2 * i + 1] = 2.0 / alp[k] * 2.0 * xib[k, i].imag
        q0 = 2.0 / alp[k] * (sig[k] - sum(abs(xib[k, i]) ** 2 for i in others)) - sig[k]
        add(-lvec, zero_q(), q0 + 1.0, k)
        add(-lvec, zero_q(), q0 - 1.0, k)
        for i in range(K):
            for c in range(2):
                p_row = zero_p()
                p_row[2 * i + c] = -2.0
                add(p_row, zero_q(), 0.0, k)
        soc_dims.append(2 + 2 * K)

    m_user = len(h_rows)
    P = np.array(P_rows)
    Q = np.array(Q_rows)
    owner = np.array(owners)
    n_user_soc = len(soc_dims)

    # per-AP power cones
    ap_index = _ap_index(L, N, K)
    dpow = 1 + 2 * N * K
    m = m_user + L * dpow
    n_z = 2 * LN * K
    G = np.zeros((m, n_z + n_y))
    h = np.zeros(m)
    h[:m_user] = h_rows
    G[:m_user, n_z:] = Q
    # user rows: G[row, z_i] = P[row, 2i:2i+2] @ A_owner
    for k in range(K):
        rows = np.flatnonzero(owner == k)
        Pk = P[rows].reshape(len(rows), K, 2)
        blk = np.einsum("rib,bp->rip", Pk, A[k])
        G[rows, :n_z] = blk.reshape(len(rows), n_z)
    for l in range(L):
        r0 = m_user + l * dpow
        h[r0] = 1.0
        G[r0 + 1 + np.arange(2 * N * K), ap_index[l]] = -1.0
        soc_dims.append(dpow)

    P_full = np.zeros((m, 2 * K))
    P_full[:m_user] = P
    Q_full = np.zeros((m, n_y))
    Q_full[:m_user] = Q
    c = np.zeros(n_z + n_y)
    c[n_z + it] = -1.0
    cones = ConeSpec(K, tuple(soc_dims))
    user_rows = [np.flatnonzero(owner == k) for k in range(K)]
    return ConeProgram(
        c=c, G=G, h=h, cones=cones, A=A, P=P_full, Q=Q_full, user_rows=user_rows,
        power_cones=np.arange(n_user_soc, n_user_soc + L), ap_index=ap_index,
        state=state, H=H, p_max=p_max, N=N, with_g=with_g, kind=kind,
    )


def build_subproblem(state: sg.SurrogateState, H: np.ndarray, config) -> ConeProgram:
    """Main path-following step: max min_k R_k^(n) under power and trust region.

    When the penalty weight ``a`` is zero the received-power and
    linearization constraints only certify a bound with zero weight and are
    omitted, so the program coincides with :func:`build_init_subproblem`.
    """
    with_g = state.a != 0.0
    return _build(state, H, config.N, config.p_max, with_g, "main" if with_g else "init")


def build_init_subproblem(state: sg.SurrogateState, H: np.ndarray, config) -> ConeProgram:
    """Initialization step: max min_k f_k^(n) under power and trust region."""
    return _build(state, H, config.N, config.p_max, False, "init")


def structured_kkt(program: ConeProgram):
    """KKT factory exploiting ``G = [P T + Q; power selections]``."""
    K = program.K
    n_z, n_y = program.n_z, program.n_y
    A = program.A
    twoLN = A.shape[2]
    A2 = A.reshape(2 * K, twoLN)  # rows (k, a)
    P, Q = program.P, program.Q
    rows = program.user_rows
    flat_pos = None

    def factory(soc: _Soc):
        nonlocal flat_pos
        if flat_pos is None:
            idx = program.ap_index
            flat_pos = (idx[:, :, None] * (n_z + n_y) + idx[:, None, :]).reshape(-1)

        def factor(W: Scaling):
            Ps = W.apply_inv(P)
            Qs = W.apply_inv(Q)
            C = np.empty((K, 2 * K, 2 * K))
            E = np.empty((K, 2 * K, n_y))
            for k in range(K):
                pk = Ps[rows[k]]
                C[k] = pk.T @ pk
                E[k] = pk.T @ Qs[rows[k]]
            Hm = np.empty((n_z + n_y, n_z + n_y))
            # z-z block from the user cones
            Cb = C.reshape(K, K, 2, K, 2)  # [k, i, a, I, b]
            Y = np.einsum("kiaIb,kbq->kaiIq", Cb, A)  # [k, a, i, I, q]
            Z = A2.T @ Y.reshape(2 * K, K * K * twoLN)  # [p, (i, I, q)]
            Z = Z.reshape(twoLN, K, K, twoLN).transpose(1, 0, 2, 3).reshape(n_z, n_z)
            Hm[:n_z, :n_z] = Z
            Ey = E.reshape(K, K, 2, n_y).transpose(0, 2, 1, 3).reshape(2 * K, K * n_y)
            Zy = (A2.T @ Ey).reshape(twoLN, K, n_y).transpose(1, 0, 2).reshape(n_z, n_y)
            Hm[:n_z, n_z:] = Zy
            Hm[n_z:, :n_z] = Zy.T
            Hm[n_z:, n_z:] = Qs.T @ Qs
            blocks = W.soc_inv_square_blocks(program.power_cones)[:, 1:, 1:]
            Hm.flat[flat_pos] += blocks.reshape(-1)
            return _cholesky_solver(Hm)

        return factor

    return factory


@dataclass
class SolveResult:
    W_next: np.ndarray
    objective: float  # min_k of the surrogate at W_next
    status: str  # "optimal" | "max-iter" | "infeasible"
    kkt_residual: float
    iterations: int = 0
    upper_bound: float = np.inf  # dual bound on the program optimum
    program_value: float = np.nan  # epigraph variable at the IPM solution
    backtracks: int = 0
    wall_time: float = 0.0


def solve(
    program: ConeProgram,
    warm_start: np.ndarray,
    tol: float = 1e-6,
    max_iter: int = 100,
    dense: bool = False,
) -> SolveResult:
    """Solve ``program`` and return a feasible precoder that does not decrease
    the surrogate objective relative to ``warm_start``.

    The interior-point solution is checked against the exact trust-region
    and power constraints; tolerance-level violations are repaired by
    rescaling over-budget APs and then halving the step toward
    ``warm_start``. If the result would not improve on ``warm_start``, the
    warm start is returned. A numerical breakdown of the interior-point
    method falls back to its last iterate (status ``max-iter``) or, if that
    is of no use, to ``warm_start`` (status ``infeasible``).
    """
    t0 = time.perf_counter()
    base = float(np.min(program.objective_at(warm_start)))
    x0 = program.start_point(warm_start)
    kkt = None if dense else structured_kkt(program)
    res = solve_conic(program.c, program.G, program.h, program.cones, x0=x0, kkt=kkt, tol=tol, max_iter=max_iter)
    if not np.all(np.isfinite(res.x)):
        return SolveResult(warm_start, base, "infeasible", np.inf, res.iterations,
                           wall_time=time.perf_counter() - t0)
    W = program.precoder(res.x)
    powers = per_ap_power(W, program.L)
    over = powers > program.p_max
    if np.any(over):
        N = program.N
        fix = np.ones(program.L)
        fix[over] = np.sqrt(program.p_max / powers[over])
        W = W * np.repeat(fix, N)[:, None]
    backtracks = 0
    cand = W
    while not program.feasible(cand) and backtracks < 60:
        backtracks += 1
        cand = warm_start + 0.5**backtracks * (W - warm_start)
    value = float(np.min(program.objective_at(cand)))
    # a breakdown still leaves the last interior iterate, usable if it helps
    status = "optimal" if res.status == "optimal" else "max-iter"
    if not program.feasible(cand) or not value >= base:
        cand, value = warm_start, base
        if res.status == "failed":
            status = "infeasible"
    return SolveResult(
        W_next=cand, objective=value, status=status, kkt_residual=res.kkt_residual,
        iterations=res.iterations, upper_bound=-res.dual_objective,
        program_value=-res.primal_objective, backtracks=backtracks,
        wall_time=time.perf_counter() - t0,
    )
