"""Iteration-wise concave minorant of the URLLC rate.

At an expansion point ``W_n`` the rate ``R_k = f_k - a g_k`` (``f_k`` the
Shannon rate, ``g_k = sqrt(V_k)``) is bounded from below by

    R_k^(n)(W) = f_k^(n)(W) - a g_k^(n)(W)

where ``f_k^(n)`` is concave on the half-space ``2 Re{x_n^* x} > |x_n|^2``
(``x = h_k^H w_k``) and ``g_k^(n)`` is a convex majorant of ``g_k``. Both
bounds are tight at ``W_n``. The auxiliary constraints

    S_k(W) <= 2 beta_k                      (received-power cap)
    S_k(W) / beta_k <= (2 / alpha_k) Lam_k(W)

(``S_k`` total received power plus noise, ``Lam_k`` the linearized
interference-plus-noise) delimit the trust region used by the solver.

Inner products ``G[k, i] = h_k^H w_i`` are all any of these functions need,
so every evaluator has a ``*_from_gram`` form used by vectorized callers.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .rates import gram, penalty_factor


class SurrogateError(ValueError):
    pass


class SingularSurrogate(SurrogateError):
    """An expansion point gives some user an SINR below the floor."""

    def __init__(self, user: int, phi: float, floor: float):
        super().__init__(f"user {user} has SINR {phi:.3e} below floor {floor:.1e}")
        self.user = user
        self.phi = phi


class TrustRegionViolation(SurrogateError):
    pass


class ConstraintViolation(SurrogateError):
    def __init__(self, user: int, which: str, residual: float):
        super().__init__(f"constraint ({which}) violated for user {user}: residual {residual:.3e}")
        self.user = user
        self.which = which
        self.residual = residual


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, copy=True)
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class SurrogateState:
    """Per-user coefficients frozen at the expansion point ``W_n``."""

    inner: np.ndarray  # (K, K) complex, h_k^H w_i^(n)
    alpha: np.ndarray  # interference + noise
    beta: np.ndarray  # total received power + noise
    a_bar: np.ndarray
    b_bar: np.ndarray
    c_bar: np.ndarray
    d: np.ndarray
    e: np.ndarray
    phi: np.ndarray  # SINR at W_n
    sigma2: float
    a: float  # Q^-1(eps) / sqrt(tB)

    @property
    def K(self) -> int:
        return self.inner.shape[0]

    @property
    def signal(self) -> np.ndarray:
        """``|h_k^H w_k^(n)|^2``."""
        return np.abs(np.diag(self.inner)) ** 2


def freeze_state(
    H: np.ndarray,
    W_n: np.ndarray,
    sigma2: float,
    a: float,
    phi_floor: float = 1e-6,
) -> SurrogateState:
    """Compute the bound coefficients at ``W_n``.

    Raises :class:`SingularSurrogate` if any user's SINR is below ``phi_floor``.
    """
    G = gram(H, W_n)
    P = np.abs(G) ** 2
    signal = np.diag(P).copy()
    beta = P.sum(axis=1) + sigma2
    alpha = beta - signal
    phi = signal / alpha
    for k in np.flatnonzero(~(phi >= phi_floor)):
        raise SingularSurrogate(int(k), float(phi[k]), phi_floor)

    f_n = np.log1p(phi)
    a_bar = f_n + 2.0 - signal * sigma2 / (beta * alpha)
    # alpha (not a_bar) in the numerator is what makes f^(n)(W_n) = f(W_n)
    b_bar = alpha / (beta * signal)
    c_bar = signal / (beta * alpha)
    v_n = 1.0 - (alpha / beta) ** 2
    sv = np.sqrt(v_n)
    d = sv / 2.0 + 1.0 / (2.0 * sv)
    e = 1.0 / (2.0 * sv)
    return SurrogateState(
        inner=_frozen(G),
        alpha=_frozen(alpha),
        beta=_frozen(beta),
        a_bar=_frozen(a_bar),
        b_bar=_frozen(b_bar),
        c_bar=_frozen(c_bar),
        d=_frozen(d),
        e=_frozen(e),
        phi=_frozen(phi),
        sigma2=float(sigma2),
        a=float(a),
    )


def freeze_state_for(H, W_n, config, a=None) -> SurrogateState:
    """:func:`freeze_state` with ``sigma2``, ``a`` and the floor taken from a config."""
    if a is None:
        a = penalty_factor(config.t, config.B, config.epsilon)
    return freeze_state(H, W_n, config.sigma2, a, config.phi_floor)


# -- vectorized evaluators over Gram matrices G[..., k, i] -------------------


def _parts(state: SurrogateState, G: np.ndarray):
    P = np.abs(G) ** 2
    diag = np.diagonal(P, axis1=-2, axis2=-1)
    total = P.sum(axis=-1)
    interf = total - diag
    x = np.diagonal(G, axis1=-2, axis2=-1)
    return P, diag, total, interf, x


def trust_residual_from_gram(state: SurrogateState, G: np.ndarray) -> np.ndarray:
    xb = np.diag(state.inner)
    x = np.diagonal(G, axis1=-2, axis2=-1)
    return 2.0 * np.real(np.conj(xb) * x) - np.abs(xb) ** 2


def linearized_interference(state: SurrogateState, G: np.ndarray) -> np.ndarray:
    """``Lam_k = sum_{i!=k} (2 Re{conj(inner_ki) G_ki} - |inner_ki|^2) + sigma2``."""
    lin = 2.0 * np.real(np.conj(state.inner) * G) - np.abs(state.inner) ** 2
    lin_diag = np.diagonal(lin, axis1=-2, axis2=-1)
    return lin.sum(axis=-1) - lin_diag + state.sigma2


def constraint_residuals_from_gram(state: SurrogateState, G: np.ndarray):
    """Slacks of the received-power cap and the linearization constraint."""
    _, _, total, _, _ = _parts(state, G)
    S = total + state.sigma2
    r9 = 2.0 * state.beta - S
    r10 = 2.0 * linearized_interference(state, G) / state.alpha - S / state.beta
    return r9, r10


def f_lower_from_gram(state: SurrogateState, G: np.ndarray) -> np.ndarray:
    """Concave minorant of ``ln(1 + phi_k)``; NaN outside the trust region."""
    _, diag, _, interf, _ = _parts(state, G)
    D = trust_residual_from_gram(state, G)
    sig = state.signal
    with np.errstate(divide="ignore", invalid="ignore"):
        recip = np.where(D > 0, sig / np.where(D > 0, D, 1.0), np.nan)
    return state.a_bar - recip - state.b_bar * diag - state.c_bar * interf


def g_upper_from_gram(state: SurrogateState, G: np.ndarray) -> np.ndarray:
    """Convex majorant of ``sqrt(V_k)``."""
    _, _, total, interf, _ = _parts(state, G)
    al, be, e = state.alpha, state.beta, state.e
    S = total + state.sigma2
    A = interf + state.sigma2
    lam = linearized_interference(state, G)
    return state.d - 4.0 * al * e / be**2 * lam + 2.0 * al**2 * e / be**3 * S + e * A**2 / be**2


def r_lower_from_gram(state: SurrogateState, G: np.ndarray) -> np.ndarray:
    if state.a == 0.0:
        return f_lower_from_gram(state, G)
    return f_lower_from_gram(state, G) - state.a * g_upper_from_gram(state, G)


# -- per-user API with precondition checks ----------------------------------


def trust_region_residual(state: SurrogateState, H, W, k: int) -> float:
    return float(trust_residual_from_gram(state, gram(H, W))[k])


def g_constraint_residuals(state: SurrogateState, H, W, k: int) -> tuple[float, float]:
    r9, r10 = constraint_residuals_from_gram(state, gram(H, W))
    return float(r9[k]), float(r10[k])


def _check_trust(state, G, k):
    res = trust_residual_from_gram(state, G)[k]
    if not res > 0:
        raise TrustRegionViolation(f"trust region violated for user {k}: residual {res:.3e}")


def _check_g(state, G, k):
    r9, r10 = constraint_residuals_from_gram(state, G)
    if not r9[k] >= 0:
        raise ConstraintViolation(k, "received-power cap", float(r9[k]))
    if not r10[k] >= 0:
        raise ConstraintViolation(k, "linearization", float(r10[k]))


def f_lower(state: SurrogateState, H, W, k: int) -> float:
    G = gram(H, W)
    _check_trust(state, G, k)
    return float(f_lower_from_gram(state, G)[k])


def g_upper(state: SurrogateState, H, W, k: int) -> float:
    G = gram(H, W)
    _check_g(state, G, k)
    return float(g_upper_from_gram(state, G)[k])


def r_lower(state: SurrogateState, H, W, k: int) -> float:
    G = gram(H, W)
    _check_trust(state, G, k)
    if state.a != 0.0:
        _check_g(state, G, k)
    return float(r_lower_from_gram(state, G)[k])


def in_trust_region(state: SurrogateState, G: np.ndarray, with_g: bool = True) -> np.ndarray:
    """Boolean mask (per leading index) of Gram matrices inside the full trust region."""
    ok = np.all(trust_residual_from_gram(state, G) > 0, axis=-1)
    if with_g:
        r9, r10 = constraint_residuals_from_gram(state, G)
        ok &= np.all(r9 >= 0, axis=-1) & np.all(r10 >= 0, axis=-1)
    return ok
