"""Interactive fixed effects estimation on control units.

The model for a control panel Y (N x T) with covariates X (N x T x p) is

    Y_it = X_it' beta + lambda_i' f_t + alpha_i + xi_t + e_it

with r latent factors. Estimation alternates least squares for beta with
principal-component extraction of (F, Lambda) from the residual matrix
(Bai 2009), after a two-way within transformation removes the additive
effects. Factors are normalized so F'F/T = I_r and Lambda'Lambda is
diagonal. The factor count is selected by leave-one-out cross-validation
over treated pre-treatment periods.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from .dataio import PanelData
from .errors import ConfigError, ConvergenceError, DataError, NumericalError

_ZERO_COL_TOL = 1e-12


@dataclass(frozen=True)
class FactorModel:
    """Fitted coefficients, factors, loadings, and additive effects."""

    beta: np.ndarray     # (p,)
    F: np.ndarray        # (T, r), F'F/T = I_r
    Lambda: np.ndarray   # (N_est, r), Lambda'Lambda diagonal
    alpha: np.ndarray    # (N_est,) unit effects (grand mean folded in)
    xi: np.ndarray       # (T,) time effects, sum zero
    r: int
    sigma2: float
    info: dict = field(default_factory=dict)

    def fitted(self, X: np.ndarray) -> np.ndarray:
        """Systematic component X*beta + Lambda F' + alpha + xi for the
        estimation units."""
        out = _xbeta(X, self.beta)
        if self.r:
            out = out + self.Lambda @ self.F.T
        return out + self.alpha[:, None] + self.xi[None, :]


@dataclass(frozen=True)
class TreatedProjection:
    """Unit intercepts and factor loadings projected for treated units."""

    alpha: np.ndarray   # (N_treat,)
    Lambda: np.ndarray  # (N_treat, r)


@dataclass(frozen=True)
class CvRow:
    r: int
    sigma2: float
    ic: float
    pc: float
    mspe: float
    n_predictions: int


@dataclass(frozen=True)
class CvTable:
    rows: tuple[CvRow, ...]
    selected_r: int
    notices: tuple[str, ...] = ()

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            [
                {"r": q.r, "sigma2": q.sigma2, "IC": q.ic, "PC": q.pc, "MSPE": q.mspe,
                 "n_predictions": q.n_predictions, "selected": q.r == self.selected_r}
                for q in self.rows
            ]
        )


def select_r(mspe_by_r: dict[int, float]) -> int:
    """Argmin of MSPE; ties break toward the smaller factor count."""
    if not mspe_by_r:
        raise ConfigError("no feasible factor counts to select from")
    best_r, best = None, np.inf
    for r in sorted(mspe_by_r):
        if mspe_by_r[r] < best:
            best_r, best = r, mspe_by_r[r]
    return best_r


def _xbeta(X: np.ndarray, beta: np.ndarray) -> np.ndarray:
    if X.shape[2] == 0:
        return np.zeros(X.shape[:2])
    return np.tensordot(X, beta, axes=([2], [0]))


def _twoway_demean(A: np.ndarray) -> np.ndarray:
    return A - A.mean(axis=1, keepdims=True) - A.mean(axis=0, keepdims=True) + A.mean()


def _active_columns(Xd: np.ndarray, names) -> list[int]:
    scale = max(1.0, float(np.abs(Xd).max())) if Xd.size else 1.0
    return [k for k in range(Xd.shape[2]) if np.abs(Xd[:, :, k]).max() > _ZERO_COL_TOL * scale]


def _check_rank(Z: np.ndarray, names: list[str]) -> None:
    if Z.shape[1] == 0:
        return
    rank = np.linalg.matrix_rank(Z)
    if rank == Z.shape[1]:
        return
    dependent = []
    for k in range(Z.shape[1]):
        sub = np.delete(Z, k, axis=1)
        if np.linalg.matrix_rank(sub) == rank:
            dependent.append(names[k])
    raise DataError(f"covariates are collinear after two-way demeaning: {dependent}")


def _solve_beta(Z: np.ndarray, target: np.ndarray) -> np.ndarray:
    if Z.shape[1] == 0:
        return np.zeros(0)
    return np.linalg.lstsq(Z, target, rcond=None)[0]


def _leading_factors(R: np.ndarray, r: int) -> tuple[np.ndarray, np.ndarray]:
    """Rank-r decomposition R ~= Lambda F' with F'F/T = I, Lambda'Lambda diagonal."""
    n, t_len = R.shape
    if r == 0:
        return np.zeros((t_len, 0)), np.zeros((n, 0))
    if t_len < n:
        # eigen-decomposition of the T x T Gram matrix is cheaper here
        vals, vecs = np.linalg.eigh(R.T @ R)
        order = np.argsort(vals)[::-1][:r]
        v = vecs[:, order]
    else:
        _, _, vt = np.linalg.svd(R, full_matrices=False)
        v = vt[:r].T
    # deterministic column signs: largest-magnitude entry positive
    for j in range(v.shape[1]):
        i = np.argmax(np.abs(v[:, j]))
        if v[i, j] < 0:
            v[:, j] = -v[:, j]
    F = np.sqrt(t_len) * v
    Lam = R @ v / np.sqrt(t_len)
    return F, Lam


def _recover_effects(Y, X, beta, F, Lam):
    resid = Y - _xbeta(X, beta)
    if F.shape[1]:
        resid = resid - Lam @ F.T
    alpha = resid.mean(axis=1)
    xi = resid.mean(axis=0) - resid.mean()
    return alpha, xi


def _sigma2(ssr: float, n: int, t_len: int, p: int, r: int) -> float:
    df = n * t_len - p - r * (n + t_len) + r * r - (n + t_len - 1)
    return ssr / max(df, 1)


def fit_twoway(Y: np.ndarray, X: np.ndarray, covariate_names=None) -> FactorModel:
    """Two-way fixed effects least squares (the r = 0 model)."""
    Y = np.asarray(Y, float)
    X = np.asarray(X, float)
    if X.ndim == 2:
        X = X.reshape(*Y.shape, 0)
    n, t_len = Y.shape
    names = list(covariate_names) if covariate_names is not None else [f"x{k}" for k in range(X.shape[2])]

    Yd = _twoway_demean(Y)
    Xd = np.stack([_twoway_demean(X[:, :, k]) for k in range(X.shape[2])], axis=2) if X.shape[2] else X
    active = _active_columns(Xd, names)
    Z = Xd[:, :, active].reshape(n * t_len, len(active))
    _check_rank(Z, [names[k] for k in active])

    beta = np.zeros(X.shape[2])
    beta[active] = _solve_beta(Z, Yd.ravel())
    alpha, xi = _recover_effects(Y, X, beta, np.zeros((t_len, 0)), np.zeros((n, 0)))
    resid = Y - _xbeta(X, beta) - alpha[:, None] - xi[None, :]
    ssr = float(np.sum(resid**2))
    return FactorModel(
        beta=beta,
        F=np.zeros((t_len, 0)),
        Lambda=np.zeros((n, 0)),
        alpha=alpha,
        xi=xi,
        r=0,
        sigma2=_sigma2(ssr, n, t_len, len(active), 0),
        info={"ssr": ssr, "n_iter": 0, "converged": True,
              "covariate_names": names, "p_active": len(active)},
    )


def fit_ife(Y: np.ndarray, X: np.ndarray, r: int, init: FactorModel | None = None,
            tol: float = 1e-7, max_iter: int = 2000, covariate_names=None) -> FactorModel:
    """Iterative interactive-fixed-effects fit with r latent factors.

    Alternates beta-given-factors least squares with principal-component
    extraction of the factors from the residual, on two-way demeaned data.
    Convergence requires both the relative beta change and the sine of the
    largest principal angle between successive factor spaces to fall below
    `tol`. The residual sum of squares is non-increasing across iterations.
    """
    Y = np.asarray(Y, float)
    X = np.asarray(X, float)
    if X.ndim == 2:
        X = X.reshape(*Y.shape, 0)
    n, t_len = Y.shape
    if r < 0:
        raise ConfigError("r must be >= 0")
    if r > min(n, t_len) - 1:
        raise ConfigError(f"r={r} exceeds the feasible bound min(N, T) - 1 = {min(n, t_len) - 1}")
    if r == 0:
        return fit_twoway(Y, X, covariate_names)
    names = list(covariate_names) if covariate_names is not None else [f"x{k}" for k in range(X.shape[2])]

    Yd = _twoway_demean(Y)
    Xd = np.stack([_twoway_demean(X[:, :, k]) for k in range(X.shape[2])], axis=2) if X.shape[2] else X
    active = _active_columns(Xd, names)
    Z = Xd[:, :, active].reshape(n * t_len, len(active))
    _check_rank(Z, [names[k] for k in active])
    # cached solver: Z has full column rank, so the normal equations are safe
    if Z.shape[1]:
        gram_inv = np.linalg.inv(Z.T @ Z)

    def beta_step(target_flat):
        out = np.zeros(X.shape[2])
        if Z.shape[1]:
            out[active] = gram_inv @ (Z.T @ target_flat)
        return out

    if init is not None and init.r == r:
        beta = init.beta.copy()
        F = init.F.copy()
    else:
        beta = beta_step(Yd.ravel())
        F, _ = _leading_factors(Yd - _xbeta(Xd, beta), r)

    trace = []
    ssr = np.inf
    for it in range(max_iter):
        low_rank = (Yd - _xbeta(Xd, beta))  # residual carrying the factor structure
        F_new, Lam_new = _leading_factors(low_rank, r)
        beta_new = beta_step((Yd - Lam_new @ F_new.T).ravel())
        resid = Yd - _xbeta(Xd, beta_new) - Lam_new @ F_new.T
        ssr = float(np.sum(resid**2))

        beta_change = (
            float(np.linalg.norm(beta_new - beta) / max(np.linalg.norm(beta), 1e-12))
            if beta.size else 0.0
        )
        cos = np.linalg.svd((F / np.sqrt(t_len)).T @ (F_new / np.sqrt(t_len)), compute_uv=False)
        angle_sin = float(np.sqrt(max(0.0, 1.0 - np.min(cos) ** 2))) if cos.size else 0.0
        trace.append({"iter": it, "ssr": ssr, "beta_change": beta_change, "angle_sin": angle_sin})

        beta, F, Lam = beta_new, F_new, Lam_new
        if max(beta_change, angle_sin) < tol:
            break
    else:
        raise ConvergenceError(
            f"interactive fixed effects fit did not converge in {max_iter} iterations "
            f"(last beta change {trace[-1]['beta_change']:.3e}, "
            f"factor angle {trace[-1]['angle_sin']:.3e})",
            trace=trace,
        )

    alpha, xi = _recover_effects(Y, X, beta, F, Lam)
    return FactorModel(
        beta=beta,
        F=F,
        Lambda=Lam,
        alpha=alpha,
        xi=xi,
        r=r,
        sigma2=_sigma2(ssr, n, t_len, len(active), r),
        info={"ssr": ssr, "n_iter": len(trace), "converged": True,
              "covariate_names": names, "p_active": len(active), "trace": trace},
    )


def project_loadings(F_pre: np.ndarray, residuals: np.ndarray) -> np.ndarray:
    """Least-squares loadings of pre-treatment residuals on pre-treatment factors.

    `residuals` may be a single series (n_pre,) or a stack (n_units, n_pre);
    returns loadings of shape (r,) or (n_units, r) accordingly.
    """
    F_pre = np.asarray(F_pre, float)
    resid = np.asarray(residuals, float)
    n_pre, r = F_pre.shape
    if n_pre < r:
        raise ConfigError(f"need at least r={r} pre-treatment periods, got {n_pre}")
    if np.linalg.matrix_rank(F_pre) < r:
        raise NumericalError("pre-treatment factor matrix is singular; cannot project loadings")
    single = resid.ndim == 1
    rhs = resid[None, :] if single else resid
    lam = np.linalg.solve(F_pre.T @ F_pre, F_pre.T @ rhs.T).T
    return lam[0] if single else lam


def project_treated(model: FactorModel, Y_treated: np.ndarray, X_treated: np.ndarray,
                    pre_lengths: np.ndarray) -> TreatedProjection:
    """Project per-unit intercept and loadings for treated units from their
    pre-treatment periods, given a model fitted on controls.

    The intercept is estimated jointly with the loadings by augmenting the
    factor matrix with a constant column, since a treated unit's own fixed
    effect is not identified by the control fit.
    """
    Y_treated = np.atleast_2d(np.asarray(Y_treated, float))
    X_treated = np.asarray(X_treated, float)
    if X_treated.ndim == 2:
        X_treated = X_treated.reshape(*Y_treated.shape, 0)
    m = Y_treated.shape[0]
    alpha = np.empty(m)
    lam = np.empty((m, model.r))
    for i in range(m):
        L = int(pre_lengths[i])
        if L < model.r + 1:
            raise ConfigError(
                f"treated unit {i} has {L} pre-treatment periods; need at least r+1={model.r + 1}"
            )
        resid = Y_treated[i, :L] - _xbeta(X_treated[i : i + 1, :L], model.beta)[0] - model.xi[:L]
        G = np.column_stack([np.ones(L), model.F[:L]])
        coef = project_loadings(G, resid)
        alpha[i] = coef[0]
        lam[i] = coef[1:]
    return TreatedProjection(alpha=alpha, Lambda=lam)


def _cv_prediction_error(model: FactorModel, y_pre, x_pre, xi_pre) -> tuple[float, int]:
    """Leave-one-out squared prediction error over one unit's pre-period."""
    L = y_pre.shape[0]
    resid = y_pre - _xbeta(x_pre[None], model.beta)[0] - xi_pre
    G = np.column_stack([np.ones(L), model.F[:L]])
    total, count = 0.0, 0
    for s in range(L):
        keep = np.arange(L) != s
        Gk = G[keep]
        if np.linalg.matrix_rank(Gk) < Gk.shape[1]:
            continue
        coef = np.linalg.solve(Gk.T @ Gk, Gk.T @ resid[keep])
        pred = resid[s] - G[s] @ coef  # held-out residual net of projected structure
        total += float(pred**2)
        count += 1
    return total, count


def cross_validate(panel: PanelData, r_range=range(0, 6)) -> CvTable:
    """Select the factor count by leave-one-period-out prediction of treated
    pre-treatment outcomes; deterministic given the panel and range."""
    if panel.n_treated == 0:
        raise ConfigError("cross-validation needs at least one treated unit")
    r_values = sorted(set(int(r) for r in r_range))
    if not r_values or min(r_values) < 0:
        raise ConfigError(f"invalid factor range {r_values}")

    ctrl = panel.control_idx
    treat = panel.treated_idx
    Y_c, X_c = panel.Y[ctrl], panel.X[ctrl]
    t0 = panel.t0_array()
    min_pre = int(t0.min())
    bound = min(panel.n_control, panel.n_periods) - 1

    notices: list[str] = []
    rows: list[CvRow] = []
    mspe_by_r: dict[int, float] = {}
    v_by_r: dict[int, float] = {}
    for r in r_values:
        if r > bound:
            notices.append(f"r={r} skipped: exceeds feasibility bound {bound}")
            continue
        if min_pre < r + 2:
            notices.append(
                f"r={r} skipped: shortest treated pre-period ({min_pre}) below r+2"
            )
            continue
        model = fit_ife(Y_c, X_c, r, covariate_names=panel.covariate_names)
        total, count = 0.0, 0
        for j, i in enumerate(treat):
            L = int(t0[j])
            err, c = _cv_prediction_error(model, panel.Y[i, :L], panel.X[i, :L], model.xi[:L])
            total += err
            count += c
        if count == 0:
            notices.append(f"r={r} skipped: no valid held-out predictions")
            continue
        mspe = total / count
        mspe_by_r[r] = mspe
        v_by_r[r] = model.info["ssr"] / (panel.n_control * panel.n_periods)
        rows.append(CvRow(r=r, sigma2=model.sigma2, ic=np.nan, pc=np.nan,
                          mspe=mspe, n_predictions=count))

    if not rows:
        raise ConfigError(f"no feasible factor count in {r_values}; notices: {notices}")

    # Bai & Ng (2002) style criteria, reported for reference only
    n, t_len = panel.n_control, panel.n_periods
    pen_unit = ((n + t_len) / (n * t_len)) * np.log(n * t_len / (n + t_len))
    v_ref = v_by_r[max(v_by_r)]
    rows = [
        CvRow(
            r=q.r,
            sigma2=q.sigma2,
            ic=float(np.log(max(v_by_r[q.r], 1e-300)) + q.r * pen_unit),
            pc=float(v_by_r[q.r] + q.r * v_ref * pen_unit),
            mspe=q.mspe,
            n_predictions=q.n_predictions,
        )
        for q in rows
    ]
    return CvTable(rows=tuple(rows), selected_r=select_r(mspe_by_r), notices=tuple(notices))
