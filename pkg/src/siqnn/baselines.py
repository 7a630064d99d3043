"""Classical reference regressors on the distance-only feature space.

All three baselines see a single scalar feature (the scaled distance R) and
scaled targets:

  - a tanh MLP whose parameter count matches the full quantum model's budget,
    trained over a small learning-rate sweep;
  - Gaussian process regression with an RBF kernel, hyperparameters grid-
    searched by log marginal likelihood on the training data;
  - epsilon-insensitive SVR with an RBF kernel, solved in the dual by an
    SMO-style maximal-violating-pair loop, hyperparameters grid-searched by
    training MSE.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .model import MLP, mlp_backward, mlp_forward
from .training import AdamState, StopPolicy, adam_step

NN_LEARNING_RATES = tuple(np.geomspace(0.01, 0.1, 5))
GPR_LENGTHSCALES = (0.05, 0.1, 0.2, 0.5, 1.0, 2.0)
GPR_NOISES = (1e-8, 1e-6, 1e-4)
GPR_SIGNALS = (1.0,)
SVR_C = (1.0, 10.0, 100.0, 1000.0)
SVR_EPSILON = (1e-4, 1e-3, 1e-2)
SVR_GAMMA = (0.1, 0.5, 1.0, 2.0, 5.0)


# ---------------------------------------------------------------------------
# parameter-matched neural network


def nn_hidden_width(budget: int) -> int:
    """Largest width h with 3h + 1 parameters not exceeding the budget."""
    return max(1, (budget - 1) // 3)


@dataclass
class BaselineNN:
    mlp: MLP
    train_loss: float
    lr: float
    stop_reason: str

    def n_params(self) -> int:
        return self.mlp.n_params()

    def predict(self, r_scaled) -> np.ndarray:
        return np.asarray(mlp_forward(self.mlp, r_scaled))[..., 0]


def nn_fit(r_scaled: np.ndarray, y_scaled: np.ndarray, param_budget: int,
           policy: StopPolicy | None = None, seed: int = 0,
           learning_rates=NN_LEARNING_RATES, hidden: int | None = None) -> BaselineNN:
    """Best-of-sweep Adam fit; the input is strictly one-dimensional (R only)."""
    r_scaled = np.asarray(r_scaled, dtype=float)
    y_scaled = np.asarray(y_scaled, dtype=float)
    if r_scaled.ndim != 1:
        raise ValueError("the classical NN baseline consumes the scalar feature R only")
    policy = policy or StopPolicy(max_iters=1000)
    h = nn_hidden_width(param_budget) if hidden is None else hidden
    best: BaselineNN | None = None
    for lr in learning_rates:
        rng = np.random.default_rng(seed)
        lim = 1.0 / np.sqrt(h)
        mlp = MLP(
            w1=rng.uniform(-1, 1, h), b1=rng.uniform(-1, 1, h),
            w2=rng.uniform(-lim, lim, (1, h)), b2=rng.uniform(-lim, lim, 1),
        )
        params = mlp.pack()
        adam = AdamState(lr=float(lr))
        best_loss = np.inf
        best_params = params.copy()
        since = 0
        stop = "max_iters"
        for it in range(policy.max_iters):
            mlp.unpack(params)
            resid = mlp_forward(mlp, r_scaled)[:, 0] - y_scaled
            loss = float(np.mean(resid**2))
            if not np.isfinite(loss):
                raise RuntimeError(f"NN baseline diverged at lr={lr}")
            if loss < best_loss * (1 - policy.min_rel_improvement):
                since = 0
            else:
                since += 1
            if loss < best_loss:
                best_loss = loss
                best_params = params.copy()
            if loss <= policy.target_loss:
                stop = "target_reached"
                break
            if since >= policy.patience:
                stop = "patience_exhausted"
                break
            grads = mlp_backward(mlp, r_scaled, (2.0 / y_scaled.size) * resid[:, None])
            params = adam_step(adam, params, grads)
        mlp.unpack(best_params)
        candidate = BaselineNN(mlp=mlp, train_loss=best_loss, lr=float(lr), stop_reason=stop)
        if best is None or candidate.train_loss < best.train_loss:
            best = candidate
    return best


# ---------------------------------------------------------------------------
# Gaussian process regression


def _rbf(xa: np.ndarray, xb: np.ndarray, lengthscale: float, signal: float) -> np.ndarray:
    d = xa[:, None] - xb[None, :]
    return signal**2 * np.exp(-0.5 * (d / lengthscale) ** 2)


@dataclass
class GPRModel:
    x: np.ndarray
    alpha: np.ndarray
    chol: np.ndarray
    lengthscale: float
    signal: float
    noise: float
    nlml: float

    def predict(self, xq) -> np.ndarray:
        xq = np.atleast_1d(np.asarray(xq, dtype=float))
        return _rbf(xq, self.x, self.lengthscale, self.signal) @ self.alpha


def _gpr_single(x, y, lengthscale, signal, noise) -> GPRModel:
    k = _rbf(x, x, lengthscale, signal) + noise**2 * np.eye(x.size)
    jitter = 0.0
    for _ in range(8):
        try:
            chol = np.linalg.cholesky(k + jitter * np.eye(x.size))
            break
        except np.linalg.LinAlgError:
            jitter = 1e-12 if jitter == 0.0 else jitter * 100
    else:
        raise np.linalg.LinAlgError(
            f"kernel matrix not positive definite even with jitter {jitter:.1e}"
        )
    alpha = np.linalg.solve(chol.T, np.linalg.solve(chol, y))
    nlml = float(0.5 * y @ alpha + np.sum(np.log(np.diag(chol)))
                 + 0.5 * x.size * np.log(2 * np.pi))
    return GPRModel(x=x.copy(), alpha=alpha, chol=chol, lengthscale=lengthscale,
                    signal=signal, noise=noise, nlml=nlml)


def gpr_fit(r_scaled: np.ndarray, y_scaled: np.ndarray,
            lengthscales=GPR_LENGTHSCALES, noises=GPR_NOISES,
            signals=GPR_SIGNALS) -> GPRModel:
    """Grid search scored by log marginal likelihood on the training set.

    Ties resolve toward the least complex candidate (largest lengthscale,
    then largest noise).
    """
    x = np.asarray(r_scaled, dtype=float)
    y = np.asarray(y_scaled, dtype=float)
    best = None
    for ls in sorted(lengthscales, reverse=True):
        for noise in sorted(noises, reverse=True):
            for signal in signals:
                model = _gpr_single(x, y, ls, signal, noise)
                if best is None or model.nlml < best.nlml - 1e-12:
                    best = model
    return best


def gpr_predict(model: GPRModel, r_scaled) -> np.ndarray:
    return model.predict(r_scaled)


# ---------------------------------------------------------------------------
# epsilon-SVR via SMO on the dual


@dataclass
class SVRModel:
    x: np.ndarray
    beta: np.ndarray            # alpha - alpha*
    bias: float
    c: float
    epsilon: float
    gamma: float
    n_iters: int
    kkt_residual: float
    train_mse: float = field(default=np.nan)

    def predict(self, xq) -> np.ndarray:
        xq = np.atleast_1d(np.asarray(xq, dtype=float))
        k = np.exp(-self.gamma * (xq[:, None] - self.x[None, :]) ** 2)
        return k @ self.beta + self.bias

    def n_support(self, tol: float = 1e-8) -> int:
        return int(np.sum(np.abs(self.beta) > tol))


class SVRConvergenceError(RuntimeError):
    pass


def _svr_gap(k, y, lam, c, epsilon):
    """Exact KKT gap and bias window of the SVR dual at lam = [alpha; alpha*]."""
    n = y.size
    z = np.concatenate([np.ones(n), -np.ones(n)])
    p = np.concatenate([epsilon - y, epsilon + y])
    idx = np.arange(2 * n) % n
    grad = z * (k @ (lam[:n] - lam[n:]))[idx] + p
    zg = -z * grad
    up = np.where(z > 0, lam < c - 1e-12 * c, lam > 1e-12 * c)
    low = np.where(z > 0, lam > 1e-12 * c, lam < c - 1e-12 * c)
    hi = zg[up].max() if up.any() else -np.inf
    lo = zg[low].min() if low.any() else np.inf
    gap = max(0.0, hi - lo) if np.isfinite(hi) and np.isfinite(lo) else 0.0
    bias = 0.5 * (hi + lo) if np.isfinite(hi) and np.isfinite(lo) else 0.0
    return float(gap), float(bias)


def _svr_polish(k, y, lam, c, epsilon, tol, rounds: int = 400):
    """Primal active-set finish on the dual QP: exact equality-constrained
    solves on the free set with ratio-test steps, so z.lam = 0 is maintained
    to machine precision.

    The ill-conditioned corners of the hyperparameter grid stall the pairwise
    loop; the dual here is tiny (2 * n_train variables), so exact solves are
    cheap and remove the conditioning ceiling.
    """
    n = y.size
    z = np.concatenate([np.ones(n), -np.ones(n)])
    p = np.concatenate([epsilon - y, epsilon + y])
    idx = np.arange(2 * n) % n
    q_full = (z[:, None] * z[None, :]) * k[np.ix_(idx, idx)]
    lam = lam.copy()
    eps_b = 1e-10 * max(1.0, c)
    free = (lam > eps_b) & (lam < c - eps_b)

    for _ in range(rounds):
        f = np.flatnonzero(free)
        if f.size:
            bnd = np.flatnonzero(~free)
            rhs = -p[f] - q_full[np.ix_(f, bnd)] @ lam[bnd]
            system = np.vstack([
                np.hstack([q_full[np.ix_(f, f)], z[f, None]]),
                np.append(z[f], 0.0)[None, :],
            ])
            sol, *_ = np.linalg.lstsq(system, np.append(rhs, -z[bnd] @ lam[bnd]), rcond=None)
            target = lam.copy()
            target[f] = sol[:-1]
            d = target - lam
            # Ratio test: largest step in [0, 1] that stays inside the box.
            step = 1.0
            blocker = -1
            for i in f:
                if d[i] < -1e-15 and lam[i] + step * d[i] < 0.0:
                    s = lam[i] / -d[i]
                    if s < step:
                        step, blocker = s, i
                if d[i] > 1e-15 and lam[i] + step * d[i] > c:
                    s = (c - lam[i]) / d[i]
                    if s < step:
                        step, blocker = s, i
            lam = lam + step * d
            if blocker >= 0:
                lam[blocker] = 0.0 if d[blocker] < 0 else c
                free[blocker] = False
                continue
        gap, _ = _svr_gap(k, y, lam, c, epsilon)
        if gap <= tol:
            return lam
        # Free the worst KKT violator at a bound.
        grad = z * (k @ (lam[:n] - lam[n:]))[idx] + p
        zg = -z * grad
        up = np.where(z > 0, lam < c - eps_b, lam > eps_b)
        low = np.where(z > 0, lam > eps_b, lam < c - eps_b)
        i = int(np.flatnonzero(up)[np.argmax(zg[up])])
        j = int(np.flatnonzero(low)[np.argmin(zg[low])])
        changed = False
        for cand in (i, j):
            if not free[cand]:
                free[cand] = True
                changed = True
        if not changed:
            # Both extremes already free: the equality solve is as good as the
            # conditioning allows.
            return lam
    return lam


def _svr_smo(k: np.ndarray, y: np.ndarray, c: float, epsilon: float,
             tol: float, max_iter: int) -> tuple[np.ndarray, float, int, float]:
    """SMO on the 2n-variable SVR dual, plus an exact active-set finish.

    Variables lam = [alpha; alpha*] in [0, C]^2n with sign vector
    z = [+1; -1] and constraint z.lam = 0; Q = (z z^T) * Khat with
    Khat[i, j] = k[i % n, j % n]. Pair selection is second order (maximal
    dual decrease), as in LibSVM.
    """
    n = y.size
    z = np.concatenate([np.ones(n), -np.ones(n)])
    p = np.concatenate([epsilon - y, epsilon + y])
    lam = np.zeros(2 * n)
    grad = p.copy()
    idx = np.arange(2 * n) % n

    diag = k[idx, idx]
    it = 0
    for it in range(1, max_iter + 1):
        if it % 500 == 0:
            # Refresh the incrementally maintained gradient against float drift.
            grad = z * (k @ (lam[:n] - lam[n:]))[idx] + p
        zg = -z * grad
        up = np.where(z > 0, lam < c, lam > 0)
        low = np.where(z > 0, lam > 0, lam < c)
        if not up.any() or not low.any():
            break
        i = int(np.flatnonzero(up)[np.argmax(zg[up])])
        gap = zg[i] - zg[low].min()
        if gap <= tol:
            break
        # Second-order selection of j: maximal decrease of the dual objective.
        diffs = zg[i] - zg
        eta = np.maximum(diag[i] + diag - 2 * k[idx[i], idx], 1e-12)
        gain = np.where(low & (diffs > 0), diffs**2 / eta, -np.inf)
        gain[i] = -np.inf
        j = int(np.argmax(gain))
        t = diffs[j] / eta[j]
        # Box limits along the feasible direction (lam_i += z_i t, lam_j -= z_j t).
        t_max_i = (c - lam[i]) if z[i] > 0 else lam[i]
        t_max_j = lam[j] if z[j] > 0 else (c - lam[j])
        t = min(t, t_max_i, t_max_j)
        lam[i] += z[i] * t
        lam[j] -= z[j] * t
        grad += t * z * (k[idx, idx[i]] - k[idx, idx[j]])

    gap, bias = _svr_gap(k, y, lam, c, epsilon)
    if gap > tol:
        lam = _svr_polish(k, y, lam, c, epsilon, tol)
        gap, bias = _svr_gap(k, y, lam, c, epsilon)
    if gap > tol:
        raise SVRConvergenceError(
            f"dual gap {gap:.2e} above tol={tol} after {it} SMO iterations and polish"
        )
    return lam[:n] - lam[n:], bias, it, gap


def svr_fit_single(r_scaled: np.ndarray, y_scaled: np.ndarray, c: float, epsilon: float,
                   gamma: float, tol: float = 1e-6, max_iter: int = 20000) -> SVRModel:
    x = np.asarray(r_scaled, dtype=float)
    y = np.asarray(y_scaled, dtype=float)
    k = np.exp(-gamma * (x[:, None] - x[None, :]) ** 2)
    beta, bias, iters, residual = _svr_smo(k, y, c, epsilon, tol, max_iter)
    model = SVRModel(x=x.copy(), beta=beta, bias=bias, c=c, epsilon=epsilon, gamma=gamma,
                     n_iters=iters, kkt_residual=residual)
    model.train_mse = float(np.mean((model.predict(x) - y) ** 2))
    return model


def svr_fit(r_scaled: np.ndarray, y_scaled: np.ndarray, cs=SVR_C, epsilons=SVR_EPSILON,
            gammas=SVR_GAMMA, tol: float = 1e-6) -> SVRModel:
    """Grid search scored by training MSE; ties resolve toward smaller C,
    then smaller gamma (smoother), then larger epsilon."""
    best = None
    for c in sorted(cs):
        for gamma in sorted(gammas):
            for epsilon in sorted(epsilons, reverse=True):
                model = svr_fit_single(r_scaled, y_scaled, c, epsilon, gamma, tol=tol)
                if best is None or model.train_mse < best.train_mse - 1e-14:
                    best = model
    return best


def svr_predict(model: SVRModel, r_scaled) -> np.ndarray:
    return model.predict(r_scaled)
