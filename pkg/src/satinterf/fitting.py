"""Bounded Levenberg-Marquardt minimizers for small curve fits."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class LMResult:
    x: np.ndarray
    cost: float
    hessian: np.ndarray  # Gauss-Newton / Fisher matrix at x
    n_iter: int
    converged: bool
    message: str


def _damped_newton(model, cost_only, x0, lower, upper, max_iter, ftol, gtol, lam0):
    x = np.array(x0, dtype=float)
    n = x.size
    lower = np.full(n, -np.inf) if lower is None else np.asarray(lower, dtype=float)
    upper = np.full(n, np.inf) if upper is None else np.asarray(upper, dtype=float)
    x = np.clip(x, lower, upper)

    cost, g, H = model(x)
    lam = None
    message = "maximum iterations reached"
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        pg = g.copy()
        pg[(x <= lower) & (g > 0)] = 0.0
        pg[(x >= upper) & (g < 0)] = 0.0
        if np.max(np.abs(pg)) < gtol:
            converged, message = True, "projected gradient below tolerance"
            break
        # variables pinned at a bound by the gradient stay fixed this step
        free = pg != 0.0
        Hf = H[np.ix_(free, free)]
        diag = np.diag(Hf).copy()
        diag[diag <= 0] = 1.0
        if lam is None:
            lam = lam0 * float(np.max(diag))
        accepted = False
        while lam < 1e16:
            try:
                step_f = np.linalg.solve(Hf + lam * np.diag(diag), -g[free])
            except np.linalg.LinAlgError:
                lam *= 4.0
                continue
            step = np.zeros(n)
            step[free] = step_f
            x_new = np.clip(x + step, lower, upper)
            cost_new = cost_only(x_new)
            if np.isfinite(cost_new) and cost_new <= cost:
                accepted = True
                break
            lam *= 4.0
        if not accepted:
            # no downhill step at any damping: we are at a (numerical) minimum
            converged = True
            message = "no further decrease possible"
            break
        decrease = cost - cost_new
        x = x_new
        cost, g, H = model(x)
        lam = max(lam / 3.0, 1e-12)
        if decrease <= ftol * max(abs(cost) + decrease, np.finfo(float).tiny):
            converged, message = True, "relative cost change below tolerance"
            break
    return LMResult(x=x, cost=cost, hessian=H, n_iter=it, converged=converged, message=message)


def levenberg_marquardt(residuals, jacobian, x0, lower=None, upper=None, *,
                        max_iter=200, ftol=1e-10, gtol=1e-8, lam0=1e-3):
    """Minimize ``0.5 * sum(residuals(x)**2)`` subject to ``lower <= x <= upper``.

    Damped Gauss-Newton with Marquardt diagonal scaling; steps are projected
    onto the box.  Stops when an accepted step lowers the cost by less than
    ``ftol`` relative, or the projected gradient's infinity norm is below
    ``gtol``.
    """

    def model(x):
        r = residuals(x)
        J = jacobian(x)
        return 0.5 * float(r @ r), J.T @ r, J.T @ J

    def cost_only(x):
        r = residuals(x)
        return 0.5 * float(r @ r)

    return _damped_newton(model, cost_only, x0, lower, upper, max_iter, ftol, gtol, lam0)


def poisson_fit(func, jacobian, y, x0, lower=None, upper=None, *,
                max_iter=200, ftol=1e-10, gtol=1e-8, lam0=1e-3):
    """Maximum-likelihood fit of Poisson counts ``y`` to ``func(x)``.

    Minimizes ``sum(mu - y * log(mu))`` (shifted to half the deviance) with the Fisher matrix
    ``J^T diag(1/mu) J`` in place of the Hessian (Fisher scoring with
    Levenberg-Marquardt damping).  The returned ``hessian`` is the Fisher
    matrix, whose inverse is the asymptotic covariance.
    """
    y = np.asarray(y, dtype=float)
    tiny = 1e-300
    # saturated-model offset turns the cost into half the Poisson deviance
    offset = float(np.sum(y - np.where(y > 0, y * np.log(np.where(y > 0, y, 1.0)), 0.0)))

    def cost_only(x):
        mu = func(x)
        if np.any(mu < 0):
            return np.inf
        mu = np.maximum(mu, tiny)
        return float(np.sum(mu - y * np.log(mu))) - offset

    def model(x):
        mu = np.maximum(func(x), tiny)
        J = jacobian(x)
        g = J.T @ (1.0 - y / mu)
        H = J.T @ (J / mu[:, None])
        return float(np.sum(mu - y * np.log(mu))) - offset, g, H

    return _damped_newton(model, cost_only, x0, lower, upper, max_iter, ftol, gtol, lam0)
