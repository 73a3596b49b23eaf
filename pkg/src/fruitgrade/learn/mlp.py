"""One-hidden-layer tanh/softmax network trained by Levenberg-Marquardt or Bayesian regularization."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from ..errors import DimensionMismatch, SingularNormalEquations

LAMBDA_INIT = 1e-3
LAMBDA_UP = 10.0
LAMBDA_DOWN = 10.0
LAMBDA_MAX = 1e10
MAX_SINGULAR = 10
MAX_VAL_FAILS = 6


def lm_step(J: np.ndarray, e: np.ndarray, lam: float, w: Optional[np.ndarray] = None, alpha: float = 0.0, beta: float = 1.0) -> np.ndarray:
    """Damped Gauss-Newton step for ``beta*|e|^2 + alpha*|w|^2``.

    Solves ``(beta J'J + (alpha + lam) I) dw = -(beta J'e + alpha w)``.

    Raises
    ------
    SingularNormalEquations
        If the system is singular or the solution is not finite.
    """
    p = J.shape[1]
    a = beta * (J.T @ J)
    a[np.diag_indices(p)] += alpha + lam
    g = beta * (J.T @ e)
    if alpha and w is not None:
        g = g + alpha * w
    try:
        step = np.linalg.solve(a, -g)
    except np.linalg.LinAlgError:
        raise SingularNormalEquations("normal equations are singular") from None
    if not np.all(np.isfinite(step)):
        raise SingularNormalEquations("normal equations gave a non-finite step")
    return step


def levenberg_marquardt(
    residual: Callable[[np.ndarray], np.ndarray],
    jacobian: Callable[[np.ndarray], np.ndarray],
    w0,
    lam0: float = LAMBDA_INIT,
    max_iter: int = 200,
    tol: float = 1e-14,
) -> tuple[np.ndarray, int]:
    """Generic least-squares LM; returns ``(w, accepted_steps)``.

    The damping is multiplied by 10 after a rejected step and divided by 10
    after an accepted one.
    """
    w = np.asarray(w0, dtype=np.float64).copy()
    lam = lam0
    e = residual(w)
    err = float(e @ e)
    accepted = 0
    singular = 0
    for _ in range(max_iter):
        if err <= tol:
            break
        J = jacobian(w)
        while True:
            try:
                step = lm_step(J, e, lam)
            except SingularNormalEquations:
                singular += 1
                if singular >= MAX_SINGULAR:
                    raise
                lam = max(lam * LAMBDA_UP, 1e-12)
                continue
            singular = 0
            trial = w + step
            e_trial = residual(trial)
            err_trial = float(e_trial @ e_trial)
            if err_trial < err:
                w, e, err = trial, e_trial, err_trial
                lam /= LAMBDA_DOWN
                accepted += 1
                break
            lam = max(lam * LAMBDA_UP, 1e-12)
            if lam > LAMBDA_MAX:
                return w, accepted
        if float(np.max(np.abs(J.T @ e))) < tol:
            break
    return w, accepted


@dataclass
class MlpModel:
    n_inputs: int
    n_hidden: int
    n_outputs: int
    w1: np.ndarray  # (H, d)
    b1: np.ndarray  # (H,)
    w2: np.ndarray  # (C, H)
    b2: np.ndarray  # (C,)
    method: str = "levenberg_marquardt"
    history: dict = field(default_factory=dict)

    @property
    def n_params(self) -> int:
        return self.n_hidden * (self.n_inputs + 1) + self.n_outputs * (self.n_hidden + 1)

    def flat(self) -> np.ndarray:
        return np.concatenate([self.w1.ravel(), self.b1, self.w2.ravel(), self.b2])

    def with_flat(self, w: np.ndarray) -> "MlpModel":
        h, d, c = self.n_hidden, self.n_inputs, self.n_outputs
        o = 0
        w1 = w[o : o + h * d].reshape(h, d)
        o += h * d
        b1 = w[o : o + h]
        o += h
        w2 = w[o : o + c * h].reshape(c, h)
        o += c * h
        b2 = w[o : o + c]
        return MlpModel(d, h, c, w1.copy(), b1.copy(), w2.copy(), b2.copy(), self.method, self.history)

    def forward(self, x) -> tuple[np.ndarray, np.ndarray]:
        """Hidden activations ``(N, H)`` and softmax outputs ``(N, C)``."""
        x = np.atleast_2d(np.asarray(x, dtype=np.float64))
        if x.shape[1] != self.n_inputs:
            raise DimensionMismatch(f"expected {self.n_inputs} features, got {x.shape[1]}")
        hidden = np.tanh(x @ self.w1.T + self.b1)
        z = hidden @ self.w2.T + self.b2
        z -= z.max(axis=1, keepdims=True)
        ez = np.exp(z)
        return hidden, ez / ez.sum(axis=1, keepdims=True)

    def predict_proba(self, x) -> np.ndarray:
        return self.forward(x)[1]

    def predict(self, x) -> np.ndarray:
        return np.argmax(self.predict_proba(x), axis=1)

    def jacobian(self, x) -> np.ndarray:
        """d(outputs)/d(params), shape ``(N*C, P)`` with rows ordered sample-major."""
        x = np.atleast_2d(np.asarray(x, dtype=np.float64))
        hidden, p = self.forward(x)
        n, c, h = x.shape[0], self.n_outputs, self.n_hidden
        # softmax derivative S[n, c, k] = p_c (delta_ck - p_k)
        s = p[:, :, None] * (np.eye(c)[None] - p[:, None, :])
        d_w2 = s[:, :, :, None] * hidden[:, None, None, :]  # (N, C, C, H)
        d_b2 = s  # (N, C, C)
        d_hidden = np.einsum("nck,kh->nch", s, self.w2) * (1 - hidden * hidden)[:, None, :]  # (N, C, H)
        d_w1 = d_hidden[:, :, :, None] * x[:, None, None, :]  # (N, C, H, d)
        return np.concatenate(
            [
                d_w1.reshape(n * c, -1),
                d_hidden.reshape(n * c, h),
                d_w2.reshape(n * c, -1),
                d_b2.reshape(n * c, c),
            ],
            axis=1,
        )

    def to_dict(self) -> dict:
        return {
            "n_inputs": self.n_inputs,
            "n_hidden": self.n_hidden,
            "n_outputs": self.n_outputs,
            "w1": self.w1.tolist(),
            "b1": self.b1.tolist(),
            "w2": self.w2.tolist(),
            "b2": self.b2.tolist(),
            "method": self.method,
            "history": self.history,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "MlpModel":
        return cls(
            d["n_inputs"],
            d["n_hidden"],
            d["n_outputs"],
            np.asarray(d["w1"], dtype=np.float64).reshape(d["n_hidden"], d["n_inputs"]),
            np.asarray(d["b1"], dtype=np.float64),
            np.asarray(d["w2"], dtype=np.float64).reshape(d["n_outputs"], d["n_hidden"]),
            np.asarray(d["b2"], dtype=np.float64),
            d.get("method", "levenberg_marquardt"),
            d.get("history", {}),
        )


def init_mlp(n_inputs: int, n_hidden: int, n_outputs: int, seed: int) -> MlpModel:
    """Uniform weights in +-1/sqrt(fan_in), biases included."""
    rng = np.random.default_rng(seed)
    r1 = 1.0 / math.sqrt(n_inputs)
    r2 = 1.0 / math.sqrt(n_hidden)
    return MlpModel(
        n_inputs,
        n_hidden,
        n_outputs,
        rng.uniform(-r1, r1, (n_hidden, n_inputs)),
        rng.uniform(-r1, r1, n_hidden),
        rng.uniform(-r2, r2, (n_outputs, n_hidden)),
        rng.uniform(-r2, r2, n_outputs),
    )


def _one_hot(y: np.ndarray, n_classes: int) -> np.ndarray:
    return np.eye(n_classes)[y]


def mlp_fit(
    x,
    y,
    val_x=None,
    val_y=None,
    hidden: int = 10,
    method: str = "levenberg_marquardt",
    seed: int = 0,
    max_iter: int = 200,
    n_classes: Optional[int] = None,
) -> MlpModel:
    """Train on the sum of squared softmax errors against one-hot targets.

    ``levenberg_marquardt`` stops after ``max_iter`` iterations or 6
    consecutive rises of the validation error, returning the weights with the
    lowest validation error. ``bayesian_regularization`` minimizes
    ``beta*E_D + alpha*E_W`` and re-estimates both after every accepted step
    from the effective number of parameters; it runs without validation
    stopping.
    """
    if method not in ("levenberg_marquardt", "bayesian_regularization"):
        raise ValueError(f"unknown training method {method!r}")
    if hidden < 1:
        raise ValueError("hidden must be >= 1")
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=int)
    if x.ndim != 2 or len(x) == 0 or len(x) != len(y):
        raise DimensionMismatch("x must be a nonempty (N, d) matrix with one label per row")
    n_classes = int(n_classes if n_classes is not None else y.max() + 1)
    targets = _one_hot(y, n_classes).ravel()
    use_val = method == "levenberg_marquardt" and val_x is not None and len(val_x) > 0
    if use_val:
        val_x = np.asarray(val_x, dtype=np.float64)
        val_t = _one_hot(np.asarray(val_y, dtype=int), n_classes).ravel()

    net = init_mlp(x.shape[1], hidden, n_classes, seed)
    net.method = method
    w = net.flat()
    n_res = targets.size
    n_par = w.size

    def errors(weights):
        return net.with_flat(weights).predict_proba(x).ravel() - targets

    def val_error(weights):
        e = net.with_flat(weights).predict_proba(val_x).ravel() - val_t
        return float(e @ e)

    bayes = method == "bayesian_regularization"
    alpha, beta = (0.0, 1.0)

    def objective(weights, e):
        if bayes:
            return beta * float(e @ e) + alpha * float(weights @ weights)
        return float(e @ e)

    lam = LAMBDA_INIT
    e = errors(w)
    obj = objective(w, e)
    best_w = w.copy()
    best_val = val_error(w) if use_val else math.inf
    prev_val = best_val
    val_fails = 0
    singular = 0
    iterations = 0
    stop = "max_iter"
    for iterations in range(1, max_iter + 1):
        J = net.with_flat(w).jacobian(x)
        accepted = False
        while not accepted:
            try:
                step = lm_step(J, e, lam, w, alpha, beta) if bayes else lm_step(J, e, lam)
            except SingularNormalEquations:
                singular += 1
                if singular >= MAX_SINGULAR:
                    raise
                lam *= LAMBDA_UP
                continue
            singular = 0
            trial = w + step
            e_trial = errors(trial)
            obj_trial = objective(trial, e_trial)
            if obj_trial < obj:
                w, e, obj = trial, e_trial, obj_trial
                lam /= LAMBDA_DOWN
                accepted = True
            else:
                lam *= LAMBDA_UP
                if lam > LAMBDA_MAX:
                    break
        if not accepted:
            stop = "damping_limit"
            break

        if bayes:
            J = net.with_flat(w).jacobian(x)
            h = beta * (J.T @ J) + alpha * np.eye(n_par)
            try:
                trace_inv = float(np.trace(np.linalg.inv(h))) if alpha > 0 else 0.0
            except np.linalg.LinAlgError:
                trace_inv = 0.0
            gamma = min(max(n_par - alpha * trace_inv, 0.0), n_par)
            e_d = max(float(e @ e), 1e-300)
            e_w = max(float(w @ w), 1e-300)
            alpha = max(gamma, 1e-12) / (2.0 * e_w)
            beta = max(n_res - gamma, 1.0) / (2.0 * e_d)
            obj = objective(w, e)
            best_w = w.copy()
        elif use_val:
            v = val_error(w)
            if v < best_val:
                best_val, best_w = v, w.copy()
            val_fails = val_fails + 1 if v > prev_val else 0
            prev_val = v
            if val_fails >= MAX_VAL_FAILS:
                stop = "validation"
                break
        else:
            best_w = w.copy()

        if float(e @ e) < 1e-12:
            stop = "goal"
            break

    model = net.with_flat(best_w)
    model.method = method
    model.history = {"iterations": iterations, "stop": stop, "final_lambda": lam}
    if bayes:
        model.history.update({"alpha": alpha, "beta": beta})
    return model
