"""Conditional flow matching on toy latents.

Linear interpolant x_t = (1-t) x0 + t eps; the field f(x, t) regresses the
velocity target (eps - x0); loss is the batch mean of the squared L2 residual.
Models carry hand-derived gradients whose correctness authority is the
central-finite-difference admission check. Sampling integrates dx/dt = -f(x,t)
from t=1 with fixed-step Euler, so a constant field targeting one data point
recovers it in a single step.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import Divergence, ShapeMismatch

DEFAULT_LATENT_DIM = 8  # toy latent width; dual-branch mode uses 8 + 8


@dataclass(frozen=True)
class ToyBatch:
    x0: np.ndarray   # (B, D)
    eps: np.ndarray  # (B, D)
    t: np.ndarray    # (B,)

    def __post_init__(self):
        x0 = np.asarray(self.x0, dtype=np.float64)
        eps = np.asarray(self.eps, dtype=np.float64)
        t = np.asarray(self.t, dtype=np.float64)
        if x0.ndim != 2 or x0.shape[0] < 1:
            raise ShapeMismatch(f"x0 must be (B, D) with B >= 1, got {x0.shape}")
        if eps.shape != x0.shape:
            raise ShapeMismatch(f"eps shape {eps.shape} != x0 shape {x0.shape}")
        if t.shape != (x0.shape[0],):
            raise ShapeMismatch(f"t shape {t.shape} != ({x0.shape[0]},)")
        if (t < 0).any() or (t > 1).any():
            raise ValueError("t must lie in [0, 1]")
        object.__setattr__(self, "x0", x0)
        object.__setattr__(self, "eps", eps)
        object.__setattr__(self, "t", t)


def interpolant(x0, eps, t):
    """x_t = (1 - t) x0 + t eps, elementwise; t broadcasts over the batch."""
    x0 = np.asarray(x0, dtype=np.float64)
    eps = np.asarray(eps, dtype=np.float64)
    t = np.asarray(t, dtype=np.float64)
    if x0.shape != eps.shape:
        raise ShapeMismatch(f"x0 {x0.shape} vs eps {eps.shape}")
    if t.ndim == 1:
        if t.shape[0] != x0.shape[0]:
            raise ShapeMismatch(f"t {t.shape} does not match batch {x0.shape}")
        t = t[:, None]
    return (1.0 - t) * x0 + t * eps


def _augment(x: np.ndarray, t: np.ndarray) -> np.ndarray:
    """[x, t] input augmentation shared by the model zoo."""
    return np.concatenate([x, t[:, None]], axis=1)


class LinearField:
    """f(x, t) = W [x; t] + b."""

    def __init__(self, dim: int = DEFAULT_LATENT_DIM, seed: int = 0, init_scale: float = 0.0):
        rng = np.random.default_rng(seed)
        self.dim = dim
        self.W = init_scale * rng.standard_normal((dim, dim + 1))
        self.b = np.zeros(dim)

    # -- flat parameter view -------------------------------------------------
    def get_params(self) -> np.ndarray:
        return np.concatenate([self.W.ravel(), self.b])

    def set_params(self, p: np.ndarray) -> None:
        n = self.W.size
        self.W = p[:n].reshape(self.W.shape).copy()
        self.b = p[n:n + self.b.size].copy()

    def evaluate(self, x: np.ndarray, t: np.ndarray) -> np.ndarray:
        return _augment(x, t) @ self.W.T + self.b

    def gradient(self, batch: ToyBatch) -> np.ndarray:
        """d(cfm_loss)/d(params): residual chain rule, batch-mean scaling."""
        z = _augment(interpolant(batch.x0, batch.eps, batch.t), batch.t)
        resid = (z @ self.W.T + self.b) - (batch.eps - batch.x0)
        B = z.shape[0]
        dW = (2.0 / B) * resid.T @ z
        db = (2.0 / B) * resid.sum(axis=0)
        return np.concatenate([dW.ravel(), db])


class MLPField:
    """One hidden tanh layer: f(x, t) = W2 tanh(W1 [x; t] + b1) + b2."""

    def __init__(self, dim: int = DEFAULT_LATENT_DIM, hidden: int = 64, seed: int = 0):
        rng = np.random.default_rng(seed)
        self.dim = dim
        self.hidden = hidden
        self.W1 = rng.standard_normal((hidden, dim + 1)) / np.sqrt(dim + 1)
        self.b1 = np.zeros(hidden)
        self.W2 = rng.standard_normal((dim, hidden)) / np.sqrt(hidden)
        self.b2 = np.zeros(dim)

    def get_params(self) -> np.ndarray:
        return np.concatenate([self.W1.ravel(), self.b1, self.W2.ravel(), self.b2])

    def set_params(self, p: np.ndarray) -> None:
        sizes = [self.W1.size, self.b1.size, self.W2.size, self.b2.size]
        chunks = np.split(p, np.cumsum(sizes)[:-1])
        self.W1 = chunks[0].reshape(self.W1.shape).copy()
        self.b1 = chunks[1].copy()
        self.W2 = chunks[2].reshape(self.W2.shape).copy()
        self.b2 = chunks[3].copy()

    def evaluate(self, x: np.ndarray, t: np.ndarray) -> np.ndarray:
        h = np.tanh(_augment(x, t) @ self.W1.T + self.b1)
        return h @ self.W2.T + self.b2

    def gradient(self, batch: ToyBatch) -> np.ndarray:
        z = _augment(interpolant(batch.x0, batch.eps, batch.t), batch.t)
        h = np.tanh(z @ self.W1.T + self.b1)
        out = h @ self.W2.T + self.b2
        resid = out - (batch.eps - batch.x0)
        B = z.shape[0]
        d_out = (2.0 / B) * resid                 # (B, D)
        dW2 = d_out.T @ h
        db2 = d_out.sum(axis=0)
        d_h = d_out @ self.W2                     # (B, H)
        d_pre = d_h * (1.0 - h ** 2)              # tanh'
        dW1 = d_pre.T @ z
        db1 = d_pre.sum(axis=0)
        return np.concatenate([dW1.ravel(), db1, dW2.ravel(), db2])


class ConstantField:
    """f(x, t) = v. The exact conditional field for a single data point."""

    def __init__(self, v: np.ndarray):
        self.v = np.asarray(v, dtype=np.float64)
        self.dim = self.v.shape[-1]

    def get_params(self) -> np.ndarray:
        return self.v.ravel().copy()

    def set_params(self, p: np.ndarray) -> None:
        self.v = p.reshape(self.v.shape).copy()

    def evaluate(self, x: np.ndarray, t: np.ndarray) -> np.ndarray:
        return np.broadcast_to(self.v, x.shape).copy()

    def gradient(self, batch: ToyBatch) -> np.ndarray:
        resid = self.evaluate(interpolant(batch.x0, batch.eps, batch.t), batch.t) \
            - (batch.eps - batch.x0)
        return (2.0 / batch.x0.shape[0]) * resid.sum(axis=0)


class DualBranchField:
    """Two independent fields over disjoint latent blocks (e.g. 8 + 8).

    The squared-norm loss is additive over disjoint coordinates, so the
    combined loss equals the sum of per-block losses.
    """

    def __init__(self, first, second):
        self.first = first
        self.second = second
        self.dim = first.dim + second.dim

    def get_params(self) -> np.ndarray:
        return np.concatenate([self.first.get_params(), self.second.get_params()])

    def set_params(self, p: np.ndarray) -> None:
        n = self.first.get_params().size
        self.first.set_params(p[:n])
        self.second.set_params(p[n:])

    def _split(self, arr):
        return arr[:, :self.first.dim], arr[:, self.first.dim:]

    def evaluate(self, x: np.ndarray, t: np.ndarray) -> np.ndarray:
        a, b = self._split(x)
        return np.concatenate([self.first.evaluate(a, t), self.second.evaluate(b, t)], axis=1)

    def gradient(self, batch: ToyBatch) -> np.ndarray:
        ax0, bx0 = self._split(batch.x0)
        aeps, beps = self._split(batch.eps)
        return np.concatenate([
            self.first.gradient(ToyBatch(ax0, aeps, batch.t)),
            self.second.gradient(ToyBatch(bx0, beps, batch.t)),
        ])


def cfm_loss(model, batch: ToyBatch) -> float:
    if batch.x0.shape[1] != model.dim:
        raise ShapeMismatch(f"batch D={batch.x0.shape[1]} vs model dim={model.dim}")
    x_t = interpolant(batch.x0, batch.eps, batch.t)
    resid = model.evaluate(x_t, batch.t) - (batch.eps - batch.x0)
    return float(((resid ** 2).sum(axis=1)).mean())


def check_gradient(model, batch: ToyBatch, h: float = 1e-5) -> float:
    """Max relative error of model.gradient vs central finite differences."""
    analytic = model.gradient(batch)
    p0 = model.get_params()
    numeric = np.zeros_like(analytic)
    for i in range(p0.size):
        p = p0.copy()
        p[i] = p0[i] + h
        model.set_params(p)
        up = cfm_loss(model, batch)
        p[i] = p0[i] - h
        model.set_params(p)
        down = cfm_loss(model, batch)
        numeric[i] = (up - down) / (2.0 * h)
    model.set_params(p0)
    scale = np.maximum(np.abs(analytic) + np.abs(numeric), 1e-8)
    return float((np.abs(analytic - numeric) / scale).max())


@dataclass(frozen=True)
class TrainConfig:
    lr: float = 0.05
    steps: int = 2000
    batch: int = 128
    seed: int = 0
    momentum: float = 0.9
    gradcheck_batches: int = 3  # admission test before training starts


@dataclass(frozen=True)
class TrainResult:
    trace: np.ndarray        # per-step pre-update batch loss
    initial_eval: float      # loss on a fixed eval batch before training
    final_eval: float        # loss on the same eval batch after training


def _draw_batch(data: np.ndarray, n: int, rng: np.random.Generator) -> ToyBatch:
    idx = rng.integers(data.shape[0], size=n)
    x0 = data[idx]
    eps = rng.standard_normal(x0.shape)
    t = rng.random(n)
    return ToyBatch(x0, eps, t)


def train(model, data: np.ndarray, config: TrainConfig = TrainConfig()) -> TrainResult:
    """Plain gradient descent with momentum; deterministic per seed.

    The model must pass the finite-difference admission test on random
    batches before any step is taken.
    """
    data = np.asarray(data, dtype=np.float64)
    if data.ndim != 2 or data.shape[1] != model.dim:
        raise ShapeMismatch(f"data must be (N, {model.dim}), got {data.shape}")
    admit_rng = np.random.default_rng((config.seed, 0xADA))
    for _ in range(config.gradcheck_batches):
        b = _draw_batch(data, min(8, config.batch), admit_rng)
        err = check_gradient(model, b)
        if err >= 1e-4:
            raise Divergence(f"gradient admission failed: relative error {err:.3e}")

    rng = np.random.default_rng(config.seed)
    eval_batch = _draw_batch(data, max(256, config.batch),
                             np.random.default_rng((config.seed, 0xE7A)))
    initial_eval = cfm_loss(model, eval_batch)
    velocity = np.zeros_like(model.get_params())
    trace = np.empty(config.steps)
    for step in range(config.steps):
        batch = _draw_batch(data, config.batch, rng)
        loss = cfm_loss(model, batch)
        if not np.isfinite(loss):
            raise Divergence(f"loss diverged at step {step}", trace=trace[:step].tolist())
        trace[step] = loss
        grad = model.gradient(batch)
        velocity = config.momentum * velocity - config.lr * grad
        model.set_params(model.get_params() + velocity)
    final_eval = cfm_loss(model, eval_batch)
    if not np.isfinite(final_eval):
        raise Divergence("final loss not finite", trace=trace.tolist())
    return TrainResult(trace=trace, initial_eval=initial_eval, final_eval=final_eval)


def euler_sample(model, eps: np.ndarray, steps: int) -> np.ndarray:
    """Integrate dx/dt = -f(x, t) from t=1 to 0 with step 1/steps."""
    if steps < 1:
        raise ValueError(f"steps must be >= 1, got {steps}")
    x = np.asarray(eps, dtype=np.float64).copy()
    squeeze = x.ndim == 1
    if squeeze:
        x = x[None, :]
    h = 1.0 / steps
    for i in range(steps):
        t = np.full(x.shape[0], 1.0 - i * h)
        x = x - h * model.evaluate(x, t)
    return x[0] if squeeze else x


def gaussian_mixture(n: int, means, sigma: float, seed: int) -> np.ndarray:
    """Equal-weight isotropic Gaussian mixture draws, deterministic per seed."""
    means = np.asarray(means, dtype=np.float64)
    rng = np.random.default_rng(seed)
    comp = rng.integers(means.shape[0], size=n)
    return means[comp] + sigma * rng.standard_normal((n, means.shape[1]))


# Bundled 2D set: two nearby components far from the origin, so the mean
# transport dominates the irreducible component-ambiguity noise and short
# trainings can cut the loss by well over 90%.
TOY_MEANS = ((3.0, 2.2), (3.6, 2.8))
TOY_SIGMA = 0.15


def toy_mixture(n: int, seed: int = 0) -> np.ndarray:
    return gaussian_mixture(n, TOY_MEANS, TOY_SIGMA, seed)


# ---------------------------------------------------------------------------
# Checkpoints: magic, arch manifest (JSON), then flat little-endian f32 params.

_CKPT_MAGIC = b"PHYSCFM1"


def save_checkpoint(model, path) -> None:
    import json
    import struct

    manifest = {"arch": type(model).__name__, "dim": model.dim}
    if hasattr(model, "hidden"):
        manifest["hidden"] = model.hidden
    blob = json.dumps(manifest, sort_keys=True).encode("utf-8")
    params = model.get_params().astype("<f4")
    with open(path, "wb") as fh:
        fh.write(_CKPT_MAGIC)
        fh.write(struct.pack("<II", len(blob), params.size))
        fh.write(blob)
        fh.write(params.tobytes())


def load_checkpoint(path):
    import json
    import struct

    with open(path, "rb") as fh:
        data = fh.read()
    if data[:8] != _CKPT_MAGIC:
        raise ValueError("not a field checkpoint")
    blob_len, n = struct.unpack_from("<II", data, 8)
    manifest = json.loads(data[16:16 + blob_len].decode("utf-8"))
    params = np.frombuffer(data, dtype="<f4", count=n, offset=16 + blob_len).astype(np.float64)
    arch = manifest["arch"]
    if arch == "LinearField":
        model = LinearField(dim=manifest["dim"])
    elif arch == "MLPField":
        model = MLPField(dim=manifest["dim"], hidden=manifest.get("hidden", 64))
    elif arch == "ConstantField":
        model = ConstantField(np.zeros(manifest["dim"]))
    else:
        raise ValueError(f"unknown checkpoint arch {arch!r}")
    model.set_params(params)
    return model
