"""Restricted Boltzmann machines over binary spins, in the +E sign convention.

The joint energy is

    E(v, h) = sum_j b_j h_j + sum_ij v_i w_ij h_j + sum_i c_i v_i,

with p(v, h) = exp(-E)/Z.  Note the PLUS signs: a large positive field makes
the corresponding unit *unlikely* to be up.  ``negated`` converts to the more
common convention (all parameters negated) for interop.

Under this convention the factorized conditionals are, with the hidden field
a_j = b_j + sum_i v_i w_ij:

    ±1 domain:   p(h_j = +1 | v) = 1 / (1 + exp(+2 a_j))
    {0,1} domain: p(h_j =  1 | v) = 1 / (1 + exp(+a_j))

and the log-likelihood gradient points along model-minus-data statistics,
e.g. dL/dw_ij = <v_i h_j>_model - <v_i h_j>_data.  Contrastive-divergence
training follows that direction with momentum and an L1 soft-threshold on the
weights.

Exact small-system inference (marginals, partition function, KL divergence)
enumerates the visible or hidden configurations and traces the other layer
analytically, so it doubles as the oracle for the sampled training path.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace

import numpy as np
from scipy.special import expit, logsumexp

from .errors import CapacityError, ValidationError
from .spins import ENUMERATION_LIMIT, SpinDomain, all_configs


@dataclass(frozen=True)
class RBMParams:
    """Hidden biases b (M,), weights w (N, M), visible biases c (N,)."""

    b: np.ndarray
    w: np.ndarray
    c: np.ndarray
    domain: SpinDomain = SpinDomain.PLUS_MINUS_ONE

    def __post_init__(self):
        b = np.asarray(self.b, dtype=np.float64)
        w = np.asarray(self.w, dtype=np.float64)
        c = np.asarray(self.c, dtype=np.float64)
        if w.ndim != 2 or b.shape != (w.shape[1],) or c.shape != (w.shape[0],):
            raise ValidationError(
                f"inconsistent shapes: b {b.shape}, w {w.shape}, c {c.shape}"
            )
        if not (np.all(np.isfinite(b)) and np.all(np.isfinite(w)) and np.all(np.isfinite(c))):
            raise ValidationError("parameters must be finite")
        for arr, name in ((b, "b"), (w, "w"), (c, "c")):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def n_visible(self) -> int:
        return self.w.shape[0]

    @property
    def n_hidden(self) -> int:
        return self.w.shape[1]

    def negated(self) -> "RBMParams":
        """Convert to/from the conventional sign convention (p ∝ e^{+b·h+...})."""
        return RBMParams(-self.b, -self.w, -self.c, self.domain)

    def to_json(self) -> str:
        return json.dumps(
            {
                "format": "rgdl-rbm",
                "version": 1,
                "domain": self.domain.value,
                "n_visible": self.n_visible,
                "n_hidden": self.n_hidden,
                "b": self.b.tolist(),
                "w": self.w.tolist(),
                "c": self.c.tolist(),
            }
        )

    @classmethod
    def from_json(cls, text: str) -> "RBMParams":
        d = json.loads(text)
        if d.get("format") != "rgdl-rbm":
            raise ValidationError("not an rgdl-rbm model file")
        return cls(
            np.array(d["b"]), np.array(d["w"]), np.array(d["c"]), SpinDomain(d["domain"])
        )

    def save(self, path) -> None:
        with open(path, "w") as f:
            f.write(self.to_json())

    @classmethod
    def load(cls, path) -> "RBMParams":
        with open(path) as f:
            return cls.from_json(f.read())


@dataclass(frozen=True)
class TrainConfig:
    """Contrastive-divergence hyperparameters.

    Defaults follow the stacked-RBM training protocol this package reproduces:
    200 epochs, momentum 0.5, minibatches of 100, CD-1, L1 strength 2e-4.
    The learning rate is not pinned by that protocol; 0.05 works well at these
    scales.
    """

    learning_rate: float = 0.05
    momentum: float = 0.5
    minibatch: int = 100
    epochs: int = 200
    cd_k: int = 1
    l1_strength: float = 2e-4
    seed: int = 0

    def __post_init__(self):
        if self.learning_rate < 0:
            raise ValidationError("learning_rate must be >= 0")
        if not 0 <= self.momentum < 1:
            raise ValidationError("momentum must be in [0, 1)")
        if self.minibatch < 1:
            raise ValidationError("minibatch must be >= 1")
        if self.epochs < 0:
            raise ValidationError("epochs must be >= 0")
        if self.cd_k < 1:
            raise ValidationError("cd_k must be >= 1")
        if self.l1_strength < 0:
            raise ValidationError("l1_strength must be >= 0")


def init_params(
    n_visible: int,
    n_hidden: int,
    rng: np.random.Generator,
    domain: SpinDomain = SpinDomain.PLUS_MINUS_ONE,
    scale: float = 1.0,
) -> RBMParams:
    """Small symmetric weight init, zero biases (avoids unit saturation)."""
    w = rng.uniform(-0.01, 0.01, size=(n_visible, n_hidden)) * scale
    return RBMParams(np.zeros(n_hidden), w, np.zeros(n_visible), domain)


def rbm_energy(v: np.ndarray, h: np.ndarray, params: RBMParams) -> float:
    """E(v, h) = b·h + v·w·h + c·v."""
    v = np.asarray(v, dtype=np.float64)
    h = np.asarray(h, dtype=np.float64)
    if v.shape != (params.n_visible,) or h.shape != (params.n_hidden,):
        raise ValidationError(
            f"config shapes {v.shape}, {h.shape} do not match ({params.n_visible},), ({params.n_hidden},)"
        )
    return float(params.b @ h + v @ params.w @ h + params.c @ v)


def _cond_prob_high(field: np.ndarray, domain: SpinDomain) -> np.ndarray:
    # p(high) = 1/(1 + exp(2a)) for ±1 spins, 1/(1 + exp(a)) for 0/1 units
    if domain is SpinDomain.PLUS_MINUS_ONE:
        return expit(-2.0 * field)
    return expit(-field)


def cond_hidden_given_visible(v: np.ndarray, params: RBMParams) -> np.ndarray:
    """Per-unit probability that each hidden unit is up, given visible spins.

    Accepts a single configuration (N,) or a batch (B, N).
    """
    v = np.asarray(v, dtype=np.float64)
    if v.shape[-1] != params.n_visible:
        raise ValidationError(f"visible size {v.shape[-1]} != {params.n_visible}")
    return _cond_prob_high(params.b + v @ params.w, params.domain)


def cond_visible_given_hidden(h: np.ndarray, params: RBMParams) -> np.ndarray:
    """Mirror of :func:`cond_hidden_given_visible` with field c_i + sum_j w_ij h_j."""
    h = np.asarray(h, dtype=np.float64)
    if h.shape[-1] != params.n_hidden:
        raise ValidationError(f"hidden size {h.shape[-1]} != {params.n_hidden}")
    return _cond_prob_high(params.c + h @ params.w.T, params.domain)


def sample_units(probs: np.ndarray, rng: np.random.Generator, domain: SpinDomain) -> np.ndarray:
    """Draw binary unit values from per-unit up-probabilities."""
    bits = rng.random(np.shape(probs)) < probs
    if domain is SpinDomain.PLUS_MINUS_ONE:
        return np.where(bits, 1.0, -1.0)
    return bits.astype(np.float64)


def mean_units(probs: np.ndarray, domain: SpinDomain) -> np.ndarray:
    """Expected unit values from up-probabilities (2p-1 for ±1 spins, p for 0/1)."""
    if domain is SpinDomain.PLUS_MINUS_ONE:
        return 2.0 * probs - 1.0
    return np.asarray(probs)


Velocity = tuple[np.ndarray, np.ndarray, np.ndarray]


def _zero_velocity(params: RBMParams) -> Velocity:
    return (
        np.zeros(params.n_hidden),
        np.zeros((params.n_visible, params.n_hidden)),
        np.zeros(params.n_visible),
    )


def cd_k_update(
    params: RBMParams,
    batch: np.ndarray,
    cfg: TrainConfig,
    rng: np.random.Generator,
    velocity: Velocity | None = None,
) -> tuple[RBMParams, Velocity]:
    """One contrastive-divergence parameter update on a minibatch.

    Data-phase statistics use mean-field hidden values; the negative phase
    runs cd_k sampled Gibbs steps from the data and uses the sampled binary
    states.  The step follows <stat>_model - <stat>_data (log-likelihood
    ascent in the +E convention), accumulated through momentum, then the
    weights are soft-thresholded by learning_rate * l1_strength.
    """
    batch = np.asarray(batch, dtype=np.float64)
    if batch.ndim != 2 or batch.shape[0] == 0:
        raise ValidationError("minibatch must be a nonempty (B, N) array")
    if batch.shape[1] != params.n_visible:
        raise ValidationError(f"batch width {batch.shape[1]} != {params.n_visible}")
    nb = batch.shape[0]
    domain = params.domain

    p_h_data = cond_hidden_given_visible(batch, params)
    h_data = mean_units(p_h_data, domain)
    h_model = sample_units(p_h_data, rng, domain)
    v_model = batch
    for _ in range(cfg.cd_k):
        v_model = sample_units(cond_visible_given_hidden(h_model, params), rng, domain)
        h_model = sample_units(cond_hidden_given_visible(v_model, params), rng, domain)

    grad_b = h_model.mean(axis=0) - h_data.mean(axis=0)
    grad_w = (v_model.T @ h_model - batch.T @ h_data) / nb
    grad_c = v_model.mean(axis=0) - batch.mean(axis=0)

    vb, vw, vc = velocity if velocity is not None else _zero_velocity(params)
    vb = cfg.momentum * vb + cfg.learning_rate * grad_b
    vw = cfg.momentum * vw + cfg.learning_rate * grad_w
    vc = cfg.momentum * vc + cfg.learning_rate * grad_c

    w = params.w + vw
    if cfg.l1_strength > 0:
        thr = cfg.learning_rate * cfg.l1_strength
        w = np.sign(w) * np.maximum(np.abs(w) - thr, 0.0)
    new = RBMParams(params.b + vb, w, params.c + vc, domain)
    return new, (vb, vw, vc)


@dataclass(frozen=True)
class TrainResult:
    params: RBMParams
    reconstruction_errors: tuple[float, ...]


def reconstruction_error(params: RBMParams, data: np.ndarray) -> float:
    """Mean squared error of the one-pass mean-field reconstruction."""
    p_h = cond_hidden_given_visible(data, params)
    p_v = cond_visible_given_hidden(mean_units(p_h, params.domain), params)
    recon = mean_units(p_v, params.domain)
    return float(np.mean((np.asarray(data, dtype=np.float64) - recon) ** 2))


def train(
    data: np.ndarray,
    n_hidden: int,
    cfg: TrainConfig,
    domain: SpinDomain = SpinDomain.PLUS_MINUS_ONE,
    init_scale: float = 1.0,
) -> TrainResult:
    """Full CD-k schedule: seeded shuffling, minibatch updates, momentum.

    Deterministic given cfg.seed; epochs=0 returns the initialization.
    Reconstruction error over the whole dataset is recorded once per epoch.
    """
    data = np.asarray(data, dtype=np.float64)
    if data.ndim != 2 or data.shape[0] == 0:
        raise ValidationError("training data must be a nonempty (S, N) array")
    if not domain.contains(data):
        raise ValidationError(f"training data outside domain {domain.value}")
    rng = np.random.default_rng(cfg.seed)
    params = init_params(data.shape[1], n_hidden, rng, domain, init_scale)
    velocity = None
    errors = []
    n = data.shape[0]
    for _ in range(cfg.epochs):
        perm = rng.permutation(n)
        for start in range(0, n, cfg.minibatch):
            batch = data[perm[start : start + cfg.minibatch]]
            params, velocity = cd_k_update(params, batch, cfg, rng, velocity)
        errors.append(reconstruction_error(params, data))
    return TrainResult(params, tuple(errors))


# ---------------------------------------------------------------------------
# exact inference on small systems


def _check_capacity(n: int) -> None:
    if n > ENUMERATION_LIMIT:
        raise CapacityError(f"{n} sites exceeds enumeration limit {ENUMERATION_LIMIT}")


def _log_unit_trace(field: np.ndarray, domain: SpinDomain) -> np.ndarray:
    # sum over one unit's two values of exp(-value * field)
    if domain is SpinDomain.PLUS_MINUS_ONE:
        return np.logaddexp(field, -field)  # log 2cosh
    return np.logaddexp(0.0, -field)  # log(1 + e^-a)


@dataclass(frozen=True)
class ExactMarginal:
    """Exact marginal over one layer.

    ``energies`` is the induced Hamiltonian -log sum_other exp(-E), i.e. the
    additive constant is fixed so that sum exp(-energies) equals the joint
    partition function.
    """

    probs: np.ndarray
    energies: np.ndarray


def exact_visible_marginal(params: RBMParams) -> ExactMarginal:
    """p(v) and its induced Hamiltonian, tracing the hidden layer analytically."""
    _check_capacity(params.n_visible)
    v = all_configs(params.n_visible, params.domain).astype(np.float64)
    field = params.b + v @ params.w  # (2^N, M)
    log_w = -v @ params.c + _log_unit_trace(field, params.domain).sum(axis=1)
    x = log_w - np.max(log_w)
    p = np.exp(x)
    return ExactMarginal(p / p.sum(), -log_w)


def exact_hidden_marginal(params: RBMParams) -> ExactMarginal:
    """p(h) and its induced Hamiltonian, tracing the visible layer analytically."""
    _check_capacity(params.n_hidden)
    h = all_configs(params.n_hidden, params.domain).astype(np.float64)
    field = params.c + h @ params.w.T  # (2^M, N)
    log_w = -h @ params.b + _log_unit_trace(field, params.domain).sum(axis=1)
    x = log_w - np.max(log_w)
    p = np.exp(x)
    return ExactMarginal(p / p.sum(), -log_w)


def exact_log_partition(params: RBMParams) -> float:
    """log Z of the joint distribution, via the visible enumeration."""
    return float(logsumexp(-exact_visible_marginal(params).energies))


def exact_joint(params: RBMParams) -> np.ndarray:
    """Joint p(v, h) as a (2^N, 2^M) table (test oracle; enumerates everything)."""
    _check_capacity(params.n_visible + params.n_hidden)
    v = all_configs(params.n_visible, params.domain).astype(np.float64)
    h = all_configs(params.n_hidden, params.domain).astype(np.float64)
    e = (v @ params.w) @ h.T + (h @ params.b)[None, :] + (v @ params.c)[:, None]
    w = np.exp(-(e - e.min()))
    return w / w.sum()


def exact_kl(p_data: np.ndarray, params: RBMParams) -> float:
    """KL(P || p_model) over the visible configurations; +inf where P escapes
    the model's support (cannot happen with finite parameters)."""
    p_data = np.asarray(p_data, dtype=np.float64)
    if p_data.shape != (1 << params.n_visible,):
        raise ValidationError(
            f"distribution shape {p_data.shape} != ({1 << params.n_visible},)"
        )
    if np.any(p_data < 0) or abs(p_data.sum() - 1.0) > 1e-9:
        raise ValidationError("p_data must be a probability distribution")
    marg = exact_visible_marginal(params)
    log_q = -marg.energies - logsumexp(-marg.energies)
    mask = p_data > 0
    if np.any(np.isneginf(log_q[mask])):
        return math.inf
    return float(np.sum(p_data[mask] * (np.log(p_data[mask]) - log_q[mask])))


def exact_loglik_gradient(
    params: RBMParams, p_data: np.ndarray
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Exact gradient of E_P[log p(v)] wrt (b, w, c): model minus data statistics."""
    p_data = np.asarray(p_data, dtype=np.float64)
    v = all_configs(params.n_visible, params.domain).astype(np.float64)
    p_h = _cond_prob_high(params.b + v @ params.w, params.domain)
    h_mean = mean_units(p_h, params.domain)  # E[h | v], (2^N, M)
    p_v = exact_visible_marginal(params).probs

    def stats(weights):
        return (
            weights @ h_mean,
            v.T @ (weights[:, None] * h_mean),
            weights @ v,
        )

    mb, mw, mc = stats(p_v)
    db, dw, dc = stats(p_data)
    return mb - db, mw - dw, mc - dc
