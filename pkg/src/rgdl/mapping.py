"""The operator bridge between RBMs and real-space coarse graining.

An RBM with energy E(v, h) plus a data Hamiltonian H(v) induce the
coarse-graining operator

    T(v, h) = -E(v, h) + H(v),

and with it every identity the two constructions share:

- the hidden-layer Hamiltonian produced by tracing out the visible spins
  against H equals the RBM's own hidden marginal (an algebraic identity,
  checked here as a total-variation distance between the two distributions
  computed along independent code paths);
- exp(T) factors as p(h | v) * exp(H(v) - H_rbm(v)), where H_rbm is the
  induced visible Hamiltonian -log sum_h exp(-E) (constant fixed so that its
  Boltzmann sum reproduces the joint partition function);
- the transformation is exact (sum_h exp(T) = 1 for all v) precisely when
  H equals H_rbm, in which case the model reproduces the data distribution
  and the KL divergence vanishes.

None of this relies on the bipartite structure of E: the checks accept an
optional extra visible-visible coupling, turning the RBM into a general
Boltzmann machine.  Everything here is enumeration-based; no sampling enters.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .errors import CapacityError, ValidationError
from .rbm import RBMParams, cond_hidden_given_visible, exact_kl
from .rg import RGOperator, exactness_residual, free_energy_difference, renormalized_hamiltonian
from .spins import ENUMERATION_LIMIT, Hamiltonian, all_configs, boltzmann_distribution


def _check_capacity(params: RBMParams) -> None:
    if params.n_visible + params.n_hidden > ENUMERATION_LIMIT:
        raise CapacityError(
            f"{params.n_visible}+{params.n_hidden} spins exceeds enumeration "
            f"limit {ENUMERATION_LIMIT}"
        )


def _energy_table(params: RBMParams, extra_visible: Hamiltonian | None) -> np.ndarray:
    """E(v, h) over the full (2^N, 2^M) grid, plus any visible-visible term."""
    _check_capacity(params)
    v = all_configs(params.n_visible, params.domain).astype(np.float64)
    h = all_configs(params.n_hidden, params.domain).astype(np.float64)
    e = (v @ params.w) @ h.T + (h @ params.b)[None, :] + (v @ params.c)[:, None]
    if extra_visible is not None:
        if extra_visible.n_sites != params.n_visible:
            raise ValidationError("extra visible coupling has wrong site count")
        e = e + extra_visible.energies_all(params.domain)[:, None]
    return e


def induced_visible_hamiltonian(
    params: RBMParams, extra_visible: Hamiltonian | None = None
) -> np.ndarray:
    """H_rbm(v) = -log sum_h exp(-E(v,h)), per visible configuration."""
    e = _energy_table(params, extra_visible)
    return -logsumexp(-e, axis=1)


def rg_operator_from_rbm(
    params: RBMParams, h_data: Hamiltonian, extra_visible: Hamiltonian | None = None
) -> RGOperator:
    """Tabulate T(v, h) = -E(v, h) + H(v)."""
    if h_data.n_sites != params.n_visible:
        raise ValidationError(
            f"data Hamiltonian has {h_data.n_sites} sites, RBM has {params.n_visible}"
        )
    e = _energy_table(params, extra_visible)
    log_t = -e + h_data.energies_all(params.domain)[:, None]
    return RGOperator(log_t, params.n_visible, params.n_hidden, params.domain)


def hidden_distribution_distance(
    params: RBMParams, h_data: Hamiltonian, extra_visible: Hamiltonian | None = None
) -> float:
    """TV distance between the traced-out hidden distribution and the RBM's own.

    Route (a): normalize sum_v exp(T(v,h) - H(v)) from the tabulated operator.
    Route (b): the hidden marginal sum_v exp(-E(v,h)), normalized.  The two
    are algebraically identical for every (params, H) pair, so any distance
    beyond roundoff is a defect.
    """
    op = rg_operator_from_rbm(params, h_data, extra_visible)
    p_a = renormalized_hamiltonian(op, h_data).probabilities()
    log_w = logsumexp(-_energy_table(params, extra_visible), axis=0)
    w = np.exp(log_w - log_w.max())
    p_b = w / w.sum()
    return 0.5 * float(np.abs(p_a - p_b).sum())


def conditional_identity_residual(
    params: RBMParams, h_data: Hamiltonian, extra_visible: Hamiltonian | None = None
) -> float:
    """max |exp(T) - p(h|v) exp(H - H_rbm)| over all (v, h).

    p(h|v) comes from the factorized per-unit conditional formula, a code path
    independent of the energy table used to build T.
    """
    op = rg_operator_from_rbm(params, h_data, extra_visible)
    h_rbm = induced_visible_hamiltonian(params, extra_visible)
    e_data = h_data.energies_all(params.domain)

    v = all_configs(params.n_visible, params.domain).astype(np.float64)
    hc = all_configs(params.n_hidden, params.domain)
    p = cond_hidden_given_visible(v, params)
    bits = (hc == 1).astype(np.float64)
    with np.errstate(divide="ignore"):
        cond = np.exp(np.log(p) @ bits.T + np.log(1 - p) @ (1 - bits).T)
    rhs = cond * np.exp(e_data - h_rbm)[:, None]
    return float(np.max(np.abs(np.exp(op.log_weight) - rhs)))


@dataclass(frozen=True)
class MappingReport:
    """Side-by-side diagnostics for one (RBM, data Hamiltonian) pair.

    ``delta_f`` and ``kl_visible`` quantify the same mismatch from the two
    traditions' viewpoints (free energies vs distributions); their a priori
    relationship for inexact operators is an open question, so both are
    reported and neither is derived from the other.
    """

    exactness_residual: float
    hidden_distribution_distance: float
    conditional_identity_residual: float
    delta_f: float
    kl_visible: float

    def __post_init__(self):
        for name in ("exactness_residual", "hidden_distribution_distance",
                     "conditional_identity_residual", "kl_visible"):
            if getattr(self, name) < 0:
                raise ValidationError(f"{name} must be >= 0")

    def to_dict(self) -> dict:
        return {
            "exactness_residual": self.exactness_residual,
            "hidden_distribution_distance": self.hidden_distribution_distance,
            "conditional_identity_residual": self.conditional_identity_residual,
            "delta_f": self.delta_f,
            "kl_visible": self.kl_visible,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_dict(cls, d: dict) -> "MappingReport":
        return cls(**{k: float(d[k]) for k in (
            "exactness_residual", "hidden_distribution_distance",
            "conditional_identity_residual", "delta_f", "kl_visible")})


def _kl_visible(params, h_data, extra_visible) -> float:
    p_data = boltzmann_distribution(h_data, params.domain)
    if extra_visible is None:
        return exact_kl(p_data, params)
    h_rbm = induced_visible_hamiltonian(params, extra_visible)
    log_q = -h_rbm - logsumexp(-h_rbm)
    mask = p_data > 0
    return float(np.sum(p_data[mask] * (np.log(p_data[mask]) - log_q[mask])))


def mapping_report(
    params: RBMParams, h_data: Hamiltonian, extra_visible: Hamiltonian | None = None
) -> MappingReport:
    """Evaluate every mapping identity on one instance by exact enumeration."""
    op = rg_operator_from_rbm(params, h_data, extra_visible)
    return MappingReport(
        exactness_residual=exactness_residual(op),
        hidden_distribution_distance=hidden_distribution_distance(
            params, h_data, extra_visible
        ),
        conditional_identity_residual=conditional_identity_residual(
            params, h_data, extra_visible
        ),
        delta_f=free_energy_difference(op, h_data),
        kl_visible=_kl_visible(params, h_data, extra_visible),
    )


def matched_data_hamiltonian(
    params: RBMParams, extra_visible: Hamiltonian | None = None
) -> Hamiltonian:
    """The data Hamiltonian that makes the induced operator exact.

    Expands H_rbm(v) = -log sum_h exp(-E) over the interaction basis, constant
    included; feeding it back through :func:`rg_operator_from_rbm` gives
    sum_h exp(T) = 1 identically.
    """
    from .spins import hamiltonian_from_energies

    return hamiltonian_from_energies(
        induced_visible_hamiltonian(params, extra_visible), params.n_visible
    )
