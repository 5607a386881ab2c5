"""Real-space coarse graining: decimation, block spins, and coupling flows.

A coarse-graining operator couples N visible spins to M hidden spins through
a function T(v, h); marginalizing the visible spins against a data Hamiltonian
H defines the renormalized Hamiltonian of the hidden layer,

    exp(-H_rg(h)) = sum_v exp(T(v,h) - H(v)).

The transformation is exact when sum_h exp(T(v,h)) = 1 for every v, which is
equivalent to a vanishing free-energy difference between the two layers.
Operators are stored as dense log-weight tables (T itself, with -inf marking
zero weight) over the configuration enumeration of :mod:`rgdl.spins`; all
reductions run in log space.

For the ferromagnetic 1D chain, decimating every other spin is exact and
closes on the nearest-neighbor form with the coupling recursion
tanh(J') = tanh^2(J), whose iterates flow from any finite J down to the
stable fixed point J = 0.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .errors import CapacityError, DomainError, ValidationError
from .spins import (
    ENUMERATION_LIMIT,
    Boundary,
    Hamiltonian,
    Lattice,
    LatticeKind,
    SpinDomain,
    all_configs,
)


def _atanh_guarded(x: float) -> float:
    # tanh^2(J) < 1 for any finite J; anything at or beyond 1 - 1e-15 signals
    # an input outside the recursion's range rather than a roundoff victim.
    if x >= 1.0 - 1e-15:
        raise DomainError(f"atanh argument {x} too close to 1")
    return 0.5 * math.log((1.0 + x) / (1.0 - x))


def decimation_step_coupling(coupling: float) -> float:
    """One decimation step for the ferromagnetic chain: J' = atanh(tanh^2 J)."""
    if not math.isfinite(coupling) or coupling < 0:
        raise DomainError(f"ferromagnetic coupling required, got {coupling}")
    return _atanh_guarded(math.tanh(coupling) ** 2)


def rg_flow(j0: float, n_steps: int) -> np.ndarray:
    """Iterate the decimation recursion: couplings J^(0)..J^(n), decreasing to 0."""
    if n_steps < 0:
        raise ValidationError("n_steps must be >= 0")
    out = np.empty(n_steps + 1)
    out[0] = j0
    for k in range(n_steps):
        out[k + 1] = decimation_step_coupling(out[k])
    return out


def rg_flow_closed_form(j0: float, n_steps: int) -> np.ndarray:
    """Closed form of the same flow: J^(n) = atanh(tanh(J0)^(2^n))."""
    if not math.isfinite(j0) or j0 < 0:
        raise DomainError(f"ferromagnetic coupling required, got {j0}")
    t = math.tanh(j0)
    return np.array([_atanh_guarded(t ** (2**k)) if k else j0 for k in range(n_steps + 1)])


@dataclass(frozen=True)
class RGOperator:
    """Dense tabulated coarse-graining operator.

    ``log_weight[iv, ih]`` holds T(v, h) for visible config index iv and hidden
    config index ih; -inf marks forbidden pairs.  Hidden layers may be larger
    than visible ones (dimensional expansion is allowed).
    """

    log_weight: np.ndarray
    n_visible: int
    n_hidden: int
    domain: SpinDomain = SpinDomain.PLUS_MINUS_ONE

    def __post_init__(self):
        lw = np.asarray(self.log_weight, dtype=np.float64)
        if lw.shape != (1 << self.n_visible, 1 << self.n_hidden):
            raise ValidationError(
                f"table shape {lw.shape} != (2^{self.n_visible}, 2^{self.n_hidden})"
            )
        if np.any(np.isnan(lw)) or np.any(lw == np.inf):
            raise ValidationError("log weights must be finite or -inf")
        lw.setflags(write=False)
        object.__setattr__(self, "log_weight", lw)

    def scaled(self, factor: float) -> "RGOperator":
        """Multiply exp(T) by a positive constant (diagnostic, breaks exactness)."""
        return RGOperator(
            self.log_weight + math.log(factor), self.n_visible, self.n_hidden, self.domain
        )

    def dump(self, path) -> None:
        """Debug dump: u32 dims then row-major float64 exp(T)."""
        with open(path, "wb") as f:
            f.write(struct.pack("<II", self.n_visible, self.n_hidden))
            np.exp(self.log_weight).astype("<f8").tofile(f)


def _check_capacity(n_visible: int, n_hidden: int) -> None:
    if n_visible + n_hidden > ENUMERATION_LIMIT:
        raise CapacityError(
            f"{n_visible}+{n_hidden} spins exceeds enumeration limit {ENUMERATION_LIMIT}"
        )


def _deterministic_operator(hidden_index: np.ndarray, n_visible: int, n_hidden: int) -> RGOperator:
    """Indicator operator exp(T) = [h == f(v)]; exact since each v maps to one h."""
    lw = np.full((1 << n_visible, 1 << n_hidden), -np.inf)
    lw[np.arange(1 << n_visible), hidden_index] = 0.0
    return RGOperator(lw, n_visible, n_hidden)


def decimation_operator_1d(n_visible: int) -> RGOperator:
    """Decimation of a chain: hidden spin j copies the even-indexed site 2j.

    exp(T) = prod_j (1 + h_j v_{2j}) / 2, an indicator with sum_h exp(T) = 1.
    """
    if n_visible % 2 != 0 or n_visible < 2:
        raise ValidationError(f"decimation needs an even site count, got {n_visible}")
    n_hidden = n_visible // 2
    _check_capacity(n_visible, n_hidden)
    idx = np.arange(1 << n_visible, dtype=np.int64)
    h_idx = np.zeros_like(idx)
    for j in range(n_hidden):
        h_idx |= ((idx >> (2 * j)) & 1) << j
    return _deterministic_operator(h_idx, n_visible, n_hidden)


def block_spin_operator_2d(lattice: Lattice) -> RGOperator:
    """Majority-rule block spins on 2x2 blocks of a square lattice.

    Ties (two up, two down) copy the block's top-left spin, keeping the
    assignment deterministic and the operator exact.  Hidden sites are
    numbered row-major over the block grid.
    """
    if lattice.kind is not LatticeKind.SQUARE_2D:
        raise DomainError("block-spin operator requires a square lattice")
    rows, cols = lattice.extents
    if rows % 2 or cols % 2:
        raise ValidationError(f"extents must be even, got {lattice.extents}")
    n_visible = lattice.n_sites
    brows, bcols = rows // 2, cols // 2
    n_hidden = brows * bcols
    _check_capacity(n_visible, n_hidden)
    spins = all_configs(n_visible).astype(np.int64)
    h_idx = np.zeros(1 << n_visible, dtype=np.int64)
    for br in range(brows):
        for bc in range(bcols):
            sites = [
                lattice.site(2 * br + dr, 2 * bc + dc) for dr in (0, 1) for dc in (0, 1)
            ]
            s = spins[:, sites].sum(axis=1)
            top_left = spins[:, sites[0]]
            h = np.where(s > 0, 1, np.where(s < 0, -1, top_left))
            h_idx |= ((h + 1) // 2).astype(np.int64) << (br * bcols + bc)
    return _deterministic_operator(h_idx, n_visible, n_hidden)


@dataclass(frozen=True)
class RenormalizedHamiltonian:
    """Hidden-layer weight table exp(-H_rg(h)) = sum_v exp(T(v,h) - H(v)).

    ``log_weight`` is reported as-is (it need not be normalized when the
    operator is inexact or annihilates configurations); ``probabilities``
    gives the normalized hidden distribution.
    """

    log_weight: np.ndarray
    n_sites: int
    domain: SpinDomain = SpinDomain.PLUS_MINUS_ONE

    def probabilities(self) -> np.ndarray:
        x = self.log_weight - np.max(self.log_weight)
        w = np.exp(x)
        return w / w.sum()

    def log_trace(self) -> float:
        return float(logsumexp(self.log_weight))

    def fit_couplings(
        self, term_sets, include_constant: bool = True
    ) -> tuple[Hamiltonian, float]:
        """Least-squares interaction fit of -H_rg over a declared term basis.

        Solves log_weight(h) ≈ K_0 + sum_S K_S prod_{j in S} h_j over all
        finite table entries and reports the max-abs residual, so interaction
        orders missing from the basis show up instead of vanishing silently.
        """
        cfgs = all_configs(self.n_sites, self.domain).astype(np.float64)
        sets = [tuple(sorted(s)) for s in term_sets]
        cols = [np.prod(cfgs[:, list(s)], axis=1) if s else np.ones(len(cfgs)) for s in sets]
        if include_constant and () not in sets:
            sets.insert(0, ())
            cols.insert(0, np.ones(len(cfgs)))
        design = np.column_stack(cols)
        finite = np.isfinite(self.log_weight)
        if not np.any(finite):
            raise ValidationError("hidden table has no finite entries to fit")
        coef, *_ = np.linalg.lstsq(design[finite], self.log_weight[finite], rcond=None)
        residual = float(np.max(np.abs(design[finite] @ coef - self.log_weight[finite])))
        terms = tuple((s, float(k)) for s, k in zip(sets, coef))
        return Hamiltonian(self.n_sites, terms), residual


def renormalized_hamiltonian(op: RGOperator, h: Hamiltonian) -> RenormalizedHamiltonian:
    """Trace out the visible layer: exp(-H_rg(h)) = sum_v exp(T(v,h) - H(v))."""
    if h.n_sites != op.n_visible:
        raise ValidationError(
            f"Hamiltonian has {h.n_sites} sites, operator expects {op.n_visible}"
        )
    e_v = h.energies_all(op.domain)
    log_w = logsumexp(op.log_weight - e_v[:, None], axis=0)
    return RenormalizedHamiltonian(np.asarray(log_w), op.n_hidden, op.domain)


def free_energy_difference(op: RGOperator, h: Hamiltonian) -> float:
    """F_hidden - F_visible; zero exactly when sum_h exp(T(v,h)) = 1 for all v."""
    f_hidden = -renormalized_hamiltonian(op, h).log_trace()
    f_visible = -float(logsumexp(-h.energies_all(op.domain)))
    return f_hidden - f_visible


def exactness_residual(op: RGOperator) -> float:
    """max over v of |sum_h exp(T(v,h)) - 1|."""
    row = logsumexp(op.log_weight, axis=1)
    return float(np.max(np.abs(np.exp(row) - 1.0)))


def write_flow_csv(path, flow: np.ndarray, closed_form: np.ndarray | None = None) -> None:
    """CSV export of a coupling flow: step,J (plus the closed form if given)."""
    with open(path, "w") as f:
        if closed_form is None:
            f.write("step,J\n")
            for k, j in enumerate(flow):
                f.write(f"{k},{j!r}\n")
        else:
            f.write("step,J,J_closed_form\n")
            for k, (j, jc) in enumerate(zip(flow, closed_form)):
                f.write(f"{k},{j!r},{jc!r}\n")
