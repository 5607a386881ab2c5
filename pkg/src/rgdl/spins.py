"""Lattices, spin configurations, and exact thermodynamics of small spin systems.

Spin systems live on a 1D chain or 2D square lattice and carry binary spins,
either ±1 or {0,1}.  A Hamiltonian is a list of interaction terms (site-index
set, coupling) of arbitrary order,

    H(v) = -sum_t K_t * prod_{i in t} v_i,

so singleton sets are fields, pairs are the usual couplings, and the empty set
is an additive constant.  Temperature is fixed to 1 and absorbed into the
couplings.

Configuration enumeration convention used throughout the package: config index
``i`` encodes site ``k`` in bit ``k`` (LSB first), with bit 1 meaning the "up"
value (+1 in the ±1 domain, 1 in the {0,1} domain).

Exact sums over all 2^N configurations are the ground-truth oracle for every
stochastic or coarse-grained computation in this package; they are capped at
``ENUMERATION_LIMIT`` sites and accumulated in log space so large couplings do
not overflow.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from functools import lru_cache

import numpy as np

from .errors import CapacityError, DomainError, ValidationError

ENUMERATION_LIMIT = 24

_CHUNK_BITS = 20  # partition sums stream over index chunks of 2^20


class SpinDomain(Enum):
    PLUS_MINUS_ONE = "pm1"
    ZERO_ONE = "01"

    @property
    def low(self) -> int:
        return -1 if self is SpinDomain.PLUS_MINUS_ONE else 0

    @property
    def high(self) -> int:
        return 1

    def contains(self, values: np.ndarray) -> bool:
        v = np.asarray(values)
        return bool(np.all((v == self.low) | (v == self.high)))

    def from_bits(self, bits: np.ndarray) -> np.ndarray:
        b = np.asarray(bits, dtype=np.int8)
        if self is SpinDomain.PLUS_MINUS_ONE:
            return (2 * b - 1).astype(np.int8)
        return b

    def to_bits(self, values: np.ndarray) -> np.ndarray:
        v = np.asarray(values)
        return (v == self.high).astype(np.uint8)


def convert_domain(values: np.ndarray, src: SpinDomain, dst: SpinDomain) -> np.ndarray:
    """Bijective relabeling between spin domains: -1 <-> 0, +1 <-> 1."""
    return dst.from_bits(src.to_bits(values))


class LatticeKind(Enum):
    CHAIN_1D = "1d"
    SQUARE_2D = "2d"


class Boundary(Enum):
    PERIODIC = "periodic"
    FREE = "free"


@dataclass(frozen=True)
class Lattice:
    """A 1D chain or 2D square lattice with periodic or free boundaries.

    ``extents`` is (N,) for a chain and (rows, cols) for a square lattice;
    2D sites are numbered row-major.  Bond lists enumerate each interaction
    once in the (right, down) convention, so a periodic lattice of extent 2
    correctly carries two parallel bonds around the short cycle.
    """

    kind: LatticeKind
    extents: tuple[int, ...]
    boundary: Boundary = Boundary.PERIODIC

    def __post_init__(self):
        want = 1 if self.kind is LatticeKind.CHAIN_1D else 2
        if len(self.extents) != want:
            raise ValidationError(
                f"{self.kind.value} lattice needs {want} extent(s), got {self.extents}"
            )
        if any(int(e) != e or e < 1 for e in self.extents):
            raise ValidationError(f"extents must be positive integers: {self.extents}")
        if self.boundary is Boundary.PERIODIC and any(e < 2 for e in self.extents):
            raise ValidationError("periodic boundaries need extent >= 2")
        object.__setattr__(self, "extents", tuple(int(e) for e in self.extents))

    @property
    def n_sites(self) -> int:
        return int(np.prod(self.extents))

    def site(self, *coords: int) -> int:
        if self.kind is LatticeKind.CHAIN_1D:
            return coords[0]
        return coords[0] * self.extents[1] + coords[1]

    def coords(self, site: int) -> tuple[int, ...]:
        if self.kind is LatticeKind.CHAIN_1D:
            return (site,)
        return divmod(site, self.extents[1])

    def bonds(self) -> list[tuple[int, int]]:
        """Nearest-neighbor bonds, each interaction listed exactly once."""
        periodic = self.boundary is Boundary.PERIODIC
        out: list[tuple[int, int]] = []
        if self.kind is LatticeKind.CHAIN_1D:
            n = self.extents[0]
            for i in range(n - 1):
                out.append((i, i + 1))
            if periodic:
                out.append((n - 1, 0))
            return out
        rows, cols = self.extents
        for r in range(rows):
            for c in range(cols):
                s = r * cols + c
                if c + 1 < cols:
                    out.append((s, s + 1))
                elif periodic:
                    out.append((s, r * cols))
                if r + 1 < rows:
                    out.append((s, s + cols))
                elif periodic:
                    out.append((s, c))
        return out

    def neighbors(self) -> list[tuple[int, ...]]:
        """Per-site neighbor tuples (a multiset; symmetric by construction)."""
        nbr: list[list[int]] = [[] for _ in range(self.n_sites)]
        for a, b in self.bonds():
            nbr[a].append(b)
            nbr[b].append(a)
        return [tuple(sorted(x)) for x in nbr]


def parse_lattice(spec: str) -> Lattice:
    """Parse a lattice descriptor like ``1d:16:free`` or ``2d:16x16:periodic``.

    The boundary part is optional and defaults to periodic.
    """
    parts = spec.lower().split(":")
    if len(parts) not in (2, 3):
        raise ValidationError(f"bad lattice spec {spec!r}")
    kind_s, ext_s = parts[0], parts[1]
    boundary = Boundary.PERIODIC
    if len(parts) == 3:
        try:
            boundary = Boundary(parts[2])
        except ValueError:
            raise ValidationError(f"bad boundary {parts[2]!r} in {spec!r}") from None
    try:
        if kind_s == "1d":
            return Lattice(LatticeKind.CHAIN_1D, (int(ext_s),), boundary)
        if kind_s == "2d":
            a, _, b = ext_s.partition("x")
            return Lattice(LatticeKind.SQUARE_2D, (int(a), int(b)), boundary)
    except (ValueError, TypeError):
        raise ValidationError(f"bad lattice spec {spec!r}") from None
    raise ValidationError(f"unknown lattice kind {kind_s!r} in {spec!r}")


def format_lattice(lat: Lattice) -> str:
    ext = "x".join(str(e) for e in lat.extents)
    return f"{lat.kind.value}:{ext}:{lat.boundary.value}"


def validate_config(values: np.ndarray, n_sites: int, domain: SpinDomain) -> np.ndarray:
    v = np.asarray(values)
    if v.shape != (n_sites,):
        raise ValidationError(f"config shape {v.shape} != ({n_sites},)")
    if not domain.contains(v):
        raise ValidationError(f"config values outside domain {domain.value}")
    return v


@lru_cache(maxsize=8)
def _all_configs_cached(n: int, domain: SpinDomain) -> np.ndarray:
    idx = np.arange(1 << n, dtype=np.int64)
    bits = (idx[:, None] >> np.arange(n)[None, :]) & 1
    cfg = domain.from_bits(bits)
    cfg.setflags(write=False)
    return cfg


def all_configs(n: int, domain: SpinDomain = SpinDomain.PLUS_MINUS_ONE) -> np.ndarray:
    """All 2^n configurations as a (2^n, n) int8 array, row i = config index i."""
    if n > ENUMERATION_LIMIT:
        raise CapacityError(f"{n} sites exceeds enumeration limit {ENUMERATION_LIMIT}")
    return _all_configs_cached(n, domain)


def config_index(values: np.ndarray, domain: SpinDomain = SpinDomain.PLUS_MINUS_ONE) -> int:
    """Inverse of the enumeration: map a configuration to its index."""
    bits = domain.to_bits(values).astype(np.int64)
    return int(np.sum(bits << np.arange(len(bits))))


@dataclass(frozen=True)
class Hamiltonian:
    """Interaction terms of arbitrary order: H(v) = -sum_t K_t prod_{i in t} v_i.

    Terms are (site-index tuple, coupling) pairs; an empty site tuple is an
    additive constant -K.  Site tuples are stored sorted and may not repeat an
    index; distinct terms over the same site set simply add.
    """

    n_sites: int
    terms: tuple[tuple[tuple[int, ...], float], ...]

    def __post_init__(self):
        if self.n_sites < 0:
            raise ValidationError("n_sites must be nonnegative")
        canon = []
        for sites, coupling in self.terms:
            sites = tuple(int(s) for s in sites)
            if len(set(sites)) != len(sites):
                raise ValidationError(f"duplicate site index in term {sites}")
            if sites and (min(sites) < 0 or max(sites) >= self.n_sites):
                raise DomainError(f"site index out of range in term {sites}")
            k = float(coupling)
            if not math.isfinite(k):
                raise ValidationError(f"non-finite coupling {coupling} in term {sites}")
            canon.append((tuple(sorted(sites)), k))
        object.__setattr__(self, "terms", tuple(canon))

    @classmethod
    def nearest_neighbor(cls, lattice: Lattice, coupling: float) -> "Hamiltonian":
        """Uniform pair coupling on every lattice bond: H = -J sum_<ij> v_i v_j."""
        return cls(lattice.n_sites, tuple((b, coupling) for b in lattice.bonds()))

    def energy(self, values: np.ndarray, domain: SpinDomain = SpinDomain.PLUS_MINUS_ONE) -> float:
        v = validate_config(values, self.n_sites, domain).astype(np.float64)
        total = 0.0
        for sites, k in self.terms:
            total -= k * np.prod(v[list(sites)]) if sites else k
        return float(total)

    def _masks(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        masks = np.array(
            [sum(1 << s for s in sites) for sites, _ in self.terms], dtype=np.int64
        )
        orders = np.array([len(sites) for sites, _ in self.terms], dtype=np.int64)
        ks = np.array([k for _, k in self.terms], dtype=np.float64)
        return masks, orders, ks

    def energies_for_indices(
        self, idx: np.ndarray, domain: SpinDomain = SpinDomain.PLUS_MINUS_ONE
    ) -> np.ndarray:
        """Vectorized H over configuration indices, via per-term bit masks."""
        idx = np.asarray(idx, dtype=np.int64)
        masks, orders, ks = self._masks()
        out = np.zeros(idx.shape, dtype=np.float64)
        for mask, order, k in zip(masks, orders, ks):
            if domain is SpinDomain.PLUS_MINUS_ONE:
                pc = np.bitwise_count(idx & mask).astype(np.int64)
                prod = 1.0 - 2.0 * ((order - pc) & 1)
            else:
                prod = ((idx & mask) == mask).astype(np.float64)
            out -= k * prod
        return out

    def energies_all(self, domain: SpinDomain = SpinDomain.PLUS_MINUS_ONE) -> np.ndarray:
        """H over all 2^N configurations in enumeration order."""
        if self.n_sites > ENUMERATION_LIMIT:
            raise CapacityError(
                f"{self.n_sites} sites exceeds enumeration limit {ENUMERATION_LIMIT}"
            )
        return self.energies_for_indices(np.arange(1 << self.n_sites, dtype=np.int64), domain)


def exact_log_partition(
    h: Hamiltonian,
    domain: SpinDomain = SpinDomain.PLUS_MINUS_ONE,
    limit: int = ENUMERATION_LIMIT,
) -> float:
    """log Z = log sum_v exp(-H(v)) by streaming enumeration over all 2^N configs."""
    n = h.n_sites
    if n > limit:
        raise CapacityError(f"{n} sites exceeds enumeration limit {limit}")
    from scipy.special import logsumexp

    total = 1 << n
    step = 1 << _CHUNK_BITS
    parts = []
    for start in range(0, total, step):
        idx = np.arange(start, min(start + step, total), dtype=np.int64)
        parts.append(logsumexp(-h.energies_for_indices(idx, domain)))
    return float(logsumexp(parts))


def exact_partition(
    h: Hamiltonian,
    domain: SpinDomain = SpinDomain.PLUS_MINUS_ONE,
    limit: int = ENUMERATION_LIMIT,
) -> float:
    """Z = sum over all 2^N configurations of exp(-H); strictly positive."""
    return float(np.exp(exact_log_partition(h, domain, limit)))


def exact_free_energy(
    h: Hamiltonian,
    domain: SpinDomain = SpinDomain.PLUS_MINUS_ONE,
    limit: int = ENUMERATION_LIMIT,
) -> float:
    """F = -log Z, computed in log space so it never overflows."""
    return -exact_log_partition(h, domain, limit)


def boltzmann_distribution(
    h: Hamiltonian,
    domain: SpinDomain = SpinDomain.PLUS_MINUS_ONE,
    limit: int = ENUMERATION_LIMIT,
) -> np.ndarray:
    """exp(-H)/Z over all 2^N configurations in enumeration order."""
    e = h.energies_all(domain) if h.n_sites <= limit else None
    if e is None:
        raise CapacityError(f"{h.n_sites} sites exceeds enumeration limit {limit}")
    x = -e - np.max(-e)
    w = np.exp(x)
    return w / w.sum()


def _log_2cosh(x: float) -> float:
    return abs(x) + math.log1p(math.exp(-2.0 * abs(x)))


def transfer_matrix_log_partition_1d(coupling: float, lattice: Lattice) -> float:
    """log Z of a nearest-neighbor chain from the 2x2 transfer matrix.

    The eigenvalues are 2cosh(J) and 2sinh(J); log-space evaluation supports
    chains up to ~10^6 sites.  Independent of the enumeration path, so the
    two serve as mutual oracles on small systems.
    """
    if lattice.kind is not LatticeKind.CHAIN_1D:
        raise DomainError("transfer matrix requires a 1D chain lattice")
    n = lattice.n_sites
    l2c = _log_2cosh(coupling)
    if lattice.boundary is Boundary.PERIODIC:
        # Z = lam_+^N + lam_-^N = (2cosh J)^N (1 + tanh(J)^N)
        return n * l2c + math.log1p(math.tanh(coupling) ** n)
    return math.log(2.0) + (n - 1) * l2c


def transfer_matrix_partition_1d(coupling: float, lattice: Lattice) -> float:
    return math.exp(transfer_matrix_log_partition_1d(coupling, lattice))


def hamiltonian_from_energies(
    energies: np.ndarray, n_sites: int, tol: float = 0.0
) -> Hamiltonian:
    """Exact interaction expansion of an arbitrary energy table (±1 domain).

    Any function on {±1}^N decomposes uniquely over the orthogonal product
    basis chi_S(v) = prod_{i in S} v_i, giving couplings
    K_S = -2^{-N} sum_v H(v) chi_S(v).  Terms with |K| <= tol are dropped.
    The subset S is read off the bits of the coefficient index, so a fast
    Walsh-Hadamard transform computes all 2^N couplings at once.
    """
    e = np.asarray(energies, dtype=np.float64).copy()
    if e.shape != (1 << n_sites,):
        raise ValidationError(f"energy table shape {e.shape} != ({1 << n_sites},)")
    # FWHT with kernel (-1)^{popcount(m & i)}
    for bit in range(n_sites):
        h = 1 << bit
        for start in range(0, 1 << n_sites, h << 1):
            a = e[start : start + h]
            b = e[start + h : start + (h << 1)]
            a[:], b[:] = a + b, a - b
    coeffs = e / (1 << n_sites)
    terms = []
    for mask in range(1 << n_sites):
        sites = tuple(k for k in range(n_sites) if (mask >> k) & 1)
        # chi_S(i) = (-1)^{|S|} * (-1)^{popcount(i & mask)} under bit->spin 2b-1
        k_s = -coeffs[mask] * (1.0 if len(sites) % 2 == 0 else -1.0)
        if abs(k_s) > tol:
            terms.append((sites, k_s))
    return Hamiltonian(n_sites, tuple(terms))


def parse_hamiltonian(text: str, n_sites: int | None = None) -> Hamiltonian:
    """Parse the line-oriented term format ``K <coupling> <idx...>``.

    Lines starting with ``#`` are comments; a ``# sites: N`` comment fixes the
    site count (otherwise it is inferred as max index + 1).
    """
    terms = []
    max_idx = -1
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            body = line[1:].strip()
            if body.lower().startswith("sites:") and n_sites is None:
                n_sites = int(body.split(":", 1)[1])
            continue
        parts = line.split()
        if parts[0] != "K" or len(parts) < 2:
            raise ValidationError(f"line {lineno}: expected 'K <coupling> <idx...>'")
        try:
            coupling = float(parts[1])
            sites = tuple(int(p) for p in parts[2:])
        except ValueError:
            raise ValidationError(f"line {lineno}: bad number in {line!r}") from None
        terms.append((sites, coupling))
        if sites:
            max_idx = max(max_idx, max(sites))
    if n_sites is None:
        n_sites = max_idx + 1
    return Hamiltonian(n_sites, tuple(terms))


def format_hamiltonian(h: Hamiltonian) -> str:
    lines = [f"# sites: {h.n_sites}"]
    for sites, k in h.terms:
        lines.append("K " + repr(k) + ("" if not sites else " " + " ".join(map(str, sites))))
    return "\n".join(lines) + "\n"
