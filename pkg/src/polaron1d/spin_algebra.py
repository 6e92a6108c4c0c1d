"""Exact spin-sector algebra on a finite grid.

Finite stand-in for the continuum N-electron space: one-particle space is
point evaluation on n_sites grid points, so the full space is arrays of
shape (n,)*N + (2,)*N  (N site axes, then N spin axes) and permutations
act as exact axis shuffles.  Spatial-only vectors (elements of the
block-antisymmetric or ordered-domain spaces) are arrays of shape (n,)*N.

Conventions fixed here and used by every consumer:

* Spin index 0 is up (+1/2), 1 is down (-1/2).  The sector with p down
  spins has S^3 eigenvalue M = N/2 - p, and its reference spin pattern
  sigma_M puts the p downs on the first p tensor slots.

* Permutations are tuples pi with pi[k] = image of slot k, acting on
  functions by (S_pi v)(x_1, ..., x_N) = v(x_{pi(1)}, ..., x_{pi(N)}),
  which makes pi -> S_pi a left action (S_pi S_rho = S_{pi rho}).  s_pi
  is the same shuffle on the spin axes.

* The transposition-block group S_T = S_p x S_{N-p} permutes within the
  two blocks; the non-transposition set S_NT collects products of n >= 1
  disjoint cross-block transpositions.  Every full permutation lies in
  S_T * ({id} union S_NT) (the union is exhaustive, not disjoint for
  N >= 4 with both blocks >= 2).

* representative_part is the spin slice at sigma_M: for Phi in the M
  subspace of the antisymmetric space, the slice is automatically
  block-antisymmetric and the reconstruction below is its exact inverse
  (no combinatorial prefactor):

      Phi = Psi (x) eta_{sigma_M}
            + sum_{nu in S_NT} sgn(nu) (S_nu (x) s_nu)(Psi (x) eta_{sigma_M}).
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations, permutations
from math import factorial

import numpy as np

from .geometry import SpinSector

UP, DOWN = 0, 1


@dataclass(frozen=True)
class GridSpace:
    """Strictly increasing site coordinates inside (-L, L)."""

    coords: tuple

    def __post_init__(self):
        c = np.asarray(self.coords, dtype=float)
        if c.size < 2:
            raise ValueError("need at least two grid sites")
        if not np.all(np.diff(c) > 0):
            raise ValueError("site coordinates must be strictly increasing")

    @property
    def n_sites(self) -> int:
        return len(self.coords)

    @classmethod
    def uniform(cls, n_sites: int, L: float = 1.0) -> "GridSpace":
        # interior points of (-L, L), Dirichlet-style
        pts = np.linspace(-L, L, n_sites + 2)[1:-1]
        return cls(tuple(pts))


def perm_sign(pi) -> int:
    """Signature via cycle decomposition."""
    seen = [False] * len(pi)
    sign = 1
    for k in range(len(pi)):
        if seen[k]:
            continue
        length = 0
        j = k
        while not seen[j]:
            seen[j] = True
            j = pi[j]
            length += 1
        if length % 2 == 0:
            sign = -sign
    return sign


def _inverse(pi):
    inv = [0] * len(pi)
    for k, image in enumerate(pi):
        inv[image] = k
    return tuple(inv)


def apply_permutation(pi, v: np.ndarray, N: int, target: str = "both") -> np.ndarray:
    """Axis shuffle realizing S_pi, s_pi, or their tensor product.

    v has N site axes (target "spatial" on spatial-only arrays, or the
    first N axes of a full vector) and, for targets touching spin, N spin
    axes trailing them.
    """
    inv = _inverse(pi)
    ndim = v.ndim
    axes = list(range(ndim))
    if target in ("spatial", "both"):
        axes[:N] = [inv[k] for k in range(N)]
    if target in ("spin", "both"):
        if ndim < 2 * N:
            raise ValueError("vector has no spin axes")
        axes[ndim - N :] = [ndim - N + inv[k] for k in range(N)]
    if target not in ("spatial", "spin", "both"):
        raise ValueError(f"unknown target {target!r}")
    return np.transpose(v, axes)


def antisymmetrize(v: np.ndarray, N: int, block: str = "all", spins: bool | None = None) -> np.ndarray:
    """Projector A_N (block="all") or A_p (x) A_{N-p} (block=(p, "blocks")).

    block is "all" or an integer p.  spins selects whether the shuffle
    also acts on spin axes; by default it does exactly when v carries
    them (full antisymmetrizer on the full space, spatial antisymmetrizer
    on spatial arrays).
    """
    if spins is None:
        spins = v.ndim == 2 * N
    target = "both" if spins else "spatial"
    if block == "all":
        perms = list(permutations(range(N)))
        out = np.zeros_like(np.asarray(v, dtype=np.result_type(v, float)))
        for pi in perms:
            out += perm_sign(pi) * apply_permutation(pi, v, N, target)
        return out / factorial(N)
    p = int(block)
    out = np.zeros_like(np.asarray(v, dtype=np.result_type(v, float)))
    count = 0
    for tau in _block_permutations(N, p):
        out += perm_sign(tau) * apply_permutation(tau, v, N, target)
        count += 1
    return out / count


def _block_permutations(N: int, p: int):
    """All of S_p x S_{N-p} as permutations of range(N)."""
    for a in permutations(range(p)):
        for b in permutations(range(p, N)):
            yield tuple(a) + tuple(b)


def nontransposition_set(N: int, p: int):
    """S_NT: products of n >= 1 disjoint cross-block transpositions.

    The n left slots and n right slots are paired in increasing order,
    which picks exactly one representative of each S_T coset: together
    with the identity these are C(N, p) permutations, one per pattern of
    down spins.  Yields (pi, sign) with sign = (-1)^n.
    """
    q = N - p
    for n in range(1, min(p, q) + 1):
        for left in combinations(range(p), n):
            for right in combinations(range(p, N), n):
                pi = list(range(N))
                for i, j in zip(left, right):
                    pi[i], pi[j] = pi[j], pi[i]
                yield tuple(pi), (-1) ** n


def sigma_m_pattern(sector: SpinSector) -> tuple:
    """Reference spin pattern: p downs then N-p ups."""
    return (DOWN,) * sector.p + (UP,) * (sector.N - sector.p)


def s3_apply(v: np.ndarray, N: int) -> np.ndarray:
    """Total S^3 on a full vector: eigenbasis is the spin patterns."""
    out = np.zeros_like(np.asarray(v, dtype=np.result_type(v, float)))
    for idx in np.ndindex(*(2,) * N):
        m = sum(0.5 if s == UP else -0.5 for s in idx)
        out[(Ellipsis,) + idx] = m * v[(Ellipsis,) + idx]
    return out


def representative_part(phi: np.ndarray, sector: SpinSector, tol: float = 1e-10) -> np.ndarray:
    """Spin slice at the reference pattern sigma_M, for phi in the M subspace."""
    N = sector.N
    if phi.ndim != 2 * N:
        raise ValueError("expected a full vector with N site and N spin axes")
    m_val = float(sector.M)
    resid = np.linalg.norm(s3_apply(phi, N) - m_val * phi)
    norm = np.linalg.norm(phi)
    if norm > 0 and resid > tol * max(1.0, norm):
        raise ValueError(f"phi is not an S^3 = {m_val} eigenvector (residual {resid:.2e})")
    return phi[(Ellipsis,) + sigma_m_pattern(sector)].copy()


def reconstruct_from_representative(psi: np.ndarray, sector: SpinSector, tol: float = 1e-10) -> np.ndarray:
    """Assemble the antisymmetric M-sector vector with representative psi."""
    N, p = sector.N, sector.p
    if psi.ndim != N:
        raise ValueError("expected a spatial array with N site axes")
    resid = np.linalg.norm(antisymmetrize(psi, N, block=p, spins=False) - psi)
    if resid > tol * max(1.0, np.linalg.norm(psi)):
        raise ValueError("psi is not block-antisymmetric")
    n = psi.shape[0]
    phi = np.zeros(psi.shape + (2,) * N, dtype=psi.dtype)
    phi[(Ellipsis,) + sigma_m_pattern(sector)] = psi
    out = phi.copy()
    for nu, sign in nontransposition_set(N, p):
        out += sign * apply_permutation(nu, phi, N, target="both")
    return out


def extend_iota_p(psi: np.ndarray, sector: SpinSector, grid: GridSpace, tol: float = 1e-12) -> np.ndarray:
    """Signed block-symmetrization of a vector supported on ordered tuples.

    ||iota_p psi||^2 = p! (N-p)! ||psi||^2 since the block orbits of the
    ordered support are disjoint.
    """
    N, p = sector.N, sector.p
    if psi.ndim != N:
        raise ValueError("expected a spatial array with N site axes")
    mask = ordered_support_mask(N, p, grid.n_sites)
    off = np.linalg.norm(psi[~mask])
    if off > tol * max(1.0, np.linalg.norm(psi)):
        raise ValueError("psi has support off the ordered tuples")
    out = np.zeros_like(np.asarray(psi, dtype=np.result_type(psi, float)))
    for tau in _block_permutations(N, p):
        out += perm_sign(tau) * apply_permutation(tau, psi, N, target="spatial")
    return out


def ordered_support_mask(N: int, p: int, n_sites: int) -> np.ndarray:
    """Boolean mask of grid tuples with both blocks strictly increasing."""
    idx = np.indices((n_sites,) * N)
    mask = np.ones((n_sites,) * N, dtype=bool)
    for a in range(p - 1):
        mask &= idx[a] < idx[a + 1]
    for a in range(p, N - 1):
        mask &= idx[a] < idx[a + 1]
    return mask


def restrict_to_ordered(psi: np.ndarray, sector: SpinSector) -> np.ndarray:
    """Zero out everything off the ordered tuples."""
    mask = ordered_support_mask(sector.N, sector.p, psi.shape[0])
    return np.where(mask, psi, 0.0)


_PAULI = {
    "S1": 0.5 * np.array([[0.0, 1.0], [1.0, 0.0]]),
    "S2": 0.5 * np.array([[0, -1j], [1j, 0]]),
    "S3": 0.5 * np.array([[1.0, 0.0], [0.0, -1.0]]),
    "S+": np.array([[0.0, 1.0], [0.0, 0.0]]),
    "S-": np.array([[0.0, 0.0], [1.0, 0.0]]),
}


def spin_operator(which: str, N: int) -> np.ndarray:
    """Dense total-spin operator on (C^2)^{(x) N}; basis index 0 = up.

    S2_total is assembled as S3^2 + (S+ S- + S- S+)/2 so it stays real.
    """
    if which == "S2_total":
        s3 = spin_operator("S3", N)
        sp = spin_operator("S+", N)
        sm = spin_operator("S-", N)
        return s3 @ s3 + 0.5 * (sp @ sm + sm @ sp)
    if which not in _PAULI:
        raise ValueError(f"unknown spin operator {which!r}")
    single = _PAULI[which]
    dim = 2**N
    out = np.zeros((dim, dim), dtype=single.dtype)
    eye = np.eye(2, dtype=single.dtype)
    for j in range(N):
        term = np.eye(1, dtype=single.dtype)
        for k in range(N):
            term = np.kron(term, single if k == j else eye)
        out += term
    return out


def apply_spin_operator(mat: np.ndarray, v: np.ndarray, N: int) -> np.ndarray:
    """Apply a 2^N x 2^N spin operator to the trailing spin axes of v."""
    site_shape = v.shape[:N]
    flat = v.reshape(site_shape + (2**N,))
    out = flat @ mat.T
    return out.reshape(v.shape)


def raising_lowering_on_representative(phi: np.ndarray, sector: SpinSector, direction: str):
    """Both sides of the representative-part recursion for S^(+-).

    Returns (lhs, rhs): lhs is the representative of S^(+-) phi in the
    shifted sector, rhs the transposition sum acting on the original
    representative.  direction "+" raises M (p -> p-1), "-" lowers it.
    """
    N, p = sector.N, sector.p
    if direction == "+":
        if p == 0:
            raise ValueError("no sector above M = N/2")
        target = SpinSector(N, p - 1)
        op = spin_operator("S+", N)
    elif direction == "-":
        if p == N:
            raise ValueError("no sector below M = -N/2")
        target = SpinSector(N, p + 1)
        op = spin_operator("S-", N)
    else:
        raise ValueError("direction must be '+' or '-'")

    lhs = representative_part(apply_spin_operator(op, phi, N), target)

    rep = representative_part(phi, sector)
    if direction == "+":
        rhs = rep.copy()
        swaps = [_transposition(N, p - 1, j) for j in range(p, N)]
    else:
        rhs = rep.copy()
        swaps = [_transposition(N, j, p) for j in range(p)]
    for tau in swaps:
        rhs = rhs - apply_permutation(tau, rep, N, target="spatial")
    return lhs, rhs


def _transposition(N: int, a: int, b: int) -> tuple:
    pi = list(range(N))
    pi[a], pi[b] = pi[b], pi[a]
    return tuple(pi)


def vandermonde_state(sector: SpinSector, grid: GridSpace) -> np.ndarray:
    """Highest-weight sector state: block Vandermonde representative.

    Returns the full reconstructed vector; its representative part is
    prod_{i<j<=p} (x_j - x_i) * prod_{p<i<j} (x_j - x_i) on the grid
    coordinates, strictly positive on strictly ordered tuples.
    """
    N, p = sector.N, sector.p
    if grid.n_sites < max(p, N - p):
        raise ValueError("grid too small for the block Vandermonde factors")
    coords = np.asarray(grid.coords)
    psi = np.ones((grid.n_sites,) * N)
    xs = [coords.reshape((1,) * k + (-1,) + (1,) * (N - 1 - k)) for k in range(N)]
    for i in range(p):
        for j in range(i + 1, p):
            psi = psi * (xs[j] - xs[i])
    for i in range(p, N):
        for j in range(i + 1, N):
            psi = psi * (xs[j] - xs[i])
    return reconstruct_from_representative(psi, sector)


def _spatial_perm_indices(pi, N: int, n: int) -> np.ndarray:
    """Flattened index map realizing S_pi on vectorized spatial arrays."""
    src = np.arange(n**N).reshape((n,) * N)
    return apply_permutation(pi, src, N, target="spatial").reshape(-1)


def check_permutation_invariant(K: np.ndarray, N: int, n: int, tol: float = 1e-10):
    """Raise unless the dense spatial operator commutes with every S_pi."""
    for pi in permutations(range(N)):
        idx = _spatial_perm_indices(pi, N, n)
        if not np.allclose(K[np.ix_(idx, idx)], K, atol=tol * max(1.0, np.abs(K).max())):
            raise ValueError(f"operator is not invariant under permutation {pi}")


def _ordered_tuple_indices(N: int, p: int, n: int) -> np.ndarray:
    mask = ordered_support_mask(N, p, n)
    return np.flatnonzero(mask.reshape(-1))


def _min_eig_on_subspace(K_full: np.ndarray, basis: np.ndarray) -> float:
    """Rayleigh-Ritz minimum of K_full over the column span of basis."""
    # orthonormalize the (heavily dependent) spanning set via SVD
    u, s, _ = np.linalg.svd(basis, full_matrices=False)
    q = u[:, s > 1e-10 * s.max()]
    comp = q.conj().T @ K_full @ q
    return float(np.linalg.eigvalsh(0.5 * (comp + comp.conj().T))[0])


def sector_ground_energy(K: np.ndarray, sector: SpinSector, grid: GridSpace) -> dict:
    """Ground energy of a permutation-invariant spatial operator, three ways.

    K is dense on the flattened site tensor (n^N x n^N) and must commute
    with all S_pi.  Returns the minimum eigenvalue computed on (a) the
    full antisymmetric M subspace (spin degrees carried explicitly),
    (b) the block-antisymmetric spatial subspace, (c) the compression to
    ordered tuples; the three agree to eigensolver precision.
    """
    N, p = sector.N, sector.p
    n = grid.n_sites
    if K.shape != (n**N, n**N):
        raise ValueError("K must be dense on the flattened site tensor")
    check_permutation_invariant(K, N, n)

    # (b) block-antisymmetric spatial subspace
    dim = n**N
    proj_b = np.zeros((dim, dim))
    count = 0
    for tau in _block_permutations(N, p):
        idx = _spatial_perm_indices(tau, N, n)
        proj_b[np.arange(dim), idx] += perm_sign(tau)
        count += 1
    proj_b /= count
    e_blocks = _min_eig_on_subspace(K, proj_b)

    # (c) ordered-tuple compression K^{(p)}[a, b] = sum_tau sgn(tau) K[a, tau b]
    ordered = _ordered_tuple_indices(N, p, n)
    comp = np.zeros((ordered.size, ordered.size))
    for tau in _block_permutations(N, p):
        idx = _spatial_perm_indices(tau, N, n)
        comp += perm_sign(tau) * K[np.ix_(ordered, idx[ordered])]
    e_ordered = float(np.linalg.eigvalsh(0.5 * (comp + comp.T))[0])

    # (a) full M subspace with explicit spins: project spin-pattern blocks
    full_dim = dim * 2**N
    K_full = np.kron(K, np.eye(2**N))
    proj = np.zeros((full_dim, full_dim))
    for pi in permutations(range(N)):
        s_idx = _spatial_perm_indices(pi, N, n)
        p_idx = _spatial_perm_indices(pi, N, 2)  # same shuffle on spin tensor
        joint = (s_idx[:, None] * 2**N + p_idx[None, :]).reshape(-1)
        proj[np.arange(full_dim), joint] += perm_sign(pi)
    proj /= factorial(N)
    # restrict to the S^3 = M spin patterns
    patt_m = np.array(
        [sum(0.5 if s == UP else -0.5 for s in idx) for idx in np.ndindex(*(2,) * N)]
    )
    sel = np.isclose(np.tile(patt_m, dim), float(sector.M))
    basis = proj[:, sel]
    e_full = _min_eig_on_subspace(K_full, basis)

    return {"full_M": e_full, "block_antisym": e_blocks, "ordered": e_ordered}
