"""Truncated diagonalization of the cutoff Fröhlich Hamiltonian.

Electronic basis: Dirichlet sine modes on (-L, L),

    psi_n(x) = L^{-1/2} sin(n pi (x + L) / (2L)),   e_n = (n pi / (2L))^2 / 2,

so the free N = 1 ground state is pi^2/(8 L^2).  Matrix elements of
e^{ikx} have the closed form (u = (x+L)/(2L), c = 2kL)

    <m| e^{ikx} |n> = e^{-ikL} [ I(m-n, c) - I(m+n, c) ],
    I(a, c) = (J(c + a pi) + J(c - a pi)) / 2,
    J(b) = int_0^1 e^{ibu} du = e^{ib/2} sinc(b / (2 pi)),

numerically clean at b = 0 through sinc.

Phonons: the interaction lattice is k = 2 pi m / L (the lattice on which
the pair kernel's mode series lives), one vertex factor sqrt(g_L)
e^{-eps k^2} per mode, so integrating the phonons back out reproduces
exactly the w_eps of the path-integral action: the Monte Carlo estimator
and this Hamiltonian are cross-checks of the same physics.  The +-k
pairs are combined into cosine/sine quadrature modes

    c_k = (a_k + a_{-k})/sqrt(2),   s_k = (a_k - a_{-k})/(i sqrt(2)),

under which the coupling becomes sqrt(2 g_L) e^{-eps k^2}
[cos(kx)(c_k + c_k*) - sin(kx)(s_k + s_k*)] and every matrix in sight is
real symmetric.  The phonon space carries a total-occupation cap
(`fock.FockSpace` enumeration); ladder matrices are assembled sparsely
here because the quadrature dimensions outgrow dense storage.

For N = 2 the spin sector enters through the spatial exchange symmetry:
S = 0 pairs with symmetric orbitals, S = 1 with antisymmetric ones.
Lifting one- and two-body operators to the (anti)symmetrized pair basis
goes through the explicit isometry into the tensor product, which keeps
every matrix element manifestly correct at these tiny dimensions.

Ground energies come with residual certificates ||Hv - Ev|| measured
against the infinity norm of H (an upper bound for the spectral norm of
a symmetric matrix).  eps = 0 is never diagonalized: values there are
produced by `richardson_extrapolate` over an eps ladder and labeled as
extrapolations.

`ratio_energy_oracle` evaluates -(1/delta) log of the semigroup ratio
<u| e^{-(beta+delta) H} |u> / <u| e^{-beta H} |u> with u = (uniform
function) x (vacuum), i.e. the same finite-horizon functional the ratio
Monte Carlo estimator targets, so the two can be compared without any
beta -> infinity argument.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
import scipy.sparse
import scipy.sparse.linalg

from .fock import FockSpace
from .kernels import ModelParams

SECTOR_LABELS = ("none", "symmetric", "antisymmetric")


class InvariantViolation(RuntimeError):
    """A named numerical invariant failed; carries the invariant's name."""

    def __init__(self, name: str, message: str):
        super().__init__(f"{name}: {message}")
        self.name = name


@dataclass(frozen=True)
class DiscretizationSpec:
    """Truncation sizes: sine modes, phonon momentum index cap, occupation cap."""

    n_el_basis: int
    k_max: int
    n_ph_max: int
    epsilon: float

    def __post_init__(self):
        if self.n_el_basis < 1:
            raise ValueError(f"n_el_basis must be >= 1, got {self.n_el_basis}")
        if self.k_max < 0:
            raise ValueError(f"k_max must be >= 0, got {self.k_max}")
        if self.n_ph_max < 0:
            raise ValueError(f"n_ph_max must be >= 0, got {self.n_ph_max}")
        if self.epsilon <= 0:
            raise ValueError("diagonalization runs at strictly positive epsilon; "
                             f"got {self.epsilon}")


@dataclass(frozen=True)
class SpectrumResult:
    """Certified lowest eigenpairs of a truncated Hamiltonian."""

    eigenvalues: np.ndarray
    ground_vector: np.ndarray
    residuals: np.ndarray
    gap: float
    norm_scale: float
    provenance: dict = field(default_factory=dict)

    @property
    def ground_energy(self) -> float:
        return float(self.eigenvalues[0])


def single_particle_energies(n_el_basis: int, L: float = 1.0) -> np.ndarray:
    n = np.arange(1, n_el_basis + 1)
    return 0.5 * (n * np.pi / (2 * L)) ** 2


def sine_exp_elements(k: float, n_el_basis: int, L: float = 1.0) -> np.ndarray:
    """Closed-form <m| e^{ikx} |n> in the Dirichlet sine basis."""

    def J(b):
        return np.exp(0.5j * b) * np.sinc(b / (2 * np.pi))

    m = np.arange(1, n_el_basis + 1)
    c = 2 * k * L
    diff = m[:, None] - m[None, :]
    summ = m[:, None] + m[None, :]

    def I(a):
        return 0.5 * (J(c + a * np.pi) + J(c - a * np.pi))

    return np.exp(-1j * k * L) * (I(diff) - I(summ))


def _legendre_nodes(n_quad: int, L: float):
    x, w = np.polynomial.legendre.leggauss(n_quad)
    return L * x, L * w


def _sine_values(x: np.ndarray, n_el_basis: int, L: float) -> np.ndarray:
    n = np.arange(1, n_el_basis + 1)
    return np.sin(n[:, None] * np.pi * (x[None, :] + L) / (2 * L)) / np.sqrt(L)


def one_body_matrix(V, n_el_basis: int, L: float = 1.0, n_quad: int = 400):
    """Gauss-Legendre quadrature of <m| V |n>; exact for sane V at this order."""
    x, w = _legendre_nodes(n_quad, L)
    psi = _sine_values(x, n_el_basis, L)
    return (psi * (V(x) * w)[None, :]) @ psi.T


def pair_matrix(W, n_el_basis: int, L: float = 1.0, n_quad: int = 200):
    """<(m,n)| W(x - y) |(m',n')> on the full product basis, index (mn, m'n')."""
    x, w = _legendre_nodes(n_quad, L)
    psi = _sine_values(x, n_el_basis, L)
    wmat = W(x[:, None] - x[None, :]) * w[:, None] * w[None, :]
    # T[(m,m'), q] = psi_m(x_q) psi_m'(x_q); result ((mm'), (nn')) then reorder
    T = np.einsum("mq,nq->mnq", psi, psi).reshape(n_el_basis**2, n_quad)
    block = T @ wmat @ T.T
    # block[(m,m'),(n,n')] = int int psi_m psi_m'(x) W psi_n psi_n'(y);
    # want rows (m,n) columns (m',n')
    b4 = block.reshape(n_el_basis, n_el_basis, n_el_basis, n_el_basis)
    return b4.transpose(0, 2, 1, 3).reshape(n_el_basis**2, n_el_basis**2)


def pair_basis_isometry(n_el_basis: int, symmetry: str) -> np.ndarray:
    """Isometry from the (anti)symmetrized pair basis into the product basis."""
    n = n_el_basis
    cols = []
    if symmetry == "symmetric":
        for a in range(n):
            for b in range(a, n):
                v = np.zeros(n * n)
                if a == b:
                    v[a * n + a] = 1.0
                else:
                    v[a * n + b] = v[b * n + a] = 1 / np.sqrt(2)
                cols.append(v)
    elif symmetry == "antisymmetric":
        for a in range(n):
            for b in range(a + 1, n):
                v = np.zeros(n * n)
                v[a * n + b] = 1 / np.sqrt(2)
                v[b * n + a] = -1 / np.sqrt(2)
                cols.append(v)
    else:
        raise ValueError(f"symmetry must be 'symmetric' or 'antisymmetric', "
                         f"got {symmetry!r}")
    return np.array(cols).T


def _check_sector(N: int, symmetry: str):
    if N == 1:
        if symmetry != "none":
            raise ValueError("N = 1 has no exchange symmetry; use 'none'")
    elif N == 2:
        if symmetry not in ("symmetric", "antisymmetric"):
            raise ValueError("N = 2 needs 'symmetric' (S=0) or 'antisymmetric' (S=1)")
    else:
        raise ValueError(f"diagonalization supports N in {{1, 2}}, got {N}")


def build_H_el(N: int, symmetry: str, pot, spec: DiscretizationSpec,
               L: float = 1.0) -> np.ndarray:
    """Electronic Hamiltonian (dense, real symmetric) in the sector basis."""
    _check_sector(N, symmetry)
    n = spec.n_el_basis
    e = single_particle_energies(n, L)
    v1 = one_body_matrix(pot.V, n, L) if (pot is not None and pot.V is not None) \
        else np.zeros((n, n))
    h1 = np.diag(e) + v1
    if N == 1:
        return h1
    T = pair_basis_isometry(n, symmetry)
    eye = np.eye(n)
    H2 = np.kron(h1, eye) + np.kron(eye, h1)
    if pot is not None and pot.W is not None:
        H2 = H2 + pair_matrix(pot.W, n, L)
    return T.T @ H2 @ T


def _interaction_blocks(N: int, symmetry: str, spec: DiscretizationSpec,
                        params: ModelParams):
    """(mode label, coupling, electronic matrix) per quadrature mode.

    Labels: 0.0 for the k = 0 mode, +k for cosines, -k for sines, with
    k = 2 pi m / L, m = 1..k_max.
    """
    n = spec.n_el_basis
    L = params.L
    root_g = np.sqrt(params.g_L)
    T = pair_basis_isometry(n, symmetry) if N == 2 else None
    eye = np.eye(n)

    def lift(A):
        if N == 1:
            return A
        return T.T @ (np.kron(A, eye) + np.kron(eye, A)) @ T

    blocks = [(0.0, root_g, lift(eye))]
    for m in range(1, spec.k_max + 1):
        k = 2 * np.pi * m / L
        damp = np.exp(-spec.epsilon * k**2)
        ek = sine_exp_elements(k, n, L)
        cos_m = np.ascontiguousarray(ek.real)
        sin_m = np.ascontiguousarray(ek.imag)
        blocks.append((k, np.sqrt(2) * root_g * damp, lift(cos_m)))
        blocks.append((-k, -np.sqrt(2) * root_g * damp, lift(sin_m)))
    return blocks


def _sparse_lowering(space: FockSpace, pos: int) -> scipy.sparse.csr_matrix:
    rows, cols, vals = [], [], []
    for col, occ in enumerate(space.occupations):
        n_k = occ[pos]
        if n_k > 0:
            lowered = occ[:pos] + (n_k - 1,) + occ[pos + 1:]
            rows.append(space.index[lowered])
            cols.append(col)
            vals.append(np.sqrt(n_k))
    return scipy.sparse.csr_matrix((vals, (rows, cols)),
                                   shape=(space.dim, space.dim))


def build_H_eps(N: int, symmetry: str, pot, params: ModelParams,
                spec: DiscretizationSpec) -> scipy.sparse.csr_matrix:
    """Full cutoff Hamiltonian H_el + N_ph + interaction, real symmetric CSR."""
    _check_sector(N, symmetry)
    blocks = _interaction_blocks(N, symmetry, spec, params)
    labels = tuple(label for label, _, _ in blocks)
    space = FockSpace(modes=labels, cap=spec.n_ph_max)
    h_el = scipy.sparse.csr_matrix(build_H_el(N, symmetry, pot, spec, params.L))
    eye_b = scipy.sparse.identity(space.dim, format="csr")
    eye_e = scipy.sparse.identity(h_el.shape[0], format="csr")
    n_ph = scipy.sparse.diags(space.total_occupation, format="csr")
    H = scipy.sparse.kron(h_el, eye_b) + scipy.sparse.kron(eye_e, n_ph)
    if params.alpha > 0:
        for pos, (_, coupling, el_mat) in enumerate(blocks):
            low = _sparse_lowering(space, pos)
            quad = low + low.T
            H = H + coupling * scipy.sparse.kron(
                scipy.sparse.csr_matrix(el_mat), quad)
    return H.tocsr()


def _inf_norm(H) -> float:
    if scipy.sparse.issparse(H):
        return float(abs(H).sum(axis=1).max())
    return float(np.abs(H).sum(axis=1).max())


def ground(H, m: int = 2, provenance: dict | None = None) -> SpectrumResult:
    """Lowest-m eigenpairs with explicit residual certificates.

    Rejects non-symmetric input; residuals must sit below 1e-8 times the
    infinity norm of H or the result is refused rather than returned.
    """
    dim = H.shape[0]
    scale = max(_inf_norm(H), 1e-300)
    if scipy.sparse.issparse(H):
        asym = abs(H - H.T).max()
    else:
        asym = float(np.max(np.abs(H - H.T)))
    if asym > 1e-12 * scale:
        raise ValueError(f"matrix is not symmetric: defect {asym:.3e} "
                         f"against scale {scale:.3e}")
    m = min(m, dim)
    if dim <= 1500 or m >= dim - 1:
        dense = H.toarray() if scipy.sparse.issparse(H) else np.asarray(H)
        vals, vecs = scipy.linalg.eigh(dense)
        vals, vecs = vals[:m], vecs[:, :m]
    else:
        v0 = np.full(dim, 1 / np.sqrt(dim))
        ncv = min(dim, max(6 * m, 60))
        try:
            vals, vecs = scipy.sparse.linalg.eigsh(
                H, k=m, which="SA", v0=v0, ncv=ncv)
        except scipy.sparse.linalg.ArpackNoConvergence:
            # clustered spectra can stall at machine-precision tolerance;
            # the residual gate below still certifies the relaxed solve
            vals, vecs = scipy.sparse.linalg.eigsh(
                H, k=m, which="SA", v0=v0, ncv=ncv, tol=1e-11,
                maxiter=100 * dim)
        order = np.argsort(vals)
        vals, vecs = vals[order], vecs[:, order]
    residuals = np.array([np.linalg.norm(H @ vecs[:, i] - vals[i] * vecs[:, i])
                          for i in range(m)])
    bad = residuals > 1e-8 * scale
    if np.any(bad):
        raise InvariantViolation(
            "spectrum-residual",
            f"residuals {residuals[bad]} exceed 1e-8 * ||H|| = {1e-8 * scale:.3e}")
    gap = float(vals[1] - vals[0]) if m >= 2 else 0.0
    return SpectrumResult(
        eigenvalues=vals, ground_vector=vecs[:, 0], residuals=residuals,
        gap=gap, norm_scale=scale, provenance=dict(provenance or {}))


def sector_ground(N: int, symmetry: str, pot, params: ModelParams,
                  spec: DiscretizationSpec, m: int = 2) -> SpectrumResult:
    H = build_H_eps(N, symmetry, pot, params, spec)
    prov = {"N": N, "symmetry": symmetry, "alpha": params.alpha,
            "epsilon": spec.epsilon, "n_el_basis": spec.n_el_basis,
            "k_max": spec.k_max, "n_ph_max": spec.n_ph_max, "L": params.L}
    return ground(H, m=m, provenance=prov)


def electronic_ground(N: int, symmetry: str, pot, spec: DiscretizationSpec,
                      L: float = 1.0) -> float:
    H = build_H_el(N, symmetry, pot, spec, L)
    return float(scipy.linalg.eigh(H, eigvals_only=True,
                                   subset_by_index=[0, 0])[0])


def sector_sweep(alphas, sectors, pot, params: ModelParams,
                 spec: DiscretizationSpec) -> list:
    """E_eps(alpha, S) and E_el(S) rows; enforces the theorem-level orderings.

    Raises InvariantViolation when, within the table, a sector energy
    increases with alpha (beyond solver noise), an interacting energy
    fails to sit strictly below the electronic one at alpha > 0, or the
    N = 2 symmetric sector fails to undercut the antisymmetric one.
    """
    N = 1 if sectors == ("none",) or list(sectors) == ["none"] else 2
    rows = []
    for symmetry in sectors:
        e_el = electronic_ground(N, symmetry, pot, spec, params.L)
        for alpha in alphas:
            p = ModelParams(alpha=float(alpha), N=N, L=params.L, beta=params.beta)
            res = sector_ground(N, symmetry, pot, p, spec)
            rows.append({"alpha": float(alpha), "sector": symmetry,
                         "e_eps": res.ground_energy, "e_el": e_el,
                         "gap": res.gap})
    noise = 1e-12
    by_sector = {}
    for row in rows:
        by_sector.setdefault(row["sector"], []).append(row)
    for symmetry, sec_rows in by_sector.items():
        sec_rows.sort(key=lambda r: r["alpha"])
        for lo, hi in zip(sec_rows, sec_rows[1:]):
            if hi["e_eps"] > lo["e_eps"] + noise:
                raise InvariantViolation(
                    "alpha-monotonicity",
                    f"sector {symmetry}: E({hi['alpha']}) = {hi['e_eps']:.12f} "
                    f"> E({lo['alpha']}) = {lo['e_eps']:.12f}")
        for row in sec_rows:
            if row["alpha"] > 0 and not row["e_eps"] < row["e_el"]:
                raise InvariantViolation(
                    "coupling-lowers-energy",
                    f"sector {symmetry} at alpha {row['alpha']}: "
                    f"{row['e_eps']} not below electronic {row['e_el']}")
    if "symmetric" in by_sector and "antisymmetric" in by_sector:
        for row_s in by_sector["symmetric"]:
            for row_a in by_sector["antisymmetric"]:
                if row_a["alpha"] == row_s["alpha"] and \
                        not row_s["e_eps"] < row_a["e_eps"]:
                    raise InvariantViolation(
                        "sector-ordering",
                        f"alpha {row_s['alpha']}: E(0) = {row_s['e_eps']} "
                        f"not below E(1) = {row_a['e_eps']}")
    return rows


def truncation_budget(N: int, symmetry: str, pot, params: ModelParams,
                      spec_small: DiscretizationSpec,
                      spec_large: DiscretizationSpec) -> dict:
    """Ground-energy shift under a truncation upgrade, as a relative budget."""
    e_small = sector_ground(N, symmetry, pot, params, spec_small).ground_energy
    e_large = sector_ground(N, symmetry, pot, params, spec_large).ground_energy
    rel = abs(e_large - e_small) / max(abs(e_large), 1e-300)
    return {"e_small": e_small, "e_large": e_large, "rel_change": rel}


def richardson_extrapolate(eps_values, energies) -> dict:
    """Geometric-ladder Richardson extrapolation of E(eps) to eps = 0.

    Assumes E(eps) = E0 + c eps^q on a ladder with fixed ratio rho < 1;
    q is estimated from successive differences.  The result is labeled:
    it is an extrapolation, not a diagonalization at eps = 0.
    """
    eps_values = np.asarray(list(eps_values), dtype=float)
    energies = np.asarray(list(energies), dtype=float)
    if eps_values.size < 3:
        raise ValueError("need at least 3 ladder points")
    if np.any(np.diff(eps_values) >= 0) or np.any(eps_values <= 0):
        raise ValueError("eps ladder must be positive and strictly decreasing")
    ratios = eps_values[1:] / eps_values[:-1]
    if not np.allclose(ratios, ratios[0], rtol=1e-8):
        raise ValueError("eps ladder must be geometric for Richardson")
    rho = ratios[0]
    d1 = energies[-2] - energies[-3]
    d2 = energies[-1] - energies[-2]
    if d2 == 0 or d1 == 0 or np.sign(d1) != np.sign(d2):
        raise ValueError("differences do not look like a power law")
    q = np.log(d2 / d1) / np.log(rho)
    if q <= 0:
        raise ValueError(
            "differences grow along the ladder (estimated order <= 0); "
            "the ladder is not in the asymptotic regime, refine eps")
    value = energies[-1] + d2 * (rho**q) / (1 - rho**q)
    return {"value": float(value), "order": float(q),
            "label": "richardson-extrapolation",
            "eps": eps_values.tolist(), "energies": energies.tolist()}


def uniform_vacuum_vector(spec: DiscretizationSpec, boson_dim: int,
                          L: float = 1.0) -> np.ndarray:
    """(uniform function on (-L, L)) x (phonon vacuum), unnormalized."""
    n = np.arange(1, spec.n_el_basis + 1)
    coeff = 2 * np.sqrt(L) * (1 - (-1.0) ** n) / (n * np.pi)
    vec = np.zeros(spec.n_el_basis * boson_dim)
    vec[::boson_dim] = coeff
    return vec


def ratio_energy_oracle(params: ModelParams, spec: DiscretizationSpec,
                        beta: float, delta: float, pot=None) -> float:
    """-(1/delta) log of the semigroup ratio the ratio estimator targets.

    N = 1 only: the electronic part of the reference vector is the
    uniform function, matching Monte Carlo paths started uniformly.
    """
    if params.N != 1:
        raise ValueError("the matched semigroup oracle is implemented for N = 1")
    if delta <= 0 or beta <= 0:
        raise ValueError("beta and delta must be > 0")
    H = build_H_eps(1, "none", pot, params, spec)
    boson_dim = H.shape[0] // spec.n_el_basis
    u = uniform_vacuum_vector(spec, boson_dim, params.L)
    z_beta = u @ scipy.sparse.linalg.expm_multiply(-beta * H, u)
    z_more = u @ scipy.sparse.linalg.expm_multiply(-(beta + delta) * H, u)
    return float(-np.log(z_more / z_beta) / delta)
