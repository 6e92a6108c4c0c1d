"""Brute-force reference implementations used only by tests.

Everything here is written independently of the package internals:
periodizations are literal image sums, Fourier coefficients come from
quadrature, and operator identities are checked on dense matrices.
"""

import numpy as np

SQRT2 = np.sqrt(2.0)


def brute_g(x, L=1.0, n_images=200):
    """Literal image sum sum_{|n| <= n_images} exp(-sqrt(2)|x + nL|)."""
    x = np.asarray(x, dtype=float)
    ns = np.arange(-n_images, n_images + 1)
    return np.exp(-SQRT2 * np.abs(x[..., None] + ns * L)).sum(axis=-1)


def brute_dg(x, L=1.0, n_images=200):
    """Image sum for g' (termwise derivative, valid off the kinks)."""
    x = np.asarray(x, dtype=float)
    ns = np.arange(-n_images, n_images + 1)
    sh = x[..., None] + ns * L
    return (-SQRT2 * np.sign(sh) * np.exp(-SQRT2 * np.abs(sh))).sum(axis=-1)


def brute_gaussian_periodization(x, eps, L=1.0, n_images=400):
    """Literal image sum sum_n exp(-(x + 2nL)^2 / (8 eps))."""
    x = np.asarray(x, dtype=float)
    ns = np.arange(-n_images, n_images + 1)
    return np.exp(-((x[..., None] + 2 * L * ns) ** 2) / (8 * eps)).sum(axis=-1)


def h_sine_coefficient_quad(m, L=1.0):
    """Fourier sine coefficient of the odd kernel by quadrature.

    b_m = (2/L) int_0^L [sgn(x) e^{-sqrt2 x} + A sinh(sqrt2 x)] sin(m pi x / L) dx
    """
    from scipy.integrate import quad

    q = np.exp(-SQRT2 * L)
    A = 2 * q / (1 - q)

    def integrand(x):
        return (np.exp(-SQRT2 * x) + A * np.sinh(SQRT2 * x)) * np.sin(m * np.pi * x / L)

    val, err = quad(integrand, 0.0, L, limit=200)
    return 2 * val / L


def h_sine_coefficient_analytic(m, L=1.0):
    """Closed form of the same coefficient (derived by integrating by parts twice)."""
    q = np.exp(-SQRT2 * L)
    k = m * np.pi / L
    return (2 * k / (L * (2 + k**2))) * (1 - (-1) ** m * (1 + 2 * q))


def h_partial_sum(x, L=1.0, k_max=100000, block=32):
    """Partial Fourier sine sum of the odd kernel, blocked to bound memory."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    ms = np.arange(1, k_max + 1)
    b = h_sine_coefficient_analytic(ms, L)
    out = np.empty_like(x)
    for i in range(0, x.size, block):
        xs = x[i : i + block]
        out[i : i + block] = np.sin(np.outer(xs, ms * np.pi / L)) @ b
    return out


def grid_laplacian_hamiltonian(grid_coords, N, pair_seed=None, pair_scale=0.0):
    """Dirichlet grid Laplacian plus optional symmetric pair potential.

    Dense on the flattened site tensor (n^N x n^N); the pair potential is
    a random symmetric two-site function summed over pairs, diagonal in
    the position basis.
    """
    coords = np.asarray(grid_coords, dtype=float)
    n = coords.size
    dx = coords[1] - coords[0]
    lap1 = (
        np.diag(2.0 * np.ones(n)) - np.diag(np.ones(n - 1), 1) - np.diag(np.ones(n - 1), -1)
    ) / (2 * dx * dx)
    K = np.zeros((n**N, n**N))
    for j in range(N):
        term = np.eye(1)
        for k in range(N):
            term = np.kron(term, lap1 if k == j else np.eye(n))
        K += term
    if pair_scale:
        rng = np.random.default_rng(pair_seed)
        v = rng.normal(size=(n, n))
        v = 0.5 * (v + v.T)
        idx = np.indices((n,) * N)
        diagpot = np.zeros((n,) * N)
        for a in range(N):
            for b in range(a + 1, N):
                diagpot += v[idx[a], idx[b]]
        K += pair_scale * np.diag(diagpot.reshape(-1))
    return K


def antisymmetric_m_dimension(N, n_sites, M):
    """dim of the S^3 = M subspace of the N-fold antisymmetric space.

    Character count: (1/N!) sum_pi sgn(pi) * n^{cycles(pi)} * #{spin
    patterns fixed by pi with total S^3 = M}.  Independent of any basis
    construction in the package.
    """
    from itertools import permutations as _perms

    total = 0
    for pi in _perms(range(N)):
        # cycle count and sign
        seen = [False] * N
        cycles = 0
        sign = 1
        for k in range(N):
            if seen[k]:
                continue
            cycles += 1
            length = 0
            j = k
            while not seen[j]:
                seen[j] = True
                j = pi[j]
                length += 1
            if length % 2 == 0:
                sign = -sign
        fixed = 0
        for patt in np.ndindex(*(2,) * N):
            if all(patt[pi[k]] == patt[k] for k in range(N)):
                m = sum(0.5 if s == 0 else -0.5 for s in patt)
                if abs(m - float(M)) < 1e-12:
                    fixed += 1
        total += sign * n_sites**cycles * fixed
    from math import factorial as _fact

    val = total / _fact(N)
    assert abs(val - round(val)) < 1e-9
    return int(round(val))


def brute_retarded_action(states, times, eps, alpha, L=1.0):
    """Literal double loop for the retarded pair action, image-sum kernel.

    sum_{a,b} dt^2 e^{-|t_a - t_b|} sum_{i,j} w(x_{i,a} - x_{j,b}) with
    w from the Gaussian-image resummation (independent of the package's
    truncated mode series).  One path only; O(n^2 N^2) python loops.
    """
    n = len(times) - 1
    dt = times[1] - times[0]
    g_L = SQRT2 * alpha / L
    pref = g_L * L / (4 * np.sqrt(2 * np.pi * eps))

    def w(x):
        return pref * (
            brute_gaussian_periodization(np.atleast_1d(x), eps, L)
            + brute_gaussian_periodization(np.atleast_1d(x + L), eps, L)
        )[0]

    total = 0.0
    N = states.shape[1]
    for a in range(n):
        for b in range(n):
            ew = np.exp(-abs(times[a] - times[b]))
            for i in range(N):
                for j in range(N):
                    total += ew * w(states[a, i] - states[b, j])
    return total * dt * dt


def brute_theta_direct(states, times, k, eps, g_L):
    """Literal-loop quadrature of the displacement vector at one mode.

    -sqrt(g_L) e^{-eps k^2} sum_j sum_b (e^{-t_b} - e^{-t_{b+1}})
    e^{-i k x_{j, t_b}}; single path.
    """
    total = 0.0 + 0.0j
    n = len(times) - 1
    for b in range(n):
        wgt = np.exp(-times[b]) - np.exp(-times[b + 1])
        for j in range(states.shape[1]):
            total += wgt * np.exp(-1j * k * states[b, j])
    return -np.sqrt(g_L) * np.exp(-eps * k**2) * total


def brute_coherent_xi_element(u, v, theta, theta_tilde, beta, s_eff, cap):
    """Literal occupation-basis sum for <e^{a(u)*}O | Xi e^{a(v)*}O>.

    Xi = e^{s_eff} e^{a(theta)*} e^{-beta N} e^{a(theta_tilde)} with the
    antilinear smearing a(f) = sum conj(f_k) a_k.  Enumerates its own
    basis (total occupation <= cap) and uses explicit factorials; fully
    independent of any matrix exponential.
    """
    from itertools import product as _product
    from math import factorial, sqrt as _msqrt

    m = len(u)
    occs = [occ for occ in _product(range(cap + 1), repeat=m)
            if sum(occ) <= cap]

    def coherent_coeff(w, n):
        val = 1.0 + 0.0j
        for wk, nk in zip(w, n):
            val *= wk**nk / _msqrt(factorial(nk))
        return val

    total = 0.0 + 0.0j
    for n in occs:
        cu = np.conj(coherent_coeff(u, n))
        for mm in occs:
            cv = coherent_coeff(v, mm)
            elem = 0.0 + 0.0j
            for r in occs:
                if not all(rk <= nk for rk, nk in zip(r, n)):
                    continue
                if not all(rk <= mk for rk, mk in zip(r, mm)):
                    continue
                up = 1.0 + 0.0j
                for tk, nk, rk in zip(theta, n, r):
                    d = nk - rk
                    up *= tk**d / factorial(d) * _msqrt(factorial(nk) / factorial(rk))
                down = 1.0 + 0.0j
                for tk, mk, rk in zip(theta_tilde, mm, r):
                    d = mk - rk
                    down *= (np.conj(tk)**d / factorial(d)
                             * _msqrt(factorial(mk) / factorial(rk)))
                elem += up * np.exp(-beta * sum(r)) * down
            total += cu * elem * cv
    return np.exp(s_eff) * total


def dirichlet_box_modes(L=1.0, n_modes=200):
    """Eigenvalues e_n and flat-state overlaps c_n = <1, psi_n> on (-L, L).

    psi_n(x) = L^{-1/2} sin(n pi (x + L) / (2L)), e_n = (n pi / (2L))^2 / 2;
    c_n = 2 sqrt(L) (1 - (-1)^n) / (n pi) vanishes for even n.
    """
    n = np.arange(1, n_modes + 1)
    energies = (n * np.pi / (2.0 * L)) ** 2 / 2.0
    overlaps = 2.0 * np.sqrt(L) * (1.0 - (-1.0) ** n) / (n * np.pi)
    return energies, overlaps


def dirichlet_partition_series(beta, L=1.0, n_modes=200):
    """Z(beta) = int dx dy p_beta^D(x, y) = sum_n c_n^2 e^{-beta e_n}."""
    energies, overlaps = dirichlet_box_modes(L, n_modes)
    return float(np.sum(overlaps**2 * np.exp(-beta * energies)))


def dirichlet_plain_energy(beta, L=1.0, n_modes=200):
    return -np.log(dirichlet_partition_series(beta, L, n_modes)) / beta


def dirichlet_ratio_energy(beta, delta, L=1.0, n_modes=200):
    z_long = dirichlet_partition_series(beta + delta, L, n_modes)
    z_short = dirichlet_partition_series(beta, L, n_modes)
    return -np.log(z_long / z_short) / delta


def wedge_partition_series(beta, L=1.0, n_modes=40, n_quad=2000):
    """Flat-state partition function of two walkers killed on leaving
    the ordered wedge {x1 < x2} inside (-L, L)^2.

    Karlin-McGregor: the absorbed two-walker kernel on the wedge is the
    2x2 determinant of single-walker Dirichlet box kernels, so

        Z_2(beta) = sum_{n<m} (S_nm - S_mn)^2 e^{-beta (e_n + e_m)},

    with S_nm = int_{x<y} psi_n(x) psi_m(y) dx dy evaluated by quadrature
    of the closed-form inner integral
    F_n(y) = int_{-L}^{y} psi_n = L^{-1/2} (2L / n pi)(1 - cos(n pi (y+L)/(2L))).
    """
    energies, _ = dirichlet_box_modes(L, n_modes)
    y = np.linspace(-L, L, n_quad + 1)
    n = np.arange(1, n_modes + 1)[:, None]
    phase = n * np.pi * (y[None, :] + L) / (2.0 * L)
    psi = np.sin(phase) / np.sqrt(L)
    cumulative = (2.0 * L / (n * np.pi)) * (1.0 - np.cos(phase)) / np.sqrt(L)
    s_matrix = np.trapezoid(cumulative[:, None, :] * psi[None, :, :], y, axis=-1)
    anti = s_matrix - s_matrix.T
    boltz = np.exp(-beta * (energies[:, None] + energies[None, :]))
    return float(np.sum(np.triu(anti**2 * boltz, k=1)))
