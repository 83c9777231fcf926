"""Compact-operator representations and the Schatten-class calculus.

Two concrete representations are used throughout:

* LowRankOperator  A = sum_n c_n |u_n><v_n|  with fields u_n, v_n on a grid;
* DenseOperator    with integral kernel K(x, y), acting as
  (A f)(x) = h^d sum_y K(x, y) f(y).

Operator singular values are, by convention, those of the plain matrix
h^d * K; low-rank factors are orthonormalized in the h^d-weighted inner
product, so grid refinement converges to the continuum norms.  All
operations are pure; operators are treated as immutable values.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import (
    Field,
    FourierMultiplier,
    Grid,
    _check_same_grid,
    bessel_multiplier,
    free_propagator,
)

__all__ = [
    "LowRankOperator",
    "DenseOperator",
    "SchattenReport",
    "density",
    "trace",
    "to_dense",
    "schatten_norm",
    "sobolev_schatten_norm",
    "conjugate_free",
    "multiply_potential",
    "commutator_potential",
    "commutator_with_multiplier",
    "multiplier_sandwich_schatten",
    "spectrum_hermitian",
    "add",
    "scale",
    "adjoint",
    "compose",
    "recompress",
    "hermitize",
    "random_low_rank",
    "localized_low_rank",
]


@dataclass
class LowRankOperator:
    """A = sum_n coeffs[n] |left[n]><right[n]|.

    left and right are stacked factor arrays of shape (R,) + grid.shape.
    """

    grid: Grid
    coeffs: np.ndarray
    left: np.ndarray
    right: np.ndarray

    def __post_init__(self):
        self.coeffs = np.atleast_1d(np.asarray(self.coeffs, dtype=complex))
        self.left = np.asarray(self.left, dtype=complex)
        self.right = np.asarray(self.right, dtype=complex)
        R = len(self.coeffs)
        want = (R,) + self.grid.shape
        if R and (self.left.shape != want or self.right.shape != want):
            raise ValueError("factor stacks must have shape (R,) + grid.shape")

    @property
    def rank(self) -> int:
        return len(self.coeffs)

    def apply(self, f: Field) -> Field:
        _check_same_grid(self.grid, f.grid)
        g = self.grid
        if self.rank == 0:
            return Field(g, np.zeros(g.shape))
        ip = g.h**g.d * np.tensordot(np.conj(self.right), f.values, axes=g.d)
        return Field(g, np.tensordot(self.coeffs * ip, self.left, axes=(0, 0)))


@dataclass
class DenseOperator:
    """Operator given by its integral kernel on the flattened (row-major) grid."""

    grid: Grid
    kernel: np.ndarray

    def __post_init__(self):
        self.kernel = np.asarray(self.kernel, dtype=complex)
        N = self.grid.npoints
        if self.kernel.shape != (N, N):
            raise ValueError(f"kernel must be {N}x{N}")

    def apply(self, f: Field) -> Field:
        _check_same_grid(self.grid, f.grid)
        g = self.grid
        out = g.h**g.d * (self.kernel @ f.values.reshape(-1))
        return Field(g, out.reshape(g.shape))


@dataclass
class SchattenReport:
    """Schatten norm evaluation: value = (sum s_j^alpha)^(1/alpha), descending s."""

    alpha: float
    value: float
    singular_values: np.ndarray


def _flat(a: np.ndarray, grid: Grid) -> np.ndarray:
    return a.reshape(a.shape[0], grid.npoints) if a.ndim > 1 else a.reshape(1, -1)


def density(A) -> Field:
    """Diagonal of the integral kernel, rho_A(x) = A(x, x)."""
    g = A.grid
    if isinstance(A, LowRankOperator):
        if A.rank == 0:
            return Field(g, np.zeros(g.shape))
        vals = np.einsum("n,n...,n...->...", A.coeffs, A.left, np.conj(A.right))
        return Field(g, vals)
    return Field(g, np.diagonal(A.kernel).reshape(g.shape))


def trace(A) -> complex:
    g = A.grid
    return complex(g.h**g.d * np.sum(density(A).values))


def to_dense(A) -> DenseOperator:
    if isinstance(A, DenseOperator):
        return DenseOperator(A.grid, A.kernel.copy())
    g = A.grid
    if A.rank == 0:
        return DenseOperator(g, np.zeros((g.npoints, g.npoints)))
    Lm = A.left.reshape(A.rank, -1)
    Rm = A.right.reshape(A.rank, -1)
    return DenseOperator(g, (Lm * A.coeffs[:, None]).T @ np.conj(Rm))


def _core_singular_values(A: LowRankOperator, return_factors: bool = False):
    """Singular values via weighted QR of the factor stacks and an R x R core."""
    g = A.grid
    if A.rank == 0:
        if return_factors:
            return np.zeros(0), None, None, None, None
        return np.zeros(0)
    w = np.sqrt(g.h**g.d)
    Ql, Rl = np.linalg.qr(w * A.left.reshape(A.rank, -1).T)
    Qr, Rr = np.linalg.qr(w * A.right.reshape(A.rank, -1).T)
    core = (Rl * A.coeffs[None, :]) @ np.conj(Rr).T
    if return_factors:
        Uc, s, Vch = np.linalg.svd(core)
        return s, Ql, Qr, Uc, Vch
    return np.linalg.svd(core, compute_uv=False)


def singular_values(A) -> np.ndarray:
    """Descending singular values of A on the weighted L^2 space."""
    if isinstance(A, LowRankOperator):
        return _core_singular_values(A)
    g = A.grid
    return np.linalg.svd(g.h**g.d * A.kernel, compute_uv=False)


def _schatten_value(s: np.ndarray, alpha: float) -> float:
    if len(s) == 0:
        return 0.0
    if np.isinf(alpha):
        return float(np.max(s))
    return float(np.sum(s**alpha) ** (1.0 / alpha))


def schatten_norm(A, alpha: float) -> SchattenReport:
    if alpha < 1:
        raise ValueError(f"Schatten exponent must be >= 1, got {alpha}")
    s = singular_values(A)
    return SchattenReport(alpha=alpha, value=_schatten_value(s, alpha), singular_values=s)


def _apply_multiplier_stack(m: FourierMultiplier, stack: np.ndarray, grid: Grid) -> np.ndarray:
    axes = tuple(range(1, grid.d + 1))
    return np.fft.ifftn(m.symbol[None] * np.fft.fftn(stack, axes=axes), axes=axes)


def _dense_left_multiplier(m: FourierMultiplier, kernel: np.ndarray, grid: Grid) -> np.ndarray:
    # (M K)(x, y): apply the multiplier over the x index for every column.
    K = kernel.reshape(grid.shape + (grid.npoints,))
    axes = tuple(range(grid.d))
    out = np.fft.ifftn(
        m.symbol[..., None] * np.fft.fftn(K, axes=axes), axes=axes
    )
    return out.reshape(grid.npoints, grid.npoints)


def _dense_right_multiplier(m: FourierMultiplier, kernel: np.ndarray, grid: Grid) -> np.ndarray:
    # K M = (M^dagger K^dagger)^dagger with M^dagger the conjugate symbol.
    mdag = FourierMultiplier(grid, np.conj(m.symbol))
    return np.conj(_dense_left_multiplier(mdag, np.conj(kernel).T, grid)).T


def _conjugate_multiplier(A, m: FourierMultiplier):
    """m A m^* in the matching representation (m applied to both factor sides)."""
    if isinstance(A, LowRankOperator):
        if A.rank == 0:
            return A
        return LowRankOperator(
            A.grid,
            A.coeffs.copy(),
            _apply_multiplier_stack(m, A.left, A.grid),
            _apply_multiplier_stack(m, A.right, A.grid),
        )
    k = _dense_left_multiplier(m, A.kernel, A.grid)
    mstar = FourierMultiplier(A.grid, np.conj(m.symbol))
    k = _dense_right_multiplier(mstar, k, A.grid)
    return DenseOperator(A.grid, k)


def sobolev_schatten_norm(A, s: float, alpha: float) -> SchattenReport:
    """Schatten norm of <grad>^s A <grad>^s (both-sided Sobolev weight)."""
    if alpha < 1:
        raise ValueError(f"Schatten exponent must be >= 1, got {alpha}")
    if s == 0:
        return schatten_norm(A, alpha)
    J = bessel_multiplier(A.grid, s)
    # The Bessel symbol is real, so m = m^* and conjugation is J A J.
    return schatten_norm(_conjugate_multiplier(A, J), alpha)


def conjugate_free(A, t: float):
    """U(t) A U(t)^*, representation preserving."""
    return _conjugate_multiplier(A, free_propagator(A.grid, t))


def multiply_potential(V: Field, A, side: str = "left") -> DenseOperator:
    """V . A (side='left') or A . V (side='right') as a dense operator."""
    Ad = to_dense(A)
    v = V.values.reshape(-1)
    if side == "left":
        return DenseOperator(A.grid, v[:, None] * Ad.kernel)
    if side == "right":
        return DenseOperator(A.grid, Ad.kernel * v[None, :])
    raise ValueError("side must be 'left' or 'right'")


def commutator_potential(V: Field, A) -> DenseOperator:
    """[V, A] with V a (real) potential, dense kernel (V(x)-V(y)) A(x,y)."""
    _check_same_grid(V.grid, A.grid)
    Ad = to_dense(A)
    v = V.values.reshape(-1)
    return DenseOperator(A.grid, (v[:, None] - v[None, :]) * Ad.kernel)


def _displacement_kernel(m: FourierMultiplier) -> np.ndarray:
    """N x N matrix k_m(x - y) from the multiplier's real-space kernel."""
    g = m.grid
    k = m.real_space_kernel()
    idx1 = np.arange(g.n)
    diff = (idx1[:, None] - idx1[None, :]) % g.n
    if g.d == 1:
        return k[diff]
    coords = np.indices(g.shape).reshape(g.d, g.npoints)
    d = [(coords[a][:, None] - coords[a][None, :]) % g.n for a in range(g.d)]
    return k[tuple(d)]


def multiplier_to_dense(m: FourierMultiplier) -> DenseOperator:
    return DenseOperator(m.grid, _displacement_kernel(m))


def commutator_with_multiplier(V: Field, m: FourierMultiplier) -> DenseOperator:
    """[V, m(-i grad)] with kernel (V(x) - V(y)) k_m(x - y)."""
    _check_same_grid(V.grid, m.grid)
    g = V.grid
    km = _displacement_kernel(m)
    v = V.values.reshape(-1)
    return DenseOperator(g, (v[:, None] - v[None, :]) * km)


def multiplier_sandwich_schatten(f: Field, g_symbol: FourierMultiplier, alpha: float) -> float:
    """Schatten norm of the composition f(x) g(-i grad), alpha >= 2 only."""
    if alpha < 2:
        raise ValueError("composition Schatten bound requires alpha >= 2")
    _check_same_grid(f.grid, g_symbol.grid)
    km = _displacement_kernel(g_symbol)
    kernel = f.values.reshape(-1)[:, None] * km
    return schatten_norm(DenseOperator(f.grid, kernel), alpha).value


def spectrum_hermitian(A: DenseOperator, tol: float = 1e-8) -> np.ndarray:
    """Descending eigenvalues of the weighted matrix; rejects non-Hermitian input."""
    g = A.grid
    M = g.h**g.d * A.kernel
    scale = np.linalg.norm(M)
    if scale > 0 and np.linalg.norm(M - np.conj(M).T) > tol * scale:
        raise ValueError("operator is not Hermitian to tolerance")
    ev = np.linalg.eigvalsh((M + np.conj(M).T) / 2)
    return ev[::-1]


def add(A, B):
    _check_same_grid(A.grid, B.grid)
    if isinstance(A, LowRankOperator) and isinstance(B, LowRankOperator):
        if A.rank == 0:
            return B
        if B.rank == 0:
            return A
        return LowRankOperator(
            A.grid,
            np.concatenate([A.coeffs, B.coeffs]),
            np.concatenate([A.left, B.left]),
            np.concatenate([A.right, B.right]),
        )
    return DenseOperator(A.grid, to_dense(A).kernel + to_dense(B).kernel)


def scale(A, c):
    if isinstance(A, LowRankOperator):
        return LowRankOperator(A.grid, c * A.coeffs, A.left, A.right)
    return DenseOperator(A.grid, c * A.kernel)


def adjoint(A):
    if isinstance(A, LowRankOperator):
        return LowRankOperator(A.grid, np.conj(A.coeffs), A.right, A.left)
    return DenseOperator(A.grid, np.conj(A.kernel).T)


def compose(A, B):
    """Operator product A B."""
    _check_same_grid(A.grid, B.grid)
    g = A.grid
    hd = g.h**g.d
    if isinstance(A, LowRankOperator) and isinstance(B, LowRankOperator):
        if A.rank == 0 or B.rank == 0:
            return LowRankOperator(g, np.zeros(0), np.zeros((0,) + g.shape), np.zeros((0,) + g.shape))
        # <v_n, p_m> couplings give rank min(Ra, Rb) after folding into coeffs.
        G = hd * (np.conj(A.right.reshape(A.rank, -1)) @ B.left.reshape(B.rank, -1).T)
        M = (A.coeffs[:, None] * G) * B.coeffs[None, :]
        # Keep rank small: A B = sum_m (sum_n M_nm |u_n>) <q_m|.
        newleft = np.tensordot(M.T, A.left, axes=(1, 0))
        return LowRankOperator(g, np.ones(B.rank, dtype=complex), newleft, B.right)
    return DenseOperator(g, hd * (to_dense(A).kernel @ to_dense(B).kernel))


def recompress(A: LowRankOperator, tol: float, max_rank: int | None = None) -> LowRankOperator:
    """Singular-value truncation of the small core.

    Returns an operator within Hilbert-Schmidt distance tol * ||A||_{S^2}
    of A, in singular-value form (nonnegative coefficients, factor families
    orthonormal in the weighted inner product).
    """
    g = A.grid
    if A.rank == 0:
        return A
    s, Ql, Qr, Uc, Vch = _core_singular_values(A, return_factors=True)
    s2 = float(np.sqrt(np.sum(s**2)))
    keep = len(s)
    if s2 > 0 and tol > 0:
        tail = np.sqrt(np.cumsum(s[::-1] ** 2))[::-1]  # tail[k] = ||s[k:]||_2
        ok = np.nonzero(tail <= tol * s2)[0]
        keep = int(ok[0]) if len(ok) else len(s)
    if max_rank is not None:
        keep = min(keep, max_rank)
    keep = max(keep, 0)
    w = np.sqrt(g.h**g.d)
    newleft = (Ql @ Uc[:, :keep]).T.reshape((keep,) + g.shape) / w
    newright = (Qr @ np.conj(Vch[:keep, :]).T).T.reshape((keep,) + g.shape) / w
    return LowRankOperator(g, s[:keep].astype(complex), newleft, newright)


def hermitize(A):
    """(A + A^*)/2 — used only where self-adjointness is assumed by contract."""
    return scale(add(A, adjoint(A)), 0.5)


def hermitian_defect(A) -> float:
    """||A - A^*||_{S^2} / ||A||_{S^2} (0 for the zero operator)."""
    nrm = schatten_norm(A, 2).value
    if nrm == 0:
        return 0.0
    diff = add(A, scale(adjoint(A), -1.0))
    return schatten_norm(diff, 2).value / nrm


def random_low_rank(
    grid: Grid,
    rank: int,
    rng: np.random.Generator,
    hermitian: bool = False,
    coeffs: np.ndarray | None = None,
    freq_decay: float = 2.0,
) -> LowRankOperator:
    """Random smooth low-rank operator in singular-value form.

    Factors are frequency-localized gaussian draws, smoothed by the envelope
    (1+|xi|^2)^{-freq_decay/2} so Sobolev conjugations stay well conditioned.
    """
    env = (1.0 + grid.xi_squared()) ** (-freq_decay / 2.0)
    w = np.sqrt(grid.h**grid.d)

    def draw_stack():
        z = rng.standard_normal((rank,) + grid.shape) + 1j * rng.standard_normal(
            (rank,) + grid.shape
        )
        axes = tuple(range(1, grid.d + 1))
        smooth = np.fft.ifftn(env[None] * np.fft.fftn(z, axes=axes), axes=axes)
        # Orthonormalize in the weighted inner product.
        Q, _ = np.linalg.qr(w * smooth.reshape(rank, -1).T)
        return Q.T.reshape((rank,) + grid.shape) / w

    left = draw_stack()
    right = left if hermitian else draw_stack()
    if coeffs is None:
        coeffs = 1.0 / np.arange(1, rank + 1)
    return LowRankOperator(grid, np.asarray(coeffs, dtype=complex), left, right)


def localized_low_rank(
    grid: Grid,
    rank: int,
    rng: np.random.Generator,
    width: float = 1.0,
    max_freq: float = 0.5,
    hermitian: bool = True,
    coeffs: np.ndarray | None = None,
) -> LowRankOperator:
    """Low-rank operator built from wavepackets centered in the box.

    Factors are a gaussian envelope times random low-degree polynomials and
    a slow modulation, so free evolution genuinely disperses them (unlike
    the delocalized draws of random_low_rank).  Factor families are
    orthonormalized in the weighted inner product.
    """
    xm = grid.x_mesh()
    env = np.exp(-sum(x**2 for x in xm) / (2 * width**2))
    monomials = [np.ones(grid.shape)]
    monomials += [x / width for x in xm]
    monomials += [(x / width) ** 2 for x in xm]
    w = np.sqrt(grid.h**grid.d)

    def draw_stack():
        stack = np.empty((rank,) + grid.shape, dtype=complex)
        for j in range(rank):
            c = rng.standard_normal(len(monomials)) + 1j * rng.standard_normal(len(monomials))
            poly = sum(cj * mj for cj, mj in zip(c, monomials))
            xi0 = rng.uniform(-max_freq, max_freq, size=grid.d)
            stack[j] = env * poly * np.exp(1j * sum(xi0[a] * xm[a] for a in range(grid.d)))
        Q, _ = np.linalg.qr(w * stack.reshape(rank, -1).T)
        return Q.T.reshape((rank,) + grid.shape) / w

    left = draw_stack()
    right = left if hermitian else draw_stack()
    if coeffs is None:
        coeffs = 1.0 / np.arange(1, rank + 1)
    return LowRankOperator(grid, np.asarray(coeffs, dtype=complex), left, right)
