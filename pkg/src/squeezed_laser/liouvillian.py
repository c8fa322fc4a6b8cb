"""Sparse Liouvillian assembly, steady states, time evolution and spectral gap.

Density matrices are vectorised by column stacking, ``vec(rho)[i + j d] = rho[i, j]``,
so that ``vec(A rho B) = (B^T kron A) vec(rho)``.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field
from typing import NamedTuple, Optional, Sequence

import numpy as np
import scipy.sparse as sp
from scipy.linalg import expm as dense_expm
from scipy.sparse.linalg import LinearOperator, eigs, expm_multiply, splu

log = logging.getLogger(__name__)

DENSE_GAP_LIMIT = 4096  # largest d^2 for which dense diagonalisation is allowed
DENSE_GAP_DEFAULT = 1024  # below this size dense is the default route


class SolverError(RuntimeError):
    pass


class DegenerateSteadyStateError(SolverError):
    pass


class LindbladTerm(NamedTuple):
    """Dissipator ``(rate/2) (2 O rho O^dag - O^dag O rho - rho O^dag O)``."""

    operator: np.ndarray
    rate: float


class ThermalTerm(NamedTuple):
    """Thermal channel: ``rate (N+1)/2 D_O + rate N/2 D_{O^dag}``."""

    operator: np.ndarray
    rate: float
    n: float


class SqueezedBathTerm(NamedTuple):
    """Broadband squeezed reservoir with moments ``N``, ``M`` coupled through ``O`` at ``rate``.

    Adds ``-(rate/2) M L'_{O^dag} - (rate/2) M* L'_O`` to the thermal channel,
    with ``L'_X[rho] = 2 X rho X - X X rho - rho X X``.
    """

    operator: np.ndarray
    rate: float
    n: float
    m: complex


@dataclass(frozen=True)
class Superoperator:
    matrix: sp.csr_matrix
    dim: int
    label: str = ""
    meta: dict = field(default_factory=dict, compare=False)

    @property
    def shape(self) -> tuple[int, int]:
        return self.matrix.shape

    def apply(self, rho: np.ndarray) -> np.ndarray:
        return unvec(self.matrix @ vec(rho), self.dim)

    def toarray(self) -> np.ndarray:
        return self.matrix.toarray()


def vec(rho: np.ndarray) -> np.ndarray:
    return np.asarray(rho).reshape(-1, order="F")


def unvec(v: np.ndarray, dim: int) -> np.ndarray:
    return np.asarray(v).reshape((dim, dim), order="F")


def trace_functional(dim: int) -> np.ndarray:
    """Row vector ``w`` with ``w @ vec(rho) = Tr rho``."""
    w = np.zeros(dim * dim, dtype=complex)
    w[np.arange(dim) * (dim + 1)] = 1.0
    return w


def _sparse(op) -> sp.csr_matrix:
    return sp.csr_matrix(np.asarray(op, dtype=complex))


def spre(op) -> sp.csr_matrix:
    """``rho -> op rho``."""
    a = _sparse(op)
    return sp.kron(sp.identity(a.shape[0], dtype=complex, format="csr"), a, format="csr")


def spost(op) -> sp.csr_matrix:
    """``rho -> rho op``."""
    a = _sparse(op)
    return sp.kron(a.T, sp.identity(a.shape[0], dtype=complex, format="csr"), format="csr")


def sandwich(left, right) -> sp.csr_matrix:
    """``rho -> left rho right``."""
    return sp.kron(_sparse(right).T, _sparse(left), format="csr")


def dissipator(op) -> sp.csr_matrix:
    """``D_O[rho] = 2 O rho O^dag - O^dag O rho - rho O^dag O``."""
    o = np.asarray(op, dtype=complex)
    od = o.conj().T
    odo = od @ o
    return 2 * sandwich(o, od) - spre(odo) - spost(odo)


def anomalous_dissipator(op) -> sp.csr_matrix:
    """``L'_O[rho] = 2 O rho O - O O rho - rho O O``."""
    o = np.asarray(op, dtype=complex)
    oo = o @ o
    return 2 * sandwich(o, o) - spre(oo) - spost(oo)


def build_liouvillian(
    hamiltonian: np.ndarray,
    decay_terms: Sequence[LindbladTerm] = (),
    thermal_terms: Sequence[ThermalTerm] = (),
    squeezed_terms: Sequence[SqueezedBathTerm] = (),
    label: str = "",
) -> Superoperator:
    h = np.asarray(hamiltonian, dtype=complex)
    d = h.shape[0]
    if h.shape != (d, d):
        raise ValueError("Hamiltonian must be square")

    def check(op):
        if np.shape(op) != (d, d):
            raise ValueError(f"operator of shape {np.shape(op)} does not match Hilbert dimension {d}")
        return np.asarray(op, dtype=complex)

    mat = -1j * (spre(h) - spost(h))
    for term in decay_terms:
        if term.rate < 0:
            raise ValueError("Lindblad rates must be non-negative")
        if term.rate:
            mat = mat + 0.5 * term.rate * dissipator(check(term.operator))
    for term in thermal_terms:
        o = check(term.operator)
        if term.rate < 0 or term.n < 0:
            raise ValueError("thermal terms need non-negative rate and occupation")
        mat = mat + 0.5 * term.rate * (term.n + 1) * dissipator(o)
        if term.n:
            mat = mat + 0.5 * term.rate * term.n * dissipator(o.conj().T)
    for term in squeezed_terms:
        o = check(term.operator)
        if abs(term.m) ** 2 > term.n * (term.n + 1) * (1 + 1e-12) + 1e-14:
            raise ValueError("unphysical squeezed bath: |M|^2 > N(N+1)")
        mat = mat + 0.5 * term.rate * (term.n + 1) * dissipator(o)
        if term.n:
            mat = mat + 0.5 * term.rate * term.n * dissipator(o.conj().T)
        if term.m:
            mat = mat - 0.5 * term.rate * term.m * anomalous_dissipator(o.conj().T)
            mat = mat - 0.5 * term.rate * np.conj(term.m) * anomalous_dissipator(o)
    mat = sp.csr_matrix(mat)
    mat.eliminate_zeros()
    return Superoperator(mat, d, label)


def hermitize(rho: np.ndarray) -> np.ndarray:
    return 0.5 * (rho + rho.conj().T)


def min_eigenvalue(rho: np.ndarray) -> float:
    return float(np.linalg.eigvalsh(hermitize(rho))[0])


def _finalize_state(rho: np.ndarray, what: str) -> np.ndarray:
    rho = hermitize(rho)
    rho = rho / np.trace(rho).real
    lam = min_eigenvalue(rho)
    if lam < -1e-8:
        warnings.warn(f"{what}: density matrix has negative eigenvalue {lam:.2e}", RuntimeWarning, stacklevel=3)
    return rho


def steady_state(
    lv: Superoperator,
    method: str = "direct",
    tol: float = 1e-10,
    rho0: Optional[np.ndarray] = None,
) -> np.ndarray:
    """Stationary state of ``lv``.

    ``method="direct"`` solves ``L x = 0`` with the first equation replaced by
    ``Tr x = 1`` (sparse LU). ``method="propagate"`` integrates from ``rho0``
    (default: maximally mixed) until ``max|L rho| < tol``.
    """
    d = lv.dim
    if method == "direct":
        mat = lv.matrix.tolil(copy=True)
        mat[0, :] = trace_functional(d)
        rhs = np.zeros(d * d, dtype=complex)
        rhs[0] = 1.0
        try:
            lu = splu(sp.csc_matrix(mat))
        except RuntimeError as exc:
            raise DegenerateSteadyStateError("degenerate or non-unique steady state") from exc
        x = lu.solve(rhs)
        if not np.all(np.isfinite(x)):
            raise SolverError("solver failed: non-finite solution")
        rho = unvec(x, d)
    elif method == "propagate":
        rho = np.eye(d, dtype=complex) / d if rho0 is None else np.array(rho0, dtype=complex)
        v = vec(rho)
        dt = 1.0 / max(1.0, abs(lv.matrix).max())
        t_total = 0.0
        for _ in range(200):
            v = expm_multiply(lv.matrix * dt, v)
            t_total += dt
            v = v / (trace_functional(d) @ v)
            if np.max(np.abs(lv.matrix @ v)) < tol:
                break
            dt = min(2 * dt, 50.0)
        else:
            raise SolverError(f"solver failed: propagation not converged after t={t_total:.3g}")
        rho = unvec(v, d)
    else:
        raise ValueError(f"unknown steady-state method {method!r}")

    rho = _finalize_state(rho, "steady_state")
    residual = float(np.max(np.abs(lv.matrix @ vec(rho))))
    scale = max(1.0, float(abs(lv.matrix).max()))
    if residual > tol * scale:
        raise SolverError(f"solver failed: steady-state residual {residual:.2e}")
    return rho


def evolve(lv: Superoperator, rho0: np.ndarray, t_grid: Sequence[float]) -> list[np.ndarray]:
    """``rho(t_k)`` for an increasing, non-negative ``t_grid`` (``rho0`` at ``t = 0``)."""
    vs = propagate_vector(lv.matrix, vec(np.asarray(rho0, dtype=complex)), t_grid)
    w = trace_functional(lv.dim)
    tr0 = w @ vec(rho0)
    out = []
    for v in vs:
        drift = abs(w @ v - tr0)
        if drift > 1e-9:
            raise SolverError(f"trace drift {drift:.2e} during evolution")
        out.append(unvec(v, lv.dim))
    return out


def _uniform_runs(times: np.ndarray, rtol: float = 1e-9) -> list[tuple[int, int]]:
    """Split an increasing grid into maximal runs ``[i, j]`` with constant spacing."""
    runs = []
    i, n = 0, times.size
    while i < n - 1:
        h = times[i + 1] - times[i]
        j = i + 1
        while j + 1 < n and abs((times[j + 1] - times[j]) - h) <= rtol * max(h, 1e-300):
            j += 1
        runs.append((i, j))
        i = j
    return runs


def propagate_vector(matrix: sp.spmatrix, v0: np.ndarray, t_grid: Sequence[float]) -> list[np.ndarray]:
    """``exp(L t_k) v0`` on an increasing grid.

    Equally spaced stretches of the grid are handled by a single
    ``expm_multiply`` call, which reuses its norm estimates across the stretch.
    """
    times = np.asarray(t_grid, dtype=float)
    if times.size == 0:
        return []
    if times[0] < 0 or np.any(np.diff(times) < 0):
        raise ValueError("t_grid must be non-negative and increasing")
    v = np.asarray(v0, dtype=complex)
    if times[0] > 0:
        v = expm_multiply(matrix * times[0], v)
    out = [v]
    for i, j in _uniform_runs(times):
        span = times[j] - times[i]
        if span == 0:
            out.extend([v] * (j - i))
            continue
        if j - i == 1:
            block = [expm_multiply(matrix * span, v)]
        else:
            block = list(expm_multiply(matrix, v, start=0.0, stop=span, num=j - i + 1, endpoint=True)[1:])
        if not np.all(np.isfinite(block[-1])):
            raise SolverError(f"propagation failed near t={times[j]:.4g}")
        out.extend(block)
        v = block[-1]
    return out


class GapResult(NamedTuple):
    eigenvalues: np.ndarray
    gamma_est: float


def liouvillian_gap(
    lv: Superoperator,
    k: int = 2,
    rho_ss: Optional[np.ndarray] = None,
    sigma: float = 1e-3,
    dense: Optional[bool] = None,
) -> GapResult:
    """The ``k`` eigenvalues with largest real part and ``Gamma_est = -2 Re lambda_1``.

    Small problems are diagonalised densely. Otherwise the steady state is
    projected out and shift-invert Arnoldi is run around ``sigma``; eigenvalues
    are then ranked by real part, so ``sigma`` should sit close to zero on the
    scale of the gap.
    """
    if k < 2:
        raise ValueError("k must be >= 2")
    n = lv.matrix.shape[0]
    if dense is None:
        dense = n <= DENSE_GAP_DEFAULT
    if not dense:
        try:
            return _sparse_gap(lv, k, rho_ss, sigma)
        except SolverError:
            if n > DENSE_GAP_LIMIT:
                raise
            log.info("shift-invert failed; falling back to dense diagonalisation")
    vals = np.linalg.eigvals(lv.toarray())
    vals = vals[np.argsort(-vals.real, kind="stable")][:k]
    return GapResult(vals, float(-2.0 * vals[1].real))


def _sparse_gap(lv: Superoperator, k: int, rho_ss: Optional[np.ndarray], sigma: float) -> GapResult:
    n = lv.matrix.shape[0]
    if rho_ss is None:
        rho_ss = steady_state(lv)
    v0 = vec(rho_ss)
    w0 = trace_functional(lv.dim)
    lu = splu(sp.csc_matrix(lv.matrix - sigma * sp.identity(n, dtype=complex, format="csc")))

    def project(x):
        return x - v0 * (w0 @ x)

    op = LinearOperator((n, n), matvec=lambda x: project(lu.solve(project(np.asarray(x).ravel()))), dtype=complex)
    nev = min(n - 2, max(2 * k, k + 6))
    try:
        nu = eigs(op, k=nev, which="LM", return_eigenvectors=False, tol=1e-12, maxiter=20 * n)
    except Exception as exc:  # ArpackNoConvergence and friends
        raise SolverError(f"eigensolver did not converge: {exc}") from exc
    nu = nu[np.abs(nu) > 1e-300]
    lam = sigma + 1.0 / nu
    lam0 = np.vdot(v0, lv.matrix @ v0) / np.vdot(v0, v0)
    lam = lam[np.argsort(-lam.real, kind="stable")]
    vals = np.concatenate([[lam0], lam])[:k]
    return GapResult(vals, float(-2.0 * vals[1].real))


def _chunks(total: int, size: int):
    for start in range(0, total, size):
        yield start, min(start + size, total)


def propagate_traces(
    matrix: sp.spmatrix, v0: np.ndarray, rows: np.ndarray, t_grid: Sequence[float], chunk: int = 64
) -> np.ndarray:
    """``rows @ exp(L t_k) v0`` for every ``t_k`` without storing the propagated vectors."""
    times = np.asarray(t_grid, dtype=float)
    rows = np.atleast_2d(rows)
    out = np.empty((rows.shape[0], times.size), dtype=complex)
    if times.size == 0:
        return out
    if times[0] < 0 or np.any(np.diff(times) < 0):
        raise ValueError("t_grid must be non-negative and increasing")
    v = np.asarray(v0, dtype=complex)
    if times[0] > 0:
        v = expm_multiply(matrix * times[0], v)
    out[:, 0] = rows @ v
    for i, j in _uniform_runs(times):
        h = times[i + 1] - times[i]
        if h == 0:
            out[:, i + 1 : j + 1] = out[:, [i]]
            continue
        for a, b in _chunks(j - i, chunk):
            steps = b - a
            if steps == 1:
                block = expm_multiply(matrix * h, v)[None, :]
            else:
                block = expm_multiply(matrix, v, start=0.0, stop=h * steps, num=steps + 1, endpoint=True)[1:]
            if not np.all(np.isfinite(block[-1])):
                raise SolverError(f"propagation failed near t={times[i + b]:.4g}")
            out[:, i + a + 1 : i + b + 1] = rows @ block.T
            v = block[-1]
    return out


class SectorPropagator:
    """Exact propagation exploiting a conserved charge.

    When every basis state carries an integer charge (e.g. photon number plus
    atomic excitation) that the Liouvillian conserves in the sense
    ``L: |i><j| -> span{|k><l| : q_k - q_l = q_i - q_j}``, the vectorised
    Liouvillian is block diagonal. Each block is small, so propagation over a
    uniform step uses one dense ``expm`` per block and plain matrix products.
    """

    def __init__(self, lv: Superoperator, charges: Sequence[int]):
        charges = np.asarray(charges, dtype=int)
        if charges.size != lv.dim:
            raise ValueError("one charge per basis state is required")
        q_vec = np.subtract.outer(charges, charges).reshape(-1, order="F")
        coo = lv.matrix.tocoo()
        if np.any(q_vec[coo.row] != q_vec[coo.col]):
            raise ValueError("Liouvillian does not conserve the supplied charge")
        self.lv = lv
        self.q_vec = q_vec
        self._index: dict[int, np.ndarray] = {}
        self._blocks: dict[int, np.ndarray] = {}
        self._steps: dict[tuple[int, float], np.ndarray] = {}

    def index(self, q: int) -> np.ndarray:
        if q not in self._index:
            self._index[q] = np.nonzero(self.q_vec == q)[0]
        return self._index[q]

    def block(self, q: int) -> np.ndarray:
        if q not in self._blocks:
            idx = self.index(q)
            self._blocks[q] = self.lv.matrix[idx][:, idx].toarray()
        return self._blocks[q]

    def step(self, q: int, h: float) -> np.ndarray:
        key = (q, float(h))
        if key not in self._steps:
            self._steps[key] = dense_expm(self.block(q) * h)
        return self._steps[key]

    def traces(self, v0: np.ndarray, rows: np.ndarray, t_grid: Sequence[float]) -> np.ndarray:
        times = np.asarray(t_grid, dtype=float)
        rows = np.atleast_2d(rows)
        if times.size and (times[0] < 0 or np.any(np.diff(times) < 0)):
            raise ValueError("t_grid must be non-negative and increasing")
        out = np.zeros((rows.shape[0], times.size), dtype=complex)
        v0 = np.asarray(v0, dtype=complex)
        for q in np.unique(self.q_vec[(v0 != 0)]):
            idx = self.index(int(q))
            r_q = rows[:, idx]
            if not np.any(r_q):
                continue
            v = v0[idx]
            if times.size == 0:
                break
            if times[0] > 0:
                v = dense_expm(self.block(int(q)) * times[0]) @ v
            out[:, 0] += r_q @ v
            k = 1
            for i, j in _uniform_runs(times):
                h = times[i + 1] - times[i]
                prop = self.step(int(q), h) if h > 0 else None
                while k <= j:
                    if prop is not None:
                        v = prop @ v
                    out[:, k] += r_q @ v
                    k += 1
            if not np.all(np.isfinite(v)):
                raise SolverError("sector propagation produced non-finite values")
        return out


def traces_over_time(
    lv: Superoperator,
    v0: np.ndarray,
    rows: np.ndarray,
    t_grid: Sequence[float],
    charges: Optional[Sequence[int]] = None,
) -> np.ndarray:
    """``rows @ exp(L t) v0``, through :class:`SectorPropagator` when ``charges`` are conserved."""
    if charges is not None:
        prop = lv.meta.get("_sector_propagator")
        if prop is None:
            try:
                prop = SectorPropagator(lv, charges)
            except ValueError:
                prop = False
            lv.meta["_sector_propagator"] = prop
        if prop:
            return prop.traces(v0, rows, t_grid)
    return propagate_traces(lv.matrix, v0, rows, t_grid)
