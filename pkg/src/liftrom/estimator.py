"""Finite-shot emulation of Hadamard-test estimation of the reduced pencil.

An ideal Hadamard test on amplitude ``a`` returns ancilla outcome 0 with probability
``(1 + Re a) / 2`` (real quadrature) or ``(1 + Im a) / 2`` (imaginary quadrature, ``S^dagger``
inserted).  Drawing the outcome counts from a binomial is therefore statistically exact for
noiseless circuits, and no quantum SDK is needed.

Random streams: every estimated entry ``(j, l)`` of kind ``k`` (0 overlap, 1 off-diagonal
``H_K``, 2 diagonal ``H_K``) draws from ``default_rng(SeedSequence(seed, spawn_key=(k, j, l)))``.
Results are thus independent of evaluation order.
"""

from __future__ import annotations

import enum
import warnings
from dataclasses import dataclass, field
from math import comb

import numpy as np

from .mclachlan import Frame, Pencil, hermitian_part

CLIP_TOL = 1e-9

OVERLAP, HK_OFFDIAG, HK_DIAG = 0, 1, 2


class EstimatorMode(str, enum.Enum):
    PER_ENTRY = "per_entry"
    PAULI_RESOLVED = "pauli_resolved"


@dataclass(frozen=True)
class ShotConfig:
    shots_per_quadrature: int = 10_000
    seed: int = 0
    mode: EstimatorMode = EstimatorMode.PAULI_RESOLVED
    noiseless: bool = False

    def __post_init__(self):
        if int(self.shots_per_quadrature) < 1:
            raise ValueError("shots_per_quadrature must be >= 1")
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError("seed must be an unsigned 64-bit integer")
        object.__setattr__(self, "mode", EstimatorMode(self.mode))


def child_rng(seed: int, *key: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key)))


# --------------------------------------------------------------------------- Pauli algebra

_SYMBOL = {(0, 0): "I", (1, 0): "X", (0, 1): "Z", (1, 1): "Y"}


def _popcount(a: np.ndarray) -> np.ndarray:
    a = np.asarray(a, dtype=np.int64)
    out = np.zeros_like(a)
    while np.any(a):
        out += a & 1
        a = a >> 1
    return out


@dataclass(frozen=True)
class PauliTerm:
    """``coefficient * P`` with ``P = i^{|x&z|} X^x Z^z``; qubit 0 is the most significant bit."""

    coefficient: float
    x_mask: int
    z_mask: int
    n_qubits: int

    @property
    def label(self) -> str:
        n = self.n_qubits
        bits = lambda v, q: (v >> (n - 1 - q)) & 1
        return "".join(_SYMBOL[(bits(self.x_mask, q), bits(self.z_mask, q))] for q in range(n))

    def matrix(self) -> np.ndarray:
        dim = 1 << self.n_qubits
        cols = np.arange(dim)
        P = np.zeros((dim, dim), dtype=complex)
        phase = 1j ** int(_popcount(self.x_mask & self.z_mask))
        P[cols ^ self.x_mask, cols] = phase * (-1.0) ** _popcount(cols & self.z_mask)
        return P


@dataclass(frozen=True)
class PauliDecomposition:
    terms: tuple
    n_qubits: int
    _x: np.ndarray = field(repr=False, compare=False, default=None)
    _z: np.ndarray = field(repr=False, compare=False, default=None)

    def __post_init__(self):
        object.__setattr__(self, "_x", np.array([t.x_mask for t in self.terms], dtype=np.int64))
        object.__setattr__(self, "_z", np.array([t.z_mask for t in self.terms], dtype=np.int64))

    def __len__(self):
        return len(self.terms)

    @property
    def dim(self) -> int:
        return 1 << self.n_qubits

    @property
    def coefficients(self) -> np.ndarray:
        return np.array([t.coefficient for t in self.terms])

    def reconstruct(self) -> np.ndarray:
        H = np.zeros((self.dim, self.dim), dtype=complex)
        for t in self.terms:
            H += t.coefficient * t.matrix()
        return H

    def transition_amplitudes(self, bra: np.ndarray, ket: np.ndarray) -> np.ndarray:
        """``<bra| P_alpha |ket>`` for every term, without forming the Pauli matrices."""
        rows = np.arange(self.dim)
        src = rows[None, :] ^ self._x[:, None]  # (P ket)[r] = phase * sign * ket[r ^ x]
        sign = 1.0 - 2.0 * (_popcount(src & self._z[:, None]) & 1)
        phase = 1j ** (_popcount(self._x & self._z) % 4)
        return phase * np.sum(np.conj(bra)[None, :] * sign * ket[src], axis=1)


def _walsh_hadamard(f: np.ndarray) -> np.ndarray:
    """``F[z] = sum_i (-1)^{|i & z|} f[i]``."""
    f = np.array(f, dtype=complex)
    n = f.size
    h = 1
    while h < n:
        f = f.reshape(-1, 2, h)
        f = np.stack([f[:, 0] + f[:, 1], f[:, 0] - f[:, 1]], axis=1).reshape(-1)
        h *= 2
    return f


def pauli_decompose(H: np.ndarray, tol: float = 1e-12) -> PauliDecomposition:
    """Coefficients ``h_alpha = tr(P_alpha H) / M`` for all ``4^n`` strings, keeping ``|h| > tol``.

    For each X-mask the traces over all Z-masks are one Walsh-Hadamard transform of the
    corresponding permuted diagonal of ``H``, so the cost is ``O(M^2 log M)``.
    """
    H = np.asarray(H)
    M = H.shape[0]
    if H.shape != (M, M) or M < 1 or M & (M - 1):
        raise ValueError(f"Pauli decomposition needs a square power-of-two matrix, got {H.shape}")
    n = M.bit_length() - 1
    idx = np.arange(M)
    zs = np.arange(M)
    terms = []
    for x in range(M):
        traces = _walsh_hadamard(H[idx, idx ^ x])
        coeff = (1j ** (_popcount(x & zs) % 4)) * traces / M
        for z in np.flatnonzero(np.abs(coeff) > tol):
            c = coeff[z]
            if abs(c.imag) > 1e-9 * max(1.0, abs(c)):
                raise ValueError("matrix is not Hermitian: complex Pauli coefficient")
            terms.append(PauliTerm(float(c.real), x, int(z), n))
    return PauliDecomposition(tuple(terms), n)


def pauli_decompose_kron(A: np.ndarray, B: np.ndarray, tol: float = 1e-12) -> PauliDecomposition:
    """Decomposition of ``kron(A, B)`` from those of the factors."""
    da, db = pauli_decompose(A, tol), pauli_decompose(B, tol)
    nb = db.n_qubits
    terms = tuple(
        PauliTerm(a.coefficient * b.coefficient, (a.x_mask << nb) | b.x_mask, (a.z_mask << nb) | b.z_mask, da.n_qubits + nb)
        for a in da.terms
        for b in db.terms
        if abs(a.coefficient * b.coefficient) > tol
    )
    return PauliDecomposition(terms, da.n_qubits + nb)


def decompose_lift(lift, tol: float = 1e-12) -> PauliDecomposition:
    """Pauli sum of ``H = D_eta kron A_pad`` using its tensor structure."""
    return pauli_decompose_kron(np.diag(lift.eta), lift.padded_generator, tol)


# --------------------------------------------------------------------------- Hadamard tests


def _clip(x: np.ndarray, what: str) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    worst = np.max(np.abs(x), initial=0.0)
    if worst > 1 + CLIP_TOL:
        raise ValueError(f"{what} quadrature {worst!r} exceeds 1; amplitude is not normalized")
    if worst > 1 + 1e-12:  # plain roundoff is clipped silently
        warnings.warn(f"clipping {what} quadrature {worst!r} to 1", RuntimeWarning, stacklevel=3)
    return np.clip(x, -1.0, 1.0)


def sample_quadrature(x, shots: int, rng: np.random.Generator) -> np.ndarray:
    """``2 k/n - 1`` with ``k ~ Binomial(n, (1 + x)/2)``: unbiased, variance ``(1 - x^2)/n``."""
    x = _clip(x, "real")
    k = rng.binomial(int(shots), (1.0 + x) / 2.0)
    return 2.0 * k / shots - 1.0


def hadamard_test_sample(amplitude, shots: int, rng: np.random.Generator, imaginary: bool = True):
    """Estimate ``a`` (scalar or array) from ``shots`` circuits per quadrature."""
    a = np.asarray(amplitude, dtype=complex)
    re = sample_quadrature(_clip(a.real, "real"), shots, rng)
    if not imaginary:
        out = re
    else:
        out = re + 1j * sample_quadrature(_clip(a.imag, "imaginary"), shots, rng)
    out = np.asarray(out)
    return out.item() if out.ndim == 0 else out


# --------------------------------------------------------------------------- pencil sampling


def _is_snapshot_frame(frame: Frame) -> bool:
    norms = np.linalg.norm(frame.columns, axis=0)
    return frame.snapshot_times is not None and np.allclose(norms, norms[0], rtol=1e-10)


def sample_overlap_matrix(frame: Frame, cfg: ShotConfig) -> np.ndarray:
    """``S_hat`` with exact diagonal and two-quadrature estimates of the normalized off-diagonals.

    For snapshot frames the diagonal is ``||psi0||^2``, known classically.  Otherwise each
    entry is sampled as ``v_j^H v_l / (||v_j|| ||v_l||)`` and rescaled.
    """
    V = frame.columns
    S = hermitian_part(V.conj().T @ V)
    if cfg.noiseless:
        return S
    norms = np.linalg.norm(V, axis=0)
    m = frame.m
    S_hat = np.diag(norms**2).astype(complex)
    for j in range(m):
        for l in range(j + 1, m):
            scale = norms[j] * norms[l]
            est = hadamard_test_sample(S[j, l] / scale, cfg.shots_per_quadrature, child_rng(cfg.seed, OVERLAP, j, l))
            S_hat[j, l] = scale * est
            S_hat[l, j] = np.conj(S_hat[j, l])
    return S_hat


def sample_projected_hamiltonian(frame: Frame, decomposition: PauliDecomposition, cfg: ShotConfig, H=None) -> np.ndarray:
    V = frame.columns
    m = frame.m
    if decomposition.dim != V.shape[0]:
        raise ValueError(f"decomposition acts on dimension {decomposition.dim}, frame on {V.shape[0]}")
    h = decomposition.coefficients
    norms = np.linalg.norm(V, axis=0)
    Vn = V / norms
    n = cfg.shots_per_quadrature

    if cfg.noiseless or cfg.mode is EstimatorMode.PER_ENTRY:
        HK = _exact_projected(V, decomposition, H)
        if cfg.noiseless:
            return HK
        # cheap surrogate: one Hadamard test per entry on the normalized exact value
        weight = float(np.sqrt(np.sum(h**2)))
        out = np.zeros((m, m), dtype=complex)
        for j in range(m):
            for l in range(j, m):
                entry = HK[j, l] / (norms[j] * norms[l])
                scale = max(weight, abs(entry.real), abs(entry.imag))
                if scale == 0:
                    continue
                kind = HK_DIAG if j == l else HK_OFFDIAG
                rng = child_rng(cfg.seed, kind, j, l)
                est = hadamard_test_sample(entry / scale, n, rng, imaginary=(j != l))
                out[j, l] = norms[j] * norms[l] * scale * est
                out[l, j] = np.conj(out[j, l])
        return out

    out = np.zeros((m, m), dtype=complex)
    for j in range(m):
        for l in range(j, m):
            amps = decomposition.transition_amplitudes(Vn[:, j], Vn[:, l])
            if j == l:
                est = sample_quadrature(amps.real, n, child_rng(cfg.seed, HK_DIAG, j, j))
                out[j, j] = norms[j] ** 2 * np.dot(h, est)
            else:
                est = hadamard_test_sample(amps, n, child_rng(cfg.seed, HK_OFFDIAG, j, l))
                out[j, l] = norms[j] * norms[l] * np.dot(h, est)
                out[l, j] = np.conj(out[j, l])
    return out


def _exact_projected(V, decomposition, H):
    if H is None:
        H = decomposition.reconstruct()
    if hasattr(H, "apply_hamiltonian"):
        HV = H.apply_hamiltonian(V)
    else:
        HV = np.asarray(H) @ V
    return hermitian_part(V.conj().T @ HV)


def count_circuits(m: int, decomposition: PauliDecomposition | int) -> tuple[int, int]:
    """``(Hadamard-test circuits, estimator calls)`` for an ``m``-snapshot pencil.

    Two quadratures per off-diagonal overlap, two per off-diagonal ``H_K`` entry and Pauli
    term, and one estimator call per diagonal ``H_K`` entry.
    """
    if m < 1:
        raise ValueError("m must be >= 1")
    n_terms = decomposition if isinstance(decomposition, int) else len(decomposition)
    pairs = comb(m, 2)
    return 2 * pairs + 2 * pairs * n_terms, m


@dataclass(frozen=True)
class SampledPencil:
    overlap_hat: np.ndarray
    projected_h_hat: np.ndarray
    delta_s: np.ndarray
    delta_h: np.ndarray
    circuit_count: int
    estimator_calls: int
    shot_ledger: int
    caveats: tuple = ()

    @property
    def overlap_ratio(self) -> float:
        return float(np.linalg.norm(self.delta_s) / np.linalg.norm(self.overlap_hat - self.delta_s))

    @property
    def hamiltonian_ratio(self) -> float:
        return float(np.linalg.norm(self.delta_h) / np.linalg.norm(self.projected_h_hat - self.delta_h))


def sample_pencil(frame: Frame, pencil: Pencil, decomposition: PauliDecomposition, cfg: ShotConfig, H=None) -> SampledPencil:
    caveats = []
    if not _is_snapshot_frame(frame):
        caveats.append("frame is not snapshot generated; overlaps sampled per entry with normalization")
    caveats.append("diagonal overlaps and snapshot norms taken as exactly known")
    S_hat = sample_overlap_matrix(frame, cfg)
    HK_hat = sample_projected_hamiltonian(frame, decomposition, cfg, H)
    m = frame.m
    circuits, calls = count_circuits(m, decomposition)
    if cfg.noiseless:
        shots = 0
    elif cfg.mode is EstimatorMode.PAULI_RESOLVED:
        shots = cfg.shots_per_quadrature * (circuits + calls * len(decomposition))
    else:
        pairs = comb(m, 2)
        shots = cfg.shots_per_quadrature * (2 * pairs + 2 * pairs + m)
    return SampledPencil(
        overlap_hat=S_hat,
        projected_h_hat=HK_hat,
        delta_s=S_hat - pencil.overlap,
        delta_h=HK_hat - pencil.projected_h,
        circuit_count=circuits,
        estimator_calls=calls,
        shot_ledger=int(shots),
        caveats=tuple(caveats),
    )
