"""Core complex-signal machinery: unitary DFT factors, the implicit
Kronecker-structured measurement operator, vectorization helpers, the
two-channel real representation, and the CIMG binary container.

The measurement operator acts on a P x Q complex scene X as

    Y = Phi X Psi^H,   Phi = Pi_r F_r,  Psi = Pi_a F_a,

with F_r, F_a unitary DFT matrices and Pi_r, Pi_a row selections.  In
vectorized (column-major) form this equals (Psi^* kron Phi) vec(X).
Application uses FFTs plus row gathering; dense materialization exists
only as a small-size test oracle.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import FileFormatError, InvalidConfigurationError, InvalidDimensionError

_CIMG_MAGIC = b"CIMG"
_CIMG_VERSION = 1

# dense oracle guard: P*Q above this is refused (test-oracle only)
DENSE_ORACLE_MAX_ELEMS = 4096


def unitary_dft(n: int) -> np.ndarray:
    """Unitary DFT matrix, entry (k, l) = exp(-2j pi k l / n) / sqrt(n)."""
    if n < 1:
        raise InvalidDimensionError(f"DFT size must be >= 1, got {n}")
    k = np.arange(n)
    return np.exp(-2j * np.pi * np.outer(k, k) / n) / np.sqrt(n)


@dataclass(frozen=True)
class DftFactor:
    """A row-selected unitary DFT factor.

    rows are the selected row indices of the full n_cols x n_cols DFT;
    they must be unique and in [0, n_cols).
    """

    n_cols: int
    rows: tuple = field(default=())

    def __post_init__(self):
        rows = tuple(int(r) for r in self.rows)
        object.__setattr__(self, "rows", rows)
        if self.n_cols < 1:
            raise InvalidDimensionError("n_cols must be >= 1")
        if len(rows) < 1:
            raise InvalidDimensionError("at least one row must be selected")
        if len(set(rows)) != len(rows):
            raise InvalidConfigurationError("row indices must be unique")
        if min(rows) < 0 or max(rows) >= self.n_cols:
            raise InvalidConfigurationError(
                f"row indices must lie in [0, {self.n_cols})"
            )

    @property
    def n_rows(self) -> int:
        return len(self.rows)

    @property
    def is_full(self) -> bool:
        return self.n_rows == self.n_cols and self.rows == tuple(range(self.n_cols))

    def matrix(self) -> np.ndarray:
        """Materialized factor (n_rows x n_cols); small sizes only."""
        return unitary_dft(self.n_cols)[list(self.rows)]


def _check_image(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x)
    if x.ndim < 2:
        raise InvalidDimensionError(f"expected a (..., P, Q) array, got shape {x.shape}")
    return x.astype(np.complex128, copy=False)


def apply_forward(phi: DftFactor, psi: DftFactor, x: np.ndarray) -> np.ndarray:
    """Apply Y = Phi X Psi^H via FFTs and row gathering.

    Accepts leading batch dimensions: x has shape (..., P, Q) and the
    result has shape (..., N, M).
    """
    x = _check_image(x)
    P, Q = x.shape[-2], x.shape[-1]
    if phi.n_cols != P or psi.n_cols != Q:
        raise InvalidDimensionError(
            f"operator built for {phi.n_cols}x{psi.n_cols}, scene is {P}x{Q}"
        )
    t = np.fft.fft(x, axis=-2) / np.sqrt(P)       # F_r X
    t = np.fft.ifft(t, axis=-1) * np.sqrt(Q)      # ... X F_a^H
    return t[..., list(phi.rows), :][..., :, list(psi.rows)]


def apply_adjoint(phi: DftFactor, psi: DftFactor, y: np.ndarray) -> np.ndarray:
    """Apply the adjoint Phi^H Y Psi, returning a (..., P, Q) image."""
    y = _check_image(y)
    N, M = y.shape[-2], y.shape[-1]
    if N != phi.n_rows or M != psi.n_rows:
        raise InvalidDimensionError(
            f"echo is {N}x{M} but operator selects {phi.n_rows}x{psi.n_rows} rows"
        )
    P, Q = phi.n_cols, psi.n_cols
    z = np.zeros(y.shape[:-2] + (P, Q), dtype=np.complex128)
    rr = np.asarray(phi.rows)[:, None]
    ra = np.asarray(psi.rows)[None, :]
    z[..., rr, ra] = y
    t = np.fft.ifft(z, axis=-2) * np.sqrt(P)      # F_r^H Z
    return np.fft.fft(t, axis=-1) / np.sqrt(Q)    # ... Z F_a


def vec(x: np.ndarray) -> np.ndarray:
    """Column-major stacking of a P x Q image into a length-PQ vector."""
    x = _check_image(x)
    if x.ndim != 2:
        raise InvalidDimensionError("vec expects a single 2-D image")
    return x.reshape(-1, order="F")


def unvec(v: np.ndarray, P: int, Q: int) -> np.ndarray:
    """Inverse of :func:`vec`."""
    v = np.asarray(v).ravel()
    if v.size != P * Q:
        raise InvalidDimensionError(f"vector length {v.size} != {P}*{Q}")
    return v.reshape(P, Q, order="F").astype(np.complex128, copy=False)


def to_two_channel(x: np.ndarray) -> np.ndarray:
    """Complex (..., P, Q) -> real (..., 2, P, Q); channel 0 real, 1 imag."""
    x = _check_image(x)
    return np.stack([x.real, x.imag], axis=-3)


def from_two_channel(t: np.ndarray) -> np.ndarray:
    """Inverse of :func:`to_two_channel`."""
    t = np.asarray(t, dtype=np.float64)
    if t.ndim < 3 or t.shape[-3] != 2:
        raise InvalidDimensionError(
            f"expected a (..., 2, P, Q) tensor, got shape {t.shape}"
        )
    return t[..., 0, :, :] + 1j * t[..., 1, :, :]


def dense_operator_matrix(phi: DftFactor, psi: DftFactor) -> np.ndarray:
    """Materialize A = Psi^* kron Phi.  Test oracle; refuses large scenes."""
    if phi.n_cols * psi.n_cols > DENSE_ORACLE_MAX_ELEMS:
        raise InvalidConfigurationError(
            f"dense oracle limited to P*Q <= {DENSE_ORACLE_MAX_ELEMS}"
        )
    return np.kron(psi.matrix().conj(), phi.matrix())


def save_cimg(path, x: np.ndarray) -> None:
    """Write a complex image to the CIMG container.

    Layout: magic "CIMG", u32 version, u32 P, u32 Q (little-endian),
    then P*Q interleaved (re, im) float32 pairs in column-major order.
    """
    x = np.asarray(x)
    if x.ndim != 2:
        raise InvalidDimensionError("CIMG stores a single 2-D complex image")
    P, Q = x.shape
    flat = x.astype(np.complex128).reshape(-1, order="F")
    payload = np.empty((P * Q, 2), dtype="<f4")
    payload[:, 0] = flat.real
    payload[:, 1] = flat.imag
    with open(path, "wb") as f:
        f.write(_CIMG_MAGIC)
        f.write(struct.pack("<III", _CIMG_VERSION, P, Q))
        f.write(payload.tobytes())


def load_cimg(path) -> np.ndarray:
    """Read a complex image written by :func:`save_cimg`."""
    with open(path, "rb") as f:
        head = f.read(16)
        if len(head) < 16:
            raise FileFormatError(f"{path}: truncated CIMG header")
        if head[:4] != _CIMG_MAGIC:
            raise FileFormatError(f"{path}: not a CIMG file")
        version, P, Q = struct.unpack("<III", head[4:])
        if version != _CIMG_VERSION:
            raise FileFormatError(f"{path}: unknown CIMG version {version}")
        raw = f.read(P * Q * 8)
        if len(raw) < P * Q * 8:
            raise FileFormatError(f"{path}: truncated CIMG payload")
    pairs = np.frombuffer(raw, dtype="<f4").reshape(P * Q, 2)
    flat = pairs[:, 0].astype(np.float64) + 1j * pairs[:, 1].astype(np.float64)
    return flat.reshape(P, Q, order="F")
