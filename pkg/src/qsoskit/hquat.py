"""Quaternion scalar, vector, and matrix algebra over the reals.

A quaternion q = r + i*I + j*J + k*K is stored by its four real components.
Matrices are dense numpy arrays of shape (rows, cols, 4), with the last axis
holding the (r, i, j, k) components of each entry.

The central tool is the real embedding Lambda: an n x n quaternion matrix A
with component matrices (A_R, A_I, A_J, A_K) maps to the 4n x 4n real matrix

    [[A_R, -A_I, -A_J, -A_K],
     [A_I,  A_R, -A_K,  A_J],
     [A_J,  A_K,  A_R, -A_I],
     [A_K, -A_J,  A_I,  A_R]]

which represents left multiplication by A on the stacked real coordinates
[v_R; v_I; v_J; v_K] of a quaternion vector.  The embedding is an algebra
homomorphism, sends conjugate transposes to transposes, and maps Hermitian
positive semidefinite matrices to symmetric positive semidefinite ones, so a
single real symmetric eigensolver drives all quaternion spectral work: the
spectrum of Lambda(H) consists of the eigenvalues of Hermitian H, each
repeated four times.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

_REAL_TYPES = (int, float, np.integer, np.floating)


@dataclass(frozen=True)
class Quaternion:
    """A quaternion scalar with real components (r, i, j, k)."""

    r: float
    i: float = 0.0
    j: float = 0.0
    k: float = 0.0

    def __add__(self, other: "Quaternion") -> "Quaternion":
        return Quaternion(
            self.r + other.r, self.i + other.i, self.j + other.j, self.k + other.k
        )

    def __sub__(self, other: "Quaternion") -> "Quaternion":
        return Quaternion(
            self.r - other.r, self.i - other.i, self.j - other.j, self.k - other.k
        )

    def __neg__(self) -> "Quaternion":
        return Quaternion(-self.r, -self.i, -self.j, -self.k)

    def __mul__(self, other):
        if isinstance(other, _REAL_TYPES):
            s = float(other)
            return Quaternion(self.r * s, self.i * s, self.j * s, self.k * s)
        a, b = self, other
        return Quaternion(
            a.r * b.r - a.i * b.i - a.j * b.j - a.k * b.k,
            a.r * b.i + a.i * b.r + a.j * b.k - a.k * b.j,
            a.r * b.j - a.i * b.k + a.j * b.r + a.k * b.i,
            a.r * b.k + a.i * b.j - a.j * b.i + a.k * b.r,
        )

    def __rmul__(self, other):
        if isinstance(other, _REAL_TYPES):
            return self * float(other)
        return NotImplemented

    def __truediv__(self, other):
        if isinstance(other, _REAL_TYPES):
            return self * (1.0 / float(other))
        return NotImplemented

    def conj(self) -> "Quaternion":
        return Quaternion(self.r, -self.i, -self.j, -self.k)

    def modulus_sq(self) -> float:
        return self.r * self.r + self.i * self.i + self.j * self.j + self.k * self.k

    def modulus(self) -> float:
        return float(np.sqrt(self.modulus_sq()))

    def __abs__(self) -> float:
        return self.modulus()

    def to_array(self) -> np.ndarray:
        return np.array([self.r, self.i, self.j, self.k])

    @staticmethod
    def from_array(arr) -> "Quaternion":
        return Quaternion(float(arr[0]), float(arr[1]), float(arr[2]), float(arr[3]))

    def is_close(self, other: "Quaternion", tol: float = 1e-12) -> bool:
        return (self - other).modulus() <= tol


ONE = Quaternion(1.0)
QI = Quaternion(0.0, 1.0)
QJ = Quaternion(0.0, 0.0, 1.0)
QK = Quaternion(0.0, 0.0, 0.0, 1.0)
UNITS = (ONE, QI, QJ, QK)


class QMatrix:
    """A dense quaternion matrix backed by a (rows, cols, 4) float array.

    Values are treated as immutable once constructed; the builders that
    assemble matrices write into ``data`` before handing them out.
    """

    __slots__ = ("data",)

    def __init__(self, data: np.ndarray):
        data = np.asarray(data, dtype=float)
        if data.ndim != 3 or data.shape[2] != 4:
            raise ValueError(f"expected (rows, cols, 4) array, got {data.shape}")
        self.data = data

    @staticmethod
    def zeros(rows: int, cols: int) -> "QMatrix":
        return QMatrix(np.zeros((rows, cols, 4)))

    @staticmethod
    def eye(n: int) -> "QMatrix":
        m = QMatrix.zeros(n, n)
        m.data[np.arange(n), np.arange(n), 0] = 1.0
        return m

    @staticmethod
    def from_parts(r, i=None, j=None, k=None) -> "QMatrix":
        r = np.asarray(r, dtype=float)
        parts = [r]
        for p in (i, j, k):
            parts.append(np.zeros_like(r) if p is None else np.asarray(p, dtype=float))
        return QMatrix(np.stack(parts, axis=-1))

    @property
    def rows(self) -> int:
        return self.data.shape[0]

    @property
    def cols(self) -> int:
        return self.data.shape[1]

    def part(self, c: int) -> np.ndarray:
        return self.data[:, :, c]

    def __getitem__(self, rc) -> Quaternion:
        r, c = rc
        return Quaternion.from_array(self.data[r, c])

    def set_entry(self, r: int, c: int, q: Quaternion) -> None:
        self.data[r, c] = q.to_array()

    def column(self, idx: int) -> "QMatrix":
        return QMatrix(self.data[:, idx : idx + 1].copy())

    def copy(self) -> "QMatrix":
        return QMatrix(self.data.copy())

    def conj_t(self) -> "QMatrix":
        out = np.transpose(self.data, (1, 0, 2)).copy()
        out[:, :, 1:] *= -1.0
        return QMatrix(out)

    def __add__(self, other: "QMatrix") -> "QMatrix":
        return QMatrix(self.data + other.data)

    def __sub__(self, other: "QMatrix") -> "QMatrix":
        return QMatrix(self.data - other.data)

    def __neg__(self) -> "QMatrix":
        return QMatrix(-self.data)

    def __mul__(self, other) -> "QMatrix":
        """Scale by a real number, or right-multiply every entry by a quaternion."""
        if isinstance(other, _REAL_TYPES):
            return QMatrix(self.data * float(other))
        if isinstance(other, Quaternion):
            return self.right_mul(other)
        return NotImplemented

    def __rmul__(self, other) -> "QMatrix":
        if isinstance(other, _REAL_TYPES):
            return QMatrix(self.data * float(other))
        if isinstance(other, Quaternion):
            return self.left_mul(other)
        return NotImplemented

    def right_mul(self, q: Quaternion) -> "QMatrix":
        """Entrywise A_rc * q (quaternion product on the right)."""
        ar, ai, aj, ak = (self.data[:, :, c] for c in range(4))
        return QMatrix(
            np.stack(
                [
                    ar * q.r - ai * q.i - aj * q.j - ak * q.k,
                    ar * q.i + ai * q.r + aj * q.k - ak * q.j,
                    ar * q.j - ai * q.k + aj * q.r + ak * q.i,
                    ar * q.k + ai * q.j - aj * q.i + ak * q.r,
                ],
                axis=-1,
            )
        )

    def left_mul(self, q: Quaternion) -> "QMatrix":
        """Entrywise q * A_rc (quaternion product on the left)."""
        br, bi, bj, bk = (self.data[:, :, c] for c in range(4))
        return QMatrix(
            np.stack(
                [
                    q.r * br - q.i * bi - q.j * bj - q.k * bk,
                    q.r * bi + q.i * br + q.j * bk - q.k * bj,
                    q.r * bj - q.i * bk + q.j * br + q.k * bi,
                    q.r * bk + q.i * bj - q.j * bi + q.k * br,
                ],
                axis=-1,
            )
        )

    def __matmul__(self, other: "QMatrix") -> "QMatrix":
        if self.cols != other.rows:
            raise ValueError(
                f"dimension mismatch: {self.rows}x{self.cols} @ {other.rows}x{other.cols}"
            )
        ar, ai, aj, ak = (self.data[:, :, c] for c in range(4))
        br, bi, bj, bk = (other.data[:, :, c] for c in range(4))
        return QMatrix(
            np.stack(
                [
                    ar @ br - ai @ bi - aj @ bj - ak @ bk,
                    ar @ bi + ai @ br + aj @ bk - ak @ bj,
                    ar @ bj - ai @ bk + aj @ br + ak @ bi,
                    ar @ bk + ai @ bj - aj @ bi + ak @ br,
                ],
                axis=-1,
            )
        )


def qvec(entries) -> QMatrix:
    """Column vector from an iterable of Quaternions."""
    entries = list(entries)
    m = QMatrix.zeros(len(entries), 1)
    for idx, q in enumerate(entries):
        m.data[idx, 0] = q.to_array()
    return m


def fro_norm(a: QMatrix) -> float:
    return float(np.sqrt(np.sum(a.data * a.data)))


def trace_inner(a: QMatrix, b: QMatrix) -> Quaternion:
    """Trace inner product <A,B> = Tr(A* B) = sum conj(A_rc) * B_rc."""
    if a.data.shape != b.data.shape:
        raise ValueError("dimension mismatch in trace_inner")
    ar, ai, aj, ak = (a.data[:, :, c] for c in range(4))
    br, bi, bj, bk = (b.data[:, :, c] for c in range(4))
    return Quaternion(
        float(np.sum(ar * br + ai * bi + aj * bj + ak * bk)),
        float(np.sum(ar * bi - ai * br - aj * bk + ak * bj)),
        float(np.sum(ar * bj + ai * bk - aj * br - ak * bi)),
        float(np.sum(ar * bk - ai * bj + aj * bi - ak * br)),
    )


def real_inner(a: QMatrix, b: QMatrix) -> float:
    """The real inner product <A,B>_R = Re Tr(A* B), a componentwise dot."""
    if a.data.shape != b.data.shape:
        raise ValueError("dimension mismatch in real_inner")
    return float(np.sum(a.data * b.data))


def hermitian_part(a: QMatrix) -> QMatrix:
    """The Hermitian part (A + A*)/2 of a square matrix."""
    if a.rows != a.cols:
        raise ValueError("hermitian_part requires a square matrix")
    return (a + a.conj_t()) * 0.5


def is_hermitian(a: QMatrix, tol: float = 1e-10) -> bool:
    if a.rows != a.cols:
        return False
    return fro_norm(a - a.conj_t()) <= tol * (1 + fro_norm(a))


def lambda_embed(a: QMatrix) -> np.ndarray:
    """The 4n x 4n real embedding of a square quaternion matrix.

    For Hermitian input the result is symmetric; in general the layout
    satisfies lambda_embed(A @ B) = lambda_embed(A) @ lambda_embed(B) and
    lambda_embed(A*) = lambda_embed(A).T.
    """
    if a.rows != a.cols:
        raise ValueError("lambda_embed requires a square matrix")
    r, i, j, k = (a.data[:, :, c] for c in range(4))
    return np.block(
        [
            [r, -i, -j, -k],
            [i, r, -k, j],
            [j, k, r, -i],
            [k, -j, i, r],
        ]
    )


def x_embed(v: QMatrix) -> np.ndarray:
    """Stack a quaternion column vector as the real vector [v_R; v_I; v_J; v_K]."""
    if v.cols != 1:
        raise ValueError("x_embed expects a column vector")
    return np.concatenate([v.data[:, 0, c] for c in range(4)])


def x_unembed(x: np.ndarray, n: int) -> QMatrix:
    """Inverse of x_embed: a real 4n-vector back to a quaternion column vector."""
    x = np.asarray(x, dtype=float)
    if x.shape != (4 * n,):
        raise ValueError(f"expected length-{4 * n} vector, got shape {x.shape}")
    return QMatrix(np.stack([x[c * n : (c + 1) * n] for c in range(4)], axis=-1)[:, None, :])


def eig_hermitian(h: QMatrix, tol: float = 1e-8):
    """Eigenvalues (ascending) and orthonormal eigenvectors of a Hermitian matrix.

    Works through the real symmetric eigendecomposition of lambda_embed(H),
    whose spectrum repeats each quaternion eigenvalue four times.  One
    quaternion eigenvector is recovered per quadruple; inside clusters of
    numerically equal eigenvalues the real eigenbasis columns are greedily
    orthogonalized (right-quaternion-coefficient Gram-Schmidt) so the returned
    vectors stay orthonormal even under repeated eigenvalues.

    Returns (evals, V) with evals a length-n array and V an n x n QMatrix
    whose columns are the eigenvectors.
    """
    if h.rows != h.cols:
        raise ValueError("eig_hermitian requires a square matrix")
    hnorm = fro_norm(h)
    if fro_norm(h - h.conj_t()) > tol * (1 + hnorm):
        raise ValueError("matrix is not Hermitian within tolerance")
    n = h.rows
    if n == 0:
        return np.zeros(0), QMatrix.zeros(0, 0)
    sym = hermitian_part(h)
    lam4, u = np.linalg.eigh(lambda_embed(sym))
    scale = 1.0 + float(np.max(np.abs(lam4)))
    evals = lam4.reshape(n, 4).mean(axis=1)
    # group numerically equal eigenvalues; the relative gap threshold matches
    # the quadruple splitting seen at solver precision
    thr = 1e-8 * scale
    clusters = []
    start = 0
    for g in range(1, n):
        if evals[g] - evals[g - 1] > thr:
            clusters.append((start, g))
            start = g
    clusters.append((start, n))
    vecs = QMatrix.zeros(n, n)
    for g0, g1 in clusters:
        m = g1 - g0
        work = [x_unembed(u[:, c], n) for c in range(4 * g0, 4 * g1)]
        accepted = []
        for _ in range(m):
            norms = [fro_norm(w) for w in work]
            pick = int(np.argmax(norms))
            if norms[pick] < 1e-6:
                raise RuntimeError("eigenvector recovery failed in a degenerate cluster")
            v = work[pick] * (1.0 / norms[pick])
            accepted.append(v)
            del work[pick]
            work = [w - v * trace_inner(v, w) for w in work]
        for s, v in enumerate(accepted):
            vecs.data[:, g0 + s] = v.data[:, 0]
    return evals, vecs


def is_psd(h: QMatrix, tol: float = 1e-8) -> bool:
    """Whether a Hermitian matrix is PSD: min eigenvalue >= -tol (via the embedding)."""
    if h.rows != h.cols:
        raise ValueError("is_psd requires a square matrix")
    if fro_norm(h - h.conj_t()) > tol * (1 + fro_norm(h)):
        raise ValueError("matrix is not Hermitian within tolerance")
    if h.rows == 0:
        return True
    lam = np.linalg.eigvalsh(lambda_embed(hermitian_part(h)))
    return bool(lam.min() >= -tol)


def gram_factorize(g: QMatrix, tol: float = 1e-8) -> QMatrix:
    """A factor C with C* C = G for Hermitian PSD G (rows of C are QSOS vectors).

    Raises ValueError when G is indefinite beyond tol.
    """
    evals, v = eig_hermitian(g, tol)
    if g.rows == 0:
        return QMatrix.zeros(0, 0)
    scale = 1.0 + float(np.max(np.abs(evals)))
    if evals.min() < -tol * scale:
        raise ValueError("matrix is not positive semidefinite within tolerance")
    lam = np.clip(evals, 0.0, None)
    d = QMatrix.zeros(g.rows, g.rows)
    d.data[np.arange(g.rows), np.arange(g.rows), 0] = np.sqrt(lam)
    c = d @ v.conj_t()
    res = fro_norm(c.conj_t() @ c - g)
    if res > 1e3 * tol * (1 + fro_norm(g)):
        raise RuntimeError(f"factorization residual {res:.2e} exceeds tolerance")
    return c
