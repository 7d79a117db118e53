"""Closed-form linear algebra for 2x2 complex Hermitian operators.

Everything here works on :class:`HermitianOp2`, an immutable value holding the
upper triangle of a Hermitian matrix.  Spectral decompositions, square roots
and trace norms are computed in closed form, so results are accurate to a few
ulps and fully deterministic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

TAU_PSD = 1e-9
TAU_NUM = 1e-10


class NotPsd(ValueError):
    """Raised when an operator has an eigenvalue below ``-TAU_PSD``."""


class InvalidEffect(ValueError):
    pass


class InvalidState(ValueError):
    pass


def _finite(*xs: float) -> None:
    for x in xs:
        if not math.isfinite(x):
            raise ValueError(f"non-finite component {x!r}")


@dataclass(frozen=True)
class BlochVector:
    x: float
    y: float
    z: float

    def norm(self) -> float:
        return math.sqrt(self.x * self.x + self.y * self.y + self.z * self.z)

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z])


@dataclass(frozen=True)
class HermitianOp2:
    """``[[a00, a01], [conj(a01), a11]]``; the lower triangle is implied."""

    a00: float
    a11: float
    a01: complex = 0j

    def __post_init__(self):
        a01 = complex(self.a01)
        _finite(self.a00, self.a11, a01.real, a01.imag)
        object.__setattr__(self, "a00", float(self.a00))
        object.__setattr__(self, "a11", float(self.a11))
        object.__setattr__(self, "a01", a01)

    # -- constructors ---------------------------------------------------
    @classmethod
    def identity(cls) -> HermitianOp2:
        return cls(1.0, 1.0, 0j)

    @classmethod
    def zero(cls) -> HermitianOp2:
        return cls(0.0, 0.0, 0j)

    @classmethod
    def diag(cls, d0: float, d1: float) -> HermitianOp2:
        return cls(d0, d1, 0j)

    @classmethod
    def projector(cls, vec) -> HermitianOp2:
        """Projector onto the (normalised) vector ``vec`` in C^2."""
        v = np.asarray(vec, dtype=complex)
        nrm = np.linalg.norm(v)
        if nrm == 0:
            raise ValueError("cannot project onto the zero vector")
        v = v / nrm
        return cls(abs(v[0]) ** 2, abs(v[1]) ** 2, v[0] * v[1].conjugate())

    @classmethod
    def from_matrix(cls, m, tol: float = TAU_NUM) -> HermitianOp2:
        m = np.asarray(m, dtype=complex)
        if m.shape != (2, 2):
            raise ValueError(f"expected a 2x2 matrix, got shape {m.shape}")
        if abs(m[0, 1] - m[1, 0].conjugate()) > tol or abs(m[0, 0].imag) > tol or abs(m[1, 1].imag) > tol:
            raise ValueError("matrix is not Hermitian")
        return cls(m[0, 0].real, m[1, 1].real, 0.5 * (m[0, 1] + m[1, 0].conjugate()))

    @classmethod
    def from_bloch(cls, a0: float, v: BlochVector) -> HermitianOp2:
        """``a0 * I + x X + y Y + z Z``."""
        return cls(a0 + v.z, a0 - v.z, complex(v.x, -v.y))

    # -- views ----------------------------------------------------------
    def matrix(self) -> np.ndarray:
        return np.array([[self.a00, self.a01], [self.a01.conjugate(), self.a11]], dtype=complex)

    def to_bloch(self) -> tuple[float, BlochVector]:
        a0 = 0.5 * (self.a00 + self.a11)
        return a0, BlochVector(self.a01.real, -self.a01.imag, 0.5 * (self.a00 - self.a11))

    @property
    def trace(self) -> float:
        return self.a00 + self.a11

    def eigvals(self) -> tuple[float, float]:
        mean = 0.5 * (self.a00 + self.a11)
        rad = math.hypot(0.5 * (self.a00 - self.a11), abs(self.a01))
        return mean - rad, mean + rad

    # -- arithmetic (values are immutable) -------------------------------
    def __add__(self, other: HermitianOp2) -> HermitianOp2:
        return HermitianOp2(self.a00 + other.a00, self.a11 + other.a11, self.a01 + other.a01)

    def __sub__(self, other: HermitianOp2) -> HermitianOp2:
        return HermitianOp2(self.a00 - other.a00, self.a11 - other.a11, self.a01 - other.a01)

    def __mul__(self, s: float) -> HermitianOp2:
        if isinstance(s, complex) or not np.isscalar(s):
            return NotImplemented
        return HermitianOp2(s * self.a00, s * self.a11, s * self.a01)

    __rmul__ = __mul__

    def __neg__(self) -> HermitianOp2:
        return HermitianOp2(-self.a00, -self.a11, -self.a01)

    def sandwich(self, middle: HermitianOp2) -> HermitianOp2:
        """``self @ middle @ self`` (Hermitian because both factors are)."""
        s = self.matrix()
        return HermitianOp2.from_matrix(s @ middle.matrix() @ s, tol=1e-9)

    def allclose(self, other: HermitianOp2, tol: float = TAU_NUM) -> bool:
        return (
            abs(self.a00 - other.a00) <= tol
            and abs(self.a11 - other.a11) <= tol
            and abs(self.a01 - other.a01) <= tol
        )

    # -- classification ---------------------------------------------------
    def is_psd(self, tol: float = TAU_PSD) -> bool:
        return self.eigvals()[0] >= -tol

    def is_density(self, tol: float = TAU_PSD) -> bool:
        return self.is_psd(tol) and abs(self.trace - 1.0) <= tol

    def is_povm_element(self, tol: float = TAU_PSD) -> bool:
        lo, hi = self.eigvals()
        return lo >= -tol and hi <= 1.0 + tol


IDENTITY = HermitianOp2.identity()


def _phase_fix(v: np.ndarray) -> np.ndarray:
    # first nonzero component real and nonnegative
    for c in v:
        if abs(c) > TAU_NUM:
            return v * (abs(c) / c)
    return v


def eig_hermitian2(m: HermitianOp2) -> tuple[tuple[float, float], tuple[np.ndarray, np.ndarray]]:
    """Eigenvalues ``(lam0 <= lam1)`` and matching orthonormal eigenvectors."""
    lam0, lam1 = m.eigvals()
    b = m.a01
    scale = max(abs(m.a00), abs(m.a11), abs(b))
    # an off-diagonal entry below machine resolution moves eigenvectors by less than that resolution
    if abs(b) <= 1e-16 * scale:
        if m.a00 <= m.a11:
            e0 = np.array([1.0, 0.0], dtype=complex)
        else:
            e0 = np.array([0.0, 1.0], dtype=complex)
    else:
        # eigenvectors are scale-free; work at unit scale so subnormal inputs stay finite
        a00, a11, b = m.a00 / scale, m.a11 / scale, b / scale
        top_val = HermitianOp2(a00, a11, b).eigvals()[1]
        # two candidate eigenvectors for the top eigenvalue; keep the better conditioned one
        c1 = np.array([b, top_val - a00], dtype=complex)
        c2 = np.array([top_val - a11, b.conjugate()], dtype=complex)
        top = c1 if np.linalg.norm(c1) >= np.linalg.norm(c2) else c2
        top = top / np.linalg.norm(top)
        e0 = np.array([-top[1].conjugate(), top[0].conjugate()])
    e1 = np.array([-e0[1].conjugate(), e0[0].conjugate()])
    return (lam0, lam1), (_phase_fix(e0), _phase_fix(e1))


def principal_sqrt(m: HermitianOp2) -> HermitianOp2:
    (lam0, lam1), (e0, e1) = eig_hermitian2(m)
    if lam0 < -TAU_PSD:
        raise NotPsd(f"smallest eigenvalue {lam0:.3e} is negative")
    s0 = math.sqrt(max(lam0, 0.0))
    s1 = math.sqrt(max(lam1, 0.0))
    mat = s0 * np.outer(e0, e0.conj()) + s1 * np.outer(e1, e1.conj())
    return HermitianOp2.from_matrix(mat, tol=1e-9)


def trace_distance(rho: HermitianOp2, sigma: HermitianOp2) -> float:
    lam0, lam1 = (rho - sigma).eigvals()
    return 0.5 * (abs(lam0) + abs(lam1))


def trace_product(a: HermitianOp2, b: HermitianOp2) -> float:
    """``Tr[a b]`` without validation."""
    return a.a00 * b.a00 + a.a11 * b.a11 + 2.0 * (a.a01 * b.a01.conjugate()).real


def born_prob(effect: HermitianOp2, state: HermitianOp2) -> float:
    if not effect.is_povm_element():
        raise InvalidEffect("effect must satisfy 0 <= E <= I")
    if not state.is_density():
        raise InvalidState("state must be a density operator")
    return min(1.0, max(0.0, trace_product(effect, state)))


@dataclass(frozen=True)
class QubitPovm:
    """Two-outcome qubit POVM ``(e0, e1)``."""

    e0: HermitianOp2
    e1: HermitianOp2

    def __post_init__(self):
        for e in (self.e0, self.e1):
            if not e.is_povm_element():
                raise InvalidEffect("POVM effects must satisfy 0 <= E <= I")
        if not (self.e0 + self.e1).allclose(IDENTITY, tol=TAU_PSD):
            raise InvalidEffect("POVM effects must sum to the identity")

    @classmethod
    def from_effect(cls, e0: HermitianOp2) -> QubitPovm:
        return cls(e0, IDENTITY - e0)

    def effects(self) -> tuple[HermitianOp2, HermitianOp2]:
        return self.e0, self.e1


def post_measurement_mixture(povm: QubitPovm, state: HermitianOp2) -> HermitianOp2:
    """Outcome-averaged state ``sqrt(E0) rho sqrt(E0) + sqrt(E1) rho sqrt(E1)``."""
    if not state.is_density():
        raise InvalidState("state must be a density operator")
    s0 = principal_sqrt(povm.e0)
    s1 = principal_sqrt(povm.e1)
    return s0.sandwich(state) + s1.sandwich(state)


def to_bloch(m: HermitianOp2) -> tuple[float, BlochVector]:
    return m.to_bloch()


def from_bloch(a0: float, v: BlochVector) -> HermitianOp2:
    return HermitianOp2.from_bloch(a0, v)
