"""Quaternion algebra and the 4x4 eigenproblem behind rotation search.

Quaternions are numpy arrays ``[x, y, z, w]``: vector part first, scalar
last. Products follow ``q1 o q2 = Omega(q1) q2 = Omega_bar(q2) q1``.
"""

import logging
import math

import numpy as np

from .core import DegenerateError, DomainError

log = logging.getLogger(__name__)

IDENTITY = np.array([0.0, 0.0, 0.0, 1.0])


def omega_matrices(q):
    """Left and right multiplication matrices (Omega(q), Omega_bar(q))."""
    q1, q2, q3, q4 = np.asarray(q, dtype=float)
    left = np.array([
        [q4, -q3, q2, q1],
        [q3, q4, -q1, q2],
        [-q2, q1, q4, q3],
        [-q1, -q2, -q3, q4],
    ])
    right = np.array([
        [q4, q3, -q2, q1],
        [-q3, q4, q1, q2],
        [q2, -q1, q4, q3],
        [-q1, -q2, -q3, q4],
    ])
    return left, right


def qmul(q1, q2):
    return omega_matrices(q1)[0] @ np.asarray(q2, dtype=float)


def qinv(q):
    q = np.asarray(q, dtype=float)
    return np.array([-q[0], -q[1], -q[2], q[3]]) / (q @ q)


def as_unit(q, tol=1e-10):
    """Return ``q`` normalized; warns when it was noticeably off the sphere."""
    q = np.asarray(q, dtype=float).reshape(4)
    n = np.linalg.norm(q)
    if n < 1e-300:
        raise DomainError("zero quaternion")
    if abs(n - 1.0) > tol:
        log.warning("quaternion with norm %.3g renormalized", n)
    return q / n


def rotate(q, a):
    """Vector part of q o [a, 0] o q^-1."""
    q = as_unit(q)
    a_hat = np.append(np.asarray(a, dtype=float), 0.0)
    out = qmul(qmul(q, a_hat), qinv(q))
    return out[:3]


def quat_rotmat(q):
    x, y, z, w = as_unit(q)
    return np.array([
        [1 - 2 * (y * y + z * z), 2 * (x * y - z * w), 2 * (x * z + y * w)],
        [2 * (x * y + z * w), 1 - 2 * (x * x + z * z), 2 * (y * z - x * w)],
        [2 * (x * z - y * w), 2 * (y * z + x * w), 1 - 2 * (x * x + y * y)],
    ])


def rotmat_quat(R, tol=1e-8):
    """Unit quaternion (scalar part >= 0) of a rotation matrix.

    Branches on the largest diagonal term so 180-degree rotations stay
    well conditioned.
    """
    R = np.asarray(R, dtype=float)
    if R.shape != (3, 3):
        raise DomainError("rotation matrix must be 3x3")
    if np.max(np.abs(R.T @ R - np.eye(3))) > tol or abs(np.linalg.det(R) - 1.0) > tol:
        raise DomainError("matrix is not a rotation")
    tr = np.trace(R)
    k = int(np.argmax([R[0, 0], R[1, 1], R[2, 2], tr]))
    if k == 3:
        w = 0.5 * math.sqrt(1.0 + tr)
        q = np.array([(R[2, 1] - R[1, 2]), (R[0, 2] - R[2, 0]), (R[1, 0] - R[0, 1]), 0.0]) / (4 * w)
        q[3] = w
    else:
        i, j, l = k, (k + 1) % 3, (k + 2) % 3
        v = np.zeros(3)
        v[i] = 0.5 * math.sqrt(max(1.0 + R[i, i] - R[j, j] - R[l, l], 0.0))
        v[j] = (R[j, i] + R[i, j]) / (4 * v[i])
        v[l] = (R[l, i] + R[i, l]) / (4 * v[i])
        w = (R[l, j] - R[j, l]) / (4 * v[i])
        q = np.append(v, w)
    q /= np.linalg.norm(q)
    return -q if q[3] < 0 else q


def rotation_angle_deg(R_est, R_true):
    """Geodesic distance between two rotations in degrees."""
    c = (np.trace(np.asarray(R_est).T @ np.asarray(R_true)) - 1.0) / 2.0
    return math.degrees(math.acos(min(1.0, max(-1.0, c))))


def build_G(a, b, weights):
    """Weighted sum of per-pair quadratic forms.

    For unit q, ``q^T G q = sum_i w_i |b_i - R(q) a_i|^2``.
    """
    a = np.asarray(a, dtype=float).reshape(-1, 3)
    b = np.asarray(b, dtype=float).reshape(-1, 3)
    w = np.asarray(weights, dtype=float).reshape(-1)
    if not (a.shape == b.shape and w.size == a.shape[0]):
        raise DomainError("pairs and weights must have matching lengths")
    if np.any(w < 0):
        raise DomainError("weights must be non-negative")
    if not np.any(w > 0):
        raise DegenerateError("all weights are zero")
    ax, ay, az = a.T
    bx, by, bz = b.T
    # Omega(b_hat) Omega_bar(a_hat) expanded entrywise (both are pure quaternions)
    M = np.empty((a.shape[0], 4, 4))
    M[:, 0, 0] = -bx * ax + by * ay + bz * az
    M[:, 1, 1] = bx * ax - by * ay + bz * az
    M[:, 2, 2] = bx * ax + by * ay - bz * az
    M[:, 3, 3] = -bx * ax - by * ay - bz * az
    M[:, 0, 1] = M[:, 1, 0] = -(bx * ay + by * ax)
    M[:, 0, 2] = M[:, 2, 0] = -(bx * az + bz * ax)
    M[:, 1, 2] = M[:, 2, 1] = -(by * az + bz * ay)
    M[:, 0, 3] = M[:, 3, 0] = by * az - bz * ay
    M[:, 1, 3] = M[:, 3, 1] = bz * ax - bx * az
    M[:, 2, 3] = M[:, 3, 2] = bx * ay - by * ax
    c = np.sum(a * a, axis=1) + np.sum(b * b, axis=1)
    G = np.einsum("i,ijk->jk", 2.0 * w, M) + float(w @ c) * np.eye(4)
    return 0.5 * (G + G.T)


def sym4_min_eigvec(G, tol=1e-15, max_sweeps=50):
    """Smallest eigenpair of a symmetric 4x4 matrix by cyclic Jacobi rotations.

    The returned eigenvector has unit norm and its largest-magnitude entry is
    positive.
    """
    A = [list(map(float, row)) for row in np.asarray(G, dtype=float)]
    V = [[1.0 if i == j else 0.0 for j in range(4)] for i in range(4)]
    scale = math.sqrt(sum(x * x for row in A for x in row)) or 1.0
    for _ in range(max_sweeps):
        off = math.sqrt(sum(A[i][j] ** 2 for i in range(4) for j in range(4) if i != j))
        if off <= tol * scale:
            break
        for p in range(3):
            for r in range(p + 1, 4):
                apr = A[p][r]
                if abs(apr) <= 1e-300:
                    continue
                theta = (A[r][r] - A[p][p]) / (2.0 * apr)
                t = math.copysign(1.0, theta) / (abs(theta) + math.sqrt(theta * theta + 1.0))
                c = 1.0 / math.sqrt(t * t + 1.0)
                s = t * c
                for k in range(4):
                    akp, akr = A[k][p], A[k][r]
                    A[k][p] = c * akp - s * akr
                    A[k][r] = s * akp + c * akr
                for k in range(4):
                    apk, ark = A[p][k], A[r][k]
                    A[p][k] = c * apk - s * ark
                    A[r][k] = s * apk + c * ark
                for k in range(4):
                    vkp, vkr = V[k][p], V[k][r]
                    V[k][p] = c * vkp - s * vkr
                    V[k][r] = s * vkp + c * vkr
    k = min(range(4), key=lambda i: A[i][i])
    v = np.array([V[i][k] for i in range(4)])
    v /= np.linalg.norm(v)
    if v[np.argmax(np.abs(v))] < 0:
        v = -v
    return A[k][k], v


def random_quaternion(rng):
    """Uniformly distributed rotation as a unit quaternion with w >= 0."""
    q = rng.unit_vectors(1, 4)[0]
    return -q if q[3] < 0 else q
