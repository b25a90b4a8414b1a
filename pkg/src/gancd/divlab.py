"""Exact checks of the critic objective on finite distributions.

On a finite set of atoms the critic is just one number per atom and the
objective

    sum_{r,g} p_r q_g [ (D_r - D_g) - lam (D_r - D_g)^2 / w_g ],
    w_g = d(a0, x_g) + d(a1, x_g)

is a concave quadratic in those numbers (``a0``, ``a1`` are the two anchor
atoms, ``d`` squared Euclidean distance between embeddings). Its maximum is
found by solving the stationarity system, which makes the divergence
properties and the Lipschitz bound checkable to machine precision.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

EPS_DENOM = 1e-9


@dataclass
class DiscreteInstance:
    embeddings: np.ndarray  # M x dim
    p: np.ndarray
    q: np.ndarray
    anchors: tuple[int, int] = (0, 1)
    lam: float = 0.2

    def __post_init__(self):
        self.embeddings = np.atleast_2d(np.asarray(self.embeddings, dtype=np.float64))
        self.p = np.asarray(self.p, dtype=np.float64)
        self.q = np.asarray(self.q, dtype=np.float64)
        self.validate()

    @property
    def size(self) -> int:
        return len(self.p)

    def validate(self) -> None:
        m = self.size
        if m < 2 or self.q.shape != (m,) or self.embeddings.shape[0] != m:
            raise ValueError("need at least 2 atoms with matching p, q and embeddings")
        for name, v in (("p", self.p), ("q", self.q)):
            if np.any(v < 0) or abs(v.sum() - 1) > 1e-12:
                raise ValueError(f"{name} must be a probability vector")
        a0, a1 = self.anchors
        if a0 == a1 or not (0 <= a0 < m and 0 <= a1 < m):
            raise ValueError("anchors must be two distinct atom indices")
        if self.p[a0] <= 0 or self.p[a1] <= 0:
            raise ValueError("anchor atoms need positive mass under p")
        if not self.lam > 0:
            raise ValueError("lambda must be positive")

    def sq_dist(self) -> np.ndarray:
        diff = self.embeddings[:, None, :] - self.embeddings[None, :, :]
        return np.sum(diff * diff, axis=2)

    def weights(self) -> np.ndarray:
        """``w_g`` per atom; coincident anchors get a tiny floor."""
        d = self.sq_dist()
        w = d[self.anchors[0]] + d[self.anchors[1]]
        return np.where(w > 0, w, EPS_DENOM)


def random_instance(
    rng: np.random.Generator,
    m: int | None = None,
    *,
    lam: float | None = None,
    equal: bool = False,
    dim: int = 2,
) -> DiscreteInstance:
    m = int(rng.integers(2, 9)) if m is None else m
    lam = float(rng.uniform(0.05, 1.0)) if lam is None else lam
    emb = rng.normal(size=(m, dim))
    p = rng.dirichlet(np.ones(m))
    q = p.copy() if equal else rng.dirichlet(np.ones(m))
    return DiscreteInstance(emb, p, q, (0, 1), lam)


def objective(inst: DiscreteInstance, critic) -> float:
    D = np.asarray(critic, dtype=np.float64)
    if D.shape != (inst.size,) or not np.all(np.isfinite(D)):
        raise ValueError("critic needs one finite value per atom")
    gap = D[:, None] - D[None, :]
    w = inst.weights()[None, :]
    pq = inst.p[:, None] * inst.q[None, :]
    return float(np.sum(pq * (gap - inst.lam * gap * gap / w)))


def _laplacian(inst: DiscreteInstance) -> np.ndarray:
    c = inst.p[:, None] * inst.q[None, :] / inst.weights()[None, :]
    a = c + c.T
    np.fill_diagonal(a, 0.0)
    return np.diag(a.sum(axis=1)) - a


def gradient(inst: DiscreteInstance, critic) -> np.ndarray:
    return (inst.p - inst.q) - 2 * inst.lam * _laplacian(inst) @ np.asarray(critic, dtype=np.float64)


def maximize(inst: DiscreteInstance) -> tuple[np.ndarray, float]:
    """Optimal critic (minimum norm) and the maximum objective value.

    Falls back to :func:`maximize_ascent` if the least-squares solution does
    not zero the gradient.
    """
    b = inst.p - inst.q
    lap = _laplacian(inst)
    D, *_ = np.linalg.lstsq(2 * inst.lam * lap, b, rcond=None)
    if np.linalg.norm(gradient(inst, D)) > 1e-9 * max(1.0, np.linalg.norm(b)):
        D, _ = maximize_ascent(inst)
    return D, objective(inst, D)


def maximize_ascent(
    inst: DiscreteInstance, tol: float = 1e-10, max_iter: int = 1_000_000
) -> tuple[np.ndarray, float]:
    """Steepest ascent with exact line search, kept on the zero-mean subspace.

    The objective ignores a common offset of the critic, so each step is
    projected to remove it.
    """
    lap = 2 * inst.lam * _laplacian(inst)
    b = inst.p - inst.q
    D = np.zeros(inst.size)
    for _ in range(max_iter):
        g = b - lap @ D
        g -= g.mean()
        gg = g @ g
        if np.sqrt(gg) < tol:
            break
        curv = g @ lap @ g
        if curv <= 0:
            raise ArithmeticError("objective is unbounded along the ascent direction")
        D = D + (gg / curv) * g
    else:
        raise ArithmeticError(f"gradient ascent did not reach |grad| < {tol} in {max_iter} steps")
    return D, objective(inst, D)


def sign_critic(inst: DiscreteInstance) -> np.ndarray:
    """``sign(p - q)``, shrunk by ``t1 / (2 t2)`` when the penalty dominates."""
    D0 = np.sign(inst.p - inst.q)
    t1 = float(np.sum(np.abs(inst.p - inst.q)))
    gap = D0[:, None] - D0[None, :]
    pq = inst.p[:, None] * inst.q[None, :]
    t2 = float(inst.lam * np.sum(pq * gap * gap / inst.weights()[None, :]))
    if t2 > t1:
        return D0 * (t1 / (2 * t2))
    return D0


def support_pairs(inst: DiscreteInstance):
    p, q = inst.p, inst.q
    for r in range(inst.size):
        for g in range(inst.size):
            if p[r] * q[g] + p[g] * q[r] > 0:
                yield r, g


def check_optimum_relation(inst: DiscreteInstance, critic) -> float:
    """Largest mismatch between the scaled critic gap and the density ratio term."""
    D = np.asarray(critic, dtype=np.float64)
    w = inst.weights()
    p, q = inst.p, inst.q
    worst = 0.0
    for r, g in support_pairs(inst):
        lhs = 2 * inst.lam * (D[r] - D[g]) / w[g]
        rhs = (p[r] * q[g] - p[g] * q[r]) / (p[r] * q[g] + p[g] * q[r])
        worst = max(worst, abs(lhs - rhs))
    return worst


@dataclass
class LipschitzReport:
    holds: bool
    worst_ratio: float  # 2 lam |D_r - D_g| / (d(a0, g) + d(a1, g)), anchors as x_r
    holds_weak: bool
    worst_weak_ratio: float  # lam |D_r - D_g| / d(x_r, x_g)


def check_lipschitz(inst: DiscreteInstance, critic, tol: float = 1e-8) -> LipschitzReport:
    """Check both critic-gap bounds for every pair whose real point is an anchor."""
    D = np.asarray(critic, dtype=np.float64)
    d = inst.sq_dist()
    w = inst.weights()
    worst = worst_weak = 0.0
    holds = holds_weak = True
    for r in inst.anchors:
        for g in range(inst.size):
            gap = abs(D[r] - D[g])
            if gap > w[g] / (2 * inst.lam) + tol:
                holds = False
            worst = max(worst, 2 * inst.lam * gap / w[g])
            if gap > d[r, g] / inst.lam + tol:
                holds_weak = False
            if d[r, g] > 0:
                worst_weak = max(worst_weak, inst.lam * gap / d[r, g])
    return LipschitzReport(holds, worst, holds_weak, worst_weak)


def total_variation(inst: DiscreteInstance) -> float:
    return 0.5 * float(np.sum(np.abs(inst.p - inst.q)))


def run_suite(count: int, seed: int) -> dict:
    """Random instances through every check; the dict is the CLI report."""
    if count < 1:
        raise ValueError("count must be at least 1")
    rng = np.random.default_rng(seed)
    rows = []
    for i in range(count):
        inst = random_instance(rng, equal=(i % 4 == 0))
        D, value = maximize(inst)
        lip = check_lipschitz(inst, D)
        equal = bool(np.array_equal(inst.p, inst.q))
        tv = total_variation(inst)
        row = {
            "index": i,
            "atoms": inst.size,
            "lambda": inst.lam,
            "equal": equal,
            "total_variation": tv,
            "max_value": value,
            "relation_residual": check_optimum_relation(inst, D),
            "lipschitz_ratio": lip.worst_ratio,
            "lipschitz_weak_ratio": lip.worst_weak_ratio,
            "nonnegative": value >= -1e-9,
            "zero_when_equal": (abs(value) <= 1e-8) if equal else None,
            "positive_when_different": (value > 1e-10) if (not equal and tv >= 0.01) else None,
            "lipschitz": lip.holds,
            "lipschitz_weak": lip.holds_weak,
        }
        rows.append(row)

    def all_true(key):
        vals = [r[key] for r in rows if r[key] is not None]
        return all(vals)

    summary = {
        "nonnegative": all_true("nonnegative"),
        "zero_when_equal": all_true("zero_when_equal"),
        "positive_when_different": all_true("positive_when_different"),
        "lipschitz": all_true("lipschitz"),
        "lipschitz_weak": all_true("lipschitz_weak"),
        "two_atom_relation": all(r["relation_residual"] < 1e-6 for r in rows if r["atoms"] == 2),
    }
    return {"count": count, "seed": seed, "summary": summary, "passed": all(summary.values()), "instances": rows}
