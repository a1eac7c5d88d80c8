"""Seeded instance generators for the experiment families and applications.

Families
--------
ne1_ball / ne1_norm   random real symmetric Q over [q]_1 = (1, q_1..q_n);
                      minimize [q]_1* Q [q]_1 on the unit ball / unit norms
ne1_quat              same shape with Q random Hermitian quaternion
ne2_ball / ne2_norm   random real symmetric Q over the mixed degree-1 vector
                      (1, q_1, conj q_1, ..., q_n, conj q_n)
ne3_ball / ne3_norm   random real symmetric Q over [q]_2 (quartic objective)
ne5 / ne6             per-clique Gram objectives over [q_C]_1 / [q_C]_2 with
                      one norm constraint sum_{j in C} |q_j|^2 = 1 per clique
qmmc                  quaternion maximum-margin style criterion: minimize
                      v* Q v on the unit sphere with Q = -(S_B - lam * S_W)
                      built from seeded per-class samples; the exact optimum
                      is the least eigenvalue of Q
sync                  quaternion orientation synchronization from noisy
                      pairwise relative measurements on a random graph
table1                the fixed two-variable quadratic whose mixed-basis
                      bound stays at -2*sqrt(2) for every relaxation order

Randomness
----------
Every random field draws from `numpy.random.default_rng` seeded by
`SeedSequence(entropy=seed, spawn_key=key)`, where the key is a small tuple
fixed per field and listed in each generator's docstring.  An InstanceSpec
therefore determines its instance exactly; re-generating yields
coefficient-identical polynomials.
"""

from dataclasses import dataclass, field

import numpy as np

from .hquat import QMatrix, Quaternion, eig_hermitian, hermitian_part
from .qpoly import SymPoly, from_gram
from .relax import QPOP
from .words import Word, basis, normalize

FAMILIES = (
    "ne1_ball",
    "ne1_norm",
    "ne1_quat",
    "ne2_ball",
    "ne2_norm",
    "ne3_ball",
    "ne3_norm",
    "ne5",
    "ne6",
    "qmmc",
    "sync",
    "table1",
)


@dataclass
class InstanceSpec:
    """Family name, variable count, 64-bit seed, and family parameters.

    extra keys by family: constraint ("ball"/"norm", ne1_quat only);
    clique (ne5/ne6 clique size); classes / counts / lam (qmmc);
    p / noise (sync).
    """

    family: str
    n: int
    seed: int
    extra: dict = field(default_factory=dict)


@dataclass
class Instance:
    """A generated problem plus retained metadata (oracles, ground truth)."""

    spec: InstanceSpec
    pop: QPOP
    meta: dict


def _rng(seed: int, *key) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=key))


def _rand_symmetric(rng, m: int) -> QMatrix:
    a = rng.standard_normal((m, m))
    return QMatrix.from_parts((a + a.T) / 2.0)


def _rand_hermitian(rng, m: int) -> QMatrix:
    parts = rng.standard_normal((4, m, m))
    return hermitian_part(QMatrix.from_parts(*parts))


def _rand_quat(rng) -> Quaternion:
    return Quaternion(*rng.standard_normal(4))


def _rand_unit_quat(rng) -> Quaternion:
    while True:
        q = _rand_quat(rng)
        a = abs(q)
        if a > 1e-6:
            return q * (1.0 / a)


# ---------------------------------------------------------------------------
# constraint polynomials


def unit_ball(n: int) -> SymPoly:
    """g = 1 - sum_i |q_i|^2, the unit-ball inequality g >= 0."""
    raws = [(Quaternion(1.0), Word.empty(n))]
    raws += [(Quaternion(-1.0), normalize([i, -i], n)) for i in range(1, n + 1)]
    return SymPoly.from_raw(n, raws)


def unit_norm_eqs(n: int) -> list:
    """h_i = |q_i|^2 - 1 for every variable (unit-norm equalities)."""
    out = []
    for i in range(1, n + 1):
        out.append(
            SymPoly.from_raw(
                n, [(Quaternion(1.0), normalize([i, -i], n)), (Quaternion(-1.0), Word.empty(n))]
            )
        )
    return out


def sphere_eq(n: int, support=None) -> SymPoly:
    """h = sum_{i in support} |q_i|^2 - 1 (all variables when support is None)."""
    vs = list(support) if support is not None else list(range(1, n + 1))
    raws = [(Quaternion(1.0), normalize([i, -i], n)) for i in vs]
    raws.append((Quaternion(-1.0), Word.empty(n)))
    return SymPoly.from_raw(n, raws)


# ---------------------------------------------------------------------------
# quadratic and quartic Gram families


def gen_qcqp(spec: InstanceSpec) -> Instance:
    """ne1_ball / ne1_norm / ne1_quat / ne2_ball / ne2_norm.

    Streams: (0,) -> Q entries.  ne1_quat takes extra["constraint"] in
    {"ball", "norm"} (default "ball").
    """
    fam, n = spec.family, spec.n
    rng = _rng(spec.seed, 0)
    if fam in ("ne1_ball", "ne1_norm"):
        words, kind = basis(n, 1, "vars_only"), "vars_only"
        q = _rand_symmetric(rng, len(words))
    elif fam == "ne1_quat":
        words, kind = basis(n, 1, "vars_only"), "vars_only"
        q = _rand_hermitian(rng, len(words))
    elif fam in ("ne2_ball", "ne2_norm"):
        words, kind = basis(n, 1, "mixed"), "mixed"
        q = _rand_symmetric(rng, len(words))
    else:
        raise ValueError(f"not a QCQP family: {fam!r}")
    variant = spec.extra.get("constraint", "norm" if fam.endswith("_norm") else "ball")
    if variant == "ball":
        ineqs, eqs = [unit_ball(n)], []
    elif variant == "norm":
        ineqs, eqs = [], unit_norm_eqs(n)
    else:
        raise ValueError(f"unknown constraint variant {variant!r}")
    pop = QPOP(n, (tuple(words), q), ineqs, eqs)
    return Instance(spec, pop, {"basis_kind": kind, "constraint": variant})


def gen_quartic(spec: InstanceSpec) -> Instance:
    """ne3_ball / ne3_norm: random real symmetric Q over [q]_2.

    Streams: (0,) -> Q entries.
    """
    fam, n = spec.family, spec.n
    if fam not in ("ne3_ball", "ne3_norm"):
        raise ValueError(f"not a quartic family: {fam!r}")
    words = basis(n, 2, "vars_only")
    q = _rand_symmetric(_rng(spec.seed, 0), len(words))
    if fam == "ne3_ball":
        ineqs, eqs, variant = [unit_ball(n)], [], "ball"
    else:
        ineqs, eqs, variant = [], unit_norm_eqs(n), "norm"
    pop = QPOP(n, (tuple(words), q), ineqs, eqs)
    return Instance(spec, pop, {"basis_kind": "vars_only", "constraint": variant})


def gen_clique(spec: InstanceSpec) -> Instance:
    """ne5 / ne6: disjoint cliques of extra["clique"] (default 5) variables,
    one random real symmetric Gram objective over [q_C]_1 (ne5) or [q_C]_2
    (ne6) per clique, and one norm constraint sum_{j in C} |q_j|^2 = 1 each.

    Streams: (c,) -> Q entries of clique c (0-based).
    """
    fam, n = spec.family, spec.n
    if fam not in ("ne5", "ne6"):
        raise ValueError(f"not a clique family: {fam!r}")
    size = int(spec.extra.get("clique", 5))
    if size < 1 or n % size != 0:
        raise ValueError(f"clique size {size} does not partition {n} variables")
    d = 1 if fam == "ne5" else 2
    objective = SymPoly.zero(n)
    cliques = []
    for c in range(n // size):
        vs = tuple(range(c * size + 1, (c + 1) * size + 1))
        cliques.append(vs)
        words = basis(n, d, "vars_only", support=vs)
        objective = objective + from_gram(words, _rand_symmetric(_rng(spec.seed, c), len(words)))
    eqs = [sphere_eq(n, vs) for vs in cliques]
    pop = QPOP(n, objective, [], eqs)
    return Instance(spec, pop, {"cliques": tuple(cliques), "constraint": "cliques"})


# ---------------------------------------------------------------------------
# maximum-margin classification criterion


def scatter_matrices(class_samples) -> tuple:
    """(S_B, S_W) from per-class lists of (4, n) component arrays.

    S_B = sum_c N_c (mu_c - mu)(mu_c - mu)*, with mu_c the class means and
    mu the global sample mean; S_W = sum_c sum_{x in c} (x - mu_c)(x - mu_c)*.
    """
    flat = [x for cls in class_samples for x in cls]
    if not flat:
        raise ValueError("no samples")
    n = flat[0].shape[1]
    mu = sum(flat) / float(len(flat))
    sb = QMatrix.zeros(n, n)
    sw = QMatrix.zeros(n, n)
    for cls in class_samples:
        mu_c = sum(cls) / float(len(cls))
        d = _qcolumn(mu_c - mu)
        sb = sb + (d @ d.conj_t()) * float(len(cls))
        for x in cls:
            e = _qcolumn(x - mu_c)
            sw = sw + e @ e.conj_t()
    return sb, sw


def _qcolumn(parts: np.ndarray) -> QMatrix:
    r, i, j, k = (parts[c][:, None] for c in range(4))
    return QMatrix.from_parts(r, i, j, k)


def gen_qmmc(spec: InstanceSpec) -> Instance:
    """Minimize v* Q v on the unit sphere, Q = -(S_B - lam * S_W).

    extra: classes (default 2), counts (default 5 per class), lam (default 1).
    Streams: (c,) -> all samples of class c.  meta["oracle"] holds the exact
    optimum, the least eigenvalue of Q.
    """
    n = spec.n
    classes = int(spec.extra.get("classes", 2))
    counts = tuple(int(c) for c in spec.extra.get("counts", (5,) * classes))
    if len(counts) != classes or any(c < 1 for c in counts):
        raise ValueError("counts must list one positive sample count per class")
    lam = float(spec.extra.get("lam", 1.0))
    class_samples = []
    for c in range(classes):
        rng = _rng(spec.seed, c)
        class_samples.append([rng.standard_normal((4, n)) for _ in range(counts[c])])
    sb, sw = scatter_matrices(class_samples)
    q = hermitian_part(sw * lam - sb)
    evals, _ = eig_hermitian(q)
    words = tuple(basis(n, 1, "vars_only")[1:])  # degree-exactly-one vector
    pop = QPOP(n, (words, q), [], [sphere_eq(n)])
    meta = {
        "oracle": float(evals[0]),
        "lam": lam,
        "counts": counts,
        "constraint": "sphere",
    }
    return Instance(spec, pop, meta)


# ---------------------------------------------------------------------------
# orientation synchronization


def gen_sync(spec: InstanceSpec) -> Instance:
    """Noisy pairwise-orientation synchronization on G(n, p).

    Ground-truth unit quaternions t_i; for each sampled edge (i, j) the
    measurement is Q_ij = t_i * conj(t_j) + noise * (random unit quaternion),
    not re-normalized.  The objective is
        - sum_{(i,j) in E} ( conj(q_i) (Q_ij / 2) q_j
                             + conj(q_j) (conj(Q_ij) / 2) q_i ),
    a real symmetric polynomial, under |q_i|^2 = 1 for every i.  At zero
    noise its value at the truth is -|E|.

    extra: p (edge probability, default 0.2), noise (default 0.2).
    Streams: (0,) -> truth; (1, attempt) -> edge indicators, re-spawned with
    attempt = 1, 2, ... until the edge set is nonempty; (2,) -> noise.
    meta: truth, edges, num_edges, noise.
    """
    n = spec.n
    p = float(spec.extra.get("p", 0.2))
    noise = float(spec.extra.get("noise", 0.2))
    if not 0.0 < p <= 1.0:
        raise ValueError("edge probability must lie in (0, 1]")
    if n < 2:
        raise ValueError("synchronization needs at least two variables")
    truth_rng = _rng(spec.seed, 0)
    truth = tuple(_rand_unit_quat(truth_rng) for _ in range(n))
    edges, attempt = [], 0
    while not edges:
        mask = _rng(spec.seed, 1, attempt).random((n, n)) < p
        edges = [(i, j) for i in range(1, n + 1) for j in range(i + 1, n + 1) if mask[i - 1, j - 1]]
        attempt += 1
    noise_rng = _rng(spec.seed, 2)
    raws = []
    for i, j in edges:
        qij = truth[i - 1] * truth[j - 1].conj() + _rand_unit_quat(noise_rng) * noise
        raws.append((qij * -0.5, normalize([j, -i], n)))
        raws.append((qij.conj() * -0.5, normalize([i, -j], n)))
    pop = QPOP(n, SymPoly.from_raw(n, raws), [], unit_norm_eqs(n))
    meta = {
        "truth": truth,
        "edges": tuple(edges),
        "num_edges": len(edges),
        "noise": noise,
        "edge_attempts": attempt,
        "constraint": "norm",
    }
    return Instance(spec, pop, meta)


# ---------------------------------------------------------------------------
# the fixed non-converging example


def table1(spec: InstanceSpec | None = None) -> Instance:
    """The two-variable quadratic whose mixed-basis relaxation bound stays at
    -2*sqrt(2) for every order d = 1, 2, 3 while the optimal value over the
    unit ball is -2.0:

        f = q1^2 + conj(q1)^2 + q2^2 + conj(q2)^2
            + q1 q2 + conj(q2) conj(q1) + q1 conj(q2) + q2 conj(q1),
        s.t. |q1|^2 + |q2|^2 <= 1.
    """
    if spec is None:
        spec = InstanceSpec("table1", 2, 0)
    if spec.n != 2:
        raise ValueError("the fixed example has exactly 2 variables")
    letters = [[1, 1], [-1, -1], [2, 2], [-2, -2], [1, 2], [-2, -1], [1, -2], [2, -1]]
    raws = [(Quaternion(1.0), normalize(seq, 2)) for seq in letters]
    pop = QPOP(2, SymPoly.from_raw(2, raws), [unit_ball(2)], [])
    return Instance(spec, pop, {"basis_kind": "mixed", "constraint": "ball"})


_GENERATORS = {
    "ne1_ball": gen_qcqp,
    "ne1_norm": gen_qcqp,
    "ne1_quat": gen_qcqp,
    "ne2_ball": gen_qcqp,
    "ne2_norm": gen_qcqp,
    "ne3_ball": gen_quartic,
    "ne3_norm": gen_quartic,
    "ne5": gen_clique,
    "ne6": gen_clique,
    "qmmc": gen_qmmc,
    "sync": gen_sync,
    "table1": table1,
}


def generate(spec: InstanceSpec) -> Instance:
    """Dispatch to the family generator."""
    if spec.family not in _GENERATORS:
        raise ValueError(f"unknown family {spec.family!r}; choose one of {FAMILIES}")
    return _GENERATORS[spec.family](spec)


# ---------------------------------------------------------------------------
# feasible-point sampling


def feasible_points(inst: Instance, count: int, seed: int) -> list:
    """`count` random feasible points of the instance's constraint set.

    Sampling is by rescaled standard normals: into the unit ball for ball
    variants, onto per-variable unit quaternions for norm variants, onto the
    global unit sphere for qmmc, and onto per-clique spheres for ne5/ne6.
    Stream: (9,).  Every returned point is exactly feasible, so its objective
    value upper-bounds the true minimum (and hence any valid relaxation
    bound).
    """
    n = inst.spec.n
    kind = inst.meta["constraint"]
    rng = _rng(seed, 9)
    out = []
    for _ in range(count):
        if kind == "ball":
            parts = rng.standard_normal((n, 4))
            norm = float(np.sqrt(np.sum(parts * parts)))
            parts *= rng.random() / max(norm, 1e-300)
            out.append(tuple(Quaternion(*row) for row in parts))
        elif kind == "norm":
            out.append(tuple(_rand_unit_quat(rng) for _ in range(n)))
        elif kind == "sphere":
            parts = rng.standard_normal((n, 4))
            norm = float(np.sqrt(np.sum(parts * parts)))
            if norm < 1e-300:
                parts[0, 0], norm = 1.0, 1.0
            parts /= norm
            out.append(tuple(Quaternion(*row) for row in parts))
        elif kind == "cliques":
            parts = rng.standard_normal((n, 4))
            for vs in inst.meta["cliques"]:
                rows = [v - 1 for v in vs]
                norm = float(np.sqrt(np.sum(parts[rows] * parts[rows])))
                if norm < 1e-300:
                    parts[rows[0], 0], norm = 1.0, 1.0
                parts[rows] /= norm
            out.append(tuple(Quaternion(*row) for row in parts))
        else:
            raise ValueError(f"no sampler for constraint kind {kind!r}")
    return out
