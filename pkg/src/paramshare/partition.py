"""Set partitions of parameter indices and the sharing schemes they induce.

A sharing scheme is a binary row-stochastic ``K x K`` matrix ``A``; row ``i``
selects the free parameter that parameter ``i`` is tied to. Its column
supports form a :class:`Partition`.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

MAX_ENUMERATE_K = 12
MAX_GROUP_K = 6


class CapacityError(ValueError):
    """Raised when an exhaustive routine would blow up combinatorially."""


class PartitionFormatError(ValueError):
    def __init__(self, message, line=None, column=None):
        where = ""
        if line is not None:
            where = f"line {line}" + (f", column {column}" if column is not None else "")
            where += ": "
        super().__init__(where + message)
        self.line = line
        self.column = column


@dataclass(frozen=True)
class Partition:
    """Disjoint, non-empty clusters covering ``{0, ..., K-1}``.

    Clusters are stored sorted, and ordered by their smallest element, so
    two equal partitions compare equal.
    """

    K: int
    clusters: tuple

    def __post_init__(self):
        clusters = tuple(sorted((tuple(sorted(int(i) for i in c)) for c in self.clusters),
                                key=lambda c: c[0] if c else -1))
        if any(len(c) == 0 for c in clusters):
            raise ValueError("clusters must be non-empty")
        seen = [i for c in clusters for i in c]
        if sorted(seen) != list(range(self.K)):
            raise ValueError(
                f"clusters must be disjoint and cover 0..{self.K - 1}")
        object.__setattr__(self, "clusters", clusters)

    @classmethod
    def from_labels(cls, labels):
        labels = [int(v) for v in labels]
        groups = {}
        for i, lab in enumerate(labels):
            groups.setdefault(lab, []).append(i)
        return cls(len(labels), tuple(groups.values()))

    @classmethod
    def singletons(cls, K):
        return cls(K, tuple((i,) for i in range(K)))

    @classmethod
    def full(cls, K):
        return cls(K, (tuple(range(K)),))

    @property
    def n_clusters(self):
        return len(self.clusters)

    def labels(self):
        """Restricted growth string: cluster label of every element."""
        out = [0] * self.K
        for lab, c in enumerate(self.clusters):
            for i in c:
                out[i] = lab
        return tuple(out)

    def cluster_of(self, i):
        for c in self.clusters:
            if i in c:
                return c
        raise IndexError(i)

    def __str__(self):
        return "{" + ", ".join("{" + ",".join(map(str, c)) + "}" for c in self.clusters) + "}"


# -- schemes -----------------------------------------------------------------

def validate_scheme(A):
    """Return ``A`` as an int array after checking it is binary row-stochastic."""
    A = np.asarray(A)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError(f"sharing scheme must be square, got shape {A.shape}")
    if not np.all((A == 0) | (A == 1)):
        raise ValueError("sharing scheme entries must be 0 or 1")
    if not np.all(A.sum(axis=1) == 1):
        raise ValueError("every row of a sharing scheme must sum to 1")
    return A.astype(int)


def partition_from_scheme(A):
    A = validate_scheme(A)
    cols = np.argmax(A, axis=1)
    return Partition.from_labels(cols)


def scheme_from_partition(P):
    """Canonical scheme: the cluster with label ``l`` occupies column ``l``."""
    A = np.zeros((P.K, P.K), dtype=int)
    A[np.arange(P.K), P.labels()] = 1
    return A


def identity_scheme(K):
    return np.eye(K, dtype=int)


def column_normalize(A):
    """Divide each non-zero column by its sum (zero columns stay zero)."""
    A = np.asarray(A, dtype=float)
    s = A.sum(axis=0)
    return A / np.where(s > 0, s, 1.0)


def scheme_rank(A):
    """Number of distinct active columns of a binary scheme."""
    return int(np.count_nonzero(validate_scheme(A).sum(axis=0)))


# -- enumeration ------------------------------------------------------------

BELL = (1, 1, 2, 5, 15, 52, 203, 877, 4140, 21147, 115975, 678570, 4213597)


def iter_restricted_growth_strings(K):
    """Restricted growth strings of length ``K`` in lexicographic order."""
    if K > MAX_ENUMERATE_K:
        raise CapacityError(
            f"K={K} exceeds the enumeration limit {MAX_ENUMERATE_K} "
            f"(Bell({K}) partitions)")
    if K <= 0:
        return
    a = [0] * K
    b = [1] * K  # b[i] = 1 + max(a[:i])
    while True:
        yield tuple(a)
        i = K - 1
        while i > 0 and a[i] == b[i]:
            i -= 1
        if i == 0:
            return
        a[i] += 1
        m = max(b[i], a[i] + 1)
        for j in range(i + 1, K):
            a[j] = 0
            b[j] = m


def enumerate_partitions(K):
    for rgs in iter_restricted_growth_strings(K):
        yield Partition.from_labels(rgs)


def rgs_array(K):
    """All restricted growth strings as a ``(Bell(K), K)`` int array."""
    return np.array(list(iter_restricted_growth_strings(K)), dtype=np.int64).reshape(-1, K)


def random_partition(K, n_clusters, rng):
    """Uniform random partition of ``K`` elements into exactly ``n_clusters``.

    Draws uniform labelings and rejects those that leave a label unused;
    every such partition has the same number (``n_clusters!``) of labelings.
    """
    if not 1 <= n_clusters <= K:
        raise ValueError(f"need 1 <= n_clusters <= K, got {n_clusters} for K={K}")
    while True:
        labels = rng.integers(0, n_clusters, size=K)
        if np.unique(labels).size == n_clusters:
            return Partition.from_labels(labels)


# -- assignment and partition distance --------------------------------------

def _hungarian_min(cost):
    """O(n^3) shortest-augmenting-path Hungarian method (row -> column)."""
    n = cost.shape[0]
    u = np.zeros(n + 1)
    v = np.zeros(n + 1)
    p = np.zeros(n + 1, dtype=int)  # p[j]: row matched to column j (1-based)
    way = np.zeros(n + 1, dtype=int)
    for i in range(1, n + 1):
        p[0] = i
        j0 = 0
        minv = np.full(n + 1, np.inf)
        used = np.zeros(n + 1, dtype=bool)
        while True:
            used[j0] = True
            i0 = p[j0]
            free = ~used[1:]
            cur = cost[i0 - 1] - u[i0] - v[1:]
            better = free & (cur < minv[1:])
            minv[1:][better] = cur[better]
            way[1:][better] = j0
            cand = np.where(free, minv[1:], np.inf)
            j1 = int(np.argmin(cand)) + 1
            delta = cand[j1 - 1]
            used_idx = np.flatnonzero(used)
            u[p[used_idx]] += delta
            v[used_idx] -= delta
            minv[1:][free] -= delta
            j0 = j1
            if p[j0] == 0:
                break
        while True:
            j1 = way[j0]
            p[j0] = p[j1]
            j0 = j1
            if j0 == 0:
                break
    pairing = np.empty(n, dtype=int)
    pairing[p[1:] - 1] = np.arange(n)
    return pairing


def max_assignment(M):
    """Maximum-weight perfect matching of a square non-negative matrix.

    Returns
    -------
    total : float
    pairing : ndarray of int, ``pairing[i]`` is the column given to row ``i``
    """
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError(f"assignment matrix must be square, got {M.shape}")
    if M.size and M.min() < 0:
        raise ValueError("assignment weights must be non-negative")
    if M.shape[0] == 0:
        return 0.0, np.zeros(0, dtype=int)
    pairing = _hungarian_min(M.max() - M)
    total = float(M[np.arange(M.shape[0]), pairing].sum())
    return total, pairing


def intersection_matrix(P1, P2):
    """Square matrix of cluster overlap sizes, padded with empty clusters."""
    if P1.K != P2.K:
        raise ValueError(f"partitions have different K: {P1.K} != {P2.K}")
    n = max(P1.n_clusters, P2.n_clusters)
    M = np.zeros((n, n))
    l1 = P1.labels()
    l2 = P2.labels()
    np.add.at(M, (np.asarray(l1, dtype=int), np.asarray(l2, dtype=int)), 1.0)
    return M


def partition_distance(P1, P2):
    """Fewest elements that must move between clusters to turn ``P1`` into ``P2``."""
    total, _ = max_assignment(intersection_matrix(P1, P2))
    return P1.K - int(round(total))


# -- equivariance groups ----------------------------------------------------

def group_member(pi, P):
    """Whether permutation ``pi`` lies in the union of within-cluster
    permutation sets of ``P``."""
    pi = tuple(int(v) for v in pi)
    if len(pi) != P.K:
        raise ValueError(f"permutation has length {len(pi)}, partition K={P.K}")
    if sorted(pi) != list(range(P.K)):
        raise ValueError("not a permutation")
    moved = {i for i, j in enumerate(pi) if i != j}
    if not moved:
        return True
    return any(moved <= set(c) for c in P.clusters)


def equivariance_group(P):
    """Set of permutations (as tuples) in the union over clusters."""
    if P.K > MAX_GROUP_K:
        raise CapacityError(f"K={P.K} exceeds the group enumeration limit {MAX_GROUP_K}")
    return {pi for pi in itertools.permutations(range(P.K)) if group_member(pi, P)}


def symmetric_difference_size(P1, P2):
    if P1.K != P2.K:
        raise ValueError(f"partitions have different K: {P1.K} != {P2.K}")
    return len(equivariance_group(P1) ^ equivariance_group(P2))


def verify_claim3(P1, P2):
    """Check ``PD <= |G1 ^ G2| <= (K! - 1) PD``."""
    pd = partition_distance(P1, P2)
    sd = symmetric_difference_size(P1, P2)
    return pd <= sd <= (math.factorial(P1.K) - 1) * pd


# -- text format --------------------------------------------------------------

def format_partition(P):
    return f"K {P.K}\n" + " ".join(map(str, P.labels())) + "\n"


def parse_partition(text):
    """Parse the two-line ``K <n>`` / label-string format."""
    lines = [ln for ln in text.splitlines()]
    while lines and not lines[-1].strip():
        lines.pop()
    if len(lines) != 2:
        raise PartitionFormatError(f"expected 2 lines, found {len(lines)}")
    head = lines[0].split()
    if len(head) != 2 or head[0] != "K":
        raise PartitionFormatError("expected 'K <integer>'", line=1, column=1)
    try:
        K = int(head[1])
    except ValueError:
        raise PartitionFormatError(f"bad integer {head[1]!r}", line=1,
                                   column=lines[0].index(head[1]) + 1) from None
    if K < 1:
        raise PartitionFormatError("K must be positive", line=1)
    labels = []
    col = 0
    for tok in lines[1].split():
        col = lines[1].index(tok, col)
        try:
            lab = int(tok)
        except ValueError:
            raise PartitionFormatError(f"bad label {tok!r}", line=2, column=col + 1) from None
        limit = max(labels, default=-1) + 1
        if lab < 0 or lab > limit:
            raise PartitionFormatError(
                f"label {lab} breaks restricted growth (next allowed <= {limit})",
                line=2, column=col + 1)
        labels.append(lab)
        col += len(tok)
    if len(labels) != K:
        raise PartitionFormatError(f"expected {K} labels, found {len(labels)}", line=2)
    return Partition.from_labels(labels)


def read_partition(path):
    with open(path) as fh:
        return parse_partition(fh.read())


def write_partition(P, path):
    with open(path, "w") as fh:
        fh.write(format_partition(P))
