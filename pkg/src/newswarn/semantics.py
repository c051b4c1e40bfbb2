"""Embedding-based phrase distances, seed expansion, and feature clustering.

Word mover's distance between two short phrases is the exact minimum-cost
transport between uniform distributions over their token embeddings under a
Euclidean ground cost. With at most three tokens per phrase the transportation
polytope is tiny, so the solver enumerates the spanning trees of the complete
bipartite token graph: every vertex of the polytope is the basic solution of
one such tree, and the optimum sits at a vertex.
"""

from __future__ import annotations

import itertools
import json
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import DataError
from .textutil import normalize_ngram, tokenize

MAX_PHRASE_TOKENS = 3


@dataclass(frozen=True)
class EmbeddingTable:
    vectors: dict[str, np.ndarray] = field(repr=False)
    dim: int = 0

    def __len__(self):
        return len(self.vectors)

    def __contains__(self, word):
        return word in self.vectors

    def get(self, word: str) -> np.ndarray:
        try:
            return self.vectors[word]
        except KeyError:
            raise DataError(f"word {word!r} not in embedding vocabulary") from None


def load_embeddings(path) -> EmbeddingTable:
    """Parse a word2vec-style text file ("V D" header, then word + D floats)."""
    vectors: dict[str, np.ndarray] = {}
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().split()
        if len(header) != 2:
            raise DataError(f"{path}:1: expected 'V D' header")
        try:
            count, dim = int(header[0]), int(header[1])
        except ValueError:
            raise DataError(f"{path}:1: expected integer 'V D' header") from None
        for lineno, line in enumerate(fh, start=2):
            parts = line.split()
            if not parts:
                continue
            word = parts[0]
            if len(parts) - 1 != dim:
                raise DataError(f"{path}:{lineno}: expected {dim} values, found {len(parts) - 1}")
            try:
                vec = np.array([float(x) for x in parts[1:]])
            except ValueError:
                raise DataError(f"{path}:{lineno}: non-numeric vector component") from None
            if not np.all(np.isfinite(vec)):
                raise DataError(f"{path}:{lineno}: non-finite vector component")
            if word in vectors:
                warnings.warn(f"{path}:{lineno}: duplicate word {word!r}, keeping last")
            vec.flags.writeable = False
            vectors[word] = vec
    if len(vectors) != count:
        warnings.warn(f"{path}: header declares {count} words, parsed {len(vectors)}")
    return EmbeddingTable(vectors=vectors, dim=dim)


@dataclass(frozen=True)
class TransportPlan:
    """Token-level flow matrix between two phrases; marginals uniform."""

    source_tokens: tuple[str, ...]
    target_tokens: tuple[str, ...]
    flows: np.ndarray
    cost: float


def _phrase_tokens(phrase, emb: EmbeddingTable, skip_oov: bool) -> list[str]:
    toks = list(tokenize(phrase)) if isinstance(phrase, str) else [t.lower() for t in phrase]
    if not toks:
        raise DataError("empty phrase")
    if len(toks) > MAX_PHRASE_TOKENS:
        raise DataError(f"phrase {' '.join(toks)!r} longer than {MAX_PHRASE_TOKENS} tokens")
    if skip_oov:
        toks = [t for t in toks if t in emb]
        if not toks:
            raise DataError("phrase has no in-vocabulary token")
    else:
        for t in toks:
            if t not in emb:
                raise DataError(f"word {t!r} not in embedding vocabulary")
    return toks


def _solve_transport(cost: np.ndarray) -> tuple[float, np.ndarray]:
    """Exact uniform-marginal transport via bipartite spanning-tree enumeration."""
    m, n = cost.shape
    supply = np.full(m, 1.0 / m)
    demand = np.full(n, 1.0 / n)
    edges = [(i, j) for i in range(m) for j in range(n)]
    n_nodes = m + n
    best_cost = np.inf
    best_flows = None
    for basis in itertools.combinations(edges, n_nodes - 1):
        # Degree count and leaf elimination; non-trees die on a no-leaf cycle.
        degree = [0] * n_nodes
        incident: list[list[int]] = [[] for _ in range(n_nodes)]
        for k, (i, j) in enumerate(basis):
            degree[i] += 1
            degree[m + j] += 1
            incident[i].append(k)
            incident[m + j].append(k)
        balance = np.concatenate([supply, -demand])
        flows = np.zeros(len(basis))
        used = [False] * len(basis)
        leaves = [v for v in range(n_nodes) if degree[v] == 1]
        solved = 0
        feasible = True
        while leaves:
            v = leaves.pop()
            edge_k = next((k for k in incident[v] if not used[k]), None)
            if edge_k is None:
                continue
            i, j = basis[edge_k]
            other = m + j if v == i else i
            flow = balance[v] if v < m else -balance[v]
            flows[edge_k] = flow
            used[edge_k] = True
            solved += 1
            balance[v] = 0.0
            balance[other] += flow if other >= m else -flow
            degree[v] -= 1
            degree[other] -= 1
            if degree[other] == 1:
                leaves.append(other)
        if solved != len(basis) or np.any(flows < -1e-12):
            feasible = solved == len(basis) and not np.any(flows < -1e-12)
        if not feasible:
            continue
        flows = np.clip(flows, 0.0, None)
        total = sum(f * cost[i, j] for f, (i, j) in zip(flows, basis))
        if total < best_cost - 1e-15:
            best_cost = total
            best_flows = (tuple(basis), flows.copy())
    if best_flows is None:
        raise DataError("no feasible transport plan")
    plan = np.zeros((m, n))
    for f, (i, j) in zip(best_flows[1], best_flows[0]):
        plan[i, j] = f
    return float(best_cost), plan


def transport_plan(a, b, emb: EmbeddingTable, skip_oov: bool = False) -> TransportPlan:
    ta = _phrase_tokens(a, emb, skip_oov)
    tb = _phrase_tokens(b, emb, skip_oov)
    va = np.stack([emb.get(t) for t in ta])
    vb = np.stack([emb.get(t) for t in tb])
    cost = np.linalg.norm(va[:, None, :] - vb[None, :, :], axis=2)
    total, plan = _solve_transport(cost)
    return TransportPlan(tuple(ta), tuple(tb), plan, total)


def wmd(a, b, emb: EmbeddingTable, skip_oov: bool = False) -> float:
    """Word mover's distance between two 1..3-token phrases."""
    return transport_plan(a, b, emb, skip_oov).cost


def enumerate_candidates(index, floor: int = 1000) -> list[str]:
    """All corpus unigrams, plus bi/trigrams occurring strictly more than ``floor`` times."""
    out = []
    for gram, count in index.ngram_occurrences.items():
        if " " not in gram or count > floor:
            out.append(gram)
    return sorted(out)


def expand_seeds(seeds, candidates, emb: EmbeddingTable, radius: float = 6.0,
                 skip_oov: bool = True):
    """Candidates within WMD ``radius`` (strict) of any seed, tagged by nearest seed.

    Candidates identical to a seed are not expansions. Candidates or seeds
    with no in-vocabulary token are skipped (counted, warned once).
    """
    from .frames import TextFeature

    seed_set = {normalize_ngram(s if isinstance(s, str) else s.ngram) for s in seeds}
    usable_seeds = []
    for s in sorted(seed_set):
        try:
            _phrase_tokens(s, emb, skip_oov)
            usable_seeds.append(s)
        except DataError:
            continue
    if not usable_seeds:
        raise DataError("no seed has embedding coverage")
    dropped = len(seed_set) - len(usable_seeds)
    skipped_candidates = 0
    out = []
    for cand in sorted(normalize_ngram(c) for c in candidates):
        if cand in seed_set:
            continue
        best = None
        try:
            for s in usable_seeds:
                d = wmd(cand, s, emb, skip_oov)
                if best is None or d < best[0]:
                    best = (d, s)
        except DataError:
            skipped_candidates += 1
            continue
        if best is not None and best[0] < radius:
            out.append(TextFeature(ngram=cand, provenance=("expanded",),
                                   source_seed=best[1], distance=best[0]))
    if dropped or skipped_candidates:
        warnings.warn(
            f"expansion skipped {dropped} seeds and {skipped_candidates} candidates "
            "without embedding coverage"
        )
    return out


@dataclass(frozen=True)
class FeatureCluster:
    cluster_id: int
    label: str
    members: tuple[str, ...]


def pairwise_distances(features, emb: EmbeddingTable, skip_oov: bool = True) -> np.ndarray:
    feats = [normalize_ngram(f) for f in features]
    k = len(feats)
    dist = np.zeros((k, k))
    for i in range(k):
        for j in range(i + 1, k):
            dist[i, j] = dist[j, i] = wmd(feats[i], feats[j], emb, skip_oov)
    return dist


def cluster_features(features, emb: EmbeddingTable, k: int = 12, labels=None,
                     skip_oov: bool = True) -> list[FeatureCluster]:
    """Average-linkage agglomerative clustering on pairwise WMD.

    Deterministic given input order: merges the lowest-indexed pair among
    those at minimum average distance.
    """
    feats = [normalize_ngram(f) for f in features]
    if k < 1 or k > len(feats):
        raise DataError(f"cluster count {k} outside 1..{len(feats)}")
    base = pairwise_distances(feats, emb, skip_oov)
    clusters: list[list[int]] = [[i] for i in range(len(feats))]

    def avg_dist(a: list[int], b: list[int]) -> float:
        return float(np.mean([base[i, j] for i in a for j in b]))

    while len(clusters) > k:
        best = None
        for p in range(len(clusters)):
            for q in range(p + 1, len(clusters)):
                d = avg_dist(clusters[p], clusters[q])
                if best is None or d < best[0] - 1e-15:
                    best = (d, p, q)
        _, p, q = best
        clusters[p] = clusters[p] + clusters[q]
        del clusters[q]

    clusters.sort(key=lambda c: min(c))
    out = []
    for cid, members in enumerate(clusters, start=1):
        label = labels[cid - 1] if labels and cid - 1 < len(labels) else f"cluster-{cid}"
        out.append(FeatureCluster(cid, label, tuple(feats[i] for i in sorted(members))))
    return out


def cluster_validation(clusters, factor_series) -> tuple[float, float]:
    """Mean pairwise Pearson correlation within vs. across clusters.

    ``factor_series`` maps feature n-gram to its monthly Series at a common
    aggregation level. Constant series are excluded with a warning.
    """
    from .series import align

    assignment = {}
    for c in clusters:
        for f in c.members:
            assignment[f] = c.cluster_id
    feats = []
    for f in sorted(assignment):
        s = factor_series.get(f)
        if s is None:
            raise DataError(f"no factor series for clustered feature {f!r}")
        if np.ptp(s.values) == 0.0:
            warnings.warn(f"constant factor series for {f!r} excluded from cluster validation")
            continue
        feats.append(f)
    intra, inter = [], []
    for i in range(len(feats)):
        for j in range(i + 1, len(feats)):
            a, b, _ = align(factor_series[feats[i]], factor_series[feats[j]])
            if np.ptp(a) == 0.0 or np.ptp(b) == 0.0:
                continue
            r = float(np.corrcoef(a, b)[0, 1])
            if assignment[feats[i]] == assignment[feats[j]]:
                intra.append(r)
            else:
                inter.append(r)
    if not intra or not inter:
        warnings.warn("cluster validation lacks within- or across-cluster pairs")
    return (
        float(np.mean(intra)) if intra else float("nan"),
        float(np.mean(inter)) if inter else float("nan"),
    )


def similarity_edges(features, emb: EmbeddingTable, skip_oov: bool = True):
    """(feature_a, feature_b, distance) rows for external network layout."""
    feats = sorted(normalize_ngram(f) for f in features)
    dist = pairwise_distances(feats, emb, skip_oov)
    return [
        (feats[i], feats[j], float(dist[i, j]))
        for i in range(len(feats))
        for j in range(i + 1, len(feats))
    ]


def save_clusters(path, clusters) -> None:
    rows = [
        {"cluster_id": c.cluster_id, "label": c.label, "members": list(c.members)}
        for c in clusters
    ]
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(rows, fh, indent=1, sort_keys=True)
        fh.write("\n")


def load_clusters(path) -> list[FeatureCluster]:
    with open(path, "r", encoding="utf-8") as fh:
        rows = json.load(fh)
    return [
        FeatureCluster(int(r["cluster_id"]), r["label"], tuple(r["members"])) for r in rows
    ]
