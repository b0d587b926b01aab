//! Uniform hypergraphs and the combinatorial primitives the constructions
//! consume.
//!
//! Edges are stored by colexicographic rank. A graph keeps the sorted rank
//! list for iteration and, when `C(n, r)` is small enough, a bit table for
//! constant time membership.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;

use crate::combin::{self, binomial, binomial_u64, for_each_subset, rank_colex, unrank_colex};
use crate::error::{Error, Result};

/// Largest `C(n, r)` for which a membership bit table is kept (bits).
const DENSE_TABLE_LIMIT: u64 = 1 << 24;

/// A strictly increasing list of vertex ids.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct VertexSet(Vec<usize>);

impl VertexSet {
    /// Sorts the input; repeated vertices are rejected.
    pub fn new(mut members: Vec<usize>) -> Result<Self> {
        members.sort_unstable();
        if members.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidSubset(format!("repeated vertex in {members:?}")));
        }
        Ok(VertexSet(members))
    }

    /// Caller guarantees `members` is strictly increasing.
    pub fn from_sorted(members: Vec<usize>) -> Self {
        debug_assert!(members.windows(2).all(|w| w[0] < w[1]));
        VertexSet(members)
    }

    pub fn range(n: usize) -> Self {
        VertexSet((0..n).collect())
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<usize> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, v: usize) -> bool {
        self.0.binary_search(&v).is_ok()
    }

    pub fn is_subset_of(&self, other: &VertexSet) -> bool {
        combin::is_subset(&self.0, &other.0)
    }

    pub fn intersection_size(&self, other: &VertexSet) -> usize {
        combin::intersection_size(&self.0, &other.0)
    }

    pub fn union(&self, other: &VertexSet) -> VertexSet {
        let mut v = combin::merge_sorted(&self.0, &other.0);
        v.dedup();
        VertexSet(v)
    }

    pub fn max_vertex(&self) -> Option<usize> {
        self.0.last().copied()
    }

    pub fn rank(&self) -> u64 {
        rank_colex(&self.0)
    }

    pub fn iter(&self) -> core::slice::Iter<'_, usize> {
        self.0.iter()
    }

    /// Colexicographic comparison (compares largest elements first).
    pub fn cmp_colex(&self, other: &VertexSet) -> Ordering {
        self.0
            .iter()
            .rev()
            .cmp(other.0.iter().rev())
            .then(self.0.len().cmp(&other.0.len()))
    }

    /// Maps every member through `labels` (position to global id).
    pub fn relabel(&self, labels: &[usize]) -> VertexSet {
        let mut v: Vec<usize> = self.0.iter().map(|&i| labels[i]).collect();
        v.sort_unstable();
        VertexSet(v)
    }
}

impl core::ops::Deref for VertexSet {
    type Target = [usize];
    fn deref(&self) -> &[usize] {
        &self.0
    }
}

/// An `r`-uniform hypergraph on vertices `0..n`.
#[derive(Clone, Debug)]
pub struct Hypergraph {
    n: usize,
    r: usize,
    edges: Vec<u64>,
    table: Option<Vec<u64>>,
}

impl PartialEq for Hypergraph {
    fn eq(&self, other: &Self) -> bool {
        self.n == other.n && self.r == other.r && self.edges == other.edges
    }
}
impl Eq for Hypergraph {}

/// Validating constructor for user supplied graphs: `2 <= r <= n`, every
/// edge has `r` distinct vertices below `n`, no edge is repeated.
pub fn build_graph(n: usize, r: usize, edges: &[Vec<usize>]) -> Result<Hypergraph> {
    if r < 2 {
        return Err(Error::Parameter(format!("uniformity r = {r} must be at least 2")));
    }
    if r > n {
        return Err(Error::Parameter(format!("uniformity r = {r} exceeds n = {n}")));
    }
    if binomial_u64(n, r).map_or(true, |c| c >= 1 << 62) {
        return Err(Error::Parameter(format!("C({n}, {r}) too large for rank encoding")));
    }
    let mut ranks = Vec::with_capacity(edges.len());
    for e in edges {
        if e.len() != r {
            return Err(Error::EdgeArity {
                edge: e.clone(),
                expected: r,
                found: e.len(),
            });
        }
        if let Some(&v) = e.iter().find(|&&v| v >= n) {
            return Err(Error::VertexOutOfRange { vertex: v, n });
        }
        let set = VertexSet::new(e.clone())?;
        ranks.push((set.rank(), set));
    }
    ranks.sort_unstable_by_key(|(rank, _)| *rank);
    if let Some(w) = ranks.windows(2).find(|w| w[0].0 == w[1].0) {
        return Err(Error::DuplicateEdge(w[1].1.clone().into_vec()));
    }
    Ok(Hypergraph::from_sorted_ranks(
        n,
        r,
        ranks.into_iter().map(|(k, _)| k).collect(),
    ))
}

/// Colex rank of an `r`-subset of `0..n`.
pub fn rank_edge(n: usize, r: usize, edge: &VertexSet) -> Result<u64> {
    if edge.len() != r {
        return Err(Error::EdgeArity {
            edge: edge.as_slice().to_vec(),
            expected: r,
            found: edge.len(),
        });
    }
    if let Some(v) = edge.max_vertex().filter(|&v| v >= n) {
        return Err(Error::VertexOutOfRange { vertex: v, n });
    }
    Ok(edge.rank())
}

/// Inverse of [`rank_edge`].
pub fn unrank_edge(n: usize, r: usize, rank: u64) -> Result<VertexSet> {
    let total = binomial(n as i64, r as i64);
    if (rank as u128) >= total {
        return Err(Error::InvalidSubset(format!("rank {rank} outside [0, C({n},{r}))")));
    }
    Ok(VertexSet(unrank_colex(rank, r)))
}

impl Hypergraph {
    pub(crate) fn from_sorted_ranks(n: usize, r: usize, edges: Vec<u64>) -> Self {
        debug_assert!(edges.windows(2).all(|w| w[0] < w[1]));
        let total = binomial(n as i64, r as i64) as u64;
        let table = (total <= DENSE_TABLE_LIMIT && !edges.is_empty()).then(|| {
            let mut t = vec![0u64; (total as usize).div_ceil(64)];
            for &e in &edges {
                t[(e / 64) as usize] |= 1 << (e % 64);
            }
            t
        });
        Hypergraph { n, r, edges, table }
    }

    /// `K_n^r`.
    pub fn complete(n: usize, r: usize) -> Result<Self> {
        build_graph(n, r, &[])?;
        let total = binomial(n as i64, r as i64) as u64;
        Ok(Self::from_sorted_ranks(n, r, (0..total).collect()))
    }

    pub fn empty(n: usize, r: usize) -> Result<Self> {
        build_graph(n, r, &[])
    }

    /// `K_n^r` with the given edges removed (repeats removed once).
    pub fn complete_minus(n: usize, r: usize, removed: &[VertexSet]) -> Result<Self> {
        let mut gone = Vec::with_capacity(removed.len());
        for e in removed {
            gone.push(rank_edge(n, r, e)?);
        }
        gone.sort_unstable();
        gone.dedup();
        let complete = Self::complete(n, r)?;
        let edges = complete
            .edges
            .into_iter()
            .filter(|e| gone.binary_search(e).is_err())
            .collect();
        Ok(Self::from_sorted_ranks(n, r, edges))
    }

    pub fn complete_minus_matchings(n: usize, r: usize, matchings: &[Matching]) -> Result<Self> {
        let removed: Vec<VertexSet> = matchings.iter().flat_map(|m| m.edges().iter().cloned()).collect();
        Self::complete_minus(n, r, &removed)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn r(&self) -> usize {
        self.r
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edge_ranks(&self) -> &[u64] {
        &self.edges
    }

    pub fn edges(&self) -> impl Iterator<Item = VertexSet> + '_ {
        self.edges.iter().map(move |&k| VertexSet(unrank_colex(k, self.r)))
    }

    pub fn contains_rank(&self, rank: u64) -> bool {
        match &self.table {
            Some(t) => {
                let w = (rank / 64) as usize;
                w < t.len() && t[w] >> (rank % 64) & 1 == 1
            }
            None => self.edges.binary_search(&rank).is_ok(),
        }
    }

    /// Membership test for a sorted vertex list.
    pub fn contains(&self, sorted: &[usize]) -> bool {
        sorted.len() == self.r && sorted.last().map_or(true, |&v| v < self.n) && self.contains_rank(rank_colex(sorted))
    }

    /// Position of an edge in the sorted rank list.
    pub fn edge_index(&self, rank: u64) -> Option<usize> {
        self.edges.binary_search(&rank).ok()
    }

    /// `true` when every `r`-subset of `sorted` is an edge.
    pub fn is_clique(&self, sorted: &[usize]) -> bool {
        let mut ok = true;
        for_each_subset(sorted, self.r, |s| {
            if ok && !self.contains(s) {
                ok = false;
            }
        });
        ok
    }

    pub fn complement(&self) -> Hypergraph {
        let total = binomial(self.n as i64, self.r as i64) as u64;
        let edges = (0..total).filter(|&k| !self.contains_rank(k)).collect();
        Self::from_sorted_ranks(self.n, self.r, edges)
    }

    /// Number of edges containing the sorted set `s`.
    pub fn codegree(&self, s: &[usize]) -> usize {
        if s.len() + 1 == self.r {
            let mut buf = Vec::with_capacity(self.r);
            (0..self.n)
                .filter(|v| s.binary_search(v).is_err())
                .filter(|&v| {
                    buf.clear();
                    buf.extend_from_slice(s);
                    let pos = buf.partition_point(|&x| x < v);
                    buf.insert(pos, v);
                    self.contains(&buf)
                })
                .count()
        } else {
            self.edges().filter(|e| combin::is_subset(s, e)).count()
        }
    }

    /// `delta_{r-1}`: minimum number of edges through an `(r-1)`-set.
    pub fn codegree_min(&self) -> usize {
        let all: Vec<usize> = (0..self.n).collect();
        let mut best = usize::MAX;
        for_each_subset(&all, self.r - 1, |s| {
            best = best.min(self.codegree(s));
        });
        if best == usize::MAX {
            0
        } else {
            best
        }
    }

    /// Largest codegree over `(r-1)`-sets.
    pub fn codegree_max(&self) -> usize {
        let all: Vec<usize> = (0..self.n).collect();
        let mut best = 0;
        for_each_subset(&all, self.r - 1, |s| {
            best = best.max(self.codegree(s));
        });
        best
    }

    pub fn vertex_degrees(&self) -> Vec<usize> {
        let mut deg = vec![0usize; self.n];
        for e in self.edges() {
            for &v in e.iter() {
                deg[v] += 1;
            }
        }
        deg
    }

    /// `Delta_1`: largest vertex degree.
    pub fn vertex_degree_max(&self) -> usize {
        self.vertex_degrees().into_iter().max().unwrap_or(0)
    }

    /// Link of `u`, restricted to the vertices that share an edge with `u`.
    pub fn link_graph(&self, u: usize) -> Result<LinkGraph> {
        if u >= self.n {
            return Err(Error::VertexOutOfRange { vertex: u, n: self.n });
        }
        let mut rest: Vec<Vec<usize>> = Vec::new();
        let mut labels: Vec<usize> = Vec::new();
        for e in self.edges().filter(|e| e.contains(u)) {
            let others: Vec<usize> = e.iter().copied().filter(|&w| w != u).collect();
            labels.extend_from_slice(&others);
            rest.push(others);
        }
        labels.sort_unstable();
        labels.dedup();
        let mut ranks: Vec<u64> = rest
            .iter()
            .map(|e| {
                let local: Vec<usize> = e.iter().map(|w| labels.binary_search(w).unwrap()).collect();
                rank_colex(&local)
            })
            .collect();
        ranks.sort_unstable();
        Ok(LinkGraph {
            graph: Hypergraph::from_sorted_ranks(labels.len(), self.r - 1, ranks),
            labels,
        })
    }

    /// Divisibility: for every `i < r` and every `i`-set `S`,
    /// `C(q-i, r-i)` divides the number of edges containing `S`.
    pub fn is_divisible(&self, q: usize) -> Result<bool> {
        if q <= self.r {
            return Err(Error::Parameter(format!("q = {q} must exceed r = {}", self.r)));
        }
        for i in 0..self.r {
            let modulus = binomial((q - i) as i64, (self.r - i) as i64) as usize;
            let mut counts: BTreeMap<u64, usize> = BTreeMap::new();
            for e in self.edges() {
                for_each_subset(&e, i, |s| {
                    *counts.entry(rank_colex(s)).or_default() += 1;
                });
            }
            if counts.values().any(|&c| c % modulus != 0) {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// All `q`-cliques in colex order.
    pub fn enumerate_cliques(&self, q: usize) -> Vec<VertexSet> {
        let mut out = Vec::new();
        self.for_each_clique(q, |c| {
            out.push(VertexSet(c.to_vec()));
            true
        });
        out.sort_unstable_by(|a, b| a.cmp_colex(b));
        out
    }

    /// Streams every `q`-clique (lexicographic order) to `f`; stops early
    /// when `f` returns `false`. Returns `false` if stopped early.
    pub fn for_each_clique<F: FnMut(&[usize]) -> bool>(&self, q: usize, mut f: F) -> bool {
        if q > self.n {
            return true;
        }
        let cand: Vec<usize> = if self.r == 1 {
            (0..self.n).filter(|&v| self.contains(&[v])).collect()
        } else {
            (0..self.n).collect()
        };
        let mut clique = Vec::with_capacity(q);
        self.extend_clique(&mut clique, &cand, q, &mut f)
    }

    fn extend_clique<F: FnMut(&[usize]) -> bool>(
        &self,
        clique: &mut Vec<usize>,
        cand: &[usize],
        q: usize,
        f: &mut F,
    ) -> bool {
        if clique.len() == q {
            return f(clique);
        }
        let need = q - clique.len();
        for (pos, &v) in cand.iter().enumerate() {
            if cand.len() - pos < need {
                break;
            }
            let next: Vec<usize> = if need == 1 {
                Vec::new()
            } else {
                cand[pos + 1..]
                    .iter()
                    .copied()
                    .filter(|&w| self.joins(clique, v, w))
                    .collect()
            };
            clique.push(v);
            let go_on = self.extend_clique(clique, &next, q, f);
            clique.pop();
            if !go_on {
                return false;
            }
        }
        true
    }

    /// Every edge of `clique + {v, w}` through both `v` and `w` is present.
    fn joins(&self, clique: &[usize], v: usize, w: usize) -> bool {
        if self.r < 2 || clique.len() + 2 < self.r {
            return true;
        }
        let mut ok = true;
        let mut buf = Vec::with_capacity(self.r);
        for_each_subset(clique, self.r - 2, |s| {
            if !ok {
                return;
            }
            buf.clear();
            buf.extend_from_slice(s);
            buf.push(v);
            buf.push(w);
            buf.sort_unstable();
            ok = self.contains(&buf);
        });
        ok
    }

    /// Induced subgraph on `s`, relabeled so the `i`-th member of `s`
    /// becomes vertex `i`.
    pub fn induced(&self, s: &VertexSet) -> Result<Hypergraph> {
        if s.len() < self.r {
            return Err(Error::Parameter(format!(
                "induced set has {} < r = {} vertices",
                s.len(),
                self.r
            )));
        }
        if let Some(v) = s.max_vertex().filter(|&v| v >= self.n) {
            return Err(Error::VertexOutOfRange { vertex: v, n: self.n });
        }
        let local: Vec<usize> = (0..s.len()).collect();
        let mut edges = Vec::new();
        let mut buf = Vec::with_capacity(self.r);
        for_each_subset(&local, self.r, |l| {
            buf.clear();
            buf.extend(l.iter().map(|&i| s[i]));
            if self.contains(&buf) {
                edges.push(rank_colex(l));
            }
        });
        edges.sort_unstable();
        Ok(Hypergraph::from_sorted_ranks(s.len(), self.r, edges))
    }
}

/// Link graph at a vertex together with the original ids of its vertices.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LinkGraph {
    /// `(r-1)`-uniform graph on `labels.len()` vertices.
    pub graph: Hypergraph,
    /// `labels[i]` is the host vertex behind local vertex `i`.
    pub labels: Vec<usize>,
}

/// Pairwise vertex-disjoint `r`-sets in `0..n`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Matching {
    n: usize,
    r: usize,
    edges: Vec<VertexSet>,
}

impl Matching {
    pub fn new(n: usize, r: usize, edges: Vec<Vec<usize>>) -> Result<Self> {
        let mut used = vec![false; n];
        let mut out = Vec::with_capacity(edges.len());
        for e in edges {
            if e.len() != r {
                return Err(Error::EdgeArity {
                    found: e.len(),
                    edge: e,
                    expected: r,
                });
            }
            let set = VertexSet::new(e)?;
            for &v in set.iter() {
                if v >= n {
                    return Err(Error::VertexOutOfRange { vertex: v, n });
                }
                if used[v] {
                    return Err(Error::InvalidSubset(format!("matching edges share vertex {v}")));
                }
                used[v] = true;
            }
            out.push(set);
        }
        out.sort_unstable_by(|a, b| a.cmp_colex(b));
        Ok(Matching { n, r, edges: out })
    }

    pub fn empty(n: usize, r: usize) -> Self {
        Matching {
            n,
            r,
            edges: Vec::new(),
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn r(&self) -> usize {
        self.r
    }

    pub fn edges(&self) -> &[VertexSet] {
        &self.edges
    }

    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    /// `owner[v] = Some(i)` when `v` lies on matching edge `i`.
    pub fn owners(&self) -> Vec<Option<usize>> {
        let mut owner = vec![None; self.n];
        for (i, e) in self.edges.iter().enumerate() {
            for &v in e.iter() {
                owner[v] = Some(i);
            }
        }
        owner
    }

    /// Matching edges lying inside `set`, relabeled to positions in `set`.
    pub fn restrict(&self, set: &VertexSet) -> Matching {
        let edges: Vec<VertexSet> = self
            .edges
            .iter()
            .filter(|e| e.is_subset_of(set))
            .map(|e| VertexSet(e.iter().map(|v| set.as_slice().binary_search(v).unwrap()).collect()))
            .collect();
        let mut m = Matching {
            n: set.len(),
            r: self.r,
            edges,
        };
        m.edges.sort_unstable_by(|a, b| a.cmp_colex(b));
        m
    }
}
