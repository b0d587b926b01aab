//! Exploration orderings, the uniform `k`-set family packing, its exact and
//! Monte Carlo deficiency, and the tail bound on high complement degrees.

use alloc::format;
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use num_bigint::BigUint;
use num_traits::{ToPrimitive, Zero};
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::combin::{binomial, binomial_big, for_each_subset};
use crate::error::{Error, Result};
use crate::hypercore::{Hypergraph, VertexSet};
use crate::packing::{ExplicitPacking, Family, PackingView};
use crate::rational::{binom_q, from_biguint, Rational};

/// An ordering of `V(J) \ X` and the positions that complete an edge.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ExplorationResult {
    pub ordering: Vec<usize>,
    /// Positions `i` (0-based) such that some edge through `ordering[i]`
    /// lies inside `X ∪ ordering[..=i]`.
    pub good_indices: Vec<usize>,
    pub good_count: usize,
}

/// Greedy ordering: take the smallest unplaced vertex `u`, pick an edge
/// through `u` needing the fewest unplaced vertices, place those vertices
/// and then `u`.
pub fn exploration_ordering(j: &Hypergraph, x: &VertexSet) -> Result<ExplorationResult> {
    let n = j.n();
    if let Some(v) = x.max_vertex().filter(|&v| v >= n) {
        return Err(Error::VertexOutOfRange { vertex: v, n });
    }
    let edges: Vec<VertexSet> = j.edges().collect();
    let mut incident: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (i, e) in edges.iter().enumerate() {
        for &v in e.iter() {
            incident[v].push(i);
        }
    }
    if let Some(v) = (0..n).find(|&v| !x.contains(v) && incident[v].is_empty()) {
        return Err(Error::Precondition(format!("vertex {v} outside X has degree 0")));
    }
    let mut placed: Vec<bool> = (0..n).map(|v| x.contains(v)).collect();
    let mut ordering = Vec::with_capacity(n - x.len());
    while let Some(u) = (0..n).find(|&v| !placed[v]) {
        let best = incident[u]
            .iter()
            .min_by_key(|&&i| edges[i].iter().filter(|&&w| !placed[w]).count())
            .copied()
            .expect("degree checked above");
        for &w in edges[best].iter() {
            if w != u && !placed[w] {
                placed[w] = true;
                ordering.push(w);
            }
        }
        placed[u] = true;
        ordering.push(u);
    }
    let mut position = vec![None; n];
    for (i, &v) in ordering.iter().enumerate() {
        position[v] = Some(i);
    }
    let mut good = vec![false; ordering.len()];
    for e in &edges {
        if let Some(last) = e.iter().filter_map(|&v| position[v]).max() {
            good[last] = true;
        }
    }
    let good_indices: Vec<usize> = (0..ordering.len()).filter(|&i| good[i]).collect();
    Ok(ExplorationResult {
        good_count: good_indices.len(),
        good_indices,
        ordering,
    })
}

/// Weight `1 / C(n - r, k - r)` on every `k`-set `S` whose induced
/// subgraph has complement (within `K_k^r`) of maximum degree at most `m`.
#[derive(Clone, Debug)]
pub struct UniformFamilyPacking {
    host: Arc<Hypergraph>,
    k: usize,
    m: usize,
    weight: Rational,
    non_edges: Vec<VertexSet>,
}

pub fn uniform_family_packing(g: &Hypergraph, k: usize, m: usize) -> Result<UniformFamilyPacking> {
    let (n, r) = (g.n(), g.r());
    if !(r <= k && k <= n) {
        return Err(Error::Parameter(format!("need r <= k <= n, got r={r} k={k} n={n}")));
    }
    Ok(UniformFamilyPacking {
        host: Arc::new(g.clone()),
        k,
        m,
        weight: binom_q((n - r) as i64, (k - r) as i64).recip(),
        non_edges: g.complement().edges().collect(),
    })
}

impl UniformFamilyPacking {
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn host_arc(&self) -> &Arc<Hypergraph> {
        &self.host
    }

    /// `Δ_1` of the complement of `G[S]` within the complete graph on `S`.
    pub fn complement_degree(&self, s: &[usize]) -> usize {
        let mut deg = vec![0usize; s.len()];
        for e in &self.non_edges {
            if crate::combin::is_subset(e, s) {
                for v in e.iter() {
                    deg[s.binary_search(v).unwrap()] += 1;
                }
            }
        }
        deg.into_iter().max().unwrap_or(0)
    }

    pub fn in_family(&self, s: &[usize]) -> bool {
        s.len() == self.k && self.complement_degree(s) <= self.m
    }

    /// Number of `k`-supersets of `f` outside the family.
    fn bad_supersets(&self, f: &VertexSet) -> u128 {
        let rest: Vec<usize> = (0..self.host.n()).filter(|v| !f.contains(*v)).collect();
        let mut bad = 0u128;
        let mut buf = Vec::with_capacity(self.k);
        for_each_subset(&rest, self.k - f.len(), |extra| {
            buf.clear();
            buf.extend_from_slice(f);
            buf.extend_from_slice(extra);
            buf.sort_unstable();
            if !self.in_family(&buf) {
                bad += 1;
            }
        });
        bad
    }

    fn superset_count(&self) -> u128 {
        let (n, r) = (self.host.n() as i64, self.host.r() as i64);
        binomial(n - r, self.k as i64 - r)
    }
}

impl PackingView for UniformFamilyPacking {
    fn host(&self) -> &Hypergraph {
        &self.host
    }

    fn family(&self) -> Family {
        Family::Induced { k: self.k }
    }

    fn weight(&self, element: &VertexSet) -> Rational {
        let inside = element.max_vertex().map_or(true, |v| v < self.host.n());
        if inside && self.in_family(element) {
            self.weight.clone()
        } else {
            Rational::zero()
        }
    }

    /// Enumerates the `k`-supersets of `edge`.
    fn boundary_of(&self, edge: &VertexSet) -> Rational {
        let total = self.superset_count();
        let good = total - self.bad_supersets(edge);
        Rational::new((good as u64).into(), (total as u64).into())
    }

    fn support_size_hint(&self) -> Option<usize> {
        usize::try_from(binomial(self.host.n() as i64, self.k as i64)).ok()
    }

    fn materialize(&self, limit: usize) -> Result<ExplicitPacking> {
        match self.support_size_hint() {
            Some(c) if c <= limit => {}
            _ => {
                return Err(Error::Budget(format!(
                    "C({}, {}) candidate sets exceed limit {limit}",
                    self.host.n(),
                    self.k
                )))
            }
        }
        let all: Vec<usize> = (0..self.host.n()).collect();
        let mut entries = alloc::collections::BTreeMap::new();
        for_each_subset(&all, self.k, |s| {
            if self.in_family(s) {
                entries.insert(VertexSet::from_sorted(s.to_vec()), self.weight.clone());
            }
        });
        Ok(ExplicitPacking::from_map(self.host.clone(), self.family(), entries))
    }
}

/// `1 - ∂(f)`: the fraction of `k`-supersets of `f` outside the family.
pub fn family_deficiency_exact(p: &UniformFamilyPacking, f: &VertexSet, limit: usize) -> Result<Rational> {
    if !p.host.contains(f) {
        return Err(Error::NotAnEdge(f.as_slice().to_vec()));
    }
    let total = p.superset_count();
    if total > limit as u128 {
        return Err(Error::Budget(format!(
            "{total} supersets exceed enumeration limit {limit}"
        )));
    }
    let bad = p.bad_supersets(f);
    Ok(Rational::new((bad as u64).into(), (total as u64).into()))
}

/// Samples per chunk; chunk `c` draws from ChaCha8 stream `c`.
pub const MC_CHUNK: u64 = 4096;

/// Name of the generator behind [`family_deficiency_mc`].
pub const MC_GENERATOR: &str = "ChaCha8Rng (rand_chacha 0.3), stream = chunk index";

#[derive(Clone, Debug, PartialEq)]
pub struct McEstimate {
    pub samples: u64,
    pub misses: u64,
    pub estimate: f64,
    pub std_error: f64,
    pub seed: u64,
    pub generator: String,
}

impl McEstimate {
    pub fn from_counts(samples: u64, misses: u64, seed: u64) -> Self {
        let est = misses as f64 / samples as f64;
        McEstimate {
            samples,
            misses,
            estimate: est,
            std_error: libm::sqrt(est * (1.0 - est) / samples as f64),
            seed,
            generator: MC_GENERATOR.into(),
        }
    }
}

/// Misses among the samples of one chunk. Chunks are independent, so a
/// caller may evaluate them in any order or in parallel.
pub fn mc_chunk(p: &UniformFamilyPacking, f: &VertexSet, seed: u64, chunk: u64, count: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(chunk);
    let rest: Vec<usize> = (0..p.host.n()).filter(|v| !f.contains(*v)).collect();
    let extra = p.k - f.len();
    let mut buf = Vec::with_capacity(p.k);
    let mut misses = 0;
    for _ in 0..count {
        buf.clear();
        buf.extend_from_slice(f);
        buf.extend(sample(&mut rng, rest.len(), extra).into_iter().map(|i| rest[i]));
        buf.sort_unstable();
        if !p.in_family(&buf) {
            misses += 1;
        }
    }
    misses
}

/// Splits `samples` into chunks of [`MC_CHUNK`]; returns `(chunk, count)`.
pub fn mc_chunks(samples: u64) -> impl Iterator<Item = (u64, u64)> {
    (0..samples.div_ceil(MC_CHUNK)).map(move |c| (c, MC_CHUNK.min(samples - c * MC_CHUNK)))
}

/// Monte Carlo estimate of the deficiency at `f`; deterministic in `seed`.
pub fn family_deficiency_mc(p: &UniformFamilyPacking, f: &VertexSet, samples: u64, seed: u64) -> Result<McEstimate> {
    if samples == 0 {
        return Err(Error::Parameter("need at least one sample".into()));
    }
    if !p.host.contains(f) {
        return Err(Error::NotAnEdge(f.as_slice().to_vec()));
    }
    let misses = mc_chunks(samples).map(|(c, n)| mc_chunk(p, f, seed, c, n)).sum();
    Ok(McEstimate::from_counts(samples, misses, seed))
}

#[derive(Clone, Debug, PartialEq)]
pub struct TailBoundReport {
    pub s: usize,
    /// Good positions assumed: `ceil(s / (r - 1))`.
    pub good: usize,
    /// Choices per good vertex: `floor(C(s, r-2) d n)`.
    pub pool: BigUint,
    /// The three binomial factors of `N(s)`.
    pub terms: [BigUint; 3],
    /// `N(s) / C(n - r, k - r)`, exact.
    pub ratio: Rational,
    /// `k^s d^s`, the `r = 2` form.
    pub r2_bound: Option<f64>,
    /// `(2 e^2 k)^s d^{s/(r-1)}`.
    pub power_bound: f64,
    /// Natural log of `simplified_bound`.
    pub log_simplified: f64,
    /// `((2 e^2 k)^{r-1} d)^{(m^{1/(r-1)} - r)/(r-1)}`.
    pub simplified_bound: f64,
    /// `k * simplified_bound`.
    pub per_edge_bound: f64,
    /// `d <= (2 e^2 k)^{-(r-1)}`.
    pub precondition: bool,
}

pub fn tail_bound(n: usize, r: usize, k: usize, m: usize, d: f64, s: usize) -> Result<TailBoundReport> {
    if r < 2 || k < r || n < k || s == 0 {
        return Err(Error::Parameter(format!(
            "need r >= 2, r <= k <= n, s >= 1; got n={n} r={r} k={k} s={s}"
        )));
    }
    if !(d > 0.0 && d <= 1.0) {
        return Err(Error::Parameter(format!("d = {d} must lie in (0, 1]")));
    }
    let good = s.div_ceil(r - 1);
    let pool_f = libm::floor(binomial(s as i64, r as i64 - 2) as f64 * d * n as f64);
    let pool = BigUint::from(pool_f as u128);
    let a = binomial_big_from(&pool, good);
    let b = binomial_big((n - r) as i64, (s - good) as i64);
    let c = binomial_big(n as i64 - r as i64 - s as i64, k as i64 - r as i64 - s as i64);
    let denom = binomial_big((n - r) as i64, (k - r) as i64);
    let ratio = from_biguint(&a * &b * &c) / from_biguint(denom);
    let ln2e2k = libm::log(2.0 * core::f64::consts::E * core::f64::consts::E * k as f64);
    let (rf, sf, kf) = ((r - 1) as f64, s as f64, k as f64);
    let r2_bound = (r == 2).then(|| libm::pow(kf * d, sf));
    let power_bound = libm::exp(sf * ln2e2k + sf / rf * libm::log(d));
    let exponent = (libm::pow(m as f64, 1.0 / rf) - r as f64) / rf;
    let log_simplified = exponent * (rf * ln2e2k + libm::log(d));
    let simplified_bound = libm::exp(log_simplified);
    Ok(TailBoundReport {
        s,
        good,
        pool,
        terms: [a, b, c],
        ratio,
        r2_bound,
        power_bound,
        log_simplified,
        simplified_bound,
        per_edge_bound: kf * simplified_bound,
        precondition: rf * ln2e2k + libm::log(d) <= 1e-12,
    })
}

fn binomial_big_from(n: &BigUint, k: usize) -> BigUint {
    if let Some(small) = n.to_i64() {
        return binomial_big(small, k as i64);
    }
    let mut acc = BigUint::from(1u8);
    for i in 0..k as u64 {
        acc *= n - BigUint::from(i);
        acc /= BigUint::from(i + 1);
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hypercore::build_graph;
    use crate::packing::validate;
    use crate::rational::{int, ratio, to_f64};

    fn set(v: &[usize]) -> VertexSet {
        VertexSet::new(v.to_vec()).unwrap()
    }

    #[test]
    fn exploration_examples() {
        let path = build_graph(3, 2, &[vec![0, 1], vec![1, 2]]).unwrap();
        let res = exploration_ordering(&path, &VertexSet::default()).unwrap();
        assert_eq!(res.good_count, 2);
        let one = build_graph(6, 3, &[vec![1, 3, 5]]).unwrap();
        let x = set(&[0, 2, 4]);
        let res = exploration_ordering(&one, &x).unwrap();
        assert_eq!(res.ordering.len(), 3);
        assert_eq!(res.good_count, 1);
        let res = exploration_ordering(&one, &VertexSet::range(6)).unwrap();
        assert!(res.ordering.is_empty());
        assert_eq!(res.good_count, 0);
        assert!(exploration_ordering(&one, &set(&[1])).is_err());
    }

    #[test]
    fn uniform_family_examples() {
        let k = Hypergraph::complete(7, 2).unwrap();
        let p = uniform_family_packing(&k, 4, 0).unwrap();
        assert!(validate(&p, &int(0)).pass);
        let g = Hypergraph::complete_minus(8, 2, &[set(&[0, 1])]).unwrap();
        let p1 = uniform_family_packing(&g, 4, 1).unwrap();
        assert!(validate(&p1, &int(0)).pass);
        let p0 = uniform_family_packing(&g, 4, 0).unwrap();
        assert_eq!(p0.boundary_of(&set(&[2, 3])), ratio(14, 15));
        assert_eq!(family_deficiency_exact(&p0, &set(&[2, 3]), 1000).unwrap(), ratio(1, 15));
        assert_eq!(family_deficiency_exact(&p1, &set(&[2, 3]), 1000).unwrap(), int(0));
        assert!(family_deficiency_exact(&p0, &set(&[0, 1]), 1000).is_err());
        assert!(family_deficiency_exact(&p0, &set(&[2, 3]), 10).is_err());
        let explicit = p0.materialize(1000).unwrap();
        assert_eq!(explicit.boundary_by_support(), p0.boundary_all());
    }

    #[test]
    fn monte_carlo_is_deterministic_and_close() {
        let g = Hypergraph::complete_minus(8, 2, &[set(&[0, 1])]).unwrap();
        let p0 = uniform_family_packing(&g, 4, 0).unwrap();
        let f = set(&[2, 3]);
        let a = family_deficiency_mc(&p0, &f, 20_000, 42).unwrap();
        let b = family_deficiency_mc(&p0, &f, 20_000, 42).unwrap();
        assert_eq!(a, b);
        assert!((a.estimate - 1.0 / 15.0).abs() <= 4.0 * a.std_error);
        let full = uniform_family_packing(&Hypergraph::complete(8, 2).unwrap(), 4, 0).unwrap();
        let z = family_deficiency_mc(&full, &f, 1000, 1).unwrap();
        assert_eq!((z.estimate, z.std_error), (0.0, 0.0));
    }

    #[test]
    fn tail_bound_r2_dominates_ratio() {
        for (n, k, s, d) in [(200, 10, 3, 0.01), (400, 12, 4, 0.02), (100, 8, 2, 0.05)] {
            let rep = tail_bound(n, 2, k, 4, d, s).unwrap();
            assert!(to_f64(&rep.ratio) <= rep.r2_bound.unwrap() * (1.0 + 1e-12));
        }
    }

    #[test]
    fn tail_bound_boundary_and_formula() {
        let k = 36usize;
        let two_e2k = 2.0 * core::f64::consts::E * core::f64::consts::E * k as f64;
        let d = 1.0 / (two_e2k * two_e2k);
        let rep = tail_bound(100_000, 3, k, 122, d, 8).unwrap();
        assert!((rep.simplified_bound - 1.0).abs() < 1e-9);
        let rep = tail_bound(100_000, 3, k, 122, 1e-6, 8).unwrap();
        let base = two_e2k * two_e2k * 1e-6;
        let expo = (libm::sqrt(122.0) - 3.0) / 2.0;
        assert!((rep.simplified_bound - libm::pow(base, expo)).abs() <= 1e-12 * rep.simplified_bound);
        assert!((rep.per_edge_bound - 36.0 * rep.simplified_bound).abs() <= 1e-9 * rep.per_edge_bound);
        assert!(rep.precondition);
        assert!(!tail_bound(100_000, 3, k, 122, 1e-3, 8).unwrap().precondition);
        assert_eq!(rep.good, 4);
        assert!(tail_bound(10, 3, 5, 4, 0.0, 1).is_err());
    }
}
