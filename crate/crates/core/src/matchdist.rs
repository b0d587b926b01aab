//! Quasi-independent vertex sampling around a matching, the exact
//! deficiency of the induced clique family, and decompositions of
//! `K_n^r` minus one or several matchings.
//!
//! Each matching edge `S_i` contributes a random subset `X_i` drawn from a
//! distribution with `Pr[T ⊆ X_i] = p^{|T|}` for proper `T` and zero mass on
//! `S_i` itself; every other vertex is kept independently with probability
//! `p`. The sample `X` never contains a matching edge, and every `r`-set
//! avoiding the matching lies in `X` with probability exactly `p^r`.

use alloc::boxed::Box;
use alloc::collections::BTreeMap;
use alloc::format;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use num_traits::{One, Signed, Zero};

use crate::calculus::{almost_to_full, fix_epsilon};
use crate::combin::{binomial, rank_colex};
use crate::error::{Error, Result};
use crate::hypercore::{Hypergraph, Matching, VertexSet};
use crate::packing::{ExplicitPacking, Family, PackingView};
use crate::rational::{binom_q, pow, ratio, Rational};
use crate::symdecomp::complete_symmetric;

/// Distribution on the subsets of an `r`-set; the mass of a subset depends
/// only on its size.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SubsetDistribution {
    r: usize,
    p: Rational,
    /// Mass of one particular subset of each size `0..=r`.
    by_size: Vec<Rational>,
}

/// `phi(T) = p^t ((1-p)^{r-t} - (-1)^{r-t} p^{r-t})` for `|T| = t < r`,
/// `phi(S) = 0`.
pub fn quasi_independent_distribution(r: usize, p: &Rational) -> Result<SubsetDistribution> {
    if r < 2 {
        return Err(Error::Parameter(format!("r = {r} must be at least 2")));
    }
    if !p.is_positive() || *p >= Rational::one() {
        return Err(Error::Parameter(format!("p = {p} must lie in (0, 1/2]")));
    }
    let q = Rational::one() - p;
    let mut by_size: Vec<Rational> = (0..r)
        .map(|t| {
            let sign = if (r - t) % 2 == 0 {
                Rational::one()
            } else {
                -Rational::one()
            };
            pow(p, t) * (pow(&q, r - t) - sign * pow(p, r - t))
        })
        .collect();
    by_size.push(Rational::zero());
    if let Some(t) = (0..r).rev().find(|&t| by_size[t].is_negative()) {
        return Err(Error::NegativeProbability {
            size: t,
            value: by_size[t].clone(),
        });
    }
    let dist = SubsetDistribution {
        r,
        p: p.clone(),
        by_size,
    };
    dist.check()?;
    Ok(dist)
}

impl SubsetDistribution {
    pub fn r(&self) -> usize {
        self.r
    }

    pub fn p(&self) -> &Rational {
        &self.p
    }

    /// Mass of a single subset of size `t`.
    pub fn prob_of_size(&self, t: usize) -> &Rational {
        &self.by_size[t]
    }

    /// `sum over T' ⊇ T` of `phi(T')` for `|T| = t`.
    pub fn upper_mass(&self, t: usize) -> Rational {
        (0..=self.r - t).fold(Rational::zero(), |a, j| {
            a + binom_q((self.r - t) as i64, j as i64) * &self.by_size[t + j]
        })
    }

    fn check(&self) -> Result<()> {
        if !self.upper_mass(0).is_one() {
            return Err(Error::Internal("subset distribution does not sum to 1".into()));
        }
        for t in 1..self.r {
            if self.upper_mass(t) != pow(&self.p, t) {
                return Err(Error::Internal(format!("marginal at size {t} is not p^{t}")));
            }
        }
        Ok(())
    }
}

/// Law of a nonnegative integer count; `probs[k] = Pr[count = k]`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SizeDistribution {
    pub probs: Vec<Rational>,
}

impl SizeDistribution {
    pub fn point(k: usize) -> Self {
        let mut probs = vec![Rational::zero(); k + 1];
        probs[k] = Rational::one();
        SizeDistribution { probs }
    }

    pub fn binomial(n: usize, p: &Rational) -> Self {
        let q = Rational::one() - p;
        let probs = (0..=n)
            .map(|j| binom_q(n as i64, j as i64) * pow(p, j) * pow(&q, n - j))
            .collect();
        SizeDistribution { probs }
    }

    pub fn convolve(&self, other: &SizeDistribution) -> SizeDistribution {
        let mut probs = vec![Rational::zero(); self.probs.len() + other.probs.len() - 1];
        for (i, a) in self.probs.iter().enumerate() {
            if a.is_zero() {
                continue;
            }
            for (j, b) in other.probs.iter().enumerate() {
                if !b.is_zero() {
                    probs[i + j] += a * b;
                }
            }
        }
        SizeDistribution { probs }
    }

    pub fn shift(&self, k: usize) -> SizeDistribution {
        let mut probs = vec![Rational::zero(); k];
        probs.extend(self.probs.iter().cloned());
        SizeDistribution { probs }
    }

    pub fn total(&self) -> Rational {
        self.probs.iter().fold(Rational::zero(), |a, b| a + b)
    }

    /// `Pr[count < k]`.
    pub fn prob_below(&self, k: usize) -> Rational {
        self.probs.iter().take(k).fold(Rational::zero(), |a, b| a + b)
    }

    /// `E[g(count)]`.
    pub fn expect<G: FnMut(usize) -> Rational>(&self, mut g: G) -> Rational {
        self.probs
            .iter()
            .enumerate()
            .filter(|(_, p)| !p.is_zero())
            .fold(Rational::zero(), |a, (k, p)| a + p * g(k))
    }
}

/// Law of `|X_i|` given that a fixed `t`-subset of `S_i` lies in `X_i`.
pub fn size_distribution(dist: &SubsetDistribution, t: usize) -> Result<SizeDistribution> {
    let r = dist.r;
    if t >= r {
        return Err(Error::Precondition(format!(
            "conditioning on a {t}-subset of an {r}-set has probability zero"
        )));
    }
    let pt = pow(&dist.p, t);
    let mut probs = vec![Rational::zero(); r + 1];
    for j in 0..=r - t {
        probs[t + j] = binom_q((r - t) as i64, j as i64) * &dist.by_size[t + j] / &pt;
    }
    Ok(SizeDistribution { probs })
}

/// Sampler parameters shared by the matching constructions.
#[derive(Clone, Debug)]
pub struct MatchingSettings {
    /// Keep probability, in `(0, 1/2]`.
    pub p: Rational,
    /// Largest support a materialized packing may have.
    pub limit: usize,
}

impl Default for MatchingSettings {
    fn default() -> Self {
        MatchingSettings {
            p: ratio(1, 2),
            limit: crate::DEFAULT_MATERIALIZE_LIMIT,
        }
    }
}

/// How a vertex set meets the matching: sorted nonzero intersection sizes
/// with matching edges, plus the number of unmatched members.
type SetType = (Vec<usize>, usize);

/// The product distribution of `X` for a fixed matching.
#[derive(Clone, Debug)]
pub struct QuasiIndependentModel {
    n: usize,
    r: usize,
    q: usize,
    matching: Matching,
    owner: Vec<Option<usize>>,
    dist: SubsetDistribution,
    /// `conditional[t]`: law of `|X_i|` given a `t`-subset is kept.
    conditional: Vec<SizeDistribution>,
    /// `idle[k]`: law of the total kept from `k` untouched matching edges.
    idle: Vec<SizeDistribution>,
    unmatched: usize,
}

impl QuasiIndependentModel {
    pub fn new(n: usize, r: usize, q: usize, matching: &Matching, p: &Rational) -> Result<Self> {
        if matching.n() != n || matching.r() != r {
            return Err(Error::Parameter(format!(
                "matching lives on K_{}^{}, expected K_{n}^{r}",
                matching.n(),
                matching.r()
            )));
        }
        if q <= r {
            return Err(Error::Parameter(format!("q = {q} must exceed r = {r}")));
        }
        let dist = quasi_independent_distribution(r, p)?;
        let conditional = (0..r)
            .map(|t| size_distribution(&dist, t))
            .collect::<Result<Vec<_>>>()?;
        let mut idle = vec![SizeDistribution::point(0)];
        for k in 0..matching.len() {
            let next = idle[k].convolve(&conditional[0]);
            idle.push(next);
        }
        Ok(QuasiIndependentModel {
            n,
            r,
            q,
            owner: matching.owners(),
            matching: matching.clone(),
            dist,
            conditional,
            idle,
            unmatched: n - matching.len() * r,
        })
    }

    pub fn matching(&self) -> &Matching {
        &self.matching
    }

    pub fn distribution(&self) -> &SubsetDistribution {
        &self.dist
    }

    /// `None` when `set` contains a whole matching edge.
    fn set_type(&self, set: &[usize]) -> Option<SetType> {
        let mut hits: BTreeMap<usize, usize> = BTreeMap::new();
        let mut free = 0;
        for &v in set {
            match self.owner[v] {
                Some(i) => *hits.entry(i).or_default() += 1,
                None => free += 1,
            }
        }
        let mut ts: Vec<usize> = hits.into_values().collect();
        if ts.contains(&self.r) {
            return None;
        }
        ts.sort_unstable();
        Some((ts, free))
    }

    /// Law of `|X|` given that a set of the given type lies in `X`.
    fn conditional_size(&self, ty: &SetType) -> SizeDistribution {
        let (ts, free_in) = ty;
        let mut d = self.idle[self.matching.len() - ts.len()].clone();
        for &t in ts {
            d = d.convolve(&self.conditional[t]);
        }
        d.convolve(&SizeDistribution::binomial(self.unmatched - free_in, &self.dist.p))
            .shift(*free_in)
    }

    fn eta_of_type(&self, ty: &SetType) -> Rational {
        self.conditional_size(ty).prob_below(self.r * self.q)
    }

    /// `Pr[|X| < rq | e ⊆ X]` for an `r`-set `e` avoiding the matching.
    pub fn deficiency(&self, e: &VertexSet) -> Result<Rational> {
        self.check_edge(e)?;
        let ty = self
            .set_type(e)
            .ok_or_else(|| Error::NotAnEdge(e.as_slice().to_vec()))?;
        Ok(self.eta_of_type(&ty))
    }

    fn check_edge(&self, e: &VertexSet) -> Result<()> {
        if e.len() != self.r {
            return Err(Error::EdgeArity {
                edge: e.as_slice().to_vec(),
                expected: self.r,
                found: e.len(),
            });
        }
        if let Some(v) = e.max_vertex().filter(|&v| v >= self.n) {
            return Err(Error::VertexOutOfRange { vertex: v, n: self.n });
        }
        Ok(())
    }

    /// `Pr[X = T]`.
    pub fn point_probability(&self, t: &VertexSet) -> Rational {
        let mut hits = vec![0usize; self.matching.len()];
        let mut free = 0;
        for &v in t.iter() {
            match self.owner[v] {
                Some(i) => hits[i] += 1,
                None => free += 1,
            }
        }
        let p = &self.dist.p;
        let mut acc = pow(p, free) * pow(&(Rational::one() - p), self.unmatched - free);
        for h in hits {
            acc *= &self.dist.by_size[h];
        }
        acc
    }

    /// Number of outcomes with positive probability.
    pub fn outcome_count(&self) -> Option<u128> {
        let per_edge = (0..=self.r)
            .filter(|&t| self.dist.by_size[t].is_positive())
            .map(|t| binomial(self.r as i64, t as i64))
            .sum::<u128>();
        let mut acc: u128 = 1u128.checked_shl(self.unmatched as u32)?;
        for _ in 0..self.matching.len() {
            acc = acc.checked_mul(per_edge)?;
        }
        Some(acc)
    }

    /// Calls `f(T, Pr[X = T])` for every outcome of positive probability.
    pub fn for_each_outcome<F: FnMut(&VertexSet, &Rational)>(&self, mut f: F) {
        let free: Vec<usize> = (0..self.n).filter(|&v| self.owner[v].is_none()).collect();
        let groups: Vec<&[usize]> = self.matching.edges().iter().map(|e| e.as_slice()).collect();
        enumerate_product(&groups, &free, &self.dist, &mut |set, w| {
            f(&VertexSet::from_sorted(set.to_vec()), w)
        });
    }
}

/// Enumerates the product of quasi-independent choices on `groups` and
/// independent choices on `free`. The sets handed out are sorted.
fn enumerate_product<F: FnMut(&[usize], &Rational)>(
    groups: &[&[usize]],
    free: &[usize],
    dist: &SubsetDistribution,
    f: &mut F,
) {
    let p = dist.p.clone();
    let q = Rational::one() - &p;
    let mut chosen = Vec::new();
    fn free_rec<F: FnMut(&[usize], &Rational)>(
        free: &[usize],
        i: usize,
        chosen: &mut Vec<usize>,
        w: Rational,
        p: &Rational,
        q: &Rational,
        f: &mut F,
    ) {
        if i == free.len() {
            let mut sorted = chosen.clone();
            sorted.sort_unstable();
            f(&sorted, &w);
            return;
        }
        chosen.push(free[i]);
        free_rec(free, i + 1, chosen, &w * p, p, q, f);
        chosen.pop();
        free_rec(free, i + 1, chosen, w * q, p, q, f);
    }
    #[allow(clippy::too_many_arguments)]
    fn group_rec<F: FnMut(&[usize], &Rational)>(
        groups: &[&[usize]],
        gi: usize,
        free: &[usize],
        dist: &SubsetDistribution,
        chosen: &mut Vec<usize>,
        w: Rational,
        p: &Rational,
        q: &Rational,
        f: &mut F,
    ) {
        if gi == groups.len() {
            free_rec(free, 0, chosen, w, p, q, f);
            return;
        }
        let g = groups[gi];
        for mask in 0u32..(1 << g.len()) {
            let t = mask.count_ones() as usize;
            let mass = &dist.by_size[t];
            if mass.is_zero() {
                continue;
            }
            let before = chosen.len();
            chosen.extend((0..g.len()).filter(|b| mask >> b & 1 == 1).map(|b| g[b]));
            group_rec(groups, gi + 1, free, dist, chosen, &w * mass, p, q, f);
            chosen.truncate(before);
        }
    }
    group_rec(groups, 0, free, dist, &mut chosen, Rational::one(), &p, &q, f);
}

/// `Pr[|X| < rq | V(e) ⊆ X]`.
pub fn deficiency_exact(n: usize, r: usize, q: usize, m: &Matching, p: &Rational, e: &VertexSet) -> Result<Rational> {
    QuasiIndependentModel::new(n, r, q, m, p)?.deficiency(e)
}

/// Deficiency at every edge of `K_n^r - M`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DeficiencyReport {
    /// `(edge rank, eta)` in rank order.
    pub per_edge_eta: Vec<(u64, Rational)>,
    pub max_eta: Rational,
    /// Edge attaining `max_eta`.
    pub witness: Option<VertexSet>,
    /// `1 / C(rq, r)`.
    pub threshold: Rational,
    pub pass: bool,
}

pub fn deficiency_report(n: usize, r: usize, q: usize, m: &Matching, p: &Rational) -> Result<DeficiencyReport> {
    let model = QuasiIndependentModel::new(n, r, q, m, p)?;
    let host = Hypergraph::complete_minus_matchings(n, r, core::slice::from_ref(m))?;
    Ok(model.report(&host))
}

impl QuasiIndependentModel {
    fn report(&self, host: &Hypergraph) -> DeficiencyReport {
        let mut memo: BTreeMap<SetType, Rational> = BTreeMap::new();
        let mut per_edge_eta = Vec::with_capacity(host.edge_count());
        let mut max_eta = Rational::zero();
        let mut witness = None;
        for e in host.edges() {
            let ty = self.set_type(&e).expect("host edges avoid the matching");
            let eta = memo.entry(ty).or_insert_with_key(|ty| self.eta_of_type(ty)).clone();
            if witness.is_none() || eta > max_eta {
                max_eta = eta.clone();
                witness = Some(e.clone());
            }
            per_edge_eta.push((e.rank(), eta));
        }
        let threshold = fix_epsilon(self.q, self.r);
        DeficiencyReport {
            pass: max_eta <= threshold,
            per_edge_eta,
            max_eta,
            witness,
            threshold,
        }
    }
}

/// `Phi(T) = Pr[X = T] / p^r` on cliques `T` of `K_n^r - M` with at least
/// `rq` vertices.
#[derive(Clone, Debug)]
pub struct MatchingAlmostPacking {
    host: Arc<Hypergraph>,
    model: QuasiIndependentModel,
}

pub fn matching_almost_packing(
    n: usize,
    r: usize,
    q: usize,
    m: &Matching,
    p: &Rational,
) -> Result<MatchingAlmostPacking> {
    if r * q > n {
        return Err(Error::Parameter(format!("rq = {} exceeds n = {n}", r * q)));
    }
    let model = QuasiIndependentModel::new(n, r, q, m, p)?;
    let host = Arc::new(Hypergraph::complete_minus_matchings(n, r, core::slice::from_ref(m))?);
    Ok(MatchingAlmostPacking { host, model })
}

impl MatchingAlmostPacking {
    pub fn model(&self) -> &QuasiIndependentModel {
        &self.model
    }

    pub fn host_arc(&self) -> &Arc<Hypergraph> {
        &self.host
    }

    pub fn deficiency_report(&self) -> DeficiencyReport {
        self.model.report(&self.host)
    }
}

impl PackingView for MatchingAlmostPacking {
    fn host(&self) -> &Hypergraph {
        &self.host
    }

    fn family(&self) -> Family {
        Family::BigClique {
            min_size: self.model.r * self.model.q,
        }
    }

    fn weight(&self, element: &VertexSet) -> Rational {
        let m = &self.model;
        if element.len() < m.r * m.q || element.max_vertex().is_some_and(|v| v >= m.n) {
            return Rational::zero();
        }
        m.point_probability(element) / pow(&m.dist.p, m.r)
    }

    fn boundary_of(&self, edge: &VertexSet) -> Rational {
        Rational::one() - self.model.deficiency(edge).expect("edge of the host")
    }

    fn boundary_all(&self) -> Vec<Rational> {
        self.deficiency_report()
            .per_edge_eta
            .into_iter()
            .map(|(_, eta)| Rational::one() - eta)
            .collect()
    }

    fn support_size_hint(&self) -> Option<usize> {
        self.model.outcome_count().and_then(|c| usize::try_from(c).ok())
    }

    /// Refuses when the whole outcome space exceeds `limit`.
    fn materialize(&self, limit: usize) -> Result<ExplicitPacking> {
        match self.support_size_hint() {
            Some(c) if c <= limit => {}
            _ => {
                return Err(Error::Budget(format!(
                    "outcome space of the sampler exceeds limit {limit}"
                )))
            }
        }
        let m = &self.model;
        let min = m.r * m.q;
        let pr = pow(&m.dist.p, m.r);
        let mut entries = BTreeMap::new();
        m.for_each_outcome(|t, w| {
            if t.len() >= min {
                entries.insert(t.clone(), w / &pr);
            }
        });
        Ok(ExplicitPacking::from_map(self.host.clone(), self.family(), entries))
    }
}

/// The sampled family refined into `rq`-cliques: each big clique `T` is
/// split uniformly, so an `rq`-clique `Q` gets
/// `p^{rq-r} E[1 / C(|X| - r, rq - r) | Q ⊆ X]`.
#[derive(Clone, Debug)]
pub struct MatchingCopyPacking {
    inner: MatchingAlmostPacking,
}

impl MatchingCopyPacking {
    pub fn new(inner: MatchingAlmostPacking) -> Self {
        MatchingCopyPacking { inner }
    }

    fn weight_of_type(&self, ty: &SetType) -> Rational {
        let m = &self.inner.model;
        let big = m.r * m.q;
        let law = m.conditional_size(ty);
        let e = law.expect(|k| binom_q((k - m.r) as i64, (big - m.r) as i64).recip());
        pow(&m.dist.p, big - m.r) * e
    }
}

impl PackingView for MatchingCopyPacking {
    fn host(&self) -> &Hypergraph {
        &self.inner.host
    }

    fn family(&self) -> Family {
        Family::Clique {
            q: self.inner.model.r * self.inner.model.q,
        }
    }

    fn weight(&self, element: &VertexSet) -> Rational {
        let m = &self.inner.model;
        if element.len() != m.r * m.q || element.max_vertex().is_some_and(|v| v >= m.n) {
            return Rational::zero();
        }
        match m.set_type(element) {
            Some(ty) => self.weight_of_type(&ty),
            None => Rational::zero(),
        }
    }

    fn boundary_of(&self, edge: &VertexSet) -> Rational {
        self.inner.boundary_of(edge)
    }

    fn boundary_all(&self) -> Vec<Rational> {
        self.inner.boundary_all()
    }

    fn support_size_hint(&self) -> Option<usize> {
        let m = &self.inner.model;
        usize::try_from(binomial(m.n as i64, (m.r * m.q) as i64)).ok()
    }

    fn materialize(&self, limit: usize) -> Result<ExplicitPacking> {
        match self.support_size_hint() {
            Some(c) if c <= limit => {}
            _ => {
                return Err(Error::Budget(format!(
                    "{}-cliques of the host exceed limit {limit}",
                    self.inner.model.r * self.inner.model.q
                )))
            }
        }
        let m = &self.inner.model;
        let mut memo: BTreeMap<SetType, Rational> = BTreeMap::new();
        let mut entries = BTreeMap::new();
        self.inner.host.for_each_clique(m.r * m.q, |c| {
            let ty = m.set_type(c).expect("cliques avoid the matching");
            let w = memo.entry(ty).or_insert_with_key(|ty| self.weight_of_type(ty));
            if !w.is_zero() {
                entries.insert(VertexSet::from_sorted(c.to_vec()), w.clone());
            }
            true
        });
        Ok(ExplicitPacking::from_map(
            self.inner.host.clone(),
            self.family(),
            entries,
        ))
    }
}

/// Exact decomposition of `K_n^r - M` into `q`-cliques.
///
/// Gates on the exact deficiency: every edge must satisfy
/// `eta(e) <= 1/C(rq, r)`.
pub fn decompose_minus_matching(
    n: usize,
    r: usize,
    q: usize,
    m: &Matching,
    s: &MatchingSettings,
) -> Result<ExplicitPacking> {
    if m.is_empty() {
        return complete_symmetric(n, q, r)?.materialize(s.limit);
    }
    let almost = matching_almost_packing(n, r, q, m, &s.p)?;
    let report = almost.deficiency_report();
    if !report.pass {
        return Err(Error::Deficiency {
            depth: 0,
            max_eta: report.max_eta,
            threshold: Box::new(report.threshold),
            witness: report.witness.map(|w| w.into_vec()).unwrap_or_default(),
        });
    }
    let copies = MatchingCopyPacking::new(almost);
    almost_to_full(&copies, q, r, s.limit)
}

/// Partition of the edges of `h` into matchings: edges in rank order, each
/// into the first class not yet touching any of its vertices.
pub fn greedy_edge_color(h: &Hypergraph) -> Vec<Matching> {
    let mut used: Vec<Vec<usize>> = vec![Vec::new(); h.n()];
    let mut classes: Vec<Vec<Vec<usize>>> = Vec::new();
    for e in h.edges() {
        let c = (0..)
            .find(|c| e.iter().all(|&v| !used[v].contains(c)))
            .expect("unbounded search");
        if c == classes.len() {
            classes.push(Vec::new());
        }
        for &v in e.iter() {
            used[v].push(c);
        }
        classes[c].push(e.into_vec());
    }
    classes
        .into_iter()
        .map(|edges| Matching::new(h.n(), h.r(), edges).expect("classes are matchings"))
        .collect()
}

/// Exact law of nested sampling over `ms`: stage `j` runs the
/// quasi-independent sampler for `ms[j]` restricted to the previous stage's
/// output. Returns `T -> Pr[X = T] / p^{r * ms.len()}`, an exact
/// decomposition of `K_n^r - (ms[0] ∪ ...)` into cliques.
pub fn nested_family(
    n: usize,
    r: usize,
    ms: &[Matching],
    p: &Rational,
    limit: usize,
) -> Result<BTreeMap<VertexSet, Rational>> {
    let dist = quasi_independent_distribution(r, p)?;
    let mut current: BTreeMap<VertexSet, Rational> = BTreeMap::new();
    current.insert(VertexSet::range(n), Rational::one());
    for m in ms {
        if m.n() != n || m.r() != r {
            return Err(Error::Parameter("matching does not live on the host".into()));
        }
        let mut next: BTreeMap<VertexSet, Rational> = BTreeMap::new();
        let mut outcomes: u128 = 0;
        for (s, w) in &current {
            let inside: Vec<&[usize]> = m
                .edges()
                .iter()
                .filter(|e| e.is_subset_of(s))
                .map(|e| e.as_slice())
                .collect();
            let free: Vec<usize> = s
                .iter()
                .copied()
                .filter(|v| !inside.iter().any(|e| e.contains(v)))
                .collect();
            let per_edge: u128 = (0..=r)
                .filter(|&t| dist.by_size[t].is_positive())
                .map(|t| binomial(r as i64, t as i64))
                .sum();
            let count = per_edge
                .checked_pow(inside.len() as u32)
                .and_then(|c| c.checked_mul(1u128.checked_shl(free.len() as u32)?));
            outcomes = match count.and_then(|c| c.checked_add(outcomes)) {
                Some(c) if c <= limit as u128 => c,
                _ => {
                    return Err(Error::Budget(format!(
                        "nested sampling outcome space exceeds limit {limit}"
                    )))
                }
            };
            enumerate_product(&inside, &free, &dist, &mut |t, pr| {
                *next
                    .entry(VertexSet::from_sorted(t.to_vec()))
                    .or_insert_with(Rational::zero) += w * pr;
            });
        }
        current = next;
    }
    let scale = pow(p, r * ms.len()).recip();
    for w in current.values_mut() {
        *w *= &scale;
    }
    current.retain(|_, w| !w.is_zero());
    Ok(current)
}

/// Canonical labels for `t`: members covered by `m` edges inside `t` come
/// first (edge by edge), then the remaining members in increasing order.
/// Returns the labels and the number of covered edges.
fn canonical_labels(t: &VertexSet, m: &Matching) -> (Vec<usize>, usize) {
    let inside: Vec<&VertexSet> = m.edges().iter().filter(|e| e.is_subset_of(t)).collect();
    let mut labels: Vec<usize> = inside.iter().flat_map(|e| e.iter().copied()).collect();
    let covered = labels.clone();
    labels.extend(t.iter().copied().filter(|v| !covered.contains(v)));
    (labels, inside.len())
}

fn canonical_matching(n: usize, r: usize, k: usize) -> Result<Matching> {
    Matching::new(n, r, (0..k).map(|i| (i * r..(i + 1) * r).collect()).collect())
}

/// Reachable `(|T|, edges of the last matching inside T)` pairs, each
/// checked against the deficiency gate.
pub fn minus_matchings_plan(
    n: usize,
    r: usize,
    q: usize,
    ms: &[Matching],
    s: &MatchingSettings,
) -> Result<Vec<(usize, usize)>> {
    let Some((last, rest)) = ms.split_last() else {
        return Ok(Vec::new());
    };
    let outer = nested_family(n, r, rest, &s.p, s.limit)?;
    let mut keys: Vec<(usize, usize)> = outer.keys().map(|t| (t.len(), canonical_labels(t, last).1)).collect();
    keys.sort_unstable();
    keys.dedup();
    for &(size, k) in &keys {
        gate_canonical(size, r, q, k, rest.len(), &s.p)?;
    }
    Ok(keys)
}

fn gate_canonical(size: usize, r: usize, q: usize, k: usize, depth: usize, p: &Rational) -> Result<()> {
    let fail = |max_eta: Rational, witness: Vec<usize>| Error::Deficiency {
        depth,
        max_eta,
        threshold: Box::new(fix_epsilon(q, r)),
        witness,
    };
    if size < r * q {
        return Err(fail(Rational::one(), Vec::new()));
    }
    if k == 0 {
        return Ok(());
    }
    let rep = deficiency_report(size, r, q, &canonical_matching(size, r, k)?, p)?;
    if !rep.pass {
        return Err(fail(rep.max_eta, rep.witness.map(|w| w.into_vec()).unwrap_or_default()));
    }
    Ok(())
}

/// Exact decomposition of `K_n^r - (M_1 ∪ ... ∪ M_m)` into `q`-cliques.
///
/// The first `m - 1` matchings are removed by nested sampling, which
/// decomposes `K_n^r - (M_1 ∪ ... ∪ M_{m-1})` exactly into cliques `T`;
/// the last matching is then stripped inside every `T` with
/// [`decompose_minus_matching`]. Pieces are grouped by their canonical form
/// so each distinct `(|T|, |M_m ∩ T|)` is decomposed once.
pub fn decompose_minus_matchings(
    n: usize,
    r: usize,
    q: usize,
    ms: &[Matching],
    s: &MatchingSettings,
) -> Result<ExplicitPacking> {
    let Some((last, rest)) = ms.split_last() else {
        return complete_symmetric(n, q, r)?.materialize(s.limit);
    };
    if rest.is_empty() {
        return decompose_minus_matching(n, r, q, last, s);
    }
    let host = Arc::new(Hypergraph::complete_minus_matchings(n, r, ms)?);
    let total_cliques = binomial(n as i64, q as i64);
    let outer = nested_family(n, r, rest, &s.p, s.limit)?;

    // canonical inner decompositions, with weights replaced by value ids
    struct Inner {
        cliques: Vec<Vec<usize>>,
        value_ids: Vec<usize>,
        values: Vec<Rational>,
    }
    let mut inners: BTreeMap<(usize, usize), Inner> = BTreeMap::new();
    // group id per (key, outer weight)
    let mut groups: BTreeMap<((usize, usize), Rational), usize> = BTreeMap::new();
    let mut plan: Vec<(&VertexSet, Vec<usize>, usize)> = Vec::with_capacity(outer.len());
    for (t, w) in &outer {
        let (labels, k) = canonical_labels(t, last);
        let key = (t.len(), k);
        if let alloc::collections::btree_map::Entry::Vacant(e) = inners.entry(key) {
            gate_canonical(key.0, r, q, k, rest.len(), &s.p)?;
            let inner = decompose_minus_matching(key.0, r, q, &canonical_matching(key.0, r, k)?, s)?;
            let mut values: Vec<Rational> = Vec::new();
            let mut cliques = Vec::with_capacity(inner.len());
            let mut value_ids = Vec::with_capacity(inner.len());
            for (c, v) in inner.entries() {
                let id = match values.iter().position(|x| x == v) {
                    Some(id) => id,
                    None => {
                        values.push(v.clone());
                        values.len() - 1
                    }
                };
                cliques.push(c.as_slice().to_vec());
                value_ids.push(id);
            }
            e.insert(Inner {
                cliques,
                value_ids,
                values,
            });
        }
        let next = groups.len();
        let g = *groups.entry((key, w.clone())).or_insert(next);
        plan.push((t, labels, g));
    }
    let width = inners.values().map(|i| i.values.len()).max().unwrap_or(1);
    let stride = groups.len() * width;
    let cells = usize::try_from(total_cliques)
        .ok()
        .and_then(|c| c.checked_mul(stride))
        .filter(|&c| c <= s.limit.saturating_mul(64))
        .ok_or_else(|| Error::Budget(format!("count table for C({n}, {q}) cliques too large")))?;
    let mut counts = vec![0u32; cells];
    let mut buf = Vec::with_capacity(q);
    for (t, labels, g) in &plan {
        let key = (t.len(), canonical_labels(t, last).1);
        let inner = &inners[&key];
        for (c, &id) in inner.cliques.iter().zip(&inner.value_ids) {
            buf.clear();
            buf.extend(c.iter().map(|&i| labels[i]));
            buf.sort_unstable();
            let rank = rank_colex(&buf) as usize;
            counts[rank * stride + g * width + id] += 1;
        }
    }
    let mut group_info = vec![((0, 0), Rational::zero()); groups.len()];
    for ((key, w), &g) in &groups {
        group_info[g] = (*key, w.clone());
    }
    let mut entries = BTreeMap::new();
    for rank in 0..total_cliques as usize {
        let row = &counts[rank * stride..(rank + 1) * stride];
        if row.iter().all(|&c| c == 0) {
            continue;
        }
        let mut v = Rational::zero();
        for (g, (key, w)) in group_info.iter().enumerate() {
            let values = &inners[key].values;
            let mut part = Rational::zero();
            for (id, val) in values.iter().enumerate() {
                let c = row[g * width + id];
                if c != 0 {
                    part += val * Rational::from_integer(c.into());
                }
            }
            v += part * w;
        }
        let clique = VertexSet::from_sorted(crate::combin::unrank_colex(rank as u64, q));
        entries.insert(clique, v);
    }
    Ok(ExplicitPacking::from_map(host, Family::Clique { q }, entries))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::packing::validate;
    use crate::rational::int;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn set(v: &[usize]) -> VertexSet {
        VertexSet::new(v.to_vec()).unwrap()
    }

    #[test]
    fn distribution_examples() {
        let d = quasi_independent_distribution(2, &ratio(1, 2)).unwrap();
        assert_eq!(d.by_size, [int(0), ratio(1, 2), int(0)]);
        let d = quasi_independent_distribution(3, &ratio(1, 2)).unwrap();
        assert_eq!(d.by_size, [ratio(1, 4), int(0), ratio(1, 4), int(0)]);
        assert_eq!(d.upper_mass(1), ratio(1, 2));
        assert_eq!(d.upper_mass(2), ratio(1, 4));
        let err = quasi_independent_distribution(3, &ratio(2, 3)).unwrap_err();
        assert_eq!(
            err,
            Error::NegativeProbability {
                size: 1,
                value: ratio(2, 3) * (ratio(1, 9) - ratio(4, 9))
            }
        );
        assert!(quasi_independent_distribution(3, &int(0)).is_err());
    }

    #[test]
    fn size_distribution_examples() {
        let d = quasi_independent_distribution(3, &ratio(1, 2)).unwrap();
        assert_eq!(
            size_distribution(&d, 0).unwrap().probs,
            [ratio(1, 4), int(0), ratio(3, 4), int(0)]
        );
        let d2 = quasi_independent_distribution(2, &ratio(1, 2)).unwrap();
        assert_eq!(size_distribution(&d2, 1).unwrap().probs, [int(0), int(1), int(0)]);
        assert!(size_distribution(&d2, 2).is_err());
        for r in 2..=6 {
            let d = quasi_independent_distribution(r, &ratio(1, 3)).unwrap();
            for t in 0..r {
                assert!(size_distribution(&d, t).unwrap().total().is_one());
            }
        }
    }

    #[test]
    fn pinned_deficiencies() {
        let half = ratio(1, 2);
        let m = Matching::new(12, 2, vec![vec![0, 1]]).unwrap();
        assert_eq!(
            deficiency_exact(12, 2, 3, &m, &half, &set(&[4, 5])).unwrap(),
            ratio(37, 256)
        );
        let pm = Matching::new(10, 2, (0..5).map(|i| vec![2 * i, 2 * i + 1]).collect()).unwrap();
        assert_eq!(deficiency_exact(10, 2, 3, &pm, &half, &set(&[0, 2])).unwrap(), int(1));
        let rep = deficiency_report(10, 2, 3, &pm, &half).unwrap();
        assert!(!rep.pass);
        assert_eq!(rep.max_eta, int(1));
        assert!(deficiency_exact(12, 2, 3, &m, &half, &set(&[0, 1])).is_err());
    }

    #[test]
    fn empty_matching_is_binomial_tail() {
        let m = Matching::empty(11, 3);
        for p in [ratio(1, 2), ratio(1, 3)] {
            let eta = deficiency_exact(11, 3, 4, &m, &p, &set(&[0, 1, 2])).unwrap();
            assert_eq!(eta, SizeDistribution::binomial(8, &p).prob_below(9));
        }
    }

    /// Exhaustive oracle straight from the product measure.
    fn brute(n: usize, r: usize, q: usize, m: &Matching, p: &Rational, e: &VertexSet) -> Rational {
        let model = QuasiIndependentModel::new(n, r, q, m, p).unwrap();
        let (mut inside, mut small) = (Rational::zero(), Rational::zero());
        for mask in 0u32..(1 << n) {
            let t = VertexSet::from_sorted((0..n).filter(|v| mask >> v & 1 == 1).collect());
            if !e.is_subset_of(&t) {
                continue;
            }
            let pr = model.point_probability(&t);
            inside += &pr;
            if t.len() < r * q {
                small += pr;
            }
        }
        assert_eq!(inside, pow(p, r));
        small / inside
    }

    #[test]
    fn deficiency_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..12 {
            let r = rng.gen_range(2..=3);
            let q = r + 1;
            let n = rng.gen_range(r * q..=12);
            let k = rng.gen_range(0..=n / r);
            let mut vs: Vec<usize> = (0..n).collect();
            for i in (1..n).rev() {
                vs.swap(i, rng.gen_range(0..=i));
            }
            let edges = (0..k).map(|i| vs[i * r..(i + 1) * r].to_vec()).collect();
            let m = Matching::new(n, r, edges).unwrap();
            let p = [ratio(1, 2), ratio(1, 3)][rng.gen_range(0..2)].clone();
            let host = Hypergraph::complete_minus_matchings(n, r, core::slice::from_ref(&m)).unwrap();
            let e = host.edges().nth(rng.gen_range(0..host.edge_count())).unwrap();
            assert_eq!(
                deficiency_exact(n, r, q, &m, &p, &e).unwrap(),
                brute(n, r, q, &m, &p, &e)
            );
        }
    }

    #[test]
    fn almost_packing_weights_and_boundary() {
        let half = ratio(1, 2);
        let m = Matching::new(12, 2, vec![vec![0, 1]]).unwrap();
        let phi = matching_almost_packing(12, 2, 3, &m, &half).unwrap();
        let t = VertexSet::from_sorted([0].into_iter().chain(2..12).collect());
        assert_eq!(phi.weight(&t), ratio(1, 512));
        assert_eq!(phi.weight(&VertexSet::range(12)), int(0));
        let explicit = phi.materialize(1 << 20).unwrap();
        assert_eq!(explicit.boundary_by_support(), phi.boundary_all());
        assert!(phi.boundary_all().iter().all(|b| *b <= int(1)));
    }

    #[test]
    fn copy_packing_matches_explicit_concatenation() {
        let half = ratio(1, 2);
        let m = Matching::new(9, 2, vec![vec![0, 1], vec![4, 7]]).unwrap();
        let phi = matching_almost_packing(9, 2, 3, &m, &half).unwrap();
        let copies = MatchingCopyPacking::new(phi.clone());
        let explicit = crate::calculus::concatenate(
            &phi,
            Family::Clique { q: 6 },
            |_, sub| complete_symmetric(sub.n(), 6, 2)?.materialize(1 << 20),
            &int(0),
            1 << 20,
        )
        .unwrap();
        assert_eq!(copies.materialize(1 << 20).unwrap(), explicit);
    }

    #[test]
    fn decompose_minus_matching_small_cases() {
        let s = MatchingSettings::default();
        let out = decompose_minus_matching(7, 2, 3, &Matching::empty(7, 2), &s).unwrap();
        assert!(validate(&out, &int(0)).pass);
        let pm = Matching::new(10, 2, (0..5).map(|i| vec![2 * i, 2 * i + 1]).collect()).unwrap();
        assert!(matches!(
            decompose_minus_matching(10, 2, 3, &pm, &s),
            Err(Error::Deficiency { .. })
        ));
    }

    #[test]
    fn greedy_coloring_examples() {
        let m = crate::hypercore::build_graph(8, 2, &[vec![0, 1], vec![2, 3]]).unwrap();
        assert_eq!(greedy_edge_color(&m).len(), 1);
        let tri = Hypergraph::complete(3, 2).unwrap();
        assert_eq!(greedy_edge_color(&tri).len(), 3);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..50 {
            let r = rng.gen_range(2..=3);
            let n = rng.gen_range(r..10);
            let total = binomial(n as i64, r as i64) as u64;
            let edges: Vec<u64> = (0..total).filter(|_| rng.gen_bool(0.3)).collect();
            let h = Hypergraph::from_sorted_ranks(n, r, edges);
            let classes = greedy_edge_color(&h);
            let count: usize = classes.iter().map(|c| c.len()).sum();
            assert_eq!(count, h.edge_count());
            let delta = h.vertex_degree_max();
            assert!(classes.len() <= (r * delta.saturating_sub(1) + 1));
        }
    }

    #[test]
    fn nested_family_is_exact() {
        let half = ratio(1, 2);
        let m1 = Matching::new(8, 2, (0..4).map(|i| vec![2 * i, 2 * i + 1]).collect()).unwrap();
        let m2 = Matching::new(8, 2, vec![vec![1, 2], vec![5, 6]]).unwrap();
        let fam = nested_family(8, 2, &[m1.clone(), m2.clone()], &half, 1 << 20).unwrap();
        let host = Hypergraph::complete_minus_matchings(8, 2, &[m1, m2]).unwrap();
        for e in host.edges() {
            let b = fam
                .iter()
                .filter(|(t, _)| e.is_subset_of(t))
                .fold(Rational::zero(), |a, (_, w)| a + w);
            assert!(b.is_one());
        }
        for t in fam.keys() {
            assert!(host.is_clique(t));
        }
    }
}
