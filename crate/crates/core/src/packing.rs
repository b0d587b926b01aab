//! Fractional packings and the boundary operator.
//!
//! A packing assigns nonnegative rational weights to vertex sets of a host
//! graph. Each support element stands for the subgraph of the host it
//! induces (a clique for the clique families), so the boundary at a host
//! edge `f` is the total weight of the elements containing `f`.

use alloc::boxed::Box;
use alloc::collections::BTreeMap;
use alloc::format;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use num_traits::{One, Signed, Zero};

use crate::combin::{for_each_subset, rank_colex};
use crate::error::{Error, Result};
use crate::hypercore::{Hypergraph, VertexSet};
use crate::rational::Rational;

/// What kind of object a support element is.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Family {
    /// `q`-cliques of the host.
    Clique { q: usize },
    /// Cliques of the host with at least `min_size` vertices.
    BigClique { min_size: usize },
    /// Induced subgraphs on `k`-vertex sets.
    Induced { k: usize },
}

impl Family {
    pub fn admits(&self, host: &Hypergraph, element: &VertexSet) -> bool {
        match *self {
            Family::Clique { q } => element.len() == q && host.is_clique(element),
            Family::BigClique { min_size } => element.len() >= min_size && host.is_clique(element),
            Family::Induced { k } => element.len() == k,
        }
    }
}

/// A fractional packing of a host graph.
pub trait PackingView {
    fn host(&self) -> &Hypergraph;

    fn family(&self) -> Family;

    /// Weight of a support element; zero outside the support.
    fn weight(&self, element: &VertexSet) -> Rational;

    /// `∂(f)` for an edge `f` of the host. Callers have checked membership.
    fn boundary_of(&self, edge: &VertexSet) -> Rational;

    /// Boundary of every host edge, in host rank order.
    fn boundary_all(&self) -> Vec<Rational> {
        self.host().edges().map(|e| self.boundary_of(&e)).collect()
    }

    /// Number of support elements if known without enumeration.
    fn support_size_hint(&self) -> Option<usize> {
        None
    }

    /// Expands to an explicit packing, refusing when the support would
    /// exceed `limit` elements.
    fn materialize(&self, limit: usize) -> Result<ExplicitPacking>;
}

/// `∂(f)`, rejecting sets that are not host edges.
pub fn boundary(p: &dyn PackingView, f: &VertexSet) -> Result<Rational> {
    if !p.host().contains(f) {
        return Err(Error::NotAnEdge(f.as_slice().to_vec()));
    }
    Ok(p.boundary_of(f))
}

/// Per-edge boundary values against the window `[1 - eta, 1]`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BoundaryReport {
    /// `(edge rank, ∂)` in rank order.
    pub per_edge: Vec<(u64, Rational)>,
    pub min_boundary: Rational,
    pub max_boundary: Rational,
    /// `1 - min_boundary`.
    pub eta: Rational,
    /// Tolerance the report was checked against.
    pub tolerance: Rational,
    /// Edges whose boundary falls outside the window.
    pub violations: Vec<u64>,
    pub pass: bool,
}

impl BoundaryReport {
    /// Builds a report from boundary values listed in host rank order.
    /// A host without edges yields `min = max = 1` and passes.
    pub fn from_values(host: &Hypergraph, values: Vec<Rational>, tolerance: &Rational) -> Self {
        debug_assert_eq!(values.len(), host.edge_count());
        let low = Rational::one() - tolerance;
        let one = Rational::one();
        let mut min_boundary = one.clone();
        let mut max_boundary = one.clone();
        let mut violations = Vec::new();
        for (i, (&rank, v)) in host.edge_ranks().iter().zip(&values).enumerate() {
            if i == 0 || *v < min_boundary {
                min_boundary = v.clone();
            }
            if i == 0 || *v > max_boundary {
                max_boundary = v.clone();
            }
            if *v < low || *v > one {
                violations.push(rank);
            }
        }
        let per_edge = host.edge_ranks().iter().copied().zip(values).collect();
        BoundaryReport {
            per_edge,
            eta: Rational::one() - &min_boundary,
            min_boundary,
            max_boundary,
            tolerance: tolerance.clone(),
            pass: violations.is_empty(),
            violations,
        }
    }

    pub fn worst_edge(&self) -> Option<u64> {
        self.per_edge.iter().min_by(|a, b| a.1.cmp(&b.1)).map(|(rank, _)| *rank)
    }
}

/// Checks `∂(e) ∈ [1 - eta, 1]` on every host edge.
pub fn validate(p: &dyn PackingView, eta: &Rational) -> BoundaryReport {
    BoundaryReport::from_values(p.host(), p.boundary_all(), eta)
}

/// A packing given by an explicit weight table.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ExplicitPacking {
    host: Arc<Hypergraph>,
    family: Family,
    entries: BTreeMap<VertexSet, Rational>,
}

impl ExplicitPacking {
    /// Validates every element against the family and drops zero weights.
    /// Repeated elements have their weights added.
    pub fn new(
        host: Arc<Hypergraph>,
        family: Family,
        entries: impl IntoIterator<Item = (VertexSet, Rational)>,
    ) -> Result<Self> {
        let mut map: BTreeMap<VertexSet, Rational> = BTreeMap::new();
        for (set, w) in entries {
            if w.is_negative() {
                return Err(Error::Parameter(format!("negative weight {w} on {set:?}")));
            }
            if let Some(v) = set.max_vertex().filter(|&v| v >= host.n()) {
                return Err(Error::VertexOutOfRange { vertex: v, n: host.n() });
            }
            if !family.admits(&host, &set) {
                return Err(Error::InvalidSubset(format!(
                    "{:?} is not a member of {family:?} in the host",
                    set.as_slice()
                )));
            }
            if w.is_zero() {
                continue;
            }
            *map.entry(set).or_insert_with(Rational::zero) += w;
        }
        Ok(Self::from_map(host, family, map))
    }

    /// Skips element validation; weights must be positive.
    pub(crate) fn from_map(host: Arc<Hypergraph>, family: Family, mut entries: BTreeMap<VertexSet, Rational>) -> Self {
        entries.retain(|_, w| !w.is_zero());
        ExplicitPacking { host, family, entries }
    }

    pub fn empty(host: Arc<Hypergraph>, family: Family) -> Self {
        ExplicitPacking {
            host,
            family,
            entries: BTreeMap::new(),
        }
    }

    pub fn host_arc(&self) -> &Arc<Hypergraph> {
        &self.host
    }

    pub fn entries(&self) -> &BTreeMap<VertexSet, Rational> {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn total_weight(&self) -> Rational {
        self.entries.values().fold(Rational::zero(), |a, w| a + w)
    }

    /// Adds `coef * other` into `self`.
    pub fn add_scaled(&mut self, coef: &Rational, other: &ExplicitPacking) -> Result<()> {
        same_host(&self.host, &other.host)?;
        if coef.is_zero() {
            return Ok(());
        }
        for (set, w) in &other.entries {
            *self.entries.entry(set.clone()).or_insert_with(Rational::zero) += coef * w;
        }
        Ok(())
    }

    /// Boundary vector by summing each support element into the edges it
    /// covers.
    pub fn boundary_by_support(&self) -> Vec<Rational> {
        let mut acc = vec![Rational::zero(); self.host.edge_count()];
        for (set, w) in &self.entries {
            self.add_element(set, w, &mut acc);
        }
        acc
    }

    /// Adds weight `w` of `set` into the per-edge accumulator.
    pub fn add_element(&self, set: &VertexSet, w: &Rational, acc: &mut [Rational]) {
        let host = &self.host;
        for_each_subset(set, host.r(), |f| {
            if let Some(i) = host.edge_index(rank_colex(f)) {
                acc[i] += w;
            }
        });
    }

    /// Boundary at one edge by scanning for support elements containing it.
    pub fn boundary_by_incidence(&self, f: &VertexSet) -> Rational {
        self.entries
            .iter()
            .filter(|(set, _)| f.is_subset_of(set))
            .fold(Rational::zero(), |a, (_, w)| a + w)
    }

    pub fn scaled(&self, c: &Rational) -> Result<ExplicitPacking> {
        scale(self, c)
    }
}

fn same_host(a: &Arc<Hypergraph>, b: &Arc<Hypergraph>) -> Result<()> {
    if Arc::ptr_eq(a, b) || a == b {
        Ok(())
    } else {
        Err(Error::HostMismatch)
    }
}

impl PackingView for ExplicitPacking {
    fn host(&self) -> &Hypergraph {
        &self.host
    }

    fn family(&self) -> Family {
        self.family
    }

    fn weight(&self, element: &VertexSet) -> Rational {
        self.entries.get(element).cloned().unwrap_or_else(Rational::zero)
    }

    fn boundary_of(&self, edge: &VertexSet) -> Rational {
        self.boundary_by_incidence(edge)
    }

    fn boundary_all(&self) -> Vec<Rational> {
        self.boundary_by_support()
    }

    fn support_size_hint(&self) -> Option<usize> {
        Some(self.entries.len())
    }

    fn materialize(&self, limit: usize) -> Result<ExplicitPacking> {
        if self.entries.len() > limit {
            return Err(Error::Budget(format!(
                "support of {} elements exceeds limit {limit}",
                self.entries.len()
            )));
        }
        Ok(self.clone())
    }
}

/// Nonnegative combination of explicit packings on a common host.
pub fn linear_combine(terms: &[(Rational, &ExplicitPacking)]) -> Result<ExplicitPacking> {
    let (_, first) = terms
        .first()
        .ok_or_else(|| Error::Parameter("linear_combine needs at least one term".into()))?;
    let mut out = ExplicitPacking::empty(first.host.clone(), first.family);
    for (coef, p) in terms {
        if coef.is_negative() {
            return Err(Error::Parameter(format!("negative coefficient {coef}")));
        }
        if p.family != first.family {
            return Err(Error::Parameter("cannot combine packings of different families".into()));
        }
        out.add_scaled(coef, p)?;
    }
    out.entries.retain(|_, w| !w.is_zero());
    Ok(out)
}

/// Every weight multiplied by `c`.
pub fn scale(p: &ExplicitPacking, c: &Rational) -> Result<ExplicitPacking> {
    if c.is_negative() {
        return Err(Error::Parameter(format!("negative scale factor {c}")));
    }
    let entries = p.entries.iter().map(|(s, w)| (s.clone(), w * c)).collect();
    Ok(ExplicitPacking::from_map(p.host.clone(), p.family, entries))
}

/// Lazy nonnegative combination of arbitrary packings on a common host.
pub struct Combination<'a> {
    host: Hypergraph,
    family: Family,
    terms: Vec<(Rational, Box<dyn PackingView + 'a>)>,
}

impl<'a> Combination<'a> {
    pub fn new(terms: Vec<(Rational, Box<dyn PackingView + 'a>)>) -> Result<Self> {
        let Some((_, first)) = terms.first() else {
            return Err(Error::Parameter("combination needs at least one term".into()));
        };
        let host = first.host().clone();
        let family = first.family();
        for (c, p) in &terms {
            if c.is_negative() {
                return Err(Error::Parameter(format!("negative coefficient {c}")));
            }
            if *p.host() != host {
                return Err(Error::HostMismatch);
            }
        }
        Ok(Combination { host, family, terms })
    }
}

impl PackingView for Combination<'_> {
    fn host(&self) -> &Hypergraph {
        &self.host
    }

    fn family(&self) -> Family {
        self.family
    }

    fn weight(&self, element: &VertexSet) -> Rational {
        self.terms
            .iter()
            .fold(Rational::zero(), |a, (c, p)| a + c * p.weight(element))
    }

    fn boundary_of(&self, edge: &VertexSet) -> Rational {
        self.terms
            .iter()
            .fold(Rational::zero(), |a, (c, p)| a + c * p.boundary_of(edge))
    }

    fn boundary_all(&self) -> Vec<Rational> {
        let mut acc = vec![Rational::zero(); self.host.edge_count()];
        for (c, p) in &self.terms {
            for (a, b) in acc.iter_mut().zip(p.boundary_all()) {
                *a += c * b;
            }
        }
        acc
    }

    fn materialize(&self, limit: usize) -> Result<ExplicitPacking> {
        let host = Arc::new(self.host.clone());
        let mut out = ExplicitPacking::empty(host.clone(), self.family);
        for (c, p) in &self.terms {
            let m = p.materialize(limit)?;
            let rehosted = ExplicitPacking::from_map(host.clone(), m.family, m.entries);
            out.add_scaled(c, &rehosted)?;
            if out.len() > limit {
                return Err(Error::Budget(format!("combined support exceeds limit {limit}")));
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{int, ratio};
    use proptest::prelude::*;

    fn k4_triangles() -> ExplicitPacking {
        let host = Arc::new(Hypergraph::complete(4, 2).unwrap());
        let entries = host.enumerate_cliques(3).into_iter().map(|t| (t, ratio(1, 2)));
        ExplicitPacking::new(host, Family::Clique { q: 3 }, entries).unwrap()
    }

    fn set(v: &[usize]) -> VertexSet {
        VertexSet::new(v.to_vec()).unwrap()
    }

    #[test]
    fn k4_boundary_is_one() {
        let p = k4_triangles();
        for e in p.host().edges() {
            assert_eq!(boundary(&p, &e).unwrap(), int(1));
        }
        let rep = validate(&p, &int(0));
        assert!(rep.pass);
        assert_eq!(rep.eta, int(0));
        assert!(boundary(&p, &set(&[0, 1, 2])).is_err());
    }

    #[test]
    fn empty_and_single_packings() {
        let host = Arc::new(Hypergraph::complete(5, 2).unwrap());
        let empty = ExplicitPacking::empty(host.clone(), Family::Clique { q: 3 });
        let rep = validate(&empty, &int(0));
        assert!(!rep.pass);
        assert_eq!(rep.min_boundary, int(0));
        assert_eq!(rep.violations.len(), 10);
        let single = ExplicitPacking::new(host, Family::Clique { q: 3 }, [(set(&[0, 2, 4]), int(1))]).unwrap();
        for e in single.host().edges() {
            let expect = if e.is_subset_of(&set(&[0, 2, 4])) { 1 } else { 0 };
            assert_eq!(single.boundary_of(&e), int(expect));
        }
        assert!(validate(&single, &int(1)).pass);
    }

    #[test]
    fn rejects_non_cliques_and_negative_weights() {
        let host = Arc::new(Hypergraph::complete_minus(5, 2, &[set(&[0, 1])]).unwrap());
        let fam = Family::Clique { q: 3 };
        assert!(ExplicitPacking::new(host.clone(), fam, [(set(&[0, 1, 2]), int(1))]).is_err());
        assert!(ExplicitPacking::new(host.clone(), fam, [(set(&[0, 2, 3]), ratio(-1, 2))]).is_err());
        assert!(ExplicitPacking::new(host, fam, [(set(&[0, 2]), int(1))]).is_err());
    }

    #[test]
    fn combine_and_scale() {
        let p = k4_triangles();
        let same = linear_combine(&[(int(1), &p)]).unwrap();
        assert_eq!(same, p);
        let half = linear_combine(&[(ratio(1, 2), &p), (ratio(1, 2), &p)]).unwrap();
        assert_eq!(half.boundary_all(), p.boundary_all());
        assert!(scale(&p, &int(0)).unwrap().is_empty());
        assert_eq!(scale(&p, &int(1)).unwrap(), p);
        let other = ExplicitPacking::empty(Arc::new(Hypergraph::complete(5, 2).unwrap()), Family::Clique { q: 3 });
        assert_eq!(
            linear_combine(&[(int(1), &p), (int(1), &other)]),
            Err(Error::HostMismatch)
        );
    }

    #[test]
    fn convex_combination_of_two_decompositions() {
        let host = Arc::new(Hypergraph::complete(7, 2).unwrap());
        let fam = Family::Clique { q: 3 };
        let uniform = ExplicitPacking::new(
            host.clone(),
            fam,
            host.enumerate_cliques(3).into_iter().map(|t| (t, ratio(1, 5))),
        )
        .unwrap();
        let fano = [
            [0, 1, 2],
            [0, 3, 4],
            [0, 5, 6],
            [1, 3, 5],
            [1, 4, 6],
            [2, 3, 6],
            [2, 4, 5],
        ];
        let fano = ExplicitPacking::new(host, fam, fano.iter().map(|t| (set(t), int(1)))).unwrap();
        assert!(validate(&uniform, &int(0)).pass);
        assert!(validate(&fano, &int(0)).pass);
        let c = linear_combine(&[(ratio(1, 3), &uniform), (ratio(2, 3), &fano)]).unwrap();
        assert!(validate(&c, &int(0)).pass);
        assert_eq!(c.weight(&set(&[0, 1, 2])), ratio(1, 15) + ratio(2, 3));
    }

    #[test]
    fn scale_recovers_full_decomposition() {
        // K_6^2 triangles at weight 14/15 * 1/4 give ∂ = 14/15 everywhere
        let host = Arc::new(Hypergraph::complete(6, 2).unwrap());
        let entries = host.enumerate_cliques(3).into_iter().map(|t| (t, ratio(14, 60)));
        let p = ExplicitPacking::new(host, Family::Clique { q: 3 }, entries).unwrap();
        let rep = validate(&p, &ratio(1, 15));
        assert!(rep.pass);
        assert_eq!(rep.min_boundary, ratio(14, 15));
        assert!(!validate(&p, &ratio(1, 16)).pass);
        let full = scale(&p, &ratio(15, 14)).unwrap();
        assert!(validate(&full, &int(0)).pass);
    }

    #[test]
    fn lazy_combination_matches_explicit() {
        let p = k4_triangles();
        let q = scale(&p, &ratio(1, 3)).unwrap();
        let lazy = Combination::new(vec![
            (ratio(1, 2), Box::new(p.clone()) as Box<dyn PackingView>),
            (int(1), Box::new(q.clone())),
        ])
        .unwrap();
        let explicit = linear_combine(&[(ratio(1, 2), &p), (int(1), &q)]).unwrap();
        assert_eq!(lazy.boundary_all(), explicit.boundary_all());
        assert_eq!(lazy.materialize(100).unwrap(), explicit);
    }

    fn random_packing() -> impl Strategy<Value = ExplicitPacking> {
        (4usize..8, 2usize..4).prop_flat_map(|(n, r)| {
            let host = Arc::new(Hypergraph::complete(n, r).unwrap());
            let cliques = host.enumerate_cliques(r + 1);
            let len = cliques.len();
            proptest::collection::vec(0i64..5, len).prop_map(move |ws| {
                let entries = cliques.iter().cloned().zip(ws.into_iter().map(|w| ratio(w, 7)));
                ExplicitPacking::new(host.clone(), Family::Clique { q: r + 1 }, entries).unwrap()
            })
        })
    }

    proptest! {
        #[test]
        fn support_and_incidence_agree(p in random_packing()) {
            let by_support = p.boundary_by_support();
            for (e, v) in p.host().edges().zip(&by_support) {
                prop_assert_eq!(&p.boundary_by_incidence(&e), v);
            }
        }

        #[test]
        fn combine_is_linear(p in random_packing(), a in 0i64..4, b in 0i64..4) {
            let q = scale(&p, &ratio(1, 2)).unwrap();
            let c = linear_combine(&[(ratio(a, 3), &p), (ratio(b, 5), &q)]).unwrap();
            let (bp, bq) = (p.boundary_all(), q.boundary_all());
            for (i, v) in c.boundary_all().into_iter().enumerate() {
                prop_assert_eq!(v, ratio(a, 3) * &bp[i] + ratio(b, 5) * &bq[i]);
            }
        }

        #[test]
        fn validate_is_monotone(p in random_packing(), num in 0i64..8) {
            let eta = ratio(num, 8);
            if validate(&p, &eta).pass {
                prop_assert!(validate(&p, &(eta + ratio(1, 8))).pass);
            }
        }
    }
}
