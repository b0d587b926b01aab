//! Symmetric decompositions: `K_n^r` into `K_q^r` with uniform weights, and
//! `K_{rq}^r - e` with weights depending only on how a clique meets `e`.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::sync::Arc;
use alloc::vec::Vec;

use num_traits::{One, Signed, Zero};

use crate::combin::binomial;
use crate::error::{Error, Result};
use crate::hypercore::{Hypergraph, VertexSet};
use crate::packing::{ExplicitPacking, Family, PackingView};
use crate::rational::{binom_q, Rational};

/// Uniform decomposition of `K_n^r` into `q`-cliques.
#[derive(Clone, Debug)]
pub struct SymmetricPacking {
    host: Arc<Hypergraph>,
    q: usize,
    weight: Rational,
}

/// Every `q`-clique of `K_n^r` gets weight `1 / C(n - r, q - r)`.
pub fn complete_symmetric(n: usize, q: usize, r: usize) -> Result<SymmetricPacking> {
    if !(r <= q && q <= n) {
        return Err(Error::Parameter(format!("need r <= q <= n, got r={r} q={q} n={n}")));
    }
    let host = Arc::new(Hypergraph::complete(n, r)?);
    Ok(SymmetricPacking {
        host,
        q,
        weight: binom_q((n - r) as i64, (q - r) as i64).recip(),
    })
}

impl SymmetricPacking {
    pub fn q(&self) -> usize {
        self.q
    }

    pub fn clique_weight(&self) -> &Rational {
        &self.weight
    }

    pub fn host_arc(&self) -> &Arc<Hypergraph> {
        &self.host
    }
}

impl PackingView for SymmetricPacking {
    fn host(&self) -> &Hypergraph {
        &self.host
    }

    fn family(&self) -> Family {
        Family::Clique { q: self.q }
    }

    fn weight(&self, element: &VertexSet) -> Rational {
        let inside = element.max_vertex().map_or(true, |v| v < self.host.n());
        if element.len() == self.q && inside {
            self.weight.clone()
        } else {
            Rational::zero()
        }
    }

    fn boundary_of(&self, _edge: &VertexSet) -> Rational {
        let n = self.host.n() as i64;
        let (q, r) = (self.q as i64, self.host.r() as i64);
        &self.weight * binom_q(n - r, q - r)
    }

    fn support_size_hint(&self) -> Option<usize> {
        usize::try_from(binomial(self.host.n() as i64, self.q as i64)).ok()
    }

    fn materialize(&self, limit: usize) -> Result<ExplicitPacking> {
        check_limit(self.support_size_hint(), limit)?;
        let mut entries = BTreeMap::new();
        self.host.for_each_clique(self.q, |c| {
            entries.insert(VertexSet::from_sorted(c.to_vec()), self.weight.clone());
            true
        });
        Ok(ExplicitPacking::from_map(self.host.clone(), self.family(), entries))
    }
}

fn check_limit(size: Option<usize>, limit: usize) -> Result<()> {
    match size {
        Some(s) if s <= limit => Ok(()),
        Some(s) => Err(Error::Budget(format!("support of {s} elements exceeds limit {limit}"))),
        None => Err(Error::Budget(format!("support size exceeds limit {limit}"))),
    }
}

/// The `r x r` upper-triangular system behind the missing-edge weights.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CoeffMatrix {
    pub r: usize,
    pub q: usize,
    pub n: usize,
    /// `a[t][i] = C(r-t, i-t) C(n-2r+t, q-r-i+t)` for `t <= i`, else 0.
    pub a: Vec<Vec<u128>>,
}

fn check_qr(q: usize, r: usize) -> Result<()> {
    if r < 2 || q <= r {
        return Err(Error::Parameter(format!("need q > r >= 2, got q={q} r={r}")));
    }
    Ok(())
}

pub fn build_matrix(q: usize, r: usize) -> Result<CoeffMatrix> {
    check_qr(q, r)?;
    let n = r * q;
    let (ri, ni, qi) = (r as i64, n as i64, q as i64);
    let a = (0..r as i64)
        .map(|t| {
            (0..r as i64)
                .map(|i| {
                    if t > i {
                        0
                    } else {
                        binomial(ri - t, i - t) * binomial(ni - 2 * ri + t, qi - ri - i + t)
                    }
                })
                .collect()
        })
        .collect();
    Ok(CoeffMatrix { r, q, n, a })
}

impl CoeffMatrix {
    pub fn is_upper_triangular(&self) -> bool {
        (0..self.r).all(|t| (0..t).all(|i| self.a[t][i] == 0))
    }

    /// `a[t][i] <= a[t+1][i]` whenever `t < i`.
    pub fn is_column_monotone(&self) -> bool {
        (0..self.r).all(|i| (0..i).all(|t| self.a[t][i] <= self.a[t + 1][i]))
    }

    pub fn apply(&self, w: &[Rational]) -> Vec<Rational> {
        self.a
            .iter()
            .map(|row| {
                row.iter().zip(w).fold(Rational::zero(), |acc, (&a, x)| {
                    acc + Rational::from_integer(a.into()) * x
                })
            })
            .collect()
    }
}

/// Weight per intersection size `i = |Q ∩ e|`, `0 <= i < r`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WeightVector(pub Vec<Rational>);

/// Back substitution on `A w = 1`.
pub fn solve_weights(q: usize, r: usize) -> Result<WeightVector> {
    let m = build_matrix(q, r)?;
    let mut w = alloc::vec![Rational::zero(); r];
    for t in (0..r).rev() {
        let mut rhs = Rational::one();
        for (a, wi) in m.a[t].iter().zip(&w).skip(t + 1) {
            rhs -= Rational::from_integer((*a).into()) * wi;
        }
        let diag = m.a[t][t];
        if diag == 0 {
            return Err(Error::Internal(format!("zero diagonal a[{t}][{t}]")));
        }
        w[t] = rhs / Rational::from_integer(diag.into());
        if w[t].is_negative() {
            return Err(Error::Internal(format!("negative weight w[{t}] = {}", w[t])));
        }
    }
    Ok(WeightVector(w))
}

/// Decomposition of `K_{rq}^r - e`, stored as one weight per class.
#[derive(Clone, Debug)]
pub struct MissingEdgePacking {
    host: Arc<Hypergraph>,
    q: usize,
    e: VertexSet,
    matrix: CoeffMatrix,
    weights: WeightVector,
}

pub fn missing_edge_packing(q: usize, r: usize, e: &VertexSet) -> Result<MissingEdgePacking> {
    check_qr(q, r)?;
    let n = r * q;
    if e.len() != r || e.max_vertex().is_some_and(|v| v >= n) {
        return Err(Error::Parameter(format!(
            "missing edge {:?} is not an {r}-subset of 0..{n}",
            e.as_slice()
        )));
    }
    let host = Arc::new(Hypergraph::complete_minus(n, r, core::slice::from_ref(e))?);
    Ok(MissingEdgePacking {
        host,
        q,
        e: e.clone(),
        matrix: build_matrix(q, r)?,
        weights: solve_weights(q, r)?,
    })
}

impl MissingEdgePacking {
    pub fn weights(&self) -> &WeightVector {
        &self.weights
    }

    pub fn missing_edge(&self) -> &VertexSet {
        &self.e
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn host_arc(&self) -> &Arc<Hypergraph> {
        &self.host
    }

    /// Expands to one weight per `q`-clique of the host.
    pub fn expand(&self) -> ExplicitPacking {
        let mut entries = BTreeMap::new();
        self.host.for_each_clique(self.q, |c| {
            let set = VertexSet::from_sorted(c.to_vec());
            let i = set.intersection_size(&self.e);
            entries.insert(set, self.weights.0[i].clone());
            true
        });
        ExplicitPacking::from_map(self.host.clone(), self.family(), entries)
    }
}

impl PackingView for MissingEdgePacking {
    fn host(&self) -> &Hypergraph {
        &self.host
    }

    fn family(&self) -> Family {
        Family::Clique { q: self.q }
    }

    fn weight(&self, element: &VertexSet) -> Rational {
        let i = element.intersection_size(&self.e);
        let inside = element.max_vertex().map_or(true, |v| v < self.host.n());
        if element.len() == self.q && i < self.host.r() && inside {
            self.weights.0[i].clone()
        } else {
            Rational::zero()
        }
    }

    /// Row `|f ∩ e|` of `A w`: the number of class-`i` cliques through an
    /// edge depends only on `|f ∩ e|`.
    fn boundary_of(&self, edge: &VertexSet) -> Rational {
        let t = edge.intersection_size(&self.e);
        self.matrix.apply(&self.weights.0)[t].clone()
    }

    fn support_size_hint(&self) -> Option<usize> {
        let (n, q, r) = (self.host.n() as i64, self.q as i64, self.host.r() as i64);
        usize::try_from(binomial(n, q) - binomial(n - r, q - r)).ok()
    }

    fn materialize(&self, limit: usize) -> Result<ExplicitPacking> {
        check_limit(self.support_size_hint(), limit)?;
        Ok(self.expand())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::packing::validate;
    use crate::rational::{int, ratio};

    fn set(v: &[usize]) -> VertexSet {
        VertexSet::new(v.to_vec()).unwrap()
    }

    #[test]
    fn symmetric_examples() {
        for (n, q, r, w) in [(4, 3, 2, ratio(1, 2)), (6, 3, 2, ratio(1, 4)), (12, 4, 3, ratio(1, 9))] {
            let p = complete_symmetric(n, q, r).unwrap();
            assert_eq!(p.clique_weight(), &w);
            let m = p.materialize(1 << 20).unwrap();
            assert_eq!(m.len() as u128, binomial(n as i64, q as i64));
            assert!(validate(&m, &int(0)).pass);
            assert!(validate(&p, &int(0)).pass);
        }
        assert!(complete_symmetric(5, 6, 2).is_err());
        assert!(complete_symmetric(5, 3, 4).is_err());
    }

    #[test]
    fn matrix_examples() {
        let m = build_matrix(3, 2).unwrap();
        assert_eq!(m.a, [[2, 2], [0, 3]]);
        let m = build_matrix(4, 3).unwrap();
        assert_eq!(m.a, [[6, 3, 0], [0, 7, 2], [0, 0, 8]]);
        assert!(build_matrix(3, 3).is_err());
        assert!(build_matrix(3, 1).is_err());
    }

    #[test]
    fn weight_examples() {
        assert_eq!(solve_weights(3, 2).unwrap().0, [ratio(1, 6), ratio(1, 3)]);
        assert_eq!(
            solve_weights(4, 3).unwrap().0,
            [ratio(19, 168), ratio(3, 28), ratio(1, 8)]
        );
    }

    #[test]
    fn missing_edge_boundary_examples() {
        let p = missing_edge_packing(3, 2, &set(&[0, 1])).unwrap();
        let m = p.expand();
        assert_eq!(m.boundary_by_incidence(&set(&[0, 2])), int(1));
        assert_eq!(m.boundary_by_incidence(&set(&[2, 3])), int(1));
        assert_eq!(m.weight(&set(&[0, 2, 3])), ratio(1, 3));
        assert_eq!(m.weight(&set(&[2, 3, 4])), ratio(1, 6));
        assert!(validate(&m, &int(0)).pass);
        assert!(missing_edge_packing(3, 2, &set(&[0, 6])).is_err());
    }

    #[test]
    fn small_systems_are_well_behaved() {
        for r in 2..=4usize {
            for q in r + 1..=20 / r {
                let m = build_matrix(q, r).unwrap();
                assert!(m.is_upper_triangular());
                assert!((0..r).all(|t| m.a[t][t] >= 1));
                assert!(m.is_column_monotone(), "r={r} q={q}");
                let w = solve_weights(q, r).unwrap();
                assert!(w.0.iter().all(|x| !x.is_negative()));
                assert_eq!(w.0[r - 1], Rational::from_integer(m.a[r - 1][r - 1].into()).recip());
                assert!(m.apply(&w.0).iter().all(|x| x.is_one()));
            }
        }
    }

    #[test]
    fn missing_edge_closed_form_matches_expansion() {
        for (q, r) in [(3, 2), (4, 2), (4, 3)] {
            let e: Vec<usize> = (0..r).map(|i| 2 * i + 1).collect();
            let p = missing_edge_packing(q, r, &set(&e)).unwrap();
            let m = p.expand();
            assert_eq!(Some(m.len()), p.support_size_hint());
            assert_eq!(m.boundary_by_support(), p.boundary_all());
            assert!(validate(&m, &int(0)).pass);
        }
    }
}
