//! Concatenation of decompositions, the fixing construction on `K_{rq}^r`
//! and the conversion of almost decompositions into exact ones.

use alloc::boxed::Box;
use alloc::collections::BTreeMap;
use alloc::format;
use alloc::sync::Arc;
use alloc::vec::Vec;

use num_traits::{One, Zero};

use crate::combin::binomial;
use crate::error::{Error, Result};
use crate::hypercore::{Hypergraph, VertexSet};
use crate::packing::{validate, ExplicitPacking, Family, PackingView};
use crate::rational::{binom_q, Rational};
use crate::symdecomp::solve_weights;

/// Distinct target vectors remembered by [`almost_to_full`].
const FIX_CACHE_LIMIT: usize = 4096;

/// Replaces every support element `H` of `outer` by the packing
/// `inner(H)`, weighted by `outer(H)`.
///
/// `inner` receives the element and the host subgraph it induces (vertices
/// relabeled `0..|H|`) and must return a packing of that subgraph. Each
/// inner packing is checked to be `beta`-almost.
pub fn concatenate<F>(
    outer: &dyn PackingView,
    family: Family,
    mut inner: F,
    beta: &Rational,
    limit: usize,
) -> Result<ExplicitPacking>
where
    F: FnMut(&VertexSet, &Hypergraph) -> Result<ExplicitPacking>,
{
    let outer = outer.materialize(limit)?;
    let host = outer.host_arc().clone();
    let mut acc: BTreeMap<VertexSet, Rational> = BTreeMap::new();
    for (piece, w) in outer.entries() {
        let wrap = |source: Error| Error::Inner {
            piece: piece.as_slice().to_vec(),
            source: alloc::boxed::Box::new(source),
        };
        let sub = host.induced(piece).map_err(wrap)?;
        let part = inner(piece, &sub).map_err(wrap)?;
        if *part.host() != sub {
            return Err(wrap(Error::HostMismatch));
        }
        let report = validate(&part, beta);
        if !report.pass {
            let local = report.violations[0];
            let witness = crate::combin::unrank_colex(local, host.r());
            return Err(wrap(Error::Deficiency {
                depth: 0,
                max_eta: report.eta,
                threshold: Box::new(beta.clone()),
                witness: witness.iter().map(|&i| piece[i]).collect(),
            }));
        }
        for (local, v) in part.entries() {
            let global = VertexSet::from_sorted(local.iter().map(|&i| piece[i]).collect());
            *acc.entry(global).or_insert_with(Rational::zero) += w * v;
        }
        if acc.len() > limit {
            return Err(Error::Budget(format!("concatenated support exceeds limit {limit}")));
        }
    }
    Ok(ExplicitPacking::from_map(host, family, acc))
}

/// `epsilon = 1 / C(rq, r)`, the slack the fixing construction absorbs.
pub fn fix_epsilon(q: usize, r: usize) -> Rational {
    binom_q((r * q) as i64, r as i64).recip()
}

/// Packing of `K_{rq}^r` into `q`-cliques whose boundary equals `target`.
///
/// `target[k]` is the prescribed value at the edge of colex rank `k`; every
/// value must lie in `[1 - 1/C(rq, r), 1]`.
pub fn fix_packing(target: &[Rational], q: usize, r: usize) -> Result<ExplicitPacking> {
    let (host, weights) = fix_weights(target, q, r)?;
    let cliques = host.enumerate_cliques(q);
    let entries = cliques.into_iter().zip(weights).collect();
    Ok(ExplicitPacking::from_map(host, Family::Clique { q }, entries))
}

/// Weights of every `q`-clique of `K_{rq}^r` in colex clique order.
///
/// Averaging `lambda_e Phi_0 + (1 - lambda_e) Phi_e` over all edges `e`
/// gives, for a clique `Q`,
/// `(w_0 sum_e lambda_e + sum_{e not in Q} (1 - lambda_e) w_{|Q ∩ e|}) / C(n, r)`
/// where `w_0` is the uniform weight and `w_i` the missing-edge weights.
fn fix_weights(target: &[Rational], q: usize, r: usize) -> Result<(Arc<Hypergraph>, Vec<Rational>)> {
    let n = r * q;
    let host = Arc::new(Hypergraph::complete(n, r)?);
    let edges = host.edge_count();
    if target.len() != edges {
        return Err(Error::Parameter(format!(
            "expected {edges} target values, got {}",
            target.len()
        )));
    }
    let eps = fix_epsilon(q, r);
    let low = Rational::one() - &eps;
    let mut lambda = Vec::with_capacity(edges);
    for (e, t) in host.edges().zip(target) {
        if *t < low || *t > Rational::one() {
            return Err(Error::TargetOutOfRange {
                edge: e.into_vec(),
                value: t.clone(),
                low: Box::new(low),
            });
        }
        lambda.push((t - &low) / &eps);
    }
    let w = solve_weights(q, r)?.0;
    let w0 = binom_q((n - r) as i64, (q - r) as i64).recip();
    let lambda_sum = lambda.iter().fold(Rational::zero(), |a, l| a + l);
    let base = &w0 * &lambda_sum;
    let edge_sets: Vec<VertexSet> = host.edges().collect();
    let mut out = Vec::new();
    for clique in host.enumerate_cliques(q) {
        // group (1 - lambda_e) by |Q ∩ e| before multiplying by w
        let mut by_class = alloc::vec![Rational::zero(); r];
        for (e, l) in edge_sets.iter().zip(&lambda) {
            let i = clique.intersection_size(e);
            if i < r {
                by_class[i] += Rational::one() - l;
            }
        }
        let mut v = base.clone();
        for (s, wi) in by_class.iter().zip(&w) {
            v += s * wi;
        }
        out.push(v * &eps);
    }
    Ok((host, out))
}

/// Turns an almost decomposition into `rq`-cliques into an exact
/// decomposition into `q`-cliques.
///
/// Every boundary value of `p` must lie in `[1 - 1/C(rq, r), 1]`. Each
/// copy in the support is fixed locally toward `(1 - eps) / ∂p(e)`;
/// copies with identical local targets share one fixing computation.
pub fn almost_to_full(p: &dyn PackingView, q: usize, r: usize, limit: usize) -> Result<ExplicitPacking> {
    let big = r * q;
    if p.family() != (Family::Clique { q: big }) {
        return Err(Error::Parameter(format!(
            "expected a packing of {big}-cliques, got {:?}",
            p.family()
        )));
    }
    if p.host().r() != r {
        return Err(Error::Parameter(format!(
            "host uniformity {} differs from r = {r}",
            p.host().r()
        )));
    }
    let eps = fix_epsilon(q, r);
    let low = Rational::one() - &eps;
    let boundary = p.boundary_all();
    for (e, b) in p.host().edges().zip(&boundary) {
        if *b < low || *b > Rational::one() {
            return Err(Error::BoundaryOutOfRange {
                edge: e.into_vec(),
                boundary: b.clone(),
                floor: Box::new(low),
            });
        }
    }
    let support = p.materialize(limit)?;
    let host = support.host_arc().clone();
    let local_edges: Vec<VertexSet> = Hypergraph::complete(big, r)?.edges().collect();
    let local_cliques = Hypergraph::complete(big, r)?.enumerate_cliques(q);
    let mut cache: BTreeMap<Vec<Rational>, Vec<Rational>> = BTreeMap::new();
    let mut acc: BTreeMap<VertexSet, Rational> = BTreeMap::new();
    for (copy, w) in support.entries() {
        let targets: Vec<Rational> = local_edges
            .iter()
            .map(|le| {
                let global: Vec<usize> = le.iter().map(|&i| copy[i]).collect();
                let idx = host
                    .edge_index(crate::combin::rank_colex(&global))
                    .expect("support copies are cliques of the host");
                &low / &boundary[idx]
            })
            .collect();
        let fresh;
        let weights = match cache.get(&targets) {
            Some(ws) => ws,
            None => {
                let (_, ws) = fix_weights(&targets, q, r)?;
                if cache.len() < FIX_CACHE_LIMIT {
                    cache.entry(targets).or_insert(ws)
                } else {
                    fresh = ws;
                    &fresh
                }
            }
        };
        for (lc, v) in local_cliques.iter().zip(weights) {
            if v.is_zero() {
                continue;
            }
            let global = VertexSet::from_sorted(lc.iter().map(|&i| copy[i]).collect());
            *acc.entry(global).or_insert_with(Rational::zero) += w * v;
        }
        if acc.len() > limit {
            return Err(Error::Budget(format!("fixed support exceeds limit {limit}")));
        }
    }
    let scale = low.recip();
    for v in acc.values_mut() {
        *v *= &scale;
    }
    Ok(ExplicitPacking::from_map(host, Family::Clique { q }, acc))
}

/// Number of `q`-cliques of `K_{rq}^r` each fixed copy contributes.
pub fn cliques_per_copy(q: usize, r: usize) -> u128 {
    binomial((r * q) as i64, q as i64)
}
