//! Parallel evaluation. Results never depend on the worker count.

use fracdec_core::sampler::{mc_chunk, mc_chunks, McEstimate, UniformFamilyPacking};
use fracdec_core::{BoundaryReport, ExplicitPacking, Rational, VertexSet};
use num_traits::Zero;
use rayon::prelude::*;

const ENTRY_CHUNK: usize = 1024;

/// Boundary of every host edge, in rank order.
pub fn boundary_all(p: &ExplicitPacking) -> Vec<Rational> {
    let edges = p.host_arc().edge_count();
    let entries: Vec<(&VertexSet, &Rational)> = p.entries().iter().collect();
    entries
        .par_chunks(ENTRY_CHUNK)
        .map(|chunk| {
            let mut acc = vec![Rational::zero(); edges];
            for (set, w) in chunk {
                p.add_element(set, w, &mut acc);
            }
            acc
        })
        .reduce(
            || vec![Rational::zero(); edges],
            |mut a, b| {
                for (x, y) in a.iter_mut().zip(b) {
                    *x += y;
                }
                a
            },
        )
}

/// Exact validation against the window `[1 - eta, 1]`.
pub fn validate(p: &ExplicitPacking, eta: &Rational) -> BoundaryReport {
    BoundaryReport::from_values(p.host_arc(), boundary_all(p), eta)
}

/// Monte Carlo deficiency at `f`, chunks evaluated in parallel.
pub fn family_deficiency_mc(p: &UniformFamilyPacking, f: &VertexSet, samples: u64, seed: u64) -> McEstimate {
    let chunks: Vec<(u64, u64)> = mc_chunks(samples).collect();
    let misses = chunks.par_iter().map(|&(c, n)| mc_chunk(p, f, seed, c, n)).sum();
    McEstimate::from_counts(samples, misses, seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use fracdec_core::sampler::{family_deficiency_mc as sequential_mc, uniform_family_packing};
    use fracdec_core::symdecomp::complete_symmetric;
    use fracdec_core::{Hypergraph, PackingView};

    #[test]
    fn parallel_boundary_matches_sequential() {
        let p = complete_symmetric(9, 3, 2).unwrap().materialize(1 << 16).unwrap();
        assert_eq!(boundary_all(&p), p.boundary_by_support());
        assert!(validate(&p, &Rational::zero()).pass);
    }

    #[test]
    fn parallel_mc_matches_sequential() {
        let e = VertexSet::new(vec![0, 1]).unwrap();
        let removed = [VertexSet::new(vec![2, 3]).unwrap()];
        let g = Hypergraph::complete_minus(10, 2, &removed).unwrap();
        let fam = uniform_family_packing(&g, 5, 1).unwrap();
        let par = family_deficiency_mc(&fam, &e, 10_000, 7);
        assert_eq!(par, sequential_mc(&fam, &e, 10_000, 7).unwrap());
    }
}
