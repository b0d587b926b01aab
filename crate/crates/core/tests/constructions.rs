use fracdec_core::hypercore::{Hypergraph, Matching, VertexSet};
use fracdec_core::lporacle::{build_feasibility_lp, feasible, verify_certificate};
use fracdec_core::matchdist::greedy_edge_color;
use fracdec_core::orchestrator::{chernoff_report, pipeline, PipelineSettings, Strategy};
use fracdec_core::packing::validate;
use fracdec_core::rational::ratio;
use fracdec_core::symdecomp::missing_edge_packing;
use fracdec_core::Rational;
use num_traits::Zero;

#[test]
fn chernoff_bound_dominates_in_proof_regime() {
    let n = 768;
    let m = Matching::new(n, 2, (0..20).map(|i| vec![2 * i, 2 * i + 1]).collect()).unwrap();
    let rep = chernoff_report(n, 2, 3, &m, &ratio(1, 2)).unwrap();
    assert!(rep.asymptotic_regime && rep.applicable);
    assert!(rep.bound_dominates);
    assert!(rep.bound_within_threshold && rep.exact_within_threshold);
}

#[test]
fn missing_edge_witness_on_k6() {
    let e = VertexSet::new(vec![0, 1]).unwrap();
    let p = missing_edge_packing(3, 2, &e).unwrap();
    let l = build_feasibility_lp(p.host_arc(), 3).unwrap();
    assert_eq!((l.rows(), l.cols()), (14, 16));
    assert!(feasible(&l).unwrap().is_feasible());
    let w = l.solution_from_packing(&p.expand()).unwrap();
    assert!(verify_certificate(&l, &w).unwrap());
}

#[test]
fn pipeline_complete_graph_all_strategies() {
    let g = Hypergraph::complete(9, 2).unwrap();
    let s = PipelineSettings::default();
    for strategy in [Strategy::LpFallback { k: 6, m: 0 }, Strategy::Empirical { k: 7, m: 0 }] {
        let rep = pipeline(&g, 3, &strategy, &s);
        let p = rep
            .packing()
            .unwrap_or_else(|| panic!("{strategy:?}: {:?}", rep.stages));
        assert!(validate(p, &Rational::zero()).pass);
    }
}

#[test]
fn greedy_coloring_meets_bridging_bound() {
    for n in [8, 10, 12] {
        let m1 = Matching::new(n, 2, (0..n / 2).map(|i| vec![2 * i, 2 * i + 1]).collect()).unwrap();
        let m2 = Matching::new(n, 2, (0..n / 2).map(|i| vec![2 * i + 1, (2 * i + 2) % n]).collect()).unwrap();
        let g = Hypergraph::complete_minus_matchings(n, 2, &[m1, m2]).unwrap();
        let colors = greedy_edge_color(&g.complement());
        let (r, matchings) = (2, 2);
        assert!(colors.len() <= r * (matchings - 1) + 1);
        let covered: usize = colors.iter().map(Matching::len).sum();
        assert_eq!(covered, g.complement().edge_count());
    }
}
