//! Constants of the main argument, proof bounds against exact values, and
//! the end-to-end pipeline
//! `G -> k-set family -> matchings per piece -> inner decompositions ->
//! concatenation -> almost-to-full`.
//!
//! Bound evaluations here are diagnostics in the log domain (`f64`). The
//! pipeline itself only returns packings that passed exact validation.

use alloc::boxed::Box;
use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec::Vec;

use num_bigint::BigUint;
use num_traits::{ToPrimitive, Zero};

use crate::calculus::{almost_to_full, concatenate, fix_epsilon};
use crate::combin::binomial_big;
use crate::error::{Error, Result};
use crate::hypercore::{Hypergraph, Matching};
use crate::lporacle::{build_feasibility_lp, feasible_with, Certificate, LpBudget};
use crate::matchdist::{
    decompose_minus_matchings, deficiency_report, greedy_edge_color, DeficiencyReport, MatchingSettings,
};
use crate::packing::{validate, ExplicitPacking, Family, PackingView};
use crate::rational::{int, ln_biguint, ln_rational, pow, to_f64, Rational};
use crate::sampler::uniform_family_packing;

/// Default cap on `k` before the constants are declared vacuous.
pub const DEFAULT_VACUITY_BUDGET: u64 = 10_000;

const E2: f64 = core::f64::consts::E * core::f64::consts::E;
const LN2: f64 = core::f64::consts::LN_2;

/// One inequality of the parameter chain.
#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ParamReport {
    pub r: usize,
    pub epsilon: Rational,
    pub q: usize,
    /// `32 r^3`.
    pub c: u64,
    /// Smallest integer above `(r + (r^2 - 1)/epsilon)^{r-1}`.
    pub m: BigUint,
    /// `m^{1/(r-1)} - r`.
    pub exponent: f64,
    /// `beta = 2^beta_log2`, the smallest power of two with
    /// `C^m r beta^{-exponent} <= e^{-r}`.
    pub beta_log2: u64,
    pub ln_alpha: f64,
    /// `C^m r q`, when small enough to write down.
    pub k: Option<BigUint>,
    pub ln_k: f64,
    pub ln_d: f64,
    /// Natural log of `k ((2 e^2 k)^{r-1} d)^{exponent/(r-1)}`.
    pub ln_final_bound: f64,
    /// `-ln C(rq, r)`.
    pub ln_target: f64,
    pub checks: Vec<Check>,
    pub vacuity_budget: u64,
    pub vacuous: bool,
}

impl ParamReport {
    pub fn all_hold(&self) -> bool {
        self.checks.iter().all(|c| c.holds)
    }

    pub fn k_usize(&self) -> Option<usize> {
        self.k.as_ref().and_then(ToPrimitive::to_usize)
    }

    pub fn m_usize(&self) -> Option<usize> {
        self.m.to_usize()
    }
}

pub fn main_parameters(r: usize, epsilon: &Rational, q: usize) -> Result<ParamReport> {
    main_parameters_with(r, epsilon, q, DEFAULT_VACUITY_BUDGET)
}

pub fn main_parameters_with(r: usize, epsilon: &Rational, q: usize, vacuity_budget: u64) -> Result<ParamReport> {
    if r < 2 || q <= r {
        return Err(Error::Parameter(format!("need r >= 2 and q > r, got r={r} q={q}")));
    }
    if !(*epsilon > Rational::zero() && *epsilon <= int(1)) {
        return Err(Error::Parameter(format!("epsilon = {epsilon} must lie in (0, 1]")));
    }
    let rr = r as i64;
    let spread = int(rr * rr - 1) / epsilon;
    let base = int(rr) + &spread;
    let base_pow = pow(&base, r - 1);
    let m = (base_pow.numer() / base_pow.denom()).to_biguint().expect("positive") + 1u8;
    let m_q = Rational::from_integer(m.clone().into());

    let (rf, r1, qf) = (r as f64, (r - 1) as f64, q as f64);
    let eps = to_f64(epsilon);
    let ln_m = ln_biguint(&m);
    let m_f = libm::exp(ln_m);
    let exponent = libm::exp(ln_m / r1) - rf;
    let c = 32 * (r as u64).pow(3);
    let ln_c = libm::log(c as f64);
    let ln_cm = m_f * ln_c;
    let ln_r = libm::log(rf);
    let ln_q = libm::log(qf);

    let need = (ln_cm + ln_r + rf) / exponent;
    let mut beta_log2 = libm::ceil(need / LN2).max(1.0) as u64;
    while ln_cm + ln_r - exponent * beta_log2 as f64 * LN2 > -rf {
        beta_log2 += 1;
    }
    let ln_beta = beta_log2 as f64 * LN2;

    let ln_alpha = -r1 * (LN2 + 2.0 + ln_beta + ln_cm + ln_r);
    let ln_k = ln_cm + ln_r + ln_q;
    let ln_d = ln_alpha - (r1 + eps) * ln_q;
    let ln_product = ln_d + r1 * (libm::log(2.0 * E2) + ln_k);
    let ln_final_bound = ln_k + exponent / r1 * ln_product;
    let ln_target = -ln_biguint(&binomial_big((r * q) as i64, rr));
    let k = m
        .to_u32()
        .filter(|&m| m <= 1 << 16)
        .map(|m| num_traits::pow(BigUint::from(c), m as usize) * (r * q));

    let identity = |a: f64, b: f64| (a - b).abs() <= 1e-9 * (1.0 + a.abs().max(b.abs()));
    let id_product = -r1 * ln_beta - eps * ln_q;
    let id_final = ln_cm + ln_r - exponent * ln_beta + (1.0 - eps * exponent / r1) * ln_q;
    let step_q = ln_cm + ln_r - exponent * ln_beta - rf * ln_q;
    let beta_side = ln_cm + ln_r - exponent * ln_beta;
    let checks = alloc::vec![
        Check {
            name: "m > (r + (r^2-1)/eps)^(r-1)",
            lhs: m_f,
            rhs: to_f64(&base_pow),
            holds: m_q > base_pow,
        },
        Check {
            name: "m^(1/(r-1)) - r >= (r^2-1)/eps",
            lhs: exponent,
            rhs: to_f64(&spread),
            holds: m_q >= base_pow,
        },
        Check {
            name: "(r^2-1)/eps > r-1",
            lhs: to_f64(&spread),
            rhs: r1,
            holds: spread > int(rr - 1),
        },
        Check {
            name: "eps (m^(1/(r-1)) - r)/(r-1) > r+1",
            lhs: eps * exponent / r1,
            rhs: rf + 1.0,
            holds: m_q > base_pow,
        },
        Check {
            name: "ln[d (2e^2 k)^(r-1)] = ln[beta^-(r-1) q^-eps]",
            lhs: ln_product,
            rhs: id_product,
            holds: identity(ln_product, id_product),
        },
        Check {
            name: "ln[d (2e^2 k)^(r-1)] < 0",
            lhs: ln_product,
            rhs: 0.0,
            holds: ln_product < 0.0,
        },
        Check {
            name: "ln[final bound] = ln[C^m r beta^-x q^(1 - eps x/(r-1))]",
            lhs: ln_final_bound,
            rhs: id_final,
            holds: identity(ln_final_bound, id_final),
        },
        Check {
            name: "ln[final bound] <= ln[C^m r beta^-x q^-r]",
            lhs: ln_final_bound,
            rhs: step_q,
            holds: ln_final_bound <= step_q + 1e-9 * step_q.abs(),
        },
        Check {
            name: "ln[C^m r beta^-x] <= -r",
            lhs: beta_side,
            rhs: -rf,
            holds: beta_side <= -rf,
        },
        Check {
            name: "-r - r ln q <= -ln C(rq, r)",
            lhs: -rf - rf * ln_q,
            rhs: ln_target,
            holds: -rf - rf * ln_q <= ln_target,
        },
        Check {
            name: "ln[final bound] <= -ln C(rq, r)",
            lhs: ln_final_bound,
            rhs: ln_target,
            holds: ln_final_bound <= ln_target,
        },
    ];
    let vacuous = k.as_ref().map_or(true, |k| *k > BigUint::from(vacuity_budget));
    Ok(ParamReport {
        r,
        epsilon: epsilon.clone(),
        q,
        c,
        m,
        exponent,
        beta_log2,
        ln_alpha,
        k,
        ln_k,
        ln_d,
        ln_final_bound,
        ln_target,
        checks,
        vacuity_budget,
        vacuous,
    })
}

/// `e^{-mu/8}`.
pub fn chernoff_factor(mu: f64) -> f64 {
    libm::exp(-mu / 8.0)
}

/// The Chernoff estimate for `Pr[|X| < rq | e ⊆ X]` next to its exact value.
#[derive(Clone, Debug, PartialEq)]
pub struct ChernoffReport {
    /// `p m + p (n - m r - r)`, a lower bound on `E[Y]` for every edge.
    pub mu_lower: Rational,
    /// `rq <= mu_lower / 2`, so that `Pr[Y < rq] <= Pr[Y < mu/2]`.
    pub applicable: bool,
    /// `n >= 32 r^3 q`.
    pub asymptotic_regime: bool,
    /// `ln e^{-mu/8}`.
    pub ln_bound: f64,
    pub exact: DeficiencyReport,
    pub ln_max_exact: f64,
    /// `ln_bound >= ln_max_exact`; only meaningful when `applicable`.
    pub bound_dominates: bool,
    pub ln_threshold: f64,
    pub bound_within_threshold: bool,
    pub exact_within_threshold: bool,
}

pub fn chernoff_report(n: usize, r: usize, q: usize, m: &Matching, p: &Rational) -> Result<ChernoffReport> {
    let exact = deficiency_report(n, r, q, m, p)?;
    let count = m.len() as i64;
    let (ni, ri) = (n as i64, r as i64);
    let mu_lower = p * int(count + ni - count * ri - ri);
    let ln_bound = -to_f64(&mu_lower) / 8.0;
    let ln_max_exact = ln_rational(&exact.max_eta);
    let ln_threshold = ln_rational(&exact.threshold);
    Ok(ChernoffReport {
        applicable: int(2 * ri * q as i64) <= mu_lower,
        asymptotic_regime: n as u64 >= 32 * (r as u64).pow(3) * q as u64,
        bound_dominates: ln_bound >= ln_max_exact,
        bound_within_threshold: ln_bound <= ln_threshold,
        exact_within_threshold: exact.pass,
        mu_lower,
        ln_bound,
        exact,
        ln_max_exact,
        ln_threshold,
    })
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Strategy {
    /// `k` and `m` from [`main_parameters`].
    Analytic { epsilon: Rational },
    /// Inner pieces decomposed by the matching construction.
    Empirical { k: usize, m: usize },
    /// Inner pieces decomposed by the LP oracle.
    LpFallback { k: usize, m: usize },
}

#[derive(Clone, Debug)]
pub struct PipelineSettings {
    pub matching: MatchingSettings,
    pub lp_budget: LpBudget,
    pub limit: usize,
    pub vacuity_budget: u64,
    /// When the family packing is exact, decompose every piece straight
    /// into `q`-cliques and skip almost-to-full.
    pub direct_when_exact: bool,
}

impl Default for PipelineSettings {
    fn default() -> Self {
        PipelineSettings {
            matching: MatchingSettings::default(),
            lp_budget: LpBudget::default(),
            limit: crate::DEFAULT_MATERIALIZE_LIMIT,
            vacuity_budget: DEFAULT_VACUITY_BUDGET,
            direct_when_exact: true,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Stage {
    Parameters,
    FamilyDeficiency,
    Matchings,
    Inner,
    Concatenation,
    AlmostToFull,
    Validation,
}

impl Stage {
    pub fn name(self) -> &'static str {
        match self {
            Stage::Parameters => "parameters",
            Stage::FamilyDeficiency => "family-deficiency",
            Stage::Matchings => "matchings",
            Stage::Inner => "inner",
            Stage::Concatenation => "concatenation",
            Stage::AlmostToFull => "almost-to-full",
            Stage::Validation => "validation",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StageStatus {
    pub stage: Stage,
    pub passed: bool,
    pub detail: String,
}

#[derive(Clone, Debug)]
pub struct PipelineReport {
    pub strategy: Strategy,
    pub stages: Vec<StageStatus>,
    pub params: Option<ParamReport>,
    /// `1 - min ∂` of the family packing.
    pub family_eta: Option<Rational>,
    pub pieces: usize,
    /// Pieces distinct up to their relabeled edge set.
    pub distinct_pieces: usize,
    pub max_matchings: usize,
    /// Clique size the pieces were decomposed into.
    pub inner_clique_size: Option<usize>,
    pub outcome: core::result::Result<ExplicitPacking, (Stage, Error)>,
}

impl PipelineReport {
    fn new(strategy: Strategy) -> Self {
        PipelineReport {
            strategy,
            stages: Vec::new(),
            params: None,
            family_eta: None,
            pieces: 0,
            distinct_pieces: 0,
            max_matchings: 0,
            inner_clique_size: None,
            outcome: Err((Stage::Parameters, Error::Internal("pipeline did not run".into()))),
        }
    }

    pub fn is_success(&self) -> bool {
        self.outcome.is_ok()
    }

    pub fn packing(&self) -> Option<&ExplicitPacking> {
        self.outcome.as_ref().ok()
    }

    fn pass(&mut self, stage: Stage, detail: String) {
        self.stages.push(StageStatus {
            stage,
            passed: true,
            detail,
        });
    }

    fn fail(mut self, stage: Stage, err: Error) -> Self {
        self.stages.push(StageStatus {
            stage,
            passed: false,
            detail: format!("{err}"),
        });
        self.outcome = Err((stage, err));
        self
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Solver {
    Matchings,
    Lp,
}

/// Runs the whole chain on `g`. Failures are reported per stage; a
/// successful outcome has passed exact validation of `∂ ≡ 1`.
pub fn pipeline(g: &Hypergraph, q: usize, strategy: &Strategy, s: &PipelineSettings) -> PipelineReport {
    let mut rep = PipelineReport::new(strategy.clone());
    let r = g.r();
    if q <= r {
        return rep.fail(
            Stage::Parameters,
            Error::Parameter(format!("need q > r, got q={q} r={r}")),
        );
    }
    let (k, m, solver) = match strategy {
        Strategy::Empirical { k, m } => (*k, *m, Solver::Matchings),
        Strategy::LpFallback { k, m } => (*k, *m, Solver::Lp),
        Strategy::Analytic { epsilon } => {
            let params = match main_parameters_with(r, epsilon, q, s.vacuity_budget) {
                Ok(p) => p,
                Err(e) => return rep.fail(Stage::Parameters, e),
            };
            let km = (params.k_usize(), params.m_usize());
            let vacuous = params.vacuous;
            let ln_k = params.ln_k;
            rep.params = Some(params);
            match km {
                (Some(k), Some(m)) if !vacuous && k <= g.n() => (k, m, Solver::Matchings),
                _ => {
                    let err = Error::Budget(format!(
                        "constants are vacuous at desk scale: k = C^m r q ~ 10^{:.1} against budget {} and n = {}",
                        ln_k / core::f64::consts::LN_10,
                        s.vacuity_budget,
                        g.n()
                    ));
                    return rep.fail(Stage::Parameters, err);
                }
            }
        }
    };
    rep.pass(Stage::Parameters, format!("k = {k}, m = {m}"));
    match run(g, q, k, m, solver, s, &mut rep) {
        Ok(p) => {
            rep.outcome = Ok(p);
            rep
        }
        Err((stage, e)) => rep.fail(stage, e),
    }
}

fn run(
    g: &Hypergraph,
    q: usize,
    k: usize,
    m: usize,
    solver: Solver,
    s: &PipelineSettings,
    rep: &mut PipelineReport,
) -> core::result::Result<ExplicitPacking, (Stage, Error)> {
    let r = g.r();
    let at = |stage: Stage| move |e: Error| (stage, e);
    let outer = uniform_family_packing(g, k, m).map_err(at(Stage::FamilyDeficiency))?;
    let superset_count = crate::combin::binomial((g.n() - r) as i64, (k - r) as i64);
    if superset_count > s.limit as u128 {
        return Err((
            Stage::FamilyDeficiency,
            Error::Budget(format!("{superset_count} supersets per edge exceed limit {}", s.limit)),
        ));
    }
    let eps = fix_epsilon(q, r);
    let family = validate(&outer, &eps);
    rep.family_eta = Some(family.eta.clone());
    let direct = s.direct_when_exact && family.eta.is_zero();
    if !family.pass {
        let witness = family
            .worst_edge()
            .map(|rank| crate::combin::unrank_colex(rank, r))
            .unwrap_or_default();
        return Err((
            Stage::FamilyDeficiency,
            Error::Deficiency {
                depth: 0,
                max_eta: family.eta,
                threshold: Box::new(eps),
                witness,
            },
        ));
    }
    rep.pass(Stage::FamilyDeficiency, format!("eta = {}", family.eta));
    let t = if direct { q } else { r * q };
    rep.inner_clique_size = Some(t);

    let mut cache: BTreeMap<Vec<u64>, ExplicitPacking> = BTreeMap::new();
    let mut max_matchings = 0usize;
    let mut pieces = 0usize;
    let bridging = if m == 0 { 0 } else { r * (m - 1) + 1 };
    let psi = concatenate(
        &outer,
        Family::Clique { q: t },
        |_, sub| {
            pieces += 1;
            let key = sub.edge_ranks().to_vec();
            if let Some(p) = cache.get(&key) {
                return Ok(p.clone());
            }
            let ms = greedy_edge_color(&sub.complement());
            max_matchings = max_matchings.max(ms.len());
            let p = match solver {
                Solver::Matchings => decompose_minus_matchings(sub.n(), r, t, &ms, &s.matching)?,
                Solver::Lp => lp_decompose(sub, t, &s.lp_budget)?,
            };
            cache.insert(key, p.clone());
            Ok(p)
        },
        &Rational::zero(),
        s.limit,
    );
    rep.pieces = pieces;
    rep.distinct_pieces = cache.len();
    rep.max_matchings = max_matchings;
    rep.pass(
        Stage::Matchings,
        format!("at most {max_matchings} matchings per piece (greedy bound {bridging})"),
    );
    let psi = psi.map_err(|e| match e {
        Error::Budget(_) => (Stage::Concatenation, e),
        e => (Stage::Inner, e),
    })?;
    rep.pass(
        Stage::Inner,
        format!("{pieces} pieces, {} distinct, into {t}-cliques", rep.distinct_pieces),
    );
    rep.pass(Stage::Concatenation, format!("{} elements", psi.len()));

    let full = if direct {
        rep.pass(Stage::AlmostToFull, "skipped: family packing is exact".into());
        psi
    } else {
        let f = almost_to_full(&psi, q, r, s.limit).map_err(at(Stage::AlmostToFull))?;
        rep.pass(Stage::AlmostToFull, format!("{} cliques", f.len()));
        f
    };
    let check = validate(&full, &Rational::zero());
    if !check.pass || full.host() != g {
        return Err((
            Stage::Validation,
            Error::Internal(format!("result fails exact validation, eta = {}", check.eta)),
        ));
    }
    rep.pass(Stage::Validation, format!("∂ ≡ 1 on {} edges", g.edge_count()));
    Ok(full)
}

/// Fractional `t`-clique decomposition of `h` from the LP oracle.
pub fn lp_decompose(h: &Hypergraph, t: usize, budget: &LpBudget) -> Result<ExplicitPacking> {
    let l = build_feasibility_lp(h, t)?;
    match feasible_with(&l, budget)?.certificate {
        Certificate::Feasible { x } => {
            let entries = l
                .col_keys
                .into_iter()
                .zip(x)
                .map(|(c, w)| (crate::hypercore::VertexSet::from_sorted(c), w));
            ExplicitPacking::new(Arc::new(h.clone()), Family::Clique { q: t }, entries)
        }
        Certificate::Infeasible { .. } => Err(Error::Precondition(format!(
            "piece on {} vertices has no fractional {t}-clique decomposition (verified Farkas certificate)",
            h.n()
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hypercore::VertexSet;
    use crate::rational::ratio;
    use alloc::vec;

    #[test]
    fn constants_for_r3_eps1() {
        let rep = main_parameters(3, &int(1), 4).unwrap();
        assert_eq!(rep.m, BigUint::from(122u8));
        assert_eq!(rep.c, 864);
        assert!(rep.vacuous);
        assert!(
            rep.all_hold(),
            "{:?}",
            rep.checks.iter().filter(|c| !c.holds).collect::<Vec<_>>()
        );
        let k = rep.k.unwrap();
        assert_eq!(k, num_traits::pow(BigUint::from(864u32), 122) * 12u8);
    }

    #[test]
    fn chain_holds_across_q() {
        for r in 2..=4 {
            for q in r + 1..=10 {
                for eps in [int(1), ratio(1, 2)] {
                    let rep = main_parameters(r, &eps, q).unwrap();
                    assert!(rep.all_hold(), "r={r} q={q} eps={eps}");
                }
            }
        }
        assert!(main_parameters(3, &int(2), 4).is_err());
        assert!(main_parameters(3, &int(1), 3).is_err());
    }

    #[test]
    fn chernoff_factor_at_16() {
        assert!((chernoff_factor(16.0) - libm::exp(-2.0)).abs() < 1e-15);
    }

    #[test]
    fn chernoff_small_n_is_not_applicable() {
        let m = Matching::new(12, 2, vec![vec![0, 1]]).unwrap();
        let rep = chernoff_report(12, 2, 3, &m, &ratio(1, 2)).unwrap();
        assert!(!rep.applicable && !rep.asymptotic_regime);
        assert_eq!(rep.mu_lower, ratio(9, 2));
    }

    #[test]
    fn pipeline_complete_graph_lp() {
        let g = Hypergraph::complete(7, 2).unwrap();
        let rep = pipeline(
            &g,
            3,
            &Strategy::LpFallback { k: 5, m: 0 },
            &PipelineSettings::default(),
        );
        assert!(rep.is_success(), "{:?}", rep.stages);
        assert_eq!(rep.inner_clique_size, Some(3));
        assert_eq!(rep.distinct_pieces, 1);
    }

    #[test]
    fn pipeline_through_copies() {
        let g = Hypergraph::complete(8, 2).unwrap();
        let s = PipelineSettings {
            direct_when_exact: false,
            ..PipelineSettings::default()
        };
        let rep = pipeline(&g, 3, &Strategy::Empirical { k: 6, m: 0 }, &s);
        assert!(rep.is_success(), "{:?}", rep.stages);
        assert_eq!(rep.inner_clique_size, Some(6));
        assert!(validate(rep.packing().unwrap(), &Rational::zero()).pass);
    }

    #[test]
    fn pipeline_lp_on_minus_matching() {
        let m = Matching::new(10, 2, (0..5).map(|i| vec![2 * i, 2 * i + 1]).collect()).unwrap();
        let g = Hypergraph::complete_minus_matchings(10, 2, &[m]).unwrap();
        let rep = pipeline(
            &g,
            3,
            &Strategy::LpFallback { k: 8, m: 1 },
            &PipelineSettings::default(),
        );
        assert!(rep.is_success(), "{:?}", rep.stages);
        assert_eq!(rep.pieces, 45);
        assert_eq!(rep.max_matchings, 1);
    }

    #[test]
    fn pipeline_failures_are_clean() {
        let g = Hypergraph::complete_minus(12, 2, &[VertexSet::new(vec![0, 1]).unwrap()]).unwrap();
        let rep = pipeline(&g, 3, &Strategy::Empirical { k: 6, m: 0 }, &PipelineSettings::default());
        assert!(matches!(
            rep.outcome,
            Err((Stage::FamilyDeficiency, Error::Deficiency { .. }))
        ));
        let rep = pipeline(
            &g,
            3,
            &Strategy::Analytic { epsilon: int(1) },
            &PipelineSettings::default(),
        );
        assert!(matches!(rep.outcome, Err((Stage::Parameters, Error::Budget(_)))));
        assert!(rep.params.unwrap().vacuous);
    }
}
