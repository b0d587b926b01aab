//! Exact LP feasibility for fractional clique decompositions.
//!
//! The system is `A x = 1, x >= 0` with one row per edge and one column per
//! `q`-clique. [`feasible`] runs a Phase-I simplex over exact rationals,
//! with Dantzig pricing and Bland's rule on degenerate steps, and always returns a certificate that
//! [`verify_certificate`] can check independently.

use alloc::boxed::Box;
use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};

use crate::error::{Error, Result};
use crate::hypercore::{Hypergraph, Matching, VertexSet};
use crate::packing::ExplicitPacking;
use crate::rational::Rational;

/// A sparse column: `(row, coefficient)` pairs, rows strictly increasing.
pub type Column = Vec<(usize, u64)>;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LPInstance {
    /// Edge vertex sets for a full instance, orbit labels for a reduced one.
    pub row_keys: Vec<Vec<usize>>,
    /// Clique vertex sets for a full instance, orbit labels for a reduced one.
    pub col_keys: Vec<Vec<usize>>,
    pub columns: Vec<Column>,
}

/// Rows in colex edge order, columns in colex clique order.
pub fn build_feasibility_lp(g: &Hypergraph, q: usize) -> Result<LPInstance> {
    if q <= g.r() {
        return Err(Error::Parameter(format!("need q > r, got q={q} r={}", g.r())));
    }
    let r = g.r();
    let row_keys: Vec<Vec<usize>> = g.edges().map(VertexSet::into_vec).collect();
    let mut col_keys = Vec::new();
    let mut columns = Vec::new();
    for clique in g.enumerate_cliques(q) {
        let mut col = Vec::with_capacity(crate::combin::binomial(q as i64, r as i64) as usize);
        crate::combin::for_each_subset(clique.as_slice(), r, |f| {
            let idx = g.edge_index(crate::combin::rank_colex(f)).expect("clique edge");
            col.push((idx, 1));
        });
        col.sort_unstable();
        columns.push(col);
        col_keys.push(clique.into_vec());
    }
    Ok(LPInstance {
        row_keys,
        col_keys,
        columns,
    })
}

impl LPInstance {
    pub fn rows(&self) -> usize {
        self.row_keys.len()
    }

    pub fn cols(&self) -> usize {
        self.columns.len()
    }

    /// `A x` for a dense `x`.
    pub fn apply(&self, x: &[Rational]) -> Vec<Rational> {
        let mut out = vec![Rational::zero(); self.rows()];
        for (col, xj) in self.columns.iter().zip(x) {
            if xj.is_zero() {
                continue;
            }
            for &(i, a) in col {
                out[i] += xj * Rational::from_integer(a.into());
            }
        }
        out
    }

    /// `y^T A_j` for every column `j`.
    pub fn apply_transpose(&self, y: &[Rational]) -> Vec<Rational> {
        self.columns
            .iter()
            .map(|col| {
                col.iter()
                    .map(|&(i, a)| &y[i] * Rational::from_integer(a.into()))
                    .fold(Rational::zero(), |s, v| s + v)
            })
            .collect()
    }

    /// The feasible point given by a packing on the instance's cliques.
    pub fn solution_from_packing(&self, p: &ExplicitPacking) -> Result<Certificate> {
        let index: BTreeMap<&[usize], usize> = self
            .col_keys
            .iter()
            .enumerate()
            .map(|(j, k)| (k.as_slice(), j))
            .collect();
        let mut x = vec![Rational::zero(); self.cols()];
        for (set, w) in p.entries() {
            let j = *index
                .get(set.as_slice())
                .ok_or_else(|| Error::MalformedCertificate(format!("{:?} is not a column", set.as_slice())))?;
            x[j] += w;
        }
        Ok(Certificate::Feasible { x })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Certificate {
    /// `x >= 0` with `A x = 1`, one entry per column.
    Feasible { x: Vec<Rational> },
    /// `y` with `y^T A <= 0` columnwise and `y^T 1 > 0`, one entry per row.
    Infeasible { y: Vec<Rational> },
}

impl Certificate {
    pub fn is_feasible(&self) -> bool {
        matches!(self, Certificate::Feasible { .. })
    }
}

/// Exact check of a certificate. A length mismatch is an error, a
/// certificate that fails its conditions gives `Ok(false)`.
pub fn verify_certificate(l: &LPInstance, c: &Certificate) -> Result<bool> {
    match c {
        Certificate::Feasible { x } => {
            if x.len() != l.cols() {
                return Err(Error::MalformedCertificate(format!(
                    "solution has {} entries for {} columns",
                    x.len(),
                    l.cols()
                )));
            }
            if x.iter().any(Signed::is_negative) {
                return Ok(false);
            }
            Ok(l.apply(x).iter().all(One::is_one))
        }
        Certificate::Infeasible { y } => {
            if y.len() != l.rows() {
                return Err(Error::MalformedCertificate(format!(
                    "Farkas vector has {} entries for {} rows",
                    y.len(),
                    l.rows()
                )));
            }
            let total: Rational = y.iter().fold(Rational::zero(), |s, v| s + v);
            let columns_ok = l.apply_transpose(y).iter().all(|v| !v.is_positive());
            Ok(total.is_positive() && columns_ok)
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LpBudget {
    pub max_pivots: u64,
    pub max_columns: usize,
}

impl Default for LpBudget {
    fn default() -> Self {
        LpBudget {
            max_pivots: 1_000_000,
            max_columns: 100_000,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Solved {
    pub certificate: Certificate,
    pub pivots: u64,
}

pub fn feasible(l: &LPInstance) -> Result<Certificate> {
    feasible_with(l, &LpBudget::default()).map(|s| s.certificate)
}

/// Phase-I simplex on `min 1^T a` subject to `A x + a = 1`. The returned
/// certificate is verified before it is handed back.
pub fn feasible_with(l: &LPInstance, budget: &LpBudget) -> Result<Solved> {
    if l.cols() > budget.max_columns {
        return Err(Error::Budget(format!(
            "{} columns exceed the limit of {}",
            l.cols(),
            budget.max_columns
        )));
    }
    let mut covered = vec![false; l.rows()];
    for col in &l.columns {
        for &(i, _) in col {
            covered[i] = true;
        }
    }
    let solved = if let Some(i) = covered.iter().position(|c| !c) {
        let mut y = vec![Rational::zero(); l.rows()];
        y[i] = Rational::one();
        Solved {
            certificate: Certificate::Infeasible { y },
            pivots: 0,
        }
    } else {
        simplex(l, budget.max_pivots)?
    };
    if !verify_certificate(l, &solved.certificate)? {
        return Err(Error::Internal(
            "simplex produced a certificate that does not verify".into(),
        ));
    }
    Ok(solved)
}

/// Integer entries of the fraction-free tableau. Fallible operations
/// report overflow with `None`.
trait Entry: Clone + Ord + Sized {
    fn from_u64(v: u64) -> Self;
    fn zero() -> Self;
    fn is_zero(&self) -> bool;
    fn is_positive(&self) -> bool;
    fn is_negative(&self) -> bool;
    fn mul(&self, other: &Self) -> Option<Self>;
    fn sub(&self, other: &Self) -> Option<Self>;
    /// Exact quotient.
    fn div(&self, other: &Self) -> Self;
    fn to_big(&self) -> BigInt;
    fn is_one(&self) -> bool;
    /// Nonnegative gcd; `self` is nonzero.
    fn gcd(&self, other: &Self) -> Self;
}

impl Entry for i128 {
    fn from_u64(v: u64) -> Self {
        v as i128
    }
    fn zero() -> Self {
        0
    }
    fn is_zero(&self) -> bool {
        *self == 0
    }
    fn is_positive(&self) -> bool {
        *self > 0
    }
    fn is_negative(&self) -> bool {
        *self < 0
    }
    fn mul(&self, other: &Self) -> Option<Self> {
        self.checked_mul(*other)
    }
    fn sub(&self, other: &Self) -> Option<Self> {
        self.checked_sub(*other)
    }
    fn div(&self, other: &Self) -> Self {
        self / other
    }
    fn to_big(&self) -> BigInt {
        BigInt::from(*self)
    }
    fn is_one(&self) -> bool {
        *self == 1
    }
    fn gcd(&self, other: &Self) -> Self {
        let (mut a, mut b) = (self.unsigned_abs(), other.unsigned_abs());
        while b != 0 {
            (a, b) = (b, a % b);
        }
        a as i128
    }
}

impl Entry for BigInt {
    fn from_u64(v: u64) -> Self {
        BigInt::from(v)
    }
    fn zero() -> Self {
        Zero::zero()
    }
    fn is_zero(&self) -> bool {
        Zero::is_zero(self)
    }
    fn is_positive(&self) -> bool {
        Signed::is_positive(self)
    }
    fn is_negative(&self) -> bool {
        Signed::is_negative(self)
    }
    fn mul(&self, other: &Self) -> Option<Self> {
        Some(self * other)
    }
    fn sub(&self, other: &Self) -> Option<Self> {
        Some(self - other)
    }
    fn div(&self, other: &Self) -> Self {
        self / other
    }
    fn to_big(&self) -> BigInt {
        self.clone()
    }
    fn is_one(&self) -> bool {
        One::is_one(self)
    }
    fn gcd(&self, other: &Self) -> Self {
        num_integer::Integer::gcd(self, other)
    }
}

/// Dense tableau with one denominator per row: the true row is
/// `v / den`, `den > 0`, and each row is kept reduced by its gcd. Columns
/// `0..n` are structural, `n..n+m` artificial; the objective row is last.
struct Tableau<T> {
    m: usize,
    n: usize,
    rows: Vec<Row<T>>,
    basis: Vec<usize>,
}

#[derive(Clone)]
struct Row<T> {
    v: Vec<T>,
    rhs: T,
    den: T,
}

/// Outcome of a run on a fixed-width entry type.
enum Run {
    Done(Solved),
    Overflow,
}

fn overflow<T>(v: Option<T>) -> core::result::Result<T, ()> {
    v.ok_or(())
}

impl<T: Entry> Row<T> {
    fn real(&self, v: &T) -> Rational {
        Rational::new(v.to_big(), self.den.to_big())
    }

    /// `self - self[c] * pivot / pivot[c]`, reduced.
    fn eliminate(&mut self, pivot: &Row<T>, c: usize, support: &[usize]) -> core::result::Result<(), ()> {
        let f = self.v[c].clone();
        let p = &pivot.v[c];
        let mut k = 0;
        for j in 0..self.v.len() {
            if k < support.len() && support[k] == j {
                k += 1;
                let a = overflow(self.v[j].mul(p))?;
                let b = overflow(f.mul(&pivot.v[j]))?;
                self.v[j] = overflow(a.sub(&b))?;
            } else if !self.v[j].is_zero() {
                self.v[j] = overflow(self.v[j].mul(p))?;
            }
        }
        let a = overflow(self.rhs.mul(p))?;
        let b = overflow(f.mul(&pivot.rhs))?;
        self.rhs = overflow(a.sub(&b))?;
        self.den = overflow(self.den.mul(p))?;
        self.reduce();
        Ok(())
    }

    fn reduce(&mut self) {
        let mut g = self.den.clone();
        for v in self.v.iter().chain(core::iter::once(&self.rhs)) {
            if g.is_one() {
                return;
            }
            if !v.is_zero() {
                g = g.gcd(v);
            }
        }
        if !g.is_one() {
            for v in self.v.iter_mut().filter(|v| !v.is_zero()) {
                *v = v.div(&g);
            }
            self.rhs = self.rhs.div(&g);
            self.den = self.den.div(&g);
        }
    }
}

impl<T: Entry> Tableau<T> {
    fn new(l: &LPInstance) -> Option<Self> {
        let (m, n) = (l.rows(), l.cols());
        let blank = Row {
            v: vec![T::zero(); n + m],
            rhs: T::from_u64(1),
            den: T::from_u64(1),
        };
        let mut rows = vec![blank; m + 1];
        for (j, col) in l.columns.iter().enumerate() {
            for &(i, a) in col {
                rows[m].v[j] = rows[m].v[j].sub(&T::from_u64(a))?;
                rows[i].v[j] = T::from_u64(a);
            }
        }
        for (i, row) in rows.iter_mut().take(m).enumerate() {
            row.v[n + i] = T::from_u64(1);
        }
        rows[m].rhs = T::zero();
        Some(Tableau {
            m,
            n,
            rows,
            basis: (n..n + m).collect(),
        })
    }

    fn run(mut self, max_pivots: u64) -> Result<Run> {
        let mut pivots = 0u64;
        let mut degenerate = false;
        while let Some(enter) = self.entering(degenerate) {
            if pivots == max_pivots {
                return Err(Error::Budget(format!("simplex exceeded {max_pivots} pivots")));
            }
            let leave = match self.ratio_test(enter) {
                Ok(Some(i)) => i,
                Ok(None) => {
                    return Err(Error::Internal(
                        "Phase-I objective is bounded below; ratio test cannot fail".into(),
                    ))
                }
                Err(()) => return Ok(Run::Overflow),
            };
            degenerate = self.rows[leave].rhs.is_zero();
            if self.pivot(leave, enter).is_err() {
                return Ok(Run::Overflow);
            }
            pivots += 1;
        }
        let objective = (0..self.m)
            .filter(|&i| self.basis[i] >= self.n)
            .any(|i| !self.rows[i].rhs.is_zero());
        let certificate = if !objective {
            let mut x = vec![Rational::zero(); self.n];
            for (i, &b) in self.basis.iter().enumerate() {
                if b < self.n {
                    x[b] = self.rows[i].real(&self.rows[i].rhs);
                }
            }
            Certificate::Feasible { x }
        } else {
            let cost = &self.rows[self.m];
            let y = (0..self.m)
                .map(|i| Rational::one() - cost.real(&cost.v[self.n + i]))
                .collect();
            Certificate::Infeasible { y }
        };
        Ok(Run::Done(Solved { certificate, pivots }))
    }

    /// Most negative reduced cost, or Bland's smallest index while the
    /// last pivot was degenerate. Every basis repeat would need a cycle of
    /// degenerate pivots, and those all run under Bland's rule.
    fn entering(&self, bland: bool) -> Option<usize> {
        let cost = &self.rows[self.m].v;
        if bland {
            return cost.iter().position(Entry::is_negative);
        }
        let mut best: Option<usize> = None;
        for (j, c) in cost.iter().enumerate() {
            if c.is_negative() && best.map_or(true, |b| *c < cost[b]) {
                best = Some(j);
            }
        }
        best
    }

    /// Minimum ratio, ties to the smallest basic variable.
    fn ratio_test(&self, enter: usize) -> core::result::Result<Option<usize>, ()> {
        let mut best: Option<usize> = None;
        for i in 0..self.m {
            let a = &self.rows[i].v[enter];
            if !a.is_positive() {
                continue;
            }
            let better = match best {
                None => true,
                Some(b) => {
                    let lhs = overflow(self.rows[i].rhs.mul(&self.rows[b].v[enter]))?;
                    let rhs = overflow(self.rows[b].rhs.mul(a))?;
                    lhs < rhs || (lhs == rhs && self.basis[i] < self.basis[b])
                }
            };
            if better {
                best = Some(i);
            }
        }
        Ok(best)
    }

    fn pivot(&mut self, leave: usize, enter: usize) -> core::result::Result<(), ()> {
        let mut prow = self.rows[leave].clone();
        prow.den = prow.v[enter].clone();
        prow.reduce();
        let support: Vec<usize> = (0..prow.v.len()).filter(|&j| !prow.v[j].is_zero()).collect();
        for i in 0..=self.m {
            if i != leave && !self.rows[i].v[enter].is_zero() {
                self.rows[i].eliminate(&prow, enter, &support)?;
            }
        }
        self.rows[leave] = prow;
        self.basis[leave] = enter;
        Ok(())
    }
}

/// Runs on `i128` and repeats on `BigInt` if an entry overflows.
fn simplex(l: &LPInstance, max_pivots: u64) -> Result<Solved> {
    if let Some(t) = Tableau::<i128>::new(l) {
        if let Run::Done(s) = t.run(max_pivots)? {
            return Ok(s);
        }
    }
    match Tableau::<BigInt>::new(l)
        .expect("BigInt never overflows")
        .run(max_pivots)?
    {
        Run::Done(s) => Ok(s),
        Run::Overflow => Err(Error::Internal("BigInt tableau reported overflow".into())),
    }
}

/// Orbit labels for rows (edges) and columns (cliques).
pub struct OrbitSignature<'a> {
    pub name: String,
    pub row: LabelFn<'a>,
    pub col: LabelFn<'a>,
}

/// Maps a sorted vertex list to its orbit label.
pub type LabelFn<'a> = Box<dyn Fn(&[usize]) -> Vec<usize> + 'a>;

impl<'a> OrbitSignature<'a> {
    pub fn new<R, C>(name: &str, row: R, col: C) -> Self
    where
        R: Fn(&[usize]) -> Vec<usize> + 'a,
        C: Fn(&[usize]) -> Vec<usize> + 'a,
    {
        OrbitSignature {
            name: name.into(),
            row: Box::new(row),
            col: Box::new(col),
        }
    }

    /// Every set is its own orbit.
    pub fn trivial() -> Self {
        OrbitSignature::new("trivial", <[usize]>::to_vec, <[usize]>::to_vec)
    }

    /// `|S ∩ e|` for a distinguished set `e`.
    pub fn edge(e: &VertexSet) -> OrbitSignature<'static> {
        let (e1, e2) = (e.clone(), e.clone());
        OrbitSignature::new(
            "edge",
            move |s| vec![crate::combin::intersection_size(s, &e1)],
            move |s| vec![crate::combin::intersection_size(s, &e2)],
        )
    }

    /// Sorted nonzero intersection sizes with the matching edges, followed
    /// by the number of vertices of `S` the matching misses.
    pub fn matching(m: &Matching) -> OrbitSignature<'static> {
        let owners = m.owners();
        let count = m.len();
        let label = move |s: &[usize]| {
            let mut per = vec![0usize; count];
            let mut free = 0;
            for &v in s {
                match owners[v] {
                    Some(i) => per[i] += 1,
                    None => free += 1,
                }
            }
            let mut out: Vec<usize> = per.into_iter().filter(|&c| c > 0).collect();
            out.sort_unstable();
            out.push(free);
            out
        };
        let label2 = label.clone();
        OrbitSignature::new("matching", label, label2)
    }
}

/// An aggregated instance plus the maps back to the original.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ReducedLP {
    pub instance: LPInstance,
    /// Reduced row of each original row.
    pub row_of: Vec<usize>,
    /// Reduced column of each original column.
    pub col_of: Vec<usize>,
    pub row_orbit_sizes: Vec<usize>,
    pub col_orbit_sizes: Vec<usize>,
}

/// Aggregates rows and columns by label, in sorted label order. Entry
/// `(ρ, c)` counts the columns labelled `c` through any row labelled `ρ`;
/// rows with equal labels but different counts are rejected.
pub fn orbit_reduce(l: &LPInstance, sig: &OrbitSignature<'_>) -> Result<ReducedLP> {
    let (row_labels, row_of, row_orbit_sizes) = group(l.row_keys.iter().map(|k| (sig.row)(k)));
    let (col_labels, col_of, col_orbit_sizes) = group(l.col_keys.iter().map(|k| (sig.col)(k)));
    let mut per_row: Vec<BTreeMap<usize, u64>> = vec![BTreeMap::new(); l.rows()];
    for (j, col) in l.columns.iter().enumerate() {
        for &(i, a) in col {
            *per_row[i].entry(col_of[j]).or_default() += a;
        }
    }
    let mut representative: Vec<Option<&BTreeMap<usize, u64>>> = vec![None; row_labels.len()];
    for (i, counts) in per_row.iter().enumerate() {
        match representative[row_of[i]] {
            None => representative[row_of[i]] = Some(counts),
            Some(rep) if rep != counts => {
                return Err(Error::InconsistentSignature(format!(
                    "{} signature: rows labelled {:?} meet different column counts",
                    sig.name, row_labels[row_of[i]]
                )))
            }
            Some(_) => {}
        }
    }
    let mut columns = vec![Vec::new(); col_labels.len()];
    for (rho, rep) in representative.iter().enumerate() {
        for (&c, &a) in rep.expect("every label has a row").iter() {
            columns[c].push((rho, a));
        }
    }
    Ok(ReducedLP {
        instance: LPInstance {
            row_keys: row_labels,
            col_keys: col_labels,
            columns,
        },
        row_of,
        col_of,
        row_orbit_sizes,
        col_orbit_sizes,
    })
}

fn group<I: Iterator<Item = Vec<usize>>>(labels: I) -> (Vec<Vec<usize>>, Vec<usize>, Vec<usize>) {
    let labels: Vec<Vec<usize>> = labels.collect();
    let mut distinct: Vec<Vec<usize>> = labels.clone();
    distinct.sort();
    distinct.dedup();
    let of: Vec<usize> = labels.iter().map(|k| distinct.binary_search(k).unwrap()).collect();
    let mut sizes = vec![0; distinct.len()];
    for &g in &of {
        sizes[g] += 1;
    }
    (distinct, of, sizes)
}

impl ReducedLP {
    /// Lifts a certificate of the reduced instance to the original one:
    /// `x_j = x'_{c(j)}` and `y_f = y'_{ρ(f)} / |ρ(f)|`.
    pub fn expand(&self, c: &Certificate) -> Result<Certificate> {
        match c {
            Certificate::Feasible { x } if x.len() == self.instance.cols() => Ok(Certificate::Feasible {
                x: self.col_of.iter().map(|&c| x[c].clone()).collect(),
            }),
            Certificate::Infeasible { y } if y.len() == self.instance.rows() => Ok(Certificate::Infeasible {
                y: self
                    .row_of
                    .iter()
                    .map(|&g| &y[g] / Rational::from_integer((self.row_orbit_sizes[g] as u64).into()))
                    .collect(),
            }),
            _ => Err(Error::MalformedCertificate(
                "certificate does not match the reduced instance".into(),
            )),
        }
    }
}
