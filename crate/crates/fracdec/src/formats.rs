//! JSON and CSV artifacts. Rationals are always `"p/q"` strings.

use std::path::Path;
use std::sync::Arc;

use fracdec_core::hypercore::build_graph;
use fracdec_core::rational::{parse_rational, to_fraction_string};
use fracdec_core::{ExplicitPacking, Family, Hypergraph, Matching, Rational, VertexSet};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

pub const PACKING_FORMAT: &str = "fracdec-packing/1";

/// A host graph, either listed or named by a generator.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum GraphSpec {
    Explicit {
        n: usize,
        r: usize,
        edges: Vec<Vec<usize>>,
    },
    Complete {
        n: usize,
        r: usize,
    },
    CompleteMinus {
        n: usize,
        r: usize,
        removed: Vec<Vec<usize>>,
    },
    CompleteMinusMatchings {
        n: usize,
        r: usize,
        matchings: Vec<Vec<Vec<usize>>>,
    },
    /// `K_n^r` minus the matching `{0..r}, {r..2r}, ...` with `count` edges.
    CompleteMinusBlocks {
        n: usize,
        r: usize,
        count: usize,
    },
    /// The graph `C_n` for `r = 2`.
    Cycle {
        n: usize,
    },
}

impl GraphSpec {
    pub fn build(&self) -> CliResult<Hypergraph> {
        let g = match self {
            GraphSpec::Explicit { n, r, edges } => build_graph(*n, *r, edges)?,
            GraphSpec::Complete { n, r } => Hypergraph::complete(*n, *r)?,
            GraphSpec::CompleteMinus { n, r, removed } => {
                let removed = removed
                    .iter()
                    .map(|e| VertexSet::new(e.clone()))
                    .collect::<Result<Vec<_>, _>>()?;
                Hypergraph::complete_minus(*n, *r, &removed)?
            }
            GraphSpec::CompleteMinusMatchings { n, r, matchings } => {
                let ms = parse_matchings(*n, *r, matchings)?;
                Hypergraph::complete_minus_matchings(*n, *r, &ms)?
            }
            GraphSpec::CompleteMinusBlocks { n, r, count } => {
                let edges = (0..*count).map(|i| (i * r..(i + 1) * r).collect()).collect();
                let m = Matching::new(*n, *r, edges)?;
                Hypergraph::complete_minus_matchings(*n, *r, &[m])?
            }
            GraphSpec::Cycle { n } => {
                if *n < 3 {
                    return Err(CliError::usage(format!("a cycle needs at least 3 vertices, got {n}")));
                }
                let edges: Vec<Vec<usize>> = (0..*n).map(|i| vec![i, (i + 1) % n]).collect();
                build_graph(*n, 2, &edges)?
            }
        };
        Ok(g)
    }

    pub fn explicit(g: &Hypergraph) -> Self {
        GraphSpec::Explicit {
            n: g.n(),
            r: g.r(),
            edges: g.edges().map(VertexSet::into_vec).collect(),
        }
    }
}

pub fn parse_matchings(n: usize, r: usize, ms: &[Vec<Vec<usize>>]) -> CliResult<Vec<Matching>> {
    ms.iter()
        .map(|m| Matching::new(n, r, m.clone()).map_err(CliError::from))
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum FamilySpec {
    Clique { q: usize },
    BigClique { min_size: usize },
    Induced { k: usize },
}

impl From<Family> for FamilySpec {
    fn from(f: Family) -> Self {
        match f {
            Family::Clique { q } => FamilySpec::Clique { q },
            Family::BigClique { min_size } => FamilySpec::BigClique { min_size },
            Family::Induced { k } => FamilySpec::Induced { k },
        }
    }
}

impl From<FamilySpec> for Family {
    fn from(f: FamilySpec) -> Self {
        match f {
            FamilySpec::Clique { q } => Family::Clique { q },
            FamilySpec::BigClique { min_size } => Family::BigClique { min_size },
            FamilySpec::Induced { k } => Family::Induced { k },
        }
    }
}

/// Provenance stamped on every artifact.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Meta {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub config_digest: String,
    pub seed: Option<u64>,
    pub generator: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightedSet {
    pub vertices: Vec<usize>,
    pub weight: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PackingFile {
    pub format: String,
    pub meta: Meta,
    pub host: GraphSpec,
    pub family: FamilySpec,
    pub entries: Vec<WeightedSet>,
}

impl PackingFile {
    /// Entries in the packing's own order (sorted vertex lists).
    pub fn from_packing(p: &ExplicitPacking, meta: Meta) -> Self {
        PackingFile {
            format: PACKING_FORMAT.into(),
            meta,
            host: GraphSpec::explicit(p.host_arc()),
            family: fracdec_core::PackingView::family(p).into(),
            entries: p
                .entries()
                .iter()
                .map(|(s, w)| WeightedSet {
                    vertices: s.as_slice().to_vec(),
                    weight: to_fraction_string(w),
                })
                .collect(),
        }
    }

    pub fn to_packing(&self) -> CliResult<ExplicitPacking> {
        if self.format != PACKING_FORMAT {
            return Err(CliError::usage(format!("unsupported packing format {:?}", self.format)));
        }
        let host = Arc::new(self.host.build()?);
        let entries = self
            .entries
            .iter()
            .map(|e| Ok((VertexSet::new(e.vertices.clone())?, parse_rational(&e.weight)?)))
            .collect::<CliResult<Vec<_>>>()?;
        Ok(ExplicitPacking::new(host, self.family.into(), entries)?)
    }
}

pub fn rational_json(v: &Rational) -> serde_json::Value {
    serde_json::Value::String(to_fraction_string(v))
}

pub fn read_text(path: &Path) -> CliResult<String> {
    std::fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.into(),
        source,
    })
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> CliResult<T> {
    let text = read_text(path)?;
    serde_json::from_str(&text).map_err(|source| CliError::Json {
        context: path.display().to_string(),
        source,
    })
}

/// Pretty JSON with a trailing newline.
pub fn to_json_text<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("artifacts serialize");
    s.push('\n');
    s
}

/// `edge_rank,numerator,denominator`, one row per host edge.
pub fn boundary_csv(per_edge: &[(u64, Rational)]) -> CliResult<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["edge_rank", "numerator", "denominator"])?;
    for (rank, v) in per_edge {
        w.write_record([rank.to_string(), v.numer().to_string(), v.denom().to_string()])?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::usage(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use fracdec_core::rational::ratio;

    #[test]
    fn generators_build_expected_graphs() {
        let c = GraphSpec::Cycle { n: 5 }.build().unwrap();
        assert_eq!(c.edge_count(), 5);
        let b = GraphSpec::CompleteMinusBlocks { n: 6, r: 2, count: 3 }.build().unwrap();
        assert_eq!(b.edge_count(), 12);
        let e = GraphSpec::explicit(&b).build().unwrap();
        assert_eq!(e, b);
    }

    #[test]
    fn graph_spec_rejects_unknown_fields() {
        let bad = r#"{"kind":"complete","n":4,"r":2,"extra":1}"#;
        assert!(serde_json::from_str::<GraphSpec>(bad).is_err());
    }

    #[test]
    fn csv_layout() {
        let text = boundary_csv(&[(0, ratio(1, 2)), (3, ratio(1, 1))]).unwrap();
        assert_eq!(text, "edge_rank,numerator,denominator\n0,1,2\n3,1,1\n");
    }
}
