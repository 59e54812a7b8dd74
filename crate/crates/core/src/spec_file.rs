//! Graph spec files.
//!
//! TOML (or the equivalent JSON object):
//!
//! ```toml
//! vertices = ["c", "t1", "t2", "t3"]
//! bonds = [
//!   { from = "c", to = "t1", length = 1.0 },
//!   { from = "c", to = "t2", length = 1.05 },
//!   { from = "c", to = "t3", length = 0.95 },
//! ]
//! # optional; "kirchhoff" is the default
//! conditions = "kirchhoff"
//! ```
//!
//! A general vertex scattering matrix is given inline as a row-major list of
//! `[re, im]` pairs, `(2B)²` of them, using the directed-bond order of
//! [`crate::graph`]:
//!
//! ```toml
//! [conditions]
//! unitary = [[0.0, 0.0], [1.0, 0.0], [1.0, 0.0], [0.0, 0.0]]
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{self, BondScatteringMatrix, BondSpec, GraphDescription, MetricGraph};
use crate::linalg::{CMatrix, C64};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Conditions {
    Named(String),
    Unitary { unitary: Vec<[f64; 2]> },
}

impl Default for Conditions {
    fn default() -> Self {
        Conditions::Named("kirchhoff".into())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphSpec {
    pub vertices: Vec<String>,
    pub bonds: Vec<BondSpec>,
    #[serde(default)]
    pub conditions: Conditions,
}

/// A parsed and validated graph together with its scattering matrix.
#[derive(Debug, Clone)]
pub struct LoadedGraph {
    pub graph: MetricGraph,
    pub s0: BondScatteringMatrix,
    pub kirchhoff: bool,
}

impl GraphSpec {
    pub fn parse(text: &str) -> Result<Self> {
        if text.trim_start().starts_with('{') {
            serde_json::from_str(text).map_err(|e| Error::Spec(e.to_string()))
        } else {
            toml::from_str(text).map_err(|e| Error::Spec(e.to_string()))
        }
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Spec(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn load(&self) -> Result<LoadedGraph> {
        let graph = graph::build_graph(&GraphDescription {
            vertices: self.vertices.clone(),
            bonds: self.bonds.clone(),
        })?;
        match &self.conditions {
            Conditions::Named(name) if name.eq_ignore_ascii_case("kirchhoff") => {
                let s0 = graph::kirchhoff_s0(&graph);
                Ok(LoadedGraph { graph, s0, kirchhoff: true })
            }
            Conditions::Named(other) => Err(Error::Spec(format!("unknown conditions '{other}'"))),
            Conditions::Unitary { unitary } => {
                let n = graph.dim();
                if unitary.len() != n * n {
                    return Err(Error::Spec(format!(
                        "unitary has {} entries, expected {} for {} directed bonds",
                        unitary.len(),
                        n * n,
                        n
                    )));
                }
                let m = CMatrix::from_fn(n, n, |r, c| {
                    let [re, im] = unitary[r * n + c];
                    C64::new(re, im)
                });
                let s0 = BondScatteringMatrix::new(&graph, m)?;
                Ok(LoadedGraph { graph, s0, kirchhoff: false })
            }
        }
    }
}

impl LoadedGraph {
    pub fn from_path(path: &Path) -> Result<Self> {
        GraphSpec::from_path(path)?.load()
    }

    pub fn kirchhoff(graph: MetricGraph) -> Self {
        let s0 = graph::kirchhoff_s0(&graph);
        LoadedGraph { graph, s0, kirchhoff: true }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const STAR: &str = r#"
vertices = ["c", "t1", "t2", "t3"]
bonds = [
  { from = "c", to = "t1", length = 1.0 },
  { from = "c", to = "t2", length = 1.05 },
  { from = "c", to = "t3", length = 0.95 },
]
"#;

    #[test]
    fn toml_star_defaults_to_kirchhoff() {
        let loaded = GraphSpec::parse(STAR).unwrap().load().unwrap();
        assert!(loaded.kirchhoff);
        assert_eq!(loaded.graph.bond_count(), 3);
        assert_eq!(loaded.s0, graph::kirchhoff_s0(&loaded.graph));
    }

    #[test]
    fn json_with_inline_unitary() {
        let text = r#"{"vertices": ["a", "b"],
            "bonds": [{"from": "a", "to": "b", "length": 3.0}],
            "conditions": {"unitary": [[0,0],[0,1],[0,1],[0,0]]}}"#;
        let loaded = GraphSpec::parse(text).unwrap().load().unwrap();
        assert!(!loaded.kirchhoff);
        assert_eq!(loaded.s0.matrix()[(0, 1)], C64::new(0.0, 1.0));
    }

    #[test]
    fn inline_matrix_must_be_unitary() {
        let text = r#"
vertices = ["a", "b"]
bonds = [{ from = "a", to = "b", length = 1.0 }]
[conditions]
unitary = [[0.0, 0.0], [1.0, 0.0], [0.5, 0.0], [0.0, 0.0]]
"#;
        let err = GraphSpec::parse(text).unwrap().load().unwrap_err();
        assert!(matches!(err, Error::NotUnitary { .. }), "{err}");
    }

    #[test]
    fn wrong_entry_count_and_unknown_conditions() {
        let text = r#"
vertices = ["a", "b"]
bonds = [{ from = "a", to = "b", length = 1.0 }]
[conditions]
unitary = [[1.0, 0.0]]
"#;
        assert!(matches!(GraphSpec::parse(text).unwrap().load(), Err(Error::Spec(_))));
        let text = STAR.to_string() + "conditions = \"dirichlet\"\n";
        assert!(matches!(GraphSpec::parse(&text).unwrap().load(), Err(Error::Spec(_))));
    }

    #[test]
    fn malformed_input() {
        assert!(matches!(GraphSpec::parse("vertices = 3"), Err(Error::Spec(_))));
    }
}
