//! JSON file formats.
//!
//! Readers report the path of the offending field (`atoms[2].mass`) for
//! both syntax and validation errors. Writers emit the shortest decimal that
//! parses back to the same double, so files round-trip bit for bit.

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::equivalence::VerifyReport;
use crate::flux_graph::{Edge, FluxGraph};
use crate::geometry::Point;
use crate::graph_reduce::{TransportPath, TransportPathMeasure};
use crate::measures::{Atom, DiscreteMeasure};
use crate::network::NetworkSet;
use crate::pattern::{Fibre, IrrigationPattern};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasureFile {
    pub dim: usize,
    pub atoms: Vec<Atom>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EdgeRecord {
    pub tail: usize,
    pub head: usize,
    pub w: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphFile {
    pub dim: usize,
    pub vertices: Vec<Point>,
    pub edges: Vec<EdgeRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FibreRecord {
    pub mass: f64,
    pub polyline: Vec<Point>,
    /// Vertex times; uniform when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub times: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PatternFile {
    pub dim: usize,
    pub fibres: Vec<FibreRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkFile {
    pub dim: usize,
    pub segments: Vec<[Point; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathRecord {
    pub vertices: Vec<Point>,
    pub w: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathMeasureFile {
    /// Taken from the first vertex when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dim: Option<usize>,
    pub paths: Vec<PathRecord>,
}

/// Parses JSON, naming the field path on failure.
pub fn parse<T: DeserializeOwned>(text: &str) -> Result<T> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        if path.is_empty() || path == "." {
            Error::Json(inner)
        } else {
            Error::invalid(path, inner.to_string())
        }
    })
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("plain data serialises");
    s.push('\n');
    s
}

/// Prefixes the context of a validation error with the list it came from.
fn within(list: &str, err: Error) -> Error {
    match err {
        Error::InvalidInput { context, reason } => {
            let context = match context.rsplit_once(' ') {
                Some((_, idx)) if idx.parse::<usize>().is_ok() => format!("{list}[{idx}]"),
                _ => context,
            };
            Error::InvalidInput { context, reason }
        }
        other => other,
    }
}

impl From<&DiscreteMeasure> for MeasureFile {
    fn from(m: &DiscreteMeasure) -> Self {
        MeasureFile { dim: m.dim(), atoms: m.atoms().to_vec() }
    }
}

impl MeasureFile {
    pub fn into_measure(self) -> Result<DiscreteMeasure> {
        DiscreteMeasure::new(self.dim, self.atoms).map_err(|e| within("atoms", e))
    }
}

impl From<&FluxGraph> for GraphFile {
    fn from(g: &FluxGraph) -> Self {
        GraphFile {
            dim: g.dim(),
            vertices: g.vertices().to_vec(),
            edges: g.edges().iter().map(|e| EdgeRecord { tail: e.tail, head: e.head, w: e.weight }).collect(),
        }
    }
}

impl GraphFile {
    pub fn into_graph(self) -> Result<FluxGraph> {
        let edges = self.edges.into_iter().map(|e| Edge { tail: e.tail, head: e.head, weight: e.w }).collect();
        FluxGraph::new(self.dim, self.vertices, edges).map_err(|e| match e {
            Error::InvalidInput { context, reason } if context.starts_with("vertex") => {
                within("vertices", Error::InvalidInput { context, reason })
            }
            other => within("edges", other),
        })
    }
}

impl From<&IrrigationPattern> for PatternFile {
    fn from(chi: &IrrigationPattern) -> Self {
        PatternFile {
            dim: chi.dim(),
            fibres: chi
                .fibres()
                .iter()
                .map(|f| FibreRecord { mass: f.mass, polyline: f.polyline.clone(), times: Some(f.times.clone()) })
                .collect(),
        }
    }
}

impl PatternFile {
    pub fn into_pattern(self) -> Result<IrrigationPattern> {
        let fibres = self
            .fibres
            .into_iter()
            .map(|r| match r.times {
                Some(times) => Fibre { polyline: r.polyline, mass: r.mass, times },
                None => Fibre::new(r.polyline, r.mass),
            })
            .collect();
        IrrigationPattern::new(self.dim, fibres).map_err(|e| within("fibres", e))
    }
}

impl From<&NetworkSet> for NetworkFile {
    fn from(s: &NetworkSet) -> Self {
        NetworkFile { dim: s.dim(), segments: s.segments().iter().map(|(p, q)| [p.clone(), q.clone()]).collect() }
    }
}

impl NetworkFile {
    pub fn into_network(self) -> Result<NetworkSet> {
        let segs = self.segments.into_iter().map(|[p, q]| (p, q)).collect();
        NetworkSet::new(self.dim, segs).map_err(|e| within("segments", e))
    }
}

impl From<&TransportPathMeasure> for PathMeasureFile {
    fn from(m: &TransportPathMeasure) -> Self {
        PathMeasureFile {
            dim: Some(m.dim),
            paths: m.paths.iter().map(|p| PathRecord { vertices: p.points.clone(), w: p.weight }).collect(),
        }
    }
}

impl PathMeasureFile {
    /// Vertex ids of the loaded paths are positions in each path's own list.
    pub fn into_paths(self) -> Result<TransportPathMeasure> {
        let first = self.paths.first().and_then(|p| p.vertices.first()).map(|v| v.len());
        let dim = self
            .dim
            .or(first)
            .ok_or_else(|| Error::invalid("dim", "missing, and there is no vertex to take it from"))?;
        let mut paths = Vec::with_capacity(self.paths.len());
        for (i, p) in self.paths.into_iter().enumerate() {
            if !(p.w.is_finite() && p.w > 0.0) {
                return Err(Error::invalid(format!("paths[{i}].w"), format!("weight must be positive, got {}", p.w)));
            }
            if p.vertices.len() < 2 || p.vertices.iter().any(|v| v.len() != dim) {
                return Err(Error::invalid(
                    format!("paths[{i}].vertices"),
                    format!("need at least two points with {dim} coordinates"),
                ));
            }
            let vertex_ids = (0..p.vertices.len()).collect();
            paths.push(TransportPath { vertex_ids, points: p.vertices, weight: p.w });
        }
        Ok(TransportPathMeasure { dim, paths })
    }
}

pub fn read_measure(text: &str) -> Result<DiscreteMeasure> {
    parse::<MeasureFile>(text)?.into_measure()
}

pub fn write_measure(m: &DiscreteMeasure) -> String {
    to_json(&MeasureFile::from(m))
}

pub fn read_graph(text: &str) -> Result<FluxGraph> {
    parse::<GraphFile>(text)?.into_graph()
}

pub fn write_graph(g: &FluxGraph) -> String {
    to_json(&GraphFile::from(g))
}

pub fn read_pattern(text: &str) -> Result<IrrigationPattern> {
    parse::<PatternFile>(text)?.into_pattern()
}

pub fn write_pattern(chi: &IrrigationPattern) -> String {
    to_json(&PatternFile::from(chi))
}

pub fn read_network(text: &str) -> Result<NetworkSet> {
    parse::<NetworkFile>(text)?.into_network()
}

pub fn write_network(s: &NetworkSet) -> String {
    to_json(&NetworkFile::from(s))
}

pub fn read_paths(text: &str) -> Result<TransportPathMeasure> {
    parse::<PathMeasureFile>(text)?.into_paths()
}

pub fn write_paths(m: &TransportPathMeasure) -> String {
    to_json(&PathMeasureFile::from(m))
}

pub fn read_report(text: &str) -> Result<VerifyReport> {
    parse(text)
}

pub fn write_report<T: Serialize>(report: &T) -> String {
    to_json(report)
}
