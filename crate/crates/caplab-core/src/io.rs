//! On-disk formats: JSON files for spaces, fields, problems, and results,
//! plus the line-oriented record format all reports share.
//!
//! Emission is deterministic: serde_json writes shortest round-trip floats,
//! record fields keep insertion order, and nothing depends on thread timing.
//! Re-emitting the same data therefore yields byte-identical files, which is
//! what lets reports embed stable sha-256 digests.

use std::path::Path;

use sha2::{Digest, Sha256};

use crate::capacity::{CapacityKind, CapacityProblem, CapacityResult, CapacityValue, Optimizer};
use crate::error::{Error, Result};
use crate::space::{Edge, FiniteMetricMeasureSpace, PointSet};

/// Space file: exactly one of `points` (coordinate rows) or `dist` (full
/// square matrix), per-point `weights`, optional `[i, j, len]` edges.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SpaceFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub points: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dist: Option<Vec<Vec<f64>>>,
    pub weights: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub edges: Option<Vec<(usize, usize, f64)>>,
}

impl SpaceFile {
    pub fn from_space(space: &FiniteMetricMeasureSpace) -> Self {
        let n = space.len();
        let points = space.coords().map(|rows| rows.to_vec());
        // the matrix is redundant when coordinates are present
        let dist = if points.is_some() {
            None
        } else {
            Some((0..n).map(|i| (0..n).map(|j| space.dist(i, j)).collect()).collect())
        };
        let edges =
            space.edges().map(|es| es.iter().map(|e| (e.a, e.b, e.len)).collect::<Vec<_>>());
        SpaceFile { points, dist, weights: space.weights().to_vec(), edges }
    }

    pub fn to_space(&self) -> Result<FiniteMetricMeasureSpace> {
        let edges = self
            .edges
            .as_ref()
            .map(|es| es.iter().map(|&(a, b, len)| Edge { a, b, len }).collect::<Vec<_>>());
        match (&self.points, &self.dist) {
            (Some(points), None) => {
                FiniteMetricMeasureSpace::from_coords(points.clone(), self.weights.clone(), edges)
            }
            (None, Some(rows)) => {
                let n = rows.len();
                let mut flat = Vec::with_capacity(n * n);
                for row in rows {
                    if row.len() != n {
                        return Err(Error::InvalidInput(format!(
                            "dist matrix must be square, got a row of {} in {} rows",
                            row.len(),
                            n
                        )));
                    }
                    flat.extend_from_slice(row);
                }
                FiniteMetricMeasureSpace::from_dist(flat, self.weights.clone(), edges)
            }
            _ => Err(Error::InvalidInput(
                "space file needs exactly one of points and dist".into(),
            )),
        }
    }
}

/// Problem file: the capacity kind, a path to the space file, and the
/// parameter block. `F` and `Omega` are index lists.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ProblemFile {
    pub kind: CapacityKind,
    pub space: String,
    #[serde(rename = "F")]
    pub f: Vec<usize>,
    #[serde(rename = "Omega", default, skip_serializing_if = "Option::is_none")]
    pub omega: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho: Option<f64>,
}

impl ProblemFile {
    pub fn from_problem(problem: &CapacityProblem, space: &str) -> Self {
        ProblemFile {
            kind: problem.kind,
            space: space.to_string(),
            f: problem.f.ids().to_vec(),
            omega: problem.omega.as_ref().map(|o| o.ids().to_vec()),
            beta: problem.beta,
            p: problem.p,
            q: problem.q,
            rho: problem.rho,
        }
    }

    pub fn to_problem(&self) -> CapacityProblem {
        CapacityProblem {
            kind: self.kind,
            f: PointSet::new(self.f.clone()),
            omega: self.omega.clone().map(PointSet::new),
            beta: self.beta,
            p: self.p,
            q: self.q,
            rho: self.rho,
        }
    }
}

/// Result record: scalar outcome plus a path to the optimizer file.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct ResultFile {
    pub value: CapacityValue,
    pub feasibility_residual: f64,
    pub iterations: usize,
    pub method: String,
    pub certified: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub optimizer: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

impl ResultFile {
    /// `optimizer` is the path the caller wrote [`Optimizer`] to, if any.
    pub fn from_result(res: &CapacityResult, optimizer: Option<String>) -> Self {
        ResultFile {
            value: res.value,
            feasibility_residual: res.feasibility_residual,
            iterations: res.iterations,
            method: res.method.clone(),
            certified: res.certified,
            optimizer,
            warnings: res.warnings.clone(),
        }
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    let digest = hasher.finalize();
    let mut out = String::with_capacity(64);
    for b in digest {
        out.push_str(&format!("{b:02x}"));
    }
    out
}

/// Reads a JSON file; parse failures carry the path and serde's
/// line/column location.
pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
}

/// Writes pretty JSON with a trailing newline; returns the sha-256 of the
/// bytes written.
pub fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<String> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| Error::Internal(format!("serialize {}: {e}", path.display())))?;
    text.push('\n');
    std::fs::write(path, &text)?;
    Ok(sha256_hex(text.as_bytes()))
}

pub fn write_space(path: &Path, space: &FiniteMetricMeasureSpace) -> Result<String> {
    write_json(path, &SpaceFile::from_space(space))
}

/// Reads a space file; the digest is over the file bytes as stored, so it
/// identifies the exact input of a run.
pub fn read_space(path: &Path) -> Result<(FiniteMetricMeasureSpace, String)> {
    let text = std::fs::read_to_string(path)?;
    let file: SpaceFile =
        serde_json::from_str(&text).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
    Ok((file.to_space()?, sha256_hex(text.as_bytes())))
}

pub fn write_optimizer(path: &Path, optimizer: &Optimizer) -> Result<String> {
    write_json(path, optimizer)
}

/// Line-oriented report record. The format is
///
/// ```text
/// record <name>
///   <key> = <value>
///   block <name>
///     ...
///   end
/// end
/// ```
///
/// Fields keep insertion order, values are raw strings up to the end of the
/// line, and [`Record::parse`] inverts [`Record::emit`] exactly, so a record
/// can serve as a machine-readable report.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Record {
    pub name: String,
    pub fields: Vec<(String, String)>,
    pub blocks: Vec<Record>,
}

impl Record {
    pub fn new(name: &str) -> Self {
        Record { name: name.to_string(), fields: Vec::new(), blocks: Vec::new() }
    }

    /// Adds a field; newlines in the value are flattened to keep the format
    /// line-oriented.
    pub fn set(&mut self, key: &str, value: impl std::fmt::Display) -> &mut Self {
        let text = value.to_string().replace('\n', " ");
        self.fields.push((key.to_string(), text));
        self
    }

    pub fn push_block(&mut self, block: Record) -> &mut Self {
        self.blocks.push(block);
        self
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.fields.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn blocks_named<'a>(&'a self, name: &'a str) -> impl Iterator<Item = &'a Record> {
        self.blocks.iter().filter(move |b| b.name == name)
    }

    pub fn emit(&self) -> String {
        let mut out = String::new();
        self.emit_into(&mut out, 0, "record");
        out
    }

    fn emit_into(&self, out: &mut String, depth: usize, opener: &str) {
        let pad = "  ".repeat(depth);
        out.push_str(&format!("{pad}{opener} {}\n", self.name));
        for (k, v) in &self.fields {
            out.push_str(&format!("{pad}  {k} = {v}\n"));
        }
        for block in &self.blocks {
            block.emit_into(out, depth + 1, "block");
        }
        out.push_str(&format!("{pad}end\n"));
    }

    pub fn parse(text: &str) -> Result<Record> {
        let mut stack: Vec<Record> = Vec::new();
        let mut done: Option<Record> = None;
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            let at = |msg: &str| Error::Parse(format!("line {}: {msg}", idx + 1));
            if line.is_empty() {
                continue;
            }
            if done.is_some() {
                return Err(at("content after the closing end"));
            }
            if let Some(name) = line.strip_prefix("record ") {
                if !stack.is_empty() {
                    return Err(at("record opener inside a record"));
                }
                stack.push(Record::new(name.trim()));
            } else if let Some(name) = line.strip_prefix("block ") {
                if stack.is_empty() {
                    return Err(at("block opener outside a record"));
                }
                stack.push(Record::new(name.trim()));
            } else if line == "end" {
                let finished = stack.pop().ok_or_else(|| at("unmatched end"))?;
                match stack.last_mut() {
                    Some(parent) => parent.blocks.push(finished),
                    None => done = Some(finished),
                }
            } else if let Some((key, value)) = line.split_once(" = ") {
                let top = stack.last_mut().ok_or_else(|| at("field outside a record"))?;
                top.fields.push((key.to_string(), value.to_string()));
            } else {
                return Err(at(&format!("unrecognized line {line:?}")));
            }
        }
        match (done, stack.is_empty()) {
            (Some(record), true) => Ok(record),
            _ => Err(Error::Parse("record not closed before end of input".into())),
        }
    }
}

/// Joins rows into CSV, quoting fields that contain a comma, quote, or
/// newline.
pub fn csv(header: &[&str], rows: &[Vec<String>]) -> String {
    fn cell(s: &str) -> String {
        if s.contains(',') || s.contains('"') || s.contains('\n') {
            format!("\"{}\"", s.replace('"', "\"\""))
        } else {
            s.to_string()
        }
    }
    let mut out = String::new();
    out.push_str(&header.iter().map(|h| cell(h)).collect::<Vec<_>>().join(","));
    out.push('\n');
    for row in rows {
        out.push_str(&row.iter().map(|c| cell(c)).collect::<Vec<_>>().join(","));
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gen::{gen_grid, two_point_space};

    fn tmp(name: &str) -> std::path::PathBuf {
        let dir = std::env::temp_dir().join(format!("caplab-io-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        dir.join(name)
    }

    #[test]
    fn space_roundtrips_through_coords() {
        let s = gen_grid(3, 2).unwrap();
        let path = tmp("grid.json");
        let d1 = write_space(&path, &s).unwrap();
        let (back, d2) = read_space(&path).unwrap();
        assert_eq!(d1, d2);
        assert_eq!(back.len(), s.len());
        for i in 0..s.len() {
            for j in 0..s.len() {
                assert!((back.dist(i, j) - s.dist(i, j)).abs() < 1e-12);
            }
        }
        assert_eq!(back.edges().map(<[Edge]>::len), s.edges().map(<[Edge]>::len));
    }

    #[test]
    fn space_roundtrips_through_dist_matrix() {
        let s = FiniteMetricMeasureSpace::from_dist(
            vec![0.0, 2.0, 2.0, 0.0],
            vec![1.0, 3.0],
            None,
        )
        .unwrap();
        let path = tmp("two.json");
        write_space(&path, &s).unwrap();
        let (back, _) = read_space(&path).unwrap();
        assert_eq!(back.dist(0, 1), 2.0);
        assert_eq!(back.weights(), &[1.0, 3.0]);
    }

    #[test]
    fn rewriting_the_same_space_keeps_the_digest() {
        let s = two_point_space(1.0);
        let a = write_space(&tmp("digest-a.json"), &s).unwrap();
        let b = write_space(&tmp("digest-b.json"), &s).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn space_file_needs_exactly_one_geometry() {
        let bad = SpaceFile { points: None, dist: None, weights: vec![1.0], edges: None };
        assert!(matches!(bad.to_space(), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn problem_file_roundtrips() {
        let problem = CapacityProblem::hajlasz(
            PointSet::new(vec![0]),
            PointSet::new(vec![0, 1]),
            0.5,
            2.0,
        );
        let file = ProblemFile::from_problem(&problem, "spaces/two.json");
        let text = serde_json::to_string(&file).unwrap();
        assert!(text.contains("\"F\""), "{text}");
        let back: ProblemFile = serde_json::from_str(&text).unwrap();
        assert_eq!(back, file);
        assert_eq!(back.to_problem(), problem);
    }

    #[test]
    fn parse_error_names_the_location() {
        let path = tmp("broken.json");
        std::fs::write(&path, "{\"weights\": [1.0,\n!").unwrap();
        let err = read_space(&path).unwrap_err();
        match err {
            Error::Parse(msg) => assert!(msg.contains("line 2"), "{msg}"),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn record_roundtrips() {
        let mut sample = Record::new("sample");
        sample.set("x", 12).set("ratio", 0.25);
        let mut report = Record::new("density-report");
        report.set("space.digest", "abc123").set("note", "two words");
        report.push_block(sample);
        let text = report.emit();
        let back = Record::parse(&text).unwrap();
        assert_eq!(back, report);
        assert_eq!(back.get("note"), Some("two words"));
        assert_eq!(back.blocks_named("sample").count(), 1);
    }

    #[test]
    fn record_parser_rejects_stray_lines() {
        let err = Record::parse("record a\n  what\nend\n").unwrap_err();
        assert!(matches!(&err, Error::Parse(m) if m.contains("line 2")), "{err:?}");
        assert!(Record::parse("record a\n").is_err());
        assert!(Record::parse("record a\nend\nrecord b\nend\n").is_err());
    }

    #[test]
    fn csv_quotes_only_when_needed() {
        let text = csv(
            &["x", "note"],
            &[vec!["1".into(), "plain".into()], vec!["2".into(), "a,b \"q\"".into()]],
        );
        assert_eq!(text, "x,note\n1,plain\n2,\"a,b \"\"q\"\"\"\n");
    }
}
