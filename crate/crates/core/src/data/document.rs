use std::fmt;
use std::fs;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::DataError;
use crate::features::{CoedgeAttributes, EdgeAttributes, FaceAttributes};
use crate::topology::{validate, SolidTopology};

/// Face segmentation classes. The integer value is the on-disk label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SegmentLabel {
    ExtrudeSide = 0,
    ExtrudeEnd = 1,
    CutSide = 2,
    CutEnd = 3,
    Fillet = 4,
    Chamfer = 5,
    RevolveSide = 6,
    RevolveEnd = 7,
}

impl SegmentLabel {
    pub const COUNT: usize = 8;

    pub const ALL: [SegmentLabel; 8] = [
        SegmentLabel::ExtrudeSide,
        SegmentLabel::ExtrudeEnd,
        SegmentLabel::CutSide,
        SegmentLabel::CutEnd,
        SegmentLabel::Fillet,
        SegmentLabel::Chamfer,
        SegmentLabel::RevolveSide,
        SegmentLabel::RevolveEnd,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(index: usize) -> Option<Self> {
        Self::ALL.get(index).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            SegmentLabel::ExtrudeSide => "ExtrudeSide",
            SegmentLabel::ExtrudeEnd => "ExtrudeEnd",
            SegmentLabel::CutSide => "CutSide",
            SegmentLabel::CutEnd => "CutEnd",
            SegmentLabel::Fillet => "Fillet",
            SegmentLabel::Chamfer => "Chamfer",
            SegmentLabel::RevolveSide => "RevolveSide",
            SegmentLabel::RevolveEnd => "RevolveEnd",
        }
    }
}

impl fmt::Display for SegmentLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SegmentLabel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        SegmentLabel::ALL
            .into_iter()
            .find(|l| l.name() == s)
            .ok_or_else(|| format!("unknown segment label {s:?}"))
    }
}

/// One coedge entry of a solid document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoedgeRecord {
    pub next: usize,
    pub mate: usize,
    pub edge: usize,
    pub face: usize,
    pub forward: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FaceRecord {
    #[serde(flatten)]
    pub attributes: FaceAttributes,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<usize>,
}

/// On-disk solid document. Field names are part of the file format.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolidDocument {
    pub id: String,
    pub coedges: Vec<CoedgeRecord>,
    pub faces: Vec<FaceRecord>,
    pub edges: Vec<EdgeAttributes>,
}

/// A validated solid with its attributes and optional face labels.
#[derive(Debug, Clone, PartialEq)]
pub struct SolidRecord {
    pub id: String,
    pub topology: SolidTopology,
    pub faces: Vec<FaceAttributes>,
    pub edges: Vec<EdgeAttributes>,
    pub coedges: Vec<CoedgeAttributes>,
    pub labels: Option<Vec<SegmentLabel>>,
}

impl SolidRecord {
    pub fn num_faces(&self) -> usize {
        self.faces.len()
    }

    pub fn label_indices(&self) -> Option<Vec<usize>> {
        self.labels.as_ref().map(|l| l.iter().map(|x| x.index()).collect())
    }

    /// Checks attribute counts, label counts and topology validity.
    pub fn check(&self) -> Result<(), DataError> {
        let topo = &self.topology;
        let counts = [
            ("faces", self.faces.len(), topo.num_faces()),
            ("edges", self.edges.len(), topo.num_edges()),
            ("coedges", self.coedges.len(), topo.num_coedges()),
        ];
        for (what, found, expected) in counts {
            if found != expected {
                return Err(DataError::Schema(format!("{found} {what} attributes for {expected} {what}")));
            }
        }
        if let Some(labels) = &self.labels {
            if labels.len() != self.faces.len() {
                return Err(DataError::Schema(format!(
                    "{} labels for {} faces",
                    labels.len(),
                    self.faces.len()
                )));
            }
        }
        if let Some(f) = self.faces.iter().position(|f| !f.area.is_finite() || f.area < 0.0) {
            return Err(DataError::Schema(format!("face {f} has invalid area")));
        }
        if let Some(e) = self.edges.iter().position(|e| !e.length.is_finite() || e.length < 0.0) {
            return Err(DataError::Schema(format!("edge {e} has invalid length")));
        }
        let report = validate(topo);
        if !report.is_valid() {
            return Err(DataError::Validation(report));
        }
        Ok(())
    }

    pub fn to_document(&self) -> SolidDocument {
        let topo = &self.topology;
        SolidDocument {
            id: self.id.clone(),
            coedges: (0..topo.num_coedges())
                .map(|i| CoedgeRecord {
                    next: topo.next()[i],
                    mate: topo.mate()[i],
                    edge: topo.edge()[i],
                    face: topo.face()[i],
                    forward: self.coedges[i].forward,
                })
                .collect(),
            faces: self
                .faces
                .iter()
                .enumerate()
                .map(|(f, a)| FaceRecord {
                    attributes: *a,
                    label: self.labels.as_ref().map(|l| l[f].index()),
                })
                .collect(),
            edges: self.edges.clone(),
        }
    }
}

impl TryFrom<SolidDocument> for SolidRecord {
    type Error = DataError;

    fn try_from(doc: SolidDocument) -> Result<Self, DataError> {
        let labelled = doc.faces.iter().filter(|f| f.label.is_some()).count();
        let labels = if labelled == 0 {
            None
        } else if labelled == doc.faces.len() {
            let labels = doc
                .faces
                .iter()
                .enumerate()
                .map(|(f, r)| {
                    let l = r.label.expect("counted above");
                    SegmentLabel::from_index(l).ok_or_else(|| {
                        DataError::Schema(format!(
                            "face {f} has label {l}, labels must be below {}",
                            SegmentLabel::COUNT
                        ))
                    })
                })
                .collect::<Result<Vec<_>, _>>()?;
            Some(labels)
        } else {
            return Err(DataError::Schema(format!(
                "{labelled} of {} faces are labelled; label all faces or none",
                doc.faces.len()
            )));
        };
        let topology = SolidTopology::new_unchecked(
            doc.coedges.iter().map(|c| c.next).collect(),
            doc.coedges.iter().map(|c| c.mate).collect(),
            doc.coedges.iter().map(|c| c.edge).collect(),
            doc.coedges.iter().map(|c| c.face).collect(),
            doc.faces.len(),
            doc.edges.len(),
        );
        let record = SolidRecord {
            id: doc.id,
            topology,
            faces: doc.faces.iter().map(|f| f.attributes).collect(),
            edges: doc.edges,
            coedges: doc.coedges.iter().map(|c| CoedgeAttributes { forward: c.forward }).collect(),
            labels,
        };
        record.check()?;
        Ok(record)
    }
}

pub fn parse_document(text: &str) -> Result<SolidRecord, DataError> {
    let doc: SolidDocument = serde_json::from_str(text).map_err(|e| DataError::Schema(e.to_string()))?;
    doc.try_into()
}

/// A document that could not be turned into a record.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SkippedDocument {
    pub source: String,
    pub reason: String,
}

#[derive(Debug, Clone, Default)]
pub struct DatasetReport {
    pub records: Vec<SolidRecord>,
    pub skipped: Vec<SkippedDocument>,
}

/// Reads every solid document under `path`.
///
/// `path` may be a directory of `.json` documents (read in file-name
/// order), a single `.json` document, or a `.jsonl` file with one
/// document per line. Bad documents are skipped and listed in the report.
pub fn read_dataset(path: impl AsRef<Path>) -> Result<DatasetReport, DataError> {
    let path = path.as_ref();
    let meta = fs::metadata(path).map_err(|e| DataError::io(path, e))?;
    let mut report = DatasetReport::default();
    if meta.is_dir() {
        let mut files: Vec<PathBuf> = fs::read_dir(path)
            .map_err(|e| DataError::io(path, e))?
            .filter_map(|entry| entry.ok().map(|e| e.path()))
            .filter(|p| p.is_file() && matches!(p.extension().and_then(|e| e.to_str()), Some("json" | "jsonl")))
            .collect();
        files.sort();
        for file in files {
            read_file(&file, &mut report)?;
        }
    } else {
        read_file(path, &mut report)?;
    }
    Ok(report)
}

fn read_file(path: &Path, report: &mut DatasetReport) -> Result<(), DataError> {
    let source = path.display().to_string();
    if path.extension().and_then(|e| e.to_str()) == Some("jsonl") {
        let file = fs::File::open(path).map_err(|e| DataError::io(path, e))?;
        for (k, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| DataError::io(path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            push(report, format!("{source}:{}", k + 1), parse_document(&line));
        }
    } else {
        let text = fs::read_to_string(path).map_err(|e| DataError::io(path, e))?;
        push(report, source, parse_document(&text));
    }
    Ok(())
}

fn push(report: &mut DatasetReport, source: String, result: Result<SolidRecord, DataError>) {
    match result {
        Ok(r) => report.records.push(r),
        Err(e) => report.skipped.push(SkippedDocument { source, reason: e.to_string() }),
    }
}

/// Writes one pretty-printed document per record as `<id>.json`.
pub fn write_dataset(records: &[SolidRecord], dir: impl AsRef<Path>) -> Result<Vec<PathBuf>, DataError> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| DataError::io(dir, e))?;
    let mut written = Vec::with_capacity(records.len());
    for r in records {
        let path = dir.join(format!("{}.json", r.id));
        let text = serde_json::to_string_pretty(&r.to_document()).expect("documents serialize");
        fs::write(&path, text).map_err(|e| DataError::io(&path, e))?;
        written.push(path);
    }
    Ok(written)
}
