use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::parse::{parse_walk, Target, Walk, WalkParseError};

/// The seven named kernel configurations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelPreset {
    SimpleEdge,
    Asymmetric,
    AsymmetricPlus,
    AsymmetricPlusPlus,
    WingedEdge,
    WingedEdgePlus,
    WingedEdgePlusPlus,
}

impl KernelPreset {
    pub const ALL: [KernelPreset; 7] = [
        KernelPreset::SimpleEdge,
        KernelPreset::Asymmetric,
        KernelPreset::AsymmetricPlus,
        KernelPreset::AsymmetricPlusPlus,
        KernelPreset::WingedEdge,
        KernelPreset::WingedEdgePlus,
        KernelPreset::WingedEdgePlusPlus,
    ];

    pub fn name(self) -> &'static str {
        match self {
            KernelPreset::SimpleEdge => "simple_edge",
            KernelPreset::Asymmetric => "asymmetric",
            KernelPreset::AsymmetricPlus => "asymmetric_plus",
            KernelPreset::AsymmetricPlusPlus => "asymmetric_plus_plus",
            KernelPreset::WingedEdge => "winged_edge",
            KernelPreset::WingedEdgePlus => "winged_edge_plus",
            KernelPreset::WingedEdgePlusPlus => "winged_edge_plus_plus",
        }
    }

    fn walk_lists(self) -> (&'static [&'static str], &'static [&'static str], &'static [&'static str]) {
        const FACES: &[&str] = &["F", "MF"];
        const WINGED_EDGES: &[&str] = &["E", "NE", "PE", "MNE", "MPE"];
        const WINGED_PLUS_COEDGES: &[&str] =
            &["I", "M", "N", "NM", "P", "PM", "MN", "MNM", "MP", "MPM"];
        match self {
            KernelPreset::SimpleEdge => (FACES, &["E"], &["I", "M"]),
            KernelPreset::Asymmetric => (FACES, &["E"], &["I", "N"]),
            KernelPreset::AsymmetricPlus => (FACES, &["E"], &["I", "M", "N"]),
            KernelPreset::AsymmetricPlusPlus => (FACES, &["E", "NE"], &["I", "M", "N"]),
            KernelPreset::WingedEdge => (FACES, WINGED_EDGES, &["I", "M", "N", "P", "MN", "MP"]),
            KernelPreset::WingedEdgePlus => (FACES, WINGED_EDGES, WINGED_PLUS_COEDGES),
            KernelPreset::WingedEdgePlusPlus => (
                FACES,
                &["E", "NE", "PE", "MNE", "MPE", "NMNE", "PMPE", "MPMPE", "MNMNE"],
                &[
                    "I", "M", "N", "NM", "P", "PM", "MN", "MNM", "MP", "MPM", "NMN", "PMP",
                    "MPMP", "MNMN",
                ],
            ),
        }
    }
}

impl fmt::Display for KernelPreset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum KernelError {
    #[error("unknown kernel {0:?}; expected one of simple_edge, asymmetric, asymmetric_plus, asymmetric_plus_plus, winged_edge, winged_edge_plus, winged_edge_plus_plus")]
    UnknownPreset(String),
    #[error("kernel {kernel}: {list} walk list is empty")]
    EmptyList { kernel: String, list: &'static str },
    #[error("kernel {kernel}: walk {walk} in the {list} list lands on a {found:?}")]
    WrongTarget { kernel: String, list: &'static str, walk: String, found: Target },
    #[error("kernel {kernel}: {source}")]
    Parse {
        kernel: String,
        #[source]
        source: WalkParseError,
    },
}

impl FromStr for KernelPreset {
    type Err = KernelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        KernelPreset::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| KernelError::UnknownPreset(s.to_string()))
    }
}

/// Ordered walk lists defining a convolution neighbourhood around each
/// coedge. The order of every list fixes the column layout of the
/// concatenated kernel input.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub name: String,
    pub face_walks: Vec<Walk>,
    pub edge_walks: Vec<Walk>,
    pub coedge_walks: Vec<Walk>,
}

impl KernelSpec {
    /// Builds a kernel from walk strings and checks the list invariants.
    pub fn new(
        name: impl Into<String>,
        face_walks: &[&str],
        edge_walks: &[&str],
        coedge_walks: &[&str],
    ) -> Result<Self, KernelError> {
        let name = name.into();
        let parse_list = |list: &[&str]| -> Result<Vec<Walk>, KernelError> {
            list.iter()
                .map(|s| parse_walk(s).map_err(|source| KernelError::Parse { kernel: name.clone(), source }))
                .collect()
        };
        let spec = KernelSpec {
            face_walks: parse_list(face_walks)?,
            edge_walks: parse_list(edge_walks)?,
            coedge_walks: parse_list(coedge_walks)?,
            name,
        };
        spec.check()?;
        Ok(spec)
    }

    pub fn preset(preset: KernelPreset) -> Self {
        let (f, e, c) = preset.walk_lists();
        KernelSpec::new(preset.name(), f, e, c).expect("preset walk lists are well formed")
    }

    /// Checks that each list is non-empty and lands on the right entity.
    pub fn check(&self) -> Result<(), KernelError> {
        let lists = [
            ("face", &self.face_walks, Target::Face),
            ("edge", &self.edge_walks, Target::Edge),
            ("coedge", &self.coedge_walks, Target::Coedge),
        ];
        for (list, walks, expected) in lists {
            if walks.is_empty() {
                return Err(KernelError::EmptyList { kernel: self.name.clone(), list });
            }
            for w in walks.iter() {
                if w.target() != expected {
                    return Err(KernelError::WrongTarget {
                        kernel: self.name.clone(),
                        list,
                        walk: w.to_string(),
                        found: w.target(),
                    });
                }
            }
        }
        Ok(())
    }

    /// Number of walks in each list: `(faces, edges, coedges)`.
    pub fn counts(&self) -> (usize, usize, usize) {
        (self.face_walks.len(), self.edge_walks.len(), self.coedge_walks.len())
    }

    pub fn total_walks(&self) -> usize {
        self.face_walks.len() + self.edge_walks.len() + self.coedge_walks.len()
    }

    /// Width of the concatenated kernel input for the given per-entity
    /// state widths.
    pub fn input_width(&self, face_width: usize, edge_width: usize, coedge_width: usize) -> usize {
        let (f, e, c) = self.counts();
        f * face_width + e * edge_width + c * coedge_width
    }
}

/// Looks up one of the named kernel configurations.
pub fn kernel_preset(name: &str) -> Result<KernelSpec, KernelError> {
    Ok(KernelSpec::preset(name.parse()?))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn strings(walks: &[Walk]) -> Vec<String> {
        walks.iter().map(|w| w.to_string()).collect()
    }

    #[test]
    fn winged_edge_lists() {
        let k = kernel_preset("winged_edge").unwrap();
        assert_eq!(strings(&k.face_walks), ["F", "MF"]);
        assert_eq!(strings(&k.edge_walks), ["E", "NE", "PE", "MNE", "MPE"]);
        assert_eq!(strings(&k.coedge_walks), ["I", "M", "N", "P", "MN", "MP"]);
    }

    #[test]
    fn simple_edge_lists() {
        let k = kernel_preset("simple_edge").unwrap();
        assert_eq!(strings(&k.face_walks), ["F", "MF"]);
        assert_eq!(strings(&k.edge_walks), ["E"]);
        assert_eq!(strings(&k.coedge_walks), ["I", "M"]);
    }

    #[test]
    fn asymmetric_matches_simple_edge_counts() {
        let a = kernel_preset("asymmetric").unwrap();
        assert_eq!(strings(&a.coedge_walks), ["I", "N"]);
        assert_eq!(a.counts(), kernel_preset("simple_edge").unwrap().counts());
    }

    #[test]
    fn all_presets_pass_checks() {
        let expected_counts = [
            (2, 1, 2),
            (2, 1, 2),
            (2, 1, 3),
            (2, 2, 3),
            (2, 5, 6),
            (2, 5, 10),
            (2, 9, 14),
        ];
        for (p, counts) in KernelPreset::ALL.into_iter().zip(expected_counts) {
            let k = KernelSpec::preset(p);
            k.check().unwrap();
            assert_eq!(k.counts(), counts, "{p}");
            assert_eq!(p.name().parse::<KernelPreset>().unwrap(), p);
        }
    }

    #[test]
    fn winged_edge_input_width_is_70() {
        assert_eq!(kernel_preset("winged_edge").unwrap().input_width(7, 10, 1), 70);
    }

    #[test]
    fn unknown_and_malformed_kernels() {
        assert!(matches!(kernel_preset("hexagonal"), Err(KernelError::UnknownPreset(_))));
        assert!(matches!(
            KernelSpec::new("bad", &["F"], &["MF"], &["I"]),
            Err(KernelError::WrongTarget { list: "edge", .. })
        ));
        assert!(matches!(
            KernelSpec::new("bad", &["F"], &["E"], &[]),
            Err(KernelError::EmptyList { list: "coedge", .. })
        ));
    }

    #[test]
    fn kernel_spec_serializes_as_walk_strings() {
        let k = kernel_preset("asymmetric_plus").unwrap();
        let json = serde_json::to_string(&k).unwrap();
        assert!(json.contains("\"coedge_walks\":[\"I\",\"M\",\"N\"]"));
        let back: KernelSpec = serde_json::from_str(&json).unwrap();
        assert_eq!(back, k);
    }
}
