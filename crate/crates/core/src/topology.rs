//! Closed manifold B-rep topology stored as coedge pointer arrays.
//!
//! A solid is described entirely by four arrays indexed by coedge:
//! `next` (loop successor), `mate` (the opposite use of the same edge),
//! `edge` and `face` (parents). The previous-coedge pointer is not stored;
//! it is the inverse of `next`.

use std::fmt;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TopologyError {
    #[error("invalid topology: {0}")]
    Invalid(ValidationReport),
    #[error("coedge_next is not a permutation (coedge {coedge} has {predecessors} predecessors)")]
    NotPermutation { coedge: usize, predecessors: usize },
}

/// Validated coedge structure of one closed manifold solid.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SolidTopology {
    coedge_next: Vec<usize>,
    coedge_mate: Vec<usize>,
    coedge_edge: Vec<usize>,
    coedge_face: Vec<usize>,
    num_faces: usize,
    num_edges: usize,
}

/// One broken invariant found by [`validate`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    LengthMismatch { array: String, len: usize, expected: usize },
    IndexOutOfRange { array: String, coedge: usize, value: usize, bound: usize },
    NextNotBijective { coedge: usize, predecessors: usize },
    MateFixedPoint { coedge: usize },
    MateNotInvolution { coedge: usize, mate: usize, mate_of_mate: usize },
    MateEdgeMismatch { coedge: usize, mate: usize },
    EdgeUseCount { edge: usize, coedges: usize },
    FaceWithoutCoedges { face: usize },
    LoopFaceMismatch { coedge: usize, next: usize },
    CoedgeEdgeRatio { coedges: usize, edges: usize },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::LengthMismatch { array, len, expected } => {
                write!(f, "{array} has length {len}, expected {expected}")
            }
            Violation::IndexOutOfRange { array, coedge, value, bound } => {
                write!(f, "{array}[{coedge}] = {value} is out of range (bound {bound})")
            }
            Violation::NextNotBijective { coedge, predecessors } => {
                write!(f, "coedge {coedge} is the next of {predecessors} coedges")
            }
            Violation::MateFixedPoint { coedge } => write!(f, "coedge {coedge} is its own mate"),
            Violation::MateNotInvolution { coedge, mate, mate_of_mate } => write!(
                f,
                "mate({coedge}) = {mate} but mate({mate}) = {mate_of_mate}"
            ),
            Violation::MateEdgeMismatch { coedge, mate } => {
                write!(f, "coedges {coedge} and {mate} are mates with different parent edges")
            }
            Violation::EdgeUseCount { edge, coedges } => {
                write!(f, "edge {edge} owns {coedges} coedges, expected 2")
            }
            Violation::FaceWithoutCoedges { face } => write!(f, "face {face} owns no coedges"),
            Violation::LoopFaceMismatch { coedge, next } => {
                write!(f, "coedge {coedge} and its next {next} lie on different faces")
            }
            Violation::CoedgeEdgeRatio { coedges, edges } => {
                write!(f, "{coedges} coedges for {edges} edges, expected twice as many")
            }
        }
    }
}

/// Every invariant violation found in a topology. Empty means valid.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.violations.is_empty() {
            return write!(f, "no violations");
        }
        for (i, v) in self.violations.iter().enumerate() {
            if i > 0 {
                write!(f, "; ")?;
            }
            write!(f, "{v}")?;
        }
        Ok(())
    }
}

/// Loops of a solid, each a cycle of `next` starting at its lowest coedge.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LoopDecomposition {
    pub loops: Vec<Vec<usize>>,
    pub loop_face: Vec<usize>,
}

impl LoopDecomposition {
    pub fn loops_of_face(&self, face: usize) -> impl Iterator<Item = &[usize]> {
        self.loops
            .iter()
            .zip(&self.loop_face)
            .filter(move |(_, &f)| f == face)
            .map(|(l, _)| l.as_slice())
    }

    /// Number of loops owned by each face.
    pub fn loops_per_face(&self, num_faces: usize) -> Vec<usize> {
        let mut counts = vec![0; num_faces];
        for &f in &self.loop_face {
            counts[f] += 1;
        }
        counts
    }
}

impl SolidTopology {
    /// Builds and validates a topology.
    pub fn new(
        coedge_next: Vec<usize>,
        coedge_mate: Vec<usize>,
        coedge_edge: Vec<usize>,
        coedge_face: Vec<usize>,
        num_faces: usize,
        num_edges: usize,
    ) -> Result<Self, TopologyError> {
        let topo = Self::new_unchecked(
            coedge_next,
            coedge_mate,
            coedge_edge,
            coedge_face,
            num_faces,
            num_edges,
        );
        let report = validate(&topo);
        if report.is_valid() {
            Ok(topo)
        } else {
            Err(TopologyError::Invalid(report))
        }
    }

    /// Builds a topology without checking any invariant. Use [`validate`]
    /// before handing the result to anything that indexes through it.
    pub fn new_unchecked(
        coedge_next: Vec<usize>,
        coedge_mate: Vec<usize>,
        coedge_edge: Vec<usize>,
        coedge_face: Vec<usize>,
        num_faces: usize,
        num_edges: usize,
    ) -> Self {
        Self { coedge_next, coedge_mate, coedge_edge, coedge_face, num_faces, num_edges }
    }

    /// Disjoint union of several solids. Indices of part `k` are shifted by
    /// the entity counts of parts `0..k`, so the pointer arrays of the result
    /// are the block-diagonal concatenation of the parts.
    pub fn disjoint_union<'a>(parts: impl IntoIterator<Item = &'a SolidTopology>) -> SolidTopology {
        let mut out = SolidTopology::new_unchecked(vec![], vec![], vec![], vec![], 0, 0);
        for part in parts {
            let c0 = out.coedge_next.len();
            let (f0, e0) = (out.num_faces, out.num_edges);
            out.coedge_next.extend(part.coedge_next.iter().map(|&i| i + c0));
            out.coedge_mate.extend(part.coedge_mate.iter().map(|&i| i + c0));
            out.coedge_edge.extend(part.coedge_edge.iter().map(|&i| i + e0));
            out.coedge_face.extend(part.coedge_face.iter().map(|&i| i + f0));
            out.num_faces += part.num_faces;
            out.num_edges += part.num_edges;
        }
        out
    }

    #[inline]
    pub fn num_coedges(&self) -> usize {
        self.coedge_next.len()
    }

    #[inline]
    pub fn num_faces(&self) -> usize {
        self.num_faces
    }

    #[inline]
    pub fn num_edges(&self) -> usize {
        self.num_edges
    }

    #[inline]
    pub fn next(&self) -> &[usize] {
        &self.coedge_next
    }

    #[inline]
    pub fn mate(&self) -> &[usize] {
        &self.coedge_mate
    }

    #[inline]
    pub fn edge(&self) -> &[usize] {
        &self.coedge_edge
    }

    #[inline]
    pub fn face(&self) -> &[usize] {
        &self.coedge_face
    }

    #[inline]
    pub fn next_of(&self, coedge: usize) -> usize {
        self.coedge_next[coedge]
    }

    #[inline]
    pub fn mate_of(&self, coedge: usize) -> usize {
        self.coedge_mate[coedge]
    }

    /// Loop predecessor of `coedge`.
    ///
    /// Linear in the loop length: walks forward around the loop until it
    /// closes. Use [`SolidTopology::prev_array`] when every predecessor is
    /// needed.
    pub fn prev_of(&self, coedge: usize) -> usize {
        let mut current = coedge;
        loop {
            let n = self.coedge_next[current];
            if n == coedge {
                return current;
            }
            current = n;
        }
    }

    /// The inverse permutation of `next`.
    pub fn prev_array(&self) -> Vec<usize> {
        inverse_permutation(&self.coedge_next).expect("validated topology has a bijective next")
    }

    pub fn decompose_loops(&self) -> Result<LoopDecomposition, TopologyError> {
        decompose_loops(self)
    }
}

/// Inverse of a permutation given as an index array.
pub fn inverse_permutation(perm: &[usize]) -> Result<Vec<usize>, TopologyError> {
    let n = perm.len();
    let mut inverse = vec![usize::MAX; n];
    for (i, &p) in perm.iter().enumerate() {
        if p >= n || inverse[p] != usize::MAX {
            let coedge = p.min(n.saturating_sub(1));
            let predecessors = perm.iter().filter(|&&q| q == p).count();
            return Err(TopologyError::NotPermutation { coedge, predecessors });
        }
        inverse[p] = i;
    }
    Ok(inverse)
}

/// Checks every invariant and collects all violations.
///
/// Out-of-range pointers are reported and the checks that would need to
/// follow them are skipped for that coedge.
pub fn validate(topo: &SolidTopology) -> ValidationReport {
    let mut violations = Vec::new();
    let n = topo.coedge_next.len();

    let arrays: [(&str, &[usize], usize); 4] = [
        ("coedge_next", &topo.coedge_next, n),
        ("coedge_mate", &topo.coedge_mate, n),
        ("coedge_edge", &topo.coedge_edge, topo.num_edges),
        ("coedge_face", &topo.coedge_face, topo.num_faces),
    ];
    for (name, values, _) in &arrays[1..] {
        if values.len() != n {
            violations.push(Violation::LengthMismatch {
                array: name.to_string(),
                len: values.len(),
                expected: n,
            });
        }
    }
    if !violations.is_empty() {
        return ValidationReport { violations };
    }

    let mut in_range = vec![true; n];
    for (name, values, bound) in &arrays {
        for (i, &v) in values.iter().enumerate() {
            if v >= *bound {
                in_range[i] = false;
                violations.push(Violation::IndexOutOfRange {
                    array: name.to_string(),
                    coedge: i,
                    value: v,
                    bound: *bound,
                });
            }
        }
    }

    let mut predecessors = vec![0usize; n];
    for &nx in &topo.coedge_next {
        if nx < n {
            predecessors[nx] += 1;
        }
    }
    for (coedge, &count) in predecessors.iter().enumerate() {
        if count != 1 {
            violations.push(Violation::NextNotBijective { coedge, predecessors: count });
        }
    }

    for i in 0..n {
        let m = topo.coedge_mate[i];
        if m >= n {
            continue;
        }
        if m == i {
            violations.push(Violation::MateFixedPoint { coedge: i });
            continue;
        }
        let mm = topo.coedge_mate[m];
        if mm != i {
            violations.push(Violation::MateNotInvolution { coedge: i, mate: m, mate_of_mate: mm });
        }
        if i < m
            && in_range[i]
            && in_range[m]
            && topo.coedge_edge[i] != topo.coedge_edge[m]
        {
            violations.push(Violation::MateEdgeMismatch { coedge: i, mate: m });
        }
    }

    let mut edge_uses = vec![0usize; topo.num_edges];
    for &e in &topo.coedge_edge {
        if e < topo.num_edges {
            edge_uses[e] += 1;
        }
    }
    for (edge, &count) in edge_uses.iter().enumerate() {
        if count != 2 {
            violations.push(Violation::EdgeUseCount { edge, coedges: count });
        }
    }

    let mut face_uses = vec![0usize; topo.num_faces];
    for &f in &topo.coedge_face {
        if f < topo.num_faces {
            face_uses[f] += 1;
        }
    }
    for (face, &count) in face_uses.iter().enumerate() {
        if count == 0 {
            violations.push(Violation::FaceWithoutCoedges { face });
        }
    }

    // Checking face(next(i)) == face(i) for every i implies every coedge
    // reachable by repeated next shares the face.
    for i in 0..n {
        let nx = topo.coedge_next[i];
        if nx < n && in_range[i] && in_range[nx] && topo.coedge_face[i] != topo.coedge_face[nx] {
            violations.push(Violation::LoopFaceMismatch { coedge: i, next: nx });
        }
    }

    if n != 2 * topo.num_edges {
        violations.push(Violation::CoedgeEdgeRatio { coedges: n, edges: topo.num_edges });
    }

    ValidationReport { violations }
}

/// Splits the coedges into the cycles of `next`.
pub fn decompose_loops(topo: &SolidTopology) -> Result<LoopDecomposition, TopologyError> {
    inverse_permutation(&topo.coedge_next)?;
    let n = topo.num_coedges();
    let mut visited = vec![false; n];
    let mut loops = Vec::new();
    let mut loop_face = Vec::new();
    for start in 0..n {
        if visited[start] {
            continue;
        }
        let mut cycle = Vec::new();
        let mut current = start;
        while !visited[current] {
            visited[current] = true;
            cycle.push(current);
            current = topo.coedge_next[current];
        }
        loop_face.push(topo.coedge_face[start]);
        loops.push(cycle);
    }
    Ok(LoopDecomposition { loops, loop_face })
}

#[cfg(test)]
pub(crate) mod fixtures {
    use super::*;

    /// Unit cube built from vertex loops. Faces are listed with outward
    /// counter-clockwise vertex order.
    pub fn cube() -> SolidTopology {
        let faces: [[usize; 4]; 6] = [
            [0, 3, 2, 1], // bottom
            [4, 5, 6, 7], // top
            [0, 1, 5, 4],
            [1, 2, 6, 5],
            [2, 3, 7, 6],
            [3, 0, 4, 7],
        ];
        from_vertex_loops(&faces.iter().map(|f| vec![f.to_vec()]).collect::<Vec<_>>())
    }

    /// Builds a topology from faces given as lists of vertex loops.
    pub fn from_vertex_loops(faces: &[Vec<Vec<usize>>]) -> SolidTopology {
        let mut next = Vec::new();
        let mut face_of = Vec::new();
        let mut directed = Vec::new();
        for (f, loops) in faces.iter().enumerate() {
            for l in loops {
                let base = next.len();
                for k in 0..l.len() {
                    next.push(base + (k + 1) % l.len());
                    face_of.push(f);
                    directed.push((l[k], l[(k + 1) % l.len()]));
                }
            }
        }
        let mut edge_ids = std::collections::BTreeMap::new();
        let mut edge = Vec::new();
        for &(a, b) in &directed {
            let key = (a.min(b), a.max(b));
            let len = edge_ids.len();
            edge.push(*edge_ids.entry(key).or_insert(len));
        }
        let mate = directed
            .iter()
            .map(|&(a, b)| directed.iter().position(|&d| d == (b, a)).unwrap())
            .collect();
        SolidTopology::new(next, mate, edge, face_of, faces.len(), edge_ids.len()).unwrap()
    }
}
