//! Synthetic extruded solids with segmentation labels.
//!
//! Every generated solid is a planar profile (an outer loop plus optional
//! hole loops) swept along +z. The profile is a list of segments, each
//! either a line or a circular arc; each segment becomes one side face and
//! the profile itself becomes the bottom and top faces.
//!
//! Edge curves are oriented with the profile on the bottom and top caps
//! and upward on the vertical edges, so the coedge direction flags carry
//! the same orientation pattern a modelling kernel would produce.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{SegmentLabel, SolidRecord};
use crate::features::{
    CoedgeAttributes, Convexity, CurveType, EdgeAttributes, FaceAttributes, SurfaceType,
};
use crate::topology::SolidTopology;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SynthKind {
    Box,
    NPrism,
    BoxWithHole,
    FilletedBox,
}

impl SynthKind {
    pub const ALL: [SynthKind; 4] = [SynthKind::Box, SynthKind::NPrism, SynthKind::BoxWithHole, SynthKind::FilletedBox];

    pub fn name(self) -> &'static str {
        match self {
            SynthKind::Box => "box",
            SynthKind::NPrism => "n_prism",
            SynthKind::BoxWithHole => "box_with_hole",
            SynthKind::FilletedBox => "filleted_box",
        }
    }
}

impl fmt::Display for SynthKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SynthKind {
    type Err = SynthError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        SynthKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| SynthError::UnknownKind(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SynthError {
    #[error("unknown synthetic kind {0:?}; expected box, n_prism, box_with_hole or filleted_box")]
    UnknownKind(String),
    #[error("a polygon needs at least 3 sides, got {0}")]
    TooFewSides(usize),
    #[error("a box has 4 corners, cannot fillet {0}")]
    TooManyFillets(usize),
}

/// Shape parameters. `sides` is the polygon side count for `n_prism` and
/// the hole side count for `box_with_hole`; `fillets` is the number of
/// rounded vertical edges of `filleted_box`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SynthParams {
    pub sides: usize,
    pub fillets: usize,
}

impl Default for SynthParams {
    fn default() -> Self {
        SynthParams { sides: 6, fillets: 1 }
    }
}

/// A generated solid plus the vertex count of its (unmodelled) vertices.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSolid {
    pub record: SolidRecord,
    pub num_vertices: usize,
}

#[derive(Debug, Clone, Copy)]
enum Curve {
    Line,
    Arc { radius: f64, sweep: f64 },
}

#[derive(Debug, Clone, Copy)]
struct Segment {
    curve: Curve,
    label: SegmentLabel,
}

/// Closed profile loop: `points[j]` starts segment `j`, which ends at
/// `points[(j + 1) % m]`. Outer loops run counter-clockwise, holes
/// clockwise.
#[derive(Debug, Clone)]
struct ProfileLoop {
    points: Vec<[f64; 2]>,
    segments: Vec<Segment>,
}

impl ProfileLoop {
    fn polygon(points: Vec<[f64; 2]>, label: SegmentLabel) -> Self {
        let segments = vec![Segment { curve: Curve::Line, label }; points.len()];
        ProfileLoop { points, segments }
    }

    fn len(&self) -> usize {
        self.points.len()
    }

    fn segment_length(&self, j: usize) -> f64 {
        match self.segments[j].curve {
            Curve::Line => {
                let a = self.points[j];
                let b = self.points[(j + 1) % self.len()];
                ((b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2)).sqrt()
            }
            Curve::Arc { radius, sweep } => radius * sweep,
        }
    }

    /// Convexity of the vertical edge at `points[j]`, between segments
    /// `j - 1` and `j`.
    fn corner(&self, j: usize) -> Convexity {
        let m = self.len();
        let before = (j + m - 1) % m;
        if matches!(self.segments[before].curve, Curve::Arc { .. }) || matches!(self.segments[j].curve, Curve::Arc { .. }) {
            return Convexity::Smooth;
        }
        let p0 = self.points[before];
        let p1 = self.points[j];
        let p2 = self.points[(j + 1) % m];
        let cross = (p1[0] - p0[0]) * (p2[1] - p1[1]) - (p1[1] - p0[1]) * (p2[0] - p1[0]);
        if cross > 0.0 {
            Convexity::Convex
        } else {
            Convexity::Concave
        }
    }
}

struct Builder {
    edges: Vec<EdgeAttributes>,
    faces: Vec<(FaceAttributes, SegmentLabel, Vec<Vec<(usize, bool)>>)>,
}

/// Sweeps `loops` up by `height` and assembles the coedge structure.
fn extrude(id: String, loops: &[ProfileLoop], height: f64, end_area: f64, end_label: SegmentLabel) -> SyntheticSolid {
    let mut b = Builder { edges: Vec::new(), faces: Vec::new() };
    let line = |convexity, length| EdgeAttributes { curve_type: CurveType::Line, convexity, closed: false, length };

    // per loop: bottom, top and vertical edge ids for each segment/vertex
    let mut ids = Vec::with_capacity(loops.len());
    for l in loops {
        let m = l.len();
        let mut bottom = Vec::with_capacity(m);
        let mut top = Vec::with_capacity(m);
        let mut vertical = Vec::with_capacity(m);
        for j in 0..m {
            let curve_type = match l.segments[j].curve {
                Curve::Line => CurveType::Line,
                Curve::Arc { .. } => CurveType::Circle,
            };
            let profile_edge =
                EdgeAttributes { curve_type, convexity: Convexity::Convex, closed: false, length: l.segment_length(j) };
            bottom.push(b.edges.len());
            b.edges.push(profile_edge);
            top.push(b.edges.len());
            b.edges.push(profile_edge);
            vertical.push(b.edges.len());
            b.edges.push(line(l.corner(j), height));
        }
        ids.push((bottom, top, vertical));
    }

    let end = FaceAttributes { surface_type: SurfaceType::Plane, area: end_area };
    let bottom_loops = ids
        .iter()
        .map(|(bottom, _, _)| bottom.iter().rev().map(|&e| (e, false)).collect())
        .collect();
    b.faces.push((end, end_label, bottom_loops));
    let top_loops = ids.iter().map(|(_, top, _)| top.iter().map(|&e| (e, true)).collect()).collect();
    b.faces.push((end, end_label, top_loops));

    for (l, (bottom, top, vertical)) in loops.iter().zip(&ids) {
        let m = l.len();
        for j in 0..m {
            let surface_type = match l.segments[j].curve {
                Curve::Line => SurfaceType::Plane,
                Curve::Arc { .. } => SurfaceType::Cylinder,
            };
            let side = FaceAttributes { surface_type, area: l.segment_length(j) * height };
            let face_loop = vec![(bottom[j], true), (vertical[(j + 1) % m], true), (top[j], false), (vertical[j], false)];
            b.faces.push((side, l.segments[j].label, vec![face_loop]));
        }
    }

    let num_vertices = 2 * loops.iter().map(ProfileLoop::len).sum::<usize>();
    SyntheticSolid { record: b.finish(id), num_vertices }
}

impl Builder {
    fn finish(self, id: String) -> SolidRecord {
        let mut next = Vec::new();
        let mut edge = Vec::new();
        let mut face = Vec::new();
        let mut forward = Vec::new();
        for (f, (_, _, loops)) in self.faces.iter().enumerate() {
            for l in loops {
                let base = next.len();
                for (k, &(e, fwd)) in l.iter().enumerate() {
                    next.push(base + (k + 1) % l.len());
                    edge.push(e);
                    face.push(f);
                    forward.push(fwd);
                }
            }
        }
        let mut uses = vec![Vec::with_capacity(2); self.edges.len()];
        for (c, &e) in edge.iter().enumerate() {
            uses[e].push(c);
        }
        let mut mate = vec![0; next.len()];
        for pair in &uses {
            assert_eq!(pair.len(), 2, "every generated edge is used twice");
            mate[pair[0]] = pair[1];
            mate[pair[1]] = pair[0];
        }
        let topology = SolidTopology::new(next, mate, edge, face, self.faces.len(), self.edges.len())
            .expect("generated topology is valid");
        SolidRecord {
            id,
            topology,
            faces: self.faces.iter().map(|f| f.0).collect(),
            edges: self.edges,
            coedges: forward.into_iter().map(|forward| CoedgeAttributes { forward }).collect(),
            labels: Some(self.faces.iter().map(|f| f.1).collect()),
        }
    }
}

fn regular_polygon(n: usize, center: [f64; 2], radius: f64, phase: f64, clockwise: bool) -> Vec<[f64; 2]> {
    let mut pts: Vec<[f64; 2]> = (0..n)
        .map(|k| {
            let a = phase + 2.0 * PI * k as f64 / n as f64;
            [center[0] + radius * a.cos(), center[1] + radius * a.sin()]
        })
        .collect();
    if clockwise {
        pts.reverse();
    }
    pts
}

fn polygon_area(n: usize, radius: f64) -> f64 {
    0.5 * n as f64 * radius * radius * (2.0 * PI / n as f64).sin()
}

fn rectangle(w: f64, d: f64) -> Vec<[f64; 2]> {
    vec![[0.0, 0.0], [w, 0.0], [w, d], [0.0, d]]
}

/// Generates one solid of `kind`. Dimensions are drawn from `seed`.
pub fn generate_synthetic(kind: SynthKind, params: &SynthParams, seed: u64) -> Result<SyntheticSolid, SynthError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let id = format!("{}_{seed}", kind.name());
    let height = rng.gen_range(0.5..3.0);
    let solid = match kind {
        SynthKind::Box => {
            let (w, d) = (rng.gen_range(1.0..4.0), rng.gen_range(1.0..4.0));
            let outer = ProfileLoop::polygon(rectangle(w, d), SegmentLabel::ExtrudeSide);
            extrude(id, &[outer], height, w * d, SegmentLabel::ExtrudeEnd)
        }
        SynthKind::NPrism => {
            let n = params.sides;
            if n < 3 {
                return Err(SynthError::TooFewSides(n));
            }
            let radius = rng.gen_range(1.0..3.0);
            let phase = rng.gen_range(0.0..2.0 * PI);
            let outer = ProfileLoop::polygon(regular_polygon(n, [0.0, 0.0], radius, phase, false), SegmentLabel::ExtrudeSide);
            extrude(id, &[outer], height, polygon_area(n, radius), SegmentLabel::ExtrudeEnd)
        }
        SynthKind::BoxWithHole => {
            let n = params.sides;
            if n < 3 {
                return Err(SynthError::TooFewSides(n));
            }
            let (w, d) = (rng.gen_range(2.0f64..5.0), rng.gen_range(2.0f64..5.0));
            let radius = rng.gen_range(0.15..0.3) * w.min(d);
            let center = [w / 2.0 + rng.gen_range(-0.1..0.1), d / 2.0 + rng.gen_range(-0.1..0.1)];
            let phase = rng.gen_range(0.0..2.0 * PI);
            let outer = ProfileLoop::polygon(rectangle(w, d), SegmentLabel::ExtrudeSide);
            let hole = ProfileLoop::polygon(regular_polygon(n, center, radius, phase, true), SegmentLabel::CutSide);
            extrude(id, &[outer, hole], height, w * d - polygon_area(n, radius), SegmentLabel::ExtrudeEnd)
        }
        SynthKind::FilletedBox => {
            let k = params.fillets;
            if k > 4 {
                return Err(SynthError::TooManyFillets(k));
            }
            let (w, d) = (rng.gen_range(1.5f64..4.0), rng.gen_range(1.5f64..4.0));
            let r = rng.gen_range(0.1..0.25) * w.min(d);
            let first = rng.gen_range(0..4);
            let rounded: Vec<bool> = (0..4).map(|c| (c + 4 - first) % 4 < k).collect();
            let outer = filleted_rectangle(w, d, r, &rounded);
            let area = w * d - k as f64 * (1.0 - PI / 4.0) * r * r;
            extrude(id, &[outer], height, area, SegmentLabel::ExtrudeEnd)
        }
    };
    Ok(solid)
}

/// Counter-clockwise rectangle whose corners flagged in `rounded` are
/// replaced by quarter-circle arcs of radius `r`.
fn filleted_rectangle(w: f64, d: f64, r: f64, rounded: &[bool]) -> ProfileLoop {
    let corners = rectangle(w, d);
    let mut points = Vec::new();
    let mut segments = Vec::new();
    let side = Segment { curve: Curve::Line, label: SegmentLabel::ExtrudeSide };
    for c in 0..4 {
        let p = corners[c];
        if rounded[c] {
            let prev = corners[(c + 3) % 4];
            let next = corners[(c + 1) % 4];
            let toward = |q: [f64; 2]| {
                let len = ((q[0] - p[0]).powi(2) + (q[1] - p[1]).powi(2)).sqrt();
                [p[0] + r * (q[0] - p[0]) / len, p[1] + r * (q[1] - p[1]) / len]
            };
            points.push(toward(prev));
            segments.push(Segment { curve: Curve::Arc { radius: r, sweep: PI / 2.0 }, label: SegmentLabel::Fillet });
            points.push(toward(next));
            segments.push(side);
        } else {
            points.push(p);
            segments.push(side);
        }
    }
    ProfileLoop { points, segments }
}

/// Randomly renumbers the coedges, edges and faces of a record.
pub fn shuffle_indices<R: Rng>(record: &SolidRecord, rng: &mut R) -> SolidRecord {
    let topo = &record.topology;
    let perm = |n: usize, rng: &mut R| {
        let mut p: Vec<usize> = (0..n).collect();
        p.shuffle(rng);
        p
    };
    // new index of old entity i is map[i]
    let cmap = perm(topo.num_coedges(), rng);
    let emap = perm(topo.num_edges(), rng);
    let fmap = perm(topo.num_faces(), rng);
    let mut next = vec![0; cmap.len()];
    let mut mate = vec![0; cmap.len()];
    let mut edge = vec![0; cmap.len()];
    let mut face = vec![0; cmap.len()];
    let mut coedges = vec![CoedgeAttributes { forward: false }; cmap.len()];
    for old in 0..cmap.len() {
        let new = cmap[old];
        next[new] = cmap[topo.next()[old]];
        mate[new] = cmap[topo.mate()[old]];
        edge[new] = emap[topo.edge()[old]];
        face[new] = fmap[topo.face()[old]];
        coedges[new] = record.coedges[old];
    }
    let mut edges = record.edges.clone();
    for (old, e) in record.edges.iter().enumerate() {
        edges[emap[old]] = *e;
    }
    let mut faces = record.faces.clone();
    for (old, f) in record.faces.iter().enumerate() {
        faces[fmap[old]] = *f;
    }
    let labels = record.labels.as_ref().map(|l| {
        let mut out = l.clone();
        for (old, &lab) in l.iter().enumerate() {
            out[fmap[old]] = lab;
        }
        out
    });
    SolidRecord {
        id: record.id.clone(),
        topology: SolidTopology::new(next, mate, edge, face, topo.num_faces(), topo.num_edges())
            .expect("relabelling preserves validity"),
        faces,
        edges,
        coedges,
        labels,
    }
}

/// A labelled mix of all kinds: `count` solids with kinds and parameters
/// drawn from `seed`.
pub fn synthetic_corpus(count: usize, seed: u64) -> Vec<SolidRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let kind = *SynthKind::ALL.choose(&mut rng).expect("non-empty");
            let params = SynthParams { sides: rng.gen_range(3..=8), fillets: rng.gen_range(1..=4) };
            let solid_seed = rng.gen();
            generate_synthetic(kind, &params, solid_seed).expect("parameters are in range").record
        })
        .collect()
}
