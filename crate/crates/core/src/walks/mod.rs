//! Topological walks realised as index arrays.
//!
//! Every walk operator has exactly one nonzero per row, so it is stored as
//! the column index of that nonzero: `dest[i]` is the entity reached from
//! coedge `i`. Products of operators become index composition and applying
//! an operator to a feature matrix is a row gather.

mod kernel;
mod parse;

pub use kernel::{kernel_preset, KernelError, KernelPreset, KernelSpec};
pub use parse::{parse_walk, Instruction, Target, Walk, WalkParseError};

use serde::Serialize;

use crate::nn::{ShapeError, Tensor2};
use crate::scalar::Scalar;
use crate::topology::{validate, SolidTopology, TopologyError};

/// A walk compiled against one topology.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct WalkMatrix {
    pub target: Target,
    /// Entity reached from each coedge.
    pub dest: Vec<usize>,
    /// Number of entities of the target kind (columns of the operator).
    pub num_targets: usize,
}

impl WalkMatrix {
    pub fn identity(num_coedges: usize) -> Self {
        WalkMatrix { target: Target::Coedge, dest: (0..num_coedges).collect(), num_targets: num_coedges }
    }

    pub fn num_coedges(&self) -> usize {
        self.dest.len()
    }

    /// Matrix product `self · other`: first follow `self`, then `other`.
    /// Only defined when `self` lands on coedges.
    pub fn then(&self, other: &WalkMatrix) -> Option<WalkMatrix> {
        if self.target != Target::Coedge || self.num_targets != other.num_coedges() {
            return None;
        }
        Some(WalkMatrix {
            target: other.target,
            dest: self.dest.iter().map(|&d| other.dest[d]).collect(),
            num_targets: other.num_targets,
        })
    }

    /// True when this is a coedge-to-coedge bijection.
    pub fn is_permutation(&self) -> bool {
        if self.target != Target::Coedge {
            return false;
        }
        let mut seen = vec![false; self.num_targets];
        self.dest.iter().all(|&d| d < seen.len() && !std::mem::replace(&mut seen[d], true))
    }
}

/// The five elementary operators of a solid.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Operators {
    pub next: WalkMatrix,
    pub prev: WalkMatrix,
    pub mate: WalkMatrix,
    pub face: WalkMatrix,
    pub edge: WalkMatrix,
}

impl Operators {
    pub fn get(&self, instruction: Instruction) -> &WalkMatrix {
        match instruction {
            Instruction::Next => &self.next,
            Instruction::Prev => &self.prev,
            Instruction::Mate => &self.mate,
            Instruction::Face => &self.face,
            Instruction::Edge => &self.edge,
        }
    }

    /// Composes the operators of `walk` by index composition.
    pub fn compile(&self, walk: &Walk) -> WalkMatrix {
        let n = self.next.num_coedges();
        let mut dest: Vec<usize> = (0..n).collect();
        let mut target = Target::Coedge;
        let mut num_targets = n;
        for &instruction in walk.instructions() {
            let op = self.get(instruction);
            for d in dest.iter_mut() {
                *d = op.dest[*d];
            }
            target = op.target;
            num_targets = op.num_targets;
        }
        WalkMatrix { target, dest, num_targets }
    }
}

/// Builds N, P, M, F and E for a valid topology.
pub fn build_operators(topo: &SolidTopology) -> Result<Operators, TopologyError> {
    let report = validate(topo);
    if !report.is_valid() {
        return Err(TopologyError::Invalid(report));
    }
    Ok(build_operators_unchecked(topo))
}

pub(crate) fn build_operators_unchecked(topo: &SolidTopology) -> Operators {
    let n = topo.num_coedges();
    let coedge = |dest: Vec<usize>| WalkMatrix { target: Target::Coedge, dest, num_targets: n };
    Operators {
        next: coedge(topo.next().to_vec()),
        prev: coedge(topo.prev_array()),
        mate: coedge(topo.mate().to_vec()),
        face: WalkMatrix { target: Target::Face, dest: topo.face().to_vec(), num_targets: topo.num_faces() },
        edge: WalkMatrix { target: Target::Edge, dest: topo.edge().to_vec(), num_targets: topo.num_edges() },
    }
}

/// Compiles a single walk against a topology. For many walks on the same
/// solid, build [`Operators`] once and call [`Operators::compile`].
pub fn compile_walk(topo: &SolidTopology, walk: &Walk) -> Result<WalkMatrix, TopologyError> {
    Ok(build_operators(topo)?.compile(walk))
}

/// Row gather: output row `i` is `h[dest[i]]`.
pub fn gather<T: Scalar>(matrix: &WalkMatrix, h: &Tensor2<T>) -> Result<Tensor2<T>, ShapeError> {
    if h.rows() != matrix.num_targets {
        return Err(ShapeError::new("gather", (matrix.num_targets, h.cols()), h.shape()));
    }
    let mut out = Tensor2::zeros(matrix.num_coedges(), h.cols());
    for (i, &d) in matrix.dest.iter().enumerate() {
        out.row_mut(i).copy_from_slice(h.row(d));
    }
    Ok(out)
}

/// Adjoint of [`gather`]: adds row `i` of `g` into row `dest[i]` of the
/// output. Repeated destinations accumulate.
pub fn scatter_add<T: Scalar>(matrix: &WalkMatrix, g: &Tensor2<T>) -> Result<Tensor2<T>, ShapeError> {
    if g.rows() != matrix.num_coedges() {
        return Err(ShapeError::new("scatter_add", (matrix.num_coedges(), g.cols()), g.shape()));
    }
    let mut out = Tensor2::zeros(matrix.num_targets, g.cols());
    for (i, &d) in matrix.dest.iter().enumerate() {
        for (o, &v) in out.row_mut(d).iter_mut().zip(g.row(i)) {
            *o += v;
        }
    }
    Ok(out)
}

/// All walks of a kernel compiled against one topology, in list order.
#[derive(Debug, Clone, Serialize)]
pub struct CompiledKernel {
    pub faces: Vec<WalkMatrix>,
    pub edges: Vec<WalkMatrix>,
    pub coedges: Vec<WalkMatrix>,
    pub num_coedges: usize,
}

impl CompiledKernel {
    pub fn compile(kernel: &KernelSpec, topo: &SolidTopology) -> Result<Self, TopologyError> {
        let ops = build_operators(topo)?;
        Ok(Self::from_operators(kernel, &ops))
    }

    pub fn from_operators(kernel: &KernelSpec, ops: &Operators) -> Self {
        let compile_all = |walks: &[Walk]| walks.iter().map(|w| ops.compile(w)).collect();
        CompiledKernel {
            faces: compile_all(&kernel.face_walks),
            edges: compile_all(&kernel.edge_walks),
            coedges: compile_all(&kernel.coedge_walks),
            num_coedges: ops.next.num_coedges(),
        }
    }
}
