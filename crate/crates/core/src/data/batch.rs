use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{DataError, SolidRecord};
use crate::features::{encode_coedges, encode_edges, encode_faces, Standardizer};
use crate::model::ModelInput;
use crate::nn::Tensor2;
use crate::scalar::Scalar;
use crate::topology::SolidTopology;

/// Several solids combined into one disjoint solid: feature matrices are
/// stacked row-wise and the pointer arrays are offset, which is the
/// block-diagonal concatenation of every walk operator.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch<T> {
    pub topology: SolidTopology,
    pub faces: Tensor2<T>,
    pub edges: Tensor2<T>,
    pub coedges: Tensor2<T>,
    /// Present when every solid in the batch is labelled.
    pub labels: Option<Vec<usize>>,
    pub solid_ids: Vec<String>,
    /// `face_offsets[k]..face_offsets[k + 1]` are the faces of solid `k`.
    pub face_offsets: Vec<usize>,
    pub edge_offsets: Vec<usize>,
    pub coedge_offsets: Vec<usize>,
}

impl<T: Scalar> Batch<T> {
    /// Encodes and, if a standardizer is given, standardizes the features
    /// of `records`, in order.
    pub fn from_records(records: &[&SolidRecord], standardizer: Option<&Standardizer>) -> Result<Self, DataError> {
        let mut faces = Vec::with_capacity(records.len());
        let mut edges = Vec::with_capacity(records.len());
        let mut coedges = Vec::with_capacity(records.len());
        let mut offsets = (vec![0], vec![0], vec![0]);
        for r in records {
            let xf: Tensor2<T> = encode_faces(&r.faces);
            let xe: Tensor2<T> = encode_edges(&r.edges);
            let xc: Tensor2<T> = encode_coedges(&r.coedges);
            let (xf, xe, xc) = match standardizer {
                Some(s) => s.apply(&xf, &xe, &xc)?,
                None => (xf, xe, xc),
            };
            offsets.0.push(offsets.0.last().unwrap() + xf.rows());
            offsets.1.push(offsets.1.last().unwrap() + xe.rows());
            offsets.2.push(offsets.2.last().unwrap() + xc.rows());
            faces.push(xf);
            edges.push(xe);
            coedges.push(xc);
        }
        let stack = |parts: &[Tensor2<T>], width: usize| -> Tensor2<T> {
            if parts.is_empty() {
                return Tensor2::zeros(0, width);
            }
            Tensor2::vstack(&parts.iter().collect::<Vec<_>>()).expect("fixed widths")
        };
        let labels = records
            .iter()
            .map(|r| r.label_indices())
            .collect::<Option<Vec<_>>>()
            .map(|l| l.concat());
        Ok(Batch {
            topology: SolidTopology::disjoint_union(records.iter().map(|r| &r.topology)),
            faces: stack(&faces, crate::features::FACE_FEATURES),
            edges: stack(&edges, crate::features::EDGE_FEATURES),
            coedges: stack(&coedges, crate::features::COEDGE_FEATURES),
            labels,
            solid_ids: records.iter().map(|r| r.id.clone()).collect(),
            face_offsets: offsets.0,
            edge_offsets: offsets.1,
            coedge_offsets: offsets.2,
        })
    }

    pub fn input(&self) -> ModelInput<'_, T> {
        ModelInput { topology: &self.topology, faces: &self.faces, edges: &self.edges, coedges: &self.coedges }
    }

    pub fn num_solids(&self) -> usize {
        self.solid_ids.len()
    }

    pub fn num_faces(&self) -> usize {
        self.faces.rows()
    }

    pub fn face_range(&self, solid: usize) -> std::ops::Range<usize> {
        self.face_offsets[solid]..self.face_offsets[solid + 1]
    }
}

/// Greedy grouping of record indices into batches of about `face_budget`
/// faces, in an order shuffled by `seed`. A batch is closed as soon as the
/// next solid would push it over budget; a solid larger than the budget
/// gets a batch of its own.
pub fn plan_batches(face_counts: &[usize], face_budget: usize, seed: u64) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..face_counts.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    plan_batches_in_order(face_counts, &order, face_budget)
}

/// [`plan_batches`] without the shuffle.
pub fn plan_batches_in_order(face_counts: &[usize], order: &[usize], face_budget: usize) -> Vec<Vec<usize>> {
    let mut batches = Vec::new();
    let mut current = Vec::new();
    let mut faces = 0;
    for &i in order {
        let f = face_counts[i];
        if !current.is_empty() && faces + f > face_budget {
            batches.push(std::mem::take(&mut current));
            faces = 0;
        }
        current.push(i);
        faces += f;
    }
    if !current.is_empty() {
        batches.push(current);
    }
    batches
}

/// Builds the batches planned by [`plan_batches`].
pub fn make_batches<T: Scalar>(
    records: &[SolidRecord],
    face_budget: usize,
    seed: u64,
    standardizer: Option<&Standardizer>,
) -> Result<Vec<Batch<T>>, DataError> {
    let counts: Vec<usize> = records.iter().map(SolidRecord::num_faces).collect();
    plan_batches(&counts, face_budget, seed)
        .into_iter()
        .map(|group| {
            let members: Vec<&SolidRecord> = group.iter().map(|&i| &records[i]).collect();
            Batch::from_records(&members, standardizer)
        })
        .collect()
}
