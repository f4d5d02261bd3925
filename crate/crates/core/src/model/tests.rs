use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::data::{generate_synthetic, shuffle_indices, synthetic_corpus, Batch, SolidRecord, SynthKind, SynthParams};
use crate::gradcheck::{gradcheck, GradcheckOptions};
use crate::topology::fixtures::cube;
use crate::walks::KernelPreset;

fn config(preset: KernelPreset, s: usize) -> ArchitectureConfig {
    ArchitectureConfig::new(KernelSpec::preset(preset), s, 8)
}

fn batch_of(records: &[&SolidRecord]) -> Batch<f64> {
    Batch::from_records(records, None).unwrap()
}

fn random_matrix(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Tensor2<f64> {
    Tensor2::from_vec(rows, cols, (0..rows * cols).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap()
}

fn hole_solid(seed: u64) -> SolidRecord {
    generate_synthetic(SynthKind::BoxWithHole, &SynthParams { sides: 4, fillets: 0 }, seed).unwrap().record
}

#[test]
fn winged_edge_input_width() {
    let c = config(KernelPreset::WingedEdge, 84);
    assert_eq!(c.unit_widths(0), vec![70, 252, 252]);
    assert_eq!(c.unit_widths(1), vec![1092, 252, 8]);
}

#[test]
fn parameter_counts() {
    // hand-expanded layer sums
    let winged = 70 * 252 + 252 + 252 * 252 + 252 + 1092 * 252 + 252 + 252 * 8;
    assert_eq!(winged, 359_100);
    assert_eq!(parameter_count(&config(KernelPreset::WingedEdge, 84)), winged);
    let simple = 26 * 360 + 360 + 360 * 360 + 360 + 600 * 360 + 360 + 360 * 8;
    assert_eq!(parameter_count(&config(KernelPreset::SimpleEdge, 120)), simple);
    assert_eq!(simple, 358_920);
    assert_eq!(parameter_count(&config(KernelPreset::WingedEdgePlus, 75)), 356_625);
    let model = BRepNetModel::<f64>::new(config(KernelPreset::WingedEdge, 84), 0).unwrap();
    assert_eq!(model.num_params(), 359_100);
    let mut with_bias = config(KernelPreset::WingedEdge, 84);
    with_bias.final_bias = true;
    assert_eq!(parameter_count(&with_bias), 359_108);
}

#[test]
fn invalid_configs() {
    let mut c = config(KernelPreset::SimpleEdge, 0);
    assert!(matches!(BRepNetModel::<f64>::new(c.clone(), 0), Err(ModelError::Config(_))));
    c.hidden_width = 4;
    c.num_classes = 1;
    assert!(c.validate().is_err());
}

#[test]
fn edge_state_is_the_max_of_its_two_coedges() {
    let kernel = KernelSpec::new("probe", &["F"], &["E"], &["I"]).unwrap();
    let mut c = ArchitectureConfig::new(kernel, 1, 2);
    c.mlp_depth = 1;
    let mut model = BRepNetModel::<f64>::zeros(c).unwrap();
    // input columns: 7 face, 10 edge, 1 coedge; output columns: coedge, face, edge
    model.units[0].layers[0].weight = Tensor2::zeros(18, 3);
    let w = &mut model.units[0].layers[0].weight;
    w.as_slice_mut()[17 * 3 + 2] = 1.0;
    let topo = cube();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let xf = random_matrix(6, 7, &mut rng);
    let xe = random_matrix(12, 10, &mut rng);
    let xc = random_matrix(24, 1, &mut rng);
    let input = ModelInput { topology: &topo, faces: &xf, edges: &xe, coedges: &xc };
    let states = model.hidden_states(input).unwrap();
    let he = &states[1].edges;
    for e in 0..12 {
        let uses: Vec<usize> = (0..24).filter(|&i| topo.edge()[i] == e).collect();
        assert_eq!(uses.len(), 2);
        assert_eq!(he[(e, 0)], xc[(uses[0], 0)].max(xc[(uses[1], 0)]));
    }
}

#[test]
fn cube_logits_have_one_row_per_face() {
    let topo = cube();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let (xf, xe, xc) = (random_matrix(6, 7, &mut rng), random_matrix(12, 10, &mut rng), random_matrix(24, 1, &mut rng));
    let model = BRepNetModel::<f64>::new(config(KernelPreset::WingedEdge, 8), 1).unwrap();
    let input = ModelInput { topology: &topo, faces: &xf, edges: &xe, coedges: &xc };
    let logits = model.classify(input).unwrap();
    assert_eq!(logits.shape(), (6, 8));
    let again = BRepNetModel::<f64>::new(config(KernelPreset::WingedEdge, 8), 1).unwrap().classify(input).unwrap();
    assert_eq!(logits, again);
}

#[test]
fn input_widths_are_checked() {
    let topo = cube();
    let model = BRepNetModel::<f64>::new(config(KernelPreset::SimpleEdge, 4), 1).unwrap();
    let (xf, xe, xc) = (Tensor2::zeros(6, 6), Tensor2::zeros(12, 10), Tensor2::zeros(24, 1));
    let err = model.classify(ModelInput { topology: &topo, faces: &xf, edges: &xe, coedges: &xc }).unwrap_err();
    assert!(matches!(err, ModelError::InputWidth { entity: "face", expected: 7, actual: 6 }));
    let xf = Tensor2::zeros(5, 7);
    let err = model.classify(ModelInput { topology: &topo, faces: &xf, edges: &xe, coedges: &xc }).unwrap_err();
    assert!(matches!(err, ModelError::InputRows { entity: "face", .. }));
}

#[test]
fn batched_logits_match_single_solids() {
    let records = synthetic_corpus(5, 8);
    let model = BRepNetModel::<f64>::new(config(KernelPreset::WingedEdge, 6).with_hidden_units(2), 4).unwrap();
    let refs: Vec<&SolidRecord> = records.iter().collect();
    let batch = batch_of(&refs);
    let logits = model.classify(batch.input()).unwrap();
    for (k, r) in records.iter().enumerate() {
        let single = model.classify(batch_of(&[r]).input()).unwrap();
        let rows = logits.row_block(batch.face_range(k));
        assert!(rows.max_abs_diff(&single) <= 1e-10);
    }
}

#[test]
fn relabelling_permutes_logits() {
    let record = hole_solid(2);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let shuffled = shuffle_indices(&record, &mut rng);
    let model = BRepNetModel::<f64>::new(config(KernelPreset::WingedEdgePlus, 6), 9).unwrap();
    let sorted_rows = |r: &SolidRecord| {
        let logits = model.classify(batch_of(&[r]).input()).unwrap();
        let mut rows: Vec<Vec<f64>> = logits.iter_rows().map(<[f64]>::to_vec).collect();
        rows.sort_by(|a, b| a.partial_cmp(b).unwrap());
        rows
    };
    let (a, b) = (sorted_rows(&record), sorted_rows(&shuffled));
    for (x, y) in a.iter().zip(&b) {
        for (p, q) in x.iter().zip(y) {
            assert!((p - q).abs() < 1e-12);
        }
    }
}

/// Largest change in the hidden coedge states of the outer loops of the
/// holed faces after perturbing one inner-loop coedge input.
fn outer_loop_response(pooling: bool) -> f64 {
    let record = hole_solid(6);
    let topo = &record.topology;
    let loops = topo.decompose_loops().unwrap();
    let holed: Vec<usize> = loops.loops_per_face(topo.num_faces()).iter().enumerate().filter(|(_, &n)| n == 2).map(|(f, _)| f).collect();
    let face = holed[0];
    let face_loops: Vec<&[usize]> = loops.loops_of_face(face).collect();
    // the outer loop of a rectangle with a square hole is the one whose edges are longest
    let perimeter = |l: &[usize]| l.iter().map(|&c| record.edges[topo.edge()[c]].length).sum::<f64>();
    let (outer, inner) = if perimeter(face_loops[0]) > perimeter(face_loops[1]) {
        (face_loops[0], face_loops[1])
    } else {
        (face_loops[1], face_loops[0])
    };
    let outer_coedges: Vec<usize> = holed.iter().flat_map(|&f| {
        let mut ls: Vec<&[usize]> = loops.loops_of_face(f).collect();
        ls.sort_by(|a, b| perimeter(b).partial_cmp(&perimeter(a)).unwrap());
        ls[0].to_vec()
    }).collect();
    assert!(outer_coedges.iter().all(|c| !inner.contains(c)) && outer.iter().all(|c| outer_coedges.contains(c)));

    let mut c = config(KernelPreset::WingedEdge, 8).with_hidden_units(2);
    c.pooling = pooling;
    let model = BRepNetModel::<f64>::new(c, 12).unwrap();
    let batch = batch_of(&[&record]);
    let base = model.hidden_states(batch.input()).unwrap();
    let mut xc = batch.coedges.clone();
    xc.as_slice_mut()[inner[0]] += 0.5;
    let input = ModelInput { coedges: &xc, ..batch.input() };
    let perturbed = model.hidden_states(input).unwrap();
    assert_eq!(base.len(), 3);
    outer_coedges
        .iter()
        .flat_map(|&i| base[2].coedges.row(i).iter().zip(perturbed[2].coedges.row(i)).map(|(a, b)| (a - b).abs()))
        .fold(0.0, f64::max)
}

#[test]
fn loops_only_communicate_through_pooling() {
    assert!(outer_loop_response(true) > 1e-9);
    assert_eq!(outer_loop_response(false), 0.0);
}

#[test]
fn save_and_load_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.bin");
    let records = synthetic_corpus(3, 0);
    let std = crate::train::fit_standardizer(&records, true).unwrap();
    let model = BRepNetModel::<f64>::new(config(KernelPreset::AsymmetricPlus, 5), 77).unwrap().with_standardizer(std);
    save_model(&model, &path).unwrap();
    let loaded: BRepNetModel<f64> = load_model(&path).unwrap();
    assert_eq!(loaded, model);
    let batch = batch_of(&[&records[0]]);
    let (a, b) = (model.classify(batch.input()).unwrap(), loaded.classify(batch.input()).unwrap());
    assert!(a.as_slice().iter().zip(b.as_slice()).all(|(x, y)| x.to_bits() == y.to_bits()));

    let f32_model: BRepNetModel<f32> = model.cast();
    let back: BRepNetModel<f32> = read_model(&write_model(&f32_model)).unwrap();
    assert_eq!(back, f32_model);
}

#[test]
fn damaged_model_files_are_rejected() {
    let model = BRepNetModel::<f64>::new(config(KernelPreset::SimpleEdge, 3), 1).unwrap();
    let bytes = write_model(&model);
    assert!(matches!(read_model::<f64>(&bytes[..bytes.len() - 10]), Err(ModelIoError::Corrupt(_))));
    assert!(matches!(read_model::<f64>(&bytes[..5]), Err(ModelIoError::Corrupt(_))));
    let mut future = bytes.clone();
    future[8..12].copy_from_slice(&(FORMAT_VERSION + 1).to_le_bytes());
    assert!(matches!(read_model::<f64>(&future), Err(ModelIoError::VersionMismatch { found }) if found == FORMAT_VERSION + 1));
    let mut flipped = bytes.clone();
    let k = flipped.len() - 40;
    flipped[k] ^= 0x01;
    assert!(matches!(read_model::<f64>(&flipped), Err(ModelIoError::ChecksumMismatch)));
}

#[test]
fn gradients_match_finite_differences() {
    let records = [hole_solid(1), generate_synthetic(SynthKind::FilletedBox, &SynthParams::default(), 2).unwrap().record];
    let refs: Vec<&SolidRecord> = records.iter().collect();
    let std = crate::train::fit_standardizer(&records, true).unwrap();
    let batch: Batch<f64> = Batch::from_records(&refs, Some(&std)).unwrap();
    let model = BRepNetModel::<f64>::new(config(KernelPreset::WingedEdge, 3).with_hidden_units(2), 3).unwrap();
    let labels = batch.labels.clone().unwrap();
    let report = gradcheck(&model, batch.input(), &labels, GradcheckOptions::default()).unwrap();
    assert!(report.passed, "{report:?}");
    assert_eq!(report.blocks.len(), model.param_block_names().len());
    let corrupt = GradcheckOptions { corrupt_backward: true, ..GradcheckOptions::default() };
    assert!(!gradcheck(&model, batch.input(), &labels, corrupt).unwrap().passed);
}

#[test]
fn gradients_are_linear_in_the_output_gradient() {
    let record = hole_solid(3);
    let batch = batch_of(&[&record]);
    let model = BRepNetModel::<f64>::new(config(KernelPreset::WingedEdge, 4), 8).unwrap();
    let (logits, cache) = model.forward(batch.input()).unwrap();
    let (_, d) = cross_entropy(&logits, batch.labels.as_ref().unwrap()).unwrap();
    let g1 = model.backward(&cache, &d).unwrap();
    let g2 = model.backward(&cache, &d.scale(2.0)).unwrap();
    for (a, b) in g1.blocks().iter().zip(g2.blocks()) {
        for (x, y) in a.iter().zip(b) {
            assert_eq!(2.0 * x, *y);
        }
    }
}

#[test]
fn unreachable_parameters_get_zero_gradient() {
    // without pooling the face and edge output columns of the hidden unit never reach the loss
    let s = 4;
    let mut c = config(KernelPreset::WingedEdge, s);
    c.pooling = false;
    let model = BRepNetModel::<f64>::new(c, 2).unwrap();
    let record = hole_solid(4);
    let batch = batch_of(&[&record]);
    let (_, grads) = model.loss_and_grads(batch.input(), batch.labels.as_ref().unwrap()).unwrap();
    let last = &grads.units[0].layers[1];
    let w = &last.weight;
    let mut reachable = 0.0f64;
    for i in 0..w.rows() {
        for j in 0..3 * s {
            if j >= s {
                assert_eq!(w[(i, j)], 0.0);
            } else {
                reachable = reachable.max(w[(i, j)].abs());
            }
        }
    }
    assert!(reachable > 0.0);
    let bias = last.bias.as_ref().unwrap();
    assert!(bias[s..].iter().all(|&b| b == 0.0));
}

#[test]
fn gradient_block_count_is_checked() {
    let model = BRepNetModel::<f64>::new(config(KernelPreset::SimpleEdge, 3), 1).unwrap();
    let batch = batch_of(&[&hole_solid(0)]);
    let (logits, cache) = model.forward(batch.input()).unwrap();
    let wrong = Tensor2::zeros(logits.rows(), 3);
    assert!(model.backward(&cache, &wrong).is_err());
}
