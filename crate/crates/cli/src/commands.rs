use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use brepnet::data::{
    generate_synthetic, make_batches, read_dataset, split, synthetic_corpus, write_dataset, Batch, SegmentLabel,
    SplitFile, SplitRatios, SynthKind, SynthParams,
};
use brepnet::gradcheck::{gradcheck as check_gradients, GradcheckOptions};
use brepnet::metrics::{argmax, EvaluationReport};
use brepnet::model::{load_model, save_model, ArchitectureConfig, BRepNetModel};
use brepnet::nn::softmax_rows;
use brepnet::train::{evaluate, fit_standardizer, train as fit, TrainConfig};
use brepnet::walks::{compile_walk, CompiledKernel, Target, WalkMatrix};
use brepnet::{parse_walk, KernelPreset, KernelSpec, Scalar, SolidRecord};
use serde::Serialize;

use crate::config::{Precision, RunConfig, RunOptions};
use crate::error::CliError;
use crate::plot::{bar_chart, line_chart, Series};
use crate::{CompileWalksArgs, EvalArgs, GradcheckArgs, InspectArgs, PredictArgs, Subset, SynthArgs};

fn class_names() -> Vec<&'static str> {
    SegmentLabel::ALL.iter().map(|l| l.name()).collect()
}

fn create_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

fn write_json<S: Serialize>(path: &Path, value: &S) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).expect("outputs serialize");
    write_text(path, &(text + "\n"))
}

// A closed pipe on stdout is not an error worth reporting.
macro_rules! say {
    ($($arg:tt)*) => {{
        use std::io::Write as _;
        let _ = writeln!(std::io::stdout().lock(), $($arg)*);
    }};
}

fn print_json<S: Serialize>(value: &S) {
    say!("{}", serde_json::to_string(value).expect("outputs serialize"));
}

fn install_threads(threads: Option<usize>) -> Result<(), CliError> {
    if let Some(n) = threads {
        if n == 0 {
            return Err(CliError::Config("threads must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
    }
    Ok(())
}

/// Reads a dataset, reporting skipped documents on stderr.
fn load_records(path: &Path) -> Result<Vec<SolidRecord>, CliError> {
    let report = read_dataset(path)?;
    for skipped in &report.skipped {
        eprintln!("{}", serde_json::json!({ "warning": { "kind": "skipped_document", "source": skipped.source, "reason": skipped.reason } }));
    }
    if report.records.is_empty() {
        return Err(CliError::Config(format!("no valid solids in {}", path.display())));
    }
    Ok(report.records)
}

fn pick(records: &[SolidRecord], indices: &[usize]) -> Vec<SolidRecord> {
    indices.iter().map(|&i| records[i].clone()).collect()
}

#[derive(Serialize)]
struct TrainSummary<'a> {
    model: String,
    epochs: usize,
    best_epoch: Option<usize>,
    best_val_loss: Option<f64>,
    final_train_loss: Option<f64>,
    num_params: usize,
    train_solids: usize,
    validation_solids: usize,
    test_solids: usize,
    precision: &'a str,
}

pub fn train(flags: RunOptions, config_file: Option<PathBuf>) -> Result<(), CliError> {
    let file = match config_file {
        Some(path) => RunOptions::from_file(&path)?,
        None => RunOptions::default(),
    };
    let config = RunConfig::resolve(flags.over(file))?;
    install_threads(config.threads)?;
    match config.precision {
        Precision::F64 => run_train::<f64>(&config),
        Precision::F32 => run_train::<f32>(&config),
    }
}

fn run_train<T: Scalar>(config: &RunConfig) -> Result<(), CliError> {
    let records = load_records(&config.data)?;
    create_dir(&config.out)?;
    let split_file = config.split_file.as_deref().map(SplitFile::read).transpose()?;
    let parts = split(&records, config.ratios, config.seed, split_file.as_ref())?;
    let ids = |idx: &[usize]| idx.iter().map(|&i| records[i].id.clone()).collect::<Vec<_>>();
    let written_split = SplitFile { train: ids(&parts.train), validation: ids(&parts.validation), test: ids(&parts.test) };
    write_json(&config.out.join("split.json"), &written_split)?;
    write_json(&config.out.join("run_config.json"), config)?;
    let (train_set, val_set) = (pick(&records, &parts.train), pick(&records, &parts.validation));
    if train_set.is_empty() {
        return Err(CliError::Config("the training split is empty".into()));
    }

    let arch = ArchitectureConfig::new(KernelSpec::preset(config.kernel), config.hidden_width, SegmentLabel::COUNT)
        .with_hidden_units(config.hidden_units);
    let model = BRepNetModel::<T>::new(arch, config.seed)?
        .with_standardizer(fit_standardizer(&train_set, config.scale_flags)?);
    let model_path = config.out.join("model.bin");
    save_model(&model, &model_path)?;

    let train_config = TrainConfig {
        epochs: config.epochs,
        face_budget: config.face_budget,
        adam: config.adam,
        seed: config.seed,
        scale_flags: config.scale_flags,
    };
    let mut save_error = None;
    let outcome = fit(model, &train_set, &val_set, &train_config, |log, current| {
        eprintln!(
            "epoch {}/{} train_loss={:.6} val_loss={} val_accuracy={}{}",
            log.epoch,
            config.epochs,
            log.train_loss,
            log.val_loss.map_or("-".into(), |v| format!("{v:.6}")),
            log.val_accuracy.map_or("-".into(), |v| format!("{v:.4}")),
            if log.improved { " *" } else { "" }
        );
        if log.improved && save_error.is_none() {
            save_error = save_model(current, &model_path).err();
        }
    })?;
    if let Some(e) = save_error {
        return Err(e.into());
    }

    let log_path = config.out.join("training_log.csv");
    let mut writer = csv::Writer::from_path(&log_path).map_err(|e| CliError::Config(format!("{}: {e}", log_path.display())))?;
    if outcome.log.is_empty() {
        writer
            .write_record(["epoch", "train_loss", "val_loss", "val_accuracy", "improved"])
            .map_err(|e| CliError::Config(e.to_string()))?;
    }
    for entry in &outcome.log {
        writer.serialize(entry).map_err(|e| CliError::Config(e.to_string()))?;
    }
    writer.flush().map_err(|e| CliError::io(&log_path, e))?;
    write_json(&config.out.join("training_log.json"), &outcome.log)?;
    let series = |name, f: fn(&brepnet::train::EpochLog) -> Option<f64>| Series {
        name,
        points: outcome.log.iter().filter_map(|l| f(l).map(|v| (l.epoch as f64, v))).collect(),
    };
    let svg = line_chart(
        "Training curves",
        "epoch",
        "cross-entropy / accuracy",
        &[
            series("train loss", |l| Some(l.train_loss)),
            series("validation loss", |l| l.val_loss),
            series("validation accuracy", |l| l.val_accuracy),
        ],
    );
    write_text(&config.out.join("loss.svg"), &svg)?;

    let best = outcome.best_epoch.map(|e| &outcome.log[e - 1]);
    print_json(&TrainSummary {
        model: model_path.display().to_string(),
        epochs: outcome.log.len(),
        best_epoch: outcome.best_epoch,
        best_val_loss: best.and_then(|l| l.val_loss),
        final_train_loss: outcome.log.last().map(|l| l.train_loss),
        num_params: outcome.best.num_params(),
        train_solids: train_set.len(),
        validation_solids: val_set.len(),
        test_solids: parts.test.len(),
        precision: T::DTYPE,
    });
    Ok(())
}

fn select_subset(records: Vec<SolidRecord>, subset: Subset, split_file: Option<&Path>, seed: u64) -> Result<Vec<SolidRecord>, CliError> {
    if subset == Subset::All {
        return Ok(records);
    }
    let file = split_file.map(SplitFile::read).transpose()?;
    let parts = match &file {
        Some(f) => {
            // the dataset may hold only part of the listed solids
            let known: std::collections::HashSet<&str> = records.iter().map(|r| r.id.as_str()).collect();
            let keep = |ids: &[String]| ids.iter().filter(|id| known.contains(id.as_str())).cloned().collect::<Vec<_>>();
            let wanted = match subset {
                Subset::Train => keep(&f.train),
                Subset::Validation => keep(&f.validation),
                Subset::Test => keep(&f.test),
                Subset::All => unreachable!(),
            };
            let index: BTreeMap<&str, usize> = records.iter().enumerate().map(|(i, r)| (r.id.as_str(), i)).collect();
            return Ok(wanted.iter().map(|id| records[index[id.as_str()]].clone()).collect());
        }
        None => split(&records, SplitRatios::default(), seed, None)?,
    };
    let indices = match subset {
        Subset::Train => parts.train,
        Subset::Validation => parts.validation,
        Subset::Test => parts.test,
        Subset::All => unreachable!(),
    };
    Ok(pick(&records, &indices))
}

#[derive(Serialize)]
struct EvalOutput {
    model: String,
    data: String,
    subset: String,
    solids: usize,
    loss: f64,
    #[serde(flatten)]
    report: EvaluationReport,
}

pub fn eval(args: EvalArgs) -> Result<(), CliError> {
    install_threads(args.threads)?;
    match args.precision {
        Precision::F64 => run_eval::<f64>(&args),
        Precision::F32 => run_eval::<f32>(&args),
    }
}

fn run_eval<T: Scalar>(args: &EvalArgs) -> Result<(), CliError> {
    let model: BRepNetModel<T> = load_model(&args.model)?;
    let records = select_subset(load_records(&args.data)?, args.subset, args.split_file.as_deref(), args.seed)?;
    if records.is_empty() {
        return Err(CliError::Config("the selected subset is empty".into()));
    }
    if args.face_budget == 0 {
        return Err(CliError::Config("face-budget must be positive".into()));
    }
    create_dir(&args.out)?;
    let batches: Vec<Batch<T>> = make_batches(&records, args.face_budget, 0, model.standardizer.as_ref())?;
    let evaluation = evaluate(&model, &batches)?;
    let report = EvaluationReport::from_tally(&evaluation.tally, &class_names())?;
    let bars: Vec<(&str, Option<f64>)> = report.classes.iter().map(|c| (c.class.as_str(), c.iou)).collect();
    write_text(&args.out.join("iou.svg"), &bar_chart("Per-class IoU", &bars))?;
    let output = EvalOutput {
        model: args.model.display().to_string(),
        data: args.data.display().to_string(),
        subset: format!("{:?}", args.subset).to_lowercase(),
        solids: records.len(),
        loss: evaluation.loss,
        report,
    };
    write_json(&args.out.join("eval_report.json"), &output)?;
    print_json(&serde_json::json!({
        "report": args.out.join("eval_report.json").display().to_string(),
        "accuracy": output.report.accuracy,
        "mean_iou": output.report.mean_iou,
        "faces": output.report.num_faces,
    }));
    Ok(())
}

#[derive(Serialize)]
struct FacePrediction {
    face: usize,
    label: usize,
    class: &'static str,
    probabilities: Vec<f64>,
}

#[derive(Serialize)]
struct SolidPrediction {
    id: String,
    faces: Vec<FacePrediction>,
}

pub fn predict(args: PredictArgs) -> Result<(), CliError> {
    install_threads(args.threads)?;
    match args.precision {
        Precision::F64 => run_predict::<f64>(&args),
        Precision::F32 => run_predict::<f32>(&args),
    }
}

fn run_predict<T: Scalar>(args: &PredictArgs) -> Result<(), CliError> {
    use rayon::prelude::*;
    let model: BRepNetModel<T> = load_model(&args.model)?;
    let records = load_records(&args.data)?;
    create_dir(&args.out)?;
    let names = class_names();
    let predictions: Vec<SolidPrediction> = records
        .par_iter()
        .map(|r| -> Result<SolidPrediction, CliError> {
            let batch: Batch<T> = Batch::from_records(&[r], model.standardizer.as_ref())?;
            let logits = model.classify(batch.input())?;
            let probs = softmax_rows(&logits);
            let faces = logits
                .iter_rows()
                .zip(probs.iter_rows())
                .enumerate()
                .map(|(face, (row, p))| {
                    let label = argmax(row);
                    FacePrediction {
                        face,
                        label,
                        class: names[label],
                        probabilities: p.iter().map(|v| v.to_f64_lossy()).collect(),
                    }
                })
                .collect();
            Ok(SolidPrediction { id: r.id.clone(), faces })
        })
        .collect::<Result<_, _>>()?;
    let path = args.out.join("predictions.json");
    write_json(&path, &predictions)?;
    print_json(&serde_json::json!({
        "predictions": path.display().to_string(),
        "solids": predictions.len(),
        "faces": predictions.iter().map(|p| p.faces.len()).sum::<usize>(),
    }));
    Ok(())
}

pub fn gradcheck(args: GradcheckArgs) -> Result<(), CliError> {
    let kernel: KernelPreset = args.kernel.parse().map_err(|e| CliError::Config(format!("{e}")))?;
    let kind: SynthKind = args.kind.parse().map_err(|e| CliError::Config(format!("{e}")))?;
    let params = SynthParams { sides: args.sides, fillets: args.fillets };
    let record = generate_synthetic(kind, &params, args.seed).map_err(|e| CliError::Config(e.to_string()))?.record;
    let records = [record];
    let standardizer = fit_standardizer(&records, true)?;
    let batch: Batch<f64> = Batch::from_records(&[&records[0]], Some(&standardizer))?;
    let arch = ArchitectureConfig::new(KernelSpec::preset(kernel), args.hidden_width, SegmentLabel::COUNT)
        .with_hidden_units(args.hidden_units);
    let model = BRepNetModel::<f64>::new(arch, args.seed)?;
    let options = GradcheckOptions {
        step: args.step,
        tolerance: args.tolerance,
        floor: args.floor,
        corrupt_backward: args.corrupt_backward,
    };
    let labels = batch.labels.clone().expect("synthetic solids are labelled");
    let report = check_gradients(&model, batch.input(), &labels, options)?;
    if let Some(out) = &args.out {
        create_dir(out)?;
        write_json(&out.join("gradcheck_report.json"), &report)?;
    }
    for block in &report.blocks {
        eprintln!("{:<28} {:>7} params  max rel err {:.3e}", block.name, block.size, block.max_rel_error);
    }
    print_json(&serde_json::json!({
        "passed": report.passed,
        "max_rel_error": report.max_rel_error,
        "max_abs_error": report.max_abs_error,
        "num_params": report.num_params,
        "faces": records[0].num_faces(),
    }));
    if report.passed {
        Ok(())
    } else {
        Err(CliError::GradcheckFailed { max_rel_error: report.max_rel_error, tolerance: report.options.tolerance })
    }
}

fn select_solids(records: Vec<SolidRecord>, id: Option<&str>) -> Result<Vec<SolidRecord>, CliError> {
    match id {
        None => Ok(records),
        Some(id) => {
            let found: Vec<SolidRecord> = records.into_iter().filter(|r| r.id == id).collect();
            if found.is_empty() {
                Err(CliError::Config(format!("no solid with id {id:?}")))
            } else {
                Ok(found)
            }
        }
    }
}

fn target_name(t: Target) -> &'static str {
    match t {
        Target::Coedge => "coedge",
        Target::Edge => "edge",
        Target::Face => "face",
    }
}

pub fn inspect(args: InspectArgs) -> Result<(), CliError> {
    let walk = args.walk.as_deref().map(parse_walk).transpose()?;
    let records = select_solids(load_records(&args.data)?, args.solid.as_deref())?;
    for r in &records {
        let topo = &r.topology;
        say!(
            "solid {}: {} faces, {} edges, {} coedges",
            r.id,
            topo.num_faces(),
            topo.num_edges(),
            topo.num_coedges()
        );
        let loops = topo.decompose_loops().map_err(brepnet::ModelError::from)?;
        let mut histogram: BTreeMap<usize, usize> = BTreeMap::new();
        for n in loops.loops_per_face(topo.num_faces()) {
            *histogram.entry(n).or_default() += 1;
        }
        let parts: Vec<String> = histogram
            .iter()
            .map(|(loops, faces)| format!("{faces} face(s) with {loops} loop(s)"))
            .collect();
        say!("  loops: {} total; {}", loops.loops.len(), parts.join(", "));
        if let Some(labels) = &r.labels {
            let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
            for l in labels {
                *counts.entry(l.name()).or_default() += 1;
            }
            let parts: Vec<String> = counts.iter().map(|(k, v)| format!("{k}={v}")).collect();
            say!("  labels: {}", parts.join(", "));
        }
        if let Some(walk) = &walk {
            let m = compile_walk(topo, walk).map_err(brepnet::ModelError::from)?;
            let target = target_name(m.target);
            match args.coedge {
                Some(c) if c >= topo.num_coedges() => {
                    return Err(CliError::Config(format!("coedge {c} is out of range for solid {}", r.id)));
                }
                Some(c) => say!("  walk {walk} from coedge {c}: {target} {}", m.dest[c]),
                None => {
                    say!("  walk {walk} ({target} per coedge):");
                    for (c, d) in m.dest.iter().enumerate() {
                        say!("    {c} -> {d}");
                    }
                }
            }
        }
    }
    Ok(())
}

#[derive(Serialize)]
struct CompiledWalk {
    walk: String,
    target: &'static str,
    dest: Vec<usize>,
}

impl CompiledWalk {
    fn new(walk: String, m: &WalkMatrix) -> Self {
        CompiledWalk { walk, target: target_name(m.target), dest: m.dest.clone() }
    }
}

#[derive(Serialize)]
struct CompiledSolid {
    id: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    kernel: Option<String>,
    walks: Vec<CompiledWalk>,
}

pub fn compile_walks(args: CompileWalksArgs) -> Result<(), CliError> {
    let kernel = args
        .kernel
        .as_deref()
        .map(|k| k.parse::<KernelPreset>().map(KernelSpec::preset))
        .transpose()
        .map_err(|e| CliError::Config(format!("{e}")))?;
    let walks = args.walk.iter().map(|w| parse_walk(w)).collect::<Result<Vec<_>, _>>()?;
    if kernel.is_none() && walks.is_empty() {
        return Err(CliError::Config("give --kernel or at least one --walk".into()));
    }
    let records = select_solids(load_records(&args.data)?, args.solid.as_deref())?;
    let mut out = Vec::with_capacity(records.len());
    for r in &records {
        let compiled = match &kernel {
            Some(spec) => {
                let k = CompiledKernel::compile(spec, &r.topology).map_err(brepnet::ModelError::from)?;
                let names = spec.face_walks.iter().chain(&spec.edge_walks).chain(&spec.coedge_walks);
                let matrices = k.faces.iter().chain(&k.edges).chain(&k.coedges);
                names.zip(matrices).map(|(w, m)| CompiledWalk::new(w.to_string(), m)).collect()
            }
            None => walks
                .iter()
                .map(|w| {
                    let m = compile_walk(&r.topology, w).map_err(brepnet::ModelError::from)?;
                    Ok(CompiledWalk::new(w.to_string(), &m))
                })
                .collect::<Result<Vec<_>, CliError>>()?,
        };
        out.push(CompiledSolid { id: r.id.clone(), kernel: kernel.as_ref().map(|k| k.name.clone()), walks: compiled });
    }
    match &args.out {
        Some(dir) => {
            create_dir(dir)?;
            let path = dir.join("walks.json");
            write_json(&path, &out)?;
            print_json(&serde_json::json!({ "walks": path.display().to_string(), "solids": out.len() }));
        }
        None => print_json(&out),
    }
    Ok(())
}

pub fn synth(args: SynthArgs) -> Result<(), CliError> {
    let records: Vec<SolidRecord> = match &args.kind {
        None => synthetic_corpus(args.count, args.seed),
        Some(kind) => {
            let kind: SynthKind = kind.parse().map_err(|e| CliError::Config(format!("{e}")))?;
            let params = SynthParams { sides: args.sides, fillets: args.fillets };
            (0..args.count as u64)
                .map(|k| {
                    generate_synthetic(kind, &params, args.seed.wrapping_add(k))
                        .map(|s| s.record)
                        .map_err(|e| CliError::Config(e.to_string()))
                })
                .collect::<Result<_, _>>()?
        }
    };
    create_dir(&args.out)?;
    let written = if args.jsonl {
        let path = args.out.join("solids.jsonl");
        let text: String = records
            .iter()
            .map(|r| serde_json::to_string(&r.to_document()).expect("documents serialize") + "\n")
            .collect();
        write_text(&path, &text)?;
        vec![path]
    } else {
        write_dataset(&records, &args.out)?
    };
    print_json(&serde_json::json!({
        "solids": records.len(),
        "faces": records.iter().map(SolidRecord::num_faces).sum::<usize>(),
        "files": written.len(),
        "out": args.out.display().to_string(),
    }));
    Ok(())
}
