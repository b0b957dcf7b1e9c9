use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};

use inr_shape::dataset::{
    feature_index, generate_population, import_population, Dataset, FeatureVector, MeasureConfig, ParamRanges,
    PopulationConfig, SampleConfig, SampleSpec, FEATURE_NAMES,
};
use inr_shape::dataset::store::MANIFEST_FILE;
use inr_shape::generation::{
    edit_sweep, fit_sampler, generate_cohort, reconstruct, CohortOptions, CohortRecord, FeatureOverrides, Sweep,
    DEFAULT_CLAMP_SIGMA, DEFAULT_RESOLUTION,
};
use inr_shape::mesh::{io::read_mesh, io::write_obj, Point3};
use inr_shape::metrics::{
    compare_distributions, compare_steerability, evaluate_reconstruction, evaluate_steerability,
    steerability_from_records, EvalReport, ReconstructionConfig, MAX_EMPTY_RATE,
};
use inr_shape::model::{Architecture, ModelParams, DEFAULT_HIDDEN_LAYERS, DEFAULT_HIDDEN_WIDTH, DEFAULT_LATENT_DIM};
use inr_shape::training::{TrainConfig, Trainer, DESK_EPOCHS, FULL_EPOCHS};
use inr_shape::{Error, Scalar};
use serde::Serialize;
use serde_json::json;

use crate::args::{
    Cli, Command, DatasetGenArgs, EditArgs, EvaluateArgs, GenerateArgs, Precision, ReconstructArgs, TrainArgs,
};
use crate::config::{ConfigFile, Merge};
use crate::error::{CliError, CliResult};
use crate::loaded::LoadedModel;
use crate::with_model;

pub const COHORT_FILE: &str = "cohort.json";
pub const EDIT_FILE: &str = "edit.json";
pub const COHORT_VERSION: u32 = 1;

pub fn dispatch(cli: Cli) -> CliResult<()> {
    let file = match &cli.config {
        Some(path) => ConfigFile::load(path)?,
        None => ConfigFile::default(),
    };
    fn merged<A: Merge>(mut a: A, f: Option<A>) -> A {
        if let Some(f) = f {
            a.merge(f);
        }
        a
    }
    match cli.command {
        Command::DatasetGen(a) => dataset_gen(merged(a, file.dataset_gen)),
        Command::Train(a) => train(merged(a, file.train)),
        Command::Reconstruct(a) => reconstruct_cmd(merged(a, file.reconstruct)),
        Command::Generate(a) => generate(merged(a, file.generate)),
        Command::Edit(a) => edit(merged(a, file.edit)),
        Command::Evaluate(a) => evaluate(merged(a, file.evaluate)),
        Command::Serve(a) => crate::server::serve_blocking(merged(a, file.serve)),
    }
}

fn required<T>(value: Option<T>, flag: &str) -> CliResult<T> {
    value.ok_or_else(|| CliError::usage(format!("missing required flag --{flag}")))
}

fn io_err(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn write_json(path: &Path, value: &impl Serialize) -> CliResult<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| io_err(parent, e))?;
    }
    let mut text = serde_json::to_string_pretty(value).map_err(Error::from)?;
    text.push('\n');
    fs::write(path, text).map_err(|e| io_err(path, e))?;
    Ok(())
}

fn print_summary(value: serde_json::Value) {
    println!("{value}");
}

fn existing_dataset(dir: Option<PathBuf>) -> CliResult<PathBuf> {
    let dir = required(dir, "dataset")?;
    if !dir.join(MANIFEST_FILE).is_file() {
        return Err(CliError::usage(format!(
            "--dataset: {} does not contain a {MANIFEST_FILE}",
            dir.display()
        )));
    }
    Ok(dir)
}

fn existing_ckpt(path: Option<PathBuf>, flag: &str) -> CliResult<PathBuf> {
    let path = required(path, flag)?;
    if !path.is_file() {
        return Err(CliError::usage(format!("--{flag}: {} does not exist", path.display())));
    }
    Ok(path)
}

fn parse_point(text: &str) -> CliResult<Point3<f64>> {
    let bad = || CliError::usage(format!("--reference: expected x,y,z, got {text:?}"));
    let parts: Vec<f64> = text
        .split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|_| bad()))
        .collect::<CliResult<_>>()?;
    match parts[..] {
        [x, y, z] if parts.iter().all(|v| v.is_finite()) => Ok([x, y, z]),
        _ => Err(bad()),
    }
}

/// Parses a comma-separated feature list; "none" or "" means unconditioned.
pub fn parse_fixed_features(text: &str) -> CliResult<Vec<usize>> {
    let text = text.trim();
    if text.is_empty() || text.eq_ignore_ascii_case("none") {
        return Ok(Vec::new());
    }
    let mut out = Vec::new();
    for name in text.split(',') {
        let f = feature_index(name).map_err(|e| CliError::usage(format!("--fixed-features: {e}")))?;
        if out.contains(&f) {
            return Err(CliError::usage(format!("--fixed-features: {name:?} listed twice")));
        }
        out.push(f);
    }
    Ok(out)
}

fn clamp_setting(no_clamp: bool, sigma: Option<f64>, flag: &str) -> CliResult<Option<f64>> {
    if no_clamp {
        return Ok(None);
    }
    let s = sigma.unwrap_or(DEFAULT_CLAMP_SIGMA);
    if !(s > 0.0 && s.is_finite()) {
        return Err(CliError::usage(format!("--{flag} must be positive")));
    }
    Ok(Some(s))
}

pub fn dataset_gen(a: DatasetGenArgs) -> CliResult<()> {
    let out = required(a.out, "out")?;
    let seed = a.seed.unwrap_or(0);
    let measure = MeasureConfig {
        iou_resolution: a.iou_resolution.unwrap_or(MeasureConfig::default().iou_resolution),
        ..MeasureConfig::default()
    };
    let samples = if a.no_samples {
        None
    } else {
        let d = SampleConfig::default();
        Some(SampleSpec {
            n_surface: a.surface_samples.unwrap_or(d.n_surface),
            n_perturbed: a.perturbed_samples.unwrap_or(d.n_perturbed),
            sigma: a.sigma.unwrap_or(d.sigma),
        })
    };
    let ds = if a.import.is_empty() {
        let mut ranges = ParamRanges::default();
        if let Some(f) = a.split_fraction {
            if !(0.0..=1.0).contains(&f) {
                return Err(CliError::usage("--split-fraction must lie in [0, 1]"));
            }
            ranges.split_fraction = f;
        }
        generate_population(&PopulationConfig {
            n: a.n.unwrap_or(20),
            seed,
            ranges,
            mesh_resolution: a.resolution.unwrap_or(64),
            measure,
            samples,
        })?
    } else {
        let reference = parse_point(
            a.reference
                .as_deref()
                .ok_or_else(|| CliError::usage("missing required flag --reference (needed with --import)"))?,
        )?;
        let meshes = a.import.iter().map(read_mesh::<f64>).collect::<Result<Vec<_>, _>>()?;
        import_population(meshes, reference, seed, measure, samples)?
    };
    ds.save(&out)?;
    print_summary(json!({
        "command": "dataset-gen",
        "out": out,
        "shapes": ds.len(),
        "seed": seed,
        "split": ds.shapes.iter().filter(|s| s.features.isthmus_area == 0.0).count(),
    }));
    Ok(())
}

pub fn train(a: TrainArgs) -> CliResult<()> {
    let dataset = existing_dataset(a.dataset)?;
    let out = required(a.out, "out")?;
    let fixed = parse_fixed_features(a.fixed_features.as_deref().unwrap_or("none"))?;
    let arch = Architecture {
        hidden_width: a.hidden_width.unwrap_or(DEFAULT_HIDDEN_WIDTH),
        hidden_layers: a.hidden_layers.unwrap_or(DEFAULT_HIDDEN_LAYERS),
        latent_dim: a.latent_dim.unwrap_or(DEFAULT_LATENT_DIM),
        fixed_features: fixed,
    };
    let defaults = TrainConfig::default();
    let corr_weight = a.corr_weight.unwrap_or(defaults.corr_weight);
    let config = TrainConfig {
        epochs: a.epochs.unwrap_or(if a.full { FULL_EPOCHS } else { DESK_EPOCHS }),
        points_per_shape: a.points.unwrap_or(defaults.points_per_shape),
        learning_rate: a.lr.unwrap_or(defaults.learning_rate),
        lambda: a.lambda.unwrap_or(defaults.lambda),
        corr_weight,
        corr_enabled: corr_weight > 0.0,
        seed: a.seed.unwrap_or(0),
        checkpoint_every: a.checkpoint_every,
        checkpoint_path: Some(out.clone()),
    };
    if config.epochs == 0 {
        return Err(CliError::usage("--epochs must be at least 1"));
    }
    let log_path = a.log.unwrap_or_else(|| {
        let mut name = out.clone().into_os_string();
        name.push(".log.jsonl");
        PathBuf::from(name)
    });
    let ds = Dataset::load(&dataset)?;
    let precision = a.precision.unwrap_or(Precision::F64);
    let last = match precision {
        Precision::F32 => train_as::<f32>(arch, &ds, config, &out, &log_path)?,
        Precision::F64 => train_as::<f64>(arch, &ds, config, &out, &log_path)?,
    };
    print_summary(json!({
        "command": "train",
        "out": out,
        "log": log_path,
        "precision": precision.as_str(),
        "epochs": last.as_ref().map(|r| r.epoch),
        "mse": last.as_ref().map(|r| r.mse),
    }));
    Ok(())
}

fn train_as<T: Scalar>(
    arch: Architecture,
    ds: &Dataset,
    config: TrainConfig,
    out: &Path,
    log_path: &Path,
) -> CliResult<Option<inr_shape::training::EpochReport>> {
    let samples = ds.sample_sets()?;
    let mut trainer = Trainer::<T>::new(arch, &samples, &ds.features(), config)?;
    if let Some(parent) = log_path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| io_err(parent, e))?;
    }
    let mut log = OpenOptions::new()
        .create(true)
        .append(true)
        .open(log_path)
        .map_err(|e| io_err(log_path, e))?;
    let mut log_error = None;
    let reports = trainer.run(|r| {
        if log_error.is_some() {
            return;
        }
        let line = serde_json::to_string(r).expect("epoch reports serialize");
        if let Err(e) = writeln!(log, "{line}") {
            log_error = Some(e);
        }
        if r.epoch == 1 || r.epoch % 100 == 0 {
            log::info!("epoch {} mse {:.3e} corr {:.3}", r.epoch, r.mse, r.corr_loss);
        }
    })?;
    if let Some(e) = log_error {
        return Err(io_err(log_path, e).into());
    }
    trainer.model.save(out)?;
    Ok(reports.last().cloned())
}

pub fn reconstruct_cmd(a: ReconstructArgs) -> CliResult<()> {
    let ckpt = existing_ckpt(a.ckpt, "ckpt")?;
    let id = required(a.shape_id, "shape-id")?;
    let resolution = a.resolution.unwrap_or(DEFAULT_RESOLUTION);
    let out = a.out.unwrap_or_else(|| PathBuf::from(format!("reconstruct_{id}.obj")));
    let model = LoadedModel::load(&ckpt)?;
    let syn = with_model!(&model, |m| reconstruct(m, id, resolution))?;
    write_obj(&syn.mesh, &out)?;
    print_summary(json!({
        "command": "reconstruct",
        "out": out,
        "shape_id": id,
        "empty": syn.empty,
        "vertices": syn.mesh.vertices.len(),
        "faces": syn.mesh.faces.len(),
    }));
    Ok(())
}

#[derive(Serialize)]
struct CohortManifest<'a> {
    version: u32,
    seed: u64,
    n: usize,
    resolution: usize,
    overrides: FeatureOverrides,
    clamp_sigma: Option<f64>,
    meshes: Vec<String>,
    records: &'a [CohortRecord],
}

pub fn mesh_file_name(index: usize) -> String {
    format!("shape_{index:04}.obj")
}

pub fn generate(a: GenerateArgs) -> CliResult<()> {
    let ckpt = existing_ckpt(a.ckpt, "ckpt")?;
    let out = required(a.out, "out")?;
    let n = a.n.unwrap_or(1000);
    if n == 0 {
        return Err(CliError::usage("--n must be at least 1"));
    }
    let seed = a.seed.unwrap_or(0);
    let opts = CohortOptions {
        resolution: a.resolution.unwrap_or(DEFAULT_RESOLUTION),
        overrides: FeatureOverrides {
            volume: a.volume,
            isthmus: a.isthmus,
            symmetry: a.symmetry,
        },
        clamp_sigma: clamp_setting(a.no_clamp, a.clamp_sigma, "clamp-sigma")?,
        measure: (!a.no_measure).then(MeasureConfig::default),
    };
    let model = LoadedModel::load(&ckpt)?;
    fs::create_dir_all(&out).map_err(|e| io_err(&out, e))?;
    let records = with_model!(&model, |m| {
        let sampler = fit_sampler(m)?;
        generate_cohort(m, &sampler, n, seed, &opts, |record, syn| {
            write_obj(&syn.mesh, out.join(mesh_file_name(record.index)))
        })
    })?;
    let manifest = CohortManifest {
        version: COHORT_VERSION,
        seed,
        n,
        resolution: opts.resolution,
        overrides: opts.overrides,
        clamp_sigma: opts.clamp_sigma,
        meshes: (0..n).map(mesh_file_name).collect(),
        records: &records,
    };
    write_json(&out.join(COHORT_FILE), &manifest)?;
    let empty = records.iter().filter(|r| r.empty).count();
    print_summary(json!({
        "command": "generate",
        "out": out,
        "n": n,
        "empty": empty,
        "warnings": records.iter().map(|r| r.warnings.len()).sum::<usize>(),
    }));
    Ok(())
}

#[derive(Serialize)]
struct EditStepRecord {
    value: f64,
    mesh: String,
    code: Vec<f64>,
    measured: Option<FeatureVector>,
    components: usize,
    empty: bool,
    warnings: Vec<String>,
}

#[derive(Serialize)]
struct SweepRecord {
    feature: String,
    from: f64,
    to: f64,
    steps: Vec<EditStepRecord>,
}

pub fn edit(a: EditArgs) -> CliResult<()> {
    let ckpt = existing_ckpt(a.ckpt, "ckpt")?;
    let id = required(a.shape_id, "shape-id")?;
    if a.sweep.is_empty() {
        return Err(CliError::usage("missing required flag --sweep"));
    }
    let sweeps = a
        .sweep
        .iter()
        .map(|s| Sweep::parse(s).map_err(|e| CliError::usage(format!("--sweep: {e}"))))
        .collect::<CliResult<Vec<_>>>()?;
    let out = a.out.unwrap_or_else(|| PathBuf::from(format!("edit_{id}")));
    let resolution = a.resolution.unwrap_or(DEFAULT_RESOLUTION);
    let clamp = clamp_setting(a.no_clamp, a.clamp_sigma, "clamp-sigma")?;
    let model = LoadedModel::load(&ckpt)?;
    fs::create_dir_all(&out).map_err(|e| io_err(&out, e))?;
    let (base, records) = with_model!(&model, |m| edit_as(m, id, &sweeps, resolution, clamp, &out))?;
    write_json(
        &out.join(EDIT_FILE),
        &json!({ "version": COHORT_VERSION, "shape_id": id, "resolution": resolution, "base_code": base, "sweeps": records }),
    )?;
    print_summary(json!({
        "command": "edit",
        "out": out,
        "shape_id": id,
        "components": records.iter().map(|s| s.steps.iter().map(|x| x.components).collect::<Vec<_>>()).collect::<Vec<_>>(),
    }));
    Ok(())
}

fn edit_as<T: Scalar>(
    m: &ModelParams<T>,
    id: usize,
    sweeps: &[Sweep],
    resolution: usize,
    clamp: Option<f64>,
    out: &Path,
) -> CliResult<(Vec<f64>, Vec<SweepRecord>)> {
    let base = m.code(id)?;
    let mut records = Vec::new();
    for sweep in sweeps {
        let name = FEATURE_NAMES[sweep.feature];
        let steps = edit_sweep(m, &base, sweep, resolution, &MeasureConfig::default(), clamp)?;
        let mut step_records = Vec::new();
        for (i, step) in steps.into_iter().enumerate() {
            let file = format!("{name}_{i:03}.obj");
            write_obj(&step.synthesis.mesh, out.join(&file))?;
            step_records.push(EditStepRecord {
                value: step.value,
                mesh: file,
                code: step.code,
                measured: step.measured,
                components: step.components,
                empty: step.synthesis.empty,
                warnings: step.warnings,
            });
        }
        records.push(SweepRecord {
            feature: name.to_string(),
            from: sweep.from,
            to: sweep.to,
            steps: step_records,
        });
    }
    Ok((base.full().iter().map(|v| v.as_f64()).collect(), records))
}

pub fn evaluate(a: EvaluateArgs) -> CliResult<()> {
    let ckpt = existing_ckpt(a.ckpt, "ckpt")?;
    let ckpt_b = a.ckpt_b.map(|p| existing_ckpt(Some(p), "ckpt-b")).transpose()?;
    let dataset = existing_dataset(a.dataset)?;
    let out = a.out.unwrap_or_else(|| PathBuf::from("report.json"));
    let n = a.n.unwrap_or(1000);
    let seed = a.seed.unwrap_or(0);
    let resolution = a.resolution.unwrap_or(DEFAULT_RESOLUTION);
    let ds = Dataset::load(&dataset)?;
    let model = LoadedModel::load(&ckpt)?;
    if model.shape_count() != ds.len() {
        return Err(Error::Shape(format!(
            "checkpoint has {} shapes, dataset has {}",
            model.shape_count(),
            ds.len()
        ))
        .into());
    }
    let mut report = EvalReport::new();

    if !a.skip_reconstruction {
        let cfg = ReconstructionConfig {
            resolution,
            chamfer_samples: a.chamfer_samples.unwrap_or(ReconstructionConfig::default().chamfer_samples),
            seed,
            unit_length: a.unit_length,
        };
        let refs: Vec<_> = ds.shapes.iter().map(|s| s.mesh.clone()).collect();
        report.reconstruction = Some(with_model!(&model, |m| evaluate_reconstruction(m, &refs, &cfg))?);
    }

    let opts = CohortOptions {
        resolution,
        ..CohortOptions::default()
    };
    if !a.skip_generation {
        let records = with_model!(&model, |m| {
            let sampler = fit_sampler(m)?;
            generate_cohort(m, &sampler, n, seed, &opts, |_, _| Ok(()))
        })?;
        let generated: Vec<FeatureVector> = records.iter().filter_map(|r| r.measured).collect();
        let empty_rate = (n - generated.len()) as f64 / n as f64;
        report.generated_empty_rate = Some(empty_rate);
        if empty_rate > MAX_EMPTY_RATE {
            return Err(Error::EvaluationAborted(format!(
                "{:.1}% of generated meshes are empty or unmeasurable",
                100.0 * empty_rate
            ))
            .into());
        }
        report.distributions = Some(compare_distributions(&ds.features(), &generated)?);
        if model.is_conditioned() {
            report.steerability = Some(steerability_from_records(&records)?);
        }
    }

    if let Some(path) = ckpt_b {
        let model_b = LoadedModel::load(&path)?;
        let (b, _) = with_model!(&model_b, |m| {
            let sampler = fit_sampler(m)?;
            evaluate_steerability(m, &sampler, n, seed, &opts)
        })?;
        if let Some(a) = &report.steerability {
            report.comparison = Some(compare_steerability(a, &b));
        }
        report.steerability_b = Some(b);
    }

    write_json(&out, &report)?;
    if let Some(dir) = &a.plots {
        write_plots(dir, &report)?;
    }
    print_summary(json!({
        "command": "evaluate",
        "out": out,
        "chamfer_mean": report.reconstruction.as_ref().map(|r| r.mean),
        "ks": report.distributions.as_ref().map(|d| d.features.iter().map(|f| (f.feature.clone(), f.ks)).collect::<Vec<_>>()),
        "pcc": report.steerability.as_ref().map(|s| s.features.iter().map(|f| (f.feature.clone(), f.pcc)).collect::<Vec<_>>()),
    }));
    Ok(())
}

fn write_plots(dir: &Path, report: &EvalReport) -> CliResult<()> {
    if let Some(d) = &report.distributions {
        for f in &d.features {
            crate::plots::write(dir, &format!("hist_{}.svg", f.feature), &crate::plots::histogram_svg(f))?;
        }
    }
    for (tag, s) in [("", &report.steerability), ("_b", &report.steerability_b)] {
        if let Some(s) = s {
            for f in &s.features {
                crate::plots::write(dir, &format!("steer{tag}_{}.svg", f.feature), &crate::plots::scatter_svg(f))?;
            }
        }
    }
    Ok(())
}

/// Loads a checkpoint in its own precision; used by tests and the server.
pub fn load_model(path: &Path) -> CliResult<LoadedModel> {
    Ok(LoadedModel::load(path)?)
}
