use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context};
use hcfuse::dataset::{load_dataset, LabelPolicy, Registry};
use hcfuse::ensemble::{ensemble_checksum, generate_ensemble_from, write_ensemble_dump};
use hcfuse::evaluation::{emit_report, run_dataset, DEFAULT_SIGNIFICANCE, REPORT_FILE};
use hcfuse::genetic::{genetic_fuse, GaExport};
use hcfuse::synthetic::{concentric_rings, gaussian_blobs};
use hcfuse::ultrametric::{ultrametric_violation, ULTRAMETRIC_TOLERANCE};
use hcfuse::{
    cpcc, dendrogram_from_ultrametric, euclidean_dissimilarity, renyi_fuse,
    subdominant_ultrametric, DataMatrix, Dendrogram, DissimilarityMatrix, EnsembleConfig, Error,
    ExperimentReport, GaConfig, MethodId, TrialConfig,
};

use crate::{BenchmarkArgs, DataArgs, FuseArgs, InspectArgs, PipelineArgs, SynthArgs};

pub enum Failure {
    Usage(anyhow::Error),
    Runtime(anyhow::Error),
}

fn usage(msg: impl Into<String>) -> Failure {
    Failure::Usage(anyhow!(msg.into()))
}

/// Configuration errors are usage errors; everything else reached while
/// running is a runtime error.
impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(_) => Failure::Usage(e.into()),
            _ => Failure::Runtime(e.into()),
        }
    }
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Runtime(e)
    }
}

type Outcome = std::result::Result<(), Failure>;

fn trial_config(p: &PipelineArgs) -> TrialConfig {
    TrialConfig {
        ensemble: EnsembleConfig {
            ensemble_size: p.ensemble_size,
            bag_fraction: p.bag_fraction,
            seed: p.seed,
        },
        ga: GaConfig {
            population_size: p.population,
            generations: p.generations,
            crossover_rate: p.crossover_rate,
            mutation_rate: p.mutation_rate,
            mutation_sigma: p.mutation_sigma,
            elitism: p.elitism,
            seed: p.seed,
        },
    }
}

fn setup_threads(jobs: Option<usize>) -> Outcome {
    if let Some(jobs) = jobs {
        if jobs == 0 {
            return Err(usage("--jobs must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .map_err(|e| Failure::Runtime(e.into()))?;
    }
    Ok(())
}

fn label_policy(d: &DataArgs) -> std::result::Result<LabelPolicy, Failure> {
    d.label_policy
        .parse()
        .map_err(|e: Error| Failure::Usage(e.into()))
}

/// Validates everything that does not depend on the data before any work
/// starts, so bad flags fail fast with a usage error.
fn validate_static(cfg: &TrialConfig, repeats: usize) -> Outcome {
    if repeats == 0 {
        return Err(usage("--repeats must be at least 1"));
    }
    if cfg.ensemble.ensemble_size < 2 {
        return Err(usage(format!(
            "--ensemble-size must be at least 2, got {}",
            cfg.ensemble.ensemble_size
        )));
    }
    if !(cfg.ensemble.bag_fraction > 0.0 && cfg.ensemble.bag_fraction <= 1.0) {
        return Err(usage(format!(
            "--bag-fraction must lie in (0, 1], got {}",
            cfg.ensemble.bag_fraction
        )));
    }
    cfg.ga.validate()?;
    Ok(())
}

fn config_meta(cfg: &TrialConfig, method: MethodId, seed: u64) -> Vec<(&'static str, String)> {
    vec![
        ("method", method.name().to_string()),
        ("seed", seed.to_string()),
        ("config", serde_json::to_string(cfg).unwrap_or_default()),
    ]
}

fn create(path: &Path) -> anyhow::Result<BufWriter<File>> {
    Ok(BufWriter::new(
        File::create(path).with_context(|| format!("creating {}", path.display()))?,
    ))
}

pub fn fuse(a: FuseArgs) -> Outcome {
    setup_threads(a.pipeline.jobs)?;
    let policy = label_policy(&a.data_opts)?;
    let cfg = trial_config(&a.pipeline);
    validate_static(&cfg, a.repeats)?;

    let data = load_dataset(&a.data, &policy, a.data_opts.scale)
        .map_err(|e| Failure::Runtime(e.into()))?;
    cfg.ensemble.validate(data.rows())?;
    let e = euclidean_dissimilarity(&data);
    let out = &a.pipeline.out;
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    e.write_square_csv(
        create(&out.join("euclidean.csv"))?,
        &[("source", a.data.display().to_string())],
    )?;

    for r in 0..a.repeats as u64 {
        let seed = a.pipeline.seed + r;
        let run = cfg.with_seed(seed);
        let dir = out.join(format!("seed-{seed}"));
        fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;

        let ensemble = generate_ensemble_from(&e, &run.ensemble)?;
        if a.dump_ensemble {
            write_ensemble_dump(&dir.join("ensemble"), &run.ensemble, &ensemble)?;
        }
        let checksum = ensemble_checksum(&ensemble);
        let members: Vec<DissimilarityMatrix> =
            ensemble.into_iter().map(|m| m.completed_matrix).collect();

        let (consensus, recovered, dendrogram) = match a.method.fuser() {
            Some(fuser) => {
                let fused = renyi_fuse(&members, fuser.alpha())?;
                let recovered = subdominant_ultrametric(&fused);
                let dendrogram = dendrogram_from_ultrametric(&recovered)?;
                (fused, recovered, dendrogram)
            }
            None => {
                let g = genetic_fuse(&members, &e, &run.ga)?;
                let export = GaExport::new(&g.ga, &run.ga, Some(&run.ensemble));
                fs::write(
                    dir.join("ga.json"),
                    serde_json::to_string_pretty(&export).map_err(Error::from)?,
                )
                .with_context(|| format!("writing {}", dir.join("ga.json").display()))?;
                (g.ga.consensus_matrix, g.recovered, g.dendrogram)
            }
        };
        let cpcc_raw = cpcc(&consensus, &e)?;
        let cpcc_ultrametric = cpcc(&recovered, &e)?;

        let mut meta = config_meta(&run, a.method, seed);
        meta.push(("ensemble_checksum", checksum));
        consensus.write_square_csv(create(&dir.join("consensus.csv"))?, &meta)?;
        recovered.write_square_csv(create(&dir.join("ultrametric.csv"))?, &meta)?;
        dendrogram.write_text(create(&dir.join("dendrogram.txt"))?, &meta)?;

        println!(
            "seed {seed} method {} cpcc {cpcc_raw:.6} cpcc_ultrametric {cpcc_ultrametric:.6} -> {}",
            a.method,
            dir.display()
        );
    }
    Ok(())
}

struct DatasetSpec {
    name: String,
    path: PathBuf,
    policy: LabelPolicy,
}

fn dataset_specs(a: &BenchmarkArgs) -> std::result::Result<Vec<DatasetSpec>, Failure> {
    let mut specs = Vec::new();
    if let Some(reg_path) = &a.registry {
        let reg = Registry::load(reg_path)
            .map_err(|e| Failure::Usage(anyhow!(e).context("loading registry")))?;
        if a.datasets.is_empty() {
            specs.extend(reg.datasets.iter().map(|d| DatasetSpec {
                name: d.name.clone(),
                path: d.path.clone(),
                policy: d.label_policy.clone(),
            }));
        } else {
            for name in &a.datasets {
                let d = reg.get(name).ok_or_else(|| {
                    usage(format!("dataset {name:?} is not in {}", reg_path.display()))
                })?;
                specs.push(DatasetSpec {
                    name: d.name.clone(),
                    path: d.path.clone(),
                    policy: d.label_policy.clone(),
                });
            }
        }
    } else if !a.datasets.is_empty() {
        return Err(usage(
            "--dataset selects registry entries and needs --registry",
        ));
    }
    let policy = label_policy(&a.data_opts)?;
    for path in &a.data {
        let name = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| path.display().to_string());
        specs.push(DatasetSpec {
            name,
            path: path.clone(),
            policy: policy.clone(),
        });
    }
    if specs.is_empty() {
        return Err(usage("no datasets given (use --data or --registry)"));
    }
    for (i, s) in specs.iter().enumerate() {
        if specs[..i].iter().any(|o| o.name == s.name) {
            return Err(usage(format!("dataset name {:?} appears twice", s.name)));
        }
    }
    Ok(specs)
}

pub fn benchmark(a: BenchmarkArgs) -> Outcome {
    setup_threads(a.pipeline.jobs)?;
    let mut methods = a.methods.clone();
    methods.sort();
    methods.dedup();
    if methods.len() < 2 {
        return Err(usage("benchmark compares at least two distinct methods"));
    }
    let cfg = trial_config(&a.pipeline);
    validate_static(&cfg, a.repeats)?;
    let specs = dataset_specs(&a)?;

    let mut trials = Vec::new();
    let mut failures = Vec::new();
    for spec in &specs {
        let result = load_dataset(&spec.path, &spec.policy, a.data_opts.scale).and_then(|data| {
            run_dataset(
                &spec.name,
                &data,
                &methods,
                a.repeats,
                a.pipeline.seed,
                &cfg,
            )
        });
        match result {
            Ok(t) => {
                eprintln!("{}: {} trials", spec.name, t.len());
                trials.extend(t);
            }
            Err(e) => {
                eprintln!("{}: failed: {e}", spec.name);
                failures.push(format!("{}: {e}", spec.name));
            }
        }
    }

    if !trials.is_empty() {
        let report = ExperimentReport::assemble(
            trials,
            a.repeats,
            a.pipeline.seed,
            DEFAULT_SIGNIFICANCE,
            cfg,
        )?;
        let paths = emit_report(&report, &a.pipeline.out)?;
        print_summary(&report);
        for p in paths {
            println!("wrote {}", p.display());
        }
    }
    if failures.is_empty() {
        Ok(())
    } else {
        Err(Failure::Runtime(anyhow!(
            "{} of {} datasets failed: {}",
            failures.len(),
            specs.len(),
            failures.join("; ")
        )))
    }
}

fn print_summary(report: &ExperimentReport) {
    print!("{:<8}", "method");
    for d in &report.datasets {
        print!(" {d:>12}");
    }
    println!(" {:>8}", "win%");
    for &m in &report.methods {
        print!("{:<8}", m.name());
        for d in &report.datasets {
            match report.cell(d, m) {
                Some(c) => print!(" {:>12.4}", c.mean),
                None => print!(" {:>12}", "-"),
            }
        }
        println!(" {:>8.1}", report.frequency(m).unwrap_or(f64::NAN));
    }
}

fn read_matrix(path: &Path) -> anyhow::Result<DissimilarityMatrix> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    DissimilarityMatrix::read_csv(file).with_context(|| format!("reading {}", path.display()))
}

fn print_reference(m: &DissimilarityMatrix, reference: Option<&Path>) -> anyhow::Result<()> {
    if let Some(path) = reference {
        let e = read_matrix(path)?;
        println!("cpcc vs {}: {:.6}", path.display(), cpcc(m, &e)?);
    }
    Ok(())
}

pub fn inspect(a: InspectArgs) -> Outcome {
    let path = &a.path;
    let ext = path.extension().and_then(|e| e.to_str()).unwrap_or("");
    match ext {
        "json" => inspect_json(path)?,
        "txt" => {
            let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
            let d = Dendrogram::read_text(file)
                .with_context(|| format!("reading {}", path.display()))?;
            println!(
                "dendrogram: {} leaves, {} merges",
                d.leaves(),
                d.merges().len()
            );
            if let Some((lo, hi)) = d.height_range() {
                println!("heights: {lo} .. {hi}");
            }
            print_reference(&d.cophenetic_matrix(), a.reference.as_deref())?;
        }
        _ => {
            let m = read_matrix(path)?;
            println!("matrix: {} x {}", m.n(), m.n());
            let violation = ultrametric_violation(&m);
            println!(
                "ultrametric: {} (tol {ULTRAMETRIC_TOLERANCE:e}, max violation {violation:e})",
                violation <= ULTRAMETRIC_TOLERANCE
            );
            if let (Some(lo), Some(hi)) = (m.min_entry(), m.max_entry()) {
                println!("range: {lo} .. {hi}");
            }
            print_reference(&m, a.reference.as_deref())?;
        }
    }
    Ok(())
}

fn inspect_json(path: &Path) -> anyhow::Result<()> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    if let Ok(report) = serde_json::from_str::<ExperimentReport>(&text) {
        println!(
            "report: {} datasets, {} methods, {} repeats, base seed {}, {} trials",
            report.datasets.len(),
            report.methods.len(),
            report.repeats,
            report.base_seed,
            report.trials.len()
        );
        print_summary(&report);
        return Ok(());
    }
    let ga: GaExport = serde_json::from_str(&text).with_context(|| {
        format!(
            "{} is neither a {REPORT_FILE} nor a GA result",
            path.display()
        )
    })?;
    println!(
        "ga result: seed {}, {} weights",
        ga.seed,
        ga.best_weights.len()
    );
    println!("best fitness: {:.6}", ga.best_fitness);
    if let (Some(first), Some(last)) = (ga.fitness_trace.first(), ga.fitness_trace.last()) {
        println!(
            "trace: {} generations, {first:.6} -> {last:.6}",
            ga.fitness_trace.len()
        );
    }
    let weights: Vec<String> = ga.best_weights.iter().map(|w| format!("{w:.4}")).collect();
    println!("weights: {}", weights.join(" "));
    Ok(())
}

pub fn synth(a: SynthArgs) -> Outcome {
    if a.n < DataMatrix::MIN_ROWS {
        return Err(usage(format!(
            "--n must be at least {}",
            DataMatrix::MIN_ROWS
        )));
    }
    if a.groups == 0 || !(a.spread.is_finite() && a.spread >= 0.0) {
        return Err(usage("--groups must be positive and --spread non-negative"));
    }
    let data = match a.kind.as_str() {
        "blobs" => gaussian_blobs(a.n, a.groups, 2, a.spread, a.seed),
        "rings" => concentric_rings(a.n, a.groups, a.spread, a.seed),
        other => {
            return Err(usage(format!(
                "unknown synthetic kind {other:?} (blobs, rings)"
            )))
        }
    };
    let mut text = String::new();
    for i in 0..data.rows() {
        let row: Vec<String> = data.row(i).iter().map(f64::to_string).collect();
        text.push_str(&row.join(","));
        text.push('\n');
    }
    if let Some(parent) = a.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
    }
    fs::write(&a.out, text).with_context(|| format!("writing {}", a.out.display()))?;
    println!("wrote {} points to {}", data.rows(), a.out.display());
    Ok(())
}
