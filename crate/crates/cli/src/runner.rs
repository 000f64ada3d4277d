//! Builds everything an experiment config asks for and writes the outputs.

use crate::config::{
    AggregationSpec, ConfigError, ExperimentConfig, GraphConfig, InitialSpec, ModelSpec, ProductSpec, SystemSpec,
};
use rand::seq::index;
use rayon::prelude::*;
use serde::Serialize;
use spreadbound::bounds::{
    combine_bounds, eliminate_impossible, generic_bounding_rhs, integrate, mean_field_rhs, refined_bounding_rhs,
    ClipLog, CorrelationLedger, LayoutError, RhsSpec,
};
use spreadbound::bundle::{Aggregation, BundleError, Role, RunMetadata, TrajectoryBundle};
use spreadbound::catalog::{adhoc_rhs, build_model, CatalogError, CatalogKind};
use spreadbound::description::{DescriptionError, ModelDescription};
use spreadbound::exact::{self, ConfigSpace, ExactError, JointDistribution, MasterOptions};
use spreadbound::graph::{Graph, GraphError};
use spreadbound::grid::{GridError, TimeGrid};
use spreadbound::integrate::{IntegrateError, IntegrationPolicy, Method};
use spreadbound::metrics::{bundle_gap_stats, containment_check, d_metric, GapStats, MetricError, SeriesContainment};
use spreadbound::model::{CompartmentalModel, Configuration};
use spreadbound::rng;
use spreadbound::ssa::{ensemble_estimate, EnsembleOptions, InitialCondition, SsaError};
use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use thiserror::Error;

/// Domain tag for seeded initial-condition draws.
pub const INITIAL_DOMAIN: &[u8] = b"initial";

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Catalog(#[from] CatalogError),
    #[error(transparent)]
    Description(#[from] DescriptionError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Layout(#[from] LayoutError),
    #[error("exact oracle: {0}")]
    Exact(#[from] ExactError),
    #[error("integration of {label}: {source}")]
    Integrate { label: String, source: IntegrateError },
    #[error("simulation: {0}")]
    Ssa(#[from] SsaError),
    #[error(transparent)]
    Bundle(#[from] BundleError),
    #[error("metrics: {0}")]
    Metric(#[from] MetricError),
    #[error("writing {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

impl RunError {
    /// 1 for anything the config author can fix, 3 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_)
            | RunError::Catalog(_)
            | RunError::Description(_)
            | RunError::Graph(_)
            | RunError::Grid(_)
            | RunError::Layout(_)
            | RunError::Exact(ExactError::StateSpaceTooLarge { .. }) => 1,
            _ => 3,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub out_dir: PathBuf,
    pub quiet: bool,
    pub state_cap: usize,
}

impl RunOptions {
    pub fn new(out_dir: impl Into<PathBuf>) -> Self {
        Self {
            out_dir: out_dir.into(),
            quiet: true,
            state_cap: exact::state_cap(),
        }
    }
}

/// The model and starting point a config resolves to.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub model: CompartmentalModel,
    pub kind: Option<CatalogKind>,
    pub grid: TimeGrid,
    /// `probs[i * nc + c]`.
    pub probs: Vec<f64>,
    /// Set when every node starts in a known compartment.
    pub point: Option<Configuration>,
    pub graph_seed: Option<u64>,
}

pub fn prepare(cfg: &ExperimentConfig) -> Result<Prepared, RunError> {
    let (model, kind, graph_seed) = match &cfg.model {
        ModelSpec::Catalog { catalog, params, graph } => {
            let kind: CatalogKind = catalog.parse()?;
            let (graph, seed) = realize_graph(graph, cfg.seed)?;
            (build_model(kind, graph, params)?, Some(kind), seed)
        }
        ModelSpec::Inline { description } => (description.build()?, None, None),
        ModelSpec::File { file } => {
            let text = fs::read_to_string(file).map_err(|source| ConfigError::Read {
                path: file.clone(),
                source,
            })?;
            (ModelDescription::from_json(&text)?.build()?, None, None)
        }
    };
    let grid = TimeGrid::uniform(cfg.grid.start, cfg.grid.end, cfg.grid.step)?;
    let (probs, point) = resolve_initial(&cfg.initial, &model, cfg.seed)?;
    Ok(Prepared {
        model,
        kind,
        grid,
        probs,
        point,
        graph_seed,
    })
}

fn realize_graph(g: &GraphConfig, seed: u64) -> Result<(Graph, Option<u64>), GraphError> {
    Ok(match g {
        GraphConfig::ErdosRenyi { n, p, seed: s } => {
            let s = s.unwrap_or(seed);
            (Graph::erdos_renyi(*n, *p, s)?, Some(s))
        }
        GraphConfig::Complete { n } => (Graph::complete(*n)?, None),
        GraphConfig::Path { n } => (Graph::path(*n)?, None),
        GraphConfig::Explicit { n, edges } => (Graph::new(*n, edges.iter().map(|e| (e[0], e[1])))?, None),
    })
}

fn resolve_initial(
    spec: &InitialSpec,
    model: &CompartmentalModel,
    seed: u64,
) -> Result<(Vec<f64>, Option<Configuration>), ConfigError> {
    let n = model.node_count();
    let nc = model.compartment_count();
    let lookup = |name: &str| {
        model
            .compartment_index(name)
            .ok_or_else(|| ConfigError::Initial(format!("unknown compartment {name:?}")))
    };
    let point = |config: Vec<usize>| {
        let mut probs = vec![0.0; n * nc];
        for (i, &c) in config.iter().enumerate() {
            probs[i * nc + c] = 1.0;
        }
        (probs, Some(Configuration(config)))
    };
    match spec {
        InitialSpec::All(s) => {
            let name = s
                .strip_prefix("all:")
                .ok_or_else(|| ConfigError::Initial(format!("expected \"all:<compartment>\", got {s:?}")))?;
            Ok(point(vec![lookup(name)?; n]))
        }
        InitialSpec::PerNode(names) => {
            if names.len() != n {
                return Err(ConfigError::Initial(format!("{} entries for {n} nodes", names.len())));
            }
            Ok(point(names.iter().map(|s| lookup(s)).collect::<Result<_, _>>()?))
        }
        InitialSpec::Seeded { seeded } => {
            if seeded.count > n {
                return Err(ConfigError::Initial(format!("cannot seed {} of {n} nodes", seeded.count)));
            }
            let c = lookup(&seeded.compartment)?;
            let mut config = vec![lookup(&seeded.background)?; n];
            let mut r = rng::stream(seed, INITIAL_DOMAIN, 0);
            for i in index::sample(&mut r, n, seeded.count) {
                config[i] = c;
            }
            Ok(point(config))
        }
        InitialSpec::Product { product } => {
            let rows: Vec<&BTreeMap<String, f64>> = match product {
                ProductSpec::Uniform(m) => vec![m; n],
                ProductSpec::PerNode(v) => {
                    if v.len() != n {
                        return Err(ConfigError::Initial(format!("{} rows for {n} nodes", v.len())));
                    }
                    v.iter().collect()
                }
            };
            let mut probs = vec![0.0; n * nc];
            for (i, row) in rows.iter().enumerate() {
                for (name, &p) in row.iter() {
                    if !(0.0..=1.0).contains(&p) {
                        return Err(ConfigError::Initial(format!("probability {p} outside [0, 1]")));
                    }
                    probs[i * nc + lookup(name)?] = p;
                }
                let total: f64 = probs[i * nc..(i + 1) * nc].iter().sum();
                if (total - 1.0).abs() > 1e-9 {
                    return Err(ConfigError::Initial(format!("node {i} probabilities sum to {total}")));
                }
            }
            Ok((probs, None))
        }
    }
}

fn ledger_for(cfg: &ExperimentConfig, prep: &Prepared) -> Result<CorrelationLedger, ConfigError> {
    let Some(entries) = &cfg.ledger else {
        return Ok(prep.kind.map(|k| k.entry().default_ledger()).unwrap_or_default());
    };
    let mut ledger = CorrelationLedger::new();
    for (key, &sign) in entries {
        let parts: Vec<&str> = key.split(',').map(str::trim).collect();
        let [a, b] = parts[..] else {
            return Err(ConfigError::Invalid(format!("ledger key {key:?} is not \"A,B\"")));
        };
        let idx = |s: &str| {
            prep.model
                .compartment_index(s)
                .ok_or_else(|| ConfigError::Invalid(format!("ledger names unknown compartment {s:?}")))
        };
        ledger.set(idx(a)?, idx(b)?, sign);
    }
    Ok(ledger)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputKind {
    Bounding,
    Point,
    Exact,
    MonteCarlo,
}

#[derive(Debug, Clone)]
pub struct Output {
    pub label: String,
    pub kind: OutputKind,
    pub bundle: TrajectoryBundle,
    pub clip_log: Option<ClipLog>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SystemSummary {
    pub label: String,
    pub kind: OutputKind,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub clip_log: Option<ClipLog>,
    /// Graph-mean gap per compartment name.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub aggregate_gap: Option<BTreeMap<String, GapStats>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_aggregate_gap: Option<f64>,
    /// Largest single-node gap.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_node_gap: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ContainmentEntry {
    pub bounds: String,
    pub reference: String,
    pub aggregation: AggregationSpec,
    pub tolerance: f64,
    pub pass: bool,
    pub max_violation: f64,
    /// Series whose violation exceeded the tolerance.
    pub violations: Vec<SeriesContainment>,
}

#[derive(Debug, Clone, Serialize)]
pub struct DistanceEntry {
    pub system: String,
    pub role: Role,
    pub reference: String,
    pub compartment: String,
    /// d-metric between graph means over the whole grid.
    pub graph_mean: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub label: String,
    pub config_hash: String,
    pub software_version: String,
    pub pass: bool,
    pub systems: Vec<SystemSummary>,
    pub containment: Vec<ContainmentEntry>,
    pub distances: Vec<DistanceEntry>,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub report: Report,
    pub outputs: Vec<Output>,
    pub files: Vec<PathBuf>,
}

impl RunOutcome {
    pub fn output(&self, label: &str) -> Option<&Output> {
        self.outputs.iter().find(|o| o.label == label)
    }
}

enum OdeJob {
    Generic,
    Refined,
    MeanField,
    Adhoc(String),
}

/// Computes every requested output and the report without touching the disk.
pub fn compute(cfg: &ExperimentConfig, state_cap: usize) -> Result<(Prepared, Vec<Output>, Report), RunError> {
    cfg.check()?;
    let specs = cfg.system_specs()?;
    let prep = prepare(cfg)?;
    let ledger = ledger_for(cfg, &prep)?;
    let policy = IntegrationPolicy {
        method: Method::Rk4,
        max_step: cfg.integration.max_step,
        clip: cfg.integration.clip,
    };
    let model = &prep.model;
    let mut jobs = Vec::new();
    for s in &specs {
        match s {
            SystemSpec::Generic => jobs.push(OdeJob::Generic),
            SystemSpec::Refined => jobs.push(OdeJob::Refined),
            SystemSpec::MeanField => jobs.push(OdeJob::MeanField),
            SystemSpec::Adhoc(v) => {
                let kind = prep.kind.ok_or_else(|| {
                    ConfigError::Invalid(format!("adhoc:{v} needs a catalog model"))
                })?;
                // surface unknown variants as config errors before any work starts
                adhoc_rhs::<f64>(kind, v, model)?;
                jobs.push(OdeJob::Adhoc(v.clone()));
            }
            _ => {}
        }
    }
    if specs.contains(&SystemSpec::Exact) {
        ConfigSpace::for_model(model, state_cap)?;
    }

    let ode: Vec<Result<Output, RunError>> = jobs
        .par_iter()
        .map(|job| {
            let (label, rhs): (String, RhsSpec<f64>) = match job {
                OdeJob::Generic => ("generic".into(), generic_bounding_rhs(model)),
                OdeJob::Refined => ("refined".into(), refined_bounding_rhs(model, &ledger)),
                OdeJob::MeanField => ("mean_field".into(), mean_field_rhs(model)),
                OdeJob::Adhoc(v) => (
                    format!("adhoc_{v}"),
                    adhoc_rhs(prep.kind.expect("checked above"), v, model)?,
                ),
            };
            let x0 = rhs.layout().initial_state(&prep.probs)?;
            let sol = integrate(&rhs, x0, &prep.grid, &policy, &label).map_err(|source| RunError::Integrate {
                label: label.clone(),
                source,
            })?;
            let mut bundle = sol.bundle;
            if matches!(job, OdeJob::Refined) {
                bundle.metadata.ledger = serde_json::to_value(ledger.describe(model.compartments())).ok();
            }
            Ok(Output {
                kind: if rhs.is_bounding() { OutputKind::Bounding } else { OutputKind::Point },
                label,
                bundle,
                clip_log: Some(sol.clip_log),
            })
        })
        .collect();
    let mut outputs = ode.into_iter().collect::<Result<Vec<_>, _>>()?;

    if specs.contains(&SystemSpec::Exact) {
        let space = ConfigSpace::for_model(model, state_cap)?;
        let init = match &prep.point {
            Some(c) => JointDistribution::point(space, c),
            None => JointDistribution::product(space, &prep.probs)?,
        };
        let q = exact::build_generator_capped(model, state_cap)?;
        let sol = exact::solve_with_generator(
            &q,
            &init,
            &prep.grid,
            MasterOptions {
                max_step: cfg.integration.max_step,
                keep_joint: false,
            },
        )?;
        let mut meta = RunMetadata::labeled("exact");
        meta.model_hash = Some(model.content_hash());
        meta.extra.insert("states".into(), serde_json::json!(space.size));
        outputs.push(Output {
            label: "exact".into(),
            kind: OutputKind::Exact,
            bundle: sol.to_bundle(model.compartments(), meta),
            clip_log: None,
        });
    }
    for s in &specs {
        if let SystemSpec::Mc(trials) = s {
            let init = match &prep.point {
                Some(c) => InitialCondition::Fixed(c.clone()),
                None => InitialCondition::Product(prep.probs.clone()),
            };
            let est = ensemble_estimate(model, &init, &prep.grid, &EnsembleOptions::new(*trials, cfg.seed))?;
            let mut meta = RunMetadata::labeled("mc");
            meta.model_hash = Some(model.content_hash());
            outputs.push(Output {
                label: "mc".into(),
                kind: OutputKind::MonteCarlo,
                bundle: est.to_bundle(model.compartments(), meta),
                clip_log: None,
            });
        }
    }
    if specs.contains(&SystemSpec::Eliminated) {
        let eliminated: Vec<Output> = outputs
            .iter()
            .filter(|o| o.kind == OutputKind::Bounding)
            .map(|o| {
                Ok(Output {
                    label: format!("{}_eliminated", o.label),
                    kind: OutputKind::Bounding,
                    bundle: eliminate_impossible(&o.bundle)?,
                    clip_log: None,
                })
            })
            .collect::<Result<_, BundleError>>()?;
        outputs.extend(eliminated);
    }
    if specs.contains(&SystemSpec::Combined) {
        let parts: Vec<&TrajectoryBundle> = outputs
            .iter()
            .filter(|o| o.kind == OutputKind::Bounding)
            .map(|o| &o.bundle)
            .collect();
        if parts.is_empty() {
            return Err(ConfigError::Invalid("combined needs at least one bounding system".into()).into());
        }
        let bundle = combine_bounds(&parts)?;
        outputs.push(Output {
            label: "combined".into(),
            kind: OutputKind::Bounding,
            bundle,
            clip_log: None,
        });
    }

    let report = build_report(cfg, &outputs)?;
    Ok((prep, outputs, report))
}

fn aggregation(a: AggregationSpec) -> Aggregation {
    match a {
        AggregationSpec::PerNode => Aggregation::PerNode,
        AggregationSpec::GraphMean => Aggregation::GraphMean,
    }
}

fn build_report(cfg: &ExperimentConfig, outputs: &[Output]) -> Result<Report, RunError> {
    let mut systems = Vec::new();
    for o in outputs {
        let mut s = SystemSummary {
            label: o.label.clone(),
            kind: o.kind,
            clip_log: o.clip_log,
            aggregate_gap: None,
            max_aggregate_gap: None,
            max_node_gap: None,
        };
        if o.kind == OutputKind::Bounding {
            let gaps = bundle_gap_stats(&o.bundle)?;
            s.aggregate_gap = Some(o.bundle.compartments().iter().cloned().zip(gaps.aggregate).collect());
            s.max_aggregate_gap = Some(gaps.max_aggregate_gap);
            s.max_node_gap = Some(gaps.per_series.iter().map(|(_, _, g)| g.max_gap).fold(0.0, f64::max));
        }
        systems.push(s);
    }

    let references: Vec<(&Output, Role, AggregationSpec)> = outputs
        .iter()
        .filter_map(|o| match o.kind {
            OutputKind::Exact => Some((o, Role::Exact, cfg.containment.exact_aggregation)),
            OutputKind::MonteCarlo => Some((o, Role::Mc, cfg.containment.mc_aggregation)),
            _ => None,
        })
        .collect();

    let mut containment = Vec::new();
    if cfg.containment.enabled {
        for o in outputs.iter().filter(|o| o.kind == OutputKind::Bounding) {
            if !cfg.containment.check.is_empty() && !cfg.containment.check.contains(&o.label) {
                continue;
            }
            for &(r, role, agg) in &references {
                let rep = containment_check(&o.bundle, &r.bundle, role, cfg.containment.tolerance, aggregation(agg))?;
                containment.push(ContainmentEntry {
                    bounds: o.label.clone(),
                    reference: r.label.clone(),
                    aggregation: agg,
                    tolerance: rep.tolerance,
                    pass: rep.pass,
                    max_violation: rep.max_violation,
                    violations: rep.series.into_iter().filter(|s| s.first_violation.is_some()).collect(),
                });
            }
        }
    }

    let mut distances = Vec::new();
    for o in outputs.iter().filter(|o| matches!(o.kind, OutputKind::Bounding | OutputKind::Point)) {
        let roles: &[Role] = if o.kind == OutputKind::Bounding { &[Role::Upper, Role::Lower] } else { &[Role::Point] };
        for &(r, ref_role, _) in &references {
            for (c, name) in o.bundle.compartments().iter().enumerate() {
                for &role in roles {
                    let (Some(a), Some(b)) = (o.bundle.graph_mean(c, role), r.bundle.graph_mean(c, ref_role)) else {
                        continue;
                    };
                    distances.push(DistanceEntry {
                        system: o.label.clone(),
                        role,
                        reference: r.label.clone(),
                        compartment: name.clone(),
                        graph_mean: d_metric(&a, &b)?,
                    });
                }
            }
        }
    }

    Ok(Report {
        label: cfg.label.clone(),
        config_hash: cfg.hash(),
        software_version: spreadbound::VERSION.to_string(),
        pass: containment.iter().all(|c| c.pass),
        systems,
        containment,
        distances,
    })
}

#[derive(Debug, Serialize)]
struct Metadata<'a> {
    software_version: &'a str,
    label: &'a str,
    config_hash: String,
    config: &'a ExperimentConfig,
    model_hash: String,
    seeds: BTreeMap<&'static str, u64>,
    rng_algorithm: &'static str,
    state_cap: usize,
    files: Vec<String>,
    runs: Vec<&'a RunMetadata>,
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), RunError> {
    let io = |source| RunError::Io {
        path: path.to_path_buf(),
        source,
    };
    let mut f = fs::File::create(path).map_err(io)?;
    f.write_all(bytes).map_err(io)
}

/// Runs the experiment and writes `traj_<label>.csv`, `plot_<label>.csv`,
/// `report.json` and `metadata.json` into `opts.out_dir`.
pub fn run_experiment(cfg: &ExperimentConfig, opts: &RunOptions) -> Result<RunOutcome, RunError> {
    let (prep, outputs, report) = compute(cfg, opts.state_cap)?;
    fs::create_dir_all(&opts.out_dir).map_err(|source| RunError::Io {
        path: opts.out_dir.clone(),
        source,
    })?;
    let mut files = Vec::new();
    for o in &outputs {
        for (prefix, agg) in [("traj", Aggregation::PerNode), ("plot", Aggregation::GraphMean)] {
            let path = opts.out_dir.join(format!("{prefix}_{}.csv", o.label));
            write_file(&path, o.bundle.to_csv_string(agg).as_bytes())?;
            files.push(path);
        }
    }
    let report_path = opts.out_dir.join("report.json");
    let mut text = serde_json::to_string_pretty(&report).expect("report serializes");
    text.push('\n');
    write_file(&report_path, text.as_bytes())?;
    files.push(report_path);

    let mut seeds = BTreeMap::new();
    seeds.insert("experiment", cfg.seed);
    if let Some(g) = prep.graph_seed {
        seeds.insert("graph", g);
    }
    if outputs.iter().any(|o| o.kind == OutputKind::MonteCarlo) {
        seeds.insert("ssa", cfg.seed);
    }
    let meta_path = opts.out_dir.join("metadata.json");
    let meta = Metadata {
        software_version: spreadbound::VERSION,
        label: &cfg.label,
        config_hash: cfg.hash(),
        config: cfg,
        model_hash: prep.model.content_hash(),
        seeds,
        rng_algorithm: rng::RNG_ALGORITHM,
        state_cap: opts.state_cap,
        files: files
            .iter()
            .filter_map(|p| p.file_name().map(|f| f.to_string_lossy().into_owned()))
            .collect(),
        runs: outputs.iter().map(|o| &o.bundle.metadata).collect(),
    };
    let mut text = serde_json::to_string_pretty(&meta).expect("metadata serializes");
    text.push('\n');
    write_file(&meta_path, text.as_bytes())?;
    files.push(meta_path);

    if !opts.quiet {
        for s in &report.systems {
            match s.max_aggregate_gap {
                Some(g) => println!("{:<28} max aggregate gap {:.6}", s.label, g),
                None => println!("{:<28} {:?}", s.label, s.kind),
            }
        }
        for c in &report.containment {
            println!(
                "containment {} in {} ({:?}): {} (max violation {:.3e})",
                c.reference,
                c.bounds,
                c.aggregation,
                if c.pass { "pass" } else { "FAIL" },
                c.max_violation
            );
        }
        println!("wrote {} files to {}", files.len(), opts.out_dir.display());
    }
    Ok(RunOutcome { report, outputs, files })
}
