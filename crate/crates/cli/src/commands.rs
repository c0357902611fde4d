use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};

use dpnn_core::dataio::{
    generate_synthetic, impute, read_csv, read_labels, write_csv, write_labels, Dataset,
    FeatureSchema, ImputeStrategy, SynthConfig, TreatmentSet,
};
use dpnn_core::eval::{
    format_metrics_table, improvement, loso, loso_all, run_cv, CvOptions, CvResult, LosoOutcome,
    MetricsRecord,
};
use dpnn_core::interpret::{
    adjusted_rand_index, assign_clusters, cluster_treatment_table, dunn_test, feature_histograms,
    fit_cart, kruskal_wallis, patient_feature_similarity, patient_latent_similarity, pca_dataset,
    rank_treatments, tree_feature_frequency, CartNode, CartParams, ClusterProfile, DunnTable,
    KruskalWallis, PcaOptions, RankedTreatment,
};
use dpnn_core::model::{
    model_from_json, model_to_json_with, DpnnModel, Hyperparams, LossBreakdown,
};
use dpnn_core::trainer::{grid_search, train, GridSpec};

use crate::args::*;
use crate::output::{sha256_hex, Outputs, Provenance};
use crate::{CliError, Context, CONFIG_DIR_ENV};

/// Cohort size of the reference synthetic profile.
pub const DEFAULT_SYNTH_N: usize = 5438;
const SERTRALINE_STUDY: &str = "SUND";
const SERTRALINE: &str = "sertraline";

pub fn dispatch(cmd: &Command) -> Result<Outputs, CliError> {
    let echo = serde_json::to_value(cmd)?;
    match cmd {
        Command::Synth(a) => synth(a, echo),
        Command::Train(a) => train_cmd(a, echo),
        Command::Cv(a) => cv(a, echo),
        Command::Loso(a) => loso_cmd(a, echo),
        Command::Clusters(a) => clusters(a, echo),
        Command::Report(a) => report(a, echo),
        Command::Tree(a) => tree(a, echo),
        Command::Stats(a) => stats(a, echo),
        Command::Pca(a) => pca(a, echo),
        Command::Gridsearch(a) => gridsearch(a, echo),
    }
}

fn read_bytes(path: &Path) -> Result<Vec<u8>, CliError> {
    std::fs::read(path)
        .map_err(dpnn_core::Error::from)
        .context(|| format!("cannot read `{}`", path.display()))
}

/// Relative config paths that do not exist are looked up in the directory
/// named by the config-dir environment variable.
pub fn resolve_config_path(path: &Path) -> PathBuf {
    if path.is_relative() && !path.exists() {
        if let Some(dir) = std::env::var_os(CONFIG_DIR_ENV) {
            let candidate = Path::new(&dir).join(path);
            if candidate.exists() {
                return candidate;
            }
        }
    }
    path.to_path_buf()
}

/// A parsed JSON config plus a record of where it came from.
fn load_json_config<T: serde::de::DeserializeOwned>(path: &Path) -> Result<(T, Value), CliError> {
    let resolved = resolve_config_path(path);
    let bytes = read_bytes(&resolved)?;
    let parsed = serde_json::from_slice(&bytes)
        .map_err(dpnn_core::Error::from)
        .context(|| format!("invalid config `{}`", resolved.display()))?;
    Ok((
        parsed,
        json!({ "path": resolved, "sha256": sha256_hex(&bytes) }),
    ))
}

fn load_hyper(path: Option<&Path>, seed: Option<u64>) -> Result<(Hyperparams, Value), CliError> {
    let (mut h, source) = match path {
        Some(p) => load_json_config::<Hyperparams>(p)?,
        None => (Hyperparams::default(), Value::Null),
    };
    if let Some(s) = seed {
        h.seed = s;
    }
    h.validate().context(|| "invalid hyperparameters".into())?;
    Ok((h, source))
}

struct Loaded {
    dataset: Dataset,
    summary: Value,
}

/// Reads the dataset, drops the sertraline arm of the SUND study unless
/// asked to keep it, and fills missing values.
fn load_data(a: &DataArgs) -> Result<Loaded, CliError> {
    let bytes = read_bytes(&a.data)?;
    let raw = read_csv(
        bytes.as_slice(),
        &FeatureSchema::standard(),
        &TreatmentSet::standard(),
    )
    .context(|| format!("cannot parse `{}`", a.data.display()))?;
    let sertraline = raw.treatments.index_of(SERTRALINE);
    let before = raw.len();
    let kept = if a.include_sertraline_arm {
        raw
    } else {
        raw.filter(|r| !(r.study == SERTRALINE_STUDY && Some(r.treatment) == sertraline))
    };
    let excluded = before - kept.len();
    let missing: usize = kept
        .records
        .iter()
        .map(|r| r.features.iter().filter(|v| v.is_none()).count())
        .sum();
    let dataset = if missing > 0 {
        impute(&kept, ImputeStrategy::ByKind).context(|| "imputation failed".into())?
    } else {
        kept
    };
    if dataset.is_empty() {
        return Err(CliError::Input(format!(
            "`{}` has no usable records",
            a.data.display()
        )));
    }
    Ok(Loaded {
        summary: json!({
            "path": a.data,
            "sha256": sha256_hex(&bytes),
            "records_read": before,
            "records_excluded": excluded,
            "values_imputed": missing,
        }),
        dataset,
    })
}

fn load_model_file(path: &Path) -> Result<(DpnnModel, Value), CliError> {
    let bytes = read_bytes(path)?;
    let text = String::from_utf8(bytes.clone())
        .map_err(|_| CliError::Input(format!("`{}` is not UTF-8", path.display())))?;
    let model =
        model_from_json(&text).context(|| format!("cannot load model `{}`", path.display()))?;
    Ok((model, json!({ "path": path, "sha256": sha256_hex(&bytes) })))
}

/// Cluster labels aligned with the dataset's record order.
fn load_labels_for(path: &Path, dataset: &Dataset) -> Result<(Vec<usize>, Value), CliError> {
    let bytes = read_bytes(path)?;
    let pairs =
        read_labels(bytes.as_slice()).context(|| format!("cannot parse `{}`", path.display()))?;
    let map: HashMap<&str, usize> = pairs.iter().map(|(id, c)| (id.as_str(), *c)).collect();
    let labels = dataset
        .records
        .iter()
        .map(|r| {
            map.get(r.patient_id.as_str()).copied().ok_or_else(|| {
                CliError::Input(format!(
                    "`{}` has no label for patient `{}`",
                    path.display(),
                    r.patient_id
                ))
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok((
        labels,
        json!({ "path": path, "sha256": sha256_hex(&bytes) }),
    ))
}

fn check_dataset_matches(model: &DpnnModel, dataset: &Dataset) -> Result<(), CliError> {
    if model.schema != dataset.schema || model.treatments != dataset.treatments {
        return Err(CliError::Input(
            "model schema or treatment set differs from the dataset".into(),
        ));
    }
    Ok(())
}

fn synth(a: &SynthArgs, echo: Value) -> Result<Outputs, CliError> {
    let (mut cfg, source) = match &a.config {
        Some(p) => load_json_config::<SynthConfig>(p)?,
        None => (
            SynthConfig::reference_with_separation(
                a.n.unwrap_or(DEFAULT_SYNTH_N),
                a.common.seed,
                a.separation.unwrap_or(1.0),
            ),
            Value::Null,
        ),
    };
    cfg.seed = a.common.seed;
    let (dataset, planted) =
        generate_synthetic(&cfg).context(|| "synthetic generation failed".into())?;
    let prov = Provenance::new(
        Some(a.common.seed),
        json!({ "command": echo, "config_source": source, "synth": cfg }),
    );
    let mut out = Outputs::default();
    let mut buf = Vec::new();
    write_csv(&dataset, &mut buf)?;
    out.csv(&a.out, &prov, buf);
    if let Some(path) = &a.labels {
        let ids: Vec<String> = dataset
            .records
            .iter()
            .map(|r| r.patient_id.clone())
            .collect();
        let mut buf = Vec::new();
        write_labels(&ids, &planted, &mut buf)?;
        out.csv(path, &prov, buf);
    }
    Ok(out)
}

#[derive(Serialize)]
struct TraceOutput<'a> {
    epochs_run: usize,
    steps: u64,
    trace: &'a [LossBreakdown],
    validation_trace: &'a [LossBreakdown],
}

fn train_cmd(a: &TrainArgs, echo: Value) -> Result<Outputs, CliError> {
    let data = load_data(&a.data)?;
    let (h, source) = load_hyper(a.hyper.as_deref(), Some(a.common.seed))?;
    let report = train(&data.dataset, &h).context(|| "training failed".into())?;
    let prov = Provenance::new(
        Some(h.seed),
        json!({ "command": echo, "data": data.summary, "hyper_source": source, "hyperparams": h }),
    );
    let mut out = Outputs::default();
    let mut text = model_to_json_with(&report.model, Some(&prov.to_value()))?;
    text.push('\n');
    out.add(&a.out, text.into_bytes());
    if let Some(path) = &a.trace {
        let trace = TraceOutput {
            epochs_run: report.epochs_run(),
            steps: report.steps,
            trace: &report.trace,
            validation_trace: &report.validation_trace,
        };
        out.json(path, &prov, &trace)?;
    }
    Ok(out)
}

#[derive(Serialize)]
struct Improvement {
    baseline: f64,
    rri_mean: Option<f64>,
    absolute: Option<f64>,
    relative: Option<f64>,
}

#[derive(Serialize)]
struct CvOutput<'a> {
    k: usize,
    repeats: usize,
    samples: usize,
    improvement: Improvement,
    #[serde(flatten)]
    cv: &'a CvResult,
}

fn cv(a: &CvArgs, echo: Value) -> Result<Outputs, CliError> {
    let data = load_data(&a.data)?;
    let (h, source) = load_hyper(a.hyper.as_deref(), Some(a.common.seed))?;
    let opts = CvOptions {
        k: a.k,
        repeats: a.repeats,
        seed: a.common.seed,
        jobs: a.common.jobs,
        threshold: a.threshold,
    };
    let result = run_cv(&data.dataset, &h, &opts).context(|| "cross-validation failed".into())?;
    let rri_mean = result.summary.rri_rate.mean;
    let gain = rri_mean
        .map(|r| improvement(r, a.baseline))
        .transpose()
        .context(|| "bad baseline".into())?;
    let output = CvOutput {
        k: a.k,
        repeats: a.repeats,
        samples: result.folds.len(),
        improvement: Improvement {
            baseline: a.baseline,
            rri_mean,
            absolute: gain.map(|g| g.0),
            relative: gain.map(|g| g.1),
        },
        cv: &result,
    };
    let prov = Provenance::new(
        Some(a.common.seed),
        json!({ "command": echo, "data": data.summary, "hyper_source": source, "hyperparams": h }),
    );
    let mut out = Outputs::default();
    out.json(&a.out, &prov, &output)?;
    if let Some(path) = &a.table {
        let mut text = format_metrics_table(&[("DPNN".to_string(), result.summary.clone())]);
        match gain {
            Some((abs, rel)) => {
                let _ = writeln!(
                    text,
                    "\nRemission rate when matched: {:.3} vs baseline {:.3} ({:+.1} points, {:+.1}% relative)",
                    rri_mean.unwrap_or_default(),
                    a.baseline,
                    abs * 100.0,
                    rel * 100.0
                );
            }
            None => {
                let _ = writeln!(
                    text,
                    "\nNo test patient received their recommended treatment."
                );
            }
        }
        out.text(path, &prov, &text);
    }
    Ok(out)
}

fn loso_cmd(a: &LosoArgs, echo: Value) -> Result<Outputs, CliError> {
    let data = load_data(&a.data)?;
    let (h, source) = load_hyper(a.hyper.as_deref(), Some(a.common.seed))?;
    let outcomes: Vec<LosoOutcome> = match &a.study {
        Some(study) => {
            let record: MetricsRecord = loso(&data.dataset, &h, study, a.threshold)
                .context(|| format!("holding out `{study}` failed"))?;
            vec![LosoOutcome {
                study: study.clone(),
                test_size: record.n,
                record: Some(record),
                error: None,
            }]
        }
        None => loso_all(&data.dataset, &h, a.threshold, a.common.jobs)
            .context(|| "leave-one-study-out failed".into())?,
    };
    let prov = Provenance::new(
        Some(h.seed),
        json!({ "command": echo, "data": data.summary, "hyper_source": source, "hyperparams": h }),
    );
    let mut out = Outputs::default();
    out.json(&a.out, &prov, &outcomes)?;
    Ok(out)
}

#[derive(Serialize)]
struct ClusterReport<'a> {
    n_clusters: usize,
    sizes: Vec<usize>,
    /// `prototype_outcomes[j][t]`: predicted remission at prototype `j`.
    prototype_outcomes: Vec<Vec<f64>>,
    treatments: &'a [String],
    rankings: Vec<Option<Vec<RankedTreatment>>>,
    profiles: &'a [ClusterProfile],
    #[serde(skip_serializing_if = "Option::is_none")]
    adjusted_rand_index: Option<f64>,
}

fn cluster_sizes(labels: &[usize], n: usize) -> Vec<usize> {
    let mut sizes = vec![0; n];
    for &c in labels {
        sizes[c] += 1;
    }
    sizes
}

fn ranking_table(profiles: &[ClusterProfile], rankings: &[Option<Vec<RankedTreatment>>]) -> String {
    let mut text = String::new();
    for (p, ranks) in profiles.iter().zip(rankings) {
        let rate = p
            .remission_rate
            .map_or_else(|| "n/a".to_string(), |r| format!("{r:.3}"));
        let _ = writeln!(
            text,
            "Cluster {} (n={}, remission {rate})",
            p.cluster, p.size
        );
        let Some(ranks) = ranks else {
            let _ = writeln!(text, "  no rated treatments\n");
            continue;
        };
        let width = ranks
            .iter()
            .map(|r| r.treatment.len())
            .max()
            .unwrap_or(0)
            .max("Treatment".len());
        let _ = writeln!(text, "  {:<width$}  {:>5}  {:>5}", "Treatment", "Rate", "N");
        for r in ranks {
            let flag = if r.low_confidence {
                "  low confidence"
            } else {
                ""
            };
            let _ = writeln!(
                text,
                "  {:<width$}  {:>5.3}  {:>5}{flag}",
                r.treatment, r.rate, r.n
            );
        }
        text.push('\n');
    }
    text
}

fn clusters(a: &ClustersArgs, echo: Value) -> Result<Outputs, CliError> {
    let data = load_data(&a.data)?;
    let (model, model_src) = load_model_file(&a.model)?;
    check_dataset_matches(&model, &data.dataset)?;
    let ds = &data.dataset;
    let m = model.prototype_count();
    let labels = assign_clusters(&model, ds).context(|| "cluster assignment failed".into())?;
    let profiles = cluster_treatment_table(ds, &labels, m, a.min_cell)
        .context(|| "cluster table failed".into())?;
    let rankings: Vec<Option<Vec<RankedTreatment>>> =
        profiles.iter().map(|p| rank_treatments(p).ok()).collect();
    let (ari, planted_src) = match &a.planted {
        Some(path) => {
            let (planted, src) = load_labels_for(path, ds)?;
            let ari = adjusted_rand_index(&labels, &planted)
                .context(|| "adjusted Rand index failed".into())?;
            (Some(ari), src)
        }
        None => (None, Value::Null),
    };
    let q = model.prototype_outcome_matrix();
    let report = ClusterReport {
        n_clusters: m,
        sizes: cluster_sizes(&labels, m),
        prototype_outcomes: (0..q.rows()).map(|j| q.row(j).to_vec()).collect(),
        treatments: ds.treatments.names(),
        rankings: rankings.clone(),
        profiles: &profiles,
        adjusted_rand_index: ari,
    };
    let prov = Provenance::new(
        Some(model.hyper.seed),
        json!({ "command": echo, "data": data.summary, "model": model_src, "planted": planted_src }),
    );
    let mut out = Outputs::default();
    out.json(&a.out, &prov, &report)?;
    if let Some(path) = &a.labels_out {
        let ids: Vec<String> = ds.records.iter().map(|r| r.patient_id.clone()).collect();
        let mut buf = Vec::new();
        write_labels(&ids, &labels, &mut buf)?;
        out.csv(path, &prov, buf);
    }
    if let Some(path) = &a.histograms {
        let hist = feature_histograms(ds, &labels, m).context(|| "histograms failed".into())?;
        out.json(path, &prov, &hist)?;
    }
    if let Some(path) = &a.table {
        out.text(path, &prov, &ranking_table(&profiles, &rankings));
    }
    Ok(out)
}

#[derive(Serialize)]
struct FeatureSimilarity {
    feature: String,
    value: f64,
    /// Indexed by cluster.
    similarity: Vec<f64>,
}

#[derive(Serialize)]
struct TreatmentProbability {
    treatment: String,
    probability: f64,
}

#[derive(Serialize)]
struct PatientReport {
    patient_id: String,
    study: String,
    received: String,
    cluster: usize,
    latent_similarity: Vec<f64>,
    predicted_remission: Vec<TreatmentProbability>,
    recommended: String,
    features: Vec<FeatureSimilarity>,
}

fn report(a: &ReportArgs, echo: Value) -> Result<Outputs, CliError> {
    let data = load_data(&a.data)?;
    let (model, model_src) = load_model_file(&a.model)?;
    check_dataset_matches(&model, &data.dataset)?;
    let ds = &data.dataset;
    let record = ds
        .records
        .iter()
        .find(|r| r.patient_id == a.patient)
        .ok_or_else(|| CliError::Input(format!("patient `{}` not found", a.patient)))?;
    let x = record.values()?;
    let m = model.prototype_count();
    let labels = assign_clusters(&model, ds).context(|| "cluster assignment failed".into())?;
    let profiles =
        cluster_treatment_table(ds, &labels, m, 0).context(|| "cluster table failed".into())?;
    let latent =
        patient_latent_similarity(&model, &x).context(|| "latent similarity failed".into())?;
    let per_feature =
        patient_feature_similarity(&x, &profiles).context(|| "feature similarity failed".into())?;
    let probs = model.predict_raw(&x)?;
    let best = dpnn_core::eval::argmax(&probs);
    let patient_idx = ds
        .records
        .iter()
        .position(|r| r.patient_id == a.patient)
        .unwrap_or_default();
    let result = PatientReport {
        patient_id: record.patient_id.clone(),
        study: record.study.clone(),
        received: ds.treatments.name(record.treatment).to_string(),
        cluster: labels[patient_idx],
        latent_similarity: latent,
        predicted_remission: probs
            .iter()
            .enumerate()
            .map(|(t, &p)| TreatmentProbability {
                treatment: ds.treatments.name(t).to_string(),
                probability: p,
            })
            .collect(),
        recommended: ds.treatments.name(best).to_string(),
        features: ds
            .schema
            .names()
            .zip(&x)
            .zip(per_feature)
            .map(|((name, &value), similarity)| FeatureSimilarity {
                feature: name.to_string(),
                value,
                similarity,
            })
            .collect(),
    };
    let prov = Provenance::new(
        Some(model.hyper.seed),
        json!({ "command": echo, "data": data.summary, "model": model_src }),
    );
    let mut out = Outputs::default();
    out.json(&a.out, &prov, &result)?;
    Ok(out)
}

/// Cluster labels from either a model or a labels file.
fn labels_from(
    model: Option<&Path>,
    clusters: Option<&Path>,
    dataset: &Dataset,
) -> Result<(Vec<usize>, usize, Option<u64>, Value), CliError> {
    if let Some(path) = model {
        let (model, src) = load_model_file(path)?;
        check_dataset_matches(&model, dataset)?;
        let labels =
            assign_clusters(&model, dataset).context(|| "cluster assignment failed".into())?;
        return Ok((
            labels,
            model.prototype_count(),
            Some(model.hyper.seed),
            json!({ "model": src }),
        ));
    }
    let path = clusters
        .ok_or_else(|| CliError::Usage("either --model or --clusters is required".into()))?;
    let (labels, src) = load_labels_for(path, dataset)?;
    let n = labels.iter().max().map_or(0, |&c| c + 1);
    Ok((labels, n, None, json!({ "clusters": src })))
}

#[derive(Serialize)]
struct TreeOutput<'a> {
    params: &'a CartParams,
    n_classes: usize,
    feature_names: &'a [String],
    training_accuracy: f64,
    tree: &'a CartNode,
}

fn tree(a: &TreeArgs, echo: Value) -> Result<Outputs, CliError> {
    let data = load_data(&a.data)?;
    let ds = &data.dataset;
    let cart = CartParams {
        max_depth: a.max_depth,
        min_leaf: a.min_leaf,
    };
    let names: Vec<String> = ds.schema.names().map(str::to_string).collect();
    let mut out = Outputs::default();
    if let Some(runs) = a.runs {
        let (h, source) = load_hyper(a.hyper.as_deref(), Some(a.common.seed))?;
        let freq = tree_feature_frequency(ds, &h, runs, &cart, a.common.jobs)
            .context(|| "tree stability analysis failed".into())?;
        let prov = Provenance::new(
            Some(h.seed),
            json!({ "command": echo, "data": data.summary, "hyper_source": source, "hyperparams": h }),
        );
        out.json(&a.out, &prov, &freq)?;
        return Ok(out);
    }
    let (labels, n_classes, seed, src) =
        labels_from(a.model.as_deref(), a.clusters.as_deref(), ds)?;
    let x = ds.feature_rows()?;
    let (node, accuracy) = fit_cart(&x, &labels, &cart).context(|| "tree fitting failed".into())?;
    let prov = Provenance::new(
        seed,
        json!({ "command": echo, "data": data.summary, "labels": src }),
    );
    let result = TreeOutput {
        params: &cart,
        n_classes,
        feature_names: &names,
        training_accuracy: accuracy,
        tree: &node,
    };
    out.json(&a.out, &prov, &result)?;
    if let Some(path) = &a.text {
        let text = format!("training accuracy {accuracy:.4}\n{}", node.render(&names));
        out.text(path, &prov, &text);
    }
    Ok(out)
}

#[derive(Serialize)]
struct FeatureTest {
    feature: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    kruskal_wallis: Option<KruskalWallis>,
    /// Group indices refer to `clusters`.
    #[serde(skip_serializing_if = "Option::is_none")]
    dunn: Option<DunnTable>,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
}

#[derive(Serialize)]
struct StatsOutput {
    clusters: Vec<usize>,
    sizes: Vec<usize>,
    features: Vec<FeatureTest>,
}

fn stats(a: &StatsArgs, echo: Value) -> Result<Outputs, CliError> {
    let data = load_data(&a.data)?;
    let ds = &data.dataset;
    let (labels, n, seed, src) = labels_from(a.model.as_deref(), a.clusters.as_deref(), ds)?;
    let sizes = cluster_sizes(&labels, n);
    let present: Vec<usize> = (0..n).filter(|&c| sizes[c] > 0).collect();
    let features = ds
        .schema
        .features()
        .iter()
        .enumerate()
        .map(|(f, desc)| {
            let groups: Vec<Vec<f64>> = present
                .iter()
                .map(|&c| {
                    ds.records
                        .iter()
                        .zip(&labels)
                        .filter(|(_, &l)| l == c)
                        .filter_map(|(r, _)| r.features[f])
                        .collect()
                })
                .collect();
            match kruskal_wallis(&groups).and_then(|kw| Ok((kw, dunn_test(&groups)?))) {
                Ok((kw, dunn)) => FeatureTest {
                    feature: desc.name.clone(),
                    kruskal_wallis: Some(kw),
                    dunn: Some(dunn),
                    error: None,
                },
                Err(e) => FeatureTest {
                    feature: desc.name.clone(),
                    kruskal_wallis: None,
                    dunn: None,
                    error: Some(e.to_string()),
                },
            }
        })
        .collect();
    let prov = Provenance::new(
        seed,
        json!({ "command": echo, "data": data.summary, "labels": src }),
    );
    let mut out = Outputs::default();
    out.json(
        &a.out,
        &prov,
        &StatsOutput {
            clusters: present,
            sizes,
            features,
        },
    )?;
    Ok(out)
}

fn pca(a: &PcaArgs, echo: Value) -> Result<Outputs, CliError> {
    let data = load_data(&a.data)?;
    let opts = PcaOptions {
        standardize: !a.no_standardize,
        include_race: a.include_race,
        include_remission: !a.exclude_remission,
    };
    let result = pca_dataset(&data.dataset, &opts).context(|| "PCA failed".into())?;
    let prov = Provenance::new(
        None,
        json!({ "command": echo, "data": data.summary, "options": opts }),
    );
    let mut out = Outputs::default();
    out.json(&a.out, &prov, &result)?;
    Ok(out)
}

fn gridsearch(a: &GridArgs, echo: Value) -> Result<Outputs, CliError> {
    let data = load_data(&a.data)?;
    let (grid, source) = load_json_config::<GridSpec>(&a.grid)?;
    let result = grid_search(&data.dataset, &grid, a.common.seed, a.common.jobs)
        .context(|| "grid search failed".into())?;
    let prov = Provenance::new(
        Some(a.common.seed),
        json!({ "command": echo, "data": data.summary, "grid_source": source, "grid": grid }),
    );
    let mut out = Outputs::default();
    out.json(&a.out, &prov, &result)?;
    Ok(out)
}
