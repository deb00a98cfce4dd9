// SPDX-License-Identifier: MIT OR Apache-2.0

//! The full layer sweep and its outputs.
//!
//! [`run_full_analysis`] encodes the dataset (or reads a cache), then
//! computes per layer the classifier-token GDV, the probe grid, the
//! attention FDR grid and the projections. Results go to `out_dir` as
//! `report.json`, `config.txt` and one plot-data file per figure family and
//! format:
//!
//! | file                | columns                                               |
//! |---------------------|-------------------------------------------------------|
//! | `gdv_curve`         | layer, gdv                                            |
//! | `probe_curves`      | layer, role, mean_accuracy, fold_accuracies, chance   |
//! | `fdr_heatmap`       | layer, head, role, mean_fdr                           |
//! | `projection_points` | layer, method, x, y, label, sentence_id               |
//!
//! Files are first written to a staging directory and moved into place only
//! when every stage succeeded. A failed run leaves its partial outputs under
//! `out_dir/quarantine/` instead.

mod config;
mod render;

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::alignment::WordPieceTokenizer;
use crate::dataset::{bundled_sample, dataset_to_string, load_dataset, ConstructionLabel, SentenceRecord, SyntacticRole};
use crate::error::{CacheError, Error, Result};
use crate::extraction::{
    encode_dataset, gather_role_vectors, read_cache, write_cache, BertBackend, EncodedCorpus, EncoderBackend,
    EncoderSpec, MissingRole, SyntheticBackend,
};
use crate::metrics::{fdr_sweep, gdv, FdrSweep};
use crate::probing::{probe_sweep, ProbeConfig, ProbeGrid};
use crate::projection::{mds_project, tsne_project, ProjectionMethod, ProjectionResult, TsneConfig};
use crate::util::{par_map, sha256_hex, write_atomic};

pub use config::{parse_layers, BackendKind, OutputFormat, RunConfig};
pub use render::render_figures;

/// Chance accuracy of the four-way construction task.
pub const CHANCE: f64 = 0.25;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportMetadata {
    pub encoder: EncoderSpec,
    pub backend_id: String,
    pub dataset_digest: String,
    pub n_sentences: usize,
    pub config: RunConfig,
    pub config_digest: String,
    pub layers: Vec<usize>,
    pub attention_layers: Vec<usize>,
    pub version: String,
}

/// A projection of the classifier-token embeddings at one layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerProjection {
    pub layer: usize,
    pub labels: Vec<ConstructionLabel>,
    pub sentence_ids: Vec<String>,
    pub result: ProjectionResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerMetricReport {
    pub metadata: ReportMetadata,
    pub gdv_by_layer: BTreeMap<usize, f64>,
    pub probe_grid: ProbeGrid,
    pub fdr: FdrSweep,
    pub projections: Vec<LayerProjection>,
}

/// The plot-data families, in emission order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    GdvCurve,
    ProbeCurves,
    FdrHeatmap,
    ProjectionPoints,
}

impl Family {
    pub const ALL: [Self; 4] = [Self::GdvCurve, Self::ProbeCurves, Self::FdrHeatmap, Self::ProjectionPoints];

    pub fn name(self) -> &'static str {
        match self {
            Self::GdvCurve => "gdv_curve",
            Self::ProbeCurves => "probe_curves",
            Self::FdrHeatmap => "fdr_heatmap",
            Self::ProjectionPoints => "projection_points",
        }
    }

    pub fn columns(self) -> &'static [&'static str] {
        match self {
            Self::GdvCurve => &["layer", "gdv"],
            Self::ProbeCurves => &["layer", "role", "mean_accuracy", "fold_accuracies", "chance"],
            Self::FdrHeatmap => &["layer", "head", "role", "mean_fdr"],
            Self::ProjectionPoints => &["layer", "method", "x", "y", "label", "sentence_id"],
        }
    }
}

/// Records named by the config, or the bundled sample.
pub fn load_records(config: &RunConfig) -> Result<Vec<SentenceRecord>> {
    match &config.dataset {
        Some(path) => load_dataset(path),
        None => Ok(bundled_sample()),
    }
}

/// Instantiate the configured backend and its tokenizer.
pub fn build_backend(config: &RunConfig) -> Result<(Box<dyn EncoderBackend>, WordPieceTokenizer)> {
    match config.backend {
        BackendKind::Synthetic => Ok((
            Box::new(SyntheticBackend::new(config.seed)),
            WordPieceTokenizer::bundled(),
        )),
        BackendKind::Reference => {
            let dir = config
                .weights_dir
                .as_ref()
                .ok_or_else(|| Error::Config("the reference backend needs weights_dir".into()))?;
            let backend = BertBackend::load(dir)?;
            let tokenizer = backend.tokenizer()?;
            Ok((Box::new(backend), tokenizer))
        }
    }
}

/// Read the configured cache if it exists and matches the records,
/// otherwise encode and (when a cache directory is set) write it.
pub fn encode_or_load(config: &RunConfig, records: &[SentenceRecord]) -> Result<EncodedCorpus> {
    let (backend, tokenizer) = build_backend(config)?;
    if let Some(dir) = &config.cache_dir {
        if dir.join("manifest.json").exists() {
            let corpus = read_cache(dir)?;
            if corpus.backend_id != backend.id() {
                return Err(CacheError::Manifest(format!(
                    "{} was built by `{}`, the config selects `{}`",
                    dir.display(),
                    corpus.backend_id,
                    backend.id()
                ))
                .into());
            }
            let cached: Vec<&str> = corpus.entries.iter().map(|e| e.encoded.sentence_id.as_str()).collect();
            let wanted: Vec<&str> = records.iter().map(|r| r.id.as_str()).collect();
            if cached != wanted {
                return Err(CacheError::Manifest(format!(
                    "{} holds a different sentence list than the dataset",
                    dir.display()
                ))
                .into());
            }
            return Ok(corpus);
        }
    }
    let corpus = encode_dataset(records, backend.as_ref(), &tokenizer)?;
    if let Some(dir) = &config.cache_dir {
        write_cache(&corpus, dir)?;
    }
    Ok(corpus)
}

/// The embedding layers a config selects, checked against the encoder.
pub fn resolve_layers(config: &RunConfig, spec: EncoderSpec) -> Result<Vec<usize>> {
    match &config.layers {
        None => Ok((0..=spec.num_layers).collect()),
        Some(layers) => {
            if let Some(&l) = layers.iter().find(|&&l| l > spec.num_layers) {
                return Err(Error::Config(format!(
                    "layer {l} out of range 0..={}",
                    spec.num_layers
                )));
            }
            Ok(layers.clone())
        }
    }
}

pub fn compute_gdv(corpus: &EncodedCorpus, layers: &[usize]) -> Result<BTreeMap<usize, f64>> {
    let values = par_map(layers, |&layer| {
        let m = gather_role_vectors(corpus, SyntacticRole::Cls, layer, MissingRole::Error)?;
        gdv(&m.features, &m.label_ids()).map(|v| (layer, v))
    });
    values.into_iter().collect()
}

pub fn probe_config(config: &RunConfig) -> ProbeConfig {
    ProbeConfig {
        folds: config.folds,
        seed: config.seed,
        ..ProbeConfig::default()
    }
}

pub fn compute_probes(corpus: &EncodedCorpus, config: &RunConfig, layers: &[usize]) -> Result<ProbeGrid> {
    probe_sweep(corpus, &config.roles, layers, &probe_config(config))
}

pub fn compute_fdr(corpus: &EncodedCorpus, config: &RunConfig, layers: &[usize]) -> Result<FdrSweep> {
    let attention: Vec<usize> = layers.iter().copied().filter(|&l| l >= 1).collect();
    let heads: Vec<usize> = (0..corpus.spec.num_heads).collect();
    fdr_sweep(corpus, &config.roles, &attention, &heads)
}

pub fn compute_projections(
    corpus: &EncodedCorpus,
    config: &RunConfig,
    layers: &[usize],
) -> Result<Vec<LayerProjection>> {
    let cells: Vec<(usize, ProjectionMethod)> = layers
        .iter()
        .flat_map(|&l| config.projections.iter().map(move |&m| (l, m)))
        .collect();
    let tsne = TsneConfig {
        perplexity: config.perplexity,
        seed: config.seed,
        iterations: config.tsne_iterations,
        ..TsneConfig::default()
    };
    let results = par_map(&cells, |&(layer, method)| -> Result<LayerProjection> {
        let m = gather_role_vectors(corpus, SyntacticRole::Cls, layer, MissingRole::Error)?;
        let result = match method {
            ProjectionMethod::Mds => mds_project(&m.features)?,
            ProjectionMethod::Tsne => tsne_project(&m.features, &tsne)?,
        };
        Ok(LayerProjection {
            layer,
            labels: m.labels,
            sentence_ids: m.sentence_ids,
            result,
        })
    });
    results.into_iter().collect()
}

fn family_rows(report: &LayerMetricReport, family: Family) -> Vec<Vec<Value>> {
    match family {
        Family::GdvCurve => report
            .gdv_by_layer
            .iter()
            .map(|(l, v)| vec![json!(l), json!(v)])
            .collect(),
        Family::ProbeCurves => report
            .probe_grid
            .cells
            .iter()
            .map(|c| {
                vec![
                    json!(c.layer),
                    json!(c.role),
                    json!(c.mean_accuracy),
                    json!(c.fold_accuracies),
                    json!(CHANCE),
                ]
            })
            .collect(),
        Family::FdrHeatmap => report
            .fdr
            .results
            .iter()
            .map(|r| vec![json!(r.layer), json!(r.head), json!(r.role), json!(r.mean_over_pairs)])
            .collect(),
        Family::ProjectionPoints => report
            .projections
            .iter()
            .flat_map(|p| {
                (0..p.labels.len()).map(move |i| {
                    vec![
                        json!(p.layer),
                        json!(p.result.method),
                        json!(p.result.coords[(i, 0)]),
                        json!(p.result.coords[(i, 1)]),
                        json!(p.labels[i]),
                        json!(p.sentence_ids[i]),
                    ]
                })
            })
            .collect(),
    }
}

fn csv_cell(v: &Value) -> String {
    match v {
        Value::Null => String::new(),
        Value::String(s) => s.clone(),
        Value::Array(items) => items.iter().map(csv_cell).collect::<Vec<_>>().join(";"),
        other => other.to_string(),
    }
}

fn render_family(report: &LayerMetricReport, family: Family, format: OutputFormat) -> Vec<u8> {
    let rows = family_rows(report, family);
    let digest = &report.metadata.config_digest;
    match format {
        OutputFormat::Csv => {
            let mut out = format!("# config_digest: {digest}\n").into_bytes();
            {
                let mut w = csv::Writer::from_writer(&mut out);
                w.write_record(family.columns()).expect("in-memory write");
                for row in &rows {
                    w.write_record(row.iter().map(csv_cell)).expect("in-memory write");
                }
                w.flush().expect("in-memory write");
            }
            out
        }
        OutputFormat::Json => {
            let objects: Vec<Value> = rows
                .into_iter()
                .map(|row| {
                    let map = family.columns().iter().map(|c| c.to_string()).zip(row).collect();
                    Value::Object(map)
                })
                .collect();
            let doc = json!({
                "config_digest": digest,
                "family": family.name(),
                "columns": family.columns(),
                "rows": objects,
            });
            let mut bytes = serde_json::to_vec_pretty(&doc).expect("json serializes");
            bytes.push(b'\n');
            bytes
        }
    }
}

/// Write one family's plot data to `dir` in `format`.
pub fn emit_family(report: &LayerMetricReport, family: Family, format: OutputFormat, dir: &Path) -> Result<PathBuf> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let path = dir.join(format!("{}.{}", family.name(), format.extension()));
    write_atomic(&path, &render_family(report, family, format))?;
    Ok(path)
}

/// Write every plot-data family in `format` to `dir`.
pub fn emit_plot_data(report: &LayerMetricReport, format: OutputFormat, dir: &Path) -> Result<Vec<PathBuf>> {
    Family::ALL
        .iter()
        .map(|&f| emit_family(report, f, format, dir))
        .collect()
}

/// Write `report.json` and `config.txt` to `dir`.
pub fn write_report_json(report: &LayerMetricReport, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut json = serde_json::to_vec_pretty(report).expect("report serializes");
    json.push(b'\n');
    write_atomic(&dir.join("report.json"), &json)?;
    write_atomic(&dir.join("config.txt"), report.metadata.config.to_kv_string().as_bytes())
}

/// An empty report for `corpus` under `config`, ready to be filled stage by
/// stage.
pub fn new_report(config: &RunConfig, records: &[SentenceRecord], corpus: &EncodedCorpus) -> Result<LayerMetricReport> {
    let layers = resolve_layers(config, corpus.spec)?;
    Ok(LayerMetricReport {
        metadata: ReportMetadata {
            encoder: corpus.spec,
            backend_id: corpus.backend_id.clone(),
            dataset_digest: sha256_hex(dataset_to_string(records).as_bytes()),
            n_sentences: records.len(),
            config: config.clone(),
            config_digest: config.digest(),
            attention_layers: layers.iter().copied().filter(|&l| l >= 1).collect(),
            layers,
            version: env!("CARGO_PKG_VERSION").to_string(),
        },
        gdv_by_layer: BTreeMap::new(),
        probe_grid: ProbeGrid::default(),
        fdr: FdrSweep::default(),
        projections: Vec::new(),
    })
}

fn emit_stage(report: &LayerMetricReport, family: Family, formats: &[OutputFormat], dir: &Path) -> Result<()> {
    for &format in formats {
        emit_family(report, family, format, dir)?;
    }
    Ok(())
}

fn run_stages(config: &RunConfig, staging: &Path) -> Result<LayerMetricReport> {
    let records = load_records(config).map_err(|e| e.in_stage("load"))?;
    let corpus = encode_or_load(config, &records).map_err(|e| e.in_stage("encode"))?;
    let mut report = new_report(config, &records, &corpus).map_err(|e| e.in_stage("encode"))?;
    let layers = report.metadata.layers.clone();

    report.gdv_by_layer = compute_gdv(&corpus, &layers).map_err(|e| e.in_stage("gdv"))?;
    emit_stage(&report, Family::GdvCurve, &config.formats, staging).map_err(|e| e.in_stage("gdv"))?;

    report.probe_grid = compute_probes(&corpus, config, &layers).map_err(|e| e.in_stage("probe"))?;
    emit_stage(&report, Family::ProbeCurves, &config.formats, staging).map_err(|e| e.in_stage("probe"))?;

    report.fdr = compute_fdr(&corpus, config, &layers).map_err(|e| e.in_stage("fdr"))?;
    emit_stage(&report, Family::FdrHeatmap, &config.formats, staging).map_err(|e| e.in_stage("fdr"))?;

    report.projections = compute_projections(&corpus, config, &layers).map_err(|e| e.in_stage("project"))?;
    emit_stage(&report, Family::ProjectionPoints, &config.formats, staging).map_err(|e| e.in_stage("project"))?;

    write_report_json(&report, staging).map_err(|e| e.in_stage("report"))?;
    Ok(report)
}

fn unique_dir(parent: &Path, stem: &str) -> PathBuf {
    (0..)
        .map(|n| parent.join(if n == 0 { stem.to_string() } else { format!("{stem}-{n}") }))
        .find(|p| !p.exists())
        .expect("an unused name exists")
}

/// Move every file of `from` into `to`, replacing existing files.
fn promote(from: &Path, to: &Path) -> Result<()> {
    let entries = fs::read_dir(from).map_err(|e| Error::io(from, e))?;
    let mut names: Vec<_> = entries
        .map(|e| e.map(|e| e.file_name()).map_err(|err| Error::io(from, err)))
        .collect::<Result<_>>()?;
    names.sort();
    for name in names {
        let target = to.join(&name);
        fs::rename(from.join(&name), &target).map_err(|e| Error::io(&target, e))?;
    }
    fs::remove_dir(from).map_err(|e| Error::io(from, e))
}

/// Run every analysis stage and write all outputs to `config.out_dir`.
///
/// On failure nothing in `out_dir` is replaced: whatever the run produced
/// is moved to `out_dir/quarantine/<digest>[-n]/` together with an
/// `ERROR.txt`, and the stage-tagged error is returned.
pub fn run_full_analysis(config: &RunConfig) -> Result<LayerMetricReport> {
    config.validate()?;
    let out = &config.out_dir;
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let digest = config.digest();
    let staging = unique_dir(out, &format!(".staging-{}", &digest[..12]));
    fs::create_dir_all(&staging).map_err(|e| Error::io(&staging, e))?;

    match run_stages(config, &staging) {
        Ok(report) => {
            promote(&staging, out)?;
            Ok(report)
        }
        Err(err) => {
            let quarantine_root = out.join("quarantine");
            fs::create_dir_all(&quarantine_root).map_err(|e| Error::io(&quarantine_root, e))?;
            let target = unique_dir(&quarantine_root, &digest[..12]);
            fs::rename(&staging, &target).map_err(|e| Error::io(&target, e))?;
            write_atomic(&target.join("ERROR.txt"), format!("{err}\n").as_bytes())?;
            write_atomic(&target.join("config.txt"), config.to_kv_string().as_bytes())?;
            Err(err)
        }
    }
}
