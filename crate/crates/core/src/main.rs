// SPDX-License-Identifier: MIT OR Apache-2.0

use std::fs::File;
use std::io::{self, BufRead, BufReader, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use ascprobe::dataset::{dataset_to_string, stratified_sample_with, validate_balance, Corpus, Strata};
use ascprobe::error::{Error, Result};
use ascprobe::patterns::{bundled_patterns, parse_pattern, scan_corpus, Dialect};
use ascprobe::report::{
    self, compute_fdr, compute_gdv, compute_probes, compute_projections, emit_family, encode_or_load, load_records,
    new_report, render_figures, run_full_analysis, BackendKind, Family, OutputFormat, RunConfig,
};
use ascprobe::{write_cache, ConstructionLabel, SyntacticRole};

#[derive(Parser)]
#[command(name = "ascprobe", version, about = "Layer-wise probing of argument structure constructions")]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct GlobalArgs {
    /// Flat `key = value` config file; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Dataset file (JSON lines); defaults to the bundled sample.
    #[arg(long, global = true)]
    dataset: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Layer list such as `all`, `4`, `0-12` or `1,3,5-7`.
    #[arg(long, global = true)]
    layers: Option<String>,
    /// Comma-separated roles, e.g. `cls,verb,obj`.
    #[arg(long, global = true)]
    roles: Option<String>,
    #[arg(long, global = true, value_enum)]
    backend: Option<BackendArg>,
    #[arg(long, global = true)]
    weights_dir: Option<PathBuf>,
    #[arg(long, global = true)]
    cache_dir: Option<PathBuf>,
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    /// Comma-separated output formats (`csv`, `json`).
    #[arg(long, global = true)]
    format: Option<String>,
    #[arg(long, global = true)]
    folds: Option<usize>,
    #[arg(long, global = true)]
    perplexity: Option<f64>,
    #[arg(long, global = true)]
    max_gap: Option<usize>,
}

#[derive(Clone, Copy, ValueEnum)]
enum BackendArg {
    Reference,
    Synthetic,
}

#[derive(Subcommand)]
enum Command {
    /// Retrieve construction candidates from a vertical tagged corpus.
    Scan {
        /// `word<TAB>tag` corpus file, `-` for stdin.
        input: PathBuf,
        #[arg(long, default_value = "bnc")]
        dialect: String,
        /// Extra pattern as `label=query`; replaces the bundled set when given.
        #[arg(long = "pattern")]
        patterns: Vec<String>,
        /// Corpus name recorded on candidates (`bnc`, `coca`, `other`).
        #[arg(long)]
        corpus: Option<String>,
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
    /// Draw a stratified random sample from the dataset.
    Sample {
        /// Records per stratum.
        #[arg(long, short)]
        n: usize,
        /// Stratify by (label, corpus) instead of label alone.
        #[arg(long)]
        by_corpus: bool,
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
    /// Check every record and the label balance.
    Validate {
        /// Exit with a validation error when labels are unbalanced.
        #[arg(long)]
        require_balanced: bool,
    },
    /// Encode the dataset and write the extraction cache.
    Encode,
    /// Classifier-token GDV per layer.
    Gdv,
    /// Linear probe accuracy per layer and role.
    Probe,
    /// Incoming-attention FDR per layer, head and role.
    Fdr,
    /// MDS and t-SNE projections of classifier-token embeddings.
    Project,
    /// Full pipeline: every analysis plus report.json.
    Report,
    /// Render PNG figures from plot data in the output directory.
    Render,
}

fn build_config(g: &GlobalArgs) -> Result<RunConfig> {
    let mut c = match &g.config {
        Some(path) => RunConfig::from_file(path)?,
        None => RunConfig::default(),
    };
    if let Some(v) = &g.dataset {
        c.dataset = Some(v.clone());
    }
    if let Some(v) = g.seed {
        c.seed = v;
    }
    if let Some(v) = &g.layers {
        c.set("layers", v)?;
    }
    if let Some(v) = &g.roles {
        c.set("roles", v)?;
    }
    if let Some(v) = g.backend {
        c.backend = match v {
            BackendArg::Reference => BackendKind::Reference,
            BackendArg::Synthetic => BackendKind::Synthetic,
        };
    }
    if let Some(v) = &g.weights_dir {
        c.weights_dir = Some(v.clone());
    }
    if let Some(v) = &g.cache_dir {
        c.cache_dir = Some(v.clone());
    }
    if let Some(v) = &g.out_dir {
        c.out_dir = v.clone();
    }
    if let Some(v) = &g.format {
        c.set("formats", v)?;
    }
    if let Some(v) = g.folds {
        c.folds = v;
    }
    if let Some(v) = g.perplexity {
        c.perplexity = v;
    }
    if let Some(v) = g.max_gap {
        c.max_gap = v;
    }
    Ok(c)
}

fn open_output(path: &Option<PathBuf>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(File::create(p).map_err(|e| Error::Io {
            path: p.clone(),
            source: e,
        })?),
        None => Box::new(io::stdout().lock()),
    })
}

fn write_out(path: &Option<PathBuf>, text: &str) -> Result<()> {
    let target = path.clone().unwrap_or_else(|| PathBuf::from("<stdout>"));
    open_output(path)?
        .write_all(text.as_bytes())
        .map_err(|e| Error::Io { path: target, source: e })
}

fn scan(
    config: &RunConfig,
    input: &PathBuf,
    dialect: &str,
    patterns: &[String],
    corpus: Option<&str>,
    output: &Option<PathBuf>,
) -> Result<()> {
    let dialect: Dialect = dialect.parse().map_err(Error::Config)?;
    let corpus: Corpus = match corpus {
        Some(c) => c.parse().map_err(|e: String| Error::Config(e))?,
        None => match dialect {
            Dialect::BncC5 => Corpus::Bnc,
            Dialect::Coca => Corpus::Coca,
        },
    };
    let patterns = if patterns.is_empty() {
        bundled_patterns(dialect)
    } else {
        patterns
            .iter()
            .map(|p| {
                let (label, query) = p
                    .split_once('=')
                    .ok_or_else(|| Error::Config(format!("--pattern `{p}` must be `label=query`")))?;
                let label: ConstructionLabel = label.trim().parse().map_err(|e: String| Error::Config(e))?;
                Ok(parse_pattern(query.trim(), dialect, label)?)
            })
            .collect::<Result<Vec<_>>>()?
    };
    let reader: Box<dyn BufRead> = if input.as_os_str() == "-" {
        Box::new(BufReader::new(io::stdin()))
    } else {
        Box::new(BufReader::new(File::open(input).map_err(|e| Error::Io {
            path: input.clone(),
            source: e,
        })?))
    };
    let mut out = String::new();
    let mut count = 0;
    for record in scan_corpus(reader, &patterns, config.max_gap, corpus) {
        out.push_str(&dataset_to_string(&[record?]));
        count += 1;
    }
    write_out(output, &out)?;
    eprintln!("{count} candidate(s)");
    Ok(())
}

fn summarize_probe(grid: &ascprobe::probing::ProbeGrid, roles: &[SyntacticRole]) {
    let mut layers: Vec<usize> = grid.cells.iter().filter_map(|c| c.layer).collect();
    layers.sort_unstable();
    layers.dedup();
    print!("layer");
    for r in roles {
        print!("\t{r}");
    }
    println!();
    for l in layers {
        print!("{l}");
        for &r in roles {
            match grid.get(l, r) {
                Some(c) => print!("\t{:.3}", c.mean_accuracy),
                None => print!("\t-"),
            }
        }
        println!();
    }
    for a in &grid.absent {
        eprintln!("absent: layer {} role {}: {}", a.layer, a.role, a.reason);
    }
}

fn run(cli: Cli) -> Result<()> {
    let config = build_config(&cli.global)?;
    match &cli.command {
        Command::Scan {
            input,
            dialect,
            patterns,
            corpus,
            output,
        } => scan(&config, input, dialect, patterns, corpus.as_deref(), output),
        Command::Sample { n, by_corpus, output } => {
            let records = load_records(&config)?;
            let strata = if *by_corpus { Strata::LabelAndCorpus } else { Strata::Label };
            let sample = stratified_sample_with(&records, *n, config.seed, strata)?;
            write_out(output, &dataset_to_string(&sample))
        }
        Command::Validate { require_balanced } => {
            let records = load_records(&config)?;
            let balance = validate_balance(&records);
            println!("{} records", records.len());
            for (label, n) in &balance.counts {
                println!("{label}\t{n}");
            }
            for ((label, corpus), n) in &balance.per_corpus_counts {
                println!("{label}/{corpus}\t{n}");
            }
            println!("balanced: {}", balance.balanced);
            if *require_balanced && !balance.balanced {
                return Err(Error::Config("label counts are unbalanced".into()));
            }
            Ok(())
        }
        Command::Encode => {
            let dir = config
                .cache_dir
                .clone()
                .ok_or_else(|| Error::Config("encode needs --cache-dir".into()))?;
            let records = load_records(&config)?;
            let (backend, tokenizer) = report::build_backend(&config)?;
            let corpus = ascprobe::encode_dataset(&records, backend.as_ref(), &tokenizer)?;
            write_cache(&corpus, &dir)?;
            println!("encoded {} sentences with {} into {}", corpus.entries.len(), corpus.backend_id, dir.display());
            Ok(())
        }
        Command::Gdv | Command::Probe | Command::Fdr | Command::Project => {
            config.validate()?;
            let records = load_records(&config)?;
            let corpus = encode_or_load(&config, &records)?;
            let mut rep = new_report(&config, &records, &corpus)?;
            let layers = rep.metadata.layers.clone();
            let family = match cli.command {
                Command::Gdv => {
                    rep.gdv_by_layer = compute_gdv(&corpus, &layers)?;
                    for (l, v) in &rep.gdv_by_layer {
                        println!("{l}\t{v:.6}");
                    }
                    Family::GdvCurve
                }
                Command::Probe => {
                    rep.probe_grid = compute_probes(&corpus, &config, &layers)?;
                    summarize_probe(&rep.probe_grid, &config.roles);
                    Family::ProbeCurves
                }
                Command::Fdr => {
                    rep.fdr = compute_fdr(&corpus, &config, &layers)?;
                    for ((l, r), v) in rep.fdr.head_means() {
                        println!("{l}\t{r}\t{v:.6}");
                    }
                    Family::FdrHeatmap
                }
                _ => {
                    rep.projections = compute_projections(&corpus, &config, &layers)?;
                    for p in &rep.projections {
                        println!("{}\t{}\tquality {:.6}", p.layer, p.result.method, p.result.quality);
                        for w in &p.result.warnings {
                            eprintln!("warning: layer {} {}: {w}", p.layer, p.result.method);
                        }
                    }
                    Family::ProjectionPoints
                }
            };
            for &format in &config.formats {
                let path = emit_family(&rep, family, format, &config.out_dir)?;
                eprintln!("wrote {}", path.display());
            }
            Ok(())
        }
        Command::Report => {
            let rep = run_full_analysis(&config)?;
            println!("backend {}", rep.metadata.backend_id);
            println!("config digest {}", rep.metadata.config_digest);
            println!("layer\tgdv");
            for (l, v) in &rep.gdv_by_layer {
                println!("{l}\t{v:.6}");
            }
            summarize_probe(&rep.probe_grid, &config.roles);
            eprintln!("outputs in {}", config.out_dir.display());
            Ok(())
        }
        Command::Render => {
            if !config.formats.contains(&OutputFormat::Csv) {
                return Err(Error::Config("render reads CSV plot data".into()));
            }
            for p in render_figures(&config.out_dir)? {
                println!("{}", p.display());
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
