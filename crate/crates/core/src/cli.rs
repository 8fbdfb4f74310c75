//! Command-line front end: `run`, `top-terms` and `diffuse`.
//!
//! Exit codes: 0 on success, 2 on configuration or usage errors, 1 on
//! runtime failures (the failing stage is named on stderr).

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::corpus::{load_corpus, CorpusFormat, Dictionary, Weighting, WindowPlan, DATE_FORMAT};
use crate::factorization::NormalizedModel;
use crate::pipeline::{self, emit_reports_with_manifest, RunConfig, RunInputs, RunManifest, TOP_TERMS_HEADER};

pub const EXIT_OK: i32 = 0;
pub const EXIT_RUNTIME: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "topic-diffusion", version, about = "Topic diffusion discovery over cumulative time windows")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit every window, align topics and write the diffusion reports.
    Run(RunArgs),
    /// Print the highest-weight terms of a saved window model.
    TopTerms(TopTermsArgs),
    /// Print one term's divergence series from a finished run.
    Diffuse(DiffuseArgs),
}

#[derive(Debug, Args, Default)]
pub struct RunArgs {
    /// JSON config file; flags override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    #[arg(long)]
    pub dict: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub theta: Option<f64>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long = "max-iter")]
    pub max_iter: Option<usize>,
    #[arg(long)]
    pub tol: Option<f64>,
    /// Comma-separated cutoff dates, YYYY-MM-DD.
    #[arg(long)]
    pub windows: Option<String>,
    #[arg(long)]
    pub weighting: Option<Weighting>,
    #[arg(long = "broadness-min-topics")]
    pub broadness_min_topics: Option<usize>,
    #[arg(long = "top-n")]
    pub top_n: Option<usize>,
    #[arg(long)]
    pub threads: Option<usize>,
    /// Report progress on stderr.
    #[arg(long, short)]
    pub verbose: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Default)]
pub enum OutputFormat {
    #[default]
    Text,
    Csv,
}

#[derive(Debug, Args)]
pub struct TopTermsArgs {
    /// Model file written by `run` (under `<out>/models/`).
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub dict: PathBuf,
    /// Topic index; all topics when omitted.
    #[arg(long)]
    pub topic: Option<usize>,
    #[arg(long, short, default_value_t = 10)]
    pub n: usize,
    #[arg(long, value_enum, default_value_t = OutputFormat::Text)]
    pub format: OutputFormat,
}

#[derive(Debug, Args)]
pub struct DiffuseArgs {
    /// Output directory of a completed `run`.
    #[arg(long)]
    pub run: PathBuf,
    #[arg(long)]
    pub term: String,
}

/// Config file schema. Every field is optional; relative paths resolve
/// against the file's directory.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub corpus: Option<PathBuf>,
    pub dict: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub k: Option<usize>,
    pub theta: Option<f64>,
    pub alpha: Option<f64>,
    pub epsilon: Option<f64>,
    pub seed: Option<u64>,
    pub max_iter: Option<usize>,
    pub tol: Option<f64>,
    pub windows: Option<Vec<String>>,
    pub window_labels: Option<Vec<String>>,
    pub weighting: Option<Weighting>,
    pub broadness_min_topics: Option<usize>,
    pub top_n: Option<usize>,
    pub threads: Option<usize>,
}

/// Fully resolved `run` invocation.
#[derive(Debug, Clone, PartialEq)]
pub struct CliConfig {
    pub corpus: PathBuf,
    pub dict: PathBuf,
    pub out: PathBuf,
    pub run: RunConfig,
    pub threads: Option<usize>,
    pub verbose: bool,
}

#[derive(Debug)]
struct ConfigError(String);

fn parse_dates(list: &[String]) -> Result<Vec<NaiveDate>, ConfigError> {
    list.iter()
        .map(|s| {
            NaiveDate::parse_from_str(s.trim(), DATE_FORMAT)
                .map_err(|_| ConfigError(format!("invalid window cutoff {s:?} (expected YYYY-MM-DD)")))
        })
        .collect()
}

fn resolve(base: Option<&Path>, p: PathBuf) -> PathBuf {
    match base {
        Some(dir) if p.is_relative() => dir.join(p),
        _ => p,
    }
}

fn resolve_config(args: &RunArgs) -> Result<CliConfig, ConfigError> {
    let (file, base) = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| ConfigError(format!("--config {}: {e}", path.display())))?;
            let file: FileConfig = serde_json::from_str(&text)
                .map_err(|e| ConfigError(format!("--config {}: {e}", path.display())))?;
            (file, path.parent().map(Path::to_path_buf))
        }
        None => (FileConfig::default(), None),
    };
    let base = base.as_deref();

    let corpus = args
        .corpus
        .clone()
        .or_else(|| file.corpus.clone().map(|p| resolve(base, p)))
        .ok_or_else(|| ConfigError("missing corpus path: pass --corpus".into()))?;
    let dict = args
        .dict
        .clone()
        .or_else(|| file.dict.clone().map(|p| resolve(base, p)))
        .ok_or_else(|| ConfigError("missing dictionary path: pass --dict".into()))?;
    let out = args
        .out
        .clone()
        .or_else(|| file.out.clone().map(|p| resolve(base, p)))
        .ok_or_else(|| ConfigError("missing output directory: pass --out".into()))?;
    if !corpus.is_file() {
        return Err(ConfigError(format!("--corpus {} does not exist", corpus.display())));
    }
    if !dict.is_file() {
        return Err(ConfigError(format!("--dict {} does not exist", dict.display())));
    }
    if out.exists() && !out.is_dir() {
        return Err(ConfigError(format!("--out {} is not a directory", out.display())));
    }

    let windows = match (&args.windows, &file.windows) {
        (Some(list), _) => {
            let items: Vec<String> = list.split(',').map(str::to_string).filter(|s| !s.trim().is_empty()).collect();
            WindowPlan::from_cutoffs(parse_dates(&items)?)
        }
        (None, Some(items)) => {
            let dates = parse_dates(items)?;
            match &file.window_labels {
                Some(labels) => WindowPlan::new(dates, labels.clone()),
                None => WindowPlan::from_cutoffs(dates),
            }
        }
        (None, None) => return Err(ConfigError("missing window cutoffs: pass --windows".into())),
    }
    .map_err(|e| ConfigError(format!("--windows: {e}")))?;

    let mut run = RunConfig::new(windows);
    macro_rules! pick {
        ($target:expr, $flag:expr, $file:expr) => {
            if let Some(v) = $flag.or($file) {
                $target = v;
            }
        };
    }
    pick!(run.fit.k, args.k, file.k);
    pick!(run.fit.theta, args.theta, file.theta);
    pick!(run.fit.seed, args.seed, file.seed);
    pick!(run.fit.max_iter, args.max_iter, file.max_iter);
    pick!(run.fit.rel_tol, args.tol, file.tol);
    pick!(run.alpha, args.alpha, file.alpha);
    pick!(run.epsilon, args.epsilon, file.epsilon);
    pick!(run.weighting, args.weighting, file.weighting);
    pick!(run.broadness_min_topics, args.broadness_min_topics, file.broadness_min_topics);
    pick!(run.top_n, args.top_n, file.top_n);
    run.validate().map_err(|e| ConfigError(e.to_string()))?;

    let threads = args.threads.or(file.threads);
    if threads == Some(0) {
        return Err(ConfigError("--threads must be positive".into()));
    }
    Ok(CliConfig {
        corpus,
        dict,
        out,
        run,
        threads,
        verbose: args.verbose,
    })
}

fn cmd_run(args: &RunArgs, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let cfg = match resolve_config(args) {
        Ok(c) => c,
        Err(ConfigError(msg)) => {
            let _ = writeln!(err, "error: {msg}");
            return EXIT_CONFIG;
        }
    };
    let runtime = |err: &mut dyn Write, stage: &str, msg: String| {
        let _ = writeln!(err, "error [{stage}]: {msg}");
        EXIT_RUNTIME
    };

    let dict = match Dictionary::load(&cfg.dict) {
        Ok(d) => d,
        Err(e) => return runtime(err, "dictionary", e.to_string()),
    };
    let docs = match load_corpus(&cfg.corpus, CorpusFormat::Auto) {
        Ok(d) => d,
        Err(e) => return runtime(err, "corpus", e.to_string()),
    };
    if cfg.verbose {
        let _ = writeln!(err, "loaded {} documents, {} terms", docs.len(), dict.len());
    }

    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cfg.threads {
        builder = builder.num_threads(n);
    }
    let pool = match builder.build() {
        Ok(p) => p,
        Err(e) => return runtime(err, "threads", e.to_string()),
    };
    let result = match pool.install(|| pipeline::run(&docs, &dict, &cfg.run)) {
        Ok(r) => r,
        Err(e) => return runtime(err, e.stage(), e.to_string()),
    };

    let mut manifest = RunManifest::from_result(&result);
    manifest.inputs = Some(RunInputs {
        corpus: cfg.corpus.display().to_string(),
        dictionary: cfg.dict.display().to_string(),
    });
    let written = match emit_reports_with_manifest(&result, &cfg.out, &manifest) {
        Ok(w) => w,
        Err(e) => return runtime(err, e.stage(), e.to_string()),
    };
    let divergent = result
        .classifications
        .iter()
        .filter(|c| c.convergence == pipeline::Convergence::Divergent)
        .count();
    let _ = writeln!(
        out,
        "{} windows, {} terms analysed ({} divergent), {} excluded; {} files written to {}",
        result.windows.len(),
        result.series.len(),
        divergent,
        result.excluded.len(),
        written.len(),
        cfg.out.display()
    );
    EXIT_OK
}

fn cmd_top_terms(args: &TopTermsArgs, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let model = match NormalizedModel::load(&args.model) {
        Ok(m) => m,
        Err(e) => {
            let _ = writeln!(err, "error: --model: {e}");
            return EXIT_CONFIG;
        }
    };
    let dict = match Dictionary::load(&args.dict) {
        Ok(d) => d,
        Err(e) => {
            let _ = writeln!(err, "error: --dict: {e}");
            return EXIT_CONFIG;
        }
    };
    if dict.len() != model.num_terms() {
        let _ = writeln!(
            err,
            "error: dictionary has {} terms but the model has {}",
            dict.len(),
            model.num_terms()
        );
        return EXIT_CONFIG;
    }
    let topics: Vec<usize> = match args.topic {
        Some(t) if t >= model.k() => {
            let _ = writeln!(err, "error: --topic {t} is out of range (model has {} topics)", model.k());
            return EXIT_CONFIG;
        }
        Some(t) => vec![t],
        None => (0..model.k()).collect(),
    };

    match args.format {
        OutputFormat::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            let res = w
                .write_record(TOP_TERMS_HEADER)
                .and_then(|_| pipeline::write_top_terms_rows(&mut w, &model, dict.terms(), topics, args.n));
            match res.map_err(|e| e.to_string()).and_then(|_| w.into_inner().map_err(|e| e.to_string())) {
                Ok(bytes) => {
                    let _ = out.write_all(&bytes);
                }
                Err(e) => {
                    let _ = writeln!(err, "error [reports]: {e}");
                    return EXIT_RUNTIME;
                }
            }
        }
        OutputFormat::Text => {
            let _ = writeln!(out, "{:<12} {:>5} {:>4}  {:<32} {:>12}", "window", "topic", "rank", "term", "weight");
            for topic in topics {
                let ranked = pipeline::top_terms(&model, topic, args.n).unwrap_or_default();
                for (rank, (term, weight)) in ranked.into_iter().enumerate() {
                    let _ = writeln!(
                        out,
                        "{:<12} {:>5} {:>4}  {:<32} {:>12.6}",
                        model.window_label,
                        topic,
                        rank + 1,
                        dict.terms()[term],
                        weight
                    );
                }
            }
        }
    }
    EXIT_OK
}

#[derive(Debug, Deserialize)]
struct DiffusionRow {
    term: String,
    prefix_m: usize,
    gjs: f64,
    threshold: f64,
    significant: bool,
    broadness: String,
    convergence: String,
}

/// Up to five candidates at the smallest edit distance, if it is close.
pub fn suggest<'a>(term: &str, candidates: impl IntoIterator<Item = &'a str>) -> Vec<String> {
    let scored: Vec<(usize, &str)> = candidates
        .into_iter()
        .map(|c| (strsim::levenshtein(term, c), c))
        .collect();
    let limit = (term.chars().count() / 3).max(2);
    let Some(best) = scored.iter().map(|(d, _)| *d).min().filter(|&d| d <= limit) else {
        return Vec::new();
    };
    let mut close: Vec<&str> = scored.iter().filter(|(d, _)| *d == best).map(|(_, c)| *c).collect();
    close.sort_unstable();
    close.dedup();
    close.into_iter().take(5).map(str::to_string).collect()
}

fn cmd_diffuse(args: &DiffuseArgs, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let manifest = match RunManifest::load(&args.run.join("run_manifest.json")) {
        Ok(m) => m,
        Err(e) => {
            let _ = writeln!(err, "error: --run: {e}");
            return EXIT_CONFIG;
        }
    };
    let path = args.run.join("diffusion.csv");
    let mut reader = match csv::Reader::from_path(&path) {
        Ok(r) => r,
        Err(e) => {
            let _ = writeln!(err, "error: --run: {}: {e}", path.display());
            return EXIT_CONFIG;
        }
    };
    let mut rows: BTreeMap<String, Vec<DiffusionRow>> = BTreeMap::new();
    for row in reader.deserialize::<DiffusionRow>() {
        match row {
            Ok(r) => rows.entry(r.term.clone()).or_default().push(r),
            Err(e) => {
                let _ = writeln!(err, "error [reports]: {}: {e}", path.display());
                return EXIT_RUNTIME;
            }
        }
    }

    let term = crate::corpus::normalize_term(&args.term);
    if let Some(series) = rows.get(&term) {
        let first = &series[0];
        let _ = writeln!(out, "term: {term}");
        let _ = writeln!(out, "classification: {} {}", first.broadness, first.convergence);
        let _ = writeln!(out, "{:>8} {:>12} {:>12}  verdict", "prefix_m", "gjs", "threshold");
        for r in series {
            let verdict = if r.significant { "divergent" } else { "convergent" };
            let _ = writeln!(out, "{:>8} {:>12.6} {:>12.6}  {verdict}", r.prefix_m, r.gjs, r.threshold);
        }
        return EXIT_OK;
    }
    if let Some(ex) = manifest.excluded_terms.iter().find(|e| e.term == term) {
        let _ = writeln!(out, "term: {term}");
        let _ = writeln!(out, "excluded from diffusion analysis: {}", ex.reason);
        return EXIT_OK;
    }
    let candidates = rows
        .keys()
        .map(String::as_str)
        .chain(manifest.excluded_terms.iter().map(|e| e.term.as_str()));
    let suggestions = suggest(&term, candidates);
    if suggestions.is_empty() {
        let _ = writeln!(err, "error: unknown term {term:?}");
    } else {
        let _ = writeln!(err, "error: unknown term {term:?}; did you mean: {}", suggestions.join(", "));
    }
    EXIT_CONFIG
}

/// Parse `args` (including the program name) and execute.
pub fn run_cli<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            let rendered = e.render().to_string();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion | ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand => {
                    let _ = write!(out, "{rendered}");
                    EXIT_OK
                }
                _ => {
                    let _ = write!(err, "{rendered}");
                    EXIT_CONFIG
                }
            };
        }
    };
    match &cli.command {
        Command::Run(a) => cmd_run(a, out, err),
        Command::TopTerms(a) => cmd_top_terms(a, out, err),
        Command::Diffuse(a) => cmd_diffuse(a, out, err),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suggestions_by_edit_distance() {
        let terms = ["lasso", "group lasso", "graph", "elastic net"];
        assert_eq!(suggest("lassso", terms), ["lasso"]);
        assert!(suggest("completely different", terms).is_empty());
        assert_eq!(suggest("grap", terms), ["graph"]);
    }

    #[test]
    fn flags_override_config_file() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("c.jsonl"), "").unwrap();
        std::fs::write(dir.path().join("d.txt"), "lasso\n").unwrap();
        let file = FileConfig {
            corpus: Some("c.jsonl".into()),
            dict: Some("d.txt".into()),
            out: Some("out".into()),
            k: Some(4),
            theta: Some(0.2),
            seed: Some(5),
            windows: Some(vec!["2012-12-31".into(), "2013-12-31".into()]),
            ..FileConfig::default()
        };
        let cfg_path = dir.path().join("run.json");
        std::fs::write(&cfg_path, serde_json::to_string(&file).unwrap()).unwrap();
        let args = RunArgs {
            config: Some(cfg_path),
            k: Some(3),
            ..RunArgs::default()
        };
        let cfg = resolve_config(&args).unwrap();
        assert_eq!(cfg.run.fit.k, 3);
        assert_eq!(cfg.run.fit.theta, 0.2);
        assert_eq!(cfg.run.fit.seed, 5);
        assert_eq!(cfg.run.alpha, 0.01);
        assert_eq!(cfg.corpus, dir.path().join("c.jsonl"));
        assert_eq!(cfg.run.windows.len(), 2);

        let args = RunArgs {
            config: args.config.clone(),
            windows: Some("2011-12-31,2012-12-31,2013-12-31".into()),
            ..RunArgs::default()
        };
        assert_eq!(resolve_config(&args).unwrap().run.windows.len(), 3);
    }

    #[test]
    fn config_errors_name_the_flag() {
        let err = resolve_config(&RunArgs {
            corpus: Some("/nonexistent".into()),
            ..RunArgs::default()
        })
        .unwrap_err();
        assert!(err.0.contains("--dict"), "{}", err.0);

        let dir = tempfile::tempdir().unwrap();
        let c = dir.path().join("c.jsonl");
        std::fs::write(&c, "").unwrap();
        let base = RunArgs {
            corpus: Some(c.clone()),
            dict: Some(dir.path().join("missing.txt")),
            out: Some(dir.path().join("out")),
            windows: Some("2012-12-31,2013-12-31".into()),
            ..RunArgs::default()
        };
        assert!(resolve_config(&base).unwrap_err().0.contains("--dict"));
        let base = RunArgs { dict: Some(c.clone()), ..base };
        assert!(resolve_config(&base).is_ok());
        let bad = RunArgs { theta: Some(2.0), ..base };
        assert!(resolve_config(&bad).is_err());
    }
}
