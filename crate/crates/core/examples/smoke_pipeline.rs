//! Library-level run over the shipped smoke corpus: per-window posteriors of
//! one term, its prefix series, and the top terms of each aligned topic.
//!
//! ```text
//! cargo run -p topic-diffusion --example smoke_pipeline [term]
//! ```

use std::path::Path;

use topic_diffusion::corpus::{load_corpus, CorpusFormat, Dictionary, WindowPlan};
use topic_diffusion::pipeline::{self, RunConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let term = std::env::args().nth(1).unwrap_or_else(|| "deep learning".into());
    let data = Path::new(env!("CARGO_MANIFEST_DIR")).join("data");
    let docs = load_corpus(&data.join("smoke_corpus.jsonl"), CorpusFormat::Auto)?;
    let dict = Dictionary::load(&data.join("smoke_dict.txt"))?;
    let mut config = RunConfig::new(WindowPlan::parse_cutoffs("2019-12-31,2020-12-31,2021-12-31")?);
    config.fit.k = 3;
    config.fit.seed = 11;
    let result = pipeline::run(&docs, &dict, &config)?;

    let idx = dict.index_of(&term).ok_or_else(|| format!("{term:?} is not in the dictionary"))?;
    println!("posterior of {term:?} over aligned topics:");
    for window in &result.posteriors {
        let post = &window[idx];
        match &post.dist {
            Some(d) => println!("  {:<12} {:.3?}", post.window_label, d),
            None => println!("  {:<12} unsupported", post.window_label),
        }
    }
    if let Some((series, class)) = result.series.iter().zip(&result.classifications).find(|(s, _)| s.term == idx) {
        for r in &series.records {
            println!("  prefix {}: gjs {:.6} threshold {:.6}", r.prefix_m, r.gjs, r.threshold);
        }
        println!("  -> {} {}", class.broadness, class.convergence);
    }
    for ex in &result.excluded {
        println!("excluded {:?}: {}", ex.term, ex.reason);
    }

    let last = result.models.last().expect("at least one window");
    for topic in 0..last.k() {
        let top = pipeline::top_terms(last, topic, 5).unwrap_or_default();
        let names: Vec<&str> = top.iter().map(|&(i, _)| dict.terms()[i].as_str()).collect();
        println!("{} topic {topic}: {}", last.window_label, names.join(", "));
    }
    Ok(())
}
