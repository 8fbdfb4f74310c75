//! Regenerate the small text corpus shipped under `data/`.
//!
//! Three topics over three yearly windows. `transformer` only appears in the
//! final year, so a run reports it as excluded for insufficient support.
//!
//! ```text
//! cargo run -p topic-diffusion --example write_smoke_corpus [dir]
//! ```

use std::fs;
use std::io::Write;
use std::path::PathBuf;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const TOPICS: [&[&str]; 3] = [
    &[
        "lasso",
        "ridge regression",
        "variable selection",
        "penalty",
        "sparsity",
        "coefficient",
        "cross validation",
        "least squares",
        "shrinkage",
        "elastic net",
        "regularization path",
    ],
    &[
        "support vector machine",
        "kernel",
        "margin",
        "hinge loss",
        "feature space",
        "dual problem",
        "slack variable",
        "classifier",
        "gaussian kernel",
        "hyperplane",
        "support vector",
    ],
    &[
        "neural network",
        "deep learning",
        "backpropagation",
        "gradient descent",
        "dropout",
        "hidden layer",
        "activation",
        "convolution",
        "learning rate",
        "embedding",
        "batch normalization",
    ],
];

const SHARED: &[&str] = &["model", "data", "method"];
const LATE: &str = "transformer";
const FILLER: &[&str] = &["we", "study", "the", "of", "a", "and", "with", "for", "on", "new"];

fn main() -> std::io::Result<()> {
    let dir = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data"));
    fs::create_dir_all(&dir)?;
    let mut rng = ChaCha8Rng::seed_from_u64(7);

    let mut corpus = fs::File::create(dir.join("smoke_corpus.jsonl"))?;
    for (y, year) in (2019..=2021).enumerate() {
        for j in 0..24 {
            let topic = j % TOPICS.len();
            let mut words: Vec<&str> = Vec::new();
            for _ in 0..30 {
                let roll: f64 = rng.random();
                let w = if roll < 0.6 {
                    *TOPICS[topic].choose(&mut rng).expect("non-empty")
                } else if roll < 0.7 {
                    *SHARED.choose(&mut rng).expect("non-empty")
                } else {
                    *FILLER.choose(&mut rng).expect("non-empty")
                };
                words.push(w);
            }
            if y == 2 && topic == 2 {
                words.push(LATE);
            }
            let month = 1 + (j % 12);
            let record = serde_json::json!({
                "id": format!("{year}-{j:02}"),
                "date": format!("{year}-{month:02}-15"),
                "text": format!("{}.", words.join(" ")),
            });
            writeln!(corpus, "{record}")?;
        }
    }

    let mut dict = fs::File::create(dir.join("smoke_dict.txt"))?;
    for term in TOPICS.iter().flat_map(|t| t.iter()).chain(SHARED).chain([&LATE]) {
        writeln!(dict, "{term}")?;
    }

    let config = serde_json::json!({
        "corpus": "smoke_corpus.jsonl",
        "dict": "smoke_dict.txt",
        "k": 3,
        "theta": 0.4,
        "alpha": 0.01,
        "seed": 11,
        "windows": ["2019-12-31", "2020-12-31", "2021-12-31"],
        "window_labels": ["y2019", "y2020", "y2021"],
        "weighting": "tfidf",
        "top_n": 10
    });
    fs::write(dir.join("smoke_config.json"), format!("{}\n", serde_json::to_string_pretty(&config)?))?;
    println!("wrote smoke corpus to {}", dir.display());
    Ok(())
}
