//! Dictionary matching: multi-word terms, longest match first, punctuation
//! at token edges ignored. Then a tf-idf matrix over the matched counts.

use chrono::NaiveDate;
use topic_diffusion::corpus::{build_matrix, tokenize, Content, Dictionary, Document, Weighting};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dict = Dictionary::new(["support vector", "support vector machine", "kernel", "lasso", "sparse"])?;
    let date = NaiveDate::from_ymd_opt(2020, 1, 1).expect("valid date");
    let doc = |id: &str, text: &str| Document {
        id: id.into(),
        date,
        content: Content::Text(text.into()),
    };
    let docs = [
        doc("a", "Support Vector Machine rocks; the kernel trick, too."),
        doc("b", "A support vector is a point. Lasso is sparse!"),
        doc("c", "sparse lasso, sparse kernel"),
    ];

    for d in &docs {
        let counts = tokenize(d, &dict);
        let named: Vec<String> = counts.iter().map(|(&i, n)| format!("{}={n}", dict.terms()[i])).collect();
        println!("{}: {}", d.id, named.join(", "));
    }

    let refs: Vec<&Document> = docs.iter().collect();
    for weighting in [Weighting::Raw, Weighting::Tfidf] {
        let m = build_matrix(&refs, &dict, weighting, "all")?;
        println!("\n{weighting:?}\n{:.3}", m.values);
    }
    Ok(())
}
