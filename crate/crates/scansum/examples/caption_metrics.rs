//! Caption scoring with BLEU-1..4 and ROUGE-L.
//!
//! Run: `cargo run --example caption_metrics`

use scansum::caption_eval::{score_corpus, score_pair, tokenize};

fn main() -> scansum::Result<()> {
    let pairs = [
        (
            "this image shows the fetal abdomen",
            "this image shows the fetal abdomen",
        ),
        (
            "standard plane for head circumference measurement",
            "head circumference standard plane with calipers",
        ),
        (
            "four chamber view of the heart",
            "profile view of the fetal face",
        ),
    ];

    for (candidate, reference) in &pairs {
        let score = score_pair(&tokenize(candidate), &tokenize(reference));
        println!("candidate: {candidate}");
        println!("reference: {reference}");
        println!(
            "  BLEU-1 {:.3}  BLEU-2 {:.3}  BLEU-3 {:.3}  BLEU-4 {:.3}  ROUGE-L {:.3}",
            score.bleu[0], score.bleu[1], score.bleu[2], score.bleu[3], score.rouge_l
        );
    }

    let tokenized: Vec<(Vec<String>, Vec<String>)> = pairs
        .iter()
        .map(|(c, r)| (tokenize(c), tokenize(r)))
        .collect();
    let corpus = score_corpus(&tokenized)?;
    println!(
        "\ncorpus of {}: BLEU-1 {:.3} ± {:.3}, ROUGE-L {:.3} ± {:.3}",
        corpus.count,
        corpus.bleu_mean[0],
        corpus.bleu_std[0],
        corpus.rouge_l_mean,
        corpus.rouge_l_std
    );
    Ok(())
}
