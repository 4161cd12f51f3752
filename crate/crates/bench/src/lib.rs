//! Shared fixtures for the benchmarks under benches/.

use charie::corpus::{generate_corpus, Corpus, CorpusConfig};
use charie::encoder::{CharVocabulary, EncodedCandidate, EncoderConfig};
use charie::parser::ConstraintSet;
use charie::pipeline::{prepare_document, Resources};
use charie::tsdb::DEFAULT_TAU;

/// A small default-noise corpus and in-memory resources built from it.
pub fn fixture(num_documents: usize) -> (Corpus, Resources) {
    let corpus = generate_corpus(&CorpusConfig {
        num_documents,
        ..CorpusConfig::default()
    })
    .expect("valid corpus config");
    let res = Resources {
        symbols: corpus.symbols.clone(),
        constraints: ConstraintSet::from_symbols(&corpus.symbols, charie::parser::DEFAULT_MAX_PAIR_DISTANCE),
        store: corpus.store.clone(),
        vocab: CharVocabulary::default(),
        encoder: EncoderConfig::default(),
        tau: DEFAULT_TAU,
    };
    (corpus, res)
}

/// Labeled encodings of every candidate in the corpus.
pub fn encoded(corpus: &Corpus, res: &Resources) -> Vec<EncodedCandidate> {
    corpus
        .documents
        .iter()
        .flat_map(|d| prepare_document(&d.to_document(), res, false).expect("encodable").encoded)
        .filter(|e| e.label.is_some())
        .collect()
}
