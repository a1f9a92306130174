//! Multi-threaded rule matching and embedding.

use std::num::NonZeroUsize;
use std::thread;

use hydra_core::embed::EmbedError;
use hydra_core::heuristics::match_rules;
use hydra_core::pipeline::{Features, PipelineError};
use hydra_core::{Corpus, Embedding, EmbeddingProvider, HeuristicVector, RuleSet};

pub fn default_jobs() -> usize {
    thread::available_parallelism().map_or(1, NonZeroUsize::get)
}

/// Applies `f` to every item on up to `jobs` scoped threads, keeping input order.
pub fn par_map<T: Sync, U: Send>(items: &[T], jobs: usize, f: impl Fn(&T) -> U + Sync) -> Vec<U> {
    let jobs = jobs.clamp(1, items.len().max(1));
    if jobs == 1 {
        return items.iter().map(f).collect();
    }
    let chunk = items.len().div_ceil(jobs);
    let f = &f;
    thread::scope(|s| {
        let handles: Vec<_> = items
            .chunks(chunk)
            .map(|c| s.spawn(move || c.iter().map(f).collect::<Vec<U>>()))
            .collect();
        handles
            .into_iter()
            .flat_map(|h| h.join().expect("worker thread panicked"))
            .collect()
    })
}

/// Same result as the core crate's sequential `extract_features`.
pub fn extract_features_parallel(
    corpus: &Corpus,
    rules: &RuleSet,
    provider: Option<&dyn EmbeddingProvider>,
    jobs: usize,
) -> Result<Features, PipelineError> {
    let records = corpus.records();
    let heuristics: Vec<HeuristicVector> = par_map(records, jobs, |r| match_rules(&r.normalized_source, rules));
    let embeddings = match provider {
        Some(p) => {
            let out: Vec<Result<Embedding, EmbedError>> = par_map(records, jobs, |r| p.embed(r));
            Some(out.into_iter().collect::<Result<Vec<_>, _>>()?)
        }
        None => None,
    };
    Ok(Features {
        ids: records.iter().map(|r| r.id.clone()).collect(),
        projects: records.iter().map(|r| r.project.clone()).collect(),
        heuristics,
        embeddings,
        // Read after embedding: remote providers learn their model name from responses.
        provider_id: provider.map(|p| p.provider_id()),
    })
}
