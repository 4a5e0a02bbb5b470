//! Parallel drivers over the core. Output order never depends on `jobs`.

use qasrl_core::analysis::{BootstrapError, BootstrapResult, Metric, PairedBootstrap};
use qasrl_core::evaluation::{evaluate_predicate, pair_records, EvalConfig, EvalError, MatchReport};
use qasrl_core::projection::{project_record, AuditEntry, DropReason, ProjectionConfig};
use qasrl_core::providers::QuestionEmbedder;
use qasrl_core::record::Record;
use qasrl_core::Sentence;
use rayon::prelude::*;

use crate::config::ProviderSet;

/// Runs `f` on a pool of `jobs` threads (0 means one per core).
pub fn with_pool<R: Send>(jobs: usize, f: impl FnOnce() -> R + Send) -> R {
    rayon::ThreadPoolBuilder::new().num_threads(jobs).build().expect("thread pool").install(f)
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ProjectRun {
    pub records: Vec<Record>,
    pub audit: Vec<AuditEntry>,
    pub sentences: usize,
    /// Sentences stopped by a translation, detection or alignment failure.
    pub provider_failures: usize,
}

impl ProjectRun {
    /// Nothing got through and the services are the reason.
    pub fn provider_outage(&self) -> bool {
        self.sentences > 0 && self.provider_failures == self.sentences
    }
}

fn sentence_provider_failure(a: &AuditEntry) -> bool {
    matches!(
        a.reason,
        DropReason::TranslationFailed { .. } | DropReason::DetectionFailed { .. } | DropReason::AlignmentFailed { .. }
    )
}

pub fn project_corpus(sentences: &[Sentence], providers: &ProviderSet, config: &ProjectionConfig, jobs: usize) -> ProjectRun {
    let outcomes: Vec<_> = with_pool(jobs, || {
        sentences.par_iter().map(|s| project_record(s, providers.providers(), config)).collect()
    });
    let mut run = ProjectRun { sentences: sentences.len(), ..Default::default() };
    for o in outcomes {
        if o.audit.iter().any(sentence_provider_failure) {
            run.provider_failures += 1;
        }
        run.audit.extend(o.all_audit());
        run.records.extend(o.records.iter().map(Record::from_projected));
    }
    run
}

pub fn evaluate_parallel(
    predicted: &[Record],
    gold: &[Record],
    config: &EvalConfig,
    embedder: &(dyn QuestionEmbedder + Sync),
    jobs: usize,
) -> Result<Vec<MatchReport>, EvalError> {
    config.validate()?;
    let pairs = pair_records(predicted, gold)?;
    with_pool(jobs, || {
        pairs
            .par_iter()
            .map(|p| evaluate_predicate(&p.predicate_id, &p.predicted, &p.gold, config, embedder).map_err(EvalError::from))
            .collect()
    })
}

pub fn bootstrap_parallel(
    a: &[MatchReport],
    b: &[MatchReport],
    metric: Metric,
    iterations: usize,
    seed: u64,
    jobs: usize,
) -> Result<BootstrapResult, BootstrapError> {
    let boot = PairedBootstrap::new(a, b, metric, iterations, seed)?;
    let deltas: Vec<f64> = with_pool(jobs, || (0..boot.iterations()).into_par_iter().map(|i| boot.delta(i)).collect());
    Ok(boot.finish(&deltas))
}
