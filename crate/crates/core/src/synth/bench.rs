//! Paired corpora for comparing representations: a labeled evaluation corpus
//! and a disjoint unlabeled training corpus drawn from the same state map.

use serde::{Deserialize, Serialize};

use super::{file_id, generate, SynthConfig, SynthCorpus, DOMINANT_LOW_CODE};
use crate::error::{Error, Result};
use crate::eval::{build_sessions, classify_sessions, ClassificationReport, FoldPlan, RawFeatures};
use crate::exec::Exec;
use crate::model::{train, Checkpoint, TrainConfig, TupleSet, Variant};
use crate::sampling::{sample_triplet_tuples, SamplerConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BenchConfig {
    /// Labeled evaluation corpus.
    #[serde(flatten)]
    pub corpus: SynthConfig,
    pub train_n_files: usize,
    pub train_file_duration_s: f64,
    /// Global index of the first training file.
    pub train_file_offset: usize,
    /// Trailing training files held out for early stopping.
    pub val_n_files: usize,
    #[serde(skip)]
    pub sampler: SamplerConfig,
    #[serde(skip)]
    pub train: TrainConfig,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            corpus: SynthConfig::default(),
            train_n_files: 200,
            train_file_duration_s: 45.0,
            train_file_offset: 1000,
            val_n_files: 2,
            sampler: SamplerConfig::default(),
            train: TrainConfig {
                max_epochs: 12,
                ..TrainConfig::default()
            },
        }
    }
}

impl BenchConfig {
    /// Same seed for corpus generation, sampling and training.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.corpus.seed = seed;
        self.sampler.seed = seed;
        self.train.seed = seed;
        self
    }

    pub fn train_corpus_config(&self) -> SynthConfig {
        SynthConfig {
            n_files: self.train_n_files,
            file_duration_s: self.train_file_duration_s,
            file_offset: self.train_file_offset,
            ..self.corpus.clone()
        }
    }

    pub fn val_sources(&self) -> Vec<String> {
        let end = self.train_file_offset + self.train_n_files;
        (end.saturating_sub(self.val_n_files)..end).map(file_id).collect()
    }

    pub fn validate(&self) -> Result<()> {
        self.corpus.validate()?;
        self.sampler.validate()?;
        self.train.validate()?;
        if self.train_n_files > 0 {
            self.train_corpus_config().validate()?;
            if self.val_n_files >= self.train_n_files {
                return Err(Error::Config("val_n_files must be below train_n_files".into()));
            }
        }
        Ok(())
    }

    /// Evaluation corpus and training corpus; the latter is empty when
    /// `train_n_files` is 0.
    pub fn generate(&self, exec: &Exec) -> Result<(SynthCorpus, SynthCorpus)> {
        self.validate()?;
        let train = if self.train_n_files == 0 {
            SynthCorpus {
                config: self.train_corpus_config(),
                files: Vec::new(),
            }
        } else {
            generate(&self.train_corpus_config(), exec)?
        };
        Ok((generate(&self.corpus, exec)?, train))
    }
}

/// Session accuracies of raw features and two learned representations.
#[derive(Debug, Clone, PartialEq)]
pub struct OrderingRun {
    pub raw: ClassificationReport,
    pub dcn: ClassificationReport,
    pub te_dcn: ClassificationReport,
    pub dcn_checkpoint: Checkpoint,
    pub te_dcn_checkpoint: Checkpoint,
}

/// Trains DCN and TE-DCN on the unlabeled corpus and classifies the labeled
/// corpus with each, plus raw features, under leave-one-group-out.
pub fn run_ordering(bench: &BenchConfig, exec: &Exec) -> Result<OrderingRun> {
    let (eval, unlabeled) = bench.generate(exec)?;
    let sessions = build_sessions(eval.sequences(), &eval.label_rows())?;
    let plan = FoldPlan::leave_one_group_out(&sessions);
    let raw = classify_sessions(&sessions, DOMINANT_LOW_CODE, &RawFeatures, &plan, exec)?;

    let files = unlabeled.sequences();
    let tuples = sample_triplet_tuples(&files, &bench.sampler, exec)?;
    let (train_set, val_set) = TupleSet::split(&files, &tuples.tuples, &bench.val_sources())?;
    let dcn_checkpoint = train(&train_set, &val_set, &bench.train, Variant::Dcn, exec)?;
    let te_dcn_checkpoint = train(&train_set, &val_set, &bench.train, Variant::TeDcn, exec)?;
    let dcn = classify_sessions(&sessions, DOMINANT_LOW_CODE, &dcn_checkpoint, &plan, exec)?;
    let te_dcn = classify_sessions(&sessions, DOMINANT_LOW_CODE, &te_dcn_checkpoint, &plan, exec)?;
    Ok(OrderingRun {
        raw,
        dcn,
        te_dcn,
        dcn_checkpoint,
        te_dcn_checkpoint,
    })
}
