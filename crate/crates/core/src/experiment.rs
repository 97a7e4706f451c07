//! Per-subject train/test protocol and the with/without-augmentation grid.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dnn::{TrainConfig, TrainingReport};
use crate::features::FeatureVector;
use crate::hierarchy::{
    evaluate_conventional, evaluate_master_slave, train_conventional, train_master_slave,
    Architecture, Evaluation, EvaluationRow, FlatModel, MasterSlaveModel,
};
use crate::lstm::{generate_subject, train_generator, GeneratorModel, LstmConfig};
use crate::quantizer::{QuantizerModel, DEFAULT_LEVELS};
use crate::{Error, Gesture, Result};

/// Identity of one real repetition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct RowKey {
    pub subject: u32,
    pub gesture: Gesture,
    pub repetition: u32,
}

impl RowKey {
    pub fn of(fv: &FeatureVector<f64>) -> Self {
        let (subject, gesture, repetition) = fv.key();
        Self {
            subject,
            gesture,
            repetition,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitConfig {
    pub train_fraction: f64,
    pub seed: u64,
}

impl Default for SplitConfig {
    fn default() -> Self {
        Self {
            train_fraction: 0.7,
            seed: 0,
        }
    }
}

impl SplitConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(Error::argument("train fraction must lie strictly between 0 and 1"));
        }
        Ok(())
    }

    /// Training share of a group of `n` repetitions; both sides stay nonempty.
    pub fn train_count(&self, n: usize) -> usize {
        let k = (self.train_fraction * n as f64).round() as usize;
        k.clamp(1, n.saturating_sub(1).max(1))
    }
}

/// Test keys of a split; every other real row is training data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Split {
    pub config_seed: u64,
    pub train_fraction: f64,
    pub test: BTreeSet<RowKey>,
}

impl Split {
    pub fn is_test(&self, fv: &FeatureVector<f64>) -> bool {
        !fv.synthetic && self.test.contains(&RowKey::of(fv))
    }

    /// Real rows outside the test set.
    pub fn train_rows<'a>(&self, rows: &'a [FeatureVector<f64>]) -> Vec<&'a FeatureVector<f64>> {
        rows.iter().filter(|r| !r.synthetic && !self.is_test(r)).collect()
    }

    pub fn test_rows<'a>(&self, rows: &'a [FeatureVector<f64>]) -> Vec<&'a FeatureVector<f64>> {
        rows.iter().filter(|r| self.is_test(r)).collect()
    }
}

/// Stratified per (subject, gesture): each group is shuffled with its own
/// seeded stream, so the split of a group does not depend on the others.
pub fn stratified_split(rows: &[FeatureVector<f64>], config: &SplitConfig) -> Result<Split> {
    config.validate()?;
    let mut groups: BTreeMap<(u32, Gesture), Vec<u32>> = BTreeMap::new();
    for r in rows.iter().filter(|r| !r.synthetic) {
        groups
            .entry((r.subject_id, r.label.gesture()))
            .or_default()
            .push(r.repetition_index);
    }
    let mut test = BTreeSet::new();
    for ((subject, gesture), mut reps) in groups {
        if reps.len() < 2 {
            return Err(Error::data(format!(
                "subject {subject} {gesture} has {} repetition(s); at least 2 are needed to split",
                reps.len()
            )));
        }
        reps.sort_unstable();
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        rng.set_stream(((subject as u64) << 8) | gesture.index() as u64);
        reps.shuffle(&mut rng);
        let k = config.train_count(reps.len());
        for &repetition in &reps[k..] {
            test.insert(RowKey {
                subject,
                gesture,
                repetition,
            });
        }
    }
    Ok(Split {
        config_seed: config.seed,
        train_fraction: config.train_fraction,
        test,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AugmentConfig {
    pub synthetic_subjects: usize,
    /// Synthetic repetitions per gesture for each synthetic subject.
    pub length: usize,
    pub levels: usize,
    pub lstm: LstmConfig,
    /// Sampling seed; synthetic subject `k` uses `seed + k`.
    pub seed: u64,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        Self {
            synthetic_subjects: 2,
            length: 20,
            levels: DEFAULT_LEVELS,
            lstm: LstmConfig::default(),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Augmentation {
    pub quantizer: QuantizerModel<f64>,
    pub generator: GeneratorModel<f64>,
    pub synthetic: Vec<FeatureVector<f64>>,
}

/// Fits the grid and generators on `template` and samples new subjects,
/// numbered after the largest subject id present.
///
/// Returns `None` when no synthetic subjects are requested.
pub fn augment(
    template: &[FeatureVector<f64>],
    config: &AugmentConfig,
) -> Result<Option<Augmentation>> {
    if config.synthetic_subjects == 0 {
        return Ok(None);
    }
    if config.length == 0 {
        return Err(Error::argument("synthetic length must be at least 1"));
    }
    let real: Vec<FeatureVector<f64>> = template.iter().filter(|r| !r.synthetic).cloned().collect();
    if real.is_empty() {
        return Err(Error::data("no real rows to learn from"));
    }
    let quantizer = QuantizerModel::fit(&real, config.levels)?;
    let series = quantizer.to_series(&real)?;
    let generator = train_generator(&series, config.levels, &config.lstm)?;
    let first_id = template.iter().map(|r| r.subject_id).max().unwrap_or(0) + 1;
    let mut synthetic = Vec::with_capacity(config.synthetic_subjects * 10 * config.length);
    for k in 0..config.synthetic_subjects {
        synthetic.extend(generate_subject(
            &generator,
            &quantizer,
            &real,
            first_id + k as u32,
            config.length,
            config.seed.wrapping_add(k as u64),
        )?);
    }
    Ok(Some(Augmentation {
        quantizer,
        generator,
        synthetic,
    }))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "arch", rename_all = "kebab-case")]
pub enum CellModel {
    MasterSlave(MasterSlaveModel<f64>),
    Conventional(FlatModel<f64>),
}

impl CellModel {
    pub fn arch(&self) -> Architecture {
        match self {
            CellModel::MasterSlave(_) => Architecture::MasterSlave,
            CellModel::Conventional(_) => Architecture::Conventional,
        }
    }

    pub fn evaluate(&self, test: &[FeatureVector<f64>]) -> Result<Evaluation> {
        match self {
            CellModel::MasterSlave(m) => evaluate_master_slave(m, test),
            CellModel::Conventional(m) => evaluate_conventional(m, test),
        }
    }
}

/// One trained (subject, arch, with_synthetic) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedCell {
    pub subject_id: u32,
    pub with_synthetic: bool,
    pub model: CellModel,
    #[serde(skip)]
    pub reports: Vec<TrainingReport>,
}

impl TrainedCell {
    pub fn arch(&self) -> Architecture {
        self.model.arch()
    }
}

fn subjects_of(rows: &[FeatureVector<f64>]) -> Vec<u32> {
    rows.iter()
        .filter(|r| !r.synthetic)
        .map(|r| r.subject_id)
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect()
}

fn train_cell(
    subject_id: u32,
    arch: Architecture,
    with_synthetic: bool,
    train: &[FeatureVector<f64>],
    test: &[FeatureVector<f64>],
    config: &TrainConfig,
) -> Result<TrainedCell> {
    let monitor = (!test.is_empty()).then_some(test);
    let (model, reports) = match arch {
        Architecture::MasterSlave => {
            let (m, r) = train_master_slave(train, config, monitor)?;
            (CellModel::MasterSlave(m), r.iter().cloned().collect())
        }
        Architecture::Conventional => {
            let (m, r) = train_conventional(train, config, monitor)?;
            (CellModel::Conventional(m), vec![r])
        }
    };
    Ok(TrainedCell {
        subject_id,
        with_synthetic,
        model,
        reports,
    })
}

/// Trains every requested cell for every real subject in `rows`.
///
/// Each subject's model sees its own real training rows, plus every
/// synthetic row in `rows` for the with-synthetic cells. Cells come back
/// ordered by subject, then architecture, then without/with synthetic data.
pub fn train_cells(
    rows: &[FeatureVector<f64>],
    split: &Split,
    archs: &[Architecture],
    config: &TrainConfig,
) -> Result<Vec<TrainedCell>> {
    config.validate()?;
    let synthetic: Vec<FeatureVector<f64>> = rows.iter().filter(|r| r.synthetic).cloned().collect();
    let mut archs = archs.to_vec();
    archs.sort();
    archs.dedup();
    let subjects = subjects_of(rows);
    if subjects.is_empty() {
        return Err(Error::data("no real subjects in the feature table"));
    }
    let mut jobs = Vec::new();
    for &s in &subjects {
        for &a in &archs {
            jobs.push((s, a, false));
            if !synthetic.is_empty() {
                jobs.push((s, a, true));
            }
        }
    }
    jobs.into_par_iter()
        .map(|(subject, arch, with_synthetic)| {
            let mine = |r: &&FeatureVector<f64>| r.subject_id == subject;
            let mut train: Vec<FeatureVector<f64>> =
                split.train_rows(rows).into_iter().filter(mine).cloned().collect();
            let test: Vec<FeatureVector<f64>> =
                split.test_rows(rows).into_iter().filter(mine).cloned().collect();
            if with_synthetic {
                train.extend(synthetic.iter().cloned());
            }
            train_cell(subject, arch, with_synthetic, &train, &test, config)
                .map_err(|e| match e {
                    Error::Data(m) => Error::Data(format!("subject {subject}: {m}")),
                    other => other,
                })
        })
        .collect()
}

/// Evaluates each cell on its subject's test rows.
pub fn evaluate_cells(
    cells: &[TrainedCell],
    rows: &[FeatureVector<f64>],
    split: &Split,
) -> Result<Vec<(EvaluationRow, Evaluation)>> {
    let test = split.test_rows(rows);
    cells
        .iter()
        .map(|cell| {
            let mine: Vec<FeatureVector<f64>> = test
                .iter()
                .filter(|r| r.subject_id == cell.subject_id)
                .map(|r| (*r).clone())
                .collect();
            let e = cell.model.evaluate(&mine)?;
            Ok((e.row(cell.subject_id, cell.with_synthetic), e))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct ExperimentConfig {
    pub split: SplitConfig,
    pub augment: AugmentConfig,
    pub train: TrainConfig,
}

#[derive(Debug, Clone)]
pub struct ExperimentResult {
    pub split: Split,
    pub augmentation: Option<Augmentation>,
    pub cells: Vec<TrainedCell>,
    pub evaluations: Vec<Evaluation>,
    pub rows: Vec<EvaluationRow>,
}

/// Split, augment from the real training rows only, then train and
/// evaluate both architectures with and without the synthetic rows.
pub fn run_experiment(
    dataset: &[FeatureVector<f64>],
    config: &ExperimentConfig,
) -> Result<ExperimentResult> {
    if dataset.iter().any(|r| r.synthetic) {
        return Err(Error::data("experiment input must contain real rows only"));
    }
    let split = stratified_split(dataset, &config.split)?;
    let train: Vec<FeatureVector<f64>> = split.train_rows(dataset).into_iter().cloned().collect();
    let augmentation = augment(&train, &config.augment)?;
    let mut rows = dataset.to_vec();
    if let Some(a) = &augmentation {
        rows.extend(a.synthetic.iter().cloned());
    }
    let archs = [Architecture::MasterSlave, Architecture::Conventional];
    let cells = train_cells(&rows, &split, &archs, &config.train)?;
    let (table, evaluations) = evaluate_cells(&cells, &rows, &split)?.into_iter().unzip();
    Ok(ExperimentResult {
        split,
        augmentation,
        cells,
        evaluations,
        rows: table,
    })
}
