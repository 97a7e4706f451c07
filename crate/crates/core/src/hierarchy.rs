//! Two-stage gesture classifier and the flat ten-class baseline.
//!
//! The master network decides static vs dynamic; one five-class slave per type
//! then picks the gesture. Every network uses the `[d, h, h, h, h, K]`
//! topology and sees the same standardized inputs.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dnn::{topology, LabeledMatrix, Network, TrainConfig, TrainingReport};
use crate::features::FeatureVector;
use crate::linalg::Matrix;
use crate::{Error, Gesture, GestureType, Result, Scalar};

/// Column-wise z-scoring fitted on training inputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer<T = f64> {
    pub mean: Vec<T>,
    pub scale: Vec<T>,
}

impl<T: Scalar> Standardizer<T> {
    /// Columns with zero spread keep a scale of one.
    pub fn fit(rows: &[FeatureVector<T>]) -> Result<Self> {
        let first = rows
            .first()
            .ok_or_else(|| Error::argument("cannot standardize an empty set"))?;
        let d = first.dimension();
        let n = T::count(rows.len());
        let mut mean = vec![T::zero(); d];
        for r in rows {
            if r.dimension() != d {
                return Err(Error::data("feature vectors have mixed dimensions"));
            }
            for (m, &v) in mean.iter_mut().zip(&r.values) {
                *m += v;
            }
        }
        for m in &mut mean {
            *m /= n;
        }
        let mut scale = vec![T::zero(); d];
        for r in rows {
            for j in 0..d {
                let dv = r.values[j] - mean[j];
                scale[j] += dv * dv;
            }
        }
        let denom = T::count(rows.len().saturating_sub(1).max(1));
        for s in &mut scale {
            *s = (*s / denom).sqrt();
            if !(*s > T::zero()) {
                *s = T::one();
            }
        }
        Ok(Self { mean, scale })
    }

    pub fn apply(&self, values: &[T]) -> Vec<T> {
        values
            .iter()
            .zip(self.mean.iter().zip(&self.scale))
            .map(|(&v, (&m, &s))| (v - m) / s)
            .collect()
    }

    pub fn matrix(&self, rows: &[&FeatureVector<T>]) -> Matrix<T> {
        let d = self.mean.len();
        let mut data = Vec::with_capacity(rows.len() * d);
        for r in rows {
            data.extend(self.apply(&r.values));
        }
        Matrix::from_vec(rows.len(), d, data).expect("row lengths checked")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Architecture {
    #[serde(rename = "master-slave")]
    MasterSlave,
    #[serde(rename = "conventional")]
    Conventional,
}

impl Architecture {
    pub fn name(self) -> &'static str {
        match self {
            Architecture::MasterSlave => "master-slave",
            Architecture::Conventional => "conventional",
        }
    }
}

impl fmt::Display for Architecture {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Architecture {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "master-slave" => Ok(Architecture::MasterSlave),
            "conventional" => Ok(Architecture::Conventional),
            _ => Err(Error::argument(format!("unknown architecture {s:?}"))),
        }
    }
}

/// Which target a network learns from a feature vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Task {
    Master,
    Slave(GestureType),
    Flat,
}

impl Task {
    fn classes(self) -> usize {
        match self {
            Task::Master => 2,
            Task::Slave(_) => 5,
            Task::Flat => Gesture::COUNT,
        }
    }

    fn class_of(self, g: Gesture) -> Option<usize> {
        match self {
            Task::Master => Some(g.gesture_type().index()),
            Task::Slave(t) => (g.gesture_type() == t).then(|| g.index_within_type()),
            Task::Flat => Some(g.index()),
        }
    }

    fn coverage(self) -> Vec<(String, Vec<Gesture>)> {
        match self {
            Task::Master => GestureType::ALL
                .iter()
                .map(|t| (format!("{t:?}"), t.gestures().to_vec()))
                .collect(),
            Task::Slave(t) => t.gestures().iter().map(|g| (g.to_string(), vec![*g])).collect(),
            Task::Flat => Gesture::ALL.iter().map(|g| (g.to_string(), vec![*g])).collect(),
        }
    }
}

fn task_data<T: Scalar>(
    task: Task,
    scaler: &Standardizer<T>,
    rows: &[FeatureVector<T>],
) -> Result<LabeledMatrix<T>> {
    let selected: Vec<&FeatureVector<T>> = rows
        .iter()
        .filter(|r| task.class_of(r.label.gesture()).is_some())
        .collect();
    let classes: Vec<usize> = selected
        .iter()
        .map(|r| task.class_of(r.label.gesture()).unwrap())
        .collect();
    LabeledMatrix::from_classes(scaler.matrix(&selected), &classes, task.classes())
}

fn check_coverage<T: Scalar>(task: Task, rows: &[FeatureVector<T>]) -> Result<()> {
    for (name, gestures) in task.coverage() {
        if !rows.iter().any(|r| gestures.contains(&r.label.gesture())) {
            return Err(Error::data(format!("training set has no {name} examples")));
        }
    }
    Ok(())
}

/// Rows in key order, so full-batch sums do not depend on input order.
fn canonical<T: Scalar>(rows: &[FeatureVector<T>]) -> Vec<FeatureVector<T>> {
    let mut out = rows.to_vec();
    out.sort_by_key(|r| (r.synthetic, r.key()));
    out
}

fn train_task<T: Scalar>(
    task: Task,
    scaler: &Standardizer<T>,
    train: &[FeatureVector<T>],
    monitor: Option<&[FeatureVector<T>]>,
    config: &TrainConfig,
    seed: u64,
) -> Result<(Network<T>, TrainingReport)> {
    let data = task_data(task, scaler, train)?;
    let d = scaler.mean.len();
    let monitor = monitor
        .map(|m| task_data(task, scaler, m))
        .transpose()?
        .filter(|m| !m.is_empty());
    let net = Network::init(&topology(d, task.classes()), seed)?;
    net.train(&data, config, monitor.as_ref())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MasterSlaveModel<T = f64> {
    pub scaler: Standardizer<T>,
    pub master: Network<T>,
    pub slave_static: Network<T>,
    pub slave_dynamic: Network<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MasterSlaveReports {
    pub master: TrainingReport,
    pub slave_static: TrainingReport,
    pub slave_dynamic: TrainingReport,
}

impl MasterSlaveReports {
    pub fn iter(&self) -> impl Iterator<Item = &TrainingReport> {
        [&self.master, &self.slave_static, &self.slave_dynamic].into_iter()
    }
}

/// Per-network init seeds derived from the configured seed.
pub fn network_seeds(seed: u64) -> [u64; 3] {
    [seed, seed.wrapping_add(1), seed.wrapping_add(2)]
}

/// Trains the master on all rows and each slave on its own type's rows.
///
/// `monitor`, when given, is evaluated after every iteration for the learning
/// curves; it never influences the parameters.
pub fn train_master_slave<T: Scalar>(
    train: &[FeatureVector<T>],
    config: &TrainConfig,
    monitor: Option<&[FeatureVector<T>]>,
) -> Result<(MasterSlaveModel<T>, MasterSlaveReports)> {
    config.validate()?;
    let train = &canonical(train)[..];
    check_coverage(Task::Master, train)?;
    check_coverage(Task::Slave(GestureType::Static), train)?;
    check_coverage(Task::Slave(GestureType::Dynamic), train)?;
    let scaler = Standardizer::fit(train)?;
    let [s_master, s_static, s_dynamic] = network_seeds(config.seed);
    let (master, (slave_static, slave_dynamic)) = rayon::join(
        || train_task(Task::Master, &scaler, train, monitor, config, s_master),
        || {
            rayon::join(
                || {
                    let task = Task::Slave(GestureType::Static);
                    train_task(task, &scaler, train, monitor, config, s_static)
                },
                || {
                    let task = Task::Slave(GestureType::Dynamic);
                    train_task(task, &scaler, train, monitor, config, s_dynamic)
                },
            )
        },
    );
    let (master, r_master) = master?;
    let (slave_static, r_static) = slave_static?;
    let (slave_dynamic, r_dynamic) = slave_dynamic?;
    Ok((
        MasterSlaveModel {
            scaler,
            master,
            slave_static,
            slave_dynamic,
        },
        MasterSlaveReports {
            master: r_master.named("master"),
            slave_static: r_static.named("slave_static"),
            slave_dynamic: r_dynamic.named("slave_dynamic"),
        },
    ))
}

/// Outcome of routing one input through the two stages.
#[derive(Debug, Clone, PartialEq)]
pub struct SequentialPrediction<T> {
    pub gesture: Gesture,
    pub gesture_type: GestureType,
    pub master_output: Vec<T>,
    pub slave_output: Vec<T>,
}

impl<T: Scalar> MasterSlaveModel<T> {
    pub fn input_dim(&self) -> usize {
        self.scaler.mean.len()
    }

    pub fn slave(&self, t: GestureType) -> &Network<T> {
        match t {
            GestureType::Static => &self.slave_static,
            GestureType::Dynamic => &self.slave_dynamic,
        }
    }

    /// Master picks the type, then only that type's slave is evaluated.
    pub fn predict_sequential(&self, input: &[T]) -> Result<SequentialPrediction<T>> {
        if input.len() != self.input_dim() {
            return Err(Error::argument(format!(
                "input has length {}, model expects {}",
                input.len(),
                self.input_dim()
            )));
        }
        let x = self.scaler.apply(input);
        let (t, master_output) = self.master.predict(&x)?;
        let gesture_type = GestureType::from_index(t).expect("binary master");
        let (k, slave_output) = self.slave(gesture_type).predict(&x)?;
        Ok(SequentialPrediction {
            gesture: gesture_type.gestures()[k],
            gesture_type,
            master_output,
            slave_output,
        })
    }

    /// Slave prediction for an input whose true type is known.
    pub fn predict_slave(&self, input: &[T], t: GestureType) -> Result<Gesture> {
        let (k, _) = self.slave(t).predict(&self.scaler.apply(input))?;
        Ok(t.gestures()[k])
    }
}

/// Flat ten-class network with its input scaling.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlatModel<T = f64> {
    pub scaler: Standardizer<T>,
    pub network: Network<T>,
}

impl<T: Scalar> FlatModel<T> {
    pub fn predict(&self, input: &[T]) -> Result<Gesture> {
        if input.len() != self.scaler.mean.len() {
            return Err(Error::argument("input dimension does not match the model"));
        }
        let (k, _) = self.network.predict(&self.scaler.apply(input))?;
        Ok(Gesture::ALL[k])
    }
}

pub fn train_conventional<T: Scalar>(
    train: &[FeatureVector<T>],
    config: &TrainConfig,
    monitor: Option<&[FeatureVector<T>]>,
) -> Result<(FlatModel<T>, TrainingReport)> {
    config.validate()?;
    let train = &canonical(train)[..];
    check_coverage(Task::Flat, train)?;
    let scaler = Standardizer::fit(train)?;
    let (network, report) = train_task(Task::Flat, &scaler, train, monitor, config, config.seed)?;
    Ok((FlatModel { scaler, network }, report.named("conventional")))
}

/// Per-row correctness of one evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RowOutcome {
    pub truth: Gesture,
    pub predicted: Gesture,
    pub master_correct: Option<bool>,
    pub slave_correct: Option<bool>,
    pub end_to_end_correct: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub arch: Architecture,
    pub outcomes: Vec<RowOutcome>,
}

fn percent(hits: usize, total: usize) -> f64 {
    100.0 * hits as f64 / total as f64
}

impl Evaluation {
    fn rate(&self, f: impl Fn(&RowOutcome) -> Option<bool>) -> Option<f64> {
        let flags: Option<Vec<bool>> = self.outcomes.iter().map(f).collect();
        flags.map(|v| percent(v.iter().filter(|&&b| b).count(), v.len()))
    }

    pub fn master_ca(&self) -> Option<f64> {
        self.rate(|o| o.master_correct)
    }

    pub fn slave_ca(&self) -> Option<f64> {
        self.rate(|o| o.slave_correct)
    }

    pub fn end_to_end_ca(&self) -> f64 {
        self.rate(|o| Some(o.end_to_end_correct)).unwrap_or(0.0)
    }

    pub fn row(&self, subject_id: u32, with_synthetic: bool) -> EvaluationRow {
        EvaluationRow {
            subject_id,
            arch: self.arch,
            with_synthetic,
            master_ca: self.master_ca(),
            slave_ca: self.slave_ca(),
            end_to_end_ca: self.end_to_end_ca(),
        }
    }
}

/// One cell group of the accuracy table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationRow {
    pub subject_id: u32,
    pub arch: Architecture,
    pub with_synthetic: bool,
    pub master_ca: Option<f64>,
    pub slave_ca: Option<f64>,
    pub end_to_end_ca: f64,
}

fn check_test_set<T: Scalar>(test: &[FeatureVector<T>]) -> Result<()> {
    if test.is_empty() {
        return Err(Error::argument("empty test set"));
    }
    if let Some(r) = test.iter().find(|r| r.synthetic) {
        return Err(Error::data(format!(
            "synthetic row (subject {} {} repetition {}) found in a test set",
            r.subject_id,
            r.label.gesture(),
            r.repetition_index
        )));
    }
    Ok(())
}

/// Master accuracy, true-type slave accuracy and routed end-to-end accuracy.
pub fn evaluate_master_slave<T: Scalar>(
    model: &MasterSlaveModel<T>,
    test: &[FeatureVector<T>],
) -> Result<Evaluation> {
    check_test_set(test)?;
    let outcomes = test
        .iter()
        .map(|r| {
            let truth = r.label.gesture();
            let routed = model.predict_sequential(&r.values)?;
            let slave = model.predict_slave(&r.values, truth.gesture_type())?;
            Ok(RowOutcome {
                truth,
                predicted: routed.gesture,
                master_correct: Some(routed.gesture_type == truth.gesture_type()),
                slave_correct: Some(slave == truth),
                end_to_end_correct: routed.gesture == truth,
            })
        })
        .collect::<Result<_>>()?;
    Ok(Evaluation {
        arch: Architecture::MasterSlave,
        outcomes,
    })
}

pub fn evaluate_conventional<T: Scalar>(
    model: &FlatModel<T>,
    test: &[FeatureVector<T>],
) -> Result<Evaluation> {
    check_test_set(test)?;
    let outcomes = test
        .iter()
        .map(|r| {
            let truth = r.label.gesture();
            let predicted = model.predict(&r.values)?;
            Ok(RowOutcome {
                truth,
                predicted,
                master_correct: None,
                slave_correct: None,
                end_to_end_correct: predicted == truth,
            })
        })
        .collect::<Result<_>>()?;
    Ok(Evaluation {
        arch: Architecture::Conventional,
        outcomes,
    })
}
