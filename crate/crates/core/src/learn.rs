//! Readout probabilities, losses, surrogate-based QCNN training, and the
//! direct low-body linear classifier.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::circuit::{build_qcnn, readout_observables, Circuit, LayoutStyle, QcnnLayout, Task};
use crate::error::{Error, Result};
use crate::optim::{minimize, LbfgsOptions, Termination};
use crate::pauli::{PauliString, PauliSum};
use crate::propagation::TruncationPolicy;
use crate::rng::substream;
use crate::shadows::FeatureTable;
use crate::surrogate::{ActiveSet, SurrogateGraph};

/// Probability floor inside logarithms.
pub const PROB_FLOOR: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LossKind {
    #[default]
    CrossEntropy,
    Mse,
}

impl FromStr for LossKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cross-entropy" | "ce" => Ok(LossKind::CrossEntropy),
            "mse" => Ok(LossKind::Mse),
            _ => Err(Error::Invalid(format!("unknown loss {s:?}"))),
        }
    }
}

/// `P(label 1) = (1 + ⟨Z⟩)/2` with `⟨Z⟩` clipped to `[-1, 1]`.
pub fn predict_binary(z: f64) -> f64 {
    (1.0 + z.clamp(-1.0, 1.0)) / 2.0
}

fn raw_four_class(za: f64, zb: f64, zab: f64) -> [f64; 4] {
    let mut q = [0.0; 4];
    for (class, v) in q.iter_mut().enumerate() {
        let s1 = if class & 2 == 0 { 1.0 } else { -1.0 };
        let s2 = if class & 1 == 0 { 1.0 } else { -1.0 };
        *v = (1.0 + s1 * za + s2 * zb + s1 * s2 * zab) / 4.0;
    }
    q
}

/// Bitstring probabilities of the readout pair, class `2·b₁ + b₂`, clipped
/// at zero and renormalized.
pub fn predict_multiclass(za: f64, zb: f64, zab: f64) -> [f64; 4] {
    let r = raw_four_class(za, zb, zab).map(|q| q.max(0.0));
    let total: f64 = r.iter().sum();
    r.map(|v| v / total)
}

/// Class probabilities from the readout expectations of one sample.
pub fn probabilities(task: Task, e: &[f64]) -> Vec<f64> {
    match task {
        Task::Binary => {
            let p = predict_binary(e[0]);
            vec![1.0 - p, p]
        }
        Task::FourClass => predict_multiclass(e[0], e[1], e[2]).to_vec(),
    }
}

/// Argmax with ties going to the lower class.
pub fn decide(probs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &p) in probs.iter().enumerate() {
        if p > probs[best] {
            best = i;
        }
    }
    best
}

/// Per-sample loss and its gradient with respect to the readout expectations.
pub fn sample_loss(task: Task, kind: LossKind, e: &[f64], label: usize) -> (f64, Vec<f64>) {
    match task {
        Task::Binary => {
            let z = e[0];
            let inside = if z.abs() < 1.0 { 1.0 } else { 0.0 };
            match kind {
                LossKind::CrossEntropy => {
                    let p = predict_binary(z);
                    let (l, dl_dp) = if label == 1 {
                        (-p.max(PROB_FLOOR).ln(), if p > PROB_FLOOR { -1.0 / p } else { 0.0 })
                    } else {
                        let q = 1.0 - p;
                        (-q.max(PROB_FLOOR).ln(), if q > PROB_FLOOR { 1.0 / q } else { 0.0 })
                    };
                    (l, vec![dl_dp * 0.5 * inside])
                }
                LossKind::Mse => {
                    let t = if label == 1 { 1.0 } else { -1.0 };
                    ((t - z).powi(2), vec![-2.0 * (t - z)])
                }
            }
        }
        Task::FourClass => {
            let q = raw_four_class(e[0], e[1], e[2]);
            let r = q.map(|v| v.max(0.0));
            let total: f64 = r.iter().sum();
            let p = r.map(|v| v / total);
            let mut dl_dp = [0.0; 4];
            let l = match kind {
                LossKind::CrossEntropy => {
                    let py = p[label];
                    if py > PROB_FLOOR {
                        dl_dp[label] = -1.0 / py;
                    }
                    -py.max(PROB_FLOOR).ln()
                }
                LossKind::Mse => {
                    let mut l = 0.0;
                    for b in 0..4 {
                        let t = if b == label { 1.0 } else { 0.0 };
                        l += (t - p[b]).powi(2);
                        dl_dp[b] = -2.0 * (t - p[b]);
                    }
                    l
                }
            };
            let mean: f64 = (0..4).map(|b| dl_dp[b] * p[b]).sum();
            let mut grad = vec![0.0; 3];
            for c in 0..4 {
                if q[c] <= 0.0 {
                    continue;
                }
                let dl_dq = (dl_dp[c] - mean) / total;
                let s1 = if c & 2 == 0 { 1.0 } else { -1.0 };
                let s2 = if c & 1 == 0 { 1.0 } else { -1.0 };
                grad[0] += dl_dq * s1 / 4.0;
                grad[1] += dl_dq * s2 / 4.0;
                grad[2] += dl_dq * s1 * s2 / 4.0;
            }
            (l, grad)
        }
    }
}

/// Mean loss over samples (`expectations[i]` holds sample `i`'s readouts).
pub fn loss(task: Task, kind: LossKind, expectations: &[Vec<f64>], labels: &[usize]) -> Result<f64> {
    if expectations.len() != labels.len() {
        return Err(Error::SizeMismatch { left: expectations.len(), right: labels.len() });
    }
    if labels.is_empty() {
        return Ok(0.0);
    }
    let total: f64 = expectations.iter().zip(labels).map(|(e, &y)| sample_loss(task, kind, e, y).0).sum();
    Ok(total / labels.len() as f64)
}

/// A QCNN with one surrogate graph and active set per readout observable.
#[derive(Debug, Clone)]
pub struct QcnnModel {
    pub circuit: Circuit,
    pub layout: QcnnLayout,
    pub task: Task,
    pub policy: TruncationPolicy,
    pub observables: Vec<PauliString>,
    pub graphs: Vec<SurrogateGraph>,
    pub active: Vec<ActiveSet>,
    pub theta: Vec<f64>,
}

impl QcnnModel {
    pub fn build(n: usize, style: LayoutStyle, task: Task, policy: TruncationPolicy) -> Result<Self> {
        let (circuit, layout) = build_qcnn(n, style)?;
        let observables = readout_observables(&layout, task)?;
        let graphs = observables
            .iter()
            .map(|o| SurrogateGraph::build(&circuit, &PauliSum::single(o.clone()), &policy))
            .collect::<Result<Vec<_>>>()?;
        let active = graphs.iter().map(SurrogateGraph::all_leaves).collect();
        let theta = vec![0.0; circuit.num_params()];
        Ok(QcnnModel { circuit, layout, task, policy, observables, graphs, active, theta })
    }

    pub fn num_qubits(&self) -> usize {
        self.circuit.num_qubits()
    }

    /// Every leaf operator of every graph, sorted and deduplicated.
    pub fn candidate_ops(&self) -> Vec<PauliString> {
        let mut ops: Vec<PauliString> =
            self.graphs.iter().flat_map(|g| g.leaves().iter().map(|l| l.pauli.clone())).collect();
        ops.sort();
        ops.dedup();
        ops
    }

    /// Variance-ranked top-`m` leaves per observable. Returns whether any
    /// request exceeded the candidate count.
    pub fn select_active(&mut self, table: &FeatureTable, m: usize, window: Option<usize>) -> Result<bool> {
        let mut truncated = false;
        for (g, a) in self.graphs.iter().zip(self.active.iter_mut()) {
            *a = g.select_active(table, m, window)?;
            truncated |= a.truncated_request;
        }
        Ok(truncated)
    }

    /// Active operators per observable, in active-set order.
    pub fn active_ops(&self) -> Vec<Vec<PauliString>> {
        self.graphs.iter().zip(&self.active).map(|(g, a)| a.paulis(g).into_iter().cloned().collect()).collect()
    }

    /// Union of the active operators, sorted.
    pub fn required_ops(&self) -> Vec<PauliString> {
        let mut ops: Vec<PauliString> = self.active_ops().into_iter().flatten().collect();
        ops.sort();
        ops.dedup();
        ops
    }

    pub fn objective<'a>(&'a self, table: &FeatureTable, kind: LossKind) -> Result<Objective<'a>> {
        Objective::new(self, table, kind)
    }

    /// Readout expectations per sample at the model's `θ`.
    pub fn expectations(&self, table: &FeatureTable) -> Result<Vec<Vec<f64>>> {
        self.objective(table, LossKind::CrossEntropy)?.expectations(&self.theta)
    }

    pub fn evaluate(&self, table: &FeatureTable) -> Result<Evaluation> {
        let e = self.expectations(table)?;
        let predictions: Vec<usize> = e.iter().map(|e| decide(&probabilities(self.task, e))).collect();
        Evaluation::from_predictions(self.task.num_classes(), &predictions, &table.labels())
    }

    pub fn to_record(&self, metrics: BTreeMap<String, f64>) -> ModelRecord {
        ModelRecord {
            n: self.num_qubits(),
            style: self.layout.style,
            task: self.task,
            policy: self.policy,
            circuit_file: None,
            circuit: self.circuit.to_text(),
            observables: self.observables.iter().map(PauliString::to_text).collect(),
            active_ops: self.active_ops().iter().map(|ops| ops.iter().map(PauliString::to_text).collect()).collect(),
            theta: self.theta.clone(),
            metrics,
        }
    }

    /// Rebuilds graphs deterministically and restores the active sets and `θ`.
    pub fn from_record(record: &ModelRecord) -> Result<Self> {
        let mut model = QcnnModel::build(record.n, record.style, record.task, record.policy)?;
        let circuit: Circuit = record.circuit.parse()?;
        if circuit != model.circuit {
            return Err(Error::Invalid("stored circuit differs from the rebuilt QCNN".into()));
        }
        if record.theta.len() != model.circuit.num_params() {
            return Err(Error::ParamLength { expected: model.circuit.num_params(), got: record.theta.len() });
        }
        if record.active_ops.len() != model.graphs.len() {
            return Err(Error::Invalid("active operator lists do not match the observables".into()));
        }
        for (j, ops) in record.active_ops.iter().enumerate() {
            let leaves = ops
                .iter()
                .map(|t| {
                    let p: PauliString = t.parse()?;
                    model.graphs[j]
                        .leaf_index(&p)
                        .ok_or_else(|| Error::Invalid(format!("operator {t} is not a leaf of graph {j}")))
                })
                .collect::<Result<Vec<_>>>()?;
            model.active[j] = model.graphs[j].active_from_leaves(leaves)?;
        }
        model.theta = record.theta.clone();
        Ok(model)
    }
}

/// Training loss over a fixed feature table, with gradients through the
/// surrogate graphs.
pub struct Objective<'a> {
    model: &'a QcnnModel,
    /// Per observable, row-major `N × M_j` features aligned to the active set.
    features: Vec<Vec<f64>>,
    widths: Vec<usize>,
    labels: Vec<usize>,
    kind: LossKind,
}

impl<'a> Objective<'a> {
    fn new(model: &'a QcnnModel, table: &FeatureTable, kind: LossKind) -> Result<Self> {
        let labels = table.labels();
        if let Some(&bad) = labels.iter().find(|&&l| l >= model.task.num_classes()) {
            return Err(Error::Invalid(format!("label {bad} out of range for the task")));
        }
        let mut features = Vec::new();
        let mut widths = Vec::new();
        for (g, a) in model.graphs.iter().zip(&model.active) {
            let rows = table.aligned(&a.paulis(g))?;
            widths.push(a.len());
            features.push(rows.into_iter().flatten().collect());
        }
        Ok(Objective { model, features, widths, labels, kind })
    }

    pub fn num_samples(&self) -> usize {
        self.labels.len()
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    fn row(&self, j: usize, i: usize) -> &[f64] {
        let w = self.widths[j];
        &self.features[j][i * w..(i + 1) * w]
    }

    pub fn expectations(&self, theta: &[f64]) -> Result<Vec<Vec<f64>>> {
        let n = self.num_samples();
        let mut e = vec![vec![0.0; self.model.graphs.len()]; n];
        for (j, (g, a)) in self.model.graphs.iter().zip(&self.model.active).enumerate() {
            let c = g.leaf_coefficients(a, theta)?;
            for (i, ei) in e.iter_mut().enumerate() {
                ei[j] = self.row(j, i).iter().zip(&c).map(|(f, c)| f * c).sum();
            }
        }
        Ok(e)
    }

    pub fn value(&self, theta: &[f64]) -> Result<f64> {
        loss(self.model.task, self.kind, &self.expectations(theta)?, &self.labels)
    }

    /// Mean loss, its gradient, and the training accuracy at `θ`.
    pub fn value_and_grad(&self, theta: &[f64]) -> Result<(f64, Vec<f64>, f64)> {
        let n = self.num_samples();
        let e = self.expectations(theta)?;
        let mut total = 0.0;
        let mut correct = 0;
        let mut adjoints: Vec<Vec<f64>> = self.widths.iter().map(|&w| vec![0.0; w]).collect();
        for (i, ei) in e.iter().enumerate() {
            let y = self.labels[i];
            let (l, g) = sample_loss(self.model.task, self.kind, ei, y);
            total += l;
            correct += usize::from(decide(&probabilities(self.model.task, ei)) == y);
            for (j, gj) in g.iter().enumerate() {
                if *gj != 0.0 {
                    adjoints[j].iter_mut().zip(self.row(j, i)).for_each(|(a, f)| *a += gj * f);
                }
            }
        }
        let scale = if n == 0 { 0.0 } else { 1.0 / n as f64 };
        let mut grad = vec![0.0; theta.len()];
        for (j, (g, a)) in self.model.graphs.iter().zip(&self.model.active).enumerate() {
            adjoints[j].iter_mut().for_each(|v| *v *= scale);
            let gj = g.backprop(a, theta, &adjoints[j])?;
            grad.iter_mut().zip(gj).for_each(|(t, v)| *t += v);
        }
        let acc = if n == 0 { 0.0 } else { correct as f64 / n as f64 };
        Ok((total * scale, grad, acc))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub loss: LossKind,
    pub max_iter: usize,
    pub restarts: usize,
    pub seed: u64,
    pub memory: usize,
    pub tol: f64,
    pub init_scale: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            loss: LossKind::CrossEntropy,
            max_iter: 200,
            restarts: 5,
            seed: 0,
            memory: 10,
            tol: 1e-10,
            init_scale: 0.1 * std::f64::consts::PI,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iter == 0 || self.restarts == 0 || self.memory == 0 {
            return Err(Error::Config("max_iter, restarts and memory must be positive".into()));
        }
        if !(self.init_scale >= 0.0) || !(self.tol >= 0.0) {
            return Err(Error::Config("init_scale and tol must be non-negative".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterRecord {
    pub iteration: usize,
    pub loss: f64,
    pub train_acc: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub theta: Vec<f64>,
    pub initial_loss: f64,
    pub final_loss: f64,
    pub train_acc: f64,
    pub iterations: usize,
    pub termination: Termination,
    pub history: Vec<IterRecord>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    pub runs: Vec<RunReport>,
    /// Index of the run with the lowest final training loss.
    pub best: usize,
    pub line_search_failures: usize,
}

impl TrainReport {
    pub fn best_run(&self) -> &RunReport {
        &self.runs[self.best]
    }

    pub fn mean_final_loss(&self) -> f64 {
        self.runs.iter().map(|r| r.final_loss).sum::<f64>() / self.runs.len() as f64
    }

    /// Metrics CSV of the selected run: `iteration,loss,train_acc`.
    pub fn metrics_csv(&self) -> String {
        let mut s = String::from("iteration,loss,train_acc\n");
        for r in &self.best_run().history {
            writeln!(s, "{},{:?},{:?}", r.iteration, r.loss, r.train_acc).unwrap();
        }
        s
    }
}

/// Minimizes the training loss with L-BFGS from `restarts` random
/// initializations and keeps the run with the lowest final loss in
/// `model.theta`. A run that ends in a line-search failure keeps its last
/// accepted point and triggers one extra fresh initialization (at most
/// `restarts` extra in total).
pub fn train(model: &mut QcnnModel, table: &FeatureTable, cfg: &TrainConfig) -> Result<TrainReport> {
    cfg.validate()?;
    let opts = LbfgsOptions { memory: cfg.memory, max_iter: cfg.max_iter, loss_tol: cfg.tol, ..Default::default() };
    let n_params = model.circuit.num_params();
    let objective = model.objective(table, cfg.loss)?;
    let mut runs = Vec::new();
    let mut failures = 0;
    let mut attempt = 0u64;
    while runs.len() < cfg.restarts + failures.min(cfg.restarts) {
        let mut rng = substream(cfg.seed, "init", attempt);
        attempt += 1;
        let x0: Vec<f64> = (0..n_params)
            .map(|_| if cfg.init_scale > 0.0 { rng.random_range(-cfg.init_scale..=cfg.init_scale) } else { 0.0 })
            .collect();
        let mut error = None;
        let mut history = Vec::new();
        // The last evaluation before each accepted step is the accepted point.
        let last_acc = std::cell::Cell::new(0.0);
        let result = minimize(
            |x| match objective.value_and_grad(x) {
                Ok((l, g, acc)) => {
                    last_acc.set(acc);
                    (l, g)
                }
                Err(e) => {
                    error.get_or_insert(e);
                    (f64::NAN, vec![0.0; x.len()])
                }
            },
            x0,
            &opts,
            |it, _, l| history.push(IterRecord { iteration: it, loss: l, train_acc: last_acc.get() }),
        );
        if let Some(e) = error {
            return Err(e);
        }
        let final_loss = result.loss;
        let train_acc = history.last().map_or(0.0, |r| r.train_acc);
        if result.termination == Termination::LineSearchFailed {
            failures += 1;
        }
        runs.push(RunReport {
            theta: result.x,
            initial_loss: result.history[0],
            final_loss,
            train_acc,
            iterations: result.iterations,
            termination: result.termination,
            history,
        });
    }
    let best = (0..runs.len())
        .min_by(|&a, &b| runs[a].final_loss.total_cmp(&runs[b].final_loss).then(a.cmp(&b)))
        .expect("at least one run");
    model.theta = runs[best].theta.clone();
    Ok(TrainReport { runs, best, line_search_failures: failures })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub accuracy: f64,
    /// `confusion[true][predicted]`.
    pub confusion: Vec<Vec<usize>>,
    pub predictions: Vec<usize>,
}

impl Evaluation {
    pub fn from_predictions(classes: usize, predictions: &[usize], labels: &[usize]) -> Result<Self> {
        if predictions.len() != labels.len() {
            return Err(Error::SizeMismatch { left: predictions.len(), right: labels.len() });
        }
        let mut confusion = vec![vec![0; classes]; classes];
        let mut correct = 0;
        for (&p, &y) in predictions.iter().zip(labels) {
            if y >= classes || p >= classes {
                return Err(Error::Invalid(format!("class {} out of range", y.max(p))));
            }
            confusion[y][p] += 1;
            correct += usize::from(p == y);
        }
        let accuracy = if labels.is_empty() { 0.0 } else { correct as f64 / labels.len() as f64 };
        Ok(Evaluation { accuracy, confusion, predictions: predictions.to_vec() })
    }
}

/// Serialized trained model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelRecord {
    pub n: usize,
    pub style: LayoutStyle,
    pub task: Task,
    pub policy: TruncationPolicy,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub circuit_file: Option<String>,
    pub circuit: String,
    pub observables: Vec<String>,
    pub active_ops: Vec<Vec<String>>,
    pub theta: Vec<f64>,
    #[serde(default)]
    pub metrics: BTreeMap<String, f64>,
}

impl ModelRecord {
    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}

/// Ridge-regularized linear readout on low-body features, fitted directly:
/// binary targets `±1` thresholded at 0, four-class one-vs-rest with argmax.
/// A bias column is fitted alongside and left unpenalized.
#[derive(Debug, Clone, PartialEq)]
pub struct DirectClassifier {
    pub ops: Vec<PauliString>,
    /// One weight vector per output (one for binary, four for four-class).
    pub weights: Vec<Vec<f64>>,
    pub bias: Vec<f64>,
    pub classes: usize,
}

impl DirectClassifier {
    pub fn fit(table: &FeatureTable, ops: &[PauliString], classes: usize, lambda: f64) -> Result<Self> {
        if ops.is_empty() {
            return Err(Error::Invalid("direct classifier needs at least one feature".into()));
        }
        if !(lambda >= 0.0) {
            return Err(Error::Invalid(format!("ridge strength must be >= 0, got {lambda}")));
        }
        let refs: Vec<&PauliString> = ops.iter().collect();
        let rows = table.aligned(&refs)?;
        let labels = table.labels();
        let (n, d) = (rows.len(), ops.len());
        let x = DMatrix::from_fn(n, d + 1, |i, j| if j < d { rows[i][j] } else { 1.0 });
        let mut gram = x.transpose() * &x;
        for j in 0..d {
            gram[(j, j)] += lambda;
        }
        let chol = gram
            .cholesky()
            .ok_or_else(|| Error::Invalid("singular normal equations; use a positive ridge strength".into()))?;
        let outputs = if classes == 2 { 1 } else { classes };
        let mut weights = Vec::with_capacity(outputs);
        let mut bias = Vec::with_capacity(outputs);
        for k in 0..outputs {
            let target = |y: usize| {
                let hit = if classes == 2 { y == 1 } else { y == k };
                if hit {
                    1.0
                } else {
                    -1.0
                }
            };
            let t = DVector::from_iterator(n, labels.iter().map(|&y| target(y)));
            let w = chol.solve(&(x.transpose() * t));
            weights.push(w.rows(0, d).iter().copied().collect());
            bias.push(w[d]);
        }
        Ok(DirectClassifier { ops: ops.to_vec(), weights, bias, classes })
    }

    pub fn scores(&self, table: &FeatureTable) -> Result<Vec<Vec<f64>>> {
        let refs: Vec<&PauliString> = self.ops.iter().collect();
        let rows = table.aligned(&refs)?;
        Ok(rows
            .iter()
            .map(|r| {
                self.weights
                    .iter()
                    .zip(&self.bias)
                    .map(|(w, b)| b + w.iter().zip(r).map(|(a, f)| a * f).sum::<f64>())
                    .collect()
            })
            .collect())
    }

    pub fn predict(&self, table: &FeatureTable) -> Result<Vec<usize>> {
        Ok(self
            .scores(table)?
            .iter()
            .map(|s| if self.classes == 2 { usize::from(s[0] > 0.0) } else { decide(s) })
            .collect())
    }

    pub fn evaluate(&self, table: &FeatureTable) -> Result<Evaluation> {
        Evaluation::from_predictions(self.classes, &self.predict(table)?, &table.labels())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(s: &str) -> PauliString {
        s.parse().unwrap()
    }

    #[test]
    fn binary_predictions() {
        assert_eq!(predict_binary(1.0), 1.0);
        assert_eq!(predict_binary(0.0), 0.5);
        assert!((predict_binary(-0.2) - 0.4).abs() < 1e-15);
        assert_eq!(predict_binary(3.0), 1.0);
    }

    #[test]
    fn multiclass_predictions() {
        assert_eq!(predict_multiclass(1.0, 1.0, 1.0), [1.0, 0.0, 0.0, 0.0]);
        assert_eq!(predict_multiclass(0.0, 0.0, 0.0), [0.25; 4]);
        assert_eq!(predict_multiclass(1.0, -1.0, -1.0), [0.0, 1.0, 0.0, 0.0]);
        let q = predict_multiclass(0.9, -0.8, 0.7);
        assert!((q.iter().sum::<f64>() - 1.0).abs() < 1e-15 && q.iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn loss_values() {
        let perfect = loss(Task::Binary, LossKind::CrossEntropy, &[vec![1.0], vec![-1.0]], &[1, 0]).unwrap();
        assert!(perfect <= 1e-9);
        let half = loss(Task::Binary, LossKind::CrossEntropy, &[vec![0.0], vec![0.0]], &[1, 0]).unwrap();
        assert!((half - std::f64::consts::LN_2).abs() < 1e-15);
        let mse = loss(Task::Binary, LossKind::Mse, &[vec![1.0], vec![-1.0]], &[1, 0]).unwrap();
        assert_eq!(mse, 0.0);
        let floor = loss(Task::Binary, LossKind::CrossEntropy, &[vec![-1.0]], &[1]).unwrap();
        assert!((floor + PROB_FLOOR.ln()).abs() < 1e-12);
    }

    #[test]
    fn sample_loss_gradients_match_differences() {
        let h = 1e-6;
        for task in [Task::Binary, Task::FourClass] {
            for kind in [LossKind::CrossEntropy, LossKind::Mse] {
                let e = match task {
                    Task::Binary => vec![0.3],
                    Task::FourClass => vec![0.2, -0.3, 0.15],
                };
                for label in 0..task.num_classes() {
                    let (_, g) = sample_loss(task, kind, &e, label);
                    for k in 0..e.len() {
                        let mut ep = e.clone();
                        ep[k] += h;
                        let mut em = e.clone();
                        em[k] -= h;
                        let fd =
                            (sample_loss(task, kind, &ep, label).0 - sample_loss(task, kind, &em, label).0) / (2.0 * h);
                        assert!((fd - g[k]).abs() < 1e-7, "{task:?} {kind:?} {label} {k}: {fd} vs {}", g[k]);
                    }
                }
            }
        }
    }

    #[test]
    fn evaluation_counts() {
        let e = Evaluation::from_predictions(2, &[0, 1, 1, 0], &[0, 1, 1, 0]).unwrap();
        assert_eq!(e.accuracy, 1.0);
        let e = Evaluation::from_predictions(2, &[1, 1, 1, 1], &[0, 1, 0, 1]).unwrap();
        assert_eq!(e.accuracy, 0.5);
        assert_eq!(e.confusion, vec![vec![0, 2], vec![0, 2]]);
    }

    fn toy_table(values: &[(f64, usize)]) -> FeatureTable {
        let ops = vec![p("ZI"), p("XI"), p("YI")];
        let mut t = FeatureTable::new(2, ops).unwrap();
        for (i, &(z, y)) in values.iter().enumerate() {
            t.push_row(i as u64, y, vec![z, 0.0, 0.0]).unwrap();
        }
        t
    }

    #[test]
    fn separable_toy_trains_to_perfect_accuracy() {
        let table = toy_table(&[(1.0, 1), (-1.0, 0), (1.0, 1), (-1.0, 0)]);
        let mut model =
            QcnnModel::build(2, LayoutStyle::Brick, Task::Binary, TruncationPolicy::with_max_weight(1)).unwrap();
        // Restrict to the single-qubit leaves the table provides.
        let leaves: Vec<usize> = ["ZI", "XI", "YI"].iter().filter_map(|t| model.graphs[0].leaf_index(&p(t))).collect();
        model.active[0] = model.graphs[0].active_from_leaves(leaves).unwrap();
        let cfg = TrainConfig { restarts: 2, ..Default::default() };
        let report = train(&mut model, &table, &cfg).unwrap();
        assert!(report.best_run().final_loss <= report.best_run().initial_loss);
        assert_eq!(model.evaluate(&table).unwrap().accuracy, 1.0);
        for r in &report.runs {
            assert!(r.history.windows(2).all(|w| w[1].loss <= w[0].loss));
        }
    }

    #[test]
    fn zero_variance_features_leave_theta_at_init() {
        let table = toy_table(&[(0.0, 1), (0.0, 0)]);
        let mut model =
            QcnnModel::build(2, LayoutStyle::Brick, Task::Binary, TruncationPolicy::with_max_weight(1)).unwrap();
        let leaves: Vec<usize> = ["ZI", "XI", "YI"].iter().filter_map(|t| model.graphs[0].leaf_index(&p(t))).collect();
        model.active[0] = model.graphs[0].active_from_leaves(leaves).unwrap();
        let report = train(&mut model, &table, &TrainConfig { restarts: 1, ..Default::default() }).unwrap();
        assert_eq!(report.runs[0].history.len(), 1);
        assert_eq!(report.runs[0].iterations, 0);
    }

    #[test]
    fn objective_gradient_matches_differences() {
        let mut model =
            QcnnModel::build(4, LayoutStyle::Brick, Task::FourClass, TruncationPolicy::with_max_weight(2)).unwrap();
        let ops = model.candidate_ops();
        let mut table = FeatureTable::new(4, ops.clone()).unwrap();
        let mut rng = substream(3, "test", 0);
        for i in 0..8 {
            table.push_row(i, (i % 4) as usize, ops.iter().map(|_| rng.random_range(-0.5..0.5)).collect()).unwrap();
        }
        model.select_active(&table, 30, None).unwrap();
        for kind in [LossKind::CrossEntropy, LossKind::Mse] {
            let obj = model.objective(&table, kind).unwrap();
            let theta: Vec<f64> = (0..model.circuit.num_params()).map(|_| rng.random_range(-0.4..0.4)).collect();
            let (_, g, _) = obj.value_and_grad(&theta).unwrap();
            let h = 1e-6;
            for k in (0..theta.len()).step_by(5) {
                let mut tp = theta.clone();
                tp[k] += h;
                let mut tm = theta.clone();
                tm[k] -= h;
                let fd = (obj.value(&tp).unwrap() - obj.value(&tm).unwrap()) / (2.0 * h);
                assert!((fd - g[k]).abs() < 1e-6 * (1.0 + fd.abs()), "{kind:?} {k}: {fd} vs {}", g[k]);
            }
        }
    }

    #[test]
    fn model_record_roundtrip() {
        let mut model =
            QcnnModel::build(4, LayoutStyle::Brick, Task::Binary, TruncationPolicy::with_max_weight(2)).unwrap();
        let leaves: Vec<usize> = (0..model.graphs[0].leaves().len()).step_by(2).collect();
        model.active[0] = model.graphs[0].active_from_leaves(leaves).unwrap();
        model.theta = (0..model.circuit.num_params()).map(|i| i as f64 * 0.01).collect();
        let record = model.to_record(BTreeMap::from([("test_acc".to_string(), 0.5)]));
        let text = serde_json::to_string(&record).unwrap();
        let back: ModelRecord = serde_json::from_str(&text).unwrap();
        assert_eq!(back, record);
        let rebuilt = QcnnModel::from_record(&back).unwrap();
        assert_eq!(rebuilt.active[0].leaves, model.active[0].leaves);
        assert_eq!(rebuilt.theta, model.theta);
    }

    #[test]
    fn direct_classifier_on_label_feature() {
        let table = toy_table(&[(1.0, 1), (-1.0, 0), (1.0, 1), (-1.0, 0)]);
        let clf = DirectClassifier::fit(&table, &[p("ZI")], 2, 0.1).unwrap();
        assert_eq!(clf.evaluate(&table).unwrap().accuracy, 1.0);
        // With balanced ±1 data the bias decouples: w = N / (N + λ).
        assert!((clf.weights[0][0] - 4.0 / 4.1).abs() < 1e-12);
        assert!(DirectClassifier::fit(&table, &[p("XI")], 2, 0.0).is_err());
    }
}
