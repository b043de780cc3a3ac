//! End-to-end classification experiments driven by a TOML config: solve and
//! label grid points, acquire features, select active operators, train the
//! QCNN surrogate, evaluate, and fit the direct low-body baseline.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::circuit::{LayoutStyle, Task};
use crate::dataset::{
    acquire_shadows, label_points, linspace, shadow_seed, solve_points, LabeledState, Manifest, ManifestRow,
};
use crate::error::{Error, Result};
use crate::hamiltonian::Model;
use crate::learn::{train, DirectClassifier, Evaluation, QcnnModel, TrainConfig, TrainReport};
use crate::propagation::TruncationPolicy;
use crate::rng::derive_seed;
use crate::shadows::{build_feature_table, exact_feature_table, FeatureTable};

/// One grid axis: `count` evenly spaced values of `param` in `[start, stop]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Axis {
    pub param: String,
    pub start: f64,
    pub stop: f64,
    pub count: usize,
}

/// Provenance written alongside a resolved config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunInfo {
    pub version: String,
    pub threads: usize,
    /// Derived seeds of the first state / first restart, for reference.
    pub seeds: BTreeMap<String, u64>,
}

fn default_layout() -> LayoutStyle {
    LayoutStyle::Brick
}
fn default_shadows() -> usize {
    500
}
fn default_budget() -> usize {
    400
}
fn default_ridge() -> f64 {
    1e-3
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: Model,
    pub n: usize,
    #[serde(default = "default_layout")]
    pub layout: LayoutStyle,
    /// Defaults to binary for two-phase models and four-class otherwise.
    #[serde(default)]
    pub task: Option<Task>,
    #[serde(default)]
    pub seed: u64,
    /// Shots per state; ignored in exact mode.
    #[serde(default = "default_shadows")]
    pub shadows: usize,
    /// Exact low-body expectations instead of shadow estimates.
    #[serde(default)]
    pub exact: bool,
    pub max_weight: usize,
    #[serde(default)]
    pub max_frequency: Option<u32>,
    #[serde(default)]
    pub min_coeff: f64,
    /// Active operators per readout observable.
    #[serde(default = "default_budget")]
    pub budget: usize,
    #[serde(default)]
    pub window: Option<usize>,
    /// Parameters held constant over the grid.
    #[serde(default)]
    pub fixed: BTreeMap<String, f64>,
    pub train: Vec<Axis>,
    pub test: Vec<Axis>,
    #[serde(default)]
    pub training: TrainConfig,
    /// Ridge strength of the direct classifier.
    #[serde(default = "default_ridge")]
    pub ridge: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub run: Option<RunInfo>,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn task(&self) -> Task {
        self.task.unwrap_or(if self.model.num_classes() == 2 { Task::Binary } else { Task::FourClass })
    }

    pub fn policy(&self) -> TruncationPolicy {
        TruncationPolicy {
            max_weight: Some(self.max_weight),
            max_frequency: self.max_frequency,
            min_coeff: self.min_coeff,
            ..Default::default()
        }
    }

    /// Fills every default explicitly, ties the training seed to the master
    /// seed, and records provenance.
    pub fn resolved(&self) -> Result<Self> {
        self.validate()?;
        let mut cfg = self.clone();
        cfg.task = Some(self.task());
        cfg.training.seed = self.seed;
        for (name, value) in model_defaults(self.model) {
            if !cfg.train.iter().chain(&cfg.test).any(|a| a.param == *name) {
                cfg.fixed.entry(name.to_string()).or_insert(*value);
            }
        }
        let seeds = BTreeMap::from([
            ("shadows[0]".to_string(), shadow_seed(self.seed, 0)),
            ("init[0]".to_string(), derive_seed(self.seed, "init", 0)),
        ]);
        cfg.run = Some(RunInfo { version: env!("CARGO_PKG_VERSION").to_string(), threads: 1, seeds });
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let names = self.model.param_names();
        if self.task().num_classes() != self.model.num_classes() {
            return Err(Error::Config(format!("{} has {} phases", self.model, self.model.num_classes())));
        }
        for (split, axes) in [("train", &self.train), ("test", &self.test)] {
            if axes.is_empty() {
                return Err(Error::Config(format!("{split} grid has no axes")));
            }
            for a in axes {
                if !names.contains(&a.param.as_str()) {
                    return Err(Error::Config(format!("unknown {} parameter {:?}", self.model, a.param)));
                }
                if a.count == 0 {
                    return Err(Error::Config(format!("{split} axis {} has count 0", a.param)));
                }
            }
        }
        for k in self.fixed.keys() {
            if !names.contains(&k.as_str()) {
                return Err(Error::Config(format!("unknown {} parameter {k:?}", self.model)));
            }
        }
        if !self.exact && self.shadows == 0 {
            return Err(Error::Config("shadows must be positive unless exact = true".into()));
        }
        if self.budget == 0 {
            return Err(Error::Config("budget must be positive".into()));
        }
        if !(self.ridge > 0.0) {
            return Err(Error::Config("ridge must be positive".into()));
        }
        self.policy().validate()?;
        self.training.validate()
    }

    /// Cartesian product of the axes (first axis slowest) as full parameter
    /// vectors in model order.
    pub fn grid(&self, axes: &[Axis]) -> Result<Vec<Vec<f64>>> {
        let names = self.model.param_names();
        let mut points: Vec<BTreeMap<&str, f64>> = vec![BTreeMap::new()];
        for a in axes {
            let values = linspace(a.start, a.stop, a.count);
            points = points
                .into_iter()
                .flat_map(|p| {
                    values.iter().map(move |&v| {
                        let mut q = p.clone();
                        q.insert(a.param.as_str(), v);
                        q
                    })
                })
                .collect();
        }
        points
            .into_iter()
            .map(|p| {
                names
                    .iter()
                    .map(|name| {
                        p.get(name)
                            .or_else(|| self.fixed.get(*name))
                            .or_else(|| model_defaults(self.model).iter().find(|(k, _)| k == name).map(|(_, v)| v))
                            .copied()
                            .ok_or_else(|| Error::Config(format!("parameter {name} is neither on an axis nor fixed")))
                    })
                    .collect()
            })
            .collect()
    }
}

/// Parameters the labeling rules assume when not given explicitly.
pub fn model_defaults(model: Model) -> &'static [(&'static str, f64)] {
    match model {
        Model::Xxx => &[("j1", 1.0)],
        Model::Haldane => &[("j", 1.0), ("h1", 0.5)],
        Model::Annni => &[("j1", 1.0)],
        Model::Cluster => &[],
    }
}

/// Solved and labeled states of both splits; test ids follow the train ids.
#[derive(Debug, Clone)]
pub struct ExperimentData {
    pub train: Vec<LabeledState>,
    pub test: Vec<LabeledState>,
}

impl ExperimentData {
    pub fn solve(cfg: &ExperimentConfig) -> Result<Self> {
        cfg.validate()?;
        let train_pts = label_points(cfg.model, cfg.n, &cfg.grid(&cfg.train)?, None)?;
        let offset = train_pts.len() as u64;
        let mut test_pts = label_points(cfg.model, cfg.n, &cfg.grid(&cfg.test)?, None)?;
        for p in &mut test_pts {
            p.state_id += offset;
        }
        Ok(ExperimentData { train: solve_points(&train_pts)?, test: solve_points(&test_pts)? })
    }

    pub fn manifest(&self, model: Model, states: &[LabeledState]) -> Manifest {
        let rows = states
            .iter()
            .map(|s| ManifestRow {
                state_id: s.point.state_id,
                n: s.point.spec.n,
                params: s.point.spec.params.clone(),
                label: s.point.label,
                label_source: s.point.label_source,
                energy: s.ground.energy,
                gap: s.ground.gap,
                degenerate: s.ground.degenerate,
                shadow_file: None,
                state_file: None,
            })
            .collect();
        Manifest { model, rows }
    }
}

/// Feature table over `ops` for the given states (exact or shadow mode).
pub fn feature_table(
    cfg: &ExperimentConfig,
    states: &[LabeledState],
    ops: &[crate::PauliString],
) -> Result<FeatureTable> {
    if cfg.exact {
        let rows: Vec<_> = states.iter().map(|s| (s.point.state_id, s.point.label, &s.ground.state)).collect();
        exact_feature_table(&rows, ops)
    } else {
        build_feature_table(&acquire_shadows(states, cfg.shadows, cfg.seed)?, ops)
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentResult {
    pub config: ExperimentConfig,
    pub model: QcnnModel,
    pub report: TrainReport,
    /// Test accuracy of every restart, in run order.
    pub run_test_accuracy: Vec<f64>,
    pub train_eval: Evaluation,
    /// Test evaluation of the run selected by lowest training loss.
    pub test_eval: Evaluation,
    pub direct_train: Evaluation,
    pub direct_test: Evaluation,
    /// Whether the operator budget exceeded the available candidates.
    pub budget_truncated: bool,
    pub train_table: FeatureTable,
    pub test_table: FeatureTable,
}

impl ExperimentResult {
    pub fn best_of_runs_test_accuracy(&self) -> f64 {
        self.run_test_accuracy.iter().copied().fold(0.0, f64::max)
    }

    pub fn summary(&self) -> BTreeMap<String, f64> {
        BTreeMap::from([
            ("train_accuracy".into(), self.train_eval.accuracy),
            ("test_accuracy".into(), self.test_eval.accuracy),
            ("best_of_runs_test_accuracy".into(), self.best_of_runs_test_accuracy()),
            ("final_loss".into(), self.report.best_run().final_loss),
            ("mean_final_loss".into(), self.report.mean_final_loss()),
            ("direct_train_accuracy".into(), self.direct_train.accuracy),
            ("direct_test_accuracy".into(), self.direct_test.accuracy),
            ("line_search_failures".into(), self.report.line_search_failures as f64),
        ])
    }

    fn runs_csv(&self) -> String {
        let mut s = String::from("run,initial_loss,final_loss,train_acc,test_acc,iterations,termination,selected\n");
        for (i, r) in self.report.runs.iter().enumerate() {
            writeln!(
                s,
                "{i},{:?},{:?},{:?},{:?},{},{:?},{}",
                r.initial_loss,
                r.final_loss,
                r.train_acc,
                self.run_test_accuracy[i],
                r.iterations,
                r.termination,
                i == self.report.best
            )
            .unwrap();
        }
        s
    }

    fn predictions_csv(&self) -> String {
        let mut s = String::from("state_id,label,prediction,direct_prediction\n");
        for (i, row) in self.test_table.rows().iter().enumerate() {
            writeln!(
                s,
                "{},{},{},{}",
                row.state_id, row.label, self.test_eval.predictions[i], self.direct_test.predictions[i]
            )
            .unwrap();
        }
        s
    }

    fn active_csv(&self) -> String {
        let mut s = String::from("observable,rank,pauli,variance\n");
        for (o, (g, a)) in self.model.graphs.iter().zip(&self.model.active).enumerate() {
            for (rank, (p, score)) in a.paulis(g).iter().zip(&a.scores).enumerate() {
                writeln!(s, "{o},{rank},{},{:?}", p, score).unwrap();
            }
        }
        s
    }

    /// Writes the resolved config and every numeric output under `out`.
    pub fn write(&self, data: &ExperimentData, out: &Path) -> Result<()> {
        std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
        let put = |name: &str, text: String| {
            let p = out.join(name);
            std::fs::write(&p, text).map_err(|e| Error::io(&p, e))
        };
        put("run.toml", self.config.to_toml())?;
        put("train_manifest.csv", data.manifest(self.config.model, &data.train).to_csv())?;
        put("test_manifest.csv", data.manifest(self.config.model, &data.test).to_csv())?;
        put("train_features.csv", self.train_table.to_csv())?;
        put("test_features.csv", self.test_table.to_csv())?;
        put("active.csv", self.active_csv())?;
        put("metrics.csv", self.report.metrics_csv())?;
        put("runs.csv", self.runs_csv())?;
        put("predictions.csv", self.predictions_csv())?;
        let mut s = String::from("metric,value\n");
        for (k, v) in self.summary() {
            writeln!(s, "{k},{v:?}").unwrap();
        }
        put("summary.csv", s)?;
        self.model.to_record(self.summary()).save(&out.join("model.json"))
    }
}

/// Runs the full pipeline on already solved states.
pub fn run_with_data(cfg: &ExperimentConfig, data: &ExperimentData) -> Result<ExperimentResult> {
    let config = cfg.resolved()?;
    let task = config.task();
    let mut model = QcnnModel::build(config.n, config.layout, task, config.policy())?;
    let ops = model.candidate_ops();
    let train_all = feature_table(&config, &data.train, &ops)?;
    let test_all = feature_table(&config, &data.test, &ops)?;
    let budget_truncated = model.select_active(&train_all, config.budget, config.window)?;
    let required = model.required_ops();
    let train_table = restrict(&train_all, &required)?;
    let test_table = restrict(&test_all, &required)?;
    let report = train(&mut model, &train_table, &config.training)?;
    let mut run_test_accuracy = Vec::with_capacity(report.runs.len());
    let mut probe = model.clone();
    for r in &report.runs {
        probe.theta.clone_from(&r.theta);
        run_test_accuracy.push(probe.evaluate(&test_table)?.accuracy);
    }
    let train_eval = model.evaluate(&train_table)?;
    let test_eval = model.evaluate(&test_table)?;
    let direct = DirectClassifier::fit(&train_table, &required, task.num_classes(), config.ridge)?;
    let direct_train = direct.evaluate(&train_table)?;
    let direct_test = direct.evaluate(&test_table)?;
    Ok(ExperimentResult {
        config,
        model,
        report,
        run_test_accuracy,
        train_eval,
        test_eval,
        direct_train,
        direct_test,
        budget_truncated,
        train_table,
        test_table,
    })
}

/// Keeps only the columns in `ops`, in `ops` order.
fn restrict(table: &FeatureTable, ops: &[crate::PauliString]) -> Result<FeatureTable> {
    let cols: Vec<usize> = ops
        .iter()
        .map(|p| table.column_index(p).ok_or_else(|| Error::MissingFeature(p.to_text())))
        .collect::<Result<_>>()?;
    let mut out = FeatureTable::new(table.num_qubits(), ops.to_vec())?;
    for row in table.rows() {
        out.push_row(row.state_id, row.label, cols.iter().map(|&c| row.values[c]).collect())?;
    }
    Ok(out)
}

/// Solves, runs, and writes everything under `out`.
pub fn run_experiment(cfg: &ExperimentConfig, out: Option<&Path>) -> Result<ExperimentResult> {
    let data = ExperimentData::solve(cfg)?;
    let result = run_with_data(cfg, &data)?;
    if let Some(dir) = out {
        result.write(&data, dir)?;
    }
    Ok(result)
}
