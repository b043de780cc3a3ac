use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use lowbody_core::check::oracle_equivalence;
use lowbody_core::dataset::{generate_dataset, linspace, DatasetConfig, Manifest};
use lowbody_core::experiment::model_defaults;
use lowbody_core::learn::{ModelRecord, QcnnModel};
use lowbody_core::purity::non_crossing_layout;
use lowbody_core::statevector::StateVector;
use lowbody_core::{
    build_feature_table, exact_feature_table, purities_mc, purities_network, purities_recursive, run_experiment,
    sample_shadows, Error, ExperimentConfig, FeatureTable, LayoutStyle, Model, ShadowSet, Task, TruncationPolicy,
};

#[derive(Parser)]
#[command(name = "lowbody", version, about = "Low-bodyness QCNN simulation, training and analysis")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve, label and sample ground states over a parameter grid.
    Dataset(DatasetArgs),
    /// Sample classical shadows of a cached state, or estimate Paulis from a shadow file.
    Shadows(ShadowsArgs),
    /// Build the feature table of every surrogate leaf for a dataset.
    Features(FeaturesArgs),
    /// Rank surrogate leaves by feature variance and keep the top ones.
    Select(SelectArgs),
    /// Build and save surrogate graphs for the readout observables.
    Surrogate(SurrogateArgs),
    /// Run a full training experiment from a config file.
    Train(TrainArgs),
    /// Evaluate a trained model on a feature table.
    Eval(EvalArgs),
    /// Average k-purities of a Haar-random QCNN.
    Purity(PurityArgs),
    /// Check propagation and surrogate against the dense simulator.
    Check(CheckArgs),
}

#[derive(Args)]
struct ModelShape {
    #[arg(long, default_value = "brick")]
    layout: LayoutStyle,
    /// binary or four-class; defaults to the dataset model's phase count.
    #[arg(long)]
    task: Option<Task>,
    #[arg(long, default_value_t = 2)]
    max_weight: usize,
    #[arg(long)]
    max_frequency: Option<u32>,
}

impl ModelShape {
    fn policy(&self) -> TruncationPolicy {
        TruncationPolicy { max_frequency: self.max_frequency, ..TruncationPolicy::with_max_weight(self.max_weight) }
    }

    fn build(&self, n: usize, default_task: Task) -> lowbody_core::Result<QcnnModel> {
        QcnnModel::build(n, self.layout, self.task.unwrap_or(default_task), self.policy())
    }
}

#[derive(Args)]
struct DatasetArgs {
    #[arg(long)]
    model: Model,
    #[arg(long)]
    n: usize,
    /// Grid axis `name=start:stop:count`; repeat for a product grid.
    #[arg(long = "grid", required = true, value_parser = parse_axis)]
    grid: Vec<(String, Vec<f64>)>,
    /// Constant parameter `name=value`.
    #[arg(long = "fixed", value_parser = parse_fixed)]
    fixed: Vec<(String, f64)>,
    #[arg(long, default_value_t = 0)]
    shots: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Also cache statevectors for exact-mode features.
    #[arg(long)]
    exact: bool,
    /// File with one external label per grid point (authoritative).
    #[arg(long)]
    labels: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ShadowsArgs {
    /// Statevector cache to sample from.
    #[arg(long, conflicts_with = "input")]
    state: Option<PathBuf>,
    /// Existing shadow file.
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long, default_value_t = 1000)]
    shots: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Pauli string to estimate; repeatable.
    #[arg(long = "estimate")]
    estimate: Vec<String>,
    /// Median-of-means group count (plain mean when absent).
    #[arg(long)]
    groups: Option<usize>,
}

#[derive(Args)]
struct FeaturesArgs {
    /// Dataset directory holding manifest.csv.
    #[arg(long)]
    dataset: PathBuf,
    #[command(flatten)]
    shape: ModelShape,
    /// Use cached statevectors instead of shadows.
    #[arg(long)]
    exact: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SelectArgs {
    #[arg(long)]
    features: PathBuf,
    #[command(flatten)]
    shape: ModelShape,
    #[arg(long, default_value_t = 400)]
    budget: usize,
    #[arg(long)]
    window: Option<usize>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SurrogateArgs {
    #[arg(long)]
    n: usize,
    #[command(flatten)]
    shape: ModelShape,
    /// Directory receiving one graph file per readout observable.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    shadows: Option<usize>,
    #[arg(long)]
    exact: bool,
    #[arg(long)]
    max_weight: Option<usize>,
    #[arg(long)]
    budget: Option<usize>,
    #[arg(long)]
    window: Option<usize>,
    #[arg(long)]
    restarts: Option<usize>,
    #[arg(long)]
    max_iter: Option<usize>,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    features: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum PurityMethod {
    Recursive,
    Network,
    Mc,
}

#[derive(Args)]
struct PurityArgs {
    #[arg(long, default_value = "recursive")]
    method: PurityMethod,
    /// Layer count of the non-crossing QCNN on 2^L qubits.
    #[arg(long)]
    layers: Option<usize>,
    /// Qubit count for network/mc with an explicit layout.
    #[arg(long, conflicts_with = "layers")]
    n: Option<usize>,
    #[arg(long, default_value = "non-crossing")]
    layout: LayoutStyle,
    #[arg(long, default_value_t = 1000)]
    samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CheckArgs {
    #[arg(long, default_value_t = 8)]
    n: usize,
    #[arg(long, default_value_t = 20)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "brick")]
    layout: LayoutStyle,
    #[arg(long, default_value_t = 1e-9)]
    tol: f64,
}

fn parse_axis(s: &str) -> Result<(String, Vec<f64>), String> {
    let (name, range) = s.split_once('=').ok_or("expected name=start:stop:count")?;
    let parts: Vec<&str> = range.split(':').collect();
    let [a, b, k] = parts[..] else {
        return Err("expected name=start:stop:count".into());
    };
    let num = |t: &str| t.parse::<f64>().map_err(|e| format!("{t:?}: {e}"));
    let count = k.parse::<usize>().map_err(|e| format!("{k:?}: {e}"))?;
    Ok((name.to_string(), linspace(num(a)?, num(b)?, count)))
}

fn parse_fixed(s: &str) -> Result<(String, f64), String> {
    let (name, v) = s.split_once('=').ok_or("expected name=value")?;
    Ok((name.to_string(), v.parse().map_err(|e| format!("{v:?}: {e}"))?))
}

fn default_task(model: Model) -> Task {
    if model.num_classes() == 2 {
        Task::Binary
    } else {
        Task::FourClass
    }
}

fn read_to_string(path: &Path) -> lowbody_core::Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::Invalid(format!("{}: {e}", path.display())))
}

fn write(path: &Path, text: &str) -> lowbody_core::Result<()> {
    std::fs::write(path, text).map_err(|e| Error::Invalid(format!("{}: {e}", path.display())))
}

fn dataset(a: DatasetArgs) -> lowbody_core::Result<()> {
    let names = a.model.param_names();
    for name in a.grid.iter().map(|(n, _)| n).chain(a.fixed.iter().map(|(n, _)| n)) {
        if !names.contains(&name.as_str()) {
            return Err(Error::Invalid(format!("unknown {} parameter {name:?}", a.model)));
        }
    }
    let mut base: Vec<(String, f64)> = model_defaults(a.model).iter().map(|(k, v)| (k.to_string(), *v)).collect();
    base.extend(a.fixed.iter().cloned());
    let mut points: Vec<Vec<(String, f64)>> = vec![base];
    for (name, values) in &a.grid {
        points = points
            .into_iter()
            .flat_map(|p| {
                values.iter().map(move |&v| {
                    let mut q = p.clone();
                    q.push((name.clone(), v));
                    q
                })
            })
            .collect();
    }
    let points =
        points
            .iter()
            .map(|p| {
                names
                    .iter()
                    .map(|name| {
                        p.iter().rev().find(|(k, _)| k == name).map(|(_, v)| *v).ok_or_else(|| {
                            Error::Invalid(format!("parameter {name} is neither on a grid axis nor fixed"))
                        })
                    })
                    .collect()
            })
            .collect::<lowbody_core::Result<Vec<Vec<f64>>>>()?;
    let labels = match &a.labels {
        Some(path) => Some(
            read_to_string(path)?
                .lines()
                .filter(|l| !l.trim().is_empty())
                .map(|l| l.trim().parse::<usize>().map_err(|e| Error::Invalid(format!("label {l:?}: {e}"))))
                .collect::<lowbody_core::Result<Vec<_>>>()?,
        ),
        None => None,
    };
    let cfg = DatasetConfig { model: a.model, n: a.n, points, labels, shots: a.shots, seed: a.seed, exact: a.exact };
    let manifest = generate_dataset(&cfg, &a.out)?;
    let mut counts = vec![0usize; a.model.num_classes()];
    for r in &manifest.rows {
        counts[r.label] += 1;
    }
    println!("wrote {} states to {} (per class {:?})", manifest.rows.len(), a.out.display(), counts);
    Ok(())
}

fn shadows(a: ShadowsArgs) -> lowbody_core::Result<()> {
    let set = match (&a.state, &a.input) {
        (Some(path), None) => {
            let (id, sv) = StateVector::read_cache(path)?;
            let mut set = sample_shadows(&sv, a.shots, a.seed)?;
            set.state_id = id;
            set
        }
        (None, Some(path)) => ShadowSet::load(path)?,
        _ => return Err(Error::Invalid("give exactly one of --state or --input".into())),
    };
    if let Some(out) = &a.out {
        set.save(out)?;
        println!("wrote {} snapshots to {}", set.records.len(), out.display());
    }
    for text in &a.estimate {
        let p = text.parse()?;
        let v = match a.groups {
            Some(g) => set.estimate_median_of_means(&p, g)?,
            None => set.estimate(&p)?,
        };
        println!("{text},{v:?}");
    }
    Ok(())
}

fn features(a: FeaturesArgs) -> lowbody_core::Result<()> {
    let manifest = Manifest::load(&a.dataset.join("manifest.csv"))?;
    let n = manifest.rows.first().ok_or_else(|| Error::Invalid("empty manifest".into()))?.n;
    let model = a.shape.build(n, default_task(manifest.model))?;
    let ops = model.candidate_ops();
    let table = if a.exact {
        let states = manifest.load_states(&a.dataset)?;
        let rows: Vec<_> = states.iter().map(|(id, label, sv)| (*id, *label, sv)).collect();
        exact_feature_table(&rows, &ops)?
    } else {
        build_feature_table(&manifest.load_shadows(&a.dataset)?, &ops)?
    };
    table.save(&a.out)?;
    println!("wrote {} rows x {} operators to {}", table.len(), ops.len(), a.out.display());
    Ok(())
}

fn select(a: SelectArgs) -> lowbody_core::Result<()> {
    let table = FeatureTable::load(&a.features)?;
    let task =
        a.shape.task.unwrap_or(if table.labels().iter().any(|&l| l > 1) { Task::FourClass } else { Task::Binary });
    let mut model = QcnnModel::build(table.num_qubits(), a.shape.layout, task, a.shape.policy())?;
    if model.select_active(&table, a.budget, a.window)? {
        eprintln!("warning: budget {} exceeds the available candidates", a.budget);
    }
    let mut s = String::from("observable,rank,pauli,variance\n");
    for (o, (g, set)) in model.graphs.iter().zip(&model.active).enumerate() {
        for (rank, (p, v)) in set.paulis(g).iter().zip(&set.scores).enumerate() {
            s.push_str(&format!("{o},{rank},{p},{v:?}\n"));
        }
        println!("observable {o}: kept {} of {} leaves", set.len(), g.leaves().len());
    }
    write(&a.out, &s)
}

fn surrogate(a: SurrogateArgs) -> lowbody_core::Result<()> {
    let model = a.shape.build(a.n, a.shape.task.unwrap_or(Task::Binary))?;
    for (o, (g, obs)) in model.graphs.iter().zip(&model.observables).enumerate() {
        println!("{o},{obs},nodes={},edges={},leaves={}", g.num_nodes(), g.num_edges(), g.leaves().len());
        if let Some(dir) = &a.out {
            std::fs::create_dir_all(dir).map_err(|e| Error::Invalid(format!("{}: {e}", dir.display())))?;
            g.save(&dir.join(format!("observable_{o}.ppsg")))?;
        }
    }
    Ok(())
}

fn train(a: TrainArgs) -> lowbody_core::Result<()> {
    let mut cfg = ExperimentConfig::load(&a.config)?;
    cfg.run = None;
    if let Some(v) = a.seed {
        cfg.seed = v;
    }
    if let Some(v) = a.shadows {
        cfg.shadows = v;
    }
    cfg.exact |= a.exact;
    if let Some(v) = a.max_weight {
        cfg.max_weight = v;
    }
    if let Some(v) = a.budget {
        cfg.budget = v;
    }
    if a.window.is_some() {
        cfg.window = a.window;
    }
    if let Some(v) = a.restarts {
        cfg.training.restarts = v;
    }
    if let Some(v) = a.max_iter {
        cfg.training.max_iter = v;
    }
    let result = run_experiment(&cfg, a.out.as_deref())?;
    if result.budget_truncated {
        eprintln!("warning: budget {} exceeds the available candidates", cfg.budget);
    }
    for (k, v) in result.summary() {
        println!("{k},{v}");
    }
    if let Some(out) = &a.out {
        println!("outputs in {}", out.display());
    }
    Ok(())
}

fn eval(a: EvalArgs) -> lowbody_core::Result<()> {
    let model = QcnnModel::from_record(&ModelRecord::load(&a.model)?)?;
    let table = FeatureTable::load(&a.features)?;
    let e = model.evaluate(&table)?;
    println!("accuracy,{}", e.accuracy);
    for (y, row) in e.confusion.iter().enumerate() {
        let cells: Vec<String> = row.iter().map(usize::to_string).collect();
        println!("confusion[{y}],{}", cells.join(","));
    }
    Ok(())
}

fn purity(a: PurityArgs) -> lowbody_core::Result<()> {
    let layout = || match (a.layers, a.n) {
        (Some(l), None) => non_crossing_layout(l),
        (None, Some(n)) => lowbody_core::circuit::build_layout(n, a.layout),
        _ => Err(Error::Invalid("give --layers or --n".into())),
    };
    let dist = match a.method {
        PurityMethod::Recursive => {
            purities_recursive(a.layers.ok_or_else(|| Error::Invalid("recursive needs --layers".into()))?)?
        }
        PurityMethod::Network => purities_network(&layout()?)?,
        PurityMethod::Mc => purities_mc(&layout()?, a.samples, a.seed)?,
    };
    match &a.out {
        Some(path) => {
            dist.save(path)?;
            println!("n={} total={:?} wrote {}", dist.n, dist.total(), path.display());
        }
        None => print!("{}", dist.to_csv()),
    }
    Ok(())
}

fn check(a: CheckArgs) -> lowbody_core::Result<bool> {
    let r = oracle_equivalence(a.n, a.layout, a.trials, a.seed)?;
    let ok = r.max_gap() < a.tol;
    println!(
        "n={} trials={} propagate_gap={:.3e} surrogate_gap={:.3e} tol={:.1e} {}",
        r.n,
        r.trials,
        r.max_propagate_gap,
        r.max_surrogate_gap,
        a.tol,
        if ok { "PASS" } else { "FAIL" }
    );
    Ok(ok)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Dataset(a) => dataset(a).map(|_| true),
        Command::Shadows(a) => shadows(a).map(|_| true),
        Command::Features(a) => features(a).map(|_| true),
        Command::Select(a) => select(a).map(|_| true),
        Command::Surrogate(a) => surrogate(a).map(|_| true),
        Command::Train(a) => train(a).map(|_| true),
        Command::Eval(a) => eval(a).map(|_| true),
        Command::Purity(a) => purity(a).map(|_| true),
        Command::Check(a) => check(a),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
