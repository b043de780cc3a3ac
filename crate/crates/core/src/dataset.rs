//! Labeled ground-state datasets over parameter grids, with shadow files,
//! optional statevector caches, and a CSV manifest.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::hamiltonian::{assign_label, ground_state, GroundState, HamiltonianSpec, LabelSource, Model};
use crate::rng::derive_seed;
use crate::shadows::{sample_shadows, ShadowSet};
use crate::statevector::StateVector;

/// `k` evenly spaced values from `a` to `b` inclusive.
pub fn linspace(a: f64, b: f64, k: usize) -> Vec<f64> {
    match k {
        0 => vec![],
        1 => vec![a],
        _ => (0..k).map(|i| a + (b - a) * i as f64 / (k - 1) as f64).collect(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DataPoint {
    pub state_id: u64,
    pub spec: HamiltonianSpec,
    pub label: usize,
    pub label_source: LabelSource,
}

/// Labels each parameter point, taking `external` labels as authoritative
/// when given.
pub fn label_points(model: Model, n: usize, params: &[Vec<f64>], external: Option<&[usize]>) -> Result<Vec<DataPoint>> {
    if let Some(ext) = external {
        if ext.len() != params.len() {
            return Err(Error::Invalid(format!("{} external labels for {} points", ext.len(), params.len())));
        }
    }
    params
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let spec = HamiltonianSpec::new(model, n, p.clone())?;
            let (label, label_source) = match external {
                Some(ext) => (ext[i], LabelSource::External),
                None => assign_label(&spec)?,
            };
            Ok(DataPoint { state_id: i as u64, spec, label, label_source })
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct LabeledState {
    pub point: DataPoint,
    pub ground: GroundState,
}

pub fn solve_points(points: &[DataPoint]) -> Result<Vec<LabeledState>> {
    points.iter().map(|p| Ok(LabeledState { point: p.clone(), ground: ground_state(&p.spec)? })).collect()
}

/// Shadow seed of one state, derived from the master seed.
pub fn shadow_seed(master: u64, state_id: u64) -> u64 {
    derive_seed(master, "shadows", state_id)
}

pub fn acquire_shadows(states: &[LabeledState], shots: usize, master_seed: u64) -> Result<Vec<ShadowSet>> {
    states
        .iter()
        .map(|s| {
            let id = s.point.state_id;
            let mut set = sample_shadows(&s.ground.state, shots, shadow_seed(master_seed, id))?;
            set.state_id = id;
            set.label = s.point.label;
            Ok(set)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ManifestRow {
    pub state_id: u64,
    pub n: usize,
    pub params: Vec<f64>,
    pub label: usize,
    pub label_source: LabelSource,
    pub energy: f64,
    pub gap: f64,
    pub degenerate: bool,
    pub shadow_file: Option<String>,
    pub state_file: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Manifest {
    pub model: Model,
    pub rows: Vec<ManifestRow>,
}

const XXX_NOTE: &str =
    "# xxx bond convention: 1-based bond i couples sites i,i+1 and carries j2 when i is odd, j1 when even";

impl Manifest {
    pub fn to_csv(&self) -> String {
        let mut s = String::new();
        if self.model == Model::Xxx {
            s.push_str(XXX_NOTE);
            s.push('\n');
        }
        s.push_str("state_id,model,n");
        for name in self.model.param_names() {
            s.push(',');
            s.push_str(name);
        }
        s.push_str(",label,label_source,energy,gap,degenerate,shadow_file,state_file\n");
        for r in &self.rows {
            write!(s, "{},{},{}", r.state_id, self.model, r.n).unwrap();
            for p in &r.params {
                write!(s, ",{p:?}").unwrap();
            }
            writeln!(
                s,
                ",{},{},{:?},{:?},{},{},{}",
                r.label,
                r.label_source,
                r.energy,
                r.gap,
                r.degenerate,
                r.shadow_file.as_deref().unwrap_or(""),
                r.state_file.as_deref().unwrap_or("")
            )
            .unwrap();
        }
        s
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        const FMT: &str = "manifest";
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty() && !l.starts_with('#'));
        let (_, header) = lines.next().ok_or_else(|| Error::format(FMT, 1, "missing header"))?;
        let cols: Vec<&str> = header.split(',').map(str::trim).collect();
        let mut model = None;
        let mut rows = Vec::new();
        for (i, line) in lines {
            let f: Vec<&str> = line.split(',').map(str::trim).collect();
            let bad = |what: &str| Error::format(FMT, i + 1, format!("bad {what}"));
            if f.len() != cols.len() {
                return Err(bad("field count"));
            }
            let m: Model = f[1].parse().map_err(|_| bad("model"))?;
            if model.is_some_and(|x| x != m) {
                return Err(bad("model (mixed models)"));
            }
            model = Some(m);
            let k = m.param_names().len();
            if cols.len() != 3 + k + 7 {
                return Err(Error::format(FMT, 1, "header does not match the model's parameters"));
            }
            let params = f[3..3 + k]
                .iter()
                .map(|v| v.parse::<f64>().map_err(|_| bad("parameter")))
                .collect::<Result<Vec<_>>>()?;
            let rest = &f[3 + k..];
            let opt = |s: &str| (!s.is_empty()).then(|| s.to_string());
            rows.push(ManifestRow {
                state_id: f[0].parse().map_err(|_| bad("state_id"))?,
                n: f[2].parse().map_err(|_| bad("n"))?,
                params,
                label: rest[0].parse().map_err(|_| bad("label"))?,
                label_source: rest[1].parse().map_err(|_| bad("label_source"))?,
                energy: rest[2].parse().map_err(|_| bad("energy"))?,
                gap: rest[3].parse().map_err(|_| bad("gap"))?,
                degenerate: rest[4].parse().map_err(|_| bad("degenerate"))?,
                shadow_file: opt(rest[5]),
                state_file: opt(rest[6]),
            });
        }
        let model = model.ok_or_else(|| Error::format(FMT, 1, "no rows"))?;
        Ok(Manifest { model, rows })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_csv(&text)
    }

    /// Shadow sets referenced by the manifest, relative to `dir`.
    pub fn load_shadows(&self, dir: &Path) -> Result<Vec<ShadowSet>> {
        self.rows
            .iter()
            .map(|r| {
                let file = r
                    .shadow_file
                    .as_ref()
                    .ok_or_else(|| Error::Invalid(format!("state {} has no shadow file", r.state_id)))?;
                let mut set = ShadowSet::load(&dir.join(file))?;
                // The manifest label is authoritative.
                set.label = r.label;
                Ok(set)
            })
            .collect()
    }

    /// Cached statevectors referenced by the manifest, relative to `dir`.
    pub fn load_states(&self, dir: &Path) -> Result<Vec<(u64, usize, StateVector)>> {
        self.rows
            .iter()
            .map(|r| {
                let file = r
                    .state_file
                    .as_ref()
                    .ok_or_else(|| Error::Invalid(format!("state {} has no statevector cache", r.state_id)))?;
                let (id, sv) = StateVector::read_cache(&dir.join(file))?;
                if id != r.state_id {
                    return Err(Error::Invalid(format!("cache {file} holds state {id}, expected {}", r.state_id)));
                }
                Ok((id, r.label, sv))
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetConfig {
    pub model: Model,
    pub n: usize,
    pub points: Vec<Vec<f64>>,
    pub labels: Option<Vec<usize>>,
    pub shots: usize,
    pub seed: u64,
    /// Also write statevector caches for exact-mode features.
    pub exact: bool,
}

/// Solves, labels, and samples every grid point; writes shadow files under
/// `out/shadows`, caches under `out/states`, and `out/manifest.csv`.
pub fn generate_dataset(cfg: &DatasetConfig, out: &Path) -> Result<Manifest> {
    if cfg.shots == 0 && !cfg.exact {
        return Err(Error::Invalid("a dataset needs shots > 0 or exact mode".into()));
    }
    let points = label_points(cfg.model, cfg.n, &cfg.points, cfg.labels.as_deref())?;
    let mkdir = |p: PathBuf| std::fs::create_dir_all(&p).map_err(|e| Error::io(&p, e)).map(|_| p);
    mkdir(out.to_path_buf())?;
    let shadow_dir = if cfg.shots > 0 { Some(mkdir(out.join("shadows"))?) } else { None };
    let state_dir = if cfg.exact { Some(mkdir(out.join("states"))?) } else { None };
    let mut rows = Vec::with_capacity(points.len());
    for point in points {
        let ground = ground_state(&point.spec)?;
        let id = point.state_id;
        let shadow_file = match &shadow_dir {
            Some(dir) => {
                let mut set = sample_shadows(&ground.state, cfg.shots, shadow_seed(cfg.seed, id))?;
                set.state_id = id;
                set.label = point.label;
                let name = format!("state_{id:05}.txt");
                set.save(&dir.join(&name))?;
                Some(format!("shadows/{name}"))
            }
            None => None,
        };
        let state_file = match &state_dir {
            Some(dir) => {
                let name = format!("state_{id:05}.bin");
                ground.state.write_cache(&dir.join(&name), id)?;
                Some(format!("states/{name}"))
            }
            None => None,
        };
        rows.push(ManifestRow {
            state_id: id,
            n: cfg.n,
            params: point.spec.params.clone(),
            label: point.label,
            label_source: point.label_source,
            energy: ground.energy,
            gap: ground.gap,
            degenerate: ground.degenerate,
            shadow_file,
            state_file,
        });
    }
    let manifest = Manifest { model: cfg.model, rows };
    manifest.save(&out.join("manifest.csv"))?;
    Ok(manifest)
}
