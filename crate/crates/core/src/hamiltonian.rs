//! The four spin-chain models, their phase labels, and desk-scale ground
//! states (dense diagonalization for small chains, Lanczos beyond).

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pauli::{Pauli, PauliString, PauliSum};
use crate::statevector::{StateVector, DENSE_MAX_QUBITS};

/// Largest chain diagonalized densely; longer chains use Lanczos.
pub const DENSE_EIGEN_MAX_QUBITS: usize = 10;

/// Haldane-chain paramagnet/SPT threshold on `h₂` at `J = 1`, `h₁ = 0.5`.
pub const HALDANE_H2_CRITICAL: f64 = 0.423;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Model {
    Xxx,
    Haldane,
    Annni,
    Cluster,
}

impl Model {
    pub fn name(self) -> &'static str {
        match self {
            Model::Xxx => "xxx",
            Model::Haldane => "haldane",
            Model::Annni => "annni",
            Model::Cluster => "cluster",
        }
    }

    pub fn param_names(self) -> &'static [&'static str] {
        match self {
            Model::Xxx => &["j1", "j2"],
            Model::Haldane => &["j", "h1", "h2"],
            Model::Annni => &["j1", "j2", "b"],
            Model::Cluster => &["j1", "j2"],
        }
    }

    pub fn num_classes(self) -> usize {
        match self {
            Model::Xxx | Model::Haldane => 2,
            Model::Annni | Model::Cluster => 4,
        }
    }

    pub fn boundary(self) -> Boundary {
        match self {
            Model::Cluster => Boundary::Closed,
            _ => Boundary::Open,
        }
    }
}

impl fmt::Display for Model {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Model {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "xxx" => Ok(Model::Xxx),
            "haldane" => Ok(Model::Haldane),
            "annni" => Ok(Model::Annni),
            "cluster" => Ok(Model::Cluster),
            _ => Err(Error::Invalid(format!("unknown model {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Boundary {
    Open,
    Closed,
}

impl fmt::Display for Boundary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Boundary::Open => "open",
            Boundary::Closed => "closed",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HamiltonianSpec {
    pub model: Model,
    pub n: usize,
    /// Values in the order of [`Model::param_names`].
    pub params: Vec<f64>,
}

impl HamiltonianSpec {
    pub fn new(model: Model, n: usize, params: Vec<f64>) -> Result<Self> {
        let want = model.param_names().len();
        if params.len() != want {
            return Err(Error::Invalid(format!("{model} takes {want} parameters, got {}", params.len())));
        }
        if params.iter().any(|p| !p.is_finite()) {
            return Err(Error::Invalid("non-finite Hamiltonian parameter".into()));
        }
        let min_n = match model {
            Model::Xxx | Model::Annni => 2,
            Model::Haldane | Model::Cluster => 3,
        };
        if n < min_n {
            return Err(Error::Invalid(format!("{model} needs at least {min_n} qubits, got {n}")));
        }
        Ok(HamiltonianSpec { model, n, params })
    }

    pub fn xxx(n: usize, j1: f64, j2: f64) -> Result<Self> {
        Self::new(Model::Xxx, n, vec![j1, j2])
    }

    pub fn haldane(n: usize, j: f64, h1: f64, h2: f64) -> Result<Self> {
        Self::new(Model::Haldane, n, vec![j, h1, h2])
    }

    pub fn annni(n: usize, j1: f64, j2: f64, b: f64) -> Result<Self> {
        Self::new(Model::Annni, n, vec![j1, j2, b])
    }

    pub fn cluster(n: usize, j1: f64, j2: f64) -> Result<Self> {
        Self::new(Model::Cluster, n, vec![j1, j2])
    }

    pub fn boundary(&self) -> Boundary {
        self.model.boundary()
    }
}

fn sites(n: usize, ops: &[(usize, Pauli)]) -> PauliString {
    PauliString::from_sites(n, ops).expect("sites in range")
}

/// Pauli decomposition of the model Hamiltonian. Qubit `q` here is site
/// `q + 1` of the 1-based chain; XXX bond `i` (1-based) carries `J₂` when
/// `i` is odd and `J₁` when even.
pub fn hamiltonian_terms(spec: &HamiltonianSpec) -> Result<PauliSum> {
    use Pauli::{X, Y, Z};
    let n = spec.n;
    let p = &spec.params;
    let mut h = PauliSum::new(n);
    match spec.model {
        Model::Xxx => {
            for q in 0..n - 1 {
                let bond = q + 1;
                let j = if bond % 2 == 1 { p[1] } else { p[0] };
                for s in [X, Y, Z] {
                    h.add_term(sites(n, &[(q, s), (q + 1, s)]), j)?;
                }
            }
        }
        Model::Haldane => {
            let (j, h1, h2) = (p[0], p[1], p[2]);
            for q in 0..n - 2 {
                h.add_term(sites(n, &[(q, Z), (q + 1, X), (q + 2, Z)]), -j)?;
            }
            for q in 0..n {
                h.add_term(sites(n, &[(q, X)]), -h1)?;
            }
            for q in 0..n - 1 {
                h.add_term(sites(n, &[(q, X), (q + 1, X)]), -h2)?;
            }
        }
        Model::Annni => {
            let (j1, j2, b) = (p[0], p[1], p[2]);
            for q in 0..n - 1 {
                h.add_term(sites(n, &[(q, X), (q + 1, X)]), -j1)?;
            }
            for q in 0..n.saturating_sub(2) {
                h.add_term(sites(n, &[(q, X), (q + 2, X)]), -j2)?;
            }
            for q in 0..n {
                h.add_term(sites(n, &[(q, Z)]), -b)?;
            }
        }
        Model::Cluster => {
            let (j1, j2) = (p[0], p[1]);
            for q in 0..n {
                let (prev, next) = ((q + n - 1) % n, (q + 1) % n);
                h.add_term(sites(n, &[(q, Z)]), 1.0)?;
                h.add_term(sites(n, &[(q, X), (next, X)]), -j1)?;
                h.add_term(sites(n, &[(prev, X), (q, Z), (next, X)]), -j2)?;
            }
        }
    }
    Ok(h)
}

/// How a label was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LabelSource {
    /// The model's stated rule.
    Rule,
    /// The stated rule, at a point exactly on the threshold.
    Boundary,
    /// A built-in approximation of a thermodynamic-limit phase boundary.
    Approximate,
    /// Supplied from outside (authoritative).
    External,
}

impl fmt::Display for LabelSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LabelSource::Rule => "rule",
            LabelSource::Boundary => "boundary",
            LabelSource::Approximate => "approximate",
            LabelSource::External => "external",
        })
    }
}

impl FromStr for LabelSource {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rule" => Ok(LabelSource::Rule),
            "boundary" => Ok(LabelSource::Boundary),
            "approximate" => Ok(LabelSource::Approximate),
            "external" => Ok(LabelSource::External),
            _ => Err(Error::Invalid(format!("unknown label source {s:?}"))),
        }
    }
}

/// ANNNI phase ids: ferromagnetic, paramagnetic, floating, antiphase.
pub mod annni_phase {
    pub const FERROMAGNETIC: usize = 0;
    pub const PARAMAGNETIC: usize = 1;
    pub const FLOATING: usize = 2;
    pub const ANTIPHASE: usize = 3;
}

/// Cluster-model phase ids: Haldane (SPT), ferromagnetic, antiferromagnetic, trivial.
pub mod cluster_phase {
    pub const HALDANE: usize = 0;
    pub const FERROMAGNETIC: usize = 1;
    pub const ANTIFERROMAGNETIC: usize = 2;
    pub const TRIVIAL: usize = 3;
}

/// Ising transition field of the ANNNI chain for `κ < 1/2`.
pub fn annni_ising_field(kappa: f64) -> f64 {
    if kappa == 0.0 {
        return 1.0;
    }
    ((1.0 - kappa) / kappa) * (1.0 - ((1.0 - 3.0 * kappa + 4.0 * kappa * kappa) / (1.0 - kappa)).sqrt())
}

/// Commensurate-incommensurate and BKT fields of the ANNNI chain for `κ > 1/2`.
pub fn annni_floating_window(kappa: f64) -> (f64, f64) {
    (1.05 * (kappa - 0.5), 1.05 * ((kappa - 0.5) * (kappa - 0.1)).sqrt())
}

/// Number of roots of `1 − J₁z − J₂z²` strictly inside the unit circle.
fn cluster_winding(j1: f64, j2: f64) -> usize {
    let inside = |z: f64| z.abs() < 1.0;
    if j2 == 0.0 {
        return usize::from(j1 != 0.0 && inside(1.0 / j1));
    }
    // J₂z² + J₁z − 1 = 0
    let disc = j1 * j1 + 4.0 * j2;
    if disc >= 0.0 {
        let s = disc.sqrt();
        let r1 = (-j1 + s) / (2.0 * j2);
        let r2 = (-j1 - s) / (2.0 * j2);
        usize::from(inside(r1)) + usize::from(inside(r2))
    } else {
        // Complex pair with |z|² = −1/J₂.
        if (-1.0 / j2) < 1.0 {
            2
        } else {
            0
        }
    }
}

/// Phase label from the model's rule (XXX, Haldane) or built-in approximate
/// boundaries (ANNNI, Cluster).
pub fn assign_label(spec: &HamiltonianSpec) -> Result<(usize, LabelSource)> {
    let p = &spec.params;
    let unlabelable = |reason: &str| Error::Unlabelable {
        model: spec.model.name(),
        params: format!("{p:?}"),
        reason: reason.to_string(),
    };
    match spec.model {
        Model::Xxx => {
            Ok((usize::from(p[1] >= p[0]), if p[1] == p[0] { LabelSource::Boundary } else { LabelSource::Rule }))
        }
        Model::Haldane => {
            if p[0] != 1.0 || p[1] != 0.5 {
                return Err(unlabelable("the threshold h2 = 0.423 holds for J = 1, h1 = 0.5"));
            }
            let source = if p[2] == HALDANE_H2_CRITICAL { LabelSource::Boundary } else { LabelSource::Rule };
            Ok((usize::from(p[2] >= HALDANE_H2_CRITICAL), source))
        }
        Model::Annni => {
            let (j1, j2, b) = (p[0], p[1], p[2]);
            if j1 <= 0.0 {
                return Err(unlabelable("requires J1 > 0"));
            }
            let (kappa, h) = (-j2 / j1, b / j1);
            if !(0.0..=1.0).contains(&kappa) || h < 0.0 {
                return Err(unlabelable("built-in boundaries cover 0 <= kappa <= 1, h >= 0"));
            }
            let id = if kappa <= 0.5 {
                if h < annni_ising_field(kappa) {
                    annni_phase::FERROMAGNETIC
                } else {
                    annni_phase::PARAMAGNETIC
                }
            } else {
                let (h_ci, h_bkt) = annni_floating_window(kappa);
                if h < h_ci {
                    annni_phase::ANTIPHASE
                } else if h < h_bkt {
                    annni_phase::FLOATING
                } else {
                    annni_phase::PARAMAGNETIC
                }
            };
            Ok((id, LabelSource::Approximate))
        }
        Model::Cluster => {
            let (j1, j2) = (p[0], p[1]);
            if j2 < -1.0 {
                return Err(unlabelable("built-in boundaries cover J2 >= -1"));
            }
            let id = match cluster_winding(j1, j2) {
                0 => cluster_phase::TRIVIAL,
                1 if j1 > 0.0 => cluster_phase::FERROMAGNETIC,
                1 => cluster_phase::ANTIFERROMAGNETIC,
                _ => cluster_phase::HALDANE,
            };
            Ok((id, LabelSource::Approximate))
        }
    }
}

/// Real sparse operator `Σ c_t P_t`, grouped by X-mask.
pub struct RealOperator {
    n: usize,
    groups: Vec<(usize, Vec<(u64, f64)>)>,
    tables: Option<Vec<Vec<f64>>>,
}

impl RealOperator {
    /// Fails when a term has an odd number of `Y`s (complex matrix entries).
    pub fn new(h: &PauliSum) -> Result<Self> {
        let n = h.num_qubits();
        if n > DENSE_MAX_QUBITS {
            return Err(Error::OversizeState { what: "Hamiltonian matvec", n, max: DENSE_MAX_QUBITS });
        }
        let mut groups: Vec<(usize, Vec<(u64, f64)>)> = Vec::new();
        for (p, c) in h.iter() {
            let (x, z) = p.low_masks();
            let ys = (x & z).count_ones();
            if ys % 2 == 1 {
                return Err(Error::Invalid(format!("term {p} has complex matrix elements")));
            }
            // i^{|x∧z|} is ±1 here.
            let c = if ys % 4 == 2 { -c } else { c };
            match groups.iter_mut().find(|g| g.0 == x as usize) {
                Some(g) => g.1.push((z, c)),
                None => groups.push((x as usize, vec![(z, c)])),
            }
        }
        groups.sort_by_key(|g| g.0);
        let dim = 1usize << n;
        let tables = (groups.len() * dim <= 1 << 24)
            .then(|| groups.iter().map(|(_, terms)| (0..dim).map(|b| diag_value(terms, b)).collect()).collect());
        Ok(RealOperator { n, groups, tables })
    }

    pub fn num_qubits(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        1 << self.n
    }

    /// `out = H v`.
    pub fn apply(&self, v: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
        for (g, (x, terms)) in self.groups.iter().enumerate() {
            match &self.tables {
                Some(t) => {
                    let t = &t[g];
                    for b in 0..v.len() {
                        out[b ^ x] += t[b] * v[b];
                    }
                }
                None => {
                    for b in 0..v.len() {
                        out[b ^ x] += diag_value(terms, b) * v[b];
                    }
                }
            }
        }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let dim = self.dim();
        let mut m = DMatrix::zeros(dim, dim);
        for (x, terms) in &self.groups {
            for b in 0..dim {
                m[(b ^ x, b)] += diag_value(terms, b);
            }
        }
        m
    }

    pub fn expectation(&self, v: &[f64]) -> f64 {
        let mut hv = vec![0.0; v.len()];
        self.apply(v, &mut hv);
        dot(v, &hv)
    }
}

#[inline]
fn diag_value(terms: &[(u64, f64)], b: usize) -> f64 {
    terms.iter().map(|&(z, c)| if (b as u64 & z).count_ones() & 1 == 1 { -c } else { c }).sum()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn normalize(v: &mut [f64]) -> f64 {
    let norm = dot(v, v).sqrt();
    v.iter_mut().for_each(|x| *x /= norm);
    norm
}

/// Flips the global sign so the largest-magnitude entry (lowest index on
/// ties) is positive.
fn fix_sign(v: &mut [f64]) {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if x.abs() > v[best].abs() * (1.0 + 1e-9) {
            best = i;
        }
    }
    if v[best] < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

#[derive(Debug, Clone)]
pub struct GroundState {
    pub state: StateVector,
    pub energy: f64,
    /// `E₁ − E₀` (Ritz estimate under Lanczos).
    pub gap: f64,
    pub degenerate: bool,
    pub residual: f64,
}

const DEGENERACY_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy)]
pub struct LanczosOptions {
    pub krylov_dim: usize,
    pub max_restarts: usize,
    pub tol: f64,
    pub seed: u64,
}

impl Default for LanczosOptions {
    fn default() -> Self {
        LanczosOptions { krylov_dim: 90, max_restarts: 60, tol: 1e-9, seed: 0x5eed }
    }
}

pub fn ground_state(spec: &HamiltonianSpec) -> Result<GroundState> {
    let h = hamiltonian_terms(spec)?;
    let op = RealOperator::new(&h)?;
    if spec.n <= DENSE_EIGEN_MAX_QUBITS {
        dense_ground_state(&op)
    } else {
        lanczos_ground_state(&op, LanczosOptions::default())
    }
}

pub fn dense_ground_state(op: &RealOperator) -> Result<GroundState> {
    let eig = SymmetricEigen::new(op.to_dense());
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]).then(a.cmp(&b)));
    let e0 = eig.eigenvalues[order[0]];
    let gap = order.get(1).map_or(f64::INFINITY, |&i| eig.eigenvalues[i] - e0);
    let mut v: Vec<f64> = eig.eigenvectors.column(order[0]).iter().copied().collect();
    normalize(&mut v);
    fix_sign(&mut v);
    finish(op, v, gap)
}

fn finish(op: &RealOperator, v: Vec<f64>, gap: f64) -> Result<GroundState> {
    let mut hv = vec![0.0; v.len()];
    op.apply(&v, &mut hv);
    let energy = dot(&v, &hv);
    let residual = hv.iter().zip(&v).map(|(a, b)| (a - energy * b).powi(2)).sum::<f64>().sqrt();
    Ok(GroundState {
        state: StateVector::from_real(op.num_qubits(), &v)?,
        energy,
        gap,
        degenerate: gap < DEGENERACY_TOL,
        residual,
    })
}

/// Restarted Lanczos with full reorthogonalization. Each cycle restarts from
/// the current lowest Ritz vector.
pub fn lanczos_ground_state(op: &RealOperator, opts: LanczosOptions) -> Result<GroundState> {
    let dim = op.dim();
    let m = opts.krylov_dim.min(dim).max(2);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut start: Vec<f64> = (0..dim).map(|_| rng.random::<f64>() - 0.5).collect();
    normalize(&mut start);
    let mut w = vec![0.0; dim];
    let mut residual = f64::INFINITY;
    for _ in 0..opts.max_restarts {
        let mut basis: Vec<Vec<f64>> = vec![start.clone()];
        let mut alpha = Vec::with_capacity(m);
        let mut beta: Vec<f64> = Vec::with_capacity(m);
        for j in 0..m {
            op.apply(&basis[j], &mut w);
            let a = dot(&w, &basis[j]);
            alpha.push(a);
            for _ in 0..2 {
                for b in &basis {
                    let c = dot(&w, b);
                    w.iter_mut().zip(b).for_each(|(x, y)| *x -= c * y);
                }
            }
            let bnorm = dot(&w, &w).sqrt();
            if j + 1 == m || bnorm < 1e-12 {
                break;
            }
            beta.push(bnorm);
            basis.push(w.iter().map(|x| x / bnorm).collect());
        }
        let k = alpha.len();
        let t = DMatrix::from_fn(k, k, |r, c| {
            if r == c {
                alpha[r]
            } else if r + 1 == c {
                beta[r]
            } else if c + 1 == r {
                beta[c]
            } else {
                0.0
            }
        });
        let eig = SymmetricEigen::new(t);
        let mut order: Vec<usize> = (0..k).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]).then(a.cmp(&b)));
        let y: DVector<f64> = eig.eigenvectors.column(order[0]).into_owned();
        let gap = order.get(1).map_or(f64::INFINITY, |&i| eig.eigenvalues[i] - eig.eigenvalues[order[0]]);
        let mut v = vec![0.0; dim];
        for (b, &c) in basis.iter().zip(y.iter()) {
            v.iter_mut().zip(b).for_each(|(x, y)| *x += c * y);
        }
        normalize(&mut v);
        op.apply(&v, &mut w);
        let e = dot(&v, &w);
        residual = w.iter().zip(&v).map(|(a, b)| (a - e * b).powi(2)).sum::<f64>().sqrt();
        if residual < opts.tol || k < m {
            fix_sign(&mut v);
            return finish(op, v, gap);
        }
        start = v;
    }
    Err(Error::NoConvergence { iterations: opts.max_restarts * m, residual })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(s: &str) -> PauliString {
        s.parse().unwrap()
    }

    #[test]
    fn xxx_single_bond_terms() {
        let h = hamiltonian_terms(&HamiltonianSpec::xxx(2, 1.0, 1.0).unwrap()).unwrap();
        assert_eq!(h.len(), 3);
        for s in ["XX", "YY", "ZZ"] {
            assert_eq!(h.get(&p(s)), Some(1.0));
        }
        // Bond 1 is odd and carries J₂.
        let h = hamiltonian_terms(&HamiltonianSpec::xxx(3, 1.0, 0.5).unwrap()).unwrap();
        assert_eq!(h.get(&p("XXI")), Some(0.5));
        assert_eq!(h.get(&p("IZZ")), Some(1.0));
    }

    #[test]
    fn cluster_and_annni_terms() {
        let h = hamiltonian_terms(&HamiltonianSpec::cluster(3, 0.0, 0.0).unwrap()).unwrap();
        assert_eq!(h.len(), 3);
        for s in ["ZII", "IZI", "IIZ"] {
            assert_eq!(h.get(&p(s)), Some(1.0));
        }
        let h = hamiltonian_terms(&HamiltonianSpec::cluster(4, 0.5, 0.25).unwrap()).unwrap();
        assert_eq!(h.get(&p("XIIX")), Some(-0.5));
        assert_eq!(h.get(&p("ZXIX")), Some(-0.25));
        assert_eq!(h.len(), 12);
        assert_eq!(h.get(&p("XZXI")), Some(-0.25));
        assert_eq!(h.get(&p("XIXZ")), Some(-0.25));
        let h = hamiltonian_terms(&HamiltonianSpec::annni(4, 1.0, -0.5, 0.0).unwrap()).unwrap();
        assert_eq!(h.get(&p("XIXI")), Some(0.5));
        assert_eq!(h.get(&p("IXIX")), Some(0.5));
        assert_eq!(h.get(&p("XXII")), Some(-1.0));
        assert!(HamiltonianSpec::haldane(2, 1.0, 0.5, 0.1).is_err());
    }

    #[test]
    fn singlet_ground_state() {
        let gs = ground_state(&HamiltonianSpec::xxx(2, 1.0, 1.0).unwrap()).unwrap();
        assert!((gs.energy + 3.0).abs() < 1e-12);
        let a = gs.state.amplitudes();
        let h = std::f64::consts::FRAC_1_SQRT_2;
        assert!((a[1].re.abs() - h).abs() < 1e-12 && (a[2].re + a[1].re).abs() < 1e-12);
    }

    #[test]
    fn cluster_field_only_ground_state() {
        let gs = ground_state(&HamiltonianSpec::cluster(4, 0.0, 0.0).unwrap()).unwrap();
        assert!((gs.energy + 4.0).abs() < 1e-12);
        assert!((gs.state.amplitudes()[15].re - 1.0).abs() < 1e-12);
    }

    #[test]
    fn strong_field_paramagnet() {
        let gs = ground_state(&HamiltonianSpec::annni(6, 1.0, 0.0, 10.0).unwrap()).unwrap();
        assert!(gs.state.amplitudes()[0].norm_sqr() > 0.99);
    }

    #[test]
    fn lanczos_matches_dense() {
        for spec in [
            HamiltonianSpec::xxx(8, 1.0, 0.6).unwrap(),
            HamiltonianSpec::haldane(8, 1.0, 0.5, 0.3).unwrap(),
            HamiltonianSpec::cluster(8, 0.4, 1.3).unwrap(),
        ] {
            let op = RealOperator::new(&hamiltonian_terms(&spec).unwrap()).unwrap();
            let d = dense_ground_state(&op).unwrap();
            let l = lanczos_ground_state(&op, LanczosOptions::default()).unwrap();
            assert!((d.energy - l.energy).abs() < 1e-9, "{spec:?}");
            let overlap: f64 = d.state.inner(&l.state).re;
            assert!((overlap.abs() - 1.0).abs() < 1e-8);
            assert!(l.residual < 1e-6);
        }
    }

    #[test]
    fn energy_matches_statevector_expectation() {
        let spec = HamiltonianSpec::haldane(7, 1.0, 0.5, 0.6).unwrap();
        let h = hamiltonian_terms(&spec).unwrap();
        let gs = ground_state(&spec).unwrap();
        let e: f64 = h.iter().map(|(p, c)| c * gs.state.expectation(p).unwrap()).sum();
        assert!((e - gs.energy).abs() < 1e-8);
        assert!(gs.residual < 1e-6);
    }

    #[test]
    fn labels() {
        assert_eq!(assign_label(&HamiltonianSpec::xxx(4, 1.0, 0.5).unwrap()).unwrap(), (0, LabelSource::Rule));
        assert_eq!(assign_label(&HamiltonianSpec::xxx(4, 1.0, 1.5).unwrap()).unwrap().0, 1);
        assert_eq!(
            assign_label(&HamiltonianSpec::haldane(4, 1.0, 0.5, 0.423).unwrap()).unwrap(),
            (1, LabelSource::Boundary)
        );
        assert_eq!(assign_label(&HamiltonianSpec::haldane(4, 1.0, 0.5, 0.2).unwrap()).unwrap().0, 0);
        assert_eq!(assign_label(&HamiltonianSpec::cluster(4, 0.0, 0.0).unwrap()).unwrap().0, cluster_phase::TRIVIAL);
        assert_eq!(assign_label(&HamiltonianSpec::cluster(4, 0.0, 2.0).unwrap()).unwrap().0, cluster_phase::HALDANE);
        assert_eq!(
            assign_label(&HamiltonianSpec::cluster(4, 2.0, 0.0).unwrap()).unwrap().0,
            cluster_phase::FERROMAGNETIC
        );
        assert_eq!(
            assign_label(&HamiltonianSpec::cluster(4, -2.0, 0.0).unwrap()).unwrap().0,
            cluster_phase::ANTIFERROMAGNETIC
        );
        assert!(assign_label(&HamiltonianSpec::cluster(4, 0.0, -2.0).unwrap()).is_err());
        assert_eq!(
            assign_label(&HamiltonianSpec::annni(4, 1.0, 0.0, 0.5).unwrap()).unwrap().0,
            annni_phase::FERROMAGNETIC
        );
        assert_eq!(
            assign_label(&HamiltonianSpec::annni(4, 1.0, 0.0, 1.5).unwrap()).unwrap().0,
            annni_phase::PARAMAGNETIC
        );
        assert_eq!(
            assign_label(&HamiltonianSpec::annni(4, 1.0, -0.9, 0.1).unwrap()).unwrap().0,
            annni_phase::ANTIPHASE
        );
        assert!((annni_ising_field(1e-9) - 1.0).abs() < 1e-6);
    }
}
