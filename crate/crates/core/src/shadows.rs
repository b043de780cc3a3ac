//! Local Pauli classical shadows: acquisition from statevectors, low-body
//! expectation estimates, the shadow file format, and feature tables.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use smallvec::SmallVec;

use crate::error::{Error, Result};
use crate::pauli::{Pauli, PauliString};
use crate::statevector::{StateVector, DENSE_MAX_QUBITS};

type Words = SmallVec<[u64; 2]>;

/// Largest `n` for which shadows are sampled from a dense statevector.
pub const SAMPLE_MAX_QUBITS: usize = DENSE_MAX_QUBITS;

/// One snapshot: a measurement basis on every qubit and the outcome bits
/// (bit `b` is eigenvalue `(-1)^b`).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ShadowRecord {
    pub basis: PauliString,
    outcomes: Words,
}

impl ShadowRecord {
    pub fn new(basis: PauliString, outcomes: &[bool]) -> Result<Self> {
        let n = basis.num_qubits();
        if outcomes.len() != n {
            return Err(Error::SizeMismatch { left: n, right: outcomes.len() });
        }
        if basis.weight() != n {
            return Err(Error::Invalid(format!("shadow basis {basis} must act on every qubit")));
        }
        let mut words: Words = SmallVec::from_elem(0, n.div_ceil(64).max(1));
        for (q, &b) in outcomes.iter().enumerate() {
            if b {
                words[q / 64] |= 1 << (q % 64);
            }
        }
        Ok(ShadowRecord { basis, outcomes: words })
    }

    pub fn num_qubits(&self) -> usize {
        self.basis.num_qubits()
    }

    pub fn outcome(&self, q: usize) -> bool {
        (self.outcomes[q / 64] >> (q % 64)) & 1 == 1
    }

    /// Single-snapshot estimator of `⟨P⟩`: `3^k (-1)^{outcomes on supp}` when
    /// the basis agrees with `P` on its support, else 0.
    #[inline]
    pub fn estimator(&self, p: &PauliString) -> f64 {
        let (bx, bz) = (self.basis.x_words(), self.basis.z_words());
        let (px, pz) = (p.x_words(), p.z_words());
        let mut parity = 0u32;
        for w in 0..px.len() {
            let supp = px[w] | pz[w];
            if bx[w] & supp != px[w] || bz[w] & supp != pz[w] {
                return 0.0;
            }
            parity += (self.outcomes[w] & supp).count_ones();
        }
        let mag = 3f64.powi(p.weight() as i32);
        if parity & 1 == 1 {
            -mag
        } else {
            mag
        }
    }

    fn to_line(&self) -> String {
        let n = self.num_qubits();
        let mut s = self.basis.to_text();
        s.push(' ');
        s.extend((0..n).map(|q| if self.outcome(q) { '1' } else { '0' }));
        s
    }

    fn parse_line(n: usize, line: &str) -> std::result::Result<Self, String> {
        let mut parts = line.split_whitespace();
        let (Some(basis), Some(bits), None) = (parts.next(), parts.next(), parts.next()) else {
            return Err("expected '<basis> <outcome bits>'".into());
        };
        let basis: PauliString = basis.parse().map_err(|e: Error| e.to_string())?;
        if basis.num_qubits() != n {
            return Err(format!("basis has {} qubits, header says {n}", basis.num_qubits()));
        }
        let outcomes = bits
            .chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                _ => Err(format!("bad outcome bit {c:?}")),
            })
            .collect::<std::result::Result<Vec<_>, _>>()?;
        ShadowRecord::new(basis, &outcomes).map_err(|e| e.to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ShadowSet {
    pub n: usize,
    pub state_id: u64,
    pub label: usize,
    pub seed: u64,
    pub records: Vec<ShadowRecord>,
}

/// Rotates qubit 0 of `buf[..len]` into the computational basis of `basis`
/// and returns the two outcome weights.
fn rotate_lowest(buf: &mut [Complex64], len: usize, basis: Pauli) -> (f64, f64) {
    let (mut p0, mut p1) = (0.0, 0.0);
    let i = Complex64::new(0.0, 1.0);
    for pair in buf[..len].chunks_exact_mut(2) {
        let (a0, a1) = (pair[0], pair[1]);
        let (b0, b1) = match basis {
            Pauli::X => (a0 + a1, a0 - a1),
            Pauli::Y => (a0 - i * a1, a0 + i * a1),
            _ => (a0, a1),
        };
        pair[0] = b0;
        pair[1] = b1;
        p0 += b0.norm_sqr();
        p1 += b1.norm_sqr();
    }
    (p0, p1)
}

/// Draws `shots` snapshots with uniform per-qubit bases, sampling each
/// outcome string from the exact distribution by collapsing one qubit at a
/// time.
pub fn sample_shadows(sv: &StateVector, shots: usize, seed: u64) -> Result<ShadowSet> {
    let n = sv.num_qubits();
    if n > SAMPLE_MAX_QUBITS {
        return Err(Error::OversizeState { what: "shadow sampling", n, max: SAMPLE_MAX_QUBITS });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut buf = vec![Complex64::new(0.0, 0.0); sv.amplitudes().len()];
    let mut records = Vec::with_capacity(shots);
    let mut sites = Vec::with_capacity(n);
    let mut outcomes = Vec::with_capacity(n);
    for _ in 0..shots {
        buf.copy_from_slice(sv.amplitudes());
        sites.clear();
        outcomes.clear();
        let mut len = buf.len();
        for q in 0..n {
            let basis = [Pauli::X, Pauli::Y, Pauli::Z][rng.random_range(0..3)];
            let (p0, p1) = rotate_lowest(&mut buf, len, basis);
            let bit = rng.random::<f64>() * (p0 + p1) >= p0;
            let half = len / 2;
            for k in 0..half {
                buf[k] = buf[2 * k + bit as usize];
            }
            len = half;
            sites.push((q, basis));
            outcomes.push(bit);
        }
        records.push(ShadowRecord::new(PauliString::from_sites(n, &sites)?, &outcomes)?);
    }
    Ok(ShadowSet { n, state_id: 0, label: 0, seed, records })
}

impl ShadowSet {
    fn check(&self, p: &PauliString) -> Result<()> {
        if self.records.is_empty() {
            return Err(Error::EmptyShadows);
        }
        if p.num_qubits() != self.n {
            return Err(Error::SizeMismatch { left: self.n, right: p.num_qubits() });
        }
        Ok(())
    }

    /// Empirical mean of the single-snapshot estimators.
    pub fn estimate(&self, p: &PauliString) -> Result<f64> {
        self.check(p)?;
        if p.is_identity() {
            return Ok(1.0);
        }
        let sum: f64 = self.records.iter().map(|r| r.estimator(p)).sum();
        Ok(sum / self.records.len() as f64)
    }

    /// Median over `groups` contiguous batches of the batch means.
    pub fn estimate_median_of_means(&self, p: &PauliString, groups: usize) -> Result<f64> {
        self.check(p)?;
        if groups == 0 || groups > self.records.len() {
            return Err(Error::Invalid(format!("cannot split {} records into {groups} groups", self.records.len())));
        }
        let s = self.records.len();
        let mut means: Vec<f64> = (0..groups)
            .map(|g| {
                let batch = &self.records[g * s / groups..(g + 1) * s / groups];
                batch.iter().map(|r| r.estimator(p)).sum::<f64>() / batch.len() as f64
            })
            .collect();
        means.sort_by(f64::total_cmp);
        Ok(if groups % 2 == 1 { means[groups / 2] } else { 0.5 * (means[groups / 2 - 1] + means[groups / 2]) })
    }

    pub fn to_text(&self) -> String {
        let mut s = format!(
            "n={} state={} label={} shots={} seed={}\n",
            self.n,
            self.state_id,
            self.label,
            self.records.len(),
            self.seed
        );
        for r in &self.records {
            s.push_str(&r.to_line());
            s.push('\n');
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        const FMT: &str = "shadow file";
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (_, header) = lines.next().ok_or_else(|| Error::format(FMT, 1, "missing header"))?;
        let mut fields: HashMap<&str, &str> = HashMap::new();
        for tok in header.split_whitespace() {
            let (k, v) = tok.split_once('=').ok_or_else(|| Error::format(FMT, 1, format!("bad token {tok:?}")))?;
            fields.insert(k, v);
        }
        let get = |k: &str| -> Result<u64> {
            fields
                .get(k)
                .ok_or_else(|| Error::format(FMT, 1, format!("missing {k}=")))?
                .parse()
                .map_err(|_| Error::format(FMT, 1, format!("bad value for {k}")))
        };
        let n = get("n")? as usize;
        let shots = get("shots")? as usize;
        let mut set = ShadowSet {
            n,
            state_id: get("state")?,
            label: get("label")? as usize,
            seed: get("seed")?,
            records: Vec::with_capacity(shots),
        };
        for (i, line) in lines {
            let rec = ShadowRecord::parse_line(n, line).map_err(|e| Error::format(FMT, i + 1, e))?;
            set.records.push(rec);
        }
        if set.records.len() != shots {
            return Err(Error::format(FMT, 1, format!("header says {shots} shots, found {}", set.records.len())));
        }
        Ok(set)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_text(&text)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureRow {
    pub state_id: u64,
    pub label: usize,
    pub values: Vec<f64>,
}

/// Per-state estimates of a fixed operator list.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTable {
    n: usize,
    ops: Vec<PauliString>,
    index: HashMap<PauliString, usize>,
    rows: Vec<FeatureRow>,
}

impl FeatureTable {
    pub fn new(n: usize, ops: Vec<PauliString>) -> Result<Self> {
        let mut index = HashMap::with_capacity(ops.len());
        for (i, p) in ops.iter().enumerate() {
            if p.num_qubits() != n {
                return Err(Error::SizeMismatch { left: n, right: p.num_qubits() });
            }
            if index.insert(p.clone(), i).is_some() {
                return Err(Error::Invalid(format!("duplicate feature operator {p}")));
            }
        }
        Ok(FeatureTable { n, ops, index, rows: Vec::new() })
    }

    pub fn num_qubits(&self) -> usize {
        self.n
    }

    pub fn ops(&self) -> &[PauliString] {
        &self.ops
    }

    pub fn rows(&self) -> &[FeatureRow] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn labels(&self) -> Vec<usize> {
        self.rows.iter().map(|r| r.label).collect()
    }

    pub fn push_row(&mut self, state_id: u64, label: usize, values: Vec<f64>) -> Result<()> {
        if values.len() != self.ops.len() {
            return Err(Error::Invalid(format!("row has {} values for {} operators", values.len(), self.ops.len())));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Invalid(format!("non-finite feature in state {state_id}")));
        }
        self.rows.push(FeatureRow { state_id, label, values });
        Ok(())
    }

    pub fn column_index(&self, p: &PauliString) -> Option<usize> {
        self.index.get(p).copied()
    }

    pub fn column(&self, col: usize) -> Vec<f64> {
        self.rows.iter().map(|r| r.values[col]).collect()
    }

    /// Population variance of a column across rows (0 for an empty table).
    pub fn column_variance(&self, col: usize) -> f64 {
        let m = self.rows.len();
        if m == 0 {
            return 0.0;
        }
        let mean = self.rows.iter().map(|r| r.values[col]).sum::<f64>() / m as f64;
        self.rows.iter().map(|r| (r.values[col] - mean).powi(2)).sum::<f64>() / m as f64
    }

    /// Rows restricted to `ops`, in that column order.
    pub fn aligned(&self, ops: &[&PauliString]) -> Result<Vec<Vec<f64>>> {
        let cols = ops
            .iter()
            .map(|p| self.column_index(p).ok_or_else(|| Error::MissingFeature(p.to_text())))
            .collect::<Result<Vec<_>>>()?;
        Ok(self.rows.iter().map(|r| cols.iter().map(|&c| r.values[c]).collect()).collect())
    }

    /// Table keeping only the rows whose state ids are listed, in that order.
    pub fn select_rows(&self, ids: &[u64]) -> Result<Self> {
        let by_id: HashMap<u64, &FeatureRow> = self.rows.iter().map(|r| (r.state_id, r)).collect();
        let rows = ids
            .iter()
            .map(|id| {
                by_id.get(id).map(|r| (*r).clone()).ok_or_else(|| Error::Invalid(format!("no row for state {id}")))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(FeatureTable { n: self.n, ops: self.ops.clone(), index: self.index.clone(), rows })
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("state_id,label");
        for p in &self.ops {
            s.push(',');
            s.push_str(&p.to_text());
        }
        s.push('\n');
        for r in &self.rows {
            write!(s, "{},{}", r.state_id, r.label).unwrap();
            for v in &r.values {
                write!(s, ",{v:?}").unwrap();
            }
            s.push('\n');
        }
        s
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        const FMT: &str = "feature table";
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (_, header) = lines.next().ok_or_else(|| Error::format(FMT, 1, "missing header"))?;
        let cols: Vec<&str> = header.split(',').map(str::trim).collect();
        if cols.len() < 2 || cols[0] != "state_id" || cols[1] != "label" {
            return Err(Error::format(FMT, 1, "header must start with state_id,label"));
        }
        let ops = cols[2..].iter().map(|c| c.parse()).collect::<Result<Vec<PauliString>>>()?;
        let n = ops.first().map_or(0, PauliString::num_qubits);
        let mut table = FeatureTable::new(n, ops)?;
        for (i, line) in lines {
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            if fields.len() != cols.len() {
                return Err(Error::format(FMT, i + 1, "wrong field count"));
            }
            let bad = |what: &str| Error::format(FMT, i + 1, format!("bad {what}"));
            let id = fields[0].parse().map_err(|_| bad("state_id"))?;
            let label = fields[1].parse().map_err(|_| bad("label"))?;
            let values =
                fields[2..].iter().map(|f| f.parse::<f64>().map_err(|_| bad("value"))).collect::<Result<Vec<_>>>()?;
            table.push_row(id, label, values).map_err(|e| Error::format(FMT, i + 1, e.to_string()))?;
        }
        Ok(table)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_csv(&text)
    }
}

/// Shadow estimates of `ops` for every set, one row per set.
pub fn build_feature_table(sets: &[ShadowSet], ops: &[PauliString]) -> Result<FeatureTable> {
    let n = sets.first().map_or_else(|| ops.first().map_or(0, PauliString::num_qubits), |s| s.n);
    let mut table = FeatureTable::new(n, ops.to_vec())?;
    for set in sets {
        if set.n != n {
            return Err(Error::SizeMismatch { left: n, right: set.n });
        }
        let values = ops.iter().map(|p| set.estimate(p)).collect::<Result<Vec<_>>>()?;
        table.push_row(set.state_id, set.label, values)?;
    }
    Ok(table)
}

/// Exact-mode table: features are `⟨ψ|P|ψ⟩` from the statevectors.
pub fn exact_feature_table(states: &[(u64, usize, &StateVector)], ops: &[PauliString]) -> Result<FeatureTable> {
    let n = states.first().map_or_else(|| ops.first().map_or(0, PauliString::num_qubits), |s| s.2.num_qubits());
    let mut table = FeatureTable::new(n, ops.to_vec())?;
    for &(id, label, sv) in states {
        if sv.num_qubits() != n {
            return Err(Error::SizeMismatch { left: n, right: sv.num_qubits() });
        }
        let values = ops.iter().map(|p| sv.expectation(p)).collect::<Result<Vec<_>>>()?;
        table.push_row(id, label, values)?;
    }
    Ok(table)
}
