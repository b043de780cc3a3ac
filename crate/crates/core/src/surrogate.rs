//! Pauli propagation surrogate: the split/merge graph of a truncated
//! propagation, built once and re-evaluated for many parameter vectors.
//!
//! Nodes are created in topological order. A root node carries the
//! observable coefficient of its string; every other node's value is the sum
//! over its (at most two) incoming edges of `factor(θ) · value(parent)`.
//! Intermediate strings are discarded after the build; only leaves keep
//! theirs.

use std::io::{Read, Write};
use std::path::Path;

use smallvec::SmallVec;

use crate::circuit::Circuit;
use crate::error::{Error, Result};
use crate::pauli::key::{Packed, StringKey};
use crate::pauli::{PauliString, PauliSum};
use crate::propagation::{
    dense_eligible, dense_index, dense_string, next_frequency, DenseSweep, FxIndexMap, TruncationPolicy, DROPPED,
};
use crate::shadows::FeatureTable;

const MAGIC: &[u8; 4] = b"PPSG";
const FORMAT_VERSION: u32 = 1;

/// Trig annotation on an edge.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Factor {
    Pass,
    Cos(u32),
    Sin { param: u32, negative: bool },
}

impl Factor {
    fn code(self) -> (u8, u32) {
        match self {
            Factor::Pass => (0, 0),
            Factor::Cos(p) => (1, p),
            Factor::Sin { param, negative: false } => (2, param),
            Factor::Sin { param, negative: true } => (3, param),
        }
    }

    fn from_code(code: u8, param: u32) -> Option<Self> {
        Some(match code {
            0 => Factor::Pass,
            1 => Factor::Cos(param),
            2 => Factor::Sin { param, negative: false },
            3 => Factor::Sin { param, negative: true },
            _ => return None,
        })
    }

    #[inline]
    fn value(self, trig: &Trig) -> f64 {
        match self {
            Factor::Pass => 1.0,
            Factor::Cos(p) => trig.cos[p as usize],
            Factor::Sin { param, negative } => {
                let s = trig.sin[param as usize];
                if negative {
                    -s
                } else {
                    s
                }
            }
        }
    }

    /// `d factor / dθ` and the parameter it depends on.
    #[inline]
    fn derivative(self, trig: &Trig) -> Option<(usize, f64)> {
        match self {
            Factor::Pass => None,
            Factor::Cos(p) => Some((p as usize, -trig.sin[p as usize])),
            Factor::Sin { param, negative } => {
                let c = trig.cos[param as usize];
                Some((param as usize, if negative { -c } else { c }))
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Edge {
    parent: u32,
    factor: Factor,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Leaf {
    pub pauli: PauliString,
    pub node: u32,
    pub frequency: u32,
}

struct Trig {
    cos: Vec<f64>,
    sin: Vec<f64>,
}

impl Trig {
    fn new(theta: &[f64]) -> Self {
        let (sin, cos) = theta.iter().map(|t| t.sin_cos()).unzip();
        Trig { cos, sin }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct BuildOptions {
    pub max_nodes: usize,
}

impl Default for BuildOptions {
    fn default() -> Self {
        BuildOptions { max_nodes: 50_000_000 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SurrogateGraph {
    n: usize,
    n_params: usize,
    roots: Vec<(u32, f64)>,
    /// CSR offsets into `edges`, one entry per node plus a terminator.
    edge_start: Vec<u32>,
    edges: Vec<Edge>,
    leaves: Vec<Leaf>,
}

/// Leaves selected for evaluation, with the node plan they need.
#[derive(Debug, Clone, PartialEq)]
pub struct ActiveSet {
    /// Indices into the graph's leaf table, in ranking order.
    pub leaves: Vec<usize>,
    /// Selection score per entry of `leaves` (feature variance, or NaN when
    /// selected without features).
    pub scores: Vec<f64>,
    pub window: Option<usize>,
    /// Set when more leaves were requested than there were candidates.
    pub truncated_request: bool,
    plan: Vec<u32>,
}

impl ActiveSet {
    pub fn len(&self) -> usize {
        self.leaves.len()
    }

    pub fn is_empty(&self) -> bool {
        self.leaves.is_empty()
    }

    /// Strings of the active leaves, in `leaves` order.
    pub fn paulis<'g>(&self, graph: &'g SurrogateGraph) -> Vec<&'g PauliString> {
        self.leaves.iter().map(|&i| &graph.leaves[i].pauli).collect()
    }
}

impl SurrogateGraph {
    /// Runs the truncated propagation symbolically.
    pub fn build(circuit: &Circuit, observable: &PauliSum, policy: &TruncationPolicy) -> Result<Self> {
        Self::build_with(circuit, observable, policy, BuildOptions::default())
    }

    pub fn build_with(
        circuit: &Circuit,
        observable: &PauliSum,
        policy: &TruncationPolicy,
        options: BuildOptions,
    ) -> Result<Self> {
        policy.validate()?;
        if policy.max_weight.is_none() {
            return Err(Error::UnboundedWeight);
        }
        if observable.num_qubits() != circuit.num_qubits() {
            return Err(Error::SizeMismatch { left: circuit.num_qubits(), right: observable.num_qubits() });
        }
        let n = circuit.num_qubits();
        let (roots, edge_start, edges, mut leaves) = if dense_eligible(n, policy) {
            build_dense(circuit, observable, policy, options)?
        } else if n <= 64 {
            build_keys::<Packed>(circuit, observable, policy, options)?
        } else {
            build_keys::<PauliString>(circuit, observable, policy, options)?
        };
        leaves.sort_by(|a, b| a.pauli.cmp(&b.pauli));
        Ok(SurrogateGraph { n: circuit.num_qubits(), n_params: circuit.num_params(), roots, edge_start, edges, leaves })
    }

    pub fn num_qubits(&self) -> usize {
        self.n
    }

    pub fn num_params(&self) -> usize {
        self.n_params
    }

    pub fn num_nodes(&self) -> usize {
        self.edge_start.len() - 1
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn leaves(&self) -> &[Leaf] {
        &self.leaves
    }

    pub fn leaf_index(&self, p: &PauliString) -> Option<usize> {
        self.leaves.binary_search_by(|l| l.pauli.cmp(p)).ok()
    }

    #[inline]
    fn incoming(&self, node: usize) -> &[Edge] {
        &self.edges[self.edge_start[node] as usize..self.edge_start[node + 1] as usize]
    }

    /// Nodes (ascending) that feed any of the given leaves.
    fn plan_for(&self, leaves: &[usize]) -> Vec<u32> {
        let mut needed = vec![false; self.num_nodes()];
        for &l in leaves {
            needed[self.leaves[l].node as usize] = true;
        }
        for node in (0..self.num_nodes()).rev() {
            if needed[node] {
                for e in self.incoming(node) {
                    needed[e.parent as usize] = true;
                }
            }
        }
        needed.iter().enumerate().filter(|(_, &b)| b).map(|(i, _)| i as u32).collect()
    }

    /// Active set of the given leaf indices with no ranking metadata.
    pub fn active_from_leaves(&self, leaves: Vec<usize>) -> Result<ActiveSet> {
        if let Some(&bad) = leaves.iter().find(|&&l| l >= self.leaves.len()) {
            return Err(Error::Invalid(format!("leaf index {bad} out of range")));
        }
        let plan = self.plan_for(&leaves);
        let scores = vec![f64::NAN; leaves.len()];
        Ok(ActiveSet { leaves, scores, window: None, truncated_request: false, plan })
    }

    pub fn all_leaves(&self) -> ActiveSet {
        self.active_from_leaves((0..self.leaves.len()).collect()).expect("indices in range")
    }

    fn check_theta(&self, theta: &[f64]) -> Result<()> {
        if theta.len() != self.n_params {
            return Err(Error::ParamLength { expected: self.n_params, got: theta.len() });
        }
        Ok(())
    }

    fn forward(&self, active: &ActiveSet, trig: &Trig) -> Vec<f64> {
        let mut values = vec![0.0; self.num_nodes()];
        for &(r, w) in &self.roots {
            values[r as usize] = w;
        }
        for &node in &active.plan {
            let node = node as usize;
            let inc = self.incoming(node);
            if inc.is_empty() {
                continue;
            }
            values[node] = inc.iter().map(|e| e.factor.value(trig) * values[e.parent as usize]).sum();
        }
        values
    }

    /// Path-summed coefficient `c_β(θ)` of every active leaf, in `active.leaves` order.
    pub fn leaf_coefficients(&self, active: &ActiveSet, theta: &[f64]) -> Result<Vec<f64>> {
        self.check_theta(theta)?;
        let values = self.forward(active, &Trig::new(theta));
        Ok(active.leaves.iter().map(|&l| values[self.leaves[l].node as usize]).collect())
    }

    /// `Σ_β c_β(θ) f_β` with `row` aligned to `active.leaves`.
    pub fn evaluate_aligned(&self, active: &ActiveSet, theta: &[f64], row: &[f64]) -> Result<f64> {
        if row.len() != active.len() {
            return Err(Error::Invalid(format!("feature row has {} entries for {} leaves", row.len(), active.len())));
        }
        let coeffs = self.leaf_coefficients(active, theta)?;
        Ok(coeffs.iter().zip(row).map(|(c, f)| c * f).sum())
    }

    /// Expectation with features looked up by leaf string.
    pub fn evaluate<F>(&self, active: &ActiveSet, theta: &[f64], mut lookup: F) -> Result<f64>
    where
        F: FnMut(&PauliString) -> Option<f64>,
    {
        let row = self.aligned_row(active, &mut lookup)?;
        self.evaluate_aligned(active, theta, &row)
    }

    fn aligned_row<F>(&self, active: &ActiveSet, lookup: &mut F) -> Result<Vec<f64>>
    where
        F: FnMut(&PauliString) -> Option<f64>,
    {
        active
            .leaves
            .iter()
            .map(|&l| {
                let p = &self.leaves[l].pauli;
                lookup(p).ok_or_else(|| Error::MissingFeature(p.to_text()))
            })
            .collect()
    }

    /// Reverse-mode sweep: given `∂L/∂c_β` for each active leaf, returns
    /// `∂L/∂θ`.
    pub fn backprop(&self, active: &ActiveSet, theta: &[f64], leaf_adjoint: &[f64]) -> Result<Vec<f64>> {
        self.check_theta(theta)?;
        if leaf_adjoint.len() != active.len() {
            return Err(Error::Invalid("adjoint length does not match active set".into()));
        }
        let trig = Trig::new(theta);
        let values = self.forward(active, &trig);
        let mut adj = vec![0.0; self.num_nodes()];
        for (&l, &a) in active.leaves.iter().zip(leaf_adjoint) {
            adj[self.leaves[l].node as usize] += a;
        }
        let mut grad = vec![0.0; self.n_params];
        for &node in active.plan.iter().rev() {
            let node = node as usize;
            let a = adj[node];
            if a == 0.0 {
                continue;
            }
            for e in self.incoming(node) {
                let parent = e.parent as usize;
                adj[parent] += a * e.factor.value(&trig);
                if let Some((param, d)) = e.factor.derivative(&trig) {
                    grad[param] += a * d * values[parent];
                }
            }
        }
        Ok(grad)
    }

    /// Value and `∂/∂θ` of the expectation for one aligned feature row.
    pub fn gradient_aligned(&self, active: &ActiveSet, theta: &[f64], row: &[f64]) -> Result<(f64, Vec<f64>)> {
        let value = self.evaluate_aligned(active, theta, row)?;
        let grad = self.backprop(active, theta, row)?;
        Ok((value, grad))
    }

    pub fn gradient<F>(&self, active: &ActiveSet, theta: &[f64], mut lookup: F) -> Result<Vec<f64>>
    where
        F: FnMut(&PauliString) -> Option<f64>,
    {
        let row = self.aligned_row(active, &mut lookup)?;
        Ok(self.gradient_aligned(active, theta, &row)?.1)
    }

    /// Ranks candidate leaves by the variance of their feature column across
    /// the dataset and keeps the top `m`. With `window = Some(w)`, only leaves
    /// whose support fits in `w` adjacent qubits are candidates.
    pub fn select_active(&self, features: &FeatureTable, m: usize, window: Option<usize>) -> Result<ActiveSet> {
        let mut ranked: Vec<(usize, f64)> = Vec::new();
        for (i, leaf) in self.leaves.iter().enumerate() {
            if window.is_some_and(|w| leaf.pauli.span() > w) {
                continue;
            }
            let col = features.column_index(&leaf.pauli).ok_or_else(|| Error::MissingFeature(leaf.pauli.to_text()))?;
            ranked.push((i, features.column_variance(col)));
        }
        ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        let truncated_request = m > ranked.len();
        ranked.truncate(m);
        let (leaves, scores): (Vec<usize>, Vec<f64>) = ranked.into_iter().unzip();
        let plan = self.plan_for(&leaves);
        Ok(ActiveSet { leaves, scores, window, truncated_request, plan })
    }

    /// Binary persistence: magic, version, header, root, node, edge and leaf
    /// tables, all little-endian.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut b = Vec::new();
        b.extend_from_slice(MAGIC);
        put_u32(&mut b, FORMAT_VERSION);
        put_u32(&mut b, self.n as u32);
        put_u32(&mut b, self.n_params as u32);
        put_u32(&mut b, self.roots.len() as u32);
        for &(node, w) in &self.roots {
            put_u32(&mut b, node);
            b.extend_from_slice(&w.to_le_bytes());
        }
        put_u32(&mut b, self.edge_start.len() as u32);
        for &s in &self.edge_start {
            put_u32(&mut b, s);
        }
        put_u32(&mut b, self.edges.len() as u32);
        for e in &self.edges {
            let (code, param) = e.factor.code();
            put_u32(&mut b, e.parent);
            b.push(code);
            put_u32(&mut b, param);
        }
        put_u32(&mut b, self.leaves.len() as u32);
        for l in &self.leaves {
            let text = l.pauli.to_text();
            put_u32(&mut b, text.len() as u32);
            b.extend_from_slice(text.as_bytes());
            put_u32(&mut b, l.node);
            put_u32(&mut b, l.frequency);
        }
        b
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { buf: bytes, pos: 0 };
        if r.take(4)? != MAGIC {
            return Err(Error::format("surrogate graph", 0, "bad magic"));
        }
        let version = r.u32()?;
        if version != FORMAT_VERSION {
            return Err(Error::format("surrogate graph", 0, format!("unsupported version {version}")));
        }
        let n = r.u32()? as usize;
        let n_params = r.u32()? as usize;
        let n_roots = r.u32()? as usize;
        let mut roots = Vec::with_capacity(n_roots);
        for _ in 0..n_roots {
            let node = r.u32()?;
            let w = f64::from_le_bytes(r.take(8)?.try_into().unwrap());
            roots.push((node, w));
        }
        let n_starts = r.u32()? as usize;
        let edge_start = (0..n_starts).map(|_| r.u32()).collect::<Result<Vec<_>>>()?;
        let n_edges = r.u32()? as usize;
        let mut edges = Vec::with_capacity(n_edges);
        for _ in 0..n_edges {
            let parent = r.u32()?;
            let code = r.take(1)?[0];
            let param = r.u32()?;
            let factor = Factor::from_code(code, param)
                .ok_or_else(|| Error::format("surrogate graph", 0, "bad edge annotation"))?;
            edges.push(Edge { parent, factor });
        }
        let n_leaves = r.u32()? as usize;
        let mut leaves = Vec::with_capacity(n_leaves);
        for _ in 0..n_leaves {
            let len = r.u32()? as usize;
            let text = std::str::from_utf8(r.take(len)?)
                .map_err(|_| Error::format("surrogate graph", 0, "leaf text is not utf-8"))?;
            let pauli: PauliString = text.parse()?;
            let node = r.u32()?;
            let frequency = r.u32()?;
            leaves.push(Leaf { pauli, node, frequency });
        }
        let g = SurrogateGraph { n, n_params, roots, edge_start, edges, leaves };
        g.validate()?;
        Ok(g)
    }

    fn validate(&self) -> Result<()> {
        let bad = |why: &str| Err(Error::format("surrogate graph", 0, why.to_string()));
        if self.edge_start.is_empty() || *self.edge_start.last().unwrap() as usize != self.edges.len() {
            return bad("edge table length mismatch");
        }
        if self.edge_start.windows(2).any(|w| w[0] > w[1]) {
            return bad("edge offsets not monotone");
        }
        for node in 0..self.num_nodes() {
            for e in self.incoming(node) {
                if e.parent as usize >= node {
                    return bad("edge does not point to an earlier node");
                }
            }
        }
        if self.leaves.iter().any(|l| l.node as usize >= self.num_nodes() || l.pauli.num_qubits() != self.n) {
            return bad("leaf table inconsistent");
        }
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        f.write_all(&self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut buf = Vec::new();
        std::fs::File::open(path).and_then(|mut f| f.read_to_end(&mut buf)).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&buf)
    }
}

type Built = (Vec<(u32, f64)>, Vec<u32>, Vec<Edge>, Vec<Leaf>);

/// Dense-table build for untruncated weights on small registers.
fn build_dense(
    circuit: &Circuit,
    observable: &PauliSum,
    policy: &TruncationPolicy,
    options: BuildOptions,
) -> Result<Built> {
    let n = circuit.num_qubits();
    let mut edge_start: Vec<u32> = Vec::new();
    let mut edges: Vec<Edge> = Vec::new();
    let mut roots = Vec::new();
    // Current node and frequency of every string; `DROPPED` marks absence.
    let mut node = vec![0u32; 1 << (2 * n)];
    let mut freq = vec![DROPPED; 1 << (2 * n)];
    for (p, c) in observable.iter() {
        let id = edge_start.len() as u32;
        edge_start.push(0);
        roots.push((id, c));
        let i = dense_index(p, n);
        node[i] = id;
        freq[i] = 0;
    }
    let merge = policy.frequency_merge;
    for gate in circuit.gates().iter().rev() {
        let param = gate.param_id as u32;
        let mut over_budget = false;
        DenseSweep::new(&gate.generator, n).for_each(|i, j, si, sj| {
            let (li, lj) = (freq[i], freq[j]);
            if (li == DROPPED && lj == DROPPED) || over_budget {
                return;
            }
            let (fi, fj) = (next_frequency(li, policy), next_frequency(lj, policy));
            let (pi, pj) = (node[i], node[j]);
            let sin = |negative: f64| Factor::Sin { param, negative: negative < 0.0 };
            // Incoming edges of the new node for slot `i` and for slot `j`.
            let mut add =
                |slot: usize, own: Option<u32>, own_parent: u32, other: Option<u32>, other_parent: u32, s: f64| {
                    let l = match (own, other) {
                        (Some(a), Some(b)) => merge.combine(a, b),
                        (Some(a), None) | (None, Some(a)) => a,
                        (None, None) => {
                            freq[slot] = DROPPED;
                            return;
                        }
                    };
                    let id = edge_start.len();
                    if id >= options.max_nodes {
                        over_budget = true;
                        return;
                    }
                    edge_start.push(edges.len() as u32);
                    if own.is_some() {
                        edges.push(Edge { parent: own_parent, factor: Factor::Cos(param) });
                    }
                    if other.is_some() {
                        edges.push(Edge { parent: other_parent, factor: sin(s) });
                    }
                    node[slot] = id as u32;
                    freq[slot] = l;
                };
            add(i, fi, pi, fj, pj, sj);
            add(j, fj, pj, fi, pi, si);
        });
        if over_budget {
            return Err(Error::NodeBudget { budget: options.max_nodes, nodes: options.max_nodes + 1 });
        }
    }
    edge_start.push(edges.len() as u32);
    let leaves = (0..freq.len())
        .filter(|&i| freq[i] != DROPPED)
        .map(|i| Leaf { pauli: dense_string(i, n), node: node[i], frequency: freq[i] })
        .collect();
    Ok((roots, edge_start, edges, leaves))
}

fn build_keys<K: StringKey>(
    circuit: &Circuit,
    observable: &PauliSum,
    policy: &TruncationPolicy,
    options: BuildOptions,
) -> Result<Built> {
    let n = circuit.num_qubits();
    let mut edge_start: Vec<u32> = Vec::new();
    let mut edges: Vec<Edge> = Vec::new();
    let mut roots = Vec::new();
    let mut live: FxIndexMap<K, (u32, u32)> = FxIndexMap::default();
    for (p, c) in observable.iter() {
        if !policy.weight_ok(p.weight()) {
            continue;
        }
        let id = edge_start.len() as u32;
        edge_start.push(0);
        roots.push((id, c));
        live.insert(K::pack(p), (id, 0));
    }

    let mut split: Vec<(K, u32, u32)> = Vec::new();
    let mut pending: FxIndexMap<K, (SmallVec<[Edge; 2]>, u32)> = FxIndexMap::default();
    for gate in circuit.gates().iter().rev() {
        let g = K::pack(&gate.generator);
        let param = gate.param_id as u32;
        split.clear();
        live.retain(|p, &mut (node, l)| {
            if g.commutes(p) {
                true
            } else {
                split.push((p.clone(), node, l));
                false
            }
        });
        if split.is_empty() {
            continue;
        }
        pending.clear();
        for (p, node, l) in split.drain(..) {
            let freq = l + 1;
            if !policy.frequency_ok(freq) {
                continue;
            }
            let (sign, q) = g.partner(&p);
            add_pending(&mut pending, p, Edge { parent: node, factor: Factor::Cos(param) }, freq, policy);
            if policy.weight_ok(q.weight()) {
                let factor = Factor::Sin { param, negative: sign < 0.0 };
                add_pending(&mut pending, q, Edge { parent: node, factor }, freq, policy);
            }
        }
        for (p, (incoming, freq)) in pending.drain(..) {
            let id = edge_start.len();
            if id >= options.max_nodes {
                return Err(Error::NodeBudget { budget: options.max_nodes, nodes: id + 1 });
            }
            edge_start.push(edges.len() as u32);
            edges.extend(incoming);
            live.insert(p, (id as u32, freq));
        }
    }
    edge_start.push(edges.len() as u32);
    let leaves = live.into_iter().map(|(p, (node, frequency))| Leaf { pauli: p.unpack(n), node, frequency }).collect();
    Ok((roots, edge_start, edges, leaves))
}

fn add_pending<K: StringKey>(
    pending: &mut FxIndexMap<K, (SmallVec<[Edge; 2]>, u32)>,
    p: K,
    edge: Edge,
    freq: u32,
    policy: &TruncationPolicy,
) {
    pending
        .entry(p)
        .and_modify(|(edges, l)| {
            edges.push(edge);
            *l = policy.frequency_merge.combine(*l, freq);
        })
        .or_insert_with(|| (smallvec::smallvec![edge], freq));
}

fn put_u32(b: &mut Vec<u8>, v: u32) {
    b.extend_from_slice(&v.to_le_bytes());
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, k: usize) -> Result<&'a [u8]> {
        if self.pos + k > self.buf.len() {
            return Err(Error::format("surrogate graph", 0, "truncated"));
        }
        let s = &self.buf[self.pos..self.pos + k];
        self.pos += k;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
}
