//! QCNN circuits as flat sequences of Pauli rotations.
//!
//! Pooling is implicit: a traced-out qubit simply never appears in a later
//! gate or in the readout observable.

use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pauli::{Pauli, PauliString};

/// Parameters in one general two-qubit block.
pub const BLOCK_PARAMS: usize = 15;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Gate {
    pub generator: PauliString,
    pub param_id: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Circuit {
    n: usize,
    gates: Vec<Gate>,
    n_params: usize,
}

impl Circuit {
    pub fn new(n: usize, gates: Vec<Gate>, n_params: usize) -> Result<Self> {
        for g in &gates {
            if g.generator.num_qubits() != n {
                return Err(Error::SizeMismatch { left: n, right: g.generator.num_qubits() });
            }
            let w = g.generator.weight();
            if !(1..=2).contains(&w) {
                return Err(Error::InvalidCircuit(format!("generator {} has weight {w}", g.generator)));
            }
            if g.param_id >= n_params {
                return Err(Error::InvalidCircuit(format!("param id {} out of range {n_params}", g.param_id)));
            }
        }
        Ok(Circuit { n, gates, n_params })
    }

    pub fn empty(n: usize) -> Self {
        Circuit { n, gates: Vec::new(), n_params: 0 }
    }

    pub fn num_qubits(&self) -> usize {
        self.n
    }

    pub fn gates(&self) -> &[Gate] {
        &self.gates
    }

    pub fn num_params(&self) -> usize {
        self.n_params
    }

    /// Text form: `n <n> params <p>` then `<pauli> <param_id>` per gate.
    pub fn to_text(&self) -> String {
        let mut s = format!("n {} params {}\n", self.n, self.n_params);
        for g in &self.gates {
            let _ = writeln!(s, "{} {}", g.generator, g.param_id);
        }
        s
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        text.parse()
    }
}

impl FromStr for Circuit {
    type Err = Error;

    fn from_str(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (_, header) = lines.next().ok_or_else(|| Error::format("circuit", 1, "empty file"))?;
        let h: Vec<&str> = header.split_whitespace().collect();
        let (n, n_params) = match h.as_slice() {
            ["n", n, "params", p] => (
                n.parse().map_err(|_| Error::format("circuit", 1, "bad qubit count"))?,
                p.parse().map_err(|_| Error::format("circuit", 1, "bad parameter count"))?,
            ),
            _ => return Err(Error::format("circuit", 1, "expected `n <n> params <p>`")),
        };
        let mut gates = Vec::new();
        for (i, line) in lines {
            let mut parts = line.split_whitespace();
            let (Some(gen), Some(pid), None) = (parts.next(), parts.next(), parts.next()) else {
                return Err(Error::format("circuit", i + 1, "expected `<pauli> <param_id>`"));
            };
            let generator: PauliString = gen.parse()?;
            let param_id = pid.parse().map_err(|_| Error::format("circuit", i + 1, "bad param id"))?;
            gates.push(Gate { generator, param_id });
        }
        Circuit::new(n, gates, n_params)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LayoutStyle {
    /// Two staggered sublayers of nearest-neighbour blocks per convolution.
    Brick,
    /// One sublayer of disjoint pairs per convolution.
    NonCrossing,
}

impl FromStr for LayoutStyle {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "brick" => Ok(LayoutStyle::Brick),
            "non-crossing" | "noncrossing" => Ok(LayoutStyle::NonCrossing),
            _ => Err(Error::Invalid(format!("unknown layout style {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Task {
    Binary,
    FourClass,
}

impl Task {
    pub fn num_classes(self) -> usize {
        match self {
            Task::Binary => 2,
            Task::FourClass => 4,
        }
    }
}

impl FromStr for Task {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "binary" => Ok(Task::Binary),
            "four-class" | "fourclass" | "multiclass" => Ok(Task::FourClass),
            _ => Err(Error::Invalid(format!("unknown task {s:?}"))),
        }
    }
}

/// Block placements and pooling survivors of a QCNN.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QcnnLayout {
    pub n: usize,
    pub style: LayoutStyle,
    /// Per convolutional layer, the two-qubit blocks in application order.
    pub layers: Vec<Vec<(usize, usize)>>,
    /// `survivors[0]` is every qubit; `survivors[j]` is what remains after
    /// pooling `j`. The last entry holds the single final survivor.
    pub survivors: Vec<Vec<usize>>,
    pub readout_qubits: Vec<usize>,
}

impl QcnnLayout {
    pub fn num_layers(&self) -> usize {
        self.layers.len()
    }

    /// Qubits measured for the one-hot four-class readout: the pair acted on
    /// by the final block, before the last pooling.
    pub fn readout_pair(&self) -> Option<(usize, usize)> {
        let stage = self.survivors.iter().rev().find(|s| s.len() >= 2)?;
        Some((stage[0], stage[1]))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

/// The fixed 15-rotation template of a general two-qubit block:
/// `Rz Ry Rz` on each qubit, `XX YY ZZ` interactions, `Rz Ry Rz` again.
pub fn decompose_two_qubit_block(n: usize, q1: usize, q2: usize, base_param_id: usize) -> Result<Vec<Gate>> {
    if q1 == q2 {
        return Err(Error::SameQubit(q1));
    }
    for q in [q1, q2] {
        if q >= n {
            return Err(Error::QubitOutOfRange { qubit: q, n });
        }
    }
    let single = |q: usize, p: Pauli| PauliString::from_sites(n, &[(q, p)]);
    let pair = |p: Pauli| PauliString::from_sites(n, &[(q1, p), (q2, p)]);
    let euler = |q: usize| -> Result<Vec<PauliString>> {
        Ok(vec![single(q, Pauli::Z)?, single(q, Pauli::Y)?, single(q, Pauli::Z)?])
    };
    let mut generators = Vec::with_capacity(BLOCK_PARAMS);
    generators.extend(euler(q1)?);
    generators.extend(euler(q2)?);
    generators.extend([pair(Pauli::X)?, pair(Pauli::Y)?, pair(Pauli::Z)?]);
    generators.extend(euler(q1)?);
    generators.extend(euler(q2)?);
    Ok(generators
        .into_iter()
        .enumerate()
        .map(|(i, generator)| Gate { generator, param_id: base_param_id + i })
        .collect())
}

/// Convolution + pooling layers until one qubit remains.
///
/// Pooling keeps every second survivor (`⌈m/2⌉` of `m`), so the lowest-index
/// qubit is always the final survivor.
pub fn build_layout(n: usize, style: LayoutStyle) -> Result<QcnnLayout> {
    if n < 2 {
        return Err(Error::InvalidCircuit(format!("a QCNN needs at least 2 qubits, got {n}")));
    }
    let mut survivors = vec![(0..n).collect::<Vec<_>>()];
    let mut layers = Vec::new();
    loop {
        let current = survivors.last().unwrap();
        if current.len() < 2 {
            break;
        }
        let mut blocks: Vec<(usize, usize)> = current.chunks_exact(2).map(|c| (c[0], c[1])).collect();
        if style == LayoutStyle::Brick {
            blocks.extend(current[1..].chunks_exact(2).map(|c| (c[0], c[1])));
        }
        layers.push(blocks);
        let pooled: Vec<usize> = current.iter().copied().step_by(2).collect();
        survivors.push(pooled);
    }
    let readout_qubits = survivors.last().unwrap().clone();
    Ok(QcnnLayout { n, style, layers, survivors, readout_qubits })
}

/// Compiles a layout into a circuit with one fresh 15-parameter block per
/// placement.
pub fn compile_layout(layout: &QcnnLayout) -> Result<Circuit> {
    let mut gates = Vec::new();
    let mut next = 0;
    for layer in &layout.layers {
        for &(a, b) in layer {
            gates.extend(decompose_two_qubit_block(layout.n, a, b, next)?);
            next += BLOCK_PARAMS;
        }
    }
    Circuit::new(layout.n, gates, next)
}

pub fn build_qcnn(n: usize, style: LayoutStyle) -> Result<(Circuit, QcnnLayout)> {
    let layout = build_layout(n, style)?;
    let circuit = compile_layout(&layout)?;
    Ok((circuit, layout))
}

/// Binary: `[Z_out]`. Four-class: `[Z_a, Z_b, Z_a Z_b]` on the readout pair.
pub fn readout_observables(layout: &QcnnLayout, task: Task) -> Result<Vec<PauliString>> {
    let n = layout.n;
    match task {
        Task::Binary => {
            let q = *layout
                .readout_qubits
                .first()
                .ok_or_else(|| Error::InvalidCircuit("layout has no readout qubit".into()))?;
            Ok(vec![PauliString::from_sites(n, &[(q, Pauli::Z)])?])
        }
        Task::FourClass => {
            let (a, b) = layout
                .readout_pair()
                .ok_or_else(|| Error::InvalidCircuit("four-class readout needs two surviving qubits".into()))?;
            Ok(vec![
                PauliString::from_sites(n, &[(a, Pauli::Z)])?,
                PauliString::from_sites(n, &[(b, Pauli::Z)])?,
                PauliString::from_sites(n, &[(a, Pauli::Z), (b, Pauli::Z)])?,
            ])
        }
    }
}
