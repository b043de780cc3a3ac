//! Oracle-equivalence check: untruncated propagation and surrogate
//! evaluation against the dense Schrödinger-picture simulation, on random
//! parameters and random product inputs.

use num_complex::Complex64;
use rand::Rng;

use crate::circuit::{build_qcnn, readout_observables, LayoutStyle, Task};
use crate::error::Result;
use crate::pauli::{Pauli, PauliString, PauliSum};
use crate::propagation::{propagate, TruncationPolicy};
use crate::rng::substream;
use crate::statevector::{statevector_oracle, StateVector};
use crate::surrogate::SurrogateGraph;

/// Random pure product state, kept with its Bloch vectors.
#[derive(Debug, Clone)]
pub struct ProductInput {
    pub bloch: Vec<[f64; 3]>,
    pub state: StateVector,
}

impl ProductInput {
    pub fn random<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<Self> {
        let mut bloch = Vec::with_capacity(n);
        let mut qubits = Vec::with_capacity(n);
        for _ in 0..n {
            let cos_t = 1.0 - 2.0 * rng.random::<f64>();
            let phi = rng.random::<f64>() * std::f64::consts::TAU;
            let sin_t = (1.0 - cos_t * cos_t).max(0.0).sqrt();
            bloch.push([sin_t * phi.cos(), sin_t * phi.sin(), cos_t]);
            let a = ((1.0 + cos_t) / 2.0).sqrt();
            let b = ((1.0 - cos_t) / 2.0).sqrt();
            qubits.push([Complex64::new(a, 0.0), Complex64::from_polar(b, phi)]);
        }
        Ok(ProductInput { bloch, state: StateVector::product(&qubits)? })
    }

    /// `⟨P⟩` as a product of Bloch components.
    pub fn expectation(&self, p: &PauliString) -> f64 {
        let mut acc = 1.0;
        for q in p.support() {
            let b = &self.bloch[q];
            acc *= match p.get(q) {
                Pauli::I => 1.0,
                Pauli::X => b[0],
                Pauli::Y => b[1],
                Pauli::Z => b[2],
            };
        }
        acc
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleReport {
    pub n: usize,
    pub trials: usize,
    pub max_propagate_gap: f64,
    pub max_surrogate_gap: f64,
}

impl OracleReport {
    pub fn max_gap(&self) -> f64 {
        self.max_propagate_gap.max(self.max_surrogate_gap)
    }
}

/// Compares both routes for the readout `Z` of an `n`-qubit QCNN.
pub fn oracle_equivalence(n: usize, style: LayoutStyle, trials: usize, seed: u64) -> Result<OracleReport> {
    let (circuit, layout) = build_qcnn(n, style)?;
    let obs = PauliSum::single(readout_observables(&layout, Task::Binary)?.remove(0));
    // A weight cap of n never truncates.
    let graph = SurrogateGraph::build(&circuit, &obs, &TruncationPolicy::with_max_weight(n))?;
    let active = graph.all_leaves();
    let mut rng = substream(seed, "oracle", n as u64);
    let mut report = OracleReport { n, trials, max_propagate_gap: 0.0, max_surrogate_gap: 0.0 };
    for _ in 0..trials {
        let theta: Vec<f64> =
            (0..circuit.num_params()).map(|_| rng.random_range(-std::f64::consts::PI..std::f64::consts::PI)).collect();
        let input = ProductInput::random(n, &mut rng)?;
        let out = statevector_oracle(&circuit, &theta, &input.state)?;
        let (p, c) = obs.iter().next().expect("single term");
        let exact = c * out.expectation(p)?;
        let prop = propagate(&circuit, &obs, &theta, &TruncationPolicy::exact())?;
        let via_prop = prop.dot(|q| Some(input.expectation(q)));
        let via_graph = graph.evaluate(&active, &theta, |q| Some(input.expectation(q)))?;
        report.max_propagate_gap = report.max_propagate_gap.max((via_prop - exact).abs());
        report.max_surrogate_gap = report.max_surrogate_gap.max((via_graph - exact).abs());
    }
    Ok(report)
}
