//! Dense statevector simulation. This is the brute-force oracle every
//! propagation and shadow test is checked against.
//!
//! Basis index bit `q` is qubit `q`.

use std::io::{Read, Write};
use std::path::Path;

use num_complex::Complex64;
use rand::Rng;

use crate::circuit::Circuit;
use crate::error::{Error, Result};
use crate::pauli::PauliString;

/// Largest qubit count accepted by the circuit oracle.
pub const ORACLE_MAX_QUBITS: usize = 14;

/// Largest qubit count for dense state storage (ground states, shadow
/// acquisition, exact features).
pub const DENSE_MAX_QUBITS: usize = 20;

#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    n: usize,
    amps: Vec<Complex64>,
}

fn check_dense(what: &'static str, n: usize, max: usize) -> Result<()> {
    if n > max {
        return Err(Error::OversizeState { what, n, max });
    }
    Ok(())
}

impl StateVector {
    /// `|0…0⟩`.
    pub fn zero(n: usize) -> Result<Self> {
        check_dense("statevector", n, DENSE_MAX_QUBITS)?;
        let mut amps = vec![Complex64::new(0.0, 0.0); 1 << n];
        amps[0] = Complex64::new(1.0, 0.0);
        Ok(StateVector { n, amps })
    }

    pub fn from_amplitudes(n: usize, amps: Vec<Complex64>) -> Result<Self> {
        check_dense("statevector", n, DENSE_MAX_QUBITS)?;
        if amps.len() != 1 << n {
            return Err(Error::Invalid(format!("{} amplitudes for {n} qubits", amps.len())));
        }
        Ok(StateVector { n, amps })
    }

    pub fn from_real(n: usize, amps: &[f64]) -> Result<Self> {
        Self::from_amplitudes(n, amps.iter().map(|&a| Complex64::new(a, 0.0)).collect())
    }

    /// Tensor product of single-qubit states, qubit 0 first.
    pub fn product(qubits: &[[Complex64; 2]]) -> Result<Self> {
        let n = qubits.len();
        check_dense("statevector", n, DENSE_MAX_QUBITS)?;
        let mut amps = vec![Complex64::new(1.0, 0.0); 1 << n];
        for (b, a) in amps.iter_mut().enumerate() {
            for (q, s) in qubits.iter().enumerate() {
                *a *= s[(b >> q) & 1];
            }
        }
        Ok(StateVector { n, amps })
    }

    /// Haar-random single-qubit state on every qubit.
    pub fn random_product<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<Self> {
        let qubits: Vec<[Complex64; 2]> = (0..n)
            .map(|_| {
                let u: f64 = rng.random();
                let phi: f64 = rng.random::<f64>() * std::f64::consts::TAU;
                let cos_t = 1.0 - 2.0 * u;
                let a = ((1.0 + cos_t) / 2.0).sqrt();
                let b = ((1.0 - cos_t) / 2.0).sqrt();
                [Complex64::new(a, 0.0), Complex64::from_polar(b, phi)]
            })
            .collect();
        Self::product(&qubits)
    }

    pub fn num_qubits(&self) -> usize {
        self.n
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn inner(&self, other: &StateVector) -> Complex64 {
        self.amps.iter().zip(&other.amps).map(|(a, b)| a.conj() * b).sum()
    }

    fn check_pauli(&self, p: &PauliString) -> Result<()> {
        if p.num_qubits() != self.n {
            return Err(Error::SizeMismatch { left: self.n, right: p.num_qubits() });
        }
        Ok(())
    }

    /// `P|ψ⟩` where `P|b⟩ = i^{|x∧z|} (-1)^{b·z} |b ⊕ x⟩`.
    pub fn apply_pauli(&self, p: &PauliString) -> Result<StateVector> {
        self.check_pauli(p)?;
        let (x, z) = p.low_masks();
        let base = pauli_phase(x, z);
        let mut out = vec![Complex64::new(0.0, 0.0); self.amps.len()];
        for (b, &a) in self.amps.iter().enumerate() {
            let sign = if (b as u64 & z).count_ones() & 1 == 1 { -1.0 } else { 1.0 };
            out[b ^ x as usize] = a * base * sign;
        }
        Ok(StateVector { n: self.n, amps: out })
    }

    /// Applies `exp(+iθG/2)`, the Schrödinger-picture rotation whose
    /// Heisenberg action is `P ↦ cosθ P − i sinθ G P` on anticommuting `P`.
    pub fn apply_rotation(&mut self, generator: &PauliString, theta: f64) -> Result<()> {
        self.check_pauli(generator)?;
        let (x, z) = generator.low_masks();
        let base = pauli_phase(x, z);
        let (c, s) = ((theta / 2.0).cos(), (theta / 2.0).sin());
        let is = Complex64::new(0.0, s);
        if x == 0 {
            for (b, a) in self.amps.iter_mut().enumerate() {
                let sign = if (b as u64 & z).count_ones() & 1 == 1 { -1.0 } else { 1.0 };
                *a *= c + is * base * sign;
            }
            return Ok(());
        }
        let x = x as usize;
        let top = 1usize << (63 - (x as u64).leading_zeros());
        for b in 0..self.amps.len() {
            if b & top != 0 {
                continue;
            }
            let b2 = b ^ x;
            let (a1, a2) = (self.amps[b], self.amps[b2]);
            // G|b⟩ = g(b)|b2⟩, G|b2⟩ = g(b2)|b⟩.
            let g_b = base * if (b as u64 & z).count_ones() & 1 == 1 { -1.0 } else { 1.0 };
            let g_b2 = base * if (b2 as u64 & z).count_ones() & 1 == 1 { -1.0 } else { 1.0 };
            self.amps[b] = c * a1 + is * g_b2 * a2;
            self.amps[b2] = c * a2 + is * g_b * a1;
        }
        Ok(())
    }

    /// `⟨ψ|P|ψ⟩` in the physics convention (range `[-1, 1]` for normalized ψ).
    pub fn expectation(&self, p: &PauliString) -> Result<f64> {
        self.check_pauli(p)?;
        let (x, z) = p.low_masks();
        let base = pauli_phase(x, z);
        let mut acc = Complex64::new(0.0, 0.0);
        for (b, &a) in self.amps.iter().enumerate() {
            let sign = if (b as u64 & z).count_ones() & 1 == 1 { -1.0 } else { 1.0 };
            acc += self.amps[b ^ x as usize].conj() * a * sign;
        }
        Ok((acc * base).re)
    }

    /// Reduced density matrix on `qubits` (row index bit `j` is `qubits[j]`).
    pub fn reduced_density_matrix(&self, qubits: &[usize]) -> Result<Vec<Complex64>> {
        for &q in qubits {
            if q >= self.n {
                return Err(Error::QubitOutOfRange { qubit: q, n: self.n });
            }
        }
        let k = qubits.len();
        let d = 1usize << k;
        let mut mask = 0usize;
        for &q in qubits {
            mask |= 1 << q;
        }
        let offsets: Vec<usize> = (0..d)
            .map(|i| {
                qubits.iter().enumerate().filter(|(j, _)| (i >> j) & 1 == 1).fold(0, |acc, (_, &q)| acc | (1 << q))
            })
            .collect();
        let mut rho = vec![Complex64::new(0.0, 0.0); d * d];
        let mut local = vec![Complex64::new(0.0, 0.0); d];
        for rest in 0..self.amps.len() {
            if rest & mask != 0 {
                continue;
            }
            for (i, off) in offsets.iter().enumerate() {
                local[i] = self.amps[rest | off];
            }
            for i in 0..d {
                let ai = local[i];
                if ai.re == 0.0 && ai.im == 0.0 {
                    continue;
                }
                for j in 0..d {
                    rho[i * d + j] += ai * local[j].conj();
                }
            }
        }
        Ok(rho)
    }

    /// Writes the statevector cache: `u32 n`, `u64 state_id`, then `2^n`
    /// little-endian `(re, im)` f64 pairs.
    pub fn write_cache(&self, path: &Path, state_id: u64) -> Result<()> {
        let mut buf = Vec::with_capacity(12 + 16 * self.amps.len());
        buf.extend_from_slice(&(self.n as u32).to_le_bytes());
        buf.extend_from_slice(&state_id.to_le_bytes());
        for a in &self.amps {
            buf.extend_from_slice(&a.re.to_le_bytes());
            buf.extend_from_slice(&a.im.to_le_bytes());
        }
        let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        f.write_all(&buf).map_err(|e| Error::io(path, e))
    }

    pub fn read_cache(path: &Path) -> Result<(u64, StateVector)> {
        let mut buf = Vec::new();
        std::fs::File::open(path).and_then(|mut f| f.read_to_end(&mut buf)).map_err(|e| Error::io(path, e))?;
        if buf.len() < 12 {
            return Err(Error::format("statevector cache", 0, "truncated header"));
        }
        let n = u32::from_le_bytes(buf[0..4].try_into().unwrap()) as usize;
        let id = u64::from_le_bytes(buf[4..12].try_into().unwrap());
        check_dense("statevector cache", n, DENSE_MAX_QUBITS)?;
        let body = &buf[12..];
        if body.len() != 16 << n {
            return Err(Error::format("statevector cache", 0, "payload length mismatch"));
        }
        let amps = body
            .chunks_exact(16)
            .map(|c| {
                Complex64::new(
                    f64::from_le_bytes(c[0..8].try_into().unwrap()),
                    f64::from_le_bytes(c[8..16].try_into().unwrap()),
                )
            })
            .collect();
        Ok((id, StateVector { n, amps }))
    }
}

/// `i^{popcount(x ∧ z)}`.
fn pauli_phase(x: u64, z: u64) -> Complex64 {
    match (x & z).count_ones() % 4 {
        0 => Complex64::new(1.0, 0.0),
        1 => Complex64::new(0.0, 1.0),
        2 => Complex64::new(-1.0, 0.0),
        _ => Complex64::new(0.0, -1.0),
    }
}

/// Runs `circuit` at `theta` on `input` in the Schrödinger picture.
pub fn statevector_oracle(circuit: &Circuit, theta: &[f64], input: &StateVector) -> Result<StateVector> {
    check_dense("circuit oracle", circuit.num_qubits(), ORACLE_MAX_QUBITS)?;
    if input.num_qubits() != circuit.num_qubits() {
        return Err(Error::SizeMismatch { left: circuit.num_qubits(), right: input.num_qubits() });
    }
    if theta.len() != circuit.num_params() {
        return Err(Error::ParamLength { expected: circuit.num_params(), got: theta.len() });
    }
    let mut sv = input.clone();
    for g in circuit.gates() {
        sv.apply_rotation(&g.generator, theta[g.param_id])?;
    }
    Ok(sv)
}

pub fn exact_expectation(sv: &StateVector, p: &PauliString) -> Result<f64> {
    sv.expectation(p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn p(s: &str) -> PauliString {
        s.parse().unwrap()
    }

    fn plus() -> StateVector {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        StateVector::product(&[[Complex64::new(h, 0.0), Complex64::new(h, 0.0)]]).unwrap()
    }

    #[test]
    fn zero_state_expectations() {
        let sv = StateVector::zero(3).unwrap();
        assert_eq!(sv.expectation(&p("ZII")).unwrap(), 1.0);
        assert_eq!(sv.expectation(&p("XII")).unwrap(), 0.0);
        assert_eq!(sv.expectation(&p("ZZZ")).unwrap(), 1.0);
    }

    #[test]
    fn rz_pi_flips_x() {
        let mut sv = plus();
        assert!((sv.expectation(&p("X")).unwrap() - 1.0).abs() < 1e-12);
        sv.apply_rotation(&p("Z"), std::f64::consts::PI).unwrap();
        assert!((sv.expectation(&p("X")).unwrap() + 1.0).abs() < 1e-12);
    }

    #[test]
    fn rotation_matches_heisenberg_rule() {
        // ⟨ψ|U† X U|ψ⟩ = cosθ⟨X⟩ + sinθ⟨Y⟩ for U = exp(iθZ/2).
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let sv = StateVector::random_product(1, &mut rng).unwrap();
        let theta = 0.7;
        let mut rotated = sv.clone();
        rotated.apply_rotation(&p("Z"), theta).unwrap();
        let lhs = rotated.expectation(&p("X")).unwrap();
        let rhs = theta.cos() * sv.expectation(&p("X")).unwrap() + theta.sin() * sv.expectation(&p("Y")).unwrap();
        assert!((lhs - rhs).abs() < 1e-12);
    }

    #[test]
    fn pauli_application_is_involutive() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let sv = StateVector::random_product(4, &mut rng).unwrap();
        let q = p("XYZY");
        let back = sv.apply_pauli(&q).unwrap().apply_pauli(&q).unwrap();
        for (a, b) in back.amplitudes().iter().zip(sv.amplitudes()) {
            assert!((a - b).norm() < 1e-14);
        }
    }

    #[test]
    fn rdm_trace_gives_expectations() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let sv = StateVector::random_product(3, &mut rng).unwrap();
        let rho = sv.reduced_density_matrix(&[0, 2]).unwrap();
        let tr: Complex64 = (0..4).map(|i| rho[i * 4 + i]).sum();
        assert!((tr.re - 1.0).abs() < 1e-12);
    }

    #[test]
    fn oversize_rejected() {
        assert!(matches!(StateVector::zero(21), Err(Error::OversizeState { .. })));
    }

    #[test]
    fn cache_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.sv");
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let sv = StateVector::random_product(3, &mut rng).unwrap();
        sv.write_cache(&path, 42).unwrap();
        let (id, back) = StateVector::read_cache(&path).unwrap();
        assert_eq!(id, 42);
        assert_eq!(back, sv);
    }
}
