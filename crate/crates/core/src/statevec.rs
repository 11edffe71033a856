//! Dense statevector simulation.
//!
//! Basis index bit `q` is the computational value of qubit `q`. Non-unitary
//! actions return states flagged unnormalized; renormalizing is left to the caller.

use std::collections::BTreeMap;

use faer::Mat;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;

use crate::error::{QrbmError, Result};
use crate::pauli::{PauliString, PauliSum, Phase};

pub const MAX_QUBITS: usize = 22;

const NORM_TOL: f64 = 1e-12;
const PAR_MIN_LEN: usize = 1 << 14;
const CHUNK: usize = 1 << 12;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    n_qubits: usize,
    amps: Vec<Complex64>,
    normalized: bool,
}

fn check_size(n: usize) -> Result<()> {
    if n > MAX_QUBITS {
        return Err(QrbmError::Capacity {
            what: "statevector qubits",
            limit: MAX_QUBITS,
            got: n,
        });
    }
    Ok(())
}

/// Sum of `f(i)` over `0..len` with a fixed chunking so the result does not
/// depend on the thread count.
fn det_sum<F>(len: usize, f: F) -> Complex64
where
    F: Fn(usize) -> Complex64 + Sync,
{
    if len < PAR_MIN_LEN {
        return (0..len).map(&f).sum();
    }
    let partials: Vec<Complex64> = (0..len.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| (c * CHUNK..((c + 1) * CHUNK).min(len)).map(&f).sum())
        .collect();
    partials.into_iter().sum()
}

/// Place the low bits of `val` at the given bit positions.
#[inline]
pub fn scatter_bits(val: u64, positions: &[usize]) -> u64 {
    positions
        .iter()
        .enumerate()
        .fold(0u64, |acc, (k, &p)| acc | (((val >> k) & 1) << p))
}

/// Basis label with qubit 0 leftmost.
pub fn basis_label(n_qubits: usize, idx: u64) -> String {
    (0..n_qubits)
        .map(|q| if (idx >> q) & 1 == 1 { '1' } else { '0' })
        .collect()
}

impl StateVector {
    pub fn zero(n_qubits: usize) -> Result<Self> {
        Self::basis(n_qubits, 0)
    }

    pub fn basis(n_qubits: usize, idx: u64) -> Result<Self> {
        check_size(n_qubits)?;
        let dim = 1usize << n_qubits;
        if idx as usize >= dim {
            return Err(QrbmError::Dimension {
                expected: dim,
                got: idx as usize + 1,
            });
        }
        let mut amps = vec![ZERO; dim];
        amps[idx as usize] = ONE;
        Ok(StateVector {
            n_qubits,
            amps,
            normalized: true,
        })
    }

    /// `|+>^{⊗n}`.
    pub fn plus(n_qubits: usize) -> Result<Self> {
        check_size(n_qubits)?;
        let dim = 1usize << n_qubits;
        let a = Complex64::new((dim as f64).sqrt().recip(), 0.0);
        Ok(StateVector {
            n_qubits,
            amps: vec![a; dim],
            normalized: true,
        })
    }

    /// Wraps raw amplitudes; the result is flagged unnormalized.
    pub fn from_amplitudes(n_qubits: usize, amps: Vec<Complex64>) -> Result<Self> {
        check_size(n_qubits)?;
        if amps.len() != 1usize << n_qubits {
            return Err(QrbmError::Dimension {
                expected: 1 << n_qubits,
                got: amps.len(),
            });
        }
        Ok(StateVector {
            n_qubits,
            amps,
            normalized: false,
        })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn into_amplitudes(self) -> Vec<Complex64> {
        self.amps
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn norm_sqr(&self) -> f64 {
        det_sum(self.amps.len(), |i| Complex64::new(self.amps[i].norm_sqr(), 0.0)).re
    }

    /// Rescales to unit norm and returns the norm before scaling.
    pub fn normalize(&mut self) -> Result<f64> {
        let nrm = self.norm_sqr().sqrt();
        if !nrm.is_finite() {
            return Err(QrbmError::NonFinite("state norm"));
        }
        if nrm == 0.0 {
            return Err(QrbmError::Numerical("cannot normalize the zero vector".into()));
        }
        let s = nrm.recip();
        self.amps.iter_mut().for_each(|a| *a *= s);
        self.normalized = true;
        Ok(nrm)
    }

    pub fn normalized(mut self) -> Result<Self> {
        self.normalize()?;
        Ok(self)
    }

    fn check_pauli(&self, p: &PauliString) -> Result<()> {
        if p.n_qubits() != self.n_qubits {
            return Err(QrbmError::Dimension {
                expected: self.n_qubits,
                got: p.n_qubits(),
            });
        }
        Ok(())
    }

    fn check_same(&self, other: &StateVector) -> Result<()> {
        if other.n_qubits != self.n_qubits {
            return Err(QrbmError::Dimension {
                expected: self.n_qubits,
                got: other.n_qubits,
            });
        }
        Ok(())
    }

    /// `P ψ`, exact. Keeps the normalization flag.
    pub fn apply_pauli(&self, p: &PauliString) -> Result<Self> {
        self.check_pauli(p)?;
        let x = p.x_mask();
        let phases = [
            Phase::One.to_complex(),
            Phase::I.to_complex(),
            Phase::MinusOne.to_complex(),
            Phase::MinusI.to_complex(),
        ];
        let amps = &self.amps;
        let mut out = vec![ZERO; amps.len()];
        let fill = |(c, chunk): (usize, &mut [Complex64])| {
            for (k, o) in chunk.iter_mut().enumerate() {
                let dst = (c * CHUNK + k) as u64;
                let src = dst ^ x;
                *o = phases[(p.basis_phase_exponent(src) % 4) as usize] * amps[src as usize];
            }
        };
        if out.len() >= PAR_MIN_LEN {
            out.par_chunks_mut(CHUNK).enumerate().for_each(fill);
        } else {
            out.chunks_mut(CHUNK).enumerate().for_each(fill);
        }
        Ok(StateVector {
            n_qubits: self.n_qubits,
            amps: out,
            normalized: self.normalized,
        })
    }

    fn lin_comb(&self, a: Complex64, other: &StateVector, b: Complex64) -> Vec<Complex64> {
        self.amps
            .iter()
            .zip(&other.amps)
            .map(|(u, v)| a * u + b * v)
            .collect()
    }

    /// `e^{θP} ψ = cosh θ ψ + sinh θ Pψ`; flagged unnormalized.
    pub fn apply_exp_real(&self, theta: f64, p: &PauliString) -> Result<Self> {
        if !theta.is_finite() {
            return Err(QrbmError::NonFinite("exponent angle"));
        }
        self.check_pauli(p)?;
        let amps = if p.is_identity() {
            let s = theta.exp();
            self.amps.iter().map(|a| a * s).collect()
        } else {
            let pp = self.apply_pauli(p)?;
            self.lin_comb(
                Complex64::new(theta.cosh(), 0.0),
                &pp,
                Complex64::new(theta.sinh(), 0.0),
            )
        };
        Ok(StateVector {
            n_qubits: self.n_qubits,
            amps,
            normalized: false,
        })
    }

    /// `e^{-iθP} ψ = cos θ ψ - i sin θ Pψ`.
    pub fn apply_exp_imag(&self, theta: f64, p: &PauliString) -> Result<Self> {
        if !theta.is_finite() {
            return Err(QrbmError::NonFinite("rotation angle"));
        }
        self.check_pauli(p)?;
        let amps = if p.is_identity() {
            let s = Complex64::new(0.0, -theta).exp();
            self.amps.iter().map(|a| a * s).collect()
        } else {
            let pp = self.apply_pauli(p)?;
            self.lin_comb(
                Complex64::new(theta.cos(), 0.0),
                &pp,
                Complex64::new(0.0, -theta.sin()),
            )
        };
        Ok(StateVector {
            n_qubits: self.n_qubits,
            amps,
            normalized: self.normalized,
        })
    }

    /// `H ψ` for an arbitrary Pauli sum; flagged unnormalized.
    pub fn apply_sum(&self, h: &PauliSum) -> Result<Self> {
        if h.n_qubits() != self.n_qubits {
            return Err(QrbmError::Dimension {
                expected: self.n_qubits,
                got: h.n_qubits(),
            });
        }
        let idc = h.identity_coeff();
        let mut out: Vec<Complex64> = self.amps.iter().map(|a| a * idc).collect();
        for (p, c) in h.terms() {
            let x = p.x_mask();
            let c = *c;
            let amps = &self.amps;
            let upd = |(ci, chunk): (usize, &mut [Complex64])| {
                for (k, o) in chunk.iter_mut().enumerate() {
                    let dst = (ci * CHUNK + k) as u64;
                    let src = dst ^ x;
                    let ph = Phase::from_exponent(p.basis_phase_exponent(src)).to_complex();
                    *o += c * ph * amps[src as usize];
                }
            };
            if out.len() >= PAR_MIN_LEN {
                out.par_chunks_mut(CHUNK).enumerate().for_each(upd);
            } else {
                out.chunks_mut(CHUNK).enumerate().for_each(upd);
            }
        }
        Ok(StateVector {
            n_qubits: self.n_qubits,
            amps: out,
            normalized: false,
        })
    }

    /// `<ψ|P|ψ>` without any normalization requirement.
    pub fn pauli_expectation(&self, p: &PauliString) -> Result<Complex64> {
        self.check_pauli(p)?;
        let a = &self.amps;
        Ok(det_sum(a.len(), |b| {
            let (ph, t) = p.apply_to_basis(b as u64);
            a[t as usize].conj() * ph * a[b]
        }))
    }

    /// `<ψ|H|ψ>` for normalized ψ and Hermitian H.
    pub fn expectation(&self, h: &PauliSum) -> Result<f64> {
        if !self.normalized {
            return Err(QrbmError::Contract("expectation needs a normalized state".into()));
        }
        if !h.is_hermitian() {
            return Err(QrbmError::Contract("expectation needs a Hermitian operator".into()));
        }
        if h.n_qubits() != self.n_qubits {
            return Err(QrbmError::Dimension {
                expected: self.n_qubits,
                got: h.n_qubits(),
            });
        }
        let mut acc = Complex64::new(h.identity_coeff(), 0.0);
        for (p, c) in h.terms() {
            acc += c * self.pauli_expectation(p)?;
        }
        let scale = h.l1_norm().max(1.0);
        if acc.im.abs() > 1e-10 * scale {
            return Err(QrbmError::Numerical(format!(
                "expectation has imaginary residue {:e}",
                acc.im
            )));
        }
        Ok(acc.re)
    }

    /// `<self|other>`, conjugate-linear in `self`.
    pub fn inner(&self, other: &StateVector) -> Result<Complex64> {
        self.check_same(other)?;
        let (a, b) = (&self.amps, &other.amps);
        Ok(det_sum(a.len(), |i| a[i].conj() * b[i]))
    }

    /// `|<a|b>|^2 / (<a|a><b|b>)`.
    pub fn fidelity(&self, other: &StateVector) -> Result<f64> {
        let ov = self.inner(other)?.norm_sqr();
        Ok(ov / (self.norm_sqr() * other.norm_sqr()))
    }

    pub fn probabilities(&self) -> Vec<f64> {
        let s = if self.normalized { 1.0 } else { self.norm_sqr().recip() };
        self.amps.iter().map(|a| a.norm_sqr() * s).collect()
    }

    /// Projects the listed qubits onto `|+>`, removes them, and renormalizes.
    /// Remaining qubits keep their relative order.
    pub fn postselect_plus(&self, qubits: &[usize]) -> Result<(StateVector, f64)> {
        let mut sel = qubits.to_vec();
        sel.sort_unstable();
        sel.dedup();
        if sel.len() != qubits.len() {
            return Err(QrbmError::Input("repeated post-selection qubit".into()));
        }
        if let Some(&q) = sel.last() {
            if q >= self.n_qubits {
                return Err(QrbmError::Dimension {
                    expected: self.n_qubits,
                    got: q + 1,
                });
            }
        }
        let rest: Vec<usize> = (0..self.n_qubits).filter(|q| !sel.contains(q)).collect();
        let k = sel.len();
        let amp = (0.5f64).powf(k as f64 / 2.0);
        let sel_offsets: Vec<u64> = (0..1u64 << k).map(|h| scatter_bits(h, &sel)).collect();
        let out: Vec<Complex64> = (0..1u64 << rest.len())
            .map(|r| {
                let base = scatter_bits(r, &rest);
                sel_offsets
                    .iter()
                    .map(|o| self.amps[(base | o) as usize])
                    .sum::<Complex64>()
                    * amp
            })
            .collect();
        let mut st = StateVector {
            n_qubits: rest.len(),
            amps: out,
            normalized: false,
        };
        let prob = st.norm_sqr() / self.norm_sqr();
        if !(prob >= 1e-14) {
            return Err(QrbmError::PostselectImpossible(prob));
        }
        st.normalize()?;
        Ok((st, prob))
    }

    /// Multinomial sample of basis outcomes, keyed by basis index.
    pub fn sample_counts(&self, shots: u64, seed: u64) -> Result<BTreeMap<u64, u64>> {
        if shots == 0 {
            return Err(QrbmError::Input("shots must be at least 1".into()));
        }
        if !self.normalized {
            return Err(QrbmError::Contract("sampling needs a normalized state".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let probs = self.probabilities();
        let mut remaining_p: f64 = probs.iter().sum();
        let mut remaining = shots;
        let mut counts = BTreeMap::new();
        for (i, &p) in probs.iter().enumerate() {
            if remaining == 0 {
                break;
            }
            if p <= 0.0 {
                continue;
            }
            let q = (p / remaining_p).clamp(0.0, 1.0);
            let k = if q >= 1.0 {
                remaining
            } else {
                Binomial::new(remaining, q)
                    .map_err(|e| QrbmError::Numerical(e.to_string()))?
                    .sample(&mut rng)
            };
            if k > 0 {
                counts.insert(i as u64, k);
            }
            remaining -= k;
            remaining_p -= p;
        }
        Ok(counts)
    }

    /// Applies a dense `2^k x 2^k` matrix on the listed qubits, listed qubit `j`
    /// being bit `j` of the local index.
    pub fn apply_dense(&self, qubits: &[usize], mat: &Mat<Complex64>) -> Result<Self> {
        let k = qubits.len();
        let d = 1usize << k;
        if mat.nrows() != d || mat.ncols() != d {
            return Err(QrbmError::Dimension {
                expected: d,
                got: mat.nrows(),
            });
        }
        if qubits.iter().any(|&q| q >= self.n_qubits) {
            return Err(QrbmError::Input("qubit index out of range".into()));
        }
        let rest: Vec<usize> = (0..self.n_qubits).filter(|q| !qubits.contains(q)).collect();
        let offs: Vec<usize> = (0..d as u64).map(|l| scatter_bits(l, qubits) as usize).collect();
        let mut out = vec![ZERO; self.amps.len()];
        let mut local = vec![ZERO; d];
        for r in 0..1u64 << rest.len() {
            let base = scatter_bits(r, &rest) as usize;
            for (l, o) in offs.iter().enumerate() {
                local[l] = self.amps[base | o];
            }
            for (row, o) in offs.iter().enumerate() {
                let mut acc = ZERO;
                for (col, v) in local.iter().enumerate() {
                    acc += mat[(row, col)] * v;
                }
                out[base | o] = acc;
            }
        }
        Ok(StateVector {
            n_qubits: self.n_qubits,
            amps: out,
            normalized: false,
        })
    }

    /// Reduced density matrix on the listed qubits (listed qubit `j` is bit `j`).
    pub fn reduced_density(&self, qubits: &[usize]) -> Result<Mat<Complex64>> {
        if qubits.iter().any(|&q| q >= self.n_qubits) {
            return Err(QrbmError::Input("qubit index out of range".into()));
        }
        let k = qubits.len();
        let d = 1usize << k;
        let rest: Vec<usize> = (0..self.n_qubits).filter(|q| !qubits.contains(q)).collect();
        let offs: Vec<usize> = (0..d as u64).map(|l| scatter_bits(l, qubits) as usize).collect();
        let mut rho = Mat::<Complex64>::zeros(d, d);
        let mut local = vec![ZERO; d];
        for r in 0..1u64 << rest.len() {
            let base = scatter_bits(r, &rest) as usize;
            for (l, o) in offs.iter().enumerate() {
                local[l] = self.amps[base | o];
            }
            for a in 0..d {
                if local[a] == ZERO {
                    continue;
                }
                for b in 0..d {
                    rho[(a, b)] += local[a] * local[b].conj();
                }
            }
        }
        Ok(rho)
    }

    /// `self ⊗ other` with `self` on the low qubits.
    pub fn tensor(&self, other: &StateVector) -> Result<Self> {
        check_size(self.n_qubits + other.n_qubits)?;
        let mut amps = Vec::with_capacity(self.dim() * other.dim());
        for b in &other.amps {
            for a in &self.amps {
                amps.push(a * b);
            }
        }
        Ok(StateVector {
            n_qubits: self.n_qubits + other.n_qubits,
            amps,
            normalized: self.normalized && other.normalized,
        })
    }

    /// Re-assert the normalized flag after checking the norm.
    pub fn assume_normalized(mut self) -> Result<Self> {
        let n = self.norm_sqr();
        if (n - 1.0).abs() > NORM_TOL * 10.0 {
            return Err(QrbmError::Contract(format!("state norm^2 is {n}, not 1")));
        }
        self.normalized = true;
        Ok(self)
    }
}
