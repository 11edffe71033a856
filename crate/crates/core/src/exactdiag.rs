//! Dense exact-diagonalization reference: spectra, Gibbs states, exponentials
//! and the low-subspace self-energy `Σ₋(z) = z − G₋₋(z)⁻¹`.

use faer::linalg::solvers::Solve;
use faer::{Mat, Side};
use num_complex::Complex64;

use crate::error::{QrbmError, Result};
use crate::pauli::PauliSum;
use crate::statevec::StateVector;

pub const DENSE_MAX_QUBITS: usize = 14;

pub type CMat = Mat<Complex64>;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

pub fn to_dense(h: &PauliSum) -> Result<CMat> {
    let n = h.n_qubits();
    if n > DENSE_MAX_QUBITS {
        return Err(QrbmError::Capacity {
            what: "dense matrix qubits",
            limit: DENSE_MAX_QUBITS,
            got: n,
        });
    }
    let d = 1usize << n;
    let mut m = Mat::<Complex64>::zeros(d, d);
    let idc = Complex64::new(h.identity_coeff(), 0.0);
    for b in 0..d {
        m[(b, b)] = idc;
    }
    for (p, c) in h.terms() {
        for b in 0..d {
            let (ph, r) = p.apply_to_basis(b as u64);
            m[(r as usize, b)] += c * ph;
        }
    }
    Ok(m)
}

/// Eigendecomposition of a Hermitian matrix, eigenvalues ascending.
#[derive(Clone, Debug)]
pub struct HermitianEigen {
    pub values: Vec<f64>,
    pub vectors: CMat,
}

impl HermitianEigen {
    pub fn new(m: &CMat) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(QrbmError::Dimension {
                expected: m.nrows(),
                got: m.ncols(),
            });
        }
        let evd = m
            .self_adjoint_eigen(Side::Lower)
            .map_err(|e| QrbmError::Numerical(format!("eigensolver: {e:?}")))?;
        let s = evd.S().column_vector();
        let raw: Vec<f64> = (0..m.nrows()).map(|i| s[i].re).collect();
        let mut order: Vec<usize> = (0..raw.len()).collect();
        order.sort_by(|&a, &b| raw[a].total_cmp(&raw[b]));
        let u = evd.U();
        let vectors = Mat::from_fn(m.nrows(), m.ncols(), |r, c| u[(r, order[c])]);
        let values = order.iter().map(|&i| raw[i]).collect::<Vec<_>>();
        if values.iter().any(|v| !v.is_finite()) {
            return Err(QrbmError::NonFinite("eigenvalues"));
        }
        Ok(HermitianEigen { values, vectors })
    }

    pub fn from_sum(h: &PauliSum) -> Result<Self> {
        if !h.is_hermitian() {
            return Err(QrbmError::Contract("eigh needs a Hermitian operator".into()));
        }
        Self::new(&to_dense(h)?)
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn vector(&self, k: usize) -> Vec<Complex64> {
        (0..self.dim()).map(|r| self.vectors[(r, k)]).collect()
    }

    /// `U f(Λ) U†`.
    pub fn function_matrix(&self, f: impl Fn(f64) -> f64) -> CMat {
        let d = self.dim();
        let fv: Vec<f64> = self.values.iter().map(|&l| f(l)).collect();
        let scaled = Mat::from_fn(d, d, |r, c| self.vectors[(r, c)] * fv[c]);
        &scaled * self.vectors.adjoint()
    }

    /// `U^† v` coefficients.
    pub fn coefficients(&self, v: &[Complex64]) -> Vec<Complex64> {
        let d = self.dim();
        (0..d)
            .map(|k| (0..d).map(|r| self.vectors[(r, k)].conj() * v[r]).sum())
            .collect()
    }

    /// Normalized `e^{tH} v`, stable for large `|t|` by shifting the exponent by its
    /// largest value over components present in `v`.
    pub fn apply_exp(&self, t: f64, v: &[Complex64]) -> Result<Vec<Complex64>> {
        if !t.is_finite() {
            return Err(QrbmError::NonFinite("imaginary time"));
        }
        let d = self.dim();
        if v.len() != d {
            return Err(QrbmError::Dimension {
                expected: d,
                got: v.len(),
            });
        }
        let coef = self.coefficients(v);
        let vmax = coef.iter().map(|c| c.norm()).fold(0.0, f64::max);
        if vmax == 0.0 {
            return Err(QrbmError::Numerical("exponential of the zero vector".into()));
        }
        let shift = coef
            .iter()
            .zip(&self.values)
            .filter(|(c, _)| c.norm() > 1e-300)
            .map(|(_, &l)| t * l)
            .fold(f64::NEG_INFINITY, f64::max);
        let w: Vec<Complex64> = coef
            .iter()
            .zip(&self.values)
            .map(|(c, &l)| c * (t * l - shift).exp())
            .collect();
        let mut out = vec![ZERO; d];
        for (k, wk) in w.iter().enumerate() {
            if *wk == ZERO {
                continue;
            }
            for (r, o) in out.iter_mut().enumerate() {
                *o += self.vectors[(r, k)] * wk;
            }
        }
        let nrm = out.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        if !(nrm > 0.0 && nrm.is_finite()) {
            return Err(QrbmError::Numerical("exponential underflow".into()));
        }
        out.iter_mut().for_each(|a| *a /= nrm);
        Ok(out)
    }
}

#[derive(Clone, Debug)]
pub struct SpectralReport {
    pub eigenvalues: Vec<f64>,
    pub ground_state: StateVector,
    pub gap: f64,
    pub degeneracy_flag: bool,
    /// Largest `|λ|`, the operator norm.
    pub norm: f64,
    pub eigen: HermitianEigen,
}

impl SpectralReport {
    /// Projector fidelity onto the ground space (all eigenvectors within the
    /// degeneracy tolerance of `E₀`).
    pub fn ground_space_fidelity(&self, psi: &StateVector) -> Result<f64> {
        let tol = 1e-8 * self.norm.max(1e-300);
        let e0 = self.eigenvalues[0];
        let v = psi.amplitudes();
        let coef = self.eigen.coefficients(v);
        let total: f64 = v.iter().map(|a| a.norm_sqr()).sum();
        let inside: f64 = coef
            .iter()
            .zip(&self.eigenvalues)
            .filter(|(_, &l)| l - e0 <= tol)
            .map(|(c, _)| c.norm_sqr())
            .sum();
        Ok(inside / total)
    }
}

pub fn eigh(h: &PauliSum) -> Result<SpectralReport> {
    let m = to_dense(h)?;
    let eig = HermitianEigen::from_sum(h)?;
    let norm = eig
        .values
        .iter()
        .map(|v| v.abs())
        .fold(0.0, f64::max);
    // Residual audit of every eigenpair.
    let hu = &m * &eig.vectors;
    let d = eig.dim();
    for k in 0..d {
        let res: f64 = (0..d)
            .map(|r| (hu[(r, k)] - eig.vectors[(r, k)] * eig.values[k]).norm_sqr())
            .sum::<f64>()
            .sqrt();
        if res > 1e-9 * norm.max(1e-300) && res > 1e-13 {
            return Err(QrbmError::Numerical(format!(
                "eigenpair {k} residual {res:e} exceeds tolerance"
            )));
        }
    }
    let gap = if d > 1 {
        (eig.values[1] - eig.values[0]).max(0.0)
    } else {
        0.0
    };
    let degeneracy_flag = d > 1 && gap < 1e-8 * norm.max(1e-300);
    let ground_state =
        StateVector::from_amplitudes(h.n_qubits(), eig.vector(0))?.normalized()?;
    Ok(SpectralReport {
        eigenvalues: eig.values.clone(),
        ground_state,
        gap,
        degeneracy_flag,
        norm,
        eigen: eig,
    })
}

fn check_beta(beta: f64) -> Result<()> {
    if !(beta >= 0.0 && beta.is_finite()) {
        return Err(QrbmError::Input(format!("inverse temperature {beta} must be finite and ≥ 0")));
    }
    Ok(())
}

/// `e^{-βH} / Z`.
pub fn gibbs_state(h: &PauliSum, beta: f64) -> Result<CMat> {
    check_beta(beta)?;
    let eig = HermitianEigen::from_sum(h)?;
    let e0 = eig.values[0];
    let z: f64 = eig.values.iter().map(|l| (-beta * (l - e0)).exp()).sum();
    Ok(eig.function_matrix(|l| (-beta * (l - e0)).exp() / z))
}

/// `(e^{-βH/2} ⊗ I)|φ⟩` normalized, where `|φ⟩ ∝ Σ_x |x⟩|x⟩` pairs qubit `i`
/// with qubit `N + i`.
pub fn gibbs_purification(h: &PauliSum, beta: f64) -> Result<StateVector> {
    check_beta(beta)?;
    let n = h.n_qubits();
    if 2 * n > crate::statevec::MAX_QUBITS {
        return Err(QrbmError::Capacity {
            what: "purified register qubits",
            limit: crate::statevec::MAX_QUBITS,
            got: 2 * n,
        });
    }
    let eig = HermitianEigen::from_sum(h)?;
    let e0 = eig.values[0];
    let z: f64 = eig.values.iter().map(|l| (-beta * (l - e0)).exp()).sum();
    let root = eig.function_matrix(|l| ((-beta * (l - e0)).exp() / z).sqrt());
    Ok(purification_from_operator(n, &root)?.normalized()?)
}

/// Vectorizes `O` as `ψ[a + 2^N b] = O[a, b]`.
pub fn purification_from_operator(n: usize, o: &CMat) -> Result<StateVector> {
    let d = 1usize << n;
    if o.nrows() != d || o.ncols() != d {
        return Err(QrbmError::Dimension {
            expected: d,
            got: o.nrows(),
        });
    }
    let mut amps = Vec::with_capacity(d * d);
    for b in 0..d {
        for a in 0..d {
            amps.push(o[(a, b)]);
        }
    }
    StateVector::from_amplitudes(2 * n, amps)
}

/// Normalized `e^{tH} ψ` through the eigenbasis.
pub fn exp_apply(h: &PauliSum, t: f64, psi: &StateVector) -> Result<StateVector> {
    if h.n_qubits() != psi.n_qubits() {
        return Err(QrbmError::Dimension {
            expected: psi.n_qubits(),
            got: h.n_qubits(),
        });
    }
    let eig = HermitianEigen::from_sum(h)?;
    let v = eig.apply_exp(t, psi.amplitudes())?;
    StateVector::from_amplitudes(psi.n_qubits(), v)?.normalized()
}

/// Spectral norm of a Hermitian matrix.
pub fn hermitian_norm(m: &CMat) -> Result<f64> {
    let h = HermitianEigen::new(m)?;
    Ok(h.values.iter().map(|v| v.abs()).fold(0.0, f64::max))
}

/// Operator norm of an arbitrary square matrix via `‖M†M‖^{1/2}`.
pub fn operator_norm(m: &CMat) -> Result<f64> {
    let mm = m.adjoint() * m;
    Ok(hermitian_norm(&mm)?.sqrt())
}

/// Self-energy restricted to a low subspace, with the isometry that embeds it.
#[derive(Clone, Debug)]
pub struct SelfEnergy {
    /// `d × k` isometry whose columns span the low subspace.
    pub low_basis: CMat,
    /// `k × k` operator in the basis of `low_basis`.
    pub sigma: CMat,
}

impl SelfEnergy {
    /// `P Σ P†` on the full space.
    pub fn embedded(&self) -> CMat {
        &(&self.low_basis * &self.sigma) * self.low_basis.adjoint()
    }

    /// `P† X P` for a full-space operator `X`.
    pub fn restrict(&self, x: &CMat) -> CMat {
        &(self.low_basis.adjoint() * x) * &self.low_basis
    }

    pub fn dim(&self) -> usize {
        self.sigma.nrows()
    }
}

fn columns(m: &CMat, cols: &[usize]) -> CMat {
    Mat::from_fn(m.nrows(), cols.len(), |r, c| m[(r, cols[c])])
}

/// `Σ₋(z)` of `h` with the low subspace spanned by eigenvectors of `h0` below `λ_c`.
///
/// Evaluated as the Schur complement `H₋₋ + H₋₊ (z − H₊₊)⁻¹ H₊₋`, which equals
/// `z − G₋₋⁻¹` whenever both sides exist.
pub fn self_energy_split(h0: &PauliSum, h: &PauliSum, z: f64, lambda_c: f64) -> Result<SelfEnergy> {
    if h0.n_qubits() != h.n_qubits() {
        return Err(QrbmError::Dimension {
            expected: h0.n_qubits(),
            got: h.n_qubits(),
        });
    }
    let e0 = HermitianEigen::from_sum(h0)?;
    let full = to_dense(h)?;
    let eh = HermitianEigen::new(&full)?;
    let hnorm = eh.values.iter().map(|v| v.abs()).fold(0.0, f64::max);
    let dist = eh
        .values
        .iter()
        .map(|l| (z - l).abs())
        .fold(f64::INFINITY, f64::min);
    if dist <= 1e-8 * hnorm.max(1e-300) {
        return Err(QrbmError::Singular(format!(
            "z = {z} lies within {dist:e} of an eigenvalue"
        )));
    }
    let low: Vec<usize> = (0..e0.dim()).filter(|&k| e0.values[k] < lambda_c).collect();
    let high: Vec<usize> = (0..e0.dim()).filter(|&k| e0.values[k] >= lambda_c).collect();
    if low.is_empty() || high.is_empty() {
        return Err(QrbmError::Partition(format!(
            "cutoff {lambda_c} leaves {} low and {} high states",
            low.len(),
            high.len()
        )));
    }
    let pm = columns(&e0.vectors, &low);
    let pp = columns(&e0.vectors, &high);
    let hmm = &(pm.adjoint() * &full) * &pm;
    let hmp = &(pm.adjoint() * &full) * &pp;
    let hpm = hmp.adjoint().to_owned();
    let hpp = &(pp.adjoint() * &full) * &pp;
    let kp = high.len();
    let zm = Mat::from_fn(kp, kp, |r, c| {
        let delta = if r == c { Complex64::new(z, 0.0) } else { ZERO };
        delta - hpp[(r, c)]
    });
    let x = zm.partial_piv_lu().solve(&hpm);
    if (0..x.nrows()).any(|r| (0..x.ncols()).any(|c| !x[(r, c)].re.is_finite() || !x[(r, c)].im.is_finite())) {
        return Err(QrbmError::Singular(format!("z = {z} is a pole of the high block")));
    }
    let sigma = &hmm + &(&hmp * &x);
    Ok(SelfEnergy {
        low_basis: pm,
        sigma,
    })
}

/// `Σ₋(z)` with the projectors taken from `h` itself.
pub fn self_energy(h: &PauliSum, z: f64, lambda_c: f64) -> Result<SelfEnergy> {
    self_energy_split(h, h, z, lambda_c)
}
