//! Quantum imaginary-time evolution: each non-unitary Trotter factor
//! `c^{-1/2} e^{ĥ_s/n}` is replaced by a unitary `e^{-iA_s/n}` on a small qubit
//! domain, with `A_s = Σ_I a_I σ_I` fitted by linear least squares.
//!
//! The normal equations are `Re(S) a = -Re(b)` with `S_IJ = ⟨σ_I σ_J⟩` and
//! `b_I = -i c^{-1/2} ⟨σ_I ĥ_s⟩`, solved in the symmetrized form
//! `Re(S + S†) a = -(b + b̄)`.

use faer::{Mat, Side};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::error::{QrbmError, Result};
use crate::exactdiag::{CMat, HermitianEigen, DENSE_MAX_QUBITS};
use crate::pauli::{PauliString, PauliSum, Phase};
use crate::statevec::{scatter_bits, StateVector};

/// Largest domain on which `A_s` may act.
pub const MAX_DOMAIN: usize = 6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QiteOptions {
    pub n_steps: usize,
    /// Qubits in each `A_s` domain; `None` uses the support of `ĥ_s`.
    pub domain_size: Option<usize>,
    /// Tikhonov weight relative to `tr(M)/dim`.
    pub regularization: f64,
    /// Shots per Pauli expectation when emulating sampled estimates.
    pub shot_noise: Option<u64>,
    pub rng_seed: u64,
    /// Compare against the dense exponential at the end of `qite_evolve`.
    pub final_fidelity: bool,
}

impl Default for QiteOptions {
    fn default() -> Self {
        QiteOptions {
            n_steps: 50,
            domain_size: None,
            regularization: 1e-8,
            shot_noise: None,
            rng_seed: 0,
            final_fidelity: true,
        }
    }
}

impl QiteOptions {
    pub fn validate(&self) -> Result<()> {
        if self.n_steps == 0 {
            return Err(QrbmError::Input("n_steps must be at least 1".into()));
        }
        if let Some(d) = self.domain_size {
            if d == 0 || d > MAX_DOMAIN {
                return Err(QrbmError::Input(format!("domain_size must lie in 1..={MAX_DOMAIN}")));
            }
        }
        if !(self.regularization >= 0.0 && self.regularization.is_finite()) {
            return Err(QrbmError::Input("regularization must be finite and ≥ 0".into()));
        }
        if self.shot_noise == Some(0) {
            return Err(QrbmError::Input("shot_noise needs at least one shot".into()));
        }
        Ok(())
    }

    fn locality_cap(&self) -> usize {
        self.domain_size.unwrap_or(2).max(2)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QiteStepRecord {
    pub term: String,
    /// Coefficients over `basis` (non-identity strings on the domain).
    pub a_coeffs: Vec<f64>,
    pub basis: Vec<String>,
    /// `‖e^{ĥ/n} ψ₀‖²`.
    pub c_norm: f64,
    /// `1 + (2/n)⟨ĥ⟩`.
    pub c_first_order: f64,
    /// `‖Re(S+S†) a + (b + b̄)‖` of the solved real system.
    pub residual: f64,
    /// `‖Im((S+S†) a + b)‖`, the part of the complex equation left unsolved.
    pub imag_residual: f64,
    /// `‖Δ₀ − Δ‖` between the exact and fitted first-order rates.
    pub fit_error: f64,
    pub fidelity_vs_exact: Option<f64>,
}

/// Non-identity terms of `h` in declaration order, each as a one-term sum. The
/// identity part only rescales the state and is left out.
pub fn trotter_terms(h: &PauliSum, cap: usize) -> Result<Vec<PauliSum>> {
    let terms = h.real_terms()?;
    let mut out = Vec::with_capacity(terms.len());
    for (c, p) in terms {
        if p.weight() > cap {
            return Err(QrbmError::UnsupportedLocality {
                term: p.to_string(),
                locality: p.weight(),
                cap,
            });
        }
        out.push(PauliSum::from_real_terms(h.n_qubits(), &[(c, p)])?);
    }
    Ok(out)
}

fn single_term(term: &PauliSum) -> Result<(f64, PauliString)> {
    let t = term.real_terms()?;
    match t.as_slice() {
        [] => Ok((0.0, PauliString::identity(term.n_qubits()))),
        [(c, p)] => Ok((*c, *p)),
        _ => Err(QrbmError::Input("a Trotter step takes a single Pauli term".into())),
    }
}

/// Support of `p`, grown to `size` qubits by adding the nearest qubits
/// (ties to the lower index).
pub fn domain_for(p: &PauliString, size: Option<usize>) -> Result<Vec<usize>> {
    let n = p.n_qubits();
    let mut dom = p.support_qubits();
    let want = size.unwrap_or(dom.len()).max(dom.len()).min(n);
    if want > MAX_DOMAIN {
        return Err(QrbmError::Capacity {
            what: "QITE domain qubits",
            limit: MAX_DOMAIN,
            got: want,
        });
    }
    let core = dom.clone();
    let dist = |q: usize| core.iter().map(|&d| d.abs_diff(q)).min().unwrap_or(q);
    let mut candidates: Vec<usize> = (0..n).filter(|q| !dom.contains(q)).collect();
    candidates.sort_by_key(|&q| (dist(q), q));
    dom.extend(candidates.into_iter().take(want - core.len()));
    dom.sort_unstable();
    Ok(dom)
}

/// Non-identity Pauli strings on `d` local qubits.
fn local_basis(d: usize) -> Vec<PauliString> {
    let mut v = Vec::with_capacity((1 << (2 * d)) - 1);
    for x in 0..1u64 << d {
        for z in 0..1u64 << d {
            if x == 0 && z == 0 {
                continue;
            }
            v.push(PauliString::new(d, x, z).unwrap());
        }
    }
    v
}

fn globalize(local: &PauliString, domain: &[usize], n: usize) -> PauliString {
    PauliString::new(
        n,
        scatter_bits(local.x_mask(), domain),
        scatter_bits(local.z_mask(), domain),
    )
    .unwrap()
}

fn localize(p: &PauliString, domain: &[usize]) -> PauliString {
    let pick = |m: u64| {
        domain
            .iter()
            .enumerate()
            .fold(0u64, |acc, (k, &q)| acc | (((m >> q) & 1) << k))
    };
    PauliString::new(domain.len(), pick(p.x_mask()), pick(p.z_mask())).unwrap()
}

/// Expectations of every local Pauli string from the reduced density matrix,
/// indexed by `(x << d) | z`.
fn domain_expectations(
    psi: &StateVector,
    domain: &[usize],
    shots: Option<(u64, &mut ChaCha8Rng)>,
) -> Result<Vec<f64>> {
    let d = domain.len();
    let rho = psi.reduced_density(domain)?;
    let mut out = vec![0.0; 1 << (2 * d)];
    let mut shots = shots;
    for x in 0..1u64 << d {
        for z in 0..1u64 << d {
            let p = PauliString::new(d, x, z).unwrap();
            let mut v = Complex64::new(0.0, 0.0);
            for r in 0..1u64 << d {
                let (ph, c) = p.apply_to_basis(r);
                v += ph * rho[(r as usize, c as usize)];
            }
            let mut e = v.re;
            if x | z != 0 {
                if let Some((n, rng)) = shots.as_mut() {
                    let pr = ((1.0 + e) / 2.0).clamp(0.0, 1.0);
                    let k = Binomial::new(*n, pr)
                        .map_err(|e| QrbmError::Numerical(e.to_string()))?
                        .sample(*rng);
                    e = 2.0 * k as f64 / *n as f64 - 1.0;
                }
            }
            out[((x << d) | z) as usize] = e;
        }
    }
    Ok(out)
}

#[derive(Clone, Debug)]
pub struct LinearSystem {
    pub domain: Vec<usize>,
    /// Local strings on the domain, identity excluded.
    pub basis: Vec<PauliString>,
    pub s: CMat,
    pub b: Vec<Complex64>,
    pub c: f64,
    pub c_first_order: f64,
}

/// Assembles `S`, `b` and `c` for the step `e^{ĥ_s · inv_n}`.
pub fn build_linear_system(
    psi0: &StateVector,
    term: &PauliSum,
    inv_n: f64,
    domain: &[usize],
    shot_noise: Option<(u64, &mut ChaCha8Rng)>,
) -> Result<LinearSystem> {
    if !psi0.is_normalized() {
        return Err(QrbmError::Contract("QITE needs a normalized input state".into()));
    }
    if term.n_qubits() != psi0.n_qubits() {
        return Err(QrbmError::Dimension {
            expected: psi0.n_qubits(),
            got: term.n_qubits(),
        });
    }
    if domain.len() > MAX_DOMAIN {
        return Err(QrbmError::Capacity {
            what: "QITE domain qubits",
            limit: MAX_DOMAIN,
            got: domain.len(),
        });
    }
    let (coeff, p) = single_term(term)?;
    let dmask = domain.iter().fold(0u64, |m, &q| m | (1 << q));
    if p.support() & !dmask != 0 {
        return Err(QrbmError::Input(format!("domain {domain:?} does not cover {p}")));
    }
    let d = domain.len();
    let ev = domain_expectations(psi0, domain, shot_noise)?;
    let lookup = |s: &PauliString, ph: Phase| ph.to_complex() * ev[((s.x_mask() << d) | s.z_mask()) as usize];
    let basis = local_basis(d);
    let k = basis.len();
    let s = Mat::from_fn(k, k, |i, j| {
        let (ph, r) = crate::pauli::pauli_mul(&basis[i], &basis[j]).unwrap();
        lookup(&r, ph)
    });
    let theta = coeff * inv_n;
    let p_loc = localize(&p, domain);
    let p_exp = ev[((p_loc.x_mask() << d) | p_loc.z_mask()) as usize];
    let exact_p = if p.is_identity() { 1.0 } else { psi0.pauli_expectation(&p)?.re };
    let c = if p.is_identity() {
        (2.0 * theta).exp()
    } else {
        (2.0 * theta).cosh() + (2.0 * theta).sinh() * exact_p
    };
    let c_first_order = 1.0 + 2.0 * theta * p_exp;
    let pref = Complex64::new(0.0, -1.0) * (coeff / c.sqrt());
    let b = basis
        .iter()
        .map(|sig| {
            let (ph, r) = crate::pauli::pauli_mul(sig, &p_loc).unwrap();
            pref * lookup(&r, ph)
        })
        .collect();
    Ok(LinearSystem {
        domain: domain.to_vec(),
        basis,
        s,
        b,
        c,
        c_first_order,
    })
}

/// Tikhonov-filtered solution of the real symmetric system `m a = rhs`.
pub fn solve_regularized(m: &Mat<f64>, rhs: &[f64], reg: f64) -> Result<Vec<f64>> {
    let k = rhs.len();
    if k == 0 {
        return Ok(vec![]);
    }
    let evd = m
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| QrbmError::Numerical(format!("eigensolver: {e:?}")))?;
    let vals = evd.S().column_vector();
    let u = evd.U();
    let trace: f64 = (0..k).map(|i| m[(i, i)]).sum();
    let lam = reg * (trace / k as f64).abs();
    let mut a = vec![0.0; k];
    for j in 0..k {
        let mu = vals[j];
        let proj: f64 = (0..k).map(|r| u[(r, j)] * rhs[r]).sum();
        let denom = mu * mu + lam * lam;
        if denom == 0.0 {
            continue;
        }
        let f = mu / denom * proj;
        for r in 0..k {
            a[r] += u[(r, j)] * f;
        }
    }
    if a.iter().any(|x| !x.is_finite()) {
        return Err(QrbmError::NonFinite("QITE coefficients"));
    }
    Ok(a)
}

/// Dense `e^{-i t A}` for `A = Σ a_I σ_I` on `d` local qubits.
fn domain_unitary(basis: &[PauliString], a: &[f64], d: usize, t: f64) -> Result<CMat> {
    let mut h = PauliSum::zero(d);
    for (p, &c) in basis.iter().zip(a) {
        if c != 0.0 {
            h.add_real(c, *p)?;
        }
    }
    let eig = HermitianEigen::from_sum(&h)?;
    let dim = 1usize << d;
    let ph: Vec<Complex64> = eig
        .values
        .iter()
        .map(|&l| Complex64::new(0.0, -t * l).exp())
        .collect();
    let scaled = Mat::from_fn(dim, dim, |r, c| eig.vectors[(r, c)] * ph[c]);
    Ok(&scaled * eig.vectors.adjoint())
}

/// One compiled Trotter factor. `inv_n` is the imaginary-time increment.
pub fn qite_step_with(
    psi0: &StateVector,
    term: &PauliSum,
    inv_n: f64,
    opts: &QiteOptions,
    rng: &mut ChaCha8Rng,
) -> Result<(StateVector, QiteStepRecord)> {
    opts.validate()?;
    let (coeff, p) = single_term(term)?;
    if coeff == 0.0 || p.is_identity() {
        return Ok((
            psi0.clone(),
            QiteStepRecord {
                term: p.to_string(),
                a_coeffs: vec![],
                basis: vec![],
                c_norm: if p.is_identity() { (2.0 * coeff * inv_n).exp() } else { 1.0 },
                c_first_order: 1.0 + 2.0 * coeff * inv_n * (p.is_identity() as u8 as f64),
                residual: 0.0,
                imag_residual: 0.0,
                fit_error: 0.0,
                fidelity_vs_exact: Some(1.0),
            },
        ));
    }
    let domain = domain_for(&p, opts.domain_size)?;
    let shots = opts.shot_noise.map(|n| (n, &mut *rng));
    let sys = build_linear_system(psi0, term, inv_n, &domain, shots)?;
    let k = sys.basis.len();
    let m = Mat::from_fn(k, k, |i, j| 2.0 * sys.s[(i, j)].re);
    let rhs: Vec<f64> = sys.b.iter().map(|b| -2.0 * b.re).collect();
    let a = solve_regularized(&m, &rhs, opts.regularization)?;
    let residual = (0..k)
        .map(|i| {
            let r: f64 = (0..k).map(|j| m[(i, j)] * a[j]).sum::<f64>() - rhs[i];
            r * r
        })
        .sum::<f64>()
        .sqrt();
    let imag_residual = (0..k)
        .map(|i| {
            let r: Complex64 = (0..k).map(|j| sys.s[(i, j)] * 2.0 * a[j]).sum::<Complex64>() + sys.b[i];
            r.im * r.im
        })
        .sum::<f64>()
        .sqrt();

    let u = domain_unitary(&sys.basis, &a, domain.len(), inv_n)?;
    let psi1 = psi0.apply_dense(&domain, &u)?.normalized()?;

    let n = psi0.n_qubits();
    let exact = psi0
        .apply_exp_real(coeff * inv_n, &p)?
        .normalized()?;
    let mut a_psi = vec![Complex64::new(0.0, 0.0); psi0.dim()];
    for (loc, &c) in sys.basis.iter().zip(&a) {
        if c == 0.0 {
            continue;
        }
        let s = psi0.apply_pauli(&globalize(loc, &domain, n))?;
        for (o, v) in a_psi.iter_mut().zip(s.amplitudes()) {
            *o += v * c;
        }
    }
    let fit_error = if inv_n != 0.0 {
        exact
            .amplitudes()
            .iter()
            .zip(psi0.amplitudes())
            .zip(&a_psi)
            .map(|((e, p0), ap)| {
                let d0 = (e - p0) / inv_n;
                let d1 = Complex64::new(0.0, -1.0) * ap;
                (d0 - d1).norm_sqr()
            })
            .sum::<f64>()
            .sqrt()
    } else {
        0.0
    };
    let fidelity = psi1.fidelity(&exact)?;
    Ok((
        psi1,
        QiteStepRecord {
            term: p.to_string(),
            a_coeffs: a,
            basis: sys.basis.iter().map(|b| b.to_string()).collect(),
            c_norm: sys.c,
            c_first_order: sys.c_first_order,
            residual,
            imag_residual,
            fit_error,
            fidelity_vs_exact: Some(fidelity),
        },
    ))
}

/// One compiled Trotter factor `e^{ĥ/n}` with `n = opts.n_steps`.
pub fn qite_step(psi0: &StateVector, term: &PauliSum, opts: &QiteOptions) -> Result<(StateVector, QiteStepRecord)> {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.rng_seed);
    qite_step_with(psi0, term, 1.0 / opts.n_steps as f64, opts, &mut rng)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QiteTrace {
    pub steps: Vec<QiteStepRecord>,
    /// Fidelity with the normalized dense `e^{τH} ψ₀`.
    pub final_fidelity: Option<f64>,
}

/// `n` sweeps of compiled Trotter factors approximating normalized `e^{τH} ψ₀`.
pub fn qite_evolve(psi0: &StateVector, h: &PauliSum, tau: f64, opts: &QiteOptions) -> Result<(StateVector, QiteTrace)> {
    opts.validate()?;
    if !(tau >= 0.0 && tau.is_finite()) {
        return Err(QrbmError::Input(format!("total imaginary time {tau} must be finite and ≥ 0")));
    }
    let terms = trotter_terms(h, opts.locality_cap())?;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.rng_seed);
    let mut psi = psi0.clone();
    let mut steps = Vec::new();
    if tau > 0.0 {
        let dt = tau / opts.n_steps as f64;
        for _ in 0..opts.n_steps {
            for t in &terms {
                let (next, rec) = qite_step_with(&psi, t, dt, opts, &mut rng)?;
                psi = next;
                steps.push(rec);
            }
        }
    }
    let final_fidelity = if opts.final_fidelity && h.n_qubits() <= DENSE_MAX_QUBITS.min(12) {
        let exact = crate::exactdiag::exp_apply(h, tau, psi0)?;
        Some(psi.fidelity(&exact)?)
    } else {
        None
    };
    Ok((psi, QiteTrace { steps, final_fidelity }))
}
