//! The 2-local RBM Hamiltonian `H_RBM(θ)` and its post-selected trial state,
//! plus the classical RBM marginal used as a comparison model.
//!
//! Visible nodes occupy qubits `0..N`, hidden nodes `N..N+M`. The trial state is
//! `Σ_h exp(H_RBM(θ, h)) |base⟩` normalized, where `H_RBM(θ, h)` replaces each
//! hidden `Z_j` by `1 - 2h_j`.

use faer::Mat;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{QrbmError, Result};
use crate::exactdiag::{CMat, HermitianEigen, DENSE_MAX_QUBITS};
use crate::pauli::{Pauli, PauliString, PauliSum};
use crate::qite::{qite_evolve, QiteOptions};
use crate::statevec::StateVector;

/// Largest admissible `|θ|` entry; keeps `e^θ` comfortably inside double range.
pub const PARAM_BOUND: f64 = 30.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum BaseState {
    #[default]
    PlusProduct,
    /// `(|00⟩ + |11⟩)/√2` on each pair `(i, N/2 + i)`.
    BellPairs,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QrbmParams {
    pub n_visible: usize,
    pub n_hidden: usize,
    /// `b[i] = [b_i^x, b_i^y, b_i^z]`.
    pub b: Vec<[f64; 3]>,
    pub m: Vec<f64>,
    /// Row-major `N × M`.
    pub w: Vec<f64>,
    /// One entry per pair `s < k` in lexicographic order, `[x, y, z]`.
    pub k: Vec<[f64; 3]>,
    #[serde(default)]
    pub base: BaseState,
}

pub fn n_pairs(n: usize) -> usize {
    n * n.saturating_sub(1) / 2
}

impl QrbmParams {
    pub fn zeros(n_visible: usize, n_hidden: usize, base: BaseState) -> Result<Self> {
        let p = QrbmParams {
            n_visible,
            n_hidden,
            b: vec![[0.0; 3]; n_visible],
            m: vec![0.0; n_hidden],
            w: vec![0.0; n_visible * n_hidden],
            k: vec![[0.0; 3]; n_pairs(n_visible)],
            base,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let (n, m) = (self.n_visible, self.n_hidden);
        if n == 0 {
            return Err(QrbmError::Input("at least one visible node is required".into()));
        }
        if self.b.len() != n || self.m.len() != m || self.w.len() != n * m || self.k.len() != n_pairs(n)
        {
            return Err(QrbmError::Input("parameter array lengths do not match N, M".into()));
        }
        if self.base == BaseState::BellPairs && n % 2 != 0 {
            return Err(QrbmError::Input("bell_pairs base needs an even visible count".into()));
        }
        for v in self.to_flat() {
            if !v.is_finite() {
                return Err(QrbmError::NonFinite("Boltzmann parameters"));
            }
            if v.abs() > PARAM_BOUND {
                return Err(QrbmError::Input(format!(
                    "parameter {v} exceeds the bound {PARAM_BOUND}"
                )));
            }
        }
        Ok(())
    }

    pub fn n_qubits(&self) -> usize {
        self.n_visible + self.n_hidden
    }

    pub fn pair_index(&self, s: usize, k: usize) -> usize {
        assert!(s < k && k < self.n_visible);
        let n = self.n_visible;
        s * (2 * n - s - 1) / 2 + (k - s - 1)
    }

    pub fn pairs(&self) -> Vec<(usize, usize)> {
        let n = self.n_visible;
        (0..n).flat_map(|s| (s + 1..n).map(move |k| (s, k))).collect()
    }

    pub fn w_at(&self, i: usize, j: usize) -> f64 {
        self.w[i * self.n_hidden + j]
    }

    pub fn set_w(&mut self, i: usize, j: usize, v: f64) {
        self.w[i * self.n_hidden + j] = v;
    }

    pub fn n_params(&self) -> usize {
        3 * self.n_visible + self.n_hidden + self.w.len() + 3 * self.k.len()
    }

    /// Flat order: b (i-major, x y z), m, W (row-major), K (pair-major, x y z).
    pub fn to_flat(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.n_params());
        v.extend(self.b.iter().flatten());
        v.extend(&self.m);
        v.extend(&self.w);
        v.extend(self.k.iter().flatten());
        v
    }

    pub fn with_flat(&self, flat: &[f64]) -> Result<Self> {
        if flat.len() != self.n_params() {
            return Err(QrbmError::Dimension {
                expected: self.n_params(),
                got: flat.len(),
            });
        }
        let mut out = self.clone();
        let mut it = flat.iter().copied();
        for b in out.b.iter_mut() {
            for t in b.iter_mut() {
                *t = it.next().unwrap();
            }
        }
        for x in out.m.iter_mut().chain(out.w.iter_mut()) {
            *x = it.next().unwrap();
        }
        for k in out.k.iter_mut() {
            for t in k.iter_mut() {
                *t = it.next().unwrap();
            }
        }
        out.validate()?;
        Ok(out)
    }

    /// Human-readable name of flat parameter `idx`.
    pub fn param_label(&self, idx: usize) -> String {
        const T: [char; 3] = ['x', 'y', 'z'];
        let (n, m) = (self.n_visible, self.n_hidden);
        if idx < 3 * n {
            return format!("b[{}].{}", idx / 3, T[idx % 3]);
        }
        let idx = idx - 3 * n;
        if idx < m {
            return format!("m[{idx}]");
        }
        let idx = idx - m;
        if idx < n * m {
            return format!("W[{},{}]", idx / m, idx % m);
        }
        let idx = idx - n * m;
        let (s, k) = self.pairs()[idx / 3];
        format!("K[{s},{k}].{}", T[idx % 3])
    }

    /// Flat indices of `K` couplings between the two halves of a bell-pair register.
    pub fn cross_register_indices(&self) -> Vec<usize> {
        let half = self.n_visible / 2;
        let off = 3 * self.n_visible + self.n_hidden + self.w.len();
        self.pairs()
            .iter()
            .enumerate()
            .filter(|(_, (s, k))| *s < half && *k >= half)
            .flat_map(|(pi, _)| (0..3).map(move |t| off + 3 * pi + t))
            .collect()
    }

    pub fn to_text(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| QrbmError::Numerical(format!("serialize params: {e}")))
    }

    pub fn from_text(s: &str) -> Result<Self> {
        let p: QrbmParams = toml::from_str(s).map_err(|e| QrbmError::Config(e.to_string()))?;
        p.validate()?;
        Ok(p)
    }
}

fn pauli_of(t: usize) -> Pauli {
    Pauli::XYZ[t]
}

/// `Σ b_i^t σ_i^t + Σ m_j Z_{N+j} + Σ W_ij Z_i Z_{N+j} + Σ K_sk^t σ_s^t σ_k^t`.
pub fn build_hrbm(p: &QrbmParams) -> Result<PauliSum> {
    p.validate()?;
    let (n, m) = (p.n_visible, p.n_hidden);
    let nt = n + m;
    let mut h = PauliSum::zero(nt);
    for (i, b) in p.b.iter().enumerate() {
        for (t, &c) in b.iter().enumerate() {
            if c != 0.0 {
                h.add_real(c, PauliString::single(nt, i, pauli_of(t)))?;
            }
        }
    }
    for (j, &c) in p.m.iter().enumerate() {
        if c != 0.0 {
            h.add_real(c, PauliString::single(nt, n + j, Pauli::Z))?;
        }
    }
    for i in 0..n {
        for j in 0..m {
            let c = p.w_at(i, j);
            if c != 0.0 {
                h.add_real(c, PauliString::from_ops(nt, &[(i, Pauli::Z), (n + j, Pauli::Z)])?)?;
            }
        }
    }
    for ((s, k), kk) in p.pairs().into_iter().zip(&p.k) {
        for (t, &c) in kk.iter().enumerate() {
            if c != 0.0 {
                let op = pauli_of(t);
                h.add_real(c, PauliString::from_ops(nt, &[(s, op), (k, op)])?)?;
            }
        }
    }
    Ok(h)
}

/// Hidden `Z_j` replaced by the scalar `1 - 2h_j`; acts on the visible qubits only.
pub fn build_hrbm_fixed_hidden(p: &QrbmParams, h: &[u8]) -> Result<PauliSum> {
    p.validate()?;
    let (n, m) = (p.n_visible, p.n_hidden);
    if h.len() != m {
        return Err(QrbmError::Dimension {
            expected: m,
            got: h.len(),
        });
    }
    if h.iter().any(|&x| x > 1) {
        return Err(QrbmError::Input("hidden configuration entries must be 0 or 1".into()));
    }
    let sign: Vec<f64> = h.iter().map(|&x| 1.0 - 2.0 * x as f64).collect();
    let mut out = PauliSum::zero(n);
    out.set_identity_coeff(p.m.iter().zip(&sign).map(|(a, s)| a * s).sum());
    for (i, b) in p.b.iter().enumerate() {
        let fold: f64 = (0..m).map(|j| p.w_at(i, j) * sign[j]).sum();
        for (t, &c) in b.iter().enumerate() {
            let c = if t == 2 { c + fold } else { c };
            if c != 0.0 {
                out.add_real(c, PauliString::single(n, i, pauli_of(t)))?;
            }
        }
    }
    for ((s, k), kk) in p.pairs().into_iter().zip(&p.k) {
        for (t, &c) in kk.iter().enumerate() {
            if c != 0.0 {
                let op = pauli_of(t);
                out.add_real(c, PauliString::from_ops(n, &[(s, op), (k, op)])?)?;
            }
        }
    }
    Ok(out)
}

pub fn base_state(n: usize, base: BaseState) -> Result<StateVector> {
    match base {
        BaseState::PlusProduct => StateVector::plus(n),
        BaseState::BellPairs => {
            if n % 2 != 0 {
                return Err(QrbmError::Input("bell pairs need an even qubit count".into()));
            }
            let half = n / 2;
            let d = 1usize << half;
            let a = Complex64::new((d as f64).sqrt().recip(), 0.0);
            let mut amps = vec![Complex64::new(0.0, 0.0); 1 << n];
            for x in 0..d {
                amps[x | (x << half)] = a;
            }
            StateVector::from_amplitudes(n, amps)?.assume_normalized()
        }
    }
}

fn hidden_bits(h: u64, m: usize) -> Vec<u8> {
    (0..m).map(|j| ((h >> j) & 1) as u8).collect()
}

/// `Σ_h e^{H(h)} v` scaled by a common factor, via one eigendecomposition per `h`.
fn hidden_sum_apply(p: &QrbmParams, v: &[Complex64]) -> Result<Vec<Complex64>> {
    let m = p.n_hidden;
    let mut parts = Vec::with_capacity(1 << m);
    for h in 0..1u64 << m {
        let hs = build_hrbm_fixed_hidden(p, &hidden_bits(h, m))?;
        let eig = HermitianEigen::from_sum(&hs)?;
        let coef = eig.coefficients(v);
        let top = coef
            .iter()
            .zip(&eig.values)
            .filter(|(c, _)| c.norm() > 1e-300)
            .map(|(_, &l)| l)
            .fold(f64::NEG_INFINITY, f64::max);
        parts.push((eig, coef, top));
    }
    let global = parts.iter().map(|x| x.2).fold(f64::NEG_INFINITY, f64::max);
    if !global.is_finite() {
        return Err(QrbmError::Numerical("base state has no overlap with any eigenvector".into()));
    }
    let d = v.len();
    let mut out = vec![Complex64::new(0.0, 0.0); d];
    for (eig, coef, _) in &parts {
        for (k, c) in coef.iter().enumerate() {
            let wk = c * (eig.values[k] - global).exp();
            if wk.norm() == 0.0 {
                continue;
            }
            for (r, o) in out.iter_mut().enumerate() {
                *o += eig.vectors[(r, k)] * wk;
            }
        }
    }
    Ok(out)
}

/// Normalized trial state from the hidden-configuration sum, one dense
/// exponential per hidden configuration.
pub fn trial_state_exact(p: &QrbmParams) -> Result<StateVector> {
    p.validate()?;
    if p.n_visible > DENSE_MAX_QUBITS {
        return Err(QrbmError::Capacity {
            what: "trial state visible qubits",
            limit: DENSE_MAX_QUBITS,
            got: p.n_visible,
        });
    }
    let base = base_state(p.n_visible, p.base)?;
    let v = hidden_sum_apply(p, base.amplitudes())?;
    let out = StateVector::from_amplitudes(p.n_visible, v)?;
    if out.norm_sqr() < 1e-280 {
        return Err(QrbmError::PostselectImpossible(0.0));
    }
    out.normalized()
}

/// Trial state built as `e^{H_RBM}|base⟩|+⟩^M` on all `N + M` qubits followed by
/// projecting the hidden qubits on `|+⟩`.
pub fn trial_state_postselected(p: &QrbmParams) -> Result<(StateVector, f64)> {
    p.validate()?;
    let nt = p.n_qubits();
    if nt > DENSE_MAX_QUBITS {
        return Err(QrbmError::Capacity {
            what: "entangled register qubits",
            limit: DENSE_MAX_QUBITS,
            got: nt,
        });
    }
    let psi0 = base_state(p.n_visible, p.base)?.tensor(&StateVector::plus(p.n_hidden)?)?;
    let eig = HermitianEigen::from_sum(&build_hrbm(p)?)?;
    let full = StateVector::from_amplitudes(nt, eig.apply_exp(1.0, psi0.amplitudes())?)?
        .assume_normalized()?;
    if p.n_hidden == 0 {
        return Ok((full, 1.0));
    }
    let hidden: Vec<usize> = (p.n_visible..nt).collect();
    full.postselect_plus(&hidden)
}

/// Trial state with `exp(H_RBM)` compiled by QITE, then post-selected.
pub fn trial_state_qite(p: &QrbmParams, opts: &QiteOptions) -> Result<StateVector> {
    p.validate()?;
    let psi0 = base_state(p.n_visible, p.base)?.tensor(&StateVector::plus(p.n_hidden)?)?;
    let h = build_hrbm(p)?;
    let (psi, _) = qite_evolve(&psi0, &h, 1.0, opts)?;
    if p.n_hidden == 0 {
        return Ok(psi);
    }
    let hidden: Vec<usize> = (p.n_visible..p.n_qubits()).collect();
    Ok(psi.postselect_plus(&hidden)?.0)
}

/// Register-local pieces of a bell-pair trial state without cross-register couplings.
///
/// With `|Φ⟩ ∝ Σ_x |x⟩_A|x⟩_B`, `(E_A ⊗ E_B)|Φ⟩` vectorizes `E_A E_Bᵀ`, so the
/// `2N`-qubit state is assembled from `N`-qubit exponentials.
pub struct BellFactors {
    half: usize,
    /// Per hidden configuration: `(E_A, log scale of E_A, E_B, log scale of E_B)`.
    blocks: Vec<(CMat, f64, CMat, f64)>,
}

fn register_sum(p: &QrbmParams, h: &[u8], offset: usize, with_m: bool) -> Result<PauliSum> {
    let half = p.n_visible / 2;
    let full = build_hrbm_fixed_hidden(p, h)?;
    let mut out = PauliSum::zero(half);
    if with_m {
        out.set_identity_coeff(full.identity_coeff());
    }
    let reg_mask = ((1u64 << half) - 1) << offset;
    for (s, c) in full.terms() {
        if s.support() & !reg_mask == 0 {
            let local = PauliString::new(half, s.x_mask() >> offset, s.z_mask() >> offset)?;
            out.add_term(*c, local)?;
        }
    }
    Ok(out)
}

fn exp_matrix(h: &PauliSum) -> Result<(CMat, f64)> {
    let eig = HermitianEigen::from_sum(h)?;
    let top = *eig.values.last().unwrap();
    Ok((eig.function_matrix(|l| (l - top).exp()), top))
}

impl BellFactors {
    pub fn applicable(p: &QrbmParams) -> bool {
        p.base == BaseState::BellPairs
            && p.n_visible % 2 == 0
            && p.cross_register_indices().iter().all(|&i| p.to_flat()[i] == 0.0)
    }

    pub fn new(p: &QrbmParams) -> Result<Self> {
        Self::with_reuse(p, None)
    }

    /// Builds the factors, taking `E_B` (resp. `E_A`) from `prev` when the
    /// corresponding register parameters are unchanged and there are no hidden nodes.
    pub fn with_reuse(p: &QrbmParams, prev: Option<(&QrbmParams, &BellFactors)>) -> Result<Self> {
        p.validate()?;
        if !Self::applicable(p) {
            return Err(QrbmError::Input(
                "factorized path needs a bell_pairs base without cross-register couplings".into(),
            ));
        }
        let half = p.n_visible / 2;
        if half > DENSE_MAX_QUBITS {
            return Err(QrbmError::Capacity {
                what: "register qubits",
                limit: DENSE_MAX_QUBITS,
                got: half,
            });
        }
        let m = p.n_hidden;
        let reuse = prev.filter(|(q, _)| m == 0 && q.n_hidden == 0 && q.n_visible == p.n_visible);
        let mut blocks = Vec::with_capacity(1 << m);
        for h in 0..1u64 << m {
            let bits = hidden_bits(h, m);
            let ha = register_sum(p, &bits, 0, true)?;
            let hb = register_sum(p, &bits, half, false)?;
            let (ea, la, eb, lb) = match reuse {
                Some((q, f)) if register_sum(q, &bits, 0, true)? == ha => {
                    let (eb, lb) = exp_matrix(&hb)?;
                    let blk = &f.blocks[0];
                    (blk.0.clone(), blk.1, eb, lb)
                }
                Some((q, f)) if register_sum(q, &bits, half, false)? == hb => {
                    let (ea, la) = exp_matrix(&ha)?;
                    let blk = &f.blocks[0];
                    (ea, la, blk.2.clone(), blk.3)
                }
                _ => {
                    let (ea, la) = exp_matrix(&ha)?;
                    let (eb, lb) = exp_matrix(&hb)?;
                    (ea, la, eb, lb)
                }
            };
            blocks.push((ea, la, eb, lb));
        }
        Ok(BellFactors { half, blocks })
    }

    /// `Σ_h E_A(h) E_B(h)ᵀ` with a common scale.
    pub fn operator(&self) -> CMat {
        let d = 1usize << self.half;
        let top = self.blocks.iter().map(|b| b.1 + b.3).fold(f64::NEG_INFINITY, f64::max);
        let mut o = Mat::<Complex64>::zeros(d, d);
        for (ea, la, eb, lb) in &self.blocks {
            let s = (la + lb - top).exp();
            if s == 0.0 {
                continue;
            }
            let prod = ea * eb.transpose();
            o = &o + &(&prod * faer::Scale(Complex64::new(s, 0.0)));
        }
        o
    }

    pub fn state(&self) -> Result<StateVector> {
        crate::exactdiag::purification_from_operator(self.half, &self.operator())?.normalized()
    }
}

/// Trial state through the factorized bell-pair path.
pub fn trial_state_bell_factorized(p: &QrbmParams) -> Result<StateVector> {
    BellFactors::new(p)?.state()
}

/// Picks the factorized path when it applies, otherwise the hidden-sum path.
pub fn trial_state(p: &QrbmParams) -> Result<StateVector> {
    if BellFactors::applicable(p) && p.n_visible >= 8 {
        trial_state_bell_factorized(p)
    } else {
        trial_state_exact(p)
    }
}

/// `E(v, h) = Σ b_i v_i + Σ m_j h_j + Σ W_ij v_i h_j + Σ_{s<k} K_sk v_s v_k`
/// with hidden spins `h_j ∈ {±1}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassicalRbmParams {
    pub n_visible: usize,
    pub n_hidden: usize,
    pub b: Vec<f64>,
    pub m: Vec<f64>,
    /// Row-major `N × M`.
    pub w: Vec<f64>,
    /// Pairs `s < k` in lexicographic order.
    pub k: Vec<f64>,
}

/// Conventions for the classical marginal.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RbmConvention {
    /// Read visible bits as spins `1 - 2v` instead of `{0, 1}`.
    pub spin_visible: bool,
    /// Use `e^{+E}` in place of `e^{-E}` (all parameters negated).
    pub positive_exponent: bool,
}

impl ClassicalRbmParams {
    pub fn zeros(n_visible: usize, n_hidden: usize) -> Self {
        ClassicalRbmParams {
            n_visible,
            n_hidden,
            b: vec![0.0; n_visible],
            m: vec![0.0; n_hidden],
            w: vec![0.0; n_visible * n_hidden],
            k: vec![0.0; n_pairs(n_visible)],
        }
    }

    pub fn validate(&self) -> Result<()> {
        let (n, m) = (self.n_visible, self.n_hidden);
        if self.b.len() != n || self.m.len() != m || self.w.len() != n * m || self.k.len() != n_pairs(n)
        {
            return Err(QrbmError::Input("classical parameter lengths do not match N, M".into()));
        }
        let all = self.b.iter().chain(&self.m).chain(&self.w).chain(&self.k);
        if all.clone().any(|x| !x.is_finite()) {
            return Err(QrbmError::NonFinite("classical RBM parameters"));
        }
        Ok(())
    }

    pub fn visible_values(&self, v: &[u8], conv: RbmConvention) -> Vec<f64> {
        v.iter()
            .map(|&x| if conv.spin_visible { 1.0 - 2.0 * x as f64 } else { x as f64 })
            .collect()
    }
}

/// Closed-form marginal `2^{-M} Σ_h e^{-E(v,h)}`
/// `= exp(-Σ b_i v_i - Σ K v_s v_k) Π_j cosh(m_j + Σ_i W_ij v_i)`.
pub fn classical_rbm_amplitude(p: &ClassicalRbmParams, v: &[u8], conv: RbmConvention) -> Result<f64> {
    p.validate()?;
    if v.len() != p.n_visible {
        return Err(QrbmError::Dimension {
            expected: p.n_visible,
            got: v.len(),
        });
    }
    let sgn = if conv.positive_exponent { 1.0 } else { -1.0 };
    let x = p.visible_values(v, conv);
    let n = p.n_visible;
    let mut lin: f64 = p.b.iter().zip(&x).map(|(b, v)| b * v).sum();
    let mut idx = 0;
    for s in 0..n {
        for k in s + 1..n {
            lin += p.k[idx] * x[s] * x[k];
            idx += 1;
        }
    }
    let mut prod = 1.0;
    for j in 0..p.n_hidden {
        let a: f64 = p.m[j] + (0..n).map(|i| p.w[i * p.n_hidden + j] * x[i]).sum::<f64>();
        prod *= a.cosh();
    }
    Ok((sgn * lin).exp() * prod)
}
