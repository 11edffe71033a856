//! Perturbative gadgets and the ground-state parameter map for the simplified
//! 2-local form.
//!
//! * `theorem2_*`: 3-local `Y − 6 Σ B₁B₂B₃` from a 2-local Hamiltonian with
//!   three ancillas per product, low space `|000⟩, |111⟩` per ancilla triple.
//! * `theorem3_*`: a `σˣσʸ` coupling from `σˣ, σʸ, σˣσˣ, σʸσʸ` terms and one
//!   ancilla, low space ancilla `|−⟩`.
//! * `theorem4_*`: Boltzmann parameters whose trial state is close to the ground
//!   state of a simplified Hamiltonian.

use faer::Mat;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::ansatz::{trial_state_exact, BaseState, QrbmParams};
use crate::error::{QrbmError, Result};
use crate::exactdiag::{eigh, hermitian_norm, self_energy_split, to_dense, CMat, HermitianEigen, DENSE_MAX_QUBITS};
use crate::pauli::{sum_combine, Pauli, PauliString, PauliSum};
use crate::statevec::StateVector;

fn ps(n: usize, ops: &[(usize, Pauli)]) -> PauliString {
    PauliString::from_ops(n, ops).unwrap()
}

fn vec_overlap(a: &[Complex64], b: &[Complex64]) -> f64 {
    let ip: Complex64 = a.iter().zip(b).map(|(x, y)| x.conj() * y).sum();
    let na: f64 = a.iter().map(|x| x.norm_sqr()).sum();
    let nb: f64 = b.iter().map(|x| x.norm_sqr()).sum();
    ip.norm_sqr() / (na * nb)
}

// ---------------------------------------------------------------------------
// 3-local → 2-local

#[derive(Clone, Debug)]
pub struct Theorem2Input {
    /// 2-local part on the system qubits.
    pub y: PauliSum,
    /// Positive operators on the system qubits, at most 1-local each.
    pub b_triples: Vec<[PauliSum; 3]>,
    pub delta: f64,
}

#[derive(Clone, Debug)]
pub struct Theorem2Build {
    pub n_system: usize,
    pub n_triples: usize,
    /// Ancilla penalty `−(δ⁻³/4) Σ (ZZ + ZZ + ZZ − 3I)`.
    pub h: PauliSum,
    pub v: PauliSum,
    pub h2: PauliSum,
    /// `Y ⊗ I − 6 Σ_m B_{m1}B_{m2}B_{m3} ⊗ σˣ_m` on system plus one effective qubit per triple.
    pub h_eff: PauliSum,
    pub lambda_c: f64,
    /// Isometry from the effective register into the full register.
    pub embedding: CMat,
}

fn ancilla(n_sys: usize, m: usize, r: usize) -> usize {
    n_sys + 3 * m + r
}

pub fn theorem2_build(input: &Theorem2Input) -> Result<Theorem2Build> {
    let n = input.y.n_qubits();
    let m = input.b_triples.len();
    let delta = input.delta;
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(QrbmError::Input("δ must be positive".into()));
    }
    let nt = n + 3 * m;
    if nt > DENSE_MAX_QUBITS {
        return Err(QrbmError::Capacity {
            what: "gadget qubits",
            limit: DENSE_MAX_QUBITS,
            got: nt,
        });
    }
    if input.y.terms().any(|(p, _)| p.weight() > 2) {
        return Err(QrbmError::Input("Y must be 2-local".into()));
    }
    let floor = 1.0 / (n as f64).powi(3);
    for (mi, triple) in input.b_triples.iter().enumerate() {
        for (r, b) in triple.iter().enumerate() {
            if b.n_qubits() != n {
                return Err(QrbmError::Dimension { expected: n, got: b.n_qubits() });
            }
            if b.terms().any(|(p, _)| p.weight() > 1) {
                return Err(QrbmError::Input(format!("B[{mi}][{r}] must be 1-local for a 2-local gadget")));
            }
            let lo = HermitianEigen::from_sum(b)?.values[0];
            if lo < floor - 1e-12 {
                return Err(QrbmError::Input(format!(
                    "B[{mi}][{r}] has smallest eigenvalue {lo}, below 1/n³ = {floor}"
                )));
            }
        }
    }

    let mut h = PauliSum::zero(nt);
    let pen = -delta.powi(-3) / 4.0;
    for mi in 0..m {
        let a = |r| ancilla(n, mi, r);
        for (r, s) in [(0, 1), (0, 2), (1, 2)] {
            h.add_real(pen, ps(nt, &[(a(r), Pauli::Z), (a(s), Pauli::Z)]))?;
        }
        h.set_identity_coeff(h.identity_coeff() - 3.0 * pen);
    }

    let mut v = input.y.embed(nt, 0)?;
    for (mi, triple) in input.b_triples.iter().enumerate() {
        for (r, b) in triple.iter().enumerate() {
            let sq = b.mul(b)?.embed(nt, 0)?;
            v = sum_combine(&v, &sq, 1.0, 1.0 / delta)?;
            let x = PauliSum::from_real_terms(nt, &[(1.0, PauliString::single(nt, ancilla(n, mi, r), Pauli::X))])?;
            let bx = b.embed(nt, 0)?.mul(&x)?;
            v = sum_combine(&v, &bx, 1.0, -delta.powi(-2))?;
        }
    }
    let h2 = sum_combine(&h, &v, 1.0, 1.0)?;

    let ne = n + m;
    let mut h_eff = input.y.embed(ne, 0)?;
    for (mi, [b1, b2, b3]) in input.b_triples.iter().enumerate() {
        let prod = b1.mul(b2)?.mul(b3)?;
        if !prod.is_hermitian() {
            return Err(QrbmError::Input(format!("B₁B₂B₃ of triple {mi} is not Hermitian")));
        }
        let x = PauliSum::from_real_terms(ne, &[(1.0, PauliString::single(ne, n + mi, Pauli::X))])?;
        let t = prod.embed(ne, 0)?.mul(&x)?;
        h_eff = sum_combine(&h_eff, &t, 1.0, -6.0)?;
    }

    let (dl, df) = (1usize << ne, 1usize << nt);
    let sys_mask = (1usize << n) - 1;
    let embedding = Mat::from_fn(df, dl, |r, c| {
        let mut full = c & sys_mask;
        for mi in 0..m {
            if (c >> (n + mi)) & 1 == 1 {
                full |= 0b111 << ancilla(n, mi, 0);
            }
        }
        if r == full {
            Complex64::new(1.0, 0.0)
        } else {
            Complex64::new(0.0, 0.0)
        }
    });
    Ok(Theorem2Build {
        n_system: n,
        n_triples: m,
        h,
        v,
        h2,
        h_eff,
        lambda_c: delta.powi(-3) / 2.0,
        embedding,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Theorem2Report {
    pub delta: f64,
    /// `‖Σ₋(0) − H_eff‖`.
    pub deviation_at_zero: f64,
    /// Evaluation points over `[−‖H_eff‖ − δ, ‖H_eff‖ + δ]` and the deviation at each
    /// (points on a pole are skipped).
    pub grid: Vec<(f64, f64)>,
    pub max_deviation: f64,
    /// `|⟨v₂|v_eff⟩|²` between the ground states of `H2` and of the embedded `H_eff`.
    pub ground_overlap: f64,
}

fn theorem2_deviation(b: &Theorem2Build, z: f64, target: &CMat) -> Result<f64> {
    let se = self_energy_split(&b.h, &b.h2, z, b.lambda_c)?;
    let diff = &se.embedded() - target;
    hermitian_norm(&diff)
}

pub fn theorem2_verify(b: &Theorem2Build, grid_points: usize) -> Result<Theorem2Report> {
    let eff_dense = to_dense(&b.h_eff)?;
    let delta = (2.0 * b.lambda_c).powf(-1.0 / 3.0);
    let eff_norm = hermitian_norm(&eff_dense)?;
    if b.n_triples == 0 {
        // No high space: the self-energy is the Hamiltonian itself.
        let g = eigh(&b.h2)?.ground_state;
        let ge = eigh(&b.h_eff)?.ground_state;
        let dev = hermitian_norm(&(&to_dense(&b.h2)? - &eff_dense))?;
        return Ok(Theorem2Report {
            delta,
            deviation_at_zero: dev,
            grid: vec![(0.0, dev)],
            max_deviation: dev,
            ground_overlap: g.fidelity(&ge)?,
        });
    }
    let target = &(&b.embedding * &eff_dense) * b.embedding.adjoint();
    let deviation_at_zero = theorem2_deviation(b, 0.0, &target)?;
    let (lo, hi) = (-eff_norm - delta, eff_norm + delta);
    let mut grid = Vec::new();
    for k in 0..grid_points {
        let z = if grid_points == 1 {
            0.0
        } else {
            lo + (hi - lo) * k as f64 / (grid_points - 1) as f64
        };
        match theorem2_deviation(b, z, &target) {
            Ok(d) => grid.push((z, d)),
            Err(QrbmError::Singular(_)) => continue,
            Err(e) => return Err(e),
        }
    }
    let max_deviation = grid.iter().map(|g| g.1).fold(deviation_at_zero, f64::max);
    let g2 = eigh(&b.h2)?.ground_state;
    let ge = eigh(&b.h_eff)?.ground_state;
    let col = Mat::from_fn(ge.dim(), 1, |r, _| ge.amplitudes()[r]);
    let emb = &b.embedding * &col;
    let emb: Vec<Complex64> = (0..emb.nrows()).map(|r| emb[(r, 0)]).collect();
    Ok(Theorem2Report {
        delta,
        deviation_at_zero,
        grid,
        max_deviation,
        ground_overlap: vec_overlap(g2.amplitudes(), &emb),
    })
}

// ---------------------------------------------------------------------------
// σˣσʸ from σˣ, σʸ, σˣσˣ, σʸσʸ

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Theorem3Gadget {
    pub i: usize,
    pub j: usize,
    pub k: usize,
    pub alpha: f64,
    pub delta: f64,
    pub e: f64,
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
    /// `B²/(0 − δ⁻¹)²`.
    pub g: f64,
    pub h_i: f64,
    pub h_j: f64,
    pub delta_i: f64,
    pub delta_j: f64,
    pub k_ij: f64,
    /// `h_i σˣ_i + h_j σˣ_j + Δ_i σʸ_i + Δ_j σʸ_j + σˣσˣ + K_ij σʸσʸ`.
    #[serde(skip)]
    pub h2_star: PauliSum,
    /// Unperturbed ancilla term `δ⁻¹|+⟩⟨+|_k`.
    #[serde(skip)]
    pub h0: PauliSum,
    /// `H0 + V₁ + V₂ + V₃`.
    #[serde(skip)]
    pub gadget_hamiltonian: PauliSum,
}

/// Maximum δ accepted by `theorem3_build`.
pub const THEOREM3_MAX_DELTA: f64 = 0.25;

pub fn theorem3_build(i: usize, j: usize, alpha: f64, delta: f64, e: f64) -> Result<Theorem3Gadget> {
    if i == j || i > 1 || j > 1 {
        return Err(QrbmError::Input("i and j must be the two distinct system qubits 0 and 1".into()));
    }
    if !(delta > 0.0 && delta <= THEOREM3_MAX_DELTA) {
        return Err(QrbmError::Input(format!("δ must lie in (0, {THEOREM3_MAX_DELTA}]")));
    }
    if e == 0.0 || !e.is_finite() || !alpha.is_finite() {
        return Err(QrbmError::Input("E must be finite and nonzero; α finite".into()));
    }
    let n = 3;
    let k = 2;
    let inv = (1.0 / (delta * e)).cbrt().powi(2);
    let a = alpha;
    let b = inv * e;
    let c = alpha * inv / 2.0;
    let d = 2.0 * delta.cbrt().recip() * e.abs().cbrt().powi(2);
    let g = b * b * delta * delta;
    let (h_i, h_j, delta_i, delta_j, k_ij) = (1.0 + 2.0 * g, 1.0, 1.0 + 4.0 * g, 1.0 + 2.0 * g, 1.0 + 4.0 * g);

    let h2_star = PauliSum::from_real_terms(
        n,
        &[
            (h_i, ps(n, &[(i, Pauli::X)])),
            (h_j, ps(n, &[(j, Pauli::X)])),
            (delta_i, ps(n, &[(i, Pauli::Y)])),
            (delta_j, ps(n, &[(j, Pauli::Y)])),
            (1.0, ps(n, &[(i, Pauli::X), (j, Pauli::X)])),
            (k_ij, ps(n, &[(i, Pauli::Y), (j, Pauli::Y)])),
        ],
    )?;
    let mut h0 = PauliSum::from_real_terms(n, &[(0.5 / delta, ps(n, &[(k, Pauli::X)]))])?;
    h0.set_identity_coeff(0.5 / delta);

    let mut g_ham = sum_combine(&h0, &h2_star, 1.0, 1.0)?;
    // V₁ = (H^(2*) + D(σʸ_j + I)) ⊗ I − A σˣ_i ⊗ (I − X_k)/2
    g_ham.add_real(d, ps(n, &[(j, Pauli::Y)]))?;
    g_ham.set_identity_coeff(g_ham.identity_coeff() + d);
    g_ham.add_real(-a / 2.0, ps(n, &[(i, Pauli::X)]))?;
    g_ham.add_real(a / 2.0, ps(n, &[(i, Pauli::X), (k, Pauli::X)]))?;
    // V₂ = B (σʸ_j + I) ⊗ σʸ_k
    g_ham.add_real(b, ps(n, &[(j, Pauli::Y), (k, Pauli::Y)]))?;
    g_ham.add_real(b, ps(n, &[(k, Pauli::Y)]))?;
    // V₃ = C σˣ_i ⊗ (I + X_k)/2
    g_ham.add_real(c / 2.0, ps(n, &[(i, Pauli::X)]))?;
    g_ham.add_real(c / 2.0, ps(n, &[(i, Pauli::X), (k, Pauli::X)]))?;
    g_ham.prune();

    Ok(Theorem3Gadget {
        i,
        j,
        k,
        alpha,
        delta,
        e,
        a,
        b,
        c,
        d,
        g,
        h_i,
        h_j,
        delta_i,
        delta_j,
        k_ij,
        h2_star,
        h0,
        gadget_hamiltonian: g_ham,
    })
}

/// `H̃^(2*) + α σˣ_i σʸ_j` on the two system qubits (3-qubit register, ancilla idle).
pub fn theorem3_target(g: &Theorem3Gadget) -> Result<PauliSum> {
    let n = 3;
    let mut yj = PauliSum::from_real_terms(n, &[(1.0, ps(n, &[(g.j, Pauli::Y)]))])?;
    yj.set_identity_coeff(1.0);
    let dressed = yj.mul(&g.h2_star)?.mul(&yj)?;
    let mut t = sum_combine(&g.h2_star, &dressed, 1.0, g.g)?;
    t.add_real(g.alpha, ps(n, &[(g.i, Pauli::X), (g.j, Pauli::Y)]))?;
    t.prune();
    Ok(t)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Theorem3Report {
    pub delta: f64,
    /// Point where `Σ₋` was evaluated: `0` unless that is a pole.
    pub z: f64,
    pub deviation: f64,
    /// Deviation with the `α σˣσʸ` term left out of the target.
    pub deviation_without_alpha: f64,
    /// Fidelity of the gadget ground state with `|g_target⟩|−⟩`.
    pub ground_overlap: f64,
}

pub fn theorem3_verify(g: &Theorem3Gadget, target: &PauliSum) -> Result<Theorem3Report> {
    let n = 3;
    let lambda_c = 0.5 / g.delta;
    let mut z = 0.0;
    let mut se = None;
    for attempt in 0..8 {
        match self_energy_split(&g.h0, &g.gadget_hamiltonian, z, lambda_c) {
            Ok(s) => {
                se = Some(s);
                break;
            }
            Err(QrbmError::Singular(_)) if attempt < 7 => z += 1e-3,
            Err(e) => return Err(e),
        }
    }
    let se = se.unwrap();
    let mut minus = PauliSum::from_real_terms(n, &[(-0.5, ps(n, &[(g.k, Pauli::X)]))])?;
    minus.set_identity_coeff(0.5);
    let proj = |t: &PauliSum| -> Result<CMat> { to_dense(&t.mul(&minus)?) };
    let emb = se.embedded();
    let deviation = hermitian_norm(&(&emb - &proj(target)?))?;
    let mut no_alpha = target.clone();
    no_alpha.add_real(-g.alpha, ps(n, &[(g.i, Pauli::X), (g.j, Pauli::Y)]))?;
    no_alpha.prune();
    let deviation_without_alpha = hermitian_norm(&(&emb - &proj(&no_alpha)?))?;

    let gs = eigh(&g.gadget_hamiltonian)?.ground_state;
    // Target ground state lives on qubits i, j with the ancilla free; pick the
    // lowest eigenvector of the target restricted to ancilla |−⟩.
    let restricted = sum_combine(target, &PauliSum::from_real_terms(n, &[(1e3, ps(n, &[(g.k, Pauli::X)]))])?, 1.0, 1.0)?;
    let dressed = eigh(&restricted)?.ground_state;
    Ok(Theorem3Report {
        delta: g.delta,
        z,
        deviation,
        deviation_without_alpha,
        ground_overlap: gs.fidelity(&dressed)?,
    })
}

/// Every term is an identity, a single `σˣ`/`σʸ`, or a same-letter `σˣσˣ`/`σʸσʸ` pair.
pub fn theorem3_term_audit(h: &PauliSum) -> bool {
    h.terms().all(|(p, _)| {
        let ops: Vec<Pauli> = p.support_qubits().iter().map(|&q| p.get(q)).collect();
        match ops.as_slice() {
            [a] => *a != Pauli::Z,
            [a, b] => a == b && *a != Pauli::Z,
            _ => false,
        }
    })
}

// ---------------------------------------------------------------------------
// Ground-state parameter map

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum HiddenMode {
    /// One hidden node coupled to every visible node with the same `W`.
    #[default]
    SingleHidden,
    /// One hidden node per visible node, `W_ii` only.
    DiagonalHidden,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UniversalityPlan {
    #[serde(skip)]
    pub h_simplified: PauliSum,
    /// `H − (E₀ + δ_shift) I`.
    #[serde(skip)]
    pub h_shifted: PauliSum,
    pub epsilon: f64,
    pub e0: f64,
    pub gap: f64,
    pub delta_shift: f64,
    /// Shifted spectrum `Ẽ_j`.
    pub shifted_energies: Vec<f64>,
    pub lambda_star: f64,
    pub tau: f64,
    pub w: f64,
    pub hidden_mode: HiddenMode,
    pub theta_star: QrbmParams,
    /// `|⟨+^N|ψ₀⟩|²`.
    pub k_overlap: f64,
    pub predicted_fidelity: f64,
}

/// Only `σᵗ_i` and `σᵗ_s σᵗ_k` terms (same letter on both factors).
pub fn is_simplified_form(h: &PauliSum) -> bool {
    h.terms().all(|(p, _)| {
        let q = p.support_qubits();
        match q.as_slice() {
            [_] => true,
            [a, b] => p.get(*a) == p.get(*b),
            _ => false,
        }
    })
}

fn plus_weights(eig: &HermitianEigen, n: usize) -> Result<Vec<f64>> {
    let plus = StateVector::plus(n)?;
    Ok(eig.coefficients(plus.amplitudes()).iter().map(|c| c.norm_sqr()).collect())
}

/// Closed-form `F(τ) = K² e^{−2(Ẽ₀−λ*)τ} / Σ_j |a_j|² e^{−2(Ẽ_j−λ*)τ}` with
/// `a_j = ⟨ψ_j|+^N⟩`.
pub fn predicted_fidelity(shifted: &[f64], weights: &[f64], lambda_star: f64, tau: f64) -> f64 {
    let e0 = shifted[0] - lambda_star;
    let terms: Vec<f64> = shifted
        .iter()
        .zip(weights)
        .map(|(e, w)| (w.ln() - 2.0 * (e - lambda_star - e0) * tau).exp())
        .collect();
    let total: f64 = terms.iter().sum();
    if total == 0.0 {
        0.0
    } else {
        terms[0] / total
    }
}

pub fn theorem4_params(
    h: &PauliSum,
    epsilon: f64,
    hidden_mode: HiddenMode,
    lambda_star: Option<f64>,
) -> Result<UniversalityPlan> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(QrbmError::Input("ε must lie in (0, 1)".into()));
    }
    if !is_simplified_form(h) {
        return Err(QrbmError::Input(
            "Hamiltonian must contain only σᵗ_i and same-letter σᵗσᵗ terms".into(),
        ));
    }
    let n = h.n_qubits();
    let spec = eigh(h)?;
    if spec.degeneracy_flag {
        return Err(QrbmError::Contract(format!(
            "degenerate ground space (gap {:e}); the parameter map needs a unique ground state",
            spec.gap
        )));
    }
    let e0 = spec.eigenvalues[0];
    let gap = spec.gap;
    let delta_shift = gap / 2.0;
    let shifted: Vec<f64> = spec.eigenvalues.iter().map(|e| e - (e0 + delta_shift)).collect();
    let mut lambda_star = lambda_star.unwrap_or((shifted[0] + shifted[1]) / 2.0);
    if lambda_star < 0.0 && lambda_star > -1e-12 * gap.max(1.0) {
        lambda_star = 0.0;
    }
    if !(shifted[0] < lambda_star && lambda_star <= shifted[1]) {
        return Err(QrbmError::Input(format!(
            "λ* = {lambda_star} must satisfy Ẽ₀ = {} < λ* ≤ Ẽ₁ = {}",
            shifted[0], shifted[1]
        )));
    }
    let margin = shifted[1..].iter().map(|e| e - lambda_star).fold(f64::INFINITY, f64::min);
    if margin <= 0.0 {
        return Err(QrbmError::Contract("λ* leaves no margin below the excited spectrum".into()));
    }
    let tau = ((1.0 / epsilon).ln() + n as f64) / margin;
    let x = (lambda_star * tau / n as f64).exp();
    if x < 1.0 {
        return Err(QrbmError::Input(format!("λ* = {lambda_star} < 0 gives no real hidden coupling")));
    }
    let w = (x + (x * x - 1.0).sqrt()).ln();

    let (m, base) = match hidden_mode {
        HiddenMode::SingleHidden => (1, BaseState::PlusProduct),
        HiddenMode::DiagonalHidden => (n, BaseState::PlusProduct),
    };
    let mut theta = QrbmParams::zeros(n, m, base)?;
    for i in 0..n {
        match hidden_mode {
            HiddenMode::SingleHidden => theta.set_w(i, 0, w),
            HiddenMode::DiagonalHidden => theta.set_w(i, i, w),
        }
    }
    for (c, p) in h.real_terms()? {
        let q = p.support_qubits();
        let t = match p.get(q[0]) {
            Pauli::X => 0,
            Pauli::Y => 1,
            Pauli::Z => 2,
            Pauli::I => unreachable!(),
        };
        match q.as_slice() {
            [i] => theta.b[*i][t] = -tau * c,
            [s, k] => {
                let idx = theta.pair_index(*s, *k);
                theta.k[idx][t] = -tau * c;
            }
            _ => unreachable!(),
        }
    }
    theta.validate()?;

    let mut h_shifted = h.clone();
    h_shifted.set_identity_coeff(h.identity_coeff() - (e0 + delta_shift));
    let weights = plus_weights(&spec.eigen, n)?;
    let k_overlap = weights[0];
    let predicted = predicted_fidelity(&shifted, &weights, lambda_star, tau);
    Ok(UniversalityPlan {
        h_simplified: h.clone(),
        h_shifted,
        epsilon,
        e0,
        gap,
        delta_shift,
        shifted_energies: shifted,
        lambda_star,
        tau,
        w,
        hidden_mode,
        theta_star: theta,
        k_overlap,
        predicted_fidelity: predicted,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UniversalityReport {
    pub predicted_fidelity: f64,
    /// Fidelity of `e^{−τ(H̃−λ*)}|+⟩^N` (normalized) with the ground state.
    pub direct_fidelity: f64,
    /// Fidelity of the trial state at `θ*` with the ground state.
    pub trial_fidelity: f64,
    /// `|direct − trial|`.
    pub path_discrepancy: f64,
}

/// Normalized `e^{−τ(H̃ − λ*)}|+^N⟩`.
pub fn direct_state(plan: &UniversalityPlan, tau: f64) -> Result<StateVector> {
    let n = plan.h_simplified.n_qubits();
    let eig = HermitianEigen::from_sum(&plan.h_shifted)?;
    let v = eig.apply_exp(-tau, StateVector::plus(n)?.amplitudes())?;
    StateVector::from_amplitudes(n, v)?.normalized()
}

pub fn universality_check(plan: &UniversalityPlan) -> Result<UniversalityReport> {
    let n = plan.h_simplified.n_qubits();
    if n > DENSE_MAX_QUBITS {
        return Err(QrbmError::Capacity {
            what: "universality check qubits",
            limit: DENSE_MAX_QUBITS,
            got: n,
        });
    }
    if plan.k_overlap < 1e-24 {
        return Err(QrbmError::Contract(
            "|+⟩^N has no overlap with the ground state; imaginary-time convergence is impossible".into(),
        ));
    }
    let ground = eigh(&plan.h_simplified)?.ground_state;
    let direct_fidelity = direct_state(plan, plan.tau)?.fidelity(&ground)?;
    let trial_fidelity = trial_state_exact(&plan.theta_star)?.fidelity(&ground)?;
    Ok(UniversalityReport {
        predicted_fidelity: plan.predicted_fidelity,
        direct_fidelity,
        trial_fidelity,
        path_discrepancy: (direct_fidelity - trial_fidelity).abs(),
    })
}
