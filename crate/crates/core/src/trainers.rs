//! SPSA ground-state search and McLachlan imaginary-time training.

use std::time::Instant;

use faer::{Mat, Side};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ansatz::{trial_state, trial_state_qite, BaseState, BellFactors, QrbmParams, PARAM_BOUND};
use crate::error::{QrbmError, Result};
use crate::exactdiag::gibbs_purification;
use crate::pauli::PauliSum;
use crate::qite::QiteOptions;
use crate::statevec::StateVector;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpsaSchedule {
    pub a: f64,
    pub c: f64,
    /// `None` means `0.1 · max_iters`.
    pub a_stability: Option<f64>,
    pub alpha: f64,
    pub gamma: f64,
    pub max_iters: usize,
    pub seed: u64,
    pub record_wall_clock: bool,
}

impl Default for SpsaSchedule {
    fn default() -> Self {
        SpsaSchedule {
            a: 0.3,
            c: 0.1,
            a_stability: None,
            alpha: 0.602,
            gamma: 0.101,
            max_iters: 1000,
            seed: 0,
            record_wall_clock: false,
        }
    }
}

impl SpsaSchedule {
    pub fn validate(&self) -> Result<()> {
        let pos = |x: f64| x > 0.0 && x.is_finite();
        if !pos(self.a) || !pos(self.c) {
            return Err(QrbmError::Input("SPSA gains a and c must be positive".into()));
        }
        if !(self.alpha > 0.0 && self.alpha <= 1.0 && self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(QrbmError::Input("SPSA exponents must lie in (0, 1]".into()));
        }
        if let Some(s) = self.a_stability {
            if !(s >= 0.0 && s.is_finite()) {
                return Err(QrbmError::Input("a_stability must be finite and ≥ 0".into()));
            }
        }
        Ok(())
    }

    pub fn a_k(&self, k: usize) -> f64 {
        let big_a = self.a_stability.unwrap_or(0.1 * self.max_iters as f64);
        self.a / (k as f64 + 1.0 + big_a).powf(self.alpha)
    }

    pub fn c_k(&self, k: usize) -> f64 {
        self.c / (k as f64 + 1.0).powf(self.gamma)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ItePath {
    pub dtau: f64,
    pub tau_max: f64,
    /// Ridge weight relative to the largest diagonal entry of `A`.
    pub regularization: f64,
    pub fd_step: f64,
    pub record_wall_clock: bool,
}

impl Default for ItePath {
    fn default() -> Self {
        ItePath {
            dtau: 0.01,
            tau_max: 0.5,
            regularization: 1e-6,
            fd_step: 1e-4,
            record_wall_clock: false,
        }
    }
}

impl ItePath {
    pub fn validate(&self) -> Result<()> {
        if !(self.dtau > 0.0 && self.dtau.is_finite()) {
            return Err(QrbmError::Input("dtau must be positive".into()));
        }
        if !(self.tau_max >= self.dtau && self.tau_max.is_finite()) {
            return Err(QrbmError::Input("tau_max must be finite and ≥ dtau".into()));
        }
        if !(self.regularization >= 0.0 && self.regularization.is_finite()) {
            return Err(QrbmError::Input("regularization must be finite and ≥ 0".into()));
        }
        if !(1e-6..=1e-2).contains(&self.fd_step) {
            return Err(QrbmError::Input("fd_step must lie in [1e-6, 1e-2]".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub iter: usize,
    pub theta: Vec<f64>,
    pub objective: f64,
    /// SPSA gradient-estimate norm, or the McLachlan residual.
    pub residual: f64,
    pub cond_a: Option<f64>,
    pub elapsed_ms: Option<f64>,
    pub flag: Option<String>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RunTrace {
    pub records: Vec<TraceRecord>,
}

impl RunTrace {
    fn push(&mut self, rec: TraceRecord) {
        debug_assert!(self.records.last().map_or(true, |r| r.iter < rec.iter));
        self.records.push(rec);
    }
}

fn elapsed(start: &Option<Instant>) -> Option<f64> {
    start.map(|s| s.elapsed().as_secs_f64() * 1e3)
}

/// SPSA over a flat vector confined to `[-bound, bound]^d`. Returns the best
/// evaluated point, its value and the trace (objective column = best so far).
pub fn spsa_minimize_flat<F>(f: F, x0: &[f64], bound: f64, sched: &SpsaSchedule) -> Result<(Vec<f64>, f64, RunTrace)>
where
    F: Fn(&[f64]) -> Result<f64> + Sync,
{
    sched.validate()?;
    let clock = sched.record_wall_clock.then(Instant::now);
    let clamp = |v: &mut [f64]| v.iter_mut().for_each(|x| *x = x.clamp(-bound, bound));
    let mut rng = ChaCha8Rng::seed_from_u64(sched.seed);
    let mut x = x0.to_vec();
    clamp(&mut x);
    let d = x.len();
    let mut fx = f(&x)?;
    let (mut best_x, mut best_f) = (x.clone(), if fx.is_finite() { fx } else { f64::INFINITY });
    let mut gain_scale = 1.0;
    let mut trace = RunTrace::default();
    trace.push(TraceRecord {
        iter: 0,
        theta: best_x.clone(),
        objective: best_f,
        residual: 0.0,
        cond_a: None,
        elapsed_ms: elapsed(&clock),
        flag: None,
    });
    for k in 0..sched.max_iters {
        let ak = gain_scale * sched.a_k(k);
        let ck = sched.c_k(k);
        let delta: Vec<f64> = (0..d).map(|_| if rng.gen::<bool>() { 1.0 } else { -1.0 }).collect();
        let mut xp: Vec<f64> = x.iter().zip(&delta).map(|(a, s)| a + ck * s).collect();
        let mut xm: Vec<f64> = x.iter().zip(&delta).map(|(a, s)| a - ck * s).collect();
        clamp(&mut xp);
        clamp(&mut xm);
        let (fp, fm) = rayon::join(|| f(&xp), || f(&xm));
        let (fp, fm) = (fp?, fm?);
        let mut flag = None;
        let mut gnorm = 0.0;
        for (cand, fc) in [(&xp, fp), (&xm, fm)] {
            if fc.is_finite() && fc < best_f {
                best_f = fc;
                best_x = cand.clone();
            }
        }
        if fp.is_finite() && fm.is_finite() {
            let g0 = (fp - fm) / (2.0 * ck);
            gnorm = g0.abs() * (d as f64).sqrt();
            let mut next: Vec<f64> = x.iter().zip(&delta).map(|(a, s)| a - ak * g0 * s).collect();
            clamp(&mut next);
            let fn_ = f(&next)?;
            if fn_.is_finite() {
                x = next;
                fx = fn_;
                if fx < best_f {
                    best_f = fx;
                    best_x = x.clone();
                }
            } else {
                gain_scale *= 0.5;
                flag = Some("non_finite_iterate".to_string());
            }
        } else {
            gain_scale *= 0.5;
            flag = Some("non_finite_objective".to_string());
        }
        trace.push(TraceRecord {
            iter: k + 1,
            theta: best_x.clone(),
            objective: best_f,
            residual: gnorm,
            cond_a: None,
            elapsed_ms: elapsed(&clock),
            flag,
        });
    }
    let _ = fx;
    Ok((best_x, best_f, trace))
}

/// SPSA over all parameters of `theta0`.
pub fn spsa_minimize<F>(objective: F, theta0: &QrbmParams, sched: &SpsaSchedule) -> Result<(QrbmParams, RunTrace)>
where
    F: Fn(&QrbmParams) -> Result<f64> + Sync,
{
    theta0.validate()?;
    let f = |x: &[f64]| objective(&theta0.with_flat(x)?);
    let (best, _, trace) = spsa_minimize_flat(f, &theta0.to_flat(), PARAM_BOUND, sched)?;
    Ok((theta0.with_flat(&best)?, trace))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ObjectiveMode {
    #[default]
    ExactTrial,
    QiteTrial,
}

/// `θ ↦ ⟨Ψ_v(θ)|H|Ψ_v(θ)⟩`; a vanishing post-selection probability maps to `+∞`.
pub fn ground_state_energy_objective(
    h: &PauliSum,
    mode: ObjectiveMode,
    opts: &QiteOptions,
) -> impl Fn(&QrbmParams) -> Result<f64> + Sync {
    let h = h.clone();
    let opts = opts.clone();
    move |p: &QrbmParams| {
        if h.n_qubits() != p.n_visible {
            return Err(QrbmError::Dimension {
                expected: p.n_visible,
                got: h.n_qubits(),
            });
        }
        let psi = match mode {
            ObjectiveMode::ExactTrial => trial_state(p),
            ObjectiveMode::QiteTrial => trial_state_qite(p, &opts),
        };
        match psi {
            Ok(psi) => psi.expectation(&h),
            Err(QrbmError::PostselectImpossible(_)) => Ok(f64::INFINITY),
            Err(e) => Err(e),
        }
    }
}

/// McLachlan quantities at one point of the path.
#[derive(Clone, Debug)]
pub struct TangentSystem {
    pub active: Vec<usize>,
    /// `A_mn = Re⟨∂_m Ψ|∂_n Ψ⟩` over the active parameters.
    pub a: Mat<f64>,
    /// `C_n = -Re⟨∂_n Ψ|H|Ψ⟩`.
    pub c: Vec<f64>,
    pub energy: f64,
    pub variance: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VarIteReport {
    /// `‖(∂_τ + H − E)Ψ‖` for the chosen `θ̇`.
    pub residual: f64,
    /// Ratio of extreme eigenvalues of the unregularized `A`.
    pub cond_a: f64,
    pub energy: f64,
    pub theta_dot: Vec<f64>,
}

/// Evaluates `state_fn` at `θ ± h e_m` for every active `m` and assembles `A`, `C`.
pub fn tangent_system<S>(p: &QrbmParams, h_full: &PauliSum, fd_step: f64, active: &[usize], state_fn: S) -> Result<TangentSystem>
where
    S: Fn(&QrbmParams) -> Result<StateVector> + Sync,
{
    let psi = state_fn(p)?;
    if h_full.n_qubits() != psi.n_qubits() {
        return Err(QrbmError::Dimension {
            expected: psi.n_qubits(),
            got: h_full.n_qubits(),
        });
    }
    let hpsi = psi.apply_sum(h_full)?;
    let energy = psi.inner(&hpsi)?.re;
    let h2 = hpsi.norm_sqr();
    let variance = (h2 - energy * energy).max(0.0);
    let flat = p.to_flat();
    let k = active.len();
    let dim = psi.dim();
    let mut t = Mat::<Complex64>::zeros(dim, k);
    const BATCH: usize = 8;
    for (bi, chunk) in active.chunks(BATCH).enumerate() {
        let cols: Vec<Result<Vec<Complex64>>> = chunk
            .par_iter()
            .map(|&m| {
                let mut xp = flat.clone();
                let mut xm = flat.clone();
                xp[m] += fd_step;
                xm[m] -= fd_step;
                let sp = state_fn(&p.with_flat(&xp)?)?;
                let sm = state_fn(&p.with_flat(&xm)?)?;
                let v: Vec<Complex64> = sp
                    .amplitudes()
                    .iter()
                    .zip(sm.amplitudes())
                    .map(|(a, b)| (a - b) / (2.0 * fd_step))
                    .collect();
                if v.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
                    return Err(QrbmError::NonFinite("tangent state"));
                }
                Ok(v)
            })
            .collect();
        for (j, col) in cols.into_iter().enumerate() {
            let col = col?;
            let c = bi * BATCH + j;
            for (r, z) in col.into_iter().enumerate() {
                t[(r, c)] = z;
            }
        }
    }
    let g = t.adjoint() * &t;
    let a = Mat::from_fn(k, k, |i, j| 0.5 * (g[(i, j)].re + g[(j, i)].re));
    let hv = Mat::from_fn(dim, 1, |r, _| hpsi.amplitudes()[r]);
    let th = t.adjoint() * &hv;
    let c = (0..k).map(|i| -th[(i, 0)].re).collect();
    Ok(TangentSystem {
        active: active.to_vec(),
        a,
        c,
        energy,
        variance,
    })
}

/// Solves `(A + λI) θ̇ = C` with `λ = reg · max_diag(A)`; returns `θ̇` and `cond(A)`.
pub fn solve_mclachlan(sys: &TangentSystem, reg: f64) -> Result<(Vec<f64>, f64)> {
    let k = sys.c.len();
    if k == 0 {
        return Ok((vec![], 1.0));
    }
    let maxd = (0..k).map(|i| sys.a[(i, i)]).fold(0.0, f64::max);
    let lam = reg * maxd;
    let evd = sys
        .a
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| QrbmError::Numerical(format!("eigensolver: {e:?}")))?;
    let vals = evd.S().column_vector();
    let u = evd.U();
    let top = (0..k).map(|i| vals[i].abs()).fold(0.0, f64::max);
    let low = (0..k).map(|i| vals[i].abs()).fold(f64::INFINITY, f64::min);
    let cond = if low > 0.0 { top / low } else { f64::INFINITY };
    let mut x = vec![0.0; k];
    for j in 0..k {
        let mu = vals[j].max(0.0) + lam;
        if mu <= 0.0 {
            continue;
        }
        let proj: f64 = (0..k).map(|r| u[(r, j)] * sys.c[r]).sum();
        for r in 0..k {
            x[r] += u[(r, j)] * proj / mu;
        }
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(QrbmError::NonFinite("imaginary-time velocity"));
    }
    Ok((x, cond))
}

fn mclachlan_residual(sys: &TangentSystem, x: &[f64]) -> f64 {
    let k = x.len();
    let mut q = 0.0;
    for i in 0..k {
        for j in 0..k {
            q += x[i] * sys.a[(i, j)] * x[j];
        }
    }
    let lin: f64 = x.iter().zip(&sys.c).map(|(a, b)| a * b).sum();
    (q - 2.0 * lin + sys.variance).max(0.0).sqrt()
}

/// One step along the imaginary-time flow restricted to `active` parameters.
pub fn var_ite_step_with<S>(
    p: &QrbmParams,
    h_full: &PauliSum,
    path: &ItePath,
    active: &[usize],
    state_fn: S,
) -> Result<(QrbmParams, VarIteReport)>
where
    S: Fn(&QrbmParams) -> Result<StateVector> + Sync,
{
    path.validate()?;
    let sys = tangent_system(p, h_full, path.fd_step, active, state_fn)?;
    let (x, cond_a) = solve_mclachlan(&sys, path.regularization)?;
    let residual = mclachlan_residual(&sys, &x);
    let mut flat = p.to_flat();
    for (&m, v) in active.iter().zip(&x) {
        flat[m] += v * path.dtau;
    }
    Ok((
        p.with_flat(&flat)?,
        VarIteReport {
            residual,
            cond_a,
            energy: sys.energy,
            theta_dot: x,
        },
    ))
}

/// `H` given on the first `h.n_qubits()` visible nodes, identity elsewhere.
fn embed_on_visible(h: &PauliSum, n_visible: usize) -> Result<PauliSum> {
    if h.n_qubits() > n_visible {
        return Err(QrbmError::Dimension {
            expected: n_visible,
            got: h.n_qubits(),
        });
    }
    h.embed(n_visible, 0)
}

/// One step of `θ ← θ + A⁻¹C δτ` over every parameter, with the general trial state.
pub fn var_ite_step(p: &QrbmParams, h: &PauliSum, path: &ItePath) -> Result<(QrbmParams, VarIteReport)> {
    let hf = embed_on_visible(h, p.n_visible)?;
    let active: Vec<usize> = (0..p.n_params()).collect();
    var_ite_step_with(p, &hf, path, &active, trial_state)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GibbsOutcome {
    pub params: QrbmParams,
    pub trace: RunTrace,
    pub fidelity: f64,
}

/// Trains a bell-pair trial state towards `(e^{-βH/2} ⊗ I)|Φ⟩` over imaginary time
/// `β/2`. Couplings between the two registers stay at zero so the factorized
/// state path applies; `path.tau_max` is ignored.
pub fn gibbs_train(h: &PauliSum, beta: f64, theta0: &QrbmParams, path: &ItePath) -> Result<GibbsOutcome> {
    path.validate()?;
    theta0.validate()?;
    if !(beta >= 0.0 && beta.is_finite()) {
        return Err(QrbmError::Input(format!("inverse temperature {beta} must be finite and ≥ 0")));
    }
    if theta0.base != BaseState::BellPairs {
        return Err(QrbmError::Input("Gibbs training needs a bell_pairs base".into()));
    }
    let n = theta0.n_visible / 2;
    if h.n_qubits() != n {
        return Err(QrbmError::Dimension {
            expected: n,
            got: h.n_qubits(),
        });
    }
    if !BellFactors::applicable(theta0) {
        return Err(QrbmError::Input("initial cross-register couplings must be zero".into()));
    }
    let hf = h.embed(theta0.n_visible, 0)?;
    let frozen = theta0.cross_register_indices();
    let active: Vec<usize> = (0..theta0.n_params()).filter(|i| !frozen.contains(i)).collect();
    let clock = path.record_wall_clock.then(Instant::now);
    let tau_total = beta / 2.0;
    let n_steps = (tau_total / path.dtau - 1e-9).ceil().max(0.0) as usize;

    let fidelity_at = |p: &QrbmParams, f: &BellFactors, tau: f64| -> Result<f64> {
        let _ = p;
        let target = gibbs_purification(h, 2.0 * tau)?;
        f.state()?.fidelity(&target)
    };

    let mut p = theta0.clone();
    let mut factors = BellFactors::new(&p)?;
    let mut trace = RunTrace::default();
    let f0 = fidelity_at(&p, &factors, 0.0)?;
    trace.push(TraceRecord {
        iter: 0,
        theta: p.to_flat(),
        objective: f0,
        residual: 0.0,
        cond_a: None,
        elapsed_ms: elapsed(&clock),
        flag: None,
    });
    let mut tau = 0.0;
    for s in 0..n_steps {
        let dt = path.dtau.min(tau_total - tau);
        let step_path = ItePath { dtau: dt, ..path.clone() };
        let base = (&p, &factors);
        let state_fn = |q: &QrbmParams| BellFactors::with_reuse(q, Some(base))?.state();
        let (next, rep) = var_ite_step_with(&p, &hf, &step_path, &active, state_fn)?;
        let next_factors = BellFactors::with_reuse(&next, Some((&p, &factors)))?;
        p = next;
        factors = next_factors;
        tau += dt;
        let fid = fidelity_at(&p, &factors, tau)?;
        trace.push(TraceRecord {
            iter: s + 1,
            theta: p.to_flat(),
            objective: fid,
            residual: rep.residual,
            cond_a: Some(rep.cond_a),
            elapsed_ms: elapsed(&clock),
            flag: None,
        });
    }
    let fidelity = trace.records.last().map(|r| r.objective).unwrap_or(f0);
    Ok(GibbsOutcome {
        params: p,
        trace,
        fidelity,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ansatz::trial_state_exact;
    use crate::exactdiag::eigh;
    use crate::hamiltonians::{haldane_chain, HaldaneSpec};
    use rand::Rng;

    fn sum(terms: &[(f64, &str)]) -> PauliSum {
        PauliSum::from_text_terms(terms).unwrap()
    }

    #[test]
    fn gain_schedule_defaults() {
        let s = SpsaSchedule {
            max_iters: 100,
            ..Default::default()
        };
        assert!((s.a_k(0) - s.a / 11f64.powf(0.602)).abs() < 1e-15);
        assert!((s.c_k(3) - s.c / 4f64.powf(0.101)).abs() < 1e-15);
        assert!(SpsaSchedule { alpha: 1.5, ..s.clone() }.validate().is_err());
        assert!(SpsaSchedule { c: 0.0, ..s }.validate().is_err());
    }

    #[test]
    fn spsa_convex_bowl() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let x0: Vec<f64> = (0..6).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let sched = SpsaSchedule {
            a: 0.5,
            c: 0.05,
            max_iters: 2000,
            seed: 3,
            ..Default::default()
        };
        let f = |x: &[f64]| Ok(x.iter().map(|v| v * v).sum::<f64>());
        let (_, best, trace) = spsa_minimize_flat(f, &x0, 10.0, &sched).unwrap();
        assert!(best <= 1e-3, "{best}");
        assert!(trace.records.windows(2).all(|w| w[1].objective <= w[0].objective));
        assert!(trace.records.windows(2).all(|w| w[1].iter > w[0].iter));
    }

    #[test]
    fn spsa_survives_non_finite_regions() {
        let f = |x: &[f64]| Ok(if x[0] > 0.5 { f64::NAN } else { (x[0] + 1.0).powi(2) + x[1] * x[1] });
        let sched = SpsaSchedule {
            a: 2.0,
            max_iters: 300,
            ..Default::default()
        };
        let (x, best, trace) = spsa_minimize_flat(f, &[0.45, 0.3], 10.0, &sched).unwrap();
        assert!(best.is_finite() && x[0] <= 0.5);
        assert!(trace.records.iter().any(|r| r.flag.is_some()));
    }

    #[test]
    fn spsa_single_qubit_z() {
        let h = sum(&[(1.0, "Z")]);
        let obj = ground_state_energy_objective(&h, ObjectiveMode::ExactTrial, &QiteOptions::default());
        let p0 = QrbmParams::zeros(1, 0, BaseState::PlusProduct).unwrap();
        let (p, _) = spsa_minimize(obj, &p0, &SpsaSchedule::default()).unwrap();
        let e = trial_state(&p).unwrap().expectation(&h).unwrap();
        assert!(e <= -1.0 + 1e-3, "{e}");
    }

    #[test]
    fn objective_at_zero_for_transverse_field() {
        let h = sum(&[(-1.0, "XII"), (-1.0, "IXI"), (-1.0, "IIX")]);
        let obj = ground_state_energy_objective(&h, ObjectiveMode::ExactTrial, &QiteOptions::default());
        let p = QrbmParams::zeros(3, 2, BaseState::PlusProduct).unwrap();
        assert!((obj(&p).unwrap() + 3.0).abs() < 1e-12);
        let wrong = QrbmParams::zeros(2, 0, BaseState::PlusProduct).unwrap();
        assert!(obj(&wrong).is_err());
    }

    #[test]
    fn exact_and_qite_objectives_agree() {
        let h = sum(&[(0.7, "ZX"), (-0.4, "YI"), (0.3, "XX")]);
        // Domain spans the 3-qubit register; support-only domains miss the
        // correlations built up by the hidden coupling.
        let opts = QiteOptions {
            n_steps: 100,
            domain_size: Some(3),
            ..Default::default()
        };
        let exact = ground_state_energy_objective(&h, ObjectiveMode::ExactTrial, &opts);
        let qite = ground_state_energy_objective(&h, ObjectiveMode::QiteTrial, &opts);
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..3 {
            let p = QrbmParams::zeros(2, 1, BaseState::PlusProduct).unwrap();
            let flat: Vec<f64> = (0..p.n_params()).map(|_| rng.gen_range(-0.2..0.2)).collect();
            let p = p.with_flat(&flat).unwrap();
            let (a, b) = (exact(&p).unwrap(), qite(&p).unwrap());
            assert!((a - b).abs() <= 1e-3, "{a} {b}");
        }
    }

    #[test]
    fn stationary_at_eigenstate() {
        let h = sum(&[(-1.0, "XI"), (-1.0, "IX")]);
        let p = QrbmParams::zeros(2, 0, BaseState::PlusProduct).unwrap();
        let (q, rep) = var_ite_step(&p, &h, &ItePath::default()).unwrap();
        assert!(rep.theta_dot.iter().all(|v| v.abs() < 1e-8));
        for (a, b) in q.to_flat().iter().zip(p.to_flat()) {
            assert!((a - b).abs() < 1e-10);
        }
        assert!(rep.residual < 1e-6);
    }

    #[test]
    fn one_parameter_tangent_matches_closed_form() {
        let h = sum(&[(1.0, "Z")]);
        let theta = 0.37f64;
        let mut p = QrbmParams::zeros(1, 0, BaseState::PlusProduct).unwrap();
        p.b[0][2] = theta;
        let sys = tangent_system(&p, &h, 1e-4, &[2], trial_state).unwrap();
        let s = (2.0 * (2.0 * theta).cosh()).sqrt();
        let sh = (2.0 * theta).sinh();
        let (e0, e1) = (theta.exp(), (-theta).exp());
        let psi = [e0 / s, e1 / s];
        let d = [e0 / s - 2.0 * e0 * sh / s.powi(3), -e1 / s - 2.0 * e1 * sh / s.powi(3)];
        let a = d[0] * d[0] + d[1] * d[1];
        let c = -(d[0] * psi[0] - d[1] * psi[1]);
        assert!((sys.a[(0, 0)] - a).abs() < 1e-5, "{} {a}", sys.a[(0, 0)]);
        assert!((sys.c[0] - c).abs() < 1e-5, "{} {c}", sys.c[0]);
    }

    #[test]
    fn central_and_one_sided_tangents_are_consistent() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let p = QrbmParams::zeros(2, 1, BaseState::PlusProduct).unwrap();
        let flat: Vec<f64> = (0..p.n_params()).map(|_| rng.gen_range(-0.5..0.5)).collect();
        let p = p.with_flat(&flat).unwrap();
        let m = 4;
        let psi = trial_state_exact(&p).unwrap();
        let central = |h: f64| {
            let mut a = flat.clone();
            let mut b = flat.clone();
            a[m] += h;
            b[m] -= h;
            let sa = trial_state_exact(&p.with_flat(&a).unwrap()).unwrap();
            let sb = trial_state_exact(&p.with_flat(&b).unwrap()).unwrap();
            sa.amplitudes().iter().zip(sb.amplitudes()).map(|(x, y)| (x - y) / (2.0 * h)).collect::<Vec<_>>()
        };
        let forward = |h: f64| {
            let mut a = flat.clone();
            a[m] += h;
            let sa = trial_state_exact(&p.with_flat(&a).unwrap()).unwrap();
            sa.amplitudes().iter().zip(psi.amplitudes()).map(|(x, y)| (x - y) / h).collect::<Vec<_>>()
        };
        let dist = |u: &[Complex64], v: &[Complex64]| u.iter().zip(v).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt();
        let c = central(1e-4);
        let e1 = dist(&forward(1e-3), &c);
        let e2 = dist(&forward(5e-4), &c);
        assert!(e1 > 0.0 && (e1 / e2 - 2.0).abs() < 0.2, "{e1} {e2}");
    }

    #[test]
    fn energy_non_increasing_along_flow() {
        let labels = ["XII", "IYI", "IIZ", "ZZI", "IXX", "YIY", "XZI"];
        for seed in 0..3u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
            let terms: Vec<(f64, &str)> = labels.iter().map(|l| (rng.gen_range(-1.0..1.0), *l)).collect();
            let h = sum(&terms);
            let mut p = QrbmParams::zeros(3, 1, BaseState::PlusProduct).unwrap();
            let path = ItePath::default();
            let mut prev = f64::INFINITY;
            for _ in 0..10 {
                let (q, rep) = var_ite_step(&p, &h, &path).unwrap();
                assert!(rep.energy <= prev + 1e-9, "seed {seed}: {} > {prev}", rep.energy);
                prev = rep.energy;
                p = q;
            }
        }
    }

    #[test]
    fn step_is_first_order_in_dtau() {
        let h = sum(&[(0.8, "XZ"), (-0.5, "ZI"), (0.3, "YY")]);
        let mut p = QrbmParams::zeros(2, 0, BaseState::PlusProduct).unwrap();
        p.b[0][0] = 0.2;
        let rate = |dt: f64| {
            let path = ItePath {
                dtau: dt,
                ..Default::default()
            };
            let (q, _) = var_ite_step(&p, &h, &path).unwrap();
            let d: f64 = q.to_flat().iter().zip(p.to_flat()).map(|(a, b)| (a - b).powi(2)).sum();
            d.sqrt() / dt
        };
        let (r1, r2) = (rate(0.01), rate(0.005));
        assert!(r1.is_finite() && (r1 - r2).abs() <= 1e-9 * r1.max(1.0));
    }

    #[test]
    fn gibbs_beta_zero_is_exact() {
        let h = haldane_chain(&HaldaneSpec {
            n: 3,
            j: 1.0,
            h1: 0.48,
            h2: 0.0,
        })
        .unwrap();
        let p0 = QrbmParams::zeros(6, 0, BaseState::BellPairs).unwrap();
        let out = gibbs_train(&h, 0.0, &p0, &ItePath::default()).unwrap();
        assert_eq!(out.params, p0);
        assert!((out.fidelity - 1.0).abs() < 1e-12);
    }

    #[test]
    fn gibbs_improves_over_start_and_is_deterministic() {
        let h = sum(&[(0.9, "ZZ"), (-0.6, "XI"), (0.4, "IX")]);
        let p0 = QrbmParams::zeros(4, 0, BaseState::BellPairs).unwrap();
        let path = ItePath {
            dtau: 0.05,
            ..Default::default()
        };
        let a = gibbs_train(&h, 1.0, &p0, &path).unwrap();
        let b = gibbs_train(&h, 1.0, &p0, &path).unwrap();
        assert_eq!(a, b);
        let start = trial_state(&p0).unwrap().fidelity(&gibbs_purification(&h, 1.0).unwrap()).unwrap();
        assert!(a.fidelity > start);
        // 2-local target with 1- and 2-local generators: representable, so close to exact.
        assert!(a.fidelity > 0.999, "{}", a.fidelity);
        for i in p0.cross_register_indices() {
            assert_eq!(a.params.to_flat()[i], 0.0);
        }
    }

    #[test]
    fn trained_ground_energy_is_bounded_below() {
        let h = sum(&[(0.5, "ZZ"), (-1.0, "XI"), (0.2, "IY")]);
        let e0 = eigh(&h).unwrap().eigenvalues[0];
        let obj = ground_state_energy_objective(&h, ObjectiveMode::ExactTrial, &QiteOptions::default());
        let p0 = QrbmParams::zeros(2, 0, BaseState::PlusProduct).unwrap();
        let sched = SpsaSchedule {
            max_iters: 200,
            ..Default::default()
        };
        let (_, trace) = spsa_minimize(obj, &p0, &sched).unwrap();
        assert!(trace.records.iter().all(|r| r.objective >= e0 - 1e-9));
    }
}
