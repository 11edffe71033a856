//! Declarative experiment runner: a TOML config in, JSON and CSV artifacts out.
//!
//! ```toml
//! kind = "ground_state"
//! seed = 3
//! output_dir = "out/h2"
//!
//! [hamiltonian]
//! file = "../data/h2.txt"
//!
//! [spsa]
//! max_iters = 2000
//! ```
//!
//! Every run directory holds `manifest.json`, `trace.csv`, `result.json` and
//! `plotdata/*.csv`. Relative paths in a config file resolve against the
//! directory of that file.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::ansatz::{trial_state, trial_state_exact, BaseState, QrbmParams};
use crate::error::{QrbmError, Result};
use crate::exactdiag::{eigh, exp_apply, gibbs_state, DENSE_MAX_QUBITS};
use crate::gadgets::{
    direct_state, is_simplified_form, predicted_fidelity, theorem2_build, theorem2_verify, theorem3_build,
    theorem3_target, theorem3_verify, theorem4_params, universality_check, HiddenMode, Theorem2Input,
};
use crate::hamiltonians::{format_pauli_sum, haldane_chain, load_pauli_sum, parse_pauli_sum, random_simplified, HaldaneSpec};
use crate::pauli::{Pauli, PauliString, PauliSum};
use crate::qite::{qite_evolve, QiteOptions};
use crate::statevec::{StateVector, MAX_QUBITS};
use crate::trainers::{
    ground_state_energy_objective, gibbs_train, spsa_minimize, ItePath, ObjectiveMode, RunTrace, SpsaSchedule,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    GroundState,
    Gibbs,
    Universality,
    GadgetVerify,
    Spectrum,
    QiteBench,
}

/// Exactly one source must be given.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HamiltonianSource {
    pub file: Option<PathBuf>,
    pub haldane: Option<HaldaneSpec>,
    /// Lines in the Pauli-sum text format, e.g. `"0.5 XZ"`.
    pub terms: Option<Vec<String>>,
    /// Qubit count of a random simplified-form instance drawn from the run seed.
    pub random_simplified: Option<usize>,
}

impl HamiltonianSource {
    fn count(&self) -> usize {
        [
            self.file.is_some(),
            self.haldane.is_some(),
            self.terms.is_some(),
            self.random_simplified.is_some(),
        ]
        .iter()
        .filter(|b| **b)
        .count()
    }

    pub fn is_empty(&self) -> bool {
        self.count() == 0
    }

    pub fn resolve(&self, seed: u64) -> Result<PauliSum> {
        match self.count() {
            0 => return Err(QrbmError::Config("hamiltonian: no source given".into())),
            1 => {}
            _ => {
                return Err(QrbmError::Config(
                    "hamiltonian: give exactly one of file, haldane, terms, random_simplified".into(),
                ))
            }
        }
        if let Some(f) = &self.file {
            if !f.exists() {
                return Err(QrbmError::Config(format!("hamiltonian file {} does not exist", f.display())));
            }
            return load_pauli_sum(f);
        }
        if let Some(h) = &self.haldane {
            return haldane_chain(h);
        }
        if let Some(lines) = &self.terms {
            return parse_pauli_sum(&lines.join("\n"));
        }
        let n = self.random_simplified.unwrap_or(0);
        random_simplified(n, &mut ChaCha8Rng::seed_from_u64(seed))
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnsatzConfig {
    /// Defaults: 1 for ground_state, 0 for gibbs.
    pub n_hidden: Option<usize>,
    /// Uniform initial parameters in `[-s, s)`; default 0.1 for ground_state.
    /// Gibbs runs always start from zero (the infinite-temperature purification).
    pub init_scale: Option<f64>,
    pub base: Option<BaseState>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GibbsConfig {
    pub beta: f64,
    /// Simulated measurement shots on the trained state; `None` skips sampling.
    pub shots: Option<u64>,
    /// Basis states of the system register compared against the exact Gibbs weights.
    pub n_sampled: usize,
}

impl Default for GibbsConfig {
    fn default() -> Self {
        GibbsConfig {
            beta: 1.0,
            shots: None,
            n_sampled: 16,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct UniversalityConfig {
    pub epsilon: f64,
    pub hidden_mode: HiddenMode,
    pub lambda_star: Option<f64>,
    /// Points of the `[0, τ]` grid written to plot data.
    pub tau_grid: usize,
}

impl Default for UniversalityConfig {
    fn default() -> Self {
        UniversalityConfig {
            epsilon: 1e-2,
            hidden_mode: HiddenMode::SingleHidden,
            lambda_star: None,
            tau_grid: 5,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GadgetConfig {
    /// 2 (3-body to 2-body) or 3 (σˣσʸ cross term).
    pub theorem: u8,
    pub delta: f64,
    pub alpha: f64,
    pub e: f64,
    pub i: usize,
    pub j: usize,
    /// Theorem 2: triple `B_r = b_identity·I + b_z·Z_r` on system qubit `r`;
    /// the hamiltonian section, when present, supplies the 2-local part.
    pub b_identity: f64,
    pub b_z: f64,
    pub grid_points: usize,
}

impl Default for GadgetConfig {
    fn default() -> Self {
        GadgetConfig {
            theorem: 3,
            delta: 0.1,
            alpha: 0.5,
            e: 1.0,
            i: 0,
            j: 1,
            b_identity: 0.5,
            b_z: 0.2,
            grid_points: 9,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QiteBenchConfig {
    pub tau: f64,
    pub steps: Vec<usize>,
}

impl Default for QiteBenchConfig {
    fn default() -> Self {
        QiteBenchConfig {
            tau: 0.5,
            steps: vec![50, 100, 200],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    /// Overrides `spsa.seed` and `engine.rng_seed`; also seeds initial parameters.
    #[serde(default)]
    pub seed: u64,
    pub output_dir: PathBuf,
    /// Concurrent points in a sweep.
    #[serde(default = "one")]
    pub workers: usize,
    #[serde(default)]
    pub hamiltonian: HamiltonianSource,
    #[serde(default)]
    pub ansatz: AnsatzConfig,
    #[serde(default)]
    pub objective: ObjectiveMode,
    #[serde(default)]
    pub spsa: SpsaSchedule,
    #[serde(default)]
    pub ite: ItePath,
    #[serde(default)]
    pub engine: QiteOptions,
    #[serde(default)]
    pub gibbs: GibbsConfig,
    #[serde(default)]
    pub universality: UniversalityConfig,
    #[serde(default)]
    pub gadget: GadgetConfig,
    #[serde(default)]
    pub qite_bench: QiteBenchConfig,
}

fn one() -> usize {
    1
}

fn cfg_err(e: impl std::fmt::Display) -> QrbmError {
    QrbmError::Config(e.to_string())
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(cfg_err)
    }

    /// Reads a config file and resolves relative paths against its directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| QrbmError::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg = Self::from_toml_str(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.rebase(base);
        Ok(cfg)
    }

    pub fn rebase(&mut self, base: &Path) {
        if self.output_dir.is_relative() {
            self.output_dir = base.join(&self.output_dir);
        }
        if let Some(f) = &self.hamiltonian.file {
            if f.is_relative() {
                self.hamiltonian.file = Some(base.join(f));
            }
        }
    }

    /// Copy with the top-level seed pushed into the nested schedules.
    pub fn resolved(&self) -> Self {
        let mut c = self.clone();
        c.spsa.seed = self.seed;
        c.engine.rng_seed = self.seed;
        c
    }

    fn needs_hamiltonian(&self) -> bool {
        !(self.kind == ExperimentKind::GadgetVerify && self.gadget.theorem == 3)
    }

    /// Full validation, including loading the Hamiltonian. Returns it when the kind uses one.
    pub fn validate(&self) -> Result<Option<PauliSum>> {
        if self.workers == 0 {
            return Err(QrbmError::Config("workers must be at least 1".into()));
        }
        self.spsa.validate()?;
        self.ite.validate()?;
        self.engine.validate()?;
        let h = if self.needs_hamiltonian() || !self.hamiltonian.is_empty() {
            Some(self.hamiltonian.resolve(self.seed)?)
        } else {
            None
        };
        let n = h.as_ref().map_or(0, |h| h.n_qubits());
        let dense_cap = |what: &'static str, got: usize| -> Result<()> {
            if got > DENSE_MAX_QUBITS {
                return Err(QrbmError::Capacity {
                    what,
                    limit: DENSE_MAX_QUBITS,
                    got,
                });
            }
            Ok(())
        };
        if let Some(h) = &h {
            if !h.is_hermitian() {
                return Err(QrbmError::Config("hamiltonian has complex coefficients".into()));
            }
        }
        match self.kind {
            ExperimentKind::GroundState => {
                dense_cap("ground-state qubits", n)?;
                let total = n + self.ansatz.n_hidden.unwrap_or(1);
                if total > MAX_QUBITS {
                    return Err(QrbmError::Capacity {
                        what: "visible plus hidden qubits",
                        limit: MAX_QUBITS,
                        got: total,
                    });
                }
                if let Some(s) = self.ansatz.init_scale {
                    if !(s >= 0.0 && s.is_finite()) {
                        return Err(QrbmError::Config("ansatz.init_scale must be finite and ≥ 0".into()));
                    }
                }
            }
            ExperimentKind::Gibbs => {
                dense_cap("gibbs system qubits", n)?;
                let total = 2 * n + self.ansatz.n_hidden.unwrap_or(0);
                if total > MAX_QUBITS {
                    return Err(QrbmError::Capacity {
                        what: "purified register plus hidden qubits",
                        limit: MAX_QUBITS,
                        got: total,
                    });
                }
                if self.ansatz.base.is_some_and(|b| b != BaseState::BellPairs) {
                    return Err(QrbmError::Config("gibbs runs need ansatz.base = \"bell_pairs\"".into()));
                }
                if self.ansatz.init_scale.is_some_and(|s| s != 0.0) {
                    return Err(QrbmError::Config("gibbs runs start from zero parameters".into()));
                }
                if !(self.gibbs.beta >= 0.0 && self.gibbs.beta.is_finite()) {
                    return Err(QrbmError::Config("gibbs.beta must be finite and ≥ 0".into()));
                }
                if self.gibbs.shots == Some(0) || self.gibbs.n_sampled == 0 {
                    return Err(QrbmError::Config("gibbs.shots and gibbs.n_sampled must be positive".into()));
                }
            }
            ExperimentKind::Universality => {
                dense_cap("universality qubits", n)?;
                let h = h.as_ref().expect("hamiltonian resolved above");
                if !is_simplified_form(h) {
                    return Err(QrbmError::Config(
                        "universality needs only σᵗ_i and same-letter σᵗσᵗ terms".into(),
                    ));
                }
                let u = &self.universality;
                if !(u.epsilon > 0.0 && u.epsilon < 1.0) {
                    return Err(QrbmError::Config("universality.epsilon must lie in (0, 1)".into()));
                }
                if u.tau_grid < 2 {
                    return Err(QrbmError::Config("universality.tau_grid must be at least 2".into()));
                }
            }
            ExperimentKind::GadgetVerify => {
                let g = &self.gadget;
                if !(g.delta > 0.0 && g.delta.is_finite()) {
                    return Err(QrbmError::Config("gadget.delta must be positive".into()));
                }
                match g.theorem {
                    2 => {
                        let n_sys = if n == 0 { 3 } else { n };
                        dense_cap("gadget register qubits", n_sys + 3)?;
                        if g.grid_points == 0 {
                            return Err(QrbmError::Config("gadget.grid_points must be positive".into()));
                        }
                    }
                    3 => {}
                    t => return Err(QrbmError::Config(format!("gadget.theorem must be 2 or 3, got {t}"))),
                }
            }
            ExperimentKind::Spectrum => dense_cap("spectrum qubits", n)?,
            ExperimentKind::QiteBench => {
                dense_cap("qite benchmark qubits", n)?;
                let q = &self.qite_bench;
                if q.steps.is_empty() || q.steps.contains(&0) {
                    return Err(QrbmError::Config("qite_bench.steps must be a non-empty list of positive counts".into()));
                }
                if !(q.tau >= 0.0 && q.tau.is_finite()) {
                    return Err(QrbmError::Config("qite_bench.tau must be finite and ≥ 0".into()));
                }
            }
        }
        Ok(h)
    }
}

/// Named CSV written under `plotdata/`.
#[derive(Clone, Debug, PartialEq)]
pub struct PlotSeries {
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl PlotSeries {
    fn new(name: &str, header: &[&str]) -> Self {
        PlotSeries {
            name: name.into(),
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    fn push(&mut self, row: Vec<String>) {
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut s = self.header.join(",");
        s.push('\n');
        for r in &self.rows {
            s.push_str(&r.join(","));
            s.push('\n');
        }
        s
    }
}

fn num(x: f64) -> String {
    format!("{x:?}")
}

struct KindOutput {
    metrics: BTreeMap<String, f64>,
    details: Value,
    trace: RunTrace,
    plots: Vec<PlotSeries>,
}

/// What `run` leaves behind.
#[derive(Clone, Debug, PartialEq)]
pub struct RunOutcome {
    pub dir: PathBuf,
    pub ok: bool,
    pub exit_code: i32,
    pub metrics: BTreeMap<String, f64>,
    pub error: Option<String>,
}

pub fn theta_hash(theta: &[f64]) -> String {
    let mut h = Sha256::new();
    for v in theta {
        h.update(v.to_le_bytes());
    }
    let d = h.finalize();
    let mut s = String::with_capacity(16);
    for b in &d[..8] {
        write!(s, "{b:02x}").unwrap();
    }
    s
}

pub fn trace_csv(trace: &RunTrace) -> String {
    let mut s = String::from("iter,objective,residual,cond_A,elapsed_ms,theta_hash\n");
    for r in &trace.records {
        let opt = |x: Option<f64>| x.map(num).unwrap_or_default();
        writeln!(
            s,
            "{},{},{},{},{},{}",
            r.iter,
            num(r.objective),
            num(r.residual),
            opt(r.cond_a),
            opt(r.elapsed_ms),
            theta_hash(&r.theta)
        )
        .unwrap();
    }
    s
}

fn write_json(path: &Path, v: &Value) -> Result<()> {
    let mut text = serde_json::to_string_pretty(v).map_err(|e| QrbmError::Numerical(e.to_string()))?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

fn manifest(cfg: &ExperimentConfig, h: Option<&PauliSum>) -> Result<Value> {
    let ham = match h {
        Some(h) => Value::String(format_pauli_sum(h)?),
        None => Value::Null,
    };
    Ok(json!({
        "config": cfg,
        "hamiltonian_text": ham,
        "seed": cfg.seed,
        "versions": {
            "qrbm-core": env!("CARGO_PKG_VERSION"),
            "format": 1,
        },
    }))
}

/// Validates, executes and writes artifacts. Validation failures return `Err`
/// before anything is written; failures during the run are recorded in
/// `result.json` and reported through `RunOutcome`.
pub fn run(cfg: &ExperimentConfig) -> Result<RunOutcome> {
    let cfg = cfg.resolved();
    let h = cfg.validate()?;
    let dir = cfg.output_dir.clone();
    std::fs::create_dir_all(dir.join("plotdata"))?;
    write_json(&dir.join("manifest.json"), &manifest(&cfg, h.as_ref())?)?;
    let kind = serde_json::to_value(cfg.kind).unwrap_or(Value::Null);
    match execute(&cfg, h.as_ref()) {
        Ok(out) => {
            std::fs::write(dir.join("trace.csv"), trace_csv(&out.trace))?;
            for p in &out.plots {
                std::fs::write(dir.join("plotdata").join(format!("{}.csv", p.name)), p.to_csv())?;
            }
            write_json(
                &dir.join("result.json"),
                &json!({
                    "status": "ok",
                    "kind": kind,
                    "metrics": out.metrics,
                    "details": out.details,
                }),
            )?;
            Ok(RunOutcome {
                dir,
                ok: true,
                exit_code: 0,
                metrics: out.metrics,
                error: None,
            })
        }
        Err(e) => {
            let code = e.exit_code();
            write_json(
                &dir.join("result.json"),
                &json!({
                    "status": "failed",
                    "kind": kind,
                    "error": e.to_string(),
                    "exit_code": code,
                }),
            )?;
            Ok(RunOutcome {
                dir,
                ok: false,
                exit_code: code,
                metrics: BTreeMap::new(),
                error: Some(e.to_string()),
            })
        }
    }
}

fn execute(cfg: &ExperimentConfig, h: Option<&PauliSum>) -> Result<KindOutput> {
    let need = || h.ok_or_else(|| QrbmError::Config("hamiltonian required".into()));
    match cfg.kind {
        ExperimentKind::GroundState => run_ground_state(cfg, need()?),
        ExperimentKind::Gibbs => run_gibbs(cfg, need()?),
        ExperimentKind::Universality => run_universality(cfg, need()?),
        ExperimentKind::GadgetVerify => run_gadget(cfg, h),
        ExperimentKind::Spectrum => run_spectrum(need()?),
        ExperimentKind::QiteBench => run_qite_bench(cfg, need()?),
    }
}

fn initial_params(n_visible: usize, n_hidden: usize, base: BaseState, scale: f64, seed: u64) -> Result<QrbmParams> {
    let p = QrbmParams::zeros(n_visible, n_hidden, base)?;
    if scale == 0.0 {
        return Ok(p);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let flat: Vec<f64> = (0..p.n_params()).map(|_| rng.gen_range(-scale..scale)).collect();
    p.with_flat(&flat)
}

fn run_ground_state(cfg: &ExperimentConfig, h: &PauliSum) -> Result<KindOutput> {
    let n = h.n_qubits();
    let p0 = initial_params(
        n,
        cfg.ansatz.n_hidden.unwrap_or(1),
        cfg.ansatz.base.unwrap_or_default(),
        cfg.ansatz.init_scale.unwrap_or(0.1),
        cfg.seed,
    )?;
    let obj = ground_state_energy_objective(h, cfg.objective, &cfg.engine);
    let (p, trace) = spsa_minimize(&obj, &p0, &cfg.spsa)?;
    let energy = obj(&p)?;
    let energy_exact_trial = trial_state_exact(&p)?.expectation(h)?;
    let e0 = eigh(h)?.eigenvalues[0];
    let mut conv = PlotSeries::new("convergence", &["iter", "objective", "error"]);
    for r in &trace.records {
        conv.push(vec![r.iter.to_string(), num(r.objective), num(r.objective - e0)]);
    }
    let metrics = BTreeMap::from([
        ("energy".to_string(), energy),
        ("energy_exact_trial".to_string(), energy_exact_trial),
        ("exact_ground_energy".to_string(), e0),
        ("error".to_string(), energy - e0),
        ("iterations".to_string(), trace.records.len().saturating_sub(1) as f64),
    ]);
    Ok(KindOutput {
        metrics,
        details: json!({ "params": p }),
        trace,
        plots: vec![conv],
    })
}

fn run_gibbs(cfg: &ExperimentConfig, h: &PauliSum) -> Result<KindOutput> {
    let n = h.n_qubits();
    let g = &cfg.gibbs;
    let p0 = QrbmParams::zeros(2 * n, cfg.ansatz.n_hidden.unwrap_or(0), BaseState::BellPairs)?;
    let out = gibbs_train(h, g.beta, &p0, &cfg.ite)?;
    let tau_total = g.beta / 2.0;
    let mut fid = PlotSeries::new("fidelity", &["tau", "fidelity"]);
    for r in &out.trace.records {
        let tau = (r.iter as f64 * cfg.ite.dtau).min(tau_total);
        fid.push(vec![num(tau), num(r.objective)]);
    }
    let mut metrics = BTreeMap::from([("fidelity".to_string(), out.fidelity), ("beta".to_string(), g.beta)]);
    let mut plots = vec![fid];
    let mut details = json!({ "params": out.params });

    if let Some(shots) = g.shots {
        let rho = gibbs_state(h, g.beta)?;
        let exact: Vec<f64> = (0..1usize << n).map(|a| rho[(a, a)].re).collect();
        let psi = trial_state(&out.params)?;
        let mask = (1u64 << n) - 1;
        let mut trained = vec![0.0; 1 << n];
        for (idx, p) in psi.probabilities().iter().enumerate() {
            trained[(idx as u64 & mask) as usize] += p;
        }
        let mut sampled = vec![0.0; 1 << n];
        for (idx, c) in psi.sample_counts(shots, cfg.seed)? {
            sampled[(idx & mask) as usize] += c as f64 / shots as f64;
        }
        let mut order: Vec<usize> = (0..1 << n).collect();
        order.sort_by(|&a, &b| exact[b].total_cmp(&exact[a]).then(a.cmp(&b)));
        order.truncate(g.n_sampled.min(1 << n));
        let mut table = PlotSeries::new(
            "sampled_probabilities",
            &["basis", "exact", "trained", "sampled", "sampled_error"],
        );
        let (mut max_s, mut max_t) = (0.0f64, 0.0f64);
        for &a in &order {
            let es = (sampled[a] - exact[a]).abs();
            max_s = max_s.max(es);
            max_t = max_t.max((trained[a] - exact[a]).abs());
            table.push(vec![
                crate::statevec::basis_label(n, a as u64),
                num(exact[a]),
                num(trained[a]),
                num(sampled[a]),
                num(es),
            ]);
        }
        metrics.insert("max_sampled_error".into(), max_s);
        metrics.insert("max_trained_error".into(), max_t);
        details["sampled_basis"] = json!(order
            .iter()
            .map(|&a| crate::statevec::basis_label(n, a as u64))
            .collect::<Vec<_>>());
        plots.push(table);
    }
    Ok(KindOutput {
        metrics,
        details,
        trace: out.trace,
        plots,
    })
}

fn run_universality(cfg: &ExperimentConfig, h: &PauliSum) -> Result<KindOutput> {
    let u = &cfg.universality;
    let plan = theorem4_params(h, u.epsilon, u.hidden_mode, u.lambda_star)?;
    let rep = universality_check(&plan)?;
    let weights: Vec<f64> = {
        let eig = crate::exactdiag::HermitianEigen::from_sum(&plan.h_shifted)?;
        eig.coefficients(StateVector::plus(h.n_qubits())?.amplitudes())
            .iter()
            .map(|c| c.norm_sqr())
            .collect()
    };
    let ground = eigh(h)?.ground_state;
    let mut series = PlotSeries::new("fidelity_vs_tau", &["tau", "direct", "predicted"]);
    let mut prev = f64::NEG_INFINITY;
    let mut monotone = true;
    for k in 0..u.tau_grid {
        let tau = plan.tau * k as f64 / (u.tau_grid - 1) as f64;
        let f = direct_state(&plan, tau)?.fidelity(&ground)?;
        if f < prev - 1e-12 {
            monotone = false;
        }
        prev = f;
        series.push(vec![
            num(tau),
            num(f),
            num(predicted_fidelity(&plan.shifted_energies, &weights, plan.lambda_star, tau)),
        ]);
    }
    let metrics = BTreeMap::from([
        ("direct_fidelity".to_string(), rep.direct_fidelity),
        ("trial_fidelity".to_string(), rep.trial_fidelity),
        ("predicted_fidelity".to_string(), rep.predicted_fidelity),
        ("path_discrepancy".to_string(), rep.path_discrepancy),
        ("tau".to_string(), plan.tau),
        ("w".to_string(), plan.w),
        ("k_overlap".to_string(), plan.k_overlap),
        ("monotone".to_string(), if monotone { 1.0 } else { 0.0 }),
    ]);
    Ok(KindOutput {
        metrics,
        details: json!({ "plan": plan }),
        trace: RunTrace::default(),
        plots: vec![series],
    })
}

fn run_gadget(cfg: &ExperimentConfig, h: Option<&PauliSum>) -> Result<KindOutput> {
    let g = &cfg.gadget;
    if g.theorem == 3 {
        let gad = theorem3_build(g.i, g.j, g.alpha, g.delta, g.e)?;
        let target = theorem3_target(&gad)?;
        let rep = theorem3_verify(&gad, &target)?;
        let mut s = PlotSeries::new("deviation", &["delta", "deviation", "deviation_without_alpha"]);
        s.push(vec![num(g.delta), num(rep.deviation), num(rep.deviation_without_alpha)]);
        let metrics = BTreeMap::from([
            ("delta".to_string(), g.delta),
            ("deviation".to_string(), rep.deviation),
            ("deviation_without_alpha".to_string(), rep.deviation_without_alpha),
            ("ground_overlap".to_string(), rep.ground_overlap),
        ]);
        return Ok(KindOutput {
            metrics,
            details: json!({ "gadget": gad, "report": rep }),
            trace: RunTrace::default(),
            plots: vec![s],
        });
    }
    let y = h.cloned().unwrap_or_else(|| PauliSum::zero(3));
    let n = y.n_qubits();
    let triple: [PauliSum; 3] = std::array::from_fn(|r| {
        let mut b = PauliSum::zero(n);
        b.set_identity_coeff(g.b_identity);
        b.add_real(g.b_z, PauliString::single(n, r % n, Pauli::Z))
            .expect("qubit index inside register");
        b
    });
    let build = theorem2_build(&Theorem2Input {
        y,
        b_triples: vec![triple],
        delta: g.delta,
    })?;
    let rep = theorem2_verify(&build, g.grid_points)?;
    let mut s = PlotSeries::new("deviation_grid", &["z", "deviation"]);
    for (z, d) in &rep.grid {
        s.push(vec![num(*z), num(*d)]);
    }
    let metrics = BTreeMap::from([
        ("delta".to_string(), g.delta),
        ("deviation".to_string(), rep.deviation_at_zero),
        ("max_deviation".to_string(), rep.max_deviation),
        ("ground_overlap".to_string(), rep.ground_overlap),
    ]);
    Ok(KindOutput {
        metrics,
        details: json!({ "report": rep, "lambda_c": build.lambda_c }),
        trace: RunTrace::default(),
        plots: vec![s],
    })
}

/// Spectrum summary shared by `run` and the `spectrum` subcommand.
pub fn spectrum_summary(h: &PauliSum) -> Result<Value> {
    let spec = eigh(h)?;
    Ok(json!({
        "n_qubits": h.n_qubits(),
        "ground_energy": spec.eigenvalues[0],
        "gap": spec.gap,
        "degenerate": spec.degeneracy_flag,
        "norm": spec.norm,
        "eigenvalues": spec.eigenvalues,
    }))
}

fn run_spectrum(h: &PauliSum) -> Result<KindOutput> {
    let summary = spectrum_summary(h)?;
    let spec = eigh(h)?;
    let mut s = PlotSeries::new("spectrum", &["index", "energy"]);
    for (k, e) in spec.eigenvalues.iter().enumerate() {
        s.push(vec![k.to_string(), num(*e)]);
    }
    let metrics = BTreeMap::from([
        ("ground_energy".to_string(), spec.eigenvalues[0]),
        ("gap".to_string(), spec.gap),
        ("degenerate".to_string(), if spec.degeneracy_flag { 1.0 } else { 0.0 }),
    ]);
    Ok(KindOutput {
        metrics,
        details: summary,
        trace: RunTrace::default(),
        plots: vec![s],
    })
}

/// Infidelity of QITE against the normalized `e^{−τH}|+⟩` for each step count,
/// with the log-log slope between consecutive counts.
fn run_qite_bench(cfg: &ExperimentConfig, h: &PauliSum) -> Result<KindOutput> {
    let q = &cfg.qite_bench;
    let n = h.n_qubits();
    let psi0 = StateVector::plus(n)?;
    let exact = exp_apply(h, -q.tau, &psi0)?;
    let gen = h.scaled(-1.0);
    let mut rows = Vec::new();
    for &steps in &q.steps {
        let opts = QiteOptions {
            n_steps: steps,
            final_fidelity: false,
            ..cfg.engine.clone()
        };
        let (psi, _) = qite_evolve(&psi0, &gen, q.tau, &opts)?;
        rows.push((steps, 1.0 - psi.fidelity(&exact)?));
    }
    let mut s = PlotSeries::new("infidelity", &["n_steps", "infidelity", "local_exponent"]);
    let mut trace = RunTrace::default();
    for (k, &(steps, inf)) in rows.iter().enumerate() {
        let slope = if k == 0 {
            String::new()
        } else {
            let (s0, i0) = rows[k - 1];
            num((i0 / inf).ln() / (steps as f64 / s0 as f64).ln())
        };
        s.push(vec![steps.to_string(), num(inf), slope]);
        trace.records.push(crate::trainers::TraceRecord {
            iter: k,
            theta: Vec::new(),
            objective: inf,
            residual: 0.0,
            cond_a: None,
            elapsed_ms: None,
            flag: None,
        });
    }
    let (first, last) = (rows[0], rows[rows.len() - 1]);
    let exponent = if rows.len() > 1 {
        (first.1 / last.1).ln() / (last.0 as f64 / first.0 as f64).ln()
    } else {
        f64::NAN
    };
    let metrics = BTreeMap::from([
        ("exponent".to_string(), exponent),
        ("infidelity_first".to_string(), first.1),
        ("infidelity_last".to_string(), last.1),
    ]);
    Ok(KindOutput {
        metrics,
        details: json!({ "tau": q.tau, "steps": q.steps }),
        trace,
        plots: vec![s],
    })
}

// ---------------------------------------------------------------------------
// Sweeps

#[derive(Clone, Debug, PartialEq)]
pub struct SweepPoint {
    pub value: String,
    pub outcome: std::result::Result<RunOutcome, String>,
    /// Existing successful result reused instead of rerunning.
    pub resumed: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepSummary {
    pub dir: PathBuf,
    pub points: Vec<SweepPoint>,
}

impl SweepSummary {
    pub fn all_ok(&self) -> bool {
        self.points.iter().all(|p| matches!(&p.outcome, Ok(o) if o.ok))
    }
}

fn parse_value(text: &str) -> toml::Value {
    let t = text.trim();
    match format!("v = {t}").parse::<toml::Table>() {
        Ok(mut tab) => tab.remove("v").unwrap_or_else(|| toml::Value::String(t.into())),
        Err(_) => toml::Value::String(t.into()),
    }
}

/// Copy of `cfg` with the dotted `param` set to `value`; missing tables are created.
pub fn with_param(cfg: &ExperimentConfig, param: &str, value: &str) -> Result<ExperimentConfig> {
    let mut root = toml::Value::try_from(cfg).map_err(cfg_err)?;
    let keys: Vec<&str> = param.split('.').collect();
    if keys.iter().any(|k| k.is_empty()) {
        return Err(QrbmError::Config(format!("bad parameter path '{param}'")));
    }
    let mut cur = &mut root;
    for k in &keys[..keys.len() - 1] {
        let tab = cur
            .as_table_mut()
            .ok_or_else(|| QrbmError::Config(format!("'{param}': '{k}' is not inside a table")))?;
        cur = tab
            .entry(k.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
    }
    let last = keys[keys.len() - 1];
    cur.as_table_mut()
        .ok_or_else(|| QrbmError::Config(format!("'{param}': parent is not a table")))?
        .insert(last.to_string(), parse_value(value));
    let out: ExperimentConfig = root.try_into().map_err(cfg_err)?;
    Ok(out)
}

fn point_dir_name(param: &str, value: &str) -> String {
    let clean: String = value
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '.' || c == '-' { c } else { '_' })
        .collect();
    format!("{param}={clean}")
}

fn existing_ok(dir: &Path) -> Option<BTreeMap<String, f64>> {
    let text = std::fs::read_to_string(dir.join("result.json")).ok()?;
    let v: Value = serde_json::from_str(&text).ok()?;
    if v.get("status")?.as_str()? != "ok" {
        return None;
    }
    let m = v.get("metrics")?.as_object()?;
    Some(m.iter().map(|(k, x)| (k.clone(), x.as_f64().unwrap_or(f64::NAN))).collect())
}

/// One run directory per value under `cfg.output_dir`, plus `summary.csv`.
/// Points whose directory already holds a successful `result.json` are reused.
pub fn sweep(cfg: &ExperimentConfig, param: &str, values: &[String]) -> Result<SweepSummary> {
    if values.is_empty() {
        return Err(QrbmError::Config("sweep needs at least one value".into()));
    }
    let mut configs = Vec::with_capacity(values.len());
    for v in values {
        let mut c = with_param(cfg, param, v)?;
        c.output_dir = cfg.output_dir.join(point_dir_name(param, v));
        c.validate()?;
        configs.push(c);
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| QrbmError::Numerical(e.to_string()))?;
    let points: Vec<SweepPoint> = pool.install(|| {
        configs
            .par_iter()
            .zip(values.par_iter())
            .map(|(c, v)| {
                if let Some(metrics) = existing_ok(&c.output_dir) {
                    return SweepPoint {
                        value: v.clone(),
                        outcome: Ok(RunOutcome {
                            dir: c.output_dir.clone(),
                            ok: true,
                            exit_code: 0,
                            metrics,
                            error: None,
                        }),
                        resumed: true,
                    };
                }
                SweepPoint {
                    value: v.clone(),
                    outcome: run(c).map_err(|e| e.to_string()),
                    resumed: false,
                }
            })
            .collect()
    });
    std::fs::create_dir_all(&cfg.output_dir)?;
    std::fs::write(cfg.output_dir.join("summary.csv"), summary_csv(param, &points))?;
    Ok(SweepSummary {
        dir: cfg.output_dir.clone(),
        points,
    })
}

pub fn summary_csv(param: &str, points: &[SweepPoint]) -> String {
    let mut cols: Vec<String> = points
        .iter()
        .filter_map(|p| p.outcome.as_ref().ok())
        .flat_map(|o| o.metrics.keys().cloned())
        .collect();
    cols.sort();
    cols.dedup();
    let mut s = format!("{param},status,exit_code");
    for c in &cols {
        write!(s, ",{c}").unwrap();
    }
    s.push('\n');
    for p in points {
        let (status, code, metrics) = match &p.outcome {
            Ok(o) if o.ok => ("ok", 0, Some(&o.metrics)),
            Ok(o) => ("failed", o.exit_code, None),
            Err(_) => ("failed", 2, None),
        };
        write!(s, "{},{status},{code}", p.value).unwrap();
        for c in &cols {
            let cell = metrics.and_then(|m| m.get(c)).map(|x| num(*x)).unwrap_or_default();
            write!(s, ",{cell}").unwrap();
        }
        s.push('\n');
    }
    s
}
