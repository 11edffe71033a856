//! Acceptance gate. Prints one line per criterion and exits nonzero if any fails.
//!
//! The 18-qubit Gibbs run is slow and only executes with `--ignored` or
//! `--include-ignored`:
//!
//! ```text
//! cargo test --release -p qrbm-core --test acceptance -- --include-ignored
//! ```

use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use qrbm_core::ansatz::{
    classical_rbm_amplitude, trial_state, trial_state_exact, trial_state_postselected, BaseState,
    ClassicalRbmParams, QrbmParams, RbmConvention,
};
use qrbm_core::exactdiag::{eigh, exp_apply, gibbs_purification, gibbs_state};
use qrbm_core::experiment::{run, ExperimentConfig};
use qrbm_core::gadgets::{
    direct_state, theorem2_build, theorem2_verify, theorem3_build, theorem3_target, theorem3_verify,
    theorem4_params, HiddenMode, Theorem2Input,
};
use qrbm_core::hamiltonians::{haldane_chain, random_simplified, HaldaneSpec};
use qrbm_core::qite::{qite_evolve, QiteOptions};
use qrbm_core::trainers::{gibbs_train, ItePath};
use qrbm_core::{PauliSum, StateVector};

struct Outcome {
    id: &'static str,
    pass: bool,
    detail: String,
    elapsed: Duration,
    limit: Option<Duration>,
}

fn check(id: &'static str, limit: Option<Duration>, f: impl FnOnce() -> (bool, String)) -> Outcome {
    let t = Instant::now();
    let (pass, detail) = f();
    let elapsed = t.elapsed();
    let within = limit.map_or(true, |l| elapsed <= l);
    let o = Outcome {
        id,
        pass: pass && within,
        detail: if within {
            detail
        } else {
            format!("{detail}; runtime over limit")
        },
        elapsed,
        limit,
    };
    let lim = o.limit.map(|l| format!(" (limit {}s)", l.as_secs())).unwrap_or_default();
    println!(
        "criterion {}: {} [{:.1}s{}] {}",
        o.id,
        if o.pass { "PASS" } else { "FAIL" },
        o.elapsed.as_secs_f64(),
        lim,
        o.detail
    );
    o
}

fn mins(m: u64) -> Option<Duration> {
    Some(Duration::from_secs(60 * m))
}

fn sum(terms: &[(f64, &str)]) -> PauliSum {
    PauliSum::from_text_terms(terms).unwrap()
}

fn random_params(rng: &mut ChaCha8Rng, n: usize, m: usize, scale: f64) -> QrbmParams {
    let p = QrbmParams::zeros(n, m, BaseState::PlusProduct).unwrap();
    let flat: Vec<f64> = (0..p.n_params()).map(|_| rng.gen_range(-scale..scale)).collect();
    p.with_flat(&flat).unwrap()
}

fn haldane(n: usize) -> PauliSum {
    haldane_chain(&HaldaneSpec {
        n,
        j: 1.0,
        h1: 0.48,
        h2: 0.0,
    })
    .unwrap()
}

fn tmpdir(tag: &str) -> PathBuf {
    let d = std::env::temp_dir().join(format!("qrbm-acceptance-{tag}-{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&d);
    d
}

fn data_file(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data").join(name)
}

// 1. hidden-sum path vs full-register post-selection.
fn ansatz_consistency() -> (bool, String) {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst = 1.0f64;
    for _ in 0..200 {
        let n = rng.gen_range(1..=6);
        let m = rng.gen_range(0..=(8 - n));
        let p = random_params(&mut rng, n, m, 0.8);
        let a = trial_state_exact(&p).unwrap();
        let (b, _) = trial_state_postselected(&p).unwrap();
        worst = worst.min(a.fidelity(&b).unwrap());
    }
    (worst >= 1.0 - 1e-9, format!("min fidelity {worst:.15} over 200 draws"))
}

// 2. Trotter order of QITE on the 1- and 2-qubit family.
fn qite_order() -> (bool, String) {
    let family: Vec<(PauliSum, usize)> = vec![
        (sum(&[(0.6, "X"), (0.4, "Z")]), 1),
        (sum(&[(0.5, "Y"), (-0.7, "Z"), (0.3, "X")]), 1),
        (sum(&[(0.4, "XI"), (-0.3, "IZ"), (0.25, "ZX"), (0.2, "YY")]), 2),
        (sum(&[(0.5, "ZZ"), (0.3, "XI"), (0.3, "IX")]), 2),
    ];
    let tau = 0.5;
    let mut exps = Vec::new();
    for (h, dom) in &family {
        let n = h.n_qubits();
        let psi0 = StateVector::plus(n).unwrap();
        let exact = exp_apply(h, -tau, &psi0).unwrap();
        let gen = h.scaled(-1.0);
        let inf = |steps: usize| {
            let opts = QiteOptions {
                n_steps: steps,
                domain_size: Some(*dom),
                final_fidelity: false,
                ..Default::default()
            };
            let (psi, _) = qite_evolve(&psi0, &gen, tau, &opts).unwrap();
            1.0 - psi.fidelity(&exact).unwrap()
        };
        let (i50, i200) = (inf(50), inf(200));
        exps.push((i50 / i200).ln() / 4f64.ln());
    }
    let ok = exps.iter().all(|e| (1.6..=2.4).contains(e));
    (ok, format!("exponents {exps:.3?}, required [1.6, 2.4]"))
}

// 3. Direct imaginary-time path of the ground-state parameter map.
fn universality() -> (bool, String) {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (mut worst, mut monotone, mut excluded, mut used) = (1.0f64, true, Vec::new(), 0);
    let mut errors = Vec::new();
    for inst in 0..20 {
        let n = [2, 3, 4][inst % 3];
        let h = random_simplified(n, &mut rng).unwrap();
        let plan = match theorem4_params(&h, 1e-2, HiddenMode::SingleHidden, None) {
            Ok(p) => p,
            Err(e) => {
                errors.push(format!("instance {inst}: {e}"));
                continue;
            }
        };
        if plan.k_overlap < 1e-12 {
            excluded.push(format!("instance {inst}: ⟨+|ψ₀⟩ = 0"));
            continue;
        }
        used += 1;
        let ground = eigh(&h).unwrap().ground_state;
        let f = |tau: f64| direct_state(&plan, tau).unwrap().fidelity(&ground).unwrap();
        worst = worst.min(f(plan.tau));
        let grid: Vec<f64> = (1..=5).map(|k| f(plan.tau * k as f64 / 5.0)).collect();
        if grid.windows(2).any(|w| w[1] < w[0] - 1e-12) {
            monotone = false;
        }
    }
    let ok = errors.is_empty() && worst >= 0.99 && monotone;
    (
        ok,
        format!(
            "{used} instances, min fidelity {worst:.6}, monotone {monotone}, excluded {excluded:?}, errors {errors:?}"
        ),
    )
}

// 4. Gadget orders.
fn theorem3_order() -> (bool, String) {
    let deltas = [0.25, 0.2, 0.15, 0.1];
    let devs: Vec<f64> = deltas
        .iter()
        .map(|&d| {
            let g = theorem3_build(0, 1, 0.5, d, 1.0).unwrap();
            let t = theorem3_target(&g).unwrap();
            theorem3_verify(&g, &t).unwrap().deviation
        })
        .collect();
    let monotone = devs.windows(2).all(|w| w[1] < w[0]);
    let ratio = devs[1] / devs[3];
    (
        monotone && (4.0..=16.0).contains(&ratio),
        format!("deviations {devs:.4?}, ratio δ=0.2/δ=0.1 {ratio:.3}, required monotone and [4, 16]"),
    )
}

fn theorem2_order() -> (bool, String) {
    let dev = |delta: f64| {
        let mut b = [sum(&[(0.2, "ZII")]), sum(&[(0.15, "IZI")]), sum(&[(0.1, "IIZ")])];
        for (x, c) in b.iter_mut().zip([0.5, 0.5, 0.4]) {
            x.set_identity_coeff(c);
        }
        let build = theorem2_build(&Theorem2Input {
            y: sum(&[(0.1, "XII"), (0.05, "ZZI"), (0.08, "IXI")]),
            b_triples: vec![b],
            delta,
        })
        .unwrap();
        theorem2_verify(&build, 1).unwrap().deviation_at_zero
    };
    let (d2, d1) = (dev(0.2), dev(0.1));
    let ratio = d2 / d1;
    (
        (1.5..=3.0).contains(&ratio),
        format!("deviations {d2:.4e} / {d1:.4e}, ratio {ratio:.3}, required [1.5, 3]"),
    )
}

// 5. Gibbs reproduction.
fn gibbs_n4() -> (bool, String) {
    let h = haldane(4);
    let p0 = QrbmParams::zeros(8, 0, BaseState::BellPairs).unwrap();
    let out = gibbs_train(&h, 1.0, &p0, &ItePath::default()).unwrap();
    (
        out.fidelity >= 0.99,
        format!("beta 1, fidelity {:.6}, required ≥ 0.99", out.fidelity),
    )
}

fn gibbs_n9() -> (bool, String) {
    let n = 9;
    let h = haldane(n);
    let beta = 1.0;
    let p0 = QrbmParams::zeros(2 * n, 0, BaseState::BellPairs).unwrap();
    let path = ItePath {
        dtau: 0.05,
        ..Default::default()
    };
    let out = gibbs_train(&h, beta, &p0, &path).unwrap();
    let rho = gibbs_state(&h, beta).unwrap();
    let exact: Vec<f64> = (0..1usize << n).map(|a| rho[(a, a)].re).collect();
    let psi = trial_state(&out.params).unwrap();
    let shots = 100_000u64;
    let mask = (1u64 << n) - 1;
    let mut sampled = vec![0.0; 1 << n];
    for (idx, c) in psi.sample_counts(shots, 9).unwrap() {
        sampled[(idx & mask) as usize] += c as f64 / shots as f64;
    }
    let mut order: Vec<usize> = (0..1 << n).collect();
    order.sort_by(|&a, &b| exact[b].total_cmp(&exact[a]).then(a.cmp(&b)));
    let worst = order[..16]
        .iter()
        .map(|&a| (sampled[a] - exact[a]).abs())
        .fold(0.0, f64::max);
    let target = gibbs_purification(&h, beta).unwrap();
    let fid = psi.fidelity(&target).unwrap();
    (
        worst <= 1e-3,
        format!("fidelity {fid:.6}, max sampled error over 16 bases {worst:.3e}, required ≤ 1e-3"),
    )
}

// 6. SPSA on the shipped H2 file, through the experiment runner.
fn spsa_h2() -> (bool, String) {
    let file = data_file("h2.txt");
    let mut hits = 0;
    let mut errs = Vec::new();
    for seed in 0..5u64 {
        let dir = tmpdir(&format!("h2-{seed}"));
        let cfg = ExperimentConfig::from_toml_str(&format!(
            "kind = \"ground_state\"\nseed = {seed}\noutput_dir = {:?}\n[hamiltonian]\nfile = {:?}\n",
            dir.to_str().unwrap(),
            file.to_str().unwrap()
        ))
        .unwrap();
        let out = run(&cfg).unwrap();
        let err = out.metrics.get("error").copied().unwrap_or(f64::INFINITY);
        if out.ok && err.abs() <= 1.6e-3 {
            hits += 1;
        }
        errs.push(err);
        let _ = std::fs::remove_dir_all(dir);
    }
    (hits >= 4, format!("{hits}/5 seeds within 1.6e-3, errors {errs:?}"))
}

// 7. Closed-form marginal vs brute-force hidden sum.
fn brute_force(p: &ClassicalRbmParams, v: &[u8], conv: RbmConvention) -> f64 {
    let x: Vec<f64> = v
        .iter()
        .map(|&b| if conv.spin_visible { 1.0 - 2.0 * b as f64 } else { b as f64 })
        .collect();
    let sgn = if conv.positive_exponent { 1.0 } else { -1.0 };
    let (n, m) = (p.n_visible, p.n_hidden);
    let mut total = 0.0;
    for hbits in 0..1usize << m {
        let h: Vec<f64> = (0..m).map(|j| if hbits >> j & 1 == 1 { -1.0 } else { 1.0 }).collect();
        let mut e = 0.0;
        for i in 0..n {
            e += p.b[i] * x[i];
        }
        for j in 0..m {
            e += p.m[j] * h[j];
            for i in 0..n {
                e += p.w[i * m + j] * x[i] * h[j];
            }
        }
        let mut idx = 0;
        for s in 0..n {
            for k in s + 1..n {
                e += p.k[idx] * x[s] * x[k];
                idx += 1;
            }
        }
        total += (sgn * e).exp();
    }
    total / (1u64 << m) as f64
}

fn classical_oracle() -> (bool, String) {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst = 0.0f64;
    let conv = RbmConvention::default();
    for n in 1..=6 {
        for m in 0..=6 {
            let mut p = ClassicalRbmParams::zeros(n, m);
            for x in p.b.iter_mut().chain(&mut p.m).chain(&mut p.w).chain(&mut p.k) {
                *x = rng.gen_range(-1.0..1.0);
            }
            for vbits in 0..1usize << n {
                let v: Vec<u8> = (0..n).map(|i| (vbits >> i & 1) as u8).collect();
                let a = classical_rbm_amplitude(&p, &v, conv).unwrap();
                let b = brute_force(&p, &v, conv);
                worst = worst.max((a - b).abs() / b.abs());
            }
        }
    }
    (worst <= 1e-12, format!("max relative error {worst:.3e}, required ≤ 1e-12"))
}

// 9. Byte-identical artifacts on rerun.
fn determinism() -> (bool, String) {
    let h2 = data_file("h2.txt");
    let configs = [
        format!(
            "kind = \"ground_state\"\nseed = 5\n[hamiltonian]\nfile = {:?}\n[spsa]\nmax_iters = 200\n",
            h2.to_str().unwrap()
        ),
        "kind = \"gibbs\"\nseed = 2\n[hamiltonian.haldane]\nn = 3\nj = 1.0\nh1 = 0.48\nh2 = 0.0\n[gibbs]\nbeta = 0.2\nshots = 5000\n[ite]\ndtau = 0.02\n".to_string(),
        "kind = \"qite_bench\"\nseed = 4\n[hamiltonian]\nterms = [\"0.4 XI\", \"0.3 ZZ\"]\n[engine]\nshot_noise = 2000\n[qite_bench]\nsteps = [5, 10]\n".to_string(),
    ];
    let mut diffs = Vec::new();
    for (k, body) in configs.iter().enumerate() {
        let read = |tag: &str| {
            let dir = tmpdir(&format!("det-{k}-{tag}"));
            let cfg = ExperimentConfig::from_toml_str(&format!("output_dir = {:?}\n{body}", dir.to_str().unwrap())).unwrap();
            let out = run(&cfg).unwrap();
            assert!(out.ok, "{:?}", out.error);
            let files: Vec<Vec<u8>> = ["trace.csv", "result.json"]
                .iter()
                .map(|f| std::fs::read(dir.join(f)).unwrap())
                .collect();
            let _ = std::fs::remove_dir_all(&dir);
            files
        };
        let (a, b) = (read("a"), read("b"));
        for (f, (x, y)) in ["trace.csv", "result.json"].iter().zip(a.iter().zip(&b)) {
            if x != y {
                diffs.push(format!("config {k} {f}"));
            }
        }
    }
    (diffs.is_empty(), format!("3 experiment kinds rerun, differing files {diffs:?}"))
}

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let slow = args.iter().any(|a| a == "--ignored" || a == "--include-ignored");
    if args.iter().any(|a| a == "--list") {
        return;
    }
    let mut outcomes = vec![
        check("1 ansatz consistency", mins(1), ansatz_consistency),
        check("2 qite order", mins(1), qite_order),
        check("3 universality", mins(2), universality),
        check("4a theorem 3 gadget order", mins(1), theorem3_order),
        check("4b theorem 2 gadget order", mins(1), theorem2_order),
        check("5a gibbs haldane N=4", mins(5), gibbs_n4),
    ];
    if slow {
        outcomes.push(check("5b gibbs haldane N=9 sampled", mins(60), gibbs_n9));
    } else {
        println!("criterion 5b gibbs haldane N=9 sampled: SKIPPED (slow; pass --include-ignored)");
    }
    outcomes.push(check("6 spsa h2", mins(10), spsa_h2));
    outcomes.push(check("7 classical rbm oracle", mins(1), classical_oracle));
    println!("criterion 8 hardware fidelity: OUT OF SCOPE (device result, not reproduced in simulation)");
    outcomes.push(check("9 determinism", None, determinism));
    let failed: Vec<&str> = outcomes.iter().filter(|o| !o.pass).map(|o| o.id).collect();
    println!(
        "acceptance: {} passed, {} failed {:?}",
        outcomes.len() - failed.len(),
        failed.len(),
        failed
    );
    if !failed.is_empty() {
        std::process::exit(1);
    }
}
