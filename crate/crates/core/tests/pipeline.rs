use nalgebra::DMatrix;
use num_complex::Complex64;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use qrbm_core::exactdiag::eigh;
use qrbm_core::gadgets::is_simplified_form;
use qrbm_core::hamiltonians::{
    format_pauli_sum, haldane_chain, load_pauli_sum, parse_pauli_sum, random_simplified, save_pauli_sum, HaldaneSpec,
};
use qrbm_core::PauliSum;

fn h2_path() -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/h2.txt")
}

/// Dense matrix built entry by entry from single-qubit Kronecker factors.
fn oracle_dense(h: &PauliSum) -> DMatrix<Complex64> {
    let n = h.n_qubits();
    let dim = 1usize << n;
    let i = Complex64::new(0.0, 1.0);
    let one = Complex64::new(1.0, 0.0);
    let zero = Complex64::new(0.0, 0.0);
    let single = |c: char| -> [[Complex64; 2]; 2] {
        match c {
            'I' => [[one, zero], [zero, one]],
            'X' => [[zero, one], [one, zero]],
            'Y' => [[zero, -i], [i, zero]],
            'Z' => [[one, zero], [zero, -one]],
            _ => unreachable!(),
        }
    };
    let mut m = DMatrix::from_element(dim, dim, zero);
    for r in 0..dim {
        m[(r, r)] += Complex64::new(h.identity_coeff(), 0.0);
    }
    for (p, c) in h.terms() {
        let text: Vec<char> = p.to_string().chars().collect();
        for r in 0..dim {
            for col in 0..dim {
                let mut v = *c;
                for (q, ch) in text.iter().enumerate() {
                    v *= single(*ch)[(r >> q) & 1][(col >> q) & 1];
                }
                m[(r, col)] += v;
            }
        }
    }
    m
}

#[test]
fn h2_file_carries_source_header_and_matches_oracle() {
    let text = std::fs::read_to_string(h2_path()).unwrap();
    assert!(text.lines().next().unwrap().starts_with('#'));
    assert!(text.contains("Qiskit Nature"));
    let h = load_pauli_sum(h2_path()).unwrap();
    assert_eq!(h.n_qubits(), 2);
    assert_eq!(h.len(), 4);
    let e0 = eigh(&h).unwrap().eigenvalues[0];
    let ev = oracle_dense(&h).symmetric_eigenvalues();
    let oracle = ev.iter().cloned().fold(f64::INFINITY, f64::min);
    assert!((e0 - oracle).abs() < 1e-12, "{e0} vs {oracle}");
    assert!((e0 + 1.857275030202).abs() < 1e-9);
}

#[test]
fn canonical_h2_text_is_fixed_point() {
    let h = load_pauli_sum(h2_path()).unwrap();
    let canon = format_pauli_sum(&h).unwrap();
    let dir = tempfile_dir("canon");
    let p = dir.join("h2.txt");
    std::fs::write(&p, &canon).unwrap();
    save_pauli_sum(&load_pauli_sum(&p).unwrap(), &p).unwrap();
    assert_eq!(std::fs::read_to_string(&p).unwrap(), canon);
    let _ = std::fs::remove_dir_all(dir);
}

fn tempfile_dir(tag: &str) -> std::path::PathBuf {
    let d = std::env::temp_dir().join(format!("qrbm-pipeline-{tag}-{}", std::process::id()));
    std::fs::create_dir_all(&d).unwrap();
    d
}

#[test]
fn haldane_spectrum_matches_oracle_n5() {
    let h = haldane_chain(&HaldaneSpec {
        n: 5,
        j: 1.0,
        h1: 0.48,
        h2: 0.0,
    })
    .unwrap();
    let ours = eigh(&h).unwrap().eigenvalues;
    let mut theirs: Vec<f64> = oracle_dense(&h).symmetric_eigenvalues().iter().cloned().collect();
    theirs.sort_by(f64::total_cmp);
    for (a, b) in ours.iter().zip(&theirs) {
        assert!((a - b).abs() < 1e-10);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn haldane_file_round_trip(n in 3usize..8, j in -2.0f64..2.0, h1 in -2.0f64..2.0, h2 in -2.0f64..2.0) {
        let h = haldane_chain(&HaldaneSpec { n, j, h1, h2 }).unwrap();
        let text = format_pauli_sum(&h).unwrap();
        let back = parse_pauli_sum(&text).unwrap();
        prop_assert_eq!(&back, &h);
        prop_assert_eq!(format_pauli_sum(&back).unwrap(), text);
    }

    #[test]
    fn random_instances_are_simplified_and_hermitian(n in 1usize..6, seed in any::<u64>()) {
        let h = random_simplified(n, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        prop_assert!(is_simplified_form(&h));
        prop_assert!(h.is_hermitian());
        prop_assert_eq!(h.n_qubits(), n);
    }
}

#[test]
fn haldane_n5_spsa_reaches_ground_energy() {
    use qrbm_core::ansatz::{BaseState, QrbmParams};
    use qrbm_core::qite::QiteOptions;
    use qrbm_core::trainers::{ground_state_energy_objective, spsa_minimize, ObjectiveMode, SpsaSchedule};
    use rand::Rng;

    let h = haldane_chain(&HaldaneSpec {
        n: 5,
        j: 1.0,
        h1: 0.48,
        h2: 0.0,
    })
    .unwrap();
    let e0 = eigh(&h).unwrap().eigenvalues[0];
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let p0 = QrbmParams::zeros(5, 1, BaseState::PlusProduct).unwrap();
    let flat: Vec<f64> = (0..p0.n_params()).map(|_| rng.gen_range(-0.1..0.1)).collect();
    let p0 = p0.with_flat(&flat).unwrap();
    let obj = ground_state_energy_objective(&h, ObjectiveMode::ExactTrial, &QiteOptions::default());
    let sched = SpsaSchedule {
        max_iters: 2000,
        ..Default::default()
    };
    let (p, _) = spsa_minimize(&obj, &p0, &sched).unwrap();
    let e = obj(&p).unwrap();
    assert!(e <= e0 + 1e-2, "trained {e}, ground {e0}, gap {}", e - e0);
}
