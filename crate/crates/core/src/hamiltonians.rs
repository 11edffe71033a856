//! Model Hamiltonians and the Pauli-sum text format.
//!
//! File format, one entry per line:
//!
//! ```text
//! # comment
//! qubits 2
//! -1.0523732457728590 II
//! 0.39793742484318045 IZ
//! ```
//!
//! The `qubits` header is optional when at least one term is present.
//! Coefficients must be real.

use std::fmt::Write as _;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{QrbmError, Result};
use crate::pauli::{Pauli, PauliString, PauliSum};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HaldaneSpec {
    pub n: usize,
    pub j: f64,
    pub h1: f64,
    pub h2: f64,
}

/// `-J Σ Z_i X_{i+1} Z_{i+2} - h1 Σ X_i - h2 Σ X_i X_{i+1}`, open boundaries.
pub fn haldane_chain(spec: &HaldaneSpec) -> Result<PauliSum> {
    let n = spec.n;
    if n < 3 {
        return Err(QrbmError::Input(format!("chain needs at least 3 sites, got {n}")));
    }
    let mut h = PauliSum::zero(n);
    for i in 0..n - 2 {
        let p = PauliString::from_ops(n, &[(i, Pauli::Z), (i + 1, Pauli::X), (i + 2, Pauli::Z)])?;
        h.add_real(-spec.j, p)?;
    }
    for i in 0..n {
        h.add_real(-spec.h1, PauliString::single(n, i, Pauli::X))?;
    }
    for i in 0..n - 1 {
        let p = PauliString::from_ops(n, &[(i, Pauli::X), (i + 1, Pauli::X)])?;
        h.add_real(-spec.h2, p)?;
    }
    h.prune();
    Ok(h)
}

fn looks_complex(tok: &str) -> bool {
    let t = tok.to_ascii_lowercase();
    if t.contains("inf") || t.contains("nan") {
        return false;
    }
    t.ends_with('j') || t.ends_with('i') || t.contains('(')
}

pub fn parse_pauli_sum(text: &str) -> Result<PauliSum> {
    let mut n_header: Option<usize> = None;
    let mut entries: Vec<(usize, f64, PauliString)> = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let toks: Vec<&str> = line.split_whitespace().collect();
        if toks[0] == "qubits" {
            if n_header.is_some() || !entries.is_empty() {
                return Err(QrbmError::FileFormat {
                    line: line_no,
                    msg: "qubits header must appear once, before any term".into(),
                });
            }
            let n = toks
                .get(1)
                .and_then(|t| t.parse::<usize>().ok())
                .filter(|_| toks.len() == 2)
                .ok_or_else(|| QrbmError::FileFormat {
                    line: line_no,
                    msg: "expected `qubits <count>`".into(),
                })?;
            n_header = Some(n);
            continue;
        }
        if toks.len() != 2 {
            return Err(QrbmError::FileFormat {
                line: line_no,
                msg: format!("expected `<coeff> <pauli>`, found {} fields", toks.len()),
            });
        }
        if looks_complex(toks[0]) {
            return Err(QrbmError::FileFormat {
                line: line_no,
                msg: format!("complex coefficient {:?} rejected: operators must be Hermitian", toks[0]),
            });
        }
        let c: f64 = toks[0].parse().map_err(|_| QrbmError::FileFormat {
            line: line_no,
            msg: format!("bad coefficient {:?}", toks[0]),
        })?;
        if !c.is_finite() {
            return Err(QrbmError::FileFormat {
                line: line_no,
                msg: "coefficient must be finite".into(),
            });
        }
        let p = PauliString::parse(toks[1]).map_err(|e| QrbmError::FileFormat {
            line: line_no,
            msg: e.to_string(),
        })?;
        entries.push((line_no, c, p));
    }
    let n = match (n_header, entries.first()) {
        (Some(n), _) => n,
        (None, Some((_, _, p))) => p.n_qubits(),
        (None, None) => {
            return Err(QrbmError::FileFormat {
                line: 0,
                msg: "empty Pauli sum without a `qubits` header".into(),
            })
        }
    };
    let mut h = PauliSum::zero(n);
    for (line, c, p) in entries {
        if p.n_qubits() != n {
            return Err(QrbmError::FileFormat {
                line,
                msg: format!("term has {} qubits, expected {n}", p.n_qubits()),
            });
        }
        h.add_real(c, p)?;
    }
    h.prune();
    Ok(h)
}

/// Canonical text: header, identity line first when nonzero, then terms in order.
pub fn format_pauli_sum(h: &PauliSum) -> Result<String> {
    let terms = h.real_terms()?;
    let mut s = String::new();
    writeln!(s, "qubits {}", h.n_qubits()).unwrap();
    if h.identity_coeff() != 0.0 {
        writeln!(s, "{:?} {}", h.identity_coeff(), PauliString::identity(h.n_qubits())).unwrap();
    }
    for (c, p) in terms {
        writeln!(s, "{c:?} {p}").unwrap();
    }
    Ok(s)
}

pub fn load_pauli_sum(path: impl AsRef<Path>) -> Result<PauliSum> {
    let text = std::fs::read_to_string(path)?;
    parse_pauli_sum(&text)
}

pub fn save_pauli_sum(h: &PauliSum, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, format_pauli_sum(h)?)?;
    Ok(())
}

/// Random instance with only `σᵗ_i` and same-letter `σᵗ_s σᵗ_k` terms: 1-local
/// coefficients uniform in `[-1, 1)`, 2-local in `[-0.5, 0.5)`.
pub fn random_simplified<R: Rng>(n: usize, rng: &mut R) -> Result<PauliSum> {
    if n == 0 {
        return Err(QrbmError::Input("random instance needs at least one qubit".into()));
    }
    let mut h = PauliSum::zero(n);
    for i in 0..n {
        for t in Pauli::XYZ {
            h.add_real(rng.gen_range(-1.0..1.0), PauliString::single(n, i, t))?;
        }
        for k in i + 1..n {
            for t in Pauli::XYZ {
                h.add_real(rng.gen_range(-0.5..0.5), PauliString::from_ops(n, &[(i, t), (k, t)])?)?;
            }
        }
    }
    Ok(h)
}
