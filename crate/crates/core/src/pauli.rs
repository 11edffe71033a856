//! Pauli strings as x/z bitmasks and real-weighted Pauli sums.
//!
//! A string with masks `(x, z)` denotes `i^{|x & z|} X^x Z^z`, so that a
//! qubit with both bits set carries `Y = iXZ`. Qubit 0 is the leftmost
//! character of the text form and bit 0 of each mask.

use std::fmt;
use std::str::FromStr;

use indexmap::IndexMap;
use num_complex::Complex64;

use crate::error::{QrbmError, Result};

pub const MAX_PAULI_QUBITS: usize = 64;

/// Relative drop tolerance applied after merging coefficients.
pub const DROP_TOL: f64 = 1e-14;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Phase {
    One,
    I,
    MinusOne,
    MinusI,
}

impl Phase {
    pub fn from_exponent(e: u32) -> Phase {
        match e % 4 {
            0 => Phase::One,
            1 => Phase::I,
            2 => Phase::MinusOne,
            _ => Phase::MinusI,
        }
    }

    pub fn exponent(self) -> u32 {
        match self {
            Phase::One => 0,
            Phase::I => 1,
            Phase::MinusOne => 2,
            Phase::MinusI => 3,
        }
    }

    pub fn to_complex(self) -> Complex64 {
        match self {
            Phase::One => Complex64::new(1.0, 0.0),
            Phase::I => Complex64::new(0.0, 1.0),
            Phase::MinusOne => Complex64::new(-1.0, 0.0),
            Phase::MinusI => Complex64::new(0.0, -1.0),
        }
    }

    pub fn mul(self, other: Phase) -> Phase {
        Phase::from_exponent(self.exponent() + other.exponent())
    }

    pub fn conj(self) -> Phase {
        Phase::from_exponent(4 - self.exponent())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Pauli {
    I,
    X,
    Y,
    Z,
}

impl Pauli {
    pub fn bits(self) -> (bool, bool) {
        match self {
            Pauli::I => (false, false),
            Pauli::X => (true, false),
            Pauli::Y => (true, true),
            Pauli::Z => (false, true),
        }
    }

    pub fn from_bits(x: bool, z: bool) -> Pauli {
        match (x, z) {
            (false, false) => Pauli::I,
            (true, false) => Pauli::X,
            (true, true) => Pauli::Y,
            (false, true) => Pauli::Z,
        }
    }

    pub fn to_char(self) -> char {
        match self {
            Pauli::I => 'I',
            Pauli::X => 'X',
            Pauli::Y => 'Y',
            Pauli::Z => 'Z',
        }
    }

    /// The three non-identity Paulis in x, y, z order.
    pub const XYZ: [Pauli; 3] = [Pauli::X, Pauli::Y, Pauli::Z];
}

#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PauliString {
    n_qubits: usize,
    x: u64,
    z: u64,
}

fn mask_for(n: usize) -> u64 {
    if n >= 64 {
        u64::MAX
    } else {
        (1u64 << n) - 1
    }
}

impl PauliString {
    pub fn new(n_qubits: usize, x: u64, z: u64) -> Result<Self> {
        if n_qubits > MAX_PAULI_QUBITS {
            return Err(QrbmError::Capacity {
                what: "pauli string qubits",
                limit: MAX_PAULI_QUBITS,
                got: n_qubits,
            });
        }
        let m = mask_for(n_qubits);
        if x & !m != 0 || z & !m != 0 {
            return Err(QrbmError::Input(format!(
                "mask bits beyond qubit count {n_qubits}"
            )));
        }
        Ok(PauliString { n_qubits, x, z })
    }

    pub fn identity(n_qubits: usize) -> Self {
        assert!(n_qubits <= MAX_PAULI_QUBITS);
        PauliString { n_qubits, x: 0, z: 0 }
    }

    /// A single Pauli on qubit `q`.
    pub fn single(n_qubits: usize, q: usize, p: Pauli) -> Self {
        assert!(q < n_qubits && n_qubits <= MAX_PAULI_QUBITS);
        let (bx, bz) = p.bits();
        PauliString {
            n_qubits,
            x: (bx as u64) << q,
            z: (bz as u64) << q,
        }
    }

    /// Product of single-qubit Paulis at distinct positions.
    pub fn from_ops(n_qubits: usize, ops: &[(usize, Pauli)]) -> Result<Self> {
        let mut s = PauliString::identity(n_qubits);
        for &(q, p) in ops {
            if q >= n_qubits {
                return Err(QrbmError::Dimension {
                    expected: n_qubits,
                    got: q + 1,
                });
            }
            if s.get(q) != Pauli::I {
                return Err(QrbmError::Input(format!("qubit {q} listed twice")));
            }
            s.set(q, p);
        }
        Ok(s)
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn x_mask(&self) -> u64 {
        self.x
    }

    pub fn z_mask(&self) -> u64 {
        self.z
    }

    pub fn support(&self) -> u64 {
        self.x | self.z
    }

    pub fn weight(&self) -> usize {
        self.support().count_ones() as usize
    }

    pub fn is_identity(&self) -> bool {
        self.x == 0 && self.z == 0
    }

    /// Number of Y factors; the phase `i^{y_count}` relates the string to `X^x Z^z`.
    pub fn y_count(&self) -> u32 {
        (self.x & self.z).count_ones()
    }

    pub fn get(&self, q: usize) -> Pauli {
        Pauli::from_bits((self.x >> q) & 1 == 1, (self.z >> q) & 1 == 1)
    }

    pub fn set(&mut self, q: usize, p: Pauli) {
        assert!(q < self.n_qubits);
        let (bx, bz) = p.bits();
        self.x = (self.x & !(1 << q)) | ((bx as u64) << q);
        self.z = (self.z & !(1 << q)) | ((bz as u64) << q);
    }

    pub fn support_qubits(&self) -> Vec<usize> {
        (0..self.n_qubits)
            .filter(|&q| (self.support() >> q) & 1 == 1)
            .collect()
    }

    pub fn commutes_with(&self, other: &PauliString) -> bool {
        ((self.x & other.z).count_ones() + (self.z & other.x).count_ones()) % 2 == 0
    }

    /// Place this string on qubits `offset..offset+n` of a larger register.
    pub fn embed(&self, n_total: usize, offset: usize) -> Result<PauliString> {
        if offset + self.n_qubits > n_total {
            return Err(QrbmError::Dimension {
                expected: n_total,
                got: offset + self.n_qubits,
            });
        }
        PauliString::new(n_total, self.x << offset, self.z << offset)
    }

    /// Action on a computational basis index: `P|b> = phase * |b ^ x>`.
    #[inline]
    pub fn apply_to_basis(&self, b: u64) -> (Complex64, u64) {
        let e = self.y_count() + 2 * (self.z & b).count_ones();
        (Phase::from_exponent(e).to_complex(), b ^ self.x)
    }

    /// Sign factor `(-1)^{|z & b|}` times the fixed Y phase, as a phase exponent.
    #[inline]
    pub fn basis_phase_exponent(&self, b: u64) -> u32 {
        self.y_count() + 2 * (self.z & b).count_ones()
    }

    pub fn parse(s: &str) -> Result<Self> {
        let n = s.chars().count();
        if n > MAX_PAULI_QUBITS {
            return Err(QrbmError::Capacity {
                what: "pauli string qubits",
                limit: MAX_PAULI_QUBITS,
                got: n,
            });
        }
        let mut p = PauliString::identity(n);
        for (pos, ch) in s.chars().enumerate() {
            let op = match ch {
                'I' => Pauli::I,
                'X' => Pauli::X,
                'Y' => Pauli::Y,
                'Z' => Pauli::Z,
                other => {
                    return Err(QrbmError::Parse {
                        pos,
                        msg: format!("illegal character {other:?}"),
                    })
                }
            };
            p.set(pos, op);
        }
        Ok(p)
    }

    pub fn format(&self) -> String {
        (0..self.n_qubits).map(|q| self.get(q).to_char()).collect()
    }
}

impl fmt::Display for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.format())
    }
}

impl fmt::Debug for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "PauliString({})", self.format())
    }
}

impl FromStr for PauliString {
    type Err = QrbmError;
    fn from_str(s: &str) -> Result<Self> {
        PauliString::parse(s)
    }
}

/// Exact product `p * q = phase * r`.
pub fn pauli_mul(p: &PauliString, q: &PauliString) -> Result<(Phase, PauliString)> {
    if p.n_qubits != q.n_qubits {
        return Err(QrbmError::Dimension {
            expected: p.n_qubits,
            got: q.n_qubits,
        });
    }
    let x = p.x ^ q.x;
    let z = p.z ^ q.z;
    // i^{y(p)} X^{x1} Z^{z1} i^{y(q)} X^{x2} Z^{z2}; moving Z^{z1} past X^{x2}
    // costs (-1)^{|z1 & x2|}, then divide by i^{y(r)}.
    let e = p.y_count() + q.y_count() + 2 * (p.z & q.x).count_ones() + 4
        - ((x & z).count_ones() % 4);
    Ok((Phase::from_exponent(e), PauliString { n_qubits: p.n_qubits, x, z }))
}

/// `sum_k c_k P_k + identity_coeff * I`, insertion ordered, no identity among the terms.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct PauliSum {
    n_qubits: usize,
    identity_coeff: f64,
    terms: IndexMap<PauliString, Complex64>,
}

impl PauliSum {
    pub fn zero(n_qubits: usize) -> Self {
        PauliSum {
            n_qubits,
            identity_coeff: 0.0,
            terms: IndexMap::new(),
        }
    }

    pub fn from_real_terms(n_qubits: usize, terms: &[(f64, PauliString)]) -> Result<Self> {
        let mut s = PauliSum::zero(n_qubits);
        for (c, p) in terms {
            s.add_term(Complex64::new(*c, 0.0), *p)?;
        }
        s.prune();
        Ok(s)
    }

    /// Parse terms like `[(1.0, "ZZ"), (-0.5, "XI")]`.
    pub fn from_text_terms(terms: &[(f64, &str)]) -> Result<Self> {
        let first = terms
            .first()
            .ok_or_else(|| QrbmError::Input("no terms given".into()))?;
        let n = first.1.len();
        let mut s = PauliSum::zero(n);
        for (c, t) in terms {
            s.add_term(Complex64::new(*c, 0.0), PauliString::parse(t)?)?;
        }
        s.prune();
        Ok(s)
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn identity_coeff(&self) -> f64 {
        self.identity_coeff
    }

    pub fn set_identity_coeff(&mut self, c: f64) {
        self.identity_coeff = c;
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty() && self.identity_coeff == 0.0
    }

    pub fn terms(&self) -> impl Iterator<Item = (&PauliString, &Complex64)> {
        self.terms.iter()
    }

    pub fn coeff(&self, p: &PauliString) -> Complex64 {
        if p.is_identity() {
            return Complex64::new(self.identity_coeff, 0.0);
        }
        self.terms.get(p).copied().unwrap_or_default()
    }

    /// Adds `c * p`, merging with an existing entry. Identity goes to `identity_coeff`
    /// and must then be real.
    pub fn add_term(&mut self, c: Complex64, p: PauliString) -> Result<()> {
        if p.n_qubits() != self.n_qubits {
            return Err(QrbmError::Dimension {
                expected: self.n_qubits,
                got: p.n_qubits(),
            });
        }
        if p.is_identity() {
            if c.im.abs() > 1e-12 * c.re.abs().max(1.0) {
                return Err(QrbmError::Contract(format!(
                    "identity coefficient must be real, got {c}"
                )));
            }
            self.identity_coeff += c.re;
            return Ok(());
        }
        *self.terms.entry(p).or_default() += c;
        Ok(())
    }

    pub fn add_real(&mut self, c: f64, p: PauliString) -> Result<()> {
        self.add_term(Complex64::new(c, 0.0), p)
    }

    pub fn max_abs_coeff(&self) -> f64 {
        self.terms
            .values()
            .map(|c| c.norm())
            .fold(self.identity_coeff.abs(), f64::max)
    }

    /// Removes coefficients below `DROP_TOL` relative to the largest one.
    pub fn prune(&mut self) {
        let scale = self.max_abs_coeff();
        if scale == 0.0 {
            self.terms.clear();
            return;
        }
        let cut = DROP_TOL * scale;
        self.terms.retain(|_, c| c.norm() > cut);
        if self.identity_coeff.abs() <= cut {
            self.identity_coeff = 0.0;
        }
    }

    pub fn is_hermitian(&self) -> bool {
        self.terms.values().all(|c| c.im == 0.0)
    }

    /// Real coefficients as `(c, P)` pairs; fails on a non-Hermitian sum.
    pub fn real_terms(&self) -> Result<Vec<(f64, PauliString)>> {
        if !self.is_hermitian() {
            return Err(QrbmError::Contract("Pauli sum is not Hermitian".into()));
        }
        Ok(self.terms.iter().map(|(p, c)| (c.re, *p)).collect())
    }

    /// Triangle-inequality bound on the operator norm.
    pub fn l1_norm(&self) -> f64 {
        self.identity_coeff.abs() + self.terms.values().map(|c| c.norm()).sum::<f64>()
    }

    pub fn scaled(&self, alpha: f64) -> PauliSum {
        let mut out = self.clone();
        out.identity_coeff *= alpha;
        for c in out.terms.values_mut() {
            *c *= alpha;
        }
        out.prune();
        out
    }

    /// Place the sum on qubits `offset..offset+n` of a larger register.
    pub fn embed(&self, n_total: usize, offset: usize) -> Result<PauliSum> {
        let mut out = PauliSum::zero(n_total);
        out.identity_coeff = self.identity_coeff;
        for (p, c) in &self.terms {
            out.terms.insert(p.embed(n_total, offset)?, *c);
        }
        Ok(out)
    }

    /// Operator product `self * other`. The identity part of the result must be real.
    pub fn mul(&self, other: &PauliSum) -> Result<PauliSum> {
        if self.n_qubits != other.n_qubits {
            return Err(QrbmError::Dimension {
                expected: self.n_qubits,
                got: other.n_qubits,
            });
        }
        let id = PauliString::identity(self.n_qubits);
        let with_id = |s: &PauliSum| {
            let mut v: Vec<(PauliString, Complex64)> =
                s.terms.iter().map(|(p, c)| (*p, *c)).collect();
            if s.identity_coeff != 0.0 {
                v.insert(0, (id, Complex64::new(s.identity_coeff, 0.0)));
            }
            v
        };
        let (lhs, rhs) = (with_id(self), with_id(other));
        let mut acc: IndexMap<PauliString, Complex64> = IndexMap::new();
        for (p, a) in &lhs {
            for (q, b) in &rhs {
                let (ph, r) = pauli_mul(p, q)?;
                *acc.entry(r).or_default() += a * b * ph.to_complex();
            }
        }
        let mut out = PauliSum::zero(self.n_qubits);
        for (p, c) in acc {
            if p.is_identity() {
                let tol = 1e-12 * (self.l1_norm() * other.l1_norm()).max(1.0);
                if c.im.abs() > tol {
                    return Err(QrbmError::Contract(format!(
                        "product has non-real identity coefficient {c}"
                    )));
                }
                out.identity_coeff = c.re;
            } else {
                out.terms.insert(p, c);
            }
        }
        out.prune();
        Ok(out)
    }
}

/// `alpha * a + beta * b` with duplicates merged and tiny coefficients dropped.
pub fn sum_combine(a: &PauliSum, b: &PauliSum, alpha: f64, beta: f64) -> Result<PauliSum> {
    if a.n_qubits != b.n_qubits {
        return Err(QrbmError::Dimension {
            expected: a.n_qubits,
            got: b.n_qubits,
        });
    }
    let mut out = PauliSum::zero(a.n_qubits);
    out.identity_coeff = alpha * a.identity_coeff + beta * b.identity_coeff;
    for (p, c) in &a.terms {
        *out.terms.entry(*p).or_default() += c * alpha;
    }
    for (p, c) in &b.terms {
        *out.terms.entry(*p).or_default() += c * beta;
    }
    out.prune();
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ps(s: &str) -> PauliString {
        PauliString::parse(s).unwrap()
    }

    // Independent 2x2 matrix model of a string, qubit by qubit.
    fn kron_phase_model(p: &PauliString, q: &PauliString) -> (Complex64, PauliString) {
        let one = Complex64::new(1.0, 0.0);
        let i = Complex64::new(0.0, 1.0);
        let mut phase = one;
        let mut out = PauliString::identity(p.n_qubits());
        for k in 0..p.n_qubits() {
            let (a, b) = (p.get(k), q.get(k));
            let (ph, r) = match (a, b) {
                (Pauli::I, x) | (x, Pauli::I) => (one, x),
                (x, y) if x == y => (one, Pauli::I),
                (Pauli::X, Pauli::Y) => (i, Pauli::Z),
                (Pauli::Y, Pauli::X) => (-i, Pauli::Z),
                (Pauli::Y, Pauli::Z) => (i, Pauli::X),
                (Pauli::Z, Pauli::Y) => (-i, Pauli::X),
                (Pauli::Z, Pauli::X) => (i, Pauli::Y),
                (Pauli::X, Pauli::Z) => (-i, Pauli::Y),
                _ => unreachable!(),
            };
            phase *= ph;
            out.set(k, r);
        }
        (phase, out)
    }

    fn all_strings(n: usize) -> Vec<PauliString> {
        let mut v = vec![];
        for x in 0..(1u64 << n) {
            for z in 0..(1u64 << n) {
                v.push(PauliString::new(n, x, z).unwrap());
            }
        }
        v
    }

    #[test]
    fn products_of_single_paulis() {
        assert_eq!(pauli_mul(&ps("X"), &ps("X")).unwrap(), (Phase::One, ps("I")));
        assert_eq!(pauli_mul(&ps("X"), &ps("Y")).unwrap(), (Phase::I, ps("Z")));
        assert_eq!(pauli_mul(&ps("Y"), &ps("X")).unwrap(), (Phase::MinusI, ps("Z")));
        assert_eq!(pauli_mul(&ps("XZ"), &ps("YZ")).unwrap(), (Phase::I, ps("ZI")));
    }

    #[test]
    fn size_mismatch_is_rejected() {
        assert!(matches!(
            pauli_mul(&ps("X"), &ps("XX")),
            Err(QrbmError::Dimension { .. })
        ));
    }

    #[test]
    fn product_matches_per_qubit_table_on_three_qubits() {
        let all = all_strings(3);
        for p in &all {
            for q in &all {
                let (ph, r) = pauli_mul(p, q).unwrap();
                let (mph, mr) = kron_phase_model(p, q);
                assert_eq!(r, mr);
                assert!((ph.to_complex() - mph).norm() < 1e-15, "{p} {q}");
            }
        }
    }

    #[test]
    fn associativity_with_phase_on_all_two_qubit_strings() {
        let all = all_strings(2);
        for p in &all {
            for q in &all {
                for r in &all {
                    let (a1, pq) = pauli_mul(p, q).unwrap();
                    let (a2, left) = pauli_mul(&pq, r).unwrap();
                    let (b1, qr) = pauli_mul(q, r).unwrap();
                    let (b2, right) = pauli_mul(p, &qr).unwrap();
                    assert_eq!(left, right);
                    assert_eq!(a1.mul(a2), b1.mul(b2));
                }
            }
        }
    }

    #[test]
    fn parse_positions_and_errors() {
        let p = ps("XIZY");
        assert_eq!(p.get(0), Pauli::X);
        assert_eq!(p.get(1), Pauli::I);
        assert_eq!(p.get(2), Pauli::Z);
        assert_eq!(p.get(3), Pauli::Y);
        assert!(ps("IIII").is_identity());
        assert_eq!(ps("IIII").n_qubits(), 4);
        assert_eq!(ps("ZXZ").format(), "ZXZ");
        match PauliString::parse("XXQ") {
            Err(QrbmError::Parse { pos, .. }) => assert_eq!(pos, 2),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn masks_beyond_size_rejected() {
        assert!(PauliString::new(2, 0b100, 0).is_err());
    }

    #[test]
    fn sum_combine_examples() {
        let a = PauliSum::from_text_terms(&[(1.0, "XZ"), (0.5, "YY")]).unwrap();
        let z = sum_combine(&a, &a, 1.0, -1.0).unwrap();
        assert!(z.is_zero());

        let z2 = PauliSum::from_text_terms(&[(2.0, "Z")]).unwrap();
        let z3 = PauliSum::from_text_terms(&[(3.0, "Z")]).unwrap();
        let s = sum_combine(&z2, &z3, 1.0, 1.0).unwrap();
        assert_eq!(s.len(), 1);
        assert_eq!(s.coeff(&ps("Z")).re, 5.0);

        let xi = PauliSum::from_text_terms(&[(1.0, "X"), (1.0, "I")]).unwrap();
        let d = sum_combine(&xi, &xi, 1.0, 1.0).unwrap();
        assert_eq!(d.identity_coeff(), 2.0);
        assert_eq!(d.coeff(&ps("X")).re, 2.0);
        assert_eq!(d.len(), 1);
    }

    #[test]
    fn drop_tolerance_is_relative() {
        let a = PauliSum::from_text_terms(&[(1.0, "X"), (1e-15, "Z")]).unwrap();
        assert_eq!(a.len(), 1);
        let b = PauliSum::from_text_terms(&[(1e-15, "Z")]).unwrap();
        assert_eq!(b.len(), 1);
    }

    #[test]
    fn product_of_sums() {
        // (Y + I) X (Y + I) = X + YX + XY + YXY = X - iZ + iZ - X = 0
        let yi = PauliSum::from_text_terms(&[(1.0, "Y"), (1.0, "I")]).unwrap();
        let x = PauliSum::from_text_terms(&[(1.0, "X")]).unwrap();
        let r = yi.mul(&x).unwrap().mul(&yi).unwrap();
        assert!(r.is_zero());
        // (Y + I) Y (Y + I) = 2Y + 2I
        let y = PauliSum::from_text_terms(&[(1.0, "Y")]).unwrap();
        let r = yi.mul(&y).unwrap().mul(&yi).unwrap();
        assert_eq!(r.identity_coeff(), 2.0);
        assert_eq!(r.coeff(&ps("Y")).re, 2.0);
    }

    fn arb_string(n: usize) -> impl Strategy<Value = PauliString> {
        (0..(1u64 << n), 0..(1u64 << n)).prop_map(move |(x, z)| PauliString::new(n, x, z).unwrap())
    }

    fn arb_real_sum(n: usize) -> impl Strategy<Value = PauliSum> {
        (
            -2.0f64..2.0,
            prop::collection::vec((-2.0f64..2.0, arb_string(n)), 0..8),
        )
            .prop_map(move |(id, ts)| {
                let mut s = PauliSum::zero(n);
                s.set_identity_coeff(id);
                for (c, p) in ts {
                    s.add_real(c, p).unwrap();
                }
                s.prune();
                s
            })
    }

    proptest! {
        #[test]
        fn square_is_identity(p in arb_string(6)) {
            let (ph, r) = pauli_mul(&p, &p).unwrap();
            prop_assert_eq!(ph, Phase::One);
            prop_assert!(r.is_identity());
        }

        #[test]
        fn text_round_trip(p in arb_string(7)) {
            prop_assert_eq!(PauliString::parse(&p.format()).unwrap(), p);
        }

        #[test]
        fn combine_with_real_weights_stays_hermitian(
            a in arb_real_sum(3), b in arb_real_sum(3), x in -3.0f64..3.0, y in -3.0f64..3.0
        ) {
            prop_assert!(sum_combine(&a, &b, x, y).unwrap().is_hermitian());
        }

        #[test]
        fn commutation_matches_product_phases(p in arb_string(4), q in arb_string(4)) {
            let (a, pq) = pauli_mul(&p, &q).unwrap();
            let (b, qp) = pauli_mul(&q, &p).unwrap();
            prop_assert_eq!(pq, qp);
            prop_assert_eq!(a == b, p.commutes_with(&q));
        }
    }
}
