//! Arithmetic in GF(p^r), additive characters, Weyl operators, mutually
//! unbiased bases and the relabelling unitaries `U(C)`.
//!
//! Elements are stored internally as integers `0..q` whose base-`p` digits
//! are the polynomial coefficients (constant term first). All tables are
//! built once when the field is constructed.

use crate::error::{domain, usage, Result};
use crate::linalg::{c, cr, kron_all, CMat, CVec};
use serde::{Deserialize, Serialize};

/// Serializable description of a field: prime, extension degree and monic modulus
/// (coefficients from the constant term up, length `r + 1`).
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FiniteFieldSpec {
    pub p: u32,
    pub r: u32,
    pub modulus: Vec<u32>,
}

/// Polynomial representation of one field element.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FieldElement {
    pub coeffs: Vec<u32>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FieldOp {
    Add,
    Mul,
    Neg,
    Inv,
}

/// Conway polynomials for small fields, lowest coefficient first.
fn conway(p: u32, r: u32) -> Option<Vec<u32>> {
    let v: &[u32] = match (p, r) {
        (2, 1) => &[1, 1],
        (2, 2) => &[1, 1, 1],
        (2, 3) => &[1, 1, 0, 1],
        (2, 4) => &[1, 1, 0, 0, 1],
        (3, 1) => &[1, 1],
        (3, 2) => &[2, 2, 1],
        (3, 3) => &[1, 2, 0, 1],
        (3, 4) => &[2, 0, 0, 2, 1],
        (5, 1) => &[3, 1],
        (5, 2) => &[2, 4, 1],
        (5, 3) => &[3, 3, 0, 1],
        (5, 4) => &[2, 4, 4, 0, 1],
        (7, 1) => &[4, 1],
        (7, 2) => &[3, 6, 1],
        (7, 3) => &[4, 0, 6, 1],
        (7, 4) => &[3, 4, 5, 0, 1],
        _ => return None,
    };
    Some(v.to_vec())
}

pub fn is_prime(p: u32) -> bool {
    p >= 2 && (2..).take_while(|k| k * k <= p).all(|k| p % k != 0)
}

/// Remainder of `a` modulo monic `m` over F_p (coefficient vectors, low first).
fn poly_rem(a: &[u32], m: &[u32], p: u32) -> Vec<u32> {
    let mut r: Vec<u32> = a.to_vec();
    let dm = m.len() - 1;
    while r.len() > dm {
        let lead = *r.last().unwrap();
        let shift = r.len() - 1 - dm;
        if lead != 0 {
            for (i, &mc) in m.iter().enumerate() {
                let idx = shift + i;
                r[idx] = (r[idx] + p - (lead * mc) % p) % p;
            }
        }
        r.pop();
    }
    r
}

/// Exhaustive irreducibility test: no monic factor of degree `1..=deg/2`.
pub fn is_irreducible(m: &[u32], p: u32) -> bool {
    let deg = m.len() - 1;
    if deg == 0 || *m.last().unwrap() != 1 {
        return false;
    }
    if deg == 1 {
        return true;
    }
    for k in 1..=deg / 2 {
        let count = (p as usize).pow(k as u32);
        for code in 0..count {
            let mut f = Vec::with_capacity(k + 1);
            let mut x = code;
            for _ in 0..k {
                f.push((x % p as usize) as u32);
                x /= p as usize;
            }
            f.push(1);
            if poly_rem(m, &f, p).iter().all(|&v| v == 0) {
                return false;
            }
        }
    }
    true
}

impl FiniteFieldSpec {
    /// Default field of order `p^r` (Conway polynomial where tabulated, otherwise
    /// the lexicographically first irreducible monic polynomial).
    pub fn new(p: u32, r: u32) -> Result<Self> {
        if !is_prime(p) {
            return usage(format!("{p} is not prime"));
        }
        if r == 0 {
            return usage("extension degree must be positive");
        }
        if let Some(modulus) = conway(p, r) {
            return Ok(Self { p, r, modulus });
        }
        let count = (p as u64).pow(r);
        for code in 0..count {
            let mut f = Vec::with_capacity(r as usize + 1);
            let mut x = code;
            for _ in 0..r {
                f.push((x % p as u64) as u32);
                x /= p as u64;
            }
            f.push(1);
            if is_irreducible(&f, p) {
                return Ok(Self { p, r, modulus: f });
            }
        }
        domain(format!("no irreducible polynomial of degree {r} over F_{p}"))
    }

    /// Smallest-degree field of the given prime-power order.
    pub fn of_order(q: u32) -> Result<Self> {
        for p in 2..=q {
            if is_prime(p) && q % p == 0 {
                let mut r = 0;
                let mut x = q;
                while x % p == 0 {
                    x /= p;
                    r += 1;
                }
                if x != 1 {
                    break;
                }
                return Self::new(p, r);
            }
        }
        usage(format!("{q} is not a prime power"))
    }

    pub fn order(&self) -> u32 {
        self.p.pow(self.r)
    }

    pub fn validate(&self) -> Result<()> {
        if !is_prime(self.p) {
            return usage(format!("{} is not prime", self.p));
        }
        if self.modulus.len() != self.r as usize + 1 || self.modulus.iter().any(|&c| c >= self.p) {
            return usage("modulus must have r+1 coefficients in [0,p)");
        }
        if self.order() > 256 {
            return usage("fields larger than 256 elements are not supported");
        }
        if !is_irreducible(&self.modulus, self.p) {
            return domain("modulus is not irreducible");
        }
        Ok(())
    }
}

/// A concrete finite field with cached addition, multiplication and trace tables.
#[derive(Clone, Debug)]
pub struct Gf {
    spec: FiniteFieldSpec,
    q: usize,
    add: Vec<u32>,
    mul: Vec<u32>,
    neg: Vec<u32>,
    inv: Vec<u32>,
    tr: Vec<u32>,
}

impl PartialEq for Gf {
    fn eq(&self, other: &Self) -> bool {
        self.spec == other.spec
    }
}

impl Gf {
    pub fn new(spec: FiniteFieldSpec) -> Result<Self> {
        spec.validate()?;
        let p = spec.p;
        let r = spec.r as usize;
        let q = spec.order() as usize;
        let to_coeffs = |mut x: usize| -> Vec<u32> {
            (0..r)
                .map(|_| {
                    let d = (x % p as usize) as u32;
                    x /= p as usize;
                    d
                })
                .collect()
        };
        let from_coeffs = |cs: &[u32]| -> u32 { cs.iter().rev().fold(0u32, |acc, &d| acc * p + d) };
        let mut add = vec![0; q * q];
        let mut mul = vec![0; q * q];
        for a in 0..q {
            let ca = to_coeffs(a);
            for b in 0..q {
                let cb = to_coeffs(b);
                let s: Vec<u32> = ca.iter().zip(&cb).map(|(x, y)| (x + y) % p).collect();
                add[a * q + b] = from_coeffs(&s);
                let mut prod = vec![0u32; 2 * r - 1];
                for (i, x) in ca.iter().enumerate() {
                    for (j, y) in cb.iter().enumerate() {
                        prod[i + j] = (prod[i + j] + x * y) % p;
                    }
                }
                let red = poly_rem(&prod, &spec.modulus, p);
                let mut padded = red;
                padded.resize(r, 0);
                mul[a * q + b] = from_coeffs(&padded);
            }
        }
        let mut neg = vec![0; q];
        let mut inv = vec![0; q];
        for a in 0..q {
            for b in 0..q {
                if add[a * q + b] == 0 {
                    neg[a] = b as u32;
                }
                if a != 0 && mul[a * q + b] == 1 {
                    inv[a] = b as u32;
                }
            }
        }
        // Tr(θ) = θ + θ^p + … + θ^{p^{r-1}}; lands in the prime subfield {0..p-1}.
        let mut tr = vec![0; q];
        for (theta, slot) in tr.iter_mut().enumerate() {
            let mut acc = 0u32;
            let mut pw = theta as u32;
            for _ in 0..r {
                acc = add[acc as usize * q + pw as usize];
                let mut next = 1u32;
                for _ in 0..p {
                    next = mul[next as usize * q + pw as usize];
                }
                pw = next;
            }
            *slot = acc;
        }
        Ok(Self { spec, q, add, mul, neg, inv, tr })
    }

    pub fn of_order(q: u32) -> Result<Self> {
        Self::new(FiniteFieldSpec::of_order(q)?)
    }

    pub fn spec(&self) -> &FiniteFieldSpec {
        &self.spec
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn p(&self) -> u32 {
        self.spec.p
    }

    #[inline]
    pub fn add(&self, a: u32, b: u32) -> u32 {
        self.add[a as usize * self.q + b as usize]
    }

    #[inline]
    pub fn sub(&self, a: u32, b: u32) -> u32 {
        self.add(a, self.neg[b as usize])
    }

    #[inline]
    pub fn mul(&self, a: u32, b: u32) -> u32 {
        self.mul[a as usize * self.q + b as usize]
    }

    #[inline]
    pub fn neg(&self, a: u32) -> u32 {
        self.neg[a as usize]
    }

    pub fn inv(&self, a: u32) -> Result<u32> {
        if a == 0 {
            return domain("zero has no multiplicative inverse");
        }
        Ok(self.inv[a as usize])
    }

    /// Field trace as an integer in `0..p`.
    #[inline]
    pub fn trace(&self, a: u32) -> u32 {
        self.tr[a as usize]
    }

    /// Additive character `exp(2πi Tr(θ)/p)`.
    pub fn chi(&self, theta: u32) -> crate::linalg::C64 {
        let t = self.trace(theta) as f64 / self.spec.p as f64;
        let ang = 2.0 * std::f64::consts::PI * t;
        // Exact values for the real cases keep character sums exactly integral.
        match (self.trace(theta), self.spec.p) {
            (0, _) => cr(1.0),
            (1, 2) => cr(-1.0),
            _ => c(ang.cos(), ang.sin()),
        }
    }

    pub fn element(&self, coeffs: &[u32]) -> Result<u32> {
        self.check(coeffs)?;
        Ok(coeffs.iter().rev().fold(0u32, |acc, &d| acc * self.spec.p + d))
    }

    pub fn coeffs(&self, a: u32) -> FieldElement {
        let p = self.spec.p;
        let mut x = a;
        let coeffs = (0..self.spec.r)
            .map(|_| {
                let d = x % p;
                x /= p;
                d
            })
            .collect();
        FieldElement { coeffs }
    }

    fn check(&self, coeffs: &[u32]) -> Result<()> {
        if coeffs.len() != self.spec.r as usize || coeffs.iter().any(|&c| c >= self.spec.p) {
            return usage("field element does not belong to this field");
        }
        Ok(())
    }

    /// Checked arithmetic on polynomial-form elements.
    pub fn arith(&self, op: FieldOp, a: &FieldElement, b: Option<&FieldElement>) -> Result<FieldElement> {
        let x = self.element(&a.coeffs)?;
        let need_b = matches!(op, FieldOp::Add | FieldOp::Mul);
        let y = match (need_b, b) {
            (true, Some(b)) => self.element(&b.coeffs)?,
            (true, None) => return usage("binary operation needs two operands"),
            (false, _) => 0,
        };
        let out = match op {
            FieldOp::Add => self.add(x, y),
            FieldOp::Mul => self.mul(x, y),
            FieldOp::Neg => self.neg(x),
            FieldOp::Inv => self.inv(x)?,
        };
        Ok(self.coeffs(out))
    }

    /// Trace of a polynomial-form element, checked.
    pub fn trace_of(&self, theta: &FieldElement) -> Result<u32> {
        Ok(self.trace(self.element(&theta.coeffs)?))
    }

    /// Shift operator `X(a) = Σ_c |c+a⟩⟨c|`.
    pub fn weyl_x(&self, a: u32) -> CMat {
        let mut m = CMat::zeros(self.q, self.q);
        for col in 0..self.q as u32 {
            m[(self.add(col, a) as usize, col as usize)] = cr(1.0);
        }
        m
    }

    /// Phase operator `Z(b) = Σ_c χ(bc)|c⟩⟨c|`.
    pub fn weyl_z(&self, b: u32) -> CMat {
        let mut m = CMat::zeros(self.q, self.q);
        for k in 0..self.q as u32 {
            m[(k as usize, k as usize)] = self.chi(self.mul(b, k));
        }
        m
    }

    pub fn weyl(&self, kind: WeylKind, label: u32) -> CMat {
        match kind {
            WeylKind::X => self.weyl_x(label),
            WeylKind::Z => self.weyl_z(label),
        }
    }

    /// Tensor product of single-qudit Weyl operators.
    pub fn nqudit_weyl(&self, kind: WeylKind, label: &[u32]) -> CMat {
        let factors: Vec<CMat> = label.iter().map(|&a| self.weyl(kind, a)).collect();
        kron_all(&factors)
    }

    /// Component-wise bilinear form `⟨a,b⟩ = Σ a_i b_i`.
    pub fn bilinear_form(&self, a: &[u32], b: &[u32]) -> Result<u32> {
        if a.len() != b.len() {
            return usage("bilinear form needs vectors of equal length");
        }
        Ok(a.iter().zip(b).fold(0, |acc, (&x, &y)| self.add(acc, self.mul(x, y))))
    }

    /// `|c̃⟩ = q^{-1/2} Σ_{c'} χ(−c c')|c'⟩`.
    pub fn mub_vector(&self, cc: u32) -> CVec {
        let s = 1.0 / (self.q as f64).sqrt();
        CVec::from_fn(self.q, |k, _| self.chi(self.neg(self.mul(cc, k as u32))) * s)
    }

    /// n-qudit MUB vector `|x̃⟩ = ⊗ |x̃_i⟩`.
    pub fn nqudit_mub(&self, x: &[u32]) -> CVec {
        let mut v = CVec::from_element(1, cr(1.0));
        for &xi in x {
            v = v.kronecker(&self.mub_vector(xi));
        }
        v
    }

    /// Index of the computational basis state `|z⟩` for a length-n label.
    pub fn basis_index(&self, z: &[u32]) -> usize {
        z.iter().fold(0usize, |acc, &d| acc * self.q + d as usize)
    }

    pub fn basis_label(&self, mut idx: usize, n: usize) -> Vec<u32> {
        let mut out = vec![0u32; n];
        for k in (0..n).rev() {
            out[k] = (idx % self.q) as u32;
            idx /= self.q;
        }
        out
    }

    /// Permutation unitary `|z⟩ ↦ |z M⟩` in the computational basis.
    pub fn permutation_unitary(&self, m: &FqMatrix) -> CMat {
        let n = m.rows;
        let dim = self.q.pow(n as u32);
        let mut u = CMat::zeros(dim, dim);
        for idx in 0..dim {
            let z = self.basis_label(idx, n);
            let img = m.left_mul_vec(self, &z);
            u[(self.basis_index(&img), idx)] = cr(1.0);
        }
        u
    }

    /// `U(C)` with `U†X(a)U = X(aCᵀ)` and `U†Z(b)U = Z(bC⁻¹)`:
    /// the permutation `|z⟩ ↦ |z (C⁻¹)ᵀ⟩`.
    pub fn relabeling_unitary(&self, cmat: &FqMatrix) -> Result<CMat> {
        if cmat.rows != cmat.cols {
            return usage("relabeling matrix must be square");
        }
        let inv = cmat.inverse(self)?;
        Ok(self.permutation_unitary(&inv.transpose()))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum WeylKind {
    X,
    Z,
}

/// Dense matrix over F_q, row-major, entries as field indices.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FqMatrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<u32>,
}

impl FqMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1;
        }
        m
    }

    pub fn from_rows(rows: &[Vec<u32>]) -> Self {
        let r = rows.len();
        let cdim = if r == 0 { 0 } else { rows[0].len() };
        let data = rows.iter().flat_map(|row| row.iter().copied()).collect();
        Self { rows: r, cols: cdim, data }
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> u32 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: u32) {
        self.data[i * self.cols + j] = v;
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t.set(j, i, self.get(i, j));
            }
        }
        t
    }

    pub fn mul(&self, f: &Gf, other: &Self) -> Result<Self> {
        if self.cols != other.rows {
            return usage("matrix shapes do not match for multiplication");
        }
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for j in 0..other.cols {
                let mut acc = 0;
                for k in 0..self.cols {
                    acc = f.add(acc, f.mul(self.get(i, k), other.get(k, j)));
                }
                out.set(i, j, acc);
            }
        }
        Ok(out)
    }

    /// Row vector times matrix: `x · M`.
    pub fn left_mul_vec(&self, f: &Gf, x: &[u32]) -> Vec<u32> {
        (0..self.cols)
            .map(|j| (0..self.rows).fold(0, |acc, i| f.add(acc, f.mul(x[i], self.get(i, j)))))
            .collect()
    }

    /// Horizontal concatenation `(self other)`.
    pub fn hcat(&self, other: &Self) -> Result<Self> {
        if self.rows != other.rows {
            return usage("hcat needs equal row counts");
        }
        let mut out = Self::zeros(self.rows, self.cols + other.cols);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out.set(i, j, self.get(i, j));
            }
            for j in 0..other.cols {
                out.set(i, self.cols + j, other.get(i, j));
            }
        }
        Ok(out)
    }

    /// Columns `start..end`.
    pub fn col_range(&self, start: usize, end: usize) -> Self {
        let mut out = Self::zeros(self.rows, end - start);
        for i in 0..self.rows {
            for j in start..end {
                out.set(i, j - start, self.get(i, j));
            }
        }
        out
    }

    /// Row-echelon form by Gaussian elimination; returns pivot columns.
    fn echelon(&self, f: &Gf) -> (Self, Vec<usize>) {
        let mut m = self.clone();
        let mut pivots = Vec::new();
        let mut row = 0;
        for col in 0..m.cols {
            if row == m.rows {
                break;
            }
            let Some(pr) = (row..m.rows).find(|&r| m.get(r, col) != 0) else {
                continue;
            };
            if pr != row {
                for j in 0..m.cols {
                    let tmp = m.get(pr, j);
                    m.set(pr, j, m.get(row, j));
                    m.set(row, j, tmp);
                }
            }
            let inv = f.inv(m.get(row, col)).expect("pivot is nonzero");
            for j in 0..m.cols {
                m.set(row, j, f.mul(m.get(row, j), inv));
            }
            for r in 0..m.rows {
                if r != row {
                    let factor = m.get(r, col);
                    if factor != 0 {
                        for j in 0..m.cols {
                            let v = f.sub(m.get(r, j), f.mul(factor, m.get(row, j)));
                            m.set(r, j, v);
                        }
                    }
                }
            }
            pivots.push(col);
            row += 1;
        }
        (m, pivots)
    }

    pub fn rank(&self, f: &Gf) -> usize {
        self.echelon(f).1.len()
    }

    pub fn inverse(&self, f: &Gf) -> Result<Self> {
        if self.rows != self.cols {
            return usage("only square matrices can be inverted");
        }
        let n = self.rows;
        let aug = self.hcat(&Self::identity(n))?;
        let (red, pivots) = aug.echelon(f);
        if pivots.len() < n || pivots[n - 1] >= n {
            return domain("matrix is singular over the field");
        }
        Ok(red.col_range(n, 2 * n))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{identity, max_abs_diff, unitarity_defect};

    fn gf(q: u32) -> Gf {
        Gf::of_order(q).unwrap()
    }

    #[test]
    fn gf2_add_is_xor() {
        let f = gf(2);
        assert_eq!(f.add(1, 1), 0);
    }

    #[test]
    fn gf4_omega_squared() {
        // modulus x^2 + x + 1; omega = x has coefficients (0, 1)
        let f = gf(4);
        assert_eq!(f.spec().modulus, vec![1, 1, 1]);
        let omega = FieldElement { coeffs: vec![0, 1] };
        let sq = f.arith(FieldOp::Mul, &omega, Some(&omega)).unwrap();
        assert_eq!(sq.coeffs, vec![1, 1]);
        assert_eq!(f.trace_of(&omega).unwrap(), 1);
    }

    #[test]
    fn inverse_of_zero_is_domain_error() {
        let f = gf(5);
        let zero = FieldElement { coeffs: vec![0] };
        assert!(matches!(f.arith(FieldOp::Inv, &zero, None), Err(crate::Error::Domain(_))));
    }

    #[test]
    fn mismatched_element_is_usage_error() {
        let f = gf(4);
        let bad = FieldElement { coeffs: vec![1] };
        assert!(matches!(f.arith(FieldOp::Add, &bad, Some(&bad)), Err(crate::Error::Usage(_))));
        let out_of_range = FieldElement { coeffs: vec![2, 0] };
        assert!(f.arith(FieldOp::Neg, &out_of_range, None).is_err());
    }

    #[test]
    fn trace_of_zero_and_gf2() {
        for q in [2, 3, 4, 5, 7, 8, 9] {
            assert_eq!(gf(q).trace(0), 0);
        }
        assert_eq!(gf(2).trace(1), 1);
    }

    #[test]
    fn characters_small_fields() {
        assert_eq!(gf(2).chi(1), cr(-1.0));
        assert_eq!(gf(2).chi(0), cr(1.0));
        let z = gf(3).chi(2);
        let ang = 4.0 * std::f64::consts::PI / 3.0;
        assert!((z - c(ang.cos(), ang.sin())).norm() < 1e-15);
    }

    #[test]
    fn reducible_modulus_rejected() {
        let spec = FiniteFieldSpec { p: 2, r: 2, modulus: vec![1, 0, 1] };
        assert!(matches!(Gf::new(spec), Err(crate::Error::Domain(_))));
        assert!(FiniteFieldSpec::new(4, 1).is_err());
    }

    #[test]
    fn qubit_weyl_are_paulis() {
        let f = gf(2);
        let x = f.weyl_x(1);
        let z = f.weyl_z(1);
        assert_eq!(x[(0, 1)], cr(1.0));
        assert_eq!(x[(1, 0)], cr(1.0));
        assert_eq!(z[(1, 1)], cr(-1.0));
        assert!(max_abs_diff(&f.weyl_x(0), &identity(2)) == 0.0);
        assert!(max_abs_diff(&f.weyl_z(0), &identity(2)) == 0.0);
    }

    #[test]
    fn gf3_commutation() {
        let f = gf(3);
        let lhs = f.weyl_x(1) * f.weyl_z(1);
        let rhs = f.weyl_z(1) * f.weyl_x(1) * f.chi(f.neg(1));
        assert!(max_abs_diff(&lhs, &rhs) < 1e-12);
    }

    #[test]
    fn two_qubit_weyl_pairs() {
        let f = gf(2);
        let xa = f.nqudit_weyl(WeylKind::X, &[1, 0]);
        let zb = f.nqudit_weyl(WeylKind::Z, &[0, 1]);
        assert_eq!(f.bilinear_form(&[1, 0], &[0, 1]).unwrap(), 0);
        assert!(max_abs_diff(&(&xa * &zb), &(&zb * &xa)) < 1e-15);
        let xa = f.nqudit_weyl(WeylKind::X, &[1, 1]);
        let zb = f.nqudit_weyl(WeylKind::Z, &[1, 0]);
        assert_eq!(f.bilinear_form(&[1, 1], &[1, 0]).unwrap(), 1);
        assert!(max_abs_diff(&(&xa * &zb), &(-(&zb * &xa))) < 1e-15);
        assert!(f.bilinear_form(&[1], &[1, 0]).is_err());
    }

    #[test]
    fn mub_vectors() {
        let f = gf(2);
        let v = f.mub_vector(0);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        assert!((v[0] - cr(s)).norm() < 1e-15 && (v[1] - cr(s)).norm() < 1e-15);
        let f3 = gf(3);
        let v1 = f3.mub_vector(1);
        let lhs = f3.weyl_x(1) * &v1;
        let rhs = &v1 * f3.chi(1);
        assert!((lhs - rhs).norm() < 1e-12);
    }

    #[test]
    fn relabeling_identity_and_swap() {
        let f = gf(2);
        let u = f.relabeling_unitary(&FqMatrix::identity(2)).unwrap();
        assert!(max_abs_diff(&u, &identity(4)) == 0.0);
        let swap = FqMatrix::from_rows(&[vec![0, 1], vec![1, 0]]);
        let u = f.relabeling_unitary(&swap).unwrap();
        // SWAP gate: |01> <-> |10>
        assert_eq!(u[(2, 1)], cr(1.0));
        assert_eq!(u[(1, 2)], cr(1.0));
        assert_eq!(u[(0, 0)], cr(1.0));
        assert_eq!(u[(3, 3)], cr(1.0));
        let singular = FqMatrix::from_rows(&[vec![1, 1], vec![1, 1]]);
        assert!(matches!(f.relabeling_unitary(&singular), Err(crate::Error::Domain(_))));
    }

    #[test]
    fn relabeling_conjugation_identities() {
        let f = gf(2);
        let cm = FqMatrix::from_rows(&[vec![1, 1], vec![0, 1]]);
        let u = f.relabeling_unitary(&cm).unwrap();
        assert!(unitarity_defect(&u) < 1e-12);
        let cinv = cm.inverse(&f).unwrap();
        let ct = cm.transpose();
        for a0 in 0..2 {
            for a1 in 0..2 {
                let a = [a0, a1];
                let lhs = u.adjoint() * f.nqudit_weyl(WeylKind::X, &a) * &u;
                let rhs = f.nqudit_weyl(WeylKind::X, &ct.left_mul_vec(&f, &a));
                assert!(max_abs_diff(&lhs, &rhs) < 1e-12);
                let lhs = u.adjoint() * f.nqudit_weyl(WeylKind::Z, &a) * &u;
                let rhs = f.nqudit_weyl(WeylKind::Z, &cinv.left_mul_vec(&f, &a));
                assert!(max_abs_diff(&lhs, &rhs) < 1e-12);
            }
        }
    }

    #[test]
    fn fq_inverse_roundtrip() {
        let f = gf(3);
        let m = FqMatrix::from_rows(&[vec![1, 2, 0], vec![0, 1, 1], vec![2, 0, 1]]);
        let inv = m.inverse(&f).unwrap();
        assert_eq!(m.mul(&f, &inv).unwrap(), FqMatrix::identity(3));
        assert_eq!(m.rank(&f), 3);
    }
}
