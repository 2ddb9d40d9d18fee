//! Surjective linear hash functions over F_q, exhaustive 2-universality checks,
//! dual-basis completion and the hashing unitary `U(H)`.

use crate::error::{capacity, domain, usage, Result};
use crate::field::{FiniteFieldSpec, FqMatrix, Gf};
use crate::linalg::CMat;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Upper limit on explicitly enumerated families.
pub const MAX_FAMILY: usize = 1 << 20;
/// Largest Hilbert-space dimension for which `U(H)` is materialised.
pub const MAX_UNITARY_DIM: usize = 1024;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HashFamilyKind {
    ToeplitzBased,
    AllSurjective,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HashFamilySpec {
    pub kind: HashFamilyKind,
    pub n: usize,
    pub m: usize,
    pub field: FiniteFieldSpec,
    pub seed: u64,
}

/// `(G, Ḡ, H, H̄)` with `(Ḡ G)` the inverse transpose of `(H H̄)`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DualQuadruple {
    pub g: FqMatrix,
    pub gbar: FqMatrix,
    pub h: FqMatrix,
    pub hbar: FqMatrix,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CollisionReport {
    pub family_size: usize,
    pub max_collisions: usize,
    /// `|family| / q^m`, the 2-universal collision ceiling.
    pub bound: f64,
    pub passes: bool,
}

fn random_entries(f: &Gf, len: usize, rng: &mut impl Rng) -> Vec<u32> {
    (0..len).map(|_| rng.random_range(0..f.q() as u32)).collect()
}

/// n×m Toeplitz matrix from its `n+m-1` diagonals: `T[i][j] = t[i - j + m - 1]`.
pub fn toeplitz(n: usize, m: usize, diag: &[u32]) -> FqMatrix {
    let mut t = FqMatrix::zeros(n, m);
    for i in 0..n {
        for j in 0..m {
            t.set(i, j, diag[i + m - 1 - j]);
        }
    }
    t
}

/// Draws one surjective member; rank-deficient draws are resampled.
pub fn sample_hash(spec: &HashFamilySpec) -> Result<FqMatrix> {
    let f = Gf::new(spec.field.clone())?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    sample_with(&f, spec.kind, spec.n, spec.m, &mut rng)
}

pub fn sample_with(f: &Gf, kind: HashFamilyKind, n: usize, m: usize, rng: &mut impl Rng) -> Result<FqMatrix> {
    if m > n {
        return usage(format!("hash output length {m} exceeds input length {n}"));
    }
    if m == 0 {
        return Ok(FqMatrix::zeros(n, 0));
    }
    loop {
        let cand = match kind {
            HashFamilyKind::ToeplitzBased => toeplitz(n, m, &random_entries(f, n + m - 1, rng)),
            HashFamilyKind::AllSurjective => FqMatrix { rows: n, cols: m, data: random_entries(f, n * m, rng) },
        };
        if cand.rank(f) == m {
            return Ok(cand);
        }
    }
}

/// Every rank-`m` n×m matrix over the field.
pub fn enumerate_family(f: &Gf, kind: HashFamilyKind, n: usize, m: usize) -> Result<Vec<FqMatrix>> {
    if m > n {
        return usage(format!("hash output length {m} exceeds input length {n}"));
    }
    let free = match kind {
        HashFamilyKind::ToeplitzBased if m > 0 => n + m - 1,
        HashFamilyKind::ToeplitzBased => 0,
        HashFamilyKind::AllSurjective => n * m,
    };
    let total = (f.q() as f64).powi(free as i32);
    if total > MAX_FAMILY as f64 {
        return capacity(format!("family has {total} candidates, limit {MAX_FAMILY}"));
    }
    let total = total as usize;
    let mut out = Vec::new();
    for code in 0..total {
        let mut x = code;
        let digits: Vec<u32> = (0..free)
            .map(|_| {
                let d = (x % f.q()) as u32;
                x /= f.q();
                d
            })
            .collect();
        let cand = match kind {
            HashFamilyKind::ToeplitzBased if m > 0 => toeplitz(n, m, &digits),
            HashFamilyKind::ToeplitzBased => FqMatrix::zeros(n, 0),
            HashFamilyKind::AllSurjective => FqMatrix { rows: n, cols: m, data: digits },
        };
        if cand.rank(f) == m {
            out.push(cand);
        }
    }
    Ok(out)
}

/// Counts, for every pair `x ≠ y`, how many members collide, using
/// `x·M = y·M ⇔ (x−y)·M = 0`: the count depends only on the nonzero difference.
pub fn collision_report(f: &Gf, members: &[FqMatrix]) -> Result<CollisionReport> {
    let Some(first) = members.first() else {
        return usage("empty hash family");
    };
    let (n, m) = (first.rows, first.cols);
    let inputs = (f.q() as f64).powi(n as i32);
    if inputs * members.len() as f64 > (MAX_FAMILY as f64) * 16.0 {
        return capacity("too many (input, member) pairs to enumerate");
    }
    let mut max_collisions = 0;
    for idx in 1..inputs as usize {
        let diff = f.basis_label(idx, n);
        let count = members
            .iter()
            .filter(|h| h.left_mul_vec(f, &diff).iter().all(|&v| v == 0))
            .count();
        max_collisions = max_collisions.max(count);
    }
    let bound = members.len() as f64 / (f.q() as f64).powi(m as i32);
    Ok(CollisionReport {
        family_size: members.len(),
        max_collisions,
        bound,
        passes: max_collisions as f64 <= bound + 1e-12,
    })
}

pub fn verify_two_universal(spec: &HashFamilySpec) -> Result<CollisionReport> {
    let f = Gf::new(spec.field.clone())?;
    let members = enumerate_family(&f, spec.kind, spec.n, spec.m)?;
    collision_report(&f, &members)
}

/// Completes `H` to an invertible `(H H̄)` by adding unit vectors greedily in
/// index order, then reads `(Ḡ G)` off the inverse transpose.
pub fn build_dual_quadruple(f: &Gf, h: &FqMatrix) -> Result<DualQuadruple> {
    let (n, m) = (h.rows, h.cols);
    if m > n {
        return usage("hash matrix has more columns than rows");
    }
    if h.rank(f) != m {
        return domain("hash matrix is not surjective");
    }
    let mut full = h.clone();
    for k in 0..n {
        if full.cols == n {
            break;
        }
        let mut unit = FqMatrix::zeros(n, 1);
        unit.set(k, 0, 1);
        let cand = full.hcat(&unit)?;
        if cand.rank(f) == cand.cols {
            full = cand;
        }
    }
    let hbar = full.col_range(m, n);
    let dual = full.inverse(f)?.transpose();
    let gbar = dual.col_range(0, m);
    let g = dual.col_range(m, n);
    Ok(DualQuadruple { g, gbar, h: h.clone(), hbar })
}

impl DualQuadruple {
    /// Checks the four block identities exactly over the field.
    pub fn check(&self, f: &Gf) -> Result<bool> {
        let n = self.h.rows;
        let m = self.h.cols;
        let is_zero = |a: &FqMatrix| a.data.iter().all(|&v| v == 0);
        let gt_h = self.g.transpose().mul(f, &self.h)?;
        let gbt_h = self.gbar.transpose().mul(f, &self.h)?;
        let gt_hb = self.g.transpose().mul(f, &self.hbar)?;
        let gbt_hb = self.gbar.transpose().mul(f, &self.hbar)?;
        Ok(is_zero(&gt_h)
            && gbt_h == FqMatrix::identity(m)
            && gt_hb == FqMatrix::identity(n - m)
            && is_zero(&gbt_hb))
    }

    /// `(H H̄)`.
    pub fn forward(&self) -> FqMatrix {
        self.h.hcat(&self.hbar).expect("row counts agree")
    }

    /// `(Ḡ G)`.
    pub fn dual(&self) -> FqMatrix {
        self.gbar.hcat(&self.g).expect("row counts agree")
    }
}

/// Permutation unitary `|z⟩ ↦ |z(H H̄)⟩`.
pub fn hashing_unitary(f: &Gf, quad: &DualQuadruple) -> Result<CMat> {
    let n = quad.h.rows;
    let dim = (f.q() as f64).powi(n as i32);
    if dim > MAX_UNITARY_DIM as f64 {
        return capacity(format!("U(H) would be {dim}-dimensional"));
    }
    Ok(f.permutation_unitary(&quad.forward()))
}
