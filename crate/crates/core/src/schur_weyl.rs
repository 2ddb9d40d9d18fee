//! Young diagrams, isotypic projectors of the (SU(d), S_n) action on
//! `(C^d)^{⊗n}`, universal symmetric states and type-class utilities.
//!
//! Projectors are built by averaging permutation operators with symmetric
//! group characters, so everything here is exact up to floating-point
//! rounding but only practical for small `n`.

use crate::error::{capacity, usage, Result};
use crate::linalg::{cr, kron_all, CMat};
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::sync::{Arc, OnceLock, RwLock};

/// Largest `d^n` for which projectors are materialised.
pub const MAX_DIM: usize = 4096;
/// Largest `n` (the sum over S_n has `n!` terms).
pub const MAX_N: usize = 8;

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct YoungDiagram {
    pub rows: Vec<usize>,
}

impl YoungDiagram {
    pub fn size(&self) -> usize {
        self.rows.iter().sum()
    }

    /// Dimension of the S_n irrep, by the hook length formula.
    pub fn dim_symmetric(&self) -> u64 {
        let n = self.size();
        let mut num: f64 = (1..=n).map(|k| k as f64).product();
        for (i, &len) in self.rows.iter().enumerate() {
            for j in 0..len {
                let arm = len - j - 1;
                let leg = self.rows[i + 1..].iter().filter(|&&r| r > j).count();
                num /= (arm + leg + 1) as f64;
            }
        }
        num.round() as u64
    }

    /// Dimension of the SU(d) irrep, `Π_{i<j} (λ_i − λ_j + j − i)/(j − i)`.
    pub fn dim_unitary(&self, d: usize) -> u64 {
        let mut lam = self.rows.clone();
        lam.resize(d.max(lam.len()), 0);
        let mut v = 1.0f64;
        for i in 0..d {
            for j in i + 1..d {
                v *= (lam[i] as f64 - lam[j] as f64 + (j - i) as f64) / (j - i) as f64;
            }
        }
        v.round() as u64
    }
}

/// All partitions of `n` with at most `d` rows, in reverse lexicographic order.
pub fn enumerate_young(n: usize, d: usize) -> Vec<YoungDiagram> {
    fn rec(rem: usize, max: usize, rows_left: usize, cur: &mut Vec<usize>, out: &mut Vec<YoungDiagram>) {
        if rem == 0 {
            out.push(YoungDiagram { rows: cur.clone() });
            return;
        }
        if rows_left == 0 {
            return;
        }
        for first in (1..=max.min(rem)).rev() {
            cur.push(first);
            rec(rem - first, first, rows_left - 1, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    if n == 0 {
        return vec![YoungDiagram { rows: vec![] }];
    }
    rec(n, n, d, &mut Vec::new(), &mut out);
    out
}

/// Irreducible S_n character `χ_λ(μ)` by the Murnaghan–Nakayama rule on beta-sets.
pub fn sn_character(lambda: &[usize], cycle_type: &[usize]) -> i64 {
    fn rec(beta: &mut Vec<i64>, cycles: &[usize], memo: &mut HashMap<(Vec<i64>, usize), i64>) -> i64 {
        let Some((&k, rest)) = cycles.split_first() else {
            return 1;
        };
        let key = (beta.clone(), cycles.len());
        if let Some(&v) = memo.get(&key) {
            return v;
        }
        let k = k as i64;
        let mut total = 0;
        for idx in 0..beta.len() {
            let b = beta[idx];
            let nb = b - k;
            if nb < 0 || beta.contains(&nb) {
                continue;
            }
            let between = beta.iter().filter(|&&x| x > nb && x < b).count();
            let sign = if between % 2 == 0 { 1 } else { -1 };
            beta[idx] = nb;
            total += sign * rec(beta, rest, memo);
            beta[idx] = b;
        }
        memo.insert(key, total);
        total
    }
    let l = lambda.len() as i64;
    let mut beta: Vec<i64> = lambda.iter().enumerate().map(|(i, &r)| r as i64 + l - 1 - i as i64).collect();
    rec(&mut beta, cycle_type, &mut HashMap::new())
}

/// All permutations of `0..n` (Heap's algorithm order is not needed; lexicographic).
pub fn permutations(n: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur: Vec<usize> = (0..n).collect();
    loop {
        out.push(cur.clone());
        // next lexicographic permutation
        let Some(i) = (0..n.saturating_sub(1)).rev().find(|&i| cur[i] < cur[i + 1]) else {
            break;
        };
        let j = (i + 1..n).rev().find(|&j| cur[j] > cur[i]).unwrap();
        cur.swap(i, j);
        cur[i + 1..].reverse();
    }
    out
}

pub fn cycle_type(s: &[usize]) -> Vec<usize> {
    let mut seen = vec![false; s.len()];
    let mut out = Vec::new();
    for start in 0..s.len() {
        if seen[start] {
            continue;
        }
        let mut len = 0;
        let mut k = start;
        while !seen[k] {
            seen[k] = true;
            k = s[k];
            len += 1;
        }
        out.push(len);
    }
    out.sort_unstable_by(|a, b| b.cmp(a));
    out
}

/// Index map of `V_s`: tensor factor `k` moves to position `s[k]`.
pub fn permute_index(idx: usize, s: &[usize], d: usize) -> usize {
    let n = s.len();
    let mut digits = vec![0usize; n];
    let mut x = idx;
    for k in (0..n).rev() {
        digits[k] = x % d;
        x /= d;
    }
    let mut out = vec![0usize; n];
    for k in 0..n {
        out[s[k]] = digits[k];
    }
    out.iter().fold(0, |acc, &v| acc * d + v)
}

/// Dense permutation operator `V_s` on `(C^d)^{⊗n}`.
pub fn permutation_operator(s: &[usize], d: usize) -> CMat {
    let dim = d.pow(s.len() as u32);
    let mut m = CMat::zeros(dim, dim);
    for idx in 0..dim {
        m[(permute_index(idx, s, d), idx)] = cr(1.0);
    }
    m
}

#[derive(Clone, Debug)]
pub struct IsotypicBlock {
    pub diagram: YoungDiagram,
    pub projector: CMat,
    pub dim_u: u64,
    pub dim_v: u64,
}

fn check_size(n: usize, d: usize) -> Result<()> {
    if n == 0 || d == 0 {
        return usage("n and d must be positive");
    }
    if n > MAX_N || (d as f64).powi(n as i32) > MAX_DIM as f64 {
        return capacity(format!("Schur-Weyl blocks for n={n}, d={d} exceed the brute-force limit"));
    }
    Ok(())
}

fn compute_blocks(n: usize, d: usize) -> Vec<IsotypicBlock> {
    let dim = d.pow(n as u32);
    let perms = permutations(n);
    let fact = perms.len() as f64;
    enumerate_young(n, d)
        .into_iter()
        .map(|diagram| {
            let dim_v = diagram.dim_symmetric();
            let mut chars: HashMap<Vec<usize>, i64> = HashMap::new();
            let mut proj = CMat::zeros(dim, dim);
            for s in &perms {
                let ct = cycle_type(s);
                let chi = *chars.entry(ct.clone()).or_insert_with(|| sn_character(&diagram.rows, &ct));
                if chi == 0 {
                    continue;
                }
                let w = dim_v as f64 * chi as f64 / fact;
                for idx in 0..dim {
                    proj[(permute_index(idx, s, d), idx)] += cr(w);
                }
            }
            let dim_u = diagram.dim_unitary(d);
            IsotypicBlock { diagram, projector: proj, dim_u, dim_v }
        })
        .collect()
}

type BlockCache = RwLock<HashMap<(usize, usize), Arc<Vec<IsotypicBlock>>>>;

fn cache() -> &'static BlockCache {
    static CACHE: OnceLock<BlockCache> = OnceLock::new();
    CACHE.get_or_init(|| RwLock::new(HashMap::new()))
}

/// Isotypic blocks for `(n, d)`, memoised process-wide.
pub fn build_isotypic_blocks(n: usize, d: usize) -> Result<Arc<Vec<IsotypicBlock>>> {
    check_size(n, d)?;
    if let Some(b) = cache().read().expect("cache poisoned").get(&(n, d)) {
        return Ok(b.clone());
    }
    let blocks = Arc::new(compute_blocks(n, d));
    let mut w = cache().write().expect("cache poisoned");
    Ok(w.entry((n, d)).or_insert(blocks).clone())
}

/// `σ_{U,n} = |Y_n^d|^{-1} Σ_λ Π_λ / Tr Π_λ`; `σ_{U,0}` is the scalar 1.
pub fn universal_symmetric_state(n: usize, d: usize) -> Result<CMat> {
    if n == 0 {
        return Ok(CMat::from_element(1, 1, cr(1.0)));
    }
    let blocks = build_isotypic_blocks(n, d)?;
    let dim = d.pow(n as u32);
    let mut s = CMat::zeros(dim, dim);
    let k = blocks.len() as f64;
    for b in blocks.iter() {
        let tr = (b.dim_u * b.dim_v) as f64;
        s += &b.projector * cr(1.0 / (k * tr));
    }
    Ok(s)
}

/// Polynomial factor `(n+1)^{(d+2)(d-1)/2}` bounding `ρ^{⊗n}` by `σ_{U,n}`.
pub fn domination_factor(n: usize, d: usize) -> f64 {
    ((n + 1) as f64).powf(((d + 2) * (d - 1)) as f64 / 2.0)
}

/// Symbol counts of `x` over the alphabet `0..k`.
pub fn type_of(x: &[usize], k: usize) -> Vec<usize> {
    let mut counts = vec![0; k];
    for &s in x {
        counts[s] += 1;
    }
    counts
}

/// All count vectors of length `k` summing to `n`.
pub fn enumerate_types(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn rec(rem: usize, slots: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if slots == 1 {
            cur.push(rem);
            out.push(cur.clone());
            cur.pop();
            return;
        }
        for v in 0..=rem {
            cur.push(v);
            rec(rem - v, slots - 1, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    if k > 0 {
        rec(n, k, &mut Vec::new(), &mut out);
    }
    out
}

/// Multinomial coefficient `n! / Π m_i!`.
pub fn class_size(counts: &[usize]) -> f64 {
    let n: usize = counts.iter().sum();
    let lf = |m: usize| (1..=m).map(|v| (v as f64).ln()).sum::<f64>();
    (lf(n) - counts.iter().map(|&m| lf(m)).sum::<f64>()).exp().round()
}

/// Empirical entropy `H(P_x)` in bits.
pub fn empirical_entropy(x: &[usize], k: usize) -> f64 {
    let n = x.len() as f64;
    type_of(x, k)
        .iter()
        .filter(|&&m| m > 0)
        .map(|&m| {
            let p = m as f64 / n;
            -p * p.log2()
        })
        .sum()
}

/// Stable sorting permutation: `s[k]` is the position of `x[k]` in the sorted string.
pub fn sorting_permutation(x: &[usize]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..x.len()).collect();
    order.sort_by_key(|&k| x[k]);
    let mut s = vec![0; x.len()];
    for (pos, &k) in order.iter().enumerate() {
        s[k] = pos;
    }
    s
}

/// `σ_x = V_{s_x}^{-1} (σ_{U,m_1} ⊗ … ⊗ σ_{U,m_k}) V_{s_x}` over `(C^d)^{⊗n}`.
pub fn sigma_for_string(x: &[usize], d: usize) -> Result<CMat> {
    let n = x.len();
    if n == 0 {
        return usage("empty string");
    }
    check_size(n, d)?;
    let k = x.iter().max().copied().unwrap_or(0) + 1;
    let factors = type_of(x, k)
        .into_iter()
        .filter(|&m| m > 0)
        .map(|m| universal_symmetric_state(m, d))
        .collect::<Result<Vec<_>>>()?;
    let sorted = kron_all(&factors);
    let s = sorting_permutation(x);
    let dim = sorted.nrows();
    // V^{-1} A V has entries A[perm(i), perm(j)].
    Ok(CMat::from_fn(dim, dim, |i, j| sorted[(permute_index(i, &s, d), permute_index(j, &s, d))]))
}

/// Uniform mixture of `σ_x` over the type class with the given counts.
pub fn sigma_for_type(counts: &[usize], d: usize) -> Result<CMat> {
    let n: usize = counts.iter().sum();
    check_size(n, d)?;
    let k = counts.len();
    let dim = d.pow(n as u32);
    let mut acc = CMat::zeros(dim, dim);
    let mut members = 0usize;
    for code in 0..k.pow(n as u32) {
        let mut v = code;
        let x: Vec<usize> = (0..n)
            .map(|_| {
                let s = v % k;
                v /= k;
                s
            })
            .collect();
        if type_of(&x, k) == counts {
            acc += sigma_for_string(&x, d)?;
            members += 1;
        }
    }
    Ok(acc / cr(members as f64))
}

#[derive(Serialize)]
pub struct BlockSummary {
    pub rows: Vec<usize>,
    pub dim_u: u64,
    pub dim_v: u64,
}

/// Block dimensions as a JSON-serialisable list.
pub fn block_summary(n: usize, d: usize) -> Result<Vec<BlockSummary>> {
    Ok(build_isotypic_blocks(n, d)?
        .iter()
        .map(|b| BlockSummary { rows: b.diagram.rows.clone(), dim_u: b.dim_u, dim_v: b.dim_v })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{identity, max_abs_diff, trace_re};

    #[test]
    fn young_small() {
        let rows = |n, d| enumerate_young(n, d).into_iter().map(|y| y.rows).collect::<Vec<_>>();
        assert_eq!(rows(2, 2), vec![vec![2], vec![1, 1]]);
        assert_eq!(rows(3, 2), vec![vec![3], vec![2, 1]]);
        assert_eq!(enumerate_young(4, 4).len(), 5);
    }

    #[test]
    fn characters_s3() {
        // rows: trivial, standard, sign; columns: e, transposition, 3-cycle
        assert_eq!(sn_character(&[3], &[1, 1, 1]), 1);
        assert_eq!(sn_character(&[2, 1], &[1, 1, 1]), 2);
        assert_eq!(sn_character(&[2, 1], &[2, 1]), 0);
        assert_eq!(sn_character(&[2, 1], &[3]), -1);
        assert_eq!(sn_character(&[1, 1, 1], &[2, 1]), -1);
        assert_eq!(sn_character(&[2, 2], &[2, 2]), 2);
    }

    #[test]
    fn hook_and_weyl_dimensions() {
        let y = YoungDiagram { rows: vec![2, 1] };
        assert_eq!(y.dim_symmetric(), 2);
        assert_eq!(y.dim_unitary(2), 2);
        assert_eq!(y.dim_unitary(3), 8);
        assert_eq!(YoungDiagram { rows: vec![2] }.dim_unitary(2), 3);
    }

    #[test]
    fn n2_blocks_match_swap() {
        let blocks = build_isotypic_blocks(2, 2).unwrap();
        assert_eq!(blocks.len(), 2);
        assert_eq!((blocks[0].dim_u, blocks[0].dim_v), (3, 1));
        assert_eq!((blocks[1].dim_u, blocks[1].dim_v), (1, 1));
        let swap = permutation_operator(&[1, 0], 2);
        let sym = (identity(4) + &swap) * cr(0.5);
        assert!(max_abs_diff(&blocks[0].projector, &sym) < 1e-14);
        assert!((trace_re(&blocks[1].projector) - 1.0).abs() < 1e-14);
    }

    #[test]
    fn n1_single_block() {
        let blocks = build_isotypic_blocks(1, 3).unwrap();
        assert_eq!(blocks.len(), 1);
        assert!(max_abs_diff(&blocks[0].projector, &identity(3)) < 1e-14);
        let s = universal_symmetric_state(1, 2).unwrap();
        assert!(max_abs_diff(&s, &(identity(2) * cr(0.5))) < 1e-14);
    }

    #[test]
    fn n3_completeness() {
        let blocks = build_isotypic_blocks(3, 2).unwrap();
        let total: f64 = blocks.iter().map(|b| trace_re(&b.projector)).sum();
        assert!((total - 8.0).abs() < 1e-12);
    }

    #[test]
    fn oversized_is_capacity_error() {
        assert!(matches!(build_isotypic_blocks(13, 2), Err(crate::Error::Capacity(_))));
    }

    #[test]
    fn sigma_string_examples() {
        let s = sigma_for_string(&[0, 0, 0], 2).unwrap();
        assert!(max_abs_diff(&s, &universal_symmetric_state(3, 2).unwrap()) < 1e-14);
        let s = sigma_for_string(&[0, 1], 2).unwrap();
        assert!(max_abs_diff(&s, &(identity(4) * cr(0.25))) < 1e-14);
    }

    #[test]
    fn types() {
        let x = [0, 1, 0, 1];
        assert_eq!(type_of(&x, 2), vec![2, 2]);
        assert!((empirical_entropy(&x, 2) - 1.0).abs() < 1e-15);
        assert_eq!(enumerate_types(2, 2).len(), 3);
        assert_eq!(class_size(&[2, 1]), 3.0);
        assert_eq!(sorting_permutation(&[1, 0, 0]), vec![2, 0, 1]);
    }
}
