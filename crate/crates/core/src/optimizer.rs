//! Optimisation over density operators.
//!
//! * Divided differences and Fréchet derivatives of spectral functions.
//! * The reformulated Rényi objective `φ(σ)` with its analytic gradient.
//! * A primal log-barrier interior-point method, used both for linear SDPs
//!   (with a dual certificate) and for smooth concave objectives.
//! * Sequential linearisation of `φ` with certified upper bounds.
//! * Joint minimisation of `D(p ‖ q(ρ))` over a Sanov-type halfspace and an
//!   affine set of density operators.

use crate::error::{domain, usage, Error, Result};
use crate::linalg::{
    cr, dagger, eigh, from_eig, herm_to_vec, hermitize, identity, inner, max_eig, min_eig, vec_to_herm, CMat, LN2,
};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

// ---------------------------------------------------------------------------
// Spectral calculus

/// First divided differences `f^{[1]}(λ_i, λ_j)`.
pub fn divided_difference_matrix(f: impl Fn(f64) -> f64, fp: impl Fn(f64) -> f64, lambda: &[f64]) -> DMatrix<f64> {
    let n = lambda.len();
    DMatrix::from_fn(n, n, |i, j| {
        let (a, b) = (lambda[i], lambda[j]);
        if (a - b).abs() < 1e-8 * (1.0 + a.abs().max(b.abs())) {
            fp(0.5 * (a + b))
        } else {
            (f(a) - f(b)) / (a - b)
        }
    })
}

/// `U [F ⊙ (U† C U)] U†`: the Fréchet derivative of a spectral function at
/// `U diag(λ) U†` in direction `C`, given its divided-difference matrix `F`.
pub fn frechet(u: &CMat, dd: &DMatrix<f64>, c: &CMat) -> CMat {
    let mut inner_m = dagger(u) * c * u;
    for i in 0..inner_m.nrows() {
        for j in 0..inner_m.ncols() {
            inner_m[(i, j)] *= dd[(i, j)];
        }
    }
    u * inner_m * dagger(u)
}

// ---------------------------------------------------------------------------
// Channel data and the Rényi objective

/// Completely positive map `ρ ↦ Σ_k K_k ρ K_k†`.
#[derive(Clone, Debug)]
pub struct KrausMap {
    pub ops: Vec<CMat>,
}

impl KrausMap {
    pub fn identity(d: usize) -> Self {
        Self { ops: vec![identity(d)] }
    }

    pub fn apply(&self, rho: &CMat) -> CMat {
        let mut out = CMat::zeros(self.ops[0].nrows(), self.ops[0].nrows());
        for k in &self.ops {
            out += k * rho * dagger(k);
        }
        hermitize(&out)
    }

    pub fn adjoint(&self, g: &CMat) -> CMat {
        let mut out = CMat::zeros(self.ops[0].ncols(), self.ops[0].ncols());
        for k in &self.ops {
            out += dagger(k) * g * k;
        }
        hermitize(&out)
    }

    pub fn in_dim(&self) -> usize {
        self.ops[0].ncols()
    }
}

/// Sifting map and the phase-twirl unitaries `{Z'(x)}` that define the objective.
#[derive(Clone, Debug)]
pub struct ChannelData {
    pub sift: KrausMap,
    pub twirl: Vec<CMat>,
}

impl ChannelData {
    /// `𝒫(X) = |𝒳|^{-1} Σ_x Z'(x) X Z'(x)†`.
    pub fn twirl(&self, m: &CMat) -> CMat {
        let mut out = CMat::zeros(m.nrows(), m.ncols());
        for z in &self.twirl {
            out += z * m * dagger(z);
        }
        out / cr(self.twirl.len() as f64)
    }

    pub fn log_alphabet(&self) -> f64 {
        (self.twirl.len() as f64).log2()
    }
}

/// Value and Hilbert–Schmidt gradient of
/// `φ(σ) = log|𝒳| + ((1−α)/α) log Tr[(𝒫(σ^{1−α}))^{1/(1−α)}]`.
pub fn renyi_objective_and_gradient(sigma: &CMat, alpha: f64, data: &ChannelData) -> Result<(f64, CMat)> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return usage("objective needs α in (0,1)");
    }
    let beta = 1.0 - alpha;
    let (vals, u) = eigh(sigma);
    if vals[0] <= 0.0 {
        return domain(format!("linearisation point is not strictly positive (min eigenvalue {:e})", vals[0]));
    }
    let y = from_eig(&vals.iter().map(|v| v.powf(beta)).collect::<Vec<_>>(), &u);
    let w = hermitize(&data.twirl(&y));
    let (wv, wu) = eigh(&w);
    let wv: Vec<f64> = wv.iter().map(|v| v.max(0.0)).collect();
    let g: f64 = wv.iter().map(|v| v.powf(1.0 / beta)).sum();
    let value = data.log_alphabet() + (beta / alpha) * g.log2();
    let w_pow = from_eig(&wv.iter().map(|v| v.powf(alpha / beta)).collect::<Vec<_>>(), &wu);
    let direction = data.twirl(&w_pow);
    let dd = divided_difference_matrix(|t| t.powf(beta), |t| beta * t.powf(beta - 1.0), &vals);
    let grad = frechet(&u, &dd, &direction) / cr(alpha * LN2 * g);
    Ok((value, hermitize(&grad)))
}

/// Concave function of `σ` that can be linearised.
pub trait SigmaObjective: Sync {
    fn value_grad(&self, sigma: &CMat) -> Result<(f64, CMat)>;
    /// Directional derivative of the gradient, `D∇φ(σ)[dσ]`, when available.
    fn hessian_apply(&self, _sigma: &CMat, _dsigma: &CMat) -> Option<Result<CMat>> {
        None
    }
}

/// `φ(σ) + offset` for fixed `α`.
#[derive(Clone, Debug)]
pub struct RenyiObjective {
    pub alpha: f64,
    pub data: ChannelData,
    pub offset: f64,
}

impl SigmaObjective for RenyiObjective {
    fn value_grad(&self, sigma: &CMat) -> Result<(f64, CMat)> {
        let (v, g) = renyi_objective_and_gradient(sigma, self.alpha, &self.data)?;
        Ok((v + self.offset, g))
    }
}

/// `⟨C, σ⟩ + c₀`, useful to exercise the linearisation loop.
#[derive(Clone, Debug)]
pub struct LinearSigma {
    pub c: CMat,
    pub offset: f64,
}

impl SigmaObjective for LinearSigma {
    fn value_grad(&self, sigma: &CMat) -> Result<(f64, CMat)> {
        Ok((inner(&self.c, sigma) + self.offset, self.c.clone()))
    }
}

/// `φ(σ) + ⟨∇φ(σ), 𝒮(ρ) − σ⟩`, an upper bound on `φ(𝒮(ρ))` by concavity.
pub fn linearized_upper_bound(rho: &CMat, sigma: &CMat, obj: &dyn SigmaObjective, sift: &KrausMap) -> Result<f64> {
    let (v, g) = obj.value_grad(sigma)?;
    Ok(v + inner(&g, &(sift.apply(rho) - sigma)))
}

// ---------------------------------------------------------------------------
// Constraints and problems

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Relation {
    Le,
    Eq,
    Ge,
}

#[derive(Clone, Debug)]
pub struct AffineConstraint {
    pub operator: CMat,
    pub relation: Relation,
    pub bound: f64,
}

impl AffineConstraint {
    pub fn new(operator: CMat, relation: Relation, bound: f64) -> Self {
        Self { operator, relation, bound }
    }

    pub fn violation(&self, rho: &CMat) -> f64 {
        let v = inner(&self.operator, rho);
        match self.relation {
            Relation::Le => (v - self.bound).max(0.0),
            Relation::Ge => (self.bound - v).max(0.0),
            Relation::Eq => (v - self.bound).abs(),
        }
    }
}

/// Maximise `⟨C, ρ⟩ + c₀` over unit-trace PSD `ρ` with affine constraints.
#[derive(Clone, Debug)]
pub struct LinearSdpProblem {
    pub objective: CMat,
    pub offset: f64,
    pub constraints: Vec<AffineConstraint>,
    pub dim: usize,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct SolverConfig {
    /// Target duality gap.
    pub gap_tol: f64,
    /// Inequality bounds are loosened by this amount so that faces of the PSD
    /// cone keep a nonempty interior. Loosening only enlarges the feasible set.
    pub relax: f64,
    pub max_newton: usize,
    pub barrier_growth: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self { gap_tol: 1e-8, relax: 1e-10, max_newton: 400, barrier_growth: 20.0 }
    }
}

#[derive(Clone, Debug)]
pub struct SolveReport {
    pub rho: CMat,
    pub value: f64,
    /// Certified upper bound on the optimum (dual objective for linear problems).
    pub upper_bound: f64,
    pub duality_gap_bound: f64,
    pub iterations: usize,
    /// Largest `y_i s_i` over the inequality constraints.
    pub complementarity: f64,
}

pub const MAX_SDP_DIM: usize = 16;

/// Affine parametrisation `ρ = vec_to_herm(x₀ + N z)` of the equality-constrained
/// slice, with inequalities written as `a_i · z ≤ c_i`.
struct Reduced {
    d: usize,
    x0: DVector<f64>,
    null: DMatrix<f64>,
    m0: CMat,
    mk: Vec<CMat>,
    ineq_a: DMatrix<f64>,
    ineq_c: DVector<f64>,
    /// For each inequality row: index into the user constraint list and orientation sign.
    ineq_src: Vec<(usize, f64)>,
    eq_src: Vec<usize>,
}

impl Reduced {
    fn build(dim: usize, constraints: &[AffineConstraint], relax: f64) -> Result<Self> {
        if dim == 0 || dim > MAX_SDP_DIM {
            return usage(format!("SDP dimension {dim} outside 1..={MAX_SDP_DIM}"));
        }
        let np = dim * dim;
        let mut eq_rows: Vec<DVector<f64>> = vec![DVector::from_vec(herm_to_vec(&identity(dim)))];
        let mut eq_rhs = vec![1.0];
        let mut eq_src = Vec::new();
        let mut ineq_rows = Vec::new();
        let mut ineq_rhs = Vec::new();
        let mut ineq_src = Vec::new();
        for (i, c) in constraints.iter().enumerate() {
            if c.operator.nrows() != dim {
                return usage(format!("constraint {i} has the wrong dimension"));
            }
            let a = DVector::from_vec(herm_to_vec(&hermitize(&c.operator)));
            match c.relation {
                Relation::Eq => {
                    eq_rows.push(a);
                    eq_rhs.push(c.bound);
                    eq_src.push(i);
                }
                Relation::Le => {
                    ineq_rows.push(a);
                    ineq_rhs.push(c.bound + relax);
                    ineq_src.push((i, 1.0));
                }
                Relation::Ge => {
                    ineq_rows.push(-a);
                    ineq_rhs.push(-c.bound + relax);
                    ineq_src.push((i, -1.0));
                }
            }
        }
        let e = DMatrix::from_fn(eq_rows.len(), np, |r, k| eq_rows[r][k]);
        let rhs = DVector::from_vec(eq_rhs);
        // Minimum-norm particular solution and null space from the SVD of E.
        let svd = e.clone().svd(true, true);
        let vt = svd.v_t.clone().unwrap();
        let smax = svd.singular_values.max();
        let rank = svd.singular_values.iter().filter(|&&s| s > 1e-10 * smax.max(1.0)).count();
        let x0 = svd.solve(&rhs, 1e-10 * smax.max(1.0)).map_err(|e| Error::Invariant(e.to_string()))?;
        let resid = (&e * &x0 - &rhs).amax();
        if resid > 1e-9 {
            return Err(Error::Infeasible {
                index: eq_src.first().copied(),
                msg: "equality constraints are inconsistent".into(),
            });
        }
        // rows of V^T beyond the rank span the null space
        let mut null_cols = Vec::new();
        for r in rank..np {
            if r < vt.nrows() {
                null_cols.push(vt.row(r).transpose());
            }
        }
        if vt.nrows() < np {
            // complete with an orthonormal complement of the row space
            let mut basis: Vec<DVector<f64>> = (0..rank).map(|r| vt.row(r).transpose()).collect();
            basis.extend(null_cols.iter().cloned());
            for k in 0..np {
                if basis.len() == np {
                    break;
                }
                let mut v = DVector::from_fn(np, |i, _| if i == k { 1.0 } else { 0.0 });
                for b in &basis {
                    let p = b.dot(&v);
                    v -= b * p;
                }
                if v.norm() > 1e-8 {
                    v /= v.norm();
                    basis.push(v.clone());
                    null_cols.push(v);
                }
            }
        }
        let null = if null_cols.is_empty() {
            DMatrix::zeros(np, 0)
        } else {
            DMatrix::from_columns(&null_cols)
        };
        let m0 = vec_to_herm(x0.as_slice(), dim);
        let mk = (0..null.ncols()).map(|k| vec_to_herm(null.column(k).as_slice(), dim)).collect();
        let ni = ineq_rows.len();
        let ineq_a = DMatrix::from_fn(ni, null.ncols(), |r, k| ineq_rows[r].dot(&null.column(k)));
        let ineq_c = DVector::from_fn(ni, |r, _| ineq_rhs[r] - ineq_rows[r].dot(&x0));
        Ok(Self { d: dim, x0, null, m0, mk, ineq_a, ineq_c, ineq_src, eq_src })
    }

    fn rho(&self, z: &DVector<f64>) -> CMat {
        let x = &self.x0 + &self.null * z;
        vec_to_herm(x.as_slice(), self.d)
    }

    fn nz(&self) -> usize {
        self.null.ncols()
    }
}

/// Objective for the barrier method in reduced coordinates.
trait ReducedObjective {
    fn eval(&self, z: &DVector<f64>, need_hess: bool) -> Result<(f64, DVector<f64>, Option<DMatrix<f64>>)>;
}

/// Generic log-barrier problem: maximise `f(y)` with `M(y) = M₀ + Σ y_k M_k ≻ 0`
/// and `c − A y > 0`.
struct Barrier<'a> {
    m0: &'a CMat,
    mk: &'a [CMat],
    /// extra coefficient on the identity, used by phase I (`M(y) − s I`)
    shift_index: Option<usize>,
    a: &'a DMatrix<f64>,
    c: &'a DVector<f64>,
    /// phase-I subtracts `s` from every slack too
    slack_shift: Option<usize>,
}

impl<'a> Barrier<'a> {
    fn matrix(&self, y: &DVector<f64>) -> CMat {
        let mut m = self.m0.clone();
        for (k, mk) in self.mk.iter().enumerate() {
            m += mk * cr(y[k]);
        }
        if let Some(si) = self.shift_index {
            for i in 0..m.nrows() {
                m[(i, i)] -= cr(y[si]);
            }
        }
        m
    }

    fn slacks(&self, y: &DVector<f64>) -> DVector<f64> {
        let ny = self.a.ncols();
        let yy = y.rows(0, ny);
        let mut s = self.c - self.a * yy;
        if let Some(si) = self.slack_shift {
            s.add_scalar_mut(-y[si]);
        }
        s
    }

    /// `log det M + Σ log s_i` with gradient and Hessian in `y`.
    fn eval(&self, y: &DVector<f64>, need_hess: bool) -> Option<(f64, DVector<f64>, DMatrix<f64>)> {
        let m = hermitize(&self.matrix(y));
        let (vals, u) = eigh(&m);
        if vals[0] <= 0.0 {
            return None;
        }
        let s = self.slacks(y);
        if s.iter().any(|&v| v <= 0.0) {
            return None;
        }
        let n = y.len();
        let logdet: f64 = vals.iter().map(|v| v.ln()).sum();
        let inv = from_eig(&vals.iter().map(|v| 1.0 / v).collect::<Vec<_>>(), &u);
        let mut dirs: Vec<CMat> = self.mk.to_vec();
        if let Some(si) = self.shift_index {
            while dirs.len() < si {
                dirs.push(CMat::zeros(m.nrows(), m.nrows()));
            }
            dirs.insert(si, -identity(m.nrows()));
        }
        while dirs.len() < n {
            dirs.push(CMat::zeros(m.nrows(), m.nrows()));
        }
        let p: Vec<CMat> = dirs.iter().map(|d| &inv * d).collect();
        let mut g = DVector::from_fn(n, |k, _| crate::linalg::trace(&p[k]).re);
        let mut h = DMatrix::zeros(n, n);
        if need_hess {
            for k in 0..n {
                for l in k..n {
                    let mut acc = 0.0;
                    let (pk, pl) = (&p[k], &p[l]);
                    for i in 0..pk.nrows() {
                        for j in 0..pk.ncols() {
                            acc += (pk[(i, j)] * pl[(j, i)]).re;
                        }
                    }
                    h[(k, l)] = -acc;
                    h[(l, k)] = -acc;
                }
            }
        }
        let ny = self.a.ncols();
        let mut val = logdet;
        for (i, &si) in s.iter().enumerate() {
            val += si.ln();
            for k in 0..ny {
                g[k] -= self.a[(i, k)] / si;
            }
            if let Some(ss) = self.slack_shift {
                g[ss] -= 1.0 / si;
            }
            if need_hess {
                let mut row = DVector::zeros(n);
                for k in 0..ny {
                    row[k] = self.a[(i, k)];
                }
                if let Some(ss) = self.slack_shift {
                    row[ss] = 1.0;
                }
                h -= &row * row.transpose() / (si * si);
            }
        }
        Some((val, g, h))
    }

    fn count(&self) -> f64 {
        (self.m0.nrows() + self.c.len()) as f64
    }
}

struct BarrierOutcome {
    y: DVector<f64>,
    t: f64,
    newton_steps: usize,
}

/// Follows the central path of `t f(y) + barrier(y)` from a strictly feasible start.
fn barrier_path(
    bar: &Barrier,
    obj: &dyn ReducedObjective,
    y0: DVector<f64>,
    t0: f64,
    cfg: &SolverConfig,
    stop: &dyn Fn(&DVector<f64>, f64) -> bool,
) -> Result<BarrierOutcome> {
    let mut y = y0;
    let mut t = t0;
    let mut steps = 0;
    let m = bar.count();
    let mut f_mag = 0.0f64;
    loop {
        // centering
        for _ in 0..cfg.max_newton {
            let (fv, fg, fh) = obj.eval(&y, true)?;
            f_mag = fv.abs();
            let (bv, bg, bh) = bar.eval(&y, true).ok_or_else(|| Error::Invariant("iterate left the domain".into()))?;
            let g = &fg * t + &bg;
            let mut h = bh.clone();
            if let Some(fh) = fh {
                h += fh * t;
            }
            // Newton direction for a concave function: solve (−H) Δ = g
            let neg = -h;
            let dir = match neg.clone().cholesky() {
                Some(ch) => ch.solve(&g),
                None => {
                    let eig = neg.symmetric_eigen();
                    let mut d = DVector::zeros(g.len());
                    let floor = eig.eigenvalues.amax().max(1e-300) * 1e-14;
                    for k in 0..g.len() {
                        let lam = eig.eigenvalues[k].max(floor);
                        let v = eig.eigenvectors.column(k);
                        d += v * (v.dot(&g) / lam);
                    }
                    d
                }
            };
            let decrement = g.dot(&dir);
            steps += 1;
            let f0 = t * fv + bv;
            // below the last bound the change in F is lost in rounding
            if decrement / 2.0 < 1e-11f64.max(1e-15 * f0.abs()) || !decrement.is_finite() {
                break;
            }
            let mut step = 1.0;
            let mut moved = false;
            while step > 1e-14 {
                let cand = &y + &dir * step;
                if let Some((bv2, _, _)) = bar.eval(&cand, false) {
                    if let Ok((fv2, _, _)) = obj.eval(&cand, false) {
                        if t * fv2 + bv2 >= f0 + 0.2 * step * decrement {
                            y = cand;
                            moved = true;
                            break;
                        }
                    }
                }
                step *= 0.5;
            }
            if !moved {
                break;
            }
            if stop(&y, t) {
                return Ok(BarrierOutcome { y, t, newton_steps: steps });
            }
        }
        // the gap target is relative once the objective exceeds one in magnitude
        if stop(&y, t) || m / t < cfg.gap_tol * 0.1 * f_mag.max(1.0) {
            return Ok(BarrierOutcome { y, t, newton_steps: steps });
        }
        t *= cfg.barrier_growth;
    }
}

struct PhaseIObjective {
    idx: usize,
}

impl ReducedObjective for PhaseIObjective {
    fn eval(&self, z: &DVector<f64>, _h: bool) -> Result<(f64, DVector<f64>, Option<DMatrix<f64>>)> {
        let mut g = DVector::zeros(z.len());
        g[self.idx] = 1.0;
        Ok((z[self.idx], g, None))
    }
}

/// Finds a strictly feasible reduced point, or reports infeasibility.
fn phase_one(red: &Reduced, cfg: &SolverConfig) -> Result<DVector<f64>> {
    let nz = red.nz();
    let z0 = DVector::zeros(nz);
    let rho0 = red.rho(&z0);
    let lam = min_eig(&rho0);
    let slack0 = red.ineq_c.clone();
    let min_slack = slack0.iter().cloned().fold(f64::INFINITY, f64::min);
    let margin = 1e-3 / red.d as f64;
    if lam > margin && min_slack > margin {
        return Ok(z0);
    }
    let s0 = lam.min(min_slack) - 1.0;
    let mut y0 = DVector::zeros(nz + 1);
    y0[nz] = s0;
    let bar = Barrier {
        m0: &red.m0,
        mk: &red.mk,
        shift_index: Some(nz),
        a: &red.ineq_a,
        c: &red.ineq_c,
        slack_shift: Some(nz),
    };
    let obj = PhaseIObjective { idx: nz };
    // Stop once comfortably interior. Thin sets run until the shift is within
    // 0.1% of its optimum, which keeps the start near their most interior point.
    let m = bar.count();
    let stop = |y: &DVector<f64>, t: f64| (y[nz] > margin || (y[nz] > 0.0 && m / t < 1e-3 * y[nz])) && {
        let z = y.rows(0, nz).into_owned();
        min_eig(&red.rho(&z)) > 0.0
    };
    let cfg1 = SolverConfig { gap_tol: 1e-14, ..*cfg };
    let out = barrier_path(&bar, &obj, y0, 1.0, &cfg1, &stop)?;
    let z = out.y.rows(0, nz).into_owned();
    if out.y[nz] > 0.0 {
        return Ok(z);
    }
    // Infeasible: name the inequality with the smallest slack, if it is the binding one.
    let slacks = &red.ineq_c - &red.ineq_a * &z;
    let lam = min_eig(&red.rho(&z));
    let mut index = None;
    if let Some((i, &s)) = slacks.iter().enumerate().min_by(|a, b| a.1.partial_cmp(b.1).unwrap()) {
        if s <= lam + 1e-12 {
            index = Some(red.ineq_src[i].0);
        }
    }
    Err(Error::Infeasible { index, msg: format!("no strictly feasible density operator (phase-I value {:e})", out.y[nz]) })
}

struct LinearReduced<'a> {
    red: &'a Reduced,
    c: DVector<f64>,
}

impl<'a> ReducedObjective for LinearReduced<'a> {
    fn eval(&self, z: &DVector<f64>, _h: bool) -> Result<(f64, DVector<f64>, Option<DMatrix<f64>>)> {
        let _ = self.red;
        Ok((self.c.dot(z), self.c.clone(), None))
    }
}

fn check_problem(p: &LinearSdpProblem) -> Result<()> {
    if p.objective.nrows() != p.dim || p.objective.ncols() != p.dim {
        return usage("objective has the wrong dimension");
    }
    Ok(())
}

/// Weak-duality certificate for a linear SDP at the primal point `rho`:
/// `λ_max(C − Σ yA − Σ νE) + y·b + ν·e + c₀` for any `y ≥ 0` and free `ν`.
/// Starts from the barrier multipliers `y` and polishes all multipliers coordinate-wise.
fn dual_certificate(p: &LinearSdpProblem, red: &Reduced, rho: &CMat, y: &[f64], t: f64, relax: f64) -> f64 {
    let d = p.dim;
    // (operator, right-hand side, sign-constrained)
    let mut terms: Vec<(CMat, f64, bool)> = Vec::new();
    let mut mult: Vec<f64> = Vec::new();
    let mut z = hermitize(&p.objective);
    for (r, &(i, sign)) in red.ineq_src.iter().enumerate() {
        let c = &p.constraints[i];
        let op = hermitize(&c.operator) * cr(sign);
        z -= &op * cr(y[r]);
        terms.push((op, sign * c.bound + relax, true));
        mult.push(y[r]);
    }
    if !red.eq_src.is_empty() {
        // Centrality reads (Z − Σ νE − τI) ρ = −I/t; multiplying through by ρ avoids
        // inverting a nearly singular iterate.
        let ops: Vec<CMat> = red.eq_src.iter().map(|&j| hermitize(&p.constraints[j].operator)).collect();
        let flat = |m: &CMat| -> DVector<f64> {
            DVector::from_iterator(2 * d * d, m.iter().map(|c| c.re).chain(m.iter().map(|c| c.im)))
        };
        let mut cols = vec![flat(rho)];
        cols.extend(ops.iter().map(|e| flat(&(e * rho))));
        let a = DMatrix::from_columns(&cols);
        let target = flat(&(&z * rho + identity(d) / cr(t)));
        let nu: Vec<f64> = match a.svd(true, true).solve(&target, 1e-14) {
            Ok(sol) => sol.iter().skip(1).copied().collect(),
            Err(_) => vec![0.0; ops.len()],
        };
        for (k, &j) in red.eq_src.iter().enumerate() {
            terms.push((ops[k].clone(), p.constraints[j].bound, false));
            mult.push(nu[k]);
        }
    }
    let base = hermitize(&p.objective);
    let dual = |m: &[f64]| -> f64 {
        let mut zz = base.clone();
        let mut r = p.offset;
        for (k, (op, b, _)) in terms.iter().enumerate() {
            zz -= op * cr(m[k]);
            r += m[k] * b;
        }
        max_eig(&hermitize(&zz)) + r
    };
    let mut best = dual(&mult);
    let golden = 0.5 * (5f64.sqrt() - 1.0);
    for rel in [1e-1, 1e-2, 1e-3, 1e-4] {
        for k in 0..mult.len() {
            let f = |x: f64| {
                let mut v = mult.clone();
                v[k] = x;
                dual(&v)
            };
            let w = rel * (1.0 + mult[k].abs());
            let (mut lo, mut hi) = (mult[k] - w, mult[k] + w);
            if terms[k].2 {
                lo = lo.max(0.0);
            }
            for _ in 0..60 {
                let (m1, m2) = (hi - golden * (hi - lo), lo + golden * (hi - lo));
                if f(m1) <= f(m2) {
                    hi = m2;
                } else {
                    lo = m1;
                }
            }
            let x = 0.5 * (lo + hi);
            let v = f(x);
            if v < best {
                best = v;
                mult[k] = x;
            }
        }
    }
    best
}

/// Builds the reduced problem and a strictly feasible start. When equalities
/// leave no strictly feasible density operator, they are retried as relaxed
/// two-sided inequalities; the returned constraint list is the one actually used.
fn prepare(dim: usize, constraints: &[AffineConstraint], cfg: &SolverConfig) -> Result<(Reduced, DVector<f64>, Vec<AffineConstraint>)> {
    let red = Reduced::build(dim, constraints, cfg.relax)?;
    let first = match phase_one(&red, cfg) {
        Ok(z0) => return Ok((red, z0, constraints.to_vec())),
        Err(e) => e,
    };
    if !matches!(first, Error::Infeasible { .. }) || red.eq_src.is_empty() {
        return Err(first);
    }
    let split: Vec<AffineConstraint> = constraints
        .iter()
        .flat_map(|c| match c.relation {
            Relation::Eq => vec![
                AffineConstraint::new(c.operator.clone(), Relation::Le, c.bound),
                AffineConstraint::new(c.operator.clone(), Relation::Ge, c.bound),
            ],
            _ => vec![c.clone()],
        })
        .collect();
    let red2 = Reduced::build(dim, &split, cfg.relax)?;
    match phase_one(&red2, cfg) {
        Ok(z0) => Ok((red2, z0, split)),
        Err(_) => Err(first),
    }
}

/// Interior-point solve of a linear SDP with a certified upper bound.
pub fn solve_linear_sdp(p: &LinearSdpProblem, cfg: &SolverConfig) -> Result<SolveReport> {
    check_problem(p)?;
    let (red, z0, used) = prepare(p.dim, &p.constraints, cfg)?;
    let p = &LinearSdpProblem { constraints: used, ..p.clone() };
    let cvec = DVector::from_vec(herm_to_vec(&hermitize(&p.objective)));
    let cz = red.null.transpose() * &cvec;
    let obj = LinearReduced { red: &red, c: cz };
    let bar = Barrier { m0: &red.m0, mk: &red.mk, shift_index: None, a: &red.ineq_a, c: &red.ineq_c, slack_shift: None };
    let scale = crate::linalg::max_abs(&p.objective).max(1e-12);
    let out = barrier_path(&bar, &obj, z0, 1.0 / scale, cfg, &|_, _| false)?;
    let rho = red.rho(&out.y);
    let value = inner(&p.objective, &rho) + p.offset;
    let slacks = bar.slacks(&out.y);
    let y: Vec<f64> = slacks.iter().map(|s| 1.0 / (out.t * s)).collect();
    let comp = y.iter().zip(slacks.iter()).map(|(a, b)| a * b).fold(0.0, f64::max);
    let upper = dual_certificate(p, &red, &rho, &y, out.t, cfg.relax);
    Ok(SolveReport {
        rho,
        value,
        upper_bound: upper,
        duality_gap_bound: (upper - value).max(0.0),
        iterations: out.newton_steps,
        complementarity: comp,
    })
}

// ---------------------------------------------------------------------------
// Concave maximisation

/// Smooth concave function of a density operator.
pub trait ConcaveObjective: Sync {
    fn value(&self, rho: &CMat) -> Result<f64>;
    fn gradient(&self, rho: &CMat) -> Result<CMat>;
    /// For objectives `g(⟨O_1,ρ⟩, …, ⟨O_k,ρ⟩)`: the operators `O_i` and the
    /// Hessian of `g`. Without it the solver differentiates the gradient numerically.
    fn functional_hessian(&self, _rho: &CMat) -> Option<Result<(Vec<CMat>, DMatrix<f64>)>> {
        None
    }
    /// Directional derivative of the gradient, `D∇f(ρ)[dρ]`.
    fn hessian_apply(&self, _rho: &CMat, _dir: &CMat) -> Option<Result<CMat>> {
        None
    }
}

/// `φ(𝒮(ρ))` for a σ-space objective and a sifting map.
pub struct Composed<'a> {
    pub phi: &'a dyn SigmaObjective,
    pub sift: &'a KrausMap,
}

impl<'a> ConcaveObjective for Composed<'a> {
    fn value(&self, rho: &CMat) -> Result<f64> {
        Ok(self.phi.value_grad(&self.sift.apply(rho))?.0)
    }

    fn gradient(&self, rho: &CMat) -> Result<CMat> {
        Ok(self.sift.adjoint(&self.phi.value_grad(&self.sift.apply(rho))?.1))
    }

    fn hessian_apply(&self, rho: &CMat, dir: &CMat) -> Option<Result<CMat>> {
        let h = self.phi.hessian_apply(&self.sift.apply(rho), &self.sift.apply(dir))?;
        Some(h.map(|m| self.sift.adjoint(&m)))
    }
}

struct ConcaveReduced<'a> {
    red: &'a Reduced,
    f: &'a dyn ConcaveObjective,
}

impl<'a> ConcaveReduced<'a> {
    fn grad_z(&self, z: &DVector<f64>) -> Result<DVector<f64>> {
        let g = self.f.gradient(&self.red.rho(z))?;
        Ok(self.red.null.transpose() * DVector::from_vec(herm_to_vec(&g)))
    }
}

impl<'a> ReducedObjective for ConcaveReduced<'a> {
    fn eval(&self, z: &DVector<f64>, need_hess: bool) -> Result<(f64, DVector<f64>, Option<DMatrix<f64>>)> {
        let rho = self.red.rho(z);
        let v = self.f.value(&rho)?;
        if !v.is_finite() {
            return domain("objective is not finite");
        }
        let g = self.grad_z(z)?;
        if !need_hess {
            return Ok((v, g, None));
        }
        let n = z.len();
        let hm = if let Some(fh) = self.f.functional_hessian(&rho) {
            let (ops, hw) = fh?;
            let j = DMatrix::from_fn(ops.len(), n, |i, k| inner(&ops[i], &self.red.mk[k]));
            j.transpose() * hw * j
        } else if let Some(first) = self.f.hessian_apply(&rho, &self.red.mk[0]) {
            let mut hm = DMatrix::zeros(n, n);
            for k in 0..n {
                let hk = if k == 0 { first.clone()? } else { self.f.hessian_apply(&rho, &self.red.mk[k]).unwrap()? };
                for l in 0..n {
                    hm[(l, k)] = inner(&self.red.mk[l], &hk);
                }
            }
            hm
        } else {
            let h = (1e-6f64).min(0.1 * min_eig(&rho));
            let mut hm = DMatrix::zeros(n, n);
            for k in 0..n {
                let mut zp = z.clone();
                zp[k] += h;
                let mut zm = z.clone();
                zm[k] -= h;
                let col = (self.grad_z(&zp)? - self.grad_z(&zm)?) / (2.0 * h);
                hm.set_column(k, &col);
            }
            hm
        };
        let hs = (&hm + hm.transpose()) * 0.5;
        // keep only the concave part so that Newton steps stay ascent directions
        let eig = hs.symmetric_eigen();
        let vals = eig.eigenvalues.map(|l| l.min(0.0));
        let hn = &eig.eigenvectors * DMatrix::from_diagonal(&vals) * eig.eigenvectors.transpose();
        Ok((v, g, Some(hn)))
    }
}

/// Barrier-method maximisation of a concave objective over unit-trace PSD
/// operators with affine constraints. `upper_bound` is the linearisation
/// certificate at the returned point.
pub fn maximize_concave(
    f: &dyn ConcaveObjective,
    dim: usize,
    constraints: &[AffineConstraint],
    cfg: &SolverConfig,
) -> Result<SolveReport> {
    let (red, z0, used) = prepare(dim, constraints, cfg)?;
    let constraints = &used[..];
    let obj = ConcaveReduced { red: &red, f };
    let bar = Barrier { m0: &red.m0, mk: &red.mk, shift_index: None, a: &red.ineq_a, c: &red.ineq_c, slack_shift: None };
    let g0 = f.gradient(&red.rho(&z0))?;
    let scale = crate::linalg::max_abs(&g0).max(1e-12);
    let out = barrier_path(&bar, &obj, z0, 1.0 / scale, cfg, &|_, _| false)?;
    let rho = red.rho(&out.y);
    let value = f.value(&rho)?;
    let grad = f.gradient(&rho)?;
    let lin = LinearSdpProblem {
        objective: grad.clone(),
        offset: value - inner(&grad, &rho),
        constraints: constraints.to_vec(),
        dim,
    };
    // multipliers from the outer barrier, then a fresh solve of the linearisation; both bounds are valid
    let slacks = bar.slacks(&out.y);
    let y: Vec<f64> = slacks.iter().map(|s| 1.0 / (out.t * s)).collect();
    let direct = dual_certificate(&lin, &red, &rho, &y, out.t, cfg.relax);
    let mut cert = solve_linear_sdp(&lin, cfg)?;
    cert.upper_bound = cert.upper_bound.min(direct);
    let comp = if red.ineq_c.is_empty() { 0.0 } else { 1.0 / out.t };
    Ok(SolveReport {
        rho,
        value,
        upper_bound: cert.upper_bound.max(value),
        duality_gap_bound: (cert.upper_bound - value).max(0.0),
        iterations: out.newton_steps + cert.iterations,
        complementarity: comp,
    })
}

// ---------------------------------------------------------------------------
// Sequential linearisation

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct OuterConfig {
    pub mu: f64,
    pub improvement_tol: f64,
    pub max_outer: usize,
    pub inner: SolverConfig,
}

impl Default for OuterConfig {
    fn default() -> Self {
        Self { mu: 1e-9, improvement_tol: 1e-7, max_outer: 50, inner: SolverConfig::default() }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct LinearizationStep {
    pub bound: f64,
    pub best_so_far: f64,
    /// Objective at the linear-SDP optimiser, a lower bound on the constrained maximum.
    pub attained: f64,
    pub duality_gap: f64,
}

#[derive(Clone, Debug)]
pub struct LinearizationResult {
    pub bound: f64,
    pub attained: f64,
    pub trace: Vec<LinearizationStep>,
    pub rho: CMat,
}

/// Repeatedly maximises the linearisation of `φ ∘ 𝒮` at `σ_k` over the
/// constraint set and moves to `σ_{k+1} = 𝒮(ρ*_k) + μI`. Every bound is a
/// certified upper bound on the constrained maximum; the smallest is returned.
pub fn sequential_linearization(
    sigma0: &CMat,
    obj: &dyn SigmaObjective,
    sift: &KrausMap,
    constraints: &[AffineConstraint],
    cfg: &OuterConfig,
) -> Result<LinearizationResult> {
    let dim = sift.in_dim();
    let mut sigma = sigma0.clone();
    let mut best = f64::INFINITY;
    let mut best_attained = f64::NEG_INFINITY;
    let mut best_rho = identity(dim) / cr(dim as f64);
    let mut trace = Vec::new();
    for _ in 0..cfg.max_outer {
        let (v, g) = obj.value_grad(&sigma)?;
        let problem = LinearSdpProblem {
            objective: sift.adjoint(&g),
            offset: v - inner(&g, &sigma),
            constraints: constraints.to_vec(),
            dim,
        };
        let rep = solve_linear_sdp(&problem, &cfg.inner)?;
        let next = sift.apply(&rep.rho);
        let attained = obj.value_grad(&(&next + identity(next.nrows()) * cr(cfg.mu))).map(|r| r.0).unwrap_or(f64::NEG_INFINITY);
        let prev = best;
        best = best.min(rep.upper_bound);
        if attained > best_attained {
            best_attained = attained;
            best_rho = rep.rho.clone();
        }
        trace.push(LinearizationStep { bound: rep.upper_bound, best_so_far: best, attained, duality_gap: rep.duality_gap_bound });
        if prev.is_finite() && prev - best < cfg.improvement_tol {
            break;
        }
        sigma = &next + identity(next.nrows()) * cr(cfg.mu);
    }
    Ok(LinearizationResult { bound: best, attained: best_attained, trace, rho: best_rho })
}

// ---------------------------------------------------------------------------
// Joint divergence minimisation

/// Sets of probability vectors handled by [`joint_divergence_minimizer`].
#[derive(Clone, Debug)]
pub enum ProbabilitySet {
    Point(Vec<f64>),
    /// `{p : Σ_{i<k} γ_i p_i ≥ 0, p_k = last}` where `k = γ.len()` and `p` has `k+1` entries.
    Halfspace { gamma: Vec<f64>, last: f64 },
}

/// Information projection of `q` onto a [`ProbabilitySet`]; returns `(D, p*)` in bits.
pub fn i_projection(set: &ProbabilitySet, q: &[f64]) -> (f64, Vec<f64>) {
    match set {
        ProbabilitySet::Point(p) => (kl(p, q), p.clone()),
        ProbabilitySet::Halfspace { gamma, last } => {
            let k = gamma.len();
            let s = 1.0 - last;
            let sq: f64 = q[..k].iter().sum();
            let qt: Vec<f64> = q[..k].iter().map(|v| v / sq).collect();
            let d_bin = crate::entropy::binary_relative_entropy(s, sq);
            let gmax = gamma.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let tilt = |lam: f64| -> Vec<f64> {
                let w: Vec<f64> = qt.iter().zip(gamma).map(|(q, g)| q * ((g - gmax) * lam).exp()).collect();
                let z: f64 = w.iter().sum();
                w.iter().map(|v| v / z).collect()
            };
            // mean and variance of γ under the tilted distribution, without allocating
            let moments = |lam: f64| -> (f64, f64) {
                let (mut z, mut m1, mut m2) = (0.0, 0.0, 0.0);
                for (q, g) in qt.iter().zip(gamma) {
                    let w = q * ((g - gmax) * lam).exp();
                    z += w;
                    m1 += w * g;
                    m2 += w * g * g;
                }
                let mean = m1 / z;
                (mean, (m2 / z - mean * mean).max(0.0))
            };
            let dot = |p: &[f64]| p.iter().zip(gamma).map(|(a, b)| a * b).sum::<f64>();
            let pt = if dot(&qt) >= 0.0 {
                qt.clone()
            } else if gamma.iter().zip(&qt).all(|(g, q)| *g < 0.0 || *q <= 0.0) {
                return (f64::INFINITY, vec![f64::NAN; k + 1]);
            } else {
                // the tilted mean of γ increases with λ; find its root by safeguarded Newton
                let mut hi = 1.0;
                while moments(hi).0 < 0.0 {
                    hi *= 2.0;
                    if hi > 1e300 {
                        break;
                    }
                }
                let mut lo = 0.0;
                let mut lam = 0.5 * hi;
                for _ in 0..200 {
                    let (mean, var) = moments(lam);
                    if mean < 0.0 {
                        lo = lam;
                    } else {
                        hi = lam;
                    }
                    if hi - lo <= 4.0 * f64::EPSILON * hi {
                        break;
                    }
                    let newton = lam - mean / var;
                    lam = if var > 0.0 && newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
                    if mean == 0.0 {
                        break;
                    }
                }
                if moments(lam).0 >= 0.0 {
                    tilt(lam)
                } else {
                    tilt(hi)
                }
            };
            let mut p: Vec<f64> = pt.iter().map(|v| v * s).collect();
            p.push(*last);
            (s * kl(&pt, &qt) + d_bin, p)
        }
    }
}

/// `D(p ‖ q)` in bits for vectors of equal total mass, summed as
/// non-negative terms `q·((1+u)ln(1+u) − u)` with `u = p/q − 1`.
pub fn kl(p: &[f64], q: &[f64]) -> f64 {
    let mut acc = 0.0;
    for (a, b) in p.iter().zip(q) {
        if *b <= 0.0 {
            if *a > 0.0 {
                return f64::INFINITY;
            }
            continue;
        }
        let u = (a - b) / b;
        let t = if u.abs() < 1e-3 {
            u * u * (0.5 - u * (1.0 / 6.0 - u / 12.0))
        } else if *a == 0.0 {
            1.0
        } else {
            (1.0 + u) * u.ln_1p() - u
        };
        acc += b * t;
    }
    acc / LN2
}

struct NegProjectedDivergence<'a> {
    set: &'a ProbabilitySet,
    povm: &'a [CMat],
    scale: f64,
}

impl<'a> NegProjectedDivergence<'a> {
    fn q(&self, rho: &CMat) -> Vec<f64> {
        self.povm.iter().map(|m| inner(m, rho)).collect()
    }
}

impl<'a> ConcaveObjective for NegProjectedDivergence<'a> {
    fn value(&self, rho: &CMat) -> Result<f64> {
        Ok(-i_projection(self.set, &self.q(rho)).0 / self.scale)
    }

    fn gradient(&self, rho: &CMat) -> Result<CMat> {
        // Envelope theorem: ∂D/∂q_i = −p*_i / (q_i ln 2). The elements sum to the
        // identity, so the constant 1/ln 2 may be added to every coefficient.
        let q = self.q(rho);
        let (d, p) = i_projection(self.set, &q);
        if !d.is_finite() {
            return domain("divergence is infinite");
        }
        let mut g = CMat::zeros(rho.nrows(), rho.ncols());
        for (i, m) in self.povm.iter().enumerate() {
            g += m * cr((p[i] - q[i]) / (q[i] * LN2 * self.scale));
        }
        Ok(g)
    }

    fn functional_hessian(&self, rho: &CMat) -> Option<Result<(Vec<CMat>, DMatrix<f64>)>> {
        // differentiate the envelope gradient −p*(q)/(q ln 2) with relative steps in q
        let q = self.q(rho);
        let grad_q = |q: &[f64]| -> Vec<f64> {
            let (_, p) = i_projection(self.set, q);
            p.iter().zip(q).map(|(a, b)| a / (b * LN2 * self.scale)).collect()
        };
        let k = q.len();
        let mut h = DMatrix::zeros(k, k);
        for j in 0..k {
            let step = 1e-6 * q[j];
            let mut qp = q.clone();
            qp[j] += step;
            let mut qm = q.clone();
            qm[j] -= step;
            let (gp, gm) = (grad_q(&qp), grad_q(&qm));
            for i in 0..k {
                h[(i, j)] = (gp[i] - gm[i]) / (2.0 * step);
            }
        }
        Some(Ok((self.povm.to_vec(), h)))
    }
}

#[derive(Clone, Debug)]
pub struct DivergenceResult {
    /// `D(p*‖q(ρ*))` at the computed minimiser.
    pub value: f64,
    /// Certified lower bound on the joint minimum.
    pub lower_bound: f64,
    pub rho: CMat,
    pub p: Vec<f64>,
}

/// `min D(p ‖ q(ρ))` over `p` in `set` and `ρ` in the affine constraint set,
/// with `q_i(ρ) = Tr[ρ M_i]` for elements summing to the identity. The inner
/// minimisation over `p` is an exact information projection; the outer problem
/// is convex in `ρ`. `scale` is the expected magnitude of the minimum and only
/// conditions the solver.
pub fn joint_divergence_minimizer(
    set: &ProbabilitySet,
    povm: &[CMat],
    dim: usize,
    constraints: &[AffineConstraint],
    scale: f64,
    cfg: &SolverConfig,
) -> Result<DivergenceResult> {
    let mut total = CMat::zeros(dim, dim);
    for m in povm {
        total += m;
    }
    if crate::linalg::max_abs_diff(&total, &identity(dim)) > 1e-9 {
        return usage("measurement elements must sum to the identity");
    }
    if !(scale > 0.0) {
        return usage("scale must be positive");
    }
    let f = NegProjectedDivergence { set, povm, scale };
    let rep = match maximize_concave(&f, dim, constraints, cfg) {
        Ok(r) => r,
        Err(Error::Domain(_)) => {
            // the divergence is infinite everywhere on the interior
            return Ok(DivergenceResult {
                value: f64::INFINITY,
                lower_bound: f64::INFINITY,
                rho: identity(dim) / cr(dim as f64),
                p: vec![],
            });
        }
        Err(e) => return Err(e),
    };
    let q = f.q(&rep.rho);
    let (value, p) = i_projection(set, &q);
    Ok(DivergenceResult { value, lower_bound: (-rep.upper_bound * scale).min(value), rho: rep.rho, p })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{diag_real, kron, random_density, random_hermitian};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn qubit_twirl_data() -> ChannelData {
        let z = diag_real(&[1.0, -1.0]);
        ChannelData { sift: KrausMap::identity(4), twirl: vec![identity(4), kron(&z, &identity(2))] }
    }

    #[test]
    fn divided_differences() {
        let dd = divided_difference_matrix(|t| t, |_| 1.0, &[0.1, 0.5, 2.0]);
        assert!(dd.iter().all(|&v| (v - 1.0).abs() < 1e-15));
        let dd = divided_difference_matrix(|t| t * t, |t| 2.0 * t, &[1.0, 3.0]);
        assert_eq!(dd[(0, 1)], 4.0);
        assert_eq!(dd[(0, 0)], 2.0);
        assert_eq!(dd[(1, 1)], 6.0);
        let dd = divided_difference_matrix(|t: f64| t.ln(), |t| 1.0 / t, &[1.0, 1.0 + 1e-10]);
        assert!((dd[(0, 1)] - 1.0).abs() < 1e-8);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let data = qubit_twirl_data();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for &alpha in &[0.2, 0.38, 0.6] {
            let s = random_density(4, 4, &mut rng) * cr(0.9) + identity(4) * cr(0.025);
            let (_, g) = renyi_objective_and_gradient(&s, alpha, &data).unwrap();
            let dir = random_hermitian(4, &mut rng);
            let h = 1e-4;
            let fp = renyi_objective_and_gradient(&(&s + &dir * cr(h)), alpha, &data).unwrap().0;
            let fm = renyi_objective_and_gradient(&(&s - &dir * cr(h)), alpha, &data).unwrap().0;
            let fd = (fp - fm) / (2.0 * h);
            let an = inner(&g, &dir);
            assert!((fd - an).abs() <= 1e-5 * an.abs().max(1e-3), "{fd} vs {an}");
        }
    }

    #[test]
    fn scaling_shift() {
        let data = qubit_twirl_data();
        let s = random_density(4, 4, &mut ChaCha8Rng::seed_from_u64(10));
        let alpha = 0.3;
        let a = renyi_objective_and_gradient(&s, alpha, &data).unwrap().0;
        let b = renyi_objective_and_gradient(&(&s * cr(0.25)), alpha, &data).unwrap().0;
        assert!((b - a - ((1.0 - alpha) / alpha) * 0.25f64.log2()).abs() < 1e-10);
    }

    #[test]
    fn singular_point_rejected() {
        let data = qubit_twirl_data();
        let s = diag_real(&[1.0, 0.0, 0.0, 0.0]);
        assert!(matches!(renyi_objective_and_gradient(&s, 0.5, &data), Err(Error::Domain(_))));
    }

    #[test]
    fn sdp_unconstrained_top_eigenvalue() {
        let c = diag_real(&[0.3, 1.2, -0.5]);
        let p = LinearSdpProblem { objective: c, offset: 0.0, constraints: vec![], dim: 3 };
        let r = solve_linear_sdp(&p, &SolverConfig::default()).unwrap();
        assert!((r.value - 1.2).abs() < 1e-7);
        assert!(r.upper_bound >= r.value - 1e-12);
        assert!(r.duality_gap_bound <= 1e-7);
    }

    #[test]
    fn sdp_exclusion_constraint() {
        let c = diag_real(&[0.3, 1.2, -0.5]);
        let top = diag_real(&[0.0, 1.0, 0.0]);
        let p = LinearSdpProblem {
            objective: c,
            offset: 0.0,
            constraints: vec![AffineConstraint::new(top, Relation::Eq, 0.0)],
            dim: 3,
        };
        let r = solve_linear_sdp(&p, &SolverConfig::default()).unwrap();
        assert!((r.value - 0.3).abs() < 1e-7, "{}", r.value);
        assert!(r.duality_gap_bound <= 1e-7);
    }

    #[test]
    fn sdp_infeasible_reports_index() {
        let m = diag_real(&[1.0, 0.0]);
        let p = LinearSdpProblem {
            objective: identity(2),
            offset: 0.0,
            constraints: vec![
                AffineConstraint::new(m.clone(), Relation::Le, 0.9),
                AffineConstraint::new(m, Relation::Ge, 1.5),
            ],
            dim: 2,
        };
        match solve_linear_sdp(&p, &SolverConfig::default()) {
            Err(Error::Infeasible { .. }) => {}
            other => panic!("expected infeasible, got {other:?}"),
        }
    }

    #[test]
    fn linear_objective_converges_in_one_step() {
        let c = diag_real(&[0.1, 0.7]);
        let obj = LinearSigma { c: c.clone(), offset: 0.0 };
        let r = sequential_linearization(
            &(identity(2) * cr(0.5)),
            &obj,
            &KrausMap::identity(2),
            &[],
            &OuterConfig::default(),
        )
        .unwrap();
        assert!(r.trace.len() <= 2);
        assert!((r.bound - 0.7).abs() < 1e-7);
    }

    #[test]
    fn tangency() {
        let data = qubit_twirl_data();
        let rho = random_density(4, 4, &mut ChaCha8Rng::seed_from_u64(12));
        let obj = RenyiObjective { alpha: 0.4, data: data.clone(), offset: 0.0 };
        let b = linearized_upper_bound(&rho, &rho, &obj, &data.sift).unwrap();
        let v = obj.value_grad(&rho).unwrap().0;
        assert!((b - v).abs() < 1e-12);
    }

    #[test]
    fn divergence_point_sets() {
        let q = [0.2, 0.3, 0.1, 0.1, 0.3];
        let (d, _) = i_projection(&ProbabilitySet::Point(q.to_vec()), &q);
        assert_eq!(d, 0.0);
        // q already satisfies the halfspace
        let set = ProbabilitySet::Halfspace { gamma: vec![1.0, 1.0, 1.0, 1.0], last: 0.3 };
        assert!(i_projection(&set, &q).0.abs() < 1e-15);
    }
}
