//! Primal-dual interior-point solver for [`ConicProblem`]s.
//!
//! Infeasible-start Mehrotra predictor-corrector with Nesterov-Todd scaling
//! on every PSD block. The box variables `f` are free in the internal form;
//! the box bounds join the user inequalities as nonnegative slacks:
//!
//! ```text
//! primal: min <C,X> + c^T f   s.t. A(X) + E f = b,  G f + s = h,  X PSD, s >= 0
//! dual:   max b^T y - h^T l   s.t. C - A*(y) = S PSD,  c - E^T y + G^T l = 0,  l >= 0
//! ```
//!
//! Each equality touches exactly one block, so `A W A*` is block diagonal.
//! Eliminating `dX`, `dS`, `ds` and `dl` leaves one dense positive-definite
//! system in `df` of order `n_box`, which is the only dense factorization per
//! iteration:
//!
//! ```text
//! (G^T D^-1 G + E^T (A W A*)^-1 E) df = rhs,   D = s / l
//! ```

use std::io::Write;

use faer::linalg::solvers::{Llt, Solve};
use faer::{Mat, Side};
use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use thiserror::Error;

use crate::sdr::ConicProblem;

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("invalid problem: {0}")]
    InvalidProblem(String),
    #[error("numerical failure at iteration {iteration}: {msg}")]
    Numerical { iteration: usize, msg: String },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    pub gap_tol: f64,
    pub feas_tol: f64,
    pub max_iterations: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self { gap_tol: 1e-6, feas_tol: 1e-7, max_iterations: 100 }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<(), SolverError> {
        if self.gap_tol > 0.0 && self.feas_tol > 0.0 && self.max_iterations > 0 {
            Ok(())
        } else {
            Err(SolverError::InvalidProblem(format!("solver settings must be positive: {self:?}")))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Optimal,
    MaxIterations,
    Infeasible,
}

#[derive(Debug, Clone)]
pub struct ConicSolution {
    pub blocks: Vec<DMatrix<f64>>,
    pub f: Vec<f64>,
    pub objective: f64,
    pub dual_objective: f64,
    pub status: SolveStatus,
    /// Relative duality gap.
    pub gap: f64,
    pub primal_infeasibility: f64,
    pub dual_infeasibility: f64,
    pub iterations: usize,
}

/// Anything that can solve a [`ConicProblem`].
pub trait ConicSolver {
    fn solve(&self, problem: &ConicProblem, cfg: &SolverConfig) -> Result<ConicSolution, SolverError>;
}

/// The built-in interior-point engine.
#[derive(Debug, Clone, Copy, Default)]
pub struct InteriorPoint;

impl ConicSolver for InteriorPoint {
    fn solve(&self, problem: &ConicProblem, cfg: &SolverConfig) -> Result<ConicSolution, SolverError> {
        solve(problem, cfg)
    }
}

pub fn solve(problem: &ConicProblem, cfg: &SolverConfig) -> Result<ConicSolution, SolverError> {
    solve_traced(problem, cfg, None)
}

/// Like [`solve`], writing one line per iteration to `trace`.
pub fn solve_traced(
    problem: &ConicProblem,
    cfg: &SolverConfig,
    trace: Option<&mut dyn Write>,
) -> Result<ConicSolution, SolverError> {
    cfg.validate()?;
    let data = Structure::new(problem)?;
    Engine::new(problem, &data).run(cfg, trace)
}

/// Symmetric sparse functional `sum coef * (X[a,b] + X[b,a]) / 2`.
type Terms = Vec<(usize, usize, f64)>;

struct Structure {
    side: usize,
    blocks: usize,
    p: usize,
    /// Equalities of each block: (global index, entry terms).
    block_eqs: Vec<Vec<(usize, Terms)>>,
    b: DVector<f64>,
    /// Box terms of each equality.
    e_terms: Vec<Vec<(usize, f64)>>,
    /// Inequality rows, user rows followed by `-f <= 0` and `f <= 1`.
    g_rows: Vec<Vec<(usize, f64)>>,
    h: DVector<f64>,
    c: DVector<f64>,
    /// Box variables touched by the equalities of each block.
    block_bits: Vec<Vec<usize>>,
}

impl Structure {
    fn new(problem: &ConicProblem) -> Result<Self, SolverError> {
        let side = problem.block_size;
        let blocks = problem.num_blocks();
        let p = problem.n_box;
        let bad = |m: String| Err(SolverError::InvalidProblem(m));
        if blocks == 0 || side == 0 {
            return bad("no PSD blocks".into());
        }
        if problem.costs.iter().any(|c| c.shape() != (side, side)) {
            return bad("cost block with wrong shape".into());
        }
        if problem.linear_cost.len() != p {
            return bad(format!("{} linear costs for {p} box variables", problem.linear_cost.len()));
        }
        let mut block_eqs = vec![Vec::new(); blocks];
        let mut e_terms = Vec::with_capacity(problem.equalities.len());
        let mut block_bits: Vec<Vec<usize>> = vec![Vec::new(); blocks];
        for (i, eq) in problem.equalities.iter().enumerate() {
            let Some(first) = eq.entries.first() else {
                return bad(format!("equality {i} has no PSD term"));
            };
            let k = first.block;
            if k >= blocks {
                return bad(format!("equality {i} references block {k}"));
            }
            let mut terms = Terms::new();
            for t in &eq.entries {
                if t.block != k {
                    return bad(format!("equality {i} spans several blocks"));
                }
                if t.row >= side || t.col >= side {
                    return bad(format!("equality {i} entry out of range"));
                }
                terms.push((t.row, t.col, t.coef));
            }
            for &(n, _) in &eq.box_terms {
                if n >= p {
                    return bad(format!("equality {i} references box variable {n}"));
                }
                if !block_bits[k].contains(&n) {
                    block_bits[k].push(n);
                }
            }
            block_eqs[k].push((i, terms));
            e_terms.push(eq.box_terms.clone());
        }
        let mut g_rows = Vec::with_capacity(problem.inequalities.len() + 2 * p);
        let mut h = Vec::with_capacity(problem.inequalities.len() + 2 * p);
        for (j, ineq) in problem.inequalities.iter().enumerate() {
            if ineq.terms.iter().any(|&(n, _)| n >= p) {
                return bad(format!("inequality {j} references a missing box variable"));
            }
            g_rows.push(ineq.terms.clone());
            h.push(ineq.rhs);
        }
        for n in 0..p {
            g_rows.push(vec![(n, -1.0)]);
            h.push(0.0);
        }
        for n in 0..p {
            g_rows.push(vec![(n, 1.0)]);
            h.push(1.0);
        }
        Ok(Self {
            side,
            blocks,
            p,
            block_eqs,
            b: DVector::from_iterator(problem.equalities.len(), problem.equalities.iter().map(|e| e.rhs)),
            e_terms,
            g_rows,
            h: DVector::from_vec(h),
            c: DVector::from_column_slice(&problem.linear_cost),
            block_bits,
        })
    }

    fn m_eq(&self) -> usize {
        self.b.len()
    }

    fn m_ineq(&self) -> usize {
        self.h.len()
    }
}

fn functional(terms: &Terms, x: &DMatrix<f64>) -> f64 {
    terms.iter().map(|&(a, b, c)| c * 0.5 * (x[(a, b)] + x[(b, a)])).sum()
}

fn add_adjoint(terms: &Terms, weight: f64, out: &mut DMatrix<f64>) {
    for &(a, b, c) in terms {
        let v = 0.5 * weight * c;
        out[(a, b)] += v;
        out[(b, a)] += v;
    }
}

fn sym(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

fn mul_tn(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    a.tr_mul(b)
}

fn mul_nt(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    a * b.transpose()
}

fn mul_tt(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    (b * a).transpose()
}

/// NT scaling of one block: `R^-1 X R^-T = R^T S R = diag(lambda)`.
struct Scaling {
    r: DMatrix<f64>,
    r_inv: DMatrix<f64>,
    w: DMatrix<f64>,
    lambda: DVector<f64>,
}

impl Scaling {
    fn new(x: &DMatrix<f64>, s: &DMatrix<f64>) -> Option<Self> {
        let lx = Cholesky::new(x.clone())?.l();
        let ls = Cholesky::new(s.clone())?.l();
        let svd = mul_tn(&ls, &lx).svd(true, true);
        let v_t = svd.v_t?;
        let u = svd.u?;
        let sigma = svd.singular_values;
        if sigma.iter().any(|&v| !(v > 0.0) || !v.is_finite()) {
            return None;
        }
        let inv_sqrt = sigma.map(|v| 1.0 / v.sqrt());
        // R = Lx V Sigma^-1/2 ; R^-1 = Sigma^-1/2 U^T Ls^T
        let mut r = mul_nt(&lx, &v_t);
        for (j, mut col) in r.column_iter_mut().enumerate() {
            col *= inv_sqrt[j];
        }
        let mut r_inv = mul_tt(&u, &ls);
        for (i, mut row) in r_inv.row_iter_mut().enumerate() {
            row *= inv_sqrt[i];
        }
        let w = mul_nt(&r, &r);
        Some(Self { r, r_inv, w, lambda: sigma })
    }

    fn scale_primal(&self, d: &DMatrix<f64>) -> DMatrix<f64> {
        sym(&mul_nt(&(&self.r_inv * d), &self.r_inv))
    }

    fn scale_dual(&self, d: &DMatrix<f64>) -> DMatrix<f64> {
        sym(&(mul_tn(&self.r, d) * &self.r))
    }

    /// Solves `lambda o M = N` for diagonal `lambda`.
    fn lambda_solve(&self, n: &DMatrix<f64>) -> DMatrix<f64> {
        let l = &self.lambda;
        DMatrix::from_fn(n.nrows(), n.ncols(), |i, j| 2.0 * n[(i, j)] / (l[i] + l[j]))
    }

    /// Largest step keeping `lambda + alpha * d` PSD (scaled direction).
    fn max_step(&self, d_scaled: &DMatrix<f64>) -> f64 {
        let n = self.lambda.len();
        let isq = self.lambda.map(|v| 1.0 / v.sqrt());
        let m = DMatrix::from_fn(n, n, |i, j| d_scaled[(i, j)] * isq[i] * isq[j]);
        let min = m.symmetric_eigenvalues().min();
        if min >= 0.0 {
            f64::INFINITY
        } else {
            -1.0 / min
        }
    }
}

struct Iterate {
    x: Vec<DMatrix<f64>>,
    s: Vec<DMatrix<f64>>,
    y: DVector<f64>,
    f: DVector<f64>,
    slack: DVector<f64>,
    lam: DVector<f64>,
}

struct Residuals {
    rp: DVector<f64>,
    ri: DVector<f64>,
    rd: Vec<DMatrix<f64>>,
    rho: DVector<f64>,
    pobj: f64,
    dobj: f64,
    comp: f64,
    pinf: f64,
    dinf: f64,
}

struct Direction {
    dx: Vec<DMatrix<f64>>,
    ds: Vec<DMatrix<f64>>,
    dy: DVector<f64>,
    df: DVector<f64>,
    dslack: DVector<f64>,
    dlam: DVector<f64>,
}

/// Factorized Newton system for one iteration.
struct Newton {
    scalings: Vec<Scaling>,
    /// Cholesky factor of `A W A*` restricted to each block.
    m_blocks: Vec<Cholesky<f64, Dyn>>,
    d: DVector<f64>,
    n_chol: Option<Llt<f64>>,
}

struct Engine<'a> {
    problem: &'a ConicProblem,
    st: &'a Structure,
    b_norm: f64,
    c_norm: f64,
}

impl<'a> Engine<'a> {
    fn new(problem: &'a ConicProblem, st: &'a Structure) -> Self {
        let b_norm = (st.b.norm_squared() + st.h.norm_squared()).sqrt();
        let c_norm =
            (problem.costs.iter().map(|c| c.norm_squared()).sum::<f64>() + st.c.norm_squared()).sqrt();
        Self { problem, st, b_norm, c_norm }
    }

    fn initial(&self) -> Iterate {
        let st = self.st;
        let n = st.side;
        let eta = self.problem.costs.iter().map(|c| c.norm() / (n as f64).sqrt()).fold(1.0, f64::max);
        let f = DVector::from_element(st.p, 0.5);
        let mut slack = st.h.clone();
        for (j, row) in st.g_rows.iter().enumerate() {
            let gf: f64 = row.iter().map(|&(k, c)| c * f[k]).sum();
            slack[j] = (st.h[j] - gf).max(1.0);
        }
        let lam = slack.map(|s| eta / s);
        Iterate {
            x: vec![DMatrix::identity(n, n); st.blocks],
            s: vec![DMatrix::identity(n, n) * eta; st.blocks],
            y: DVector::zeros(st.m_eq()),
            f,
            slack,
            lam,
        }
    }

    fn residuals(&self, it: &Iterate) -> Residuals {
        let st = self.st;
        let mut rp = st.b.clone();
        let mut rd: Vec<DMatrix<f64>> = Vec::with_capacity(st.blocks);
        for k in 0..st.blocks {
            let mut r = &self.problem.costs[k] - &it.s[k];
            for (i, terms) in &st.block_eqs[k] {
                rp[*i] -= functional(terms, &it.x[k]);
                add_adjoint(terms, -it.y[*i], &mut r);
            }
            rd.push(r);
        }
        for (i, terms) in st.e_terms.iter().enumerate() {
            for &(n, c) in terms {
                rp[i] -= c * it.f[n];
            }
        }
        let mut ri = &st.h - &it.slack;
        let mut rho = st.c.clone();
        for (j, row) in st.g_rows.iter().enumerate() {
            for &(n, c) in row {
                ri[j] -= c * it.f[n];
                rho[n] += c * it.lam[j];
            }
        }
        for (i, terms) in st.e_terms.iter().enumerate() {
            for &(n, c) in terms {
                rho[n] -= c * it.y[i];
            }
        }
        let pobj = self.problem.objective(&it.x, it.f.as_slice());
        let dobj = st.b.dot(&it.y) - st.h.dot(&it.lam);
        let comp = it.x.iter().zip(&it.s).map(|(x, s)| x.dot(s)).sum::<f64>() + it.slack.dot(&it.lam);
        let pinf = (rp.norm_squared() + ri.norm_squared()).sqrt() / (1.0 + self.b_norm);
        let dinf = (rd.iter().map(|r| r.norm_squared()).sum::<f64>() + rho.norm_squared()).sqrt()
            / (1.0 + self.c_norm);
        Residuals { rp, ri, rd, rho, pobj, dobj, comp, pinf, dinf }
    }

    fn factor(&self, it: &Iterate, iteration: usize) -> Result<Newton, SolverError> {
        let st = self.st;
        let fail = |msg: &str| SolverError::Numerical { iteration, msg: msg.to_string() };
        let mut scalings = Vec::with_capacity(st.blocks);
        let mut m_blocks = Vec::with_capacity(st.blocks);
        let mut n_mat = Mat::<f64>::zeros(st.p, st.p);
        for k in 0..st.blocks {
            let sc = Scaling::new(&it.x[k], &it.s[k]).ok_or_else(|| fail("lost positive definiteness"))?;
            let eqs = &st.block_eqs[k];
            let w = &sc.w;
            let m = DMatrix::from_fn(eqs.len(), eqs.len(), |i, j| {
                let mut acc = 0.0;
                for &(a, b, ca) in &eqs[i].1 {
                    for &(c, d, cb) in &eqs[j].1 {
                        acc += ca * cb * 0.5 * (w[(a, c)] * w[(d, b)] + w[(a, d)] * w[(c, b)]);
                    }
                }
                acc
            });
            let chol = regularized_cholesky(m).ok_or_else(|| fail("singular block normal matrix"))?;
            if !st.block_bits[k].is_empty() {
                let bits = &st.block_bits[k];
                let mut e = DMatrix::zeros(eqs.len(), bits.len());
                for (li, (gi, _)) in eqs.iter().enumerate() {
                    for &(n, c) in &st.e_terms[*gi] {
                        let col = bits.iter().position(|&b| b == n).expect("registered bit");
                        e[(li, col)] += c;
                    }
                }
                let z = chol.solve(&e);
                let ete = e.transpose() * z;
                for (a, &na) in bits.iter().enumerate() {
                    for (b, &nb) in bits.iter().enumerate() {
                        n_mat[(na, nb)] += ete[(a, b)];
                    }
                }
            }
            scalings.push(sc);
            m_blocks.push(chol);
        }
        let d = it.slack.component_div(&it.lam);
        for (j, row) in st.g_rows.iter().enumerate() {
            let wj = 1.0 / d[j];
            for &(a, ca) in row {
                for &(b, cb) in row {
                    n_mat[(a, b)] += wj * ca * cb;
                }
            }
        }
        let n_chol = if st.p > 0 {
            Some(regularized_llt(n_mat).ok_or_else(|| fail("reduced system not positive definite"))?)
        } else {
            None
        };
        Ok(Newton { scalings, m_blocks, d, n_chol })
    }

    /// Newton direction for scaled PSD complementarity targets `q`
    /// (`dX~ + dS~ = q`) and LP targets `psi` (`ds + D dl = psi`).
    fn direction(&self, nw: &Newton, res: &Residuals, q: &[DMatrix<f64>], psi: &DVector<f64>) -> Direction {
        let st = self.st;
        // Phi_k - W R_d W, reused for dX later
        let phi: Vec<DMatrix<f64>> = (0..st.blocks)
            .map(|k| {
                let sc = &nw.scalings[k];
                mul_nt(&(&sc.r * &q[k]), &sc.r)
            })
            .collect();
        let wrw: Vec<DMatrix<f64>> = (0..st.blocks)
            .map(|k| {
                let w = &nw.scalings[k].w;
                w * &res.rd[k] * w
            })
            .collect();
        let mut r1 = res.rp.clone();
        for k in 0..st.blocks {
            let t = &phi[k] - &wrw[k];
            for (i, terms) in &st.block_eqs[k] {
                r1[*i] -= functional(terms, &t);
            }
        }
        // r2 = -rho - G^T D^-1 (psi - ri)
        let mut rhs_f = -&res.rho;
        for (j, row) in st.g_rows.iter().enumerate() {
            let v = (psi[j] - res.ri[j]) / nw.d[j];
            for &(n, c) in row {
                rhs_f[n] -= c * v;
            }
        }
        // + E^T M^-1 r1
        let mut minv_r1 = DVector::zeros(st.m_eq());
        for k in 0..st.blocks {
            let eqs = &st.block_eqs[k];
            let local = DVector::from_iterator(eqs.len(), eqs.iter().map(|(i, _)| r1[*i]));
            let sol = nw.m_blocks[k].solve(&local);
            for (li, (gi, _)) in eqs.iter().enumerate() {
                minv_r1[*gi] = sol[li];
            }
        }
        for (i, terms) in st.e_terms.iter().enumerate() {
            for &(n, c) in terms {
                rhs_f[n] += c * minv_r1[i];
            }
        }
        let df = match &nw.n_chol {
            Some(ch) => {
                let mut col = Mat::<f64>::from_fn(st.p, 1, |i, _| rhs_f[i]);
                ch.solve_in_place(&mut col);
                DVector::from_fn(st.p, |i, _| col[(i, 0)])
            }
            None => DVector::zeros(0),
        };
        // dy = M^-1 (r1 - E df)
        let mut r1e = r1;
        for (i, terms) in st.e_terms.iter().enumerate() {
            for &(n, c) in terms {
                r1e[i] -= c * df[n];
            }
        }
        let mut dy = DVector::zeros(st.m_eq());
        for k in 0..st.blocks {
            let eqs = &st.block_eqs[k];
            let local = DVector::from_iterator(eqs.len(), eqs.iter().map(|(i, _)| r1e[*i]));
            let sol = nw.m_blocks[k].solve(&local);
            for (li, (gi, _)) in eqs.iter().enumerate() {
                dy[*gi] = sol[li];
            }
        }
        let mut ds = Vec::with_capacity(st.blocks);
        let mut dx = Vec::with_capacity(st.blocks);
        for k in 0..st.blocks {
            let mut dsk = res.rd[k].clone();
            for (i, terms) in &st.block_eqs[k] {
                add_adjoint(terms, -dy[*i], &mut dsk);
            }
            let w = &nw.scalings[k].w;
            let dxk = sym(&(&phi[k] - w * &dsk * w));
            ds.push(dsk);
            dx.push(dxk);
        }
        let mut dlam = DVector::zeros(st.m_ineq());
        for (j, row) in st.g_rows.iter().enumerate() {
            let gdf: f64 = row.iter().map(|&(n, c)| c * df[n]).sum();
            dlam[j] = (gdf + psi[j] - res.ri[j]) / nw.d[j];
        }
        let dslack = psi - nw.d.component_mul(&dlam);
        Direction { dx, ds, dy, df, dslack, dlam }
    }

    fn step_lengths(&self, nw: &Newton, it: &Iterate, dir: &Direction) -> (f64, f64) {
        let mut ap = f64::INFINITY;
        let mut ad = f64::INFINITY;
        for k in 0..self.st.blocks {
            let sc = &nw.scalings[k];
            ap = ap.min(sc.max_step(&sc.scale_primal(&dir.dx[k])));
            ad = ad.min(sc.max_step(&sc.scale_dual(&dir.ds[k])));
        }
        for j in 0..self.st.m_ineq() {
            if dir.dslack[j] < 0.0 {
                ap = ap.min(-it.slack[j] / dir.dslack[j]);
            }
            if dir.dlam[j] < 0.0 {
                ad = ad.min(-it.lam[j] / dir.dlam[j]);
            }
        }
        (ap, ad)
    }

    fn run(
        &self,
        cfg: &SolverConfig,
        mut trace: Option<&mut dyn Write>,
    ) -> Result<ConicSolution, SolverError> {
        let st = self.st;
        let mut it = self.initial();
        let nu = (st.blocks * st.side + st.m_ineq()) as f64;
        let mut iteration = 0;
        let mut status = SolveStatus::MaxIterations;
        let mut res = self.residuals(&it);
        loop {
            let gap = relative_gap(&res);
            if let Some(t) = trace.as_deref_mut() {
                let _ = writeln!(
                    t,
                    "{iteration:3} pobj {:+.9e} dobj {:+.9e} gap {gap:.2e} pinf {:.2e} dinf {:.2e}",
                    res.pobj, res.dobj, res.pinf, res.dinf
                );
            }
            if gap <= cfg.gap_tol && res.pinf <= cfg.feas_tol && res.dinf <= cfg.feas_tol {
                status = SolveStatus::Optimal;
                break;
            }
            if self.primal_infeasible(&it, &res) {
                status = SolveStatus::Infeasible;
                break;
            }
            if iteration >= cfg.max_iterations {
                break;
            }
            iteration += 1;
            let nw = self.factor(&it, iteration)?;
            let mu = res.comp / nu;

            // predictor
            let q_aff: Vec<DMatrix<f64>> =
                nw.scalings.iter().map(|sc| DMatrix::from_diagonal(&(-&sc.lambda))).collect();
            let psi_aff = -&it.slack;
            let aff = self.direction(&nw, &res, &q_aff, &psi_aff);
            let (ap, ad) = self.step_lengths(&nw, &it, &aff);
            let (ap, ad) = (ap.min(1.0), ad.min(1.0));
            let mut comp_aff = 0.0;
            for k in 0..st.blocks {
                comp_aff += (&it.x[k] + &aff.dx[k] * ap).dot(&(&it.s[k] + &aff.ds[k] * ad));
            }
            comp_aff += (&it.slack + &aff.dslack * ap).dot(&(&it.lam + &aff.dlam * ad));
            let sigma = (comp_aff.max(0.0) / res.comp).powi(3).clamp(0.0, 1.0);

            // corrector
            let q: Vec<DMatrix<f64>> = (0..st.blocks)
                .map(|k| {
                    let sc = &nw.scalings[k];
                    let dxa = sc.scale_primal(&aff.dx[k]);
                    let dsa = sc.scale_dual(&aff.ds[k]);
                    let cross = sym(&(dxa * dsa));
                    let lam2 = DMatrix::from_diagonal(&sc.lambda.map(|v| v * v));
                    let target = DMatrix::identity(st.side, st.side) * (sigma * mu) - lam2 - cross;
                    sc.lambda_solve(&target)
                })
                .collect();
            let psi = DVector::from_fn(st.m_ineq(), |j, _| {
                (sigma * mu - it.slack[j] * it.lam[j] - aff.dslack[j] * aff.dlam[j]) / it.lam[j]
            });
            let dir = self.direction(&nw, &res, &q, &psi);
            let (ap, ad) = self.step_lengths(&nw, &it, &dir);
            let collapsed = |ap: f64, ad: f64| SolverError::Numerical {
                iteration,
                msg: format!("step lengths collapsed ({ap:.1e}, {ad:.1e})"),
            };
            let (ap, ad) = ((0.98 * ap).min(1.0), (0.98 * ad).min(1.0));
            if !(ap > 1e-12 && ad > 1e-12) {
                return Err(collapsed(ap, ad));
            }
            // the eigenvalue step can overshoot in floating point when a
            // block spans many decades; shorten until Cholesky succeeds
            let (x_new, ap) = backtrack(&it.x, &dir.dx, ap).ok_or_else(|| collapsed(ap, ad))?;
            let (s_new, ad) = backtrack(&it.s, &dir.ds, ad).ok_or_else(|| collapsed(ap, ad))?;
            it.x = x_new;
            it.s = s_new;
            it.f += &dir.df * ap;
            it.slack += &dir.dslack * ap;
            it.y += &dir.dy * ad;
            it.lam += &dir.dlam * ad;
            res = self.residuals(&it);
            if !(res.pobj.is_finite() && res.dobj.is_finite()) {
                return Err(SolverError::Numerical { iteration, msg: "non-finite objective".into() });
            }
        }
        Ok(ConicSolution {
            gap: relative_gap(&res),
            objective: res.pobj,
            dual_objective: res.dobj,
            primal_infeasibility: res.pinf,
            dual_infeasibility: res.dinf,
            status,
            iterations: iteration,
            blocks: it.x,
            f: it.f.as_slice().to_vec(),
        })
    }

    /// Farkas test: `(y, l)` with `b^T y - h^T l > 0`, `-A*(y)` PSD and
    /// `E^T y = G^T l` certifies that no primal point exists.
    fn primal_infeasible(&self, it: &Iterate, res: &Residuals) -> bool {
        let st = self.st;
        let t = res.dobj - (st.b.dot(&it.y) - st.h.dot(&it.lam) - res.dobj);
        let t = t.max(st.b.dot(&it.y) - st.h.dot(&it.lam));
        if !(t > 1e8 * (1.0 + res.pobj.abs())) {
            return false;
        }
        let mut worst: f64 = 0.0;
        for k in 0..st.blocks {
            let mut m = DMatrix::zeros(st.side, st.side);
            for (i, terms) in &st.block_eqs[k] {
                add_adjoint(terms, -it.y[*i] / t, &mut m);
            }
            worst = worst.max(-m.symmetric_eigenvalues().min());
        }
        let mut bal = DVector::<f64>::zeros(st.p);
        for (i, terms) in st.e_terms.iter().enumerate() {
            for &(n, c) in terms {
                bal[n] += c * it.y[i];
            }
        }
        for (j, row) in st.g_rows.iter().enumerate() {
            for &(n, c) in row {
                bal[n] -= c * it.lam[j];
            }
        }
        worst.max(bal.amax() / t) < 1e-6
    }
}

// Near the optimum the scaled normal equations lose definiteness to rounding;
// a diagonal shift far below the solver tolerances restores it.
const SHIFTS: [f64; 5] = [0.0, 1e-14, 1e-12, 1e-10, 1e-8];

fn regularized_cholesky(m: DMatrix<f64>) -> Option<Cholesky<f64, Dyn>> {
    let scale = m.diagonal().amax().max(f64::MIN_POSITIVE);
    SHIFTS.iter().find_map(|&shift| {
        let mut t = m.clone();
        for i in 0..t.nrows() {
            t[(i, i)] += shift * scale;
        }
        Cholesky::new(t)
    })
}

fn regularized_llt(m: Mat<f64>) -> Option<Llt<f64>> {
    let n = m.nrows();
    let scale = (0..n).map(|i| m[(i, i)].abs()).fold(f64::MIN_POSITIVE, f64::max);
    SHIFTS.iter().find_map(|&shift| {
        let mut t = m.clone();
        for i in 0..n {
            t[(i, i)] += shift * scale;
        }
        t.llt(Side::Lower).ok()
    })
}

fn backtrack(
    blocks: &[DMatrix<f64>],
    dirs: &[DMatrix<f64>],
    mut alpha: f64,
) -> Option<(Vec<DMatrix<f64>>, f64)> {
    for _ in 0..30 {
        let next: Vec<DMatrix<f64>> = blocks.iter().zip(dirs).map(|(b, d)| sym(&(b + d * alpha))).collect();
        if next.iter().all(|b| Cholesky::new(b.clone()).is_some()) {
            return Some((next, alpha));
        }
        alpha *= 0.8;
    }
    None
}

fn relative_gap(res: &Residuals) -> f64 {
    let denom = 1.0 + res.pobj.abs() + res.dobj.abs();
    res.comp.max((res.pobj - res.dobj).abs()) / denom
}
