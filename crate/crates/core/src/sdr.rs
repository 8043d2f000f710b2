//! Cost matrices and assembly of the three semidefinite programs:
//! disjoint ML, joint ML (code-anchored) and joint MAP.
//!
//! Selector matrices are never built. Every linear functional of a PSD block
//! is a list of [`EntryTerm`]s, each meaning `coef * X_block[row, col]` on a
//! symmetric block.

use std::io::{BufRead, Write};

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::ldpc::{enumerate_fs_constraints, CodeDefinition, LdpcError};
use crate::mimo::{BitIndexMap, RealBlockObservation};

#[derive(Debug, Error)]
pub enum SdrError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("non-finite prior at bit {0}")]
    NonFinitePrior(usize),
    #[error(transparent)]
    Code(#[from] LdpcError),
    #[error("malformed problem dump at line {line}: {msg}")]
    Dump { line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// `C = [[H^T H, -H^T y], [-y^T H, |y|^2]]`, the Gram matrix of `[H, -y]`.
#[derive(Debug, Clone, PartialEq)]
pub struct CostMatrix(pub DMatrix<f64>);

impl CostMatrix {
    pub fn side(&self) -> usize {
        self.0.nrows()
    }

    /// `[x; t]^T C [x; t]`.
    pub fn quadratic_form(&self, x: &[f64], t: f64) -> f64 {
        let mut v = DVector::from_column_slice(x);
        v = v.push(t);
        (v.transpose() * &self.0 * &v)[(0, 0)]
    }
}

pub fn cost_matrix(h: &DMatrix<f64>, y: &DVector<f64>) -> Result<CostMatrix, SdrError> {
    if h.nrows() != y.len() {
        return Err(SdrError::Dimension(format!("H has {} rows but y has {} entries", h.nrows(), y.len())));
    }
    let n = h.ncols();
    let mut g = DMatrix::zeros(h.nrows(), n + 1);
    g.view_mut((0, 0), (h.nrows(), n)).copy_from(h);
    g.set_column(n, &(-y));
    Ok(CostMatrix(g.transpose() * g))
}

pub fn cost_matrices(observations: &[RealBlockObservation]) -> Result<Vec<CostMatrix>, SdrError> {
    observations.iter().map(|o| cost_matrix(&o.channel, &o.received)).collect()
}

/// `coef * X_block[row, col]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EntryTerm {
    pub block: usize,
    pub row: usize,
    pub col: usize,
    pub coef: f64,
}

/// `sum(entry terms) + sum(coef * f_n) = rhs`.
#[derive(Debug, Clone, PartialEq)]
pub struct EqualityConstraint {
    pub entries: Vec<EntryTerm>,
    pub box_terms: Vec<(usize, f64)>,
    pub rhs: f64,
}

/// `sum(coef * f_n) <= rhs`.
#[derive(Debug, Clone, PartialEq)]
pub struct InequalityConstraint {
    pub terms: Vec<(usize, f64)>,
    pub rhs: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProblemKind {
    Disjoint,
    JointMl,
    JointMap,
}

/// Block-diagonal SDP with box variables `0 <= f <= 1`:
///
/// ```text
/// min  sum_k <C_k, X_k> + c^T f
/// s.t. equalities, inequalities, X_k PSD, 0 <= f <= 1
/// ```
#[derive(Debug, Clone, PartialEq)]
pub struct ConicProblem {
    pub kind: ProblemKind,
    pub block_size: usize,
    pub costs: Vec<DMatrix<f64>>,
    pub n_box: usize,
    pub linear_cost: Vec<f64>,
    pub equalities: Vec<EqualityConstraint>,
    pub inequalities: Vec<InequalityConstraint>,
}

impl ConicProblem {
    pub fn num_blocks(&self) -> usize {
        self.costs.len()
    }

    /// Equalities touching box variables.
    pub fn num_coupling(&self) -> usize {
        self.equalities.iter().filter(|e| !e.box_terms.is_empty()).count()
    }

    pub fn objective(&self, blocks: &[DMatrix<f64>], f: &[f64]) -> f64 {
        let quad: f64 = self.costs.iter().zip(blocks).map(|(c, x)| c.dot(x)).sum();
        quad + self.linear_cost.iter().zip(f).map(|(c, v)| c * v).sum::<f64>()
    }

    fn equality_value(eq: &EqualityConstraint, blocks: &[DMatrix<f64>], f: &[f64]) -> f64 {
        eq.entries.iter().map(|t| t.coef * blocks[t.block][(t.row, t.col)]).sum::<f64>()
            + eq.box_terms.iter().map(|&(n, c)| c * f[n]).sum::<f64>()
    }

    /// Relative primal infeasibility: the norm of equality residuals and
    /// positive inequality/box violations over `1 + |(b, h)|`.
    pub fn primal_infeasibility(&self, blocks: &[DMatrix<f64>], f: &[f64]) -> f64 {
        let mut res = 0.0;
        let mut rhs = 0.0;
        for eq in &self.equalities {
            res += (eq.rhs - Self::equality_value(eq, blocks, f)).powi(2);
            rhs += eq.rhs * eq.rhs;
        }
        for ineq in &self.inequalities {
            let lhs: f64 = ineq.terms.iter().map(|&(n, c)| c * f[n]).sum();
            res += (lhs - ineq.rhs).max(0.0).powi(2);
            rhs += ineq.rhs * ineq.rhs;
        }
        for &v in f {
            res += (-v).max(0.0).powi(2) + (v - 1.0).max(0.0).powi(2);
        }
        rhs += self.n_box as f64;
        res.sqrt() / (1.0 + rhs.sqrt())
    }

    /// The problem with box variables and every constraint on them removed.
    pub fn strip_code_constraints(&self) -> ConicProblem {
        ConicProblem {
            kind: ProblemKind::Disjoint,
            block_size: self.block_size,
            costs: self.costs.clone(),
            n_box: 0,
            linear_cost: Vec::new(),
            equalities: self.equalities.iter().filter(|e| e.box_terms.is_empty()).cloned().collect(),
            inequalities: Vec::new(),
        }
    }
}

fn check_blocks(costs: &[CostMatrix]) -> Result<usize, SdrError> {
    let side =
        costs.first().ok_or_else(|| SdrError::Dimension("at least one block is required".into()))?.side();
    if let Some(c) = costs.iter().find(|c| c.side() != side || c.0.ncols() != side) {
        return Err(SdrError::Dimension(format!("block of side {} among blocks of side {side}", c.side())));
    }
    Ok(side)
}

fn diagonal_equalities(blocks: usize, side: usize) -> Vec<EqualityConstraint> {
    (0..blocks)
        .flat_map(|k| {
            (0..side).map(move |i| EqualityConstraint {
                entries: vec![EntryTerm { block: k, row: i, col: i, coef: 1.0 }],
                box_terms: Vec::new(),
                rhs: 1.0,
            })
        })
        .collect()
}

/// Unit-diagonal SDR of each snapshot, independent across blocks.
pub fn assemble_disjoint(costs: &[CostMatrix]) -> Result<ConicProblem, SdrError> {
    let side = check_blocks(costs)?;
    Ok(ConicProblem {
        kind: ProblemKind::Disjoint,
        block_size: side,
        costs: costs.iter().map(|c| c.0.clone()).collect(),
        n_box: 0,
        linear_cost: Vec::new(),
        equalities: diagonal_equalities(costs.len(), side),
        inequalities: Vec::new(),
    })
}

/// Disjoint constraints plus `X_k[p, last] = 1 - 2 f_n` for every symbol
/// position and all forbidden-set inequalities of the code.
pub fn assemble_joint_ml(
    costs: &[CostMatrix],
    code: &CodeDefinition,
    map: &BitIndexMap,
) -> Result<ConicProblem, SdrError> {
    let mut problem = assemble_disjoint(costs)?;
    let side = problem.block_size;
    if side != map.bits_per_snapshot() + 1 || costs.len() != map.snapshots() {
        return Err(SdrError::Dimension(format!(
            "{} blocks of side {side} do not match Nt = {}, K = {}",
            costs.len(),
            map.nt(),
            map.snapshots()
        )));
    }
    if code.n() != map.codeword_len() {
        return Err(SdrError::Dimension(format!(
            "code length {} differs from 2*Nt*K = {}",
            code.n(),
            map.codeword_len()
        )));
    }
    let last = side - 1;
    for k in 0..map.snapshots() {
        for p in 0..map.bits_per_snapshot() {
            problem.equalities.push(EqualityConstraint {
                entries: vec![EntryTerm { block: k, row: p, col: last, coef: 1.0 }],
                box_terms: vec![(map.symbol_bit(k, p), 2.0)],
                rhs: 1.0,
            });
        }
    }
    problem.inequalities = enumerate_fs_constraints(code, crate::ldpc::DEFAULT_FS_DEGREE_CAP)?
        .iter()
        .map(|c| InequalityConstraint { terms: c.terms().collect(), rhs: c.rhs() })
        .collect();
    problem.n_box = code.n();
    problem.linear_cost = vec![0.0; code.n()];
    problem.kind = ProblemKind::JointMl;
    Ok(problem)
}

/// Joint ML constraints with the objective augmented by
/// `2 sigma^2 * L_A^T f`.
pub fn assemble_joint_map(
    costs: &[CostMatrix],
    code: &CodeDefinition,
    map: &BitIndexMap,
    priors: &[f64],
    noise_var: f64,
) -> Result<ConicProblem, SdrError> {
    if priors.len() != code.n() {
        return Err(SdrError::Dimension(format!(
            "{} priors for a code of length {}",
            priors.len(),
            code.n()
        )));
    }
    if let Some(i) = priors.iter().position(|p| !p.is_finite()) {
        return Err(SdrError::NonFinitePrior(i));
    }
    let mut problem = assemble_joint_ml(costs, code, map)?;
    problem.linear_cost = priors.iter().map(|l| 2.0 * noise_var * l).collect();
    problem.kind = ProblemKind::JointMap;
    Ok(problem)
}

/// Rank-one blocks `[x_k; 1][x_k; 1]^T` and bits `f` of a transmitted
/// codeword, a feasible point of every form.
pub fn lift_codeword(codeword: &[u8], map: &BitIndexMap) -> (Vec<DMatrix<f64>>, Vec<f64>) {
    let blocks = (0..map.snapshots())
        .map(|k| {
            let x = crate::mimo::snapshot_symbols(codeword, map, k).push(1.0);
            &x * x.transpose()
        })
        .collect();
    (blocks, codeword.iter().map(|&b| f64::from(b)).collect())
}

const DUMP_MAGIC: &str = "anchorsdr-problem 1";

/// Writes the sparse text dump, one line per term:
///
/// ```text
/// anchorsdr-problem 1
/// kind <disjoint|joint-ml|joint-map>
/// blocks <K> <side>
/// box <p>
/// C <k> <i> <j> <value>        upper triangle, i <= j
/// c <n> <value>
/// eq <id> <rhs>
/// eqx <id> <k> <i> <j> <coef>
/// eqf <id> <n> <coef>
/// ineq <id> <rhs>
/// ineqf <id> <n> <coef>
/// ```
///
/// Indices are zero-based; box bounds `0 <= f <= 1` are implicit.
pub fn write_dump<W: Write>(problem: &ConicProblem, mut out: W) -> Result<(), SdrError> {
    writeln!(out, "{DUMP_MAGIC}")?;
    let kind = match problem.kind {
        ProblemKind::Disjoint => "disjoint",
        ProblemKind::JointMl => "joint-ml",
        ProblemKind::JointMap => "joint-map",
    };
    writeln!(out, "kind {kind}")?;
    writeln!(out, "blocks {} {}", problem.num_blocks(), problem.block_size)?;
    writeln!(out, "box {}", problem.n_box)?;
    for (k, c) in problem.costs.iter().enumerate() {
        for j in 0..c.ncols() {
            for i in 0..=j {
                if c[(i, j)] != 0.0 {
                    writeln!(out, "C {k} {i} {j} {:?}", c[(i, j)])?;
                }
            }
        }
    }
    for (n, &v) in problem.linear_cost.iter().enumerate() {
        if v != 0.0 {
            writeln!(out, "c {n} {v:?}")?;
        }
    }
    for (id, eq) in problem.equalities.iter().enumerate() {
        writeln!(out, "eq {id} {:?}", eq.rhs)?;
        for t in &eq.entries {
            writeln!(out, "eqx {id} {} {} {} {:?}", t.block, t.row, t.col, t.coef)?;
        }
        for &(n, c) in &eq.box_terms {
            writeln!(out, "eqf {id} {n} {c:?}")?;
        }
    }
    for (id, ineq) in problem.inequalities.iter().enumerate() {
        writeln!(out, "ineq {id} {:?}", ineq.rhs)?;
        for &(n, c) in &ineq.terms {
            writeln!(out, "ineqf {id} {n} {c:?}")?;
        }
    }
    Ok(())
}

pub fn read_dump<R: BufRead>(input: R) -> Result<ConicProblem, SdrError> {
    let mut problem = ConicProblem {
        kind: ProblemKind::Disjoint,
        block_size: 0,
        costs: Vec::new(),
        n_box: 0,
        linear_cost: Vec::new(),
        equalities: Vec::new(),
        inequalities: Vec::new(),
    };
    for (idx, line) in input.lines().enumerate() {
        let line = line?;
        let lineno = idx + 1;
        let err = |msg: &str| SdrError::Dump { line: lineno, msg: msg.to_string() };
        if idx == 0 {
            if line.trim() != DUMP_MAGIC {
                return Err(err("missing header"));
            }
            continue;
        }
        let toks: Vec<&str> = line.split_whitespace().collect();
        if toks.is_empty() {
            continue;
        }
        let int = |i: usize| -> Result<usize, SdrError> {
            toks.get(i).and_then(|t| t.parse().ok()).ok_or_else(|| err("bad integer field"))
        };
        let real = |i: usize| -> Result<f64, SdrError> {
            toks.get(i).and_then(|t| t.parse().ok()).ok_or_else(|| err("bad real field"))
        };
        match toks[0] {
            "kind" => {
                problem.kind = match toks.get(1).copied() {
                    Some("disjoint") => ProblemKind::Disjoint,
                    Some("joint-ml") => ProblemKind::JointMl,
                    Some("joint-map") => ProblemKind::JointMap,
                    _ => return Err(err("unknown kind")),
                }
            }
            "blocks" => {
                let (k, side) = (int(1)?, int(2)?);
                problem.block_size = side;
                problem.costs = vec![DMatrix::zeros(side, side); k];
            }
            "box" => {
                problem.n_box = int(1)?;
                problem.linear_cost = vec![0.0; problem.n_box];
            }
            "C" => {
                let (k, i, j, v) = (int(1)?, int(2)?, int(3)?, real(4)?);
                let c = problem.costs.get_mut(k).ok_or_else(|| err("block out of range"))?;
                if i >= c.nrows() || j >= c.ncols() {
                    return Err(err("entry out of range"));
                }
                c[(i, j)] = v;
                c[(j, i)] = v;
            }
            "c" => {
                let (n, v) = (int(1)?, real(2)?);
                *problem.linear_cost.get_mut(n).ok_or_else(|| err("box index out of range"))? = v;
            }
            "eq" => {
                if int(1)? != problem.equalities.len() {
                    return Err(err("equalities out of order"));
                }
                problem.equalities.push(EqualityConstraint {
                    entries: Vec::new(),
                    box_terms: Vec::new(),
                    rhs: real(2)?,
                });
            }
            "eqx" => {
                let id = int(1)?;
                let term = EntryTerm { block: int(2)?, row: int(3)?, col: int(4)?, coef: real(5)? };
                problem.equalities.get_mut(id).ok_or_else(|| err("unknown equality"))?.entries.push(term);
            }
            "eqf" => {
                let (id, n, c) = (int(1)?, int(2)?, real(3)?);
                problem.equalities.get_mut(id).ok_or_else(|| err("unknown equality"))?.box_terms.push((n, c));
            }
            "ineq" => {
                if int(1)? != problem.inequalities.len() {
                    return Err(err("inequalities out of order"));
                }
                problem.inequalities.push(InequalityConstraint { terms: Vec::new(), rhs: real(2)? });
            }
            "ineqf" => {
                let (id, n, c) = (int(1)?, int(2)?, real(3)?);
                problem.inequalities.get_mut(id).ok_or_else(|| err("unknown inequality"))?.terms.push((n, c));
            }
            _ => return Err(err("unknown record")),
        }
    }
    Ok(problem)
}
