//! Iterative detection and decoding.
//!
//! Every receiver alternates a list detector with sum-product decoding and
//! feeds the decoder extrinsic `L_A1` back as detector prior:
//!
//! * `Multi` solves the joint MAP relaxation in every iteration and centers
//!   the lists on its direct extraction.
//! * `Single` solves once, keeps the first detector output `L_E1^init`, and
//!   recenters later lists on `hard(L_E1^init + L_A1)`.
//! * `FullList` replaces the list by the whole cube.

use std::borrow::Cow;
use std::io::Write;
use std::time::{Duration, Instant};

use log::warn;
use thiserror::Error;

use crate::detector::{extrinsic_llr, full_list_detector, gen_list, DetectorError};
use crate::extraction::{extract_direct, hard_decision};
use crate::ldpc::{spa_decode, CodeDefinition, LdpcError, LlrFrame};
use crate::mimo::{BitIndexMap, RealBlockObservation};
use crate::sdr::{assemble_joint_ml, cost_matrices, ConicProblem, ProblemKind, SdrError};
use crate::solver::{ConicSolution, ConicSolver, InteriorPoint, SolveStatus, SolverConfig, SolverError};

#[derive(Debug, Error)]
pub enum TurboError {
    #[error("invalid turbo configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Sdr(#[from] SdrError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Detector(#[from] DetectorError),
    #[error(transparent)]
    Ldpc(#[from] LdpcError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Deserialize, serde::Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum TurboMode {
    Multi,
    Single,
    FullList,
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Deserialize, serde::Serialize)]
#[serde(default, deny_unknown_fields)]
pub struct TurboConfig {
    pub max_turbo_iters: usize,
    /// Hamming radius of the candidate lists.
    pub radius: usize,
    pub clip: f64,
    pub spa_iters: usize,
    pub mode: TurboMode,
    #[serde(skip)]
    pub solver: SolverConfig,
}

impl Default for TurboConfig {
    fn default() -> Self {
        Self {
            max_turbo_iters: 3,
            radius: 2,
            clip: 8.0,
            spa_iters: 30,
            mode: TurboMode::Multi,
            solver: SolverConfig::default(),
        }
    }
}

impl TurboConfig {
    pub fn with_mode(mode: TurboMode) -> Self {
        Self { mode, ..Self::default() }
    }

    pub fn validate(&self) -> Result<(), TurboError> {
        if self.max_turbo_iters == 0 {
            return Err(TurboError::Config("max_turbo_iters must be at least 1".into()));
        }
        if self.radius == 0 {
            return Err(TurboError::Config("radius must be at least 1".into()));
        }
        if !(self.clip > 0.0) {
            return Err(TurboError::Config(format!("clip must be positive, got {}", self.clip)));
        }
        if self.spa_iters == 0 {
            return Err(TurboError::Config("spa_iters must be at least 1".into()));
        }
        self.solver.validate()?;
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct SolveInfo {
    pub objective: f64,
    pub status: SolveStatus,
    pub gap: f64,
    pub primal_infeasibility: f64,
    pub dual_infeasibility: f64,
    pub dual_objective: f64,
}

#[derive(Debug, Clone)]
pub struct IterationRecord {
    pub iteration: usize,
    /// Detector output `L_E1`.
    pub detector_extrinsic: LlrFrame,
    /// Decoder extrinsic `L_A1` produced by this iteration.
    pub decoder_extrinsic: LlrFrame,
    pub hard: Vec<u8>,
    pub parity_ok: bool,
    /// Present when a relaxation was solved in this iteration.
    pub solve: Option<SolveInfo>,
    /// Solver failure replaced by the previous centers.
    pub fell_back: bool,
    /// Wall time since the receiver started.
    pub elapsed: Duration,
}

#[derive(Debug, Clone, Default)]
pub struct TurboTrace {
    pub iterations: Vec<IterationRecord>,
}

impl TurboTrace {
    pub fn solves(&self) -> usize {
        self.iterations.iter().filter(|r| r.solve.is_some()).count()
    }

    /// One `key=value` line per iteration; `truth` adds bit error counts.
    pub fn write_records(&self, truth: Option<&[u8]>, out: &mut dyn Write) -> std::io::Result<()> {
        for r in &self.iterations {
            write!(out, "iteration={} parity_ok={}", r.iteration, r.parity_ok)?;
            match &r.solve {
                Some(s) => write!(out, " objective={:.12e} status={:?}", s.objective, s.status)?,
                None => write!(out, " objective=none")?,
            }
            if let Some(t) = truth {
                let errors = t.iter().zip(&r.hard).filter(|(a, b)| a != b).count();
                write!(out, " bit_errors={errors}")?;
            }
            writeln!(out, " elapsed_s={:.6}", r.elapsed.as_secs_f64())?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct TurboOutput {
    pub decoded: Vec<u8>,
    pub trace: TurboTrace,
}

struct Detection {
    centers: Vec<Vec<f64>>,
    solve: Option<SolveInfo>,
    fell_back: bool,
}

struct Receiver<'a> {
    obs: &'a [RealBlockObservation],
    code: &'a CodeDefinition,
    map: &'a BitIndexMap,
    cfg: &'a TurboConfig,
    solver: &'a dyn ConicSolver,
    noise_var: f64,
    ml_problem: Option<Cow<'a, ConicProblem>>,
    /// Solution of the zero-prior problem computed elsewhere.
    first: Option<ConicSolution>,
}

impl Receiver<'_> {
    fn solve_centers(
        &mut self,
        priors: &[f64],
        previous: Option<&[Vec<f64>]>,
    ) -> Result<Detection, TurboError> {
        let zero_priors = priors.iter().all(|&l| l == 0.0);
        let result = match self.first.take() {
            Some(sol) if zero_priors => Ok(sol),
            _ => {
                let ml = self.ml_problem.as_deref().expect("relaxation assembled");
                if zero_priors {
                    self.solver.solve(ml, &self.cfg.solver)
                } else {
                    let mut problem = ml.clone();
                    problem.linear_cost = priors.iter().map(|l| 2.0 * self.noise_var * l).collect();
                    problem.kind = ProblemKind::JointMap;
                    self.solver.solve(&problem, &self.cfg.solver)
                }
            }
        };
        match result {
            Ok(sol) => {
                if sol.status != SolveStatus::Optimal {
                    warn!("relaxation stopped with status {:?} (gap {:.2e})", sol.status, sol.gap);
                }
                let centers = sol.blocks.iter().map(|x| extract_direct(x).hard()).collect();
                Ok(Detection {
                    centers,
                    solve: Some(SolveInfo {
                        objective: sol.objective,
                        status: sol.status,
                        gap: sol.gap,
                        primal_infeasibility: sol.primal_infeasibility,
                        dual_infeasibility: sol.dual_infeasibility,
                        dual_objective: sol.dual_objective,
                    }),
                    fell_back: false,
                })
            }
            Err(e) => match previous {
                Some(prev) => {
                    warn!("relaxation failed ({e}); reusing previous list centers");
                    Ok(Detection { centers: prev.to_vec(), solve: None, fell_back: true })
                }
                None => Err(e.into()),
            },
        }
    }

    fn list_extrinsics(&self, centers: &[Vec<f64>], priors: &[f64]) -> Result<Vec<f64>, TurboError> {
        let mut out = vec![0.0; self.code.n()];
        for (k, ob) in self.obs.iter().enumerate() {
            let pk = self.map.gather(k, priors);
            let le = match self.cfg.mode {
                TurboMode::FullList => {
                    full_list_detector(&ob.received, &ob.channel, ob.noise_var, &pk, self.cfg.clip)?
                }
                _ => {
                    let list = gen_list(&centers[k], self.cfg.radius)?;
                    extrinsic_llr(&list, &ob.received, &ob.channel, ob.noise_var, &pk, self.cfg.clip)?
                }
            };
            self.map.scatter(k, &le, &mut out);
        }
        Ok(out)
    }

    fn run(&mut self) -> Result<TurboOutput, TurboError> {
        let start = Instant::now();
        let n = self.code.n();
        let mut priors = vec![0.0; n];
        let mut initial: Option<Vec<f64>> = None;
        let mut centers: Option<Vec<Vec<f64>>> = None;
        let mut trace = TurboTrace::default();
        let mut decoded = vec![0u8; n];
        for iteration in 1..=self.cfg.max_turbo_iters {
            let det = match (self.cfg.mode, &initial) {
                (TurboMode::FullList, _) => Detection { centers: Vec::new(), solve: None, fell_back: false },
                (TurboMode::Single, Some(init)) => {
                    let comb: Vec<f64> = init.iter().zip(&priors).map(|(a, b)| a + b).collect();
                    let centers = (0..self.map.snapshots())
                        .map(|k| hard_decision(&self.map.gather(k, &comb)))
                        .collect();
                    Detection { centers, solve: None, fell_back: false }
                }
                _ => self.solve_centers(&priors, centers.as_deref())?,
            };
            let le = self.list_extrinsics(&det.centers, &priors)?;
            if initial.is_none() {
                initial = Some(le.clone());
            }
            let spa = spa_decode(&le, self.code, self.cfg.spa_iters)?;
            priors = spa.extrinsic.0.clone();
            decoded = spa.hard.clone();
            centers = Some(det.centers);
            trace.iterations.push(IterationRecord {
                iteration,
                detector_extrinsic: LlrFrame(le),
                decoder_extrinsic: spa.extrinsic,
                hard: spa.hard,
                parity_ok: spa.parity_ok,
                solve: det.solve,
                fell_back: det.fell_back,
                elapsed: start.elapsed(),
            });
            if spa.parity_ok {
                break;
            }
        }
        Ok(TurboOutput { decoded, trace })
    }
}

fn check_frame(
    obs: &[RealBlockObservation],
    code: &CodeDefinition,
    map: &BitIndexMap,
) -> Result<f64, TurboError> {
    if code.n() != map.codeword_len() || obs.len() != map.snapshots() {
        return Err(TurboError::Config(format!(
            "{} observations and code length {} do not match the bit map ({} snapshots, {} bits)",
            obs.len(),
            code.n(),
            map.snapshots(),
            map.codeword_len()
        )));
    }
    let noise_var = obs[0].noise_var;
    if obs.iter().any(|o| o.noise_var != noise_var) {
        return Err(TurboError::Config("observations of one codeword must share the noise variance".into()));
    }
    Ok(noise_var)
}

/// Runs the receiver selected by `cfg.mode` with a custom solver backend.
pub fn run_turbo_with(
    obs: &[RealBlockObservation],
    code: &CodeDefinition,
    map: &BitIndexMap,
    cfg: &TurboConfig,
    solver: &dyn ConicSolver,
) -> Result<TurboOutput, TurboError> {
    run_turbo_from(obs, code, map, cfg, solver, None, None)
}

/// Like [`run_turbo_with`], reusing an already assembled joint ML problem of
/// these observations and, optionally, its solution for the first iteration.
pub fn run_turbo_from(
    obs: &[RealBlockObservation],
    code: &CodeDefinition,
    map: &BitIndexMap,
    cfg: &TurboConfig,
    solver: &dyn ConicSolver,
    ml_problem: Option<&ConicProblem>,
    first: Option<ConicSolution>,
) -> Result<TurboOutput, TurboError> {
    cfg.validate()?;
    let noise_var = check_frame(obs, code, map)?;
    let ml_problem = match (cfg.mode, ml_problem) {
        (TurboMode::FullList, _) => None,
        (_, Some(p)) => Some(Cow::Borrowed(p)),
        (_, None) => Some(Cow::Owned(assemble_joint_ml(&cost_matrices(obs)?, code, map)?)),
    };
    Receiver { obs, code, map, cfg, solver, noise_var, ml_problem, first }.run()
}

/// One detector pass with the given a-priori LLRs: the joint MAP relaxation
/// and list detector (`Multi`/`Single`) or the full cube (`FullList`).
/// Returns the detector extrinsic `L_E1`.
pub fn detector_pass(
    obs: &[RealBlockObservation],
    code: &CodeDefinition,
    map: &BitIndexMap,
    cfg: &TurboConfig,
    priors: &[f64],
) -> Result<Vec<f64>, TurboError> {
    detector_pass_with(obs, code, map, cfg, priors, &InteriorPoint)
}

pub fn detector_pass_with(
    obs: &[RealBlockObservation],
    code: &CodeDefinition,
    map: &BitIndexMap,
    cfg: &TurboConfig,
    priors: &[f64],
    solver: &dyn ConicSolver,
) -> Result<Vec<f64>, TurboError> {
    cfg.validate()?;
    let noise_var = check_frame(obs, code, map)?;
    if priors.len() != code.n() {
        return Err(TurboError::Config(format!("{} priors for {} bits", priors.len(), code.n())));
    }
    let ml_problem = match cfg.mode {
        TurboMode::FullList => None,
        _ => Some(Cow::Owned(assemble_joint_ml(&cost_matrices(obs)?, code, map)?)),
    };
    let mut rx = Receiver { obs, code, map, cfg, solver, noise_var, ml_problem, first: None };
    let centers = match cfg.mode {
        TurboMode::FullList => Vec::new(),
        _ => rx.solve_centers(priors, None)?.centers,
    };
    rx.list_extrinsics(&centers, priors)
}

pub fn run_turbo(
    obs: &[RealBlockObservation],
    code: &CodeDefinition,
    map: &BitIndexMap,
    cfg: &TurboConfig,
) -> Result<TurboOutput, TurboError> {
    run_turbo_with(obs, code, map, cfg, &InteriorPoint)
}

pub fn turbo_multi(
    obs: &[RealBlockObservation],
    code: &CodeDefinition,
    map: &BitIndexMap,
    cfg: &TurboConfig,
) -> Result<TurboOutput, TurboError> {
    run_turbo(obs, code, map, &TurboConfig { mode: TurboMode::Multi, ..*cfg })
}

pub fn turbo_single(
    obs: &[RealBlockObservation],
    code: &CodeDefinition,
    map: &BitIndexMap,
    cfg: &TurboConfig,
) -> Result<TurboOutput, TurboError> {
    run_turbo(obs, code, map, &TurboConfig { mode: TurboMode::Single, ..*cfg })
}

pub fn full_list_turbo(
    obs: &[RealBlockObservation],
    code: &CodeDefinition,
    map: &BitIndexMap,
    cfg: &TurboConfig,
) -> Result<TurboOutput, TurboError> {
    run_turbo(obs, code, map, &TurboConfig { mode: TurboMode::FullList, ..*cfg })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ldpc::build_regular_code;
    use crate::mimo::{noise_var_for_snr_db, transmit_codeword};
    use crate::sdr::assemble_joint_map;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    struct Frame {
        code: CodeDefinition,
        map: BitIndexMap,
        cw: Vec<u8>,
        obs: Vec<RealBlockObservation>,
    }

    fn frame(snr_db: f64, seed: u64) -> Frame {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let code = build_regular_code(32, 16, 3, &mut ChaCha8Rng::seed_from_u64(2)).unwrap();
        let map = BitIndexMap::for_codeword(2, 32).unwrap();
        let info: Vec<u8> = (0..16).map(|_| rng.random_range(0..2)).collect();
        let cw = code.encode(&info).unwrap();
        let nv = noise_var_for_snr_db(2, snr_db);
        let obs = transmit_codeword(&cw, &map, 2, nv, &mut rng).unwrap();
        Frame { code, map, cw, obs }
    }

    /// Records every problem it receives before delegating.
    struct Recording(std::cell::RefCell<Vec<ConicProblem>>);

    impl ConicSolver for Recording {
        fn solve(
            &self,
            problem: &ConicProblem,
            cfg: &SolverConfig,
        ) -> Result<crate::solver::ConicSolution, SolverError> {
            self.0.borrow_mut().push(problem.clone());
            InteriorPoint.solve(problem, cfg)
        }
    }

    #[test]
    fn noiseless_stops_after_one_iteration() {
        let f = frame(200.0, 1);
        for mode in [TurboMode::Multi, TurboMode::Single, TurboMode::FullList] {
            let out = run_turbo(&f.obs, &f.code, &f.map, &TurboConfig::with_mode(mode)).unwrap();
            assert_eq!(out.decoded, f.cw, "{mode:?}");
            assert_eq!(out.trace.iterations.len(), 1);
            assert!(out.trace.iterations[0].parity_ok);
        }
    }

    #[test]
    fn multi_solves_map_problems_in_each_iteration() {
        for seed in 0..20 {
            let f = frame(2.0, seed);
            let rec = Recording(Default::default());
            let cfg = TurboConfig::with_mode(TurboMode::Multi);
            let out = run_turbo_with(&f.obs, &f.code, &f.map, &cfg, &rec).unwrap();
            let problems = rec.0.borrow();
            assert_eq!(problems.len(), out.trace.iterations.len());
            assert_eq!(out.trace.solves(), out.trace.iterations.len());
            let costs = cost_matrices(&f.obs).unwrap();
            let ml = assemble_joint_ml(&costs, &f.code, &f.map).unwrap();
            assert_eq!(problems[0], ml);
            for (t, p) in problems.iter().enumerate().skip(1) {
                let priors = &out.trace.iterations[t - 1].decoder_extrinsic;
                let map = assemble_joint_map(&costs, &f.code, &f.map, priors, f.obs[0].noise_var).unwrap();
                assert_eq!(p.linear_cost, map.linear_cost);
                assert_eq!(p.inequalities, map.inequalities);
            }
            if out.trace.iterations.len() > 1 {
                return;
            }
        }
        panic!("no frame needed a second iteration");
    }

    #[test]
    fn single_matches_multi_first_iteration_and_solves_once() {
        for seed in 0..6 {
            let f = frame(3.0, seed);
            let multi = turbo_multi(&f.obs, &f.code, &f.map, &TurboConfig::default()).unwrap();
            let single = turbo_single(&f.obs, &f.code, &f.map, &TurboConfig::default()).unwrap();
            let (a, b) = (&multi.trace.iterations[0], &single.trace.iterations[0]);
            assert_eq!(a.detector_extrinsic, b.detector_extrinsic);
            assert_eq!(a.hard, b.hard);
            assert_eq!(single.trace.solves(), 1);
        }
    }

    #[test]
    fn early_termination_and_feedback() {
        for seed in 0..10 {
            let f = frame(4.0, seed);
            let out = turbo_multi(&f.obs, &f.code, &f.map, &TurboConfig::default()).unwrap();
            let its = &out.trace.iterations;
            assert!(its.len() <= 3);
            for (i, r) in its.iter().enumerate() {
                assert_eq!(r.parity_ok, i + 1 == its.len() && r.parity_ok);
            }
            assert_eq!(out.decoded, its.last().unwrap().hard);
            // detector extrinsic feeds the decoder; its output is posterior - input
            let spa = spa_decode(&its[0].detector_extrinsic, &f.code, 30).unwrap();
            assert_eq!(spa.extrinsic, its[0].decoder_extrinsic);
        }
    }

    #[test]
    fn deterministic_and_trace_export() {
        let f = frame(3.0, 7);
        let a = turbo_single(&f.obs, &f.code, &f.map, &TurboConfig::default()).unwrap();
        let b = turbo_single(&f.obs, &f.code, &f.map, &TurboConfig::default()).unwrap();
        assert_eq!(a.decoded, b.decoded);
        let mut buf = Vec::new();
        a.trace.write_records(Some(&f.cw), &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), a.trace.iterations.len());
        assert!(text.starts_with("iteration=1 "));
        assert!(text.contains("bit_errors="));
    }

    #[test]
    fn rejects_bad_config() {
        let f = frame(3.0, 0);
        let bad = TurboConfig { radius: 0, ..TurboConfig::default() };
        assert!(matches!(turbo_multi(&f.obs, &f.code, &f.map, &bad), Err(TurboError::Config(_))));
        let bad = TurboConfig { max_turbo_iters: 0, ..TurboConfig::default() };
        assert!(turbo_single(&f.obs, &f.code, &f.map, &bad).is_err());
    }
}
