//! Monte Carlo BER and EXIT experiments.
//!
//! Trial `t` of every SNR point draws its information bits, channels and
//! noise from stream `t` of the master seed, so all receivers and all SNR
//! points see the same frames (noise only rescaled) and totals do not depend
//! on the number of worker threads. Several receivers can be evaluated on the
//! same frames in one pass; the disjoint and joint ML relaxations are then
//! solved once per frame and their solve time is charged to every receiver
//! that uses them.

use std::cell::OnceCell;
use std::io::Write;
use std::sync::Arc;
use std::time::{Duration, Instant};

use log::{info, warn};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::config::{ConfigError, DecoderKind, ExitDetector, ExperimentConfig, Extraction, ReceiverKind};
use crate::detector::{full_list_detector, ml_brute_force};
use crate::exit::{gen_apriori, measure_mi, ExitError};
use crate::extraction::{extract_direct, extract_randomized, extract_rank1, soft_to_llr};
use crate::ldpc::{bf_decode, spa_decode, CodeDefinition};
use crate::mimo::{noise_var_for_snr_db, transmit_codeword, BitIndexMap, MimoError, RealBlockObservation};
use crate::sdr::{
    assemble_disjoint, assemble_joint_ml, cost_matrices, lift_codeword, ConicProblem, CostMatrix, ProblemKind,
};
use crate::solver::{ConicSolution, ConicSolver, InteriorPoint, SolveStatus, SolverConfig, SolverError};
use crate::turbo::{detector_pass_with, run_turbo_from, TurboConfig, TurboError, TurboMode};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Mimo(#[from] MimoError),
    #[error(transparent)]
    Turbo(#[from] TurboError),
    #[error(transparent)]
    Exit(#[from] ExitError),
    #[error("code length {n} is not a multiple of 2*nt = {per}")]
    CodeShape { n: usize, per: usize },
    #[error("every codeword at {snr_db} dB failed: {reason}")]
    AllFailed { snr_db: f64, reason: String },
}

/// One receiver variant: the detector chain plus, for the single-shot
/// receivers, the extraction rule and the decoder.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ReceiverSpec {
    pub kind: ReceiverKind,
    pub extraction: Extraction,
    pub decoder: DecoderKind,
}

impl ReceiverSpec {
    pub fn new(kind: ReceiverKind, extraction: Extraction, decoder: DecoderKind) -> Self {
        Self { kind, extraction, decoder }
    }

    pub fn turbo(kind: ReceiverKind) -> Self {
        Self { kind, extraction: Extraction::Direct, decoder: DecoderKind::Spa }
    }

    pub fn of(cfg: &ExperimentConfig) -> Self {
        Self { kind: cfg.receiver, extraction: cfg.extraction, decoder: cfg.decoder }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BerRecord {
    pub snr_db: f64,
    pub iteration: usize,
    pub codewords: usize,
    pub bits: usize,
    pub bit_errors: usize,
    pub ber: f64,
    /// Mean wall time per codeword through this iteration.
    pub avg_runtime_s: f64,
    pub info_bits: usize,
    pub info_bit_errors: usize,
    /// Codewords discarded after a solver failure.
    pub failed_codewords: usize,
}

impl BerRecord {
    pub fn info_ber(&self) -> f64 {
        if self.info_bits == 0 {
            0.0
        } else {
            self.info_bit_errors as f64 / self.info_bits as f64
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExitRecord {
    pub snr_db: f64,
    pub i_a: f64,
    pub i_e: f64,
}

/// What the harness knows about one completed relaxation solve.
#[derive(Debug, Clone)]
pub struct SolveAudit {
    pub kind: ProblemKind,
    pub status: SolveStatus,
    pub iterations: usize,
    pub objective: f64,
    pub dual_objective: f64,
    pub gap: f64,
    /// Recomputed from the returned iterate and the problem data.
    pub primal_infeasibility: f64,
    pub dual_infeasibility: f64,
    pub min_eigenvalue: f64,
    pub f_min: f64,
    pub f_max: f64,
    /// Objective at the lifted transmitted codeword, a feasible point.
    pub truth_objective: f64,
}

pub type AuditSink = Arc<dyn Fn(&SolveAudit) + Send + Sync>;

fn audit_solution(
    problem: &ConicProblem,
    sol: &ConicSolution,
    truth: (&[DMatrix<f64>], &[f64]),
) -> SolveAudit {
    let min_eigenvalue =
        sol.blocks.iter().map(|x| x.symmetric_eigenvalues().min()).fold(f64::INFINITY, f64::min);
    let f_min = sol.f.iter().copied().fold(f64::INFINITY, f64::min);
    let f_max = sol.f.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    SolveAudit {
        kind: problem.kind,
        status: sol.status,
        iterations: sol.iterations,
        objective: sol.objective,
        dual_objective: sol.dual_objective,
        gap: sol.gap,
        primal_infeasibility: problem.primal_infeasibility(&sol.blocks, &sol.f),
        dual_infeasibility: sol.dual_infeasibility,
        min_eigenvalue,
        f_min,
        f_max,
        truth_objective: problem.objective(truth.0, truth.1),
    }
}

/// Solver wrapper reporting every solve of one frame to the audit sink.
struct AuditingSolver<'a> {
    sink: Option<&'a AuditSink>,
    truth_blocks: Vec<DMatrix<f64>>,
    truth_f: Vec<f64>,
}

impl ConicSolver for AuditingSolver<'_> {
    fn solve(&self, problem: &ConicProblem, cfg: &SolverConfig) -> Result<ConicSolution, SolverError> {
        let sol = InteriorPoint.solve(problem, cfg)?;
        if let Some(sink) = self.sink {
            sink(&audit_solution(problem, &sol, (&self.truth_blocks, &self.truth_f)));
        }
        Ok(sol)
    }
}

struct Frame {
    info: Vec<u8>,
    codeword: Vec<u8>,
    obs: Vec<RealBlockObservation>,
}

type CachedSolve = Result<(ConicSolution, Duration), String>;

/// Relaxations of one frame shared by all receivers evaluated on it.
struct FrameCache<'a> {
    frame: &'a Frame,
    costs: Vec<CostMatrix>,
    solver: AuditingSolver<'a>,
    joint_problem: OnceCell<(ConicProblem, Duration)>,
    joint: OnceCell<CachedSolve>,
    disjoint: OnceCell<CachedSolve>,
}

impl FrameCache<'_> {
    fn solve_cached(&self, problem: &ConicProblem, cfg: &SolverConfig) -> CachedSolve {
        let start = Instant::now();
        self.solver.solve(problem, cfg).map(|s| (s, start.elapsed())).map_err(|e| e.to_string())
    }

    fn joint_problem(&self, code: &CodeDefinition, map: &BitIndexMap) -> &(ConicProblem, Duration) {
        self.joint_problem.get_or_init(|| {
            let start = Instant::now();
            let p = assemble_joint_ml(&self.costs, code, map).expect("frame matches the code");
            (p, start.elapsed())
        })
    }

    fn joint(&self, code: &CodeDefinition, map: &BitIndexMap, cfg: &SolverConfig) -> &CachedSolve {
        self.joint.get_or_init(|| {
            let (problem, assembly) = self.joint_problem(code, map);
            self.solve_cached(problem, cfg).map(|(s, t)| (s, t + *assembly))
        })
    }

    fn disjoint(&self, cfg: &SolverConfig) -> &CachedSolve {
        self.disjoint.get_or_init(|| {
            let start = Instant::now();
            let problem = assemble_disjoint(&self.costs).expect("blocks share a size");
            let assembly = start.elapsed();
            self.solve_cached(&problem, cfg).map(|(s, t)| (s, t + assembly))
        })
    }
}

/// Hard decisions and cumulative runtime after each iteration.
struct TrialOutcome {
    per_iteration: Vec<(Vec<u8>, Duration)>,
}

#[derive(Debug, Clone, Default)]
struct Tally {
    codewords: usize,
    failed: usize,
    errors: Vec<usize>,
    info_errors: Vec<usize>,
    runtime: Vec<Duration>,
    done: bool,
    last_failure: Option<String>,
}

/// A prepared experiment: configuration, code and bit map.
pub struct Experiment {
    cfg: ExperimentConfig,
    code: CodeDefinition,
    map: BitIndexMap,
    audit: Option<AuditSink>,
}

impl Experiment {
    pub fn new(cfg: ExperimentConfig) -> Result<Self, HarnessError> {
        cfg.validate()?;
        let code = cfg.code.build()?;
        Self::with_code(cfg, code)
    }

    pub fn with_code(cfg: ExperimentConfig, code: CodeDefinition) -> Result<Self, HarnessError> {
        cfg.validate()?;
        let per = 2 * cfg.nt;
        if !code.n().is_multiple_of(per) {
            return Err(HarnessError::CodeShape { n: code.n(), per });
        }
        let map = BitIndexMap::for_codeword(cfg.nt, code.n())?;
        Ok(Self { cfg, code, map, audit: None })
    }

    /// Reports every relaxation solve performed from now on to `sink`.
    pub fn with_audit(mut self, sink: AuditSink) -> Self {
        self.audit = Some(sink);
        self
    }

    pub fn config(&self) -> &ExperimentConfig {
        &self.cfg
    }

    pub fn code(&self) -> &CodeDefinition {
        &self.code
    }

    pub fn map(&self) -> &BitIndexMap {
        &self.map
    }

    fn frame(&self, snr_db: f64, trial: usize) -> Result<Frame, HarnessError> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.cfg.seed);
        rng.set_stream(trial as u64);
        let info: Vec<u8> = (0..self.code.k()).map(|_| rng.random_range(0..2u8)).collect();
        let codeword = self.code.encode(&info).map_err(ConfigError::from)?;
        let noise_var = noise_var_for_snr_db(self.cfg.nt, snr_db);
        let obs = transmit_codeword(&codeword, &self.map, self.cfg.nr, noise_var, &mut rng)?;
        Ok(Frame { info, codeword, obs })
    }

    fn turbo_config(&self, kind: ReceiverKind) -> TurboConfig {
        let mode = match kind {
            ReceiverKind::TurboSingle => TurboMode::Single,
            ReceiverKind::FullListTurbo => TurboMode::FullList,
            _ => TurboMode::Multi,
        };
        TurboConfig { mode, ..self.cfg.turbo }
    }

    fn iterations_of(&self, spec: &ReceiverSpec) -> usize {
        if spec.kind.is_turbo() {
            self.cfg.turbo.max_turbo_iters
        } else {
            1
        }
    }

    /// Decodes one snapshot-wise hard or soft estimate with the chosen decoder.
    fn decode(
        &self,
        decoder: DecoderKind,
        symbols_hard: &[Vec<f64>],
        llrs: impl FnOnce() -> Result<Vec<f64>, HarnessError>,
    ) -> Result<Vec<u8>, HarnessError> {
        let mut polar = vec![0.0; self.code.n()];
        for (k, s) in symbols_hard.iter().enumerate() {
            self.map.scatter(k, s, &mut polar);
        }
        let hard: Vec<u8> = polar.iter().map(|&v| u8::from(v < 0.0)).collect();
        Ok(match decoder {
            DecoderKind::None => hard,
            DecoderKind::Bf => bf_decode(&hard, &self.code, self.cfg.bf_iters).map_err(ConfigError::from)?,
            DecoderKind::Spa => {
                let l = llrs()?;
                spa_decode(&l, &self.code, self.cfg.turbo.spa_iters).map_err(ConfigError::from)?.hard
            }
        })
    }

    fn single_shot(
        &self,
        spec: &ReceiverSpec,
        cache: &FrameCache,
        trial: usize,
    ) -> Result<TrialOutcome, String> {
        let clip = self.cfg.turbo.clip;
        let solved = match spec.kind {
            ReceiverKind::JointMlSdr => Some(cache.joint(&self.code, &self.map, &self.cfg.turbo.solver)),
            ReceiverKind::DisjointMlSdr => Some(cache.disjoint(&self.cfg.turbo.solver)),
            _ => None,
        };
        let start = Instant::now();
        let (hard, charged) = match solved {
            Some(result) => {
                let (sol, solve_time) = result.as_ref().map_err(Clone::clone)?;
                let (hard, soft): (Vec<Vec<f64>>, Vec<Vec<f64>>) = match spec.extraction {
                    Extraction::Direct | Extraction::Rank1 => sol
                        .blocks
                        .iter()
                        .map(|x| {
                            let s = if spec.extraction == Extraction::Direct {
                                extract_direct(x)
                            } else {
                                extract_rank1(x).soft
                            };
                            (s.hard(), s.0)
                        })
                        .unzip(),
                    Extraction::Randomized => {
                        let mut rng = ChaCha8Rng::seed_from_u64(self.cfg.seed ^ 0x5a5a_5a5a);
                        rng.set_stream(trial as u64);
                        let hard = sol
                            .blocks
                            .iter()
                            .zip(&cache.costs)
                            .map(|(x, c)| {
                                extract_randomized(x, c, self.cfg.randomization_trials, &mut rng).symbols
                            })
                            .collect();
                        (hard, Vec::new())
                    }
                };
                let bits = self
                    .decode(spec.decoder, &hard, || {
                        let mut l = vec![0.0; self.code.n()];
                        for (k, s) in soft.iter().enumerate() {
                            self.map.scatter(k, &soft_to_llr(s, clip), &mut l);
                        }
                        Ok(l)
                    })
                    .map_err(|e| e.to_string())?;
                (bits, *solve_time)
            }
            None => {
                let obs = &cache.frame.obs;
                let hard: Vec<Vec<f64>> = obs
                    .iter()
                    .map(|o| ml_brute_force(&o.received, &o.channel).map_err(|e| e.to_string()))
                    .collect::<Result<_, _>>()?;
                let bits = self
                    .decode(spec.decoder, &hard, || {
                        let mut l = vec![0.0; self.code.n()];
                        for (k, o) in obs.iter().enumerate() {
                            let zero = vec![0.0; self.map.bits_per_snapshot()];
                            let le = full_list_detector(&o.received, &o.channel, o.noise_var, &zero, clip)
                                .map_err(TurboError::from)?;
                            self.map.scatter(k, &le, &mut l);
                        }
                        Ok(l)
                    })
                    .map_err(|e| e.to_string())?;
                (bits, Duration::ZERO)
            }
        };
        Ok(TrialOutcome { per_iteration: vec![(hard, charged + start.elapsed())] })
    }

    fn turbo(&self, spec: &ReceiverSpec, cache: &FrameCache) -> Result<TrialOutcome, String> {
        let cfg = self.turbo_config(spec.kind);
        let (problem, first, charged) = match cfg.mode {
            TurboMode::FullList => (None, None, Duration::ZERO),
            _ => {
                let (sol, t) =
                    cache.joint(&self.code, &self.map, &cfg.solver).as_ref().map_err(Clone::clone)?;
                (Some(&cache.joint_problem(&self.code, &self.map).0), Some(sol.clone()), *t)
            }
        };
        let out =
            run_turbo_from(&cache.frame.obs, &self.code, &self.map, &cfg, &cache.solver, problem, first)
                .map_err(|e| e.to_string())?;
        let its = &out.trace.iterations;
        let per_iteration = (0..cfg.max_turbo_iters)
            .map(|t| {
                let r = &its[t.min(its.len() - 1)];
                (r.hard.clone(), charged + r.elapsed)
            })
            .collect();
        Ok(TrialOutcome { per_iteration })
    }

    fn run_trial(
        &self,
        snr_db: f64,
        trial: usize,
        receivers: &[(usize, ReceiverSpec)],
    ) -> Result<(Frame, Vec<(usize, Result<TrialOutcome, String>)>), HarnessError> {
        let frame = self.frame(snr_db, trial)?;
        let (truth_blocks, truth_f) = lift_codeword(&frame.codeword, &self.map);
        let cache = FrameCache {
            frame: &frame,
            costs: cost_matrices(&frame.obs).map_err(TurboError::from)?,
            solver: AuditingSolver { sink: self.audit.as_ref(), truth_blocks, truth_f },
            joint_problem: OnceCell::new(),
            joint: OnceCell::new(),
            disjoint: OnceCell::new(),
        };
        let results = receivers
            .iter()
            .map(|(slot, spec)| {
                let r = if spec.kind.is_turbo() {
                    self.turbo(spec, &cache)
                } else {
                    self.single_shot(spec, &cache, trial)
                };
                (*slot, r)
            })
            .collect();
        drop(cache);
        Ok((frame, results))
    }

    /// BER curve of the configured receiver.
    pub fn run_ber(&self) -> Result<Vec<BerRecord>, HarnessError> {
        Ok(self.run_ber_group(&[ReceiverSpec::of(&self.cfg)])?.remove(0))
    }

    /// BER curves of several receivers on identical frames. Each receiver
    /// stops independently, so its records equal those of a solo run.
    pub fn run_ber_group(&self, receivers: &[ReceiverSpec]) -> Result<Vec<Vec<BerRecord>>, HarnessError> {
        for spec in receivers {
            let mut c = self.cfg.clone();
            c.receiver = spec.kind;
            c.extraction = spec.extraction;
            c.decoder = spec.decoder;
            c.validate()?;
        }
        let mut out = vec![Vec::new(); receivers.len()];
        let limits = self.cfg.trials;
        let chunk = (2 * rayon::current_num_threads()).max(2);
        for &snr_db in &self.cfg.snr_db {
            let mut tallies: Vec<Tally> = receivers
                .iter()
                .map(|s| {
                    let iters = self.iterations_of(s);
                    Tally {
                        errors: vec![0; iters],
                        info_errors: vec![0; iters],
                        runtime: vec![Duration::ZERO; iters],
                        ..Tally::default()
                    }
                })
                .collect();
            let mut next = 0usize;
            while tallies.iter().any(|t| !t.done) {
                let active: Vec<(usize, ReceiverSpec)> = receivers
                    .iter()
                    .enumerate()
                    .filter(|(i, _)| !tallies[*i].done)
                    .map(|(i, s)| (i, *s))
                    .collect();
                let batch: Vec<_> = (next..next + chunk)
                    .into_par_iter()
                    .map(|t| self.run_trial(snr_db, t, &active))
                    .collect();
                next += chunk;
                for item in batch {
                    let (frame, results) = item?;
                    for (slot, result) in results {
                        let tally = &mut tallies[slot];
                        if tally.done {
                            continue;
                        }
                        match result {
                            Ok(outcome) => {
                                tally.codewords += 1;
                                for (t, (bits, elapsed)) in outcome.per_iteration.iter().enumerate() {
                                    tally.errors[t] +=
                                        bits.iter().zip(&frame.codeword).filter(|(a, b)| a != b).count();
                                    tally.info_errors[t] += self
                                        .code
                                        .info_bits(bits)
                                        .iter()
                                        .zip(&frame.info)
                                        .filter(|(a, b)| a != b)
                                        .count();
                                    tally.runtime[t] += *elapsed;
                                }
                            }
                            Err(reason) => {
                                warn!("codeword discarded at {snr_db} dB: {reason}");
                                tally.failed += 1;
                                tally.last_failure = Some(reason);
                            }
                        }
                        let final_errors = *tally.errors.last().expect("at least one iteration");
                        tally.done = tally.codewords + tally.failed >= limits.max_codewords
                            || (final_errors >= limits.max_bit_errors
                                && tally.codewords >= limits.min_codewords);
                    }
                }
            }
            for (slot, tally) in tallies.into_iter().enumerate() {
                if tally.codewords == 0 {
                    return Err(HarnessError::AllFailed {
                        snr_db,
                        reason: tally.last_failure.unwrap_or_default(),
                    });
                }
                let bits = tally.codewords * self.code.n();
                let info_bits = tally.codewords * self.code.k();
                for t in 0..tally.errors.len() {
                    out[slot].push(BerRecord {
                        snr_db,
                        iteration: t + 1,
                        codewords: tally.codewords,
                        bits,
                        bit_errors: tally.errors[t],
                        ber: tally.errors[t] as f64 / bits as f64,
                        avg_runtime_s: tally.runtime[t].as_secs_f64() / tally.codewords as f64,
                        info_bits,
                        info_bit_errors: tally.info_errors[t],
                        failed_codewords: tally.failed,
                    });
                }
                let last = out[slot].last().expect("record pushed");
                info!(
                    "{:?} {snr_db} dB: {} codewords, BER {:.3e}",
                    receivers[slot].kind, last.codewords, last.ber
                );
            }
        }
        Ok(out)
    }

    /// Extrinsic information of one detector pass for each `(SNR, I_A)`.
    pub fn run_exit(&self) -> Result<Vec<ExitRecord>, HarnessError> {
        let mode = match self.cfg.exit.detector {
            ExitDetector::JointMapSdr => TurboMode::Multi,
            ExitDetector::FullList => TurboMode::FullList,
        };
        let cfg = TurboConfig { mode, ..self.cfg.turbo };
        let mut out = Vec::new();
        for &snr_db in &self.cfg.snr_db {
            for (ia_index, &i_a) in self.cfg.exit.i_a.iter().enumerate() {
                let parts: Vec<(Vec<f64>, Vec<f64>)> = (0..self.cfg.exit.codewords)
                    .into_par_iter()
                    .map(|t| -> Result<_, HarnessError> {
                        let frame = self.frame(snr_db, t)?;
                        let polar: Vec<f64> =
                            frame.codeword.iter().map(|&b| 1.0 - 2.0 * f64::from(b)).collect();
                        let mut rng = ChaCha8Rng::seed_from_u64(
                            self.cfg.seed ^ (ia_index as u64 + 1).wrapping_mul(0x9e37_79b9_7f4a_7c15),
                        );
                        rng.set_stream(t as u64);
                        let priors = gen_apriori(i_a, &polar, &mut rng)?;
                        let (truth_blocks, truth_f) = lift_codeword(&frame.codeword, &self.map);
                        let solver = AuditingSolver { sink: self.audit.as_ref(), truth_blocks, truth_f };
                        let le =
                            detector_pass_with(&frame.obs, &self.code, &self.map, &cfg, &priors, &solver)?;
                        Ok((le, polar))
                    })
                    .collect::<Result<_, _>>()?;
                let (llrs, bits): (Vec<f64>, Vec<f64>) =
                    parts.into_iter().flat_map(|(l, b)| l.into_iter().zip(b)).unzip();
                let i_e = measure_mi(&llrs, &bits)?;
                info!("exit {snr_db} dB: I_A {i_a:.3} -> I_E {i_e:.4}");
                out.push(ExitRecord { snr_db, i_a, i_e });
            }
        }
        Ok(out)
    }
}

pub fn run_ber(cfg: &ExperimentConfig) -> Result<Vec<BerRecord>, HarnessError> {
    Experiment::new(cfg.clone())?.run_ber()
}

pub fn run_exit(cfg: &ExperimentConfig) -> Result<Vec<ExitRecord>, HarnessError> {
    Experiment::new(cfg.clone())?.run_exit()
}

/// Settings of [`oracle_check`]. `snr_db = None` transmits without noise.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleSettings {
    pub nt: usize,
    pub nr: usize,
    pub snr_db: Option<f64>,
    pub instances: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleReport {
    pub instances: usize,
    /// Disjoint relaxation, direct extraction and hard decision equal to the
    /// exhaustive ML point.
    pub sdr_ml_matches: usize,
    pub solver_failures: usize,
    /// Largest relaxation optimum seen.
    pub max_objective: f64,
    /// Largest `|list - full|` of unclipped extrinsics with a radius covering
    /// the whole cube and random priors.
    pub max_list_full_diff: f64,
}

/// Small-dimension checks of the relaxation and the list detector against
/// exhaustive search, one random snapshot per instance.
pub fn oracle_check(
    settings: &OracleSettings,
    audit: Option<&AuditSink>,
) -> Result<OracleReport, HarnessError> {
    use crate::detector::{extrinsic_llr_raw, full_list_raw, gen_list};
    use crate::extraction::hard_decision;

    let dim = 2 * settings.nt;
    if dim > crate::detector::MAX_EXHAUSTIVE_DIM || settings.nr == 0 || settings.instances == 0 {
        return Err(ConfigError::Invalid(format!(
            "oracle check needs 0 < 2*nt <= {} and nr, instances > 0",
            crate::detector::MAX_EXHAUSTIVE_DIM
        ))
        .into());
    }
    let map = BitIndexMap::new(settings.nt, 1)?;
    let transmit_var = settings.snr_db.map_or(0.0, |s| noise_var_for_snr_db(settings.nt, s));
    let detect_var = if transmit_var > 0.0 { transmit_var } else { 1.0 };
    let per: Vec<Result<(bool, Option<f64>, f64), HarnessError>> = (0..settings.instances)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(settings.seed);
            rng.set_stream(i as u64);
            let bits: Vec<u8> = (0..dim).map(|_| rng.random_range(0..2u8)).collect();
            let obs = transmit_codeword(&bits, &map, settings.nr, transmit_var, &mut rng)?;
            let o = &obs[0];
            let (truth_blocks, truth_f) = lift_codeword(&bits, &map);
            let solver = AuditingSolver { sink: audit, truth_blocks, truth_f };
            let problem = assemble_disjoint(&cost_matrices(&obs).map_err(TurboError::from)?)
                .map_err(TurboError::from)?;
            let ml = ml_brute_force(&o.received, &o.channel).map_err(TurboError::from)?;
            let (matched, objective) = match solver.solve(&problem, &SolverConfig::default()) {
                Ok(sol) => (hard_decision(&extract_direct(&sol.blocks[0]).0) == ml, Some(sol.objective)),
                Err(e) => {
                    warn!("oracle instance {i}: {e}");
                    (false, None)
                }
            };
            let priors: Vec<f64> = (0..dim).map(|_| rng.random_range(-4.0..4.0)).collect();
            let center: Vec<f64> = (0..dim).map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 }).collect();
            let list = gen_list(&center, dim).map_err(TurboError::from)?;
            let a = extrinsic_llr_raw(&list, &o.received, &o.channel, detect_var, &priors)
                .map_err(TurboError::from)?;
            let b = full_list_raw(&o.received, &o.channel, detect_var, &priors).map_err(TurboError::from)?;
            let diff = a.iter().zip(&b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
            Ok((matched, objective, diff))
        })
        .collect();
    let mut report = OracleReport {
        instances: settings.instances,
        sdr_ml_matches: 0,
        solver_failures: 0,
        max_objective: f64::NEG_INFINITY,
        max_list_full_diff: 0.0,
    };
    for item in per {
        let (matched, objective, diff) = item?;
        report.sdr_ml_matches += usize::from(matched);
        match objective {
            Some(v) => report.max_objective = report.max_objective.max(v),
            None => report.solver_failures += 1,
        }
        report.max_list_full_diff = report.max_list_full_diff.max(diff);
    }
    Ok(report)
}

pub const BER_CSV_HEADER: &str = "snr_db,iteration,codewords,bits,bit_errors,ber,avg_runtime_s";
pub const INFO_CSV_HEADER: &str = "snr_db,iteration,codewords,info_bits,info_bit_errors,info_ber";
pub const EXIT_CSV_HEADER: &str = "snr_db,i_a,i_e";

pub fn write_ber_csv(records: &[BerRecord], mut out: impl Write) -> std::io::Result<()> {
    writeln!(out, "{BER_CSV_HEADER}")?;
    for r in records {
        writeln!(
            out,
            "{},{},{},{},{},{:.6e},{:.6e}",
            r.snr_db, r.iteration, r.codewords, r.bits, r.bit_errors, r.ber, r.avg_runtime_s
        )?;
    }
    Ok(())
}

pub fn write_info_csv(records: &[BerRecord], mut out: impl Write) -> std::io::Result<()> {
    writeln!(out, "{INFO_CSV_HEADER}")?;
    for r in records {
        writeln!(
            out,
            "{},{},{},{},{},{:.6e}",
            r.snr_db,
            r.iteration,
            r.codewords,
            r.info_bits,
            r.info_bit_errors,
            r.info_ber()
        )?;
    }
    Ok(())
}

pub fn write_exit_csv(records: &[ExitRecord], mut out: impl Write) -> std::io::Result<()> {
    writeln!(out, "{EXIT_CSV_HEADER}")?;
    for r in records {
        writeln!(out, "{},{},{:.6}", r.snr_db, r.i_a, r.i_e)?;
    }
    Ok(())
}

/// SNR at which a BER curve crosses `target`, interpolating `log10(BER)`
/// linearly between the bracketing points. `None` when the curve does not
/// reach the target.
pub fn snr_at_ber(points: &[(f64, f64)], target: f64) -> Option<f64> {
    let mut pts: Vec<(f64, f64)> = points.to_vec();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    for w in pts.windows(2) {
        let ((s0, b0), (s1, b1)) = (w[0], w[1]);
        if b0 >= target && b1 <= target {
            if b1 <= 0.0 || b0 == b1 {
                return Some(if b0 == target { s0 } else { s1 });
            }
            let (l0, l1, lt) = (b0.log10(), b1.log10(), target.log10());
            return Some(s0 + (s1 - s0) * (l0 - lt) / (l0 - l1));
        }
    }
    None
}
