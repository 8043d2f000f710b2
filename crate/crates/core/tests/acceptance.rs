//! End-to-end acceptance run. Prints one PASS/FAIL line per criterion.
//!
//! Exact criteria (1-4, 10) decide the exit status. The Monte Carlo trend
//! criteria (5-9) are reported but do not fail the run, since their outcome
//! is a measurement rather than a correctness property.

use std::sync::{Arc, Mutex};
use std::time::Instant;

use anchorsdr::config::{DecoderKind, ExitDetector, ExperimentConfig, Extraction, ReceiverKind};
use anchorsdr::exit::{gen_apriori, measure_mi};
use anchorsdr::harness::{
    oracle_check, snr_at_ber, BerRecord, Experiment, OracleSettings, ReceiverSpec, SolveAudit,
};
use anchorsdr::ldpc::{enumerate_fs_constraints, CodeDefinition, DEFAULT_FS_DEGREE_CAP};
use anchorsdr::mimo::{noise_var_for_snr_db, transmit_codeword};
use anchorsdr::sdr::ProblemKind;
use anchorsdr::solver::{SolveStatus, SolverConfig};
use anchorsdr::turbo::{run_turbo, TurboConfig, TurboMode};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const SEED: u64 = 20;
const TARGET_BER: f64 = 1e-3;
const MAX_CODEWORDS: usize = 2500;
const MIN_ERRORS: usize = 200;
/// Two-sided 95% normal quantile for binomial comparisons.
const Z: f64 = 1.96;
/// Allowed step-to-step runtime increase, absorbing timer noise.
const RUNTIME_NOISE: f64 = 0.05;

const DISJOINT_GRID: [f64; 3] = [6.5, 7.25, 8.0];
const JOINT_GRID: [f64; 3] = [4.5, 5.25, 6.0];
const TURBO_GRID: [f64; 4] = [3.5, 4.25, 5.0, 5.75];
const EXIT_SNR: f64 = 4.0;

struct Report {
    enforced_failures: usize,
    trend_failures: usize,
}

impl Report {
    fn line(&mut self, id: &str, enforced: bool, ok: bool, detail: String) {
        println!("[{}] criterion {id}: {detail}", if ok { "PASS" } else { "FAIL" });
        if !ok {
            if enforced {
                self.enforced_failures += 1;
            } else {
                self.trend_failures += 1;
            }
        }
    }
}

fn paper_config(receiver: ReceiverKind, grid: &[f64]) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::new(receiver, grid.to_vec());
    cfg.seed = SEED;
    cfg.trials.max_codewords = MAX_CODEWORDS;
    cfg.trials.max_bit_errors = MIN_ERRORS;
    cfg
}

fn curve(records: &[BerRecord], iteration: usize) -> Vec<(f64, f64)> {
    records.iter().filter(|r| r.iteration == iteration).map(|r| (r.snr_db, r.ber)).collect()
}

fn describe(records: &[BerRecord], iteration: usize) -> String {
    records
        .iter()
        .filter(|r| r.iteration == iteration)
        .map(|r| format!("{}dB:{:.2e}({}e/{}cw)", r.snr_db, r.ber, r.bit_errors, r.codewords))
        .collect::<Vec<_>>()
        .join(" ")
}

/// Errors in a comparison point have to be well sampled where BER >= target.
fn well_sampled(records: &[BerRecord]) -> bool {
    records.iter().all(|r| r.ber < TARGET_BER || r.bit_errors >= MIN_ERRORS)
}

fn se(r: &BerRecord) -> f64 {
    (r.ber * (1.0 - r.ber) / r.bits as f64).sqrt()
}

/// `a <= b` up to the binomial uncertainty of both estimates.
fn not_worse(a: &BerRecord, b: &BerRecord) -> bool {
    a.ber <= b.ber + Z * (se(a).powi(2) + se(b).powi(2)).sqrt()
}

fn fmt_snr(v: Option<f64>) -> String {
    v.map_or("not reached".into(), |s| format!("{s:.2} dB"))
}

fn criterion_1(rep: &mut Report) {
    let start = Instant::now();
    let code = CodeDefinition::hamming74();
    let fs = enumerate_fs_constraints(&code, DEFAULT_FS_DEGREE_CAP).unwrap();
    let mut agree = 0;
    for v in 0u32..128 {
        let word: Vec<u8> = (0..7).map(|i| (v >> i & 1) as u8).collect();
        let f: Vec<f64> = word.iter().map(|&b| f64::from(b)).collect();
        let in_polytope = fs.iter().all(|c| c.is_satisfied(&f, 1e-12));
        agree += usize::from(in_polytope == code.check_parity(&word).unwrap());
    }
    let t = start.elapsed().as_secs_f64();
    rep.line(
        "1",
        true,
        agree == 128 && t < 1.0,
        format!("FS satisfaction vs parity on all 128 words of the (7,4) code: {agree}/128 agree, {t:.3} s"),
    );
}

fn criterion_2_3(rep: &mut Report, sink: &anchorsdr::harness::AuditSink) {
    let start = Instant::now();
    let noisy = OracleSettings { nt: 2, nr: 2, snr_db: Some(12.0), instances: 200, seed: SEED };
    let a = oracle_check(&noisy, Some(sink)).unwrap();
    let clean = OracleSettings { snr_db: None, instances: 50, ..noisy };
    let b = oracle_check(&clean, Some(sink)).unwrap();
    let t = start.elapsed().as_secs_f64();
    let ok = a.sdr_ml_matches * 100 >= 95 * a.instances
        && b.sdr_ml_matches == b.instances
        && b.max_objective <= 1e-6
        && t < 60.0;
    rep.line(
        "2",
        true,
        ok,
        format!(
            "disjoint SDR vs exhaustive ML: 12 dB {}/{} match (need 95%), noiseless {}/{} match with max objective {:.1e} (need <= 1e-6), {t:.1} s",
            a.sdr_ml_matches, a.instances, b.sdr_ml_matches, b.instances, b.max_objective
        ),
    );

    let full = OracleSettings { nt: 4, nr: 4, snr_db: Some(6.0), instances: 100, seed: SEED + 1 };
    let c = oracle_check(&full, Some(sink)).unwrap();
    rep.line(
        "3",
        true,
        c.max_list_full_diff <= 1e-12,
        format!(
            "radius-2Nt list vs full cube, 100 instances (Nt = 4): max |diff| {:.2e} (need <= 1e-12)",
            c.max_list_full_diff
        ),
    );
}

fn criterion_5(rep: &mut Report, sink: &anchorsdr::harness::AuditSink) {
    let start = Instant::now();
    let run = |kind, grid: &[f64]| {
        let exp = Experiment::new(paper_config(kind, grid)).unwrap().with_audit(sink.clone());
        exp.run_ber_group(&[
            ReceiverSpec::new(kind, Extraction::Direct, DecoderKind::Spa),
            ReceiverSpec::new(kind, Extraction::Rank1, DecoderKind::Spa),
        ])
        .unwrap()
    };
    let disjoint = run(ReceiverKind::DisjointMlSdr, &DISJOINT_GRID);
    let joint = run(ReceiverKind::JointMlSdr, &JOINT_GRID);
    let at = |r: &[BerRecord]| snr_at_ber(&curve(r, 1), TARGET_BER);
    let (d, dr, j, jr) = (at(&disjoint[0]), at(&disjoint[1]), at(&joint[0]), at(&joint[1]));
    let sampled = disjoint.iter().chain(&joint).all(|r| well_sampled(r));
    for (name, recs) in [
        ("disjoint direct", &disjoint[0]),
        ("disjoint rank-1", &disjoint[1]),
        ("joint direct", &joint[0]),
        ("joint rank-1", &joint[1]),
    ] {
        println!("    {name}: {}", describe(recs, 1));
    }
    let gain = d.zip(j).map(|(d, j)| d - j);
    rep.line(
        "5a",
        false,
        sampled && gain.is_some_and(|g| g >= 1.0),
        format!(
            "SNR at BER 1e-3 with SPA: disjoint {}, joint {}, gain {} (need >= 1.0 dB), {:.0} s",
            fmt_snr(d),
            fmt_snr(j),
            gain.map_or("n/a".into(), |g| format!("{g:.2} dB")),
            start.elapsed().as_secs_f64()
        ),
    );
    let close = |a: Option<f64>, b: Option<f64>| a.zip(b).map(|(a, b)| (a - b).abs());
    let (cd, cj) = (close(d, dr), close(j, jr));
    rep.line(
        "5b",
        false,
        sampled && cd.is_some_and(|v| v <= 0.3) && cj.is_some_and(|v| v <= 0.3),
        format!(
            "rank-1 vs direct extraction at BER 1e-3: disjoint {} vs {}, joint {} vs {} (need within 0.3 dB)",
            fmt_snr(dr),
            fmt_snr(d),
            fmt_snr(jr),
            fmt_snr(j)
        ),
    );
}

fn criterion_6_7_8(rep: &mut Report, sink: &anchorsdr::harness::AuditSink) {
    let start = Instant::now();
    let exp = Experiment::new(paper_config(ReceiverKind::TurboMulti, &TURBO_GRID))
        .unwrap()
        .with_audit(sink.clone());
    let recs = exp
        .run_ber_group(&[
            ReceiverSpec::turbo(ReceiverKind::TurboMulti),
            ReceiverSpec::turbo(ReceiverKind::TurboSingle),
            ReceiverSpec::turbo(ReceiverKind::FullListTurbo),
        ])
        .unwrap();
    let (multi, single, full) = (&recs[0], &recs[1], &recs[2]);
    for (name, r) in [("multi", multi), ("single", single), ("full-list", full)] {
        for it in 1..=3 {
            println!("    {name} iteration {it}: {}", describe(r, it));
        }
    }
    let point = |r: &[BerRecord], snr: f64, it: usize| {
        r.iter().find(|x| x.snr_db == snr && x.iteration == it).unwrap().clone()
    };
    let mut monotone = true;
    let mut beats_full = true;
    for &snr in &TURBO_GRID {
        for it in 1..3 {
            monotone &= not_worse(&point(multi, snr, it + 1), &point(multi, snr, it));
        }
        beats_full &= not_worse(&point(multi, snr, 1), &point(full, snr, 1));
    }
    rep.line(
        "6",
        false,
        monotone && beats_full,
        format!(
            "turbo-multi BER non-increasing over iterations 1-3 at every SNR: {monotone}; iteration-1 BER <= full-list iteration 1: {beats_full} (95% binomial), {:.0} s",
            start.elapsed().as_secs_f64()
        ),
    );

    // iteration 1 of the two modes, run independently on the same frames
    let code = exp.code();
    let map = exp.map();
    let mut identical = 0;
    let frames = 10;
    for t in 0..frames {
        let mut rng = ChaCha8Rng::seed_from_u64(SEED + 2);
        rng.set_stream(t);
        let info: Vec<u8> = (0..code.k()).map(|_| rng.random_range(0..2u8)).collect();
        let cw = code.encode(&info).unwrap();
        let obs = transmit_codeword(&cw, map, 4, noise_var_for_snr_db(4, 4.25), &mut rng).unwrap();
        let m = run_turbo(&obs, code, map, &TurboConfig::with_mode(TurboMode::Multi)).unwrap();
        let s = run_turbo(&obs, code, map, &TurboConfig::with_mode(TurboMode::Single)).unwrap();
        let (a, b) = (&m.trace.iterations[0], &s.trace.iterations[0]);
        let same_bits = |x: &[f64], y: &[f64]| x.iter().zip(y).all(|(p, q)| p.to_bits() == q.to_bits());
        if same_bits(&a.detector_extrinsic.0, &b.detector_extrinsic.0)
            && same_bits(&a.decoder_extrinsic.0, &b.decoder_extrinsic.0)
            && a.hard == b.hard
        {
            identical += 1;
        }
    }
    let (sm, ss) = (snr_at_ber(&curve(multi, 3), TARGET_BER), snr_at_ber(&curve(single, 3), TARGET_BER));
    let sampled = well_sampled(multi) && well_sampled(single);
    let within = sm.zip(ss).map(|(m, s)| (s - m).abs());
    rep.line(
        "7",
        false,
        identical == frames && sampled && within.is_some_and(|w| w <= 0.5),
        format!(
            "single vs multi: iteration 1 bit-identical on {identical}/{frames} frames; iteration-3 SNR at BER 1e-3 multi {}, single {} (need within 0.5 dB)",
            fmt_snr(sm),
            fmt_snr(ss)
        ),
    );

    let runtimes =
        |r: &[BerRecord]| -> Vec<f64> { TURBO_GRID.iter().map(|&s| point(r, s, 3).avg_runtime_s).collect() };
    let decreasing =
        |v: &[f64]| v.last() < v.first() && v.windows(2).all(|w| w[1] <= w[0] * (1.0 + RUNTIME_NOISE));
    let (rm, rs) = (runtimes(multi), runtimes(single));
    let ms = |v: &[f64]| v.iter().map(|x| format!("{:.1}", 1e3 * x)).collect::<Vec<_>>().join("/");
    rep.line(
        "8",
        false,
        rs[0] < rm[0] && decreasing(&rm) && decreasing(&rs),
        format!(
            "per-codeword runtime (ms) over {:?} dB: multi {}, single {}; single < multi at lowest SNR: {}; multi decreasing: {}; single decreasing: {}",
            TURBO_GRID,
            ms(&rm),
            ms(&rs),
            rs[0] < rm[0],
            decreasing(&rm),
            decreasing(&rs)
        ),
    );
}

fn criterion_9(rep: &mut Report, sink: &anchorsdr::harness::AuditSink) {
    let exit_at = |detector| {
        let mut cfg = paper_config(ReceiverKind::TurboMulti, &[EXIT_SNR]);
        cfg.exit.detector = detector;
        cfg.exit.i_a = vec![0.0];
        cfg.exit.codewords = 50;
        Experiment::new(cfg).unwrap().with_audit(sink.clone()).run_exit().unwrap()[0].i_e
    };
    let joint = exit_at(ExitDetector::JointMapSdr);
    let full = exit_at(ExitDetector::FullList);
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let bits: Vec<f64> = (0..100_000).map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 }).collect();
    let worst = [0.1, 0.3, 0.5, 0.7, 0.9]
        .iter()
        .map(|&t| (measure_mi(&gen_apriori(t, &bits, &mut rng).unwrap(), &bits).unwrap() - t).abs())
        .fold(0.0, f64::max);
    rep.line(
        "9a",
        false,
        joint - full >= 0.05,
        format!(
            "I_E at I_A = 0, {EXIT_SNR} dB, 50 codewords: joint MAP-SDR {joint:.4}, full list {full:.4}, margin {:.4} (need >= 0.05)",
            joint - full
        ),
    );
    rep.line(
        "9b",
        true,
        worst <= 0.02,
        format!(
            "a-priori generation / histogram MI round trip at N = 1e5: worst error {worst:.4} (need <= 0.02)"
        ),
    );
}

fn criterion_4_10(rep: &mut Report, audits: &[SolveAudit]) {
    let joint: Vec<&SolveAudit> = audits.iter().filter(|a| a.kind == ProblemKind::JointMl).collect();
    let cfg = SolverConfig::default();
    // the returned primal objective is within the gap tolerance of the optimum
    let slack = |a: &SolveAudit| cfg.gap_tol * (1.0 + a.objective.abs() + a.dual_objective.abs());
    let above = joint.iter().filter(|a| a.objective > a.truth_objective + slack(a)).count();
    let dual_above = joint.iter().filter(|a| a.dual_objective > a.truth_objective).count();
    let negative = joint.iter().filter(|a| a.objective < -1e-7).count();
    rep.line(
        "4",
        true,
        !joint.is_empty() && above == 0 && dual_above == 0 && negative == 0,
        format!(
            "joint ML relaxations: {} solves, optimum above truth cost {above}, dual bound above truth cost {dual_above}, objective below -1e-7 {negative}",
            joint.len()
        ),
    );

    let optimal: Vec<&SolveAudit> = audits.iter().filter(|a| a.status == SolveStatus::Optimal).collect();
    let bad_gap = optimal.iter().filter(|a| a.gap > cfg.gap_tol).count();
    let bad_feas = optimal
        .iter()
        .filter(|a| a.primal_infeasibility > cfg.feas_tol || a.dual_infeasibility > cfg.feas_tol)
        .count();
    let weak = optimal.iter().filter(|a| a.dual_objective > a.objective).count();
    let psd = optimal.iter().filter(|a| a.min_eigenvalue < -1e-9).count();
    let boxed = optimal.iter().filter(|a| a.f_min < -1e-9 || a.f_max > 1.0 + 1e-9).count();
    let worst_pinf = optimal.iter().map(|a| a.primal_infeasibility).fold(0.0, f64::max);
    rep.line(
        "10",
        true,
        !optimal.is_empty() && bad_gap + bad_feas + weak + psd + boxed == 0,
        format!(
            "{} of {} solves optimal; violations: gap {bad_gap}, feasibility {bad_feas} (worst recomputed pinf {worst_pinf:.1e}), weak duality {weak}, PSD {psd}, box {boxed}",
            optimal.len(),
            audits.len()
        ),
    );
}

fn main() {
    let start = Instant::now();
    let audits: Arc<Mutex<Vec<SolveAudit>>> = Arc::default();
    let store = audits.clone();
    let sink: anchorsdr::harness::AuditSink =
        Arc::new(move |a: &SolveAudit| store.lock().unwrap().push(a.clone()));
    let mut rep = Report { enforced_failures: 0, trend_failures: 0 };

    criterion_1(&mut rep);
    criterion_2_3(&mut rep, &sink);
    criterion_5(&mut rep, &sink);
    criterion_6_7_8(&mut rep, &sink);
    criterion_9(&mut rep, &sink);
    criterion_4_10(&mut rep, &audits.lock().unwrap());

    println!(
        "acceptance finished in {:.0} s: {} enforced and {} trend criteria failed",
        start.elapsed().as_secs_f64(),
        rep.enforced_failures,
        rep.trend_failures
    );
    if rep.enforced_failures > 0 {
        std::process::exit(1);
    }
}
