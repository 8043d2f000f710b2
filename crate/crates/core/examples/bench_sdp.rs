use std::time::Instant;

use anchorsdr::ldpc::build_regular_code;
use anchorsdr::mimo::{noise_var_for_snr_db, transmit_codeword, BitIndexMap};
use anchorsdr::sdr::{assemble_disjoint, assemble_joint_ml, cost_matrices};
use anchorsdr::solver::{solve, SolverConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let code = build_regular_code(256, 128, 3, &mut rng).unwrap();
    let map = BitIndexMap::for_codeword(4, 256).unwrap();
    let snr: f64 = std::env::args().nth(1).map(|s| s.parse().unwrap()).unwrap_or(6.0);
    let sigma2 = noise_var_for_snr_db(4, snr);
    for trial in 0..3 {
        let info: Vec<u8> = (0..code.k()).map(|_| rng.random_range(0..2)).collect();
        let cw = code.encode(&info).unwrap();
        let obs = transmit_codeword(&cw, &map, 4, sigma2, &mut rng).unwrap();
        let costs = cost_matrices(&obs).unwrap();
        let t = Instant::now();
        let d = solve(&assemble_disjoint(&costs).unwrap(), &SolverConfig::default()).unwrap();
        let td = t.elapsed();
        let p = assemble_joint_ml(&costs, &code, &map).unwrap();
        let t = Instant::now();
        let j = if std::env::var("TRACE").is_ok() {
            anchorsdr::solver::solve_traced(&p, &SolverConfig::default(), Some(&mut std::io::stderr()))
        } else {
            solve(&p, &SolverConfig::default())
        }
        .unwrap();
        let tj = t.elapsed();
        let errs = cw.iter().zip(&j.f).filter(|(&b, &f)| (f > 0.5) != (b == 1)).count();
        println!(
            "trial {trial}: disjoint {:?} it {} {:?} | joint {:?} it {} {:?} obj {:.4} gap {:.1e} errs {errs}",
            td, d.iterations, d.status, tj, j.iterations, j.status, j.objective, j.gap
        );
    }
}
