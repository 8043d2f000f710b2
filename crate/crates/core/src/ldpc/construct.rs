use std::collections::VecDeque;

use rand::seq::IndexedRandom;
use rand::Rng;

use super::{CodeDefinition, LdpcError};

const MAX_DRAWS: usize = 200;

/// Column-regular code built by progressive edge growth with a row-degree
/// cap; columns are permuted afterwards so the info bits come first.
///
/// Redraws until the parity-check matrix has full rank.
pub fn build_regular_code<R: Rng + ?Sized>(
    n: usize,
    k: usize,
    col_weight: usize,
    rng: &mut R,
) -> Result<CodeDefinition, LdpcError> {
    if !(n > k && k > 0) {
        return Err(LdpcError::DegreeProfile(format!("need n > k > 0, got ({n}, {k})")));
    }
    let m = n - k;
    if col_weight == 0 || col_weight > m || !(n * col_weight).is_multiple_of(m) {
        return Err(LdpcError::DegreeProfile(format!(
            "{n} columns of weight {col_weight} cannot fill {m} rows evenly"
        )));
    }
    let row_weight = n * col_weight / m;
    for _ in 0..MAX_DRAWS {
        let checks = peg(n, m, col_weight, row_weight, rng);
        let code = CodeDefinition::from_checks(n, checks)?;
        if code.rank() < m {
            continue;
        }
        let mut order = code.info_positions().to_vec();
        order.extend(code.parity_positions.iter().copied());
        let mut new_index = vec![0; n];
        for (new, &old) in order.iter().enumerate() {
            new_index[old] = new;
        }
        let permuted = code
            .checks()
            .iter()
            .map(|row| {
                let mut r: Vec<usize> = row.iter().map(|&v| new_index[v]).collect();
                r.sort_unstable();
                r
            })
            .collect();
        let code = CodeDefinition::from_checks(n, permuted)?;
        debug_assert_eq!(code.info_positions(), (0..k).collect::<Vec<_>>());
        return Ok(code);
    }
    Err(LdpcError::RankDeficient(MAX_DRAWS))
}

/// Each new edge of a bit goes to a check that is as far away as possible in
/// the current graph, preferring low degree; ties are broken at random.
fn peg<R: Rng + ?Sized>(
    n: usize,
    m: usize,
    col_weight: usize,
    row_weight: usize,
    rng: &mut R,
) -> Vec<Vec<usize>> {
    let mut checks: Vec<Vec<usize>> = vec![Vec::with_capacity(row_weight); m];
    let mut vars: Vec<Vec<usize>> = vec![Vec::with_capacity(col_weight); n];
    let mut check_dist = vec![usize::MAX; m];
    let mut var_seen = vec![false; n];
    let mut candidates = Vec::with_capacity(m);
    for v in 0..n {
        for _ in 0..col_weight {
            distances_from(v, &checks, &vars, &mut check_dist, &mut var_seen);
            let open = |c: usize| checks[c].len() < row_weight && !vars[v].contains(&c);
            let far = (0..m)
                .filter(|&c| open(c))
                .map(|c| check_dist[c])
                .max()
                .expect("row capacity remains while edges remain");
            let low = (0..m)
                .filter(|&c| open(c) && check_dist[c] == far)
                .map(|c| checks[c].len())
                .min()
                .expect("non-empty");
            candidates.clear();
            candidates.extend((0..m).filter(|&c| open(c) && check_dist[c] == far && checks[c].len() == low));
            let &c = candidates.choose(rng).expect("non-empty");
            checks[c].push(v);
            vars[v].push(c);
        }
    }
    for row in &mut checks {
        row.sort_unstable();
    }
    checks
}

/// Breadth-first check distances (in check hops) from bit `root`.
fn distances_from(
    root: usize,
    checks: &[Vec<usize>],
    vars: &[Vec<usize>],
    check_dist: &mut [usize],
    var_seen: &mut [bool],
) {
    check_dist.fill(usize::MAX);
    var_seen.fill(false);
    var_seen[root] = true;
    let mut queue = VecDeque::new();
    for &c in &vars[root] {
        check_dist[c] = 0;
        queue.push_back(c);
    }
    while let Some(c) = queue.pop_front() {
        for &v in &checks[c] {
            if var_seen[v] {
                continue;
            }
            var_seen[v] = true;
            for &c2 in &vars[v] {
                if check_dist[c2] == usize::MAX {
                    check_dist[c2] = check_dist[c] + 1;
                    queue.push_back(c2);
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn regular_degrees() {
        for (n, k, row_weight) in [(256, 128, 6), (32, 16, 6)] {
            let code = build_regular_code(n, k, 3, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
            assert_eq!(code.num_checks(), n - k);
            assert_eq!(code.k(), k);
            for v in 0..n {
                assert_eq!(code.var_neighbors(v).len(), 3);
            }
            for m in 0..n - k {
                assert_eq!(code.check_neighbors(m).len(), row_weight);
            }
        }
    }

    #[test]
    fn long_code_has_no_four_cycles() {
        let code = build_regular_code(256, 128, 3, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        assert_eq!(code.four_cycles(), 0);
    }

    #[test]
    fn deterministic_given_seed() {
        let a = build_regular_code(64, 32, 3, &mut ChaCha8Rng::seed_from_u64(4)).unwrap();
        let b = build_regular_code(64, 32, 3, &mut ChaCha8Rng::seed_from_u64(4)).unwrap();
        assert_eq!(a.checks(), b.checks());
    }

    #[test]
    fn rejects_bad_profiles() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(build_regular_code(10, 10, 3, &mut rng).is_err());
        assert!(build_regular_code(10, 3, 3, &mut rng).is_err());
        assert!(build_regular_code(10, 5, 0, &mut rng).is_err());
    }
}
