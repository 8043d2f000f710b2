use super::{CodeDefinition, LdpcError, LlrFrame};

/// Bound on every message passed inside the sum-product decoder.
pub const DECODER_MESSAGE_CLIP: f64 = 25.0;

#[derive(Debug, Clone)]
pub struct SpaOutput {
    pub posterior: LlrFrame,
    /// Posterior minus the channel input, the turbo feedback.
    pub extrinsic: LlrFrame,
    pub hard: Vec<u8>,
    pub parity_ok: bool,
    pub iterations: usize,
}

struct Edges {
    /// For each check, the edge ids of its neighbors (edge id = position in
    /// `edge_var`).
    check_edges: Vec<Vec<usize>>,
    edge_var: Vec<usize>,
}

impl Edges {
    fn new(code: &CodeDefinition) -> Self {
        let mut check_edges = Vec::with_capacity(code.num_checks());
        let mut edge_var = Vec::new();
        for row in code.checks() {
            let mut ids = Vec::with_capacity(row.len());
            for &v in row {
                ids.push(edge_var.len());
                edge_var.push(v);
            }
            check_edges.push(ids);
        }
        Self { check_edges, edge_var }
    }
}

/// Flooding sum-product decoding; stops as soon as the hard decision
/// satisfies every check.
pub fn spa_decode(
    channel_llr: &[f64],
    code: &CodeDefinition,
    max_iter: usize,
) -> Result<SpaOutput, LdpcError> {
    let n = code.n();
    if channel_llr.len() != n {
        return Err(LdpcError::Length { expected: n, got: channel_llr.len() });
    }
    let edges = Edges::new(code);
    let clip = |x: f64| x.clamp(-DECODER_MESSAGE_CLIP, DECODER_MESSAGE_CLIP);
    let mut v2c: Vec<f64> = edges.edge_var.iter().map(|&v| clip(channel_llr[v])).collect();
    let mut c2v = vec![0.0; v2c.len()];
    let mut total = channel_llr.to_vec();
    let mut hard = LlrFrame(total.clone()).hard_bits();
    let mut parity_ok = false;
    let mut iterations = 0;
    let mut prefix = Vec::new();
    let mut tanh_half = Vec::new();
    let max_t = (DECODER_MESSAGE_CLIP / 2.0).tanh();

    while iterations < max_iter.max(1) {
        iterations += 1;
        for ids in &edges.check_edges {
            let d = ids.len();
            tanh_half.clear();
            tanh_half.extend(ids.iter().map(|&e| (v2c[e] / 2.0).tanh()));
            prefix.clear();
            prefix.push(1.0);
            for j in 0..d {
                let p = prefix[j] * tanh_half[j];
                prefix.push(p);
            }
            let mut suffix = 1.0;
            for j in (0..d).rev() {
                let t = (prefix[j] * suffix).clamp(-max_t, max_t);
                c2v[ids[j]] = clip(2.0 * t.atanh());
                suffix *= tanh_half[j];
            }
        }
        total.copy_from_slice(channel_llr);
        for (e, &v) in edges.edge_var.iter().enumerate() {
            total[v] += c2v[e];
        }
        for (e, &v) in edges.edge_var.iter().enumerate() {
            v2c[e] = clip(total[v] - c2v[e]);
        }
        for (h, &t) in hard.iter_mut().zip(&total) {
            *h = u8::from(t < 0.0);
        }
        parity_ok = code.check_parity(&hard)?;
        if parity_ok {
            break;
        }
    }
    let extrinsic = total.iter().zip(channel_llr).map(|(t, c)| t - c).collect();
    Ok(SpaOutput { posterior: LlrFrame(total), extrinsic: LlrFrame(extrinsic), hard, parity_ok, iterations })
}

/// Gallager-style bit flipping: flip the single bit involved in the most
/// unsatisfied checks (lowest index on ties) until parity holds.
pub fn bf_decode(hard_in: &[u8], code: &CodeDefinition, max_iter: usize) -> Result<Vec<u8>, LdpcError> {
    let mut bits = hard_in.to_vec();
    let mut syndrome = code.syndrome(&bits)?;
    for _ in 0..max_iter {
        if syndrome.iter().all(|&s| s == 0) {
            break;
        }
        let mut best = 0;
        let mut best_count = 0;
        for v in 0..code.n() {
            let count = code.var_neighbors(v).iter().filter(|&&c| syndrome[c] == 1).count();
            if count > best_count {
                best = v;
                best_count = count;
            }
        }
        bits[best] ^= 1;
        for &c in code.var_neighbors(best) {
            syndrome[c] ^= 1;
        }
    }
    Ok(bits)
}
