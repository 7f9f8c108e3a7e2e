use statrs::function::erf::erfc;

/// Largest sample size tested with the exact null distribution.
pub const EXACT_MAX_N: usize = 25;

/// Ranks `1..=n` of `values` (ascending), ties sharing their average rank.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = rank;
        }
        i = j + 1;
    }
    ranks
}

/// Two-sided p-value of the signed-rank statistic `W+` with `n` nonzero
/// differences whose doubled ranks are `doubled` and observed doubled `W+` is
/// `w2`: `min(1, 2 · min(#{W+ ≤ w}, #{W+ ≥ w}) / 2ⁿ)` over all sign assignments.
pub fn exact_p_value(doubled: &[usize], w2: usize) -> f64 {
    let total: usize = doubled.iter().sum();
    let mut counts = vec![0u64; total + 1];
    counts[0] = 1;
    let mut reach = 0;
    for &r in doubled {
        reach += r;
        for s in (r..=reach).rev() {
            counts[s] += counts[s - r];
        }
    }
    let le: u64 = counts[..=w2].iter().sum();
    let ge: u64 = counts[w2..].iter().sum();
    (2.0 * le.min(ge) as f64 / 2f64.powi(doubled.len() as i32)).min(1.0)
}

/// Two-sided Wilcoxon signed-rank test that the differences have median zero.
/// Zeros are dropped and tied magnitudes share their average rank. Up to
/// [`EXACT_MAX_N`] nonzero differences the exact null distribution is used,
/// above it the normal approximation with tie and continuity corrections.
pub fn wilcoxon_signed_rank(diffs: &[f64]) -> f64 {
    let nonzero: Vec<f64> = diffs.iter().copied().filter(|d| *d != 0.0).collect();
    let n = nonzero.len();
    if n == 0 {
        return 1.0;
    }
    let magnitudes: Vec<f64> = nonzero.iter().map(|d| d.abs()).collect();
    let ranks = average_ranks(&magnitudes);
    let w_plus: f64 = ranks
        .iter()
        .zip(&nonzero)
        .filter(|(_, d)| **d > 0.0)
        .map(|(r, _)| r)
        .sum();

    if n <= EXACT_MAX_N {
        // Average ranks are multiples of 1/2, so doubling makes them integers.
        let doubled: Vec<usize> = ranks.iter().map(|r| (2.0 * r).round() as usize).collect();
        return exact_p_value(&doubled, (2.0 * w_plus).round() as usize);
    }

    let nf = n as f64;
    let mean = nf * (nf + 1.0) / 4.0;
    let mut tie_term = 0.0;
    let mut sorted = magnitudes;
    sorted.sort_by(f64::total_cmp);
    for group in sorted.chunk_by(|a, b| a == b) {
        let t = group.len() as f64;
        tie_term += t * t * t - t;
    }
    let var = nf * (nf + 1.0) * (2.0 * nf + 1.0) / 24.0 - tie_term / 48.0;
    if var <= 0.0 {
        return 1.0;
    }
    let z = ((w_plus - mean).abs() - 0.5).max(0.0) / var.sqrt();
    erfc(z / std::f64::consts::SQRT_2).min(1.0)
}
