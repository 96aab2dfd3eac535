//! Correlation and regression statistics on paired samples.
//!
//! Tie conventions: average ranks for Spearman, τ-b corrections for Kendall,
//! and Chatterjee's tie-aware form of ξ with seeded random breaking of ties in
//! the conditioning variable.

use std::cmp::Ordering;

use rand::seq::SliceRandom;
use serde::Serialize;

use crate::error::{GeodexError, Result};
use crate::seeded_rng;

/// Two index-aligned real sequences, `n ≥ 3`, all finite.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PairedSample {
    x: Vec<f64>,
    y: Vec<f64>,
}

impl PairedSample {
    pub fn new(x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        if x.len() != y.len() {
            return Err(GeodexError::Argument(format!(
                "paired sample lengths differ: {} vs {}",
                x.len(),
                y.len()
            )));
        }
        if x.len() < 3 {
            return Err(GeodexError::Argument(format!(
                "paired sample needs at least 3 pairs, got {}",
                x.len()
            )));
        }
        if let Some(i) = x.iter().chain(&y).position(|v| !v.is_finite()) {
            return Err(GeodexError::Argument(format!(
                "non-finite entry at position {}",
                i % x.len()
            )));
        }
        Ok(PairedSample { x, y })
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }
}

fn cmp_f64(a: &f64, b: &f64) -> Ordering {
    a.partial_cmp(b).expect("paired samples hold finite values")
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn product_moment(x: &[f64], y: &[f64]) -> Result<f64> {
    let (mx, my) = (mean(x), mean(y));
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(GeodexError::Degenerate(
            "correlation undefined: a coordinate has zero variance".into(),
        ));
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// Pearson product-moment correlation.
pub fn pearson(sample: &PairedSample) -> Result<f64> {
    product_moment(&sample.x, &sample.y)
}

/// 1-based ranks; tied values share the average of their positions.
pub fn average_ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| cmp_f64(&v[a], &v[b]));
    let mut ranks = vec![0.0; v.len()];
    let mut start = 0;
    while start < idx.len() {
        let mut end = start + 1;
        while end < idx.len() && v[idx[end]] == v[idx[start]] {
            end += 1;
        }
        // positions start+1 ..= end
        let avg = (start + 1 + end) as f64 / 2.0;
        for &i in &idx[start..end] {
            ranks[i] = avg;
        }
        start = end;
    }
    ranks
}

/// Spearman's ρ: Pearson correlation of average ranks.
pub fn spearman(sample: &PairedSample) -> Result<f64> {
    product_moment(&average_ranks(&sample.x), &average_ranks(&sample.y))
}

/// Number of pairs within runs of equal values of a sorted sequence.
fn tied_pairs<T: PartialEq>(sorted: &[T]) -> u64 {
    let mut total = 0u64;
    let mut run = 1u64;
    for w in sorted.windows(2) {
        if w[0] == w[1] {
            run += 1;
        } else {
            total += run * (run - 1) / 2;
            run = 1;
        }
    }
    total + run * (run - 1) / 2
}

/// Stable merge sort of `v`, returning the number of strict inversions.
fn sort_count_swaps(v: &mut [f64], buf: &mut [f64]) -> u64 {
    let n = v.len();
    if n < 2 {
        return 0;
    }
    let mid = n / 2;
    let mut swaps = {
        let (left, right) = v.split_at_mut(mid);
        let (lb, rb) = buf.split_at_mut(mid);
        sort_count_swaps(left, lb) + sort_count_swaps(right, rb)
    };
    let (mut i, mut j, mut k) = (0, mid, 0);
    while i < mid && j < n {
        if v[i] <= v[j] {
            buf[k] = v[i];
            i += 1;
        } else {
            buf[k] = v[j];
            swaps += (mid - i) as u64;
            j += 1;
        }
        k += 1;
    }
    buf[k..k + mid - i].copy_from_slice(&v[i..mid]);
    k += mid - i;
    buf[k..k + n - j].copy_from_slice(&v[j..n]);
    v.copy_from_slice(&buf[..n]);
    swaps
}

/// Kendall's τ-b in O(n log n) (Knight's merge-sort algorithm).
pub fn kendall_tau_b(sample: &PairedSample) -> Result<f64> {
    let n = sample.len();
    let mut pairs: Vec<(f64, f64)> = sample.x.iter().copied().zip(sample.y.iter().copied()).collect();
    pairs.sort_by(|a, b| cmp_f64(&a.0, &b.0).then_with(|| cmp_f64(&a.1, &b.1)));

    let n0 = (n as u64) * (n as u64 - 1) / 2;
    let xs: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let n1 = tied_pairs(&xs);
    let n3 = tied_pairs(&pairs);

    let mut ys: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    let mut buf = vec![0.0; n];
    let swaps = sort_count_swaps(&mut ys, &mut buf);
    let n2 = tied_pairs(&ys);

    if n0 == n1 || n0 == n2 {
        return Err(GeodexError::Degenerate(
            "kendall tau-b undefined: all values tied in one coordinate".into(),
        ));
    }
    let numer = n0 as f64 - n1 as f64 - n2 as f64 + n3 as f64 - 2.0 * swaps as f64;
    let denom = ((n0 - n1) as f64).sqrt() * ((n0 - n2) as f64).sqrt();
    Ok((numer / denom).clamp(-1.0, 1.0))
}

/// Chatterjee's ξ(x → y): near 1 iff `y` is a measurable function of `x`.
///
/// Ties in `x` are broken uniformly at random from `seed`. Asymmetric in
/// its arguments.
pub fn chatterjee_xi(sample: &PairedSample, seed: u64) -> Result<f64> {
    let n = sample.len();
    let (x, y) = (&sample.x, &sample.y);

    let mut tiebreak: Vec<usize> = (0..n).collect();
    tiebreak.shuffle(&mut seeded_rng(seed));
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| cmp_f64(&x[a], &x[b]).then(tiebreak[a].cmp(&tiebreak[b])));

    let mut sorted_y = y.clone();
    sorted_y.sort_by(cmp_f64);
    // r_i = #{j : y_j ≤ y_i}, l_i = #{j : y_j ≥ y_i}
    let r = |v: f64| sorted_y.partition_point(|&w| w <= v) as u128;
    let l = |v: f64| (n - sorted_y.partition_point(|&w| w < v)) as u128;

    let n128 = n as u128;
    let denom: u128 = y.iter().map(|&v| {
        let li = l(v);
        li * (n128 - li)
    }).sum::<u128>() * 2;
    if denom == 0 {
        return Err(GeodexError::Degenerate(
            "chatterjee xi undefined: all y values are equal".into(),
        ));
    }
    let ranks: Vec<u128> = order.iter().map(|&i| r(y[i])).collect();
    let jumps: u128 = ranks.windows(2).map(|w| w[0].abs_diff(w[1])).sum();
    Ok(1.0 - (n128 * jumps) as f64 / denom as f64)
}

/// Linearly interpolated percentile (`q` in `[0, 100]`) of a nonempty sample.
pub fn percentile(values: &[f64], q: f64) -> Result<f64> {
    if values.is_empty() {
        return Err(GeodexError::Argument("percentile of an empty sample".into()));
    }
    if !(0.0..=100.0).contains(&q) {
        return Err(GeodexError::Argument(format!("percentile {q} outside [0, 100]")));
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let pos = q / 100.0 * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    Ok(v[lo] + (v[hi] - v[lo]) * (pos - lo as f64))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    /// `1 − SSE/SST` with SST centred on the mean of y, also for fits
    /// through the origin (so it can go negative there).
    pub r_squared: f64,
}

/// Ordinary least squares `y ≈ slope·x + intercept`; `through_origin`
/// pins the intercept to 0.
pub fn fit_line(sample: &PairedSample, through_origin: bool) -> Result<LineFit> {
    let (x, y) = (&sample.x, &sample.y);
    let (slope, intercept) = if through_origin {
        let sxx: f64 = x.iter().map(|v| v * v).sum();
        if sxx == 0.0 {
            return Err(GeodexError::Degenerate("all x are zero".into()));
        }
        let sxy: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
        (sxy / sxx, 0.0)
    } else {
        let (mx, my) = (mean(x), mean(y));
        let (mut sxx, mut sxy) = (0.0, 0.0);
        for (a, b) in x.iter().zip(y) {
            sxx += (a - mx) * (a - mx);
            sxy += (a - mx) * (b - my);
        }
        if sxx == 0.0 {
            return Err(GeodexError::Degenerate("x has zero variance".into()));
        }
        let slope = sxy / sxx;
        (slope, my - slope * mx)
    };
    let my = mean(y);
    let (mut sse, mut sst) = (0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let e = b - (slope * a + intercept);
        sse += e * e;
        sst += (b - my) * (b - my);
    }
    let r_squared = if sst == 0.0 {
        if sse == 0.0 { 1.0 } else { f64::NEG_INFINITY }
    } else {
        1.0 - sse / sst
    };
    Ok(LineFit {
        slope,
        intercept,
        r_squared,
    })
}
