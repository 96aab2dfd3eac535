//! Embeddings with analytically known geometry.
//!
//! * `arc(α)`: `φ(z) = cos(αz)·v₀ + sin(αz)·v₁` on `[0, 1]`, so
//!   `CosSim(φ(z), φ(z′)) = cos(α|z − z′|)`, `g(s) = cos(α√s)` and
//!   `g′(0) = −α²/2`.
//! * `plane_circle`: `φ(θ) = (cos θ, sin θ, 0, …)` on the circle of
//!   circumference 2π, the `α = 1` case of the above.
//! * `polynomial_curve(p)`: `φ(z) = b₀(z)·v₀ + c·Σₖ z^k·v_{k+1}` for
//!   `k = 0..=p`, with `c = 1/√(p+2)` and `b₀` chosen so `‖φ(z)‖ = 1`. Every
//!   polynomial of degree ≤ p in z is then an exact linear readout.
//! * `superposition`: rows `Σ_f ρ_f·φ_f(z_f)` over a sparse set of active
//!   features, each feature owning a random 2-D subspace in which it traces
//!   `φ_f(z) = √(1 − (2z−1)²)·u_f + (2z−1)·w_f`.

use nalgebra::{DMatrix, DVector};
use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::embeddings::{normalize_rows, EmbeddingSet};
use crate::error::{GeodexError, Result};
use crate::metric_space::{path_length, MetricSpace, PathSample, Point};
use crate::seeded_rng;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SyntheticKind {
    Arc { alpha: f64 },
    PlaneCircle,
    PolynomialCurve { degree: usize },
    Superposition(SuperpositionSpec),
}

/// Uniform distribution of the positive presence scalings ρ.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scaling {
    pub lo: f64,
    pub hi: f64,
}

impl Default for Scaling {
    fn default() -> Self {
        Scaling { lo: 0.9, hi: 1.1 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuperpositionSpec {
    pub features: usize,
    pub sparsity: usize,
    #[serde(default)]
    pub scaling: Scaling,
    /// Probability that feature 0, the designated feature, is active in a row.
    #[serde(default = "default_designated_rate")]
    pub designated_rate: f64,
}

fn default_designated_rate() -> f64 {
    0.5
}

impl SuperpositionSpec {
    pub fn new(features: usize, sparsity: usize) -> Self {
        SuperpositionSpec {
            features,
            sparsity,
            scaling: Scaling::default(),
            designated_rate: default_designated_rate(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    #[serde(flatten)]
    pub kind: SyntheticKind,
    pub n: usize,
    pub dim: usize,
    pub seed: u64,
    /// Per-coordinate Gaussian noise added before re-normalizing rows.
    #[serde(default)]
    pub noise_sd: f64,
}

impl SyntheticSpec {
    pub fn new(kind: SyntheticKind, n: usize, dim: usize, seed: u64) -> Self {
        SyntheticSpec {
            kind,
            n,
            dim,
            seed,
            noise_sd: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(GeodexError::Argument(m));
        if self.n < 2 {
            return bad(format!("need at least 2 samples, got {}", self.n));
        }
        if !(self.noise_sd.is_finite() && self.noise_sd >= 0.0) {
            return bad(format!("noise_sd must be nonnegative, got {}", self.noise_sd));
        }
        match &self.kind {
            SyntheticKind::Arc { alpha } => {
                if !(alpha.is_finite() && *alpha > 0.0) {
                    return bad(format!("arc needs alpha > 0, got {alpha}"));
                }
                if self.dim < 2 {
                    return bad(format!("arc needs dim >= 2, got {}", self.dim));
                }
            }
            SyntheticKind::PlaneCircle => {
                if self.dim < 2 {
                    return bad(format!("plane_circle needs dim >= 2, got {}", self.dim));
                }
            }
            SyntheticKind::PolynomialCurve { degree } => {
                if *degree < 1 {
                    return bad("polynomial_curve needs degree >= 1".into());
                }
                if self.dim < degree + 2 {
                    return bad(format!(
                        "polynomial_curve of degree {degree} needs dim >= {}, got {}",
                        degree + 2,
                        self.dim
                    ));
                }
            }
            SyntheticKind::Superposition(s) => {
                if s.features < 2 || s.sparsity < 1 || s.sparsity > s.features {
                    return bad(format!(
                        "superposition needs 1 <= sparsity <= features, features >= 2 (got {} of {})",
                        s.sparsity, s.features
                    ));
                }
                if self.dim < 2 {
                    return bad("superposition needs dim >= 2".into());
                }
                if !(s.scaling.lo > 0.0 && s.scaling.lo <= s.scaling.hi && s.scaling.hi.is_finite()) {
                    return bad(format!(
                        "scalings must satisfy 0 < lo <= hi, got [{}, {}]",
                        s.scaling.lo, s.scaling.hi
                    ));
                }
                if !(0.0..=1.0).contains(&s.designated_rate) {
                    return bad(format!("designated_rate {} outside [0, 1]", s.designated_rate));
                }
            }
        }
        Ok(())
    }

    /// `g′(0)` for kinds where it is known in closed form.
    pub fn analytic_gprime0(&self) -> Option<f64> {
        match self.kind {
            SyntheticKind::Arc { alpha } => Some(-alpha * alpha / 2.0),
            SyntheticKind::PlaneCircle => Some(-0.5),
            _ => None,
        }
    }

    /// Metric space the generated feature values live in.
    pub fn space(&self) -> Result<MetricSpace> {
        match self.kind {
            SyntheticKind::PlaneCircle => MetricSpace::circle(std::f64::consts::TAU),
            _ => MetricSpace::interval(0.0, 1.0),
        }
    }
}

/// Orthonormal `count × dim` frame from Gaussian draws (Gram–Schmidt, two
/// passes).
pub fn random_frame(rng: &mut ChaCha8Rng, dim: usize, count: usize) -> Vec<Vec<f64>> {
    assert!(count <= dim, "cannot fit {count} orthonormal vectors in dimension {dim}");
    let mut frame: Vec<Vec<f64>> = Vec::with_capacity(count);
    while frame.len() < count {
        let mut v: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
        for _ in 0..2 {
            for u in &frame {
                let p: f64 = v.iter().zip(u).map(|(a, b)| a * b).sum();
                v.iter_mut().zip(u).for_each(|(a, b)| *a -= p * b);
            }
        }
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 1e-8 {
            v.iter_mut().for_each(|x| *x /= n);
            frame.push(v);
        }
    }
    frame
}

fn combine(coeffs: &[f64], frame: &[Vec<f64>], dim: usize) -> Vec<f64> {
    let mut out = vec![0.0; dim];
    for (c, v) in coeffs.iter().zip(frame) {
        out.iter_mut().zip(v).for_each(|(o, x)| *o += c * x);
    }
    out
}

fn equispaced_unit(n: usize) -> Vec<f64> {
    (0..n).map(|i| i as f64 / (n - 1) as f64).collect()
}

/// Coefficients of `φ(z)` in the kind's frame (curve kinds only).
fn curve_coefficients(kind: &SyntheticKind, z: f64) -> Vec<f64> {
    match *kind {
        SyntheticKind::Arc { alpha } => vec![(alpha * z).cos(), (alpha * z).sin()],
        SyntheticKind::PlaneCircle => vec![z.cos(), z.sin()],
        SyntheticKind::PolynomialCurve { degree } => {
            let c = 1.0 / ((degree + 2) as f64).sqrt();
            let mut coeffs = vec![0.0];
            let mut power = 1.0;
            for _ in 0..=degree {
                coeffs.push(c * power);
                power *= z;
            }
            let tail: f64 = coeffs.iter().map(|x| x * x).sum();
            coeffs[0] = (1.0 - tail).max(0.0).sqrt();
            coeffs
        }
        SyntheticKind::Superposition(_) => unreachable!("not a single curve"),
    }
}

fn curve_frame(spec: &SyntheticSpec, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    match spec.kind {
        SyntheticKind::PlaneCircle => {
            let mut e0 = vec![0.0; spec.dim];
            let mut e1 = vec![0.0; spec.dim];
            e0[0] = 1.0;
            e1[1] = 1.0;
            vec![e0, e1]
        }
        SyntheticKind::Arc { .. } => random_frame(rng, spec.dim, 2),
        SyntheticKind::PolynomialCurve { degree } => random_frame(rng, spec.dim, degree + 2),
        SyntheticKind::Superposition(_) => unreachable!(),
    }
}

/// Output of [`generate`].
#[derive(Clone, Debug)]
pub struct Generated {
    pub set: EmbeddingSet,
    pub space: MetricSpace,
    /// The curve's frame `v₀, v₁, …` (empty for superposition).
    pub frame: Vec<Vec<f64>>,
    pub superposed: Option<SuperposedDataset>,
}

/// Sparse superposition of features with full ground truth.
#[derive(Clone, Debug)]
pub struct SuperposedDataset {
    /// `n × D` rows Ψ.
    pub rows: Vec<Vec<f64>>,
    /// Active features per row, ascending.
    pub active: Vec<Vec<usize>>,
    pub scalings: Vec<Vec<f64>>,
    pub values: Vec<Vec<f64>>,
    /// Per feature, the orthonormal pair `(u_f, w_f)` spanning its subspace.
    pub dictionary: Vec<[Vec<f64>; 2]>,
}

/// `φ_f(z)` coefficients in the feature's `(u_f, w_f)` basis.
pub fn feature_coefficients(z: f64) -> [f64; 2] {
    let t = 2.0 * z - 1.0;
    [(1.0 - t * t).max(0.0).sqrt(), t]
}

impl SuperposedDataset {
    pub const DESIGNATED: usize = 0;

    pub fn feature_embedding(&self, f: usize, z: f64) -> Vec<f64> {
        let dim = self.dictionary[f][0].len();
        combine(&feature_coefficients(z), &self.dictionary[f], dim)
    }

    /// `Σ_{f ∈ F(x)} ρ_f(x)·φ_f(z_f(x))` recomputed from the ground truth.
    pub fn reconstruct(&self, row: usize) -> Vec<f64> {
        let dim = self.dictionary[0][0].len();
        let mut out = vec![0.0; dim];
        for ((&f, &rho), &z) in self.active[row].iter().zip(&self.scalings[row]).zip(&self.values[row]) {
            let c = feature_coefficients(z);
            let [u, w] = &self.dictionary[f];
            for j in 0..dim {
                out[j] += rho * (c[0] * u[j] + c[1] * w[j]);
            }
        }
        out
    }

    /// Largest `‖Ψ(x) − reconstruction‖_∞` over rows.
    pub fn max_reconstruction_residual(&self) -> f64 {
        (0..self.rows.len())
            .map(|i| {
                self.rows[i]
                    .iter()
                    .zip(self.reconstruct(i))
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0, f64::max)
            })
            .fold(0.0, f64::max)
    }

    /// Largest `|⟨v, v′⟩|` between dictionary directions of distinct features.
    pub fn max_interference(&self) -> f64 {
        let f = self.dictionary.len();
        let dim = self.dictionary[0][0].len();
        let dirs = DMatrix::from_fn(2 * f, dim, |r, c| self.dictionary[r / 2][r % 2][c]);
        let gram = &dirs * dirs.transpose();
        let mut worst: f64 = 0.0;
        for a in 0..2 * f {
            for b in (a + 1)..2 * f {
                if a / 2 != b / 2 {
                    worst = worst.max(gram[(a, b)].abs());
                }
            }
        }
        worst
    }

    /// Rows where `feature` is active, with its value in each.
    pub fn rows_with(&self, feature: usize) -> (Vec<usize>, Vec<f64>) {
        let mut idx = Vec::new();
        let mut vals = Vec::new();
        for (i, act) in self.active.iter().enumerate() {
            if let Some(pos) = act.iter().position(|&f| f == feature) {
                idx.push(i);
                vals.push(self.values[i][pos]);
            }
        }
        (idx, vals)
    }
}

fn generate_superposition(spec: &SyntheticSpec, sup: &SuperpositionSpec) -> SuperposedDataset {
    let mut rng = seeded_rng(spec.seed);
    let dim = spec.dim;
    let dictionary: Vec<[Vec<f64>; 2]> = (0..sup.features)
        .map(|_| {
            let mut pair = random_frame(&mut rng, dim, 2).into_iter();
            [pair.next().unwrap(), pair.next().unwrap()]
        })
        .collect();
    let others: Vec<usize> = (1..sup.features).collect();
    let mut rows = Vec::with_capacity(spec.n);
    let mut active = Vec::with_capacity(spec.n);
    let mut scalings = Vec::with_capacity(spec.n);
    let mut values = Vec::with_capacity(spec.n);
    for _ in 0..spec.n {
        let designated = sup.sparsity >= 1 && rng.random::<f64>() < sup.designated_rate;
        let draw = if designated { sup.sparsity - 1 } else { sup.sparsity };
        let mut feats: Vec<usize> = others.choose_multiple(&mut rng, draw).copied().collect();
        if designated {
            feats.push(SuperposedDataset::DESIGNATED);
        }
        feats.sort_unstable();
        let rho: Vec<f64> = feats
            .iter()
            .map(|_| rng.random_range(sup.scaling.lo..=sup.scaling.hi))
            .collect();
        let z: Vec<f64> = feats.iter().map(|_| rng.random::<f64>()).collect();
        let mut row = vec![0.0; dim];
        for ((&f, &r), &zv) in feats.iter().zip(&rho).zip(&z) {
            let c = feature_coefficients(zv);
            let [u, w] = &dictionary[f];
            for j in 0..dim {
                row[j] += r * (c[0] * u[j] + c[1] * w[j]);
            }
        }
        rows.push(row);
        active.push(feats);
        scalings.push(rho);
        values.push(z);
    }
    SuperposedDataset {
        rows,
        active,
        scalings,
        values,
        dictionary,
    }
}

/// Samples `spec.n` points of the kind's embedding.
///
/// Curve kinds use equispaced values (`[0, 1]`, or `θ = 2πi/n` for the
/// circle). For superposition the returned set holds the rows where the
/// designated feature is active, valued by that feature; the full matrix is
/// in [`Generated::superposed`].
pub fn generate(spec: &SyntheticSpec) -> Result<Generated> {
    spec.validate()?;
    let space = spec.space()?;
    if let SyntheticKind::Superposition(sup) = &spec.kind {
        let data = generate_superposition(spec, sup);
        let (idx, vals) = data.rows_with(SuperposedDataset::DESIGNATED);
        let set = EmbeddingSet::new(
            idx.iter().map(|&i| data.rows[i].clone()).collect(),
            idx.iter().map(|i| format!("row{i}")).collect(),
            vals.into_iter().map(Point::Scalar).collect(),
        )?;
        return Ok(Generated {
            set,
            space,
            frame: Vec::new(),
            superposed: Some(data),
        });
    }

    let mut rng = seeded_rng(spec.seed);
    let frame = curve_frame(spec, &mut rng);
    let values: Vec<f64> = match spec.kind {
        SyntheticKind::PlaneCircle => (0..spec.n)
            .map(|i| std::f64::consts::TAU * i as f64 / spec.n as f64)
            .collect(),
        _ => equispaced_unit(spec.n),
    };
    let mut rows: Vec<Vec<f64>> = values
        .iter()
        .map(|&z| combine(&curve_coefficients(&spec.kind, z), &frame, spec.dim))
        .collect();
    if spec.noise_sd > 0.0 {
        let noise = Normal::new(0.0, spec.noise_sd).expect("validated sd");
        for row in &mut rows {
            row.iter_mut().for_each(|x| *x += noise.sample(&mut rng));
        }
    }
    let labels = (0..spec.n).map(|i| format!("p{i}")).collect();
    let set = EmbeddingSet::new(rows, labels, values.into_iter().map(Point::Scalar).collect())?;
    let set = if spec.noise_sd > 0.0 { normalize_rows(&set)? } else { set };
    let set = set.bind(&space)?;
    Ok(Generated {
        set,
        space,
        frame,
        superposed: None,
    })
}

/// Path lengths in the feature space and on the representation manifold,
/// with the scale factor predicted from `g′(0)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Theorem1Check {
    pub l_eta: f64,
    pub l_gamma: f64,
    pub predicted_scale: f64,
    pub relative_error: f64,
}

/// Compares `L(γ)` against `√(−2g′(0))·L(η)` along the whole domain (the
/// unit interval, or the full loop for the circle), partitioned into
/// `resolution` equal steps.
pub fn validate_theorem1(spec: &SyntheticSpec, resolution: usize) -> Result<Theorem1Check> {
    let gprime0 = match spec.kind {
        SyntheticKind::Arc { .. } | SyntheticKind::PlaneCircle => spec.analytic_gprime0().unwrap(),
        _ => {
            return Err(GeodexError::Argument(
                "theorem check needs a kind with known g (arc or plane_circle)".into(),
            ))
        }
    };
    if resolution < 100 {
        return Err(GeodexError::Argument(format!("resolution must be >= 100, got {resolution}")));
    }
    spec.validate()?;
    let space = spec.space()?;
    let end = match spec.kind {
        SyntheticKind::PlaneCircle => std::f64::consts::TAU,
        _ => 1.0,
    };
    let params: Vec<f64> = (0..=resolution)
        .map(|i| end * i as f64 / resolution as f64)
        .collect();
    let points = params
        .iter()
        .map(|&t| space.check_point(Point::Scalar(t)))
        .collect::<Result<Vec<_>>>()?;
    let l_eta = path_length(&space, &PathSample::new(points, params.clone())?)?;

    let mut rng = seeded_rng(spec.seed);
    let frame = curve_frame(spec, &mut rng);
    let gamma: Vec<Vec<f64>> = params
        .iter()
        .map(|&t| combine(&curve_coefficients(&spec.kind, t), &frame, spec.dim))
        .collect();
    let l_gamma: f64 = gamma
        .windows(2)
        .map(|w| w[0].iter().zip(&w[1]).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt())
        .sum();
    let predicted_scale = (-2.0 * gprime0).sqrt();
    let expected = predicted_scale * l_eta;
    Ok(Theorem1Check {
        l_eta,
        l_gamma,
        predicted_scale,
        relative_error: (l_gamma - expected).abs() / expected,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeConfig {
    /// Ridge penalty on the weights (not the intercept); 0 means plain OLS.
    pub ridge: f64,
    pub train_fraction: f64,
    pub seed: u64,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        ProbeConfig {
            ridge: 1e-6,
            train_fraction: 0.8,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ProbeResult {
    pub weights: Vec<f64>,
    pub intercept: f64,
    pub train_r_squared: f64,
    /// On the held-out split.
    pub r_squared: f64,
    pub n_train: usize,
    pub n_test: usize,
}

fn r_squared(y: &[f64], pred: &[f64]) -> f64 {
    let m = y.iter().sum::<f64>() / y.len() as f64;
    let sst: f64 = y.iter().map(|v| (v - m) * (v - m)).sum();
    let sse: f64 = y.iter().zip(pred).map(|(a, b)| (a - b) * (a - b)).sum();
    if sst == 0.0 {
        if sse == 0.0 { 1.0 } else { f64::NEG_INFINITY }
    } else {
        1.0 - sse / sst
    }
}

/// Least-squares readout of `target` from `rows` (with intercept), scored by
/// out-of-sample r² on a seeded random split.
pub fn linear_probe(rows: &[&[f64]], target: &[f64], config: &ProbeConfig) -> Result<ProbeResult> {
    let n = rows.len();
    if n != target.len() {
        return Err(GeodexError::Argument(format!("{n} rows but {} targets", target.len())));
    }
    if !(config.ridge >= 0.0) || !(config.train_fraction > 0.0 && config.train_fraction < 1.0) {
        return Err(GeodexError::Argument("ridge must be >= 0 and train_fraction in (0, 1)".into()));
    }
    let dim = rows.first().map_or(0, |r| r.len());
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut seeded_rng(config.seed));
    let n_train = ((n as f64) * config.train_fraction).round() as usize;
    if n_train < 2 || n - n_train < 2 {
        return Err(GeodexError::Argument(format!("too few rows ({n}) for a train/test split")));
    }
    if config.ridge == 0.0 && n_train <= dim {
        return Err(GeodexError::Degenerate(format!(
            "{n_train} training rows for {dim} coefficients without regularization"
        )));
    }
    let (train, test) = order.split_at(n_train);

    let mut x_mean = vec![0.0; dim];
    for &i in train {
        x_mean.iter_mut().zip(rows[i]).for_each(|(m, v)| *m += v);
    }
    x_mean.iter_mut().for_each(|m| *m /= n_train as f64);
    let y_mean = train.iter().map(|&i| target[i]).sum::<f64>() / n_train as f64;

    let xc = DMatrix::from_fn(n_train, dim, |r, c| rows[train[r]][c] - x_mean[c]);
    let yc = DVector::from_fn(n_train, |r, _| target[train[r]] - y_mean);
    let mut gram = xc.tr_mul(&xc);
    for j in 0..dim {
        gram[(j, j)] += config.ridge;
    }
    let rhs = xc.tr_mul(&yc);
    let weights = gram
        .cholesky()
        .ok_or_else(|| GeodexError::Degenerate("design matrix is rank deficient".into()))?
        .solve(&rhs);
    let weights: Vec<f64> = weights.iter().copied().collect();
    let intercept = y_mean - weights.iter().zip(&x_mean).map(|(w, m)| w * m).sum::<f64>();
    let predict = |i: usize| intercept + rows[i].iter().zip(&weights).map(|(a, w)| a * w).sum::<f64>();

    let score = |idx: &[usize]| {
        let y: Vec<f64> = idx.iter().map(|&i| target[i]).collect();
        let p: Vec<f64> = idx.iter().map(|&i| predict(i)).collect();
        r_squared(&y, &p)
    };
    Ok(ProbeResult {
        train_r_squared: score(train),
        r_squared: score(test),
        weights,
        intercept,
        n_train,
        n_test: test.len(),
    })
}

/// Probe for the designated feature's value on rows where it is active.
pub fn probe_designated(data: &SuperposedDataset, config: &ProbeConfig) -> Result<ProbeResult> {
    let (idx, vals) = data.rows_with(SuperposedDataset::DESIGNATED);
    let rows: Vec<&[f64]> = idx.iter().map(|&i| data.rows[i].as_slice()).collect();
    linear_probe(&rows, &vals, config)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embeddings::cosine_similarity;

    #[test]
    fn arc_starts_at_v0() {
        let g = generate(&SyntheticSpec::new(SyntheticKind::Arc { alpha: 2.0 }, 11, 8, 3)).unwrap();
        for (a, b) in g.set.row(0).iter().zip(&g.frame[0]) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn arc_pair_cosine_closed_form() {
        // z = 0 and z = 0.5 are rows 0 and 5 of an 11-point grid
        let g = generate(&SyntheticSpec::new(SyntheticKind::Arc { alpha: 2.0 }, 11, 8, 3)).unwrap();
        let c = cosine_similarity(g.set.row(0), g.set.row(5)).unwrap();
        assert!((c - 1f64.cos()).abs() < 1e-12);
    }

    #[test]
    fn polynomial_rows_are_unit_and_full_rank() {
        let spec = SyntheticSpec::new(SyntheticKind::PolynomialCurve { degree: 3 }, 40, 9, 1);
        let g = generate(&spec).unwrap();
        for row in g.set.rows() {
            let n: f64 = row.iter().map(|x| x * x).sum::<f64>().sqrt();
            assert!((n - 1.0).abs() < 1e-12);
        }
        let p = crate::embeddings::uncentered_pca(&g.set, 9).unwrap();
        let rank = p.singular_values.iter().filter(|&&s| s > 1e-8).count();
        assert_eq!(rank, 5);
    }

    #[test]
    fn invalid_specs() {
        let bad = [
            SyntheticSpec::new(SyntheticKind::Arc { alpha: 0.0 }, 10, 4, 0),
            SyntheticSpec::new(SyntheticKind::Arc { alpha: 1.0 }, 10, 1, 0),
            SyntheticSpec::new(SyntheticKind::PolynomialCurve { degree: 3 }, 10, 4, 0),
            SyntheticSpec::new(SyntheticKind::Superposition(SuperpositionSpec::new(10, 11)), 10, 4, 0),
        ];
        for spec in bad {
            assert!(matches!(generate(&spec), Err(GeodexError::Argument(_))), "{spec:?}");
        }
    }

    #[test]
    fn theorem_check_rejects_unsupported() {
        let spec = SyntheticSpec::new(SyntheticKind::PolynomialCurve { degree: 1 }, 10, 4, 0);
        assert!(validate_theorem1(&spec, 1000).is_err());
        let spec = SyntheticSpec::new(SyntheticKind::PlaneCircle, 10, 2, 0);
        assert!(validate_theorem1(&spec, 99).is_err());
    }

    #[test]
    fn small_superposition_reconstructs() {
        let spec = SyntheticSpec::new(SyntheticKind::Superposition(SuperpositionSpec::new(30, 3)), 50, 16, 2);
        let g = generate(&spec).unwrap();
        let data = g.superposed.unwrap();
        assert!(data.max_reconstruction_residual() < 1e-12);
        assert!(data.active.iter().all(|a| a.len() == 3));
        assert_eq!(g.set.len(), data.rows_with(0).0.len());
    }

    #[test]
    fn probe_needs_rows_or_ridge() {
        let rows: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64; 20]).collect();
        let refs: Vec<&[f64]> = rows.iter().map(Vec::as_slice).collect();
        let target: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let cfg = ProbeConfig { ridge: 0.0, ..Default::default() };
        assert!(matches!(linear_probe(&refs, &target, &cfg), Err(GeodexError::Degenerate(_))));
    }
}
