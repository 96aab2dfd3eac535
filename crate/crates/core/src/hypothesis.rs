//! The three diagnostics: homeomorphism rank test, direct isometry test
//! (cosine similarity against squared feature distance), and geodesic
//! isometry test (graph geodesics against feature distance).

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::index;
use serde::{Deserialize, Serialize};

use crate::embeddings::{cosine_similarity, EmbeddingSet};
use crate::error::{GeodexError, Result};
use crate::graph::{self, BaseRule, NeighborGraph};
use crate::metric_space::{MetricSpace, Point};
use crate::seeded_rng;
use crate::stats::{self, PairedSample};

/// Percentiles of pairwise feature distance used for the ε sensitivity sweep.
pub const EPS_SWEEP: [f64; 3] = [5.0, 10.0, 20.0];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticConfig {
    /// Forced K; `None` searches for the minimal connected K.
    pub k: Option<usize>,
    /// Uncentered principal components kept before testing; `None` skips PCA.
    pub components: Option<usize>,
    /// Local window for the direct test, as a percentile of pairwise
    /// feature distances.
    pub eps_pct: f64,
    /// Absolute window; overrides `eps_pct` when set.
    pub eps: Option<f64>,
    pub seed: u64,
    /// Maximum number of pairs; larger sets are subsampled uniformly.
    pub pair_budget: usize,
    /// Drop graph edges above this weight percentile; `None` keeps all.
    pub prune_pct: Option<f64>,
    pub base: BaseRule,
}

impl Default for DiagnosticConfig {
    fn default() -> Self {
        DiagnosticConfig {
            k: None,
            components: Some(3),
            eps_pct: 10.0,
            eps: None,
            seed: 0,
            pair_budget: 250_000,
            prune_pct: None,
            base: BaseRule::MinValue,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestKind {
    Homeomorphism,
    DirectIsometry,
    GeodesicIsometry,
}

/// Paired sample behind one figure panel.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScatterPanel {
    pub name: String,
    pub x_label: String,
    pub y_label: String,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    /// Scalar feature coordinate used for colouring, when the space has one.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub color: Option<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct WindowFit {
    pub pct: f64,
    pub eps: f64,
    pub n_pairs: usize,
    pub g0_estimate: Option<f64>,
    pub gprime0_estimate: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DiagnosticReport {
    pub test: TestKind,
    /// Every entry is finite.
    pub statistics: BTreeMap<String, f64>,
    pub flags: BTreeMap<String, bool>,
    pub config: DiagnosticConfig,
    /// Conventions that affect the numbers (tie breaking, axes).
    pub conventions: BTreeMap<String, String>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub sensitivity: Vec<WindowFit>,
    pub scatter: Vec<ScatterPanel>,
}

impl DiagnosticReport {
    fn new(test: TestKind, config: &DiagnosticConfig) -> Self {
        DiagnosticReport {
            test,
            statistics: BTreeMap::new(),
            flags: BTreeMap::new(),
            config: config.clone(),
            conventions: BTreeMap::new(),
            sensitivity: Vec::new(),
            scatter: Vec::new(),
        }
    }

    fn stat(&mut self, name: &str, value: f64) -> Result<()> {
        if !value.is_finite() {
            return Err(GeodexError::Degenerate(format!("statistic {name} is not finite ({value})")));
        }
        self.statistics.insert(name.to_string(), value);
        Ok(())
    }

    fn convention(&mut self, key: &str, value: &str) {
        self.conventions.insert(key.to_string(), value.to_string());
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.statistics.get(name).copied()
    }

    fn graph_conventions(&mut self) {
        self.convention("knn_symmetrization", graph::SYMMETRIZATION);
        self.convention("knn_tie_break", graph::TIE_BREAK);
        self.convention("edge_weight", "euclidean");
    }
}

fn check_size(set: &EmbeddingSet) -> Result<()> {
    if set.len() < 3 {
        return Err(GeodexError::Argument(format!(
            "diagnostics need at least 3 rows, got {}",
            set.len()
        )));
    }
    Ok(())
}

/// K-NN graph per config: forced K or the minimal connected one, then the
/// optional edge pruning. Errors if the result is disconnected.
pub fn graph_for(set: &EmbeddingSet, config: &DiagnosticConfig) -> Result<NeighborGraph> {
    let points: Vec<&[f64]> = set.rows().collect();
    let mut g = match config.k {
        Some(k) => graph::build_knn(&points, k)?,
        None => graph::minimal_connected_k(&points)?.1,
    };
    if let Some(pct) = config.prune_pct {
        g = g.prune_long_edges(pct)?;
    }
    if !g.is_connected() {
        return Err(GeodexError::Disconnected {
            components: g.components(),
        });
    }
    Ok(g)
}

/// Pairs `i < j`, all of them or a seeded uniform subsample of `budget`,
/// in lexicographic order.
pub fn sample_pairs(n: usize, budget: usize, seed: u64) -> Vec<(usize, usize)> {
    let total = n * n.saturating_sub(1) / 2;
    if total <= budget {
        return (0..n).flat_map(|i| ((i + 1)..n).map(move |j| (i, j))).collect();
    }
    // offset(i) = number of pairs whose first index is below i
    let offset = |i: usize| i * (2 * n - i - 1) / 2;
    let mut picks = index::sample(&mut seeded_rng(seed), total, budget).into_vec();
    picks.sort_unstable();
    picks
        .into_iter()
        .map(|t| {
            let (mut lo, mut hi) = (0, n - 1);
            while hi - lo > 1 {
                let mid = (lo + hi) / 2;
                if offset(mid) <= t {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            (lo, lo + 1 + (t - offset(lo)))
        })
        .collect()
}

fn raw_scalar(p: &Point) -> Result<f64> {
    match p {
        Point::Scalar(x) => Ok(*x),
        Point::Node(_) => Err(GeodexError::Type("expected scalar feature values".into())),
    }
}

fn pair_colors(set: &EmbeddingSet, space: &MetricSpace, pairs: &[(usize, usize)]) -> Result<Option<Vec<f64>>> {
    let mut out = Vec::with_capacity(pairs.len());
    for &(i, _) in pairs {
        match space.coordinate(set.values()[i])? {
            Some(c) => out.push(c),
            None => return Ok(None),
        }
    }
    Ok(Some(out))
}

/// Rank correlation between feature values and geodesic position along the
/// manifold, measured from the base row.
pub fn homeomorphism_rank_test(
    set: &EmbeddingSet,
    space: &MetricSpace,
    config: &DiagnosticConfig,
) -> Result<DiagnosticReport> {
    check_size(set)?;
    if !space.is_orderable() {
        return Err(GeodexError::Type(format!(
            "the homeomorphism rank test needs an ordered space, got {}",
            space.kind()
        )));
    }
    let values = set.values().iter().map(raw_scalar).collect::<Result<Vec<f64>>>()?;
    let g = graph_for(set, config)?;
    let pos = graph::manifold_positions(set, &g, &config.base)?;
    let sample = PairedSample::new(values.clone(), pos.distances.clone())?;

    let mut r = DiagnosticReport::new(TestKind::Homeomorphism, config);
    r.graph_conventions();
    r.convention("ranked_values", "raw feature values (before any transform)");
    r.stat("kendall", stats::kendall_tau_b(&sample)?)?;
    r.stat("spearman", stats::spearman(&sample)?)?;
    r.stat("k", g.k() as f64)?;
    r.stat("n", set.len() as f64)?;
    r.stat("base_node", pos.base_node as f64)?;
    r.scatter.push(ScatterPanel {
        name: "homeomorphism_positions".into(),
        x_label: "feature value".into(),
        y_label: "geodesic position".into(),
        x: values.clone(),
        y: pos.distances,
        color: Some(values),
    });
    Ok(r)
}

fn local_fit(d: &[f64], cos: &[f64], eps: f64) -> Result<(usize, stats::LineFit)> {
    let (mut x, mut y) = (Vec::new(), Vec::new());
    for (&di, &ci) in d.iter().zip(cos) {
        if di <= eps {
            x.push(di * di);
            y.push(ci);
        }
    }
    let n = x.len();
    if n < 3 {
        return Err(GeodexError::Degenerate(format!(
            "local window d <= {eps} holds {n} pairs; need at least 3"
        )));
    }
    Ok((n, stats::fit_line(&PairedSample::new(x, y)?, false)?))
}

/// Cosine similarity against squared feature distance: Chatterjee ξ over all
/// pairs and a local fit `CosSim ≈ g(0) + g′(0)·d²` on `d ≤ ε`.
pub fn direct_isometry_test(
    set: &EmbeddingSet,
    space: &MetricSpace,
    config: &DiagnosticConfig,
) -> Result<DiagnosticReport> {
    check_size(set)?;
    let distinct: BTreeSet<String> = set.values().iter().map(|v| format!("{v:?}")).collect();
    if distinct.len() < 3 {
        return Err(GeodexError::Argument(format!(
            "the direct test needs at least 3 distinct feature values, got {}",
            distinct.len()
        )));
    }
    let pairs = sample_pairs(set.len(), config.pair_budget, config.seed);
    let mut d = Vec::with_capacity(pairs.len());
    let mut cos = Vec::with_capacity(pairs.len());
    for &(i, j) in &pairs {
        d.push(space.distance(set.values()[i], set.values()[j])?);
        cos.push(cosine_similarity(set.row(i), set.row(j))?);
    }
    let d2: Vec<f64> = d.iter().map(|v| v * v).collect();
    let global = PairedSample::new(d2.clone(), cos.clone())?;

    let mut r = DiagnosticReport::new(TestKind::DirectIsometry, config);
    r.convention("xi_axes", "x = squared feature distance, y = cosine similarity");
    r.convention("xi_x_ties", "broken uniformly at random from the config seed");
    r.stat("xi", stats::chatterjee_xi(&global, config.seed)?)?;
    r.stat("n_pairs", pairs.len() as f64)?;

    let eps = match config.eps {
        Some(e) => e,
        None => stats::percentile(&d, config.eps_pct)?,
    };
    let (n_local, fit) = local_fit(&d, &cos, eps)?;
    r.stat("eps", eps)?;
    r.stat("n_local_pairs", n_local as f64)?;
    r.stat("g0_estimate", fit.intercept)?;
    r.stat("gprime0_estimate", fit.slope)?;
    r.stat("local_r_squared", fit.r_squared)?;
    r.flags.insert("gprime0_negative".into(), fit.slope < 0.0);
    if fit.slope < 0.0 {
        r.stat("scale_estimate", (-2.0 * fit.slope).sqrt())?;
    }
    for pct in EPS_SWEEP {
        let e = stats::percentile(&d, pct)?;
        let (n_pairs, g0, gp) = match local_fit(&d, &cos, e) {
            Ok((n, f)) => (n, Some(f.intercept), Some(f.slope)),
            Err(_) => (d.iter().filter(|&&v| v <= e).count(), None, None),
        };
        r.sensitivity.push(WindowFit {
            pct,
            eps: e,
            n_pairs,
            g0_estimate: g0,
            gprime0_estimate: gp,
        });
    }
    r.scatter.push(ScatterPanel {
        name: "direct_cossim_vs_d2".into(),
        x_label: "squared feature distance".into(),
        y_label: "cosine similarity".into(),
        x: d2,
        y: cos,
        color: pair_colors(set, space, &pairs)?,
    });
    Ok(r)
}

/// Graph geodesic distance against feature distance; a proportional
/// relationship with slope `√(−2g′(0))` indicates isometry.
pub fn geodesic_isometry_test(
    set: &EmbeddingSet,
    space: &MetricSpace,
    config: &DiagnosticConfig,
) -> Result<DiagnosticReport> {
    check_size(set)?;
    let g = graph_for(set, config)?;
    let pairs = sample_pairs(set.len(), config.pair_budget, config.seed);
    let sources: Vec<usize> = pairs
        .iter()
        .map(|p| p.0)
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let rows = graph::geodesics_from_sources(&g, &sources)?;
    let mut slot = vec![usize::MAX; set.len()];
    for (k, &s) in sources.iter().enumerate() {
        slot[s] = k;
    }
    let mut metric = Vec::with_capacity(pairs.len());
    let mut geo = Vec::with_capacity(pairs.len());
    for &(i, j) in &pairs {
        metric.push(space.distance(set.values()[i], set.values()[j])?);
        geo.push(rows[slot[i]][j]);
    }
    let sample = PairedSample::new(metric.clone(), geo.clone())?;
    let origin = stats::fit_line(&sample, true)?;
    let free = stats::fit_line(&sample, false)?;
    let residuals: Vec<f64> = metric.iter().zip(&geo).map(|(x, y)| y - origin.slope * x).collect();
    let rmse = (residuals.iter().map(|e| e * e).sum::<f64>() / residuals.len() as f64).sqrt();
    let max_abs = residuals.iter().fold(0.0_f64, |m, e| m.max(e.abs()));

    let mut r = DiagnosticReport::new(TestKind::GeodesicIsometry, config);
    r.graph_conventions();
    r.stat("pearson", stats::pearson(&sample)?)?;
    r.stat("slope", origin.slope)?;
    r.stat("r_squared_origin", origin.r_squared)?;
    r.stat("slope_free", free.slope)?;
    r.stat("intercept", free.intercept)?;
    r.stat("r_squared_free", free.r_squared)?;
    r.stat("residual_rmse", rmse)?;
    r.stat("residual_max_abs", max_abs)?;
    r.stat("k", g.k() as f64)?;
    r.stat("n_pairs", pairs.len() as f64)?;
    r.scatter.push(ScatterPanel {
        name: "geodesic_vs_metric".into(),
        x_label: "feature distance".into(),
        y_label: "manifold geodesic".into(),
        x: metric,
        y: geo,
        color: pair_colors(set, space, &pairs)?,
    });
    Ok(r)
}

/// Records how far the geodesic slope is from the direct test's
/// `√(−2·g′(0))`. No-op when the direct estimate is not negative.
pub fn cross_check_scale(geodesic: &mut DiagnosticReport, direct: &DiagnosticReport) -> Result<()> {
    if let (Some(slope), Some(scale)) = (geodesic.get("slope"), direct.get("scale_estimate")) {
        geodesic.stat("direct_scale_estimate", scale)?;
        geodesic.stat("scale_relative_difference", (slope - scale).abs() / scale)?;
    }
    Ok(())
}
