//! Feature models as compact metric spaces.
//!
//! A [`MetricSpace`] is built from a [`SpaceManifest`], the JSON declaration
//! used on disk. Construction runs [`validate`] and refuses any declaration
//! with violations, so every constructed space is a metric.

use serde::{Deserialize, Serialize};

use crate::error::{GeodexError, Result};

/// Relative slack used when checking symmetry and the triangle inequality.
const METRIC_RTOL: f64 = 1e-12;
/// Cap on listed triangle violations; the check itself is exhaustive.
const MAX_TRIANGLE_REPORTS: usize = 256;

/// Elementwise reparametrisation of scalar feature values.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Transform {
    Identity,
    /// `z ↦ a·z + b`
    Affine { a: f64, b: f64 },
    /// `z ↦ ln(c − z)`, defined for `z < c`.
    LogOffset { c: f64 },
}

impl Transform {
    pub fn apply(&self, z: f64) -> Result<f64> {
        match *self {
            Transform::Identity => Ok(z),
            Transform::Affine { a, b } => Ok(a * z + b),
            Transform::LogOffset { c } => {
                if c > z {
                    Ok((c - z).ln())
                } else {
                    Err(GeodexError::Domain(format!(
                        "log_offset requires c > value, got c={c}, value={z}"
                    )))
                }
            }
        }
    }

    fn check_params(&self) -> Option<String> {
        match *self {
            Transform::Identity => None,
            Transform::Affine { a, b } if !(a.is_finite() && b.is_finite()) => {
                Some("affine coefficients must be finite".into())
            }
            Transform::Affine { a, .. } if a == 0.0 => {
                Some("affine slope must be nonzero (transform must be injective)".into())
            }
            Transform::LogOffset { c } if !c.is_finite() => Some("log_offset c must be finite".into()),
            _ => None,
        }
    }
}

/// Applies `transform` to every value.
pub fn apply_transform(values: &[f64], transform: &Transform) -> Result<Vec<f64>> {
    if let Some(msg) = transform.check_params() {
        return Err(GeodexError::Argument(msg));
    }
    values.iter().map(|&v| transform.apply(v)).collect()
}

/// On-disk declaration of a metric space.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum SpaceManifest {
    Interval {
        lo: f64,
        hi: f64,
    },
    Circle {
        circumference: f64,
    },
    DiscreteMatrix {
        labels: Vec<String>,
        matrix: Vec<Vec<f64>>,
    },
    Tree {
        nodes: Vec<String>,
        /// `null` for the root.
        parent: Vec<Option<usize>>,
        /// Weight of the edge to the parent; the root's entry must be `null` or 0.
        weight: Vec<Option<f64>>,
    },
    Transformed {
        transform: Transform,
        inner: Box<SpaceManifest>,
    },
}

/// A single failed metric or parameter check.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "violation", rename_all = "snake_case")]
pub enum Violation {
    InvalidParameter { message: String },
    Shape { message: String },
    NonFinite { i: usize, j: usize },
    Negative { i: usize, j: usize, value: f64 },
    NonzeroDiagonal { i: usize, value: f64 },
    Asymmetry { i: usize, j: usize, dij: f64, dji: f64 },
    Triangle { i: usize, j: usize, k: usize, dik: f64, via: f64 },
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct Validation {
    pub violations: Vec<Violation>,
}

impl Validation {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks a declaration without constructing it. Violations are data.
pub fn validate(manifest: &SpaceManifest) -> Validation {
    let mut out = Vec::new();
    collect_violations(manifest, &mut out);
    Validation { violations: out }
}

fn invalid(out: &mut Vec<Violation>, message: impl Into<String>) {
    out.push(Violation::InvalidParameter {
        message: message.into(),
    });
}

fn collect_violations(manifest: &SpaceManifest, out: &mut Vec<Violation>) {
    match manifest {
        SpaceManifest::Interval { lo, hi } => {
            if !(lo.is_finite() && hi.is_finite()) {
                invalid(out, "interval bounds must be finite");
            } else if lo >= hi {
                invalid(out, format!("interval requires lo < hi, got [{lo}, {hi}]"));
            }
        }
        SpaceManifest::Circle { circumference } => {
            if !(circumference.is_finite() && *circumference > 0.0) {
                invalid(out, format!("circumference must be positive, got {circumference}"));
            }
        }
        SpaceManifest::DiscreteMatrix { labels, matrix } => {
            check_matrix(labels, matrix, out);
        }
        SpaceManifest::Tree { nodes, parent, weight } => {
            if let Err(e) = TreeMetric::build(nodes, parent, weight) {
                invalid(out, e);
            }
        }
        SpaceManifest::Transformed { transform, inner } => {
            if let Some(msg) = transform.check_params() {
                invalid(out, msg);
            }
            match scalar_bounds(inner) {
                None => invalid(out, "transformed spaces need an interval-like inner space"),
                Some((_, hi)) => {
                    if let Transform::LogOffset { c } = transform {
                        if *c <= hi {
                            invalid(
                                out,
                                format!("log_offset c={c} must exceed the domain maximum {hi}"),
                            );
                        }
                    }
                }
            }
            collect_violations(inner, out);
        }
    }
}

fn scalar_bounds(manifest: &SpaceManifest) -> Option<(f64, f64)> {
    match manifest {
        SpaceManifest::Interval { lo, hi } => Some((*lo, *hi)),
        SpaceManifest::Transformed { inner, .. } => scalar_bounds(inner),
        _ => None,
    }
}

fn check_matrix(labels: &[String], m: &[Vec<f64>], out: &mut Vec<Violation>) {
    let n = m.len();
    if n == 0 {
        out.push(Violation::Shape {
            message: "matrix is empty".into(),
        });
        return;
    }
    if labels.len() != n {
        out.push(Violation::Shape {
            message: format!("{} labels for a {n}x{n} matrix", labels.len()),
        });
    }
    {
        let mut seen = std::collections::HashSet::new();
        for l in labels {
            if !seen.insert(l) {
                invalid(out, format!("duplicate label {l:?}"));
            }
        }
    }
    if let Some(i) = m.iter().position(|row| row.len() != n) {
        out.push(Violation::Shape {
            message: format!("row {i} has {} entries, expected {n}", m[i].len()),
        });
        return;
    }
    let mut finite = true;
    for i in 0..n {
        for j in 0..n {
            let v = m[i][j];
            if !v.is_finite() {
                out.push(Violation::NonFinite { i, j });
                finite = false;
            } else if v < 0.0 {
                out.push(Violation::Negative { i, j, value: v });
            }
        }
    }
    if !finite {
        return;
    }
    let scale = m
        .iter()
        .flatten()
        .fold(0.0_f64, |acc, v| acc.max(v.abs()))
        .max(1.0);
    let tol = METRIC_RTOL * scale;
    for (i, row) in m.iter().enumerate() {
        if row[i] != 0.0 {
            out.push(Violation::NonzeroDiagonal { i, value: row[i] });
        }
        for j in (i + 1)..n {
            if (m[i][j] - m[j][i]).abs() > tol {
                out.push(Violation::Asymmetry {
                    i,
                    j,
                    dij: m[i][j],
                    dji: m[j][i],
                });
            }
        }
    }
    let mut reported = 0;
    for i in 0..n {
        for k in 0..n {
            for j in 0..n {
                let via = m[i][j] + m[j][k];
                if m[i][k] > via + tol {
                    if reported < MAX_TRIANGLE_REPORTS {
                        out.push(Violation::Triangle {
                            i,
                            j,
                            k,
                            dik: m[i][k],
                            via,
                        });
                    }
                    reported += 1;
                }
            }
        }
    }
}

/// A point in a metric space: a real for Interval/Circle/Transformed, a node
/// index for DiscreteMatrix/WeightedTree.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Point {
    Scalar(f64),
    Node(usize),
}

#[derive(Clone, Debug)]
struct TreeMetric {
    labels: Vec<String>,
    parent: Vec<Option<usize>>,
    depth: Vec<usize>,
    root_dist: Vec<f64>,
}

impl TreeMetric {
    fn build(
        nodes: &[String],
        parent: &[Option<usize>],
        weight: &[Option<f64>],
    ) -> std::result::Result<Self, String> {
        let n = nodes.len();
        if n == 0 {
            return Err("tree has no nodes".into());
        }
        if parent.len() != n || weight.len() != n {
            return Err(format!(
                "tree needs one parent and weight entry per node ({n} nodes, {} parents, {} weights)",
                parent.len(),
                weight.len()
            ));
        }
        let roots: Vec<usize> = (0..n).filter(|&i| parent[i].is_none()).collect();
        if roots.len() != 1 {
            return Err(format!("tree needs exactly one root, found {}", roots.len()));
        }
        for i in 0..n {
            match (parent[i], weight[i]) {
                (Some(p), _) if p >= n => return Err(format!("node {i} has parent {p} out of range")),
                (Some(_), Some(w)) if w.is_finite() && w > 0.0 => {}
                (Some(_), w) => {
                    return Err(format!("edge weight for node {i} must be positive, got {w:?}"))
                }
                (None, None) | (None, Some(0.0)) => {}
                (None, Some(w)) => return Err(format!("root weight must be null or 0, got {w}")),
            }
        }
        let mut depth = vec![usize::MAX; n];
        let mut root_dist = vec![0.0; n];
        depth[roots[0]] = 0;
        for start in 0..n {
            // walk up until a resolved ancestor, then fill back down
            let mut chain = Vec::new();
            let mut cur = start;
            while depth[cur] == usize::MAX {
                if chain.len() > n {
                    return Err(format!("parent links of node {start} form a cycle"));
                }
                chain.push(cur);
                cur = parent[cur].expect("only the root has no parent and its depth is set");
            }
            for &node in chain.iter().rev() {
                let p = parent[node].unwrap();
                depth[node] = depth[p] + 1;
                root_dist[node] = root_dist[p] + weight[node].unwrap();
            }
        }
        Ok(TreeMetric {
            labels: nodes.to_vec(),
            parent: parent.to_vec(),
            depth,
            root_dist,
        })
    }

    fn lca(&self, mut a: usize, mut b: usize) -> usize {
        while self.depth[a] > self.depth[b] {
            a = self.parent[a].unwrap();
        }
        while self.depth[b] > self.depth[a] {
            b = self.parent[b].unwrap();
        }
        while a != b {
            a = self.parent[a].unwrap();
            b = self.parent[b].unwrap();
        }
        a
    }

    fn distance(&self, a: usize, b: usize) -> f64 {
        let c = self.lca(a, b);
        self.root_dist[a] + self.root_dist[b] - 2.0 * self.root_dist[c]
    }
}

#[derive(Clone, Debug)]
enum Variant {
    Interval { lo: f64, hi: f64 },
    Circle { circumference: f64 },
    Discrete { labels: Vec<String>, matrix: Vec<Vec<f64>> },
    Tree(TreeMetric),
    Transformed { transform: Transform, inner: Box<MetricSpace> },
}

/// A validated feature model `(Z, d)`. Immutable once built.
#[derive(Clone, Debug)]
pub struct MetricSpace {
    variant: Variant,
    manifest: SpaceManifest,
}

impl MetricSpace {
    pub fn from_manifest(manifest: &SpaceManifest) -> Result<Self> {
        let report = validate(manifest);
        if !report.is_ok() {
            return Err(GeodexError::Domain(format!(
                "invalid metric space declaration: {}",
                serde_json::to_string(&report.violations)?
            )));
        }
        let variant = match manifest {
            SpaceManifest::Interval { lo, hi } => Variant::Interval { lo: *lo, hi: *hi },
            SpaceManifest::Circle { circumference } => Variant::Circle {
                circumference: *circumference,
            },
            SpaceManifest::DiscreteMatrix { labels, matrix } => Variant::Discrete {
                labels: labels.clone(),
                matrix: matrix.clone(),
            },
            SpaceManifest::Tree { nodes, parent, weight } => {
                Variant::Tree(TreeMetric::build(nodes, parent, weight).map_err(GeodexError::Domain)?)
            }
            SpaceManifest::Transformed { transform, inner } => Variant::Transformed {
                transform: transform.clone(),
                inner: Box::new(MetricSpace::from_manifest(inner)?),
            },
        };
        Ok(MetricSpace {
            variant,
            manifest: manifest.clone(),
        })
    }

    pub fn from_json(json: &str) -> Result<Self> {
        let manifest: SpaceManifest = serde_json::from_str(json)?;
        Self::from_manifest(&manifest)
    }

    pub fn interval(lo: f64, hi: f64) -> Result<Self> {
        Self::from_manifest(&SpaceManifest::Interval { lo, hi })
    }

    pub fn circle(circumference: f64) -> Result<Self> {
        Self::from_manifest(&SpaceManifest::Circle { circumference })
    }

    pub fn discrete(labels: Vec<String>, matrix: Vec<Vec<f64>>) -> Result<Self> {
        Self::from_manifest(&SpaceManifest::DiscreteMatrix { labels, matrix })
    }

    pub fn tree(nodes: Vec<String>, parent: Vec<Option<usize>>, weight: Vec<Option<f64>>) -> Result<Self> {
        Self::from_manifest(&SpaceManifest::Tree { nodes, parent, weight })
    }

    pub fn transformed(inner: MetricSpace, transform: Transform) -> Result<Self> {
        Self::from_manifest(&SpaceManifest::Transformed {
            transform,
            inner: Box::new(inner.manifest),
        })
    }

    pub fn manifest(&self) -> &SpaceManifest {
        &self.manifest
    }

    /// Re-runs the declaration checks; always ok for a constructed space.
    pub fn validate(&self) -> Validation {
        validate(&self.manifest)
    }

    pub fn kind(&self) -> &'static str {
        match self.variant {
            Variant::Interval { .. } => "interval",
            Variant::Circle { .. } => "circle",
            Variant::Discrete { .. } => "discrete_matrix",
            Variant::Tree(_) => "tree",
            Variant::Transformed { .. } => "transformed",
        }
    }

    /// True for spaces whose points carry a total order (intervals and their
    /// transforms).
    pub fn is_orderable(&self) -> bool {
        match &self.variant {
            Variant::Interval { .. } => true,
            Variant::Transformed { inner, .. } => inner.is_orderable(),
            _ => false,
        }
    }

    /// True when points are reals rather than node indices.
    pub fn is_scalar(&self) -> bool {
        !matches!(self.variant, Variant::Discrete { .. } | Variant::Tree(_))
    }

    /// Checks domain membership and canonicalizes circle points into `[0, C)`.
    pub fn check_point(&self, p: Point) -> Result<Point> {
        match (&self.variant, p) {
            (Variant::Interval { lo, hi }, Point::Scalar(x)) => {
                if x.is_finite() && *lo <= x && x <= *hi {
                    Ok(p)
                } else {
                    Err(GeodexError::Domain(format!("{x} outside interval [{lo}, {hi}]")))
                }
            }
            (Variant::Circle { circumference: c }, Point::Scalar(x)) => {
                if x.is_finite() && 0.0 <= x && x <= *c {
                    let y = x.rem_euclid(*c);
                    // rem_euclid can round up to exactly c
                    Ok(Point::Scalar(if y >= *c { 0.0 } else { y }))
                } else {
                    Err(GeodexError::Domain(format!("{x} outside circle domain [0, {c}]")))
                }
            }
            (Variant::Transformed { transform, inner }, Point::Scalar(_)) => {
                let p = inner.check_point(p)?;
                if let Point::Scalar(x) = p {
                    transform.apply(x)?;
                }
                Ok(p)
            }
            (Variant::Discrete { labels, .. }, Point::Node(i)) => {
                if i < labels.len() {
                    Ok(p)
                } else {
                    Err(GeodexError::Domain(format!("node {i} out of range ({} labels)", labels.len())))
                }
            }
            (Variant::Tree(t), Point::Node(i)) => {
                if i < t.labels.len() {
                    Ok(p)
                } else {
                    Err(GeodexError::Domain(format!("node {i} out of range ({} nodes)", t.labels.len())))
                }
            }
            (_, p) => Err(GeodexError::Type(format!(
                "point {p:?} does not belong to a {} space",
                self.kind()
            ))),
        }
    }

    /// Parses a textual feature value: a real for scalar spaces, a label for
    /// labelled ones.
    pub fn parse_point(&self, text: &str) -> Result<Point> {
        let text = text.trim();
        let p = if self.is_scalar() {
            let x: f64 = text
                .parse()
                .map_err(|_| GeodexError::Format(format!("non-numeric value {text:?}")))?;
            Point::Scalar(x)
        } else {
            let labels = match &self.variant {
                Variant::Discrete { labels, .. } => labels,
                Variant::Tree(t) => &t.labels,
                _ => unreachable!(),
            };
            let i = labels
                .iter()
                .position(|l| l == text)
                .ok_or_else(|| GeodexError::Domain(format!("unknown label {text:?}")))?;
            Point::Node(i)
        };
        self.check_point(p)
    }

    /// Scalar coordinate of a point after any transforms; `None` for labelled
    /// spaces.
    pub fn coordinate(&self, p: Point) -> Result<Option<f64>> {
        match (&self.variant, p) {
            (Variant::Transformed { transform, inner }, Point::Scalar(_)) => match inner.coordinate(p)? {
                Some(x) => Ok(Some(transform.apply(x)?)),
                None => Ok(None),
            },
            (Variant::Interval { .. } | Variant::Circle { .. }, Point::Scalar(x)) => Ok(Some(x)),
            _ => Ok(None),
        }
    }

    pub fn distance(&self, a: Point, b: Point) -> Result<f64> {
        let a = self.check_point(a)?;
        let b = self.check_point(b)?;
        Ok(match (&self.variant, a, b) {
            (Variant::Interval { .. }, Point::Scalar(x), Point::Scalar(y)) => (x - y).abs(),
            (Variant::Circle { circumference: c }, Point::Scalar(x), Point::Scalar(y)) => {
                let d = (x - y).abs();
                d.min(c - d)
            }
            (Variant::Discrete { matrix, .. }, Point::Node(i), Point::Node(j)) => matrix[i][j],
            (Variant::Tree(t), Point::Node(i), Point::Node(j)) => t.distance(i, j),
            (Variant::Transformed { .. }, Point::Scalar(_), Point::Scalar(_)) => {
                let x = self.coordinate(a)?.expect("scalar");
                let y = self.coordinate(b)?.expect("scalar");
                (x - y).abs()
            }
            _ => unreachable!("check_point enforces kinds"),
        })
    }
}

/// An ordered sample `η(t_0), …, η(t_n)` of a path.
#[derive(Clone, Debug, PartialEq)]
pub struct PathSample {
    points: Vec<Point>,
    params: Vec<f64>,
}

impl PathSample {
    pub fn new(points: Vec<Point>, params: Vec<f64>) -> Result<Self> {
        if points.len() < 2 {
            return Err(GeodexError::Argument(format!(
                "a path sample needs at least 2 points, got {}",
                points.len()
            )));
        }
        if params.len() != points.len() {
            return Err(GeodexError::Argument(format!(
                "{} parameters for {} points",
                params.len(),
                points.len()
            )));
        }
        if params.windows(2).any(|w| !(w[0] <= w[1])) {
            return Err(GeodexError::Argument("path parameters must be nondecreasing".into()));
        }
        Ok(PathSample { points, params })
    }

    /// Uniform parameters `0, 1, …, n−1`.
    pub fn from_points(points: Vec<Point>) -> Result<Self> {
        let params = (0..points.len()).map(|i| i as f64).collect();
        Self::new(points, params)
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }
}

/// Partition sum `Σ d(η(t_i), η(t_{i−1}))`.
///
/// This is a lower bound on the path's length; by the triangle inequality it
/// never decreases when points are inserted, and it converges to the length
/// under refinement.
pub fn path_length(space: &MetricSpace, path: &PathSample) -> Result<f64> {
    path.points
        .windows(2)
        .map(|w| space.distance(w[0], w[1]))
        .sum()
}
