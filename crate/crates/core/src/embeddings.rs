//! Representation matrices, their feature values, and the linear operations
//! applied before any diagnostic.

use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{GeodexError, Result};
use crate::metric_space::{MetricSpace, Point, SpaceManifest};

/// Rows with norm below this are treated as zero.
pub const MIN_ROW_NORM: f64 = 1e-12;

/// `n × D` representations with an aligned label and feature value per row.
#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingSet {
    data: Vec<f64>,
    dim: usize,
    labels: Vec<String>,
    values: Vec<Point>,
    normalized: bool,
}

impl EmbeddingSet {
    pub fn new(rows: Vec<Vec<f64>>, labels: Vec<String>, values: Vec<Point>) -> Result<Self> {
        let n = rows.len();
        if labels.len() != n || values.len() != n {
            return Err(GeodexError::Format(format!(
                "{n} rows, {} labels and {} values must match",
                labels.len(),
                values.len()
            )));
        }
        let dim = rows.first().map_or(0, Vec::len);
        if n > 0 && dim == 0 {
            return Err(GeodexError::Format("rows have no coordinates".into()));
        }
        let mut data = Vec::with_capacity(n * dim);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != dim {
                return Err(GeodexError::Format(format!(
                    "ragged rows: row {i} has {} entries, expected {dim}",
                    row.len()
                )));
            }
            if row.iter().any(|v| !v.is_finite()) {
                return Err(GeodexError::Format(format!("row {i} has a non-finite entry")));
            }
            data.extend_from_slice(row);
        }
        Ok(EmbeddingSet {
            data,
            dim,
            labels,
            values,
            normalized: false,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.dim.max(1))
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.rows().map(<[f64]>::to_vec).collect()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn values(&self) -> &[Point] {
        &self.values
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    /// Checks every value against `space`, canonicalizing circle points.
    pub fn bind(mut self, space: &MetricSpace) -> Result<Self> {
        for (i, v) in self.values.iter_mut().enumerate() {
            *v = space
                .check_point(*v)
                .map_err(|e| GeodexError::Domain(format!("row {i} ({}): {e}", self.labels[i])))?;
        }
        Ok(self)
    }

    /// Drops every row whose label is listed.
    pub fn exclude(&self, labels: &[String]) -> Self {
        let keep: Vec<usize> = (0..self.len())
            .filter(|&i| !labels.contains(&self.labels[i]))
            .collect();
        self.select(&keep)
    }

    pub fn select(&self, rows: &[usize]) -> Self {
        let mut data = Vec::with_capacity(rows.len() * self.dim);
        for &i in rows {
            data.extend_from_slice(self.row(i));
        }
        EmbeddingSet {
            data,
            dim: self.dim,
            labels: rows.iter().map(|&i| self.labels[i].clone()).collect(),
            values: rows.iter().map(|&i| self.values[i]).collect(),
            normalized: self.normalized,
        }
    }

    /// Same labels and values, new coordinates.
    fn with_data(&self, data: Vec<f64>, dim: usize, normalized: bool) -> Self {
        EmbeddingSet {
            data,
            dim,
            labels: self.labels.clone(),
            values: self.values.clone(),
            normalized,
        }
    }

    /// Writes `label,value,x0,...` CSV. Values are written as numbers for
    /// scalar points and as labels for node points.
    pub fn write_csv(&self, path: &Path, space: &MetricSpace) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        let mut header = vec!["label".to_string(), "value".to_string()];
        header.extend((0..self.dim).map(|j| format!("x{j}")));
        w.write_record(&header)?;
        for i in 0..self.len() {
            let mut rec = vec![self.labels[i].clone(), format_value(self.values[i], space)];
            rec.extend(self.row(i).iter().map(|v| v.to_string()));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

fn format_value(p: Point, space: &MetricSpace) -> String {
    match (p, space.manifest()) {
        (Point::Scalar(x), _) => x.to_string(),
        (Point::Node(i), SpaceManifest::DiscreteMatrix { labels, .. }) => labels[i].clone(),
        (Point::Node(i), SpaceManifest::Tree { nodes, .. }) => nodes[i].clone(),
        (Point::Node(i), _) => i.to_string(),
    }
}

/// Binds a data file to a metric space, plus optional row exclusions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    /// Data file, resolved relative to the manifest when not absolute.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub data: Option<PathBuf>,
    pub space: SpaceManifest,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub exclude: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub palette: Option<String>,
}

impl DatasetManifest {
    /// Reads a dataset manifest, or a bare metric-space declaration.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| GeodexError::Config(format!("cannot read manifest {}: {e}", path.display())))?;
        let json: serde_json::Value = serde_json::from_str(&text)?;
        let mut manifest: DatasetManifest = if json.get("space").is_some() {
            serde_json::from_value(json)?
        } else {
            DatasetManifest {
                data: None,
                space: serde_json::from_value(json)?,
                exclude: Vec::new(),
                palette: None,
            }
        };
        if let (Some(data), Some(dir)) = (&manifest.data, path.parent()) {
            if data.is_relative() {
                manifest.data = Some(dir.join(data));
            }
        }
        Ok(manifest)
    }
}

#[derive(Deserialize)]
struct JsonRow {
    label: String,
    value: serde_json::Value,
    vector: Vec<f64>,
}

/// Parses a CSV (`label,value,x0,…`) or JSON-lines (`label`, `value`,
/// `vector`) dataset and validates its values against `space`.
pub fn load_dataset(path: &Path, space: &MetricSpace) -> Result<EmbeddingSet> {
    let text = fs::read_to_string(path)?;
    if text.trim().is_empty() {
        return Err(GeodexError::Format(format!("{} is empty", path.display())));
    }
    let jsonl = matches!(
        path.extension().and_then(|e| e.to_str()),
        Some("jsonl" | "ndjson")
    );
    let (rows, labels, raw_values) = if jsonl {
        parse_jsonl(&text)?
    } else {
        parse_csv(&text)?
    };
    if rows.is_empty() {
        return Err(GeodexError::Format(format!("{} has no data rows", path.display())));
    }
    let values = raw_values
        .iter()
        .enumerate()
        .map(|(i, v)| {
            space
                .parse_point(v)
                .map_err(|e| match e {
                    GeodexError::Domain(m) => GeodexError::Domain(format!("row {i}: {m}")),
                    GeodexError::Format(m) => GeodexError::Format(format!("row {i}: {m}")),
                    e => e,
                })
        })
        .collect::<Result<Vec<_>>>()?;
    EmbeddingSet::new(rows, labels, values)
}

type Parsed = (Vec<Vec<f64>>, Vec<String>, Vec<String>);

fn parse_csv(text: &str) -> Result<Parsed> {
    let mut reader = csv::ReaderBuilder::new()
        .flexible(true)
        .from_reader(text.as_bytes());
    let header = reader.headers()?.clone();
    if header.len() < 3 || &header[0] != "label" || &header[1] != "value" {
        return Err(GeodexError::Format(
            "CSV header must be label,value,x0,...,x{D-1}".into(),
        ));
    }
    let dim = header.len() - 2;
    let (mut rows, mut labels, mut values) = (Vec::new(), Vec::new(), Vec::new());
    for (i, rec) in reader.records().enumerate() {
        let rec = rec?;
        if rec.len() != dim + 2 {
            return Err(GeodexError::Format(format!(
                "ragged rows: row {i} has {} fields, expected {}",
                rec.len(),
                dim + 2
            )));
        }
        let row = rec
            .iter()
            .skip(2)
            .map(|f| {
                f.trim()
                    .parse::<f64>()
                    .map_err(|_| GeodexError::Format(format!("row {i}: non-numeric entry {f:?}")))
            })
            .collect::<Result<Vec<f64>>>()?;
        labels.push(rec[0].to_string());
        values.push(rec[1].to_string());
        rows.push(row);
    }
    Ok((rows, labels, values))
}

fn parse_jsonl(text: &str) -> Result<Parsed> {
    let (mut rows, mut labels, mut values) = (Vec::new(), Vec::new(), Vec::new());
    for (i, line) in text.lines().filter(|l| !l.trim().is_empty()).enumerate() {
        let row: JsonRow = serde_json::from_str(line)
            .map_err(|e| GeodexError::Format(format!("row {i}: {e}")))?;
        let value = match row.value {
            serde_json::Value::String(s) => s,
            serde_json::Value::Number(n) => n.to_string(),
            other => return Err(GeodexError::Format(format!("row {i}: unsupported value {other}"))),
        };
        if let Some(first) = rows.first().map(Vec::len) {
            if row.vector.len() != first {
                return Err(GeodexError::Format(format!(
                    "ragged rows: row {i} has {} entries, expected {first}",
                    row.vector.len()
                )));
            }
        }
        labels.push(row.label);
        values.push(value);
        rows.push(row.vector);
    }
    Ok((rows, labels, values))
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn dot(u: &[f64], v: &[f64]) -> f64 {
    u.iter().zip(v).map(|(a, b)| a * b).sum()
}

/// Divides every row by its Euclidean norm.
pub fn normalize_rows(set: &EmbeddingSet) -> Result<EmbeddingSet> {
    let mut data = Vec::with_capacity(set.data.len());
    for (i, row) in set.rows().enumerate() {
        let n = norm(row);
        if !(n >= MIN_ROW_NORM) {
            return Err(GeodexError::Degenerate(format!(
                "row {i} ({}) has norm {n:e}, cannot normalize",
                set.labels[i]
            )));
        }
        data.extend(row.iter().map(|v| v / n));
    }
    Ok(set.with_data(data, set.dim, true))
}

/// Result of an uncentered principal-component projection.
#[derive(Clone, Debug)]
pub struct Projection {
    /// Rows projected onto the leading `k` right singular directions.
    pub projected: EmbeddingSet,
    /// Leading singular values, nonincreasing.
    pub singular_values: Vec<f64>,
    /// `k × D` unit directions; each one's largest-magnitude entry is positive.
    pub components: Vec<Vec<f64>>,
}

/// Projects rows onto the top-`k` right singular vectors of the data matrix
/// without subtracting the mean.
pub fn uncentered_pca(set: &EmbeddingSet, k: usize) -> Result<Projection> {
    let (n, d) = (set.len(), set.dim());
    if k == 0 || k > n.min(d) {
        return Err(GeodexError::Argument(format!(
            "component count {k} out of range 1..={}",
            n.min(d)
        )));
    }
    let x = DMatrix::from_row_slice(n, d, &set.data);
    let svd = x.clone().svd(false, true);
    let v_t = svd.v_t.expect("requested right singular vectors");
    let sv = svd.singular_values;

    let mut order: Vec<usize> = (0..sv.len()).collect();
    order.sort_by(|&a, &b| sv[b].total_cmp(&sv[a]).then(a.cmp(&b)));

    let mut components = Vec::with_capacity(k);
    for &c in order.iter().take(k) {
        let mut v: Vec<f64> = v_t.row(c).iter().copied().collect();
        let mut lead = 0;
        for j in 1..v.len() {
            if v[j].abs() > v[lead].abs() {
                lead = j;
            }
        }
        if v[lead] < 0.0 {
            v.iter_mut().for_each(|e| *e = -*e);
        }
        components.push(v);
    }
    let mut data = Vec::with_capacity(n * k);
    for row in set.rows() {
        data.extend(components.iter().map(|c| dot(row, c)));
    }
    Ok(Projection {
        projected: set.with_data(data, k, false),
        singular_values: order.iter().take(k).map(|&c| sv[c]).collect(),
        components,
    })
}

/// `⟨u,v⟩ / (‖u‖‖v‖)`, clamped to `[−1, 1]`.
pub fn cosine_similarity(u: &[f64], v: &[f64]) -> Result<f64> {
    if u.len() != v.len() {
        return Err(GeodexError::Argument(format!(
            "vector lengths differ: {} vs {}",
            u.len(),
            v.len()
        )));
    }
    let (nu, nv) = (norm(u), norm(v));
    if nu == 0.0 || nv == 0.0 {
        return Err(GeodexError::Degenerate("cosine similarity of a zero vector".into()));
    }
    Ok((dot(u, v) / (nu * nv)).clamp(-1.0, 1.0))
}
