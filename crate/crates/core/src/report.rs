//! Diagnostic runs end to end and the report bundle they produce: a
//! directory holding `report.json`, one SVG per scatter panel and
//! `inputs.lock` with the SHA-256 of every input file.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::embeddings::{load_dataset, normalize_rows, uncentered_pca, DatasetManifest, EmbeddingSet};
use crate::error::{GeodexError, Result, StageExt};
use crate::hypothesis::{self, DiagnosticConfig, DiagnosticReport, TestKind};
use crate::metric_space::{MetricSpace, SpaceManifest};
use crate::svg::{render_scatter_svg, Palette, ScatterPlot};

pub const SCHEMA: &str = "geodex-report/1";

/// Everything that determines a diagnostic run. The output directory is
/// deliberately absent so the echo in `report.json` does not depend on where
/// the bundle was written.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub data: PathBuf,
    pub manifest: PathBuf,
    pub tests: Vec<TestKind>,
    pub diagnostics: DiagnosticConfig,
}

impl RunConfig {
    pub fn new(data: PathBuf, manifest: PathBuf) -> Self {
        RunConfig {
            data,
            manifest,
            tests: vec![
                TestKind::Homeomorphism,
                TestKind::DirectIsometry,
                TestKind::GeodesicIsometry,
            ],
            diagnostics: DiagnosticConfig::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct InputHash {
    pub path: PathBuf,
    pub sha256: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DatasetSummary {
    pub rows: usize,
    pub excluded: usize,
    pub dim: usize,
    /// Width after projection; equals `dim` when PCA was skipped.
    pub analysed_dim: usize,
    pub space: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub singular_values: Option<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Skipped {
    pub test: TestKind,
    pub reason: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunReport {
    pub schema: &'static str,
    pub version: &'static str,
    pub config: RunConfig,
    pub inputs: Vec<InputHash>,
    pub dataset: DatasetSummary,
    pub reports: Vec<DiagnosticReport>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub skipped: Vec<Skipped>,
}

impl RunReport {
    pub fn report(&self, test: TestKind) -> Option<&DiagnosticReport> {
        self.reports.iter().find(|r| r.test == test)
    }
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path)?;
    let digest = Sha256::digest(&bytes);
    Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
}

/// Loads the manifest, binds the data file to its space and applies the
/// manifest's exclusion list. `data` overrides the manifest's own path.
pub fn load_inputs(data: Option<&Path>, manifest: &Path) -> Result<(EmbeddingSet, MetricSpace, DatasetManifest, usize)> {
    if !manifest.exists() {
        return Err(GeodexError::Config(format!("manifest {} not found", manifest.display())));
    }
    let m = DatasetManifest::load(manifest).stage("metric_space.load_manifest")?;
    let space = MetricSpace::from_manifest(&m.space).stage("metric_space.load_manifest")?;
    let path = match (data, &m.data) {
        (Some(p), _) => p.to_path_buf(),
        (None, Some(p)) => p.clone(),
        (None, None) => {
            return Err(GeodexError::Config(
                "no data file: pass --data or set \"data\" in the manifest".into(),
            ))
        }
    };
    if !path.exists() {
        return Err(GeodexError::Config(format!("data file {} not found", path.display())));
    }
    let full = load_dataset(&path, &space).stage("embeddings.load_dataset")?;
    let set = full.exclude(&m.exclude);
    let excluded = full.len() - set.len();
    Ok((set, space, m, excluded))
}

/// Normalizes rows and, when `components` is below the ambient width,
/// projects onto that many uncentered principal components.
pub fn preprocess(set: &EmbeddingSet, components: Option<usize>) -> Result<(EmbeddingSet, Option<Vec<f64>>)> {
    let unit = normalize_rows(set).stage("embeddings.normalize_rows")?;
    match components {
        Some(k) if k > 0 && k < unit.dim() => {
            let p = uncentered_pca(&unit, k).stage("embeddings.uncentered_pca")?;
            Ok((p.projected, Some(p.singular_values)))
        }
        _ => Ok((unit, None)),
    }
}

/// Runs the configured tests. Returns the report without touching disk.
pub fn run_diagnostics(config: &RunConfig) -> Result<RunReport> {
    let (set, space, _, excluded) = load_inputs(Some(&config.data), &config.manifest)?;
    let (work, singular_values) = preprocess(&set, config.diagnostics.components)?;
    let dc = &config.diagnostics;

    let mut tests = config.tests.clone();
    tests.sort();
    tests.dedup();
    let mut reports = Vec::new();
    let mut skipped = Vec::new();
    let mut direct: Option<DiagnosticReport> = None;
    for test in tests {
        match test {
            TestKind::Homeomorphism if !space.is_orderable() => skipped.push(Skipped {
                test,
                reason: format!("{} space has no order", space.kind()),
            }),
            TestKind::Homeomorphism => reports.push(
                hypothesis::homeomorphism_rank_test(&work, &space, dc).stage("hypothesis.homeomorphism_rank_test")?,
            ),
            TestKind::DirectIsometry => {
                let r = hypothesis::direct_isometry_test(&work, &space, dc).stage("hypothesis.direct_isometry_test")?;
                direct = Some(r.clone());
                reports.push(r);
            }
            TestKind::GeodesicIsometry => {
                let mut r =
                    hypothesis::geodesic_isometry_test(&work, &space, dc).stage("hypothesis.geodesic_isometry_test")?;
                if let Some(d) = &direct {
                    hypothesis::cross_check_scale(&mut r, d).stage("hypothesis.cross_check_scale")?;
                }
                reports.push(r);
            }
        }
    }

    Ok(RunReport {
        schema: SCHEMA,
        version: crate::VERSION,
        config: config.clone(),
        inputs: vec![
            InputHash {
                path: config.data.clone(),
                sha256: sha256_file(&config.data)?,
            },
            InputHash {
                path: config.manifest.clone(),
                sha256: sha256_file(&config.manifest)?,
            },
        ],
        dataset: DatasetSummary {
            rows: set.len(),
            excluded,
            dim: set.dim(),
            analysed_dim: work.dim(),
            space: space.kind().to_string(),
            singular_values,
        },
        reports,
        skipped,
    })
}

/// Palette named in the manifest, else hue for circles and blue→yellow for
/// other spaces with a scalar coordinate.
pub fn palette_for(manifest: &DatasetManifest) -> Result<Palette> {
    if let Some(name) = &manifest.palette {
        return name.parse();
    }
    Ok(match &manifest.space {
        SpaceManifest::Circle { .. } => Palette::Hue,
        SpaceManifest::Interval { .. } | SpaceManifest::Transformed { .. } => Palette::BlueYellow,
        _ => Palette::Plain,
    })
}

/// Runs the diagnostics and writes the bundle into `out`, which must not
/// exist yet. Files are staged in a sibling directory that is renamed into
/// place once complete, so a failed run leaves nothing behind at `out`.
pub fn cmd_run_diagnostics(config: &RunConfig, out: &Path) -> Result<RunReport> {
    if out.exists() {
        return Err(GeodexError::Config(format!(
            "output directory {} already exists",
            out.display()
        )));
    }
    let report = run_diagnostics(config)?;
    let manifest = DatasetManifest::load(&config.manifest).stage("metric_space.load_manifest")?;
    let palette = palette_for(&manifest)?;

    let staging = staging_dir(out)?;
    let written = write_bundle(&report, palette, &staging);
    if let Err(e) = written {
        let _ = fs::remove_dir_all(&staging);
        return Err(e.at("report.write_bundle"));
    }
    fs::rename(&staging, out).map_err(|e| {
        let _ = fs::remove_dir_all(&staging);
        GeodexError::Io(e).at("report.write_bundle")
    })?;
    Ok(report)
}

fn staging_dir(out: &Path) -> Result<PathBuf> {
    let name = out
        .file_name()
        .ok_or_else(|| GeodexError::Config(format!("invalid output directory {}", out.display())))?
        .to_string_lossy()
        .into_owned();
    let parent = match out.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    fs::create_dir_all(&parent)?;
    let staging = parent.join(format!(".{name}.partial-{}", std::process::id()));
    if staging.exists() {
        fs::remove_dir_all(&staging)?;
    }
    fs::create_dir(&staging)?;
    Ok(staging)
}

fn write_bundle(report: &RunReport, palette: Palette, dir: &Path) -> Result<()> {
    let mut json = serde_json::to_string_pretty(report)?;
    json.push('\n');
    fs::write(dir.join("report.json"), json)?;
    for r in &report.reports {
        for panel in &r.scatter {
            let svg = render_scatter_svg(&ScatterPlot {
                x: &panel.x,
                y: &panel.y,
                x_label: &panel.x_label,
                y_label: &panel.y_label,
                title: Some(&panel.name),
                color: panel.color.as_deref(),
                palette,
            })?;
            fs::write(dir.join(format!("{}.svg", panel.name)), svg)?;
        }
    }
    let lock: String = report
        .inputs
        .iter()
        .map(|h| format!("{}  {}\n", h.sha256, h.path.display()))
        .collect();
    fs::write(dir.join("inputs.lock"), lock)?;
    Ok(())
}

/// What `cmd_synth` wrote, plus ground-truth checks for superposition data.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SynthSummary {
    pub data: PathBuf,
    pub manifest: PathBuf,
    pub rows: usize,
    pub dim: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_reconstruction_residual: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_interference: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub probe_r_squared: Option<f64>,
}

/// Generates a synthetic dataset into `out/data.csv` with a matching
/// `out/manifest.json`, readable by every other command.
pub fn cmd_synth(spec: &crate::synthetic::SyntheticSpec, out: &Path) -> Result<SynthSummary> {
    let generated = crate::synthetic::generate(spec).stage("synthetic.generate")?;
    fs::create_dir_all(out)?;
    let data = out.join("data.csv");
    let manifest = out.join("manifest.json");
    generated.set.write_csv(&data, &generated.space)?;
    let dm = DatasetManifest {
        data: Some(PathBuf::from("data.csv")),
        space: generated.space.manifest().clone(),
        exclude: Vec::new(),
        palette: None,
    };
    let mut json = serde_json::to_string_pretty(&dm)?;
    json.push('\n');
    fs::write(&manifest, json)?;

    let mut summary = SynthSummary {
        data,
        manifest,
        rows: generated.set.len(),
        dim: generated.set.dim(),
        max_reconstruction_residual: None,
        max_interference: None,
        probe_r_squared: None,
    };
    if let Some(sp) = &generated.superposed {
        let probe = crate::synthetic::probe_designated(
            sp,
            &crate::synthetic::ProbeConfig {
                seed: spec.seed,
                ..Default::default()
            },
        )
        .stage("synthetic.linear_probe")?;
        summary.max_reconstruction_residual = Some(sp.max_reconstruction_residual());
        summary.max_interference = Some(sp.max_interference());
        summary.probe_r_squared = Some(probe.r_squared);
    }
    Ok(summary)
}
