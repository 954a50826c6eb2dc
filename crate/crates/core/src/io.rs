//! File formats: PGM images, CSV frames and images, mesh JSON, the binary
//! sensitivity-matrix cache, and the dataset directory layout.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use std::fs;
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::fem::VoltageFrame;
use crate::geometry::pair_schedule;
use crate::grid::ConductivityImage;
use crate::jacobian::SensitivityMatrix;
use crate::mesh::Mesh;
use crate::phantom::Dataset;
use crate::segment::{BinaryMask, Roi};

// ---------------------------------------------------------------------------
// PGM
// ---------------------------------------------------------------------------

/// Write an image as ASCII PGM (P2), linearly scaled to 0..=255. The scale is
/// recorded in a comment so values can be recovered.
pub fn write_image_pgm(image: &ConductivityImage, path: &Path) -> Result<()> {
    let (lo, hi) = image.min_max();
    let span = if hi > lo { hi - lo } else { 1.0 };
    let mut out = BufWriter::new(fs::File::create(path)?);
    writeln!(out, "P2")?;
    writeln!(out, "# scale min={lo} max={hi}")?;
    writeln!(out, "{} {}", image.width(), image.height())?;
    writeln!(out, "255")?;
    for row in 0..image.height() {
        let mut line = String::new();
        for col in 0..image.width() {
            let v = ((image.get(row, col) - lo) / span * 255.0).round() as i64;
            let v = v.clamp(0, 255);
            if col > 0 {
                line.push(' ');
            }
            line.push_str(&v.to_string());
        }
        writeln!(out, "{line}")?;
    }
    Ok(())
}

/// Write a binary mask as PGM with 0/255 levels.
pub fn write_mask_pgm(mask: &BinaryMask, path: &Path) -> Result<()> {
    let mut out = BufWriter::new(fs::File::create(path)?);
    writeln!(out, "P2")?;
    writeln!(out, "{} {}", mask.width(), mask.height())?;
    writeln!(out, "255")?;
    for row in 0..mask.height() {
        let line: Vec<&str> = (0..mask.width())
            .map(|col| if mask.get(row, col) { "255" } else { "0" })
            .collect();
        writeln!(out, "{}", line.join(" "))?;
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// CSV
// ---------------------------------------------------------------------------

/// Write an image as row-major CSV, one image row per line.
pub fn write_image_csv(image: &ConductivityImage, path: &Path) -> Result<()> {
    let mut out = BufWriter::new(fs::File::create(path)?);
    for row in 0..image.height() {
        let line: Vec<String> = (0..image.width())
            .map(|col| format!("{}", image.get(row, col)))
            .collect();
        writeln!(out, "{}", line.join(","))?;
    }
    Ok(())
}

/// Read a row-major CSV image; dimensions come from the file shape.
pub fn read_image_csv(path: &Path, side_length: f64) -> Result<ConductivityImage> {
    let text = fs::read_to_string(path)?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let row: std::result::Result<Vec<f64>, _> =
            line.split(',').map(|t| t.trim().parse::<f64>()).collect();
        let row = row.map_err(|e| {
            Error::Format(format!("{}:{}: bad number: {e}", path.display(), lineno + 1))
        })?;
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::Format(format!("{}: empty image", path.display())));
    }
    let width = rows[0].len();
    if rows.iter().any(|r| r.len() != width) {
        return Err(Error::Format(format!(
            "{}: ragged rows in CSV image",
            path.display()
        )));
    }
    let height = rows.len();
    ConductivityImage::from_values(width, height, side_length, rows.concat())
}

/// Write a voltage frame as CSV: `i,j,voltage`, one row per schedule pair,
/// electrodes 0-indexed.
pub fn write_frame_csv(frame: &VoltageFrame, path: &Path) -> Result<()> {
    let mut out = BufWriter::new(fs::File::create(path)?);
    writeln!(out, "i,j,voltage")?;
    for (&(i, j), v) in frame.schedule().pairs().iter().zip(frame.values()) {
        writeln!(out, "{i},{j},{v}")?;
    }
    Ok(())
}

/// Read a frame CSV produced by [`write_frame_csv`]. The pair list must be
/// the complete lexicographic schedule of some electrode count.
pub fn read_frame_csv(path: &Path) -> Result<VoltageFrame> {
    let text = fs::read_to_string(path)?;
    let mut pairs = Vec::new();
    let mut values = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line == "i,j,voltage" {
            continue;
        }
        let parts: Vec<&str> = line.split(',').collect();
        if parts.len() != 3 {
            return Err(Error::Format(format!(
                "{}:{}: expected 'i,j,voltage'",
                path.display(),
                lineno + 1
            )));
        }
        let parse = |t: &str| -> Result<usize> {
            t.trim()
                .parse::<usize>()
                .map_err(|e| Error::Format(format!("{}: bad electrode index: {e}", path.display())))
        };
        let i = parse(parts[0])?;
        let j = parse(parts[1])?;
        let v: f64 = parts[2].trim().parse().map_err(|e| {
            Error::Format(format!("{}:{}: bad voltage: {e}", path.display(), lineno + 1))
        })?;
        pairs.push((i, j));
        values.push(v);
    }
    let n = pairs
        .iter()
        .map(|&(i, j)| i.max(j) + 1)
        .max()
        .ok_or_else(|| Error::Format(format!("{}: no measurements", path.display())))?;
    let schedule = pair_schedule(n)?;
    if schedule.pairs() != pairs.as_slice() {
        return Err(Error::Format(format!(
            "{}: pair list is not the full lexicographic schedule for {n} electrodes",
            path.display()
        )));
    }
    VoltageFrame::new(values, schedule)
}

// ---------------------------------------------------------------------------
// Mesh JSON
// ---------------------------------------------------------------------------

#[derive(Serialize)]
struct MeshExport<'a> {
    side_length: f64,
    density: usize,
    nodes: &'a [(f64, f64)],
    triangles: &'a [[usize; 3]],
    electrode_nodes: &'a [Vec<usize>],
    electrode_weights: &'a [Vec<f64>],
}

/// Write the mesh as JSON: nodes, triangles, and electrode node sets.
pub fn write_mesh_json(mesh: &Mesh, path: &Path) -> Result<()> {
    let export = MeshExport {
        side_length: mesh.geometry().side_length,
        density: mesh.density(),
        nodes: mesh.nodes(),
        triangles: mesh.triangles(),
        electrode_nodes: mesh.electrode_nodes(),
        electrode_weights: mesh.electrode_weights(),
    };
    write_json(&export, path)
}

/// Serialize any report-like value as pretty JSON.
pub fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let text = serde_json::to_string_pretty(value)
        .map_err(|e| Error::Format(format!("serialization failed: {e}")))?;
    fs::write(path, text + "\n")?;
    Ok(())
}

// ---------------------------------------------------------------------------
// ROI report
// ---------------------------------------------------------------------------

#[derive(Debug, Serialize)]
pub struct RoiReportEntry {
    pub id: usize,
    pub pixel_count: usize,
    pub intensity_sum: f64,
    pub centroid_cm: (f64, f64),
    /// `(min_row, min_col, max_row, max_col)` of the mask.
    pub bbox: Option<(usize, usize, usize, usize)>,
}

/// JSON-ready view of labeled regions.
pub fn roi_report(rois: &[Roi]) -> Vec<RoiReportEntry> {
    rois.iter()
        .map(|r| RoiReportEntry {
            id: r.id,
            pixel_count: r.pixel_count,
            intensity_sum: r.intensity_sum,
            centroid_cm: r.centroid_cm,
            bbox: r.mask.bounding_box(),
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Sensitivity matrix cache
// ---------------------------------------------------------------------------

const SENS_MAGIC: &[u8; 4] = b"DTSM";
const SENS_VERSION: u32 = 1;

/// Write the sensitivity matrix to a binary cache file keyed by its input
/// hash.
pub fn write_sensitivity(matrix: &SensitivityMatrix, path: &Path) -> Result<()> {
    let mut out = BufWriter::new(fs::File::create(path)?);
    out.write_all(SENS_MAGIC)?;
    out.write_all(&SENS_VERSION.to_le_bytes())?;
    out.write_all(&matrix.cache_key().to_le_bytes())?;
    out.write_all(&(matrix.electrode_count() as u32).to_le_bytes())?;
    out.write_all(&(matrix.grid_width() as u32).to_le_bytes())?;
    out.write_all(&(matrix.grid_height() as u32).to_le_bytes())?;
    out.write_all(&(matrix.mesh_density() as u32).to_le_bytes())?;
    out.write_all(&matrix.side_length().to_le_bytes())?;
    out.write_all(&(matrix.rows() as u32).to_le_bytes())?;
    out.write_all(&(matrix.cols() as u32).to_le_bytes())?;
    out.write_all(&(matrix.reference().len() as u32).to_le_bytes())?;
    for v in matrix.reference() {
        out.write_all(&v.to_le_bytes())?;
    }
    for r in 0..matrix.rows() {
        for c in 0..matrix.cols() {
            out.write_all(&matrix.matrix()[(r, c)].to_le_bytes())?;
        }
    }
    Ok(())
}

/// Read a cached sensitivity matrix. If `expected_key` is given, a mismatch
/// is a configuration error (the cache belongs to different inputs).
pub fn read_sensitivity(path: &Path, expected_key: Option<u64>) -> Result<SensitivityMatrix> {
    let mut file = fs::File::open(path)?;
    let mut bytes = Vec::new();
    file.read_to_end(&mut bytes)?;
    let mut at = 0usize;
    let take = |at: &mut usize, n: usize| -> Result<&[u8]> {
        if *at + n > bytes.len() {
            return Err(Error::Format(format!(
                "{}: truncated sensitivity cache",
                path.display()
            )));
        }
        let s = &bytes[*at..*at + n];
        *at += n;
        Ok(s)
    };
    let u32_at = |at: &mut usize| -> Result<u32> {
        Ok(u32::from_le_bytes(take(at, 4)?.try_into().unwrap()))
    };
    let u64_at = |at: &mut usize| -> Result<u64> {
        Ok(u64::from_le_bytes(take(at, 8)?.try_into().unwrap()))
    };
    let f64_at = |at: &mut usize| -> Result<f64> {
        Ok(f64::from_le_bytes(take(at, 8)?.try_into().unwrap()))
    };

    if take(&mut at, 4)? != SENS_MAGIC {
        return Err(Error::Format(format!(
            "{}: not a sensitivity cache file",
            path.display()
        )));
    }
    let version = u32_at(&mut at)?;
    if version != SENS_VERSION {
        return Err(Error::Format(format!(
            "{}: unsupported cache version {version}",
            path.display()
        )));
    }
    let key = u64_at(&mut at)?;
    if let Some(expected) = expected_key {
        if key != expected {
            return Err(Error::Config(format!(
                "{}: cache key {key:#x} does not match the configured geometry ({expected:#x})",
                path.display()
            )));
        }
    }
    let electrode_count = u32_at(&mut at)? as usize;
    let grid_width = u32_at(&mut at)? as usize;
    let grid_height = u32_at(&mut at)? as usize;
    let mesh_density = u32_at(&mut at)? as usize;
    let side_length = f64_at(&mut at)?;
    let rows = u32_at(&mut at)? as usize;
    let cols = u32_at(&mut at)? as usize;
    let ref_len = u32_at(&mut at)? as usize;
    let mut reference = Vec::with_capacity(ref_len);
    for _ in 0..ref_len {
        reference.push(f64_at(&mut at)?);
    }
    let mut matrix = DMatrix::<f64>::zeros(rows, cols);
    for r in 0..rows {
        for c in 0..cols {
            matrix[(r, c)] = f64_at(&mut at)?;
        }
    }
    Ok(SensitivityMatrix::from_parts(
        matrix,
        electrode_count,
        grid_width,
        grid_height,
        side_length,
        mesh_density,
        reference,
        key,
    ))
}

// ---------------------------------------------------------------------------
// Dataset directory
// ---------------------------------------------------------------------------

#[derive(Debug, Serialize, Deserialize)]
pub struct ManifestSample {
    pub id: usize,
    pub contacts: usize,
    pub scenario: crate::phantom::Scenario,
    pub pressure: f64,
    pub contact_frame: String,
    pub ground_truth_pgm: String,
    pub ground_truth_csv: String,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub seed: u64,
    pub per_category: usize,
    pub noisy_pressure: bool,
    pub electrode_count: usize,
    pub pair_count: usize,
    pub baseline_frame: String,
    pub samples: Vec<ManifestSample>,
}

/// Write a generated dataset as a directory: shared baseline frame, one
/// contact frame CSV and ground-truth image pair per sample, plus
/// `manifest.json` tying them together.
pub fn write_dataset(dataset: &Dataset, dir: &Path) -> Result<PathBuf> {
    fs::create_dir_all(dir)?;
    let baseline_name = "baseline.csv".to_string();
    write_frame_csv(&dataset.baseline_frame, &dir.join(&baseline_name))?;

    let mut samples = Vec::with_capacity(dataset.samples.len());
    for sample in &dataset.samples {
        let frame_name = format!("contact_{:04}.csv", sample.id);
        let pgm_name = format!("gt_{:04}.pgm", sample.id);
        let csv_name = format!("gt_{:04}.csv", sample.id);
        write_frame_csv(&sample.contact_frame, &dir.join(&frame_name))?;
        write_image_pgm(&sample.ground_truth, &dir.join(&pgm_name))?;
        write_image_csv(&sample.ground_truth, &dir.join(&csv_name))?;
        samples.push(ManifestSample {
            id: sample.id,
            contacts: sample.scenario.contact_count(),
            scenario: sample.scenario.clone(),
            pressure: sample.pressure,
            contact_frame: frame_name,
            ground_truth_pgm: pgm_name,
            ground_truth_csv: csv_name,
        });
    }

    let manifest = DatasetManifest {
        seed: dataset.seed,
        per_category: dataset.config.per_category,
        noisy_pressure: dataset.config.noisy_pressure,
        electrode_count: dataset.baseline_frame.schedule().electrode_count(),
        pair_count: dataset.baseline_frame.len(),
        baseline_frame: baseline_name,
        samples,
    };
    let manifest_path = dir.join("manifest.json");
    write_json(&manifest, &manifest_path)?;
    Ok(manifest_path)
}
