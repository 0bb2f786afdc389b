//! Synthetic manifold samples and CSV point-cloud I/O.
//!
//! The smooth curve, the cusp curve and the composite manifold are
//! reconstructions: they match the qualitative features of the usual
//! benchmark sets (a smooth 1-D curve, a curve with a singular point, a 2-D
//! sheet joined to a 1-D filament), not any particular published
//! parameterization.

use std::f64::consts::PI;
use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::cloud::PointCloud;
use crate::error::{Error, Result};

/// Name and version of the generator behind every seeded stream in the crate.
pub const RNG_NAME: &str = "ChaCha8Rng (rand_chacha 0.9), seed_from_u64";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ManifoldKind {
    /// Standard normal in `R^dim`.
    Gaussian { dim: usize },
    /// `(cos t, sin t, 0.2 t)`, `t ~ U[0, 4π]`.
    Helix3d,
    /// `(t, sin 3t)`, `t ~ U[0, 2π]`.
    Curve2d,
    /// `(t², t³)`, `t ~ U[-1, 1]`; cusp at the origin.
    SingularCurve,
    /// Unit square in the `z = 0` plane of `R^3` (first half of the points)
    /// plus the arc `(1 + s, 0.5, 0.5 sin πs)`, `s ~ U[0, 1]`, leaving the
    /// square's `x = 1` edge at its midpoint (second half).
    Composite,
    /// `(sin t, 2v, sign(t)(cos t − 1))`, `t = 3π(u − 1/2)`.
    SCurve,
    /// `(t cos t, h, t sin t)`, `t ~ U[1.5π, 4.5π]`, `h ~ U[0, 21]`.
    SwissRoll,
    /// Uniform on `[0, 1]^intrinsic`, zero-padded to `ambient` coordinates.
    UniformCube { intrinsic: usize, ambient: usize },
}

impl ManifoldKind {
    pub fn ambient_dim(&self) -> usize {
        match *self {
            ManifoldKind::Gaussian { dim } => dim,
            ManifoldKind::Curve2d | ManifoldKind::SingularCurve => 2,
            ManifoldKind::Helix3d
            | ManifoldKind::Composite
            | ManifoldKind::SCurve
            | ManifoldKind::SwissRoll => 3,
            ManifoldKind::UniformCube { ambient, .. } => ambient,
        }
    }

    /// Short name used on the command line.
    pub fn name(&self) -> &'static str {
        match self {
            ManifoldKind::Gaussian { .. } => "gaussian",
            ManifoldKind::Helix3d => "helix3d",
            ManifoldKind::Curve2d => "curve2d",
            ManifoldKind::SingularCurve => "singular-curve",
            ManifoldKind::Composite => "composite",
            ManifoldKind::SCurve => "s-curve",
            ManifoldKind::SwissRoll => "swiss-roll",
            ManifoldKind::UniformCube { .. } => "uniform-cube",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeneratorSpec {
    pub kind: ManifoldKind,
    pub n: usize,
    pub seed: u64,
    pub noise_sigma: f64,
}

impl GeneratorSpec {
    pub fn new(kind: ManifoldKind, n: usize, seed: u64) -> Self {
        GeneratorSpec {
            kind,
            n,
            seed,
            noise_sigma: 0.0,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.n < 10 {
            return Err(Error::InvalidSpec(format!(
                "n must be at least 10, got {}",
                self.n
            )));
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return Err(Error::InvalidSpec(format!(
                "noise_sigma must be a non-negative number, got {}",
                self.noise_sigma
            )));
        }
        match self.kind {
            ManifoldKind::Gaussian { dim: 0 } => Err(Error::InvalidSpec(
                "gaussian dimension must be at least 1".into(),
            )),
            ManifoldKind::UniformCube { intrinsic, ambient }
                if intrinsic == 0 || intrinsic > ambient =>
            {
                Err(Error::InvalidSpec(format!(
                    "uniform cube needs 1 <= intrinsic <= ambient, got {intrinsic} in {ambient}"
                )))
            }
            _ => Ok(()),
        }
    }
}

/// Draws the sample described by `spec`. Identical specs give bitwise
/// identical clouds.
pub fn generate(spec: &GeneratorSpec) -> Result<PointCloud> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let d = spec.kind.ambient_dim();
    let n = spec.n;
    let mut coords = Vec::with_capacity(n * d);

    let unit = |rng: &mut ChaCha8Rng| rng.random::<f64>();
    match spec.kind {
        ManifoldKind::Gaussian { .. } => {
            coords.extend((0..n * d).map(|_| rng.sample::<f64, _>(StandardNormal)));
        }
        ManifoldKind::Helix3d => {
            for _ in 0..n {
                let t = 4.0 * PI * unit(&mut rng);
                coords.extend([t.cos(), t.sin(), 0.2 * t]);
            }
        }
        ManifoldKind::Curve2d => {
            for _ in 0..n {
                let t = 2.0 * PI * unit(&mut rng);
                coords.extend([t, (3.0 * t).sin()]);
            }
        }
        ManifoldKind::SingularCurve => {
            for _ in 0..n {
                let t = 2.0 * unit(&mut rng) - 1.0;
                coords.extend([t * t, t * t * t]);
            }
        }
        ManifoldKind::Composite => {
            let sheet = n / 2;
            for _ in 0..sheet {
                let (u, v) = (unit(&mut rng), unit(&mut rng));
                coords.extend([u, v, 0.0]);
            }
            for _ in sheet..n {
                let s = unit(&mut rng);
                coords.extend([1.0 + s, 0.5, 0.5 * (PI * s).sin()]);
            }
        }
        ManifoldKind::SCurve => {
            for _ in 0..n {
                let t = 3.0 * PI * (unit(&mut rng) - 0.5);
                let y = 2.0 * unit(&mut rng);
                coords.extend([t.sin(), y, t.signum() * (t.cos() - 1.0)]);
            }
        }
        ManifoldKind::SwissRoll => {
            for _ in 0..n {
                let t = 1.5 * PI * (1.0 + 2.0 * unit(&mut rng));
                let h = 21.0 * unit(&mut rng);
                coords.extend([t * t.cos(), h, t * t.sin()]);
            }
        }
        ManifoldKind::UniformCube { intrinsic, ambient } => {
            for _ in 0..n {
                coords.extend((0..intrinsic).map(|_| unit(&mut rng)));
                coords.extend(std::iter::repeat_n(0.0, ambient - intrinsic));
            }
        }
    }

    if spec.noise_sigma > 0.0 {
        for c in coords.iter_mut() {
            *c += spec.noise_sigma * rng.sample::<f64, _>(StandardNormal);
        }
    }
    PointCloud::new(coords, n, d)
}

/// Whether the first CSV row is a header.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum HeaderMode {
    /// Header iff some cell of the first row is not a finite number.
    #[default]
    Auto,
    Yes,
    No,
}

fn parse_cell(cell: &str) -> Option<f64> {
    cell.parse::<f64>().ok().filter(|v| v.is_finite())
}

/// Reads a point cloud from comma-separated text, one point per row.
///
/// Row and column numbers in errors are 1-based positions in the file.
pub fn read_csv<R: Read>(reader: R, header: HeaderMode) -> Result<PointCloud> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);

    let mut records = Vec::new();
    for rec in rdr.records() {
        records.push(rec?);
    }
    let first = records.first().ok_or(Error::EmptyFile)?;
    let skip_first = match header {
        HeaderMode::Yes => true,
        HeaderMode::No => false,
        HeaderMode::Auto => first.iter().any(|c| parse_cell(c).is_none()),
    };
    let data = if skip_first {
        &records[1..]
    } else {
        &records[..]
    };
    let Some(head) = data.first() else {
        return Err(Error::EmptyFile);
    };

    let d = head.len();
    let offset = skip_first as usize + 1;
    let mut coords = Vec::with_capacity(data.len() * d);
    for (r, rec) in data.iter().enumerate() {
        if rec.len() != d {
            return Err(Error::RaggedRows {
                row: r + offset,
                expected: d,
                found: rec.len(),
            });
        }
        for (c, cell) in rec.iter().enumerate() {
            let v = parse_cell(cell).ok_or_else(|| Error::NonNumericCell {
                row: r + offset,
                column: c + 1,
                value: cell.to_string(),
            })?;
            coords.push(v);
        }
    }
    PointCloud::new(coords, data.len(), d)
}

pub fn load_csv<P: AsRef<Path>>(path: P, header: HeaderMode) -> Result<PointCloud> {
    read_csv(File::open(path)?, header)
}

/// Writes one row per point with no header, 17 significant digits per value.
pub fn write_csv<W: Write>(cloud: &PointCloud, mut out: W) -> Result<()> {
    let mut line = String::new();
    for p in cloud.points() {
        line.clear();
        for (j, v) in p.iter().enumerate() {
            if j > 0 {
                line.push(',');
            }
            line.push_str(&crate::stats::fmt_real(*v));
        }
        line.push('\n');
        out.write_all(line.as_bytes())?;
    }
    out.flush()?;
    Ok(())
}

pub fn save_csv<P: AsRef<Path>>(cloud: &PointCloud, path: P) -> Result<()> {
    write_csv(cloud, BufWriter::new(File::create(path)?))
}
