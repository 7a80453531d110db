//! Sample-point generation for the crossing equation.
//!
//! Points come in crossing-symmetric pairs (x, 1-x) so the evaluated
//! residual inherits the symmetry of the equation; an odd count adds the
//! self-symmetric point 1/2. Real points are drawn uniformly from
//! (margin, 1/2); complex points (off by default) come in conjugate
//! quadruples {z, 1-z, conj z, 1-conj z} kept at least `margin` away from
//! the lens boundary and the real axis.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::precompute::SamplePointSet;

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PointSetSpec {
    pub count: usize,
    pub seed: u64,
    pub margin: f64,
    pub complex: bool,
}

impl Default for PointSetSpec {
    fn default() -> Self {
        Self { count: 180, seed: 0, margin: 0.05, complex: false }
    }
}

impl PointSetSpec {
    pub fn validate(&self) -> Result<()> {
        if self.count == 0 {
            return Err(Error::InvalidParameter("point count must be positive".into()));
        }
        if !(self.margin >= 1e-6 && self.margin < 0.4) {
            return Err(Error::InvalidParameter(format!(
                "point margin must lie in [1e-6, 0.4), got {}",
                self.margin
            )));
        }
        Ok(())
    }
}

pub fn generate_points(spec: &PointSetSpec) -> Result<SamplePointSet> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut points: Vec<Complex64> = Vec::with_capacity(spec.count);

    let push_real_pair = |points: &mut Vec<Complex64>, rng: &mut ChaCha8Rng| {
        loop {
            let x: f64 = rng.gen_range(spec.margin..0.5);
            if 0.5 - x < 1e-9 {
                continue;
            }
            if points.iter().any(|p| p.re == x && p.im == 0.0) {
                continue;
            }
            points.push(Complex64::new(x, 0.0));
            points.push(Complex64::new(1.0 - x, 0.0));
            return;
        }
    };

    if spec.complex {
        let quads = spec.count / 4;
        let one = Complex64::new(1.0, 0.0);
        for _ in 0..quads {
            loop {
                let z = Complex64::new(rng.gen_range(0.0..1.0), rng.gen_range(spec.margin..0.5));
                if z.norm() > 1.0 - spec.margin || (one - z).norm() > 1.0 - spec.margin {
                    continue;
                }
                if points.iter().any(|p| p == &z) {
                    continue;
                }
                points.push(z);
                points.push(one - z);
                points.push(z.conj());
                points.push(one - z.conj());
                break;
            }
        }
        if spec.count % 4 >= 2 {
            push_real_pair(&mut points, &mut rng);
        }
    } else {
        for _ in 0..spec.count / 2 {
            push_real_pair(&mut points, &mut rng);
        }
    }
    if spec.count % 2 == 1 {
        points.push(Complex64::new(0.5, 0.0));
    }
    SamplePointSet::new(points)
}

pub fn points_to_csv_string(set: &SamplePointSet) -> String {
    use std::fmt::Write as _;
    let mut s = String::from("re,im\n");
    for z in set.points() {
        writeln!(s, "{:.16e},{:.16e}", z.re, z.im).unwrap();
    }
    s
}

pub fn write_points_csv(set: &SamplePointSet, path: &std::path::Path) -> Result<()> {
    std::fs::write(path, points_to_csv_string(set)).map_err(|e| Error::io(path.display().to_string(), e))
}

pub fn points_from_csv_str(text: &str, origin: &str) -> Result<SamplePointSet> {
    let mut points = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if i == 0 {
            if line.split(',').map(str::trim).collect::<Vec<_>>() != ["re", "im"] {
                return Err(Error::parse(origin, 1, "expected header 're,im'"));
            }
            continue;
        }
        let cols: Vec<&str> = line.split(',').map(str::trim).collect();
        if cols.len() != 2 {
            return Err(Error::parse(origin, i + 1, format!("expected 2 columns, got {}", cols.len())));
        }
        let re: f64 = cols[0]
            .parse()
            .map_err(|_| Error::parse(origin, i + 1, format!("bad re value '{}'", cols[0])))?;
        let im: f64 = cols[1]
            .parse()
            .map_err(|_| Error::parse(origin, i + 1, format!("bad im value '{}'", cols[1])))?;
        points.push(Complex64::new(re, im));
    }
    SamplePointSet::new(points)
}

pub fn read_points_csv(path: &std::path::Path) -> Result<SamplePointSet> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    points_from_csv_str(&text, &path.display().to_string())
}
