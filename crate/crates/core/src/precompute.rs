//! Precomputed tables: everything about the crossing equation that does
//! not depend on the searched OPE coefficients. For a fixed coupling,
//! spectrum and sample-point set this is the kernel matrix F, the
//! inhomogeneous vector h, the two integral transforms per channel and the
//! constraint right-hand sides. Search evaluations then reduce to small
//! matrix-vector products.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::model::{
    big_f_delta, c_bps_sq, h_func_with_coeff, rhs, ConstraintIndex, Coupling, CurvatureTable,
};
use crate::quadrature::{int1, int2, QuadratureControl};
use crate::specfun::SeriesControl;

/// Sample points in the lens {|x| < 1} intersect {|1-x| < 1}, where both
/// series expansions of the crossing kernel converge.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplePointSet {
    points: Vec<Complex64>,
}

impl SamplePointSet {
    pub fn new(points: Vec<Complex64>) -> Result<SamplePointSet> {
        if points.is_empty() {
            return Err(Error::InvalidParameter("sample point set is empty".into()));
        }
        for (k, z) in points.iter().enumerate() {
            if !z.re.is_finite() || !z.im.is_finite() {
                return Err(Error::InvalidParameter(format!("point {k} is not finite")));
            }
            let om = Complex64::new(1.0, 0.0) - z;
            if !(z.norm() < 1.0 && om.norm() < 1.0) {
                return Err(Error::InvalidParameter(format!(
                    "point {k} = {z} lies outside the convergence lens"
                )));
            }
        }
        let mut sorted: Vec<(f64, f64)> = points.iter().map(|z| (z.re, z.im)).collect();
        sorted.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
        for w in sorted.windows(2) {
            if w[0] == w[1] {
                return Err(Error::InvalidParameter(format!(
                    "duplicate sample point ({}, {})",
                    w[0].0, w[0].1
                )));
            }
        }
        Ok(SamplePointSet { points })
    }

    pub fn count(&self) -> usize {
        self.points.len()
    }

    pub fn points(&self) -> &[Complex64] {
        &self.points
    }
}

/// Precomputed crossing data for one (g, spectrum, point set) triple.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockTable {
    g: f64,
    deltas: Vec<f64>,
    points: SamplePointSet,
    /// f_matrix[k][n] = F_{delta_n}(x_k).
    f_matrix: Vec<Vec<Complex64>>,
    h_vector: Vec<Complex64>,
    int1: Vec<f64>,
    int2: Vec<f64>,
    rhs1: f64,
    rhs2: f64,
}

fn annotate(location: String) -> impl FnOnce(Error) -> Error {
    move |e| Error::TableBuild { location, source: Box::new(e) }
}

impl BlockTable {
    /// Evaluate all model quantities at the sample points. With no
    /// curvature table the constraint right-hand sides are set to zero;
    /// synthetic (planted) tables overwrite them anyway.
    pub fn build(
        g: Coupling,
        deltas: &[f64],
        points: SamplePointSet,
        curvature: Option<&CurvatureTable>,
        qctl: &QuadratureControl,
        sctl: &SeriesControl,
    ) -> Result<BlockTable> {
        if deltas.is_empty() {
            return Err(Error::InvalidParameter("spectrum has no channels".into()));
        }
        for (n, d) in deltas.iter().enumerate() {
            if !d.is_finite() || *d <= 1.0 {
                return Err(Error::InvalidParameter(format!(
                    "delta[{n}] = {d} must be finite and > 1 (both integral transforms require it)"
                )));
            }
        }
        sctl.validate()?;
        qctl.validate()?;

        let cb = c_bps_sq(g, sctl)?;
        let mut h_vector = Vec::with_capacity(points.count());
        for (k, &x) in points.points().iter().enumerate() {
            h_vector.push(h_func_with_coeff(x, cb, sctl).map_err(annotate(format!("h[point {k}]")))?);
        }
        let mut f_matrix = Vec::with_capacity(points.count());
        for (k, &x) in points.points().iter().enumerate() {
            let mut row = Vec::with_capacity(deltas.len());
            for (n, &d) in deltas.iter().enumerate() {
                row.push(
                    big_f_delta(d, x, sctl)
                        .map_err(annotate(format!("F[channel {n}, point {k}]")))?,
                );
            }
            f_matrix.push(row);
        }
        let mut i1 = Vec::with_capacity(deltas.len());
        let mut i2 = Vec::with_capacity(deltas.len());
        for (n, &d) in deltas.iter().enumerate() {
            i1.push(int1(d, qctl, sctl).map_err(annotate(format!("int1[channel {n}]")))?);
            i2.push(int2(d, qctl, sctl).map_err(annotate(format!("int2[channel {n}]")))?);
        }
        let (rhs1, rhs2) = match curvature {
            Some(t) => (
                rhs(ConstraintIndex::First, g, t, sctl)?,
                rhs(ConstraintIndex::Second, g, t, sctl)?,
            ),
            None => (0.0, 0.0),
        };
        Ok(BlockTable {
            g: g.value(),
            deltas: deltas.to_vec(),
            points,
            f_matrix,
            h_vector,
            int1: i1,
            int2: i2,
            rhs1,
            rhs2,
        })
    }

    /// Replace h and the constraint right-hand sides so that the given OPE
    /// coefficients solve the system exactly: h_k = -sum_n c_n F_n(x_k)
    /// and rhs_i = -sum_n c_n Int_i[n]. Used by synthetic recovery
    /// experiments where the ground truth must be known.
    pub fn with_planted_solution(&self, planted: &[f64]) -> Result<BlockTable> {
        if planted.len() != self.deltas.len() {
            return Err(Error::InvalidParameter(format!(
                "planted solution has {} coefficients for {} channels",
                planted.len(),
                self.deltas.len()
            )));
        }
        if planted.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidParameter("planted coefficients must be finite".into()));
        }
        let mut out = self.clone();
        for (k, h) in out.h_vector.iter_mut().enumerate() {
            let mut s = Complex64::new(0.0, 0.0);
            for (n, &c) in planted.iter().enumerate() {
                s += c * self.f_matrix[k][n];
            }
            *h = -s;
        }
        out.rhs1 = -planted.iter().zip(&self.int1).map(|(c, v)| c * v).sum::<f64>();
        out.rhs2 = -planted.iter().zip(&self.int2).map(|(c, v)| c * v).sum::<f64>();
        Ok(out)
    }

    pub fn g(&self) -> f64 {
        self.g
    }

    pub fn n_channels(&self) -> usize {
        self.deltas.len()
    }

    pub fn n_points(&self) -> usize {
        self.points.count()
    }

    pub fn deltas(&self) -> &[f64] {
        &self.deltas
    }

    pub fn points(&self) -> &SamplePointSet {
        &self.points
    }

    pub fn f_row(&self, k: usize) -> &[Complex64] {
        &self.f_matrix[k]
    }

    pub fn h(&self, k: usize) -> Complex64 {
        self.h_vector[k]
    }

    pub fn int1_values(&self) -> &[f64] {
        &self.int1
    }

    pub fn int2_values(&self) -> &[f64] {
        &self.int2
    }

    pub fn rhs_values(&self) -> (f64, f64) {
        (self.rhs1, self.rhs2)
    }

    /// Serialize to a line-tagged CSV. All floats are written with 17
    /// significant digits so the round trip is exact.
    pub fn to_csv_string(&self) -> String {
        use std::fmt::Write as _;
        let mut s = String::new();
        writeln!(s, "format,block-table,1").unwrap();
        writeln!(s, "g,{:.16e}", self.g).unwrap();
        write!(s, "deltas").unwrap();
        for d in &self.deltas {
            write!(s, ",{d:.16e}").unwrap();
        }
        writeln!(s).unwrap();
        write!(s, "int1").unwrap();
        for v in &self.int1 {
            write!(s, ",{v:.16e}").unwrap();
        }
        writeln!(s).unwrap();
        write!(s, "int2").unwrap();
        for v in &self.int2 {
            write!(s, ",{v:.16e}").unwrap();
        }
        writeln!(s).unwrap();
        writeln!(s, "rhs,{:.16e},{:.16e}", self.rhs1, self.rhs2).unwrap();
        for (k, z) in self.points.points().iter().enumerate() {
            write!(s, "point,{:.16e},{:.16e},{:.16e},{:.16e}", z.re, z.im, self.h_vector[k].re, self.h_vector[k].im).unwrap();
            for f in &self.f_matrix[k] {
                write!(s, ",{:.16e},{:.16e}", f.re, f.im).unwrap();
            }
            writeln!(s).unwrap();
        }
        s
    }

    pub fn write_csv(&self, path: &std::path::Path) -> Result<()> {
        std::fs::write(path, self.to_csv_string()).map_err(|e| Error::io(path.display().to_string(), e))
    }

    pub fn from_csv_str(text: &str, origin: &str) -> Result<BlockTable> {
        let mut lines = text.lines().enumerate();
        let mut next_tagged = |tag: &str| -> Result<(usize, Vec<String>)> {
            for (i, line) in lines.by_ref() {
                if line.trim().is_empty() {
                    continue;
                }
                let cols: Vec<String> = line.split(',').map(|c| c.trim().to_string()).collect();
                if cols[0] != tag {
                    return Err(Error::parse(origin, i + 1, format!("expected '{tag}' row, got '{}'", cols[0])));
                }
                return Ok((i, cols));
            }
            Err(Error::parse(origin, 0, format!("missing '{tag}' row")))
        };
        let parse_f = |origin: &str, line: usize, s: &str| -> Result<f64> {
            s.parse::<f64>().map_err(|_| Error::parse(origin, line + 1, format!("bad float '{s}'")))
        };

        let (i, header) = next_tagged("format")?;
        if header.len() != 3 || header[1] != "block-table" || header[2] != "1" {
            return Err(Error::parse(origin, i + 1, "unsupported table format"));
        }
        let (i, g_row) = next_tagged("g")?;
        if g_row.len() != 2 {
            return Err(Error::parse(origin, i + 1, "g row needs exactly one value"));
        }
        let g = parse_f(origin, i, &g_row[1])?;
        let (i, d_row) = next_tagged("deltas")?;
        let deltas: Vec<f64> =
            d_row[1..].iter().map(|s| parse_f(origin, i, s)).collect::<Result<_>>()?;
        if deltas.is_empty() {
            return Err(Error::parse(origin, i + 1, "deltas row is empty"));
        }
        let (i, row) = next_tagged("int1")?;
        let int1: Vec<f64> = row[1..].iter().map(|s| parse_f(origin, i, s)).collect::<Result<_>>()?;
        let (i, row) = next_tagged("int2")?;
        let int2: Vec<f64> = row[1..].iter().map(|s| parse_f(origin, i, s)).collect::<Result<_>>()?;
        if int1.len() != deltas.len() || int2.len() != deltas.len() {
            return Err(Error::parse(origin, i + 1, "integral rows do not match channel count"));
        }
        let (i, row) = next_tagged("rhs")?;
        if row.len() != 3 {
            return Err(Error::parse(origin, i + 1, "rhs row needs two values"));
        }
        let rhs1 = parse_f(origin, i, &row[1])?;
        let rhs2 = parse_f(origin, i, &row[2])?;

        let mut points = Vec::new();
        let mut h_vector = Vec::new();
        let mut f_matrix = Vec::new();
        for (i, line) in lines {
            if line.trim().is_empty() {
                continue;
            }
            let cols: Vec<&str> = line.split(',').map(str::trim).collect();
            if cols[0] != "point" {
                return Err(Error::parse(origin, i + 1, format!("expected 'point' row, got '{}'", cols[0])));
            }
            if cols.len() != 5 + 2 * deltas.len() {
                return Err(Error::parse(
                    origin,
                    i + 1,
                    format!("point row needs {} columns, got {}", 5 + 2 * deltas.len(), cols.len()),
                ));
            }
            let vals: Vec<f64> =
                cols[1..].iter().map(|s| parse_f(origin, i, s)).collect::<Result<_>>()?;
            points.push(Complex64::new(vals[0], vals[1]));
            h_vector.push(Complex64::new(vals[2], vals[3]));
            f_matrix.push(
                vals[4..]
                    .chunks(2)
                    .map(|c| Complex64::new(c[0], c[1]))
                    .collect::<Vec<Complex64>>(),
            );
        }
        let points = SamplePointSet::new(points)?;
        Ok(BlockTable { g, deltas, points, f_matrix, h_vector, int1, int2, rhs1, rhs2 })
    }

    pub fn from_path(path: &std::path::Path) -> Result<BlockTable> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        Self::from_csv_str(&text, &path.display().to_string())
    }
}
