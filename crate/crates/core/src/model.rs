//! Model-specific quantities: conformal blocks, the crossing kernel F,
//! the inhomogeneous term h, and the closed-form coefficient functions of
//! the coupling that feed the integral constraints.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::specfun::{bessel_i, hyp2f1, hyp2f1_real, SeriesControl};

/// Guard below which the closed-form coefficients are treated as divergent
/// (their denominators carry I_2(4 pi g)^2 ~ g^4).
pub const MIN_COUPLING: f64 = 1e-6;

/// Half-width of the exclusion window around the delta = 1 pole of the
/// long-multiplet block prefactor.
pub const DELTA_POLE_GUARD: f64 = 1e-9;

/// Validated coupling constant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Coupling(f64);

impl Coupling {
    pub fn new(g: f64) -> Result<Coupling> {
        if !g.is_finite() || g <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "coupling must be finite and positive, got {g}"
            )));
        }
        Ok(Coupling(g))
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

/// Tabulated curvature values C(g) with linear interpolation between nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct CurvatureTable {
    gs: Vec<f64>,
    values: Vec<f64>,
}

impl CurvatureTable {
    pub fn from_pairs(pairs: &[(f64, f64)]) -> Result<CurvatureTable> {
        if pairs.is_empty() {
            return Err(Error::InvalidParameter("curvature table is empty".into()));
        }
        for w in pairs.windows(2) {
            if !(w[1].0 > w[0].0) {
                return Err(Error::InvalidParameter(format!(
                    "curvature table g values must be strictly increasing ({} then {})",
                    w[0].0, w[1].0
                )));
            }
        }
        for &(g, c) in pairs {
            if !g.is_finite() || !c.is_finite() {
                return Err(Error::InvalidParameter(
                    "curvature table entries must be finite".into(),
                ));
            }
        }
        Ok(CurvatureTable {
            gs: pairs.iter().map(|p| p.0).collect(),
            values: pairs.iter().map(|p| p.1).collect(),
        })
    }

    /// Parse `g,curvature` CSV text. `origin` labels parse errors.
    pub fn from_csv_str(text: &str, origin: &str) -> Result<CurvatureTable> {
        let mut pairs = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if i == 0 {
                let header: Vec<&str> = line.split(',').map(str::trim).collect();
                if header != ["g", "curvature"] {
                    return Err(Error::parse(origin, 1, "expected header 'g,curvature'"));
                }
                continue;
            }
            let cols: Vec<&str> = line.split(',').map(str::trim).collect();
            if cols.len() != 2 {
                return Err(Error::parse(origin, i + 1, format!("expected 2 columns, got {}", cols.len())));
            }
            let g: f64 = cols[0]
                .parse()
                .map_err(|_| Error::parse(origin, i + 1, format!("bad g value '{}'", cols[0])))?;
            let c: f64 = cols[1]
                .parse()
                .map_err(|_| Error::parse(origin, i + 1, format!("bad curvature value '{}'", cols[1])))?;
            pairs.push((g, c));
        }
        Self::from_pairs(&pairs)
    }

    pub fn from_path(path: &std::path::Path) -> Result<CurvatureTable> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        Self::from_csv_str(&text, &path.display().to_string())
    }

    pub fn g_range(&self) -> (f64, f64) {
        (self.gs[0], *self.gs.last().unwrap())
    }

    /// Piecewise-linear interpolation; endpoints are inclusive.
    pub fn interpolate(&self, g: f64) -> Result<f64> {
        let (lo, hi) = self.g_range();
        if !(g >= lo && g <= hi) {
            return Err(Error::OutOfTableRange { g, min: lo, max: hi });
        }
        let idx = match self.gs.binary_search_by(|probe| probe.partial_cmp(&g).unwrap()) {
            Ok(i) => return Ok(self.values[i]),
            Err(i) => i,
        };
        let (g0, g1) = (self.gs[idx - 1], self.gs[idx]);
        let (c0, c1) = (self.values[idx - 1], self.values[idx]);
        Ok(c0 + (g - g0) / (g1 - g0) * (c1 - c0))
    }
}

/// Identity block f_I(x) = x.
pub fn block_identity(x: Complex64) -> Complex64 {
    x
}

/// Short-multiplet block f_B2(x) = x - x 2F1(1, 2; 4; x).
pub fn block_b2(x: Complex64, ctl: &SeriesControl) -> Result<Complex64> {
    Ok(x - x * hyp2f1(1.0, 2.0, 4.0, x, ctl)?)
}

/// Long-multiplet block
/// f_delta(x) = x^(delta+1) / (1 - delta) 2F1(delta+1, delta+2; 2 delta+4; x).
///
/// The prefactor has a pole at delta = 1; values within
/// [`DELTA_POLE_GUARD`] of it are rejected rather than returning huge
/// meaningless numbers.
pub fn block_delta(delta: f64, x: Complex64, ctl: &SeriesControl) -> Result<Complex64> {
    if (delta - 1.0).abs() < DELTA_POLE_GUARD {
        return Err(Error::PoleAtDeltaOne { delta });
    }
    let pre = x.powf(delta + 1.0) / (1.0 - delta);
    Ok(pre * hyp2f1(delta + 1.0, delta + 2.0, 2.0 * delta + 4.0, x, ctl)?)
}

/// Real-axis specialization of [`block_delta`] used on the integration
/// contour (0, 1/2).
pub fn block_delta_real(delta: f64, x: f64, ctl: &SeriesControl) -> Result<f64> {
    if (delta - 1.0).abs() < DELTA_POLE_GUARD {
        return Err(Error::PoleAtDeltaOne { delta });
    }
    let pre = x.powf(delta + 1.0) / (1.0 - delta);
    Ok(pre * hyp2f1_real(delta + 1.0, delta + 2.0, 2.0 * delta + 4.0, x, ctl)?)
}

fn check_coupling(g: Coupling) -> Result<f64> {
    let g = g.value();
    if g < MIN_COUPLING {
        return Err(Error::DivergenceAtZero { g });
    }
    Ok(g)
}

/// Closed form F(g) fixing the squared OPE coefficient of the B[0,2]
/// multiplet: F = 3 I1 [(2 pi^2 g^2 + 1) I1 - 2 pi g I0] / (2 pi^2 g^2 I2^2),
/// all Bessel functions evaluated at 4 pi g.
pub fn f_of_g(g: Coupling, ctl: &SeriesControl) -> Result<f64> {
    let g = check_coupling(g)?;
    let z = 4.0 * std::f64::consts::PI * g;
    let i0 = bessel_i(0, z, ctl)?;
    let i1 = bessel_i(1, z, ctl)?;
    let i2 = bessel_i(2, z, ctl)?;
    let pi = std::f64::consts::PI;
    let num = 3.0 * i1 * ((2.0 * pi * pi * g * g + 1.0) * i1 - 2.0 * pi * g * i0);
    let den = 2.0 * g * g * pi * pi * i2 * i2;
    Ok(num / den)
}

/// Squared OPE coefficient of the protected B[0,2] channel.
pub fn c_bps_sq(g: Coupling, ctl: &SeriesControl) -> Result<f64> {
    Ok(f_of_g(g, ctl)? - 1.0)
}

/// Bremsstrahlung-type coefficient B(g) = g I2(4 pi g) / (pi I1(4 pi g)).
pub fn b_of_g(g: Coupling, ctl: &SeriesControl) -> Result<f64> {
    let g = check_coupling(g)?;
    let z = 4.0 * std::f64::consts::PI * g;
    let i1 = bessel_i(1, z, ctl)?;
    let i2 = bessel_i(2, z, ctl)?;
    Ok(g / std::f64::consts::PI * i2 / i1)
}

/// Which of the two integral constraints a right-hand side belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConstraintIndex {
    First,
    Second,
}

/// Constant term of the chosen integral constraint at coupling g, using
/// the tabulated curvature C(g).
pub fn rhs(
    index: ConstraintIndex,
    g: Coupling,
    curvature: &CurvatureTable,
    ctl: &SeriesControl,
) -> Result<f64> {
    let c = curvature.interpolate(g.value())?;
    let f = f_of_g(g, ctl)?;
    let b = b_of_g(g, ctl)?;
    let ln2 = std::f64::consts::LN_2;
    match index {
        ConstraintIndex::First => {
            Ok((b - 3.0 * c) / (8.0 * b * b) + (7.0 * ln2 - 41.0 / 8.0) * (f - 1.0) + ln2)
        }
        ConstraintIndex::Second => {
            Ok((1.0 - f) / 6.0 + (2.0 - f) * ln2 + 1.0 - c / (4.0 * b * b))
        }
    }
}

/// Crossing kernel F_delta(x) = x^2 f_delta(1-x) + (1-x)^2 f_delta(x).
pub fn big_f_delta(delta: f64, x: Complex64, ctl: &SeriesControl) -> Result<Complex64> {
    let one = Complex64::new(1.0, 0.0);
    let om = one - x;
    Ok(x * x * block_delta(delta, om, ctl)? + om * om * block_delta(delta, x, ctl)?)
}

/// Inhomogeneous term of the crossing equation, with the protected-channel
/// coefficient already fixed by the coupling:
/// h(x) = x^2 [f_I + Cbps^2 f_B2](1-x) + (1-x)^2 [f_I + Cbps^2 f_B2](x).
pub fn h_func(x: Complex64, g: Coupling, ctl: &SeriesControl) -> Result<Complex64> {
    h_func_with_coeff(x, c_bps_sq(g, ctl)?, ctl)
}

/// Same as [`h_func`] with the protected coefficient precomputed, for
/// callers evaluating h at many points.
pub fn h_func_with_coeff(x: Complex64, c_bps_sq: f64, ctl: &SeriesControl) -> Result<Complex64> {
    let one = Complex64::new(1.0, 0.0);
    let om = one - x;
    let fa = block_identity(om) + c_bps_sq * block_b2(om, ctl)?;
    let fb = block_identity(x) + c_bps_sq * block_b2(x, ctl)?;
    Ok(x * x * fa + om * om * fb)
}
