//! Scalar special functions: Pochhammer symbols, the Gauss hypergeometric
//! series 2F1 and modified Bessel functions of the first kind.
//!
//! Everything here is a plain power series with term recurrences.  The
//! arguments this crate actually uses stay well inside the discs of
//! convergence (|z| < 1 for 2F1 after restricting sample points to the
//! unit lens, x up to a few times 4*pi*g for the Bessel functions), so a
//! direct summation with a relative/absolute stopping rule is both simple
//! and accurate to near machine precision.

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Stopping rule shared by all series in this module.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SeriesControl {
    pub max_terms: usize,
    pub rel_tol: f64,
    pub abs_tol: f64,
}

impl Default for SeriesControl {
    fn default() -> Self {
        Self { max_terms: 2000, rel_tol: 1e-14, abs_tol: 1e-30 }
    }
}

impl SeriesControl {
    pub fn validate(&self) -> Result<()> {
        if self.max_terms == 0 {
            return Err(Error::InvalidParameter("max_terms must be positive".into()));
        }
        if !(self.rel_tol > 0.0) || !(self.abs_tol > 0.0) {
            return Err(Error::InvalidParameter("series tolerances must be positive".into()));
        }
        Ok(())
    }
}

/// Rising factorial (q)_n = q (q+1) ... (q+n-1), with (q)_0 = 1.
pub fn pochhammer(q: f64, n: u32) -> f64 {
    let mut acc = 1.0;
    for k in 0..n {
        acc *= q + k as f64;
    }
    acc
}

fn is_nonpositive_integer(c: f64) -> bool {
    c <= 0.0 && c == c.floor()
}

/// Gauss hypergeometric function 2F1(a, b; c; z) by direct series summation.
///
/// Requires |z| < 1 and c not a non-positive integer.  Terms are generated
/// by the ratio recurrence t_{n+1} = t_n (a+n)(b+n) z / ((c+n)(n+1)); the
/// sum stops once two consecutive terms fall below
/// rel_tol * |sum| + abs_tol (two, so that an accidental small or zero
/// term cannot end the sum early).
pub fn hyp2f1(a: f64, b: f64, c: f64, z: Complex64, ctl: &SeriesControl) -> Result<Complex64> {
    if is_nonpositive_integer(c) {
        return Err(Error::InvalidParameter(format!(
            "2F1 undefined for c = {c} (non-positive integer)"
        )));
    }
    if z.norm() >= 1.0 {
        return Err(Error::InvalidParameter(format!(
            "2F1 series requires |z| < 1, got |z| = {}",
            z.norm()
        )));
    }
    let mut sum = Complex64::new(1.0, 0.0);
    let mut term = Complex64::new(1.0, 0.0);
    let mut small_streak = 0;
    for n in 0..ctl.max_terms {
        let nf = n as f64;
        term *= z * ((a + nf) * (b + nf) / ((c + nf) * (nf + 1.0)));
        sum += term;
        if term.norm() <= ctl.rel_tol * sum.norm() + ctl.abs_tol {
            small_streak += 1;
            if small_streak >= 2 {
                return Ok(sum);
            }
        } else {
            small_streak = 0;
        }
    }
    Err(Error::NonConvergent { max_terms: ctl.max_terms, last_term: term.norm() })
}

/// Real-argument specialization of [`hyp2f1`], used on the integration
/// contour where everything is real.
pub fn hyp2f1_real(a: f64, b: f64, c: f64, x: f64, ctl: &SeriesControl) -> Result<f64> {
    if is_nonpositive_integer(c) {
        return Err(Error::InvalidParameter(format!(
            "2F1 undefined for c = {c} (non-positive integer)"
        )));
    }
    if x.abs() >= 1.0 {
        return Err(Error::InvalidParameter(format!(
            "2F1 series requires |x| < 1, got x = {x}"
        )));
    }
    let mut sum = 1.0_f64;
    let mut term = 1.0_f64;
    let mut small_streak = 0;
    for n in 0..ctl.max_terms {
        let nf = n as f64;
        term *= x * ((a + nf) * (b + nf) / ((c + nf) * (nf + 1.0)));
        sum += term;
        if term.abs() <= ctl.rel_tol * sum.abs() + ctl.abs_tol {
            small_streak += 1;
            if small_streak >= 2 {
                return Ok(sum);
            }
        } else {
            small_streak = 0;
        }
    }
    Err(Error::NonConvergent { max_terms: ctl.max_terms, last_term: term.abs() })
}

/// Modified Bessel function of the first kind I_alpha(x) for integer order,
/// by its ascending series sum_m (x/2)^(alpha + 2m) / (m! (m+alpha)!).
pub fn bessel_i(alpha: u32, x: f64, ctl: &SeriesControl) -> Result<f64> {
    if !(x >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "bessel_i requires x >= 0, got {x}"
        )));
    }
    let half = 0.5 * x;
    let mut factorial = 1.0;
    for k in 1..=alpha {
        factorial *= k as f64;
    }
    let mut term = half.powi(alpha as i32) / factorial;
    let mut sum = term;
    let q = half * half;
    let mut small_streak = 0;
    for m in 0..ctl.max_terms {
        let mf = m as f64;
        term *= q / ((mf + 1.0) * (mf + 1.0 + alpha as f64));
        sum += term;
        if term.abs() <= ctl.rel_tol * sum.abs() + ctl.abs_tol {
            small_streak += 1;
            if small_streak >= 2 {
                return Ok(sum);
            }
        } else {
            small_streak = 0;
        }
    }
    Err(Error::NonConvergent { max_terms: ctl.max_terms, last_term: term.abs() })
}
