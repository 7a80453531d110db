//! Adaptive Gauss-Kronrod quadrature and the two integral transforms of
//! the long-multiplet block that enter the constraints.
//!
//! Both transforms integrate over (0, 1/2) with an integrable power-law
//! singularity at the origin.  The origin is handled by integrating from a
//! small offset epsilon and adding the analytic integral of the leading
//! power behavior on (0, epsilon); the neglected subleading piece is
//! O(epsilon) relative to the tail itself, far below the quadrature
//! tolerance for the default epsilon = 1e-8.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};
use crate::model::block_delta_real;
use crate::specfun::SeriesControl;

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QuadratureControl {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_subdivisions: usize,
    /// Offset epsilon replacing the singular endpoint at the origin.
    pub endpoint_offset: f64,
}

impl Default for QuadratureControl {
    fn default() -> Self {
        Self { rel_tol: 1e-12, abs_tol: 1e-15, max_subdivisions: 2000, endpoint_offset: 1e-8 }
    }
}

impl QuadratureControl {
    pub fn validate(&self) -> Result<()> {
        if !(self.rel_tol > 0.0) || !(self.abs_tol > 0.0) {
            return Err(Error::InvalidParameter("quadrature tolerances must be positive".into()));
        }
        if self.max_subdivisions < 4 {
            return Err(Error::InvalidParameter("max_subdivisions must be at least 4".into()));
        }
        if !(self.endpoint_offset > 0.0 && self.endpoint_offset < 0.25) {
            return Err(Error::InvalidParameter(
                "endpoint_offset must lie in (0, 0.25)".into(),
            ));
        }
        Ok(())
    }
}

// 15-point Kronrod extension of 7-point Gauss on [-1, 1]: positive
// abscissae (odd indices are the embedded Gauss nodes), Kronrod weights,
// and Gauss weights. The unit tests check the weight sums and polynomial
// exactness of both rules, so a transcription slip cannot survive.
const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144838258730,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
];

const WGK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];

const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

/// One G7-K15 evaluation on [a, b]: returns the K15 value and the
/// |K15 - G7| error estimate.
fn qk15<F>(f: &F, a: f64, b: f64) -> Result<(f64, f64)>
where
    F: Fn(f64) -> Result<f64>,
{
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let eval = |x: f64| -> Result<f64> {
        let v = f(x)?;
        if !v.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "integrand returned non-finite value at x = {x:.17e}"
            )));
        }
        Ok(v)
    };
    let fc = eval(center)?;
    let mut kronrod = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    for j in 0..7 {
        let dx = half * XGK[j];
        let fsum = eval(center - dx)? + eval(center + dx)?;
        kronrod += WGK[j] * fsum;
        if j % 2 == 1 {
            gauss += WG[j / 2] * fsum;
        }
    }
    Ok((kronrod * half, ((kronrod - gauss) * half).abs()))
}

struct Panel {
    a: f64,
    b: f64,
    value: f64,
    err: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.err == other.err
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.err.total_cmp(&other.err)
    }
}

/// Globally adaptive integration of f over [a, b]: repeatedly bisects the
/// panel with the largest error estimate. Returns (value, error estimate).
pub fn integrate<F>(f: F, a: f64, b: f64, ctl: &QuadratureControl) -> Result<(f64, f64)>
where
    F: Fn(f64) -> Result<f64>,
{
    ctl.validate()?;
    if !(b > a) {
        return Err(Error::InvalidParameter(format!("bad integration range [{a}, {b}]")));
    }
    let mut heap = BinaryHeap::new();
    let (v, e) = qk15(&f, a, b)?;
    let mut total_value = v;
    let mut total_err = e;
    heap.push(Panel { a, b, value: v, err: e });

    let mut subdivisions = 0;
    while total_err > ctl.abs_tol.max(ctl.rel_tol * total_value.abs()) {
        if subdivisions >= ctl.max_subdivisions {
            return Err(Error::QuadratureNonConvergent {
                subdivisions,
                estimate: total_err,
            });
        }
        let worst = heap.pop().expect("heap never empty");
        let mid = 0.5 * (worst.a + worst.b);
        let (lv, le) = qk15(&f, worst.a, mid)?;
        let (rv, re) = qk15(&f, mid, worst.b)?;
        total_value += lv + rv - worst.value;
        total_err += le + re - worst.err;
        heap.push(Panel { a: worst.a, b: mid, value: lv, err: le });
        heap.push(Panel { a: mid, b: worst.b, value: rv, err: re });
        subdivisions += 1;
    }

    // Re-sum the panels once to shed the incremental-update drift.
    let mut value = 0.0;
    let mut err = 0.0;
    for p in heap.iter() {
        value += p.value;
        err += p.err;
    }
    Ok((value, err))
}

/// First integral transform of the long-multiplet block:
///
///   Int1[f_delta] = -Integral_0^(1/2) (x - 1 - x^2) f_delta(x)/x^2
///                    * d/dx log(x(1-x)) dx,
///
/// defined for delta > 1. Near the origin the integrand behaves as
/// x^(delta-2)/(1-delta), so the leading tail on (0, eps) integrates to
/// -eps^(delta-1)/(delta-1)^2.
pub fn int1(delta: f64, qctl: &QuadratureControl, sctl: &SeriesControl) -> Result<f64> {
    if !(delta > 1.0) {
        return Err(Error::InvalidDelta { delta, requirement: "requires delta > 1" });
    }
    let eps = qctl.endpoint_offset;
    let integrand = |x: f64| -> Result<f64> {
        let f = block_delta_real(delta, x, sctl)?;
        Ok(-(x - 1.0 - x * x) * (1.0 - 2.0 * x) / (1.0 - x) * f / (x * x * x))
    };
    let (value, _) = integrate(integrand, eps, 0.5, qctl)?;
    let tail = -eps.powf(delta - 1.0) / ((delta - 1.0) * (delta - 1.0));
    Ok(value + tail)
}

/// Second integral transform:
///
///   Int2[f_delta] = Integral_0^(1/2) f_delta(x)/x^2 (2x - 1) dx,
///
/// defined for delta > 0 (delta = 1 is excluded by the block's pole). The
/// leading tail on (0, eps) integrates to eps^delta/(delta (delta-1)).
pub fn int2(delta: f64, qctl: &QuadratureControl, sctl: &SeriesControl) -> Result<f64> {
    if !(delta > 0.0) {
        return Err(Error::InvalidDelta { delta, requirement: "requires delta > 0" });
    }
    let eps = qctl.endpoint_offset;
    let integrand = |x: f64| -> Result<f64> {
        let f = block_delta_real(delta, x, sctl)?;
        Ok(f / (x * x) * (2.0 * x - 1.0))
    };
    let (value, _) = integrate(integrand, eps, 0.5, qctl)?;
    let tail = eps.powf(delta) / (delta * (delta - 1.0));
    Ok(value + tail)
}

#[cfg(test)]
mod tests {
    use super::*;

    const SCTL: SeriesControl = SeriesControl { max_terms: 2000, rel_tol: 1e-14, abs_tol: 1e-30 };

    fn qctl() -> QuadratureControl {
        QuadratureControl::default()
    }

    #[test]
    fn kronrod_weights_sum_to_two() {
        let k: f64 = WGK[7] + 2.0 * WGK[..7].iter().sum::<f64>();
        assert!((k - 2.0).abs() < 1e-14);
        let g: f64 = WG[3] + 2.0 * WG[..3].iter().sum::<f64>();
        assert!((g - 2.0).abs() < 1e-14);
    }

    // 7-point Gauss is exact for degree <= 13, the 15-point Kronrod
    // extension for degree <= 22. Exactness of the raw rules over [-1, 1]
    // pins every tabulated node and weight.
    #[test]
    fn rule_polynomial_exactness() {
        let moments = |k: u32| -> (f64, f64) {
            let mut gauss = WG[3] * 0.0_f64.powi(k as i32);
            let mut kronrod = WGK[7] * 0.0_f64.powi(k as i32);
            for j in 0..7 {
                let s = XGK[j].powi(k as i32) + (-XGK[j]).powi(k as i32);
                kronrod += WGK[j] * s;
                if j % 2 == 1 {
                    gauss += WG[j / 2] * s;
                }
            }
            (gauss, kronrod)
        };
        for k in 0..=22u32 {
            let exact = if k % 2 == 1 { 0.0 } else { 2.0 / (k as f64 + 1.0) };
            let (g, kr) = moments(k);
            if k <= 13 {
                assert!((g - exact).abs() < 2e-14, "gauss moment {k}: {g} vs {exact}");
            }
            assert!((kr - exact).abs() < 2e-14, "kronrod moment {k}: {kr} vs {exact}");
        }
    }

    #[test]
    fn integrates_known_functions() {
        let (v, e) = integrate(|x| Ok(x * x), 0.0, 1.0, &qctl()).unwrap();
        assert!((v - 1.0 / 3.0).abs() < 1e-15);
        assert!(e < 1e-14);

        let (v, _) = integrate(|x| Ok(4.0 / (1.0 + x * x)), 0.0, 1.0, &qctl()).unwrap();
        assert!((v - std::f64::consts::PI).abs() < 1e-13);

        let (v, _) = integrate(|x| Ok(x.sin()), 0.0, std::f64::consts::PI, &qctl()).unwrap();
        assert!((v - 2.0).abs() < 1e-13);
    }

    #[test]
    fn error_estimate_bounds_true_error() {
        // Integrand with a sharp interior peak forces real subdivision.
        let f = |x: f64| Ok(1.0 / ((x - 0.3).powi(2) + 1e-4));
        let truth = ((0.7f64 / 1e-2).atan() + (0.3f64 / 1e-2).atan()) / 1e-2;
        let (v, e) = integrate(f, 0.0, 1.0, &qctl()).unwrap();
        assert!((v - truth).abs() <= e.max(1e-12 * truth.abs()), "v={v} truth={truth} e={e}");
    }

    #[test]
    fn tightening_tolerance_is_consistent() {
        let f = |x: f64| Ok((10.0 * x).cos() * (-x).exp() + x.sqrt());
        let loose = QuadratureControl { rel_tol: 1e-8, abs_tol: 1e-12, ..qctl() };
        let tight = QuadratureControl { rel_tol: 1e-13, abs_tol: 1e-15, ..qctl() };
        let (vl, el) = integrate(f, 0.0, 3.0, &loose).unwrap();
        let (vt, _) = integrate(f, 0.0, 3.0, &tight).unwrap();
        assert!((vl - vt).abs() <= el, "loose {vl} +- {el}, tight {vt}");
    }

    #[test]
    fn linear_in_the_integrand() {
        let f = |x: f64| Ok((3.0 * x).sin() / (1.0 + x));
        let (v1, _) = integrate(f, 0.0, 2.0, &qctl()).unwrap();
        let c = -7.25;
        let (vc, _) = integrate(|x| f(x).map(|y| c * y), 0.0, 2.0, &qctl()).unwrap();
        assert!((vc - c * v1).abs() <= 1e-12 * (c * v1).abs());
    }

    #[test]
    fn reports_nonconvergence() {
        let hard = QuadratureControl { max_subdivisions: 5, ..qctl() };
        let r = integrate(|x: f64| Ok(x.powf(-0.9)), 1e-12, 1.0, &hard);
        match r {
            Err(Error::QuadratureNonConvergent { subdivisions, estimate }) => {
                assert_eq!(subdivisions, 5);
                assert!(estimate > 0.0);
            }
            other => panic!("expected QuadratureNonConvergent, got {other:?}"),
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(integrate(|_| Ok(1.0), 1.0, 0.0, &qctl()).is_err());
        let bad = QuadratureControl { endpoint_offset: 0.3, ..qctl() };
        assert!(bad.validate().is_err());
        let bad = QuadratureControl { max_subdivisions: 2, ..qctl() };
        assert!(bad.validate().is_err());
        let r = integrate(|x| Ok(1.0 / (x - 0.5)), 0.0, 1.0, &qctl());
        assert!(r.is_err(), "non-finite integrand value must error");
    }

    // Frozen references from the million-panel fixed-rule oracle
    // (tests/gen_frozen.rs).
    #[test]
    fn int1_frozen_values() {
        let cases = [
            (1.5, -2.2773117859973193),
            (2.0, -0.36424985527273851),
            (3.0, -4.3696202985736142e-2),
            (4.0, -1.0349852127345698e-2),
        ];
        for (delta, expect) in cases {
            let v = int1(delta, &qctl(), &SCTL).unwrap();
            assert!((v / expect - 1.0).abs() < 1e-10, "int1({delta}) = {v}, expected {expect}");
        }
    }

    #[test]
    fn int2_frozen_values() {
        let cases = [
            (1.5, 0.25877223864282656),
            (2.0, 6.5153470685808373e-2),
            (3.0, 1.0744403207681327e-2),
            (4.0, 2.8714502178525730e-3),
        ];
        for (delta, expect) in cases {
            let v = int2(delta, &qctl(), &SCTL).unwrap();
            assert!((v / expect - 1.0).abs() < 1e-10, "int2({delta}) = {v}, expected {expect}");
        }
    }

    #[test]
    fn transforms_insensitive_to_endpoint_offset() {
        for delta in [1.5, 2.5] {
            let small = QuadratureControl { endpoint_offset: 1e-9, ..qctl() };
            let large = QuadratureControl { endpoint_offset: 1e-6, ..qctl() };
            let a = int1(delta, &small, &SCTL).unwrap();
            let b = int1(delta, &large, &SCTL).unwrap();
            assert!((a / b - 1.0).abs() < 1e-8, "int1({delta}): {a} vs {b}");
            let a = int2(delta, &small, &SCTL).unwrap();
            let b = int2(delta, &large, &SCTL).unwrap();
            assert!((a / b - 1.0).abs() < 1e-8, "int2({delta}): {a} vs {b}");
        }
    }

    #[test]
    fn transforms_reject_bad_delta() {
        assert!(matches!(int1(0.9, &qctl(), &SCTL), Err(Error::InvalidDelta { .. })));
        assert!(matches!(int1(1.0, &qctl(), &SCTL), Err(Error::InvalidDelta { .. })));
        assert!(matches!(int2(0.0, &qctl(), &SCTL), Err(Error::InvalidDelta { .. })));
        assert!(matches!(int2(-0.5, &qctl(), &SCTL), Err(Error::InvalidDelta { .. })));
        // Inside the pole guard the block itself refuses.
        assert!(matches!(int2(1.0 + 1e-10, &qctl(), &SCTL), Err(Error::PoleAtDeltaOne { .. })));
    }
}
