//! Shared helpers for the integration and acceptance tests. Not compiled
//! into the library. Each test binary uses its own subset, hence the
//! blanket dead-code allowance.
#![allow(dead_code)]

pub mod dd;
pub mod oracle;

pub fn rel_err(got: f64, want: f64) -> f64 {
    if want == 0.0 {
        got.abs()
    } else {
        (got - want).abs() / want.abs()
    }
}

pub fn rel_err_c(got: (f64, f64), want: (f64, f64)) -> f64 {
    let dn = ((got.0 - want.0).powi(2) + (got.1 - want.1).powi(2)).sqrt();
    let wn = (want.0.powi(2) + want.1.powi(2)).sqrt();
    if wn == 0.0 {
        dn
    } else {
        dn / wn
    }
}
