//! One-off generator for the frozen reference values embedded in unit
//! tests. Run manually:
//!
//!     cargo test -p crossing-core --test gen_frozen -- --ignored --nocapture

mod support;

use support::dd::{Dd, DdComplex};
use support::oracle;

#[test]
#[ignore]
fn print_frozen_values() {
    println!("== specfun ==");
    let v = oracle::hyp2f1_dd(1.0, 1.0, 2.0, Dd::from_f64(0.5));
    println!("hyp2f1(1,1,2,0.5)        = {:.17e}", v.to_f64());
    let v = oracle::hyp2f1_dd(1.0, 2.0, 4.0, Dd::from_f64(0.3));
    println!("hyp2f1(1,2,4,0.3)        = {:.17e}", v.to_f64());
    let v = oracle::hyp2f1_dd_complex(2.5, 3.5, 9.0, DdComplex::from_f64(0.4, 0.3));
    let (re, im) = v.to_c64();
    println!("hyp2f1(2.5,3.5,9,.4+.3i) = {re:.17e} + {im:.17e} i");
    let x = 4.0 * std::f64::consts::PI;
    println!("I0(1)                    = {:.17e}", oracle::bessel_i_dd(0, Dd::ONE).to_f64());
    println!("I1(2)                    = {:.17e}", oracle::bessel_i_dd(1, Dd::from_f64(2.0)).to_f64());
    println!("I2(4pi)                  = {:.17e}", oracle::bessel_i_dd(2, Dd::from_f64(x)).to_f64());

    println!("== coupling coefficients ==");
    for g in [0.5, 1.0, 2.0, 3.0, 4.0] {
        let co = oracle::coupling_coefficients_dd(g);
        println!(
            "g={g}: F={:.17e} Cbps^2={:.17e} B={:.17e}",
            co.f_of_g.to_f64(),
            co.c_bps_sq.to_f64(),
            co.b_of_g.to_f64()
        );
    }

    println!("== rhs (g=0.5, curvature interpolated to 0.3) ==");
    let c = 0.2 + ((0.5 - 0.25) / (0.75 - 0.25)) * (0.4 - 0.2);
    let (r1, r2) = oracle::rhs_oracle(0.5, c);
    println!("rhs1 = {r1:.17e}");
    println!("rhs2 = {r2:.17e}");

    println!("== blocks ==");
    println!("b2(0.5)        = {:.17e}", oracle::block_b2_dd(Dd::from_f64(0.5)).to_f64());
    println!("b2(0.25)       = {:.17e}", oracle::block_b2_dd(Dd::from_f64(0.25)).to_f64());
    println!("f_2(0.1)       = {:.17e}", oracle::block_delta_dd(4, Dd::from_f64(0.1)).to_f64());
    println!("f_2.5(0.35)    = {:.17e}", oracle::block_delta_dd(5, Dd::from_f64(0.35)).to_f64());
    println!("F_2(0.4)       = {:.17e}", oracle::big_f_delta_dd(4, 0.4).to_f64());
    println!("F_3.5(0.3)     = {:.17e}", oracle::big_f_delta_dd(7, 0.3).to_f64());
    println!("h(0.5, g=1)    = {:.17e}", oracle::h_dd(0.5, 1.0).to_f64());
    println!("h(0.2, g=0.5)  = {:.17e}", oracle::h_dd(0.2, 0.5).to_f64());

    println!("== integrals (1e6-panel fixed rule) ==");
    for delta in [1.5, 2.0, 3.0, 4.0] {
        println!("int1({delta}) = {:.17e}", oracle::int1_oracle(delta, 1_000_000));
        println!("int2({delta}) = {:.17e}", oracle::int2_oracle(delta, 1_000_000));
    }
}
