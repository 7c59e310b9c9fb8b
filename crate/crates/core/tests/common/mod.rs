//! Independent oracles shared by the integration tests.

#![allow(dead_code)]

use nalgebra::{SMatrix, SVector};
use resonet_core::NetworkParams;

pub type Mat5 = SMatrix<f64, 5, 5>;
pub type Vec5 = SVector<f64, 5>;

/// Generator of one customer's route in class order `(O, A, BA, B, AB)`
/// when it never waits behind anyone.
pub fn single_customer_generator(p: &NetworkParams) -> Mat5 {
    let mut q = Mat5::zeros();
    let mut add = |from: usize, to: usize, r: f64| {
        q[(from, to)] += r;
        q[(from, from)] -= r;
    };
    add(0, 1, p.gamma_o / 2.0);
    add(0, 3, p.gamma_o / 2.0);
    add(1, 4, p.gamma_a);
    add(4, 0, p.gamma_ab);
    add(3, 2, p.gamma_b);
    add(2, 0, p.gamma_ba);
    q
}

/// Law at time `t` from `p0` via the matrix exponential.
pub fn transient_law(p: &NetworkParams, p0: Vec5, t: f64) -> Vec5 {
    let q = single_customer_generator(p);
    let e = (q * t).exp();
    e.transpose() * p0
}

/// Stationary law from the balance equations with one row replaced by
/// the normalization.
pub fn stationary_law(p: &NetworkParams) -> Vec5 {
    let mut a = single_customer_generator(p).transpose();
    let mut b = Vec5::zeros();
    for j in 0..5 {
        a[(4, j)] = 1.0;
    }
    b[4] = 1.0;
    a.lu().solve(&b).expect("generator is irreducible")
}

/// Writes a line to the real stdout, bypassing the test harness capture.
pub fn announce(line: &str) {
    use std::io::Write;
    let mut out = std::io::stdout().lock();
    let _ = writeln!(out, "{line}");
}
