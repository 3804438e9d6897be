//! Modified Bessel functions `K0`, `K1`, the outer wavenumber profile and
//! the cut-off core ansatz `-chi(lambda r) ln K0(lambda r)`.
//!
//! `K0`/`K1` use the power series for `z <= 2` and Steed's continued
//! fraction (the Temme/Thompson-Barnett CF2 recursion) above, both accurate
//! to a few ulps. The `_scaled` variants return `exp(z) K(z)` so that
//! logarithms stay finite far into the outer region.

use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Euler-Mascheroni constant.
pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

const SERIES_LIMIT: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BesselMethod {
    Series,
    ContinuedFraction,
}

/// `K0` and `K1` at one point, with the branch that produced them.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BesselEval {
    pub z: f64,
    pub k0: f64,
    pub k1: f64,
    pub method: BesselMethod,
}

fn check_arg(z: f64) -> Result<()> {
    if !(z > 0.0) || !z.is_finite() {
        return Err(Error::domain(format!(
            "modified Bessel K needs a positive finite argument, got {z}"
        )));
    }
    Ok(())
}

/// Power series (A&S 9.6.13 and 9.6.11), unscaled.
fn series(z: f64) -> (f64, f64) {
    let y = 0.25 * z * z;
    let log_half = (0.5 * z).ln();
    // term_k = y^k / (k!)^2, h = H_k
    let mut term = 1.0;
    let mut h = 0.0;
    let mut i0 = 0.0;
    let mut s0 = 0.0;
    // term1_k = y^k / (k! (k+1)!), psi sum = psi(k+1) + psi(k+2)
    let mut term1 = 1.0;
    let mut i1_sum = 0.0;
    let mut s1 = 0.0;
    for k in 0..60 {
        let kf = k as f64;
        if k > 0 {
            term *= y / (kf * kf);
            term1 *= y / (kf * (kf + 1.0));
            h += 1.0 / kf;
        }
        i0 += term;
        s0 += term * h;
        i1_sum += term1;
        let psi_sum = 2.0 * (h - EULER_GAMMA) + 1.0 / (kf + 1.0);
        s1 += psi_sum * term1;
        if term < 1e-18 * i0 && k > 2 {
            break;
        }
    }
    let i1 = 0.5 * z * i1_sum;
    let k0 = -(log_half + EULER_GAMMA) * i0 + s0;
    let k1 = 1.0 / z + log_half * i1 - 0.25 * z * s1;
    (k0, k1)
}

/// Steed's CF2 for order zero; returns `exp(z) K0(z)`, `exp(z) K1(z)`.
fn continued_fraction_scaled(z: f64) -> (f64, f64) {
    let mut b = 2.0 * (1.0 + z);
    let mut d = 1.0 / b;
    let mut h = d;
    let mut delh = d;
    let mut q1 = 0.0;
    let mut q2 = 1.0;
    let a1 = 0.25;
    let mut q = a1;
    let mut c = a1;
    let mut a = -a1;
    let mut s = 1.0 + q * delh;
    for i in 2..10_000 {
        let fi = i as f64;
        a -= 2.0 * (fi - 1.0);
        c = -a * c / fi;
        let qnew = (q1 - b * q2) / a;
        q1 = q2;
        q2 = qnew;
        q += c * qnew;
        b += 2.0;
        d = 1.0 / (b + a * d);
        delh = (b * d - 1.0) * delh;
        h += delh;
        let dels = q * delh;
        s += dels;
        if (dels / s).abs() < 1e-17 {
            break;
        }
    }
    let h = a1 * h;
    let k0 = (PI / (2.0 * z)).sqrt() / s;
    let k1 = k0 * (z + 0.5 - h) / z;
    (k0, k1)
}

/// Both functions at once, unscaled.
pub fn bessel_k01(z: f64) -> Result<BesselEval> {
    check_arg(z)?;
    if z <= SERIES_LIMIT {
        let (k0, k1) = series(z);
        Ok(BesselEval {
            z,
            k0,
            k1,
            method: BesselMethod::Series,
        })
    } else {
        let (k0, k1) = continued_fraction_scaled(z);
        let e = (-z).exp();
        Ok(BesselEval {
            z,
            k0: k0 * e,
            k1: k1 * e,
            method: BesselMethod::ContinuedFraction,
        })
    }
}

/// `exp(z) K0(z)` and `exp(z) K1(z)`.
pub fn bessel_k01_scaled(z: f64) -> Result<(f64, f64)> {
    check_arg(z)?;
    if z <= SERIES_LIMIT {
        let (k0, k1) = series(z);
        let e = z.exp();
        Ok((k0 * e, k1 * e))
    } else {
        Ok(continued_fraction_scaled(z))
    }
}

pub fn bessel_k0(z: f64) -> Result<f64> {
    bessel_k01(z).map(|b| b.k0)
}

pub fn bessel_k1(z: f64) -> Result<f64> {
    bessel_k01(z).map(|b| b.k1)
}

/// `ln K0(z)` without underflow for large `z`.
pub fn ln_bessel_k0(z: f64) -> Result<f64> {
    let (k0s, _) = bessel_k01_scaled(z)?;
    Ok(k0s.ln() - z)
}

/// Outer wavenumber profile `F(xi) = K1(xi) / K0(xi)`, the solution of
/// `F' + F/xi - F^2 = -1` that tends to 1 at infinity.
pub fn outer_wavenumber(xi: f64) -> Result<f64> {
    let (k0, k1) = bessel_k01_scaled(xi)?;
    Ok(k1 / k0)
}

fn bump(t: f64) -> f64 {
    if t <= 0.0 {
        0.0
    } else {
        (-1.0 / t).exp()
    }
}

/// Smooth cut-off: 0 below 1, 1 above 2.
pub fn chi(x: f64) -> f64 {
    let x = x.abs();
    if x <= 1.0 {
        0.0
    } else if x >= 2.0 {
        1.0
    } else {
        let a = bump(x - 1.0);
        a / (a + bump(2.0 - x))
    }
}

/// `-chi(lambda r) ln K0(lambda r)`.
pub fn core_ansatz(lambda: f64, r: f64) -> Result<f64> {
    if !(lambda > 0.0) {
        return Err(Error::domain(format!("lambda must be positive, got {lambda}")));
    }
    if r < 0.0 {
        return Err(Error::domain(format!("radius must be non-negative, got {r}")));
    }
    let z = lambda * r;
    let c = chi(z);
    if c == 0.0 {
        return Ok(0.0);
    }
    Ok(-c * ln_bessel_k0(z)?)
}

/// Radial derivative of the uncut ansatz `-ln K0(lambda r)`, i.e.
/// `lambda K1 / K0`; equals the derivative of [`core_ansatz`] for `lambda r > 2`.
pub fn core_ansatz_slope(lambda: f64, r: f64) -> Result<f64> {
    Ok(lambda * outer_wavenumber(lambda * r)?)
}

/// Radial residual `psi'' + psi'/r - (psi')^2 - rhs` of a profile, with
/// derivatives from fourth-order central differences of step `h`.
pub fn radial_eikonal_residual(psi: impl Fn(f64) -> f64, r: f64, h: f64, rhs: f64) -> f64 {
    let f = [psi(r - 2.0 * h), psi(r - h), psi(r), psi(r + h), psi(r + 2.0 * h)];
    let d1 = (f[0] - 8.0 * f[1] + 8.0 * f[3] - f[4]) / (12.0 * h);
    let d2 = (-f[0] + 16.0 * f[1] - 30.0 * f[2] + 16.0 * f[3] - f[4]) / (12.0 * h * h);
    d2 + d1 / r - d1 * d1 - rhs
}

/// Largest `|Delta psi0 - |grad psi0|^2 + lambda^2|` for the uncut ansatz
/// `psi0 = -ln K0(lambda r)` over `lambda r` in `[z_lo, z_hi]`.
pub fn core_ansatz_residual(lambda: f64, z_lo: f64, z_hi: f64, samples: usize) -> Result<f64> {
    if !(lambda > 0.0) || !(z_lo > 0.0) || !(z_hi > z_lo) {
        return Err(Error::domain("need lambda > 0 and 0 < z_lo < z_hi"));
    }
    let psi = |r: f64| -ln_bessel_k0(lambda * r).unwrap_or(f64::NAN);
    let mut worst = 0.0f64;
    for k in 0..samples.max(2) {
        let z = z_lo + (z_hi - z_lo) * k as f64 / (samples.max(2) - 1) as f64;
        let r = z / lambda;
        let h = 0.05 / lambda;
        let res = radial_eikonal_residual(psi, r, h, -lambda * lambda);
        worst = worst.max(res.abs());
    }
    Ok(worst)
}
