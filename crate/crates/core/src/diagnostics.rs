//! Observables extracted from simulation output: frequency, far-field
//! wavenumber, angular mode content, anisotropy and algebraic decay.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::spectral::{Complex, Grid2D, ScalarField};

/// Fraction of the shorter box side inside which radial profiles are used.
pub const USABLE_RADIUS_FRACTION: f64 = 0.4;
pub const DEFAULT_N_MAX: usize = 8;
const MIN_WINDOW_SAMPLES: usize = 10;
const STABILITY_TOL: f64 = 0.02;
const ANISOTROPY_FLOOR: f64 = 1e-14;

pub fn usable_radius(grid: &Grid2D) -> f64 {
    USABLE_RADIUS_FRACTION * grid.lx().min(grid.ly())
}

/// Least-squares coefficients of `y ~ X c` and the RMS residual.
pub fn least_squares(columns: &[Vec<f64>], y: &[f64]) -> Result<(Vec<f64>, f64)> {
    let n = y.len();
    let m = columns.len();
    if n < m || columns.iter().any(|c| c.len() != n) {
        return Err(Error::contract(format!("least squares needs {m} equal columns and >= {m} rows")));
    }
    let x = DMatrix::from_fn(n, m, |i, j| columns[j][i]);
    let rhs = DVector::from_column_slice(y);
    let coef = x
        .clone()
        .svd(true, true)
        .solve(&rhs, 1e-14)
        .map_err(|e| Error::NoConvergence(format!("least squares: {e}")))?;
    let res = &x * &coef - rhs;
    let rms = (res.norm_squared() / n as f64).sqrt();
    Ok((coef.iter().copied().collect(), rms))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FrequencyFit {
    /// Minus the slope of the phase over the window.
    pub omega: f64,
    pub intercept: f64,
    /// RMS deviation of the series from the fitted line.
    pub residual: f64,
    pub window: (f64, f64),
    pub samples: usize,
    /// Set when the two halves of the window disagree on the slope by more
    /// than 2 %, or the phase is not monotone in the window.
    pub transient: bool,
}

fn fit_line(t: &[f64], y: &[f64]) -> Result<(f64, f64, f64)> {
    let (c, rms) = least_squares(&[vec![1.0; t.len()], t.to_vec()], y)?;
    Ok((c[1], c[0], rms))
}

/// Fits `phi(t) ~ c - omega t` over the trailing `window_fraction` of the series.
pub fn measure_frequency(t: &[f64], phi: &[f64], window_fraction: f64) -> Result<FrequencyFit> {
    if t.len() != phi.len() {
        return Err(Error::contract("time and phase series differ in length"));
    }
    if !(window_fraction > 0.0 && window_fraction <= 1.0) {
        return Err(Error::contract(format!("window fraction must lie in (0, 1], got {window_fraction}")));
    }
    let (t_first, t_last) = match (t.first(), t.last()) {
        (Some(&a), Some(&b)) => (a, b),
        _ => return Err(Error::contract("empty series")),
    };
    let t_start = t_last - window_fraction * (t_last - t_first);
    let first = t.iter().position(|&v| v >= t_start - 1e-12 * t_last.abs().max(1.0)).unwrap_or(t.len());
    let (tw, pw) = (&t[first..], &phi[first..]);
    if tw.len() < MIN_WINDOW_SAMPLES {
        return Err(Error::contract(format!(
            "frequency window holds {} samples, need at least {MIN_WINDOW_SAMPLES}",
            tw.len()
        )));
    }
    let t0 = tw[0];
    let shifted: Vec<f64> = tw.iter().map(|v| v - t0).collect();
    let (slope, c0, residual) = fit_line(&shifted, pw)?;
    let half = tw.len() / 2;
    let (s1, _, _) = fit_line(&shifted[..half], &pw[..half])?;
    let (s2, _, _) = fit_line(&shifted[half..], &pw[half..])?;
    let scale = s1.abs().max(s2.abs());
    let unstable = (s1 - s2).abs() > STABILITY_TOL * scale + 1e-14;
    let diffs: Vec<f64> = pw.windows(2).map(|w| w[1] - w[0]).collect();
    let monotone = diffs.iter().all(|&d| d <= 0.0) || diffs.iter().all(|&d| d >= 0.0);
    Ok(FrequencyFit {
        omega: -slope,
        intercept: c0 - slope * t0,
        residual,
        window: (t0, t_last),
        samples: tw.len(),
        transient: unstable || !monotone,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum PolarMethod {
    /// Trigonometric interpolation of the field on exact circles.
    Circles,
    /// Grid points binned into annuli, fitted with angular-gap weights.
    Annuli,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RadialProfile {
    pub center: (f64, f64),
    pub n_max: usize,
    /// Bin centres.
    pub radii: Vec<f64>,
    /// `modes[n + n_max][b]` is `f_n` at `radii[b]`.
    pub modes: Vec<Vec<Complex>>,
    /// Samples contributing to each bin.
    pub counts: Vec<usize>,
    /// Area each bin stands for: the covered grid cells for annuli, the
    /// ring `2 pi r dr` for circles.
    pub areas: Vec<f64>,
    pub valid: Vec<bool>,
    pub dr: f64,
    pub method: PolarMethod,
}

impl RadialProfile {
    pub fn mode(&self, n: i32) -> Option<&[Complex]> {
        let idx = n + self.n_max as i32;
        if idx < 0 || idx as usize >= self.modes.len() {
            return None;
        }
        Some(&self.modes[idx as usize])
    }

    /// Index of the valid bin closest to `r`.
    pub fn bin_at(&self, r: f64) -> Option<usize> {
        (0..self.radii.len())
            .filter(|&b| self.valid[b])
            .min_by(|&a, &b| (self.radii[a] - r).abs().total_cmp(&(self.radii[b] - r).abs()))
    }

    /// Real mode-0 profile over the valid bins as `(r, f_0(r))`.
    pub fn mean_profile(&self) -> (Vec<f64>, Vec<f64>) {
        let m0 = self.mode(0).expect("mode 0 is always present");
        (0..self.radii.len())
            .filter(|&b| self.valid[b])
            .map(|b| (self.radii[b], m0[b].re))
            .unzip()
    }

    /// `sum_n integral |f_n|^2 dA` over the valid bins.
    pub fn mode_energy(&self) -> f64 {
        (0..self.radii.len())
            .filter(|&b| self.valid[b])
            .map(|b| self.areas[b] * self.modes.iter().map(|m| m[b].norm_sqr()).sum::<f64>())
            .sum()
    }
}

/// Evaluates the trigonometric interpolant of a grid field anywhere.
pub struct SpectralInterpolant {
    grid: Grid2D,
    coeffs: Vec<Complex>,
}

impl SpectralInterpolant {
    pub fn new(field: &ScalarField) -> Self {
        SpectralInterpolant {
            grid: *field.grid(),
            coeffs: field.forward().coeffs().to_vec(),
        }
    }

    fn phases(n: usize, l: f64, origin: f64, x: f64) -> Vec<Complex> {
        (0..n)
            .map(|p| {
                let w = Grid2D::wrap(p, n) as f64;
                let arg = 2.0 * PI * w * (x - origin) / l;
                if p == n / 2 {
                    // split the Nyquist mode evenly so the interpolant stays real
                    Complex::new(arg.cos(), 0.0)
                } else {
                    Complex::from_polar(1.0, arg)
                }
            })
            .collect()
    }

    pub fn eval(&self, x: f64, y: f64) -> f64 {
        let g = &self.grid;
        let ex = Self::phases(g.nx(), g.lx(), g.x(0), x);
        let ey = Self::phases(g.ny(), g.ly(), g.y(0), y);
        let mut total = Complex::new(0.0, 0.0);
        for (row, e) in self.coeffs.chunks_exact(g.nx()).zip(&ey) {
            let s: Complex = row.iter().zip(&ex).map(|(c, w)| c * w).sum();
            total += s * e;
        }
        total.re
    }
}

fn check_polar_args(grid: &Grid2D, center: (f64, f64), nbins: usize) -> Result<()> {
    if nbins < 8 {
        return Err(Error::contract(format!("polar decomposition needs at least 8 bins, got {nbins}")));
    }
    let inside = |c: f64, l: f64| c >= -0.5 * l && c < 0.5 * l;
    if !(inside(center.0, grid.lx()) && inside(center.1, grid.ly())) {
        return Err(Error::contract(format!("center {center:?} lies outside the domain")));
    }
    Ok(())
}

/// Angular Fourier modes `f_n(r)`, `|n| <= n_max`, on `nbins` radii spaced
/// by the grid step out to `nbins * dx`. `nbins = 0` covers the usable radius.
pub fn polar_decompose(
    field: &ScalarField,
    center: (f64, f64),
    n_max: usize,
    nbins: usize,
    method: PolarMethod,
) -> Result<RadialProfile> {
    let grid = *field.grid();
    let dr = grid.dx().min(grid.dy());
    let nbins = if nbins == 0 {
        (usable_radius(&grid) / dr).floor() as usize
    } else {
        nbins
    };
    check_polar_args(&grid, center, nbins)?;
    let radii: Vec<f64> = (0..nbins).map(|b| (b as f64 + 0.5) * dr).collect();
    let nm = 2 * n_max + 1;
    let mut modes = vec![vec![Complex::new(0.0, 0.0); nbins]; nm];
    let mut counts = vec![0usize; nbins];

    match method {
        PolarMethod::Circles => {
            let interp = SpectralInterpolant::new(field);
            let angles = (8 * n_max).max(64);
            for (b, &r) in radii.iter().enumerate() {
                let samples: Vec<f64> = (0..angles)
                    .map(|m| {
                        let th = 2.0 * PI * m as f64 / angles as f64;
                        interp.eval(center.0 + r * th.cos(), center.1 + r * th.sin())
                    })
                    .collect();
                for (slot, n) in (-(n_max as i32)..=n_max as i32).enumerate() {
                    let s: Complex = samples
                        .iter()
                        .enumerate()
                        .map(|(m, &f)| f * Complex::from_polar(1.0, -2.0 * PI * (n * m as i32) as f64 / angles as f64))
                        .sum();
                    modes[slot][b] = s / angles as f64;
                }
                counts[b] = angles;
            }
        }
        PolarMethod::Annuli => {
            let mut members: Vec<Vec<(f64, f64, f64)>> = vec![Vec::new(); nbins];
            for j in 0..grid.ny() {
                for i in 0..grid.nx() {
                    let dx = periodic_offset(grid.x(i) - center.0, grid.lx());
                    let dy = periodic_offset(grid.y(j) - center.1, grid.ly());
                    let r = dx.hypot(dy);
                    let b = (r / dr).floor() as usize;
                    if b < nbins {
                        members[b].push((dy.atan2(dx), r, field.get(i, j)));
                    }
                }
            }
            for (b, pts) in members.iter_mut().enumerate() {
                counts[b] = pts.len();
                if pts.is_empty() {
                    continue;
                }
                pts.sort_by(|a, c| a.0.total_cmp(&c.0));
                let k = pts.len();
                let weights: Vec<f64> = (0..k)
                    .map(|idx| {
                        if k == 1 {
                            return 1.0;
                        }
                        let prev = pts[(idx + k - 1) % k].0;
                        let next = pts[(idx + 1) % k].0;
                        (next - prev).rem_euclid(2.0 * PI) / (4.0 * PI)
                    })
                    .collect();
                let n_eff = (1..=n_max).take_while(|&n| 4 * n <= k).last().unwrap_or(0);
                let coeffs = annulus_fit(pts, &weights, radii[b], n_eff)?;
                for (slot, n) in (-(n_max as i32)..=n_max as i32).enumerate() {
                    if n.unsigned_abs() as usize <= n_eff {
                        modes[slot][b] = coeffs[n.unsigned_abs() as usize];
                        if n < 0 {
                            modes[slot][b] = modes[slot][b].conj();
                        }
                    }
                }
            }
        }
    }
    let valid = counts.iter().map(|&c| c > 0).collect();
    let areas = match method {
        PolarMethod::Circles => radii.iter().map(|r| 2.0 * PI * r * dr).collect(),
        PolarMethod::Annuli => counts.iter().map(|&c| c as f64 * grid.cell_area()).collect(),
    };
    Ok(RadialProfile {
        center,
        n_max,
        radii,
        modes,
        counts,
        areas,
        valid,
        dr,
        method,
    })
}

/// Weighted least-squares fit of `f ~ sum_n c_n e^{in theta} + s (r - r_b)`
/// on one annulus of a real field; returns `c_0 ..= c_{n_eff}`. The slope
/// term keeps the radial variation across the annulus out of the modes.
fn annulus_fit(pts: &[(f64, f64, f64)], weights: &[f64], r_b: f64, n_eff: usize) -> Result<Vec<Complex>> {
    let k = pts.len();
    let slope = k >= 2 * n_eff + 3 && pts.iter().any(|p| (p.1 - pts[0].1).abs() > 1e-9 * r_b.max(1.0));
    let cols = 1 + 2 * n_eff + usize::from(slope);
    let mut a = DMatrix::zeros(k, cols);
    let mut y = DVector::zeros(k);
    for (row, ((th, r, f), w)) in pts.iter().zip(weights).enumerate() {
        let sw = w.sqrt();
        a[(row, 0)] = sw;
        for n in 1..=n_eff {
            let (sn, cn) = (n as f64 * th).sin_cos();
            a[(row, 2 * n - 1)] = 2.0 * sw * cn;
            a[(row, 2 * n)] = -2.0 * sw * sn;
        }
        if slope {
            a[(row, cols - 1)] = sw * (r - r_b);
        }
        y[row] = sw * f;
    }
    let c = a
        .svd(true, true)
        .solve(&y, 1e-12)
        .map_err(|e| Error::NoConvergence(format!("annulus fit: {e}")))?;
    let mut out = vec![Complex::new(c[0], 0.0)];
    for n in 1..=n_eff {
        out.push(Complex::new(c[2 * n - 1], c[2 * n]));
    }
    Ok(out)
}

fn periodic_offset(d: f64, l: f64) -> f64 {
    d - l * (d / l).round()
}

/// `sum_{n != 0} |f_n|^2 / |f_0|^2` at the bin nearest to `r`.
pub fn anisotropy(profile: &RadialProfile, r: f64) -> Result<f64> {
    let b = profile
        .bin_at(r)
        .ok_or_else(|| Error::domain(format!("no valid bin near r = {r}")))?;
    let f0 = profile.mode(0).expect("mode 0")[b].norm_sqr();
    if f0 < ANISOTROPY_FLOOR {
        return Err(Error::domain(format!("mode 0 vanishes at r = {}; anisotropy undefined", profile.radii[b])));
    }
    let rest: f64 = (1..=profile.n_max as i32)
        .map(|n| profile.mode(n).unwrap()[b].norm_sqr() + profile.mode(-n).unwrap()[b].norm_sqr())
        .sum();
    Ok(rest / f0)
}

/// Mean anisotropy over the valid bins inside `[r_lo, r_hi]`.
pub fn anisotropy_band(profile: &RadialProfile, r_lo: f64, r_hi: f64) -> Result<f64> {
    let vals: Vec<f64> = (0..profile.radii.len())
        .filter(|&b| profile.valid[b] && profile.radii[b] >= r_lo && profile.radii[b] <= r_hi)
        .map(|b| anisotropy(profile, profile.radii[b]))
        .collect::<Result<_>>()?;
    if vals.is_empty() {
        return Err(Error::domain(format!("no valid bins in [{r_lo}, {r_hi}]")));
    }
    Ok(vals.iter().sum::<f64>() / vals.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WavenumberFit {
    /// Far-field wavenumber, the coefficient of `r`.
    pub k: f64,
    /// Coefficient of `ln r`.
    pub log_coeff: f64,
    pub offset: f64,
    pub residual: f64,
    pub window: (f64, f64),
}

/// Fits `phi_0(r) ~ k r + b ln r + c` on `window`, or on `lambda r in [4, 8]`
/// when no window is given.
pub fn measure_wavenumber(
    radii: &[f64],
    phi0: &[f64],
    lambda_hint: f64,
    window: Option<(f64, f64)>,
    usable: f64,
) -> Result<WavenumberFit> {
    if radii.len() != phi0.len() {
        return Err(Error::contract("radius and profile lengths differ"));
    }
    if !(lambda_hint > 0.0) {
        return Err(Error::contract(format!("lambda hint must be positive, got {lambda_hint}")));
    }
    let (lo, hi) = window.unwrap_or((4.0 / lambda_hint, 8.0 / lambda_hint));
    if lo < 2.0 / lambda_hint * (1.0 - 1e-12) {
        return Err(Error::contract(format!("window start {lo} lies inside the core (2 / lambda = {})", 2.0 / lambda_hint)));
    }
    if hi > usable {
        return Err(Error::domain(format!(
            "wavenumber window [{lo}, {hi}] reaches the boundary-ridge region beyond r = {usable}"
        )));
    }
    let (r, y): (Vec<f64>, Vec<f64>) = radii
        .iter()
        .zip(phi0)
        .filter(|(r, _)| **r >= lo && **r <= hi)
        .map(|(a, b)| (*a, *b))
        .unzip();
    if r.len() < 4 {
        return Err(Error::domain(format!("only {} samples in the wavenumber window", r.len())));
    }
    let (c, residual) = least_squares(&[r.clone(), r.iter().map(|v| v.ln()).collect(), vec![1.0; r.len()]], &y)?;
    Ok(WavenumberFit {
        k: c[0],
        log_coeff: c[1],
        offset: c[2],
        residual,
        window: (lo, hi),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecayFit {
    pub delta: f64,
    pub prefactor: f64,
    /// Constant removed before the power-law fit (0 without offset fitting).
    pub offset: f64,
    pub window: (f64, f64),
    /// RMS residual of the fit in `ln |psi|`.
    pub residual: f64,
    pub gamma: f64,
    /// Cumulative weighted norms `(R, ||psi||_{gamma, [r_lo, R]})`.
    pub norms: Vec<(f64, f64)>,
    /// The profile changes sign in the window and no envelope was taken.
    pub sign_changes: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct DecayOptions {
    pub gamma: f64,
    /// Fit the local maxima of `|psi|` instead of every sample.
    pub envelope: bool,
    /// Also fit an additive constant: `psi ~ c + C r^{-delta}`.
    pub offset: bool,
}

fn power_fit(r: &[f64], y: &[f64]) -> Result<(f64, f64, f64)> {
    let lr: Vec<f64> = r.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.abs().ln()).collect();
    let (c, rms) = least_squares(&[vec![1.0; r.len()], lr], &ly)?;
    Ok((-c[1], c[0].exp(), rms))
}

/// `sqrt(integral |psi|^2 (1 + r^2)^gamma 2 pi r dr)` by the trapezoid rule.
pub fn weighted_norm_radial(radii: &[f64], psi: &[f64], gamma: f64) -> f64 {
    let f: Vec<f64> = radii
        .iter()
        .zip(psi)
        .map(|(r, p)| p * p * (1.0 + r * r).powf(gamma) * 2.0 * PI * r)
        .collect();
    let s: f64 = radii.windows(2).zip(f.windows(2)).map(|(r, v)| 0.5 * (r[1] - r[0]) * (v[0] + v[1])).sum();
    s.sqrt()
}

/// Discrete weighted norm of a grid field about `center`.
pub fn weighted_norm(field: &ScalarField, center: (f64, f64), gamma: f64) -> f64 {
    let g = field.grid();
    let mut s = 0.0;
    for j in 0..g.ny() {
        for i in 0..g.nx() {
            let dx = periodic_offset(g.x(i) - center.0, g.lx());
            let dy = periodic_offset(g.y(j) - center.1, g.ly());
            let w = (1.0 + dx * dx + dy * dy).powf(gamma);
            s += field.get(i, j).powi(2) * w;
        }
    }
    (s * g.cell_area()).sqrt()
}

fn local_maxima(r: &[f64], y: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let a: Vec<f64> = y.iter().map(|v| v.abs()).collect();
    (1..a.len().saturating_sub(1))
        .filter(|&i| a[i] >= a[i - 1] && a[i] > a[i + 1])
        .map(|i| (r[i], a[i]))
        .unzip()
}

/// Fits `|psi(r)| ~ C r^{-delta}` on `window`.
pub fn decay_fit(radii: &[f64], psi: &[f64], window: (f64, f64), opts: &DecayOptions) -> Result<DecayFit> {
    if radii.len() != psi.len() {
        return Err(Error::contract("radius and profile lengths differ"));
    }
    let (lo, hi) = window;
    if !(lo > 0.0 && hi > lo) {
        return Err(Error::contract(format!("decay window [{lo}, {hi}] must satisfy 0 < lo < hi")));
    }
    let (r, y): (Vec<f64>, Vec<f64>) = radii
        .iter()
        .zip(psi)
        .filter(|(r, _)| **r >= lo && **r <= hi)
        .map(|(a, b)| (*a, *b))
        .unzip();
    if r.len() < 4 {
        return Err(Error::domain(format!("only {} samples in the decay window", r.len())));
    }
    let mut offset = 0.0;
    let y = if opts.offset {
        offset = best_offset(&r, &y)?;
        y.iter().map(|v| v - offset).collect()
    } else {
        y
    };
    let sign_changes = !opts.envelope && y.windows(2).any(|w| w[0] * w[1] < 0.0);
    let (fr, fy) = if opts.envelope { local_maxima(&r, &y) } else { (r.clone(), y.clone()) };
    let (fr, fy): (Vec<f64>, Vec<f64>) = fr.into_iter().zip(fy).filter(|(_, v)| *v != 0.0).unzip();
    if fr.len() < 3 {
        return Err(Error::domain("too few usable samples for a power-law fit"));
    }
    let (delta, prefactor, residual) = power_fit(&fr, &fy)?;
    let norms = (1..r.len())
        .map(|k| (r[k], weighted_norm_radial(&r[..=k], &y[..=k], opts.gamma)))
        .collect();
    Ok(DecayFit {
        delta,
        prefactor,
        offset,
        window,
        residual,
        gamma: opts.gamma,
        norms,
        sign_changes,
    })
}

/// Constant `c` minimizing the misfit of `y - c ~ s C r^{-delta}` over `delta`.
fn best_offset(r: &[f64], y: &[f64]) -> Result<f64> {
    let misfit = |delta: f64| -> Result<(f64, f64)> {
        let basis: Vec<f64> = r.iter().map(|v| v.powf(-delta)).collect();
        let (c, rms) = least_squares(&[vec![1.0; r.len()], basis], y)?;
        Ok((rms, c[0]))
    };
    let grid: Vec<f64> = (1..=60).map(|k| 0.05 * k as f64).collect();
    let mut best = (f64::INFINITY, 0.05);
    for &d in &grid {
        let (rms, _) = misfit(d)?;
        if rms < best.0 {
            best = (rms, d);
        }
    }
    let (mut a, mut b) = ((best.1 - 0.05).max(1e-3), best.1 + 0.05);
    let phi = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..60 {
        let c = b - phi * (b - a);
        let d = a + phi * (b - a);
        if misfit(c)?.0 < misfit(d)?.0 {
            b = d;
        } else {
            a = c;
        }
    }
    Ok(misfit(0.5 * (a + b))?.1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::special::bessel_k0;

    #[test]
    fn frequency_of_lines() {
        let t: Vec<f64> = (0..100).map(|k| k as f64).collect();
        let phi: Vec<f64> = t.iter().map(|t| 3.0 - 0.2 * t).collect();
        let f = measure_frequency(&t, &phi, 0.25).unwrap();
        assert!((f.omega - 0.2).abs() < 1e-13);
        assert!(f.residual < 1e-12);
        assert!(!f.transient);
        assert!((f.intercept - 3.0).abs() < 1e-10);
        let flat = measure_frequency(&t, &vec![1.5; 100], 0.25).unwrap();
        assert!(flat.omega.abs() < 1e-15);
        assert!(measure_frequency(&t[..20], &phi[..20], 0.25).is_err());
    }

    #[test]
    fn frequency_with_ripple() {
        let t: Vec<f64> = (0..=4000).map(|k| 0.25 * k as f64).collect();
        let phi: Vec<f64> = t.iter().map(|t| -0.05 * t + 1e-3 * t.sin()).collect();
        let f = measure_frequency(&t, &phi, 0.5).unwrap();
        assert!((f.omega - 0.05).abs() < 2e-4);
        assert!(f.residual > 0.0);
    }

    #[test]
    fn frequency_invariances() {
        let t: Vec<f64> = (0..200).map(|k| 0.5 * k as f64).collect();
        let phi: Vec<f64> = t.iter().map(|t| -0.03 * t + 0.2 * (-t / 10.0).exp()).collect();
        let base = measure_frequency(&t, &phi, 0.3).unwrap();
        let shifted: Vec<f64> = phi.iter().map(|p| p + 7.0).collect();
        let s = measure_frequency(&t, &shifted, 0.3).unwrap();
        assert!((s.omega - base.omega).abs() < 1e-12);
        let t2: Vec<f64> = t.iter().map(|t| 2.0 * t).collect();
        let r = measure_frequency(&t2, &phi, 0.3).unwrap();
        assert!((r.omega - 0.5 * base.omega).abs() < 1e-12);
    }

    #[test]
    fn transient_is_flagged() {
        let t: Vec<f64> = (0..100).map(|k| k as f64).collect();
        let phi: Vec<f64> = t.iter().map(|t| -0.01 * t * t).collect();
        assert!(measure_frequency(&t, &phi, 0.5).unwrap().transient);
    }

    fn grid() -> Grid2D {
        Grid2D::square(128, 40.0).unwrap()
    }

    #[test]
    fn linear_field_has_only_first_modes() {
        let g = Grid2D::square(96, 60.0).unwrap();
        // a smooth window keeps x periodic without changing it near the centre
        let f = ScalarField::from_fn(g, |x, y| x * (-(x * x + y * y) / 20.0).exp());
        let p = polar_decompose(&f, (0.0, 0.0), 4, 16, PolarMethod::Circles).unwrap();
        for (b, &r) in p.radii.iter().enumerate() {
            let want = 0.5 * r * (-(r * r) / 20.0).exp();
            assert!((p.mode(1).unwrap()[b].re - want).abs() < 1e-9, "r = {r}");
            assert!((p.mode(-1).unwrap()[b] - p.mode(1).unwrap()[b].conj()).norm() < 1e-10);
            for n in [0, 2, 3, 4] {
                assert!(p.mode(n).unwrap()[b].norm() < 1e-9);
            }
        }
    }

    #[test]
    fn radial_gaussian_is_mode_zero() {
        let f = ScalarField::from_fn(grid(), |x, y| (-(x * x + y * y) / 10.0).exp());
        for method in [PolarMethod::Circles, PolarMethod::Annuli] {
            let p = polar_decompose(&f, (0.0, 0.0), 8, 0, method).unwrap();
            let weighted = |m: &[Complex]| -> f64 { m.iter().zip(&p.radii).map(|(c, r)| c.norm_sqr() * r).sum() };
            let e0 = weighted(p.mode(0).unwrap());
            let total: f64 = p.modes.iter().map(|m| weighted(m)).sum();
            assert!(e0 / total >= 0.999, "{method:?}");
            if method == PolarMethod::Circles {
                for n in 1..=8 {
                    for (b, c) in p.mode(n).unwrap().iter().enumerate() {
                        assert!(c.norm() <= 1e-10 * p.mode(0).unwrap()[b].norm().max(1e-300) + 1e-14);
                    }
                }
                assert!(anisotropy(&p, 3.0).unwrap() < 1e-12);
            }
        }
    }

    // h(r) (1 + r^4 cos 4 theta / 32): f_4 = r^4 h / 64, anisotropy r^8 / 2048
    fn petal(x: f64, y: f64) -> f64 {
        let r2 = x * x + y * y;
        let re_z4 = x.powi(4) - 6.0 * x * x * y * y + y.powi(4);
        (1.0 + re_z4 / 32.0) * (-r2 / 8.0).exp()
    }

    #[test]
    fn petal_modes_and_anisotropy() {
        let f = ScalarField::from_fn(grid(), petal);
        let p = polar_decompose(&f, (0.0, 0.0), 8, 0, PolarMethod::Circles).unwrap();
        for (b, &r) in p.radii.iter().enumerate().skip(2) {
            let h = (-(r * r) / 8.0).exp();
            if h < 1e-4 {
                break;
            }
            let want = r.powi(4) * h / 64.0;
            assert!((p.mode(4).unwrap()[b].re - want).abs() < 1e-9, "r = {r}");
            assert!(p.mode(2).unwrap()[b].norm() < 1e-9);
            assert!((anisotropy(&p, r).unwrap() - r.powi(8) / 2048.0).abs() < 1e-8 * r.powi(8).max(1.0), "r = {r}");
        }
    }

    #[test]
    fn annuli_agree_with_circles_roughly() {
        let f = ScalarField::from_fn(grid(), petal);
        let a = polar_decompose(&f, (0.0, 0.0), 8, 0, PolarMethod::Annuli).unwrap();
        let c = polar_decompose(&f, (0.0, 0.0), 8, 0, PolarMethod::Circles).unwrap();
        let peak = c.mode(4).unwrap().iter().map(|v| v.norm()).fold(0.0, f64::max);
        for b in 10..40 {
            let da = a.mode(4).unwrap()[b].re;
            let dc = c.mode(4).unwrap()[b].re;
            assert!((da - dc).abs() < 0.05 * peak, "bin {b}: {da} vs {dc}");
            assert!((a.mode(0).unwrap()[b] - c.mode(0).unwrap()[b]).norm() < 0.05 * peak);
        }
    }

    #[test]
    fn anisotropy_is_rotation_invariant() {
        let g = grid();
        let f = ScalarField::from_fn(g, |x, y| petal(x - 0.3 * y, y) + 0.2 * x * (-(x * x + y * y) / 6.0).exp());
        let rot = ScalarField::from_fn(g, |x, y| petal(y - 0.3 * -x, -x) + 0.2 * y * (-(x * x + y * y) / 6.0).exp());
        let pa = polar_decompose(&f, (0.0, 0.0), 8, 0, PolarMethod::Annuli).unwrap();
        let pb = polar_decompose(&rot, (0.0, 0.0), 8, 0, PolarMethod::Annuli).unwrap();
        for r in [2.0, 4.0, 6.0] {
            let a = anisotropy(&pa, r).unwrap();
            let b = anisotropy(&pb, r).unwrap();
            assert!((a - b).abs() < 1e-9 * a.max(1.0), "{a} vs {b}");
        }
    }

    #[test]
    fn parseval_consistency() {
        let g = grid();
        let f = ScalarField::from_fn(g, |x, y| {
            let r2 = x * x + y * y;
            (1.0 + 0.3 * x / 4.0 + (x.powi(4) - 6.0 * x * x * y * y + y.powi(4)) / 2000.0) * (-r2 / 24.0).exp()
        });
        // lattice rings oversample the axes, which the angle weights undo
        // but the plain grid sum does not
        for (method, tol) in [(PolarMethod::Circles, 0.01), (PolarMethod::Annuli, 0.03)] {
            let p = polar_decompose(&f, (0.0, 0.0), 8, 0, method).unwrap();
            let rmax = p.radii.last().unwrap() + 0.5 * p.dr;
            let mut binned = 0.0;
            for j in 0..g.ny() {
                for i in 0..g.nx() {
                    if g.x(i).hypot(g.y(j)) < rmax {
                        binned += f.get(i, j).powi(2) * g.cell_area();
                    }
                }
            }
            let e = p.mode_energy();
            assert!((e - binned).abs() < tol * binned, "{method:?}: {e} vs {binned}");
        }
    }

    #[test]
    fn empty_annuli_are_invalid() {
        let f = ScalarField::from_fn(grid(), |x, _| x);
        let p = polar_decompose(&f, (0.0, 0.0), 2, 8, PolarMethod::Annuli).unwrap();
        assert!(p.valid.iter().all(|v| *v));
        assert!(polar_decompose(&f, (0.0, 0.0), 2, 4, PolarMethod::Annuli).is_err());
        assert!(polar_decompose(&f, (30.0, 0.0), 2, 8, PolarMethod::Annuli).is_err());
        let zero = ScalarField::zeros(*f.grid());
        let pz = polar_decompose(&zero, (0.0, 0.0), 2, 8, PolarMethod::Circles).unwrap();
        assert!(anisotropy(&pz, 1.0).is_err());
    }

    #[test]
    fn wavenumber_of_line_and_bessel_profile() {
        let r: Vec<f64> = (1..400).map(|k| 0.25 * k as f64).collect();
        let y: Vec<f64> = r.iter().map(|r| 0.1 * r + 3.0).collect();
        let f = measure_wavenumber(&r, &y, 0.1, None, 100.0).unwrap();
        assert!((f.k - 0.1).abs() < 1e-12);
        let y: Vec<f64> = r.iter().map(|r| -bessel_k0(0.1 * r).unwrap().ln()).collect();
        let f = measure_wavenumber(&r, &y, 0.1, None, 100.0).unwrap();
        assert!((f.k - 0.1).abs() < 0.002, "{}", f.k);
        assert!(measure_wavenumber(&r, &y, 0.1, None, 60.0).is_err());
        assert!(measure_wavenumber(&r, &y, 0.1, Some((10.0, 50.0)), 100.0).is_err());
    }

    #[test]
    fn exact_power_law() {
        let r: Vec<f64> = (10..=100).map(|k| k as f64).collect();
        let y: Vec<f64> = r.iter().map(|r| 2.0 * r.powf(-0.5)).collect();
        let d = decay_fit(&r, &y, (10.0, 100.0), &DecayOptions::default()).unwrap();
        assert!((d.delta - 0.5).abs() < 1e-6);
        assert!((d.prefactor - 2.0).abs() < 1e-6);
        assert!(!d.sign_changes);
    }

    #[test]
    fn envelope_power_law() {
        let r: Vec<f64> = (0..=4000).map(|k| 10.0 + 0.05 * k as f64).collect();
        let y: Vec<f64> = r.iter().map(|r| r.powf(-0.5) * (1.0 + 0.1 * r.sin())).collect();
        let opts = DecayOptions {
            envelope: true,
            ..Default::default()
        };
        let d = decay_fit(&r, &y, (10.0, 210.0), &opts).unwrap();
        assert!((d.delta - 0.5).abs() < 0.05, "{}", d.delta);
        let osc: Vec<f64> = r.iter().map(|r| r.powf(-0.5) * r.sin()).collect();
        assert!(decay_fit(&r, &osc, (10.0, 210.0), &DecayOptions::default()).unwrap().sign_changes);
    }

    #[test]
    fn offset_power_law() {
        let r: Vec<f64> = (0..200).map(|k| 5.0 + 0.25 * k as f64).collect();
        let y: Vec<f64> = r.iter().map(|r| 4.0 - 1.5 * r.powf(-0.7)).collect();
        let opts = DecayOptions {
            offset: true,
            ..Default::default()
        };
        let d = decay_fit(&r, &y, (5.0, 60.0), &opts).unwrap();
        assert!((d.offset - 4.0).abs() < 1e-6, "{}", d.offset);
        assert!((d.delta - 0.7).abs() < 1e-5);
        assert!((d.prefactor - 1.5).abs() < 1e-4);
    }

    #[test]
    fn gaussian_weighted_norm() {
        let g = Grid2D::square(128, 16.0).unwrap();
        let f = ScalarField::from_fn(g, |x, y| (-(x * x + y * y)).exp());
        let want = (PI / 2.0).sqrt();
        assert!((weighted_norm(&f, (0.0, 0.0), 0.0) - want).abs() < 1e-10);
        let r: Vec<f64> = (0..=4000).map(|k| k as f64 * 0.002).collect();
        let psi: Vec<f64> = r.iter().map(|r| (-(r * r)).exp()).collect();
        assert!((weighted_norm_radial(&r, &psi, 0.0) - want).abs() < 1e-6);
        assert!(weighted_norm(&f, (0.0, 0.0), 1.0) > want);
    }
}
