//! Frequency predictions for a localized radial forcing: the inner
//! expansion and its core radius `r_c`, the matched formula, a shooting
//! solver for the radial wavenumber problem, the Hopf-Cole Schrodinger
//! ground state, and the coefficients of the intermediate approximation.

use std::f64::consts::PI;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::forcing::ForcingSpec;
use crate::kernels::{validate_hypotheses, KernelRole, KernelSymbol};
use crate::ode::{dopri45, OdeOptions, OdeOutcome, Trajectory};
use crate::quadrature::integrate;
use crate::spectral::{apply_symbol, Complex, Grid2D};
use crate::special::{outer_wavenumber, radial_eikonal_residual, EULER_GAMMA};

/// Radius where the integral fixed-point form hands over to the ODE solver.
pub const INNER_SWITCH_RADIUS: f64 = 0.1;
const INNER_POINTS: usize = 2000;
const RC_TOL: f64 = 1e-6;

/// Sampled radial wavenumber `zeta = d phi / dr`.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct RadialSolution {
    pub r: Vec<f64>,
    pub zeta: Vec<f64>,
    pub omega: f64,
    /// Mismatch against the outer profile at the last node; zero for
    /// solutions without an outer boundary condition.
    pub boundary_residual: f64,
}

fn radial_profile(forcing: &ForcingSpec) -> Result<impl Fn(f64) -> f64 + '_> {
    if !forcing.is_radial() {
        return Err(Error::contract(format!(
            "forcing `{}` is not radially symmetric; the inner expansion is radial only",
            forcing.name()
        )));
    }
    Ok(move |r: f64| forcing.radial_value(r).unwrap())
}

/// First-order inner wavenumber `zeta_1(r) = -(1/r) int_0^r g(s) s ds` at
/// the given radii.
pub fn inner_zeta1(forcing: &ForcingSpec, radii: &[f64]) -> Result<RadialSolution> {
    let _ = radial_profile(forcing)?;
    let mut zeta = Vec::with_capacity(radii.len());
    for &r in radii {
        if r < 0.0 {
            return Err(Error::domain(format!("negative radius {r}")));
        }
        zeta.push(if r == 0.0 { 0.0 } else { -forcing.radial_moment(r)? / r });
    }
    Ok(RadialSolution {
        r: radii.to_vec(),
        zeta,
        omega: 0.0,
        boundary_residual: 0.0,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoreRadius {
    pub r_c: f64,
    /// Change between the last two extrapolated estimates of `ln r_c`.
    pub tail_change: f64,
    /// Largest radius used.
    pub radius: f64,
}

/// Core radius from `ln r_c = lim [ln r - (1/M^2) int_0^r zeta_1^2 s ds]`,
/// evaluated at doubling radii with Aitken extrapolation of the tail.
pub fn inner_rc(forcing: &ForcingSpec) -> Result<CoreRadius> {
    let g = radial_profile(forcing)?;
    let m = forcing.mass()?;
    if m == 0.0 {
        return Err(Error::domain("core radius needs a nonzero mass"));
    }
    // moment(s) = int_0^s g t dt, integrated piecewise so each call is short
    let moment = |a: f64, base: f64, s: f64| -> f64 {
        base + integrate(|t| g(t) * t, a, s, 1e-16, 1e-12).unwrap_or(f64::NAN)
    };
    let mut radius = 2.0;
    let mut integral = 0.0;
    let mut lo = 0.0;
    let mut base = 0.0;
    let mut estimates: Vec<f64> = Vec::new();
    let mut extrapolated: Vec<f64> = Vec::new();
    for _ in 0..40 {
        let piece = integrate(
            |s| {
                if s == 0.0 {
                    return 0.0;
                }
                let q = moment(lo, base, s);
                q * q / s
            },
            lo,
            radius,
            1e-16,
            1e-12,
        )?;
        integral += piece;
        base = moment(lo, base, radius);
        lo = radius;
        estimates.push(radius.ln() - integral / (m * m));
        let n = estimates.len();
        if n >= 3 {
            let (a, b, c) = (estimates[n - 3], estimates[n - 2], estimates[n - 1]);
            let d2 = c - 2.0 * b + a;
            let aitken = if d2.abs() > 1e-300 && ((c - b) / (b - a)).abs() < 0.9 {
                c - (c - b) * (c - b) / d2
            } else {
                c
            };
            extrapolated.push(aitken);
        }
        if n >= 2 && (estimates[n - 1] - estimates[n - 2]).abs() < RC_TOL * 1e-2 {
            return Ok(CoreRadius {
                r_c: estimates[n - 1].exp(),
                tail_change: (estimates[n - 1] - estimates[n - 2]).abs(),
                radius,
            });
        }
        let k = extrapolated.len();
        if k >= 2 && (extrapolated[k - 1] - extrapolated[k - 2]).abs() < RC_TOL {
            return Ok(CoreRadius {
                r_c: extrapolated[k - 1].exp(),
                tail_change: (extrapolated[k - 1] - extrapolated[k - 2]).abs(),
                radius,
            });
        }
        radius *= 2.0;
    }
    Err(Error::NoConvergence(format!(
        "core-radius limit did not settle up to r = {radius}; last estimates {:?}",
        &estimates[estimates.len().saturating_sub(3)..]
    )))
}

/// Matched prediction `lambda = 2 e^{-gamma} exp(1/(eps M)) / r_c`, `omega = lambda^2`.
pub fn matched_omega(eps: f64, mass: f64, r_c: f64) -> Result<(f64, f64)> {
    if !(eps * mass < 0.0) {
        return Err(Error::domain(format!(
            "eps * M = {} is not negative; there is no pacemaker",
            eps * mass
        )));
    }
    if !(r_c > 0.0) {
        return Err(Error::domain(format!("core radius must be positive, got {r_c}")));
    }
    let lambda = 2.0 * (-EULER_GAMMA).exp() * (1.0 / (eps * mass)).exp() / r_c;
    Ok((lambda, lambda * lambda))
}

fn check_pacemaker(eps: f64, forcing: &ForcingSpec) -> Result<f64> {
    let m = forcing.mass()?;
    if !(eps * m < 0.0) {
        return Err(Error::domain(format!(
            "eps * M = {} is not negative; no bound state exists",
            eps * m
        )));
    }
    Ok(m)
}

/// Solves `(r zeta)' = r (zeta^2 - eps g - omega)` on `[0, r0]` by fixed-point
/// iteration with the trapezoid rule.
fn inner_start(g: &dyn Fn(f64) -> f64, eps: f64, omega: f64, r0: f64, n: usize) -> (Vec<f64>, Vec<f64>) {
    let h = r0 / n as f64;
    let r: Vec<f64> = (0..=n).map(|i| i as f64 * h).collect();
    let src: Vec<f64> = r.iter().map(|&s| -(eps * g(s) + omega)).collect();
    let mut zeta = vec![0.0; n + 1];
    for _ in 0..200 {
        let terms: Vec<f64> = (0..=n).map(|i| r[i] * (zeta[i] * zeta[i] + src[i])).collect();
        let mut acc = 0.0;
        let mut change = 0.0f64;
        for i in 1..=n {
            acc += 0.5 * h * (terms[i - 1] + terms[i]);
            let z = acc / r[i];
            change = change.max((z - zeta[i]).abs());
            zeta[i] = z;
        }
        if change <= 1e-17 {
            break;
        }
    }
    (r, zeta)
}

fn shoot_once(
    g: &dyn Fn(f64) -> f64,
    eps: f64,
    omega: f64,
    radius: f64,
    record: bool,
) -> Result<(f64, RadialSolution)> {
    let (mut r, mut zeta) = inner_start(g, eps, omega, INNER_SWITCH_RADIUS, INNER_POINTS);
    let z0 = *zeta.last().unwrap();
    let opts = OdeOptions {
        blow_up: 1e3,
        ..OdeOptions::default()
    };
    let mut tr = Trajectory::default();
    let out = dopri45(
        |s, z| z * z - z / s - eps * g(s) - omega,
        INNER_SWITCH_RADIUS,
        z0,
        radius,
        &opts,
        if record { Some(&mut tr) } else { None },
    )?;
    let target = omega.sqrt() * outer_wavenumber(omega.sqrt() * radius)?;
    let mismatch = match out {
        OdeOutcome::Reached(z) => z - target,
        OdeOutcome::BlowUp { y, .. } => {
            if y > 0.0 {
                f64::INFINITY
            } else {
                f64::NEG_INFINITY
            }
        }
    };
    if record {
        r.extend(tr.t.iter().skip(1));
        zeta.extend(tr.y.iter().skip(1));
    }
    Ok((
        mismatch,
        RadialSolution {
            r,
            zeta,
            omega,
            boundary_residual: mismatch,
        },
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ShootResult {
    pub omega: f64,
    pub mismatch: f64,
    pub radius: f64,
    pub bracket: (f64, f64),
    pub solution: RadialSolution,
}

/// Default outer radius for the radial solvers: six decay lengths of the
/// predicted outer solution, at least 20.
pub fn default_radius(omega_guess: f64) -> f64 {
    (6.0 / omega_guess.sqrt()).max(20.0)
}

/// Frequency from the radial problem `zeta' + zeta/r - zeta^2 + eps g = -omega`,
/// regular at the origin and matched to `sqrt(omega) K1/K0(sqrt(omega) r)`
/// at `radius`, by bisection in `ln omega`. `None` for the radius picks
/// [`default_radius`] from the matched prediction.
pub fn shoot_omega(eps: f64, forcing: &ForcingSpec, radius: Option<f64>) -> Result<ShootResult> {
    let g = radial_profile(forcing)?;
    if eps == 0.0 {
        return Ok(ShootResult {
            omega: 0.0,
            mismatch: 0.0,
            radius: radius.unwrap_or(0.0),
            bracket: (0.0, 0.0),
            solution: RadialSolution::default(),
        });
    }
    let m = check_pacemaker(eps, forcing)?;
    let rc = inner_rc(forcing)?.r_c;
    let (_, guess) = matched_omega(eps, m, rc)?;
    let radius = radius.unwrap_or_else(|| default_radius(guess));
    let mut lo = guess * 1e-2;
    let mut hi = guess * 1e2;
    let f_lo = shoot_once(&g, eps, lo, radius, false)?.0;
    let f_hi = shoot_once(&g, eps, hi, radius, false)?.0;
    if !(f_lo > 0.0 && f_hi < 0.0) {
        return Err(Error::NoConvergence(format!(
            "no sign change of the boundary mismatch on omega in [{lo:e}, {hi:e}] \
             (mismatch {f_lo:e}, {f_hi:e}); try a larger radius or |eps|"
        )));
    }
    let bracket = (lo, hi);
    let mut best = (f64::INFINITY, hi);
    for _ in 0..200 {
        let mid = (0.5 * (lo.ln() + hi.ln())).exp();
        let f = shoot_once(&g, eps, mid, radius, false)?.0;
        if f.abs() < best.0 {
            best = (f.abs(), mid);
        }
        if f > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if f.abs() < 1e-12 || (hi - lo) <= 4.0 * f64::EPSILON * hi {
            break;
        }
    }
    let omega = best.1;
    let (mismatch, solution) = shoot_once(&g, eps, omega, radius, true)?;
    Ok(ShootResult {
        omega,
        mismatch,
        radius,
        bracket,
        solution,
    })
}

/// Finite-volume discretization of `-(1/r)(r u')' + V u` on `[0, radius]`,
/// regular at the origin, `u(radius) = 0`, on cells with faces
/// `sinh(a k / n)`, symmetrized by the cell volumes.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialOperator {
    /// Cell centres.
    pub nodes: Vec<f64>,
    /// Cell volumes `int r dr`.
    pub volumes: Vec<f64>,
    pub diag: Vec<f64>,
    /// `off[i]` couples cells `i` and `i + 1`.
    pub off: Vec<f64>,
}

pub fn radial_operator(potential: &dyn Fn(f64) -> f64, radius: f64, n: usize) -> Result<RadialOperator> {
    if n < 4 || !(radius > 0.0) {
        return Err(Error::contract("radial operator needs n >= 4 and a positive radius"));
    }
    let scale = 1.0;
    let a = (radius / scale).asinh();
    let faces: Vec<f64> = (0..=n)
        .map(|k| if k == n { radius } else { scale * (a * k as f64 / n as f64).sinh() })
        .collect();
    let nodes: Vec<f64> = faces.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
    let volumes: Vec<f64> = faces.windows(2).map(|w| 0.5 * (w[1] * w[1] - w[0] * w[0])).collect();
    let mut a_diag = vec![0.0; n];
    let mut a_off = vec![0.0; n - 1];
    for i in 0..n - 1 {
        let c = faces[i + 1] / (nodes[i + 1] - nodes[i]);
        a_diag[i] += c;
        a_diag[i + 1] += c;
        a_off[i] = -c;
    }
    a_diag[n - 1] += radius / (radius - nodes[n - 1]);
    for i in 0..n {
        let v = potential(nodes[i]);
        if !v.is_finite() {
            return Err(Error::domain(format!("potential is not finite at r = {}", nodes[i])));
        }
        a_diag[i] += volumes[i] * v;
    }
    let diag: Vec<f64> = (0..n).map(|i| a_diag[i] / volumes[i]).collect();
    let off: Vec<f64> = (0..n - 1)
        .map(|i| a_off[i] / (volumes[i] * volumes[i + 1]).sqrt())
        .collect();
    Ok(RadialOperator {
        nodes,
        volumes,
        diag,
        off,
    })
}

impl RadialOperator {
    /// Number of eigenvalues below `x` (Sturm count).
    pub fn count_below(&self, x: f64) -> usize {
        let mut count = 0;
        let mut d = self.diag[0] - x;
        if d < 0.0 {
            count += 1;
        }
        for i in 1..self.diag.len() {
            let prev = if d == 0.0 { f64::EPSILON * self.off[i - 1].abs().max(1e-300) } else { d };
            d = self.diag[i] - x - self.off[i - 1] * self.off[i - 1] / prev;
            if d < 0.0 {
                count += 1;
            }
        }
        count
    }

    /// Smallest eigenvalue by bisection on the Sturm count.
    pub fn lowest_eigenvalue(&self) -> f64 {
        let n = self.diag.len();
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..n {
            let r = if i > 0 { self.off[i - 1].abs() } else { 0.0 } + if i + 1 < n { self.off[i].abs() } else { 0.0 };
            lo = lo.min(self.diag[i] - r);
            hi = hi.max(self.diag[i] + r);
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.count_below(mid) >= 1 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        0.5 * (lo + hi)
    }

    /// Eigenvector for an eigenvalue estimate by inverse iteration, scaled
    /// to unit Euclidean norm with a positive first entry.
    pub fn eigenvector(&self, eigenvalue: f64) -> Vec<f64> {
        let n = self.diag.len();
        let shift = eigenvalue - 1e-9 * eigenvalue.abs().max(1e-6);
        let mut x = vec![1.0; n];
        for _ in 0..4 {
            // Thomas algorithm on (B - shift I) y = x
            let mut c = vec![0.0; n];
            let mut d = vec![0.0; n];
            let mut denom = self.diag[0] - shift;
            c[0] = if n > 1 { self.off[0] / denom } else { 0.0 };
            d[0] = x[0] / denom;
            for i in 1..n {
                denom = self.diag[i] - shift - self.off[i - 1] * c[i - 1];
                if i + 1 < n {
                    c[i] = self.off[i] / denom;
                }
                d[i] = (x[i] - self.off[i - 1] * d[i - 1]) / denom;
            }
            let mut y = vec![0.0; n];
            y[n - 1] = d[n - 1];
            for i in (0..n - 1).rev() {
                y[i] = d[i] - c[i] * y[i + 1];
            }
            let norm = y.iter().map(|v| v * v).sum::<f64>().sqrt();
            let sign = if y[0] < 0.0 { -1.0 } else { 1.0 };
            x = y.into_iter().map(|v| sign * v / norm).collect();
        }
        x
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroundState {
    pub energy: f64,
    pub nodes: Vec<f64>,
    /// Symmetrized eigenvector (`sqrt(volume) u`), unit norm.
    pub eigenvector: Vec<f64>,
}

/// Lowest eigenvalue of `-Delta + V` for a radial potential on `[0, radius]`
/// with a Dirichlet wall, on `n` cells.
pub fn radial_ground_state(potential: &dyn Fn(f64) -> f64, radius: f64, n: usize) -> Result<GroundState> {
    let op = radial_operator(potential, radius, n)?;
    let energy = op.lowest_eigenvalue();
    let eigenvector = op.eigenvector(energy);
    if eigenvector.iter().any(|v| !(*v > 0.0)) {
        return Err(Error::NoConvergence(format!(
            "ground-state eigenvector for E = {energy} changes sign"
        )));
    }
    Ok(GroundState {
        energy,
        nodes: op.nodes,
        eigenvector,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SchrodingerResult {
    pub omega: f64,
    /// Ground energies on `n` and `2n` cells.
    pub energy_coarse: f64,
    pub energy_fine: f64,
    pub radius: f64,
    pub cells: usize,
}

/// Frequency `omega = -E_0` of `-Delta + eps g`, Richardson-extrapolated
/// from `n` and `2n` cells.
pub fn schrodinger_ground(eps: f64, forcing: &ForcingSpec, radius: Option<f64>, n: usize) -> Result<SchrodingerResult> {
    let g = radial_profile(forcing)?;
    if eps == 0.0 {
        return Ok(SchrodingerResult {
            omega: 0.0,
            energy_coarse: 0.0,
            energy_fine: 0.0,
            radius: radius.unwrap_or(0.0),
            cells: n,
        });
    }
    let m = check_pacemaker(eps, forcing)?;
    let radius = match radius {
        Some(r) => r,
        None => default_radius(matched_omega(eps, m, inner_rc(forcing)?.r_c)?.1),
    };
    let potential = |r: f64| eps * g(r);
    let coarse = radial_ground_state(&potential, radius, n)?;
    let fine = radial_ground_state(&potential, radius, 2 * n)?;
    if !(fine.energy < 0.0) {
        return Err(Error::NoConvergence(format!(
            "no negative eigenvalue (E_0 = {}); enlarge the domain or check eps * M < 0",
            fine.energy
        )));
    }
    let extrapolated = (4.0 * fine.energy - coarse.energy) / 3.0;
    Ok(SchrodingerResult {
        omega: -extrapolated,
        energy_coarse: coarse.energy,
        energy_fine: fine.energy,
        radius,
        cells: n,
    })
}

/// Coefficients `a_0` and `a_alpha`, `0 < |alpha| <= order`, of the
/// intermediate approximation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IntermediateCoeffs {
    pub eps: f64,
    pub a0: f64,
    /// Highest order admitted by the decay weight of the forcing.
    pub max_order: usize,
    /// `(alpha, a_alpha)` for `alpha = -order..=order`, zero excluded.
    pub coeffs: Vec<(i32, (f64, f64))>,
}

impl IntermediateCoeffs {
    pub fn get(&self, alpha: i32) -> Option<Complex> {
        self.coeffs
            .iter()
            .find(|(a, _)| *a == alpha)
            .map(|(_, (re, im))| Complex::new(*re, *im))
    }
}

/// Highest angular order `m` with `sigma` in `(m + 1, m + 2)`.
pub fn admissible_order(sigma: f64) -> usize {
    (sigma.ceil() - 2.0).max(0.0) as usize
}

fn is_identity(sym: &KernelSymbol) -> bool {
    (0..=200).all(|k| sym.eval(k as f64 * 0.5) == 1.0)
}

/// `a_0 = -eps M` and
/// `a_alpha = eps / (2 pi |alpha|) int (P * g) r^|alpha| e^{i alpha theta} dA`
/// with the preconditioner `P`. An identity preconditioner uses polar
/// quadrature of the closed form; any other is applied spectrally on `grid`.
pub fn intermediate_coeffs(
    eps: f64,
    forcing: &ForcingSpec,
    precond: &KernelSymbol,
    order: usize,
    grid: Option<&Grid2D>,
) -> Result<IntermediateCoeffs> {
    let max_order = admissible_order(forcing.sigma());
    if order > max_order {
        return Err(Error::contract(format!(
            "angular order {order} exceeds m = {max_order} allowed by the decay weight sigma = {} \
             (sigma must lie in (m + 1, m + 2))",
            forcing.sigma()
        )));
    }
    if precond.eval(0.0) != 1.0 {
        return Err(Error::contract(format!(
            "preconditioner `{}` does not have average one",
            precond.name()
        )));
    }
    let a0 = -eps * forcing.mass()?;
    let mut coeffs = Vec::new();
    let quadrature = is_identity(precond) && forcing.has_closed_form();
    let smoothed = if quadrature || order == 0 {
        None
    } else {
        let grid = grid.ok_or_else(|| {
            Error::contract("a non-identity preconditioner needs a grid for the convolution")
        })?;
        Some(apply_symbol(&forcing.sample(grid)?, |xi| precond.eval(xi))?)
    };
    for alpha in (-(order as i32)..=order as i32).filter(|a| *a != 0) {
        let moment = match &smoothed {
            None => forcing.angular_moment(alpha)?,
            Some(field) => {
                let grid = field.grid();
                let mut acc = Complex::new(0.0, 0.0);
                let p = alpha.unsigned_abs() as i32;
                for j in 0..grid.ny() {
                    for i in 0..grid.nx() {
                        let (x, y) = (grid.x(i), grid.y(j));
                        let z = Complex::new(x, if alpha > 0 { y } else { -y });
                        acc += z.powi(p) * field.get(i, j);
                    }
                }
                acc * grid.cell_area()
            }
        };
        let a = moment * (eps / (2.0 * PI * alpha.unsigned_abs() as f64));
        coeffs.push((alpha, (a.re, a.im)));
    }
    Ok(IntermediateCoeffs {
        eps,
        a0,
        max_order,
        coeffs,
    })
}

/// Largest radial residual of `psi'' + psi'/r - (psi')^2` for
/// `psi = -ln(1 - a0 ln r)` on `[r_lo, r_hi]`, by finite differences.
pub fn intermediate_residual(a0: f64, r_lo: f64, r_hi: f64, samples: usize) -> Result<f64> {
    if !(r_lo > 0.0) || !(r_hi > r_lo) {
        return Err(Error::domain(format!("bad radial window [{r_lo}, {r_hi}]")));
    }
    if a0 == 0.0 {
        return Ok(0.0);
    }
    for r in [r_lo, r_hi] {
        if 1.0 - a0 * r.ln() <= 0.1 {
            return Err(Error::domain(format!(
                "1 - a0 ln r = {} at r = {r}; the window reaches the singularity at r = {}",
                1.0 - a0 * r.ln(),
                (1.0 / a0).exp()
            )));
        }
    }
    let psi = |r: f64| -(1.0 - a0 * r.ln()).ln();
    let mut worst = 0.0f64;
    let n = samples.max(2);
    for k in 0..n {
        let r = r_lo * (r_hi / r_lo).powf(k as f64 / (n - 1) as f64);
        let h = 2e-3 * r;
        worst = worst.max(radial_eikonal_residual(psi, r, h, 0.0).abs());
    }
    Ok(worst)
}

/// Rejects linear kernels that violate the structural hypotheses behind
/// the predictions.
pub fn check_prediction_kernel(l: &KernelSymbol) -> Result<()> {
    if l.role() != KernelRole::Linear {
        return Err(Error::contract(format!("`{}` is not a linear kernel", l.name())));
    }
    let report = validate_hypotheses(l);
    match report.checks.iter().find(|c| !c.passed) {
        None => Ok(()),
        Some(c) => Err(Error::contract(format!(
            "kernel `{}` fails `{}` (witness {}); frequency predictions do not apply",
            l.name(),
            c.name,
            c.witness
        ))),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AsymptoticsOptions {
    pub shoot_radius: Option<f64>,
    pub schrodinger_radius: Option<f64>,
    pub schrodinger_cells: usize,
}

impl Default for AsymptoticsOptions {
    fn default() -> Self {
        AsymptoticsOptions {
            shoot_radius: None,
            schrodinger_radius: None,
            schrodinger_cells: 2000,
        }
    }
}

/// All frequency estimates for one forcing and `eps`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AsymptoticsResult {
    pub eps: f64,
    pub mass: f64,
    /// `-M`.
    pub a01: f64,
    /// `-eps M`.
    pub a0: f64,
    pub r_c: f64,
    pub lambda_matched: f64,
    pub omega_matched: f64,
    pub omega_shoot: f64,
    pub omega_schrodinger: f64,
    pub shoot_mismatch: f64,
    pub shoot_radius: f64,
    pub schrodinger_radius: f64,
    pub schrodinger_cells: usize,
    pub rc_tail_change: f64,
}

pub fn analyze(eps: f64, forcing: &ForcingSpec, opts: &AsymptoticsOptions) -> Result<AsymptoticsResult> {
    let mass = forcing.mass()?;
    let rc = inner_rc(forcing)?;
    let (lambda, omega_matched) = if eps == 0.0 { (0.0, 0.0) } else { matched_omega(eps, mass, rc.r_c)? };
    let shoot = shoot_omega(eps, forcing, opts.shoot_radius)?;
    let schrod = schrodinger_ground(eps, forcing, opts.schrodinger_radius, opts.schrodinger_cells)?;
    Ok(AsymptoticsResult {
        eps,
        mass,
        a01: -mass,
        a0: -eps * mass,
        r_c: rc.r_c,
        lambda_matched: lambda,
        omega_matched,
        omega_shoot: shoot.omega,
        omega_schrodinger: schrod.omega,
        shoot_mismatch: shoot.mismatch,
        shoot_radius: shoot.radius,
        schrodinger_radius: schrod.radius,
        schrodinger_cells: schrod.cells,
        rc_tail_change: rc.tail_change,
    })
}
