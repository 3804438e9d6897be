//! Run-level analysis: frequency, far-field wavenumber and anisotropy of a
//! finished simulation, and the frequency comparison table of a sweep.

use serde::Serialize;

use crate::asymptotics::{analyze, AsymptoticsOptions, AsymptoticsResult};
use crate::config::{AnalysisConfig, SimConfig};
use crate::diagnostics::{
    anisotropy_band, least_squares, measure_frequency, measure_wavenumber, polar_decompose, usable_radius,
    FrequencyFit, PolarMethod, RadialProfile, WavenumberFit,
};
use crate::forcing::ForcingSpec;
use crate::integrator::{resolve, run_with, RunOutput, SimState};
use crate::io::{fmt_f64, total_phase, CsvTable};
use crate::special::core_ansatz;
use crate::{gradient, Error, Result, ScalarField};

#[derive(Debug, Clone, Serialize)]
pub struct RunAnalysis {
    pub frequency: FrequencyFit,
    /// `None` when the measured frequency is not positive or the fitting
    /// window does not fit inside the usable radius.
    pub wavenumber: Option<WavenumberFit>,
    pub radii: Vec<f64>,
    /// Angular mean of the total phase.
    pub phase_profile: Vec<f64>,
    /// Angular mean of `|grad phi|`.
    pub slope_profile: Vec<f64>,
    /// `(r, A(r))` of `|grad phi|`, evaluated per bin.
    pub anisotropy: Vec<(f64, f64)>,
}

impl RunAnalysis {
    /// Radial profile table: `r, phi0, grad_abs0, anisotropy`.
    pub fn profile_table(&self) -> Result<CsvTable> {
        let mut t = CsvTable::new(&["r", "phi0", "grad_abs0", "anisotropy"]);
        for (b, r) in self.radii.iter().enumerate() {
            let a = self.anisotropy.get(b).map(|p| p.1).unwrap_or(f64::NAN);
            t.push_f64(&[*r, self.phase_profile[b], self.slope_profile[b], a])?;
        }
        Ok(t)
    }
}

/// Magnitude of the gradient of the total phase.
pub fn gradient_magnitude(state: &SimState) -> Result<ScalarField> {
    let (gx, gy) = gradient(&state.phi);
    let (qx, qy) = state.q;
    gx.zip_with(&gy, |a, b| ((a + qx).powi(2) + (b + qy).powi(2)).sqrt())
}

fn mode0(profile: &RadialProfile) -> Vec<f64> {
    profile.mode(0).map(|m| m.iter().map(|c| c.re).collect()).unwrap_or_default()
}

/// Per-bin anisotropy, skipping bins where the mean vanishes.
pub fn anisotropy_curve(profile: &RadialProfile) -> Vec<(f64, f64)> {
    let half = 0.5 * profile.dr;
    profile
        .radii
        .iter()
        .map(|&r| (r, anisotropy_band(profile, r - half, r + half).unwrap_or(f64::NAN)))
        .collect()
}

/// Analyses the probe series (first probe) and the final state about the
/// domain centre.
pub fn analyze_run(out: &RunOutput, analysis: &AnalysisConfig) -> Result<RunAnalysis> {
    let series = out
        .probes
        .first()
        .ok_or_else(|| Error::contract("run has no probes to measure a frequency from"))?;
    let frequency = measure_frequency(&out.times, series, analysis.window_fraction)?;
    analyze_state(&out.final_state, frequency, analysis)
}

/// As [`analyze_run`] with the frequency already measured.
pub fn analyze_state(state: &SimState, frequency: FrequencyFit, analysis: &AnalysisConfig) -> Result<RunAnalysis> {
    let grid = *state.phi.grid();
    let phase = total_phase(state);
    let pp = polar_decompose(&phase, (0.0, 0.0), analysis.n_max, analysis.nbins, PolarMethod::Circles)?;
    let grad = gradient_magnitude(state)?;
    let gp = polar_decompose(&grad, (0.0, 0.0), analysis.n_max, analysis.nbins, PolarMethod::Circles)?;
    let phase_profile = mode0(&pp);
    let wavenumber = if frequency.omega > 0.0 {
        measure_wavenumber(&pp.radii, &phase_profile, frequency.omega.sqrt(), None, usable_radius(&grid)).ok()
    } else {
        None
    };
    Ok(RunAnalysis {
        frequency,
        wavenumber,
        radii: pp.radii.clone(),
        phase_profile,
        slope_profile: mode0(&gp),
        anisotropy: anisotropy_curve(&gp),
    })
}

/// Angular RMS of `phi - psi_0(lambda r) - c` per bin of a phase profile,
/// where `psi_0` is the cut-off core ansatz and `c` is the mean radial
/// remainder over the bins with `lambda r >= 2`.
pub fn ansatz_residual(profile: &RadialProfile, lambda: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    let f0 = mode0(profile);
    let mut radial = Vec::with_capacity(f0.len());
    for (r, v) in profile.radii.iter().zip(&f0) {
        radial.push(v - core_ansatz(lambda, *r)?);
    }
    let far: Vec<f64> = profile
        .radii
        .iter()
        .zip(&radial)
        .filter(|(r, _)| lambda * **r >= 2.0)
        .map(|(_, v)| *v)
        .collect();
    if far.is_empty() {
        return Err(Error::domain(format!(
            "no bins beyond the core radius 2 / lambda = {}",
            2.0 / lambda
        )));
    }
    let c = far.iter().sum::<f64>() / far.len() as f64;
    let n_max = profile.n_max as i32;
    let amp = (0..profile.radii.len())
        .map(|b| {
            let rest: f64 = (-n_max..=n_max)
                .filter(|n| *n != 0)
                .filter_map(|n| profile.mode(n))
                .map(|m| m[b].norm_sqr())
                .sum();
            ((radial[b] - c).powi(2) + rest).sqrt()
        })
        .collect();
    Ok((profile.radii.clone(), amp))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub eps: f64,
    pub mass: f64,
    pub r_c: f64,
    pub omega_matched: f64,
    pub omega_shoot: f64,
    pub omega_schrod: f64,
    /// NaN unless the row was simulated.
    pub omega_measured: f64,
    pub k_inf: f64,
    /// RMS residual of the frequency fit; NaN unless simulated.
    pub fit_residuals: f64,
}

pub const SWEEP_COLUMNS: [&str; 9] = [
    "eps",
    "M",
    "r_c",
    "omega_matched",
    "omega_shoot",
    "omega_schrod",
    "omega_measured",
    "k_inf",
    "fit_residuals",
];

impl SweepRow {
    pub fn from_prediction(p: &AsymptoticsResult) -> Self {
        SweepRow {
            eps: p.eps,
            mass: p.mass,
            r_c: p.r_c,
            omega_matched: p.omega_matched,
            omega_shoot: p.omega_shoot,
            omega_schrod: p.omega_schrodinger,
            omega_measured: f64::NAN,
            k_inf: f64::NAN,
            fit_residuals: f64::NAN,
        }
    }

    fn values(&self) -> [f64; 9] {
        [
            self.eps,
            self.mass,
            self.r_c,
            self.omega_matched,
            self.omega_shoot,
            self.omega_schrod,
            self.omega_measured,
            self.k_inf,
            self.fit_residuals,
        ]
    }
}

pub fn sweep_table(rows: &[SweepRow]) -> Result<CsvTable> {
    let mut t = CsvTable::new(&SWEEP_COLUMNS);
    for r in rows {
        t.push_f64(&r.values())?;
    }
    Ok(t)
}

pub fn asymptotics_options(analysis: &AnalysisConfig) -> AsymptoticsOptions {
    AsymptoticsOptions {
        shoot_radius: analysis.shoot_radius,
        schrodinger_radius: analysis.schrod_radius,
        schrodinger_cells: analysis.schrod_cells,
    }
}

/// Oracle predictions for one `eps`.
pub fn oracle_row(eps: f64, forcing: &ForcingSpec, analysis: &AnalysisConfig) -> Result<SweepRow> {
    Ok(SweepRow::from_prediction(&analyze(eps, forcing, &asymptotics_options(analysis))?))
}

/// Least-squares line `ln omega = slope / eps + intercept`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScalingFit {
    pub slope: f64,
    pub intercept: f64,
    pub residual: f64,
}

pub fn scaling_fit(eps: &[f64], omega: &[f64]) -> Result<ScalingFit> {
    if eps.len() != omega.len() || eps.len() < 2 {
        return Err(Error::contract("scaling fit needs at least two (eps, omega) pairs"));
    }
    if let Some(w) = omega.iter().find(|w| !(**w > 0.0)) {
        return Err(Error::domain(format!("cannot take the logarithm of omega = {w}")));
    }
    let x: Vec<f64> = eps.iter().map(|e| 1.0 / e).collect();
    let y: Vec<f64> = omega.iter().map(|w| w.ln()).collect();
    let (c, residual) = least_squares(&[x, vec![1.0; eps.len()]], &y)?;
    Ok(ScalingFit {
        slope: c[0],
        intercept: c[1],
        residual,
    })
}

pub fn scaling_table(fit: &ScalingFit, column: &str) -> Result<CsvTable> {
    let mut t = CsvTable::new(&["column", "slope", "intercept", "residual"]);
    t.push(vec![column.to_string(), fmt_f64(fit.slope), fmt_f64(fit.intercept), fmt_f64(fit.residual)])?;
    Ok(t)
}

/// A sweep row with the simulation behind it, if any.
pub type SweepMember = (SweepRow, Option<RunOutput>);

/// One member of a sweep: the predictions, and when `simulate` is set a
/// simulation of `sim` at this `eps` with its measurements.
pub fn sweep_member(sim: &SimConfig, analysis: &AnalysisConfig, eps: f64, simulate: bool) -> Result<SweepMember> {
    let res = resolve(sim)?;
    let mut row = oracle_row(eps, &res.forcing, analysis)?;
    if !simulate {
        return Ok((row, None));
    }
    let mut cfg = sim.clone();
    cfg.eps = eps;
    let out = run_with(&cfg, &res)?;
    let a = analyze_run(&out, analysis)?;
    row.omega_measured = a.frequency.omega;
    row.fit_residuals = a.frequency.residual;
    row.k_inf = a.wavenumber.as_ref().map(|w| w.k).unwrap_or(f64::NAN);
    Ok((row, Some(out)))
}

/// Runs [`sweep_member`] for every `eps` on up to `workers` threads; rows
/// come back in input order.
pub fn sweep(
    sim: &SimConfig,
    analysis: &AnalysisConfig,
    simulate: bool,
    workers: usize,
) -> Result<Vec<SweepMember>> {
    let eps = &analysis.epsilons;
    let workers = workers.max(1).min(eps.len().max(1));
    let mut slots: Vec<Option<Result<SweepMember>>> = (0..eps.len()).map(|_| None).collect();
    std::thread::scope(|s| {
        for (w, chunk) in slots.chunks_mut(eps.len().div_ceil(workers).max(1)).enumerate() {
            let start = w * eps.len().div_ceil(workers).max(1);
            s.spawn(move || {
                for (k, slot) in chunk.iter_mut().enumerate() {
                    *slot = Some(sweep_member(sim, analysis, eps[start + k], simulate));
                }
            });
        }
    });
    slots.into_iter().map(|s| s.expect("every sweep member runs")).collect()
}
