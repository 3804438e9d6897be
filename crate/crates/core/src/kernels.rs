//! Radial coupling kernels given by their Fourier symbols in `xi = |k|^2`.
//!
//! Linear kernels `L` vanish to first order at the origin with slope `-1`;
//! smoothing kernels `J` have unit mass, `J(0) = 1`.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::spectral::Grid2D;

/// Default sampled strip half-width.
pub const DEFAULT_STRIP_HALF_WIDTH: f64 = 0.5;
/// Default upper end of the band on which extra zeros are searched for.
pub const DEFAULT_INVERT_THRESHOLD: f64 = 10.0;

const SLOPE_STEP: f64 = 1e-4;
const SLOPE_TOL: f64 = 1e-6;
const ZERO_SCAN_POINTS: usize = 4000;

/// Catalog names, in the order they are listed in error messages.
pub const KERNEL_NAMES: [&str; 7] = [
    "laplacian",
    "rational",
    "ks",
    "identity",
    "bessel-smoother",
    "gaussian",
    "reduction",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelRole {
    /// The linear operator `L`.
    Linear,
    /// The gradient smoother `J`.
    Smoothing,
    /// The preconditioner built from an `L`.
    Preconditioner,
}

type SymbolFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

#[derive(Clone)]
pub struct KernelSymbol {
    name: String,
    params: Vec<(String, f64)>,
    role: KernelRole,
    multiplicity: u32,
    strip_half_width: f64,
    invert_threshold: f64,
    time_integrable: bool,
    eval: SymbolFn,
}

impl fmt::Debug for KernelSymbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("KernelSymbol")
            .field("name", &self.name)
            .field("params", &self.params)
            .field("role", &self.role)
            .field("multiplicity", &self.multiplicity)
            .finish()
    }
}

impl KernelSymbol {
    /// A kernel from an arbitrary symbol. Linear kernels are declared with
    /// multiplicity one; [`validate_hypotheses`] checks the claim.
    pub fn custom(
        name: impl Into<String>,
        role: KernelRole,
        f: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        KernelSymbol {
            name: name.into(),
            params: Vec::new(),
            role,
            multiplicity: if role == KernelRole::Linear { 1 } else { 0 },
            strip_half_width: DEFAULT_STRIP_HALF_WIDTH,
            invert_threshold: DEFAULT_INVERT_THRESHOLD,
            time_integrable: true,
            eval: Arc::new(f),
        }
    }

    pub fn eval(&self, xi: f64) -> f64 {
        (self.eval)(xi)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn params(&self) -> &[(String, f64)] {
        &self.params
    }

    pub fn role(&self) -> KernelRole {
        self.role
    }

    /// Order of the zero at `xi = 0`; zero for kernels that do not vanish there.
    pub fn multiplicity(&self) -> u32 {
        self.multiplicity
    }

    pub fn strip_half_width(&self) -> f64 {
        self.strip_half_width
    }

    pub fn invert_threshold(&self) -> f64 {
        self.invert_threshold
    }

    pub fn with_invert_threshold(mut self, xi_m: f64) -> Self {
        self.invert_threshold = xi_m;
        self
    }

    /// False for symbols that are not localized enough to drive a simulation.
    pub fn time_integrable(&self) -> bool {
        self.time_integrable
    }

    /// Symbol values at every grid wavenumber, row-major.
    pub fn on_grid(&self, grid: &Grid2D) -> Result<Vec<f64>> {
        grid.xi_values()
            .into_iter()
            .map(|xi| {
                let v = self.eval(xi);
                if v.is_finite() {
                    Ok(v)
                } else {
                    Err(Error::NonFiniteSymbol {
                        name: self.name.clone(),
                        xi,
                    })
                }
            })
            .collect()
    }
}

fn take_params(
    name: &str,
    given: &[(&str, f64)],
    allowed: &[(&str, f64)],
) -> Result<Vec<(String, f64)>> {
    for (key, _) in given {
        if !allowed.iter().any(|(a, _)| a == key) {
            let known: Vec<&str> = allowed.iter().map(|(a, _)| *a).collect();
            return Err(Error::contract(format!(
                "kernel `{name}` has no parameter `{key}` (accepts: {})",
                if known.is_empty() { "none".to_string() } else { known.join(", ") }
            )));
        }
    }
    Ok(allowed
        .iter()
        .map(|(key, default)| {
            let v = given
                .iter()
                .rev()
                .find(|(k, _)| k == key)
                .map(|(_, v)| *v)
                .unwrap_or(*default);
            (key.to_string(), v)
        })
        .collect())
}

/// Looks up a kernel by name. Parameters: `gaussian` takes `sigma`
/// (default 1), `reduction` takes `b1`, `b2` (default 1, 1).
pub fn kernel_catalog(name: &str, params: &[(&str, f64)]) -> Result<KernelSymbol> {
    let (role, allowed): (KernelRole, &[(&str, f64)]) = match name {
        "laplacian" | "rational" | "ks" => (KernelRole::Linear, &[]),
        "identity" | "bessel-smoother" => (KernelRole::Smoothing, &[]),
        "gaussian" => (KernelRole::Smoothing, &[("sigma", 1.0)]),
        "reduction" => (KernelRole::Smoothing, &[("b1", 1.0), ("b2", 1.0)]),
        _ => {
            return Err(Error::Unknown {
                kind: "kernel",
                name: name.to_string(),
                known: KERNEL_NAMES.join(", "),
            })
        }
    };
    let params = take_params(name, params, allowed)?;
    let p = |i: usize| params[i].1;
    let eval: SymbolFn = match name {
        "laplacian" => Arc::new(|xi| -xi),
        "rational" => Arc::new(|xi| -xi / (1.0 + xi)),
        "ks" => Arc::new(|xi| xi - xi * xi),
        "identity" => Arc::new(|_| 1.0),
        "bessel-smoother" => Arc::new(|xi| 1.0 / (1.0 + xi)),
        "gaussian" => {
            let sigma = p(0);
            if !(sigma > 0.0) || !sigma.is_finite() {
                return Err(Error::contract(format!("gaussian kernel needs sigma > 0, got {sigma}")));
            }
            Arc::new(move |xi| (-0.5 * xi * sigma * sigma).exp())
        }
        "reduction" => {
            let (b1, b2) = (p(0), p(1));
            if !(b1 >= 0.0 && b2 >= 0.0) {
                return Err(Error::contract(format!(
                    "reduction kernel needs b1, b2 >= 0, got {b1}, {b2}"
                )));
            }
            Arc::new(move |xi| (b1 + 3.0 * b2 * xi).sqrt())
        }
        _ => unreachable!(),
    };
    Ok(KernelSymbol {
        name: name.to_string(),
        params,
        role,
        multiplicity: if role == KernelRole::Linear { 1 } else { 0 },
        strip_half_width: DEFAULT_STRIP_HALF_WIDTH,
        invert_threshold: DEFAULT_INVERT_THRESHOLD,
        time_integrable: name != "reduction",
        eval,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct HypothesisCheck {
    pub name: &'static str,
    pub passed: bool,
    pub witness: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HypothesisReport {
    pub kernel: String,
    pub checks: Vec<HypothesisCheck>,
    /// Zeros of the symbol found on `(0, xi_m]`, excluding the origin.
    pub zeros: Vec<f64>,
}

impl HypothesisReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&self, name: &str) -> Option<&HypothesisCheck> {
        self.checks.iter().find(|c| c.name == name)
    }
}

fn bisect_zero(f: &dyn Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let mut flo = f(lo);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let fm = f(mid);
        if fm == 0.0 {
            return mid;
        }
        if (fm > 0.0) == (flo > 0.0) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-15 * hi.abs().max(1.0) {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// Zeros of `f` on `(0, xi_m]`, located by a sign scan and bisection.
fn scan_zeros(f: &dyn Fn(f64) -> f64, xi_m: f64) -> Vec<f64> {
    let mut zeros = Vec::new();
    let first = xi_m / ZERO_SCAN_POINTS as f64;
    let mut prev_x = first * 1e-3;
    let mut prev = f(prev_x);
    for k in 1..=ZERO_SCAN_POINTS {
        let x = first * k as f64;
        let v = f(x);
        if v == 0.0 {
            zeros.push(x);
        } else if prev != 0.0 && (v > 0.0) != (prev > 0.0) {
            zeros.push(bisect_zero(f, prev_x, x));
        }
        prev_x = x;
        prev = v;
    }
    zeros
}

/// Samples the symbol on `[0, xi_m]` and checks the structural hypotheses.
/// Failures are recorded in the report, never raised.
pub fn validate_hypotheses(sym: &KernelSymbol) -> HypothesisReport {
    let f = |xi: f64| sym.eval(xi);
    let xi_m = sym.invert_threshold;
    let mut checks = Vec::new();
    let mut zeros = Vec::new();

    let mut max_abs = 0.0f64;
    let mut finite = true;
    for k in 0..=ZERO_SCAN_POINTS {
        let v = f(xi_m * k as f64 / ZERO_SCAN_POINTS as f64);
        finite &= v.is_finite();
        max_abs = max_abs.max(v.abs());
    }

    match sym.role {
        KernelRole::Linear => {
            let at0 = f(0.0);
            checks.push(HypothesisCheck {
                name: "vanishes_at_origin",
                passed: at0.abs() <= 1e-14,
                witness: at0,
            });
            let h = SLOPE_STEP;
            let slope = (-3.0 * at0 + 4.0 * f(h) - f(2.0 * h)) / (2.0 * h);
            checks.push(HypothesisCheck {
                name: "unit_slope",
                passed: (slope + 1.0).abs() <= SLOPE_TOL,
                witness: slope,
            });
            zeros = scan_zeros(&f, xi_m);
            checks.push(HypothesisCheck {
                name: "no_extra_zeros",
                passed: zeros.is_empty(),
                witness: zeros.first().copied().unwrap_or(f64::NAN),
            });
        }
        KernelRole::Smoothing | KernelRole::Preconditioner => {
            let at0 = f(0.0);
            checks.push(HypothesisCheck {
                name: "unit_mass",
                passed: at0 == 1.0,
                witness: at0,
            });
        }
    }
    checks.push(HypothesisCheck {
        name: "bounded",
        passed: finite,
        witness: max_abs,
    });
    HypothesisReport {
        kernel: sym.name.clone(),
        checks,
        zeros,
    }
}

/// The preconditioner `-xi / L(xi)`, continued by 1 at the origin, so that
/// composing it with `L` gives the Laplacian.
pub fn precondition_symbol(l: &KernelSymbol) -> Result<KernelSymbol> {
    if l.role != KernelRole::Linear {
        return Err(Error::contract(format!(
            "preconditioner needs a linear kernel, `{}` is not one",
            l.name
        )));
    }
    let report = validate_hypotheses(l);
    for c in &report.checks {
        if !c.passed {
            return Err(Error::contract(format!(
                "kernel `{}` fails `{}` (witness {}); the preconditioner would be unbounded",
                l.name, c.name, c.witness
            )));
        }
    }
    let inner = l.eval.clone();
    Ok(KernelSymbol {
        name: format!("precond({})", l.name),
        params: l.params.clone(),
        role: KernelRole::Preconditioner,
        multiplicity: 0,
        strip_half_width: l.strip_half_width,
        invert_threshold: l.invert_threshold,
        time_integrable: true,
        eval: Arc::new(move |xi| if xi == 0.0 { 1.0 } else { -xi / inner(xi) }),
    })
}
