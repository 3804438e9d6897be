//! Localized inhomogeneities `g(x, y)` centred at the origin of the
//! periodic domain, with their mass `M = (1/2 pi) int g`.

use std::f64::consts::PI;
use std::fmt;
use std::sync::{Arc, OnceLock};

use crate::error::{Error, Result};
use crate::quadrature::{integrate, integrate_to_infinity};
use crate::spectral::{Complex, Grid2D, ScalarField};

pub const FORCING_NAMES: [&str; 4] = ["g1", "g2", "gaussian", "dipole-test"];

const ANGLES: usize = 128;
const ABS_TOL: f64 = 1e-15;
const REL_TOL: f64 = 1e-13;

type RadialFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

#[derive(Clone)]
enum Shape {
    Anisotropic,
    Petal,
    Gaussian { amplitude: f64, width: f64 },
    Dipole,
    Radial(RadialFn),
    Field(ScalarField),
}

#[derive(Clone)]
pub struct ForcingSpec {
    name: String,
    params: Vec<(String, f64)>,
    shape: Shape,
    sigma: f64,
    mass: OnceLock<f64>,
}

impl fmt::Debug for ForcingSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ForcingSpec")
            .field("name", &self.name)
            .field("params", &self.params)
            .field("sigma", &self.sigma)
            .finish()
    }
}

/// Grid-sum estimate of the mass together with a bound on its error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridMass {
    pub value: f64,
    /// Mass of `|g|` outside the inscribed disk plus the change between
    /// the sums on the grid and on its every-other-point subgrid.
    pub bound: f64,
}

/// Forcings by name. `gaussian` takes `amplitude` (default -2) and
/// `width` (default 1): `amplitude * exp(-r^2 / width^2)`.
pub fn forcing_catalog(name: &str, params: &[(&str, f64)]) -> Result<ForcingSpec> {
    let allowed: &[(&str, f64)] = match name {
        "g1" | "g2" | "dipole-test" => &[],
        "gaussian" => &[("amplitude", -2.0), ("width", 1.0)],
        _ => {
            return Err(Error::Unknown {
                kind: "forcing",
                name: name.to_string(),
                known: FORCING_NAMES.join(", "),
            })
        }
    };
    for (key, _) in params {
        if !allowed.iter().any(|(a, _)| a == key) {
            return Err(Error::contract(format!("forcing `{name}` has no parameter `{key}`")));
        }
    }
    let params: Vec<(String, f64)> = allowed
        .iter()
        .map(|(k, d)| {
            let v = params.iter().rev().find(|(p, _)| p == k).map(|(_, v)| *v).unwrap_or(*d);
            (k.to_string(), v)
        })
        .collect();
    let (shape, sigma) = match name {
        "g1" => (Shape::Anisotropic, 1.9),
        "g2" => (Shape::Petal, 1.9),
        "dipole-test" => (Shape::Dipole, 4.9),
        _ => {
            let (amplitude, width) = (params[0].1, params[1].1);
            if !amplitude.is_finite() || !(width > 0.0) || !width.is_finite() {
                return Err(Error::contract(format!(
                    "gaussian forcing needs finite amplitude and width > 0, got {amplitude}, {width}"
                )));
            }
            (Shape::Gaussian { amplitude, width }, 10.0)
        }
    };
    Ok(ForcingSpec {
        name: name.to_string(),
        params,
        shape,
        sigma,
        mass: OnceLock::new(),
    })
}

impl ForcingSpec {
    /// A radially symmetric forcing from its profile; `sigma` is the decay weight.
    pub fn radial(
        name: impl Into<String>,
        profile: impl Fn(f64) -> f64 + Send + Sync + 'static,
        sigma: f64,
    ) -> Self {
        ForcingSpec {
            name: name.into(),
            params: Vec::new(),
            shape: Shape::Radial(Arc::new(profile)),
            sigma,
            mass: OnceLock::new(),
        }
    }

    /// A forcing given only by its samples; usable on that grid alone.
    pub fn from_field(name: impl Into<String>, field: ScalarField) -> Self {
        ForcingSpec {
            name: name.into(),
            params: Vec::new(),
            shape: Shape::Field(field),
            sigma: 10.0,
            mass: OnceLock::new(),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn params(&self) -> &[(String, f64)] {
        &self.params
    }

    /// Decay weight: `g` lies in the weighted space with `(1 + r^2)^(sigma/2)`.
    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn is_radial(&self) -> bool {
        matches!(self.shape, Shape::Gaussian { .. } | Shape::Radial(_))
    }

    pub fn has_closed_form(&self) -> bool {
        !matches!(self.shape, Shape::Field(_))
    }

    /// Closed-form value at `(x, y)`; `None` for sampled forcings.
    pub fn value(&self, x: f64, y: f64) -> Option<f64> {
        let r2 = x * x + y * y;
        let r = r2.sqrt();
        Some(match &self.shape {
            Shape::Anisotropic => (1.0 + 3.0 * x * x + y * y).powf(-1.5),
            Shape::Petal => {
                let theta = y.atan2(x);
                (1.0 + (4.0 * theta).cos()) / (1.0 + r).powi(3)
            }
            Shape::Gaussian { amplitude, width } => amplitude * (-r2 / (width * width)).exp(),
            Shape::Dipole => {
                let c = if r > 0.0 { x / r } else { 1.0 };
                c * (1.0 + r).powi(-6)
            }
            Shape::Radial(f) => f(r),
            Shape::Field(_) => return None,
        })
    }

    /// Radial profile `g(r)` for radially symmetric forcings.
    pub fn radial_value(&self, r: f64) -> Option<f64> {
        match &self.shape {
            Shape::Gaussian { .. } | Shape::Radial(_) => self.value(r, 0.0),
            _ => None,
        }
    }

    /// Samples on the grid, with the origin at the domain centre.
    pub fn sample(&self, grid: &Grid2D) -> Result<ScalarField> {
        if let Shape::Field(f) = &self.shape {
            if f.grid() != grid {
                return Err(Error::contract(format!(
                    "forcing `{}` was sampled on a {}x{} grid, requested {}x{}",
                    self.name,
                    f.grid().nx(),
                    f.grid().ny(),
                    grid.nx(),
                    grid.ny()
                )));
            }
            return Ok(f.clone());
        }
        ScalarField::new(
            *grid,
            (0..grid.ny())
                .flat_map(|j| (0..grid.nx()).map(move |i| (i, j)))
                .map(|(i, j)| self.value(grid.x(i), grid.y(j)).unwrap_or(f64::NAN))
                .collect(),
        )
    }

    fn polar(&self, weight: impl Fn(f64, f64) -> Complex, r_min: f64) -> Result<Complex> {
        let mut total = Complex::new(0.0, 0.0);
        for k in 0..ANGLES {
            let theta = 2.0 * PI * k as f64 / ANGLES as f64;
            let (s, c) = theta.sin_cos();
            let radial = |part: fn(Complex) -> f64| {
                integrate_to_infinity(
                    |r| self.value(r * c, r * s).unwrap() * part(weight(r, theta)) * r,
                    r_min,
                    ABS_TOL,
                    REL_TOL,
                )
            };
            total += Complex::new(radial(|z| z.re)?, radial(|z| z.im)?);
        }
        Ok(total * (2.0 * PI / ANGLES as f64))
    }

    fn check_integrable(&self) -> Result<()> {
        if !(self.sigma > 1.0) {
            return Err(Error::domain(format!(
                "forcing `{}` decays too slowly to be integrable (sigma = {})",
                self.name, self.sigma
            )));
        }
        Ok(())
    }

    /// Mass by polar quadrature of the closed form, or by grid sum for
    /// sampled forcings.
    pub fn mass(&self) -> Result<f64> {
        if let Some(m) = self.mass.get() {
            return Ok(*m);
        }
        self.check_integrable()?;
        let m = match &self.shape {
            Shape::Field(f) => f.integral() / (2.0 * PI),
            _ if self.is_radial() => {
                integrate_to_infinity(|r| self.radial_value(r).unwrap() * r, 0.0, ABS_TOL, REL_TOL)?
            }
            _ => self.polar(|_, _| Complex::new(1.0, 0.0), 0.0)?.re / (2.0 * PI),
        };
        if !m.is_finite() {
            return Err(Error::domain(format!("mass of `{}` is not finite", self.name)));
        }
        Ok(*self.mass.get_or_init(|| m))
    }

    /// Mass from the sampled field on `grid`, with an error bound.
    pub fn mass_on_grid(&self, grid: &Grid2D) -> Result<GridMass> {
        self.check_integrable()?;
        let field = self.sample(grid)?;
        let value = field.integral() / (2.0 * PI);
        let mut coarse = 0.0;
        for j in (0..grid.ny()).step_by(2) {
            for i in (0..grid.nx()).step_by(2) {
                coarse += field.get(i, j);
            }
        }
        let coarse = coarse * 4.0 * grid.cell_area() / (2.0 * PI);
        let radius = 0.5 * grid.lx().min(grid.ly());
        let tail = if self.has_closed_form() {
            self.polar_abs(radius)? / (2.0 * PI)
        } else {
            0.0
        };
        Ok(GridMass {
            value,
            bound: tail + (value - coarse).abs(),
        })
    }

    fn polar_abs(&self, r_min: f64) -> Result<f64> {
        if self.is_radial() {
            return Ok(2.0
                * PI
                * integrate_to_infinity(|r| self.radial_value(r).unwrap().abs() * r, r_min, ABS_TOL, 1e-10)?);
        }
        let mut total = 0.0;
        for k in 0..ANGLES {
            let theta = 2.0 * PI * k as f64 / ANGLES as f64;
            let (s, c) = theta.sin_cos();
            total += integrate_to_infinity(|r| self.value(r * c, r * s).unwrap().abs() * r, r_min, ABS_TOL, 1e-10)?;
        }
        Ok(total * 2.0 * PI / ANGLES as f64)
    }

    /// `int g r^|alpha| e^{i alpha theta} dA` by polar quadrature.
    pub fn angular_moment(&self, alpha: i32) -> Result<Complex> {
        if !self.has_closed_form() {
            return Err(Error::contract(format!(
                "forcing `{}` has no closed form for quadrature",
                self.name
            )));
        }
        if self.is_radial() {
            if alpha != 0 {
                return Ok(Complex::new(0.0, 0.0));
            }
            return Ok(Complex::new(self.mass()? * 2.0 * PI, 0.0));
        }
        let p = alpha.unsigned_abs() as i32;
        self.polar(
            move |r, theta| Complex::from_polar(r.powi(p), alpha as f64 * theta),
            0.0,
        )
    }

    /// `int_0^r g(s) s ds` for radial forcings.
    pub fn radial_moment(&self, r: f64) -> Result<f64> {
        let g = |s: f64| self.radial_value(s).unwrap_or(f64::NAN) * s;
        if !self.is_radial() {
            return Err(Error::contract(format!("forcing `{}` is not radial", self.name)));
        }
        integrate(g, 0.0, r, ABS_TOL, REL_TOL)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn catalog_point_values() {
        let g1 = forcing_catalog("g1", &[]).unwrap();
        assert_eq!(g1.value(0.0, 0.0), Some(1.0));
        let g = forcing_catalog("gaussian", &[("amplitude", -2.0)]).unwrap();
        assert_eq!(g.radial_value(0.0), Some(-2.0));
        let g2 = forcing_catalog("g2", &[]).unwrap();
        let (s, c) = (PI / 4.0).sin_cos();
        for r in [0.5, 3.0, 40.0] {
            assert!(g2.value(r * c, r * s).unwrap().abs() < 1e-15);
        }
        assert!(forcing_catalog("g3", &[]).unwrap_err().to_string().contains("dipole-test"));
        assert!(forcing_catalog("g1", &[("amplitude", 1.0)]).is_err());
    }

    #[test]
    fn sample_is_centred_and_matches_closed_form() {
        let grid = Grid2D::square(64, 20.0).unwrap();
        for name in FORCING_NAMES {
            let f = forcing_catalog(name, &[]).unwrap();
            let s = f.sample(&grid).unwrap();
            for (j, i) in [(0, 0), (32, 32), (5, 41), (63, 17)] {
                let exact = f.value(grid.x(i), grid.y(j)).unwrap();
                assert!((s.get(i, j) - exact).abs() <= 1e-12 * exact.abs().max(1.0));
            }
        }
        let g1 = forcing_catalog("g1", &[]).unwrap().sample(&grid).unwrap();
        assert_eq!(g1.get(32, 32), 1.0);
    }

    /// Independent check: integrate in Cartesian coordinates, inner
    /// integral in y analytically where possible.
    #[test]
    fn masses_against_oracles() {
        let m = forcing_catalog("gaussian", &[]).unwrap().mass().unwrap();
        assert!((m + 1.0).abs() < 1e-12, "{m}");
        let m1 = forcing_catalog("g1", &[]).unwrap().mass().unwrap();
        // int dy (a^2 + y^2)^{-3/2} = 2 / a^2 with a^2 = 1 + 3x^2; then
        // (1/2pi) int 2 / (1 + 3x^2) dx = 1/sqrt(3)
        let cart = integrate_to_infinity(|x| 2.0 * 2.0 / (1.0 + 3.0 * x * x), 0.0, 1e-15, 1e-13).unwrap() / (2.0 * PI);
        assert!((cart - 1.0 / 3f64.sqrt()).abs() < 1e-11);
        assert!((m1 - cart).abs() < 1e-10, "{m1} vs {cart}");
        let m2 = forcing_catalog("g2", &[]).unwrap().mass().unwrap();
        assert!((m2 - 0.5).abs() < 1e-10, "{m2}");
        let md = forcing_catalog("dipole-test", &[]).unwrap().mass().unwrap();
        assert!(md.abs() < 1e-12);
    }

    #[test]
    fn grid_mass_within_reported_bound() {
        for name in ["gaussian", "g1", "g2"] {
            let f = forcing_catalog(name, &[]).unwrap();
            let exact = f.mass().unwrap();
            let mut last_err = f64::INFINITY;
            for (n, l) in [(64, 20.0), (128, 40.0), (256, 80.0)] {
                let grid = Grid2D::square(n, l).unwrap();
                let gm = f.mass_on_grid(&grid).unwrap();
                let err = (gm.value - exact).abs();
                assert!(err <= gm.bound + 1e-12, "{name} L={l}: err {err:e} bound {:e}", gm.bound);
                if name != "gaussian" {
                    assert!(err < last_err * 1.5);
                }
                last_err = err;
            }
        }
    }

    #[test]
    fn mass_is_linear() {
        let a = forcing_catalog("gaussian", &[("amplitude", 1.0)]).unwrap();
        let b = ForcingSpec::radial("poly", |r| (1.0 + r).powi(-4), 3.0);
        let combo = ForcingSpec::radial("combo", |r| 2.0 * (-r * r).exp() - 3.0 * (1.0 + r).powi(-4), 3.0);
        let lhs = combo.mass().unwrap();
        let rhs = 2.0 * a.mass().unwrap() - 3.0 * b.mass().unwrap();
        assert!((lhs - rhs).abs() < 1e-11);
    }

    #[test]
    fn slow_decay_is_rejected() {
        let f = ForcingSpec::radial("slow", |r| (1.0 + r).powi(-2), 0.9);
        assert!(matches!(f.mass(), Err(Error::Domain(_))));
    }

    #[test]
    fn dipole_moment() {
        let d = forcing_catalog("dipole-test", &[]).unwrap();
        let m1 = d.angular_moment(1).unwrap();
        assert!((m1.re - PI / 30.0).abs() < 1e-11 && m1.im.abs() < 1e-12, "{m1}");
        let mm1 = d.angular_moment(-1).unwrap();
        assert!((mm1 - m1.conj()).norm() < 1e-12);
        assert!(d.angular_moment(2).unwrap().norm() < 1e-12);
    }

    #[test]
    fn radial_moment_of_gaussian() {
        let g = forcing_catalog("gaussian", &[("amplitude", 1.0)]).unwrap();
        let v = g.radial_moment(1.0).unwrap();
        assert!((v - 0.5 * (1.0 - (-1f64).exp())).abs() < 1e-14);
        assert!(forcing_catalog("g2", &[]).unwrap().radial_moment(1.0).is_err());
    }
}
