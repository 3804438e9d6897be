//! Periodic 2-D grid, discrete Fourier transforms and symbol application.
//!
//! Layout: real samples are stored row-major with `x` fastest, i.e. the
//! sample at `(i, j)` (i along x, j along y) lives at `values[j * nx + i]`.
//! Spectral coefficients use the same layout; index `i` corresponds to the
//! signed frequency `wrap(i, nx)` (`i` for `i < nx/2`, `i - nx` otherwise).
//!
//! The forward transform is normalized by `1 / (nx * ny)` so the `(0, 0)`
//! coefficient is the spatial mean and Parseval reads
//! `sum |f|^2 / (nx * ny) == sum |c|^2`.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

pub type Complex = Complex64;

/// Geometry of a periodic rectangle `[-lx/2, lx/2) x [-ly/2, ly/2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid2D {
    nx: usize,
    ny: usize,
    lx: f64,
    ly: f64,
}

impl Grid2D {
    pub fn new(nx: usize, ny: usize, lx: f64, ly: f64) -> Result<Self> {
        for (name, n) in [("nx", nx), ("ny", ny)] {
            if n < 8 || n % 2 != 0 {
                return Err(Error::contract(format!(
                    "{name} must be an even integer >= 8, got {n}"
                )));
            }
        }
        for (name, l) in [("lx", lx), ("ly", ly)] {
            if !(l.is_finite() && l > 0.0) {
                return Err(Error::contract(format!("{name} must be positive, got {l}")));
            }
        }
        Ok(Self { nx, ny, lx, ly })
    }

    pub fn square(n: usize, l: f64) -> Result<Self> {
        Self::new(n, n, l, l)
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn lx(&self) -> f64 {
        self.lx
    }

    pub fn ly(&self) -> f64 {
        self.ly
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn dx(&self) -> f64 {
        self.lx / self.nx as f64
    }

    pub fn dy(&self) -> f64 {
        self.ly / self.ny as f64
    }

    pub fn cell_area(&self) -> f64 {
        self.dx() * self.dy()
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    /// Signed integer frequency of index `i` on an axis with `n` points.
    #[inline]
    pub fn wrap(i: usize, n: usize) -> i64 {
        if i < n / 2 {
            i as i64
        } else {
            i as i64 - n as i64
        }
    }

    #[inline]
    pub fn kx(&self, i: usize) -> f64 {
        2.0 * PI * Self::wrap(i, self.nx) as f64 / self.lx
    }

    #[inline]
    pub fn ky(&self, j: usize) -> f64 {
        2.0 * PI * Self::wrap(j, self.ny) as f64 / self.ly
    }

    /// `|k|^2` at spectral index `(i, j)`.
    #[inline]
    pub fn xi(&self, i: usize, j: usize) -> f64 {
        let (kx, ky) = (self.kx(i), self.ky(j));
        kx * kx + ky * ky
    }

    /// Physical x coordinate of column `i`.
    #[inline]
    pub fn x(&self, i: usize) -> f64 {
        -0.5 * self.lx + i as f64 * self.dx()
    }

    #[inline]
    pub fn y(&self, j: usize) -> f64 {
        -0.5 * self.ly + j as f64 * self.dy()
    }

    /// `|k|^2` for every spectral index, in storage order.
    pub fn xi_values(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.len());
        for j in 0..self.ny {
            for i in 0..self.nx {
                out.push(self.xi(i, j));
            }
        }
        out
    }

    pub fn xi_max(&self) -> f64 {
        let kx = PI * self.nx as f64 / self.lx;
        let ky = PI * self.ny as f64 / self.ly;
        kx * kx + ky * ky
    }

    /// True where the 2/3 rule keeps the coefficient.
    pub fn dealias_mask(&self) -> Vec<bool> {
        let mut out = Vec::with_capacity(self.len());
        for j in 0..self.ny {
            let wj = Self::wrap(j, self.ny).unsigned_abs() as usize;
            for i in 0..self.nx {
                let wi = Self::wrap(i, self.nx).unsigned_abs() as usize;
                out.push(3 * wi <= self.nx && 3 * wj <= self.ny);
            }
        }
        out
    }

    /// Wavevector components for spectral differentiation; the Nyquist
    /// entries are zeroed so derivatives of real fields stay real.
    pub fn diff_wavenumbers(&self) -> (Vec<f64>, Vec<f64>) {
        let kx = (0..self.nx)
            .map(|i| if i == self.nx / 2 { 0.0 } else { self.kx(i) })
            .collect();
        let ky = (0..self.ny)
            .map(|j| if j == self.ny / 2 { 0.0 } else { self.ky(j) })
            .collect();
        (kx, ky)
    }
}

impl Default for Grid2D {
    fn default() -> Self {
        Self {
            nx: 256,
            ny: 256,
            lx: 160.0,
            ly: 160.0,
        }
    }
}

fn check_len(grid: &Grid2D, len: usize) -> Result<()> {
    if len != grid.len() {
        return Err(Error::contract(format!(
            "field has {len} samples but grid is {}x{}",
            grid.nx(),
            grid.ny()
        )));
    }
    Ok(())
}

/// Real samples on a [`Grid2D`].
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    grid: Grid2D,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn new(grid: Grid2D, values: Vec<f64>) -> Result<Self> {
        check_len(&grid, values.len())?;
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::contract(format!("non-finite sample at index {k}")));
        }
        Ok(Self { grid, values })
    }

    pub fn zeros(grid: Grid2D) -> Self {
        Self {
            grid,
            values: vec![0.0; grid.len()],
        }
    }

    pub fn constant(grid: Grid2D, c: f64) -> Self {
        Self {
            grid,
            values: vec![c; grid.len()],
        }
    }

    /// Samples `f(x, y)` at every grid point.
    pub fn from_fn(grid: Grid2D, f: impl Fn(f64, f64) -> f64) -> Self {
        let mut values = Vec::with_capacity(grid.len());
        for j in 0..grid.ny() {
            let y = grid.y(j);
            for i in 0..grid.nx() {
                values.push(f(grid.x(i), y));
            }
        }
        Self { grid, values }
    }

    pub(crate) fn from_raw(grid: Grid2D, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        Self { grid, values }
    }

    pub fn grid(&self) -> &Grid2D {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[self.grid.index(i, j)]
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            grid: self.grid,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip_with(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        if self.grid != other.grid {
            return Err(Error::contract("fields live on different grids"));
        }
        Ok(Self {
            grid: self.grid,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    /// `max |self - other|`.
    pub fn max_diff(&self, other: &Self) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    /// Riemann sum of the field over the periodic cell.
    pub fn integral(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.grid.cell_area()
    }

    pub fn forward(&self) -> SpectralField {
        let mut data: Vec<Complex> = self.values.iter().map(|&v| Complex::new(v, 0.0)).collect();
        Fft2::new(&self.grid).forward(&mut data);
        SpectralField {
            grid: self.grid,
            coeffs: data,
        }
    }
}

/// Complex samples on a [`Grid2D`] (Stuart-Landau amplitudes, `exp(i phi)`).
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexField {
    grid: Grid2D,
    values: Vec<Complex>,
}

impl ComplexField {
    pub fn new(grid: Grid2D, values: Vec<Complex>) -> Result<Self> {
        check_len(&grid, values.len())?;
        Ok(Self { grid, values })
    }

    pub fn grid(&self) -> &Grid2D {
        &self.grid
    }

    pub fn values(&self) -> &[Complex] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Complex] {
        &mut self.values
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> Complex {
        self.values[self.grid.index(i, j)]
    }

    pub fn forward(&self) -> SpectralField {
        let mut data = self.values.clone();
        Fft2::new(&self.grid).forward(&mut data);
        SpectralField {
            grid: self.grid,
            coeffs: data,
        }
    }

    pub fn re(&self) -> ScalarField {
        ScalarField::from_raw(self.grid, self.values.iter().map(|c| c.re).collect())
    }

    pub fn im(&self) -> ScalarField {
        ScalarField::from_raw(self.grid, self.values.iter().map(|c| c.im).collect())
    }
}

/// Fourier coefficients of a field, normalized so `(0, 0)` is the mean.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralField {
    grid: Grid2D,
    coeffs: Vec<Complex>,
}

impl SpectralField {
    pub fn new(grid: Grid2D, coeffs: Vec<Complex>) -> Result<Self> {
        check_len(&grid, coeffs.len())?;
        Ok(Self { grid, coeffs })
    }

    pub fn grid(&self) -> &Grid2D {
        &self.grid
    }

    pub fn coeffs(&self) -> &[Complex] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [Complex] {
        &mut self.coeffs
    }

    /// Coefficient at signed frequency `(p, q)`.
    pub fn at(&self, p: i64, q: i64) -> Complex {
        let i = p.rem_euclid(self.grid.nx() as i64) as usize;
        let j = q.rem_euclid(self.grid.ny() as i64) as usize;
        self.coeffs[self.grid.index(i, j)]
    }

    /// Real part of the inverse transform.
    pub fn inverse(&self) -> ScalarField {
        let mut data = self.coeffs.clone();
        Fft2::new(&self.grid).inverse(&mut data);
        ScalarField::from_raw(self.grid, data.into_iter().map(|c| c.re).collect())
    }

    pub fn inverse_complex(&self) -> ComplexField {
        let mut data = self.coeffs.clone();
        Fft2::new(&self.grid).inverse(&mut data);
        ComplexField {
            grid: self.grid,
            values: data,
        }
    }

    /// `sum |c|^2`.
    pub fn energy(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm_sqr()).sum()
    }

    /// Largest `|c(-k) - conj(c(k))|` relative to the largest coefficient.
    pub fn conjugate_symmetry_error(&self) -> f64 {
        let (nx, ny) = (self.grid.nx(), self.grid.ny());
        let scale = self.coeffs.iter().fold(0.0f64, |m, c| m.max(c.norm()));
        if scale == 0.0 {
            return 0.0;
        }
        let mut worst = 0.0f64;
        for j in 0..ny {
            for i in 0..nx {
                let a = self.coeffs[self.grid.index(i, j)];
                let b = self.coeffs[self.grid.index((nx - i) % nx, (ny - j) % ny)];
                worst = worst.max((a - b.conj()).norm());
            }
        }
        worst / scale
    }

    /// Multiplies every coefficient by `s(|k|^2)`.
    pub fn apply_symbol(&self, name: &str, s: impl Fn(f64) -> f64) -> Result<Self> {
        let mut out = self.clone();
        for j in 0..self.grid.ny() {
            for i in 0..self.grid.nx() {
                let xi = self.grid.xi(i, j);
                let v = s(xi);
                if !v.is_finite() {
                    return Err(Error::NonFiniteSymbol {
                        name: name.to_string(),
                        xi,
                    });
                }
                out.coeffs[self.grid.index(i, j)] *= v;
            }
        }
        Ok(out)
    }
}

/// Applies a radial Fourier multiplier `s(|k|^2)` to a real field.
pub fn apply_symbol(field: &ScalarField, s: impl Fn(f64) -> f64) -> Result<ScalarField> {
    Ok(field.forward().apply_symbol("symbol", s)?.inverse())
}

/// Spectral gradient `(d/dx, d/dy)`.
pub fn gradient(field: &ScalarField) -> (ScalarField, ScalarField) {
    let spec = field.forward();
    let grid = *field.grid();
    let (kx, ky) = grid.diff_wavenumbers();
    // Both derivatives are real, so they share one complex inverse transform.
    let mut packed = spec.coeffs;
    for j in 0..grid.ny() {
        for i in 0..grid.nx() {
            let c = packed[grid.index(i, j)];
            let dx = Complex::new(0.0, kx[i]) * c;
            let dy = Complex::new(0.0, ky[j]) * c;
            packed[grid.index(i, j)] = dx + Complex::i() * dy;
        }
    }
    Fft2::new(&grid).inverse(&mut packed);
    let gx = packed.iter().map(|c| c.re).collect();
    let gy = packed.iter().map(|c| c.im).collect();
    (
        ScalarField::from_raw(grid, gx),
        ScalarField::from_raw(grid, gy),
    )
}

/// Spectral partial derivative of order `px` in x and `py` in y. Odd
/// orders drop the Nyquist mode.
pub fn partial(field: &ScalarField, px: u32, py: u32) -> ScalarField {
    let grid = *field.grid();
    let mut spec = field.forward();
    let (dkx, dky) = grid.diff_wavenumbers();
    let factor = |k: f64, kd: f64, p: u32| -> Complex {
        let k = if p % 2 == 1 { kd } else { k };
        Complex::new(0.0, k).powu(p)
    };
    for j in 0..grid.ny() {
        let fy = factor(grid.ky(j), dky[j], py);
        for i in 0..grid.nx() {
            spec.coeffs[grid.index(i, j)] *= factor(grid.kx(i), dkx[i], px) * fy;
        }
    }
    spec.inverse()
}

/// 2/3-rule truncation: zero every coefficient with `|wrap(i)| > nx/3` or
/// `|wrap(j)| > ny/3`.
pub fn dealias(spec: &SpectralField) -> SpectralField {
    let mask = spec.grid.dealias_mask();
    let mut out = spec.clone();
    for (c, keep) in out.coeffs.iter_mut().zip(mask) {
        if !keep {
            *c = Complex::new(0.0, 0.0);
        }
    }
    out
}

type Plan = Arc<dyn Fft<f64>>;

fn plans(n: usize) -> (Plan, Plan) {
    static CACHE: OnceLock<Mutex<(FftPlanner<f64>, HashMap<usize, (Plan, Plan)>)>> =
        OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new((FftPlanner::new(), HashMap::new())));
    let mut guard = cache.lock().unwrap_or_else(|e| e.into_inner());
    let (planner, map) = &mut *guard;
    if let Some(p) = map.get(&n) {
        return p.clone();
    }
    let p = (planner.plan_fft_forward(n), planner.plan_fft_inverse(n));
    map.insert(n, p.clone());
    p
}

/// Reusable 2-D transform with its own scratch buffers.
pub struct Fft2 {
    nx: usize,
    ny: usize,
    fwd_x: Plan,
    inv_x: Plan,
    fwd_y: Plan,
    inv_y: Plan,
    transposed: Vec<Complex>,
    scratch: Vec<Complex>,
}

impl Fft2 {
    pub fn new(grid: &Grid2D) -> Self {
        let (fwd_x, inv_x) = plans(grid.nx());
        let (fwd_y, inv_y) = plans(grid.ny());
        let scratch_len = [&fwd_x, &inv_x, &fwd_y, &inv_y]
            .iter()
            .map(|p| p.get_inplace_scratch_len())
            .max()
            .unwrap_or(0);
        Self {
            nx: grid.nx(),
            ny: grid.ny(),
            fwd_x,
            inv_x,
            fwd_y,
            inv_y,
            transposed: vec![Complex::new(0.0, 0.0); grid.len()],
            scratch: vec![Complex::new(0.0, 0.0); scratch_len],
        }
    }

    /// In-place forward transform including the `1/(nx*ny)` normalization.
    pub fn forward(&mut self, data: &mut [Complex]) {
        let (fx, fy) = (self.fwd_x.clone(), self.fwd_y.clone());
        self.run(data, &*fx, &*fy);
        let norm = 1.0 / (self.nx * self.ny) as f64;
        data.iter_mut().for_each(|c| *c *= norm);
    }

    /// In-place unnormalized inverse transform.
    pub fn inverse(&mut self, data: &mut [Complex]) {
        let (fx, fy) = (self.inv_x.clone(), self.inv_y.clone());
        self.run(data, &*fx, &*fy);
    }

    fn run(&mut self, data: &mut [Complex], fx: &dyn Fft<f64>, fy: &dyn Fft<f64>) {
        assert_eq!(data.len(), self.nx * self.ny, "buffer does not match grid");
        fx.process_with_scratch(data, &mut self.scratch);
        transpose(data, &mut self.transposed, self.nx, self.ny);
        fy.process_with_scratch(&mut self.transposed, &mut self.scratch);
        transpose(&self.transposed, data, self.ny, self.nx);
    }
}

/// `src` is `rows x cols` row-major; writes its transpose into `dst`.
fn transpose(src: &[Complex], dst: &mut [Complex], cols: usize, rows: usize) {
    const B: usize = 16;
    for rb in (0..rows).step_by(B) {
        for cb in (0..cols).step_by(B) {
            for r in rb..(rb + B).min(rows) {
                for c in cb..(cb + B).min(cols) {
                    dst[c * rows + r] = src[r * cols + c];
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn grid(n: usize, l: f64) -> Grid2D {
        Grid2D::square(n, l).unwrap()
    }

    fn random_field(g: Grid2D, seed: u64) -> ScalarField {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let v = (0..g.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        ScalarField::new(g, v).unwrap()
    }

    #[test]
    fn grid_rejects_odd_or_small_sizes() {
        assert!(Grid2D::new(7, 8, 1.0, 1.0).is_err());
        assert!(Grid2D::new(6, 8, 1.0, 1.0).is_err());
        assert!(Grid2D::new(8, 8, 0.0, 1.0).is_err());
        assert!(Grid2D::new(8, 8, 1.0, 1.0).is_ok());
    }

    #[test]
    fn xi_vanishes_only_at_origin() {
        let g = Grid2D::new(16, 8, 3.0, 5.0).unwrap();
        for j in 0..g.ny() {
            for i in 0..g.nx() {
                let xi = g.xi(i, j);
                assert!(xi >= 0.0);
                assert_eq!(xi == 0.0, i == 0 && j == 0);
            }
        }
    }

    #[test]
    fn constant_field_has_only_mean() {
        let g = grid(16, 4.0);
        let s = ScalarField::constant(g, 3.0).forward();
        assert!((s.at(0, 0) - Complex::new(3.0, 0.0)).norm() < 1e-14);
        let rest: f64 = s.coeffs().iter().skip(1).map(|c| c.norm()).sum();
        assert!(rest < 1e-13);
    }

    #[test]
    fn single_sine_mode() {
        let g = grid(32, 7.0);
        let f = ScalarField::from_fn(g, |x, _| (2.0 * PI * x / 7.0).sin());
        let s = f.forward();
        for j in 0..g.ny() {
            for i in 0..g.nx() {
                let c = s.coeffs()[g.index(i, j)];
                let (p, q) = (Grid2D::wrap(i, g.nx()), Grid2D::wrap(j, g.ny()));
                if q == 0 && p.abs() == 1 {
                    assert!((c.norm() - 0.5).abs() < 1e-14);
                } else {
                    assert!(c.norm() < 1e-14, "({p},{q}) = {c}");
                }
            }
        }
    }

    #[test]
    fn round_trip_and_parseval() {
        let g = Grid2D::new(32, 16, 5.0, 2.0).unwrap();
        let f = random_field(g, 7);
        let s = f.forward();
        let back = s.inverse();
        assert!(back.max_diff(&f) < 1e-12 * f.max_abs());
        let lhs = f.values().iter().map(|v| v * v).sum::<f64>() / g.len() as f64;
        assert!((lhs - s.energy()).abs() < 1e-12 * lhs);
        assert!(s.conjugate_symmetry_error() < 1e-12);
    }

    #[test]
    fn mismatched_dimensions_are_rejected() {
        let g = grid(8, 1.0);
        assert!(matches!(
            ScalarField::new(g, vec![0.0; 10]),
            Err(Error::Contract(_))
        ));
    }

    #[test]
    fn symbols_on_sine() {
        let g = grid(32, 2.0 * PI);
        let f = ScalarField::from_fn(g, |x, _| x.sin());
        let id = apply_symbol(&f, |_| 1.0).unwrap();
        assert!(id.max_diff(&f) < 1e-13);
        let lap = apply_symbol(&f, |xi| -xi).unwrap();
        assert!(lap.max_diff(&f.map(|v| -v)) < 1e-12);
        let rat = apply_symbol(&f, |xi| -xi / (1.0 + xi)).unwrap();
        assert!(rat.max_diff(&f.map(|v| -0.5 * v)) < 1e-12);
    }

    #[test]
    fn non_finite_symbol_names_xi() {
        let g = grid(8, 1.0);
        let f = ScalarField::constant(g, 1.0);
        match apply_symbol(&f, |xi| 1.0 / xi) {
            Err(Error::NonFiniteSymbol { xi, .. }) => assert_eq!(xi, 0.0),
            other => panic!("expected error, got {other:?}"),
        }
    }

    #[test]
    fn gradient_of_products() {
        let g = grid(32, 2.0 * PI);
        let f = ScalarField::from_fn(g, |x, y| x.sin() * y.sin());
        let (gx, gy) = gradient(&f);
        let ex = ScalarField::from_fn(g, |x, y| x.cos() * y.sin());
        let ey = ScalarField::from_fn(g, |x, y| x.sin() * y.cos());
        assert!(gx.max_diff(&ex) < 1e-12);
        assert!(gy.max_diff(&ey) < 1e-12);

        let (cx, cy) = gradient(&ScalarField::constant(g, 2.5));
        assert!(cx.max_abs() < 1e-13 && cy.max_abs() < 1e-13);

        let s = ScalarField::from_fn(g, |x, _| x.sin());
        let (sx, sy) = gradient(&s);
        assert!(sx.max_diff(&ScalarField::from_fn(g, |x, _| x.cos())) < 1e-12);
        assert!(sy.max_abs() < 1e-12);
    }

    #[test]
    fn dealias_cutoff() {
        let g = grid(64, 1.0);
        let mut high = vec![Complex::new(0.0, 0.0); g.len()];
        high[g.index(31, 0)] = Complex::new(1.0, 0.0);
        let s = SpectralField::new(g, high).unwrap();
        assert_eq!(dealias(&s).energy(), 0.0);

        let mut low = vec![Complex::new(0.0, 0.0); g.len()];
        low[g.index(1, 1)] = Complex::new(0.3, -0.2);
        let s = SpectralField::new(g, low).unwrap();
        assert_eq!(dealias(&s), s);

        let f = random_field(g, 3).forward();
        assert!(dealias(&f).energy() <= f.energy());
    }

    #[test]
    fn symbol_composition_and_commutation() {
        let g = grid(32, 9.0);
        let f = random_field(g, 11);
        let s1 = |xi: f64| 1.0 / (1.0 + xi);
        let s2 = |xi: f64| (-0.3 * xi).exp();
        let both = apply_symbol(&f, |xi| s1(xi) * s2(xi)).unwrap();
        let seq = apply_symbol(&apply_symbol(&f, s1).unwrap(), s2).unwrap();
        assert!(both.max_diff(&seq) < 1e-12 * f.max_abs().max(1.0));

        let (gx, _) = gradient(&apply_symbol(&f, s1).unwrap());
        let (fx, _) = gradient(&f);
        let hx = apply_symbol(&fx, s1).unwrap();
        assert!(gx.max_diff(&hx) < 1e-12 * gx.max_abs().max(1.0));
    }

    #[test]
    fn symbol_commutes_with_shifts() {
        let g = grid(16, 3.0);
        let f = random_field(g, 5);
        let shift = |f: &ScalarField| {
            let mut v = vec![0.0; g.len()];
            for j in 0..g.ny() {
                for i in 0..g.nx() {
                    v[g.index((i + 3) % g.nx(), (j + 5) % g.ny())] = f.get(i, j);
                }
            }
            ScalarField::new(g, v).unwrap()
        };
        let s = |xi: f64| -xi / (1.0 + xi);
        let a = apply_symbol(&shift(&f), s).unwrap();
        let b = shift(&apply_symbol(&f, s).unwrap());
        assert!(a.max_diff(&b) < 1e-12);
    }
}
