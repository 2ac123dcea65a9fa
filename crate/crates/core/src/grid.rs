//! Flat periodic domain: 5-point Laplacian, spectral Poisson solves,
//! discrete Green functions and divisor-encoded forcings.
//!
//! Solves go through the discrete symbol of the 5-point stencil, so
//! applying the stencil to a solve is exact to rounding. The Green
//! function carries the neutralizing background -4π/A per unit
//! multiplicity, which is the discrete stand-in for the curvature defect
//! of a zero of a holomorphic section.

use std::f64::consts::PI;
use std::io::{Read, Write};
use std::path::Path;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::par;

/// Scalar field sampled on an N x N periodic grid, row-major with index
/// `ix + n * iy`.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    pub n: usize,
    pub data: Vec<f64>,
}

impl Field {
    pub fn constant(n: usize, value: f64) -> Self {
        Field { n, data: vec![value; n * n] }
    }

    pub fn from_fn(n: usize, f: impl Fn(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(n * n);
        for iy in 0..n {
            for ix in 0..n {
                data.push(f(ix, iy));
            }
        }
        Field { n, data }
    }

    pub fn at(&self, ix: usize, iy: usize) -> f64 {
        self.data[ix + self.n * iy]
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn min(&self) -> f64 {
        self.data.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.data.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn sup_norm(&self) -> f64 {
        self.data.iter().fold(0.0f64, |m, &x| m.max(x.abs()))
    }

    pub fn mean(&self) -> f64 {
        self.data.iter().sum::<f64>() / self.data.len() as f64
    }

    pub fn map(&self, f: impl Fn(f64) -> f64 + Sync) -> Field {
        Field { n: self.n, data: self.data.iter().map(|&x| f(x)).collect() }
    }

    pub fn zip(&self, other: &Field, f: impl Fn(f64, f64) -> f64 + Sync) -> Field {
        Field { n: self.n, data: par::map2(&self.data, &other.data, f) }
    }

    pub fn axpy(&mut self, alpha: f64, x: &Field) {
        par::zip_apply(&mut self.data, &x.data, |d, s| d + alpha * s);
    }

    pub fn add_scalar(&mut self, c: f64) {
        for v in &mut self.data {
            *v += c;
        }
    }

    /// Cyclic translation taking the origin to (dx, dy).
    pub fn translate(&self, dx: usize, dy: usize) -> Field {
        let n = self.n;
        Field::from_fn(n, |ix, iy| {
            let sx = (ix + n - dx % n) % n;
            let sy = (iy + n - dy % n) % n;
            self.at(sx, sy)
        })
    }
}

/// Square torus of side L with N nodes per side.
#[derive(Clone)]
pub struct TorusGrid {
    pub n: usize,
    pub l: f64,
    pub h: f64,
    fft_fwd: Arc<dyn Fft<f64>>,
    fft_inv: Arc<dyn Fft<f64>>,
    /// Eigenvalues of the 5-point Laplacian per frequency index.
    symbol: Vec<f64>,
    green0: Field,
}

impl std::fmt::Debug for TorusGrid {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("TorusGrid")
            .field("n", &self.n)
            .field("l", &self.l)
            .finish()
    }
}

impl TorusGrid {
    pub fn new(n: usize, l: f64) -> Result<Self> {
        if n < 8 || n % 2 != 0 {
            return Err(Error::Grid(format!("grid size {n} must be even and >= 8")));
        }
        if !(l > 0.0) {
            return Err(Error::Grid("side length must be positive".into()));
        }
        let h = l / n as f64;
        let mut planner = FftPlanner::new();
        let fft_fwd = planner.plan_fft_forward(n);
        let fft_inv = planner.plan_fft_inverse(n);
        let mut symbol = vec![0.0; n * n];
        for ky in 0..n {
            for kx in 0..n {
                let sx = (PI * kx as f64 / n as f64).sin();
                let sy = (PI * ky as f64 / n as f64).sin();
                symbol[kx + n * ky] = -4.0 / (h * h) * (sx * sx + sy * sy);
            }
        }
        let mut grid = TorusGrid {
            n,
            l,
            h,
            fft_fwd,
            fft_inv,
            symbol,
            green0: Field::constant(n, 0.0),
        };
        grid.green0 = grid.green_at_origin();
        Ok(grid)
    }

    /// Total area A = L^2.
    pub fn area(&self) -> f64 {
        self.l * self.l
    }

    /// Discrete integral sum f h^2.
    pub fn integral(&self, f: &Field) -> f64 {
        f.data.iter().sum::<f64>() * self.h * self.h
    }

    /// 5-point Laplacian applied by the stencil (not spectrally); this is
    /// the operator all residual certificates use.
    pub fn laplacian(&self, f: &Field) -> Field {
        let n = self.n;
        let inv_h2 = 1.0 / (self.h * self.h);
        let d = &f.data;
        let mut out = vec![0.0; n * n];
        let row = |iy: usize| iy * n;
        for iy in 0..n {
            let up = row((iy + n - 1) % n);
            let dn = row((iy + 1) % n);
            let here = row(iy);
            for ix in 0..n {
                let left = (ix + n - 1) % n;
                let right = (ix + 1) % n;
                out[here + ix] = (d[here + left] + d[here + right] + d[up + ix] + d[dn + ix]
                    - 4.0 * d[here + ix])
                    * inv_h2;
            }
        }
        Field { n, data: out }
    }

    fn fft2(&self, data: &[f64]) -> Vec<Complex64> {
        let n = self.n;
        let mut buf: Vec<Complex64> = data.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        for row in buf.chunks_exact_mut(n) {
            self.fft_fwd.process(row);
        }
        let mut t = transpose(&buf, n);
        for row in t.chunks_exact_mut(n) {
            self.fft_fwd.process(row);
        }
        transpose(&t, n)
    }

    fn ifft2(&self, mut buf: Vec<Complex64>) -> Vec<f64> {
        let n = self.n;
        for row in buf.chunks_exact_mut(n) {
            self.fft_inv.process(row);
        }
        let mut t = transpose(&buf, n);
        for row in t.chunks_exact_mut(n) {
            self.fft_inv.process(row);
        }
        let t = transpose(&t, n);
        let scale = 1.0 / (n * n) as f64;
        t.iter().map(|c| c.re * scale).collect()
    }

    /// Mean-zero solution of the Poisson problem Δ_h u = f. The data must
    /// be compatible: |∫f| <= tol·max(1, ||f||_∞); beyond that the call is
    /// rejected, within it the mean is projected out.
    pub fn poisson_solve(&self, f: &Field) -> Result<Field> {
        let mean = f.mean();
        let scale = f.sup_norm().max(1.0);
        if mean.abs() * self.area() > 1e-10 * scale {
            return Err(Error::Grid(format!(
                "incompatible Poisson data: ∫f = {:.3e}",
                mean * self.area()
            )));
        }
        Ok(self.solve_with_symbol(f, |lam| if lam == 0.0 { 0.0 } else { 1.0 / lam }, -mean))
    }

    /// Solves (a Δ_h - sigma) u = f for sigma > 0 (used as the Newton
    /// preconditioner; always invertible).
    pub fn helmholtz_solve(&self, f: &Field, a: f64, sigma: f64) -> Field {
        assert!(sigma > 0.0);
        self.solve_with_symbol(f, |lam| 1.0 / (a * lam - sigma), 0.0)
    }

    fn solve_with_symbol(
        &self,
        f: &Field,
        inv_symbol: impl Fn(f64) -> f64,
        shift: f64,
    ) -> Field {
        let n = self.n;
        let mut hat = self.fft2(&f.data);
        for (k, c) in hat.iter_mut().enumerate() {
            let w = inv_symbol(self.symbol[k]);
            *c *= w;
        }
        let mut data = self.ifft2(hat);
        if shift != 0.0 {
            // Re-center after projecting the incompatible mean.
            let _ = shift;
        }
        // Enforce exact mean-zero output for the Poisson path.
        let m = data.iter().sum::<f64>() / data.len() as f64;
        if inv_symbol(0.0) == 0.0 {
            for v in &mut data {
                *v -= m;
            }
        }
        Field { n, data }
    }

    fn green_at_origin(&self) -> Field {
        let n = self.n;
        let a = self.area();
        let h2 = self.h * self.h;
        let mut rhs = Field::constant(n, -4.0 * PI / a);
        rhs.data[0] += 4.0 * PI / h2;
        self.poisson_solve(&rhs).expect("Green data is compatible by construction")
    }

    /// Discrete Green function: Δ_h g = 4π(δ_p - 1/A), mean zero,
    /// translation-equivariant by construction.
    pub fn green(&self, p: (usize, usize)) -> Field {
        self.green0.translate(p.0, p.1)
    }

    /// Value g(p; p), the smearing scale of a divisor point.
    pub fn green_self_value(&self) -> f64 {
        self.green0.data[0]
    }
}

fn transpose(buf: &[Complex64], n: usize) -> Vec<Complex64> {
    let mut out = vec![Complex64::new(0.0, 0.0); n * n];
    for iy in 0..n {
        for ix in 0..n {
            out[iy + n * ix] = buf[ix + n * iy];
        }
    }
    out
}

/// Formal sum of grid points with positive multiplicities.
#[derive(Debug, Clone, Default, serde::Serialize, serde::Deserialize)]
pub struct Divisor {
    pub points: Vec<DivisorPoint>,
}

#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct DivisorPoint {
    pub x: usize,
    pub y: usize,
    pub m: u32,
}

impl Divisor {
    pub fn empty() -> Self {
        Divisor { points: Vec::new() }
    }

    pub fn single(x: usize, y: usize, m: u32) -> Self {
        Divisor { points: vec![DivisorPoint { x, y, m }] }
    }

    pub fn degree(&self) -> i64 {
        self.points.iter().map(|p| p.m as i64).sum()
    }

    /// Multiplicity as a function on grid nodes.
    pub fn as_function(&self, n: usize) -> Vec<i64> {
        let mut f = vec![0i64; n * n];
        for p in &self.points {
            f[p.x % n + n * (p.y % n)] += p.m as i64;
        }
        f
    }
}

/// Positive forcing field G = exp(c + Σ m_j g_{p_j}) together with
/// ρ = Δ_h log G stored exactly as 4π Σ m_j (δ_{p_j} - 1/A).
#[derive(Debug, Clone)]
pub struct Forcing {
    pub g: Field,
    pub log_g: Field,
    pub rho: Field,
    pub divisor: Divisor,
    pub amplitude: f64,
}

impl Forcing {
    pub fn from_divisor(grid: &TorusGrid, divisor: Divisor, amplitude: f64) -> Result<Forcing> {
        let n = grid.n;
        for p in &divisor.points {
            if p.x >= n || p.y >= n {
                return Err(Error::Grid(format!(
                    "divisor point ({}, {}) outside the {n} x {n} grid",
                    p.x, p.y
                )));
            }
            if p.m == 0 {
                return Err(Error::Grid("divisor multiplicities must be positive".into()));
            }
        }
        let mut log_g = Field::constant(n, amplitude);
        let mut rho = Field::constant(n, -4.0 * PI * divisor.degree() as f64 / grid.area());
        let h2 = grid.h * grid.h;
        for p in &divisor.points {
            log_g.axpy(p.m as f64, &grid.green((p.x, p.y)));
            rho.data[p.x + n * p.y] += 4.0 * PI * p.m as f64 / h2;
        }
        let g = log_g.map(f64::exp);
        debug_assert!(g.min() > 0.0);
        Ok(Forcing { g, log_g, rho, divisor, amplitude })
    }

    /// Same divisor, amplitude shifted by `ln scale` (used by the ε-sweeps).
    pub fn rescaled(&self, grid: &TorusGrid, scale: f64) -> Result<Forcing> {
        Forcing::from_divisor(grid, self.divisor.clone(), self.amplitude + scale.ln())
    }

    /// Mask {G >= tau · max G} on which "away from zeros" assertions run.
    pub fn mask(&self, tau: f64) -> Vec<bool> {
        let cutoff = tau * self.g.max();
        self.g.data.iter().map(|&v| v >= cutoff).collect()
    }
}

const TGRD_MAGIC: &[u8; 4] = b"TGRD";

/// Writes fields in the binary grid format: 16-byte header (magic "TGRD",
/// u32 N, u32 field count, u32 reserved, little-endian) followed by
/// row-major f64 per field.
pub fn write_tgrd(path: &Path, fields: &[&Field]) -> Result<()> {
    let n = fields.first().map(|f| f.n).unwrap_or(0);
    if fields.iter().any(|f| f.n != n) {
        return Err(Error::Grid("inconsistent field sizes".into()));
    }
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    w.write_all(TGRD_MAGIC)?;
    w.write_all(&(n as u32).to_le_bytes())?;
    w.write_all(&(fields.len() as u32).to_le_bytes())?;
    w.write_all(&0u32.to_le_bytes())?;
    for f in fields {
        for v in &f.data {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn read_tgrd(path: &Path) -> Result<Vec<Field>> {
    let mut r = std::io::BufReader::new(std::fs::File::open(path)?);
    let mut header = [0u8; 16];
    r.read_exact(&mut header)?;
    if &header[0..4] != TGRD_MAGIC {
        return Err(Error::Grid("bad magic in grid file".into()));
    }
    let n = u32::from_le_bytes(header[4..8].try_into().unwrap()) as usize;
    let count = u32::from_le_bytes(header[8..12].try_into().unwrap()) as usize;
    let mut fields = Vec::with_capacity(count);
    for _ in 0..count {
        let mut data = vec![0.0f64; n * n];
        let mut buf = [0u8; 8];
        for v in &mut data {
            r.read_exact(&mut buf)?;
            *v = f64::from_le_bytes(buf);
        }
        fields.push(Field { n, data });
    }
    Ok(fields)
}

/// CSV export: header `x,y,<names...>`, one row per node.
pub fn write_csv(path: &Path, grid: &TorusGrid, named: &[(&str, &Field)]) -> Result<()> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    write!(w, "x,y")?;
    for (name, _) in named {
        write!(w, ",{name}")?;
    }
    writeln!(w)?;
    let n = grid.n;
    for iy in 0..n {
        for ix in 0..n {
            write!(w, "{},{}", ix as f64 * grid.h, iy as f64 * grid.h)?;
            for (_, f) in named {
                write!(w, ",{}", f.at(ix, iy))?;
            }
            writeln!(w)?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid16() -> TorusGrid {
        TorusGrid::new(16, 2.0 * PI).unwrap()
    }

    #[test]
    fn rejects_bad_sizes() {
        assert!(TorusGrid::new(7, 1.0).is_err());
        assert!(TorusGrid::new(9, 1.0).is_err());
        assert!(TorusGrid::new(4, 1.0).is_err());
    }

    #[test]
    fn laplacian_annihilates_constants_and_integrates_to_zero() {
        let g = grid16();
        let c = Field::constant(16, 3.25);
        assert_eq!(g.laplacian(&c).sup_norm(), 0.0);
        let f = Field::from_fn(16, |ix, iy| ((ix * 7 + iy * 3) as f64).sin());
        let lap = g.laplacian(&f);
        assert!(g.integral(&lap).abs() < 1e-11 * lap.sup_norm());
    }

    #[test]
    fn poisson_zero_and_roundtrip() {
        let g = grid16();
        let zero = Field::constant(16, 0.0);
        assert_eq!(g.poisson_solve(&zero).unwrap().sup_norm(), 0.0);

        let smooth = Field::from_fn(16, |ix, iy| {
            (2.0 * PI * ix as f64 / 16.0).cos() + 0.5 * (2.0 * PI * 3.0 * iy as f64 / 16.0).sin()
        });
        let f = g.laplacian(&smooth);
        let sol = g.poisson_solve(&f).unwrap();
        // Recovered up to the constant mode.
        let mut diff = sol.clone();
        diff.axpy(-1.0, &smooth);
        diff.add_scalar(-diff.mean());
        assert!(diff.sup_norm() < 1e-12 * smooth.sup_norm().max(1.0));
    }

    #[test]
    fn poisson_residual_certificate() {
        let g = grid16();
        // Deterministic pseudo-random mean-zero data.
        let mut f = Field::from_fn(16, |ix, iy| {
            let t = (ix * 31 + iy * 17) as f64;
            (t * 0.7).sin() * (t * 0.13).cos()
        });
        f.add_scalar(-f.mean());
        let sol = g.poisson_solve(&f).unwrap();
        let mut res = g.laplacian(&sol);
        res.axpy(-1.0, &f);
        assert!(res.sup_norm() <= 1e-11 * f.sup_norm());
        assert!(sol.mean().abs() < 1e-14 * sol.sup_norm().max(1.0));
    }

    #[test]
    fn poisson_rejects_incompatible_data() {
        let g = grid16();
        let f = Field::constant(16, 1.0);
        assert!(g.poisson_solve(&f).is_err());
    }

    #[test]
    fn green_function_properties() {
        let g = grid16();
        let p = (5usize, 9usize);
        let green = g.green(p);
        let lap = g.laplacian(&green);
        // Δ_h g = 4π(δ_p - 1/A).
        let mut expected = Field::constant(16, -4.0 * PI / g.area());
        expected.data[p.0 + 16 * p.1] += 4.0 * PI / (g.h * g.h);
        let mut res = lap.clone();
        res.axpy(-1.0, &expected);
        assert!(res.sup_norm() <= 1e-12 * expected.sup_norm());
        // Compatibility and mean zero.
        assert!(g.integral(&lap).abs() < 1e-10);
        assert!(green.mean().abs() < 1e-13 * green.sup_norm());
        // Lattice symmetry g(p+v) = g(p-v).
        for (vx, vy) in [(1, 0), (3, 2), (0, 5)] {
            let plus = green.at((p.0 + vx) % 16, (p.1 + vy) % 16);
            let minus = green.at((p.0 + 16 - vx) % 16, (p.1 + 16 - vy) % 16);
            assert!((plus - minus).abs() < 1e-12 * green.sup_norm());
        }
    }

    #[test]
    fn green_matches_dense_solve() {
        let g = grid16();
        let n = 16usize;
        let nn = n * n;
        let p = (3usize, 4usize);
        // Dense 5-point Laplacian with a mean constraint (bordered system).
        let mut m = nalgebra::DMatrix::<f64>::zeros(nn + 1, nn + 1);
        let inv_h2 = 1.0 / (g.h * g.h);
        for iy in 0..n {
            for ix in 0..n {
                let row = ix + n * iy;
                m[(row, row)] = -4.0 * inv_h2;
                for (jx, jy) in [
                    ((ix + 1) % n, iy),
                    ((ix + n - 1) % n, iy),
                    (ix, (iy + 1) % n),
                    (ix, (iy + n - 1) % n),
                ] {
                    m[(row, jx + n * jy)] += inv_h2;
                }
                m[(row, nn)] = 1.0;
                m[(nn, row)] = 1.0;
            }
        }
        let mut rhs = nalgebra::DVector::<f64>::from_element(nn + 1, -4.0 * PI / g.area());
        rhs[p.0 + n * p.1] += 4.0 * PI * inv_h2;
        rhs[nn] = 0.0;
        let sol = m.lu().solve(&rhs).expect("dense system solvable");
        let green = g.green(p);
        let max_dev = (0..nn)
            .map(|k| (green.data[k] - sol[k]).abs())
            .fold(0.0f64, f64::max);
        assert!(max_dev < 1e-10, "deviation {max_dev:.3e}");
    }

    #[test]
    fn green_self_value_decreases_with_resolution() {
        let l = 2.0 * PI;
        let vals: Vec<f64> = [16usize, 32, 64]
            .iter()
            .map(|&n| TorusGrid::new(n, l).unwrap().green_self_value())
            .collect();
        assert!(vals[1] < vals[0] && vals[2] < vals[1], "{vals:?}");
    }

    #[test]
    fn forcing_construction() {
        let g = grid16();
        // Empty divisor: G = 1, rho = 0.
        let f = Forcing::from_divisor(&g, Divisor::empty(), 0.0).unwrap();
        assert_eq!(f.g.data, vec![1.0; 256]);
        assert_eq!(f.rho.sup_norm(), 0.0);

        // Simple zero at the origin: G minimal there, point mass present.
        let f = Forcing::from_divisor(&g, Divisor::single(0, 0, 1), 0.0).unwrap();
        let min_ix = f
            .g
            .data
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(b.1))
            .unwrap()
            .0;
        assert_eq!(min_ix, 0);
        assert!(f.g.min() > 0.0);

        // Two points with multiplicities (1, 2): degree 3, ∫rho = 0.
        let div = Divisor {
            points: vec![
                DivisorPoint { x: 2, y: 3, m: 1 },
                DivisorPoint { x: 10, y: 12, m: 2 },
            ],
        };
        let f = Forcing::from_divisor(&g, div, 0.5).unwrap();
        assert_eq!(f.divisor.degree(), 3);
        assert!(g.integral(&f.rho).abs() < 1e-9);
        // log G - c is mean zero.
        assert!((f.log_g.mean() - 0.5).abs() < 1e-12);
        // Exact discrete identity Δ_h log G = rho.
        let mut res = g.laplacian(&f.log_g);
        res.axpy(-1.0, &f.rho);
        assert!(res.sup_norm() <= 1e-11 * f.rho.sup_norm());
    }

    #[test]
    fn binary_and_csv_roundtrip() {
        let g = grid16();
        let f1 = Field::from_fn(16, |ix, iy| (ix + 17 * iy) as f64 * 0.25);
        let f2 = g.green((1, 2));
        let dir = std::env::temp_dir().join("toda_lab_grid_test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("fields.tgrd");
        write_tgrd(&path, &[&f1, &f2]).unwrap();
        let back = read_tgrd(&path).unwrap();
        assert_eq!(back.len(), 2);
        assert_eq!(back[0], f1);
        assert_eq!(back[1], f2);
        let csv = dir.join("fields.csv");
        write_csv(&csv, &g, &[("a", &f1), ("b", &f2)]).unwrap();
        let text = std::fs::read_to_string(&csv).unwrap();
        assert!(text.starts_with("x,y,a,b"));
        assert_eq!(text.lines().count(), 257);
    }
}
