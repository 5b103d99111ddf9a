//! Uniform grids on the flat torus or on a square with a Dirichlet trace,
//! complex field storage and the finite-difference / quadrature operators
//! every other module is built on.
//!
//! Storage is structure-of-arrays, row-major with rows along `y`:
//! node `(i, j)` sits at `(i h, j h)` and lives at index `j * nodes + i`.
//!
//! Stencils:
//! * first derivatives are centered, `(u[i+1] - u[i-1]) / 2h`, with
//!   second-order one-sided formulas on the Dirichlet boundary ring;
//! * the Laplacian is the 5-point stencil, i.e. the composition of the
//!   backward divergence with the forward gradient;
//! * quadrature uses uniform weights `h^2` on the torus and trapezoid
//!   weights on the square.
//!
//! All reductions use a fixed topology: each row is summed left to right,
//! then the row sums are combined by a pairwise tree (see [`pairwise_sum`]),
//! so results do not depend on thread count.

use std::io::{BufRead, Write};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Domain geometry.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Geometry {
    /// Flat torus of side `L`; all index arithmetic wraps.
    Torus,
    /// Square `[0, L]^2` whose boundary ring carries a fixed trace.
    Dirichlet,
}

impl Geometry {
    pub fn name(self) -> &'static str {
        match self {
            Geometry::Torus => "torus",
            Geometry::Dirichlet => "dirichlet",
        }
    }
}

/// Uniform grid with `n` cells per side and spacing `h = L / n`.
///
/// The torus stores `n` nodes per side; the Dirichlet square stores `n + 1`
/// (both boundary lines are nodes).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Grid {
    n: usize,
    side: f64,
    geometry: Geometry,
}

impl Grid {
    pub fn new(geometry: Geometry, n: usize, side: f64) -> Result<Self> {
        if n < 8 {
            return Err(Error::InvalidGrid(format!("n = {n} < 8")));
        }
        if !(side.is_finite() && side > 0.0) {
            return Err(Error::InvalidGrid(format!("side = {side}")));
        }
        Ok(Self { n, side, geometry })
    }

    pub fn torus(n: usize, side: f64) -> Result<Self> {
        Self::new(Geometry::Torus, n, side)
    }

    pub fn dirichlet(n: usize, side: f64) -> Result<Self> {
        Self::new(Geometry::Dirichlet, n, side)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn side(&self) -> f64 {
        self.side
    }

    pub fn geometry(&self) -> Geometry {
        self.geometry
    }

    pub fn is_torus(&self) -> bool {
        self.geometry == Geometry::Torus
    }

    pub fn h(&self) -> f64 {
        self.side / self.n as f64
    }

    /// Nodes per side.
    pub fn nodes(&self) -> usize {
        match self.geometry {
            Geometry::Torus => self.n,
            Geometry::Dirichlet => self.n + 1,
        }
    }

    /// Total number of nodes.
    pub fn len(&self) -> usize {
        self.nodes() * self.nodes()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn area(&self) -> f64 {
        self.side * self.side
    }

    #[inline]
    pub fn idx(&self, i: usize, j: usize) -> usize {
        j * self.nodes() + i
    }

    #[inline]
    pub fn coord(&self, i: usize) -> f64 {
        i as f64 * self.h()
    }

    #[inline]
    pub fn point(&self, i: usize, j: usize) -> [f64; 2] {
        [self.coord(i), self.coord(j)]
    }

    pub fn is_boundary(&self, i: usize, j: usize) -> bool {
        match self.geometry {
            Geometry::Torus => false,
            Geometry::Dirichlet => i == 0 || j == 0 || i == self.n || j == self.n,
        }
    }

    /// Displacement `b - a`, using the minimal image on the torus.
    #[inline]
    pub fn displacement(&self, a: [f64; 2], b: [f64; 2]) -> [f64; 2] {
        let mut d = [b[0] - a[0], b[1] - a[1]];
        if self.is_torus() {
            for c in &mut d {
                *c -= self.side * (*c / self.side).round();
            }
        }
        d
    }

    #[inline]
    pub fn distance(&self, a: [f64; 2], b: [f64; 2]) -> f64 {
        let d = self.displacement(a, b);
        d[0].hypot(d[1])
    }

    /// Wraps a point into `[0, L)^2` on the torus; identity on the square.
    pub fn wrap(&self, p: [f64; 2]) -> [f64; 2] {
        if self.is_torus() {
            [p[0].rem_euclid(self.side), p[1].rem_euclid(self.side)]
        } else {
            p
        }
    }

    /// Quadrature weight of node `(i, j)`.
    #[inline]
    pub fn weight(&self, i: usize, j: usize) -> f64 {
        let h2 = self.h() * self.h();
        match self.geometry {
            Geometry::Torus => h2,
            Geometry::Dirichlet => {
                let wi = if i == 0 || i == self.n { 0.5 } else { 1.0 };
                let wj = if j == 0 || j == self.n { 0.5 } else { 1.0 };
                h2 * wi * wj
            }
        }
    }

    /// Node coordinates `(x, y)` of every index, row-major.
    pub fn points(&self) -> impl Iterator<Item = [f64; 2]> + '_ {
        let m = self.nodes();
        (0..m).flat_map(move |j| (0..m).map(move |i| self.point(i, j)))
    }

    fn check_same(&self, other: &Grid) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(Error::GridMismatch)
        }
    }
}

/// Real field on a grid.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarField {
    pub grid: Grid,
    pub data: Vec<f64>,
}

impl ScalarField {
    pub fn zeros(grid: Grid) -> Self {
        Self {
            grid,
            data: vec![0.0; grid.len()],
        }
    }

    pub fn from_fn(grid: Grid, f: impl Fn([f64; 2]) -> f64) -> Self {
        Self {
            grid,
            data: grid.points().map(f).collect(),
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            grid: self.grid,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }
}

/// Complex order parameter stored as two real arrays `u^1 = re`, `u^2 = im`.
#[derive(Clone, Debug, PartialEq)]
pub struct ComplexField {
    pub grid: Grid,
    pub re: Vec<f64>,
    pub im: Vec<f64>,
}

impl ComplexField {
    pub fn zeros(grid: Grid) -> Self {
        Self {
            grid,
            re: vec![0.0; grid.len()],
            im: vec![0.0; grid.len()],
        }
    }

    pub fn constant(grid: Grid, value: Complex64) -> Self {
        Self {
            grid,
            re: vec![value.re; grid.len()],
            im: vec![value.im; grid.len()],
        }
    }

    pub fn from_fn(grid: Grid, f: impl Fn([f64; 2]) -> Complex64) -> Self {
        let mut out = Self::zeros(grid);
        for (k, p) in grid.points().enumerate() {
            let z = f(p);
            out.re[k] = z.re;
            out.im[k] = z.im;
        }
        out
    }

    #[inline]
    pub fn at(&self, k: usize) -> Complex64 {
        Complex64::new(self.re[k], self.im[k])
    }

    #[inline]
    pub fn set(&mut self, k: usize, z: Complex64) {
        self.re[k] = z.re;
        self.im[k] = z.im;
    }

    pub fn max_modulus(&self) -> f64 {
        self.re
            .iter()
            .zip(&self.im)
            .fold(0.0_f64, |m, (a, b)| m.max(a.hypot(*b)))
    }

    pub fn is_finite(&self) -> bool {
        self.re.iter().chain(&self.im).all(|v| v.is_finite())
    }

    /// `|u|^2` as a scalar field.
    pub fn modulus_squared(&self) -> ScalarField {
        ScalarField {
            grid: self.grid,
            data: self
                .re
                .iter()
                .zip(&self.im)
                .map(|(a, b)| a * a + b * b)
                .collect(),
        }
    }

    /// Pointwise real scalar product `(u, v) = u^1 v^1 + u^2 v^2`.
    pub fn dot(&self, other: &ComplexField) -> ScalarField {
        ScalarField {
            grid: self.grid,
            data: (0..self.re.len())
                .map(|k| self.re[k] * other.re[k] + self.im[k] * other.im[k])
                .collect(),
        }
    }

    /// `self + a * other`.
    pub fn axpy(&self, a: f64, other: &ComplexField) -> ComplexField {
        ComplexField {
            grid: self.grid,
            re: self.re.iter().zip(&other.re).map(|(x, y)| x + a * y).collect(),
            im: self.im.iter().zip(&other.im).map(|(x, y)| x + a * y).collect(),
        }
    }

    pub fn scale(&self, a: f64) -> ComplexField {
        ComplexField {
            grid: self.grid,
            re: self.re.iter().map(|x| a * x).collect(),
            im: self.im.iter().map(|x| a * x).collect(),
        }
    }

    /// Sup norm of `self - other`.
    pub fn sup_distance(&self, other: &ComplexField) -> f64 {
        (0..self.re.len()).fold(0.0_f64, |m, k| {
            m.max((self.re[k] - other.re[k]).hypot(self.im[k] - other.im[k]))
        })
    }
}

/// Four real arrays indexed `(jk)`, stored as `[11, 12, 21, 22]`.
#[derive(Clone, Debug, PartialEq)]
pub struct MatrixField {
    pub grid: Grid,
    pub entries: [Vec<f64>; 4],
}

impl MatrixField {
    pub fn zeros(grid: Grid) -> Self {
        let z = vec![0.0; grid.len()];
        Self {
            grid,
            entries: [z.clone(), z.clone(), z.clone(), z],
        }
    }

    #[inline]
    pub fn at(&self, k: usize) -> [[f64; 2]; 2] {
        [
            [self.entries[0][k], self.entries[1][k]],
            [self.entries[2][k], self.entries[3][k]],
        ]
    }

    #[inline]
    pub fn set(&mut self, k: usize, m: [[f64; 2]; 2]) {
        self.entries[0][k] = m[0][0];
        self.entries[1][k] = m[0][1];
        self.entries[2][k] = m[1][0];
        self.entries[3][k] = m[1][1];
    }

    pub fn trace(&self) -> ScalarField {
        ScalarField {
            grid: self.grid,
            data: self.entries[0]
                .iter()
                .zip(&self.entries[3])
                .map(|(a, d)| a + d)
                .collect(),
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.entries
            .iter()
            .flat_map(|e| e.iter())
            .fold(0.0_f64, |m, v| m.max(v.abs()))
    }
}

/// Partial derivatives of a complex field: `d1 = ∂₁u`, `d2 = ∂₂u`,
/// so `∇u¹ = (d1.re, d2.re)` and `∇u² = (d1.im, d2.im)`.
#[derive(Clone, Debug)]
pub struct ComplexGradient {
    pub d1: ComplexField,
    pub d2: ComplexField,
}

impl ComplexGradient {
    /// `|∇u|^2` at index `k`.
    #[inline]
    pub fn norm_sq_at(&self, k: usize) -> f64 {
        let a = self.d1.re[k];
        let b = self.d1.im[k];
        let c = self.d2.re[k];
        let d = self.d2.im[k];
        a * a + b * b + c * c + d * d
    }
}

/// Second derivatives `∂²₁₁u`, `∂²₁₂u`, `∂²₂₂u`.
#[derive(Clone, Debug)]
pub struct ComplexHessian {
    pub d11: ComplexField,
    pub d12: ComplexField,
    pub d22: ComplexField,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Axis {
    X,
    Y,
}

/// Applies a per-line 1D stencil along `axis`. `line(src, dst, stride, offset)`
/// operates on the line with the given memory layout.
fn along_axis(grid: &Grid, src: &[f64], axis: Axis, kernel: impl Fn(&dyn Fn(usize) -> f64, usize) -> f64) -> Vec<f64> {
    let m = grid.nodes();
    let mut out = vec![0.0; src.len()];
    for line in 0..m {
        let (base, stride) = match axis {
            Axis::X => (line * m, 1),
            Axis::Y => (line, m),
        };
        let get = |p: usize| src[base + p * stride];
        for p in 0..m {
            out[base + p * stride] = kernel(&get, p);
        }
    }
    out
}

/// Centered first derivative of a real array along `axis`.
pub fn derivative(grid: &Grid, src: &[f64], axis: Axis) -> Vec<f64> {
    let m = grid.nodes();
    let inv2h = 0.5 / grid.h();
    match grid.geometry() {
        Geometry::Torus => {
            let mut out = vec![0.0; src.len()];
            match axis {
                Axis::X => {
                    for j in 0..m {
                        let row = &src[j * m..(j + 1) * m];
                        let o = &mut out[j * m..(j + 1) * m];
                        o[0] = (row[1] - row[m - 1]) * inv2h;
                        for i in 1..m - 1 {
                            o[i] = (row[i + 1] - row[i - 1]) * inv2h;
                        }
                        o[m - 1] = (row[0] - row[m - 2]) * inv2h;
                    }
                }
                Axis::Y => {
                    for j in 0..m {
                        let jp = if j + 1 == m { 0 } else { j + 1 };
                        let jm = if j == 0 { m - 1 } else { j - 1 };
                        let (up, dn) = (&src[jp * m..(jp + 1) * m], &src[jm * m..(jm + 1) * m]);
                        let o = &mut out[j * m..(j + 1) * m];
                        for i in 0..m {
                            o[i] = (up[i] - dn[i]) * inv2h;
                        }
                    }
                }
            }
            out
        }
        Geometry::Dirichlet => along_axis(grid, src, axis, |g, p| {
            if p == 0 {
                (-3.0 * g(0) + 4.0 * g(1) - g(2)) * inv2h
            } else if p == m - 1 {
                (3.0 * g(m - 1) - 4.0 * g(m - 2) + g(m - 3)) * inv2h
            } else {
                (g(p + 1) - g(p - 1)) * inv2h
            }
        }),
    }
}

/// Three-point second derivative along `axis` (one-sided four-point formula
/// on the Dirichlet boundary ring).
pub fn second_derivative(grid: &Grid, src: &[f64], axis: Axis) -> Vec<f64> {
    let m = grid.nodes();
    let inv_h2 = 1.0 / (grid.h() * grid.h());
    let torus = grid.is_torus();
    along_axis(grid, src, axis, |g, p| {
        if torus {
            let pp = if p + 1 == m { 0 } else { p + 1 };
            let pm = if p == 0 { m - 1 } else { p - 1 };
            (g(pp) - 2.0 * g(p) + g(pm)) * inv_h2
        } else if p == 0 {
            (2.0 * g(0) - 5.0 * g(1) + 4.0 * g(2) - g(3)) * inv_h2
        } else if p == m - 1 {
            (2.0 * g(m - 1) - 5.0 * g(m - 2) + 4.0 * g(m - 3) - g(m - 4)) * inv_h2
        } else {
            (g(p + 1) - 2.0 * g(p) + g(p - 1)) * inv_h2
        }
    })
}

/// Forward difference `(u[i+1] - u[i]) / h` on the torus.
pub fn forward_difference(grid: &Grid, src: &[f64], axis: Axis) -> Result<Vec<f64>> {
    if !grid.is_torus() {
        return Err(Error::UnsupportedOnGeometry("forward difference"));
    }
    let m = grid.nodes();
    let inv_h = 1.0 / grid.h();
    Ok(along_axis(grid, src, axis, |g, p| {
        (g(if p + 1 == m { 0 } else { p + 1 }) - g(p)) * inv_h
    }))
}

/// Backward divergence `Σ_k (w_k[i] - w_k[i-1]) / h` on the torus; the
/// negative adjoint of [`forward_difference`].
pub fn backward_divergence(grid: &Grid, wx: &[f64], wy: &[f64]) -> Result<Vec<f64>> {
    if !grid.is_torus() {
        return Err(Error::UnsupportedOnGeometry("backward divergence"));
    }
    let m = grid.nodes();
    let inv_h = 1.0 / grid.h();
    let back = |src: &[f64], axis| {
        along_axis(grid, src, axis, |g, p| {
            (g(p) - g(if p == 0 { m - 1 } else { p - 1 })) * inv_h
        })
    };
    let a = back(wx, Axis::X);
    let b = back(wy, Axis::Y);
    Ok(a.iter().zip(&b).map(|(x, y)| x + y).collect())
}

fn laplacian_real(grid: &Grid, src: &[f64]) -> Vec<f64> {
    let m = grid.nodes();
    let inv_h2 = 1.0 / (grid.h() * grid.h());
    match grid.geometry() {
        Geometry::Torus => {
            let mut out = vec![0.0; src.len()];
            for j in 0..m {
                let jp = if j + 1 == m { 0 } else { j + 1 };
                let jm = if j == 0 { m - 1 } else { j - 1 };
                let row = &src[j * m..(j + 1) * m];
                let up = &src[jp * m..(jp + 1) * m];
                let dn = &src[jm * m..(jm + 1) * m];
                let o = &mut out[j * m..(j + 1) * m];
                for i in 0..m {
                    let ip = if i + 1 == m { 0 } else { i + 1 };
                    let im = if i == 0 { m - 1 } else { i - 1 };
                    o[i] = (row[ip] + row[im] + up[i] + dn[i] - 4.0 * row[i]) * inv_h2;
                }
            }
            out
        }
        Geometry::Dirichlet => {
            let a = second_derivative(grid, src, Axis::X);
            let b = second_derivative(grid, src, Axis::Y);
            a.iter().zip(&b).map(|(x, y)| x + y).collect()
        }
    }
}

/// Centered gradient of a complex field.
pub fn gradient(u: &ComplexField) -> ComplexGradient {
    let g = &u.grid;
    ComplexGradient {
        d1: ComplexField {
            grid: *g,
            re: derivative(g, &u.re, Axis::X),
            im: derivative(g, &u.im, Axis::X),
        },
        d2: ComplexField {
            grid: *g,
            re: derivative(g, &u.re, Axis::Y),
            im: derivative(g, &u.im, Axis::Y),
        },
    }
}

/// Centered gradient of a real field, `(∂₁f, ∂₂f)`.
pub fn scalar_gradient(f: &ScalarField) -> (ScalarField, ScalarField) {
    let g = f.grid;
    (
        ScalarField {
            grid: g,
            data: derivative(&g, &f.data, Axis::X),
        },
        ScalarField {
            grid: g,
            data: derivative(&g, &f.data, Axis::Y),
        },
    )
}

/// 5-point Laplacian.
pub fn laplacian(u: &ComplexField) -> ComplexField {
    let g = &u.grid;
    ComplexField {
        grid: *g,
        re: laplacian_real(g, &u.re),
        im: laplacian_real(g, &u.im),
    }
}

/// Second derivatives; the mixed one is the centered difference of the
/// centered difference (the 4-corner stencil), exact on quadratics.
pub fn hessian(u: &ComplexField) -> ComplexHessian {
    let g = &u.grid;
    let dx_re = derivative(g, &u.re, Axis::X);
    let dx_im = derivative(g, &u.im, Axis::X);
    ComplexHessian {
        d11: ComplexField {
            grid: *g,
            re: second_derivative(g, &u.re, Axis::X),
            im: second_derivative(g, &u.im, Axis::X),
        },
        d12: ComplexField {
            grid: *g,
            re: derivative(g, &dx_re, Axis::Y),
            im: derivative(g, &dx_im, Axis::Y),
        },
        d22: ComplexField {
            grid: *g,
            re: second_derivative(g, &u.re, Axis::Y),
            im: second_derivative(g, &u.im, Axis::Y),
        },
    }
}

/// Pairwise (tree) sum with a sequential base case of 32 terms.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    if values.len() <= 32 {
        values.iter().sum()
    } else {
        let mid = values.len() / 2;
        pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
    }
}

/// Quadrature of a real array over the grid's domain.
pub fn integrate_slice(grid: &Grid, data: &[f64]) -> f64 {
    let m = grid.nodes();
    let rows: Vec<f64> = (0..m)
        .map(|j| {
            let row = &data[j * m..(j + 1) * m];
            match grid.geometry() {
                Geometry::Torus => row.iter().sum::<f64>() * grid.weight(0, 0),
                Geometry::Dirichlet => row
                    .iter()
                    .enumerate()
                    .map(|(i, v)| v * grid.weight(i, j))
                    .sum(),
            }
        })
        .collect();
    pairwise_sum(&rows)
}

/// `∫_D f dx`.
pub fn integrate(f: &ScalarField) -> f64 {
    integrate_slice(&f.grid, &f.data)
}

/// `∫_D (u, v) dx`.
pub fn integrate_dot(u: &ComplexField, v: &ComplexField) -> Result<f64> {
    u.grid.check_same(&v.grid)?;
    Ok(integrate(&u.dot(v)))
}

/// Bilinear interpolation. Exact at nodes and for linear fields; wraps on
/// the torus.
pub fn interpolate(u: &ComplexField, p: [f64; 2]) -> Result<Complex64> {
    let g = &u.grid;
    let h = g.h();
    let m = g.nodes();
    let (fx, fy) = match g.geometry() {
        Geometry::Torus => {
            let q = g.wrap(p);
            (q[0] / h, q[1] / h)
        }
        Geometry::Dirichlet => {
            let s = g.side();
            let tol = 1e-12 * s;
            if !(p[0] >= -tol && p[0] <= s + tol && p[1] >= -tol && p[1] <= s + tol) {
                return Err(Error::OutOfDomain {
                    x: p[0],
                    y: p[1],
                    side: s,
                });
            }
            (p[0].clamp(0.0, s) / h, p[1].clamp(0.0, s) / h)
        }
    };
    let cell = |f: f64| -> (usize, f64) {
        let i = f.floor();
        let mut i0 = i as isize;
        let mut t = f - i;
        if g.is_torus() {
            i0 = i0.rem_euclid(m as isize);
        } else if i0 >= (m - 1) as isize {
            i0 = (m - 2) as isize;
            t = f - i0 as f64;
        }
        (i0 as usize, t)
    };
    let (i0, tx) = cell(fx);
    let (j0, ty) = cell(fy);
    let i1 = if g.is_torus() { (i0 + 1) % m } else { i0 + 1 };
    let j1 = if g.is_torus() { (j0 + 1) % m } else { j0 + 1 };
    let v00 = u.at(g.idx(i0, j0));
    let v10 = u.at(g.idx(i1, j0));
    let v01 = u.at(g.idx(i0, j1));
    let v11 = u.at(g.idx(i1, j1));
    Ok(v00 * ((1.0 - tx) * (1.0 - ty)) + v10 * (tx * (1.0 - ty)) + v01 * ((1.0 - tx) * ty) + v11 * (tx * ty))
}

const FIELD_MAGIC: &str = "# glvortex-field v1";

/// Writes a field snapshot as CSV (`i,j,re,im` rows after the schema header).
pub fn write_field_csv<W: Write>(u: &ComplexField, mut w: W) -> Result<()> {
    let g = &u.grid;
    writeln!(
        w,
        "{FIELD_MAGIC} n={} L={} geometry={}",
        g.n(),
        g.side(),
        g.geometry().name()
    )?;
    writeln!(w, "i,j,re,im")?;
    let m = g.nodes();
    for j in 0..m {
        for i in 0..m {
            let k = g.idx(i, j);
            writeln!(w, "{i},{j},{},{}", u.re[k], u.im[k])?;
        }
    }
    Ok(())
}

/// Reads a snapshot written by [`write_field_csv`].
pub fn read_field_csv<R: BufRead>(r: R) -> Result<ComplexField> {
    let mut lines = r.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Schema("empty field file".into()))??;
    let rest = header
        .strip_prefix(FIELD_MAGIC)
        .ok_or_else(|| Error::Schema(format!("unexpected header {header:?}")))?;
    let mut n = None;
    let mut side = None;
    let mut geometry = None;
    for tok in rest.split_whitespace() {
        match tok.split_once('=') {
            Some(("n", v)) => n = v.parse::<usize>().ok(),
            Some(("L", v)) => side = v.parse::<f64>().ok(),
            Some(("geometry", "torus")) => geometry = Some(Geometry::Torus),
            Some(("geometry", "dirichlet")) => geometry = Some(Geometry::Dirichlet),
            _ => return Err(Error::Schema(format!("bad header token {tok:?}"))),
        }
    }
    let (Some(n), Some(side), Some(geometry)) = (n, side, geometry) else {
        return Err(Error::Schema(format!("incomplete header {header:?}")));
    };
    let grid = Grid::new(geometry, n, side)?;
    match lines.next() {
        Some(Ok(l)) if l.trim() == "i,j,re,im" => {}
        other => return Err(Error::Schema(format!("missing column header, got {other:?}"))),
    }
    let mut u = ComplexField::zeros(grid);
    let mut seen = 0usize;
    let m = grid.nodes();
    for line in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 4 {
            return Err(Error::Schema(format!("bad row {line:?}")));
        }
        let parse_err = |_| Error::Schema(format!("bad row {line:?}"));
        let i: usize = cols[0].trim().parse().map_err(|_| Error::Schema(format!("bad row {line:?}")))?;
        let j: usize = cols[1].trim().parse().map_err(|_| Error::Schema(format!("bad row {line:?}")))?;
        let re: f64 = cols[2].trim().parse().map_err(parse_err)?;
        let im: f64 = cols[3].trim().parse().map_err(parse_err)?;
        if i >= m || j >= m {
            return Err(Error::Schema(format!("index out of range in {line:?}")));
        }
        let k = grid.idx(i, j);
        u.re[k] = re;
        u.im[k] = im;
        seen += 1;
    }
    if seen != grid.len() {
        return Err(Error::Schema(format!("expected {} rows, got {seen}", grid.len())));
    }
    Ok(u)
}
