//! Jacobi theta function `θ₁` for the square lattice (nome `q = e^{-π}`).
//!
//! `θ₁(ζ) = 2 Σ_{n≥0} (-1)^n q^{(n+½)²} sin((2n+1)ζ)` is odd, has simple
//! zeros exactly on the lattice `πℤ + iπℤ`, and satisfies
//! `θ₁(ζ+π) = -θ₁(ζ)`, `θ₁(ζ+iπ) = -q^{-1} e^{-2iζ} θ₁(ζ)`.

use num_complex::Complex64;

/// Truncated theta series with precomputed coefficients.
#[derive(Clone, Debug)]
pub struct Theta {
    coeffs: Vec<f64>,
}

impl Theta {
    /// `terms` series terms; 12 already reach round-off for `|Im ζ| ≤ π`.
    pub fn new(terms: usize) -> Self {
        let q = (-std::f64::consts::PI).exp();
        let coeffs = (0..terms.max(1))
            .map(|n| {
                let s = if n % 2 == 0 { 2.0 } else { -2.0 };
                s * q.powf((n as f64 + 0.5).powi(2))
            })
            .collect();
        Self { coeffs }
    }

    pub fn terms(&self) -> usize {
        self.coeffs.len()
    }

    pub fn value(&self, zeta: Complex64) -> Complex64 {
        self.coeffs
            .iter()
            .enumerate()
            .map(|(n, c)| ((2 * n + 1) as f64 * zeta).sin() * *c)
            .sum()
    }

    pub fn derivative(&self, zeta: Complex64) -> Complex64 {
        self.coeffs
            .iter()
            .enumerate()
            .map(|(n, c)| {
                let m = (2 * n + 1) as f64;
                (m * zeta).cos() * (c * m)
            })
            .sum()
    }

    /// `(θ₁(ζ), θ₁'(ζ))`.
    pub fn value_and_derivative(&self, zeta: Complex64) -> (Complex64, Complex64) {
        let mut v = Complex64::new(0.0, 0.0);
        let mut d = Complex64::new(0.0, 0.0);
        for (n, c) in self.coeffs.iter().enumerate() {
            let m = (2 * n + 1) as f64;
            let a = m * zeta;
            v += a.sin() * *c;
            d += a.cos() * (c * m);
        }
        (v, d)
    }
}

impl Default for Theta {
    fn default() -> Self {
        Self::new(16)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn quasi_periodicity() {
        let th = Theta::default();
        let q = (-PI).exp();
        for &(a, b) in &[(0.3, 0.2), (-1.1, 0.7), (2.0, -0.4)] {
            let z = Complex64::new(a, b);
            let v = th.value(z);
            assert!((th.value(z + PI) + v).norm() < 1e-12 * (1.0 + v.norm()));
            let shifted = -v * (Complex64::new(0.0, -2.0) * z).exp() / q;
            let w = th.value(z + Complex64::new(0.0, PI));
            assert!((w - shifted).norm() < 1e-11 * (1.0 + w.norm()));
        }
    }

    #[test]
    fn zeros_on_lattice_and_derivative_matches_difference() {
        let th = Theta::default();
        assert!(th.value(Complex64::new(0.0, 0.0)).norm() < 1e-15);
        assert!(th.value(Complex64::new(PI, PI)).norm() < 1e-10);
        let z = Complex64::new(0.4, 0.3);
        let h = 1e-6;
        let fd = (th.value(z + h) - th.value(z - h)) / (2.0 * h);
        assert!((fd - th.derivative(z)).norm() < 1e-8);
        let (v, d) = th.value_and_derivative(z);
        assert_eq!(v, th.value(z));
        assert_eq!(d, th.derivative(z));
    }
}
