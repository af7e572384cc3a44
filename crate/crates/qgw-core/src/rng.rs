//! Seeded sampling of random complex matrices.

use alloc::vec::Vec;

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

use crate::linalg::{c, identity, zeros, ComplexMatrix, ComplexVector, C64};

/// Deterministic generator; identical seeds yield bit-identical draws.
pub struct SeededRng {
    inner: ChaCha8Rng,
}

impl SeededRng {
    pub fn new(seed: u64) -> Self {
        SeededRng { inner: ChaCha8Rng::seed_from_u64(seed) }
    }

    /// Uniform in `[0, 1)` with 53 random bits.
    pub fn uniform(&mut self) -> f64 {
        (self.inner.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn uniform_in(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    pub fn below(&mut self, n: usize) -> usize {
        (self.inner.next_u64() % n as u64) as usize
    }

    pub fn gaussian(&mut self) -> f64 {
        let u1 = 1.0 - self.uniform();
        let u2 = self.uniform();
        libm::sqrt(-2.0 * libm::log(u1)) * libm::cos(2.0 * core::f64::consts::PI * u2)
    }

    pub fn complex_gaussian(&mut self) -> C64 {
        c(self.gaussian(), self.gaussian()) * core::f64::consts::FRAC_1_SQRT_2
    }

    pub fn gaussian_matrix(&mut self, rows: usize, cols: usize) -> ComplexMatrix {
        let mut m = zeros(rows, cols);
        for j in 0..cols {
            for i in 0..rows {
                m[(i, j)] = self.complex_gaussian();
            }
        }
        m
    }

    pub fn unit_vector(&mut self, n: usize) -> ComplexVector {
        let v = ComplexVector::from_iterator(n, (0..n).map(|_| self.complex_gaussian()));
        let norm = v.norm();
        v / c(norm, 0.0)
    }

    /// Haar-distributed unitary (QR of a Gaussian matrix with phase correction).
    pub fn unitary(&mut self, n: usize) -> ComplexMatrix {
        if n == 0 {
            return zeros(0, 0);
        }
        let qr = self.gaussian_matrix(n, n).qr();
        let (mut q, r) = (qr.q(), qr.r());
        for j in 0..n {
            let d = r[(j, j)];
            let phase = if d.norm() > 0.0 { d / c(d.norm(), 0.0) } else { c(1.0, 0.0) };
            let col = q.column(j) * phase;
            q.set_column(j, &col);
        }
        q
    }

    pub fn hermitian(&mut self, n: usize) -> ComplexMatrix {
        let g = self.gaussian_matrix(n, n);
        (&g + g.adjoint()) * c(0.5, 0.0)
    }

    /// Full-rank density matrix with spectrum bounded away from zero.
    pub fn density(&mut self, n: usize) -> ComplexMatrix {
        let g = self.gaussian_matrix(n, n);
        let m = &g * g.adjoint() + identity(n) * c(0.25 * n as f64, 0.0);
        let tr = m.trace();
        m / tr
    }

    /// Strictly positive weights summing to one.
    pub fn simplex(&mut self, n: usize) -> Vec<f64> {
        let w: Vec<f64> = (0..n).map(|_| 0.5 + self.uniform()).collect();
        let s: f64 = w.iter().sum();
        w.into_iter().map(|x| x / s).collect()
    }
}
