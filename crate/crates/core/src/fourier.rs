//! Truncated Fourier series used to parameterise initial data and test fields.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::grid::{Field1D, Field2D, Grid1D, Grid2D};
use crate::scalar::Real;

/// `mean + sum_k cos[k-1] cos(2 pi k x) + sin[k-1] sin(2 pi k x)`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Fourier1D {
    pub mean: f64,
    pub cos: Vec<f64>,
    pub sin: Vec<f64>,
}

impl Fourier1D {
    pub fn constant(mean: f64) -> Self {
        Self {
            mean,
            ..Self::default()
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        let mut v = self.mean;
        for (k, a) in self.cos.iter().enumerate() {
            v += a * (TAU * (k + 1) as f64 * x).cos();
        }
        for (k, b) in self.sin.iter().enumerate() {
            v += b * (TAU * (k + 1) as f64 * x).sin();
        }
        v
    }

    pub fn deriv(&self, x: f64) -> f64 {
        let mut v = 0.0;
        for (k, a) in self.cos.iter().enumerate() {
            let w = TAU * (k + 1) as f64;
            v -= a * w * (w * x).sin();
        }
        for (k, b) in self.sin.iter().enumerate() {
            let w = TAU * (k + 1) as f64;
            v += b * w * (w * x).cos();
        }
        v
    }

    pub fn max_mode(&self) -> usize {
        self.cos.len().max(self.sin.len())
    }

    /// Extrema of the series and of its derivative by dense sampling.
    pub fn dense_extrema(&self, samples: usize) -> DenseExtrema {
        let samples = samples.max(16);
        let mut ex = DenseExtrema::default();
        for i in 0..samples {
            let x = (i as f64 + 0.5) / samples as f64;
            ex.push(self.eval(x), self.deriv(x));
        }
        ex
    }

    pub fn sample<T: Real>(&self, g: &Grid1D<T>) -> Field1D<T> {
        Field1D::from_vec(
            (0..g.n())
                .map(|i| T::lit(self.eval(g.x(i).to_f64_lossy())))
                .collect(),
        )
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            mean: self.mean * s,
            cos: self.cos.iter().map(|c| c * s).collect(),
            sin: self.sin.iter().map(|c| c * s).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DenseExtrema {
    pub min: f64,
    pub max: f64,
    pub max_abs_deriv: f64,
}

impl Default for DenseExtrema {
    fn default() -> Self {
        Self {
            min: f64::INFINITY,
            max: f64::NEG_INFINITY,
            max_abs_deriv: 0.0,
        }
    }
}

impl DenseExtrema {
    fn push(&mut self, v: f64, d: f64) {
        self.min = self.min.min(v);
        self.max = self.max.max(v);
        self.max_abs_deriv = self.max_abs_deriv.max(d.abs());
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModeKind {
    /// `cos(2 pi k1 x) cos(2 pi k2 y)`
    Cc,
    Cs,
    Sc,
    Ss,
}

impl ModeKind {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "cc" => Some(Self::Cc),
            "cs" => Some(Self::Cs),
            "sc" => Some(Self::Sc),
            "ss" => Some(Self::Ss),
            _ => None,
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Cc => "cc",
            Self::Cs => "cs",
            Self::Sc => "sc",
            Self::Ss => "ss",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Mode2D {
    pub k1: u32,
    pub k2: u32,
    pub kind: ModeKind,
    pub amp: f64,
}

impl Mode2D {
    fn parts(&self, x: f64, y: f64) -> ((f64, f64), (f64, f64)) {
        let w1 = TAU * self.k1 as f64;
        let w2 = TAU * self.k2 as f64;
        let (fx, dfx) = match self.kind {
            ModeKind::Cc | ModeKind::Cs => ((w1 * x).cos(), -w1 * (w1 * x).sin()),
            ModeKind::Sc | ModeKind::Ss => ((w1 * x).sin(), w1 * (w1 * x).cos()),
        };
        let (fy, dfy) = match self.kind {
            ModeKind::Cc | ModeKind::Sc => ((w2 * y).cos(), -w2 * (w2 * y).sin()),
            ModeKind::Cs | ModeKind::Ss => ((w2 * y).sin(), w2 * (w2 * y).cos()),
        };
        ((fx, dfx), (fy, dfy))
    }
}

/// `mean + sum amp * X_k1(x) * Y_k2(y)` on the unit square.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Fourier2D {
    pub mean: f64,
    pub modes: Vec<Mode2D>,
}

impl Fourier2D {
    pub fn constant(mean: f64) -> Self {
        Self {
            mean,
            modes: Vec::new(),
        }
    }

    pub fn eval(&self, x: f64, y: f64) -> f64 {
        self.mean
            + self
                .modes
                .iter()
                .map(|m| {
                    let ((fx, _), (fy, _)) = m.parts(x, y);
                    m.amp * fx * fy
                })
                .sum::<f64>()
    }

    pub fn grad(&self, x: f64, y: f64) -> (f64, f64) {
        self.modes.iter().fold((0.0, 0.0), |(gx, gy), m| {
            let ((fx, dfx), (fy, dfy)) = m.parts(x, y);
            (gx + m.amp * dfx * fy, gy + m.amp * fx * dfy)
        })
    }

    pub fn max_mode(&self) -> usize {
        self.modes
            .iter()
            .map(|m| m.k1.max(m.k2) as usize)
            .max()
            .unwrap_or(0)
    }

    pub fn dense_min_max(&self, samples: usize) -> (f64, f64) {
        let samples = samples.max(16);
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for j in 0..samples {
            for i in 0..samples {
                let v = self.eval(
                    (i as f64 + 0.5) / samples as f64,
                    (j as f64 + 0.5) / samples as f64,
                );
                lo = lo.min(v);
                hi = hi.max(v);
            }
        }
        (lo, hi)
    }

    pub fn sample<T: Real>(&self, g: &Grid2D<T>) -> Field2D<T> {
        g.sample(|x, y| T::lit(self.eval(x.to_f64_lossy(), y.to_f64_lossy())))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derivative_matches_finite_difference() {
        let f = Fourier1D {
            mean: 1.0,
            cos: vec![0.2, -0.1],
            sin: vec![0.3, 0.0, 0.05],
        };
        let h = 1e-6;
        for i in 0..20 {
            let x = i as f64 / 20.0;
            let fd = (f.eval(x + h) - f.eval(x - h)) / (2.0 * h);
            assert!((fd - f.deriv(x)).abs() < 1e-6);
        }
    }

    #[test]
    fn dense_extrema_of_single_mode() {
        let f = Fourier1D {
            mean: 1.0,
            cos: vec![],
            sin: vec![0.3],
        };
        let ex = f.dense_extrema(4096);
        assert!((ex.min - 0.7).abs() < 1e-5);
        assert!((ex.max - 1.3).abs() < 1e-5);
        assert!((ex.max_abs_deriv - 0.3 * TAU).abs() < 1e-4);
    }

    #[test]
    fn mode_gradient_matches_finite_difference() {
        let f = Fourier2D {
            mean: 1.0,
            modes: vec![
                Mode2D { k1: 1, k2: 1, kind: ModeKind::Cc, amp: 0.5 },
                Mode2D { k1: 2, k2: 1, kind: ModeKind::Sc, amp: 0.1 },
            ],
        };
        let h = 1e-6;
        let (x, y) = (0.3, 0.71);
        let (gx, gy) = f.grad(x, y);
        assert!(((f.eval(x + h, y) - f.eval(x - h, y)) / (2.0 * h) - gx).abs() < 1e-6);
        assert!(((f.eval(x, y + h) - f.eval(x, y - h)) / (2.0 * h) - gy).abs() < 1e-6);
    }
}
