//! Central-cut ellipsoid method state.
//!
//! The ellipsoid is `{x : (x − c)ᵀ P⁻¹ (x − c) ≤ 1}`. A cut with vector `g`
//! keeps the half `{x : gᵀ(x − c) ≤ 0}` and replaces the ellipsoid by the
//! minimum-volume ellipsoid containing it.

#[derive(Debug, Clone)]
pub struct Ellipsoid {
    dim: usize,
    center: Vec<f64>,
    /// Row-major `dim × dim`, symmetric positive definite.
    shape: Vec<f64>,
    scratch: Vec<f64>,
    cuts: usize,
}

impl Ellipsoid {
    /// Ball of `radius` around `center`. Needs at least two dimensions.
    pub fn ball(center: Vec<f64>, radius: f64) -> Self {
        let dim = center.len();
        assert!(dim >= 2, "ellipsoid method needs dimension >= 2, got {dim}");
        let mut shape = vec![0.0; dim * dim];
        for i in 0..dim {
            shape[i * dim + i] = radius * radius;
        }
        Self {
            dim,
            center,
            shape,
            scratch: vec![0.0; dim],
            cuts: 0,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn center(&self) -> &[f64] {
        &self.center
    }

    pub fn shape(&self) -> &[f64] {
        &self.shape
    }

    pub fn cuts(&self) -> usize {
        self.cuts
    }

    /// `√(gᵀ P g)`: half the width of the ellipsoid along `g`. For an
    /// objective cut this bounds how far the centre value can be above the
    /// minimum over the ellipsoid.
    pub fn width_along(&self, g: &[f64]) -> f64 {
        let n = self.dim;
        let mut acc = 0.0;
        for i in 0..n {
            let row = &self.shape[i * n..(i + 1) * n];
            let pg: f64 = row.iter().zip(g).map(|(a, b)| a * b).sum();
            acc += g[i] * pg;
        }
        acc.max(0.0).sqrt()
    }

    /// Applies a central cut. Returns `false` (and leaves the ellipsoid
    /// untouched) when `g` has zero width, i.e. it is zero or the shape has
    /// collapsed along it.
    pub fn cut(&mut self, g: &[f64]) -> bool {
        let n = self.dim;
        debug_assert_eq!(g.len(), n);
        for i in 0..n {
            let row = &self.shape[i * n..(i + 1) * n];
            self.scratch[i] = row.iter().zip(g).map(|(a, b)| a * b).sum();
        }
        let gpg: f64 = self.scratch.iter().zip(g).map(|(a, b)| a * b).sum();
        if !(gpg > 0.0) || !gpg.is_finite() {
            return false;
        }
        let width = gpg.sqrt();
        let nf = n as f64;
        for (c, b) in self.center.iter_mut().zip(&self.scratch) {
            *c -= b / width / (nf + 1.0);
        }
        let scale = nf * nf / (nf * nf - 1.0);
        let k = 2.0 / ((nf + 1.0) * gpg);
        for i in 0..n {
            for j in i..n {
                let v = scale * (self.shape[i * n + j] - k * self.scratch[i] * self.scratch[j]);
                self.shape[i * n + j] = v;
                self.shape[j * n + i] = v;
            }
        }
        self.cuts += 1;
        true
    }
}

/// Per-cut volume ratio bound `e^(−1/(2(n+1)))` of the central-cut method.
pub fn volume_ratio_bound(dim: usize) -> f64 {
    (-1.0 / (2.0 * (dim as f64 + 1.0))).exp()
}
