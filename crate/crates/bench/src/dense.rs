//! Dense random-orthogonal embedding for robustness testing: the block
//! selectors `U^(i)` are replaced by `U^(i) Q` with `Q` the orthogonal
//! factor of a seeded Gaussian matrix. The family stays row-orthonormal
//! with mutually orthogonal row spaces, so every certified constant is
//! unchanged; only the coordinates are scrambled.

use chainlb_core::instance::FiniteSumInstance;
use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

/// Largest ambient dimension the dense mode accepts.
pub const DENSE_MAX_DIM: usize = 2048;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("dense mode supports d <= {DENSE_MAX_DIM}, got {0}")]
pub struct TooLarge(pub usize);

pub struct DenseRotated<'a> {
    inner: &'a FiniteSumInstance,
    q: DMatrix<f64>,
}

/// Haar-distributed orthogonal matrix (QR with the sign of `diag(R)` fixed).
pub fn random_orthogonal(d: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g = DMatrix::from_fn(d, d, |_, _| StandardNormal.sample(&mut rng));
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..d {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q
}

impl<'a> DenseRotated<'a> {
    pub fn new(inner: &'a FiniteSumInstance, seed: u64) -> Result<Self, TooLarge> {
        let d = inner.dim();
        if d > DENSE_MAX_DIM {
            return Err(TooLarge(d));
        }
        Ok(Self { inner, q: random_orthogonal(d, seed) })
    }

    pub fn dim(&self) -> usize {
        self.q.nrows()
    }

    pub fn rotation(&self) -> &DMatrix<f64> {
        &self.q
    }

    /// `max |QᵀQ − I|`.
    pub fn orthogonality_error(&self) -> f64 {
        let d = self.dim();
        (self.q.transpose() * &self.q - DMatrix::identity(d, d)).amax()
    }

    fn forward(&self, x: &[f64]) -> Vec<f64> {
        (&self.q * DVector::from_column_slice(x)).as_slice().to_vec()
    }

    fn back(&self, g: &[f64], out: &mut [f64]) {
        let v = self.q.tr_mul(&DVector::from_column_slice(g));
        out.copy_from_slice(v.as_slice());
    }

    /// Maps a point of the original coordinates into the rotated ones.
    pub fn pull_back(&self, y: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; y.len()];
        self.back(y, &mut out);
        out
    }

    pub fn component_into(&self, i: usize, x: &[f64], grad: &mut [f64]) -> f64 {
        let y = self.forward(x);
        let mut g = vec![0.0; y.len()];
        let v = self.inner.component_into(i, &y, &mut g);
        self.back(&g, grad);
        v
    }

    pub fn full_into(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        let y = self.forward(x);
        let mut g = vec![0.0; y.len()];
        let v = self.inner.full_into(&y, &mut g);
        self.back(&g, grad);
        v
    }

    pub fn residual(&self, x: &[f64]) -> f64 {
        self.inner.residual(&self.forward(x))
    }

    /// Counts pairs violating `E_i‖∇f_i(x) − ∇f_i(y)‖² ≤ L²‖x − y‖²`.
    pub fn avg_smooth_violations(&self, pairs: &[(Vec<f64>, Vec<f64>)], rel_slack: f64) -> usize {
        let d = self.dim();
        let l2 = self.inner.meta.avg_smooth_l.powi(2);
        let (mut gx, mut gy) = (vec![0.0; d], vec![0.0; d]);
        pairs
            .iter()
            .filter(|(x, y)| {
                let mut avg = 0.0;
                for i in 0..self.inner.n {
                    self.component_into(i, x, &mut gx);
                    self.component_into(i, y, &mut gy);
                    avg += gx.iter().zip(&gy).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
                }
                avg /= self.inner.n as f64;
                let dx: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
                avg > l2 * dx * (1.0 + rel_slack)
            })
            .count()
    }
}
