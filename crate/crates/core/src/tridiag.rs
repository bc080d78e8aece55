//! Symmetric tridiagonal matrices: the Hessians of every chain function in
//! this crate have this shape, so exact spectra and linear solves reduce to
//! Sturm-sequence bisection and the Thomas algorithm.

use alloc::vec;
use alloc::vec::Vec;

use crate::math::abs;

#[derive(Clone, Debug, PartialEq)]
pub struct SymTridiag {
    /// Main diagonal, length m.
    pub diag: Vec<f64>,
    /// Off-diagonal, length m - 1 (`off[k]` couples k and k + 1).
    pub off: Vec<f64>,
}

impl SymTridiag {
    pub fn new(diag: Vec<f64>, off: Vec<f64>) -> Self {
        assert!(
            diag.len() == off.len() + 1 || (diag.is_empty() && off.is_empty()),
            "off-diagonal must have exactly one entry fewer than the diagonal"
        );
        Self { diag, off }
    }

    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    pub fn matvec(&self, x: &[f64], out: &mut [f64]) {
        let m = self.dim();
        assert_eq!(x.len(), m);
        assert_eq!(out.len(), m);
        for k in 0..m {
            let mut acc = self.diag[k] * x[k];
            if k > 0 {
                acc += self.off[k - 1] * x[k - 1];
            }
            if k + 1 < m {
                acc += self.off[k] * x[k + 1];
            }
            out[k] = acc;
        }
    }

    /// `x^T A x`.
    pub fn quad_form(&self, x: &[f64]) -> f64 {
        let mut out = vec![0.0; x.len()];
        self.matvec(x, &mut out);
        crate::math::dot(x, &out)
    }

    /// Number of eigenvalues strictly less than `shift` (Sturm count from the
    /// LDL^T pivots of `A - shift I`).
    pub fn count_below(&self, shift: f64) -> usize {
        let mut count = 0;
        let mut pivot = 1.0;
        for k in 0..self.dim() {
            let coupling = if k == 0 { 0.0 } else { self.off[k - 1] * self.off[k - 1] };
            pivot = (self.diag[k] - shift) - coupling / pivot;
            if pivot == 0.0 {
                pivot = -f64::EPSILON * (1.0 + abs(shift));
            }
            if pivot < 0.0 {
                count += 1;
            }
        }
        count
    }

    /// Gershgorin enclosure of the spectrum.
    pub fn gershgorin(&self) -> (f64, f64) {
        let m = self.dim();
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for k in 0..m {
            let mut r = 0.0;
            if k > 0 {
                r += abs(self.off[k - 1]);
            }
            if k + 1 < m {
                r += abs(self.off[k]);
            }
            lo = lo.min(self.diag[k] - r);
            hi = hi.max(self.diag[k] + r);
        }
        (lo, hi)
    }

    /// The `index`-th smallest eigenvalue (0-based) by bisection, to absolute
    /// accuracy `tol`.
    pub fn eigenvalue(&self, index: usize, tol: f64) -> f64 {
        assert!(index < self.dim());
        let (mut lo, mut hi) = self.gershgorin();
        let pad = 1e-12 * (1.0 + abs(lo).max(abs(hi)));
        lo -= pad;
        hi += pad;
        // count_below(lo) = 0, count_below(hi) = m
        for _ in 0..200 {
            if hi - lo <= tol {
                break;
            }
            let mid = 0.5 * (lo + hi);
            if self.count_below(mid) > index {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        0.5 * (lo + hi)
    }

    /// (smallest, largest) eigenvalue.
    pub fn extreme_eigenvalues(&self, tol: f64) -> (f64, f64) {
        let m = self.dim();
        (self.eigenvalue(0, tol), self.eigenvalue(m - 1, tol))
    }

    /// All eigenvalues, ascending.
    pub fn eigenvalues(&self, tol: f64) -> Vec<f64> {
        (0..self.dim()).map(|k| self.eigenvalue(k, tol)).collect()
    }

    /// Solve `A x = rhs` with the Thomas algorithm (no pivoting; intended for
    /// the diagonally dominant / SPD systems arising here).
    pub fn solve(&self, rhs: &[f64]) -> Option<Vec<f64>> {
        let m = self.dim();
        if rhs.len() != m || m == 0 {
            return None;
        }
        let mut c = vec![0.0; m];
        let mut d = vec![0.0; m];
        let mut denom = self.diag[0];
        if denom == 0.0 {
            return None;
        }
        if m > 1 {
            c[0] = self.off[0] / denom;
        }
        d[0] = rhs[0] / denom;
        for k in 1..m {
            denom = self.diag[k] - self.off[k - 1] * c[k - 1];
            if denom == 0.0 || !denom.is_finite() {
                return None;
            }
            if k + 1 < m {
                c[k] = self.off[k] / denom;
            }
            d[k] = (rhs[k] - self.off[k - 1] * d[k - 1]) / denom;
        }
        let mut x = d;
        for k in (0..m - 1).rev() {
            x[k] -= c[k] * x[k + 1];
        }
        Some(x)
    }

    /// `self + shift * I`.
    pub fn shifted(mut self, shift: f64) -> Self {
        for v in &mut self.diag {
            *v += shift;
        }
        self
    }

    pub fn scaled(mut self, factor: f64) -> Self {
        for v in self.diag.iter_mut().chain(self.off.iter_mut()) {
            *v *= factor;
        }
        self
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn laplacian(m: usize) -> SymTridiag {
        SymTridiag::new(vec![2.0; m], vec![-1.0; m - 1])
    }

    #[test]
    fn dirichlet_laplacian_spectrum() {
        // eigenvalues 2 - 2 cos(k pi / (m + 1))
        let m = 12;
        let eig = laplacian(m).eigenvalues(1e-13);
        for (k, e) in eig.iter().enumerate() {
            let exact = 2.0 - 2.0 * libm::cos((k + 1) as f64 * core::f64::consts::PI / (m + 1) as f64);
            assert!((e - exact).abs() < 1e-11, "{k}: {e} vs {exact}");
        }
    }

    #[test]
    fn thomas_solves_laplacian() {
        let a = laplacian(7);
        let x_true: Vec<f64> = (0..7).map(|k| k as f64 - 2.5).collect();
        let mut b = vec![0.0; 7];
        a.matvec(&x_true, &mut b);
        let x = a.solve(&b).unwrap();
        for (u, v) in x.iter().zip(&x_true) {
            assert!((u - v).abs() < 1e-12);
        }
    }

    #[test]
    fn one_by_one() {
        let a = SymTridiag::new(vec![3.5], vec![]);
        assert_eq!(a.count_below(3.0), 0);
        assert_eq!(a.count_below(4.0), 1);
        assert!((a.eigenvalue(0, 1e-14) - 3.5).abs() < 1e-12);
        assert_eq!(a.solve(&[7.0]).unwrap(), vec![2.0]);
    }
}
