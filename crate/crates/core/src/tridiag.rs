//! Symmetric tridiagonal eigenvalues by Sturm-sequence bisection, with
//! inverse iteration for eigenvectors.

/// Symmetric tridiagonal matrix: `diag` of length n, `off` of length n-1.
#[derive(Debug, Clone)]
pub struct SymTridiag {
    pub diag: Vec<f64>,
    pub off: Vec<f64>,
}

impl SymTridiag {
    pub fn new(diag: Vec<f64>, off: Vec<f64>) -> Self {
        assert!(!diag.is_empty(), "empty matrix");
        assert_eq!(off.len() + 1, diag.len(), "off-diagonal length mismatch");
        SymTridiag { diag, off }
    }

    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let n = self.len();
        (0..n)
            .map(|i| {
                let mut s = self.diag[i] * x[i];
                if i > 0 {
                    s += self.off[i - 1] * x[i - 1];
                }
                if i + 1 < n {
                    s += self.off[i] * x[i + 1];
                }
                s
            })
            .collect()
    }

    fn gershgorin(&self) -> (f64, f64) {
        let n = self.len();
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..n {
            let mut r = 0.0;
            if i > 0 {
                r += self.off[i - 1].abs();
            }
            if i + 1 < n {
                r += self.off[i].abs();
            }
            lo = lo.min(self.diag[i] - r);
            hi = hi.max(self.diag[i] + r);
        }
        let pad = 1e-12 * lo.abs().max(hi.abs()).max(1.0);
        (lo - pad, hi + pad)
    }

    /// Number of eigenvalues strictly below `x`.
    pub fn count_below(&self, x: f64) -> usize {
        let tiny = f64::MIN_POSITIVE.sqrt();
        let mut count = 0;
        let mut q = self.diag[0] - x;
        if q < 0.0 {
            count += 1;
        }
        for i in 1..self.len() {
            let qq = if q == 0.0 { tiny } else { q };
            q = self.diag[i] - x - self.off[i - 1] * self.off[i - 1] / qq;
            if q < 0.0 {
                count += 1;
            }
        }
        count
    }

    /// Number of eigenvalues strictly above `x`.
    pub fn count_above(&self, x: f64) -> usize {
        // count_below(x) counts λ < x; eigenvalues equal to x are measure-zero here.
        self.len() - self.count_below(x)
    }

    /// The `j`-th smallest eigenvalue (0-based).
    pub fn eigenvalue_ascending(&self, j: usize) -> f64 {
        assert!(j < self.len());
        let (mut lo, mut hi) = self.gershgorin();
        for _ in 0..300 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.count_below(mid) > j {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        0.5 * (lo + hi)
    }

    /// The `k` largest eigenvalues, in descending order.
    pub fn top_eigenvalues(&self, k: usize) -> Vec<f64> {
        let n = self.len();
        (0..k.min(n))
            .map(|i| self.eigenvalue_ascending(n - 1 - i))
            .collect()
    }

    /// Unit eigenvector for an (accurately known) eigenvalue.
    pub fn eigenvector(&self, lambda: f64) -> Vec<f64> {
        let n = self.len();
        let scale = self
            .diag
            .iter()
            .chain(self.off.iter())
            .fold(0.0f64, |m, v| m.max(v.abs()));
        let shift = lambda + 1e-13 * scale.max(1.0);
        let d: Vec<f64> = self.diag.iter().map(|v| v - shift).collect();
        let mut x: Vec<f64> = (0..n)
            .map(|i| 1.0 + 0.25 * ((i as f64) * 0.618_033_988_75).fract())
            .collect();
        for _ in 0..4 {
            solve_pivoted(&self.off, &d, &self.off, &mut x);
            let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
            x.iter_mut().for_each(|v| *v /= norm);
        }
        x
    }
}

/// Solves a general tridiagonal system with partial pivoting; `b` is
/// overwritten with the solution. Zero pivots are nudged, which is what
/// inverse iteration wants.
pub fn solve_pivoted(lower: &[f64], diag: &[f64], upper: &[f64], b: &mut [f64]) {
    let n = diag.len();
    let tiny = f64::MIN_POSITIVE.sqrt();
    if n == 1 {
        b[0] /= if diag[0] == 0.0 { tiny } else { diag[0] };
        return;
    }
    let dl = lower.to_vec();
    let mut d = diag.to_vec();
    let mut du = upper.to_vec();
    let mut du2 = vec![0.0; n];
    for i in 0..n - 1 {
        if d[i].abs() >= dl[i].abs() {
            if d[i] == 0.0 {
                d[i] = tiny;
            }
            let fact = dl[i] / d[i];
            d[i + 1] -= fact * du[i];
            b[i + 1] -= fact * b[i];
        } else {
            let fact = d[i] / dl[i];
            d[i] = dl[i];
            let temp = d[i + 1];
            d[i + 1] = du[i] - fact * temp;
            if i + 2 < n {
                du2[i] = du[i + 1];
                du[i + 1] = -fact * du2[i];
            }
            du[i] = temp;
            let tb = b[i];
            b[i] = b[i + 1];
            b[i + 1] = tb - fact * b[i + 1];
        }
    }
    if d[n - 1] == 0.0 {
        d[n - 1] = tiny;
    }
    b[n - 1] /= d[n - 1];
    b[n - 2] = (b[n - 2] - du[n - 2] * b[n - 1]) / d[n - 2];
    for i in (0..n.saturating_sub(2)).rev() {
        b[i] = (b[i] - du[i] * b[i + 1] - du2[i] * b[i + 2]) / d[i];
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn laplacian(n: usize) -> SymTridiag {
        SymTridiag::new(vec![-2.0; n], vec![1.0; n - 1])
    }

    #[test]
    fn discrete_laplacian_spectrum() {
        let n = 50;
        let t = laplacian(n);
        let top = t.top_eigenvalues(3);
        for (k, v) in top.iter().enumerate() {
            let theta = std::f64::consts::PI * (k + 1) as f64 / (n + 1) as f64;
            let exact = -2.0 + 2.0 * theta.cos();
            assert!((v - exact).abs() < 1e-13, "{v} vs {exact}");
        }
    }

    #[test]
    fn eigenvector_residual() {
        let n = 40;
        let diag: Vec<f64> = (0..n).map(|i| -2.0 + 0.1 * (i as f64).sin()).collect();
        let t = SymTridiag::new(diag, vec![1.0; n - 1]);
        let lam = t.top_eigenvalues(1)[0];
        let v = t.eigenvector(lam);
        let tv = t.apply(&v);
        let res = tv
            .iter()
            .zip(&v)
            .map(|(a, b)| (a - lam * b).abs())
            .fold(0.0, f64::max);
        assert!(res < 1e-10, "residual {res}");
    }

    #[test]
    fn pivoted_solver_matches_product() {
        let lower = [3.0, -1.0, 0.5, 2.0];
        let diag = [0.0, 4.0, 1.0, -2.0, 1.0];
        let upper = [1.0, 2.0, -3.0, 0.25];
        let x = [1.0, -2.0, 0.5, 3.0, -1.0];
        let mut b: Vec<f64> = (0..5)
            .map(|i| {
                let mut s = diag[i] * x[i];
                if i > 0 {
                    s += lower[i - 1] * x[i - 1];
                }
                if i < 4 {
                    s += upper[i] * x[i + 1];
                }
                s
            })
            .collect();
        solve_pivoted(&lower, &diag, &upper, &mut b);
        for (a, e) in b.iter().zip(&x) {
            assert!((a - e).abs() < 1e-12);
        }
    }
}
