//! Gauss rules from the Golub–Welsch eigenproblem.

use nalgebra::DMatrix;

/// Nodes and weights (summing to 1) for a symmetric Jacobi matrix with the
/// given off-diagonal recurrence coefficients.
fn golub_welsch(n: usize, off: impl Fn(usize) -> f64) -> Vec<(f64, f64)> {
    if n == 1 {
        return vec![(0.0, 1.0)];
    }
    let mut j = DMatrix::<f64>::zeros(n, n);
    for k in 1..n {
        let b = off(k);
        j[(k - 1, k)] = b;
        j[(k, k - 1)] = b;
    }
    let eig = j.symmetric_eigen();
    let mut out: Vec<(f64, f64)> = (0..n)
        .map(|i| (eig.eigenvalues[i], eig.eigenvectors[(0, i)].powi(2)))
        .collect();
    out.sort_by(|a, b| a.0.total_cmp(&b.0));
    out
}

/// Gauss–Legendre on [−1, 1] for the uniform probability measure.
pub fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    golub_welsch(n, |k| {
        let k = k as f64;
        k / (4.0 * k * k - 1.0).sqrt()
    })
}

/// Gauss–Hermite for the standard normal distribution.
pub fn gauss_hermite(n: usize) -> Vec<(f64, f64)> {
    golub_welsch(n, |k| (k as f64).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn moments() {
        let gl = gauss_legendre(6);
        let m2: f64 = gl.iter().map(|(x, w)| w * x * x).sum();
        assert!((m2 - 1.0 / 3.0).abs() < 1e-14);
        let gh = gauss_hermite(8);
        let m4: f64 = gh.iter().map(|(x, w)| w * x.powi(4)).sum();
        assert!((m4 - 3.0).abs() < 1e-12);
        let cos: f64 = gauss_hermite(20).iter().map(|(x, w)| w * (1.3 * x).cos()).sum();
        assert!((cos - (-1.3f64 * 1.3 / 2.0).exp()).abs() < 1e-12);
    }
}
