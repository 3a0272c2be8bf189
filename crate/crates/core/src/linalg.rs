//! Thin layer over nalgebra's Hermitian eigensolver with a deterministic
//! ordering and phase convention, plus the handful of norms used everywhere.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

pub type C64 = Complex64;
pub type Mat = DMatrix<C64>;
pub type Vector = DVector<C64>;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);

#[derive(Debug, Clone)]
pub struct Eigh {
    /// Ascending.
    pub values: Vec<f64>,
    /// Columns are eigenvectors; the first component above 1e-12 in modulus is
    /// real and positive.
    pub vectors: Mat,
}

pub fn hermitian_part(m: &Mat) -> Mat {
    (m + m.adjoint()).scale(0.5)
}

/// Largest entrywise modulus of `m - m^†`.
pub fn hermitian_defect(m: &Mat) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0f64;
    for j in 0..n {
        for i in j..n {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

pub fn max_abs(m: &Mat) -> f64 {
    m.iter().fold(0.0f64, |acc, z| acc.max(z.norm()))
}

/// Hermitian up to 1e-12 relative to the largest entry (absolute for tiny matrices).
pub fn is_hermitian(m: &Mat) -> bool {
    m.is_square() && hermitian_defect(m) <= 1e-12 * max_abs(m).max(1.0)
}

pub fn eigh(m: &Mat) -> Eigh {
    debug_assert!(m.is_square());
    let n = m.nrows();
    if n == 0 {
        return Eigh {
            values: vec![],
            vectors: Mat::zeros(0, 0),
        };
    }
    let se = hermitian_part(m).symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    // stable sort keeps solver order on exact ties
    order.sort_by(|&a, &b| se.eigenvalues[a].total_cmp(&se.eigenvalues[b]));
    let mut vectors = Mat::zeros(n, n);
    let mut values = Vec::with_capacity(n);
    for (col, &k) in order.iter().enumerate() {
        values.push(se.eigenvalues[k]);
        let v = se.eigenvectors.column(k);
        let phase = v
            .iter()
            .find(|z| z.norm() > 1e-12)
            .map(|z| z.conj() / z.norm())
            .unwrap_or(ONE);
        for row in 0..n {
            vectors[(row, col)] = v[row] * phase;
        }
    }
    Eigh { values, vectors }
}

pub fn eigvalsh(m: &Mat) -> Vec<f64> {
    if m.nrows() == 0 {
        return vec![];
    }
    let mut v: Vec<f64> = hermitian_part(m)
        .symmetric_eigenvalues()
        .iter()
        .copied()
        .collect();
    v.sort_by(f64::total_cmp);
    v
}

pub fn min_eigenvalue(m: &Mat) -> f64 {
    eigvalsh(m).first().copied().unwrap_or(f64::INFINITY)
}

/// Operator norm. Hermitian input uses the spectrum directly; anything else
/// goes through `M^† M`.
pub fn spectral_norm(m: &Mat) -> f64 {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0.0;
    }
    if is_hermitian(m) {
        let ev = eigvalsh(m);
        return ev[0].abs().max(ev[ev.len() - 1].abs());
    }
    let g = if m.nrows() >= m.ncols() {
        m.adjoint() * m
    } else {
        m * m.adjoint()
    };
    eigvalsh(&g).last().copied().unwrap_or(0.0).max(0.0).sqrt()
}

pub fn frobenius(m: &Mat) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn vector_norm(v: &Vector) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn kron(a: &Mat, b: &Mat) -> Mat {
    a.kronecker(b)
}

pub fn identity(n: usize) -> Mat {
    Mat::identity(n, n)
}

pub fn diag(values: &[f64]) -> Mat {
    Mat::from_diagonal(&Vector::from_iterator(
        values.len(),
        values.iter().map(|&x| C64::new(x, 0.0)),
    ))
}

/// `f(M)` for Hermitian `M` via the spectral decomposition.
pub fn hermitian_function(m: &Mat, f: impl Fn(f64) -> C64) -> Mat {
    let e = eigh(m);
    let n = m.nrows();
    let mut scaled = e.vectors.clone();
    for (j, &lam) in e.values.iter().enumerate() {
        let fj = f(lam);
        for i in 0..n {
            scaled[(i, j)] *= fj;
        }
    }
    scaled * e.vectors.adjoint()
}

/// Maximum absolute difference between two sorted spectra of equal length.
pub fn spectrum_distance(a: &[f64], b: &[f64]) -> f64 {
    if a.len() != b.len() {
        return f64::INFINITY;
    }
    a.iter()
        .zip(b)
        .fold(0.0f64, |acc, (x, y)| acc.max((x - y).abs()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Mat {
        Mat::from_row_slice(
            3,
            3,
            &[
                C64::new(2.0, 0.0),
                C64::new(0.0, 1.0),
                C64::new(0.5, 0.0),
                C64::new(0.0, -1.0),
                C64::new(1.0, 0.0),
                C64::new(0.0, 0.0),
                C64::new(0.5, 0.0),
                C64::new(0.0, 0.0),
                C64::new(-3.0, 0.0),
            ],
        )
    }

    #[test]
    fn eigh_reconstructs_and_orders() {
        let m = sample();
        let e = eigh(&m);
        assert!(e.values.windows(2).all(|w| w[0] <= w[1]));
        let rebuilt = &e.vectors * diag(&e.values) * e.vectors.adjoint();
        assert!(max_abs(&(rebuilt - &m)) < 1e-13);
        let gram = e.vectors.adjoint() * &e.vectors;
        assert!(max_abs(&(gram - identity(3))) < 1e-13);
    }

    #[test]
    fn eigh_phase_convention() {
        let e = eigh(&sample());
        for j in 0..3 {
            let first = e.vectors.column(j).iter().find(|z| z.norm() > 1e-12).copied().unwrap();
            assert!(first.im.abs() < 1e-15 && first.re > 0.0);
        }
    }

    #[test]
    fn spectral_norm_of_non_hermitian() {
        // [[0, 2], [0, 0]] has singular values {2, 0}
        let m = Mat::from_row_slice(2, 2, &[ZERO, C64::new(2.0, 0.0), ZERO, ZERO]);
        assert!((spectral_norm(&m) - 2.0).abs() < 1e-14);
        assert!((spectral_norm(&sample()) - eigvalsh(&sample())[0].abs()).abs() < 1e-13);
    }

    #[test]
    fn hermitian_function_exp_matches_diagonal() {
        let m = diag(&[0.0, 1.0, -2.0]);
        let e = hermitian_function(&m, |x| C64::new(x.exp(), 0.0));
        assert!((e[(1, 1)].re - 1f64.exp()).abs() < 1e-14);
        assert!((e[(2, 2)].re - (-2f64).exp()).abs() < 1e-15);
    }
}
