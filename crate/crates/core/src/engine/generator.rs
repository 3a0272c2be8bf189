//! The Lie-Schwinger generator. `P⁻` has rank one, so every `(S)_j` and their
//! sum has the form `S = s e_v† − e_v s†` with `s ∈ ran P⁺`. Commutators with
//! such an `S` cost `O(D²)` instead of a dense product.

use crate::lattice::Interval;
use crate::linalg::{self, Mat, Vector, C64, ZERO};
use crate::operator::ChainSpec;

#[derive(Debug, Clone, PartialEq)]
pub struct Generator {
    support: Interval,
    vacuum: usize,
    s: Vector,
}

impl Generator {
    pub fn zero(support: Interval, dim: usize, vacuum: usize) -> Self {
        Generator {
            support,
            vacuum,
            s: Vector::zeros(dim),
        }
    }

    /// `s` must vanish at the vacuum index.
    pub fn from_vector(support: Interval, vacuum: usize, s: Vector) -> Self {
        debug_assert!(s[vacuum] == ZERO);
        Generator { support, vacuum, s }
    }

    pub fn support(&self) -> Interval {
        self.support
    }

    pub fn vacuum(&self) -> usize {
        self.vacuum
    }

    pub fn vector(&self) -> &Vector {
        &self.s
    }

    pub fn dim(&self) -> usize {
        self.s.len()
    }

    pub fn is_zero(&self) -> bool {
        self.s.iter().all(|z| *z == ZERO)
    }

    pub fn axpy(&mut self, c: f64, other: &Generator) {
        debug_assert_eq!(self.support, other.support);
        self.s.axpy(C64::new(c, 0.0), &other.s, C64::new(1.0, 0.0));
    }

    pub fn to_dense(&self) -> Mat {
        let n = self.dim();
        let v = self.vacuum;
        let mut m = Mat::zeros(n, n);
        for a in 0..n {
            m[(a, v)] += self.s[a];
            m[(v, a)] -= self.s[a].conj();
        }
        m
    }

    /// `‖S‖`: the two rank-one pieces act on orthogonal vectors.
    pub fn norm(&self) -> f64 {
        linalg::vector_norm(&self.s)
    }

    /// `‖(H⁰+1)^{1/2} S‖ = |(H⁰+1)^{1/2} s|`, since the weight is 1 on the vacuum
    /// and at least 1 elsewhere.
    pub fn weighted_up_norm(&self, chain: &ChainSpec) -> f64 {
        chain
            .h0_diagonal(self.support)
            .iter()
            .zip(self.s.iter())
            .map(|(h, z)| z.norm_sqr() * (h + 1.0))
            .sum::<f64>()
            .sqrt()
    }

    /// `[S, X]` on its own support.
    pub fn ad(&self, x: &Mat) -> Mat {
        self.ad_embedded(x, 1, 1)
    }

    /// `[1_L ⊗ S ⊗ 1_R, X]` for `X` on a space of dimension `dl · D · dr`.
    pub fn ad_embedded(&self, x: &Mat, dl: usize, dr: usize) -> Mat {
        let ds = self.dim();
        let n = dl * ds * dr;
        assert_eq!(x.nrows(), n);
        let v = self.vacuum;
        let s: Vec<C64> = self.s.iter().copied().collect();
        let sc: Vec<C64> = s.iter().map(|z| z.conj()).collect();
        let nz: Vec<usize> = (0..ds).filter(|&j| s[j] != ZERO).collect();
        let idx = |l: usize, j: usize, r: usize| (l * ds + j) * dr + r;

        let xs = x.as_slice();
        let mut y = Mat::zeros(n, n);
        let ys = y.as_mut_slice();

        // S X: row (l,j,r) gains s_j · row (l,v,r); row (l,v,r) loses Σ_j s̄_j row (l,j,r)
        for c in 0..n {
            let col = c * n;
            for l in 0..dl {
                for r in 0..dr {
                    let xv = xs[col + idx(l, v, r)];
                    let mut acc = ZERO;
                    for &j in &nz {
                        let row = idx(l, j, r);
                        ys[col + row] += s[j] * xv;
                        acc += sc[j] * xs[col + row];
                    }
                    ys[col + idx(l, v, r)] -= acc;
                }
            }
        }
        // − X S: column (l,v,r) loses Σ_j s_j col (l,j,r); column (l,j,r) gains s̄_j col (l,v,r)
        for l in 0..dl {
            for r in 0..dr {
                let cv = idx(l, v, r) * n;
                for &j in &nz {
                    let cj = idx(l, j, r) * n;
                    let (sj, scj) = (s[j], sc[j]);
                    for row in 0..n {
                        let xj = xs[cj + row];
                        let xv = xs[cv + row];
                        ys[cv + row] -= sj * xj;
                        ys[cj + row] += scj * xv;
                    }
                }
            }
        }
        y
    }

    /// `e^S`, through the Hermitian eigendecomposition of `iS`: `e^S = e^{−i(iS)}`.
    pub fn exp(&self) -> Mat {
        if self.is_zero() {
            return linalg::identity(self.dim());
        }
        let h = self.to_dense() * C64::new(0.0, 1.0);
        linalg::hermitian_function(&h, |lam| C64::new(0.0, -lam).exp())
    }
}
