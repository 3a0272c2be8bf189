//! Operators on tensor products of identical on-site spaces.
//!
//! Everything lives in the on-site eigenbasis, so `H⁰`, the weights
//! `(H⁰+1)^{-1/2}` and the vacuum projectors are diagonal and the weighted norm
//! is an elementwise rescaling followed by a singular value. Basis index order
//! follows site order with the leftmost site most significant.

pub mod inequalities;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::Interval;
use crate::linalg::{self, Mat, Vector, C64, ONE, ZERO};

/// Largest chain dimension `d^N` the dense engine will allocate.
pub const MAX_CHAIN_DIM: usize = 4096;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OnSiteSpace {
    energies: Vec<f64>,
    vacuum_index: usize,
}

impl OnSiteSpace {
    /// Energies must already be normalized: exactly zero at the vacuum, at least
    /// one everywhere else.
    pub fn new(energies: Vec<f64>, vacuum_index: usize) -> Result<Self> {
        if energies.len() < 2 {
            return Err(Error::InvalidModel(format!(
                "on-site dimension must be at least 2, got {}",
                energies.len()
            )));
        }
        if vacuum_index >= energies.len() {
            return Err(Error::InvalidModel("vacuum index out of range".into()));
        }
        if energies[vacuum_index] != 0.0 {
            return Err(Error::InvalidModel(format!(
                "vacuum energy must be exactly 0, got {}",
                energies[vacuum_index]
            )));
        }
        for (a, &e) in energies.iter().enumerate() {
            if a != vacuum_index && !(e >= 1.0) {
                return Err(Error::InvalidModel(format!(
                    "excited energy {e} at level {a} is below the unit gap"
                )));
            }
        }
        Ok(OnSiteSpace {
            energies,
            vacuum_index,
        })
    }

    pub fn dim(&self) -> usize {
        self.energies.len()
    }

    pub fn energies(&self) -> &[f64] {
        &self.energies
    }

    pub fn vacuum_index(&self) -> usize {
        self.vacuum_index
    }

    pub fn hamiltonian(&self) -> Mat {
        linalg::diag(&self.energies)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainSpec {
    sites: usize,
    site: OnSiteSpace,
}

impl ChainSpec {
    pub fn new(sites: usize, site: OnSiteSpace) -> Result<Self> {
        if sites < 1 {
            return Err(Error::Domain("a chain needs at least one site".into()));
        }
        let dim = checked_pow(site.dim(), sites);
        if dim.is_none_or(|d| d > MAX_CHAIN_DIM) {
            return Err(Error::Domain(format!(
                "chain dimension {}^{} exceeds the dense budget {MAX_CHAIN_DIM}",
                site.dim(),
                sites
            )));
        }
        Ok(ChainSpec { sites, site })
    }

    pub fn sites(&self) -> usize {
        self.sites
    }

    pub fn site(&self) -> &OnSiteSpace {
        &self.site
    }

    pub fn d(&self) -> usize {
        self.site.dim()
    }

    pub fn whole(&self) -> Interval {
        Interval::whole(self.sites)
    }

    pub fn check(&self, iv: Interval) -> Result<Interval> {
        Interval::checked(iv.edges, iv.left, self.sites)
    }

    pub fn dim_of(&self, iv: Interval) -> usize {
        self.d().pow(iv.len() as u32)
    }

    /// Index of the product vacuum in the basis of `iv`.
    pub fn vacuum_index(&self, iv: Interval) -> usize {
        let (d, v) = (self.d(), self.site.vacuum_index);
        (0..iv.len()).fold(0, |acc, _| acc * d + v)
    }

    /// Diagonal of `H⁰_I`: sums of on-site energies over the product basis.
    pub fn h0_diagonal(&self, iv: Interval) -> Vec<f64> {
        let e = self.site.energies();
        let mut out = vec![0.0];
        for _ in 0..iv.len() {
            out = out
                .iter()
                .flat_map(|&acc| e.iter().map(move |&x| acc + x))
                .collect();
        }
        out
    }

    /// Diagonal of `(H⁰_I + 1)^{-1/2}`.
    pub fn weights(&self, iv: Interval) -> Vec<f64> {
        self.h0_diagonal(iv)
            .into_iter()
            .map(|h| 1.0 / (h + 1.0).sqrt())
            .collect()
    }
}

fn checked_pow(base: usize, exp: usize) -> Option<usize> {
    (0..exp).try_fold(1usize, |acc, _| acc.checked_mul(base))
}

#[derive(Debug, Clone, PartialEq)]
pub struct LocalOperator {
    support: Interval,
    matrix: Mat,
}

impl LocalOperator {
    pub fn new(support: Interval, matrix: Mat, chain: &ChainSpec) -> Result<Self> {
        chain.check(support)?;
        let n = chain.dim_of(support);
        if matrix.nrows() != n || matrix.ncols() != n {
            return Err(Error::Domain(format!(
                "matrix on {support} must be {n}x{n}, got {}x{}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        Ok(LocalOperator { support, matrix })
    }

    /// No shape validation; callers guarantee `matrix` matches `support`.
    pub(crate) fn from_parts(support: Interval, matrix: Mat) -> Self {
        LocalOperator { support, matrix }
    }

    pub fn zero(support: Interval, chain: &ChainSpec) -> Self {
        let n = chain.dim_of(support);
        LocalOperator {
            support,
            matrix: Mat::zeros(n, n),
        }
    }

    pub fn support(&self) -> Interval {
        self.support
    }

    pub fn matrix(&self) -> &Mat {
        &self.matrix
    }

    pub fn into_matrix(self) -> Mat {
        self.matrix
    }

    pub fn is_hermitian(&self) -> bool {
        linalg::is_hermitian(&self.matrix)
    }

    pub fn scaled(&self, s: f64) -> LocalOperator {
        LocalOperator {
            support: self.support,
            matrix: self.matrix.scale(s),
        }
    }
}

/// `M ⊗ 1` on `to`, where `M` lives on `from ⊆ to`.
pub fn embed_matrix(m: &Mat, from: Interval, to: Interval, d: usize) -> Mat {
    debug_assert!(from.is_subset_of(&to));
    let dl = d.pow((from.left - to.left) as u32);
    let dr = d.pow((to.right() - from.right()) as u32);
    if dl == 1 && dr == 1 {
        return m.clone();
    }
    let ds = m.nrows();
    let n = dl * ds * dr;
    let mut out = Mat::zeros(n, n);
    for l in 0..dl {
        for r in 0..dr {
            for a in 0..ds {
                let row = (l * ds + a) * dr + r;
                for b in 0..ds {
                    let z = m[(a, b)];
                    if z != ZERO {
                        out[(row, (l * ds + b) * dr + r)] = z;
                    }
                }
            }
        }
    }
    out
}

pub fn embed(op: &LocalOperator, target: Interval, chain: &ChainSpec) -> Result<LocalOperator> {
    chain.check(target)?;
    if !op.support.is_subset_of(&target) {
        return Err(Error::Domain(format!(
            "cannot embed an operator on {} into {target}",
            op.support
        )));
    }
    Ok(LocalOperator {
        support: target,
        matrix: embed_matrix(&op.matrix, op.support, target, chain.d()),
    })
}

pub fn minus_projector(iv: Interval, chain: &ChainSpec) -> LocalOperator {
    let mut op = LocalOperator::zero(iv, chain);
    let v = chain.vacuum_index(iv);
    op.matrix[(v, v)] = ONE;
    op
}

pub fn plus_projector(iv: Interval, chain: &ChainSpec) -> LocalOperator {
    let n = chain.dim_of(iv);
    let mut m = linalg::identity(n);
    let v = chain.vacuum_index(iv);
    m[(v, v)] = ZERO;
    LocalOperator::from_parts(iv, m)
}

pub fn h0(iv: Interval, chain: &ChainSpec) -> LocalOperator {
    LocalOperator::from_parts(iv, linalg::diag(&chain.h0_diagonal(iv)))
}

/// `H_i` as an operator on the single site `i`.
pub fn onsite(i: usize, chain: &ChainSpec) -> LocalOperator {
    LocalOperator::from_parts(Interval::site(i), chain.site().hamiltonian())
}

/// `(H⁰_I+1)^{-1/2} M (H⁰_I+1)^{-1/2}` for `M` already on `iv`.
pub fn weighted_matrix(m: &Mat, iv: Interval, chain: &ChainSpec) -> Mat {
    let w = chain.weights(iv);
    Mat::from_fn(m.nrows(), m.ncols(), |a, b| m[(a, b)] * (w[a] * w[b]))
}

pub fn weighted_norm(op: &LocalOperator, iv: Interval, chain: &ChainSpec) -> Result<f64> {
    let m = embed(op, iv, chain)?;
    Ok(linalg::spectral_norm(&weighted_matrix(&m.matrix, iv, chain)))
}

/// Frobenius norm of the weighted matrix: a cheap upper bound on
/// `weighted_norm`, used for series truncation and pruning.
pub fn weighted_frobenius(m: &Mat, iv: Interval, chain: &ChainSpec) -> f64 {
    let w = chain.weights(iv);
    let mut acc = 0.0;
    for b in 0..m.ncols() {
        for a in 0..m.nrows() {
            acc += m[(a, b)].norm_sqr() * (w[a] * w[b]).powi(2);
        }
    }
    acc.sqrt()
}

/// `⟨Ω…Ω, V Ω…Ω⟩` on the operator's own support.
pub fn vacuum_expectation(op: &LocalOperator, chain: &ChainSpec) -> f64 {
    let v = chain.vacuum_index(op.support);
    op.matrix[(v, v)].re
}

/// Column of `P⁺ M P⁻`: the vacuum column with the vacuum entry zeroed.
pub fn off_block_column(m: &Mat, vac: usize) -> Vector {
    let mut c: Vector = m.column(vac).into_owned();
    c[vac] = ZERO;
    c
}

/// `P⁺ M P⁻ + P⁻ M P⁺`.
pub fn off_diagonal_part(m: &Mat, vac: usize) -> Mat {
    let n = m.nrows();
    let mut out = Mat::zeros(n, n);
    for a in 0..n {
        if a != vac {
            out[(a, vac)] = m[(a, vac)];
            out[(vac, a)] = m[(vac, a)];
        }
    }
    out
}

/// `P⁺ M P⁺ + P⁻ M P⁻`.
pub fn diagonal_part(m: &Mat, vac: usize) -> Mat {
    let mut out = m.clone();
    for a in 0..m.nrows() {
        if a != vac {
            out[(a, vac)] = ZERO;
            out[(vac, a)] = ZERO;
        }
    }
    out
}

/// Weighted operator norm of `P⁺ M P⁻` on `iv`. The block is rank one, so the
/// norm is the length of the weighted column (the vacuum weight is 1).
pub fn weighted_off_block_norm(m: &Mat, iv: Interval, chain: &ChainSpec) -> f64 {
    let vac = chain.vacuum_index(iv);
    let w = chain.weights(iv);
    let mut acc = 0.0;
    for a in 0..m.nrows() {
        if a != vac {
            acc += (m[(a, vac)] * w[a]).norm_sqr();
        }
    }
    acc.sqrt()
}

/// `M` with the vacuum row and column removed: the compression to `P⁺`.
pub fn compress_plus(m: &Mat, vac: usize) -> Mat {
    m.clone().remove_row(vac).remove_column(vac)
}

pub fn c64(re: f64) -> C64 {
    C64::new(re, 0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{eigvalsh, max_abs};
    use rand::{rngs::StdRng, Rng, SeedableRng};

    fn chain(n: usize) -> ChainSpec {
        ChainSpec::new(n, OnSiteSpace::new(vec![0.0, 1.0, 2.5], 0).unwrap()).unwrap()
    }

    fn random_matrix(n: usize, rng: &mut StdRng) -> Mat {
        Mat::from_fn(n, n, |_, _| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
    }

    #[test]
    fn on_site_space_validation() {
        assert!(OnSiteSpace::new(vec![0.0, 0.5], 0).is_err());
        assert!(OnSiteSpace::new(vec![1e-17, 1.0], 0).is_err());
        assert!(OnSiteSpace::new(vec![0.0], 0).is_err());
        assert!(OnSiteSpace::new(vec![2.0, 0.0, 1.0], 1).is_ok());
    }

    #[test]
    fn chain_budget_guard() {
        let site = OnSiteSpace::new(vec![0.0, 1.0], 0).unwrap();
        assert!(ChainSpec::new(12, site.clone()).is_ok());
        assert!(ChainSpec::new(13, site).is_err());
    }

    #[test]
    fn embed_identity_and_onsite() {
        let c = chain(3);
        let id = LocalOperator::new(Interval::site(2), linalg::identity(3), &c).unwrap();
        let e = embed(&id, Interval::new(1, 2), &c).unwrap();
        assert_eq!(e.matrix(), &linalg::identity(9));

        let h = onsite(1, &c);
        let e = embed(&h, Interval::new(1, 1), &c).unwrap();
        let expect = linalg::kron(&c.site().hamiltonian(), &linalg::identity(3));
        assert_eq!(e.matrix(), &expect);

        assert!(embed(&h, Interval::new(1, 2), &c).is_err());
    }

    #[test]
    fn embed_matches_kronecker_and_trace() {
        let c = chain(4);
        let mut rng = StdRng::seed_from_u64(7);
        let a = random_matrix(9, &mut rng);
        let op = LocalOperator::new(Interval::new(1, 2), a.clone(), &c).unwrap();
        let e = embed(&op, Interval::new(3, 1), &c).unwrap();
        let expect = linalg::kron(&linalg::kron(&linalg::identity(3), &a), &linalg::identity(3));
        assert!(max_abs(&(e.matrix() - expect)) == 0.0);
        let tr = e.matrix().trace();
        assert!((tr - a.trace() * c64(9.0)).norm() < 1e-12);
    }

    #[test]
    fn projectors() {
        let c = chain(3);
        let iv = Interval::new(1, 1);
        let pm = minus_projector(iv, &c);
        let pp = plus_projector(iv, &c);
        assert!((pm.matrix().trace() - ONE).norm() == 0.0);
        assert_eq!(pm.matrix() + pp.matrix(), linalg::identity(9));
        // nesting: P⁻ on the big interval absorbs the embedded smaller one
        let big = Interval::new(2, 1);
        let small = embed(&minus_projector(Interval::site(2), &c), big, &c).unwrap();
        let pb = minus_projector(big, &c);
        assert_eq!(pb.matrix() * small.matrix(), *pb.matrix());
    }

    #[test]
    fn h0_properties() {
        let c = chain(3);
        let iv = Interval::new(1, 1);
        let h = h0(iv, &c);
        let vac = c.vacuum_index(iv);
        assert_eq!(h.matrix()[(vac, vac)], ZERO);
        let ev = eigvalsh(h.matrix());
        assert!(ev.iter().filter(|&&x| x != 0.0).all(|&x| x >= 1.0));
        let e = c.site().energies();
        let mut sums: Vec<f64> = e.iter().flat_map(|a| e.iter().map(move |b| a + b)).collect();
        sums.sort_by(f64::total_cmp);
        assert!(linalg::spectrum_distance(&ev, &sums) < 1e-14);
    }

    #[test]
    fn weighted_norm_examples() {
        let c = chain(3);
        let iv = Interval::new(1, 2);
        let h = h0(iv, &c);
        let v = LocalOperator::from_parts(iv, h.matrix() + linalg::identity(9));
        assert!((weighted_norm(&v, iv, &c).unwrap() - 1.0).abs() < 1e-14);
        assert_eq!(weighted_norm(&LocalOperator::zero(iv, &c), iv, &c).unwrap(), 0.0);
    }

    #[test]
    fn weighted_frobenius_dominates() {
        let c = chain(2);
        let iv = Interval::new(1, 1);
        let mut rng = StdRng::seed_from_u64(3);
        for _ in 0..10 {
            let m = random_matrix(9, &mut rng);
            let op = LocalOperator::from_parts(iv, m.clone());
            assert!(weighted_frobenius(&m, iv, &c) >= weighted_norm(&op, iv, &c).unwrap() - 1e-14);
        }
    }

    #[test]
    fn vacuum_expectation_examples() {
        let c = chain(3);
        let iv = Interval::new(2, 1);
        assert_eq!(vacuum_expectation(&minus_projector(iv, &c), &c), 1.0);
        assert_eq!(vacuum_expectation(&plus_projector(iv, &c), &c), 0.0);
        let mut rng = StdRng::seed_from_u64(11);
        let a = random_matrix(27, &mut rng);
        let herm = linalg::hermitian_part(&a);
        let op = LocalOperator::from_parts(iv, herm.clone());
        let w = weighted_matrix(&herm, iv, &c);
        let vac = c.vacuum_index(iv);
        assert!((vacuum_expectation(&op, &c) - w[(vac, vac)].re).abs() < 1e-15);
    }

    #[test]
    fn off_block_norm_is_rank_one_norm() {
        let c = chain(2);
        let iv = Interval::new(1, 1);
        let mut rng = StdRng::seed_from_u64(5);
        let a = linalg::hermitian_part(&random_matrix(9, &mut rng));
        let vac = c.vacuum_index(iv);
        let mut block = Mat::zeros(9, 9);
        for r in 0..9 {
            if r != vac {
                block[(r, vac)] = a[(r, vac)];
            }
        }
        let dense = linalg::spectral_norm(&weighted_matrix(&block, iv, &c));
        assert!((dense - weighted_off_block_norm(&a, iv, &c)).abs() < 1e-13);
        let split = diagonal_part(&a, vac) + off_diagonal_part(&a, vac);
        assert_eq!(split, a);
    }

    #[test]
    fn vacuum_index_is_product_position() {
        let c = ChainSpec::new(3, OnSiteSpace::new(vec![1.0, 0.0, 3.0], 1).unwrap()).unwrap();
        let iv = Interval::new(2, 1);
        let v = c.vacuum_index(iv);
        assert_eq!(v, 9 + 3 + 1);
        assert_eq!(c.h0_diagonal(iv)[v], 0.0);
    }
}
