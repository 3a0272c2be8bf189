//! Operator inequalities between sums of local vacuum projectors, as explicit
//! matrices whose positive semidefiniteness is the claim. Sites may carry
//! different dimensions and arbitrary vacuum vectors here; the flow itself only
//! needs the diagonal case.

use crate::linalg::{self, Mat, Vector};

fn rank_one(v: &Vector) -> Mat {
    v * v.adjoint()
}

fn single_site(op: &Mat, site: usize, dims: &[usize]) -> Mat {
    let before: usize = dims[..site].iter().product();
    let after: usize = dims[site + 1..].iter().product();
    linalg::kron(&linalg::kron(&linalg::identity(before), op), &linalg::identity(after))
}

fn perp(v: &Vector) -> Mat {
    linalg::identity(v.len()) - rank_one(v)
}

/// `(P_{Ω_a} ⊗ … ⊗ P_{Ω_b})^⊥` on the sites `a..=b` (0-based) of the full product.
fn block_plus(vacua: &[Vector], a: usize, b: usize) -> Mat {
    let dims: Vec<usize> = vacua.iter().map(|v| v.len()).collect();
    let mut prod = linalg::identity(1);
    for (s, v) in vacua.iter().enumerate() {
        let factor = if (a..=b).contains(&s) {
            rank_one(v)
        } else {
            linalg::identity(dims[s])
        };
        prod = linalg::kron(&prod, &factor);
    }
    linalg::identity(prod.nrows()) - prod
}

fn normalized(vacua: &[Vector]) -> Vec<Vector> {
    vacua.iter().map(|v| v.normalize()).collect()
}

/// `Σ_i P^⊥_{Ω_i} − (⊗_i P_{Ω_i})^⊥`; claimed `≥ 0`.
pub fn lemma_a1_matrix(vacua: &[Vector]) -> Mat {
    let vacua = normalized(vacua);
    let dims: Vec<usize> = vacua.iter().map(|v| v.len()).collect();
    let n = vacua.len();
    let mut sum = block_plus(&vacua, 0, n - 1).scale(-1.0);
    for (s, v) in vacua.iter().enumerate() {
        sum += single_site(&perp(v), s, &dims);
    }
    sum
}

/// `(r+1) Σ_{i=l}^{L+r} P^⊥_{Ω_i} − Σ_{i=l}^{L} P^{(+)}_{I_{r,i}}`; claimed `≥ 0`.
/// Site labels are 1-based, `1 ≤ l ≤ L ≤ N − r`.
pub fn corollary_a1_matrix(vacua: &[Vector], r: usize, l: usize, big_l: usize) -> Mat {
    let vacua = normalized(vacua);
    let dims: Vec<usize> = vacua.iter().map(|v| v.len()).collect();
    assert!(1 <= l && l <= big_l && big_l + r <= vacua.len());
    let total: usize = dims.iter().product();
    let mut out = Mat::zeros(total, total);
    for i in l..=big_l + r {
        out += single_site(&perp(&vacua[i - 1]), i - 1, &dims).scale((r + 1) as f64);
    }
    for i in l..=big_l {
        out -= block_plus(&vacua, i - 1, i - 1 + r);
    }
    out
}

/// `(r+1) Σ_{i=l}^{L+r} H_i − Σ_{i=l}^{L} H⁰_{I_{r,i}}`; claimed `≥ 0` for
/// non-negative on-site Hamiltonians.
pub fn h0_sum_matrix(site_hams: &[Mat], r: usize, l: usize, big_l: usize) -> Mat {
    let dims: Vec<usize> = site_hams.iter().map(|h| h.nrows()).collect();
    assert!(1 <= l && l <= big_l && big_l + r <= site_hams.len());
    let total: usize = dims.iter().product();
    let mut out = Mat::zeros(total, total);
    for i in l..=big_l + r {
        out += single_site(&site_hams[i - 1], i - 1, &dims).scale((r + 1) as f64);
    }
    for i in l..=big_l {
        for s in i..=i + r {
            out -= single_site(&site_hams[s - 1], s - 1, &dims);
        }
    }
    out
}
