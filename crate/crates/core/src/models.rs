//! Concrete chains in the normalized form the flow expects: on-site gap one,
//! vacuum energy zero, nearest-neighbor bonds of weighted norm one half.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::engine::PotentialTable;
use crate::error::{Error, Result};
use crate::lattice::Interval;
use crate::linalg::{self, Mat, C64};
use crate::operator::{self, embed_matrix, ChainSpec, LocalOperator, OnSiteSpace};

/// Target weighted norm of each bond.
pub const BOND_NORM: f64 = 0.5;

/// How raw units map to normalized ones: `H = (H_raw − shift)·scale` and
/// `V = V_raw · scale · potential_scale`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    pub shift: f64,
    pub scale: f64,
    pub potential_scale: f64,
}

#[derive(Debug, Clone)]
pub struct Model {
    pub chain: ChainSpec,
    pub table: PotentialTable,
    pub normalization: Normalization,
    /// The normalized bond on `I_{1,1}`, shared by every edge.
    pub bond: Mat,
}

/// A single site and bond, before normalization, in any basis.
#[derive(Debug, Clone, PartialEq)]
pub struct SiteAndBond {
    pub onsite: Mat,
    pub bond: Mat,
}

#[derive(Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct SpecFile {
    onsite: Vec<[f64; 2]>,
    bond: Vec<[f64; 2]>,
}

fn square_from_flat(entries: &[[f64; 2]], what: &str) -> Result<Mat> {
    let n = (entries.len() as f64).sqrt().round() as usize;
    if n * n != entries.len() || n == 0 {
        return Err(Error::InvalidModel(format!(
            "{what} has {} entries, not a square matrix",
            entries.len()
        )));
    }
    Ok(Mat::from_row_iterator(
        n,
        n,
        entries.iter().map(|[re, im]| C64::new(*re, *im)),
    ))
}

fn flat(m: &Mat) -> Vec<[f64; 2]> {
    let mut out = Vec::with_capacity(m.len());
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            out.push([m[(i, j)].re, m[(i, j)].im]);
        }
    }
    out
}

impl SiteAndBond {
    pub fn from_json(text: &str) -> Result<Self> {
        let raw: SpecFile = serde_json::from_str(text)
            .map_err(|e| Error::InvalidModel(format!("spec file: {e}")))?;
        Self::from_flat(&raw.onsite, &raw.bond)
    }

    /// Row-major `[re, im]` lists, as in the spec file.
    pub fn from_flat(onsite: &[[f64; 2]], bond: &[[f64; 2]]) -> Result<Self> {
        let onsite = square_from_flat(onsite, "onsite")?;
        let bond = square_from_flat(bond, "bond")?;
        let d = onsite.nrows();
        if bond.nrows() != d * d {
            return Err(Error::InvalidModel(format!(
                "bond must be {0}x{0} for on-site dimension {d}, got {1}x{1}",
                d * d,
                bond.nrows()
            )));
        }
        Ok(SiteAndBond { onsite, bond })
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&SpecFile {
            onsite: flat(&self.onsite),
            bond: flat(&self.bond),
        })
        .expect("plain numbers serialize")
    }

    /// Two-level site `diag(0, 1)` with a `σx ⊗ σx` bond.
    pub fn two_level_ising() -> Self {
        let sx = Mat::from_row_slice(2, 2, &[linalg::ZERO, linalg::ONE, linalg::ONE, linalg::ZERO]);
        SiteAndBond {
            onsite: linalg::diag(&[0.0, 1.0]),
            bond: linalg::kron(&sx, &sx),
        }
    }
}

/// Normalize a site and bond and lay the bond on every edge of an `sites`-site chain.
pub fn build_spin(sites: usize, spec: &SiteAndBond) -> Result<Model> {
    let d = spec.onsite.nrows();
    if d < 2 || !spec.onsite.is_square() {
        return Err(Error::InvalidModel("on-site matrix must be square with d >= 2".into()));
    }
    if spec.bond.nrows() != d * d || !spec.bond.is_square() {
        return Err(Error::InvalidModel(format!("bond must be {0}x{0}", d * d)));
    }
    if !linalg::is_hermitian(&spec.onsite) {
        return Err(Error::InvalidModel("on-site matrix is not Hermitian".into()));
    }
    if !linalg::is_hermitian(&spec.bond) {
        return Err(Error::InvalidModel("bond matrix is not Hermitian".into()));
    }
    let e = linalg::eigh(&spec.onsite);
    let q2 = linalg::kron(&e.vectors, &e.vectors);
    let bond = q2.adjoint() * &spec.bond * &q2;
    from_eigenbasis(sites, &e.values, linalg::hermitian_part(&bond))
}

/// Shared tail of the builders: `energies` ascending, `bond` already in the
/// product eigenbasis (raw units).
fn from_eigenbasis(sites: usize, energies: &[f64], bond: Mat) -> Result<Model> {
    let (e0, e1) = (energies[0], energies[1]);
    let spread = energies.iter().fold(1.0f64, |m, e| m.max(e.abs()));
    if e1 - e0 <= 1e-10 * spread {
        return Err(Error::InvalidModel("unique ground state required".into()));
    }
    let gap = e1 - e0;
    // division keeps e₁ ↦ 1 exact
    let normalized: Vec<f64> = energies.iter().map(|e| (e - e0) / gap).collect();
    let site = OnSiteSpace::new(normalized, 0)?;
    let chain = ChainSpec::new(sites, site)?;

    let bond = bond.scale(1.0 / gap);
    let edge = Interval::new(1, 1);
    let raw_norm = linalg::spectral_norm(&operator::weighted_matrix(&bond, edge, &chain));
    if !(raw_norm > 0.0) {
        return Err(Error::InvalidModel("bond is zero and cannot be scaled to weighted norm 1/2".into()));
    }
    let mu = BOND_NORM / raw_norm;
    let bond = bond.scale(mu);

    let potentials = (1..sites)
        .map(|i| LocalOperator::new(Interval::new(1, i), bond.clone(), &chain))
        .collect::<Result<Vec<_>>>()?;
    let table = PotentialTable::initial(&chain, potentials)?;
    Ok(Model {
        chain,
        table,
        normalization: Normalization {
            shift: e0,
            scale: 1.0 / gap,
            potential_scale: mu,
        },
        bond,
    })
}

/// Position operator `x = (a + a†)/√2` in the lowest `n` oscillator states.
pub fn oscillator_position(n: usize) -> Mat {
    let mut x = Mat::zeros(n, n);
    for m in 0..n.saturating_sub(1) {
        let v = C64::new(((m + 1) as f64 / 2.0).sqrt(), 0.0);
        x[(m, m + 1)] = v;
        x[(m + 1, m)] = v;
    }
    x
}

/// `−d²/dx² + x² + x⁴` in the lowest `n` states of `−d²/dx² + x²`. The quartic
/// term is formed in a basis four states larger so the kept block is exact.
pub fn phi4_site_matrix(n: usize) -> Mat {
    let x = oscillator_position(n + 4);
    let x2 = &x * &x;
    let x4 = &x2 * &x2;
    let mut h = x4.view((0, 0), (n, n)).into_owned();
    for m in 0..n {
        h[(m, m)] += C64::new((2 * m + 1) as f64, 0.0);
    }
    h
}

pub const DEFAULT_RAW_DIM: usize = 60;

/// Anharmonic crystal: on-site `p² + x² + x⁴`, bond `x_i x_{i+1}`, truncated to
/// the lowest `d` levels of a `raw_dim`-state oscillator basis.
pub fn build_phi4(sites: usize, d: usize, raw_dim: usize) -> Result<Model> {
    if d < 2 || raw_dim < d {
        return Err(Error::InvalidModel(format!(
            "need raw_dim >= d >= 2, got d = {d}, raw_dim = {raw_dim}"
        )));
    }
    let e = linalg::eigh(&phi4_site_matrix(raw_dim));
    let wider = linalg::eigvalsh(&phi4_site_matrix(raw_dim + 8));
    let drift = (0..d).fold(0.0f64, |m, a| m.max((e.values[a] - wider[a]).abs()));
    if drift > 1e-8 {
        return Err(Error::Truncation {
            kept: d,
            raw: raw_dim,
            raw_plus: raw_dim + 8,
            drift,
        });
    }
    let q = e.vectors.columns(0, d).into_owned();
    let x = q.adjoint() * oscillator_position(raw_dim) * &q;
    let x = linalg::hermitian_part(&x);
    from_eigenbasis(sites, &e.values[..d], linalg::kron(&x, &x))
}

/// `K_N(t) = Σ H_i + t Σ V_I` as a dense matrix on the whole chain.
pub fn assemble_full(chain: &ChainSpec, table: &PotentialTable, t: f64) -> LocalOperator {
    let whole = chain.whole();
    let mut k = linalg::diag(&chain.h0_diagonal(whole));
    if t != 0.0 {
        for (iv, op) in table.entries() {
            k += embed_matrix(op.matrix(), *iv, whole, chain.d()).scale(t);
        }
    }
    LocalOperator::new(whole, k, chain).expect("whole chain is admissible")
}
