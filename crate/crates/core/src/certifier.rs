//! Spectral checks on the output of the flow: local gaps, the compressed form
//! inequality, resolvent norms, and the final block structure and gap of the
//! whole chain, all against dense eigendecompositions.

use serde::{Deserialize, Serialize};

use crate::engine::PotentialTable;
use crate::error::{Error, Result};
use crate::lattice::{Interval, StepIndex};
use crate::ledger::gap_prefactor;
use crate::linalg::{self, Mat};
use crate::models::assemble_full;
use crate::operator::{compress_plus, off_block_column, ChainSpec};

/// The gap the theorem promises, in normalized units.
pub const REQUIRED_GAP: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapCertificate {
    /// `None` for the whole chain after the last step.
    pub step: Option<StepIndex>,
    pub measured: f64,
    pub required: f64,
    pub vacuum_is_ground: bool,
    /// Sorted eigenvalues of the operator the gap was measured on.
    pub spectrum: Vec<f64>,
}

impl GapCertificate {
    pub fn holds(&self, slack: f64) -> bool {
        self.vacuum_is_ground && self.measured >= self.required - slack
    }
}

/// `Δ = inf spec(P⁺GP⁺|ran P⁺) − E`, plus a check that the vacuum is an
/// eigenvector of `G` with eigenvalue `E` and lies below everything else.
pub fn gap_of_g(g: &Mat, e: f64, vacuum: usize, step: Option<StepIndex>) -> Result<GapCertificate> {
    let plus = linalg::eigvalsh(&compress_plus(g, vacuum));
    let measured = plus.first().map_or(f64::INFINITY, |&p| p - e);
    let column = linalg::vector_norm(&off_block_column(g, vacuum));
    let scale = linalg::max_abs(g).max(1.0);
    let eigen = column <= 1e-10 * scale && (g[(vacuum, vacuum)].re - e).abs() <= 1e-10 * scale;
    if !(measured > 0.0) {
        return Err(Error::GapCollapse {
            step: step.unwrap_or(StepIndex::new(0, 0)),
            gap: measured,
        });
    }
    let mut spectrum = plus;
    spectrum.push(e);
    spectrum.sort_by(f64::total_cmp);
    Ok(GapCertificate {
        step,
        measured,
        required: REQUIRED_GAP,
        vacuum_is_ground: eigen,
        spectrum,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FormBound {
    pub prefactor: f64,
    /// Smallest eigenvalue of `P⁺(G−E)P⁺ − p·P⁺H⁰P⁺` on `ran P⁺`.
    pub margin: f64,
}

/// The compressed form inequality `P⁺(G−E)P⁺ ≥ p(t)·P⁺H⁰P⁺`, with `p` the
/// gap prefactor. Errors when `p` is undefined (`t ≥ 1`).
pub fn verify_form_bound(g: &Mat, e: f64, iv: Interval, chain: &ChainSpec, t: f64) -> Result<FormBound> {
    let prefactor = gap_prefactor(t)
        .ok_or_else(|| Error::Domain(format!("gap prefactor diverges at t = {t}")))?;
    let vac = chain.vacuum_index(iv);
    let h0 = chain.h0_diagonal(iv);
    let mut m = g.clone();
    for (a, &h) in h0.iter().enumerate() {
        m[(a, a)] -= linalg::C64::new(e + prefactor * h, 0.0);
    }
    let margin = linalg::min_eigenvalue(&compress_plus(&m, vac));
    Ok(FormBound { prefactor, margin })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResolventNorms {
    /// `‖(G−E)^{−1/2} P⁺ (H⁰+1)^{1/2}‖`
    pub half: f64,
    /// `‖(G−E)^{−1} P⁺ (H⁰+1)^{1/2}‖`
    pub full: f64,
}

impl ResolventNorms {
    /// `(√2/√Δ, √2/Δ)`
    pub fn bounds(delta: f64) -> (f64, f64) {
        (2f64.sqrt() / delta.sqrt(), 2f64.sqrt() / delta)
    }
}

pub fn resolvent_norms(g: &Mat, e: f64, iv: Interval, chain: &ChainSpec) -> Result<ResolventNorms> {
    let vac = chain.vacuum_index(iv);
    let eig = linalg::eigh(&compress_plus(g, vac));
    if eig.values.first().is_some_and(|&l| !(l - e > 0.0)) {
        return Err(Error::Domain("resolvent needs G − E > 0 on ran P⁺".into()));
    }
    let root: Vec<f64> = chain
        .h0_diagonal(iv)
        .iter()
        .enumerate()
        .filter(|&(a, _)| a != vac)
        .map(|(_, &h)| (h + 1.0).sqrt())
        .collect();
    let apply = |power: f64| {
        let mut scaled = eig.vectors.clone();
        for (j, &lam) in eig.values.iter().enumerate() {
            let f = (lam - e).powf(-power);
            scaled.column_mut(j).scale_mut(f);
        }
        let mut op = scaled * eig.vectors.adjoint();
        for (j, &w) in root.iter().enumerate() {
            op.column_mut(j).scale_mut(w);
        }
        linalg::spectral_norm(&op)
    };
    Ok(ResolventNorms {
        half: apply(0.5),
        full: apply(1.0),
    })
}

/// Sorted spectrum of `K_N(t)` from the table, or `None` when `d^N` exceeds
/// the budget.
pub fn exact_oracle(chain: &ChainSpec, table: &PotentialTable, t: f64, budget: usize) -> Option<Vec<f64>> {
    (chain.dim_of(chain.whole()) <= budget).then(|| linalg::eigvalsh(assemble_full(chain, table, t).matrix()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FinalTolerances {
    pub offdiag: f64,
    pub gap_slack: f64,
    pub spectrum: f64,
}

impl Default for FinalTolerances {
    fn default() -> Self {
        FinalTolerances {
            offdiag: 1e-10,
            gap_slack: 1e-6,
            spectrum: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FinalCertificate {
    pub gap: GapCertificate,
    /// `‖P⁺ K̃ P⁻‖`
    pub offdiag: f64,
    /// `λ₂ − λ₁` of `K̃`
    pub level_spacing: f64,
    /// Largest difference between sorted spectra of `K̃` and `K_N(t)`;
    /// `None` when the oracle was skipped.
    pub spectrum_distance: Option<f64>,
    pub block_diagonal: bool,
    pub gap_holds: bool,
    pub unique_ground_state: bool,
    pub spectrum_matches: Option<bool>,
}

impl FinalCertificate {
    pub fn failures(&self) -> Vec<&'static str> {
        let mut out = vec![];
        if !self.block_diagonal {
            out.push("block-diagonal");
        }
        if !self.gap_holds {
            out.push("gap");
        }
        if !self.unique_ground_state {
            out.push("unique-ground-state");
        }
        if self.spectrum_matches == Some(false) {
            out.push("spectrum");
        }
        out
    }
}

/// Reassemble `K̃ = H⁰ + t Σ V^{(N−1,1)}` and check block-diagonality, the gap,
/// uniqueness of the ground state, and (budget permitting) that `K̃` and
/// `K_N(t)` have the same spectrum.
pub fn certify_final(
    chain: &ChainSpec,
    initial: &PotentialTable,
    last: &PotentialTable,
    t: f64,
    budget: usize,
    tol: &FinalTolerances,
) -> Result<FinalCertificate> {
    let whole = chain.whole();
    let vac = chain.vacuum_index(whole);
    let k = assemble_full(chain, last, t).into_matrix();
    let offdiag = linalg::vector_norm(&off_block_column(&k, vac));
    let e = k[(vac, vac)].re;
    let gap = gap_of_g(&k, e, vac, None)?;
    let spacing = gap.spectrum[1] - gap.spectrum[0];
    let oracle = exact_oracle(chain, initial, t, budget);
    let distance = oracle.map(|o| linalg::spectrum_distance(&o, &gap.spectrum));
    Ok(FinalCertificate {
        block_diagonal: offdiag <= tol.offdiag,
        gap_holds: gap.holds(tol.gap_slack),
        unique_ground_state: spacing >= REQUIRED_GAP - tol.gap_slack && gap.vacuum_is_ground,
        spectrum_matches: distance.map(|d| d <= tol.spectrum),
        spectrum_distance: distance,
        level_spacing: spacing,
        offdiag,
        gap,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::{run_sweep, Sweep, Tolerances};
    use crate::models::{build_phi4, build_spin, SiteAndBond, DEFAULT_RAW_DIM};
    use crate::operator::weighted_off_block_norm;

    #[test]
    fn trivial_gap_is_one() {
        let m = build_phi4(3, 3, DEFAULT_RAW_DIM).unwrap();
        let iv = Interval::new(2, 1);
        let g = linalg::diag(&m.chain.h0_diagonal(iv));
        let cert = gap_of_g(&g, 0.0, m.chain.vacuum_index(iv), None).unwrap();
        assert_eq!(cert.measured, 1.0);
        assert!(cert.vacuum_is_ground && cert.holds(0.0));
        let fb = verify_form_bound(&g, 0.0, iv, &m.chain, 0.0).unwrap();
        assert_eq!(fb.prefactor, 1.0);
        assert!(fb.margin.abs() < 1e-14);
    }

    #[test]
    fn diagonal_oracle_is_sorted_diagonal() {
        let m = build_spin(3, &SiteAndBond::two_level_ising()).unwrap();
        let o = exact_oracle(&m.chain, &m.table, 0.0, 4096).unwrap();
        let mut diag = m.chain.h0_diagonal(m.chain.whole());
        diag.sort_by(f64::total_cmp);
        assert_eq!(o, diag);
        assert!(exact_oracle(&m.chain, &m.table, 0.0, 4).is_none());
    }

    /// Reversing the site order maps the translation-invariant chain to itself
    /// up to reflecting the bond.
    #[test]
    fn oracle_is_reflection_invariant() {
        let spec = SiteAndBond::two_level_ising();
        let m = build_spin(3, &spec).unwrap();
        let t = 0.3;
        let o = exact_oracle(&m.chain, &m.table, t, 4096).unwrap();
        let d = m.chain.d();
        let dim = d.pow(3);
        let full = assemble_full(&m.chain, &m.table, t).into_matrix();
        let perm: Vec<usize> = (0..dim)
            .map(|a| {
                let (x, y, z) = (a / (d * d), (a / d) % d, a % d);
                z * d * d + y * d + x
            })
            .collect();
        let mut reflected = Mat::zeros(dim, dim);
        for a in 0..dim {
            for b in 0..dim {
                reflected[(perm[a], perm[b])] = full[(a, b)];
            }
        }
        let r = linalg::eigvalsh(&reflected);
        assert!(linalg::spectrum_distance(&o, &r) < 1e-12);
    }

    #[test]
    fn local_gaps_resolvents_and_form_bound_along_flow() {
        let m = build_phi4(4, 3, DEFAULT_RAW_DIM).unwrap();
        let t = 1e-3;
        let mut sweep = Sweep::new(m.chain.clone(), m.table.clone(), t, Tolerances::default()).unwrap();
        while let Some(out) = sweep.advance() {
            let out = out.unwrap();
            let p = &out.problem;
            let cert = gap_of_g(&p.g, p.e, p.vacuum, Some(p.step)).unwrap();
            assert!(cert.holds(0.0));
            // independent path: spectrum of G itself
            let direct = linalg::eigvalsh(&p.g);
            assert!((direct[1] - direct[0] - cert.measured).abs() < 1e-10);
            assert!((direct[0] - p.e).abs() < 1e-10);
            let fb = verify_form_bound(&p.g, p.e, p.interval, &m.chain, t).unwrap();
            assert!(fb.margin >= -1e-9, "{fb:?}");
            let rn = resolvent_norms(&p.g, p.e, p.interval, &m.chain).unwrap();
            let (b_half, b_full) = ResolventNorms::bounds(REQUIRED_GAP);
            assert!(rn.half <= b_half && rn.full <= b_full, "{rn:?}");
        }
    }

    /// At `t = 0`, `(G−E)^{−1/2}(H⁰+1)^{1/2}` is diagonal with entries
    /// `√((h+1)/h) ≤ √2`.
    #[test]
    fn trivial_resolvent_norms() {
        let m = build_phi4(2, 3, DEFAULT_RAW_DIM).unwrap();
        let iv = Interval::new(1, 1);
        let g = linalg::diag(&m.chain.h0_diagonal(iv));
        let rn = resolvent_norms(&g, 0.0, iv, &m.chain).unwrap();
        assert!((rn.half - 2f64.sqrt()).abs() < 1e-14);
        assert!((rn.full - 2f64.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn final_certificate_for_two_sites_matches_exact_gap() {
        let m = build_spin(2, &SiteAndBond::two_level_ising()).unwrap();
        let t = 0.05;
        let res = run_sweep(&m.chain, &m.table, t, &Tolerances::default()).unwrap();
        let cert = certify_final(&m.chain, &m.table, &res.table, t, 4096, &FinalTolerances::default()).unwrap();
        assert!(cert.failures().is_empty(), "{cert:?}");
        let exact = exact_oracle(&m.chain, &m.table, t, 4096).unwrap();
        assert!((cert.gap.measured - (exact[1] - exact[0])).abs() < 1e-8);
    }

    #[test]
    fn final_certificate_flags_unprocessed_table() {
        let m = build_phi4(3, 3, DEFAULT_RAW_DIM).unwrap();
        let t = 0.01;
        let cert = certify_final(&m.chain, &m.table, &m.table, t, 4096, &FinalTolerances::default()).unwrap();
        assert!(!cert.block_diagonal);
        let k = assemble_full(&m.chain, &m.table, t).into_matrix();
        assert!(weighted_off_block_norm(&k, m.chain.whole(), &m.chain) > 1e-4);
    }
}
