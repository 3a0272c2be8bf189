//! A certified run: drive the flow step by step, check every claim the
//! analysis makes about it, and collect the outcome into one report. Scans
//! repeat this over a grid of couplings and chain lengths.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::certifier::{
    certify_final, exact_oracle, gap_of_g, resolvent_norms, verify_form_bound, FinalCertificate,
    FinalTolerances, FormBound, ResolventNorms, REQUIRED_GAP,
};
use crate::config::{ModelConfig, RunConfig};
use crate::engine::{run_sweep, StepOutcome, StepRecord, Sweep};
use crate::error::{Error, Result};
use crate::lattice::{Interval, StepIndex};
use crate::ledger::{self, b_coefficients, bound_v_b, check_s1, gap_prefactor, radius_bound, BoundParams, DELTA};
use crate::linalg;
use crate::models::{assemble_full, Normalization};
use crate::operator::{weighted_matrix, ChainSpec};

pub const REPORT_SCHEMA: &str = "lsbd.report/1";
pub const SCAN_SCHEMA: &str = "lsbd.scan/1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pass,
    Fail,
    Skipped,
    /// Reported, but not part of the verdict.
    Info,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Claim {
    pub name: String,
    pub status: Status,
    pub detail: String,
}

impl Claim {
    fn check(name: &str, ok: bool, detail: String) -> Self {
        Claim {
            name: name.into(),
            status: if ok { Status::Pass } else { Status::Fail },
            detail,
        }
    }

    fn with(name: &str, status: Status, detail: String) -> Self {
        Claim { name: name.into(), status, detail }
    }
}

fn verdict(claims: &[Claim]) -> Status {
    if claims.iter().any(|c| c.status == Status::Fail) {
        Status::Fail
    } else {
        Status::Pass
    }
}

/// Per-step comparison of the series with the bounds of the convergence proof.
/// Ratios are measured / bound, so anything above one is a violation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesCheck {
    pub terms: usize,
    /// `‖(V)_j‖_{H⁰}` for each order.
    pub v_norms: Vec<f64>,
    /// Against the `B_j` expression, `j ≥ 2`.
    pub worst_vb_ratio: f64,
    /// Against `B_j` itself.
    pub worst_b_ratio: f64,
    /// `‖(S)_j‖` against `2√2/Δ · ‖(V)_j‖_{H⁰}`.
    pub worst_s_ratio: f64,
    /// `‖(H⁰+1)^{1/2}(S)_j‖` against `(2+√2)/Δ · ‖(V)_j‖_{H⁰}`.
    pub worst_s_weighted_ratio: f64,
    /// Largest `‖(V)_j^{diag}‖_{H⁰} − ‖(V)_j‖_{H⁰}`.
    pub worst_diag_excess: f64,
    /// `a / (4‖V‖_{H⁰})`, absent when the potential vanishes.
    pub radius: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepCheck {
    pub step: StepIndex,
    pub gap: f64,
    pub vacuum_is_ground: bool,
    pub form: Option<FormBound>,
    pub resolvent: ResolventNorms,
    pub series: SeriesCheck,
    pub s1_ledger_margin: f64,
    pub s1_cap_margin: f64,
    pub s1_ledger_violations: Vec<Interval>,
    pub s1_cap_violations: Vec<Interval>,
    /// Distance between the spectrum after this step and the exact one.
    pub spectrum_distance: Option<f64>,
    /// Entries of already processed intervals left bit-for-bit unchanged.
    pub frozen_intact: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LedgerSummary {
    pub params: BoundParams,
    pub radius: f64,
    pub prefactor: Option<f64>,
    pub initial_ledger_margin: f64,
    pub worst_ledger_margin: f64,
    pub worst_cap_margin: f64,
    /// `(interval, step)` pairs where `𝓔 > t^{(r−1)/4}`.
    pub absorption_violations: Vec<(Interval, StepIndex)>,
}

/// Realized constants of the series estimates, maximized over steps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasuredConstants {
    /// `‖S‖ / (t‖V‖_{H⁰})`
    pub a: Option<f64>,
    /// `‖(H⁰+1)^{1/2}S‖ / (t‖V‖_{H⁰})`
    pub b: Option<f64>,
    /// `‖V^{(k,q)}_{I_{k,q}}‖_{H⁰} / ‖V^{(k,q−1)}_{I_{k,q}}‖_{H⁰}`
    pub v_growth: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunFailure {
    pub message: String,
    pub certification: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruncationAudit {
    pub dim: usize,
    pub gap: f64,
    pub wider_dim: usize,
    pub wider_gap: Option<f64>,
    pub change: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub schema: String,
    pub config: RunConfig,
    pub t: f64,
    pub sites: usize,
    pub d: usize,
    pub normalization: Normalization,
    pub steps: Vec<StepRecord>,
    pub checks: Vec<StepCheck>,
    pub ledger: LedgerSummary,
    pub constants: MeasuredConstants,
    pub certificate: Option<FinalCertificate>,
    pub failure: Option<RunFailure>,
    pub truncation_audit: Option<TruncationAudit>,
    pub claims: Vec<Claim>,
    pub verdict: Status,
}

impl RunReport {
    pub fn passed(&self) -> bool {
        self.verdict == Status::Pass
    }

    pub fn claim(&self, name: &str) -> Option<&Claim> {
        self.claims.iter().find(|c| c.name == name)
    }

    /// Sorted spectrum of the final block-diagonal operator.
    pub fn spectrum(&self) -> Option<&[f64]> {
        self.certificate.as_ref().map(|c| c.gap.spectrum.as_slice())
    }
}

fn max_opt(acc: Option<f64>, x: Option<f64>) -> Option<f64> {
    match (acc, x) {
        (Some(a), Some(b)) => Some(a.max(b)),
        (a, b) => a.or(b),
    }
}

fn ratio(measured: f64, bound: f64) -> f64 {
    if bound > 0.0 {
        measured / bound
    } else if measured == 0.0 {
        0.0
    } else {
        f64::INFINITY
    }
}

fn series_check(out: &StepOutcome, chain: &ChainSpec, params: &BoundParams, v_before: f64) -> SeriesCheck {
    let iv = out.problem.interval;
    let wnorm = |m: &linalg::Mat| linalg::spectral_norm(&weighted_matrix(m, iv, chain));
    let v_norms: Vec<f64> = out.terms.iter().map(|s| wnorm(&s.v)).collect();
    let s_scale = 2.0 * 2f64.sqrt() / DELTA;
    let sw_scale = (2.0 + 2f64.sqrt()) / DELTA;
    let mut check = SeriesCheck {
        terms: out.terms.len(),
        v_norms: v_norms.clone(),
        worst_vb_ratio: 0.0,
        worst_b_ratio: 0.0,
        worst_s_ratio: 0.0,
        worst_s_weighted_ratio: 0.0,
        worst_diag_excess: f64::NEG_INFINITY,
        radius: (v_before > 0.0).then(|| radius_bound(params.a, v_before)),
    };
    let b = (v_before > 0.0).then(|| b_coefficients(v_before, params.a, out.terms.len()));
    for (idx, term) in out.terms.iter().enumerate() {
        let j = idx + 1;
        let vj = v_norms[idx];
        if let Some(b) = &b {
            check.worst_b_ratio = check.worst_b_ratio.max(ratio(vj, b[idx]));
            if j >= 2 {
                check.worst_vb_ratio = check.worst_vb_ratio.max(ratio(vj, bound_v_b(b, j, v_before, params)));
            }
        }
        check.worst_s_ratio = check.worst_s_ratio.max(ratio(term.s.norm(), s_scale * vj));
        check.worst_s_weighted_ratio = check
            .worst_s_weighted_ratio
            .max(ratio(term.s.weighted_up_norm(chain), sw_scale * vj));
        check.worst_diag_excess = check.worst_diag_excess.max(wnorm(&term.v_diag) - vj);
    }
    if out.terms.is_empty() {
        check.worst_diag_excess = 0.0;
    }
    check
}

/// Run the flow for `config` at its `t`, checking every claim along the way.
/// Certification failures (including a step that cannot be completed) end up
/// in the report; configuration and model errors are returned.
pub fn run(config: &RunConfig) -> Result<RunReport> {
    config.validate()?;
    let t = config.require_t()?;
    let model = config.model.build()?;
    let chain = &model.chain;
    let tol = &config.tolerances;
    let params = BoundParams::new(t, DELTA)?;
    let prefactor = gap_prefactor(t);
    let sites = chain.sites();
    let whole_dim = chain.dim_of(chain.whole());
    let oracle = exact_oracle(chain, &model.table, t, config.oracle_budget);
    let step_oracle = oracle.as_ref().filter(|_| whole_dim <= config.debug.step_spectrum_budget);

    let mut sweep = Sweep::new(chain.clone(), model.table.clone(), t, config.engine_tolerances())?;
    let initial_s1 = check_s1(sites, StepIndex::initial(sites), t, sweep.weighted_norms());
    let mut absorption: Vec<(Interval, StepIndex)> = initial_s1
        .absorption_violations()
        .iter()
        .map(|r| (r.interval, initial_s1.step))
        .collect();
    let mut records = vec![];
    let mut checks = vec![];
    let mut failure = None;
    let mut constants = MeasuredConstants { a: None, b: None, v_growth: None };

    while let Some(out) = sweep.advance() {
        let out = match out {
            Ok(o) => o,
            Err(e) if e.is_certification_failure() => {
                failure = Some(RunFailure {
                    message: e.to_string(),
                    certification: true,
                });
                break;
            }
            Err(e) => return Err(e),
        };
        let p = &out.problem;
        let step = p.step;
        let cert = gap_of_g(&p.g, p.e, p.vacuum, Some(step))?;
        let form = match prefactor {
            Some(_) => Some(verify_form_bound(&p.g, p.e, p.interval, chain, t)?),
            None => None,
        };
        let resolvent = resolvent_norms(&p.g, p.e, p.interval, chain)?;
        let rec = &out.record;
        let series = series_check(&out, chain, &params, rec.v_before);
        let s1 = check_s1(sites, step, t, sweep.weighted_norms());
        for row in s1.absorption_violations() {
            absorption.push((row.interval, step));
        }
        let spectrum_distance = step_oracle.map(|o| {
            let k = assemble_full(chain, sweep.table(), t);
            linalg::spectrum_distance(o, &linalg::eigvalsh(k.matrix()))
        });
        let frozen_intact = Interval::all(sites)
            .filter(|iv| iv.edges >= 1 && StepIndex::new(iv.edges, iv.left) < step)
            .all(|iv| out.before.get(iv) == sweep.table().get(iv));

        constants.a = max_opt(constants.a, rec.a_constant);
        constants.b = max_opt(constants.b, rec.b_constant);
        if rec.v_before > 0.0 {
            constants.v_growth = max_opt(constants.v_growth, Some(rec.v_after / rec.v_before));
        }
        checks.push(StepCheck {
            step,
            gap: cert.measured,
            vacuum_is_ground: cert.vacuum_is_ground,
            form,
            resolvent,
            series,
            s1_ledger_margin: s1.worst_ledger_margin(),
            s1_cap_margin: s1.worst_cap_margin(),
            s1_ledger_violations: s1.ledger_violations(0.0).iter().map(|r| r.interval).collect(),
            s1_cap_violations: s1.cap_violations(0.0).iter().map(|r| r.interval).collect(),
            spectrum_distance,
            frozen_intact,
        });
        records.push(out.record);
    }

    let final_tol = FinalTolerances {
        offdiag: tol.offdiag,
        gap_slack: tol.gap_slack,
        spectrum: tol.spectrum,
    };
    let certificate = match failure {
        None => Some(certify_final(chain, &model.table, sweep.table(), t, config.oracle_budget, &final_tol)?),
        Some(_) => None,
    };
    let truncation_audit = match (&config.model, &certificate) {
        (ModelConfig::Phi4 { sites, dim, raw_dim }, Some(cert)) if config.debug.truncation_audit => {
            Some(truncation_audit(*sites, *dim, *raw_dim, t, config, cert.gap.measured)?)
        }
        _ => None,
    };

    let ledger = LedgerSummary {
        params,
        radius: params.radius(),
        prefactor,
        initial_ledger_margin: initial_s1.worst_ledger_margin(),
        worst_ledger_margin: checks
            .iter()
            .map(|c| c.s1_ledger_margin)
            .fold(initial_s1.worst_ledger_margin(), f64::min),
        worst_cap_margin: checks
            .iter()
            .map(|c| c.s1_cap_margin)
            .fold(initial_s1.worst_cap_margin(), f64::min),
        absorption_violations: absorption,
    };
    let claims = build_claims(config, &checks, &records, &ledger, &constants, certificate.as_ref(), failure.as_ref(), truncation_audit.as_ref());
    Ok(RunReport {
        schema: REPORT_SCHEMA.into(),
        config: config.clone(),
        t,
        sites,
        d: chain.d(),
        normalization: model.normalization,
        steps: records,
        checks,
        ledger,
        constants,
        certificate,
        failure,
        truncation_audit,
        verdict: verdict(&claims),
        claims,
    })
}

fn truncation_audit(sites: usize, dim: usize, raw_dim: usize, t: f64, config: &RunConfig, gap: f64) -> Result<TruncationAudit> {
    let wider_dim = dim + 2;
    let wider = crate::models::build_phi4(sites, wider_dim, raw_dim.max(wider_dim))?;
    let wider_gap = run_sweep(&wider.chain, &wider.table, t, &config.engine_tolerances())
        .ok()
        .and_then(|res| certify_final(&wider.chain, &wider.table, &res.table, t, 0, &FinalTolerances::default()).ok())
        .map(|c| c.gap.measured);
    Ok(TruncationAudit {
        dim,
        gap,
        wider_dim,
        wider_gap,
        change: wider_gap.map(|w| (w - gap).abs()),
    })
}

fn worst(checks: &[StepCheck], f: impl Fn(&StepCheck) -> f64) -> Option<(f64, &StepCheck)> {
    checks
        .iter()
        .map(|c| (f(c), c))
        .fold(None, |acc, (v, c)| match acc {
            Some((w, _)) if w >= v => acc,
            _ => Some((v, c)),
        })
}

#[allow(clippy::too_many_arguments)]
fn build_claims(
    config: &RunConfig,
    checks: &[StepCheck],
    records: &[StepRecord],
    ledger: &LedgerSummary,
    constants: &MeasuredConstants,
    certificate: Option<&FinalCertificate>,
    failure: Option<&RunFailure>,
    audit: Option<&TruncationAudit>,
) -> Vec<Claim> {
    let tol = &config.tolerances;
    let slack = tol.norm_slack;
    let mut claims = vec![];
    claims.push(match failure {
        None => Claim::check("sweep", true, format!("{} steps completed", records.len())),
        Some(f) => Claim::check("sweep", false, f.message.clone()),
    });

    claims.push(match ledger.prefactor {
        Some(p) => Claim::check("gap-prefactor", p > 0.0, format!("1 - 8t - 4t*tail = {p:.6e}")),
        None => Claim::check("gap-prefactor", false, "tail diverges for t >= 1".into()),
    });

    let min_gap = checks.iter().map(|c| c.gap).fold(f64::INFINITY, f64::min);
    let ground = checks.iter().all(|c| c.vacuum_is_ground);
    claims.push(Claim::check(
        "step-gap",
        min_gap >= REQUIRED_GAP - tol.gap_slack && ground,
        format!("smallest local gap {min_gap:.12}, vacuum is ground state at every step: {ground}"),
    ));

    let margins: Vec<f64> = checks.iter().filter_map(|c| c.form.map(|f| f.margin)).collect();
    let min_margin = margins.iter().copied().fold(f64::INFINITY, f64::min);
    claims.push(if ledger.prefactor.is_none() {
        Claim::check("form-bound", false, "prefactor undefined".into())
    } else {
        Claim::check("form-bound", min_margin >= -tol.psd, format!("smallest compressed margin {min_margin:.6e}"))
    });
    // margin >= 0 with prefactor >= 1/2 forces gap >= 1/2
    let implied_ok = match ledger.prefactor {
        Some(p) if p >= REQUIRED_GAP => checks
            .iter()
            .all(|c| c.form.is_none_or(|f| f.margin < -tol.psd || c.gap >= REQUIRED_GAP - tol.gap_slack)),
        _ => true,
    };
    claims.push(Claim::check("form-implies-gap", implied_ok, "non-negative form margin with prefactor >= 1/2 gives gap >= 1/2".into()));

    let (b_half, b_full) = ResolventNorms::bounds(DELTA);
    let worst_half = checks.iter().map(|c| c.resolvent.half).fold(0.0, f64::max);
    let worst_full = checks.iter().map(|c| c.resolvent.full).fold(0.0, f64::max);
    claims.push(Claim::check(
        "resolvent-norms",
        worst_half <= b_half + slack && worst_full <= b_full + slack,
        format!("max {worst_half:.9} <= {b_half:.9}, max {worst_full:.9} <= {b_full:.9}"),
    ));

    let ledger_bad: usize = checks.iter().map(|c| c.s1_ledger_violations.len()).sum();
    let initial_ok = ledger.initial_ledger_margin >= 0.0;
    claims.push(Claim::check(
        "s1-ledger",
        ledger_bad == 0 && initial_ok,
        format!("{ledger_bad} violations of measured <= E, worst margin {:.6e}", ledger.worst_ledger_margin),
    ));
    let cap_bad: usize = checks.iter().map(|c| c.s1_cap_violations.len()).sum();
    claims.push(Claim::check(
        "s1-cap",
        cap_bad == 0 && ledger.worst_cap_margin >= 0.0,
        format!("{cap_bad} violations of measured <= t^((r-1)/4), worst margin {:.6e}", ledger.worst_cap_margin),
    ));
    claims.push(Claim::with(
        "s1-absorption",
        Status::Info,
        match ledger.absorption_violations.first() {
            None => "E <= t^((r-1)/4) everywhere".into(),
            Some((iv, s)) => format!(
                "E > t^((r-1)/4) at {} (interval, step) pairs, first {iv} at {s}",
                ledger.absorption_violations.len()
            ),
        },
    ));

    let vb = worst(checks, |c| c.series.worst_vb_ratio.max(c.series.worst_b_ratio));
    claims.push(Claim::check(
        "series-b-bound",
        vb.is_none_or(|(v, _)| v <= 1.0 + slack),
        vb.map_or("no steps".into(), |(v, c)| format!("largest ||(V)_j|| / bound {v:.6e} at {}", c.step)),
    ));
    let s = worst(checks, |c| c.series.worst_s_ratio.max(c.series.worst_s_weighted_ratio));
    claims.push(Claim::check(
        "series-s-bound",
        s.is_none_or(|(v, _)| v <= 1.0 + slack),
        s.map_or("no steps".into(), |(v, c)| format!("largest ||(S)_j|| / bound {v:.6e} at {}", c.step)),
    ));
    let dx = worst(checks, |c| c.series.worst_diag_excess);
    claims.push(Claim::check(
        "series-diag",
        dx.is_none_or(|(v, _)| v <= slack),
        dx.map_or("no steps".into(), |(v, c)| format!("largest ||diag|| - ||full|| {v:.3e} at {}", c.step)),
    ));
    claims.push(Claim::check(
        "v-growth",
        constants.v_growth.is_none_or(|g| g <= 2.0),
        format!("max ratio {:?}", constants.v_growth),
    ));

    let resid = records.iter().map(|r| r.offdiag_residual).fold(0.0, f64::max);
    claims.push(Claim::check("step-offdiag", resid <= tol.offdiag, format!("largest off-block residual {resid:.3e}")));

    let dists: Vec<f64> = checks.iter().filter_map(|c| c.spectrum_distance).collect();
    claims.push(if dists.len() < checks.len() || checks.is_empty() && failure.is_some() {
        Claim::with("step-spectrum", Status::Skipped, "chain above the per-step spectrum budget".into())
    } else {
        let d = dists.iter().copied().fold(0.0, f64::max);
        Claim::check("step-spectrum", d <= tol.spectrum, format!("largest per-step spectrum distance {d:.3e}"))
    });
    claims.push(Claim::check(
        "frozen-entries",
        checks.iter().all(|c| c.frozen_intact),
        "processed intervals unchanged by later steps".into(),
    ));
    if config.debug.unitary_check {
        let x = records.iter().filter_map(|r| r.crosscheck).fold(0.0, f64::max);
        claims.push(Claim::check("unitary-crosscheck", x <= 1e-9, format!("largest series vs U Y U^dagger gap {x:.3e}")));
    }

    match certificate {
        None => {
            for name in ["block-diagonal", "final-gap", "unique-ground-state", "spectrum-oracle"] {
                claims.push(Claim::check(name, false, "no final table".into()));
            }
        }
        Some(c) => {
            claims.push(Claim::check("block-diagonal", c.block_diagonal, format!("||P+ K P-|| = {:.3e}", c.offdiag)));
            claims.push(Claim::check("final-gap", c.gap_holds, format!("gap {:.12}", c.gap.measured)));
            claims.push(Claim::check(
                "unique-ground-state",
                c.unique_ground_state,
                format!("lowest level spacing {:.12}", c.level_spacing),
            ));
            claims.push(match (c.spectrum_matches, c.spectrum_distance) {
                (Some(ok), Some(d)) => Claim::check("spectrum-oracle", ok, format!("max |difference| {d:.3e}")),
                _ => Claim::with("spectrum-oracle", Status::Skipped, "d^N above oracle budget".into()),
            });
        }
    }
    if let Some(a) = audit {
        claims.push(Claim::with(
            "truncation-audit",
            Status::Info,
            format!("final gap {} at d = {}, {:?} at d = {}", a.gap, a.dim, a.wider_gap, a.wider_dim),
        ));
    }
    claims
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanPoint {
    pub sites: usize,
    pub t: f64,
    pub verdict: Status,
    pub final_gap: Option<f64>,
    pub failed_claims: Vec<String>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanWindow {
    pub sites: usize,
    pub points: Vec<ScanPoint>,
    /// Largest grid value below which every point passed.
    pub window: Option<f64>,
    pub largest_pass: Option<f64>,
    /// A pass above a failure: the pass/fail pattern is not a prefix.
    pub anomaly: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanReport {
    pub schema: String,
    pub config: RunConfig,
    pub params: BoundParams,
    /// Analytic radius bound `a/4`.
    pub radius: f64,
    pub windows: Vec<ScanWindow>,
    pub claims: Vec<Claim>,
    pub verdict: Status,
}

fn scan_point(config: &RunConfig, sites: usize, t: f64) -> ScanPoint {
    let mut cfg = config.clone();
    cfg.model = config.model.with_sites(sites);
    cfg.t = Some(t);
    cfg.t_grid = None;
    cfg.scan_sites = None;
    match run(&cfg) {
        Ok(rep) => ScanPoint {
            sites,
            t,
            verdict: rep.verdict,
            final_gap: rep.certificate.as_ref().map(|c| c.gap.measured),
            failed_claims: rep
                .claims
                .iter()
                .filter(|c| c.status == Status::Fail)
                .map(|c| c.name.clone())
                .collect(),
            error: None,
        },
        Err(e) => ScanPoint {
            sites,
            t,
            verdict: Status::Fail,
            final_gap: None,
            failed_claims: vec![],
            error: Some(e.to_string()),
        },
    }
}

/// Certify every `(N, t)` pair of the grid and summarize the passing window per `N`.
pub fn scan(config: &RunConfig) -> Result<ScanReport> {
    config.validate()?;
    let grid = config.require_grid()?.to_vec();
    let sites = config.scan_sites.clone().unwrap_or_else(|| vec![config.model.sites()]);
    let jobs: Vec<(usize, f64)> = sites.iter().flat_map(|&n| grid.iter().map(move |&t| (n, t))).collect();
    #[cfg(feature = "parallel")]
    let points: Vec<ScanPoint> = {
        use rayon::prelude::*;
        jobs.par_iter().map(|&(n, t)| scan_point(config, n, t)).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let points: Vec<ScanPoint> = jobs.iter().map(|&(n, t)| scan_point(config, n, t)).collect();

    let mut by_n: BTreeMap<usize, Vec<ScanPoint>> = BTreeMap::new();
    for p in points {
        by_n.entry(p.sites).or_default().push(p);
    }
    let windows: Vec<ScanWindow> = sites
        .iter()
        .map(|n| {
            let points = by_n.remove(n).unwrap_or_default();
            let prefix = points.iter().take_while(|p| p.verdict == Status::Pass).count();
            let window = prefix.checked_sub(1).map(|i| points[i].t);
            let largest_pass = points.iter().rev().find(|p| p.verdict == Status::Pass).map(|p| p.t);
            ScanWindow {
                sites: *n,
                anomaly: largest_pass != window,
                window,
                largest_pass,
                points,
            }
        })
        .collect();

    let params = BoundParams::new(0.0, DELTA)?;
    let radius = params.radius();
    let mut claims = vec![];
    let empty: Vec<usize> = windows.iter().filter(|w| w.window.is_none()).map(|w| w.sites).collect();
    claims.push(Claim::check(
        "window-nonzero",
        empty.is_empty(),
        if empty.is_empty() {
            format!(
                "windows {}",
                windows.iter().map(|w| format!("N={}: {:e}", w.sites, w.window.unwrap())).collect::<Vec<_>>().join(", ")
            )
        } else {
            format!("no passing prefix for N in {empty:?}")
        },
    ));
    let anomalies: Vec<usize> = windows.iter().filter(|w| w.anomaly).map(|w| w.sites).collect();
    claims.push(Claim::with(
        "window-prefix",
        if anomalies.is_empty() { Status::Pass } else { Status::Info },
        if anomalies.is_empty() {
            "pass/fail is monotone in t for every N".into()
        } else {
            format!("non-monotone pass/fail for N in {anomalies:?}, flagged for review")
        },
    ));
    let mut increasing = vec![];
    for w in windows.windows(2) {
        if let (Some(a), Some(b)) = (w[0].window, w[1].window) {
            if w[1].sites > w[0].sites && b > a {
                increasing.push(w[1].sites);
            }
        }
    }
    claims.push(Claim::with(
        "window-monotone-in-n",
        if increasing.is_empty() { Status::Pass } else { Status::Info },
        if increasing.is_empty() {
            "window non-increasing in N".into()
        } else {
            format!("window grows at N in {increasing:?}, flagged for review")
        },
    ));
    let safe = radius * 0.5;
    let safe_fail: Vec<(usize, f64)> = windows
        .iter()
        .flat_map(|w| w.points.iter())
        .filter(|p| p.t < safe && p.verdict != Status::Pass)
        .map(|p| (p.sites, p.t))
        .collect();
    claims.push(Claim::check(
        "analytic-window",
        safe_fail.is_empty(),
        format!("every grid point below a/8 = {safe:.6e} passes; failures there: {safe_fail:?}"),
    ));
    Ok(ScanReport {
        schema: SCAN_SCHEMA.into(),
        config: config.clone(),
        params,
        radius,
        windows,
        verdict: verdict(&claims),
        claims,
    })
}

/// Rows of the bounds dump: every `𝓔` for the configured chain and `t`.
pub fn bound_rows(config: &RunConfig) -> Result<ledger::BoundTable> {
    config.validate()?;
    let t = config.require_t()?;
    ledger::BoundTable::build(config.model.sites(), t)
}

impl From<&RunReport> for Error {
    fn from(r: &RunReport) -> Self {
        Error::Invariant {
            step: r.steps.last().map_or(StepIndex::initial(r.sites), |s| s.step),
            what: r.failure.as_ref().map_or("certification failed".into(), |f| f.message.clone()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::SCHEMA;

    fn cfg(model: ModelConfig, t: f64) -> RunConfig {
        let mut c = RunConfig::new(model, t);
        c.schema = SCHEMA.into();
        c
    }

    #[test]
    fn zero_coupling_run_passes_with_unit_gap() {
        let rep = run(&cfg(ModelConfig::Phi4 { sites: 3, dim: 3, raw_dim: 60 }, 0.0)).unwrap();
        assert!(rep.passed(), "{:#?}", rep.claims);
        let c = rep.certificate.unwrap();
        assert_eq!(c.gap.measured, 1.0);
    }

    #[test]
    fn small_coupling_run_passes() {
        let rep = run(&cfg(ModelConfig::Spin { sites: 4, spec_file: None }, 1e-3)).unwrap();
        assert!(rep.passed(), "{:#?}", rep.claims);
        assert_eq!(rep.steps.len(), 6);
        assert!(rep.ledger.worst_ledger_margin >= 0.0);
        assert_eq!(rep.claim("s1-absorption").unwrap().status, Status::Info);
    }

    #[test]
    fn large_coupling_is_a_certification_failure() {
        let rep = run(&cfg(ModelConfig::Phi4 { sites: 3, dim: 3, raw_dim: 60 }, 0.5)).unwrap();
        assert_eq!(rep.verdict, Status::Fail);
    }

    #[test]
    fn reports_are_deterministic() {
        let c = cfg(ModelConfig::Phi4 { sites: 3, dim: 3, raw_dim: 60 }, 2e-3);
        let a = serde_json::to_string(&run(&c).unwrap()).unwrap();
        let b = serde_json::to_string(&run(&c).unwrap()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn scan_finds_prefix_window() {
        let mut c = cfg(ModelConfig::Spin { sites: 3, spec_file: None }, 0.0);
        c.t = None;
        c.t_grid = Some(vec![1e-3, 1e-2, 0.5, 2.0]);
        c.scan_sites = Some(vec![2, 3]);
        let rep = scan(&c).unwrap();
        assert_eq!(rep.windows.len(), 2);
        for w in &rep.windows {
            assert!(w.window.unwrap() >= 1e-2, "{w:?}");
            assert!(w.points.last().unwrap().verdict == Status::Fail, "{w:?}");
        }
        assert!(rep.radius > 0.0);
    }

    #[test]
    fn missing_t_is_a_config_error() {
        let mut c = cfg(ModelConfig::Spin { sites: 3, spec_file: None }, 0.0);
        c.t = None;
        assert!(matches!(run(&c), Err(Error::Config(_))));
        assert!(matches!(scan(&c), Err(Error::Config(_))));
    }
}
