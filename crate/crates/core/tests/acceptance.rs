//! Acceptance suite: one line per criterion, red stays red.

use std::time::{Duration, Instant};

use lsbd_core::config::{ModelConfig, RunConfig};
use lsbd_core::engine::{Sweep, Tolerances};
use lsbd_core::ledger::{self, b_coefficients, solve_a, DELTA};
use lsbd_core::linalg::{min_eigenvalue, Vector, C64};
use lsbd_core::operator::inequalities::{corollary_a1_matrix, lemma_a1_matrix};
use lsbd_core::report::{run, scan, RunReport, Status};
use rand::{rngs::StdRng, Rng, SeedableRng};

struct Line {
    id: &'static str,
    ok: bool,
    detail: String,
}

fn line(out: &mut Vec<Line>, id: &'static str, ok: bool, detail: String) {
    println!("[{}] {id}: {detail}", if ok { "PASS" } else { "FAIL" });
    out.push(Line { id, ok, detail });
}

fn phi4(sites: usize, dim: usize) -> ModelConfig {
    ModelConfig::Phi4 { sites, dim, raw_dim: 60 }
}

fn spin(sites: usize) -> ModelConfig {
    ModelConfig::Spin { sites, spec_file: None }
}

struct Case {
    name: String,
    report: RunReport,
    elapsed: Duration,
}

fn main_cases() -> Vec<Case> {
    let mut cases = vec![];
    for n in 2..=4 {
        for &t in &[0.0, 1e-3, 5e-3] {
            for (label, model) in [("phi4 d=4", phi4(n, 4)), ("spin", spin(n))] {
                let start = Instant::now();
                let report = run(&RunConfig::new(model, t)).expect("run");
                cases.push(Case {
                    name: format!("{label} N={n} t={t:e}"),
                    report,
                    elapsed: start.elapsed(),
                });
            }
        }
    }
    cases
}

fn claims_pass(cases: &[Case], names: &[&str]) -> (bool, String) {
    let mut bad = vec![];
    for c in cases {
        for n in names {
            match c.report.claim(n) {
                Some(cl) if cl.status == Status::Pass => {}
                Some(cl) => bad.push(format!("{} {n}: {}", c.name, cl.detail)),
                None => bad.push(format!("{} {n}: missing", c.name)),
            }
        }
    }
    (bad.is_empty(), bad.first().cloned().unwrap_or_default())
}

fn criterion_1(out: &mut Vec<Line>, cases: &[Case]) {
    let worst = cases
        .iter()
        .map(|c| c.report.certificate.as_ref().and_then(|x| x.spectrum_distance).unwrap_or(f64::INFINITY))
        .fold(0.0, f64::max);
    let slowest = cases.iter().map(|c| c.elapsed).max().unwrap();
    let ok = worst <= 1e-8 && slowest <= Duration::from_secs(120);
    line(out, "1 unitary equivalence", ok, format!("{} cases, max spectrum difference {worst:.3e}, slowest case {slowest:.2?}", cases.len()));
}

fn criterion_2(out: &mut Vec<Line>, cases: &[Case]) {
    let (ok, first) = claims_pass(cases, &["final-gap", "unique-ground-state", "block-diagonal"]);
    let min_gap = cases
        .iter()
        .filter_map(|c| c.report.certificate.as_ref().map(|x| x.gap.measured))
        .fold(f64::INFINITY, f64::min);
    let max_off = cases
        .iter()
        .filter_map(|c| c.report.certificate.as_ref().map(|x| x.offdiag))
        .fold(0.0, f64::max);
    line(out, "2 final gap", ok, format!("min gap {min_gap:.9}, max off-block {max_off:.3e} {first}"));
}

fn criterion_3(out: &mut Vec<Line>, cases: &[Case]) {
    let (measured_ok, first) = claims_pass(cases, &["s1-ledger"]);
    let worst = cases.iter().map(|c| c.report.ledger.worst_ledger_margin).fold(f64::INFINITY, f64::min);
    line(out, "3a measured <= E", measured_ok, format!("worst margin {worst:.3e} {first}"));
    let (cap_ok, first) = claims_pass(cases, &["s1-cap"]);
    let worst_cap = cases.iter().map(|c| c.report.ledger.worst_cap_margin).fold(f64::INFINITY, f64::min);
    line(out, "3b measured <= t^((r-1)/4)", cap_ok, format!("worst margin {worst_cap:.3e} {first}"));
    let violations: usize = cases.iter().map(|c| c.report.ledger.absorption_violations.len()).sum();
    let example = cases
        .iter()
        .find_map(|c| c.report.ledger.absorption_violations.first().map(|(iv, s)| format!("{}: {iv} at {s}", c.name)))
        .unwrap_or_default();
    let absorb_ok = violations == 0;
    line(out, "3c E <= t^((r-1)/4)", absorb_ok, format!("{violations} violating (interval, step) pairs; e.g. {example}"));
    line(out, "3 S1 ledger", measured_ok && cap_ok && absorb_ok, "all three sub-checks".into());
}

fn criterion_4(out: &mut Vec<Line>, cases: &[Case]) {
    let (ok, first) = claims_pass(cases, &["step-gap", "form-bound", "gap-prefactor"]);
    let min_gap = cases
        .iter()
        .flat_map(|c| c.report.checks.iter().map(|s| s.gap))
        .fold(f64::INFINITY, f64::min);
    let min_margin = cases
        .iter()
        .flat_map(|c| c.report.checks.iter().filter_map(|s| s.form.map(|f| f.margin)))
        .fold(f64::INFINITY, f64::min);
    line(out, "4 per-step gap", ok, format!("min local gap {min_gap:.9}, min form margin {min_margin:.3e} {first}"));
}

fn catalan(n: u32) -> u128 {
    // C_n = binom(2n, n) / (n + 1), exact in integers
    let mut c: u128 = 1;
    for k in 0..n as u128 {
        c = c * 2 * (2 * k + 1) / (k + 2);
    }
    c
}

fn criterion_5(out: &mut Vec<Line>, cases: &[Case]) {
    let mut taylor = 0.0f64;
    for &(v, a) in &[(0.5, solve_a((2.0 + 2f64.sqrt()) / DELTA).unwrap()), (1.0, 0.3), (0.25, 2.0)] {
        let b = b_coefficients(v, a, 20);
        for (i, &bj) in b.iter().enumerate() {
            let n = i as i32 + 1;
            let oracle = a * (v / a).powi(n) * catalan(n as u32 - 1) as f64;
            taylor = taylor.max((bj / oracle - 1.0).abs());
        }
    }
    let mut residual = 0.0f64;
    for c in [1.0, 2.0, 6.0, (2.0 + 2f64.sqrt()) / DELTA, 20.0] {
        residual = residual.max(ledger::a_equation(solve_a(c).unwrap(), c).abs());
    }
    let certified: Vec<&Case> = cases.iter().filter(|c| c.report.t > 0.0).collect();
    let mut bad = vec![];
    let mut growth = 0.0f64;
    for c in &certified {
        for n in ["series-b-bound", "series-s-bound", "series-diag", "v-growth"] {
            let cl = c.report.claim(n).unwrap();
            if cl.status != Status::Pass {
                bad.push(format!("{} {n}: {}", c.name, cl.detail));
            }
        }
        growth = growth.max(c.report.constants.v_growth.unwrap_or(0.0));
    }
    let ok = taylor <= 1e-10 && residual <= 1e-12 && bad.is_empty();
    line(
        out,
        "5 series machinery",
        ok,
        format!(
            "B_j vs Catalan rel {taylor:.2e}, a-eq residual {residual:.2e}, max V growth {growth:.6}, {}",
            bad.first().cloned().unwrap_or_else(|| "per-step bounds hold".into())
        ),
    );
}

fn criterion_6(out: &mut Vec<Line>) {
    let mut worst = f64::INFINITY;
    let mut count = 0;
    for seed in 0..50u64 {
        let mut rng = StdRng::seed_from_u64(seed);
        for n in 1..=5usize {
            let vacua: Vec<Vector> = (0..n)
                .map(|_| {
                    let d = rng.random_range(2..=4);
                    Vector::from_fn(d, |_, _| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
                })
                .collect();
            worst = worst.min(min_eigenvalue(&lemma_a1_matrix(&vacua)));
            count += 1;
            for r in 0..n {
                let l = rng.random_range(1..=n - r);
                let big = rng.random_range(l..=n - r);
                worst = worst.min(min_eigenvalue(&corollary_a1_matrix(&vacua, r, l, big)));
                count += 1;
            }
        }
    }
    line(out, "6 projector inequalities", worst >= -1e-10, format!("{count} matrices, min eigenvalue {worst:.3e}"));
}

fn criterion_7(out: &mut Vec<Line>, cases: &[Case]) {
    let (ok, first) = claims_pass(cases, &["resolvent-norms"]);
    let half = cases
        .iter()
        .flat_map(|c| c.report.checks.iter().map(|s| s.resolvent.half))
        .fold(0.0, f64::max);
    let full = cases
        .iter()
        .flat_map(|c| c.report.checks.iter().map(|s| s.resolvent.full))
        .fold(0.0, f64::max);
    line(out, "7 resolvent norms", ok, format!("max {half:.6} vs {:.6}, max {full:.6} vs {:.6} {first}", (2.0 / DELTA).sqrt(), 2f64.sqrt() / DELTA));
}

fn criterion_8(out: &mut Vec<Line>) {
    let mut cfg = RunConfig::new(phi4(2, 3), 0.0);
    cfg.t = None;
    cfg.t_grid = Some(vec![1e-4, 3e-4, 1e-3, 3e-3, 1e-2, 3e-2]);
    cfg.scan_sites = Some(vec![2, 3, 4, 5]);
    let start = Instant::now();
    let rep = scan(&cfg).expect("scan");
    let elapsed = start.elapsed();
    let windows: Vec<String> = rep
        .windows
        .iter()
        .map(|w| format!("N={}: {}", w.sites, w.window.map_or("none".into(), |x| format!("{x:e}"))))
        .collect();
    let nonzero = rep.claims.iter().find(|c| c.name == "window-nonzero").unwrap().status == Status::Pass;
    let ok = nonzero && elapsed <= Duration::from_secs(900);
    line(out, "8 uniformity", ok, format!("{}; a/4 = {:.4e}; {elapsed:.2?}", windows.join(", "), rep.radius));
}

fn criterion_9(out: &mut Vec<Line>) {
    let mut ok = true;
    let mut detail = String::from("S = 0, table unchanged, gap 1");
    for n in 2..=4 {
        for model in [phi4(n, 4), spin(n)] {
            let m = model.build().unwrap();
            let mut sweep = Sweep::new(m.chain.clone(), m.table.clone(), 0.0, Tolerances::default()).unwrap();
            while let Some(step) = sweep.advance() {
                let step = step.unwrap();
                if !step.generator.is_zero() || step.record.s_norm != 0.0 {
                    ok = false;
                    detail = format!("nonzero S at {}", step.record.step);
                }
            }
            let last = sweep.into_table();
            let same = last.len() == m.table.len() && m.table.entries().all(|(iv, op)| last.get(*iv) == Some(op));
            if !same {
                ok = false;
                detail = format!("table changed for {model:?}");
            }
            let rep = run(&RunConfig::new(model.clone(), 0.0)).unwrap();
            let gap = rep.certificate.as_ref().map_or(f64::NAN, |c| c.gap.measured);
            if (gap - 1.0).abs() > 1e-14 || gap.is_nan() {
                ok = false;
                detail = format!("gap {gap} for {model:?}");
            }
        }
    }
    line(out, "9 trivial limit", ok, detail);
}

fn criterion_10(out: &mut Vec<Line>) {
    let mut worst = 0.0f64;
    let mut checked = 0;
    let mut ok = true;
    for model in [phi4(4, 4), spin(4)] {
        let mut cfg = RunConfig::new(model, 5e-3);
        cfg.debug.unitary_check = true;
        let rep = run(&cfg).unwrap();
        ok &= rep.claim("sweep").unwrap().status == Status::Pass;
        for s in &rep.steps {
            if let Some(x) = s.crosscheck {
                worst = worst.max(x);
                checked += 1;
            }
        }
    }
    ok &= checked > 0 && worst <= 1e-9;
    line(out, "10 unitary cross-check", ok, format!("{checked} steps with C/D1/D2 updates, max difference {worst:.3e}"));
}

#[test]
fn acceptance() {
    let mut out = vec![];
    let cases = main_cases();
    criterion_1(&mut out, &cases);
    criterion_2(&mut out, &cases);
    criterion_3(&mut out, &cases);
    criterion_4(&mut out, &cases);
    criterion_5(&mut out, &cases);
    criterion_6(&mut out);
    criterion_7(&mut out, &cases);
    criterion_8(&mut out);
    criterion_9(&mut out);
    criterion_10(&mut out);
    let red: Vec<&str> = out.iter().filter(|l| !l.ok).map(|l| l.id).collect();
    println!("acceptance: {} of {} lines pass", out.len() - red.len(), out.len());
    assert!(red.is_empty(), "failing criteria: {red:?}; {}", out.iter().filter(|l| !l.ok).map(|l| l.detail.as_str()).collect::<Vec<_>>().join(" | "));
}
