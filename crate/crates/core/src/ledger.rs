//! The analytic side: the norm estimates `𝓔^{(k,q)}_{I_{r,i}}` for every
//! potential at every step, the constants of the series bound, and their
//! comparison with what the flow actually produced.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{Interval, StepIndex};

/// Certified lower bound on every local gap.
pub const DELTA: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundParams {
    pub t: f64,
    pub delta: f64,
    /// `(2 + √2) / Δ`
    pub c: f64,
    /// Positive root of the a-equation for this `c`.
    pub a: f64,
}

impl BoundParams {
    pub fn new(t: f64, delta: f64) -> Result<Self> {
        if !(delta > 0.0) {
            return Err(Error::Domain(format!("gap bound must be positive, got {delta}")));
        }
        let c = (2.0 + std::f64::consts::SQRT_2) / delta;
        Ok(BoundParams {
            t,
            delta,
            c,
            a: solve_a(c)?,
        })
    }

    /// `a / 4`: lower bound on the convergence radius of every step's series
    /// when `‖V‖_{H⁰} ≤ 1`.
    pub fn radius(&self) -> f64 {
        self.a / 4.0
    }
}

/// `z_{r−k}(q−i) ∈ {0, 1, 2}`.
fn z(r: usize, k: usize, q: usize, i: usize) -> u32 {
    let gap = r - k;
    let diff = q as i64 - i as i64;
    if gap == 0 || diff < 0 {
        0
    } else if diff < gap as i64 {
        1
    } else {
        2
    }
}

/// Factor `𝓘`: `Σ_{l=1}^{k−1} 2/((r−l)² l²) + z/((r−k)² k²)`, the last term absent for `r = k`.
pub fn factor_z(r: usize, i: usize, k: usize, q: usize) -> f64 {
    assert!(1 <= k && k <= r, "factor_z needs 1 <= k <= r");
    let mut sum: f64 = (1..k)
        .map(|l| 2.0 / (((r - l) * (r - l) * l * l) as f64))
        .sum();
    if r > k {
        sum += z(r, k, q, i) as f64 / (((r - k) * (r - k) * k * k) as f64);
    }
    sum
}

/// `(g_r(k), f_{r−k}(q−i))`.
pub fn factor_gf(r: usize, k: usize, q: usize, i: usize) -> (usize, usize) {
    assert!(1 <= k && k <= r, "factor_gf needs 1 <= k <= r");
    let g = k - 1;
    let gap = r - k;
    let f = if gap <= 1 {
        0
    } else {
        let diff = q as i64 - i as i64;
        diff.clamp(0, (gap - 1) as i64) as usize
    };
    (g, f)
}

/// `χ_{r−k}(q−i)`: 1 exactly when the interval's own step has been reached.
pub fn factor_chi(r: usize, k: usize, q: usize, i: usize) -> u32 {
    assert!(k <= r, "factor_chi is undefined for r < k");
    u32::from(r == k && q >= i)
}

/// `𝓔^{(k,q)}_{I_{r,i}}` straight from the five-branch definition. Requires
/// `k ≤ r`; see [`ledger_bound`] for the frozen value at later steps.
pub fn bound_e(r: usize, i: usize, k: usize, q: usize, t: f64) -> f64 {
    assert!(r >= 1);
    if k == 0 {
        return if r == 1 { 1.0 } else { 0.0 };
    }
    let iii = 2f64.powi(factor_chi(r, k, q, i) as i32);
    if r == 1 {
        return iii;
    }
    let zf = factor_z(r, i, k, q);
    let power = t.powf((r - 1) as f64 / 3.0);
    if r == 2 {
        return zf * iii * power;
    }
    let (g, f) = factor_gf(r, k, q, i);
    let mut ii = 1.0;
    for s in 1..=g {
        ii *= (1.0 + t.powf(s as f64 / 4.0)).powi((r - s - 1) as i32);
    }
    ii *= (1.0 + t.powf(k as f64 / 4.0)).powi(f as i32);
    zf * ii * iii * power
}

/// `𝓔` for `iv` at `step`, frozen at `(r, i+1)` once that label has passed.
/// The frozen value is the formula evaluated at `(r, i+1)` even when that
/// label is not an admissible step of the chain.
pub fn ledger_bound(iv: Interval, step: StepIndex, t: f64) -> f64 {
    let (r, i) = (iv.edges, iv.left);
    let freeze = StepIndex::new(r, i + 1);
    let at = if step > freeze { freeze } else { step };
    bound_e(r, i, at.k, at.q, t)
}

/// `t^{(r−1)/4}`, the bound of statement S1.
pub fn s1_cap(r: usize, t: f64) -> f64 {
    t.powf((r as f64 - 1.0) / 4.0)
}

/// Left side of the a-equation, `e^{2ca} − 1 + (e^{2ca} − 2ca − 1)/a − 1`.
pub fn a_equation(a: f64, c: f64) -> f64 {
    let x = 2.0 * c * a;
    let em1 = x.exp_m1();
    em1 + (em1 - x) / a - 1.0
}

/// Bisection on `(0, 1]`: the left side tends to −1 at `0⁺` and increases.
pub fn solve_a(c: f64) -> Result<f64> {
    if !(c > 0.0) {
        return Err(Error::Domain(format!("a-equation needs c > 0, got {c}")));
    }
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    if a_equation(hi, c) <= 0.0 {
        return Err(Error::Domain(format!("a-equation has no sign change on (0, 1] for c = {c}")));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if a_equation(mid, c) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    // pick the endpoint with the smaller residual
    let a = if lo > 0.0 && a_equation(lo, c).abs() < a_equation(hi, c).abs() {
        lo
    } else {
        hi
    };
    Ok(a)
}

/// `B_1 = v`, `B_j = (1/a) Σ_{m=1}^{j−1} B_{j−m} B_m`.
pub fn b_coefficients(v_norm: f64, a: f64, count: usize) -> Vec<f64> {
    let mut b: Vec<f64> = Vec::with_capacity(count);
    for j in 1..=count {
        if j == 1 {
            b.push(v_norm);
        } else {
            let s: f64 = (1..j).map(|m| b[j - m - 1] * b[m - 1]).sum();
            b.push(s / a);
        }
    }
    b
}

/// Right side of the bound on `‖(V)_j‖_{H⁰}` for `j ≥ 2`:
/// `B_j (e^{2ca} − 2ca − 1)/a + 2 v B_{j−1} (e^{2ca} − 1)/a`.
pub fn bound_v_b(b: &[f64], j: usize, v_norm: f64, params: &BoundParams) -> f64 {
    assert!(j >= 2 && j <= b.len());
    let x = 2.0 * params.c * params.a;
    let em1 = x.exp_m1();
    b[j - 1] * (em1 - x) / params.a + 2.0 * v_norm * b[j - 2] * em1 / params.a
}

/// `a / (4 v)`.
pub fn radius_bound(a: f64, v_norm: f64) -> f64 {
    a / (4.0 * v_norm)
}

/// `Σ_{l≥3} l u^{l−2} = u/(1−u)² + 2u/(1−u)` for `0 ≤ u < 1`.
pub fn gap_tail(u: f64) -> Option<f64> {
    (0.0..1.0).contains(&u).then(|| u / ((1.0 - u) * (1.0 - u)) + 2.0 * u / (1.0 - u))
}

/// `1 − 8t − 4t Σ_{l≥3} l t^{(l−2)/4}`; `None` when the tail diverges (`t ≥ 1`).
pub fn gap_prefactor(t: f64) -> Option<f64> {
    gap_tail(t.powf(0.25)).map(|tail| 1.0 - 8.0 * t - 4.0 * t * tail)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BoundRow {
    pub interval: Interval,
    pub step: StepIndex,
    pub bound: f64,
    pub cap: f64,
    pub frozen: bool,
}

/// `𝓔` for every interval with an edge and every label from `(0, N)` to the last step.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BoundTable {
    pub sites: usize,
    pub t: f64,
    pub rows: Vec<BoundRow>,
}

impl BoundTable {
    pub fn build(sites: usize, t: f64) -> Result<Self> {
        let mut steps = vec![StepIndex::initial(sites)];
        steps.extend(crate::lattice::step_sequence(sites)?);
        let mut rows = vec![];
        for iv in Interval::all(sites).filter(|iv| iv.edges >= 1) {
            for &step in &steps {
                rows.push(BoundRow {
                    interval: iv,
                    step,
                    bound: ledger_bound(iv, step, t),
                    cap: s1_cap(iv.edges, t),
                    frozen: step > StepIndex::new(iv.edges, iv.left + 1),
                });
            }
        }
        Ok(BoundTable { sites, t, rows })
    }

    pub fn lookup(&self) -> BTreeMap<(Interval, StepIndex), f64> {
        self.rows.iter().map(|r| ((r.interval, r.step), r.bound)).collect()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct S1Row {
    pub interval: Interval,
    pub measured: f64,
    pub bound: f64,
    pub cap: f64,
}

/// Measured weighted norms against `𝓔` and `t^{(r−1)/4}` after one step.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct S1Report {
    pub step: StepIndex,
    pub rows: Vec<S1Row>,
}

impl S1Report {
    /// `measured ≤ 𝓔` for every interval (up to `slack`).
    pub fn ledger_violations(&self, slack: f64) -> Vec<&S1Row> {
        self.rows.iter().filter(|r| r.measured > r.bound + slack).collect()
    }

    /// `measured ≤ t^{(r−1)/4}`.
    pub fn cap_violations(&self, slack: f64) -> Vec<&S1Row> {
        self.rows.iter().filter(|r| r.measured > r.cap + slack).collect()
    }

    /// `𝓔 ≤ t^{(r−1)/4}`: the constant-absorption claim.
    pub fn absorption_violations(&self) -> Vec<&S1Row> {
        self.rows.iter().filter(|r| r.bound > r.cap).collect()
    }

    /// Smallest `𝓔 − measured`.
    pub fn worst_ledger_margin(&self) -> f64 {
        self.rows.iter().map(|r| r.bound - r.measured).fold(f64::INFINITY, f64::min)
    }

    pub fn worst_cap_margin(&self) -> f64 {
        self.rows.iter().map(|r| r.cap - r.measured).fold(f64::INFINITY, f64::min)
    }
}

/// Compare measured weighted norms (by interval; absent means zero) with the ledger.
pub fn check_s1(sites: usize, step: StepIndex, t: f64, measured: &BTreeMap<Interval, f64>) -> S1Report {
    let rows = Interval::all(sites)
        .filter(|iv| iv.edges >= 1)
        .map(|iv| S1Row {
            interval: iv,
            measured: measured.get(&iv).copied().unwrap_or(0.0),
            bound: ledger_bound(iv, step, t),
            cap: s1_cap(iv.edges, t),
        })
        .collect();
    S1Report { step, rows }
}
