//! The block-diagonalization flow: for each step `(k,q)` in order, build `G`
//! and `E` on `I_{k,q}`, sum the Lie-Schwinger series for `S`, and push every
//! potential through `e^S · e^{−S}`.

mod alpha;
mod generator;
mod series;
mod table;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

pub use alpha::{apply_alpha, AlphaOutcome};
pub use generator::Generator;
pub use series::{
    diagonal_sum, ground_value_e, local_g, series_s_and_v, total_generator, LocalProblem,
    SeriesTerm,
};
pub use table::PotentialTable;

use crate::error::{Error, Result};
use crate::lattice::{step_sequence, Interval, StepIndex};
use crate::linalg::{self, Mat};
use crate::operator::{self, weighted_off_block_norm, ChainSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    /// Series terms below this (times `t^j`) end the expansion.
    pub series: f64,
    /// Off-block weighted norms below this count as block-diagonal.
    pub offdiag: f64,
    /// Compressed gaps at or below this abort the step.
    pub gap_floor: f64,
    /// Entries with weighted Frobenius norm below this are dropped.
    pub prune: f64,
    pub max_order: usize,
    /// A series term above this is declared divergent without waiting for `max_order`.
    pub divergence: f64,
    /// Recompute every conjugated entry as `U Y U†` and record the discrepancy.
    pub unitary_check: bool,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            series: 1e-12,
            offdiag: 1e-10,
            gap_floor: 1e-10,
            prune: 1e-14,
            max_order: 64,
            divergence: 1e8,
            unitary_check: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: StepIndex,
    pub series_order: usize,
    pub s_norm: f64,
    /// `‖(H⁰+1)^{1/2} S‖`
    pub s_weighted: f64,
    pub gap: f64,
    pub ground_value: f64,
    /// Weighted off-block norm of `U (G + tV) U†` on `I_{k,q}`.
    pub offdiag_residual: f64,
    pub unitary_defect: f64,
    /// `‖V^{(k,q−1)}_{I_{k,q}}‖_{H⁰}`
    pub v_before: f64,
    /// `‖V^{(k,q)}_{I_{k,q}}‖_{H⁰}`
    pub v_after: f64,
    /// `‖S‖ / (t ‖V‖_{H⁰})`, when the denominator is nonzero.
    pub a_constant: Option<f64>,
    /// `‖(H⁰+1)^{1/2} S‖ / (t ‖V‖_{H⁰})`
    pub b_constant: Option<f64>,
    /// Largest weighted norm over table entries with `r` edges, index `r − 1`.
    pub max_weighted_by_length: Vec<f64>,
    pub crosscheck: Option<f64>,
}

/// Everything one step produced, for callers that audit the flow as it runs.
#[derive(Debug, Clone)]
pub struct StepOutcome {
    pub before: PotentialTable,
    pub problem: LocalProblem,
    pub terms: Vec<SeriesTerm>,
    pub generator: Generator,
    pub unitary: Mat,
    pub alpha: AlphaOutcome,
    pub record: StepRecord,
}

/// A flow in progress. Owns the current table and a cache of weighted norms so
/// unchanged entries are not re-measured.
#[derive(Debug, Clone)]
pub struct Sweep {
    chain: ChainSpec,
    t: f64,
    tol: Tolerances,
    table: PotentialTable,
    norms: BTreeMap<Interval, f64>,
    steps: Vec<StepIndex>,
    next: usize,
}

impl Sweep {
    pub fn new(chain: ChainSpec, table: PotentialTable, t: f64, tol: Tolerances) -> Result<Self> {
        if !(t >= 0.0) || !t.is_finite() {
            return Err(Error::Domain(format!("coupling must be finite and non-negative, got {t}")));
        }
        let steps = step_sequence(chain.sites())?;
        let mut norms = BTreeMap::new();
        for (iv, op) in table.entries() {
            norms.insert(*iv, operator::weighted_norm(op, *iv, &chain)?);
        }
        Ok(Sweep {
            chain,
            t,
            tol,
            table,
            norms,
            steps,
            next: 0,
        })
    }

    pub fn chain(&self) -> &ChainSpec {
        &self.chain
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn tolerances(&self) -> &Tolerances {
        &self.tol
    }

    pub fn table(&self) -> &PotentialTable {
        &self.table
    }

    pub fn into_table(self) -> PotentialTable {
        self.table
    }

    pub fn steps(&self) -> &[StepIndex] {
        &self.steps
    }

    pub fn is_done(&self) -> bool {
        self.next >= self.steps.len()
    }

    /// Weighted norm of the current entry on `iv` (zero if absent).
    pub fn weighted_norm(&self, iv: Interval) -> f64 {
        self.norms.get(&iv).copied().unwrap_or(0.0)
    }

    pub fn weighted_norms(&self) -> &BTreeMap<Interval, f64> {
        &self.norms
    }

    /// Run the next step. `None` once the sequence is exhausted; after an error
    /// the sweep stays at the failed step.
    pub fn advance(&mut self) -> Option<Result<StepOutcome>> {
        let step = *self.steps.get(self.next)?;
        let out = self.run_step(step);
        if out.is_ok() {
            self.next += 1;
        }
        Some(out)
    }

    fn run_step(&mut self, step: StepIndex) -> Result<StepOutcome> {
        let (chain, t, tol) = (&self.chain, self.t, &self.tol);
        let iv = step.interval().expect("sweep steps have k >= 1");
        let problem = LocalProblem::new(&self.table, step, chain, t, tol)?;
        let v1 = self.table.matrix_or_zero(iv, chain);
        let terms = series_s_and_v(&problem, &v1, chain, t, tol)?;
        let generator = total_generator(&terms, t);
        let unitary = generator.exp();
        let alpha = apply_alpha(
            &self.table,
            step,
            &terms,
            t,
            chain,
            tol,
            tol.unitary_check.then_some(&unitary),
        )?;

        let conj = &unitary * (&problem.g + v1.scale(t)) * unitary.adjoint();
        let offdiag_residual = weighted_off_block_norm(&conj, iv, chain);
        let gram = &unitary * unitary.adjoint() - linalg::identity(unitary.nrows());
        let unitary_defect = linalg::spectral_norm(&linalg::hermitian_part(&gram));

        let mut norms = self.norms.clone();
        for (x, _) in &alpha.updated {
            match alpha.table.get(*x) {
                Some(op) => norms.insert(*x, operator::weighted_norm(op, *x, chain)?),
                None => norms.remove(x),
            };
        }
        let v_before = self.weighted_norm(iv);
        let v_after = norms.get(&iv).copied().unwrap_or(0.0);
        let mut by_length = vec![0.0f64; chain.sites() - 1];
        for (x, &w) in &norms {
            by_length[x.edges - 1] = by_length[x.edges - 1].max(w);
        }
        let s_norm = generator.norm();
        let s_weighted = generator.weighted_up_norm(chain);
        let denom = t * v_before;
        let record = StepRecord {
            step,
            series_order: terms.len(),
            s_norm,
            s_weighted,
            gap: problem.gap(),
            ground_value: problem.e,
            offdiag_residual,
            unitary_defect,
            v_before,
            v_after,
            a_constant: (denom > 0.0).then(|| s_norm / denom),
            b_constant: (denom > 0.0).then(|| s_weighted / denom),
            max_weighted_by_length: by_length,
            crosscheck: alpha.crosscheck,
        };
        let before = std::mem::replace(&mut self.table, alpha.table.clone());
        self.norms = norms;
        Ok(StepOutcome {
            before,
            problem,
            terms,
            generator,
            unitary,
            alpha,
            record,
        })
    }
}

#[derive(Debug, Clone)]
pub struct SweepResult {
    pub table: PotentialTable,
    pub records: Vec<StepRecord>,
}

#[derive(Debug)]
pub struct SweepFailure {
    pub error: Error,
    pub records: Vec<StepRecord>,
}

impl std::fmt::Display for SweepFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} (after {} completed steps)", self.error, self.records.len())
    }
}

impl std::error::Error for SweepFailure {}

pub fn run_sweep(
    chain: &ChainSpec,
    initial: &PotentialTable,
    t: f64,
    tol: &Tolerances,
) -> std::result::Result<SweepResult, SweepFailure> {
    let mut sweep = Sweep::new(chain.clone(), initial.clone(), t, tol.clone()).map_err(|error| {
        SweepFailure {
            error,
            records: vec![],
        }
    })?;
    let mut records = vec![];
    while let Some(out) = sweep.advance() {
        match out {
            Ok(o) => records.push(o.record),
            Err(error) => return Err(SweepFailure { error, records }),
        }
    }
    Ok(SweepResult {
        table: sweep.into_table(),
        records,
    })
}
