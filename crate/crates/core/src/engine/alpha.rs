//! The potential update of one step: every entry of the table is either left
//! alone, replaced by the block-diagonal series, or conjugated by `e^S` through
//! its commutator series.

use crate::error::{Error, Result};
use crate::lattice::{classify, Interval, RelationCase, StepIndex};
use crate::linalg::{self, Mat};
use crate::operator::{embed_matrix, weighted_frobenius, ChainSpec, LocalOperator};

use super::generator::Generator;
use super::series::{diagonal_sum, total_generator, SeriesTerm};
use super::table::PotentialTable;
use super::Tolerances;

#[derive(Debug, Clone)]
pub struct AlphaOutcome {
    pub table: PotentialTable,
    /// Intervals whose entry was recomputed, with their case.
    pub updated: Vec<(Interval, RelationCase)>,
    /// Largest `‖(U Y U† − Y) − Σ_n ad^n S(Y)/n!‖` over conjugated entries, when a
    /// unitary was supplied.
    pub crosscheck: Option<f64>,
}

/// `Σ_{n≥1} ad^n S(Y)/n!` for `S` placed at offsets `(dl, dr)` inside `target`.
#[allow(clippy::too_many_arguments)]
fn ad_series(
    s: &Generator,
    y: &Mat,
    dl: usize,
    dr: usize,
    target: Interval,
    step: StepIndex,
    chain: &ChainSpec,
    tol: &Tolerances,
) -> Result<Mat> {
    let mut term = y.clone();
    let mut sum = Mat::zeros(y.nrows(), y.ncols());
    for n in 1..=tol.max_order {
        term = s.ad_embedded(&term, dl, dr).unscale(n as f64);
        sum += &term;
        if weighted_frobenius(&term, target, chain) < tol.series {
            return Ok(sum);
        }
    }
    Err(Error::AdSeriesDivergence {
        step,
        interval: target,
        order: tol.max_order,
    })
}

/// The entries whose ad-series make up the update of `target` in cases C, D1, D2.
fn conjugated_parts(target: Interval, case: RelationCase, k: usize) -> Vec<Interval> {
    match case {
        RelationCase::C => vec![target],
        RelationCase::D1 => (0..=k)
            .map(|j| Interval::new(target.edges - j, target.left + j))
            .collect(),
        RelationCase::D2 => (0..=k)
            .map(|j| Interval::new(target.edges - j, target.left))
            .collect(),
        _ => vec![],
    }
}

pub fn apply_alpha(
    table: &PotentialTable,
    step: StepIndex,
    terms: &[SeriesTerm],
    t: f64,
    chain: &ChainSpec,
    tol: &Tolerances,
    unitary: Option<&Mat>,
) -> Result<AlphaOutcome> {
    let iv = step
        .interval()
        .ok_or_else(|| Error::Domain("cannot apply the update at the initial label".into()))?;
    let mut entries: std::collections::BTreeMap<Interval, LocalOperator> =
        table.entries().map(|(k, v)| (*k, v.clone())).collect();

    // With t = 0 the potentials do not enter K; the step is the identity.
    if t == 0.0 {
        return Ok(AlphaOutcome {
            table: PotentialTable::with_entries(step, entries),
            updated: vec![],
            crosscheck: unitary.map(|_| 0.0),
        });
    }

    let s = total_generator(terms, t);
    let d = chain.d();
    let jobs: Vec<(Interval, RelationCase)> = Interval::all(chain.sites())
        .filter(|x| x.edges >= iv.edges)
        .map(|x| (x, classify(x, iv)))
        .filter(|(_, c)| !c.is_untouched())
        .collect();

    let work = |&(x, case): &(Interval, RelationCase)| -> Result<Option<(Interval, Mat, f64)>> {
        if case == RelationCase::B {
            return Ok(Some((x, diagonal_sum(terms, t), 0.0)));
        }
        let present: Vec<(Interval, &LocalOperator)> = conjugated_parts(x, case, iv.edges)
            .into_iter()
            .filter_map(|p| table.get(p).map(|op| (p, op)))
            .collect();
        if present.is_empty() {
            return Ok(None);
        }
        let n = chain.dim_of(x);
        let mut y = Mat::zeros(n, n);
        for (p, op) in &present {
            y += embed_matrix(op.matrix(), *p, x, d);
        }
        let dl = d.pow((iv.left - x.left) as u32);
        let dr = d.pow((x.right() - iv.right()) as u32);
        let series = ad_series(&s, &y, dl, dr, x, step, chain, tol)?;
        let check = match unitary {
            Some(u) => {
                let ux = embed_matrix(u, iv, x, d);
                let exact = &ux * &y * ux.adjoint() - &y;
                linalg::spectral_norm(&linalg::hermitian_part(&(exact - &series)))
            }
            None => 0.0,
        };
        let mut out = table.matrix_or_zero(x, chain);
        out += series;
        Ok(Some((x, linalg::hermitian_part(&out), check)))
    };

    #[cfg(feature = "parallel")]
    let results: Vec<Result<Option<(Interval, Mat, f64)>>> = {
        use rayon::prelude::*;
        jobs.par_iter().map(work).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let results: Vec<Result<Option<(Interval, Mat, f64)>>> = jobs.iter().map(work).collect();

    let mut updated = vec![];
    let mut worst = 0.0f64;
    for (res, &(x, case)) in results.into_iter().zip(&jobs) {
        if let Some((x2, m, check)) = res? {
            debug_assert_eq!(x, x2);
            worst = worst.max(check);
            updated.push((x, case));
            if weighted_frobenius(&m, x, chain) < tol.prune {
                entries.remove(&x);
            } else {
                entries.insert(x, LocalOperator::from_parts(x, m));
            }
        }
    }
    Ok(AlphaOutcome {
        table: PotentialTable::with_entries(step, entries),
        updated,
        crosscheck: unitary.map(|_| worst),
    })
}
