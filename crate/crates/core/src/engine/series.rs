//! One step's local problem: `G`, `E`, the reduced resolvent on `ran P⁺`, and
//! the Lie-Schwinger series for `S` and the transformed potential.

use crate::error::{Error, Result};
use crate::lattice::{Interval, StepIndex};
use crate::linalg::{self, Mat, Vector, C64, ZERO};
use crate::operator::{
    compress_plus, diagonal_part, embed_matrix, off_block_column, off_diagonal_part,
    vacuum_expectation, weighted_frobenius, weighted_off_block_norm, ChainSpec, LocalOperator,
};

use super::generator::Generator;
use super::table::PotentialTable;
use super::Tolerances;

fn step_interval(step: StepIndex) -> Result<Interval> {
    step.interval()
        .ok_or_else(|| Error::Domain("the initial label (0,N) is not a block-diagonalization step".into()))
}

/// Strict sub-intervals of `iv` that carry potentials, i.e. with at least one edge.
fn inner_intervals(iv: Interval) -> impl Iterator<Item = Interval> {
    iv.sub_intervals().filter(move |j| j.edges >= 1 && *j != iv)
}

/// `G = Σ_{i∈I} H_i + t Σ V_J` over strict sub-intervals `J ⊂ I_{k,q}` with an edge.
pub fn local_g(table: &PotentialTable, step: StepIndex, chain: &ChainSpec, t: f64) -> Result<LocalOperator> {
    let iv = chain.check(step_interval(step)?)?;
    let mut g = linalg::diag(&chain.h0_diagonal(iv));
    if t != 0.0 {
        for j in inner_intervals(iv) {
            if let Some(op) = table.get(j) {
                g += embed_matrix(op.matrix(), j, iv, chain.d()).scale(t);
            }
        }
    }
    let residual = weighted_off_block_norm(&g, iv, chain);
    if residual > 1e-10 {
        return Err(Error::Invariant {
            step,
            what: format!("G on {iv} has off-block residual {residual:.3e}"),
        });
    }
    LocalOperator::new(iv, g, chain)
}

/// `E = t Σ ⟨V_J⟩` over the same sub-intervals as `local_g`.
pub fn ground_value_e(table: &PotentialTable, step: StepIndex, chain: &ChainSpec, t: f64) -> Result<f64> {
    let iv = chain.check(step_interval(step)?)?;
    if t == 0.0 {
        return Ok(0.0);
    }
    let sum: f64 = inner_intervals(iv)
        .filter_map(|j| table.get(j))
        .map(|op| vacuum_expectation(op, chain))
        .sum();
    Ok(t * sum)
}

/// `G` and `E` together with the spectral data of `G` compressed to `ran P⁺`.
#[derive(Debug, Clone)]
pub struct LocalProblem {
    pub step: StepIndex,
    pub interval: Interval,
    pub g: Mat,
    pub e: f64,
    pub vacuum: usize,
    /// Ascending eigenvalues of `P⁺GP⁺` on `ran P⁺`.
    pub plus_values: Vec<f64>,
    /// `(P⁺(G − E)P⁺)^{-1}` on `ran P⁺`, vacuum row and column removed.
    resolvent: Mat,
}

impl LocalProblem {
    pub fn new(table: &PotentialTable, step: StepIndex, chain: &ChainSpec, t: f64, tol: &Tolerances) -> Result<Self> {
        let g = local_g(table, step, chain, t)?;
        let e = ground_value_e(table, step, chain, t)?;
        let iv = g.support();
        let vacuum = chain.vacuum_index(iv);
        let g = g.into_matrix();
        let direct = g[(vacuum, vacuum)].re;
        if (direct - e).abs() > 1e-12 * e.abs().max(1.0) {
            return Err(Error::Invariant {
                step,
                what: format!("E = {e} but <vac, G vac> = {direct}"),
            });
        }
        let eig = linalg::eigh(&compress_plus(&g, vacuum));
        let gap = eig.values[0] - e;
        if !(gap > tol.gap_floor) {
            return Err(Error::GapCollapse { step, gap });
        }
        let mut scaled = eig.vectors.clone();
        for (j, &lam) in eig.values.iter().enumerate() {
            let inv = C64::new(1.0 / (lam - e), 0.0);
            for i in 0..scaled.nrows() {
                scaled[(i, j)] *= inv;
            }
        }
        let resolvent = scaled * eig.vectors.adjoint();
        Ok(LocalProblem {
            step,
            interval: iv,
            g,
            e,
            vacuum,
            plus_values: eig.values,
            resolvent,
        })
    }

    pub fn gap(&self) -> f64 {
        self.plus_values[0] - self.e
    }

    pub fn dim(&self) -> usize {
        self.g.nrows()
    }

    /// The vector `s` of `(G−E)^{-1} P⁺ X P⁻ − h.c. = s e_v† − e_v s†`.
    pub fn generator_for(&self, x: &Mat) -> Generator {
        let col = off_block_column(x, self.vacuum);
        let reduced = col.clone().remove_row(self.vacuum);
        let s = &self.resolvent * reduced;
        let mut full = Vector::zeros(self.dim());
        let mut k = 0;
        for a in 0..self.dim() {
            if a != self.vacuum {
                full[a] = s[k];
                k += 1;
            }
        }
        Generator::from_vector(self.interval, self.vacuum, full)
    }
}

#[derive(Debug, Clone)]
pub struct SeriesTerm {
    pub order: usize,
    pub s: Generator,
    pub v: Mat,
    pub v_diag: Mat,
}

/// `(S)_j` and `(V)_j` for `j = 1, 2, …` until both `t^j‖(V)_j‖_{H⁰}` and
/// `t^j‖(S)_j‖` drop below the tolerance.
///
/// With `X^{(p)}_m := Σ_{r_1+…+r_p=m} ad S_{r_1} ⋯ ad S_{r_p}(X)` the nested
/// commutator sums obey `X^{(p)}_m = Σ_r ad S_r (X^{(p−1)}_{m−r})`, so
///
/// `(V)_j = Σ_{p=2}^{j} G^{(p)}_j / p! + Σ_{p=1}^{j−1} V^{(p)}_{j−1} / p!`
///
/// with `G^{(1)}_m = ad S_m(G) = −(P⁺(V)_mP⁻ + P⁻(V)_mP⁺)` in closed form and
/// `V^{(0)}_0 = V`. This sums the same terms as the expansion over
/// compositions without enumerating them.
pub fn series_s_and_v(problem: &LocalProblem, v1: &Mat, chain: &ChainSpec, t: f64, tol: &Tolerances) -> Result<Vec<SeriesTerm>> {
    expand(problem, v1, chain, t, tol, None)
}

/// Exactly `order` terms, no stopping rule.
#[cfg(test)]
pub(crate) fn series_fixed_order(problem: &LocalProblem, v1: &Mat, chain: &ChainSpec, order: usize) -> Vec<SeriesTerm> {
    let tol = Tolerances {
        max_order: order,
        divergence: f64::INFINITY,
        ..Tolerances::default()
    };
    expand(problem, v1, chain, 1.0, &tol, Some(order)).expect("no stopping rule")
}

fn fetch(tab: &[Vec<Option<Mat>>], p: usize, m: usize) -> Option<&Mat> {
    tab.get(p).and_then(|row| row.get(m)).and_then(|x| x.as_ref())
}

#[allow(clippy::needless_range_loop)]
fn expand(problem: &LocalProblem, v1: &Mat, chain: &ChainSpec, t: f64, tol: &Tolerances, fixed: Option<usize>) -> Result<Vec<SeriesTerm>> {
    let iv = problem.interval;
    let vac = problem.vacuum;
    let n = problem.dim();
    // g_tab[p][m], v_tab[p][m]; unused slots stay empty
    let mut g_tab: Vec<Vec<Option<Mat>>> = vec![vec![]];
    let mut v_tab: Vec<Vec<Option<Mat>>> = vec![vec![Some(v1.clone())]];
    let mut terms: Vec<SeriesTerm> = vec![];
    let mut factorial = vec![1.0f64];

    let store = |tab: &mut Vec<Vec<Option<Mat>>>, p: usize, m: usize, x: Mat| {
        while tab.len() <= p {
            tab.push(vec![]);
        }
        while tab[p].len() <= m {
            tab[p].push(None);
        }
        tab[p][m] = Some(x);
    };

    for j in 1..=tol.max_order {
        factorial.push(factorial[j - 1] * j as f64);
        let vj = if j == 1 {
            v1.clone()
        } else {
            // V^{(p)}_{j−1} for p = 1..j−1
            for p in 1..j {
                let m = j - 1;
                let mut acc = Mat::zeros(n, n);
                for r in 1..=m {
                    if m - r + 1 < p {
                        break;
                    }
                    if let Some(prev) = fetch(&v_tab, p - 1, m - r) {
                        acc += terms[r - 1].s.ad(prev);
                    }
                }
                store(&mut v_tab, p, m, acc);
            }
            // G^{(p)}_j for p = 2..j
            for p in 2..=j {
                let mut acc = Mat::zeros(n, n);
                for r in 1..j {
                    if j - r < p - 1 {
                        break;
                    }
                    if let Some(prev) = fetch(&g_tab, p - 1, j - r) {
                        acc += terms[r - 1].s.ad(prev);
                    }
                }
                store(&mut g_tab, p, j, acc);
            }
            let mut vj = Mat::zeros(n, n);
            for p in 2..=j {
                if let Some(x) = fetch(&g_tab, p, j) {
                    vj += x.unscale(factorial[p]);
                }
            }
            for p in 1..j {
                if let Some(x) = fetch(&v_tab, p, j - 1) {
                    vj += x.unscale(factorial[p]);
                }
            }
            linalg::hermitian_part(&vj)
        };
        let sj = problem.generator_for(&vj);
        store(&mut g_tab, 1, j, off_diagonal_part(&vj, vac).scale(-1.0));
        let tj = t.powi(j as i32);
        let v_size = tj * weighted_frobenius(&vj, iv, chain);
        let s_size = tj * sj.norm();
        if fixed.is_none() && (!v_size.is_finite() || !s_size.is_finite() || v_size > tol.divergence) {
            return Err(Error::SeriesDivergence {
                step: problem.step,
                order: j,
                norm: v_size,
            });
        }
        terms.push(SeriesTerm {
            order: j,
            s: sj,
            v_diag: diagonal_part(&vj, vac),
            v: vj,
        });
        let done = match fixed {
            Some(order) => j == order,
            None => v_size < tol.series && s_size < tol.series,
        };
        if done {
            return Ok(terms);
        }
    }
    let last = terms.last().map(|x| weighted_frobenius(&x.v, iv, chain)).unwrap_or(0.0);
    Err(Error::SeriesDivergence {
        step: problem.step,
        order: tol.max_order,
        norm: t.powi(tol.max_order as i32) * last,
    })
}

/// `S = Σ_j t^j (S)_j`.
pub fn total_generator(terms: &[SeriesTerm], t: f64) -> Generator {
    let first = &terms[0].s;
    let mut s = Generator::zero(first.support(), first.dim(), first.vacuum());
    for term in terms {
        s.axpy(t.powi(term.order as i32), &term.s);
    }
    s
}

/// `Σ_j t^{j−1} (V)_j^{diag}`.
pub fn diagonal_sum(terms: &[SeriesTerm], t: f64) -> Mat {
    let n = terms[0].v.nrows();
    let mut acc = Mat::zeros(n, n);
    for term in terms {
        acc += term.v_diag.scale(t.powi(term.order as i32 - 1));
    }
    // exact zeros off the blocks
    let vac = terms[0].s.vacuum();
    for a in 0..n {
        if a != vac {
            acc[(a, vac)] = ZERO;
            acc[(vac, a)] = ZERO;
        }
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::max_abs;
    use crate::models::{build_phi4, build_spin, SiteAndBond, DEFAULT_RAW_DIM};

    fn tol() -> Tolerances {
        Tolerances::default()
    }

    /// The table as it stands when `step` is about to run.
    fn table_at(chain: &ChainSpec, initial: &PotentialTable, step: StepIndex, t: f64) -> PotentialTable {
        let mut sweep = crate::engine::Sweep::new(chain.clone(), initial.clone(), t, tol()).unwrap();
        for s in crate::lattice::step_sequence(chain.sites()).unwrap() {
            if s == step {
                break;
            }
            sweep.advance().unwrap().unwrap();
        }
        sweep.table().clone()
    }

    #[test]
    fn g_and_e_on_first_row() {
        let m = build_phi4(4, 3, DEFAULT_RAW_DIM).unwrap();
        for q in 1..=3 {
            let s = StepIndex::new(1, q);
            let g = local_g(&m.table, s, &m.chain, 0.01).unwrap();
            assert_eq!(g.matrix(), &linalg::diag(&m.chain.h0_diagonal(Interval::new(1, q))));
            assert_eq!(ground_value_e(&m.table, s, &m.chain, 0.01).unwrap(), 0.0);
        }
        let g = local_g(&m.table, StepIndex::new(3, 1), &m.chain, 0.0).unwrap();
        assert_eq!(g.matrix(), &linalg::diag(&m.chain.h0_diagonal(Interval::new(3, 1))));
    }

    #[test]
    fn e_is_the_vacuum_matrix_element() {
        let m = build_spin(4, &SiteAndBond::two_level_ising()).unwrap();
        let s = StepIndex::new(2, 1);
        let t = 0.02;
        let table = table_at(&m.chain, &m.table, s, t);
        let g = local_g(&table, s, &m.chain, t).unwrap();
        let v = m.chain.vacuum_index(g.support());
        let e = ground_value_e(&table, s, &m.chain, t).unwrap();
        assert!(e != 0.0);
        assert!((g.matrix()[(v, v)].re - e).abs() < 1e-15);
        // G e_v = E e_v
        let col = g.matrix().column(v);
        for a in 0..col.len() {
            let expect = if a == v { e } else { 0.0 };
            assert!((col[a] - C64::new(expect, 0.0)).norm() < 1e-15);
        }
    }

    #[test]
    fn zero_coupling_or_zero_potential_gives_one_term() {
        let m = build_phi4(2, 3, DEFAULT_RAW_DIM).unwrap();
        let s = StepIndex::new(1, 1);
        let p = LocalProblem::new(&m.table, s, &m.chain, 0.0, &tol()).unwrap();
        let v = m.table.get(Interval::new(1, 1)).unwrap().matrix().clone();
        let terms = series_s_and_v(&p, &v, &m.chain, 0.0, &tol()).unwrap();
        assert_eq!(terms.len(), 1);
        assert!(total_generator(&terms, 0.0).is_zero());

        let zero = Mat::zeros(9, 9);
        let p = LocalProblem::new(&m.table, s, &m.chain, 0.1, &tol()).unwrap();
        let terms = series_s_and_v(&p, &zero, &m.chain, 0.1, &tol()).unwrap();
        assert_eq!(terms.len(), 1);
        assert!(terms[0].s.is_zero());
    }

    /// `ad S_j (G) = −(P⁺V_jP⁻ + h.c.)` for the constructed `S_j`.
    #[test]
    fn generator_solves_the_homological_equation() {
        let m = build_phi4(3, 3, DEFAULT_RAW_DIM).unwrap();
        let t = 0.01;
        let s = StepIndex::new(2, 1);
        let table = table_at(&m.chain, &m.table, s, t);
        let p = LocalProblem::new(&table, s, &m.chain, t, &tol()).unwrap();
        let v = table.matrix_or_zero(Interval::new(2, 1), &m.chain);
        let v = v + Mat::from_fn(27, 27, |a, b| C64::new(((a * 7 + b * 3) % 5) as f64 * 0.01, 0.0));
        let v = linalg::hermitian_part(&v);
        let sg = p.generator_for(&v);
        let lhs = sg.ad(&p.g);
        let rhs = off_diagonal_part(&v, p.vacuum).scale(-1.0);
        assert!(max_abs(&(lhs - rhs)) < 1e-12);
    }

    /// Brute force over compositions `(r_1, …, r_p)` of the defining sum.
    fn v_j_by_compositions(terms: &[SeriesTerm], g: &Mat, v: &Mat, j: usize) -> Mat {
        fn compositions(total: usize, parts: usize) -> Vec<Vec<usize>> {
            if parts == 0 {
                return if total == 0 { vec![vec![]] } else { vec![] };
            }
            let mut out = vec![];
            for first in 1..=total {
                for mut rest in compositions(total - first, parts - 1) {
                    rest.insert(0, first);
                    out.push(rest);
                }
            }
            out
        }
        let nested = |x: &Mat, rs: &[usize]| {
            let mut y = x.clone();
            for &r in rs.iter().rev() {
                let d = terms[r - 1].s.to_dense();
                y = &d * &y - &y * &d;
            }
            y
        };
        let mut fact = 1.0;
        let mut out = Mat::zeros(g.nrows(), g.nrows());
        for p in 1..=j {
            fact *= p as f64;
            if p >= 2 {
                for rs in compositions(j, p) {
                    out += nested(g, &rs).unscale(fact);
                }
            }
            if p < j {
                for rs in compositions(j - 1, p) {
                    out += nested(v, &rs).unscale(fact);
                }
            }
        }
        out
    }

    #[test]
    fn recursion_matches_composition_sum() {
        let m = build_spin(3, &SiteAndBond::two_level_ising()).unwrap();
        let s = StepIndex::new(2, 1);
        let table = table_at(&m.chain, &m.table, s, 0.05);
        let p = LocalProblem::new(&table, s, &m.chain, 0.05, &tol()).unwrap();
        let v = linalg::hermitian_part(&Mat::from_fn(8, 8, |a, b| {
            C64::new(((a + 2 * b) % 3) as f64 - 1.0, ((a * b) % 2) as f64 * 0.3)
        }));
        let terms = series_fixed_order(&p, &v, &m.chain, 6);
        assert_eq!(terms.len(), 6);
        assert_eq!(terms[0].v, v);
        for j in 2..=6 {
            let brute = v_j_by_compositions(&terms, &p.g, &v, j);
            let scale = max_abs(&brute).max(1.0);
            assert!(max_abs(&(&terms[j - 1].v - &brute)) < 1e-11 * scale, "j={j}");
        }
    }

    #[test]
    fn conjugation_block_diagonalizes() {
        let m = build_phi4(3, 3, DEFAULT_RAW_DIM).unwrap();
        let t = 0.01;
        let s = StepIndex::new(2, 1);
        let table = table_at(&m.chain, &m.table, s, t);
        let p = LocalProblem::new(&table, s, &m.chain, t, &tol()).unwrap();
        let v = table.matrix_or_zero(Interval::new(2, 1), &m.chain);
        // give the two-edge interval a larger off-block potential
        let v = v + embed_matrix(m.table.get(Interval::new(1, 1)).unwrap().matrix(), Interval::new(1, 1), Interval::new(2, 1), 3);
        let terms = series_s_and_v(&p, &v, &m.chain, t, &tol()).unwrap();
        let u = total_generator(&terms, t).exp();
        let k = &p.g + v.scale(t);
        let conj = &u * k * u.adjoint();
        let target = &p.g + diagonal_sum(&terms, t).scale(t);
        assert!(max_abs(&(&conj - &target)) < 1e-12);
        assert!(weighted_off_block_norm(&conj, p.interval, &m.chain) < 1e-12);
    }
}
