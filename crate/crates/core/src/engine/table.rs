use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::lattice::{Interval, StepIndex};
use crate::linalg::Mat;
use crate::operator::{ChainSpec, LocalOperator};

/// Effective potentials `V^{(k,q)}_I` at one step of the flow. Only intervals
/// with at least one edge are stored; the length-zero entries are the on-site
/// Hamiltonians and are read off the chain. Absent entries are zero.
#[derive(Debug, Clone, PartialEq)]
pub struct PotentialTable {
    step: StepIndex,
    entries: BTreeMap<Interval, LocalOperator>,
}

impl PotentialTable {
    /// Nearest-neighbor potentials at the initial label `(0, N)`.
    pub fn initial(chain: &ChainSpec, potentials: Vec<LocalOperator>) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for op in potentials {
            let iv = chain.check(op.support())?;
            if iv.edges == 0 {
                return Err(Error::InvalidModel(format!(
                    "on-site terms belong to the chain, not the potential table ({iv})"
                )));
            }
            if !op.is_hermitian() {
                return Err(Error::InvalidModel(format!("potential on {iv} is not Hermitian")));
            }
            if entries.insert(iv, op).is_some() {
                return Err(Error::InvalidModel(format!("duplicate potential on {iv}")));
            }
        }
        Ok(PotentialTable {
            step: StepIndex::initial(chain.sites()),
            entries,
        })
    }

    pub(crate) fn with_entries(step: StepIndex, entries: BTreeMap<Interval, LocalOperator>) -> Self {
        PotentialTable { step, entries }
    }

    pub fn step(&self) -> StepIndex {
        self.step
    }

    pub fn get(&self, iv: Interval) -> Option<&LocalOperator> {
        self.entries.get(&iv)
    }

    pub fn entries(&self) -> impl Iterator<Item = (&Interval, &LocalOperator)> {
        self.entries.iter()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn matrix_or_zero(&self, iv: Interval, chain: &ChainSpec) -> Mat {
        match self.entries.get(&iv) {
            Some(op) => op.matrix().clone(),
            None => {
                let n = chain.dim_of(iv);
                Mat::zeros(n, n)
            }
        }
    }
}
