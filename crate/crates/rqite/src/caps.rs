//! Resource caps shared by every module. All of them can be overridden from
//! a key-value config file (see [`Caps::apply_overrides`]).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Caps {
    /// Largest register handled by the dense oracle.
    pub oracle_qubits: usize,
    /// Largest register handled by sparse moment propagation (at most 64).
    pub sparse_qubits: usize,
    /// Largest sparse vector kept between Hamiltonian applications.
    pub sparse_entries: usize,
    /// Largest number of clusters returned by one enumeration.
    pub clusters: usize,
    /// Largest term count produced by circuit conjugation.
    pub circuit_terms: usize,
    /// Largest number of (x_j, x_k) component pairs in a partition estimate.
    pub pairs: usize,
    /// Largest truncation order used by the cluster backend.
    pub truncation_order: usize,
    /// Largest continuation order considered feasible.
    pub continuation_order: usize,
    /// Largest Monte-Carlo sample count.
    pub samples: usize,
}

impl Default for Caps {
    fn default() -> Self {
        Caps {
            oracle_qubits: 14,
            sparse_qubits: 24,
            sparse_entries: 1 << 20,
            clusters: 5_000_000,
            circuit_terms: 100_000,
            pairs: 4096,
            truncation_order: 400,
            continuation_order: 1_000_000,
            samples: 50_000_000,
        }
    }
}

impl Caps {
    pub const KEYS: [&'static str; 9] = [
        "oracle_qubits",
        "sparse_qubits",
        "sparse_entries",
        "clusters",
        "circuit_terms",
        "pairs",
        "truncation_order",
        "continuation_order",
        "samples",
    ];

    fn slot(&mut self, key: &str) -> Option<&mut usize> {
        Some(match key {
            "oracle_qubits" => &mut self.oracle_qubits,
            "sparse_qubits" => &mut self.sparse_qubits,
            "sparse_entries" => &mut self.sparse_entries,
            "clusters" => &mut self.clusters,
            "circuit_terms" => &mut self.circuit_terms,
            "pairs" => &mut self.pairs,
            "truncation_order" => &mut self.truncation_order,
            "continuation_order" => &mut self.continuation_order,
            "samples" => &mut self.samples,
            _ => return None,
        })
    }

    /// Applies `caps.<name> = value` entries. Unknown cap names are errors;
    /// every accepted override is logged as a warning.
    pub fn apply_overrides<'a>(
        &mut self,
        entries: impl IntoIterator<Item = (&'a str, &'a str)>,
    ) -> Result<()> {
        for (key, value) in entries {
            let Some(name) = key.strip_prefix("caps.") else {
                continue;
            };
            let parsed: usize = value
                .parse()
                .map_err(|_| Error::InvalidInput(format!("cap {name}: not a count: {value}")))?;
            let slot = self
                .slot(name)
                .ok_or_else(|| Error::InvalidInput(format!("unknown cap {name}")))?;
            log::warn!("cap override: {name} = {parsed} (default {slot})");
            *slot = parsed;
        }
        if self.sparse_qubits > 64 {
            return Err(Error::InvalidInput("sparse_qubits cannot exceed 64".into()));
        }
        Ok(())
    }
}

pub(crate) fn check_cap(what: &'static str, limit: usize, actual: usize) -> Result<()> {
    if actual > limit {
        Err(Error::CapExceeded {
            what,
            limit,
            actual,
        })
    } else {
        Ok(())
    }
}
