//! Exhaustive search over every feasible mapping.

use crate::error::{Error, Result};
use crate::power::PowerModelParams;
use crate::problem::{canonical_sum, MappingInstance, MappingMatrix};

/// Largest raw search space (`n_pa ^ n_c`) accepted without symmetry pruning.
pub const RAW_SPACE_LIMIT: f64 = 1e8;

#[derive(Debug, Clone, PartialEq)]
pub struct OracleResult {
    pub best_mapping: MappingMatrix,
    pub best_cost: f64,
    pub mappings_examined: u64,
}

/// Globally cheapest mapping with every load within `p_max`.
///
/// Carriers are placed in index order by depth-first search, trying PAs in
/// ascending order and abandoning branches that exceed a PA's capacity or
/// `p_max`. Among equally cheap mappings the lexicographically smallest
/// assignment vector is returned.
///
/// With `prune_symmetry`, a carrier may only open the lowest-numbered unused
/// PA. Since the PAs are identical this visits one representative per class
/// of PA relabelings, and that representative is the lexicographically
/// smallest member of its class.
pub fn exhaustive_search(
    instance: &MappingInstance,
    params: &PowerModelParams,
    prune_symmetry: bool,
) -> Result<OracleResult> {
    let (n_c, n_pa, k) = (instance.n_carriers(), instance.n_pa(), instance.capacity());
    if n_c > n_pa * k {
        return Err(Error::NoFeasibleMapping(format!(
            "{n_c} carriers exceed {n_pa} PAs x {k} slots"
        )));
    }
    let space = (n_pa as f64).powi(n_c as i32);
    if !prune_symmetry && space > RAW_SPACE_LIMIT {
        return Err(Error::ResourceLimit {
            space,
            limit: RAW_SPACE_LIMIT,
        });
    }

    let mut search = Search {
        powers: instance.powers(),
        params,
        n_pa,
        capacity: k,
        prune_symmetry,
        assignment: vec![0; n_c],
        members: vec![Vec::with_capacity(k); n_pa],
        loads: vec![0.0; n_pa],
        best: None,
        examined: 0,
        scratch: Vec::with_capacity(k),
        per_pa: Vec::with_capacity(n_pa),
    };
    search.descend(0, 0);

    let (best_cost, assignment) = search.best.ok_or_else(|| {
        Error::NoFeasibleMapping("every mapping overloads some PA beyond p_max".into())
    })?;
    Ok(OracleResult {
        best_mapping: MappingMatrix::from_assignment(&assignment, n_pa)?,
        best_cost,
        mappings_examined: search.examined,
    })
}

struct Search<'a> {
    powers: &'a [f64],
    params: &'a PowerModelParams,
    n_pa: usize,
    capacity: usize,
    prune_symmetry: bool,
    assignment: Vec<usize>,
    members: Vec<Vec<f64>>,
    loads: Vec<f64>,
    best: Option<(f64, Vec<usize>)>,
    examined: u64,
    scratch: Vec<f64>,
    per_pa: Vec<f64>,
}

impl Search<'_> {
    fn descend(&mut self, carrier: usize, used: usize) {
        if carrier == self.powers.len() {
            self.evaluate_leaf();
            return;
        }
        let p = self.powers[carrier];
        let limit = if self.prune_symmetry {
            (used + 1).min(self.n_pa)
        } else {
            self.n_pa
        };
        for j in 0..limit {
            if self.members[j].len() >= self.capacity || self.loads[j] + p > self.params.p_max {
                continue;
            }
            self.assignment[carrier] = j;
            self.members[j].push(p);
            self.loads[j] += p;
            self.descend(carrier + 1, used.max(j + 1));
            self.loads[j] -= p;
            self.members[j].pop();
            // Undo exactly: an empty PA goes back to a load of 0.
            if self.members[j].is_empty() {
                self.loads[j] = 0.0;
            }
        }
    }

    fn evaluate_leaf(&mut self) {
        self.examined += 1;
        self.per_pa.clear();
        for on in &self.members {
            self.scratch.clear();
            self.scratch.extend_from_slice(on);
            let load = canonical_sum(&mut self.scratch);
            self.per_pa.push(self.params.input_power_unchecked(load));
        }
        let cost = canonical_sum(&mut self.per_pa);
        if self.best.as_ref().is_none_or(|(b, _)| cost < *b) {
            self.best = Some((cost, self.assignment.clone()));
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::total_input_power;

    fn exp1() -> PowerModelParams {
        PowerModelParams::preset("exp1").unwrap()
    }

    #[test]
    fn motivating_example() {
        let inst = MappingInstance::new(vec![20.0, 0.0, 20.0, 0.0], 2, 2).unwrap();
        for prune in [false, true] {
            let r = exhaustive_search(&inst, &exp1(), prune).unwrap();
            assert!((r.best_cost - 108.1).abs() < 0.1, "{}", r.best_cost);
            let a = r.best_mapping.assignment().unwrap();
            assert_eq!(a, vec![0, 1, 0, 1]);
            assert_eq!(r.best_cost, total_input_power(&inst, &r.best_mapping, &exp1()).unwrap());
        }
    }

    #[test]
    fn single_carrier_single_pa() {
        let inst = MappingInstance::new(vec![12.0], 1, 1).unwrap();
        let r = exhaustive_search(&inst, &exp1(), false).unwrap();
        assert_eq!(r.best_cost, exp1().input_power(12.0).unwrap());
        assert_eq!(r.mappings_examined, 1);
    }

    #[test]
    fn pruning_examines_fewer_mappings() {
        let inst = MappingInstance::new(vec![3.0, 8.0, 12.0, 1.0, 19.0, 7.0], 3, 2).unwrap();
        let raw = exhaustive_search(&inst, &exp1(), false).unwrap();
        let pruned = exhaustive_search(&inst, &exp1(), true).unwrap();
        assert_eq!(raw.best_cost, pruned.best_cost);
        assert_eq!(raw.best_mapping, pruned.best_mapping);
        // 90 ordered pairings versus 15 unordered ones.
        assert_eq!(raw.mappings_examined, 90);
        assert_eq!(pruned.mappings_examined, 15);
    }

    #[test]
    fn resource_guard() {
        let inst = MappingInstance::new(vec![1.0; 14], 4, 4).unwrap();
        assert!(matches!(
            exhaustive_search(&inst, &exp1(), false),
            Err(Error::ResourceLimit { .. })
        ));
    }

    #[test]
    fn every_mapping_overloaded() {
        let inst = MappingInstance::new(vec![30.0, 30.0, 30.0], 1, 3).unwrap();
        assert!(matches!(
            exhaustive_search(&inst, &exp1(), true),
            Err(Error::NoFeasibleMapping(_))
        ));
    }

    #[test]
    fn avoids_overloaded_mappings() {
        // Merging 30 and 25 would be cheapest per the concave model but exceeds p_max.
        let inst = MappingInstance::new(vec![30.0, 25.0], 2, 2).unwrap();
        let r = exhaustive_search(&inst, &exp1(), false).unwrap();
        assert_eq!(r.best_mapping.assignment().unwrap(), vec![0, 1]);
    }
}
