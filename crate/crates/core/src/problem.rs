//! One slot's carrier-to-MCPA mapping problem.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::power::PowerModelParams;

/// Per-carrier output powers for one slot, plus the amplifier bank geometry.
#[derive(Debug, Clone, PartialEq)]
pub struct MappingInstance {
    powers: Vec<f64>,
    n_pa: usize,
    capacity: usize,
}

impl MappingInstance {
    pub fn new(powers: Vec<f64>, n_pa: usize, capacity: usize) -> Result<Self> {
        if n_pa == 0 || capacity == 0 {
            return Err(Error::InvalidInstance(format!(
                "need n_pa >= 1 and capacity >= 1, got n_pa={n_pa} k={capacity}"
            )));
        }
        if let Some((i, p)) = powers.iter().enumerate().find(|(_, p)| !(p.is_finite() && **p >= 0.0)) {
            return Err(Error::InvalidInstance(format!("carrier {i} has invalid power {p}")));
        }
        if powers.len() > n_pa * capacity {
            return Err(Error::NoFeasibleMapping(format!(
                "{} carriers exceed {n_pa} PAs x {capacity} slots",
                powers.len()
            )));
        }
        Ok(Self {
            powers,
            n_pa,
            capacity,
        })
    }

    pub fn powers(&self) -> &[f64] {
        &self.powers
    }

    pub fn n_carriers(&self) -> usize {
        self.powers.len()
    }

    pub fn n_pa(&self) -> usize {
        self.n_pa
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }
}

/// One-line record: `n_pa=<int> k=<int> powers=<w1,w2,...>`.
impl fmt::Display for MappingInstance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "n_pa={} k={} powers=", self.n_pa, self.capacity)?;
        for (i, p) in self.powers.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{p}")?;
        }
        Ok(())
    }
}

impl FromStr for MappingInstance {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = |msg: String| Error::InvalidInstance(msg);
        let (mut n_pa, mut k, mut powers) = (None, None, None);
        for token in s.split_whitespace() {
            let (key, value) = token
                .split_once('=')
                .ok_or_else(|| bad(format!("expected key=value, got `{token}`")))?;
            match key {
                "n_pa" => n_pa = Some(value.parse::<usize>().map_err(|e| bad(format!("n_pa: {e}")))?),
                "k" => k = Some(value.parse::<usize>().map_err(|e| bad(format!("k: {e}")))?),
                "powers" => {
                    let parsed = if value.is_empty() {
                        Vec::new()
                    } else {
                        value
                            .split(',')
                            .map(|w| w.trim().parse::<f64>().map_err(|e| bad(format!("power `{w}`: {e}"))))
                            .collect::<Result<Vec<_>>>()?
                    };
                    powers = Some(parsed);
                }
                other => return Err(bad(format!("unknown key `{other}`"))),
            }
        }
        MappingInstance::new(
            powers.ok_or_else(|| bad("missing powers=".into()))?,
            n_pa.ok_or_else(|| bad("missing n_pa=".into()))?,
            k.ok_or_else(|| bad("missing k=".into()))?,
        )
    }
}

/// Binary carrier-by-PA incidence table.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct MappingMatrix {
    n_carriers: usize,
    n_pa: usize,
    cells: Vec<bool>,
}

impl MappingMatrix {
    pub fn zeros(n_carriers: usize, n_pa: usize) -> Self {
        Self {
            n_carriers,
            n_pa,
            cells: vec![false; n_carriers * n_pa],
        }
    }

    /// Builds the table from a 0-based PA index per carrier.
    pub fn from_assignment(assignment: &[usize], n_pa: usize) -> Result<Self> {
        let mut m = Self::zeros(assignment.len(), n_pa);
        for (i, &j) in assignment.iter().enumerate() {
            if j >= n_pa {
                return Err(Error::DimensionMismatch {
                    expected: format!("PA index < {n_pa}"),
                    actual: format!("carrier {i} -> PA {j}"),
                });
            }
            m.set(i, j, true);
        }
        Ok(m)
    }

    pub fn n_carriers(&self) -> usize {
        self.n_carriers
    }

    pub fn n_pa(&self) -> usize {
        self.n_pa
    }

    #[inline]
    pub fn get(&self, carrier: usize, pa: usize) -> bool {
        self.cells[carrier * self.n_pa + pa]
    }

    #[inline]
    pub fn set(&mut self, carrier: usize, pa: usize, on: bool) {
        self.cells[carrier * self.n_pa + pa] = on;
    }

    pub fn row(&self, carrier: usize) -> &[bool] {
        &self.cells[carrier * self.n_pa..(carrier + 1) * self.n_pa]
    }

    /// 0-based PA per carrier, or `None` if some row does not hold exactly one 1.
    pub fn assignment(&self) -> Option<Vec<usize>> {
        (0..self.n_carriers)
            .map(|i| {
                let mut hits = self.row(i).iter().enumerate().filter(|(_, &c)| c);
                match (hits.next(), hits.next()) {
                    (Some((j, _)), None) => Some(j),
                    _ => None,
                }
            })
            .collect()
    }

    pub fn column_count(&self, pa: usize) -> usize {
        (0..self.n_carriers).filter(|&i| self.get(i, pa)).count()
    }

    /// Output power delivered by each PA.
    ///
    /// Each load is summed in ascending carrier-power order so that the value
    /// does not depend on how carriers or PAs are numbered.
    pub fn loads(&self, powers: &[f64]) -> Vec<f64> {
        let mut scratch = Vec::with_capacity(self.n_carriers);
        (0..self.n_pa)
            .map(|j| {
                scratch.clear();
                scratch.extend((0..self.n_carriers).filter(|&i| self.get(i, j)).map(|i| powers[i]));
                canonical_sum(&mut scratch)
            })
            .collect()
    }
}

/// Sum of `values` in ascending order. Reorders `values`.
pub(crate) fn canonical_sum(values: &mut [f64]) -> f64 {
    values.sort_unstable_by(f64::total_cmp);
    values.iter().sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Violation {
    /// A carrier is not served by exactly one PA.
    RowSum { carrier: usize, count: usize },
    /// A PA serves more than `capacity` carriers.
    ColumnSum { pa: usize, count: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct FeasibilityReport {
    pub violations: Vec<Violation>,
}

impl FeasibilityReport {
    pub fn is_feasible(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for FeasibilityReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.violations.is_empty() {
            return f.write_str("feasible");
        }
        for (n, v) in self.violations.iter().enumerate() {
            if n > 0 {
                f.write_str("; ")?;
            }
            match v {
                Violation::RowSum { carrier, count } => {
                    write!(f, "carrier {carrier} served by {count} PAs")?
                }
                Violation::ColumnSum { pa, count } => write!(f, "PA {pa} serves {count} carriers")?,
            }
        }
        Ok(())
    }
}

/// Checks the binary, capacity and single-server constraints.
pub fn is_feasible(instance: &MappingInstance, mapping: &MappingMatrix) -> Result<FeasibilityReport> {
    if mapping.n_carriers() != instance.n_carriers() || mapping.n_pa() != instance.n_pa() {
        return Err(Error::DimensionMismatch {
            expected: format!("{}x{}", instance.n_carriers(), instance.n_pa()),
            actual: format!("{}x{}", mapping.n_carriers(), mapping.n_pa()),
        });
    }
    let mut report = FeasibilityReport::default();
    for i in 0..mapping.n_carriers() {
        let count = mapping.row(i).iter().filter(|&&c| c).count();
        if count != 1 {
            report.violations.push(Violation::RowSum { carrier: i, count });
        }
    }
    for j in 0..mapping.n_pa() {
        let count = mapping.column_count(j);
        if count > instance.capacity() {
            report.violations.push(Violation::ColumnSum { pa: j, count });
        }
    }
    Ok(report)
}

/// Total input power over all PAs, sleeping ones included.
pub fn total_input_power(
    instance: &MappingInstance,
    mapping: &MappingMatrix,
    params: &PowerModelParams,
) -> Result<f64> {
    let report = is_feasible(instance, mapping)?;
    if !report.is_feasible() {
        return Err(Error::InfeasibleMapping(report.to_string()));
    }
    cost_of_loads(&mapping.loads(instance.powers()), params)
}

/// Sum of per-PA input powers, independent of PA order.
pub(crate) fn cost_of_loads(loads: &[f64], params: &PowerModelParams) -> Result<f64> {
    let mut per_pa = Vec::with_capacity(loads.len());
    for (pa, &load) in loads.iter().enumerate() {
        if load > params.p_max {
            return Err(Error::PaOverload {
                pa,
                load,
                p_max: params.p_max,
            });
        }
        per_pa.push(params.input_power_unchecked(load));
    }
    Ok(canonical_sum(&mut per_pa))
}

/// Split of carriers by activity and the number of PAs that must stay awake.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ActivePartition {
    pub active_carriers: Vec<usize>,
    pub inactive_carriers: Vec<usize>,
    pub n_as: usize,
}

impl ActivePartition {
    pub fn n_ac(&self) -> usize {
        self.active_carriers.len()
    }
}

/// A carrier is active iff its power is strictly positive. The number of
/// awake PAs is the fewest that can host every active carrier.
pub fn partition_active(instance: &MappingInstance) -> ActivePartition {
    let (active_carriers, inactive_carriers): (Vec<usize>, Vec<usize>) =
        (0..instance.n_carriers()).partition(|&i| instance.powers()[i] > 0.0);
    let n_as = active_carriers.len().div_ceil(instance.capacity());
    ActivePartition {
        active_carriers,
        inactive_carriers,
        n_as,
    }
}

/// Fixed block assignment: carrier `i` (0-based) goes to PA `i / K`.
pub fn static_mapping(instance: &MappingInstance) -> MappingMatrix {
    let k = instance.capacity();
    let assignment: Vec<usize> = (0..instance.n_carriers()).map(|i| i / k).collect();
    MappingMatrix::from_assignment(&assignment, instance.n_pa())
        .expect("block assignment fits because n_c <= n_pa * k")
}
