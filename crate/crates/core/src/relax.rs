//! Relax-and-round dynamic mapping.
//!
//! The pipeline is:
//!
//! 1. keep only active carriers and the fewest PAs that can host them,
//! 2. replace each awake PA's input power by its quadratic expansion around
//!    the model midpoint and let the mapping variables take values in `[0, 1]`,
//! 3. find a stationary point of that surrogate over the transportation
//!    polytope with conditional gradient (linearize, jump towards the best
//!    vertex, repeat),
//! 4. round by repeatedly committing the largest remaining fractional entry,
//! 5. map back to the full problem and park inactive carriers on spare slots.
//!
//! For the reference parameter sets the second derivative at the midpoint is
//! negative, so the surrogate is concave and only a local optimum is
//! guaranteed. Several perturbed starts are tried and the best kept.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::assignment::transport_vertex;
use crate::error::{Error, Result};
use crate::power::{MidpointRule, PowerModelParams, QuadraticCoeffs};
use crate::problem::{canonical_sum, partition_active, static_mapping, ActivePartition, MappingInstance, MappingMatrix};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    /// Relative Frank-Wolfe gap at which a start is declared stationary.
    pub tol: f64,
    pub max_iters: usize,
    /// Number of starting points; the first is always the uniform point.
    pub restarts: usize,
    pub seed: u64,
    pub midpoint: MidpointRule,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_iters: 10_000,
            restarts: 5,
            seed: 0,
            midpoint: MidpointRule::Literal,
        }
    }
}

/// Active-only view of an instance.
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedProblem {
    pub powers_active: Vec<f64>,
    pub n_as: usize,
    pub capacity: usize,
    /// Reduced carrier index -> original carrier index.
    pub carrier_index_map: Vec<usize>,
    /// Reduced PA index -> original PA index.
    pub pa_index_map: Vec<usize>,
    pub surrogate: QuadraticCoeffs,
    pub params: PowerModelParams,
}

impl ReducedProblem {
    pub fn n_ac(&self) -> usize {
        self.powers_active.len()
    }

    /// Reorders carriers by descending power (original index breaks ties), so
    /// that the solver sees the same problem however the carriers were numbered.
    pub fn sorted_by_power(mut self) -> Self {
        let mut order: Vec<usize> = (0..self.n_ac()).collect();
        order.sort_by(|&a, &b| {
            self.powers_active[b]
                .total_cmp(&self.powers_active[a])
                .then(self.carrier_index_map[a].cmp(&self.carrier_index_map[b]))
        });
        self.powers_active = order.iter().map(|&i| self.powers_active[i]).collect();
        self.carrier_index_map = order.iter().map(|&i| self.carrier_index_map[i]).collect();
        self
    }

    /// Per-PA load of a fractional mapping.
    pub fn loads(&self, values: &[f64]) -> Vec<f64> {
        let m = self.n_as;
        let mut loads = vec![0.0; m];
        for (i, p) in self.powers_active.iter().enumerate() {
            for (j, load) in loads.iter_mut().enumerate() {
                *load += values[i * m + j] * p;
            }
        }
        loads
    }

    /// Gradient of [`surrogate_objective`] w.r.t. every entry.
    pub fn surrogate_gradient(&self, values: &[f64]) -> Vec<f64> {
        let slopes: Vec<f64> = self.loads(values).iter().map(|&l| self.surrogate.slope(l)).collect();
        self.powers_active
            .iter()
            .flat_map(|p| slopes.iter().map(move |s| p * s))
            .collect()
    }
}

pub fn build_reduced(
    instance: &MappingInstance,
    partition: &ActivePartition,
    params: &PowerModelParams,
    midpoint: MidpointRule,
) -> Result<ReducedProblem> {
    if partition.active_carriers.is_empty() {
        return Err(Error::Degenerate("no active carriers; every PA sleeps".into()));
    }
    if partition.n_as > instance.n_pa() {
        return Err(Error::NoFeasibleMapping(format!(
            "{} PAs needed, {} available",
            partition.n_as,
            instance.n_pa()
        )));
    }
    Ok(ReducedProblem {
        powers_active: partition.active_carriers.iter().map(|&i| instance.powers()[i]).collect(),
        n_as: partition.n_as,
        capacity: instance.capacity(),
        carrier_index_map: partition.active_carriers.clone(),
        pa_index_map: (0..partition.n_as).collect(),
        surrogate: params.taylor_coeffs_with(midpoint)?,
        params: *params,
    })
}

/// Quadratic surrogate of the awake PAs' input power, summed over PAs.
pub fn surrogate_objective(reduced: &ReducedProblem, values: &[f64]) -> f64 {
    reduced.loads(values).iter().map(|&l| reduced.surrogate.eval(l)).sum()
}

/// Real-valued point of the transportation polytope, row-major `n_ac x n_as`.
#[derive(Debug, Clone, PartialEq)]
pub struct RelaxedSolution {
    pub values: Vec<f64>,
    pub n_rows: usize,
    pub n_cols: usize,
    pub objective: f64,
    pub iterations: usize,
    pub converged: bool,
}

impl RelaxedSolution {
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n_cols + j]
    }

    /// Largest violation of the polytope constraints.
    pub fn max_violation(&self, capacity: usize) -> f64 {
        let (n, m) = (self.n_rows, self.n_cols);
        let mut worst = 0.0f64;
        for &v in &self.values {
            worst = worst.max(-v).max(v - 1.0);
        }
        for i in 0..n {
            let s: f64 = self.values[i * m..(i + 1) * m].iter().sum();
            worst = worst.max((s - 1.0).abs());
        }
        for j in 0..m {
            let s: f64 = (0..n).map(|i| self.values[i * m + j]).sum();
            worst = worst.max(s - capacity as f64);
        }
        worst
    }
}

/// Stationary point of the surrogate over
/// `{row sums = 1, column sums <= K, 0 <= x <= 1}`.
pub fn solve_relaxed(reduced: &ReducedProblem, options: &SolverOptions) -> Result<RelaxedSolution> {
    let (n, m, k) = (reduced.n_ac(), reduced.n_as, reduced.capacity);
    if m == 0 || n > m * k {
        return Err(Error::NoFeasibleMapping(format!(
            "{n} carriers cannot fit {m} PAs of capacity {k}"
        )));
    }
    let uniform = vec![1.0 / m as f64; n * m];
    let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
    let mut best: Option<RelaxedSolution> = None;
    for restart in 0..options.restarts.max(1) {
        let start = if restart == 0 {
            uniform.clone()
        } else {
            perturbed_start(&uniform, n, m, k, &mut rng)
        };
        let candidate = frank_wolfe(reduced, start, options);
        // Strict improvement only: the lowest restart index wins ties.
        if best.as_ref().is_none_or(|b| candidate.objective < b.objective) {
            best = Some(candidate);
        }
    }
    Ok(best.expect("at least one restart runs"))
}

/// Uniform point plus `U(-0.1, 0.1)` noise, rows renormalized, then pulled
/// back towards the uniform point until every column fits its capacity.
fn perturbed_start(uniform: &[f64], n: usize, m: usize, k: usize, rng: &mut impl Rng) -> Vec<f64> {
    let mut x: Vec<f64> = uniform.iter().map(|u| (u + rng.random_range(-0.1..0.1)).max(0.0)).collect();
    for row in x.chunks_mut(m) {
        let s: f64 = row.iter().sum();
        if s > 0.0 {
            row.iter_mut().for_each(|v| *v /= s);
        } else {
            row.fill(1.0 / m as f64);
        }
    }
    let u_col = n as f64 / m as f64;
    let mut lambda = 1.0f64;
    for j in 0..m {
        let col: f64 = (0..n).map(|i| x[i * m + j]).sum();
        if col > k as f64 {
            lambda = lambda.min((k as f64 - u_col) / (col - u_col));
        }
    }
    if lambda < 1.0 {
        for (v, u) in x.iter_mut().zip(uniform) {
            *v = lambda * *v + (1.0 - lambda) * u;
        }
    }
    x
}

fn frank_wolfe(reduced: &ReducedProblem, mut x: Vec<f64>, options: &SolverOptions) -> RelaxedSolution {
    let (n, m, k) = (reduced.n_ac(), reduced.n_as, reduced.capacity);
    let f2 = reduced.surrogate.f2;
    let mut vertex = vec![0.0; n * m];
    let mut iterations = 0;
    let mut converged = false;
    while iterations < options.max_iters {
        let grad = reduced.surrogate_gradient(&x);
        let cols = transport_vertex(&grad, n, m, k);
        vertex.fill(0.0);
        for (i, &j) in cols.iter().enumerate() {
            vertex[i * m + j] = 1.0;
        }
        let gap: f64 = grad.iter().zip(x.iter().zip(&vertex)).map(|(g, (a, b))| g * (a - b)).sum();
        let objective = surrogate_objective(reduced, &x);
        if gap <= options.tol * objective.abs().max(1.0) {
            converged = true;
            break;
        }
        // Exact line search on the quadratic along x + t (s - x).
        let delta: Vec<f64> = vertex.iter().zip(&x).map(|(s, v)| s - v).collect();
        let curvature = f2 * reduced.loads(&delta).iter().map(|d| d * d).sum::<f64>();
        let step = if curvature > 0.0 { (gap / curvature).min(1.0) } else { 1.0 };
        if step >= 1.0 {
            x.copy_from_slice(&vertex);
        } else {
            for (v, d) in x.iter_mut().zip(&delta) {
                *v += step * d;
            }
        }
        iterations += 1;
    }
    RelaxedSolution {
        objective: surrogate_objective(reduced, &x),
        values: x,
        n_rows: n,
        n_cols: m,
        iterations,
        converged,
    }
}

/// Sorting-based rounding of a relaxed solution into a reduced mapping.
///
/// Repeatedly takes the largest remaining entry among uncommitted carriers
/// (lowest carrier, then lowest PA on ties). The carrier is committed to that
/// PA if it has room, otherwise the entry is zeroed. Carriers left with only
/// zero entries are inserted greedily where the true input power grows least.
pub fn round_by_sorting(reduced: &ReducedProblem, relaxed: &RelaxedSolution) -> MappingMatrix {
    let (n, m, k) = (relaxed.n_rows, relaxed.n_cols, reduced.capacity);
    let mut values = relaxed.values.clone();
    let mut committed: Vec<Option<usize>> = vec![None; n];
    let mut counts = vec![0usize; m];
    loop {
        let mut pick: Option<(usize, usize, f64)> = None;
        for i in (0..n).filter(|&i| committed[i].is_none()) {
            for j in 0..m {
                let v = values[i * m + j];
                if v > 0.0 && pick.is_none_or(|(_, _, best)| v > best) {
                    pick = Some((i, j, v));
                }
            }
        }
        let Some((i, j, _)) = pick else { break };
        if counts[j] < k {
            committed[i] = Some(j);
            counts[j] += 1;
        } else {
            values[i * m + j] = 0.0;
        }
    }

    let powers = &reduced.powers_active;
    let mut loads = vec![0.0; m];
    for (i, c) in committed.iter().enumerate() {
        if let Some(j) = c {
            loads[*j] += powers[i];
        }
    }
    for i in 0..n {
        if committed[i].is_some() {
            continue;
        }
        let j = cheapest_insertion(&reduced.params, &loads, &counts, k, powers[i], None)
            .or_else(|| least_loaded_with_room(&loads, &counts, k))
            .expect("n_ac <= n_as * K leaves room for every carrier");
        committed[i] = Some(j);
        counts[j] += 1;
        loads[j] += powers[i];
    }

    let assignment: Vec<usize> = committed.into_iter().map(|c| c.expect("all committed")).collect();
    MappingMatrix::from_assignment(&assignment, m).expect("indices in range")
}

/// PA with spare capacity whose input power grows least when `p` is added,
/// keeping the load within `p_max`. Lowest index wins ties.
fn cheapest_insertion(
    params: &PowerModelParams,
    loads: &[f64],
    counts: &[usize],
    capacity: usize,
    p: f64,
    exclude: Option<usize>,
) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (j, (&load, &count)) in loads.iter().zip(counts).enumerate() {
        if Some(j) == exclude || count >= capacity || load + p > params.p_max {
            continue;
        }
        let increase = params.input_power_unchecked(load + p) - params.input_power_unchecked(load);
        if best.is_none_or(|(_, b)| increase < b) {
            best = Some((j, increase));
        }
    }
    best.map(|(j, _)| j)
}

fn least_loaded_with_room(loads: &[f64], counts: &[usize], capacity: usize) -> Option<usize> {
    (0..loads.len())
        .filter(|&j| counts[j] < capacity)
        .min_by(|&a, &b| loads[a].total_cmp(&loads[b]).then(a.cmp(&b)))
}

/// Full relax-and-round pipeline for one slot.
pub fn dynamic_map(
    instance: &MappingInstance,
    params: &PowerModelParams,
    options: &SolverOptions,
) -> Result<MappingMatrix> {
    let partition = partition_active(instance);
    if partition.active_carriers.is_empty() {
        return Ok(static_mapping(instance));
    }
    let reduced = build_reduced(instance, &partition, params, options.midpoint)?.sorted_by_power();
    let relaxed = solve_relaxed(&reduced, options)?;
    let rounded = round_by_sorting(&reduced, &relaxed);

    let (n_pa, k) = (instance.n_pa(), instance.capacity());
    let mut assignment: Vec<Option<usize>> = vec![None; instance.n_carriers()];
    let reduced_cols = rounded.assignment().expect("rounding yields one PA per carrier");
    for (r, &j) in reduced_cols.iter().enumerate() {
        assignment[reduced.carrier_index_map[r]] = Some(reduced.pa_index_map[j]);
    }

    repair_overload(instance, params, &mut assignment)?;

    // Inactive carriers draw no power, so any spare slot will do.
    let mut counts = vec![0usize; n_pa];
    for j in assignment.iter().flatten() {
        counts[*j] += 1;
    }
    let mut cursor = 0;
    for &i in &partition.inactive_carriers {
        while counts[cursor % n_pa] >= k {
            cursor += 1;
        }
        let j = cursor % n_pa;
        assignment[i] = Some(j);
        counts[j] += 1;
        cursor += 1;
    }

    let assignment: Vec<usize> = assignment.into_iter().map(|a| a.expect("every carrier placed")).collect();
    MappingMatrix::from_assignment(&assignment, n_pa)
}

/// Clears PA overloads left by rounding.
///
/// The smallest carrier on an overloaded PA moves to the PA where it raises
/// the input power least. When no PA has room for it, the cheapest swap with
/// a lighter carrier elsewhere is made instead.
fn repair_overload(
    instance: &MappingInstance,
    params: &PowerModelParams,
    assignment: &mut [Option<usize>],
) -> Result<()> {
    let (n_pa, k) = (instance.n_pa(), instance.capacity());
    let powers = instance.powers();
    let f = |load: f64| params.input_power_unchecked(load);
    // Every step strictly lowers the overloaded PA's load while keeping the
    // others within p_max, so the loop terminates well before this bound.
    let bound = (assignment.len() + 1).pow(2) * n_pa;
    for _ in 0..bound {
        let members: Vec<Vec<usize>> = (0..n_pa)
            .map(|j| (0..assignment.len()).filter(|&i| assignment[i] == Some(j)).collect())
            .collect();
        let loads: Vec<f64> = members
            .iter()
            .map(|on| canonical_sum(&mut on.iter().map(|&i| powers[i]).collect::<Vec<_>>()))
            .collect();
        let counts: Vec<usize> = members.iter().map(Vec::len).collect();
        let Some(src) = (0..n_pa).find(|&j| loads[j] > params.p_max) else {
            return Ok(());
        };
        let smallest = *members[src]
            .iter()
            .min_by(|&&a, &&b| powers[a].total_cmp(&powers[b]).then(a.cmp(&b)))
            .expect("overloaded PA has carriers");
        if let Some(dst) = cheapest_insertion(params, &loads, &counts, k, powers[smallest], Some(src)) {
            assignment[smallest] = Some(dst);
            continue;
        }

        // (still overloaded, cost) ordered, lowest indices on ties.
        let mut best: Option<((bool, f64), usize, usize, usize)> = None;
        for &a in &members[src] {
            for (dst, on) in members.iter().enumerate().filter(|(j, _)| *j != src) {
                for &b in on {
                    if powers[b] >= powers[a] {
                        continue;
                    }
                    let dst_new = loads[dst] - powers[b] + powers[a];
                    let src_new = loads[src] - powers[a] + powers[b];
                    if dst_new > params.p_max {
                        continue;
                    }
                    let over = src_new > params.p_max;
                    let cost = f(dst_new) - f(loads[dst]) + if over { 0.0 } else { f(src_new) };
                    let score = (over, cost);
                    // Prefer swaps that clear the overload, then the cheapest.
                    if best.is_none_or(|(s, ..)| (score.0, score.1) < (s.0, s.1)) {
                        best = Some((score, a, b, dst));
                    }
                }
            }
        }
        let Some((_, a, b, dst)) = best else {
            return Err(Error::PaOverload {
                pa: src,
                load: loads[src],
                p_max: params.p_max,
            });
        };
        assignment[a] = Some(dst);
        assignment[b] = Some(src);
    }
    Err(Error::InfeasibleMapping("overload repair did not terminate".into()))
}
