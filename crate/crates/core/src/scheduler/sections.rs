//! Section times for general (non-circular, heterogeneous) trajectories.
//!
//! Each trajectory is cut into sections by its link positions. A section
//! time `tau_v(j, l)` is the time agent `v` needs to travel from its link with
//! `j` to its link with `l` in its travel direction. Around any cycle
//! `v_1 .. v_k` the schedule closes iff
//! `sum_i tau_{v_i}(v_{i+1}, v_{i-1})` is an integer multiple `z T` with
//! `0 < z < k`; the complementary sum is then `(k - z) T`.

use std::collections::BTreeMap;
use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use super::{Direction, ScheduleError};
use crate::commgraph::{CycleBasis, LinkKind, Side};
use crate::lp::{feasible_point, project, Row};
use crate::scalar::wrap;
use crate::Graph64;

const EPS_MAX: f64 = 10.0;
const BISECTION_STEPS: usize = 48;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySections {
    pub direction: Direction,
    /// Neighbors whose links delimit the sections, in travel order. Section
    /// `k` runs from the link with `links[k]` to the link with `links[k+1]`
    /// (cyclically). A trajectory without links has one section.
    pub links: Vec<usize>,
    /// Arc-length locations of the links, parallel to `links`.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub link_positions: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub length: Option<f64>,
    /// Section times, parallel to `links` (one entry when there are none).
    pub times: Vec<f64>,
}

impl TrajectorySections {
    fn index_of(&self, u: usize) -> Option<usize> {
        self.links.iter().position(|&x| x == u)
    }

    /// Travel time from the link with `from` to the link with `to`; a full
    /// period when both are the same link.
    pub fn tau(&self, from: usize, to: usize) -> Option<f64> {
        let i = self.index_of(from)?;
        let j = self.index_of(to)?;
        let m = self.links.len();
        let steps = if i == j { m } else { (j + m - i) % m };
        Some((0..steps).map(|s| self.times[(i + s) % m]).sum())
    }

    /// Phase (time since the first link) at which the link with `u` is reached.
    pub fn phase_of_link(&self, u: usize) -> Option<f64> {
        let k = self.index_of(u)?;
        Some(self.times[..k].iter().sum())
    }

    pub fn period(&self) -> f64 {
        self.times.iter().sum()
    }

    /// Lengths of the sections, if the geometry is known.
    pub fn section_lengths(&self) -> Option<Vec<f64>> {
        let l = self.length?;
        let m = self.links.len();
        if m <= 1 {
            return Some(vec![l]);
        }
        if self.link_positions.len() != m {
            return None;
        }
        let sign = self.direction.sign();
        Some(
            (0..m)
                .map(|k| {
                    let d = sign * (self.link_positions[(k + 1) % m] - self.link_positions[k]);
                    wrap(d, l)
                })
                .collect(),
        )
    }

    fn origin(&self) -> f64 {
        self.link_positions.first().copied().unwrap_or(0.0)
    }

    /// Arc length reached at phase `q` (time since the first link, or since
    /// arc length 0 for a trajectory without links).
    pub fn position_at_phase(&self, q: f64) -> Option<f64> {
        let l = self.length?;
        let lens = self.section_lengths()?;
        let period = self.period();
        let mut q = wrap(q, period);
        let sign = self.direction.sign();
        let mut s = self.origin();
        for (k, &t) in self.times.iter().enumerate() {
            if q < t || k + 1 == self.times.len() {
                return Some(wrap(s + sign * lens[k] * (q / t).min(1.0), l));
            }
            q -= t;
            s += sign * lens[k];
        }
        None
    }

    /// Inverse of [`Self::position_at_phase`].
    pub fn phase_of_position(&self, s: f64) -> Option<f64> {
        let l = self.length?;
        let lens = self.section_lengths()?;
        let sign = self.direction.sign();
        let along = wrap(sign * (s - self.origin()), l);
        let mut acc_len = 0.0;
        let mut acc_time = 0.0;
        for (k, &t) in self.times.iter().enumerate() {
            if along < acc_len + lens[k] || k + 1 == self.times.len() {
                let frac = ((along - acc_len) / lens[k]).clamp(0.0, 1.0);
                return Some(acc_time + frac * t);
            }
            acc_len += lens[k];
            acc_time += t;
        }
        None
    }

    /// Mean speed over the tour, `length / T`.
    pub fn mean_speed(&self) -> Option<f64> {
        Some(self.length? / self.period())
    }
}

/// Closure report for one cycle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CycleCheck {
    pub cycle: Vec<usize>,
    pub z: u32,
    /// `sum tau_v(next, prev)`, equal to `z T`.
    pub sum: f64,
    /// `sum tau_v(prev, next)`, equal to `(k - z) T`.
    pub complement: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SectionPlan {
    pub period: f64,
    pub trajectories: Vec<TrajectorySections>,
    #[serde(default)]
    pub cycles: Vec<CycleCheck>,
    /// Largest relative deviation of a section speed from its trajectory's
    /// mean speed.
    #[serde(default)]
    pub max_speed_deviation: f64,
}

impl SectionPlan {
    /// Build a plan from a table of section times given as fractions of the
    /// period: `(trajectory, from_neighbor, to_neighbor, fraction)`. Each
    /// trajectory's entries must chain into a single loop over its links.
    pub fn from_table(
        period: f64,
        directions: &[Direction],
        entries: &[(usize, usize, usize, f64)],
    ) -> Result<Self, ScheduleError> {
        let n = directions.len();
        let mut succ: Vec<BTreeMap<usize, (usize, f64)>> = vec![BTreeMap::new(); n];
        for &(v, from, to, frac) in entries {
            if v >= n {
                return Err(ScheduleError::InvalidPlan(format!(
                    "trajectory {v} out of range"
                )));
            }
            if succ[v].insert(from, (to, frac * period)).is_some() {
                return Err(ScheduleError::InvalidPlan(format!(
                    "trajectory {v} has two sections leaving link {from}"
                )));
            }
        }
        let mut trajectories = Vec::with_capacity(n);
        for (v, map) in succ.iter().enumerate() {
            let mut links = Vec::new();
            let mut times = Vec::new();
            if let Some((&first, _)) = map.iter().next() {
                let mut cur = first;
                loop {
                    let &(next, t) = map.get(&cur).ok_or_else(|| {
                        ScheduleError::InvalidPlan(format!(
                            "trajectory {v}: no section leaves {cur}"
                        ))
                    })?;
                    links.push(cur);
                    times.push(t);
                    cur = next;
                    if cur == first || links.len() > map.len() {
                        break;
                    }
                }
                if cur != first || links.len() != map.len() {
                    return Err(ScheduleError::InvalidPlan(format!(
                        "trajectory {v}: sections do not form a single loop"
                    )));
                }
            } else {
                times.push(period);
            }
            trajectories.push(TrajectorySections {
                direction: directions[v],
                links,
                link_positions: Vec::new(),
                length: None,
                times,
            });
        }
        Ok(Self {
            period,
            trajectories,
            cycles: Vec::new(),
            max_speed_deviation: 0.0,
        })
    }

    pub fn phase_of_link(&self, v: usize, u: usize) -> Option<f64> {
        self.trajectories.get(v)?.phase_of_link(u)
    }

    pub fn tau(&self, v: usize, from: usize, to: usize) -> Option<f64> {
        self.trajectories.get(v)?.tau(from, to)
    }

    /// `(sum tau_v(next, prev), sum tau_v(prev, next))` around `cycle`.
    pub fn cycle_sums(&self, cycle: &[usize]) -> Option<(f64, f64)> {
        let k = cycle.len();
        let mut fwd = 0.0;
        let mut back = 0.0;
        for (i, &v) in cycle.iter().enumerate() {
            let next = cycle[(i + 1) % k];
            let prev = cycle[(i + k - 1) % k];
            fwd += self.tau(v, next, prev)?;
            back += self.tau(v, prev, next)?;
        }
        Some((fwd, back))
    }

    fn speed_deviation(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for tr in &self.trajectories {
            if let Some(lens) = tr.section_lengths() {
                let mean = tr.length.unwrap_or(0.0) / self.period;
                for (len, t) in lens.iter().zip(&tr.times) {
                    if mean > 0.0 {
                        worst = worst.max((len / t / mean - 1.0).abs());
                    }
                }
            }
        }
        worst
    }
}

/// Check per-trajectory period sums and every cycle equation, returning the
/// integer multiple found for each cycle.
pub fn validate_plan(
    plan: &SectionPlan,
    cycles: &[Vec<usize>],
    tol: f64,
) -> Result<Vec<CycleCheck>, ScheduleError> {
    let period = plan.period;
    for (v, tr) in plan.trajectories.iter().enumerate() {
        if tr.times.len() != tr.links.len().max(1) {
            return Err(ScheduleError::InvalidPlan(format!(
                "trajectory {v}: {} section times for {} links",
                tr.times.len(),
                tr.links.len()
            )));
        }
        if let Some(t) = tr.times.iter().find(|t| !(**t > 0.0 && t.is_finite())) {
            return Err(ScheduleError::InvalidPlan(format!(
                "trajectory {v}: non-positive section time {t}"
            )));
        }
        let total = tr.period();
        if (total - period).abs() > tol * period {
            return Err(ScheduleError::InvalidPlan(format!(
                "trajectory {v}: section times sum to {total}, period is {period}"
            )));
        }
    }
    let mut checks = Vec::with_capacity(cycles.len());
    let mut failed = Vec::new();
    for cycle in cycles {
        let k = cycle.len();
        let Some((sum, complement)) = plan.cycle_sums(cycle) else {
            return Err(ScheduleError::InvalidPlan(format!(
                "cycle {cycle:?} uses a link missing from the plan"
            )));
        };
        let z = (sum / period).round();
        let ok = (sum - z * period).abs() <= tol * period * k as f64
            && (complement - (k as f64 - z) * period).abs() <= tol * period * k as f64
            && z > 0.0
            && z < k as f64;
        if ok {
            checks.push(CycleCheck {
                cycle: cycle.clone(),
                z: z as u32,
                sum,
                complement,
            });
        } else {
            failed.push(cycle.clone());
        }
    }
    if !failed.is_empty() {
        return Err(ScheduleError::Infeasible { cycles: failed });
    }
    Ok(checks)
}

fn integral_multiple(sum: f64, period: f64, k: usize) -> Option<u32> {
    let z = (sum / period).round();
    let ok = (sum - z * period).abs() <= 1e-9 * k as f64 * period && z > 0.0 && z < k as f64;
    ok.then_some(z as u32)
}

fn times_in_range(times: &[f64], period: f64) -> bool {
    times.iter().all(|&t| t > 0.0 && t < period)
}

/// Same-direction cycle test: `t_1 + ... + t_k = z T` with `0 < z < k`,
/// where `t_i` is the inside-section time of agent `i`.
pub fn check_cycle_same_direction(times: &[f64], period: f64) -> Option<u32> {
    if times.is_empty() || !times_in_range(times, period) {
        return None;
    }
    integral_multiple(times.iter().sum(), period, times.len())
}

/// Opposite-direction cycle test: `t_1 + r_2 + t_3 + ... + r_2k = z T`, with
/// outside times `r_i = T - t_i`.
pub fn check_cycle_opposite(times: &[f64], period: f64) -> Result<Option<u32>, ScheduleError> {
    if times.len() % 2 == 1 || times.is_empty() {
        return Err(ScheduleError::InvalidArgument(format!(
            "opposite-direction cycles have even length, got {}",
            times.len()
        )));
    }
    if !times_in_range(times, period) {
        return Ok(None);
    }
    let sum = times
        .iter()
        .enumerate()
        .map(|(i, &t)| if i % 2 == 0 { t } else { period - t })
        .sum();
    Ok(integral_multiple(sum, period, times.len()))
}

/// Assign section times for neighbors flying in opposite directions.
///
/// Directions follow the two-coloring (class A counter-clockwise). For every
/// combination of integer multiples `z` over the basis cycles, the smallest
/// speed spread `eps` is found by bisection on a linear feasibility program:
/// each section speed must stay within `[(1-eps) v, (1+eps) v]` of the
/// trajectory's mean speed `v = l / T`, each trajectory's times sum to `T`, and
/// each cycle sum equals `z T`. Combinations are explored best-first with a
/// per-cycle lower bound on `eps`. Without cycles every trajectory runs at
/// its mean speed.
pub fn assign_section_times(
    g: &Graph64,
    basis: &CycleBasis,
    period: f64,
    lengths: &[f64],
) -> Result<SectionPlan, ScheduleError> {
    let n = g.node_count();
    if lengths.len() != n {
        return Err(ScheduleError::InvalidArgument(format!(
            "{} lengths for {n} trajectories",
            lengths.len()
        )));
    }
    if !(period > 0.0 && period.is_finite()) {
        return Err(ScheduleError::InvalidArgument(format!(
            "bad period {period}"
        )));
    }
    if let Some(l) = lengths.iter().find(|l| !(**l > 0.0 && l.is_finite())) {
        return Err(ScheduleError::InvalidArgument(format!(
            "bad trajectory length {l}"
        )));
    }
    let coloring = g.two_color().map_err(ScheduleError::NotSynchronizable)?;

    let mut trajectories = Vec::with_capacity(n);
    for v in 0..n {
        let direction = match coloring[v] {
            Side::A => Direction::Ccw,
            Side::B => Direction::Cw,
        };
        let l = lengths[v];
        let scale = match g.kind() {
            LinkKind::ArcLength => 1.0,
            LinkKind::Angle => l / TAU,
        };
        let mut links: Vec<(f64, usize)> = g
            .neighbors(v)
            .map(|u| (g.edge(v, u).expect("edge").link_at(v) * scale, u))
            .collect();
        links.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        if direction == Direction::Cw {
            links.reverse();
        }
        let tr = TrajectorySections {
            direction,
            links: links.iter().map(|x| x.1).collect(),
            link_positions: links.iter().map(|x| x.0).collect(),
            length: Some(l),
            times: Vec::new(),
        };
        let lens = tr.section_lengths().expect("geometry known");
        if lens.iter().any(|&d| d <= 1e-12 * l) {
            return Err(ScheduleError::InvalidPlan(format!(
                "trajectory {v}: two links share a location"
            )));
        }
        trajectories.push(TrajectorySections {
            times: lens.iter().map(|d| d / l * period).collect(),
            ..tr
        });
    }

    if basis.cycles.is_empty() {
        let mut plan = SectionPlan {
            period,
            trajectories,
            cycles: Vec::new(),
            max_speed_deviation: 0.0,
        };
        plan.max_speed_deviation = plan.speed_deviation();
        return Ok(plan);
    }

    // variable layout: one per section
    let mut offset = Vec::with_capacity(n);
    let mut nominal = Vec::new();
    for tr in &trajectories {
        offset.push(nominal.len());
        nominal.extend_from_slice(&tr.times);
    }
    let mut base_rows: Vec<Row> = trajectories
        .iter()
        .enumerate()
        .map(|(v, tr)| Row {
            terms: (0..tr.times.len()).map(|k| (offset[v] + k, 1.0)).collect(),
            rhs: period,
        })
        .collect();

    let mut cycle_terms: Vec<Vec<(usize, f64)>> = Vec::with_capacity(basis.cycles.len());
    for cycle in &basis.cycles {
        let k = cycle.len();
        let mut terms = Vec::new();
        for (i, &v) in cycle.iter().enumerate() {
            let next = cycle[(i + 1) % k];
            let prev = cycle[(i + k - 1) % k];
            let tr = &trajectories[v];
            let (Some(a), Some(b)) = (tr.index_of(next), tr.index_of(prev)) else {
                return Err(ScheduleError::InvalidArgument(format!(
                    "cycle {cycle:?} is not a cycle of the graph"
                )));
            };
            let m = tr.links.len();
            let mut s = a;
            while s != b {
                terms.push((offset[v] + s, 1.0));
                s = (s + 1) % m;
            }
        }
        cycle_terms.push(terms);
    }

    let mut search = ZSearch {
        period,
        nominal: &nominal,
        base_rows: &base_rows,
        cycle_terms: &cycle_terms,
        lengths: basis.cycles.iter().map(Vec::len).collect(),
        best: None,
    };
    let mut chosen = vec![0u32; basis.cycles.len()];
    search.descend(0, 0.0, &mut chosen);

    let Some((eps, zs)) = search.best.take() else {
        let binding: Vec<Vec<usize>> = basis
            .cycles
            .iter()
            .enumerate()
            .filter(|(c, _)| !search.single_cycle_feasible(*c))
            .map(|(_, cyc)| cyc.clone())
            .collect();
        let cycles = if binding.is_empty() {
            basis.cycles.clone()
        } else {
            binding
        };
        return Err(ScheduleError::Infeasible { cycles });
    };

    for (terms, &z) in cycle_terms.iter().zip(&zs) {
        base_rows.push(Row {
            terms: terms.clone(),
            rhs: z as f64 * period,
        });
    }
    let x = feasible_point(
        &speed_bounds(&nominal, eps * (1.0 + 1e-9) + 1e-12),
        &base_rows,
    )
    .ok_or_else(|| ScheduleError::Infeasible {
        cycles: basis.cycles.clone(),
    })?;
    let x = project(&base_rows, &x);

    for (v, tr) in trajectories.iter_mut().enumerate() {
        let m = tr.times.len();
        tr.times = x[offset[v]..offset[v] + m].to_vec();
    }
    let mut plan = SectionPlan {
        period,
        trajectories,
        cycles: Vec::new(),
        max_speed_deviation: 0.0,
    };
    plan.cycles = validate_plan(&plan, &basis.cycles, 1e-9)?;
    plan.max_speed_deviation = plan.speed_deviation();
    Ok(plan)
}

fn speed_bounds(nominal: &[f64], eps: f64) -> Vec<(f64, f64)> {
    nominal
        .iter()
        .map(|&t| {
            let hi = if eps < 1.0 {
                t / (1.0 - eps)
            } else {
                f64::INFINITY
            };
            (t / (1.0 + eps), hi)
        })
        .collect()
}

struct ZSearch<'a> {
    period: f64,
    nominal: &'a [f64],
    base_rows: &'a [Row],
    cycle_terms: &'a [Vec<(usize, f64)>],
    lengths: Vec<usize>,
    best: Option<(f64, Vec<u32>)>,
}

impl ZSearch<'_> {
    fn nominal_sum(&self, c: usize) -> f64 {
        self.cycle_terms[c]
            .iter()
            .map(|&(v, w)| w * self.nominal[v])
            .sum()
    }

    /// Smallest spread any assignment needs for cycle `c` to sum to `z T`.
    fn lower_bound(&self, c: usize, z: u32) -> f64 {
        let ratio = self.nominal_sum(c) / (z as f64 * self.period);
        (ratio - 1.0).max(1.0 - ratio).max(0.0)
    }

    fn bound_to_beat(&self) -> f64 {
        self.best.as_ref().map_or(EPS_MAX, |b| b.0)
    }

    fn descend(&mut self, c: usize, lb: f64, chosen: &mut Vec<u32>) {
        if lb >= self.bound_to_beat() {
            return;
        }
        if c == self.cycle_terms.len() {
            if let Some(eps) = self.min_spread(chosen, lb) {
                if eps < self.bound_to_beat() {
                    self.best = Some((eps, chosen.clone()));
                }
            }
            return;
        }
        let mut options: Vec<(f64, u32)> = (1..self.lengths[c] as u32)
            .map(|z| (self.lower_bound(c, z), z))
            .collect();
        options.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        for (bound, z) in options {
            chosen[c] = z;
            self.descend(c + 1, lb.max(bound), chosen);
        }
    }

    fn rows_for(&self, zs: &[u32]) -> Vec<Row> {
        let mut rows = self.base_rows.to_vec();
        for (terms, &z) in self.cycle_terms.iter().zip(zs) {
            rows.push(Row {
                terms: terms.clone(),
                rhs: z as f64 * self.period,
            });
        }
        rows
    }

    fn min_spread(&self, zs: &[u32], lb: f64) -> Option<f64> {
        let rows = self.rows_for(zs);
        let feasible = |eps: f64| feasible_point(&speed_bounds(self.nominal, eps), &rows).is_some();
        let mut hi = self.bound_to_beat();
        if !feasible(hi) {
            return None;
        }
        let mut lo = lb;
        if feasible(lo) {
            return Some(lo);
        }
        for _ in 0..BISECTION_STEPS {
            if hi - lo < 1e-9 {
                break;
            }
            let mid = 0.5 * (lo + hi);
            if feasible(mid) {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        Some(hi)
    }

    fn single_cycle_feasible(&self, c: usize) -> bool {
        (1..self.lengths[c] as u32).any(|z| {
            let mut rows = self.base_rows.to_vec();
            rows.push(Row {
                terms: self.cycle_terms[c].clone(),
                rhs: z as f64 * self.period,
            });
            feasible_point(&speed_bounds(self.nominal, EPS_MAX), &rows).is_some()
        })
    }
}
