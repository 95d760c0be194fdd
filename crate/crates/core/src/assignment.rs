//! Rectangular minimum-cost assignment (Hungarian method, shortest augmenting
//! path form with row/column potentials).
//!
//! Infeasible entries are handled exactly rather than with a large finite
//! penalty: every cost is lifted to the pair `(infeasible_count, cost)` and
//! compared lexicographically, so the solver first maximizes the number of
//! feasible pairs and then minimizes their total cost.

use std::cmp::Ordering;
use std::ops::{Add, AddAssign, Sub, SubAssign};

/// Marker for a pair that must never be matched.
pub const INFEASIBLE: f64 = f64::INFINITY;

/// Dense row-major cost matrix. Any non-finite entry is infeasible.
#[derive(Debug, Clone, PartialEq)]
pub struct CostMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl CostMatrix {
    pub fn new(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![INFEASIBLE; rows * cols] }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let cols = rows.first().map_or(0, Vec::len);
        assert!(rows.iter().all(|r| r.len() == cols), "ragged cost matrix");
        Self { rows: rows.len(), cols, data: rows.concat() }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, value: f64) {
        self.data[r * self.cols + c] = value;
    }

    pub fn is_feasible(&self, r: usize, c: usize) -> bool {
        self.get(r, c).is_finite()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct LexCost {
    infeasible: i64,
    cost: f64,
}

impl LexCost {
    const ZERO: LexCost = LexCost { infeasible: 0, cost: 0.0 };
    const MAX: LexCost = LexCost { infeasible: i64::MAX / 4, cost: 0.0 };

    fn of(value: f64) -> Self {
        if value.is_finite() {
            LexCost { infeasible: 0, cost: value }
        } else {
            LexCost { infeasible: 1, cost: 0.0 }
        }
    }
}

impl PartialOrd for LexCost {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.infeasible.cmp(&other.infeasible).then(self.cost.total_cmp(&other.cost)))
    }
}

impl Add for LexCost {
    type Output = LexCost;
    fn add(self, o: LexCost) -> LexCost {
        LexCost { infeasible: self.infeasible + o.infeasible, cost: self.cost + o.cost }
    }
}

impl Sub for LexCost {
    type Output = LexCost;
    fn sub(self, o: LexCost) -> LexCost {
        LexCost { infeasible: self.infeasible - o.infeasible, cost: self.cost - o.cost }
    }
}

impl AddAssign for LexCost {
    fn add_assign(&mut self, o: LexCost) {
        *self = *self + o;
    }
}

impl SubAssign for LexCost {
    fn sub_assign(&mut self, o: LexCost) {
        *self = *self - o;
    }
}

/// Solves for `n <= m`; `cost(i, j)` indexes a logical n x m matrix.
/// Returns, for each row, its assigned column.
fn solve_wide(n: usize, m: usize, cost: impl Fn(usize, usize) -> LexCost) -> Vec<usize> {
    // 1-based with a virtual column 0, as in the classic formulation
    let mut u = vec![LexCost::ZERO; n + 1];
    let mut v = vec![LexCost::ZERO; m + 1];
    let mut p = vec![0usize; m + 1];
    let mut way = vec![0usize; m + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![LexCost::MAX; m + 1];
        let mut used = vec![false; m + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = LexCost::MAX;
            let mut j1 = 0usize;
            for j in 1..=m {
                if used[j] {
                    continue;
                }
                let cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=m {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut row_to_col = vec![usize::MAX; n];
    for j in 1..=m {
        if p[j] != 0 {
            row_to_col[p[j] - 1] = j - 1;
        }
    }
    row_to_col
}

/// Minimum-cost matching over feasible entries. Among all matchings of
/// maximum feasible cardinality, returns one of least total cost. Pairs are
/// sorted by row.
pub fn hungarian_solve(costs: &CostMatrix) -> Vec<(usize, usize)> {
    let (n, m) = (costs.rows, costs.cols);
    if n == 0 || m == 0 {
        return Vec::new();
    }
    let mut pairs: Vec<(usize, usize)> = if n <= m {
        solve_wide(n, m, |i, j| LexCost::of(costs.get(i, j)))
            .into_iter()
            .enumerate()
            .collect()
    } else {
        solve_wide(m, n, |i, j| LexCost::of(costs.get(j, i)))
            .into_iter()
            .enumerate()
            .map(|(c, r)| (r, c))
            .collect()
    };
    pairs.retain(|&(r, c)| costs.is_feasible(r, c));
    pairs.sort_unstable();
    pairs
}

/// [`hungarian_solve`] followed by dropping pairs whose cost exceeds `gate`.
pub fn solve_gated(costs: &CostMatrix, gate: f64) -> Vec<(usize, usize)> {
    let mut pairs = hungarian_solve(costs);
    pairs.retain(|&(r, c)| costs.get(r, c) <= gate);
    pairs
}

pub fn total_cost(costs: &CostMatrix, pairs: &[(usize, usize)]) -> f64 {
    pairs.iter().map(|&(r, c)| costs.get(r, c)).sum()
}
