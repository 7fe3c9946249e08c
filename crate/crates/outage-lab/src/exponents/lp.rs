//! A small dense two-phase simplex for `min cᵀx` subject to linear rows and `x ≥ 0`.
//!
//! The exponent oracle solves thousands of programs with a dozen variables,
//! so a textbook tableau with Bland's anti-cycling rule is plenty.

const EPS: f64 = 1e-11;
const FEAS_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Le,
    Ge,
    Eq,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub coeffs: Vec<f64>,
    pub rel: Relation,
    pub rhs: f64,
}

impl Constraint {
    pub fn new(coeffs: Vec<f64>, rel: Relation, rhs: f64) -> Self {
        Constraint { coeffs, rel, rhs }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum LpOutcome {
    Optimal { value: f64, x: Vec<f64> },
    Infeasible,
    Unbounded,
}

impl LpOutcome {
    pub fn value(&self) -> Option<f64> {
        match self {
            LpOutcome::Optimal { value, .. } => Some(*value),
            _ => None,
        }
    }
}

struct Tableau {
    rows: Vec<Vec<f64>>,
    rhs: Vec<f64>,
    basis: Vec<usize>,
    cols: usize,
}

impl Tableau {
    fn pivot(&mut self, r: usize, c: usize) {
        let p = self.rows[r][c];
        for v in self.rows[r].iter_mut() {
            *v /= p;
        }
        self.rhs[r] /= p;
        let pivot_row = self.rows[r].clone();
        let pivot_rhs = self.rhs[r];
        for i in 0..self.rows.len() {
            if i == r {
                continue;
            }
            let f = self.rows[i][c];
            if f != 0.0 {
                for (v, pv) in self.rows[i].iter_mut().zip(&pivot_row) {
                    *v -= f * pv;
                }
                self.rhs[i] -= f * pivot_rhs;
            }
        }
        self.basis[r] = c;
    }

    /// Minimizes `cost · x` over columns `< allowed`; returns false when unbounded.
    fn optimize(&mut self, cost: &[f64], allowed: usize) -> bool {
        loop {
            let entering = (0..allowed).find(|&j| {
                if self.basis.contains(&j) {
                    return false;
                }
                let reduced =
                    cost[j] - self.basis.iter().enumerate().map(|(i, &bj)| cost[bj] * self.rows[i][j]).sum::<f64>();
                reduced < -EPS
            });
            let Some(j) = entering else { return true };
            let mut leave: Option<(usize, f64)> = None;
            for i in 0..self.rows.len() {
                let a = self.rows[i][j];
                if a > EPS {
                    let ratio = self.rhs[i] / a;
                    leave = match leave {
                        None => Some((i, ratio)),
                        Some((li, lr)) => {
                            if ratio < lr - EPS || (ratio <= lr + EPS && self.basis[i] < self.basis[li]) {
                                Some((i, ratio))
                            } else {
                                Some((li, lr))
                            }
                        }
                    };
                }
            }
            let Some((r, _)) = leave else { return false };
            self.pivot(r, j);
        }
    }

    fn objective(&self, cost: &[f64]) -> f64 {
        self.basis.iter().zip(&self.rhs).map(|(&b, &v)| cost[b] * v).sum()
    }
}

/// Minimizes `c · x` subject to `constraints` and `x ≥ 0`.
pub fn solve_lp(c: &[f64], constraints: &[Constraint]) -> LpOutcome {
    let n = c.len();
    let m = constraints.len();
    let slack_count = constraints.iter().filter(|k| k.rel != Relation::Eq).count();
    let art_start = n + slack_count;
    let cols = art_start + m;
    let mut tab =
        Tableau { rows: Vec::with_capacity(m), rhs: Vec::with_capacity(m), basis: Vec::with_capacity(m), cols };
    let mut slack = n;
    for (i, k) in constraints.iter().enumerate() {
        assert_eq!(k.coeffs.len(), n, "constraint {i} has the wrong width");
        let flip = k.rhs < 0.0;
        let sign = if flip { -1.0 } else { 1.0 };
        let mut row = vec![0.0; cols];
        for (r, &a) in row.iter_mut().zip(&k.coeffs) {
            *r = sign * a;
        }
        let rel = match (k.rel, flip) {
            (Relation::Le, true) => Relation::Ge,
            (Relation::Ge, true) => Relation::Le,
            (rel, _) => rel,
        };
        let basic = match rel {
            Relation::Le => {
                row[slack] = 1.0;
                slack += 1;
                slack - 1
            }
            Relation::Ge => {
                row[slack] = -1.0;
                slack += 1;
                row[art_start + i] = 1.0;
                art_start + i
            }
            Relation::Eq => {
                row[art_start + i] = 1.0;
                art_start + i
            }
        };
        tab.rows.push(row);
        tab.rhs.push(sign * k.rhs);
        tab.basis.push(basic);
    }

    // Phase 1: drive the artificial variables to zero.
    let mut phase1 = vec![0.0; cols];
    for v in phase1[art_start..].iter_mut() {
        *v = 1.0;
    }
    tab.optimize(&phase1, cols);
    let scale = 1.0 + tab.rhs.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    if tab.objective(&phase1) > FEAS_TOL * scale {
        return LpOutcome::Infeasible;
    }
    // Pivot remaining (zero-valued) artificials out of the basis, dropping redundant rows.
    let mut i = 0;
    while i < tab.rows.len() {
        if tab.basis[i] >= art_start {
            match (0..art_start).find(|&j| tab.rows[i][j].abs() > 1e-9) {
                Some(j) => tab.pivot(i, j),
                None => {
                    tab.rows.remove(i);
                    tab.rhs.remove(i);
                    tab.basis.remove(i);
                    continue;
                }
            }
        }
        i += 1;
    }

    let mut phase2 = vec![0.0; tab.cols];
    phase2[..n].copy_from_slice(c);
    if !tab.optimize(&phase2, art_start) {
        return LpOutcome::Unbounded;
    }
    let mut x = vec![0.0; n];
    for (&b, &v) in tab.basis.iter().zip(&tab.rhs) {
        if b < n {
            x[b] = v.max(0.0);
        }
    }
    let value = c.iter().zip(&x).map(|(a, b)| a * b).sum();
    LpOutcome::Optimal { value, x }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn feasible(x: &[f64], rows: &[Constraint], tol: f64) -> bool {
        x.iter().all(|&v| v >= -tol)
            && rows.iter().all(|k| {
                let lhs: f64 = k.coeffs.iter().zip(x).map(|(a, b)| a * b).sum();
                match k.rel {
                    Relation::Le => lhs <= k.rhs + tol,
                    Relation::Ge => lhs >= k.rhs - tol,
                    Relation::Eq => (lhs - k.rhs).abs() <= tol,
                }
            })
    }

    /// Gaussian elimination with partial pivoting; `None` if singular.
    #[allow(clippy::needless_range_loop)] // rows r and col are borrowed together
    fn solve_square(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
        let n = b.len();
        for col in 0..n {
            let p = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
            if a[p][col].abs() < 1e-12 {
                return None;
            }
            a.swap(col, p);
            b.swap(col, p);
            for r in 0..n {
                if r != col {
                    let f = a[r][col] / a[col][col];
                    for k in col..n {
                        a[r][k] -= f * a[col][k];
                    }
                    b[r] -= f * b[col];
                }
            }
        }
        Some((0..n).map(|i| b[i] / a[i][i]).collect())
    }

    /// Brute-force optimum over all vertices of the feasible polyhedron.
    fn vertex_enumeration(c: &[f64], rows: &[Constraint]) -> Option<f64> {
        let n = c.len();
        let mut planes: Vec<(Vec<f64>, f64)> = rows.iter().map(|k| (k.coeffs.clone(), k.rhs)).collect();
        for j in 0..n {
            let mut e = vec![0.0; n];
            e[j] = 1.0;
            planes.push((e, 0.0));
        }
        let mut best: Option<f64> = None;
        let total = planes.len();
        for mask in 0u32..(1 << total) {
            if mask.count_ones() as usize != n {
                continue;
            }
            let chosen: Vec<_> = (0..total).filter(|i| mask >> i & 1 == 1).collect();
            let a = chosen.iter().map(|&i| planes[i].0.clone()).collect();
            let b = chosen.iter().map(|&i| planes[i].1).collect();
            if let Some(x) = solve_square(a, b) {
                if feasible(&x, rows, 1e-9) {
                    let v: f64 = c.iter().zip(&x).map(|(a, b)| a * b).sum();
                    best = Some(best.map_or(v, |bv: f64| bv.min(v)));
                }
            }
        }
        best
    }

    #[test]
    fn textbook_program() {
        // min x + y  s.t. x + 2y ≥ 4, 3x + y ≥ 6  →  x = 8/5, y = 6/5.
        let rows = vec![
            Constraint::new(vec![1.0, 2.0], Relation::Ge, 4.0),
            Constraint::new(vec![3.0, 1.0], Relation::Ge, 6.0),
        ];
        let LpOutcome::Optimal { value, x } = solve_lp(&[1.0, 1.0], &rows) else { panic!() };
        assert!((value - 2.8).abs() < 1e-12);
        assert!((x[0] - 1.6).abs() < 1e-12 && (x[1] - 1.2).abs() < 1e-12);
    }

    #[test]
    fn infeasible_and_unbounded() {
        let rows = vec![Constraint::new(vec![1.0], Relation::Le, 1.0), Constraint::new(vec![1.0], Relation::Ge, 2.0)];
        assert_eq!(solve_lp(&[1.0], &rows), LpOutcome::Infeasible);
        let rows = vec![Constraint::new(vec![1.0, -1.0], Relation::Le, 1.0)];
        assert_eq!(solve_lp(&[0.0, -1.0], &rows), LpOutcome::Unbounded);
    }

    #[test]
    fn equality_rows_and_negative_rhs() {
        // x − y = −1, x + y ≤ 3, min −x  →  x = 1, y = 2.
        let rows = vec![
            Constraint::new(vec![1.0, -1.0], Relation::Eq, -1.0),
            Constraint::new(vec![1.0, 1.0], Relation::Le, 3.0),
        ];
        let LpOutcome::Optimal { value, x } = solve_lp(&[-1.0, 0.0], &rows) else { panic!() };
        assert!((value + 1.0).abs() < 1e-12 && (x[1] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn redundant_equalities() {
        let rows = vec![
            Constraint::new(vec![1.0, 1.0], Relation::Eq, 2.0),
            Constraint::new(vec![2.0, 2.0], Relation::Eq, 4.0),
        ];
        assert_eq!(solve_lp(&[1.0, 3.0], &rows).value(), Some(2.0));
    }

    fn arb_row(n: usize) -> impl Strategy<Value = Constraint> {
        (
            proptest::collection::vec(-3i32..=3, n),
            prop_oneof![Just(Relation::Le), Just(Relation::Ge), Just(Relation::Eq)],
            -4i32..=4,
        )
            .prop_map(|(a, rel, b)| Constraint::new(a.into_iter().map(f64::from).collect(), rel, b as f64))
    }

    fn arb_program() -> impl Strategy<Value = (Vec<f64>, Vec<Constraint>)> {
        (1usize..=3).prop_flat_map(|n| {
            (
                proptest::collection::vec(0i32..=4, n).prop_map(|c| c.into_iter().map(f64::from).collect()),
                proptest::collection::vec(arb_row(n), 1..=4),
            )
        })
    }

    proptest! {
        #[test]
        fn simplex_matches_vertex_enumeration((c, rows) in arb_program()) {
            // Nonnegative costs over x ≥ 0 are bounded below, so the optimum sits at a vertex.
            let brute = vertex_enumeration(&c, &rows);
            match solve_lp(&c, &rows) {
                LpOutcome::Optimal { value, x } => {
                    prop_assert!(feasible(&x, &rows, 1e-8));
                    let b = brute.expect("simplex found a point, enumeration must too");
                    prop_assert!((value - b).abs() < 1e-8, "simplex {} vs vertices {}", value, b);
                }
                LpOutcome::Infeasible => prop_assert!(brute.is_none()),
                LpOutcome::Unbounded => prop_assert!(false, "nonnegative costs cannot be unbounded"),
            }
        }
    }
}
