//! Brute-force exponent oracle.
//!
//! For each region `n`, each good/bad pattern of the `B` blocks, and each
//! power regime, the outage exponent restricted to that piece is a linear
//! program in `(α̂, ᾱ)`. The exponent is the minimum over all pieces.
//!
//! A block is *good* when `P·γ_i → ∞`, i.e. `π − α_i > 0` with
//! `α_i = ᾱ_i + dₑ`; boundaries are closed on both sides since they do not
//! change an infimum.

use super::lp::{solve_lp, Constraint, LpOutcome, Relation};
use super::{
    snapped_ceil, AlphaRegion, CaseLabel, DnEntry, Exponent, ExponentError, ExponentQuery, ExponentResult, Regime,
};

/// Largest `B` the oracle will enumerate.
pub const ORACLE_MAX_B: u32 = 6;

#[derive(Clone, Copy, PartialEq, Eq)]
enum PowerRegime {
    /// `π = d_peak`, with `1 + mΣα̂ ≥ d_peak`.
    Peak,
    /// `π = 1 + mΣα̂ ≤ d_peak`.
    Inversion,
}

/// Variable layout: `α̂_0..α̂_{B−1}` followed by `ᾱ_i` of the blocks with free `ᾱ`.
struct Layout {
    b: usize,
    /// `free[i]` is the column of `ᾱ_i`, or `None` when `ᾱ_i = α̂_i − dₑ`.
    free: Vec<Option<usize>>,
    width: usize,
}

impl Layout {
    fn new(b: usize, tied: u32) -> Self {
        let mut width = b;
        let free = (0..b)
            .map(|i| {
                if tied >> i & 1 == 1 {
                    None
                } else {
                    width += 1;
                    Some(width - 1)
                }
            })
            .collect();
        Layout { b, free, width }
    }

    fn zeros(&self) -> Vec<f64> {
        vec![0.0; self.width]
    }
}

/// One linear piece of the outage exponent.
struct Piece<'a> {
    q: &'a ExponentQuery,
    layout: Layout,
    regime: PowerRegime,
    /// Per-block cap indicator: capped blocks contribute `cap` to `π` and have `α̂ ≥ cap`.
    capped: u32,
    cap: f64,
}

impl Piece<'_> {
    /// `π` as `(constant, coefficients)` in the inversion regime.
    fn pi_linear(&self) -> (f64, Vec<f64>) {
        let m = self.q.m as f64;
        let mut coeffs = self.layout.zeros();
        let mut constant = 1.0;
        for (i, c) in coeffs.iter_mut().enumerate().take(self.layout.b) {
            if self.capped >> i & 1 == 1 {
                constant += m * self.cap;
            } else {
                *c = m;
            }
        }
        (constant, coeffs)
    }

    /// Solves the piece with the given good-block pattern; `None` if empty.
    fn solve(&self, good: u32) -> Option<f64> {
        let q = self.q;
        let d_e = q.d_e;
        let m = q.m as f64;
        let lay = &self.layout;
        let mut rows = Vec::with_capacity(3 * lay.b + 1);
        let unit = |col: usize| {
            let mut v = lay.zeros();
            v[col] = 1.0;
            v
        };

        for i in 0..lay.b {
            match lay.free[i] {
                Some(_) => rows.push(Constraint::new(unit(i), Relation::Ge, d_e)),
                None => rows.push(Constraint::new(unit(i), Relation::Le, d_e)),
            }
            if self.cap.is_finite() {
                let rel = if self.capped >> i & 1 == 1 { Relation::Ge } else { Relation::Le };
                rows.push(Constraint::new(unit(i), rel, self.cap));
            }
        }

        let (pi_const, pi_coeffs) = self.pi_linear();
        match self.regime {
            PowerRegime::Peak => {
                // 1 + mΣmin(α̂, cap) ≥ d_peak
                rows.push(Constraint::new(pi_coeffs.clone(), Relation::Ge, q.d_peak - pi_const));
            }
            PowerRegime::Inversion if q.d_peak.is_finite() => {
                rows.push(Constraint::new(pi_coeffs.clone(), Relation::Le, q.d_peak - pi_const));
            }
            PowerRegime::Inversion => {}
        }

        for i in 0..lay.b {
            let is_good = good >> i & 1 == 1;
            let rel = if is_good { Relation::Le } else { Relation::Ge };
            // α_i = ᾱ_i + dₑ for free blocks and α_i = α̂_i for tied ones; compare α_i with π.
            let (col, shift) = match lay.free[i] {
                Some(col) => (col, d_e),
                None => (i, 0.0),
            };
            let row = match self.regime {
                PowerRegime::Peak => Constraint::new(unit(col), rel, q.d_peak - shift),
                PowerRegime::Inversion => {
                    let mut v: Vec<f64> = pi_coeffs.iter().map(|c| -c).collect();
                    v[col] += 1.0;
                    Constraint::new(v, rel, pi_const - shift)
                }
            };
            rows.push(row);
        }

        let mut cost = lay.zeros();
        for c in cost.iter_mut().take(lay.b) {
            *c = m;
        }
        for col in lay.free.iter().flatten() {
            cost[*col] = m;
        }
        match solve_lp(&cost, &rows) {
            LpOutcome::Optimal { value, .. } => Some(value),
            LpOutcome::Infeasible => None,
            LpOutcome::Unbounded => unreachable!("costs are nonnegative over x ≥ 0"),
        }
    }
}

fn check_budget(q: &ExponentQuery) -> Result<(), ExponentError> {
    q.validate()?;
    if q.b > ORACLE_MAX_B {
        return Err(ExponentError::BudgetExceeded { b: q.b, max: ORACLE_MAX_B });
    }
    Ok(())
}

fn min_opt(a: Option<f64>, b: Option<f64>) -> Option<f64> {
    match (a, b) {
        (Some(x), Some(y)) => Some(x.min(y)),
        (x, None) | (None, x) => x,
    }
}

fn to_exponent(v: Option<f64>) -> Exponent {
    v.map_or(Exponent::Decay, Exponent::Finite)
}

fn unrotated_table(q: &ExponentQuery, cap: Option<f64>) -> Vec<DnEntry> {
    let b = q.b as usize;
    let max_good = q.rate_ceil() - 1;
    let cap_patterns: u32 = if cap.is_some() { 1 << b } else { 1 };
    (0..=q.b)
        .map(|n| {
            let region = AlphaRegion::new(n, q.b);
            let tied: u32 = region.tied().map(|i| 1u32 << i).sum();
            let mut best = [None, None];
            for (slot, regime) in [PowerRegime::Peak, PowerRegime::Inversion].into_iter().enumerate() {
                if regime == PowerRegime::Peak && q.d_peak.is_infinite() {
                    continue;
                }
                for capped in 0..cap_patterns {
                    let piece =
                        Piece { q, layout: Layout::new(b, tied), regime, capped, cap: cap.unwrap_or(f64::INFINITY) };
                    for good in 0u32..(1 << b) {
                        if good.count_ones() <= max_good {
                            best[slot] = min_opt(best[slot], piece.solve(good));
                        }
                    }
                }
            }
            DnEntry { n, peak: to_exponent(best[0]), inversion: to_exponent(best[1]) }
        })
        .collect()
}

fn oracle_result(q: &ExponentQuery, d_n_table: Vec<DnEntry>) -> ExponentResult {
    let d = d_n_table.iter().map(DnEntry::d).fold(Exponent::Decay, Exponent::min);
    // The peak branch attaining the minimum means the peak constraint is what limits d.
    let peak_attains = d_n_table.iter().any(|e| e.peak.approx_eq(d, 1e-9) && !e.peak.is_decay());
    ExponentResult {
        query: *q,
        d,
        case_label: if peak_attains { CaseLabel::PeakLimited } else { CaseLabel::CsitLimited },
        regime: Some(Regime::classify(q)),
        d_sb: q.b + 1 - q.rate_ceil(),
        at_breakpoint: q.at_breakpoint(),
        d_n_table,
    }
}

/// Exponent by enumerating every good/bad pattern, region and power regime.
///
/// ```
/// use outage_lab::exponents::{oracle_exponent, Exponent, ExponentQuery};
///
/// let q = ExponentQuery::new(4, 1, 1.0, 2, 1.0, 2.0);
/// assert!(oracle_exponent(&q).unwrap().d.approx_eq(Exponent::Finite(6.0), 1e-9));
/// ```
pub fn oracle_exponent(q: &ExponentQuery) -> Result<ExponentResult, ExponentError> {
    check_budget(q)?;
    if q.n_rot != 1 {
        return Err(ExponentError::InvalidQuery("use oracle_exponent_rotated for N > 1".into()));
    }
    Ok(oracle_result(q, unrotated_table(q, None)))
}

/// Oracle for a power rule whose exponent is `π = min(d_peak, 1 + mΣmin(α̂_i, cap))`.
pub fn oracle_exponent_capped(q: &ExponentQuery, cap: f64) -> Result<ExponentResult, ExponentError> {
    check_budget(q)?;
    if q.n_rot != 1 || !(cap >= 0.0) {
        return Err(ExponentError::InvalidQuery("capped oracle needs N = 1 and cap ≥ 0".into()));
    }
    Ok(oracle_result(q, unrotated_table(q, Some(cap))))
}

/// Exponent with rotation groups of `N` consecutive blocks and no peak constraint.
///
/// Enumerates every set of well-estimated blocks and every good/bad block
/// pattern; a group is good when any of its blocks is good, and outage needs
/// fewer than `BR/(MN)` good groups.
pub fn oracle_exponent_rotated(q: &ExponentQuery) -> Result<ExponentResult, ExponentError> {
    check_budget(q)?;
    if q.d_peak.is_finite() {
        return Err(ExponentError::FinitePeakRotated);
    }
    let b = q.b as usize;
    let n_rot = q.n_rot as usize;
    let max_good_groups = snapped_ceil(q.b as f64 * q.rate / (q.bits as f64 * n_rot as f64)) as u32 - 1;
    let group_mask = (1u32 << n_rot) - 1;
    let good_groups = |good: u32| (0..b / n_rot).filter(|g| good >> (g * n_rot) & group_mask != 0).count() as u32;
    let mut best: Vec<Option<f64>> = vec![None; b + 1];
    for tied in 0u32..(1 << b) {
        let piece =
            Piece { q, layout: Layout::new(b, tied), regime: PowerRegime::Inversion, capped: 0, cap: f64::INFINITY };
        let n = tied.count_ones() as usize;
        for good in 0u32..(1 << b) {
            if good_groups(good) <= max_good_groups {
                best[n] = min_opt(best[n], piece.solve(good));
            }
        }
    }
    let d_n_table: Vec<DnEntry> = best
        .into_iter()
        .enumerate()
        .map(|(n, v)| DnEntry { n: n as u32, peak: Exponent::Decay, inversion: to_exponent(v) })
        .collect();
    let d = d_n_table.iter().map(DnEntry::d).fold(Exponent::Decay, Exponent::min);
    Ok(ExponentResult {
        query: *q,
        d,
        case_label: CaseLabel::Rotated,
        regime: None,
        d_sb: q.b + q.n_rot - q.n_rot * q.group_rate_ceil(),
        at_breakpoint: q.at_breakpoint(),
        d_n_table,
    })
}

/// Largest `B` accepted by [`grid_exponent`].
const GRID_MAX_B: u32 = 3;

/// Coarse grid search of the unrotated exponent over `α̂ ∈ {0, step, …, α_max}^B`.
///
/// Regions are inferred from each point (`α̂_i ≥ dₑ` leaves `ᾱ_i` free), good
/// blocks use the half-open tests `α_i < π`, and free `ᾱ_i` are chosen on the
/// same grid. Points whose partial cost exceeds `upper_bound` are pruned;
/// returns `None` if no outage point lies below it.
pub fn grid_exponent(q: &ExponentQuery, step: f64, upper_bound: f64) -> Result<Option<f64>, ExponentError> {
    q.validate()?;
    if q.b > GRID_MAX_B || q.n_rot != 1 {
        return Err(ExponentError::BudgetExceeded { b: q.b, max: GRID_MAX_B });
    }
    let m = q.m as f64;
    let b = q.b as usize;
    let alpha_max = 1.0 + m * b as f64 * q.d_e + q.d_e + q.d_peak.min(1.0 + m * b as f64 * q.d_e);
    let steps = (alpha_max / step).ceil() as usize;
    let max_good = q.rate_ceil() as usize - 1;
    let mut best = upper_bound;
    let mut found = false;
    let mut alpha = vec![0.0; b];

    #[allow(clippy::too_many_arguments)]
    fn recurse(
        q: &ExponentQuery,
        step: f64,
        steps: usize,
        max_good: usize,
        depth: usize,
        partial: f64,
        alpha: &mut Vec<f64>,
        best: &mut f64,
        found: &mut bool,
    ) {
        let m = q.m as f64;
        if depth == alpha.len() {
            if let Some(cost) = grid_point_cost(q, alpha, step, max_good) {
                if cost <= *best {
                    *best = cost;
                    *found = true;
                }
            }
            return;
        }
        for k in 0..=steps {
            let a = k as f64 * step;
            if partial + m * a > *best {
                break;
            }
            alpha[depth] = a;
            recurse(q, step, steps, max_good, depth + 1, partial + m * a, alpha, best, found);
        }
    }

    recurse(q, step, steps, max_good, 0, 0.0, &mut alpha, &mut best, &mut found);
    Ok(found.then_some(best))
}

/// Cheapest outage completion of a grid point `α̂`, or `None` if impossible.
fn grid_point_cost(q: &ExponentQuery, alpha_hat: &[f64], step: f64, max_good: usize) -> Option<f64> {
    let m = q.m as f64;
    let d_e = q.d_e;
    let pi = q.d_peak.min(1.0 + m * alpha_hat.iter().sum::<f64>());
    let mut base = m * alpha_hat.iter().sum::<f64>();
    let mut tied_good = 0;
    // (cost if good, cost if bad) for blocks with free ᾱ > 0.
    let mut free = Vec::new();
    for &a in alpha_hat {
        if a < d_e {
            if a < pi {
                tied_good += 1;
            }
        } else {
            let threshold = pi - d_e;
            let good = (step < threshold).then_some(m * step);
            let bad_val = ((threshold.max(0.0) / step).floor() + 1.0) * step;
            free.push((good, m * bad_val));
        }
    }
    if tied_good > max_good {
        return None;
    }
    let mut allowance = max_good - tied_good;
    // Turn good the blocks that save the most, within the allowance.
    let mut savings: Vec<(f64, f64)> = Vec::new();
    for (good, bad) in free {
        match good {
            Some(g) if g < bad => savings.push((bad - g, bad)),
            _ => base += bad,
        }
    }
    savings.sort_by(|x, y| y.0.total_cmp(&x.0));
    for (save, bad) in savings {
        base += if allowance > 0 {
            allowance -= 1;
            bad - save
        } else {
            bad
        };
    }
    Some(base)
}
