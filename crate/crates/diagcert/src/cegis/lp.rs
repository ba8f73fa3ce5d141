//! Margin-maximizing linear feasibility.
//!
//! Solves `max t  s.t.  a_i·c + t <= b_i,  |c_j| <= C` with a bounded-variable
//! primal simplex on a condensed tableau. Rows are scaled to unit max-norm
//! first, so `t` is a normalized slack. The start point `c = -C` with a low
//! enough `t` is always feasible, so no phase one is needed.

/// One inequality `a·c <= b`, with `a` sparse.
#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub a: Vec<(usize, f64)>,
    pub b: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub c: Vec<f64>,
    /// smallest normalized slack, recomputed from `c` after solving
    pub margin: f64,
    pub iterations: usize,
    /// the iteration limit stopped the solver before optimality
    pub stalled: bool,
}

const PIV_TOL: f64 = 1e-9;
const COST_TOL: f64 = 1e-10;

/// Merges repeated indices, drops cancelled entries and scales to unit max-norm.
fn norm_row(r: &Row) -> Option<(Vec<(usize, f64)>, f64)> {
    let mut a = r.a.clone();
    a.sort_by_key(|e| e.0);
    let mut merged: Vec<(usize, f64)> = Vec::with_capacity(a.len());
    let mut big = 0.0f64;
    for (j, v) in a {
        big = big.max(v.abs());
        match merged.last_mut() {
            Some((lj, lv)) if *lj == j => *lv += v,
            _ => merged.push((j, v)),
        }
    }
    // entries that cancel down to rounding noise are exact zeros
    merged.retain(|e| e.1.abs() > 1e-12 * big);
    let s = merged.iter().fold(0.0f64, |m, (_, v)| m.max(v.abs()));
    if s < 1e-300 {
        return None;
    }
    Some((
        merged.into_iter().map(|(j, v)| (j, v / s)).collect(),
        r.b / s,
    ))
}

/// Normalized slack of every row at `c`; constant rows count as `b`.
pub fn margin_of(rows: &[Row], c: &[f64]) -> f64 {
    let mut m = f64::INFINITY;
    for r in rows {
        let s = match norm_row(r) {
            Some((a, b)) => b - a.iter().map(|&(j, v)| v * c[j]).sum::<f64>(),
            None => {
                if r.b < 0.0 {
                    r.b
                } else {
                    continue;
                }
            }
        };
        m = m.min(s);
    }
    m
}

/// Maximizes the smallest normalized slack over `nvars` coefficients bounded by `cmax`.
/// Rows with an all-zero left side are ignored when satisfiable and cap the
/// margin at `b` otherwise.
pub fn maximize_margin(
    nvars: usize,
    rows: &[Row],
    cmax: f64,
    t_cap: f64,
    max_iter: usize,
) -> LpSolution {
    let mut cap = t_cap;
    let mut dense: Vec<Vec<f64>> = Vec::new();
    let mut rhs: Vec<f64> = Vec::new();
    for r in rows {
        match norm_row(r) {
            Some((a, b)) => {
                let mut d = vec![0.0; nvars + 1];
                for (j, v) in a {
                    d[j] += v;
                }
                d[nvars] = 1.0;
                dense.push(d);
                rhs.push(b);
            }
            None => cap = cap.min(r.b),
        }
    }
    let m = dense.len();
    let nn = nvars + 1;
    // lowest t that keeps every slack positive at c = -C
    let mut t_lo = -1.0;
    for (d, &b) in dense.iter().zip(&rhs) {
        let l1: f64 = d[..nvars].iter().map(|v| v.abs()).sum();
        t_lo = f64::min(t_lo, b - cmax * l1 - 1.0);
    }
    let t_hi = cap.max(t_lo);
    // variables: 0..nn structural, nn..nn+m slacks
    let total = nn + m;
    let mut lo = vec![-cmax; total];
    let mut hi = vec![cmax; total];
    lo[nvars] = t_lo;
    hi[nvars] = t_hi;
    for i in nn..total {
        lo[i] = 0.0;
        hi[i] = f64::INFINITY;
    }
    let mut val = lo.clone();
    let mut basis: Vec<usize> = (nn..total).collect();
    let mut nonbasic: Vec<usize> = (0..nn).collect();
    // row r: x_basis[r] + sum_k tab[r][k] x_nonbasic[k] = rhs[r]
    let mut tab = dense;
    for r in 0..m {
        val[basis[r]] = rhs[r] - (0..nn).map(|k| tab[r][k] * val[nonbasic[k]]).sum::<f64>();
    }
    // objective z = z0 + sum_k dj[k] x_nonbasic[k]
    let mut dj = vec![0.0; nn];
    dj[nvars] = 1.0;

    let mut iterations = 0;
    let mut stalled = false;
    let mut degenerate_run = 0usize;
    loop {
        if iterations >= max_iter {
            stalled = true;
            break;
        }
        iterations += 1;
        let bland = degenerate_run > 50;
        let mut enter: Option<(usize, f64)> = None;
        let mut best = 0.0;
        for k in 0..nn {
            let v = nonbasic[k];
            let up = dj[k] > COST_TOL && val[v] < hi[v] - 1e-12;
            let down = dj[k] < -COST_TOL && val[v] > lo[v] + 1e-12;
            if up || down {
                let score = dj[k].abs();
                if bland {
                    if enter.map(|(e, _)| v < nonbasic[e]).unwrap_or(true) {
                        enter = Some((k, if up { 1.0 } else { -1.0 }));
                    }
                } else if score > best {
                    best = score;
                    enter = Some((k, if up { 1.0 } else { -1.0 }));
                }
            }
        }
        let Some((k, dir)) = enter else { break };
        let ev = nonbasic[k];
        let mut theta = hi[ev] - lo[ev];
        let mut leave: Option<(usize, bool)> = None;
        for r in 0..m {
            let alpha = -tab[r][k] * dir;
            if alpha.abs() <= PIV_TOL {
                continue;
            }
            let bv = basis[r];
            let room = if alpha < 0.0 {
                (val[bv] - lo[bv]) / -alpha
            } else {
                (hi[bv] - val[bv]) / alpha
            };
            let room = room.max(0.0);
            let better = room < theta - 1e-14
                || (room <= theta + 1e-14
                    && leave
                        .map(|(lr, _)| bland && bv < basis[lr])
                        .unwrap_or(false));
            if better {
                theta = room;
                leave = Some((r, alpha > 0.0));
            }
        }
        if !theta.is_finite() {
            // cannot happen with bounded structurals
            stalled = true;
            break;
        }
        if theta <= 1e-14 {
            degenerate_run += 1;
        } else {
            degenerate_run = 0;
        }
        val[ev] += dir * theta;
        for r in 0..m {
            val[basis[r]] -= tab[r][k] * dir * theta;
        }
        let Some((r, to_upper)) = leave else {
            // bound flip
            val[ev] = if dir > 0.0 { hi[ev] } else { lo[ev] };
            continue;
        };
        let lv = basis[r];
        val[lv] = if to_upper { hi[lv] } else { lo[lv] };
        let p = tab[r][k];
        let prow: Vec<f64> = tab[r].iter().map(|v| v / p).collect();
        let prhs = rhs[r] / p;
        for i in 0..m {
            if i == r {
                continue;
            }
            let f = tab[i][k];
            if f == 0.0 {
                continue;
            }
            let row = &mut tab[i];
            for c in 0..nn {
                row[c] -= f * prow[c];
            }
            row[k] = -f / p;
            rhs[i] -= f * prhs;
        }
        let f = dj[k];
        for c in 0..nn {
            dj[c] -= f * prow[c];
        }
        dj[k] = -f / p;
        tab[r] = prow;
        tab[r][k] = 1.0 / p;
        rhs[r] = prhs;
        basis[r] = ev;
        nonbasic[k] = lv;
        if iterations % 64 == 0 {
            for i in 0..m {
                val[basis[i]] = rhs[i] - (0..nn).map(|c| tab[i][c] * val[nonbasic[c]]).sum::<f64>();
            }
        }
    }
    let c: Vec<f64> = (0..nvars).map(|j| val[j].clamp(-cmax, cmax)).collect();
    let margin = margin_of(rows, &c).min(t_cap);
    LpSolution {
        c,
        margin,
        iterations,
        stalled,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn one_dimensional_interval() {
        // 1 <= c <= 3: best margin 1 at c = 2
        let rows = vec![
            Row {
                a: vec![(0, 1.0)],
                b: 3.0,
            },
            Row {
                a: vec![(0, -1.0)],
                b: -1.0,
            },
        ];
        let s = maximize_margin(1, &rows, 10.0, 100.0, 1000);
        assert!((s.c[0] - 2.0).abs() < 1e-9);
        assert!((s.margin - 1.0).abs() < 1e-9);
    }

    #[test]
    fn contradictory_rows_give_negative_margin() {
        let rows = vec![
            Row {
                a: vec![(0, 1.0)],
                b: 0.0,
            },
            Row {
                a: vec![(0, -1.0)],
                b: -1e-3,
            },
        ];
        let s = maximize_margin(1, &rows, 1000.0, 1.0, 1000);
        assert!(s.margin < 0.0);
        assert!((s.margin + 5e-4).abs() < 1e-9);
    }

    #[test]
    fn empty_problem_hits_cap() {
        let s = maximize_margin(3, &[], 10.0, 1.0, 100);
        assert_eq!(s.margin, 1.0);
    }

    #[test]
    fn zero_rows() {
        let rows = vec![
            Row { a: vec![], b: -2.0 },
            Row {
                a: vec![(0, 1.0)],
                b: 5.0,
            },
        ];
        let s = maximize_margin(1, &rows, 10.0, 100.0, 100);
        assert_eq!(s.margin, -2.0);
    }

    #[test]
    fn triangle() {
        // c0 >= 0, c1 >= 0, c0 + c1 <= 1: incircle of normalized rows
        let rows = vec![
            Row {
                a: vec![(0, -1.0)],
                b: 0.0,
            },
            Row {
                a: vec![(1, -1.0)],
                b: 0.0,
            },
            Row {
                a: vec![(0, 1.0), (1, 1.0)],
                b: 1.0,
            },
        ];
        let s = maximize_margin(2, &rows, 10.0, 100.0, 100);
        assert!((s.margin - 1.0 / 3.0).abs() < 1e-9, "{s:?}");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(200))]
        /// The reported margin is achieved, and it is never below a known feasible margin.
        #[test]
        fn margin_is_sound(seed in proptest::collection::vec(-5.0f64..5.0, 3), rows in proptest::collection::vec((proptest::collection::vec(-3.0f64..3.0, 3), 0.1f64..2.0), 1..30)) {
            // rows built so that `seed` is feasible with slack >= 0.1 before scaling
            let rs: Vec<Row> = rows.iter().map(|(a, s)| {
                let dot: f64 = a.iter().zip(&seed).map(|(x, y)| x * y).sum();
                Row { a: a.iter().cloned().enumerate().collect(), b: dot + s }
            }).collect();
            let sol = maximize_margin(3, &rs, 10.0, 1e6, 10_000);
            prop_assert!(!sol.stalled);
            prop_assert!((sol.margin - margin_of(&rs, &sol.c)).abs() < 1e-12 || sol.margin == 1e6);
            prop_assert!(sol.margin >= margin_of(&rs, &seed) - 1e-7);
        }
    }
}
