//! The epigraph form of the relayed-pair `min` term must reach the same
//! optimum as maximizing the nonsmooth objective directly. The reference here
//! is a derivative-free Nelder-Mead search on an exact-penalty objective,
//! independent of the SQP solver used by the optimizer.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use selfbh_core::constraints::constraints_unchecked;
use selfbh_core::rates::rates_unchecked;
use selfbh_core::{optimize, ConstraintLabel, OptimizerOptions, PowerAllocation, Scheme, SystemParams};

/// Plain Nelder-Mead with the standard coefficients.
fn nelder_mead(f: &dyn Fn(&[f64]) -> f64, x0: &[f64], scale: f64, iters: usize) -> (Vec<f64>, f64) {
    let n = x0.len();
    let mut simplex: Vec<Vec<f64>> = vec![x0.to_vec()];
    for i in 0..n {
        let mut v = x0.to_vec();
        v[i] += scale;
        simplex.push(v);
    }
    let mut vals: Vec<f64> = simplex.iter().map(|v| f(v)).collect();
    for _ in 0..iters {
        let mut idx: Vec<usize> = (0..=n).collect();
        idx.sort_by(|&a, &b| vals[a].partial_cmp(&vals[b]).unwrap());
        simplex = idx.iter().map(|&i| simplex[i].clone()).collect();
        vals = idx.iter().map(|&i| vals[i]).collect();
        if (vals[n] - vals[0]).abs() <= 1e-13 * vals[0].abs().max(1.0) {
            break;
        }
        let centroid: Vec<f64> = (0..n).map(|j| simplex[..n].iter().map(|v| v[j]).sum::<f64>() / n as f64).collect();
        let along = |t: f64| -> Vec<f64> { (0..n).map(|j| centroid[j] + t * (simplex[n][j] - centroid[j])).collect() };
        let xr = along(-1.0);
        let fr = f(&xr);
        if fr < vals[0] {
            let xe = along(-2.0);
            let fe = f(&xe);
            if fe < fr {
                simplex[n] = xe;
                vals[n] = fe;
            } else {
                simplex[n] = xr;
                vals[n] = fr;
            }
        } else if fr < vals[n - 1] {
            simplex[n] = xr;
            vals[n] = fr;
        } else {
            let xc = if fr < vals[n] { along(-0.5) } else { along(0.5) };
            let fc = f(&xc);
            if fc < vals[n].min(fr) {
                simplex[n] = xc;
                vals[n] = fc;
            } else {
                for i in 1..=n {
                    simplex[i] = (0..n).map(|j| simplex[0][j] + 0.5 * (simplex[i][j] - simplex[0][j])).collect();
                    vals[i] = f(&simplex[i]);
                }
            }
        }
    }
    let best = (0..=n).min_by(|&a, &b| vals[a].partial_cmp(&vals[b]).unwrap()).unwrap();
    (simplex[best].clone(), vals[best])
}

/// Decodes log-powers (and η for the TDD schemes), clamped to the budgets.
fn decode(s: Scheme, p: &SystemParams, x: &[f64]) -> PowerAllocation {
    let b = |v: f64, max: f64| v.exp().min(max);
    PowerAllocation {
        p_d: b(x[0], p.p_an_max),
        p_u: b(x[1], p.p_ue_max),
        p_bh_d: b(x[2], p.p_bh_d_max),
        p_bh_u: b(x[3], p.p_an_max),
        p_u_d2d: 0.0,
        eta: if s == Scheme::FullDuplex { 0.5 } else { x[4].clamp(0.0, 1.0) },
    }
}

/// Negated min-form sum-rate plus an L∞ penalty on normalized violations.
fn penalized(s: Scheme, p: &SystemParams, x: &[f64], mu: f64) -> f64 {
    let a = decode(s, p, x);
    let r = rates_unchecked(s, p, &a);
    let report = constraints_unchecked(s, p, &a, 0.0);
    let worst = report
        .values
        .iter()
        .map(|&(l, v)| if l == ConstraintLabel::PwrAn { v / p.p_an_max } else { v })
        .fold(0.0f64, f64::max);
    -r.c_s + mu * worst
}

fn direct_max(s: Scheme, p: &SystemParams, starts: usize) -> f64 {
    let dim = if s == Scheme::FullDuplex { 4 } else { 5 };
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut best = f64::NEG_INFINITY;
    for _ in 0..starts {
        let budgets = [p.p_an_max, p.p_ue_max, p.p_bh_d_max, p.p_an_max];
        let mut x: Vec<f64> = budgets.iter().map(|b| rng.random_range(-3.0..b.ln())).collect();
        if dim == 5 {
            x.push(rng.random_range(0.1..0.9));
        }
        // restarts shake the simplex loose from penalty ridges
        for mu in [1e2, 1e3, 1e4, 1e4, 1e4, 1e5, 1e5, 1e5] {
            x = nelder_mead(&|v| penalized(s, p, v, mu), &x, 0.3, 4000).0;
        }
        let a = decode(s, p, &x);
        if constraints_unchecked(s, p, &a, 1e-6).feasible {
            best = best.max(rates_unchecked(s, p, &a).c_s);
        }
    }
    best
}

#[test]
fn epigraph_matches_direct_search() {
    let grid = [(Scheme::FullDuplex, 3), (Scheme::HalfDuplex, 3), (Scheme::HybridRelay, 5)];
    for (s, k_an) in grid {
        let p = SystemParams { m_bh_t: 2, m_bh_r: 4, k_an, ..SystemParams::table1() };
        let epi = optimize(s, &p, &OptimizerOptions::default()).unwrap().best_rates.c_s;
        let direct = direct_max(s, &p, 60);
        let rel = (epi - direct).abs() / direct;
        println!("{s} K_AN={k_an}: epigraph {epi:.6}, direct {direct:.6}, rel {rel:.2e}");
        assert!(rel <= 1e-3, "{s} K_AN={k_an}: {epi} vs {direct}");
    }
}

#[test]
fn epigraph_off_still_feasible() {
    let p = SystemParams { m_bh_t: 2, m_bh_r: 4, k_an: 3, ..SystemParams::table1() };
    let opts = OptimizerOptions { epigraph_enabled: false, n_starts: 20, ..OptimizerOptions::default() };
    let r = optimize(Scheme::FullDuplex, &p, &opts).unwrap();
    assert!(r.best_report.feasible);
}
