//! Multi-start constrained sum-rate maximization and the max-power baseline.
//!
//! Powers are optimized in log space between a floor far below each budget
//! and the budget itself, so the box bounds carry the per-node power limits.
//! The AN budget (a sum for FD/HD), the backhaul capacity constraints, the
//! rate-ratio bounds and, when AN-relayed pairs exist, the two epigraph
//! constraints of the `min{·,·}` term are handed to an SLSQP local solver.
//! Gradients are central finite differences.

use std::cell::Cell;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use slsqp::{minimize, FailStatus, StopTols, SuccessStatus};

use crate::constraints::{constraints_unchecked, ConstraintLabel, ConstraintReport};
use crate::error::{Error, Result};
use crate::params::{validate, PowerAllocation, Scheme, SystemParams};
use crate::rates::{rate_terms_unchecked, rates_unchecked, RateBreakdown, RateTerms};

/// Lower power bound relative to each budget; stands in for zero in log space.
const POWER_FLOOR: f64 = 1e-12;
/// Lower edge of the log-uniform start distribution, mW.
const START_POWER_MIN: f64 = 1e-3;
const FD_STEP: f64 = 1e-6;
/// Upper box bound for the epigraph variable, bits/s/Hz per stream.
const EPIGRAPH_MAX: f64 = 1e3;
const REPAIR_ROUNDS: usize = 40;
const BISECTION_STEPS: usize = 60;

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerOptions {
    pub n_starts: usize,
    pub rng_seed: u64,
    /// Objective evaluations allowed per start.
    pub max_iterations: usize,
    pub feasibility_tol: f64,
    pub objective_tol: f64,
    /// Epigraph reformulation of the relayed-pair `min` term. When off, the
    /// nonsmooth objective goes to the solver as is.
    pub epigraph_enabled: bool,
}

impl Default for OptimizerOptions {
    fn default() -> Self {
        Self {
            n_starts: 50,
            rng_seed: 42,
            max_iterations: 500,
            feasibility_tol: 1e-6,
            objective_tol: 1e-9,
            epigraph_enabled: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StartStatus {
    /// Solver converged to a point satisfying every constraint.
    Converged,
    /// Evaluation budget exhausted; discarded.
    NotConverged,
    /// Solver stopped on an error; discarded.
    SolverFailed,
    /// Solver result violates the constraints even after repair; discarded.
    Infeasible,
    /// The solver failed from the raw start and bisection could not repair it.
    Unrepairable,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StartSummary {
    pub index: usize,
    pub status: StartStatus,
    /// Sum-rate of the returned point, when it is feasible.
    pub objective: Option<f64>,
    pub feasible: bool,
    pub evaluations: usize,
}

#[derive(Debug, Clone)]
pub struct OptResult {
    pub best_alloc: PowerAllocation,
    pub best_rates: RateBreakdown,
    pub best_report: ConstraintReport,
    pub best_start: usize,
    pub starts: Vec<StartSummary>,
    pub converged_count: usize,
}

struct Attempt {
    status: StartStatus,
    alloc: Option<PowerAllocation>,
    evaluations: usize,
}

impl Attempt {
    fn succeeded(&self) -> bool {
        self.status == StartStatus::Converged && self.alloc.is_some()
    }
}

/// Decision-vector layout for one (scheme, params) pair.
struct Problem<'a> {
    scheme: Scheme,
    p: &'a SystemParams,
    has_d2d: bool,
    has_eta: bool,
    epigraph: bool,
    lower: Vec<f64>,
    upper: Vec<f64>,
    evals: Cell<usize>,
}

const I_PD: usize = 0;
const I_PU: usize = 1;
const I_PBHD: usize = 2;
const I_PBHU: usize = 3;

#[derive(Clone, Copy)]
enum Con {
    BhDl,
    BhUl,
    AnBudget,
    RhoLo,
    RhoHi,
    EpiDl,
    EpiUl,
}

impl<'a> Problem<'a> {
    fn new(scheme: Scheme, p: &'a SystemParams, epigraph: bool) -> Self {
        let has_d2d = p.k_d2d > 0;
        let has_eta = scheme.uses_time_split();
        let epigraph = epigraph && p.k_an > 0;
        let mut budgets = vec![p.p_an_max, p.p_ue_max, p.p_bh_d_max, p.p_an_max];
        if has_d2d {
            budgets.push(p.p_ue_max);
        }
        let mut lower: Vec<f64> = budgets.iter().map(|b| (b * POWER_FLOOR).ln()).collect();
        let mut upper: Vec<f64> = budgets.iter().map(|b| b.ln()).collect();
        if has_eta {
            lower.push(0.0);
            upper.push(1.0);
        }
        if epigraph {
            lower.push(0.0);
            upper.push(EPIGRAPH_MAX);
        }
        Self { scheme, p, has_d2d, has_eta, epigraph, lower, upper, evals: Cell::new(0) }
    }

    #[cfg(test)]
    fn dim(&self) -> usize {
        self.lower.len()
    }

    fn i_d2d(&self) -> usize {
        4
    }

    fn i_eta(&self) -> usize {
        4 + self.has_d2d as usize
    }

    fn i_t(&self) -> usize {
        4 + self.has_d2d as usize + self.has_eta as usize
    }

    fn alloc(&self, x: &[f64]) -> PowerAllocation {
        PowerAllocation {
            p_d: x[I_PD].exp(),
            p_u: x[I_PU].exp(),
            p_bh_d: x[I_PBHD].exp(),
            p_bh_u: x[I_PBHU].exp(),
            p_u_d2d: if self.has_d2d { x[self.i_d2d()].exp() } else { 0.0 },
            eta: if self.has_eta { x[self.i_eta()] } else { PowerAllocation::FD_ETA },
        }
    }

    fn encode(&self, a: &PowerAllocation, t: f64) -> Vec<f64> {
        let mut x = vec![a.p_d.ln(), a.p_u.ln(), a.p_bh_d.ln(), a.p_bh_u.ln()];
        if self.has_d2d {
            x.push(a.p_u_d2d.ln());
        }
        if self.has_eta {
            x.push(a.eta);
        }
        if self.epigraph {
            x.push(t);
        }
        for ((v, lo), hi) in x.iter_mut().zip(&self.lower).zip(&self.upper) {
            *v = v.clamp(*lo, *hi);
        }
        x
    }

    fn terms(&self, x: &[f64]) -> RateTerms {
        self.evals.set(self.evals.get() + 1);
        rate_terms_unchecked(self.scheme, self.p, &self.alloc(x))
    }

    fn constraint_set(&self) -> Vec<Con> {
        let mut v = vec![Con::BhDl, Con::BhUl];
        if self.scheme != Scheme::HybridRelay {
            v.push(Con::AnBudget);
        }
        if self.p.rate_ratio_active() {
            v.push(Con::RhoLo);
            v.push(Con::RhoHi);
        }
        if self.epigraph {
            v.push(Con::EpiDl);
            v.push(Con::EpiUl);
        }
        v
    }

    /// Negated sum-rate (epigraph form when enabled).
    fn objective(&self, x: &[f64]) -> f64 {
        let t = self.terms(x);
        let relayed = if self.epigraph {
            x[self.i_t()]
        } else {
            t.relay_dl.min(t.relay_ul)
        };
        -(t.c_d + t.c_u + t.c_d2d + self.p.k_an as f64 * relayed)
    }

    fn constraint(&self, c: Con, x: &[f64]) -> f64 {
        let p = self.p;
        match c {
            Con::AnBudget => (x[I_PD].exp() + x[I_PBHU].exp()) / p.p_an_max - 1.0,
            _ => {
                let t = self.terms(x);
                match c {
                    Con::BhDl => t.c_d - t.c_bh_d,
                    Con::BhUl => t.c_u - t.c_bh_u,
                    Con::RhoLo => p.rho_min * t.c_d - t.c_u,
                    Con::RhoHi => t.c_u - p.rho_max * t.c_d,
                    Con::EpiDl => x[self.i_t()] - t.relay_dl,
                    Con::EpiUl => x[self.i_t()] - t.relay_ul,
                    Con::AnBudget => unreachable!(),
                }
            }
        }
    }

    fn with_gradient(&self, f: impl Fn(&[f64]) -> f64, x: &[f64], grad: Option<&mut [f64]>) -> f64 {
        let value = f(x);
        if let Some(g) = grad {
            let mut probe = x.to_vec();
            for i in 0..x.len() {
                let h = FD_STEP * x[i].abs().max(1.0);
                probe[i] = x[i] + h;
                let fp = f(&probe);
                probe[i] = x[i] - h;
                let fm = f(&probe);
                probe[i] = x[i];
                g[i] = (fp - fm) / (2.0 * h);
            }
        }
        value
    }

    /// Scales the AN power pair onto its budget.
    fn scale_an(&self, mut a: PowerAllocation) -> PowerAllocation {
        let p = self.p;
        match self.scheme {
            Scheme::HybridRelay => {
                a.p_d = a.p_d.min(p.p_an_max);
                a.p_bh_u = a.p_bh_u.min(p.p_an_max);
            }
            _ => {
                let total = a.p_d + a.p_bh_u;
                if total > p.p_an_max {
                    let s = p.p_an_max / total * (1.0 - 1e-12);
                    a.p_d *= s;
                    a.p_bh_u *= s;
                }
            }
        }
        a
    }

    /// Pulls a point into the feasible set by shrinking offending powers.
    ///
    /// After [`Self::scale_an`], DL power is bisected down while the DL
    /// backhaul or the lower rate-ratio bound is violated, and UL power
    /// likewise for the UL backhaul and the upper ratio bound.
    fn repair(&self, a: PowerAllocation, tol: f64) -> Option<PowerAllocation> {
        let p = self.p;
        let mut a = self.scale_an(a);
        let floor_d = p.p_an_max * POWER_FLOOR;
        let floor_u = p.p_ue_max * POWER_FLOOR;
        for _ in 0..REPAIR_ROUNDS {
            let report = constraints_unchecked(self.scheme, p, &a, tol);
            if report.feasible {
                return Some(a);
            }
            let bad: Vec<_> = report.violated().collect();
            let dl_bad = |l: ConstraintLabel| matches!(l, ConstraintLabel::BhDl | ConstraintLabel::RhoLo);
            let ul_bad = |l: ConstraintLabel| matches!(l, ConstraintLabel::BhUl | ConstraintLabel::RhoHi);
            if let Some(&label) = bad.iter().find(|l| dl_bad(**l)) {
                a.p_d = self.shrink(a, label, tol, floor_d, |a, v| a.p_d = v, a.p_d);
            } else if let Some(&label) = bad.iter().find(|l| ul_bad(**l)) {
                a.p_u = self.shrink(a, label, tol, floor_u, |a, v| a.p_u = v, a.p_u);
            } else {
                return None;
            }
        }
        constraints_unchecked(self.scheme, p, &a, tol).feasible.then_some(a)
    }

    /// Largest value in `[floor, current]` (log-bisected) satisfying `label`.
    fn shrink(
        &self,
        a: PowerAllocation,
        label: ConstraintLabel,
        tol: f64,
        floor: f64,
        set: impl Fn(&mut PowerAllocation, f64),
        current: f64,
    ) -> f64 {
        let ok = |v: f64| {
            let mut trial = a;
            set(&mut trial, v);
            let r = constraints_unchecked(self.scheme, self.p, &trial, tol);
            r.get(label).is_none_or(|g| g <= 0.0)
        };
        if ok(current) {
            return current;
        }
        if !ok(floor) {
            return floor;
        }
        let (mut lo, mut hi) = (floor.ln(), current.ln());
        for _ in 0..BISECTION_STEPS {
            let mid = 0.5 * (lo + hi);
            if ok(mid.exp()) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        lo.exp()
    }

    fn random_start(&self, rng: &mut ChaCha8Rng) -> PowerAllocation {
        let p = self.p;
        let mut draw = |budget: f64| {
            let lo = START_POWER_MIN.min(budget).ln();
            rng.random_range(lo..=budget.ln()).exp()
        };
        let p_d = draw(p.p_an_max);
        let p_u = draw(p.p_ue_max);
        let p_bh_d = draw(p.p_bh_d_max);
        let p_bh_u = draw(p.p_an_max);
        let p_u_d2d = if self.has_d2d { draw(p.p_ue_max) } else { 0.0 };
        let eta = if self.has_eta {
            rng.random_range(0.0..1.0)
        } else {
            PowerAllocation::FD_ETA
        };
        PowerAllocation { p_d, p_u, p_bh_d, p_bh_u, p_u_d2d, eta }
    }

    fn solve(&self, start: &PowerAllocation, opts: &OptimizerOptions) -> Attempt {
        let t0 = rate_terms_unchecked(self.scheme, self.p, start);
        let x0 = self.encode(start, t0.relay_dl.min(t0.relay_ul));
        let bounds: Vec<(f64, f64)> = self.lower.iter().copied().zip(self.upper.iter().copied()).collect();

        let objective = |x: &[f64], g: Option<&mut [f64]>, _: &mut ()| {
            self.with_gradient(|x| self.objective(x), x, g)
        };
        let cons: Vec<_> = self
            .constraint_set()
            .into_iter()
            .map(|c| move |x: &[f64], g: Option<&mut [f64]>, _: &mut ()| self.with_gradient(|x| self.constraint(c, x), x, g))
            .collect();
        let stop = StopTols {
            ftol_rel: opts.objective_tol,
            xtol_rel: opts.objective_tol,
            ..StopTols::default()
        };

        self.evals.set(0);
        let outcome = minimize(objective, &x0, &bounds, &cons, (), opts.max_iterations, Some(stop));
        let evaluations = self.evals.get();
        let (status, x) = match outcome {
            Ok((SuccessStatus::MaxEvalReached | SuccessStatus::MaxTimeReached, x, _)) => (StartStatus::NotConverged, x),
            Ok((_, x, _)) => (StartStatus::Converged, x),
            // the line search stalls on the active set near most optima; the
            // point is kept when it survives the feasibility check below
            Err((FailStatus::RoundoffLimited, x, _)) => (StartStatus::Converged, x),
            Err((_, x, _)) => (StartStatus::SolverFailed, x),
        };
        let alloc = self.alloc(&x);
        let alloc = if constraints_unchecked(self.scheme, self.p, &alloc, opts.feasibility_tol).feasible {
            Some(alloc)
        } else if status == StartStatus::Converged {
            self.repair(alloc, opts.feasibility_tol)
        } else {
            None
        };
        match (status, alloc) {
            (StartStatus::Converged, None) => Attempt { status: StartStatus::Infeasible, alloc: None, evaluations },
            (status, alloc) => Attempt { status, alloc, evaluations },
        }
    }

    /// One multi-start run.
    ///
    /// The solver starts from the random draw with its AN pair scaled onto
    /// the budget and copes with the remaining violations itself. Only when
    /// that fails is the draw repaired by bisection and solved again: the
    /// repaired points sit on the boundary of a shrunken power region where
    /// the solver rarely makes progress, so they are a fallback rather than
    /// the first choice.
    fn run_start(&self, index: usize, opts: &OptimizerOptions) -> (StartSummary, Option<PowerAllocation>) {
        let mut rng = ChaCha8Rng::seed_from_u64(opts.rng_seed);
        rng.set_stream(index as u64);
        let raw = self.random_start(&mut rng);

        let mut attempt = self.solve(&self.scale_an(raw), opts);
        if !attempt.succeeded() {
            let spent = attempt.evaluations;
            attempt = match self.repair(raw, opts.feasibility_tol) {
                Some(start) => self.solve(&start, opts),
                None => Attempt { status: StartStatus::Unrepairable, alloc: None, evaluations: 0 },
            };
            attempt.evaluations += spent;
        }
        let objective = attempt.alloc.map(|a| rates_unchecked(self.scheme, self.p, &a).c_s);
        let summary = StartSummary {
            index,
            status: attempt.status,
            objective,
            feasible: attempt.alloc.is_some(),
            evaluations: attempt.evaluations,
        };
        let best = if attempt.succeeded() { attempt.alloc } else { None };
        (summary, best)
    }
}

fn check_structure(scheme: Scheme, p: &SystemParams) -> Result<()> {
    let v = validate(p, scheme);
    if v.is_empty() {
        Ok(())
    } else {
        Err(Error::Structural(v))
    }
}

/// Maximizes the sum-rate of `scheme` from `opts.n_starts` random starts.
///
/// Starts run in parallel, each on its own RNG stream of `opts.rng_seed`; the
/// best feasible converged start wins, ties going to the lowest index.
pub fn optimize(scheme: Scheme, p: &SystemParams, opts: &OptimizerOptions) -> Result<OptResult> {
    check_structure(scheme, p)?;
    if opts.n_starts == 0 || !(opts.feasibility_tol > 0.0) || !(opts.objective_tol > 0.0) {
        return Err(Error::InvalidSpec("optimizer needs n_starts ≥ 1 and positive tolerances".into()));
    }

    let outcomes: Vec<(StartSummary, Option<PowerAllocation>)> = (0..opts.n_starts)
        .into_par_iter()
        .map(|i| Problem::new(scheme, p, opts.epigraph_enabled).run_start(i, opts))
        .collect();

    let mut best: Option<(usize, f64, PowerAllocation)> = None;
    for (summary, alloc) in &outcomes {
        if let (Some(a), Some(obj)) = (alloc, summary.objective) {
            if best.as_ref().is_none_or(|(_, b, _)| obj > *b) {
                best = Some((summary.index, obj, *a));
            }
        }
    }
    let starts: Vec<StartSummary> = outcomes.into_iter().map(|(s, _)| s).collect();
    let converged_count = starts.iter().filter(|s| s.status == StartStatus::Converged).count();

    let Some((best_start, _, best_alloc)) = best else {
        let count = |st: StartStatus| starts.iter().filter(|s| s.status == st).count();
        return Err(Error::Infeasible {
            starts: opts.n_starts,
            detail: format!(
                "unrepairable {}, not converged {}, solver failed {}, infeasible {}",
                count(StartStatus::Unrepairable),
                count(StartStatus::NotConverged),
                count(StartStatus::SolverFailed),
                count(StartStatus::Infeasible)
            ),
        });
    };
    Ok(OptResult {
        best_alloc,
        best_rates: rates_unchecked(scheme, p, &best_alloc),
        best_report: constraints_unchecked(scheme, p, &best_alloc, opts.feasibility_tol),
        best_start,
        starts,
        converged_count,
    })
}

/// Unoptimized reference point: every node at full power, `η = 0.5`.
#[derive(Debug, Clone)]
pub struct Baseline {
    /// Rates at the max-power point as the formulas give them.
    pub raw: RateBreakdown,
    /// Delivered rates after capping by backhaul capacity and the rate ratio.
    pub rates: RateBreakdown,
    /// Constraints evaluated at the max-power point.
    pub report: ConstraintReport,
    pub clamped: bool,
}

/// The max-power allocation used by [`baseline`].
pub fn max_power_allocation(scheme: Scheme, p: &SystemParams) -> PowerAllocation {
    let an = match scheme {
        Scheme::HybridRelay => p.p_an_max,
        Scheme::FullDuplex | Scheme::HalfDuplex => p.p_an_max / 2.0,
    };
    PowerAllocation {
        p_d: an,
        p_u: p.p_ue_max,
        p_bh_d: p.p_bh_d_max,
        p_bh_u: an,
        p_u_d2d: if p.k_d2d > 0 { p.p_ue_max } else { 0.0 },
        eta: 0.5,
    }
}

/// Evaluates the max-power point and clamps what it can actually deliver.
///
/// Per-stream DL and UL rates are capped so that the outgoing traffic fits
/// the backhaul in each direction and the UL/DL ratio stays within
/// `[rho_min, rho_max]`. Relayed pairs see the same capped per-stream rates.
pub fn baseline(scheme: Scheme, p: &SystemParams) -> Result<Baseline> {
    check_structure(scheme, p)?;
    let alloc = max_power_allocation(scheme, p);
    let raw = rates_unchecked(scheme, p, &alloc);
    let report = constraints_unchecked(scheme, p, &alloc, crate::constraints::DEFAULT_TOL);
    let t = rate_terms_unchecked(scheme, p, &alloc);

    let n_d = p.dl_outgoing().max(0) as f64;
    let n_u = p.ul_outgoing().max(0) as f64;
    let mut dl = t.relay_dl;
    let mut ul = t.relay_ul;
    if n_d > 0.0 {
        dl = dl.min(t.c_bh_d / n_d);
    }
    if n_u > 0.0 {
        ul = ul.min(t.c_bh_u / n_u);
    }
    if p.rate_ratio_active() {
        ul = ul.min(p.rho_max * n_d * dl / n_u);
        dl = dl.min(n_u * ul / (p.rho_min * n_d));
    }
    let clamped = dl < t.relay_dl || ul < t.relay_ul;
    let c_d = n_d * dl;
    let c_u = n_u * ul;
    let c_ic = t.c_d2d + p.k_an as f64 * dl.min(ul);
    let rates = RateBreakdown { c_d, c_u, c_ic, c_s: c_d + c_u + c_ic, ..raw };
    Ok(Baseline { raw, rates, report, clamped })
}
