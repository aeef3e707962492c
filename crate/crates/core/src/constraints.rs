//! Inequality constraints `g(λ) ≤ 0` with per-constraint slack.

use std::fmt;

use crate::error::{Error, Result};
use crate::params::{validate, PowerAllocation, Scheme, SystemParams};
use crate::rates::rate_terms_unchecked;

pub const DEFAULT_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ConstraintLabel {
    BhDl,
    BhUl,
    PwrAn,
    PwrUeUl,
    PwrUeD2d,
    PwrBn,
    RhoLo,
    RhoHi,
    EtaLo,
    EtaHi,
}

impl ConstraintLabel {
    pub fn as_str(self) -> &'static str {
        match self {
            ConstraintLabel::BhDl => "bh_dl",
            ConstraintLabel::BhUl => "bh_ul",
            ConstraintLabel::PwrAn => "pwr_an",
            ConstraintLabel::PwrUeUl => "pwr_ue_ul",
            ConstraintLabel::PwrUeD2d => "pwr_ue_d2d",
            ConstraintLabel::PwrBn => "pwr_bn",
            ConstraintLabel::RhoLo => "rho_lo",
            ConstraintLabel::RhoHi => "rho_hi",
            ConstraintLabel::EtaLo => "eta_lo",
            ConstraintLabel::EtaHi => "eta_hi",
        }
    }
}

impl fmt::Display for ConstraintLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintReport {
    /// Constraint values in a fixed order; each is satisfied when `≤ tol`.
    pub values: Vec<(ConstraintLabel, f64)>,
    pub max_violation: f64,
    pub feasible: bool,
    pub tol: f64,
}

impl ConstraintReport {
    pub fn get(&self, label: ConstraintLabel) -> Option<f64> {
        self.values.iter().find(|(l, _)| *l == label).map(|&(_, v)| v)
    }

    /// Labels whose value exceeds the tolerance.
    pub fn violated(&self) -> impl Iterator<Item = ConstraintLabel> + '_ {
        self.values.iter().filter(|(_, v)| *v > self.tol).map(|&(l, _)| l)
    }
}

/// Evaluates every constraint that applies to the configuration.
pub fn constraints(
    scheme: Scheme,
    p: &SystemParams,
    a: &PowerAllocation,
    tol: f64,
) -> Result<ConstraintReport> {
    let v = validate(p, scheme);
    if !v.is_empty() {
        return Err(Error::Structural(v));
    }
    Ok(constraints_unchecked(scheme, p, a, tol))
}

pub fn constraints_unchecked(
    scheme: Scheme,
    p: &SystemParams,
    a: &PowerAllocation,
    tol: f64,
) -> ConstraintReport {
    use ConstraintLabel::*;

    let t = rate_terms_unchecked(scheme, p, a);
    let an_power = match scheme {
        // DL and backhaul TX never overlap in time
        Scheme::HybridRelay => a.p_d.max(a.p_bh_u),
        Scheme::FullDuplex | Scheme::HalfDuplex => a.p_d + a.p_bh_u,
    };

    let mut values = Vec::with_capacity(10);
    values.push((BhDl, t.c_d - t.c_bh_d));
    values.push((BhUl, t.c_u - t.c_bh_u));
    values.push((PwrAn, an_power - p.p_an_max));
    values.push((PwrUeUl, a.p_u - p.p_ue_max));
    if p.k_d2d > 0 {
        values.push((PwrUeD2d, a.p_u_d2d - p.p_ue_max));
    }
    values.push((PwrBn, a.p_bh_d - p.p_bh_d_max));
    if p.rate_ratio_active() {
        values.push((RhoLo, p.rho_min * t.c_d - t.c_u));
        values.push((RhoHi, t.c_u - p.rho_max * t.c_d));
    }
    if scheme.uses_time_split() {
        values.push((EtaLo, -a.eta));
        values.push((EtaHi, a.eta - 1.0));
    }

    let max_violation = values.iter().map(|&(_, v)| v).fold(f64::NEG_INFINITY, f64::max);
    ConstraintReport { feasible: max_violation <= tol, values, max_violation, tol }
}
