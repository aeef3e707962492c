//! Closed-form SINRs and achievable rates for the three schemes.
//!
//! Rates are spectral efficiencies in bits/s/Hz, `log2(1 + SINR)` per stream
//! times the stream count and, for the TDD schemes, the slot fraction.

use std::f64::consts::LN_2;

use crate::error::{Error, Result};
use crate::params::{validate, PowerAllocation, Scheme, SystemParams};

/// Per-stream SINRs, linear.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SinrSet {
    pub sinr_d: f64,
    pub sinr_u: f64,
    pub sinr_d2d: f64,
    pub sinr_bh_d: f64,
    pub sinr_bh_u: f64,
}

/// User and backhaul rates of one scheme at one allocation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateBreakdown {
    pub scheme: Scheme,
    pub alloc: PowerAllocation,
    pub c_d: f64,
    pub c_u: f64,
    pub c_ic: f64,
    /// `c_d + c_u + c_ic`; backhaul rates are never part of it.
    pub c_s: f64,
    pub c_bh_d: f64,
    pub c_bh_u: f64,
}

/// The pieces the sum-rate is assembled from.
///
/// `relay_dl` and `relay_ul` are the slot-weighted per-stream rates whose
/// minimum is carried by each AN-relayed pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateTerms {
    pub c_d: f64,
    pub c_u: f64,
    pub c_d2d: f64,
    pub relay_dl: f64,
    pub relay_ul: f64,
    pub c_bh_d: f64,
    pub c_bh_u: f64,
}

impl RateTerms {
    pub fn c_ic(&self, k_an: u32) -> f64 {
        self.c_d2d + k_an as f64 * self.relay_dl.min(self.relay_ul)
    }
}

/// Spectral efficiency of one stream.
#[inline]
pub fn shannon(sinr: f64) -> f64 {
    sinr.ln_1p() / LN_2
}

/// Slot weights applied to DL-side and UL-side transmissions.
pub fn slot_weights(scheme: Scheme, eta: f64) -> (f64, f64) {
    match scheme {
        Scheme::FullDuplex => (1.0, 1.0),
        Scheme::HalfDuplex | Scheme::HybridRelay => (eta, 1.0 - eta),
    }
}

fn ratio(num: f64, den: f64) -> f64 {
    if num <= 0.0 {
        0.0
    } else {
        num / den
    }
}

fn check(scheme: Scheme, p: &SystemParams) -> Result<()> {
    let v = validate(p, scheme);
    if v.is_empty() {
        Ok(())
    } else {
        Err(Error::Structural(v))
    }
}

/// SINRs per stream for `scheme`.
pub fn sinr_set(scheme: Scheme, p: &SystemParams, a: &PowerAllocation) -> Result<SinrSet> {
    check(scheme, p)?;
    Ok(sinr_set_unchecked(scheme, p, a))
}

/// As [`sinr_set`] without re-running [`validate`]; callers must have done so.
pub fn sinr_set_unchecked(scheme: Scheme, p: &SystemParams, a: &PowerAllocation) -> SinrSet {
    let dof = p.dof(scheme);
    let s2 = p.sigma_n2;
    let dl_streams = (p.d - p.k_d2d) as f64;
    let kd = p.k_d2d as f64;
    let mt = p.m_bh_t as f64;
    let mr = p.m_bh_r as f64;

    let sinr_d2d = if p.k_d2d == 0 || a.p_u_d2d <= 0.0 {
        0.0
    } else {
        1.0 / (kd - 1.0 + s2 / (p.l_ud * a.p_u_d2d) + a.p_u / a.p_u_d2d)
    };
    let dl_den = |interference: f64| {
        if dl_streams > 0.0 {
            dl_streams * (s2 + interference)
        } else {
            f64::INFINITY
        }
    };
    let bh = |dof: i64, power: f64, streams: f64, noise: f64| {
        if streams > 0.0 {
            ratio(p.l_bh * dof as f64 * power, streams * noise)
        } else {
            0.0
        }
    };

    match scheme {
        Scheme::FullDuplex => {
            let iui = p.l_ud * (p.u - p.k_d2d) as f64 * a.p_u + p.l_ud * kd * a.p_u_d2d;
            let si = s2 + p.alpha * (a.p_d + a.p_bh_u);
            SinrSet {
                sinr_d: ratio(p.l_ue * dof.dl as f64 * a.p_d, dl_den(iui)),
                sinr_u: ratio(p.l_ue * dof.ul as f64 * a.p_u, si),
                sinr_d2d,
                sinr_bh_d: bh(dof.bh_rx, a.p_bh_d, mr, si),
                sinr_bh_u: bh(dof.bh_tx, a.p_bh_u, mt, s2),
            }
        }
        Scheme::HalfDuplex => SinrSet {
            sinr_d: ratio(dof.dl as f64 * p.l_ue * a.p_d, dl_den(0.0)),
            sinr_u: ratio(dof.ul as f64 * p.l_ue * a.p_u, s2),
            sinr_d2d,
            sinr_bh_d: bh(dof.bh_rx, a.p_bh_d, mr, s2),
            sinr_bh_u: bh(dof.bh_tx, a.p_bh_u, mt, s2),
        },
        Scheme::HybridRelay => SinrSet {
            sinr_d: ratio(dof.dl as f64 * p.l_ue * a.p_d, dl_den(0.0)),
            sinr_u: ratio(dof.ul as f64 * p.l_ue * a.p_u, s2 + p.alpha * a.p_bh_u),
            sinr_d2d,
            sinr_bh_d: bh(dof.bh_rx, a.p_bh_d, mr, s2 + p.alpha * a.p_d),
            sinr_bh_u: bh(dof.bh_tx, a.p_bh_u, mt, s2),
        },
    }
}

/// Rate terms without validation.
pub fn rate_terms_unchecked(scheme: Scheme, p: &SystemParams, a: &PowerAllocation) -> RateTerms {
    let s = sinr_set_unchecked(scheme, p, a);
    let (w_dl, w_ul) = slot_weights(scheme, a.eta);
    let r_d = shannon(s.sinr_d);
    let r_u = shannon(s.sinr_u);
    let n_d = p.dl_outgoing().max(0) as f64;
    let n_u = p.ul_outgoing().max(0) as f64;
    let mt = p.m_bh_t as f64;
    let mr = p.m_bh_r as f64;
    // incoming backhaul shares the UL slot in HD, the DL slot in RL
    let (w_bh_d, w_bh_u) = match scheme {
        Scheme::FullDuplex => (1.0, 1.0),
        Scheme::HalfDuplex => (1.0 - a.eta, a.eta),
        Scheme::HybridRelay => (a.eta, 1.0 - a.eta),
    };
    RateTerms {
        c_d: w_dl * n_d * r_d,
        c_u: w_ul * n_u * r_u,
        c_d2d: w_ul * p.k_d2d as f64 * shannon(s.sinr_d2d),
        relay_dl: w_dl * r_d,
        relay_ul: w_ul * r_u,
        c_bh_d: w_bh_d * mr * shannon(s.sinr_bh_d),
        c_bh_u: w_bh_u * mt * shannon(s.sinr_bh_u),
    }
}

/// Rates of `scheme` at `alloc`.
pub fn rates(scheme: Scheme, p: &SystemParams, a: &PowerAllocation) -> Result<RateBreakdown> {
    check(scheme, p)?;
    Ok(rates_unchecked(scheme, p, a))
}

pub fn rates_unchecked(scheme: Scheme, p: &SystemParams, a: &PowerAllocation) -> RateBreakdown {
    let t = rate_terms_unchecked(scheme, p, a);
    let c_ic = t.c_ic(p.k_an);
    RateBreakdown {
        scheme,
        alloc: *a,
        c_d: t.c_d,
        c_u: t.c_u,
        c_ic,
        c_s: t.c_d + t.c_u + c_ic,
        c_bh_d: t.c_bh_d,
        c_bh_u: t.c_bh_u,
    }
}
