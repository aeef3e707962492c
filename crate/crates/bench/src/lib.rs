//! Shared fixtures for the benchmarks.

use selfbh_core::{PowerAllocation, SystemParams};

/// Reference cell with two AN-relayed pairs, so every rate term is active.
pub fn cell() -> SystemParams {
    SystemParams { k_an: 2, ..SystemParams::table1() }
}

/// An interior allocation, comfortably inside every budget.
pub fn interior(p: &SystemParams) -> PowerAllocation {
    PowerAllocation {
        p_d: 0.4 * p.p_an_max,
        p_u: 0.5 * p.p_ue_max,
        p_bh_d: 0.5 * p.p_bh_d_max,
        p_bh_u: 0.4 * p.p_an_max,
        p_u_d2d: 0.0,
        eta: 0.5,
    }
}
