//! Monte-Carlo checks of the zero-forcing precoder and of the large-array
//! SINR approximations used by the rate formulas.
//!
//! Channels are i.i.d. circularly-symmetric complex Gaussian with per-row
//! gains. The precoder stacks the intended rows over (optionally) the SI
//! rows of the AN's own receive array and inverts the stack, so the receive
//! array sees an exact null.

use nalgebra::{Cholesky, DMatrix, Dyn};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::params::{validate, PowerAllocation, Scheme, SystemParams};
use crate::rates::sinr_set_unchecked;

/// Largest accepted condition number of `HH^H`.
pub const CONDITION_LIMIT: f64 = 1e10;
/// Share of rank-deficient draws tolerated before giving up.
const MAX_REJECT_FRACTION: f64 = 0.01;
/// Noise samples drawn per trial and link.
const NOISE_SAMPLES: usize = 64;

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelDraw {
    /// Intended rows, `m_t × n_t`.
    pub h_t: DMatrix<Complex64>,
    /// Rows of the AN's own receive array, `n_r × n_t`.
    pub h_s: DMatrix<Complex64>,
    /// Linear gains of the `m_t` intended rows followed by the `n_r` SI rows.
    pub l: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ZfMode {
    /// Null toward the SI rows as well as the other intended rows.
    FdNull,
    /// Intended rows only.
    Hd,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PrecoderSample {
    /// `n_t × m_t`.
    pub w: DMatrix<Complex64>,
    pub lambda: Vec<f64>,
}

fn complex_gaussian<R: Rng>(rng: &mut R) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

fn gaussian_rows<R: Rng>(rng: &mut R, gains: &[f64], cols: usize) -> DMatrix<Complex64> {
    let mut h = DMatrix::zeros(gains.len(), cols);
    for (i, g) in gains.iter().enumerate() {
        let s = g.sqrt();
        for j in 0..cols {
            h[(i, j)] = complex_gaussian(rng) * s;
        }
    }
    h
}

/// Draws intended and SI channels with the given row gains.
pub fn draw_channel(n_t: usize, n_r: usize, m_t: usize, gains: &[f64], seed: u64) -> Result<ChannelDraw> {
    draw_channel_with(&mut ChaCha8Rng::seed_from_u64(seed), n_t, n_r, m_t, gains)
}

pub fn draw_channel_with<R: Rng>(
    rng: &mut R,
    n_t: usize,
    n_r: usize,
    m_t: usize,
    gains: &[f64],
) -> Result<ChannelDraw> {
    if n_t == 0 || m_t == 0 {
        return Err(Error::Dimension(format!("n_t={n_t}, m_t={m_t} must be positive")));
    }
    if gains.len() != m_t + n_r {
        return Err(Error::Dimension(format!("{} gains for {} rows", gains.len(), m_t + n_r)));
    }
    if let Some(g) = gains.iter().find(|g| !(g.is_finite() && **g > 0.0)) {
        return Err(Error::Dimension(format!("gain {g} must be positive")));
    }
    let h_t = gaussian_rows(rng, &gains[..m_t], n_t);
    let h_s = gaussian_rows(rng, &gains[m_t..], n_t);
    Ok(ChannelDraw { h_t, h_s, l: gains.to_vec() })
}

fn stacked(draw: &ChannelDraw, mode: ZfMode) -> DMatrix<Complex64> {
    match mode {
        ZfMode::Hd => draw.h_t.clone(),
        ZfMode::FdNull => {
            let (m, n_r, n_t) = (draw.h_t.nrows(), draw.h_s.nrows(), draw.h_t.ncols());
            let mut h = DMatrix::zeros(m + n_r, n_t);
            h.rows_mut(0, m).copy_from(&draw.h_t);
            h.rows_mut(m, n_r).copy_from(&draw.h_s);
            h
        }
    }
}

/// Cholesky factor of `HH^H`, or `None` when the Gram matrix is too poorly
/// conditioned to trust.
fn gram_factor(h: &DMatrix<Complex64>) -> Option<Cholesky<Complex64, Dyn>> {
    let chol = Cholesky::new(h * h.adjoint())?;
    let diag = chol.l_dirty().diagonal();
    let (lo, hi) = diag.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), d| (lo.min(d.re), hi.max(d.re)));
    ((hi / lo).powi(2) <= CONDITION_LIMIT).then_some(chol)
}

/// `W = H^H (HH^H)^{-1} Λ`, with Λ keeping only the intended columns.
///
/// Returns `None` when the stacked channel is rank deficient at the
/// [`CONDITION_LIMIT`] threshold; callers redraw.
pub fn zf_precoder(draw: &ChannelDraw, mode: ZfMode) -> Result<Option<PrecoderSample>> {
    let (m, n_t) = (draw.h_t.nrows(), draw.h_t.ncols());
    let nulled = match mode {
        ZfMode::FdNull => draw.h_s.nrows(),
        ZfMode::Hd => 0,
    };
    if n_t <= m + nulled {
        return Err(Error::Dimension(format!("n_t={n_t} must exceed {} stacked rows", m + nulled)));
    }
    let h = stacked(draw, mode);
    let Some(chol) = gram_factor(&h) else {
        return Ok(None);
    };
    let dof = (n_t - m - nulled) as f64;
    let lambda: Vec<f64> = draw.l[..m].iter().map(|l| (l * dof).sqrt()).collect();
    let mut sel = DMatrix::zeros(h.nrows(), m);
    for (k, lk) in lambda.iter().enumerate() {
        sel[(k, k)] = Complex64::from(*lk);
    }
    let w = h.adjoint() * chol.solve(&sel);
    Ok(Some(PrecoderSample { w, lambda }))
}

/// Per-realization accuracy of one precoder.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ZfResidual {
    /// `‖H_s W‖_F / ‖H_s‖_F`; zero when there are no SI rows.
    pub si_null: f64,
    /// Largest `|(H_t W)_jk| / λ_k` over `j ≠ k`.
    pub off_diagonal: f64,
    /// Largest `|(H_t W)_kk − λ_k| / λ_k`.
    pub diagonal: f64,
}

pub fn residuals(draw: &ChannelDraw, pre: &PrecoderSample) -> ZfResidual {
    let si_norm = draw.h_s.norm();
    let si_null = if si_norm > 0.0 { (&draw.h_s * &pre.w).norm() / si_norm } else { 0.0 };
    let g = &draw.h_t * &pre.w;
    let mut off_diagonal = 0.0f64;
    let mut diagonal = 0.0f64;
    for k in 0..g.ncols() {
        let lk = pre.lambda[k];
        for j in 0..g.nrows() {
            if j == k {
                diagonal = diagonal.max((g[(j, k)] - lk).norm() / lk);
            } else {
                off_diagonal = off_diagonal.max(g[(j, k)].norm() / lk);
            }
        }
    }
    ZfResidual { si_null, off_diagonal, diagonal }
}

/// Recursive pairwise sum; order depends only on the slice length.
pub fn pairwise_sum(v: &[f64]) -> f64 {
    if v.len() <= 8 {
        v.iter().sum()
    } else {
        let (a, b) = v.split_at(v.len() / 2);
        pairwise_sum(a) + pairwise_sum(b)
    }
}

fn trial_rng(seed: u64, trial: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial as u64);
    rng
}

/// Runs `f` for each trial on its own RNG stream, redrawing while `f`
/// reports a rejection. Fails once rejections exceed 1% of the attempts.
fn run_trials<T: Send>(
    trials: usize,
    seed: u64,
    f: impl Fn(&mut ChaCha8Rng) -> Result<Option<T>> + Sync,
) -> Result<Vec<T>> {
    let out: Vec<Result<(T, usize)>> = (0..trials)
        .into_par_iter()
        .map(|i| {
            let mut rng = trial_rng(seed, i);
            let mut rejected = 0;
            loop {
                if let Some(v) = f(&mut rng)? {
                    return Ok((v, rejected));
                }
                rejected += 1;
                if rejected > 100 {
                    return Err(Error::RejectionCascade { rejected, attempted: rejected });
                }
            }
        })
        .collect();
    let mut values = Vec::with_capacity(trials);
    let mut rejected = 0;
    for r in out {
        let (v, k) = r?;
        values.push(v);
        rejected += k;
    }
    let attempted = trials + rejected;
    if rejected as f64 > MAX_REJECT_FRACTION * attempted as f64 {
        return Err(Error::RejectionCascade { rejected, attempted });
    }
    Ok(values)
}

#[derive(Debug, Clone, PartialEq)]
pub struct NormalizationReport {
    /// Mean `‖w_k‖²` per intended stream.
    pub mean_col_norm2: Vec<f64>,
    /// Mean over all streams.
    pub mean_norm2: f64,
    pub max_si_null: f64,
    pub max_off_diagonal: f64,
    pub max_diagonal: f64,
}

/// Averages column norms and worst-case residuals of the precoder over
/// independent draws.
pub fn normalization_check(
    n_t: usize,
    m_t: usize,
    n_r: usize,
    gains: &[f64],
    mode: ZfMode,
    trials: usize,
    seed: u64,
) -> Result<NormalizationReport> {
    let samples = run_trials(trials, seed, |rng| {
        let draw = draw_channel_with(rng, n_t, n_r, m_t, gains)?;
        Ok(zf_precoder(&draw, mode)?.map(|pre| {
            let norms: Vec<f64> = pre.w.column_iter().map(|c| c.norm_squared()).collect();
            (norms, residuals(&draw, &pre))
        }))
    })?;
    let mean_col_norm2: Vec<f64> = (0..m_t)
        .map(|k| {
            let col: Vec<f64> = samples.iter().map(|(n, _)| n[k]).collect();
            pairwise_sum(&col) / trials as f64
        })
        .collect();
    let mean_norm2 = mean_col_norm2.iter().sum::<f64>() / m_t as f64;
    let worst = |f: fn(&ZfResidual) -> f64| samples.iter().map(|(_, r)| f(r)).fold(0.0, f64::max);
    Ok(NormalizationReport {
        mean_col_norm2,
        mean_norm2,
        max_si_null: worst(|r| r.si_null),
        max_off_diagonal: worst(|r| r.off_diagonal),
        max_diagonal: worst(|r| r.diagonal),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MonteCarloCheck {
    pub empirical: f64,
    pub closed_form: f64,
    pub relative_error: f64,
}

fn relative_error(empirical: f64, closed_form: f64) -> f64 {
    if closed_form == 0.0 {
        if empirical == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        (empirical - closed_form).abs() / closed_form.abs()
    }
}

/// `E[Trace((H̆H̆^H)^{-1})]` for a standard `m × n_t` Gaussian `H̆`, against
/// `m / (n_t − m)`.
pub fn wishart_trace_check(n_t: usize, m: usize, trials: usize, seed: u64) -> Result<MonteCarloCheck> {
    if m == 0 || n_t <= m + 1 {
        return Err(Error::Dimension(format!("need n_t > m + 1, got n_t={n_t}, m={m}")));
    }
    let gains = vec![1.0; m];
    let traces = run_trials(trials, seed, |rng| {
        let h = gaussian_rows(rng, &gains, n_t);
        Ok(gram_factor(&h).map(|chol| {
            // Trace(A^{-1}) = ‖L^{-1}‖_F²
            let mut inv = DMatrix::<Complex64>::identity(m, m);
            chol.l_dirty().solve_lower_triangular_mut(&mut inv);
            inv.lower_triangle().norm_squared()
        }))
    })?;
    let empirical = pairwise_sum(&traces) / trials as f64;
    let closed_form = m as f64 / (n_t - m) as f64;
    Ok(MonteCarloCheck { empirical, closed_form, relative_error: relative_error(empirical, closed_form) })
}

/// One link of a scheme as seen by the validator.
#[derive(Debug, Clone, PartialEq)]
struct LinkModel {
    name: &'static str,
    /// Antennas on the AN side of the link.
    array: usize,
    /// Co-scheduled rows inverted alongside this link's streams.
    intended: usize,
    /// SI rows nulled on top of the intended ones.
    nulled: usize,
    streams: usize,
    gain: f64,
    stream_power: f64,
    /// Variances of the independent noise and interference components.
    impairments: Vec<f64>,
    closed_form: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinkCheck {
    pub link: &'static str,
    pub check: MonteCarloCheck,
    /// Relative deviation of each stream's mean gain from the all-stream
    /// mean. Reported only; no bound is implied.
    pub per_stream_deviation: Vec<f64>,
}

fn link_models(scheme: Scheme, p: &SystemParams, a: &PowerAllocation) -> Vec<LinkModel> {
    let closed = sinr_set_unchecked(scheme, p, a);
    let dof = p.dof(scheme);
    let (nt, nr) = (p.n_t as usize, p.n_r as usize);
    let kd = p.k_d2d as usize;
    let dl_streams = p.d as usize - kd;
    let ul_streams = p.u as usize - kd;
    let (mt, mr) = (p.m_bh_t as usize, p.m_bh_r as usize);
    let s2 = p.sigma_n2;
    let per = |power: f64, n: usize| if n > 0 { power / n as f64 } else { 0.0 };
    // transmit links null the AN's own receive array whenever it is
    // listening in the same slot
    let tx_null = match scheme {
        Scheme::HalfDuplex => 0,
        Scheme::FullDuplex | Scheme::HybridRelay => nr,
    };
    let (dl_imp, ul_imp, bh_d_imp) = match scheme {
        Scheme::FullDuplex => {
            let mut dl = vec![s2];
            dl.extend(std::iter::repeat_n(p.l_ud * a.p_u, p.u as usize - kd));
            dl.extend(std::iter::repeat_n(p.l_ud * a.p_u_d2d, kd));
            let si = vec![s2, p.alpha * a.p_d, p.alpha * a.p_bh_u];
            (dl, si.clone(), si)
        }
        Scheme::HalfDuplex => (vec![s2], vec![s2], vec![s2]),
        Scheme::HybridRelay => (vec![s2], vec![s2, p.alpha * a.p_bh_u], vec![s2, p.alpha * a.p_d]),
    };

    let link = |name, array: usize, dof: i64, nulled: usize, streams: usize, gain, stream_power, impairments, closed_form| {
        let stacked = array as i64 - dof;
        let nulled = if stacked - (nulled as i64) >= streams as i64 { nulled } else { 0 };
        LinkModel {
            name,
            array,
            intended: (stacked - nulled as i64).max(0) as usize,
            nulled,
            streams,
            gain,
            stream_power,
            impairments,
            closed_form,
        }
    };
    vec![
        link("dl", nt, dof.dl, tx_null, dl_streams, p.l_ue, per(a.p_d, dl_streams), dl_imp, closed.sinr_d),
        link("ul", nr, dof.ul, 0, ul_streams, p.l_ue, a.p_u, ul_imp, closed.sinr_u),
        link("bh_d", nr, dof.bh_rx, 0, mr, p.l_bh, per(a.p_bh_d, mr), bh_d_imp, closed.sinr_bh_d),
        link("bh_u", nt, dof.bh_tx, tx_null, mt, p.l_bh, per(a.p_bh_u, mt), vec![s2], closed.sinr_bh_u),
    ]
    .into_iter()
    .filter(|l| l.streams > 0 && l.intended >= l.streams && l.array > l.intended + l.nulled)
    .collect()
}

struct LinkTrial {
    gains: Vec<f64>,
    noise: f64,
}

fn link_trial(m: &LinkModel, rng: &mut ChaCha8Rng) -> Result<Option<LinkTrial>> {
    // unit gains; the path gain enters as a scalar
    let draw = draw_channel_with(rng, m.array, m.nulled, m.intended, &vec![1.0; m.intended + m.nulled])?;
    let mode = if m.nulled > 0 { ZfMode::FdNull } else { ZfMode::Hd };
    let Some(pre) = zf_precoder(&draw, mode)? else {
        return Ok(None);
    };
    let g = &draw.h_t * &pre.w;
    // each stream radiates exactly its allocated power
    let gains = (0..m.streams)
        .map(|k| g[(k, k)].norm_sqr() / pre.w.column(k).norm_squared())
        .collect();
    let mut noise = vec![0.0; NOISE_SAMPLES];
    for z in noise.iter_mut() {
        let mut s = Complex64::new(0.0, 0.0);
        for v in &m.impairments {
            s += complex_gaussian(rng) * v.sqrt();
        }
        *z = s.norm_sqr();
    }
    Ok(Some(LinkTrial { gains, noise: pairwise_sum(&noise) / NOISE_SAMPLES as f64 }))
}

/// Empirical per-stream SINR of every AN-side link of `scheme` against the
/// closed forms, with channels drawn at the full dimensions of `p`.
///
/// D2D links do not involve the AN arrays and are not covered.
pub fn empirical_sinr_check(
    p: &SystemParams,
    scheme: Scheme,
    a: &PowerAllocation,
    trials: usize,
    seed: u64,
) -> Result<Vec<LinkCheck>> {
    let v = validate(p, scheme);
    if !v.is_empty() {
        return Err(Error::Structural(v));
    }
    if trials < 1000 {
        return Err(Error::InvalidSpec(format!("{trials} trials; at least 1000 needed")));
    }
    let mut out = Vec::new();
    for (li, model) in link_models(scheme, p, a).into_iter().enumerate() {
        let link_seed = seed.wrapping_add((li as u64) << 32);
        let samples = run_trials(trials, link_seed, |rng| link_trial(&model, rng))?;
        let per_stream: Vec<f64> = (0..model.streams)
            .map(|k| {
                let col: Vec<f64> = samples.iter().map(|s| s.gains[k]).collect();
                pairwise_sum(&col) / trials as f64
            })
            .collect();
        let mean_gain = per_stream.iter().sum::<f64>() / model.streams as f64;
        let noise: Vec<f64> = samples.iter().map(|s| s.noise).collect();
        let mean_noise = pairwise_sum(&noise) / trials as f64;
        let signal = model.stream_power * model.gain * mean_gain;
        let empirical = if signal > 0.0 { signal / mean_noise } else { 0.0 };
        out.push(LinkCheck {
            link: model.name,
            check: MonteCarloCheck {
                empirical,
                closed_form: model.closed_form,
                relative_error: relative_error(empirical, model.closed_form),
            },
            per_stream_deviation: per_stream.iter().map(|g| g / mean_gain - 1.0).collect(),
        });
    }
    Ok(out)
}
