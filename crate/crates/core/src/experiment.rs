//! Parameter sweeps over SI cancellation, intra-cell pairs and backhaul
//! streams, and their CSV output.
//!
//! A sweep spec is a key-value file:
//!
//! ```text
//! kind = intra_cell_pairs     # si_cancellation | intra_cell_pairs | backhaul_streams | custom_grid
//! axis = 0:1:9                # start:step:stop, or a comma list
//! routing = via_an            # intra_cell_pairs only: via_an | d2d
//! schemes = fd, hd, rl
//! include_baseline = true
//! seed = 42
//! starts = 50
//! m_bh_t = 2                  # any parameter key overrides the base
//! m_bh_r = 4
//! ```
//!
//! `base = FILE` replaces the reference parameters with a parameter file
//! (resolved relative to the spec), and `custom_grid` sweeps the parameter
//! named by `param` in its file units.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

use rayon::prelude::*;

use crate::config::{self, parse_f64};
use crate::error::{Error, Result};
use crate::optimizer::{baseline, optimize, OptimizerOptions};
use crate::params::{param_keys, params_from_db, table1_db, validate, PowerAllocation, Scheme, SystemParams};
use crate::RateBreakdown;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepKind {
    SiCancellation,
    IntraCellPairs,
    BackhaulStreams,
    CustomGrid,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Routing {
    D2d,
    ViaAn,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub kind: SweepKind,
    pub axis: Vec<f64>,
    pub routing: Routing,
    pub schemes: Vec<Scheme>,
    pub include_baseline: bool,
    /// Parameters in file units before the axis override.
    pub base: BTreeMap<String, f64>,
    /// Parameter swept by a `custom_grid`.
    pub param: Option<String>,
    pub optimizer: OptimizerOptions,
}

const SPEC_KEYS: [&str; 9] =
    ["kind", "axis", "routing", "schemes", "include_baseline", "seed", "starts", "base", "param"];

fn parse_axis(s: &str) -> Result<Vec<f64>> {
    let bad = |m: &str| Error::InvalidSpec(format!("axis `{s}`: {m}"));
    let parts: Vec<&str> = s.split(':').map(str::trim).collect();
    let axis = match parts.as_slice() {
        [start, step, stop] => {
            let (start, step, stop) = (parse_f64("axis", start)?, parse_f64("axis", step)?, parse_f64("axis", stop)?);
            if !(step > 0.0) {
                return Err(bad("step must be positive"));
            }
            let n = ((stop - start) / step + 1e-9).floor();
            if !(0.0..=1e6).contains(&n) {
                return Err(bad("empty or oversized range"));
            }
            (0..=n as usize).map(|i| start + i as f64 * step).collect()
        }
        [_] => s
            .split(',')
            .map(|v| parse_f64("axis", v.trim()))
            .collect::<Result<Vec<f64>>>()?,
        _ => return Err(bad("expected `start:step:stop` or a comma list")),
    };
    if axis.is_empty() {
        return Err(bad("empty"));
    }
    if axis.iter().any(|v| !v.is_finite()) {
        return Err(bad("non-finite value"));
    }
    if axis.windows(2).any(|w| w[1] <= w[0]) {
        return Err(bad("values must be strictly increasing"));
    }
    Ok(axis)
}

fn parse_bool(key: &str, v: &str) -> Result<bool> {
    match v {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(Error::InvalidSpec(format!("`{key}`: `{v}` is not a boolean"))),
    }
}

fn parse_int(key: &str, v: &str) -> Result<u64> {
    v.parse().map_err(|_| Error::InvalidSpec(format!("`{key}`: `{v}` is not a non-negative integer")))
}

impl SweepSpec {
    pub fn parse(text: &str, dir: Option<&Path>) -> Result<Self> {
        let kv = config::parse_kv(text)?;
        let get = |k: &str| kv.get(k).map(String::as_str);
        let kind = match get("kind").ok_or_else(|| Error::MissingKey("kind".into()))? {
            "si_cancellation" => SweepKind::SiCancellation,
            "intra_cell_pairs" => SweepKind::IntraCellPairs,
            "backhaul_streams" => SweepKind::BackhaulStreams,
            "custom_grid" => SweepKind::CustomGrid,
            other => return Err(Error::InvalidSpec(format!("unknown kind `{other}`"))),
        };
        let axis = parse_axis(get("axis").ok_or_else(|| Error::MissingKey("axis".into()))?)?;
        let routing = match get("routing") {
            None | Some("via_an") => Routing::ViaAn,
            Some("d2d") => Routing::D2d,
            Some(other) => return Err(Error::InvalidSpec(format!("unknown routing `{other}`"))),
        };
        let schemes = match get("schemes") {
            None => Scheme::ALL.to_vec(),
            Some(s) => {
                let mut v = s
                    .split(',')
                    .map(|x| x.trim().parse::<Scheme>())
                    .collect::<Result<Vec<_>>>()?;
                v.sort();
                v.dedup();
                v
            }
        };
        let include_baseline = get("include_baseline").map_or(Ok(true), |v| parse_bool("include_baseline", v))?;
        let mut optimizer = OptimizerOptions::default();
        if let Some(v) = get("seed") {
            optimizer.rng_seed = parse_int("seed", v)?;
        }
        if let Some(v) = get("starts") {
            optimizer.n_starts = parse_int("starts", v)? as usize;
            if optimizer.n_starts == 0 {
                return Err(Error::InvalidSpec("`starts` must be at least 1".into()));
            }
        }

        let mut base = match get("base") {
            None => table1_db(),
            Some(path) => {
                let path = dir.map_or_else(|| Path::new(path).to_path_buf(), |d| d.join(path));
                let params = SystemParams::from_file(&path)?;
                params.to_db()
            }
        };
        for (k, v) in &kv {
            if SPEC_KEYS.contains(&k.as_str()) {
                continue;
            }
            if !param_keys().any(|p| p == k) {
                return Err(Error::UnknownKey(k.clone()));
            }
            base.insert(k.clone(), parse_f64(k, v)?);
        }
        let param = get("param").map(str::to_string);

        let spec = SweepSpec { kind, axis, routing, schemes, include_baseline, base, param, optimizer };
        spec.check()?;
        Ok(spec)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?, path.parent())
    }

    fn check(&self) -> Result<()> {
        let integral = |what: &str| {
            if self.axis.iter().any(|v| *v < 0.0 || v.fract() != 0.0) {
                Err(Error::InvalidSpec(format!("{what} axis must hold non-negative integers")))
            } else {
                Ok(())
            }
        };
        match self.kind {
            SweepKind::IntraCellPairs => {
                integral("intra_cell_pairs")?;
                let cap = self.base["d"].min(self.base["u"]);
                let top = *self.axis.last().expect("axis is non-empty");
                if top > cap {
                    return Err(Error::InvalidSpec(format!("K up to {top} exceeds min(D, U) = {cap}")));
                }
            }
            SweepKind::BackhaulStreams => integral("backhaul_streams")?,
            SweepKind::CustomGrid => match &self.param {
                Some(p) if param_keys().any(|k| k == p) => {}
                Some(p) => return Err(Error::UnknownKey(p.clone())),
                None => return Err(Error::MissingKey("param".into())),
            },
            SweepKind::SiCancellation => {}
        }
        if self.schemes.is_empty() {
            return Err(Error::InvalidSpec("no schemes".into()));
        }
        params_from_db(&self.base).map(|_| ())
    }

    /// Parameters at one axis point.
    pub fn params_at(&self, x: f64) -> Result<SystemParams> {
        let mut db = self.base.clone();
        match self.kind {
            SweepKind::SiCancellation => {
                db.insert("si_cancellation_db".into(), x);
            }
            SweepKind::IntraCellPairs => {
                let (on, off) = match self.routing {
                    Routing::ViaAn => ("k_an", "k_d2d"),
                    Routing::D2d => ("k_d2d", "k_an"),
                };
                db.insert(on.into(), x);
                db.insert(off.into(), 0.0);
            }
            SweepKind::BackhaulStreams => {
                db.insert("m_bh_t".into(), x);
                db.insert("m_bh_r".into(), 2.0 * x);
            }
            SweepKind::CustomGrid => {
                db.insert(self.param.clone().expect("checked"), x);
            }
        }
        params_from_db(&db)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowStatus {
    /// Optimized row, with the number of converged starts.
    Converged(usize),
    /// Max-power evaluation.
    Baseline,
    /// The parameters fail structural validation at this point.
    Skip,
    /// No start reached a feasible point.
    Infeasible,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub axis: f64,
    pub scheme: Scheme,
    pub optimized: bool,
    pub clamped: bool,
    /// Absent for skipped and infeasible points.
    pub rates: Option<RateBreakdown>,
    pub status: RowStatus,
}

impl SweepRow {
    pub fn alloc(&self) -> Option<PowerAllocation> {
        self.rates.map(|r| r.alloc)
    }
}

fn rows_at(spec: &SweepSpec, x: f64, scheme: Scheme) -> Result<Vec<SweepRow>> {
    let p = spec.params_at(x)?;
    let row = |optimized, clamped, rates, status| SweepRow { axis: x, scheme, optimized, clamped, rates, status };
    let mut out = Vec::with_capacity(2);
    if !validate(&p, scheme).is_empty() {
        out.push(row(true, false, None, RowStatus::Skip));
        if spec.include_baseline {
            out.push(row(false, false, None, RowStatus::Skip));
        }
        return Ok(out);
    }
    match optimize(scheme, &p, &spec.optimizer) {
        Ok(r) => out.push(row(true, false, Some(r.best_rates), RowStatus::Converged(r.converged_count))),
        Err(Error::Infeasible { .. }) => out.push(row(true, false, None, RowStatus::Infeasible)),
        Err(e) => return Err(e),
    }
    if spec.include_baseline {
        let b = baseline(scheme, &p)?;
        out.push(row(false, b.clamped, Some(b.rates), RowStatus::Baseline));
    }
    Ok(out)
}

/// Runs every (axis point, scheme) cell of the sweep.
///
/// Cells run in parallel; rows come back sorted by axis, scheme, and
/// baseline before optimized.
pub fn run_sweep(spec: &SweepSpec) -> Result<Vec<SweepRow>> {
    let cells: Vec<(f64, Scheme)> =
        spec.axis.iter().flat_map(|&x| spec.schemes.iter().map(move |&s| (x, s))).collect();
    let nested: Vec<Vec<SweepRow>> = cells
        .par_iter()
        .map(|&(x, s)| rows_at(spec, x, s))
        .collect::<Result<_>>()?;
    let mut rows: Vec<SweepRow> = nested.into_iter().flatten().collect();
    sort_rows(&mut rows);
    Ok(rows)
}

fn sort_rows(rows: &mut [SweepRow]) {
    rows.sort_by(|a, b| {
        a.axis
            .partial_cmp(&b.axis)
            .unwrap_or(Ordering::Equal)
            .then(a.scheme.cmp(&b.scheme))
            .then(a.optimized.cmp(&b.optimized))
    });
}

pub const CSV_HEADER: &str = "axis,scheme,optimized,clamped,c_d,c_u,c_ic,c_s,c_bh_d,c_bh_u,p_d_mw,p_u_mw,p_bh_d_mw,p_bh_u_mw,p_u_d2d_mw,eta,converged";

/// Formats `x` with 9 significant digits, trailing zeros trimmed.
pub fn fmt_sig(x: f64) -> String {
    if x.is_nan() {
        return "NaN".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    // round first so the exponent accounts for carries like 9.999999999 → 10
    let sci = format!("{x:.8e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-5..9).contains(&exp) {
        let decimals = (8 - exp).max(0) as usize;
        let s = format!("{x:.decimals$}");
        trim_zeros(&s)
    } else {
        format!("{}e{exp}", trim_zeros(mantissa))
    }
}

fn trim_zeros(s: &str) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s.to_string()
    }
}

/// Renders rows as CSV text, sorting them first.
pub fn to_csv(rows: &[SweepRow]) -> Result<String> {
    if rows.is_empty() {
        return Err(Error::InvalidSpec("no rows to write".into()));
    }
    let mut rows = rows.to_vec();
    sort_rows(&mut rows);
    let mut s = String::with_capacity(160 * (rows.len() + 1));
    s.push_str(CSV_HEADER);
    s.push('\n');
    for r in &rows {
        let nums: Vec<f64> = match r.rates {
            Some(b) => {
                let a = b.alloc;
                vec![b.c_d, b.c_u, b.c_ic, b.c_s, b.c_bh_d, b.c_bh_u, a.p_d, a.p_u, a.p_bh_d, a.p_bh_u, a.p_u_d2d, a.eta]
            }
            None => vec![f64::NAN; 12],
        };
        let status = match r.status {
            RowStatus::Converged(n) => n.to_string(),
            RowStatus::Baseline => "baseline".into(),
            RowStatus::Skip => "skip".into(),
            RowStatus::Infeasible => "infeasible".into(),
        };
        write!(s, "{},{},{},{}", fmt_sig(r.axis), r.scheme.short_name(), r.optimized, r.clamped).unwrap();
        for v in nums {
            write!(s, ",{}", fmt_sig(v)).unwrap();
        }
        writeln!(s, ",{status}").unwrap();
    }
    Ok(s)
}

pub fn emit_csv(rows: &[SweepRow], path: &Path) -> Result<()> {
    let text = to_csv(rows)?;
    let mut f = std::fs::File::create(path)?;
    f.write_all(text.as_bytes())?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn axis_forms() {
        assert_eq!(parse_axis("60:1:63").unwrap(), vec![60.0, 61.0, 62.0, 63.0]);
        assert_eq!(parse_axis("0:0.5:1").unwrap(), vec![0.0, 0.5, 1.0]);
        assert_eq!(parse_axis("1, 2,5").unwrap(), vec![1.0, 2.0, 5.0]);
        assert!(parse_axis("3,2").is_err());
        assert!(parse_axis("1,1").is_err());
        assert!(parse_axis("5:1:4").is_err());
        assert!(parse_axis("0:0:4").is_err());
    }

    #[test]
    fn sig_digits() {
        assert_eq!(fmt_sig(0.5), "0.5");
        assert_eq!(fmt_sig(123.456789012345), "123.456789");
        assert_eq!(fmt_sig(1e-9), "1e-9");
        assert_eq!(fmt_sig(316.22776601683794), "316.227766");
        assert_eq!(fmt_sig(9.9999999999), "10");
        assert_eq!(fmt_sig(12345678901.0), "1.23456789e10");
        assert_eq!(fmt_sig(-2.0), "-2");
        assert_eq!(fmt_sig(f64::NAN), "NaN");
    }

    #[test]
    fn spec_overrides_and_routing() {
        let s = SweepSpec::parse("kind = intra_cell_pairs\naxis = 0:1:3\nrouting = d2d\nm_bh_t = 2\nm_bh_r = 4\nschemes = rl, fd", None).unwrap();
        assert_eq!(s.schemes, vec![Scheme::FullDuplex, Scheme::HybridRelay]);
        let p = s.params_at(2.0).unwrap();
        assert_eq!((p.k_d2d, p.k_an, p.m_bh_t), (2, 0, 2));
    }

    #[test]
    fn backhaul_axis_doubles_receive_streams() {
        let s = SweepSpec::parse("kind = backhaul_streams\naxis = 1:1:3", None).unwrap();
        let p = s.params_at(3.0).unwrap();
        assert_eq!((p.m_bh_t, p.m_bh_r), (3, 6));
    }

    #[test]
    fn spec_rejections() {
        assert!(matches!(SweepSpec::parse("axis = 1", None), Err(Error::MissingKey(_))));
        assert!(SweepSpec::parse("kind = intra_cell_pairs\naxis = 0:1:11", None).is_err());
        assert!(SweepSpec::parse("kind = intra_cell_pairs\naxis = 0.5", None).is_err());
        assert!(matches!(SweepSpec::parse("kind = si_cancellation\naxis = 1\nfoo = 2", None), Err(Error::UnknownKey(_))));
        assert!(SweepSpec::parse("kind = custom_grid\naxis = 1", None).is_err());
        assert!(SweepSpec::parse("kind = si_cancellation\naxis = 1\nstarts = 0", None).is_err());
    }

    #[test]
    fn custom_grid_sets_param() {
        let s = SweepSpec::parse("kind = custom_grid\nparam = p_ue_dbm\naxis = 10,20", None).unwrap();
        assert!((s.params_at(20.0).unwrap().p_ue_max - 100.0).abs() < 1e-12);
    }

    #[test]
    fn skip_rows_for_invalid_points() {
        // FD transmit DoF is 200-10-6-100 = 84; 120 backhaul streams exhaust it
        let s = SweepSpec::parse("kind = backhaul_streams\naxis = 120\nschemes = fd\nstarts = 1", None).unwrap();
        let rows = run_sweep(&s).unwrap();
        assert_eq!(rows.len(), 2);
        assert!(rows.iter().all(|r| r.status == RowStatus::Skip && r.rates.is_none()));
        let csv = to_csv(&rows).unwrap();
        assert!(csv.lines().nth(1).unwrap().ends_with(",NaN,skip"));
    }

    #[test]
    fn csv_shape() {
        let s = SweepSpec::parse("kind = si_cancellation\naxis = 100\nschemes = hd, fd\nstarts = 4\ninclude_baseline = false", None).unwrap();
        let rows = run_sweep(&s).unwrap();
        let csv = to_csv(&rows).unwrap();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], CSV_HEADER);
        assert_eq!(lines.len(), 3);
        assert!(lines[1].starts_with("100,fd,true,false,"));
        let fd: Vec<&str> = lines[1].split(',').collect();
        assert_eq!(fd[15], "0.5");
        assert_eq!(fd.len(), 17);
    }
}
