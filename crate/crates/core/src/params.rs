//! Cell parameters, power allocations and structural validation.
//!
//! Everything is stored in linear units: powers in mW, path gains and the
//! residual self-interference attenuation as dimensionless factors in (0, 1].

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use crate::config;
use crate::error::{Error, Result};

/// Transmission scheme of the access node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Scheme {
    /// Everything at once: DL, UL and both backhaul directions share time.
    FullDuplex,
    /// TDD: DL + backhaul TX in one slot, UL + backhaul RX in the other.
    HalfDuplex,
    /// AN relays backhaul->DL in one slot and UL->backhaul in the other.
    HybridRelay,
}

impl Scheme {
    pub const ALL: [Scheme; 3] = [Scheme::FullDuplex, Scheme::HalfDuplex, Scheme::HybridRelay];

    pub fn short_name(self) -> &'static str {
        match self {
            Scheme::FullDuplex => "fd",
            Scheme::HalfDuplex => "hd",
            Scheme::HybridRelay => "rl",
        }
    }

    /// Whether the TDD split is a free variable for this scheme.
    pub fn uses_time_split(self) -> bool {
        !matches!(self, Scheme::FullDuplex)
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scheme::FullDuplex => "FD",
            Scheme::HalfDuplex => "HD",
            Scheme::HybridRelay => "RL",
        })
    }
}

impl std::str::FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "fd" | "full-duplex" | "fullduplex" => Ok(Scheme::FullDuplex),
            "hd" | "half-duplex" | "halfduplex" => Ok(Scheme::HalfDuplex),
            "rl" | "relay" | "hybrid-relay" | "hybridrelay" => Ok(Scheme::HybridRelay),
            other => Err(Error::Parse { line: 0, msg: format!("unknown scheme `{other}`") }),
        }
    }
}

/// Static description of the cell.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemParams {
    pub n_t: u32,
    pub n_r: u32,
    pub m_bh_t: u32,
    pub m_bh_r: u32,
    pub d: u32,
    pub u: u32,
    pub k_d2d: u32,
    pub k_an: u32,
    /// Receiver noise floor, mW.
    pub sigma_n2: f64,
    pub l_ue: f64,
    pub l_ud: f64,
    pub l_bh: f64,
    pub p_an_max: f64,
    pub p_ue_max: f64,
    pub p_bh_d_max: f64,
    /// Residual SI attenuation after all cancellation stages.
    pub alpha: f64,
    pub rho_min: f64,
    pub rho_max: f64,
}

/// Converts dBm to mW.
pub fn dbm_to_mw(dbm: f64) -> f64 {
    10f64.powf(dbm / 10.0)
}

pub fn mw_to_dbm(mw: f64) -> f64 {
    10.0 * mw.log10()
}

/// Converts a loss in dB into a linear gain, `10^(-dB/10)`.
pub fn loss_db_to_gain(db: f64) -> f64 {
    10f64.powf(-db / 10.0)
}

pub fn gain_to_loss_db(gain: f64) -> f64 {
    -10.0 * gain.log10()
}

const COUNT_KEYS: [&str; 8] = ["n_t", "n_r", "m_bh_t", "m_bh_r", "d", "u", "k_d2d", "k_an"];
const REAL_KEYS: [&str; 10] = [
    "noise_dbm",
    "l_ue_db",
    "l_ud_db",
    "l_bh_db",
    "p_an_dbm",
    "p_ue_dbm",
    "p_bh_dbm",
    "si_cancellation_db",
    "rho_min",
    "rho_max",
];

/// All keys accepted in a parameter file.
pub fn param_keys() -> impl Iterator<Item = &'static str> {
    COUNT_KEYS.iter().chain(REAL_KEYS.iter()).copied()
}

/// Builds parameters from dB-scale values and counts keyed by their file names.
///
/// Extra keys are ignored here; [`SystemParams::from_kv`] is the strict
/// entry point for files.
pub fn params_from_db(raw: &BTreeMap<String, f64>) -> Result<SystemParams> {
    let get = |key: &str| -> Result<f64> {
        let v = *raw.get(key).ok_or_else(|| Error::MissingKey(key.to_string()))?;
        if !v.is_finite() {
            return Err(Error::NonFinite { key: key.to_string(), value: v });
        }
        Ok(v)
    };
    let count = |key: &str| -> Result<u32> {
        let v = get(key)?;
        if v < 0.0 || v.fract() != 0.0 || v > u32::MAX as f64 {
            return Err(Error::BadCount { key: key.to_string(), value: v });
        }
        Ok(v as u32)
    };
    Ok(SystemParams {
        n_t: count("n_t")?,
        n_r: count("n_r")?,
        m_bh_t: count("m_bh_t")?,
        m_bh_r: count("m_bh_r")?,
        d: count("d")?,
        u: count("u")?,
        k_d2d: count("k_d2d")?,
        k_an: count("k_an")?,
        sigma_n2: dbm_to_mw(get("noise_dbm")?),
        l_ue: loss_db_to_gain(get("l_ue_db")?),
        l_ud: loss_db_to_gain(get("l_ud_db")?),
        l_bh: loss_db_to_gain(get("l_bh_db")?),
        p_an_max: dbm_to_mw(get("p_an_dbm")?),
        p_ue_max: dbm_to_mw(get("p_ue_dbm")?),
        p_bh_d_max: dbm_to_mw(get("p_bh_dbm")?),
        alpha: loss_db_to_gain(get("si_cancellation_db")?),
        rho_min: get("rho_min")?,
        rho_max: get("rho_max")?,
    })
}

impl SystemParams {
    /// The reference cell: 200/100 antennas, 6/12 backhaul streams, 10 DL and
    /// 10 UL users, 120 dB of SI cancellation.
    pub fn table1() -> Self {
        params_from_db(&table1_db()).expect("reference parameters are complete")
    }

    /// Strict parse of `name = value` text: every key required, no extras.
    pub fn from_kv(map: &BTreeMap<String, String>) -> Result<Self> {
        let mut raw = BTreeMap::new();
        for (k, v) in map {
            if !param_keys().any(|p| p == k) {
                return Err(Error::UnknownKey(k.clone()));
            }
            raw.insert(k.clone(), config::parse_f64(k, v)?);
        }
        params_from_db(&raw)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        Self::from_kv(&config::read_kv(path)?)
    }

    /// The dB-scale view, keyed like the parameter file.
    pub fn to_db(&self) -> BTreeMap<String, f64> {
        let mut m = BTreeMap::new();
        let mut put = |k: &str, v: f64| {
            m.insert(k.to_string(), v);
        };
        put("n_t", self.n_t as f64);
        put("n_r", self.n_r as f64);
        put("m_bh_t", self.m_bh_t as f64);
        put("m_bh_r", self.m_bh_r as f64);
        put("d", self.d as f64);
        put("u", self.u as f64);
        put("k_d2d", self.k_d2d as f64);
        put("k_an", self.k_an as f64);
        put("noise_dbm", mw_to_dbm(self.sigma_n2));
        put("l_ue_db", gain_to_loss_db(self.l_ue));
        put("l_ud_db", gain_to_loss_db(self.l_ud));
        put("l_bh_db", gain_to_loss_db(self.l_bh));
        put("p_an_dbm", mw_to_dbm(self.p_an_max));
        put("p_ue_dbm", mw_to_dbm(self.p_ue_max));
        put("p_bh_dbm", mw_to_dbm(self.p_bh_d_max));
        put("si_cancellation_db", gain_to_loss_db(self.alpha));
        put("rho_min", self.rho_min);
        put("rho_max", self.rho_max);
        m
    }

    /// Renders the parameters in the file format accepted by [`Self::from_kv`].
    pub fn to_config_string(&self) -> String {
        let db = self.to_db();
        let mut s = String::new();
        for key in param_keys() {
            s.push_str(&format!("{key} = {}\n", db[key]));
        }
        s
    }

    /// Sets the SI attenuation from an amount of cancellation in dB.
    pub fn with_si_cancellation_db(mut self, db: f64) -> Self {
        self.alpha = loss_db_to_gain(db);
        self
    }

    /// Number of DL users served through the backhaul.
    pub fn dl_outgoing(&self) -> i64 {
        self.d as i64 - self.k_d2d as i64 - self.k_an as i64
    }

    pub fn ul_outgoing(&self) -> i64 {
        self.u as i64 - self.k_d2d as i64 - self.k_an as i64
    }

    /// Whether the UL/DL rate-ratio bounds constrain anything.
    pub fn rate_ratio_active(&self) -> bool {
        self.dl_outgoing() > 0 && self.ul_outgoing() > 0
    }

    /// Array degrees of freedom left for each link, per scheme.
    pub fn dof(&self, scheme: Scheme) -> Dof {
        let (nt, nr) = (self.n_t as i64, self.n_r as i64);
        let (mt, mr) = (self.m_bh_t as i64, self.m_bh_r as i64);
        let (d, u, kd) = (self.d as i64, self.u as i64, self.k_d2d as i64);
        match scheme {
            Scheme::FullDuplex => Dof {
                dl: nt - d - mt - nr,
                ul: nr - u - mr,
                bh_tx: nt - d - mt - nr,
                bh_rx: nr - u - mr,
            },
            Scheme::HalfDuplex => Dof {
                dl: nt - d + kd - mt,
                ul: nr - u - mr,
                bh_tx: nt - d + kd - mt,
                bh_rx: nr - u - mr,
            },
            Scheme::HybridRelay => Dof {
                dl: nt - d + kd - nr,
                ul: nr - u,
                bh_tx: nt - mt - kd - nr,
                bh_rx: nr - mr,
            },
        }
    }
}

/// Reference parameters in file units.
pub fn table1_db() -> BTreeMap<String, f64> {
    [
        ("n_t", 200.0),
        ("n_r", 100.0),
        ("m_bh_t", 6.0),
        ("m_bh_r", 12.0),
        ("d", 10.0),
        ("u", 10.0),
        ("k_d2d", 0.0),
        ("k_an", 0.0),
        ("noise_dbm", -90.0),
        ("l_ue_db", 80.0),
        ("l_ud_db", 70.0),
        ("l_bh_db", 80.0),
        ("p_an_dbm", 30.0),
        ("p_ue_dbm", 25.0),
        ("p_bh_dbm", 40.0),
        ("si_cancellation_db", 120.0),
        ("rho_min", 0.15),
        ("rho_max", 0.30),
    ]
    .into_iter()
    .map(|(k, v)| (k.to_string(), v))
    .collect()
}

/// Spatial degrees of freedom (array size minus stacked streams and nulls).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Dof {
    pub dl: i64,
    pub ul: i64,
    pub bh_tx: i64,
    pub bh_rx: i64,
}

/// One broken invariant found by [`validate`].
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    ZeroCount(&'static str),
    IntraCellExceedsDl { pairs: u32, d: u32 },
    IntraCellExceedsUl { pairs: u32, u: u32 },
    GainOutOfRange { name: &'static str, value: f64 },
    NonPositivePower { name: &'static str, value: f64 },
    RateRatio { min: f64, max: f64 },
    NoDegreesOfFreedom { scheme: Scheme, link: &'static str, value: i64 },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::ZeroCount(name) => write!(f, "{name} must be positive"),
            Violation::IntraCellExceedsDl { pairs, d } => {
                write!(f, "K_D2D + K_AN > D ({pairs} > {d})")
            }
            Violation::IntraCellExceedsUl { pairs, u } => {
                write!(f, "K_D2D + K_AN > U ({pairs} > {u})")
            }
            Violation::GainOutOfRange { name, value } => {
                write!(f, "{name} = {value} outside (0, 1]")
            }
            Violation::NonPositivePower { name, value } => write!(f, "{name} = {value} mW ≤ 0"),
            Violation::RateRatio { min, max } => {
                write!(f, "rate ratio bounds need 0 < rho_min ≤ rho_max ({min}, {max})")
            }
            Violation::NoDegreesOfFreedom { scheme, link, value } => {
                write!(f, "{scheme} {link} DoF ≤ 0 ({value})")
            }
        }
    }
}

/// Lists every structural and degrees-of-freedom violation for `scheme`.
pub fn validate(p: &SystemParams, scheme: Scheme) -> Vec<Violation> {
    let mut out = Vec::new();
    for (name, v) in [("n_t", p.n_t), ("n_r", p.n_r), ("d", p.d), ("u", p.u)] {
        if v == 0 {
            out.push(Violation::ZeroCount(name));
        }
    }
    let pairs = p.k_d2d + p.k_an;
    if pairs > p.d {
        out.push(Violation::IntraCellExceedsDl { pairs, d: p.d });
    }
    if pairs > p.u {
        out.push(Violation::IntraCellExceedsUl { pairs, u: p.u });
    }
    for (name, g) in [("l_ue", p.l_ue), ("l_ud", p.l_ud), ("l_bh", p.l_bh), ("alpha", p.alpha)] {
        if !(g > 0.0 && g <= 1.0) {
            out.push(Violation::GainOutOfRange { name, value: g });
        }
    }
    for (name, v) in [
        ("sigma_n2", p.sigma_n2),
        ("p_an_max", p.p_an_max),
        ("p_ue_max", p.p_ue_max),
        ("p_bh_d_max", p.p_bh_d_max),
    ] {
        if !(v > 0.0 && v.is_finite()) {
            out.push(Violation::NonPositivePower { name, value: v });
        }
    }
    if !(p.rho_min > 0.0 && p.rho_min <= p.rho_max && p.rho_max.is_finite()) {
        out.push(Violation::RateRatio { min: p.rho_min, max: p.rho_max });
    }

    let dof = p.dof(scheme);
    let links: &[(&'static str, i64)] = match scheme {
        Scheme::FullDuplex | Scheme::HalfDuplex => &[("transmit", dof.dl), ("receive", dof.ul)],
        Scheme::HybridRelay => &[
            ("DL transmit", dof.dl),
            ("backhaul transmit", dof.bh_tx),
            ("UL receive", dof.ul),
            ("backhaul receive", dof.bh_rx),
        ],
    };
    for &(link, value) in links {
        if value <= 0 {
            out.push(Violation::NoDegreesOfFreedom { scheme, link, value });
        }
    }
    out
}

/// Transmit powers and TDD split, the decision vector of the optimizer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerAllocation {
    /// Total AN power over all DL streams, mW.
    pub p_d: f64,
    /// Per-UE UL power, mW.
    pub p_u: f64,
    /// Total BN power over the backhaul streams toward the AN, mW.
    pub p_bh_d: f64,
    /// Total AN power over the backhaul streams toward the BN, mW.
    pub p_bh_u: f64,
    /// Per-UE power of D2D transmitters, mW.
    pub p_u_d2d: f64,
    /// Fraction of time in the DL-transmitting slot.
    pub eta: f64,
}

impl PowerAllocation {
    pub const FD_ETA: f64 = 0.5;

    pub fn zero() -> Self {
        Self { p_d: 0.0, p_u: 0.0, p_bh_d: 0.0, p_bh_u: 0.0, p_u_d2d: 0.0, eta: Self::FD_ETA }
    }

    pub fn powers(&self) -> [f64; 5] {
        [self.p_d, self.p_u, self.p_bh_d, self.p_bh_u, self.p_u_d2d]
    }
}
