//! Run configuration and lattice geometry.
//!
//! The file format is a sectioned `key = value` document with `#` comments:
//!
//! ```text
//! [physical]
//! lambda = 1.0
//! gamma = 1.0
//!
//! [lattice]
//! a = 0.5
//! n_side = 32
//!
//! [cavity]
//! w = 4.0
//! l_fsr = 100.0
//! kappa_c = 1.0
//! z0 = 0.125
//!
//! [trap]
//! omega_m = 0.01
//! eta = 0.1
//!
//! [drive]
//! Omega = 0.01
//! delta_c = 0.0
//! delta_minus_shift = 100.0
//! ```
//!
//! Optional keys: `physical.omega_over_gamma` (optical frequency in units
//! of γ, only used by the Markov check), `physical.dipole` (`"circular"`,
//! `"x"` or `"y"`), and `cavity.k_cut` (in units of q, default `4/(q w)`).
//! The atomic detuning is given either as `delta` (ω_c − ω_a) or as
//! `delta_minus_shift` (δ − Δ, resolved against the computed cooperative
//! shift).

use crate::greens::Dipole;
use crate::{Error, Result, Q};
use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt::Write as _;

#[derive(Clone, Debug, PartialEq)]
pub struct PhysicalConfig {
    pub lambda: f64,
    pub gamma: f64,
    pub q: f64,
    pub omega_over_gamma: f64,
    pub dipole: Dipole,
}

impl Default for PhysicalConfig {
    fn default() -> Self {
        PhysicalConfig { lambda: 1.0, gamma: 1.0, q: Q, omega_over_gamma: 6.3e7, dipole: Dipole::Circular }
    }
}

/// Square `n_side × n_side` lattice of spacing `a`, centred on the origin.
/// Site `n = i·n_side + j` sits at `((i − c) a, (j − c) a)`, `c = (n_side−1)/2`.
#[derive(Clone, Debug, PartialEq)]
pub struct LatticeSpec {
    pub a: f64,
    pub n_side: usize,
}

impl LatticeSpec {
    pub fn new(a: f64, n_side: usize) -> Result<Self> {
        if !(a > 0.0 && a <= 1.0) {
            return Err(Error::config("a", format!("lattice constant {a} outside (0, 1]")));
        }
        if n_side == 0 {
            return Err(Error::config("n_side", "must be at least 1"));
        }
        Ok(LatticeSpec { a, n_side })
    }

    pub fn n_sites(&self) -> usize {
        self.n_side * self.n_side
    }

    /// Side length `n_side · a`.
    pub fn extent(&self) -> f64 {
        self.n_side as f64 * self.a
    }

    pub fn coord(&self, i: usize) -> f64 {
        (i as f64 - (self.n_side as f64 - 1.0) / 2.0) * self.a
    }

    pub fn position(&self, n: usize) -> [f64; 2] {
        [self.coord(n / self.n_side), self.coord(n % self.n_side)]
    }

    pub fn positions(&self) -> Vec<[f64; 2]> {
        (0..self.n_sites()).map(|n| self.position(n)).collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CavitySpec {
    pub w: f64,
    /// The rate c/l.
    pub l_fsr: f64,
    pub kappa_c: f64,
    pub z0: f64,
    /// Confinement cutoff in units of q.
    pub k_cut: f64,
}

impl CavitySpec {
    pub fn rayleigh_range(&self) -> f64 {
        PI * self.w * self.w
    }

    /// Default cutoff `4/w`, expressed in units of q.
    pub fn default_k_cut(w: f64) -> f64 {
        4.0 / (w * Q)
    }

    /// Cutoff as an absolute wavenumber.
    pub fn k_cut_abs(&self) -> f64 {
        self.k_cut * Q
    }

    pub fn qz0(&self) -> f64 {
        Q * self.z0
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrapSpec {
    pub omega_m: f64,
    pub eta: f64,
}

impl TrapSpec {
    /// Zero-point motion `x0 = η/q`.
    pub fn x0(&self) -> f64 {
        self.eta / Q
    }
}

/// How the cavity-atom detuning was specified.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum AtomDetuning {
    /// δ = ω_c − ω_a directly.
    Bare(f64),
    /// δ − Δ, relative to the cooperative shift of the k = 0 mode.
    FromShift(f64),
}

#[derive(Clone, Debug, PartialEq)]
pub struct DriveSpec {
    pub omega: f64,
    pub delta_c: f64,
    pub detuning: AtomDetuning,
}

impl DriveSpec {
    /// δ, given the cooperative shift Δ.
    pub fn delta(&self, shift: f64) -> f64 {
        match self.detuning {
            AtomDetuning::Bare(d) => d,
            AtomDetuning::FromShift(d) => shift + d,
        }
    }

    /// δ − Δ, given the cooperative shift Δ.
    pub fn delta_minus_shift(&self, shift: f64) -> f64 {
        match self.detuning {
            AtomDetuning::Bare(d) => d - shift,
            AtomDetuning::FromShift(d) => d,
        }
    }
}

/// Delta-correlated noise channels feeding the cavity field, with rates.
#[derive(Clone, Debug, PartialEq)]
pub struct NoiseContract {
    pub correlators: BTreeMap<String, (f64, bool)>,
}

impl NoiseContract {
    pub fn new(kappa_c: f64, kappa_sc: f64) -> Result<Self> {
        if kappa_c < 0.0 || kappa_sc < 0.0 {
            return Err(Error::InvalidArgument("noise rates must be non-negative".into()));
        }
        let mut correlators = BTreeMap::new();
        correlators.insert("F_c".to_string(), (kappa_c, true));
        correlators.insert("F_sc".to_string(), (kappa_sc, true));
        correlators.insert("F_total".to_string(), (kappa_c + kappa_sc, true));
        Ok(NoiseContract { correlators })
    }

    pub fn rate(&self, channel: &str) -> Option<f64> {
        self.correlators.get(channel).map(|c| c.0)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Config {
    pub physical: PhysicalConfig,
    pub lattice: LatticeSpec,
    pub cavity: CavitySpec,
    pub trap: TrapSpec,
    pub drive: DriveSpec,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            physical: PhysicalConfig::default(),
            lattice: LatticeSpec { a: 0.5, n_side: 32 },
            cavity: CavitySpec {
                w: 4.0,
                l_fsr: 100.0,
                kappa_c: 1.0,
                z0: 0.125,
                k_cut: CavitySpec::default_k_cut(4.0),
            },
            trap: TrapSpec { omega_m: 0.01, eta: 0.1 },
            drive: DriveSpec { omega: 0.01, delta_c: 0.0, detuning: AtomDetuning::FromShift(100.0) },
        }
    }
}

impl Config {
    pub fn from_path(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        parse_config(&text)
    }

    /// Soft violations that do not stop a run.
    pub fn warnings(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.lattice.extent() < 4.0 * self.cavity.w {
            out.push(format!(
                "lattice extent {} is below 4 w = {}; the cavity profile is truncated at the boundary",
                self.lattice.extent(),
                4.0 * self.cavity.w
            ));
        }
        out
    }

    /// Canonical text form; `parse_config` of the result reproduces `self`.
    pub fn to_canonical_string(&self) -> String {
        let mut s = String::new();
        let p = &self.physical;
        let _ = writeln!(s, "[physical]");
        let _ = writeln!(s, "lambda = {:?}", p.lambda);
        let _ = writeln!(s, "gamma = {:?}", p.gamma);
        let _ = writeln!(s, "omega_over_gamma = {:?}", p.omega_over_gamma);
        let _ = writeln!(s, "dipole = \"{}\"", p.dipole.name());
        let _ = writeln!(s, "\n[lattice]");
        let _ = writeln!(s, "a = {:?}", self.lattice.a);
        let _ = writeln!(s, "n_side = {}", self.lattice.n_side);
        let c = &self.cavity;
        let _ = writeln!(s, "\n[cavity]");
        let _ = writeln!(s, "w = {:?}", c.w);
        let _ = writeln!(s, "l_fsr = {:?}", c.l_fsr);
        let _ = writeln!(s, "kappa_c = {:?}", c.kappa_c);
        let _ = writeln!(s, "z0 = {:?}", c.z0);
        let _ = writeln!(s, "k_cut = {:?}", c.k_cut);
        let _ = writeln!(s, "\n[trap]");
        let _ = writeln!(s, "omega_m = {:?}", self.trap.omega_m);
        let _ = writeln!(s, "eta = {:?}", self.trap.eta);
        let d = &self.drive;
        let _ = writeln!(s, "\n[drive]");
        let _ = writeln!(s, "Omega = {:?}", d.omega);
        let _ = writeln!(s, "delta_c = {:?}", d.delta_c);
        match d.detuning {
            AtomDetuning::Bare(v) => {
                let _ = writeln!(s, "delta = {v:?}");
            }
            AtomDetuning::FromShift(v) => {
                let _ = writeln!(s, "delta_minus_shift = {v:?}");
            }
        }
        s
    }
}

struct Section<'a> {
    name: &'static str,
    table: Option<&'a toml::Table>,
}

impl Section<'_> {
    fn value(&self, key: &str) -> Option<&toml::Value> {
        self.table.and_then(|t| t.get(key))
    }

    fn number_opt(&self, key: &str) -> Result<Option<f64>> {
        match self.value(key) {
            None => Ok(None),
            Some(toml::Value::Float(x)) => finite(key, *x).map(Some),
            Some(toml::Value::Integer(i)) => Ok(Some(*i as f64)),
            Some(_) => Err(Error::config(key, format!("[{}] value is not numeric", self.name))),
        }
    }

    fn number(&self, key: &str) -> Result<f64> {
        self.number_opt(key)?
            .ok_or_else(|| Error::config(key, format!("missing from [{}]", self.name)))
    }

    fn reject_unknown(&self, allowed: &[&str]) -> Result<()> {
        if let Some(t) = self.table {
            for k in t.keys() {
                if !allowed.contains(&k.as_str()) {
                    return Err(Error::config(k, format!("unknown key in [{}]", self.name)));
                }
            }
        }
        Ok(())
    }
}

fn finite(key: &str, x: f64) -> Result<f64> {
    if x.is_finite() {
        Ok(x)
    } else {
        Err(Error::config(key, "value is not finite"))
    }
}

const SECTIONS: [&str; 5] = ["physical", "lattice", "cavity", "trap", "drive"];

/// Parses and validates a configuration document.
pub fn parse_config(text: &str) -> Result<Config> {
    let doc: toml::Table = text
        .parse()
        .map_err(|e: toml::de::Error| Error::config(&syntax_key(&e), e.message().to_string()))?;
    for (k, v) in &doc {
        if !SECTIONS.contains(&k.as_str()) {
            return Err(Error::config(k, "unknown section"));
        }
        if !v.is_table() {
            return Err(Error::config(k, "expected a [section]"));
        }
    }
    let section = |name: &'static str| Section { name, table: doc.get(name).and_then(|v| v.as_table()) };

    let ph = section("physical");
    ph.reject_unknown(&["lambda", "gamma", "omega_over_gamma", "dipole"])?;
    let lambda = ph.number("lambda")?;
    if lambda != 1.0 {
        return Err(Error::config("lambda", "the wavelength is the length unit and must be 1"));
    }
    let gamma = ph.number("gamma")?;
    if gamma != 1.0 {
        return Err(Error::config("gamma", "the free-space decay rate is the rate unit and must be 1"));
    }
    let omega_over_gamma = ph.number_opt("omega_over_gamma")?.unwrap_or(PhysicalConfig::default().omega_over_gamma);
    if omega_over_gamma <= 0.0 {
        return Err(Error::config("omega_over_gamma", "must be positive"));
    }
    let dipole = match ph.value("dipole") {
        None => Dipole::Circular,
        Some(toml::Value::String(s)) => Dipole::from_name(s)
            .ok_or_else(|| Error::config("dipole", format!("unknown orientation {s:?}; use circular, x or y")))?,
        Some(_) => return Err(Error::config("dipole", "expected a string")),
    };

    let la = section("lattice");
    la.reject_unknown(&["a", "n_side"])?;
    let a = la.number("a")?;
    let n_side = match la.value("n_side") {
        None => return Err(Error::config("n_side", "missing from [lattice]")),
        Some(toml::Value::Integer(i)) if *i >= 1 => *i as usize,
        Some(toml::Value::Integer(_)) => return Err(Error::config("n_side", "must be at least 1")),
        Some(_) => return Err(Error::config("n_side", "expected an integer")),
    };
    let lattice = LatticeSpec::new(a, n_side)?;

    let ca = section("cavity");
    ca.reject_unknown(&["w", "l_fsr", "kappa_c", "z0", "k_cut"])?;
    let w = ca.number("w")?;
    if w < 2.0 {
        return Err(Error::config("w", format!("w = {w} below paraxial bound 2")));
    }
    let l_fsr = ca.number("l_fsr")?;
    if l_fsr <= 0.0 {
        return Err(Error::config("l_fsr", "must be positive"));
    }
    let kappa_c = ca.number("kappa_c")?;
    if kappa_c < 0.0 {
        return Err(Error::config("kappa_c", "must be non-negative"));
    }
    let z0 = ca.number("z0")?;
    if z0.abs() > 0.1 * PI * w * w {
        return Err(Error::config("z0", "array must sit within 0.1 Rayleigh ranges of the focus"));
    }
    let k_cut = ca.number_opt("k_cut")?.unwrap_or(CavitySpec::default_k_cut(w));
    if !(k_cut > 0.0 && k_cut < 1.0) {
        return Err(Error::config("k_cut", "must lie in (0, 1) in units of q"));
    }
    let cavity = CavitySpec { w, l_fsr, kappa_c, z0, k_cut };

    let tr = section("trap");
    tr.reject_unknown(&["omega_m", "eta"])?;
    let omega_m = tr.number("omega_m")?;
    if omega_m <= 0.0 {
        return Err(Error::config("omega_m", "must be positive"));
    }
    let eta = tr.number("eta")?;
    if !(0.0..=0.3).contains(&eta) {
        return Err(Error::config("eta", "Lamb-Dicke parameter must lie in [0, 0.3]"));
    }
    let trap = TrapSpec { omega_m, eta };

    let dr = section("drive");
    dr.reject_unknown(&["Omega", "delta_c", "delta", "delta_minus_shift"])?;
    let omega = dr.number("Omega")?;
    let delta_c = dr.number("delta_c")?;
    let detuning = match (dr.number_opt("delta")?, dr.number_opt("delta_minus_shift")?) {
        (Some(d), None) => AtomDetuning::Bare(d),
        (None, Some(d)) => AtomDetuning::FromShift(d),
        (None, None) => return Err(Error::config("delta", "missing from [drive] (or give delta_minus_shift)")),
        (Some(_), Some(_)) => {
            return Err(Error::config("delta", "give either delta or delta_minus_shift, not both"))
        }
    };
    let drive = DriveSpec { omega, delta_c, detuning };

    Ok(Config {
        physical: PhysicalConfig { lambda, gamma, q: Q, omega_over_gamma, dipole },
        lattice,
        cavity,
        trap,
        drive,
    })
}

fn syntax_key(e: &toml::de::Error) -> String {
    match e.span() {
        Some(span) => format!("<syntax at byte {}>", span.start),
        None => "<syntax>".to_string(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const DOC: &str = "
# test document
[physical]
lambda = 1.0
gamma = 1

[lattice]
a = 0.5
n_side = 20

[cavity]
w = 4.0
l_fsr = 100.0
kappa_c = 1.0
z0 = 0.125

[trap]
omega_m = 0.01
eta = 0.1

[drive]
Omega = 0.01
delta_c = 0.0
delta = 100.0
";

    fn err_key(text: &str) -> String {
        match parse_config(text) {
            Err(Error::Config { key, .. }) => key,
            other => panic!("expected a config error, got {other:?}"),
        }
    }

    #[test]
    fn parses_and_derives() {
        let c = parse_config(DOC).unwrap();
        assert_eq!(c.lattice.n_sites(), 400);
        assert_eq!(c.lattice.position(0), [-4.75, -4.75]);
        assert_eq!(c.lattice.position(399), [4.75, 4.75]);
        assert_eq!(c.physical.q, Q);
        assert!((c.trap.x0() - 0.1 / Q).abs() < 1e-18);
        assert!((c.cavity.rayleigh_range() - 16.0 * PI).abs() < 1e-12);
        assert_eq!(c.cavity.k_cut, 1.0 / (Q));
        assert_eq!(c.drive.detuning, AtomDetuning::Bare(100.0));
    }

    #[test]
    fn positions_are_inversion_symmetric() {
        for n_side in [4, 5] {
            let l = LatticeSpec::new(0.3, n_side).unwrap();
            let p = l.positions();
            for (n, r) in p.iter().enumerate() {
                assert_eq!(p[l.n_sites() - 1 - n], [-r[0], -r[1]]);
            }
        }
    }

    #[test]
    fn paraxial_bound() {
        let e = parse_config(&DOC.replace("w = 4.0", "w = 1.0")).unwrap_err();
        assert!(e.to_string().contains("w below paraxial bound") || e.to_string().contains("below paraxial bound"));
        assert_eq!(err_key(&DOC.replace("w = 4.0", "w = 1.0")), "w");
    }

    #[test]
    fn empty_drive_names_omega() {
        let text = DOC.split("[drive]").next().unwrap().to_string() + "[drive]\n";
        assert_eq!(err_key(&text), "Omega");
    }

    #[test]
    fn errors_name_the_key() {
        assert_eq!(err_key(&DOC.replace("a = 0.5", "a = \"wide\"")), "a");
        assert_eq!(err_key(&DOC.replace("eta = 0.1", "eta = 0.5")), "eta");
        assert_eq!(err_key(&DOC.replace("a = 0.5", "a = 0.5\nb = 2")), "b");
        assert_eq!(err_key(&DOC.replace("delta = 100.0", "")), "delta");
        assert_eq!(err_key(&DOC.replace("z0 = 0.125", "z0 = 10.0")), "z0");
        assert_eq!(err_key(&DOC.replace("n_side = 20", "n_side = 20.5")), "n_side");
    }

    #[test]
    fn canonical_round_trip() {
        let c = parse_config(DOC).unwrap();
        let text = c.to_canonical_string();
        let again = parse_config(&text).unwrap();
        assert_eq!(c, again);
        assert_eq!(text, again.to_canonical_string());
        let d = Config::default();
        assert_eq!(parse_config(&d.to_canonical_string()).unwrap(), d);
    }

    #[test]
    fn noise_contract_sums_channels() {
        let n = NoiseContract::new(1.0, 0.25).unwrap();
        assert_eq!(n.rate("F_total"), Some(1.25));
        assert!(NoiseContract::new(-1.0, 0.0).is_err());
    }
}
