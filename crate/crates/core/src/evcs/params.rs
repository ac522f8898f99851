use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

/// Circuit parameters of the charging station (SI units).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvcsParams {
    /// Boost inductance.
    pub l: f64,
    /// Battery-side capacitance.
    pub c: f64,
    pub c_tl: f64,
    pub r_tl: f64,
    pub l_tl: f64,
    /// DC-bus capacitance.
    pub c_dc: f64,
    pub r_bat: f64,
    /// Battery open-circuit voltage.
    pub v_ev: f64,
    pub l_fs: f64,
    pub l_fg: f64,
    pub c_f: f64,
    pub r_f: f64,
    pub omega: f64,
    pub v_g_hat: f64,
    pub f_sw: f64,
}

/// `(file key, unit)` for every field, in file order.
pub const PARAM_KEYS: [(&str, &str); 15] = [
    ("L", "H"),
    ("C", "F"),
    ("C_TL", "F"),
    ("R_TL", "Ohm"),
    ("L_TL", "H"),
    ("C_dc", "F"),
    ("R_bat", "Ohm"),
    ("v_ev", "V"),
    ("L_fs", "H"),
    ("L_fg", "H"),
    ("C_f", "F"),
    ("R_f", "Ohm"),
    ("omega", "rad/s"),
    ("V_g_hat", "V"),
    ("f_sw", "Hz"),
];

/// Grid amplitude that puts the DC bus at 900 V for the default circuit
/// and `θ̄ = (5/9, 0.726, −0.018)`.
pub const DEFAULT_V_G_HAT: f64 = 488.1680681308006;

impl Default for EvcsParams {
    fn default() -> Self {
        default_params()
    }
}

pub fn default_params() -> EvcsParams {
    EvcsParams {
        l: 3e-3,
        c: 1e-3,
        c_tl: 4e-4,
        r_tl: 1e-3,
        l_tl: 1.1e-6,
        c_dc: 2e-3,
        r_bat: 0.05,
        v_ev: 490.0,
        l_fs: 1.2e-4,
        l_fg: 7e-5,
        c_f: 5e-5,
        r_f: 0.1,
        omega: 2.0 * std::f64::consts::PI * 50.0,
        v_g_hat: DEFAULT_V_G_HAT,
        f_sw: 10e3,
    }
}

fn fmt_value(v: f64) -> String {
    let a = v.abs();
    if v == 0.0 || (1e-3..1e7).contains(&a) {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

impl EvcsParams {
    pub fn get(&self, key: &str) -> Option<f64> {
        Some(match key {
            "L" => self.l,
            "C" => self.c,
            "C_TL" => self.c_tl,
            "R_TL" => self.r_tl,
            "L_TL" => self.l_tl,
            "C_dc" => self.c_dc,
            "R_bat" => self.r_bat,
            "v_ev" => self.v_ev,
            "L_fs" => self.l_fs,
            "L_fg" => self.l_fg,
            "C_f" => self.c_f,
            "R_f" => self.r_f,
            "omega" => self.omega,
            "V_g_hat" => self.v_g_hat,
            "f_sw" => self.f_sw,
            _ => return None,
        })
    }

    pub fn set(&mut self, key: &str, v: f64) -> Result<()> {
        let slot = match key {
            "L" => &mut self.l,
            "C" => &mut self.c,
            "C_TL" => &mut self.c_tl,
            "R_TL" => &mut self.r_tl,
            "L_TL" => &mut self.l_tl,
            "C_dc" => &mut self.c_dc,
            "R_bat" => &mut self.r_bat,
            "v_ev" => &mut self.v_ev,
            "L_fs" => &mut self.l_fs,
            "L_fg" => &mut self.l_fg,
            "C_f" => &mut self.c_f,
            "R_f" => &mut self.r_f,
            "omega" => &mut self.omega,
            "V_g_hat" => &mut self.v_g_hat,
            "f_sw" => &mut self.f_sw,
            _ => {
                let known: Vec<&str> = PARAM_KEYS.iter().map(|k| k.0).collect();
                return Err(Error::Parameter(format!("unknown parameter '{key}'; known: {}", known.join(", "))));
            }
        };
        *slot = v;
        Ok(())
    }

    /// All inductances, capacitances, resistances, `f_sw` and `ω` strictly positive.
    pub fn validate(&self) -> Result<()> {
        for (k, _) in PARAM_KEYS {
            let v = self.get(k).unwrap();
            if !v.is_finite() {
                return Err(Error::Parameter(format!("{k} is not finite")));
            }
            if !matches!(k, "v_ev" | "V_g_hat") && v <= 0.0 {
                return Err(Error::Parameter(format!("{k} must be positive, got {v}")));
            }
        }
        Ok(())
    }

    /// `name = value # unit`, one line per parameter.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for (k, unit) in PARAM_KEYS {
            writeln!(s, "{k} = {} # {unit}", fmt_value(self.get(k).unwrap())).unwrap();
        }
        s
    }

    /// Parses `name = value # unit` lines over the defaults. Blank lines and
    /// lines starting with `#` are ignored.
    pub fn from_text(text: &str) -> Result<Self> {
        let mut p = default_params();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("");
            if line.trim().is_empty() {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                return Err(Error::Parse { line: i + 1, col: 1, msg: "expected 'name = value'".into() });
            };
            let col = raw.find('=').unwrap() + 2;
            let v: f64 = v.trim().parse().map_err(|_| Error::Parse {
                line: i + 1,
                col,
                msg: format!("invalid number '{}'", v.trim()),
            })?;
            p.set(k.trim(), v).map_err(|e| Error::Parse { line: i + 1, col: 1, msg: e.to_string() })?;
        }
        p.validate()?;
        Ok(p)
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::from_text(&std::fs::read_to_string(path)?)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }
}
