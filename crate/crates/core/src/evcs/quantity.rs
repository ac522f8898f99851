use super::{EvcsParams, N, Q_BAT, Q_DC};
use crate::error::{Error, Result};
use crate::numerics::Vector;

/// Raw state names in layout order.
pub const STATE_NAMES: [&str; N] =
    ["phi_L", "Q_bat", "Q_bdc", "phi_ind", "Q_dc", "phi_sd", "phi_sq", "Q_cd", "Q_cq", "phi_gd", "phi_gq"];

const STATE_UNITS: [&str; N] = ["Wb", "C", "C", "Wb", "C", "Wb", "Wb", "C", "C", "Wb", "Wb"];

const ALIAS_NAMES: [&str; N] =
    ["i_L", "v_bat", "v_bdc", "i_ind", "v_dc", "i_sd", "i_sq", "v_cd", "v_cq", "i_gd", "i_gq"];

/// Every resolvable name.
pub const QUANTITY_NAMES: [&str; 30] = [
    "phi_L", "Q_bat", "Q_bdc", "phi_ind", "Q_dc", "phi_sd", "phi_sq", "Q_cd", "Q_cq", "phi_gd", "phi_gq", "i_L",
    "v_bat", "v_bdc", "i_ind", "v_dc", "i_sd", "i_sq", "v_cd", "v_cq", "i_gd", "i_gq", "i_bat", "i_ev", "v_sd", "v_sq",
    "d_dc", "m_d", "m_q", "H",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Quantity {
    State(usize),
    /// Current or voltage of a storage element.
    Alias(usize),
    /// Current into the battery `(v_bat − v_ev)/R_bat`.
    IBat,
    IEv,
    /// `½ m v_dc`.
    VSd,
    VSq,
    Theta(usize),
    Hamiltonian,
}

/// `x[i] · factor` equals the named alias.
pub fn state_alias(p: &EvcsParams, name: &str) -> Option<(usize, f64)> {
    if let Some(i) = STATE_NAMES.iter().position(|n| *n == name) {
        return Some((i, 1.0));
    }
    let i = ALIAS_NAMES.iter().position(|n| *n == name)?;
    let storage = [p.l, p.c, p.c_tl, p.l_tl, p.c_dc, p.l_fs, p.l_fs, p.c_f, p.c_f, p.l_fg, p.l_fg];
    Some((i, 1.0 / storage[i]))
}

/// Resolves a quantity name; unknown names list the valid ones.
pub fn resolve(name: &str) -> Result<Quantity> {
    if let Some(i) = STATE_NAMES.iter().position(|n| *n == name) {
        return Ok(Quantity::State(i));
    }
    if let Some(i) = ALIAS_NAMES.iter().position(|n| *n == name) {
        return Ok(Quantity::Alias(i));
    }
    Ok(match name {
        "i_bat" => Quantity::IBat,
        "i_ev" => Quantity::IEv,
        "v_sd" => Quantity::VSd,
        "v_sq" => Quantity::VSq,
        "d_dc" => Quantity::Theta(0),
        "m_d" => Quantity::Theta(1),
        "m_q" => Quantity::Theta(2),
        "H" => Quantity::Hamiltonian,
        _ => {
            return Err(Error::Validation(format!(
                "unknown quantity '{name}'; valid names: {}",
                QUANTITY_NAMES.join(", ")
            )))
        }
    })
}

impl Quantity {
    pub fn name(self) -> &'static str {
        match self {
            Quantity::State(i) => STATE_NAMES[i],
            Quantity::Alias(i) => ALIAS_NAMES[i],
            Quantity::IBat => "i_bat",
            Quantity::IEv => "i_ev",
            Quantity::VSd => "v_sd",
            Quantity::VSq => "v_sq",
            Quantity::Theta(0) => "d_dc",
            Quantity::Theta(1) => "m_d",
            Quantity::Theta(_) => "m_q",
            Quantity::Hamiltonian => "H",
        }
    }

    pub fn unit(self) -> &'static str {
        match self {
            Quantity::State(i) => STATE_UNITS[i],
            Quantity::Alias(i) => {
                if ALIAS_NAMES[i].starts_with('i') {
                    "A"
                } else {
                    "V"
                }
            }
            Quantity::IBat | Quantity::IEv => "A",
            Quantity::VSd | Quantity::VSq => "V",
            Quantity::Theta(_) => "1",
            Quantity::Hamiltonian => "J",
        }
    }

    pub fn eval(self, p: &EvcsParams, x: &Vector, theta: &Vector) -> f64 {
        match self {
            Quantity::State(i) => x[i],
            Quantity::Alias(i) => {
                let (_, f) = state_alias(p, ALIAS_NAMES[i]).expect("alias");
                x[i] * f
            }
            Quantity::IBat => (x[Q_BAT] / p.c - p.v_ev) / p.r_bat,
            Quantity::IEv => -(x[Q_BAT] / p.c - p.v_ev) / p.r_bat,
            Quantity::VSd => 0.5 * theta[1] * x[Q_DC] / p.c_dc,
            Quantity::VSq => 0.5 * theta[2] * x[Q_DC] / p.c_dc,
            Quantity::Theta(j) => theta[j],
            Quantity::Hamiltonian => {
                let h = [
                    1.0 / p.l,
                    1.0 / p.c,
                    2.0 / p.c_tl,
                    1.0 / p.l_tl,
                    1.5 / p.c_dc,
                    1.0 / p.l_fs,
                    1.0 / p.l_fs,
                    1.0 / p.c_f,
                    1.0 / p.c_f,
                    1.0 / p.l_fg,
                    1.0 / p.l_fg,
                ];
                0.5 * x.iter().zip(h).map(|(v, w)| w * v * v).sum::<f64>()
            }
        }
    }
}
