//! Scenario files: flat `key = value` text grouped in `[sections]`.
//!
//! ```text
//! [model]
//! kind = averaged          # or switched
//! t_end = 0.3
//! sample_rate = 1e5
//! [controller]
//! kind = ph_pi             # fixed_theta | ph_p | ph_dae | ph_pi | cascaded_pi | bass
//! gamma = 1e5
//! delta = 1.5
//! [initial]
//! v_dc = 50                # offset from the steady state, in the alias unit
//! [disturbance.1]
//! quantity = v_dc
//! start = 0.02
//! end = 0.12
//! value = 400
//! [outputs]
//! quantities = v_dc, i_gq
//! ```

use std::fmt::Write as _;
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::control::DeltaPower;
use crate::error::{Error, Result};
use crate::evcs::{default_params, resolve, state_alias, EvcsParams, PARAM_KEYS, THETA_BAR};
use crate::sim::switched::{Carrier, PwmConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    Averaged,
    Switched,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ControllerKind {
    FixedTheta,
    PhP,
    PhDae,
    PhPi,
    CascadedPi,
    Bass,
}

impl ControllerKind {
    pub const ALL: [ControllerKind; 6] = [
        ControllerKind::FixedTheta,
        ControllerKind::PhP,
        ControllerKind::PhDae,
        ControllerKind::PhPi,
        ControllerKind::CascadedPi,
        ControllerKind::Bass,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ControllerKind::FixedTheta => "fixed_theta",
            ControllerKind::PhP => "ph_p",
            ControllerKind::PhDae => "ph_dae",
            ControllerKind::PhPi => "ph_pi",
            ControllerKind::CascadedPi => "cascaded_pi",
            ControllerKind::Bass => "bass",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name() == s)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ControllerSpec {
    pub kind: ControllerKind,
    pub gamma: f64,
    pub delta: f64,
    pub delta_power: DeltaPower,
    /// Saturate θ at its bounds.
    pub clamp: bool,
    /// Bass shift; `None` picks one from the spectrum.
    pub alpha: Option<f64>,
    /// Cascaded PI battery loop reads `2 d_dc = …`.
    pub halve_duty: bool,
}

impl Default for ControllerSpec {
    fn default() -> Self {
        ControllerSpec {
            kind: ControllerKind::PhPi,
            gamma: 1e5,
            delta: 1.0,
            delta_power: DeltaPower::Single,
            clamp: true,
            alpha: None,
            halve_duty: true,
        }
    }
}

/// Holds a state alias at `value` on `[start, end)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Disturbance {
    pub quantity: String,
    pub start: f64,
    pub end: f64,
    pub value: f64,
}

/// Optional controller references; unset fields come from the steady state.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SetpointOverrides {
    pub v_bat_ref: Option<f64>,
    pub v_dc_ref: Option<f64>,
    pub i_bat_ref: Option<f64>,
    pub i_sq_ref: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub model: ModelKind,
    pub t_end: f64,
    pub sample_rate: f64,
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub theta_bar: [f64; 3],
    pub pwm: PwmConfig,
    pub params: EvcsParams,
    pub controller: ControllerSpec,
    pub setpoints: SetpointOverrides,
    /// `(alias, offset)` added to the steady state.
    pub initial: Vec<(String, f64)>,
    pub disturbances: Vec<Disturbance>,
    pub outputs: Vec<String>,
}

impl Default for Scenario {
    fn default() -> Self {
        let params = default_params();
        Scenario {
            model: ModelKind::Averaged,
            t_end: 0.1,
            sample_rate: 1e5,
            rel_tol: 1e-8,
            abs_tol: 1e-10,
            theta_bar: THETA_BAR,
            pwm: PwmConfig { f_sw: params.f_sw, carrier: Carrier::Triangle, steps_per_period: 200 },
            params,
            controller: ControllerSpec::default(),
            setpoints: SetpointOverrides::default(),
            initial: vec![],
            disturbances: vec![],
            outputs: vec!["v_dc".into(), "v_bat".into(), "i_bat".into(), "i_gq".into()],
        }
    }
}

fn perr(line: usize, col: usize, msg: impl Into<String>) -> Error {
    Error::Parse { line, col, msg: msg.into() }
}

fn fmt_f(v: f64) -> String {
    format!("{v:e}")
}

fn parse_bool(s: &str) -> Option<bool> {
    match s {
        "true" | "yes" | "on" => Some(true),
        "false" | "no" | "off" => Some(false),
        _ => None,
    }
}

impl Scenario {
    pub fn read(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    /// Parses and validates.
    pub fn parse(text: &str) -> Result<Self> {
        let sc = Self::parse_unchecked(text)?;
        sc.validate()?;
        Ok(sc)
    }

    /// Parses without the semantic checks of [`Scenario::validate`].
    pub fn parse_unchecked(text: &str) -> Result<Self> {
        let mut sc = Scenario::default();
        let mut section = String::new();
        let mut f_sw_set = false;
        let mut dist: Vec<(String, Disturbance, [bool; 4])> = vec![];
        for (li, raw) in text.lines().enumerate() {
            let line_no = li + 1;
            let line = raw.split('#').next().unwrap_or("");
            let trimmed = line.trim();
            if trimmed.is_empty() {
                continue;
            }
            let indent = line.len() - line.trim_start().len() + 1;
            if let Some(rest) = trimmed.strip_prefix('[') {
                let name =
                    rest.strip_suffix(']').ok_or_else(|| perr(line_no, indent + trimmed.len(), "missing ']'"))?.trim();
                let known = matches!(name, "model" | "params" | "controller" | "initial" | "setpoints" | "outputs")
                    || name.strip_prefix("disturbance.").is_some_and(|n| !n.is_empty());
                if !known {
                    return Err(perr(line_no, indent + 1, format!("unknown section [{name}]")));
                }
                if let Some(id) = name.strip_prefix("disturbance.") {
                    if dist.iter().any(|d| d.0 == id) {
                        return Err(perr(line_no, indent + 1, format!("duplicate section [{name}]")));
                    }
                    dist.push((
                        id.to_string(),
                        Disturbance { quantity: String::new(), start: 0.0, end: 0.0, value: 0.0 },
                        [false; 4],
                    ));
                }
                section = name.to_string();
                continue;
            }
            let (k, v) = trimmed.split_once('=').ok_or_else(|| perr(line_no, indent, "expected 'key = value'"))?;
            let key = k.trim();
            let val = v.trim();
            let vcol = line.find('=').unwrap() + 2 + (v.len() - v.trim_start().len());
            let num = || -> Result<f64> {
                val.parse::<f64>().map_err(|_| perr(line_no, vcol, format!("invalid number '{val}' for '{key}'")))
            };
            let boolean =
                || parse_bool(val).ok_or_else(|| perr(line_no, vcol, format!("expected true/false for '{key}'")));
            let unknown = || perr(line_no, indent, format!("unknown key '{key}' in [{section}]"));
            match section.as_str() {
                "" => return Err(perr(line_no, indent, "key outside of any section")),
                "model" => match key {
                    "kind" => {
                        sc.model = match val {
                            "averaged" => ModelKind::Averaged,
                            "switched" => ModelKind::Switched,
                            _ => {
                                return Err(perr(
                                    line_no,
                                    vcol,
                                    format!("model kind must be averaged or switched, got '{val}'"),
                                ))
                            }
                        }
                    }
                    "t_end" => sc.t_end = num()?,
                    "sample_rate" => sc.sample_rate = num()?,
                    "rel_tol" => sc.rel_tol = num()?,
                    "abs_tol" => sc.abs_tol = num()?,
                    "f_sw" => {
                        sc.pwm.f_sw = num()?;
                        f_sw_set = true;
                    }
                    "steps_per_period" => {
                        sc.pwm.steps_per_period =
                            val.parse().map_err(|_| perr(line_no, vcol, format!("invalid count '{val}'")))?
                    }
                    "carrier" => {
                        sc.pwm.carrier = match val {
                            "triangle" => Carrier::Triangle,
                            "sawtooth" => Carrier::Sawtooth,
                            _ => {
                                return Err(perr(
                                    line_no,
                                    vcol,
                                    format!("carrier must be triangle or sawtooth, got '{val}'"),
                                ))
                            }
                        }
                    }
                    "theta_bar" => {
                        let parts: Vec<&str> = val.split(',').map(str::trim).collect();
                        if parts.len() != 3 {
                            return Err(perr(line_no, vcol, "theta_bar needs three values"));
                        }
                        for (i, p) in parts.iter().enumerate() {
                            sc.theta_bar[i] =
                                p.parse().map_err(|_| perr(line_no, vcol, format!("invalid number '{p}'")))?;
                        }
                    }
                    _ => return Err(unknown()),
                },
                "params" => {
                    let x = num()?;
                    sc.params.set(key, x).map_err(|e| perr(line_no, indent, e.to_string()))?;
                }
                "controller" => match key {
                    "kind" => {
                        sc.controller.kind = ControllerKind::parse(val).ok_or_else(|| {
                            let names: Vec<&str> = ControllerKind::ALL.iter().map(|k| k.name()).collect();
                            perr(line_no, vcol, format!("unknown controller '{val}'; valid: {}", names.join(", ")))
                        })?
                    }
                    "gamma" => sc.controller.gamma = num()?,
                    "delta" => sc.controller.delta = num()?,
                    "delta_power" => {
                        sc.controller.delta_power = match val {
                            "single" => DeltaPower::Single,
                            "squared" => DeltaPower::Squared,
                            _ => return Err(perr(line_no, vcol, "delta_power must be single or squared")),
                        }
                    }
                    "clamp" => sc.controller.clamp = boolean()?,
                    "alpha" => sc.controller.alpha = Some(num()?),
                    "halve_duty" => sc.controller.halve_duty = boolean()?,
                    _ => return Err(unknown()),
                },
                "setpoints" => {
                    let x = Some(num()?);
                    match key {
                        "v_bat_ref" => sc.setpoints.v_bat_ref = x,
                        "v_dc_ref" => sc.setpoints.v_dc_ref = x,
                        "i_bat_ref" => sc.setpoints.i_bat_ref = x,
                        "i_sq_ref" => sc.setpoints.i_sq_ref = x,
                        _ => return Err(unknown()),
                    }
                }
                "initial" => {
                    let x = num()?;
                    if let Some(e) = sc.initial.iter_mut().find(|e| e.0 == key) {
                        e.1 = x;
                    } else {
                        sc.initial.push((key.to_string(), x));
                    }
                }
                "outputs" => match key {
                    "quantities" => {
                        sc.outputs = val.split(',').map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect()
                    }
                    _ => return Err(unknown()),
                },
                _ => {
                    let d = dist.last_mut().expect("disturbance section");
                    let slot = match key {
                        "quantity" => {
                            d.1.quantity = val.to_string();
                            0
                        }
                        "start" => {
                            d.1.start = num()?;
                            1
                        }
                        "end" => {
                            d.1.end = num()?;
                            2
                        }
                        "value" => {
                            d.1.value = num()?;
                            3
                        }
                        _ => return Err(unknown()),
                    };
                    d.2[slot] = true;
                }
            }
        }
        for (id, d, seen) in dist {
            if seen.iter().any(|s| !s) {
                return Err(Error::Validation(format!("[disturbance.{id}] needs quantity, start, end and value")));
            }
            sc.disturbances.push(d);
        }
        if !f_sw_set {
            sc.pwm.f_sw = sc.params.f_sw;
        }
        Ok(sc)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Validation(m));
        if !(self.t_end > 0.0) || !self.t_end.is_finite() {
            return bad(format!("t_end must be positive, got {}", self.t_end));
        }
        if !(self.sample_rate > 0.0) || !self.sample_rate.is_finite() {
            return bad(format!("sample_rate must be positive, got {}", self.sample_rate));
        }
        if !(self.rel_tol > 0.0 && self.abs_tol > 0.0) {
            return bad("tolerances must be positive".into());
        }
        self.params.validate()?;
        self.pwm.validate()?;
        let c = &self.controller;
        if !(c.gamma > 0.0) || !c.gamma.is_finite() {
            return bad(format!("controller gain gamma must be positive, got {}", c.gamma));
        }
        if !(c.delta > 0.0) || !c.delta.is_finite() {
            return bad(format!("controller gain delta must be positive, got {}", c.delta));
        }
        if let Some(a) = c.alpha {
            if !(a >= 0.0) || !a.is_finite() {
                return bad(format!("Bass shift alpha must be non-negative, got {a}"));
            }
        }
        for (name, _) in &self.initial {
            if state_alias(&self.params, name).is_none() {
                return bad(format!("initial deviation '{name}' is not a state or state alias"));
            }
        }
        for d in &self.disturbances {
            if state_alias(&self.params, &d.quantity).is_none() {
                return bad(format!("disturbance target '{}' is not a state or state alias", d.quantity));
            }
            if !(0.0 <= d.start && d.start < d.end && d.end <= self.t_end) {
                return bad(format!("disturbance window [{}, {}] must lie within [0, {}]", d.start, d.end, self.t_end));
            }
        }
        for o in &self.outputs {
            resolve(o)?;
        }
        Ok(())
    }

    /// Fully resolved configuration in a fixed layout. Equal for files that
    /// differ only in whitespace, comments, key order or spelled-out defaults.
    pub fn canonical(&self) -> String {
        let mut s = String::new();
        let kind = match self.model {
            ModelKind::Averaged => "averaged",
            ModelKind::Switched => "switched",
        };
        let carrier = match self.pwm.carrier {
            Carrier::Triangle => "triangle",
            Carrier::Sawtooth => "sawtooth",
        };
        writeln!(s, "[model]").unwrap();
        writeln!(s, "kind = {kind}").unwrap();
        writeln!(s, "t_end = {}", fmt_f(self.t_end)).unwrap();
        writeln!(s, "sample_rate = {}", fmt_f(self.sample_rate)).unwrap();
        writeln!(s, "rel_tol = {}", fmt_f(self.rel_tol)).unwrap();
        writeln!(s, "abs_tol = {}", fmt_f(self.abs_tol)).unwrap();
        let tb: Vec<String> = self.theta_bar.iter().map(|v| fmt_f(*v)).collect();
        writeln!(s, "theta_bar = {}", tb.join(", ")).unwrap();
        writeln!(s, "f_sw = {}", fmt_f(self.pwm.f_sw)).unwrap();
        writeln!(s, "steps_per_period = {}", self.pwm.steps_per_period).unwrap();
        writeln!(s, "carrier = {carrier}").unwrap();
        writeln!(s, "[params]").unwrap();
        for (k, _) in PARAM_KEYS {
            writeln!(s, "{k} = {}", fmt_f(self.params.get(k).unwrap())).unwrap();
        }
        let c = &self.controller;
        writeln!(s, "[controller]").unwrap();
        writeln!(s, "kind = {}", c.kind.name()).unwrap();
        writeln!(s, "gamma = {}", fmt_f(c.gamma)).unwrap();
        writeln!(s, "delta = {}", fmt_f(c.delta)).unwrap();
        let dp = match c.delta_power {
            DeltaPower::Single => "single",
            DeltaPower::Squared => "squared",
        };
        writeln!(s, "delta_power = {dp}").unwrap();
        writeln!(s, "clamp = {}", c.clamp).unwrap();
        if let Some(a) = c.alpha {
            writeln!(s, "alpha = {}", fmt_f(a)).unwrap();
        }
        writeln!(s, "halve_duty = {}", c.halve_duty).unwrap();
        let sp = &self.setpoints;
        let sps = [
            ("v_bat_ref", sp.v_bat_ref),
            ("v_dc_ref", sp.v_dc_ref),
            ("i_bat_ref", sp.i_bat_ref),
            ("i_sq_ref", sp.i_sq_ref),
        ];
        if sps.iter().any(|p| p.1.is_some()) {
            writeln!(s, "[setpoints]").unwrap();
            for (k, v) in sps {
                if let Some(v) = v {
                    writeln!(s, "{k} = {}", fmt_f(v)).unwrap();
                }
            }
        }
        if !self.initial.is_empty() {
            writeln!(s, "[initial]").unwrap();
            for (k, v) in &self.initial {
                writeln!(s, "{k} = {}", fmt_f(*v)).unwrap();
            }
        }
        for (i, d) in self.disturbances.iter().enumerate() {
            writeln!(s, "[disturbance.{}]", i + 1).unwrap();
            writeln!(s, "quantity = {}", d.quantity).unwrap();
            writeln!(s, "start = {}", fmt_f(d.start)).unwrap();
            writeln!(s, "end = {}", fmt_f(d.end)).unwrap();
            writeln!(s, "value = {}", fmt_f(d.value)).unwrap();
        }
        writeln!(s, "[outputs]").unwrap();
        writeln!(s, "quantities = {}", self.outputs.join(", ")).unwrap();
        s
    }

    /// SHA-256 of [`Scenario::canonical`], hex encoded.
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.canonical().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = "[model]\nkind = averaged\nt_end = 0.3\n[controller]\nkind = ph_p\ngamma = 1e5\n[initial]\ni_L = 50\nv_dc = 50\n[outputs]\nquantities = v_dc, i_gq\n";

    #[test]
    fn canonical_round_trip() {
        let a = Scenario::parse(SAMPLE).unwrap();
        let b = Scenario::parse(&a.canonical()).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.hash(), b.hash());
    }

    #[test]
    fn whitespace_and_comments_do_not_change_hash() {
        let noisy = SAMPLE.replace(" = ", "=").replace("[initial]", "# deviations\n\n[initial]   # here");
        assert_eq!(Scenario::parse(SAMPLE).unwrap().hash(), Scenario::parse(&noisy).unwrap().hash());
    }

    #[test]
    fn negative_gamma_names_the_gain() {
        let e = Scenario::parse(&SAMPLE.replace("gamma = 1e5", "gamma = -1")).unwrap_err();
        assert!(e.to_string().contains("gamma"), "{e}");
    }

    #[test]
    fn parse_error_has_position() {
        let e = Scenario::parse("[model]\nt_end = abc\n").unwrap_err();
        match e {
            Error::Parse { line, col, .. } => assert_eq!((line, col), (2, 9)),
            _ => panic!("{e}"),
        }
    }

    #[test]
    fn bad_window_rejected() {
        let t = "[model]\nt_end = 0.1\n[disturbance.1]\nquantity = v_dc\nstart = 0.02\nend = 0.2\nvalue = 400\n";
        assert!(Scenario::parse(t).unwrap_err().to_string().contains("window"));
    }
}
