//! Generic port-Hamiltonian systems with quadratic Hamiltonian
//! `ℋ(x) = ½ xᵀ H x`:
//!
//! ```text
//! ẋ = (J − R)(x) ∇ℋ(x) + (B − P)(x) u
//! y = (B + P)ᵀ(x) ∇ℋ(x) + (S − N)(x) u
//! ```

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::numerics::{min_sym_eig, Mat, Vector};

pub type MatFn = Arc<dyn Fn(&Vector) -> Mat + Send + Sync>;

/// A coefficient matrix, either constant or state dependent.
#[derive(Clone)]
pub enum Coeff {
    Const(Mat),
    Func { rows: usize, cols: usize, f: MatFn },
}

impl std::fmt::Debug for Coeff {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Coeff::Const(m) => write!(f, "Const({}x{})", m.nrows(), m.ncols()),
            Coeff::Func { rows, cols, .. } => write!(f, "Func({rows}x{cols})"),
        }
    }
}

impl Coeff {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Coeff::Const(Mat::zeros(rows, cols))
    }

    pub fn func(rows: usize, cols: usize, f: impl Fn(&Vector) -> Mat + Send + Sync + 'static) -> Self {
        Coeff::Func { rows, cols, f: Arc::new(f) }
    }

    pub fn shape(&self) -> (usize, usize) {
        match self {
            Coeff::Const(m) => (m.nrows(), m.ncols()),
            Coeff::Func { rows, cols, .. } => (*rows, *cols),
        }
    }

    pub fn at(&self, x: &Vector) -> Mat {
        match self {
            Coeff::Const(m) => m.clone(),
            Coeff::Func { f, .. } => f(x),
        }
    }
}

impl From<Mat> for Coeff {
    fn from(m: Mat) -> Self {
        Coeff::Const(m)
    }
}

/// Port-Hamiltonian system. Immutable after construction.
#[derive(Clone, Debug)]
pub struct PhSystem {
    n: usize,
    m: usize,
    j: Coeff,
    r: Coeff,
    b: Coeff,
    p: Coeff,
    s: Coeff,
    nn: Coeff,
    h: Mat,
}

fn expect_shape(name: &str, c: &Coeff, shape: (usize, usize)) -> Result<()> {
    if c.shape() != shape {
        return Err(Error::Dimension(format!("{name} has shape {:?}, expected {:?}", c.shape(), shape)));
    }
    Ok(())
}

impl PhSystem {
    /// System with `P = S = N = 0`.
    pub fn new(j: impl Into<Coeff>, r: impl Into<Coeff>, b: impl Into<Coeff>, h: Mat) -> Result<Self> {
        let b = b.into();
        let (n, m) = b.shape();
        Self::full(j, r, b, Coeff::zeros(n, m), Coeff::zeros(m, m), Coeff::zeros(m, m), h)
    }

    pub fn full(
        j: impl Into<Coeff>,
        r: impl Into<Coeff>,
        b: impl Into<Coeff>,
        p: impl Into<Coeff>,
        s: impl Into<Coeff>,
        nn: impl Into<Coeff>,
        h: Mat,
    ) -> Result<Self> {
        let (j, r, b, p, s, nn) = (j.into(), r.into(), b.into(), p.into(), s.into(), nn.into());
        let (n, m) = b.shape();
        expect_shape("J", &j, (n, n))?;
        expect_shape("R", &r, (n, n))?;
        expect_shape("P", &p, (n, m))?;
        expect_shape("S", &s, (m, m))?;
        expect_shape("N", &nn, (m, m))?;
        if h.shape() != (n, n) {
            return Err(Error::Dimension(format!("H has shape {:?}, expected ({n}, {n})", h.shape())));
        }
        Ok(PhSystem { n, m, j, r, b, p, s, nn, h })
    }

    pub fn n(&self) -> usize {
        self.n
    }
    pub fn m(&self) -> usize {
        self.m
    }
    pub fn h(&self) -> &Mat {
        &self.h
    }
    pub fn j_at(&self, x: &Vector) -> Mat {
        self.j.at(x)
    }
    pub fn r_at(&self, x: &Vector) -> Mat {
        self.r.at(x)
    }
    pub fn b_at(&self, x: &Vector) -> Mat {
        self.b.at(x)
    }
    pub fn p_at(&self, x: &Vector) -> Mat {
        self.p.at(x)
    }
    pub fn s_at(&self, x: &Vector) -> Mat {
        self.s.at(x)
    }
    pub fn n_at(&self, x: &Vector) -> Mat {
        self.nn.at(x)
    }

    fn check(&self, x: &Vector, u: &Vector) -> Result<()> {
        if x.len() != self.n || u.len() != self.m {
            return Err(Error::Dimension(format!(
                "state/input lengths {}/{} do not match n = {}, m = {}",
                x.len(),
                u.len(),
                self.n,
                self.m
            )));
        }
        Ok(())
    }

    pub fn hamiltonian(&self, x: &Vector) -> f64 {
        0.5 * x.dot(&(&self.h * x))
    }

    pub fn grad_hamiltonian(&self, x: &Vector) -> Vector {
        &self.h * x
    }

    pub fn rhs(&self, x: &Vector, u: &Vector) -> Result<Vector> {
        self.check(x, u)?;
        let e = self.grad_hamiltonian(x);
        Ok((self.j_at(x) - self.r_at(x)) * e + (self.b_at(x) - self.p_at(x)) * u)
    }

    pub fn output(&self, x: &Vector, u: &Vector) -> Result<Vector> {
        self.check(x, u)?;
        let e = self.grad_hamiltonian(x);
        Ok((self.b_at(x) + self.p_at(x)).transpose() * e + (self.s_at(x) - self.n_at(x)) * u)
    }

    /// Dissipation block `[[R, P], [Pᵀ, S]]` at `x`.
    pub fn dissipation_block(&self, x: &Vector) -> Mat {
        let (n, m) = (self.n, self.m);
        let mut w = Mat::zeros(n + m, n + m);
        let p = self.p_at(x);
        w.view_mut((0, 0), (n, n)).copy_from(&self.r_at(x));
        w.view_mut((0, n), (n, m)).copy_from(&p);
        w.view_mut((n, 0), (m, n)).copy_from(&p.transpose());
        w.view_mut((n, n), (m, m)).copy_from(&self.s_at(x));
        w
    }

    pub fn power_balance(&self, x: &Vector, u: &Vector) -> Result<PowerBalance> {
        let y = self.output(x, u)?;
        let e = self.grad_hamiltonian(x);
        let mut eu = Vector::zeros(self.n + self.m);
        eu.rows_mut(0, self.n).copy_from(&e);
        eu.rows_mut(self.n, self.m).copy_from(u);
        let w = self.dissipation_block(x);
        Ok(PowerBalance { supplied: u.dot(&y), dissipated: eu.dot(&(&w * &eu)), stored_rate: e.dot(&self.rhs(x, u)?) })
    }
}

/// Instantaneous power terms of a pH system.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerBalance {
    pub supplied: f64,
    pub dissipated: f64,
    pub stored_rate: f64,
}

impl PowerBalance {
    pub fn scale(&self) -> f64 {
        1.0 + self.supplied.abs() + self.dissipated.abs()
    }

    /// `stored_rate − (supplied − dissipated)`.
    pub fn residual(&self) -> f64 {
        self.stored_rate - (self.supplied - self.dissipated)
    }

    pub fn holds(&self, rel: f64) -> bool {
        let sc = self.scale();
        self.residual().abs() <= rel * sc && self.dissipated >= -rel * sc
    }
}

/// A single structural violation found by [`validate`].
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub matrix: &'static str,
    pub state_index: usize,
    pub value: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    pub samples: usize,
    /// Worst `‖J + Jᵀ‖_max / max(1, ‖J‖_max)`.
    pub worst_skew_j: f64,
    pub worst_skew_n: f64,
    /// Smallest eigenvalue of the dissipation block over all samples.
    pub min_dissipation_eig: f64,
    pub min_h_eig: f64,
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn into_result(self) -> Result<Self> {
        match self.violations.first() {
            None => Ok(self),
            Some(v) => Err(Error::Validation(format!(
                "{} violated at sample {} (value {:.3e}); {} violation(s) in total",
                v.matrix,
                v.state_index,
                v.value,
                self.violations.len()
            ))),
        }
    }
}

pub const SKEW_TOL: f64 = 1e-12;
pub const DISSIPATION_TOL: f64 = 1e-9;

pub fn skew_defect(a: &Mat) -> f64 {
    let d = (a + a.transpose()).amax();
    d / a.amax().max(1.0)
}

/// Checks skewness of `J`, `N`, semidefiniteness of the dissipation block
/// and definiteness of `H` at every sample state.
pub fn validate(sys: &PhSystem, samples: &[Vector]) -> Result<ValidationReport> {
    if samples.is_empty() {
        return Err(Error::Validation("no sample states given".into()));
    }
    let mut rep = ValidationReport {
        samples: samples.len(),
        min_dissipation_eig: f64::INFINITY,
        min_h_eig: min_sym_eig(sys.h())?,
        ..Default::default()
    };
    let hasym = (sys.h() - sys.h().transpose()).amax();
    if hasym > SKEW_TOL * sys.h().amax().max(1.0) {
        rep.violations.push(Violation { matrix: "H (symmetry)", state_index: 0, value: hasym });
    }
    if rep.min_h_eig <= 0.0 {
        rep.violations.push(Violation { matrix: "H", state_index: 0, value: rep.min_h_eig });
    }
    for (i, x) in samples.iter().enumerate() {
        if x.len() != sys.n() {
            return Err(Error::Dimension(format!("sample {i} has length {}, expected {}", x.len(), sys.n())));
        }
        let sj = skew_defect(&sys.j_at(x));
        let sn = skew_defect(&sys.n_at(x));
        rep.worst_skew_j = rep.worst_skew_j.max(sj);
        rep.worst_skew_n = rep.worst_skew_n.max(sn);
        if sj > SKEW_TOL {
            rep.violations.push(Violation { matrix: "J", state_index: i, value: sj });
        }
        if sn > SKEW_TOL {
            rep.violations.push(Violation { matrix: "N", state_index: i, value: sn });
        }
        let r = sys.r_at(x);
        let sym_r = (&r - r.transpose()).amax();
        if sym_r > SKEW_TOL * r.amax().max(1.0) {
            rep.violations.push(Violation { matrix: "R (symmetry)", state_index: i, value: sym_r });
        }
        let ev = min_sym_eig(&sys.dissipation_block(x))?;
        rep.min_dissipation_eig = rep.min_dissipation_eig.min(ev);
        if ev < -DISSIPATION_TOL {
            let rmin = min_sym_eig(&r)?;
            let name = if rmin < -DISSIPATION_TOL { "R" } else { "[[R,P],[Pᵀ,S]]" };
            rep.violations.push(Violation { matrix: name, state_index: i, value: ev });
        }
    }
    Ok(rep)
}

/// Electrical role of a port.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PortRole {
    /// Voltage is the input, current the output.
    Voltage,
    /// Current is the input, voltage the output.
    Current,
    Mixed,
}

/// Partition of the input columns into ports used for coupling (`out`) and
/// the remaining external ports (`in`).
#[derive(Debug, Clone, PartialEq)]
pub struct PortLabeling {
    pub in_ports: Vec<(usize, PortRole)>,
    pub out_ports: Vec<(usize, PortRole)>,
}

impl PortLabeling {
    fn check(&self, m: usize) -> Result<()> {
        let mut seen = vec![false; m];
        for &(i, _) in self.in_ports.iter().chain(&self.out_ports) {
            if i >= m || seen[i] {
                return Err(Error::Coupling(format!("port index {i} out of range or repeated (m = {m})")));
            }
            seen[i] = true;
        }
        if seen.iter().any(|s| !s) {
            return Err(Error::Coupling("port labeling does not cover every input".into()));
        }
        Ok(())
    }

    fn idx_in(&self) -> Vec<usize> {
        self.in_ports.iter().map(|p| p.0).collect()
    }
    fn idx_out(&self) -> Vec<usize> {
        self.out_ports.iter().map(|p| p.0).collect()
    }
}

fn columns(m: &Mat, idx: &[usize]) -> Mat {
    let mut out = Mat::zeros(m.nrows(), idx.len());
    for (k, &i) in idx.iter().enumerate() {
        out.set_column(k, &m.column(i));
    }
    out
}

/// Power-conserving coupling `i_{o,1} = i_{i,2}`, `v_{o,1} = v_{i,2}` of two
/// systems with constant input maps and `P = S = N = 0`.
///
/// The out-ports of `sys1` are joined to the in-ports of `sys2`. The
/// composite has state `(x₁, x₂)`, Hamiltonian `diag(H₁, H₂)` and structure
///
/// ```text
/// [[J₁ − R₁, −B_{o,1} B_{i,2}ᵀ], [B_{i,2} B_{o,1}ᵀ, J₂ − R₂]]
/// ```
///
/// with external inputs `(u_{i,1}, u_{o,2})`.
pub fn interconnect(
    sys1: &PhSystem,
    ports1: &PortLabeling,
    sys2: &PhSystem,
    ports2: &PortLabeling,
) -> Result<PhSystem> {
    ports1.check(sys1.m())?;
    ports2.check(sys2.m())?;
    if ports1.out_ports.len() != ports2.in_ports.len() {
        return Err(Error::Dimension(format!(
            "sys1 has {} out-ports but sys2 has {} in-ports",
            ports1.out_ports.len(),
            ports2.in_ports.len()
        )));
    }
    for (a, b) in ports1.out_ports.iter().zip(&ports2.in_ports) {
        let ok = matches!((a.1, b.1), (PortRole::Mixed, PortRole::Mixed) | (PortRole::Current, PortRole::Voltage));
        if !ok {
            return Err(Error::Coupling(format!(
                "unsupported role pair {:?} -> {:?}; only the current-out/voltage-in coupling is implemented",
                a.1, b.1
            )));
        }
    }
    let probe = |s: &PhSystem| -> Result<Mat> {
        match &s.b {
            Coeff::Const(b) => {
                let zero = Vector::zeros(s.n());
                let p = s.p_at(&zero);
                if p.amax() != 0.0 || s.s_at(&zero).amax() != 0.0 || s.n_at(&zero).amax() != 0.0 {
                    return Err(Error::Coupling("feed-through terms P, S, N must vanish".into()));
                }
                Ok(b.clone())
            }
            Coeff::Func { .. } => Err(Error::Coupling("state-dependent B is not supported".into())),
        }
    };
    let b1 = probe(sys1)?;
    let b2 = probe(sys2)?;
    let bi1 = columns(&b1, &ports1.idx_in());
    let bo1 = columns(&b1, &ports1.idx_out());
    let bi2 = columns(&b2, &ports2.idx_in());
    let bo2 = columns(&b2, &ports2.idx_out());
    let (n1, n2) = (sys1.n(), sys2.n());
    let n = n1 + n2;
    let c12 = -(&bo1 * bi2.transpose());
    let c21 = &bi2 * bo1.transpose();

    let (s1j, s1r, s2j, s2r) = (sys1.j.clone(), sys1.r.clone(), sys2.j.clone(), sys2.r.clone());
    let split = move |x: &Vector| (x.rows(0, n1).into_owned(), x.rows(n1, n2).into_owned());
    let j = Coeff::func(n, n, move |x| {
        let (x1, x2) = split(x);
        let mut out = Mat::zeros(n, n);
        out.view_mut((0, 0), (n1, n1)).copy_from(&s1j.at(&x1));
        out.view_mut((n1, n1), (n2, n2)).copy_from(&s2j.at(&x2));
        out.view_mut((0, n1), (n1, n2)).copy_from(&c12);
        out.view_mut((n1, 0), (n2, n1)).copy_from(&c21);
        out
    });
    let r = Coeff::func(n, n, move |x| {
        let (x1, x2) = split(x);
        let mut out = Mat::zeros(n, n);
        out.view_mut((0, 0), (n1, n1)).copy_from(&s1r.at(&x1));
        out.view_mut((n1, n1), (n2, n2)).copy_from(&s2r.at(&x2));
        out
    });
    let (mi, mo) = (bi1.ncols(), bo2.ncols());
    let mut b = Mat::zeros(n, mi + mo);
    b.view_mut((0, 0), (n1, mi)).copy_from(&bi1);
    b.view_mut((n1, mi), (n2, mo)).copy_from(&bo2);
    let mut h = Mat::zeros(n, n);
    h.view_mut((0, 0), (n1, n1)).copy_from(sys1.h());
    h.view_mut((n1, n1), (n2, n2)).copy_from(sys2.h());
    PhSystem::new(j, r, b, h)
}
