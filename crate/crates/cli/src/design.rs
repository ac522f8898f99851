use std::path::Path;

use anyhow::Context;
use evcs_ph::control::{bass_design, rank_condition, ClosedLoop, GainSet};
use evcs_ph::evcs::{ph_controllers_evcs, EvcsModel};
use evcs_ph::numerics::{eigenvalues, Mat};
use evcs_ph::sim::Scenario;

/// `(γ, δ, use)` defaults printed by `design`.
const RECOMMENDED: [(f64, f64, &str); 2] = [(1e5, 1.0, "averaged model"), (3e6, 1.5, "switched model")];

fn report_bass(a: &Mat, dcal: &Mat, alpha: Option<f64>, show_k: bool) -> anyhow::Result<()> {
    let d = bass_design(a, dcal, alpha)?;
    println!("Bass design: alpha = {:.6e}, Lyapunov residual = {:.3e}", d.alpha, d.residual);
    if show_k {
        println!("K_hat =");
        for r in d.k_hat.row_iter() {
            let cells: Vec<String> = r.iter().map(|v| format!("{v:>11.3e}")).collect();
            println!("  {}", cells.join(" "));
        }
    }
    println!(
        "A - D D^T K_hat^-1: max real part {:.6e} ({})",
        d.closed_loop.max_real_part,
        if d.closed_loop.max_real_part < 0.0 { "Hurwitz" } else { "not Hurwitz" }
    );
    Ok(())
}

fn report_fixed(a: &Mat) -> anyhow::Result<bool> {
    let s = eigenvalues(a)?;
    let ok = s.max_real_part < 0.0;
    println!(
        "fixed theta: max real part of D(theta_bar) H = {:.6e} ({})",
        s.max_real_part,
        if ok { "Hurwitz" } else { "not Hurwitz" }
    );
    if ok {
        println!("  D(theta_bar) H is already Hurwitz: any positive definite K_theta gives a Hurwitz closed loop");
    }
    Ok(ok)
}

pub fn run_scenario(path: &Path, bass: bool, alpha: Option<f64>) -> anyhow::Result<()> {
    let sc = Scenario::read(path).with_context(|| format!("scenario {}", path.display()))?;
    let model = EvcsModel::new(sc.params)?;
    let eq = model.equilibrium_at(&sc.theta_bar)?;
    let sys = model.system();
    let dcal = sys.d_cal(&eq.x_bar)?;
    let rank = rank_condition(&sys.r_at(&eq.theta_bar), &dcal)?;
    println!("rank condition rk[R, D(x_bar)] = n: {rank}");
    if !rank {
        println!("  (sufficient only; stability is certified from the spectra below)");
    }
    let a = sys.d_matrix(&eq.theta_bar)? * sys.h();
    report_fixed(&a)?;
    if bass {
        report_bass(&a, &dcal, alpha, true)?;
    }
    println!("recommended gains (K_theta = gamma I):");
    for (gamma, delta, usage) in RECOMMENDED {
        let (p, pi) = ph_controllers_evcs(&model, &eq, gamma, delta)?;
        let dae = ClosedLoop::ph_dae(sys, &eq, GainSet::scalar(3, gamma, delta)?)?;
        println!("  gamma = {gamma:e}, delta = {delta} ({usage}):");
        for cl in [&p, &dae, &pi] {
            println!("    {:<7} max real part {:.6e}", cl.variant().name(), cl.spectrum().max_real_part);
        }
    }
    Ok(())
}

/// Parses `[A]`, `[D]` and optional `[R]` blocks of whitespace- or
/// comma-separated rows.
fn parse_system(text: &str) -> evcs_ph::Result<(Mat, Mat, Option<Mat>)> {
    use evcs_ph::Error;
    let mut blocks: Vec<(String, usize, Vec<(usize, Vec<f64>)>)> = vec![];
    for (ln, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
            blocks.push((name.trim().to_string(), ln + 1, vec![]));
            continue;
        }
        let Some(block) = blocks.last_mut() else {
            return Err(Error::Parse { line: ln + 1, col: 1, msg: "matrix row outside a [block]".into() });
        };
        let mut row = vec![];
        for tok in line.split(|c: char| c == ',' || c.is_whitespace()).filter(|t| !t.is_empty()) {
            let col = raw.find(tok).unwrap_or(0) + 1;
            row.push(tok.parse().map_err(|_| Error::Parse {
                line: ln + 1,
                col,
                msg: format!("'{tok}' is not a number"),
            })?);
        }
        block.2.push((ln + 1, row));
    }
    let mut take = |name: &str| -> evcs_ph::Result<Option<Mat>> {
        let Some(i) = blocks.iter().position(|b| b.0 == name) else { return Ok(None) };
        let (_, line, rows) = blocks.remove(i);
        let Some(cols) = rows.first().map(|r| r.1.len()) else {
            return Err(Error::Parse { line, col: 1, msg: format!("[{name}] has no rows") });
        };
        if let Some((ln, r)) = rows.iter().find(|r| r.1.len() != cols) {
            return Err(Error::Parse {
                line: *ln,
                col: 1,
                msg: format!("[{name}] row has {} entries, expected {cols}", r.len()),
            });
        }
        Ok(Some(Mat::from_fn(rows.len(), cols, |i, j| rows[i].1[j])))
    };
    let a = take("A")?.ok_or_else(|| Error::Parse { line: 1, col: 1, msg: "missing [A] block".into() })?;
    let d = take("D")?.ok_or_else(|| Error::Parse { line: 1, col: 1, msg: "missing [D] block".into() })?;
    let r = take("R")?;
    if let Some((name, line, _)) = blocks.first() {
        return Err(Error::Parse { line: *line, col: 1, msg: format!("unknown block [{name}]; expected A, D or R") });
    }
    Ok((a, d, r))
}

pub fn run_system(path: &Path, alpha: Option<f64>) -> anyhow::Result<()> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let (a, d, r) = parse_system(&text).with_context(|| format!("system {}", path.display()))?;
    if let Some(r) = &r {
        println!("rank condition rk[R, D] = n: {}", rank_condition(r, &d)?);
    }
    report_fixed(&a)?;
    report_bass(&a, &d, alpha, true)
}
