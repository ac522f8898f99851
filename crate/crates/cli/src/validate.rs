use std::path::Path;

use anyhow::Context;
use evcs_ph::evcs::{Quantity, N, STATE_NAMES};
use evcs_ph::numerics::Vector;
use evcs_ph::ph;
use evcs_ph::sim::{csv, prepare, Scenario};

use crate::record::{sha256_hex, Certificates, RunRecord};
use crate::CheckFailed;

/// Deterministic spread of states around `x̄` for the structural check.
fn samples(x_bar: &Vector) -> Vec<Vector> {
    let scale = x_bar.amax().max(1e-3);
    (0..16)
        .map(|k| {
            Vector::from_iterator(
                x_bar.len(),
                x_bar.iter().enumerate().map(|(i, v)| v + 0.2 * scale * ((k * 7 + i * 3) as f64).sin()),
            )
        })
        .collect()
}

pub fn run(path: &Path) -> anyhow::Result<()> {
    let sc = Scenario::read(path).with_context(|| format!("scenario {}", path.display()))?;
    let prep = prepare(&sc)?;
    let sys = prep.model.system();
    sys.check_structure()?;
    let report = ph::validate(&sys.frozen(&prep.eq.theta_bar)?, &samples(&prep.eq.x_bar))?.into_result()?;
    let p = prep.model.params();
    let th = &prep.eq.theta_bar;
    println!("scenario {} ({})", path.display(), &sc.hash()[..12]);
    println!(
        "structure: ok ({} samples, skew defect {:.2e}, min dissipation eigenvalue {:.3e})",
        report.samples, report.worst_skew_j, report.min_dissipation_eig
    );
    println!("steady state:");
    for i in 0..N {
        let q = Quantity::Alias(i);
        println!(
            "  {:<8} {:>15.6e}   {:<6} {:>12.4} {}",
            STATE_NAMES[i],
            prep.eq.x_bar[i],
            q.name(),
            q.eval(p, &prep.eq.x_bar, th),
            q.unit()
        );
    }
    println!("theta_bar = ({:.6}, {:.6}, {:.6})", th[0], th[1], th[2]);
    let cert = Certificates::of(&prep);
    println!("residual = {:.3e} (tolerance {:.3e})", cert.equilibrium_residual, cert.residual_tolerance);
    println!("{} closed loop, {} eigenvalues:", prep.controller.name(), cert.spectrum.len());
    for [re, im] in &cert.spectrum {
        println!("  {re:>14.6e} {im:>+14.6e}i");
    }
    println!("max real part = {:.6e}", cert.max_real_part);
    if cert.equilibrium_residual > cert.residual_tolerance {
        return Err(CheckFailed("equilibrium residual exceeds its tolerance".into()).into());
    }
    if !cert.hurwitz {
        return Err(CheckFailed("closed-loop Jacobian is not Hurwitz".into()).into());
    }
    println!("certificates: ok");
    Ok(())
}

/// Recomputes a record's certificates from its embedded scenario and checks
/// the CSV it points to.
pub fn verify_record(path: &Path) -> anyhow::Result<()> {
    let rec = RunRecord::read(path)?;
    let sc = Scenario::parse(&rec.scenario).context("embedded scenario")?;
    if sc.hash() != rec.scenario_hash {
        return Err(CheckFailed("scenario hash does not match the embedded configuration".into()).into());
    }
    let prep = prepare(&sc)?;
    if Certificates::of(&prep) != rec.certificates {
        return Err(CheckFailed("recomputed certificates differ from the record".into()).into());
    }
    let dir = path.parent().unwrap_or(Path::new("."));
    let csv_path = dir.join(&rec.csv);
    let text = std::fs::read_to_string(&csv_path).with_context(|| format!("reading {}", csv_path.display()))?;
    if sha256_hex(text.as_bytes()) != rec.csv_sha256 {
        return Err(CheckFailed(format!("{} does not match its recorded digest", csv_path.display())).into());
    }
    let table = csv::from_csv(&text)?;
    if table.rows.len() != rec.samples || csv::to_csv(&table) != text {
        return Err(CheckFailed(format!("{} is not a faithful CSV of the run", csv_path.display())).into());
    }
    println!("record {} verified: scenario {}, {} samples", path.display(), &rec.scenario_hash[..12], rec.samples);
    Ok(())
}
