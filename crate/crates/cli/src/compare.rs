use std::path::Path;

use anyhow::Context;
use evcs_ph::sim::csv::from_csv;
use evcs_ph::sim::metrics::{overshoot, settling_time_after, sup_distance, SETTLING_BAND};
use evcs_ph::sim::Table;

use crate::{CheckFailed, Metric};

fn load(path: &Path) -> anyhow::Result<Table> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    from_csv(&text).with_context(|| format!("parsing {}", path.display()))
}

fn series(t: &Table, q: &str, path: &Path) -> anyhow::Result<(Vec<f64>, Vec<f64>)> {
    let y = t.column(q).ok_or_else(|| {
        CheckFailed(format!("{} has no column '{q}' (columns: {})", path.display(), t.names[1..].join(", ")))
    })?;
    Ok((t.times(), y))
}

#[allow(clippy::too_many_arguments)]
pub fn run(
    a: &Path,
    b: &Path,
    quantity: &str,
    metric: Metric,
    reference: Option<f64>,
    band: Option<f64>,
    after: f64,
) -> anyhow::Result<()> {
    let (ta, ya) = series(&load(a)?, quantity, a)?;
    let (tb, yb) = series(&load(b)?, quantity, b)?;
    match metric {
        Metric::Distance => {
            let d = sup_distance(&ta, &ya, &tb, &yb)?;
            println!("sup |{quantity}_A - {quantity}_B| = {d:.6e}");
        }
        Metric::Settling | Metric::Overshoot => {
            for (label, path, t, y) in [("A", a, &ta, &ya), ("B", b, &tb, &yb)] {
                let r = reference.unwrap_or(*y.last().expect("non-empty column"));
                if metric == Metric::Overshoot {
                    println!(
                        "{label} {}: overshoot of {quantity} about {r:.6e} = {:.6e}",
                        path.display(),
                        overshoot(y, r)
                    );
                } else {
                    let w = band.unwrap_or(SETTLING_BAND * r.abs());
                    match settling_time_after(t, y, r, w, after) {
                        Some(s) => println!(
                            "{label} {}: {quantity} settles to {r:.6e} ± {w:.3e} at t = {s:.6e} s",
                            path.display()
                        ),
                        None => println!("{label} {}: {quantity} does not settle to {r:.6e} ± {w:.3e}", path.display()),
                    }
                }
            }
        }
    }
    Ok(())
}
