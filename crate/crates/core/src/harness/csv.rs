//! Flat CSV extracts of batch results. Floats carry 17 significant digits.

use std::io::Write;

use crate::error::Result;

use super::{GridSweep, LambdaSweep, RunRecord, SweepRecord};

pub const FIG1_HEADER: &str = "j,beta0,c_max";
pub const FIG2_HEADER: &str = "run_id,c,overlap";
pub const FIG3_HEADER: &str = "lambda,rank,overlap,mean_sigma";
pub const GRID_HEADER: &str = "beta0,beta_f,o_best,mu_best,mu2_offdiag_best";

pub fn fmt(x: f64) -> String {
    format!("{x:.16e}")
}

fn opt(x: Option<f64>) -> String {
    x.map(fmt).unwrap_or_default()
}

pub fn write_fig1<W: Write>(records: &[SweepRecord], mut w: W) -> Result<()> {
    writeln!(w, "{FIG1_HEADER}")?;
    for r in records {
        writeln!(w, "{},{},{}", fmt(r.j), fmt(r.beta0), fmt(r.c_best))?;
    }
    Ok(())
}

/// One row per successful run, in run order.
pub fn write_fig2<W: Write>(records: &[RunRecord], mut w: W) -> Result<()> {
    writeln!(w, "{FIG2_HEADER}")?;
    for r in records {
        if let Some(s) = &r.summary {
            writeln!(w, "{},{},{}", r.run_id, fmt(s.coherence), opt(s.overlap))?;
        }
    }
    Ok(())
}

/// Sorted overlaps per multiplier; `rank` counts from 0 at the smallest overlap.
pub fn write_fig3<W: Write>(sweep: &LambdaSweep, mut w: W) -> Result<()> {
    writeln!(w, "{FIG3_HEADER}")?;
    for r in &sweep.records {
        for (rank, o) in r.sorted_overlaps.iter().enumerate() {
            writeln!(w, "{},{rank},{},{}", opt(r.lambda), fmt(*o), opt(r.mean_sigma))?;
        }
    }
    Ok(())
}

pub fn write_grid<W: Write>(grid: &GridSweep, mut w: W) -> Result<()> {
    writeln!(w, "{GRID_HEADER}")?;
    for r in &grid.records {
        writeln!(
            w,
            "{},{},{},{},{}",
            fmt(r.beta0),
            opt(r.beta_f),
            opt(r.o_best),
            fmt(r.mu_best),
            fmt(r.mu2_offdiag_best)
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seventeen_significant_digits_round_trip() {
        for x in [0.1, 1.0 / 3.0, std::f64::consts::PI * 1e-7, -2.5e12] {
            let s = fmt(x);
            assert_eq!(s.parse::<f64>().unwrap(), x);
            let mantissa = s.split('e').next().unwrap().trim_start_matches('-').replace('.', "");
            assert_eq!(mantissa.len(), 17);
        }
    }
}
