use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use lsbd_core::ledger::{gap_prefactor, BoundParams, BoundTable, DELTA};
use lsbd_core::report::{Claim, RunReport, ScanReport, Status};
use lsbd_core::Result;

fn num(x: f64) -> String {
    format!("{x:.16e}")
}

fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

fn csv_err(e: csv::Error) -> lsbd_core::Error {
    lsbd_core::Error::Io(e.into())
}

fn write_json<T: serde::Serialize>(value: &T, path: &Path) -> Result<()> {
    let mut f = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut f, value)?;
    f.write_all(b"\n")?;
    f.flush()?;
    Ok(())
}

pub fn print_claims(claims: &[Claim]) {
    for c in claims {
        let tag = match c.status {
            Status::Pass => "pass",
            Status::Fail => "FAIL",
            Status::Skipped => "skip",
            Status::Info => "info",
        };
        println!("{tag:>4}  {:<22} {}", c.name, c.detail);
    }
}

pub fn write_run(rep: &RunReport, dir: &Path) -> Result<()> {
    write_json(rep, &dir.join("report.json"))?;

    let mut f = BufWriter::new(File::create(dir.join("spectrum.csv"))?);
    for x in rep.spectrum().unwrap_or(&[]) {
        writeln!(f, "{}", num(*x))?;
    }
    f.flush()?;

    let mut w = csv::Writer::from_path(dir.join("steps.csv")).map_err(csv_err)?;
    w.write_record([
        "k", "q", "series_order", "s_norm", "s_weighted", "gap", "ground_value", "offdiag_residual",
        "unitary_defect", "v_before", "v_after", "a_constant", "b_constant", "crosscheck",
        "max_weighted_by_length",
    ])
    .map_err(csv_err)?;
    for r in &rep.steps {
        let by_len: Vec<String> = r.max_weighted_by_length.iter().map(|x| num(*x)).collect();
        w.write_record([
            r.step.k.to_string(),
            r.step.q.to_string(),
            r.series_order.to_string(),
            num(r.s_norm),
            num(r.s_weighted),
            num(r.gap),
            num(r.ground_value),
            num(r.offdiag_residual),
            num(r.unitary_defect),
            num(r.v_before),
            num(r.v_after),
            opt(r.a_constant),
            opt(r.b_constant),
            opt(r.crosscheck),
            by_len.join(";"),
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;

    write_bounds(&BoundTable::build(rep.sites, rep.t)?, &dir.join("bounds.csv"))
}

/// Comment lines carry the constants; then one row per `(r, i, k, q)`.
pub fn write_bounds(table: &BoundTable, path: &Path) -> Result<()> {
    let params = BoundParams::new(table.t, DELTA)?;
    let mut f = BufWriter::new(File::create(path)?);
    writeln!(f, "# t = {}", num(table.t))?;
    writeln!(f, "# delta = {}", num(params.delta))?;
    writeln!(f, "# c = {}", num(params.c))?;
    writeln!(f, "# a = {}", num(params.a))?;
    writeln!(f, "# radius_a_over_4 = {}", num(params.radius()))?;
    match gap_prefactor(table.t) {
        Some(p) => writeln!(f, "# gap_prefactor = {}", num(p))?,
        None => writeln!(f, "# gap_prefactor = diverges")?,
    }
    let mut w = csv::Writer::from_writer(f);
    w.write_record(["r", "i", "k", "q", "bound", "cap", "frozen"]).map_err(csv_err)?;
    for row in &table.rows {
        w.write_record([
            row.interval.edges.to_string(),
            row.interval.left.to_string(),
            row.step.k.to_string(),
            row.step.q.to_string(),
            num(row.bound),
            num(row.cap),
            row.frozen.to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_scan(rep: &ScanReport, dir: &Path) -> Result<()> {
    write_json(rep, &dir.join("scan.json"))?;
    let mut w = csv::Writer::from_path(dir.join("scan.csv")).map_err(csv_err)?;
    w.write_record(["sites", "t", "verdict", "final_gap", "failed_claims", "error"]).map_err(csv_err)?;
    for win in &rep.windows {
        for p in &win.points {
            w.write_record([
                p.sites.to_string(),
                num(p.t),
                format!("{:?}", p.verdict).to_lowercase(),
                opt(p.final_gap),
                p.failed_claims.join(";"),
                p.error.clone().unwrap_or_default(),
            ])
            .map_err(csv_err)?;
        }
    }
    w.flush()?;
    let mut w = csv::Writer::from_path(dir.join("window.csv")).map_err(csv_err)?;
    w.write_record(["sites", "window", "largest_pass", "anomaly", "radius_a_over_4"]).map_err(csv_err)?;
    for win in &rep.windows {
        w.write_record([
            win.sites.to_string(),
            opt(win.window),
            opt(win.largest_pass),
            win.anomaly.to_string(),
            num(rep.radius),
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}
