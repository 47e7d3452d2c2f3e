//! CSV result files and legacy ASCII VTK snapshots.

use std::fmt::Write as _;
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::harness::ConvergenceRecord;
use crate::mesh::Mesh;

pub const CONVERGENCE_HEADER: [&str; 12] = [
    "level", "h", "tau", "dof", "err_u_l2", "err_u_h1", "err_w_l2", "err_w_h1", "eoc_u_l2", "eoc_u_h1", "eoc_w_l2",
    "eoc_w_h1",
];

pub const SERIES_HEADER: [&str; 4] = ["step", "t", "mass", "energy"];

/// 17 significant digits, enough to round-trip any f64.
fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesRow {
    pub step: usize,
    pub t: f64,
    pub mass: f64,
    pub energy: f64,
}

pub fn write_convergence_csv<W: Write>(out: W, records: &[ConvergenceRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CONVERGENCE_HEADER)?;
    for r in records {
        w.write_record([
            r.level.to_string(),
            fmt_f64(r.h),
            fmt_f64(r.tau),
            r.dof.to_string(),
            fmt_f64(r.errors.u_l2),
            fmt_f64(r.errors.u_h1),
            fmt_f64(r.errors.w_l2),
            fmt_f64(r.errors.w_h1),
            fmt_opt(r.eoc[0]),
            fmt_opt(r.eoc[1]),
            fmt_opt(r.eoc[2]),
            fmt_opt(r.eoc[3]),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn field<T: std::str::FromStr>(rec: &csv::StringRecord, i: usize, name: &str) -> Result<T> {
    rec.get(i)
        .ok_or_else(|| Error::Config(format!("missing column `{name}`")))?
        .parse()
        .map_err(|_| Error::Config(format!("cannot parse column `{name}`: `{}`", &rec[i])))
}

fn opt_field(rec: &csv::StringRecord, i: usize, name: &str) -> Result<Option<f64>> {
    match rec.get(i) {
        Some("") => Ok(None),
        Some(_) => field(rec, i, name).map(Some),
        None => Err(Error::Config(format!("missing column `{name}`"))),
    }
}

fn check_header(rdr: &mut csv::Reader<impl Read>, expected: &[&str]) -> Result<()> {
    let header = rdr.headers()?;
    if header.iter().ne(expected.iter().copied()) {
        return Err(Error::Config(format!("unexpected CSV header `{}`", header.iter().collect::<Vec<_>>().join(","))));
    }
    Ok(())
}

pub fn read_convergence_csv<R: Read>(input: R) -> Result<Vec<ConvergenceRecord>> {
    let mut rdr = csv::Reader::from_reader(input);
    check_header(&mut rdr, &CONVERGENCE_HEADER)?;
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let names = &CONVERGENCE_HEADER;
        out.push(ConvergenceRecord {
            level: field(&rec, 0, names[0])?,
            h: field(&rec, 1, names[1])?,
            tau: field(&rec, 2, names[2])?,
            dof: field(&rec, 3, names[3])?,
            errors: crate::harness::ErrorTuple {
                u_l2: field(&rec, 4, names[4])?,
                u_h1: field(&rec, 5, names[5])?,
                w_l2: field(&rec, 6, names[6])?,
                w_h1: field(&rec, 7, names[7])?,
            },
            eoc: [
                opt_field(&rec, 8, names[8])?,
                opt_field(&rec, 9, names[9])?,
                opt_field(&rec, 10, names[10])?,
                opt_field(&rec, 11, names[11])?,
            ],
        });
    }
    Ok(out)
}

pub fn write_series_csv<W: Write>(out: W, rows: &[SeriesRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(SERIES_HEADER)?;
    for r in rows {
        w.write_record([r.step.to_string(), fmt_f64(r.t), fmt_f64(r.mass), fmt_f64(r.energy)])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_series_csv<R: Read>(input: R) -> Result<Vec<SeriesRow>> {
    let mut rdr = csv::Reader::from_reader(input);
    check_header(&mut rdr, &SERIES_HEADER)?;
    rdr.records()
        .map(|rec| {
            let rec = rec?;
            Ok(SeriesRow {
                step: field(&rec, 0, "step")?,
                t: field(&rec, 1, "t")?,
                mass: field(&rec, 2, "mass")?,
                energy: field(&rec, 3, "energy")?,
            })
        })
        .collect()
}

/// Legacy ASCII VTK unstructured grid with point scalars `u` and `w`.
pub fn write_vtk<W: Write>(mut out: W, mesh: &Mesh, step: usize, u: &[f64], w: &[f64]) -> Result<()> {
    let n = mesh.n_vertices();
    let nt = mesh.triangles().len();
    let mut s = String::with_capacity(64 * n);
    let _ = writeln!(s, "# vtk DataFile Version 3.0");
    let _ = writeln!(s, "phase field at step {step}");
    let _ = writeln!(s, "ASCII");
    let _ = writeln!(s, "DATASET UNSTRUCTURED_GRID");
    let _ = writeln!(s, "POINTS {n} double");
    for p in mesh.vertices() {
        let _ = writeln!(s, "{} {} 0", fmt_f64(p[0]), fmt_f64(p[1]));
    }
    let _ = writeln!(s, "CELLS {nt} {}", 4 * nt);
    for t in mesh.triangles() {
        let _ = writeln!(s, "3 {} {} {}", t[0], t[1], t[2]);
    }
    let _ = writeln!(s, "CELL_TYPES {nt}");
    for _ in 0..nt {
        let _ = writeln!(s, "5");
    }
    let _ = writeln!(s, "POINT_DATA {n}");
    for (name, values) in [("u", u), ("w", w)] {
        let _ = writeln!(s, "SCALARS {name} double 1");
        let _ = writeln!(s, "LOOKUP_TABLE default");
        for v in values {
            let _ = writeln!(s, "{}", fmt_f64(*v));
        }
    }
    out.write_all(s.as_bytes())?;
    Ok(())
}

pub fn write_vtk_file(dir: &Path, mesh: &Mesh, step: usize, u: &[f64], w: &[f64]) -> Result<std::path::PathBuf> {
    let path = dir.join(format!("snapshot_{step}.vtk"));
    let file = std::io::BufWriter::new(std::fs::File::create(&path)?);
    write_vtk(file, mesh, step, u, w)?;
    Ok(path)
}
