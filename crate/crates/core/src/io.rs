//! Diagnostics table and mesh snapshots.
//!
//! `diagnostics.csv` starts with a `# schema_version=1` line followed by a
//! header row. Snapshots are legacy VTK polydata (ASCII) with one polygon
//! per cell and per-cell fields.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::bench::{fit_order, schlieren};
use crate::error::{Error, Result};
use crate::geometry::Vec2;
use crate::sim::{Simulation, StepRecord};
use crate::state::FlowState;
use crate::voronoi::Mesh;

pub const SCHEMA_VERSION: u32 = 1;

/// Columns present in every diagnostics table, before the scenario columns.
pub const BASE_COLUMNS: [&str; 16] = [
    "step",
    "time",
    "dt",
    "mass_0",
    "mass_1",
    "momentum_x",
    "momentum_y",
    "energy",
    "energy_0",
    "energy_1",
    "q_step",
    "q_mesh",
    "remapped",
    "viscous_cg",
    "pressure_cg",
    "fixed_point",
];

pub struct DiagnosticsWriter<W: Write> {
    csv: csv::Writer<W>,
}

impl DiagnosticsWriter<BufWriter<File>> {
    pub fn create(path: &Path, observables: &[&str]) -> Result<Self> {
        Self::new(BufWriter::new(File::create(path)?), observables)
    }
}

impl<W: Write> DiagnosticsWriter<W> {
    pub fn new(mut out: W, observables: &[&str]) -> Result<Self> {
        writeln!(out, "# schema_version={SCHEMA_VERSION}")?;
        let mut csv = csv::Writer::from_writer(out);
        let header: Vec<&str> = BASE_COLUMNS.iter().copied().chain(observables.iter().copied()).collect();
        csv.write_record(&header)?;
        Ok(Self { csv })
    }

    /// Row for the current state; `record` is `None` for the initial row.
    pub fn write(&mut self, sim: &Simulation, record: Option<&StepRecord>, observables: &[f64]) -> Result<()> {
        let s = &sim.state;
        let u = s.total_momentum(None);
        let q = sim.quality();
        let mut row: Vec<String> = vec![
            sim.steps.to_string(),
            fmt(sim.t),
            fmt(record.map_or(0.0, |r| r.dt)),
            fmt(s.total_mass(Some(0))),
            fmt(s.total_mass(Some(1))),
            fmt(u.x),
            fmt(u.y),
            fmt(s.total_energy(None)),
            fmt(s.total_energy(Some(0))),
            fmt(s.total_energy(Some(1))),
            fmt(record.map_or(q, |r| r.q_step)),
            fmt(q),
            u8::from(record.is_some_and(|r| r.remap.triggered)).to_string(),
            record.map_or(0, |r| r.stats.viscous_cg).to_string(),
            record.map_or(0, |r| r.stats.pressure_cg).to_string(),
            record.map_or(0, |r| r.stats.fixed_point).to_string(),
        ];
        row.extend(observables.iter().map(|v| fmt(*v)));
        self.csv.write_record(&row)?;
        Ok(())
    }

    pub fn flush(&mut self) -> Result<()> {
        self.csv.flush()?;
        Ok(())
    }
}

/// Shortest representation that parses back to the same bits.
fn fmt(v: f64) -> String {
    format!("{v:e}")
}

/// Parsed diagnostics table.
#[derive(Debug, Clone, PartialEq)]
pub struct Diagnostics {
    pub schema_version: u32,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Diagnostics {
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let k = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[k]).collect())
    }
}

pub fn read_diagnostics(path: &Path) -> Result<Diagnostics> {
    let mut reader = BufReader::new(File::open(path)?);
    let mut first = String::new();
    reader.read_line(&mut first)?;
    let schema_version = first
        .trim()
        .strip_prefix("# schema_version=")
        .and_then(|v| v.parse().ok())
        .ok_or_else(|| Error::Snapshot(format!("missing schema version line in {}", path.display())))?;
    let mut csv = csv::Reader::from_reader(reader);
    let columns: Vec<String> = csv.headers()?.iter().map(str::to_string).collect();
    let mut rows = Vec::new();
    for rec in csv.records() {
        let rec = rec?;
        let row: std::result::Result<Vec<f64>, _> = rec.iter().map(str::parse::<f64>).collect();
        rows.push(row.map_err(|e| Error::Snapshot(format!("bad number in diagnostics: {e}")))?);
    }
    Ok(Diagnostics { schema_version, columns, rows })
}

/// One resolution of a convergence study.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvergenceRow {
    pub resolution: f64,
    pub h: f64,
    pub velocity_error: f64,
    pub pressure_error: f64,
}

pub const CONVERGENCE_COLUMNS: [&str; 4] = ["resolution", "h", "l2_velocity_error", "l2_pressure_error"];

/// Least-squares orders of a convergence table; `None` below two rows.
pub fn convergence_orders(rows: &[ConvergenceRow]) -> (Option<f64>, Option<f64>) {
    let h: Vec<f64> = rows.iter().map(|r| r.h).collect();
    let ev: Vec<f64> = rows.iter().map(|r| r.velocity_error).collect();
    let ep: Vec<f64> = rows.iter().map(|r| r.pressure_error).collect();
    (fit_order(&h, &ev), fit_order(&h, &ep))
}

/// Writes the table with the schema line, the fitted orders as comment
/// lines (`na` when unavailable) and one row per resolution.
pub fn write_convergence(path: &Path, rows: &[ConvergenceRow]) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    let (ov, op) = convergence_orders(rows);
    let show = |o: Option<f64>| o.map_or("na".to_string(), fmt);
    writeln!(out, "# schema_version={SCHEMA_VERSION}")?;
    writeln!(out, "# order_velocity={}", show(ov))?;
    writeln!(out, "# order_pressure={}", show(op))?;
    let mut csv = csv::Writer::from_writer(out);
    csv.write_record(CONVERGENCE_COLUMNS)?;
    for r in rows {
        csv.write_record([r.resolution, r.h, r.velocity_error, r.pressure_error].map(fmt))?;
    }
    csv.flush()?;
    Ok(())
}

pub fn read_convergence(path: &Path) -> Result<Vec<ConvergenceRow>> {
    let text = std::fs::read_to_string(path)?;
    if !text.starts_with(&format!("# schema_version={SCHEMA_VERSION}")) {
        return Err(Error::Snapshot(format!("missing schema version line in {}", path.display())));
    }
    let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(text.as_bytes());
    if rdr.headers()?.iter().ne(CONVERGENCE_COLUMNS) {
        return Err(Error::Snapshot(format!("unexpected convergence columns in {}", path.display())));
    }
    let mut rows = Vec::new();
    for rec in rdr.deserialize() {
        let (resolution, h, velocity_error, pressure_error): (f64, f64, f64, f64) = rec?;
        rows.push(ConvergenceRow { resolution, h, velocity_error, pressure_error });
    }
    Ok(rows)
}

/// Writes one snapshot. Cell fields: rho, speed, pressure, color,
/// schlieren, mass, specific_energy and the velocity vector.
pub fn write_snapshot(path: &Path, mesh: &Mesh, state: &FlowState, t: f64, step: usize) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    let npts: usize = mesh.cells.iter().map(|c| c.vertices.len()).sum();
    writeln!(w, "# vtk DataFile Version 3.0")?;
    writeln!(w, "voroflow snapshot time={} step={step}", fmt(t))?;
    writeln!(w, "ASCII")?;
    writeln!(w, "DATASET POLYDATA")?;
    writeln!(w, "POINTS {npts} double")?;
    for c in &mesh.cells {
        for v in &c.vertices {
            writeln!(w, "{} {} 0", fmt(v.x), fmt(v.y))?;
        }
    }
    writeln!(w, "POLYGONS {} {}", mesh.len(), npts + mesh.len())?;
    let mut k = 0;
    for c in &mesh.cells {
        let ids: Vec<String> = (k..k + c.vertices.len()).map(|i| i.to_string()).collect();
        writeln!(w, "{} {}", c.vertices.len(), ids.join(" "))?;
        k += c.vertices.len();
    }
    writeln!(w, "CELL_DATA {}", mesh.len())?;
    let speed: Vec<f64> = state.v.iter().map(|v| v.norm()).collect();
    let color: Vec<f64> = state.color.iter().map(|&c| c as f64).collect();
    let fields: [(&str, &[f64]); 7] = [
        ("rho", &state.rho),
        ("speed", &speed),
        ("pressure", &state.p),
        ("color", &color),
        ("schlieren", &schlieren(mesh, &state.rho)),
        ("mass", &state.mass),
        ("specific_energy", &state.e),
    ];
    for (name, values) in fields {
        writeln!(w, "SCALARS {name} double 1")?;
        writeln!(w, "LOOKUP_TABLE default")?;
        for v in values {
            writeln!(w, "{}", fmt(*v))?;
        }
    }
    writeln!(w, "VECTORS velocity double")?;
    for v in &state.v {
        writeln!(w, "{} {} 0", fmt(v.x), fmt(v.y))?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub time: f64,
    pub step: usize,
    pub polygons: Vec<Vec<Vec2>>,
    pub scalars: BTreeMap<String, Vec<f64>>,
    pub velocity: Vec<Vec2>,
}

impl Snapshot {
    pub fn scalar(&self, name: &str) -> Result<&[f64]> {
        self.scalars.get(name).map(Vec::as_slice).ok_or_else(|| Error::Snapshot(format!("no field '{name}'")))
    }

    pub fn total_mass(&self, color: Option<u8>) -> Result<f64> {
        let (m, c) = (self.scalar("mass")?, self.scalar("color")?);
        Ok(m.iter().zip(c).filter(|(_, &k)| color.is_none_or(|col| k == col as f64)).map(|(m, _)| m).sum())
    }

    pub fn total_momentum(&self) -> Result<Vec2> {
        let m = self.scalar("mass")?;
        Ok(m.iter().zip(&self.velocity).map(|(m, v)| *m * v).sum())
    }

    pub fn total_energy(&self) -> Result<f64> {
        let (m, e) = (self.scalar("mass")?, self.scalar("specific_energy")?);
        Ok(m.iter().zip(e).map(|(m, e)| m * e).sum())
    }
}

pub fn read_snapshot(path: &Path) -> Result<Snapshot> {
    let text = std::fs::read_to_string(path)?;
    let bad = |msg: &str| Error::Snapshot(format!("{}: {msg}", path.display()));
    let mut lines = text.lines();
    if !lines.next().is_some_and(|l| l.starts_with("# vtk DataFile")) {
        return Err(bad("not a legacy VTK file"));
    }
    let title = lines.next().ok_or_else(|| bad("missing title"))?;
    let field = |key: &str| title.split_whitespace().find_map(|tok| tok.strip_prefix(key));
    let time: f64 = field("time=").and_then(|v| v.parse().ok()).ok_or_else(|| bad("missing time"))?;
    let step: usize = field("step=").and_then(|v| v.parse().ok()).ok_or_else(|| bad("missing step"))?;
    if lines.next() != Some("ASCII") || lines.next() != Some("DATASET POLYDATA") {
        return Err(bad("expected ASCII polydata"));
    }
    let num = |s: Option<&str>| -> Result<f64> {
        s.and_then(|v| v.parse().ok()).ok_or_else(|| bad("malformed number"))
    };
    let header = lines.next().ok_or_else(|| bad("missing POINTS"))?;
    let npts: usize = header
        .strip_prefix("POINTS ")
        .and_then(|r| r.split_whitespace().next())
        .and_then(|n| n.parse().ok())
        .ok_or_else(|| bad("malformed POINTS line"))?;
    let mut points = Vec::with_capacity(npts);
    for _ in 0..npts {
        let mut it = lines.next().ok_or_else(|| bad("truncated points"))?.split_whitespace();
        points.push(Vec2::new(num(it.next())?, num(it.next())?));
    }
    let header = lines.next().ok_or_else(|| bad("missing POLYGONS"))?;
    let ncells: usize = header
        .strip_prefix("POLYGONS ")
        .and_then(|r| r.split_whitespace().next())
        .and_then(|n| n.parse().ok())
        .ok_or_else(|| bad("malformed POLYGONS line"))?;
    let mut polygons = Vec::with_capacity(ncells);
    for _ in 0..ncells {
        let ids: Vec<usize> = lines
            .next()
            .ok_or_else(|| bad("truncated polygons"))?
            .split_whitespace()
            .map(|t| t.parse().map_err(|_| bad("bad vertex index")))
            .collect::<Result<_>>()?;
        let (count, rest) = ids.split_first().ok_or_else(|| bad("empty polygon"))?;
        if *count != rest.len() || rest.iter().any(|&i| i >= npts) {
            return Err(bad("inconsistent polygon"));
        }
        polygons.push(rest.iter().map(|&i| points[i]).collect());
    }
    let mut scalars = BTreeMap::new();
    let mut velocity = Vec::new();
    while let Some(line) = lines.next() {
        let mut tok = line.split_whitespace();
        match tok.next() {
            Some("CELL_DATA") | None => {}
            Some("SCALARS") => {
                let name = tok.next().ok_or_else(|| bad("unnamed scalar"))?.to_string();
                lines.next();
                let mut values = Vec::with_capacity(ncells);
                for _ in 0..ncells {
                    values.push(num(lines.next())?);
                }
                scalars.insert(name, values);
            }
            Some("VECTORS") => {
                for _ in 0..ncells {
                    let mut it = lines.next().ok_or_else(|| bad("truncated vectors"))?.split_whitespace();
                    velocity.push(Vec2::new(num(it.next())?, num(it.next())?));
                }
            }
            Some(other) => return Err(bad(&format!("unexpected section {other}"))),
        }
    }
    Ok(Snapshot { time, step, polygons, scalars, velocity })
}
