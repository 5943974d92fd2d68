//! CSV readers and writers for particle and vortex files.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::expansions::Charge;
use crate::vortex::Vortex;

pub const PARTICLE_HEADER: [&str; 3] = ["x", "y", "q"];
pub const VORTEX_HEADER: [&str; 3] = ["x", "y", "gamma"];

fn read_triples(path: &Path, header: [&str; 3]) -> Result<Vec<[f64; 3]>> {
    let name = path.display().to_string();
    let file = std::fs::File::open(path)?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(file);
    let parse_err = |line: u64, message: String| Error::Parse {
        path: name.clone(),
        line,
        message,
    };

    let found = reader.headers().map_err(|e| parse_err(1, e.to_string()))?;
    if found.iter().collect::<Vec<_>>() != header {
        return Err(parse_err(
            1,
            format!(
                "expected header {:?}, found {:?}",
                header.join(","),
                found.iter().collect::<Vec<_>>().join(",")
            ),
        ));
    }

    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map(|p| p.line()).unwrap_or(0);
            parse_err(line, e.to_string())
        })?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        if record.len() != 3 {
            return Err(parse_err(
                line,
                format!("expected 3 fields, found {}", record.len()),
            ));
        }
        let mut row = [0.0; 3];
        for (slot, field) in row.iter_mut().zip(record.iter()) {
            *slot = field
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| parse_err(line, format!("not a finite number: {field:?}")))?;
        }
        rows.push(row);
    }
    Ok(rows)
}

fn render_triples(header: [&str; 3], rows: impl Iterator<Item = [f64; 3]>) -> String {
    let mut out = header.join(",");
    out.push('\n');
    for [a, b, c] in rows {
        writeln!(out, "{a},{b},{c}").expect("writing to a String");
    }
    out
}

/// Reads a `x,y,q` file into real-strength charges.
pub fn read_particles(path: impl AsRef<Path>) -> Result<Vec<Charge>> {
    Ok(read_triples(path.as_ref(), PARTICLE_HEADER)?
        .into_iter()
        .map(|[x, y, q]| Charge::real(x, y, q))
        .collect())
}

/// Renders real-strength charges as `x,y,q` CSV.
pub fn particles_csv(charges: &[Charge]) -> String {
    render_triples(
        PARTICLE_HEADER,
        charges.iter().map(|c| [c.z.re, c.z.im, c.q.re]),
    )
}

pub fn write_particles(path: impl AsRef<Path>, charges: &[Charge]) -> Result<()> {
    std::fs::write(path, particles_csv(charges))?;
    Ok(())
}

pub fn read_vortices(path: impl AsRef<Path>) -> Result<Vec<Vortex>> {
    Ok(read_triples(path.as_ref(), VORTEX_HEADER)?
        .into_iter()
        .map(|[x, y, gamma]| Vortex::new(x, y, gamma))
        .collect())
}

pub fn vortices_csv(vortices: &[Vortex]) -> String {
    render_triples(VORTEX_HEADER, vortices.iter().map(|v| [v.x, v.y, v.gamma]))
}
