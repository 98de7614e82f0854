//! Plain-text field dumps: a `# nx ny h lx ly` header followed by one row of
//! values per grid line `j`, written with 17 significant digits.

use std::io::{BufRead, Write};

use super::{Grid, ScalarField};
use crate::error::MeshError;

pub fn write_field<W: Write>(out: &mut W, field: &ScalarField) -> std::io::Result<()> {
    let g = &field.grid;
    writeln!(out, "# {} {} {:.16e} {:.16e} {:.16e}", g.nx(), g.ny(), g.h(), g.lx(), g.ly())?;
    write_field_block(out, g, &field.values)
}

/// Writes the value rows without a header.
pub fn write_field_block<W: Write>(out: &mut W, grid: &Grid, values: &[f64]) -> std::io::Result<()> {
    for j in 0..grid.ny() {
        let row = &values[j * grid.nx()..(j + 1) * grid.nx()];
        let mut line = String::with_capacity(row.len() * 24);
        for (i, v) in row.iter().enumerate() {
            if i > 0 {
                line.push(' ');
            }
            line.push_str(&format!("{v:.16e}"));
        }
        writeln!(out, "{line}")?;
    }
    Ok(())
}

pub fn read_field<R: BufRead>(input: R) -> Result<ScalarField, MeshError> {
    let mut lines = input.lines();
    let header = lines
        .next()
        .ok_or_else(|| MeshError::Parse("empty dump".into()))?
        .map_err(|e| MeshError::Parse(e.to_string()))?;
    let parts: Vec<&str> = header.trim_start_matches('#').split_whitespace().collect();
    if parts.len() != 5 {
        return Err(MeshError::Parse(format!("bad header: {header}")));
    }
    let perr = |s: &str| MeshError::Parse(format!("bad number: {s}"));
    let nx: usize = parts[0].parse().map_err(|_| perr(parts[0]))?;
    let ny: usize = parts[1].parse().map_err(|_| perr(parts[1]))?;
    let lx: f64 = parts[3].parse().map_err(|_| perr(parts[3]))?;
    let ly: f64 = parts[4].parse().map_err(|_| perr(parts[4]))?;
    let grid = Grid::with_nodes(lx, ly, nx, ny)?;
    let values = read_block(&mut lines, &grid)?;
    ScalarField::new(grid, values)
}

pub(crate) fn read_block<I>(lines: &mut I, grid: &Grid) -> Result<Vec<f64>, MeshError>
where
    I: Iterator<Item = std::io::Result<String>>,
{
    let mut values = Vec::with_capacity(grid.len());
    for j in 0..grid.ny() {
        let line = lines
            .next()
            .ok_or_else(|| MeshError::Parse(format!("missing row {j}")))?
            .map_err(|e| MeshError::Parse(e.to_string()))?;
        let before = values.len();
        for tok in line.split_whitespace() {
            values.push(tok.parse::<f64>().map_err(|_| MeshError::Parse(format!("bad number: {tok}")))?);
        }
        if values.len() - before != grid.nx() {
            return Err(MeshError::Parse(format!("row {j} has {} values", values.len() - before)));
        }
    }
    Ok(values)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_exact() {
        let g = Grid::new(1.0, 2.0, 4).unwrap();
        let f = ScalarField::from_fn(g, |x, y| (x * 1.7).sin() / (1.0 + y) + 1e-300);
        let mut buf = Vec::new();
        write_field(&mut buf, &f).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("# 5 9 "));
        assert_eq!(text.lines().count(), 10);
        let back = read_field(&buf[..]).unwrap();
        assert_eq!(back, f);
    }

    #[test]
    fn rejects_short_row() {
        let text = "# 3 3 0.5 1 1\n1 2 3\n1 2\n1 2 3\n";
        assert!(read_field(text.as_bytes()).is_err());
    }
}
