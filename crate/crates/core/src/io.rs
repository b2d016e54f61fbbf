//! Plain-text file formats.
//!
//! - Grid files: a header `resX resY x0 y0 x1 y1`, then `resY` lines of
//!   `resX` space-separated values, the first line being the lowest `y` row.
//!   Info-grid files append the collection rate to the header and store cell
//!   masses instead of densities.
//! - Coefficient CSV: `k1,k2,coeff,weight`.
//! - Trajectory CSV: `n,x,y,ux,uy`, controls left blank on the final row.
//! - Optimizer report CSV: `iteration,score,objective,effort`.
//!
//! Readers skip blank lines and lines starting with `#`.

use std::io::{BufRead, Write};

use crate::infosim::InfoGrid;
use crate::planner::OptimizeReport;
use crate::spectral::{CellGrid, CoefficientSet, Domain, Field, RawField};
use crate::trajectory::Trajectory;
use crate::{Error, Result};

/// Formats a float so that it parses back to the same value.
pub fn fmt_f64(v: f64) -> String {
    let a = v.abs();
    if v == 0.0 || (1e-4..1e15).contains(&a) {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

fn content_lines<R: BufRead>(r: R) -> impl Iterator<Item = Result<(usize, String)>> {
    r.lines().enumerate().filter_map(|(i, l)| match l {
        Err(e) => Some(Err(Error::Io(e))),
        Ok(l) => {
            let t = l.trim();
            if t.is_empty() || t.starts_with('#') {
                None
            } else {
                Some(Ok((i + 1, t.to_string())))
            }
        }
    })
}

fn parse_f64(line: usize, tok: &str) -> Result<f64> {
    tok.trim()
        .parse::<f64>()
        .map_err(|_| Error::parse(line, format!("not a number: {tok:?}")))
}

fn parse_usize(line: usize, tok: &str) -> Result<usize> {
    tok.trim()
        .parse::<usize>()
        .map_err(|_| Error::parse(line, format!("not a non-negative integer: {tok:?}")))
}

fn require_2d(domain: &Domain) -> Result<()> {
    if domain.dim() != 2 {
        return Err(Error::invalid("grid files hold two-dimensional fields only"));
    }
    Ok(())
}

fn write_rows<W: Write>(w: &mut W, grid: &CellGrid, values: &[f64]) -> Result<()> {
    let nx = grid.resolution()[0];
    for row in values.chunks_exact(nx) {
        let line: Vec<String> = row.iter().map(|&v| fmt_f64(v)).collect();
        writeln!(w, "{}", line.join(" "))?;
    }
    Ok(())
}

fn grid_header(grid: &CellGrid) -> String {
    let d = grid.domain();
    format!(
        "{} {} {} {} {} {}",
        grid.resolution()[0],
        grid.resolution()[1],
        fmt_f64(d.lower()[0]),
        fmt_f64(d.lower()[1]),
        fmt_f64(d.upper()[0]),
        fmt_f64(d.upper()[1])
    )
}

pub fn write_grid<W: Write>(mut w: W, field: &impl Field) -> Result<()> {
    let grid = field.grid();
    require_2d(grid.domain())?;
    writeln!(w, "{}", grid_header(grid))?;
    write_rows(&mut w, grid, field.values())
}

/// Parses the header and rows; returns the grid, values and any extra
/// header fields.
fn read_grid_parts<R: BufRead>(r: R, extra: usize) -> Result<(CellGrid, Vec<f64>, Vec<f64>)> {
    let mut lines = content_lines(r);
    let (hl, header) = lines
        .next()
        .transpose()?
        .ok_or_else(|| Error::parse(1, "missing header"))?;
    let toks: Vec<&str> = header.split_whitespace().collect();
    if toks.len() != 6 + extra {
        return Err(Error::parse(hl, format!("header needs {} fields, got {}", 6 + extra, toks.len())));
    }
    let nx = parse_usize(hl, toks[0])?;
    let ny = parse_usize(hl, toks[1])?;
    let b: Vec<f64> = toks[2..]
        .iter()
        .map(|t| parse_f64(hl, t))
        .collect::<Result<_>>()?;
    let domain = Domain::new(vec![b[0], b[1]], vec![b[2], b[3]])
        .map_err(|e| Error::parse(hl, e.to_string()))?;
    let grid = CellGrid::new(domain, vec![nx, ny]).map_err(|e| Error::parse(hl, e.to_string()))?;
    let mut values = Vec::with_capacity(nx * ny);
    let mut rows = 0;
    let mut last_line = hl;
    for item in lines {
        let (ln, line) = item?;
        last_line = ln;
        if rows == ny {
            return Err(Error::parse(ln, format!("expected {ny} rows, found more")));
        }
        let row: Vec<f64> = line
            .split_whitespace()
            .map(|t| parse_f64(ln, t))
            .collect::<Result<_>>()?;
        if row.len() != nx {
            return Err(Error::parse(ln, format!("expected {nx} values, got {}", row.len())));
        }
        values.extend(row);
        rows += 1;
    }
    if rows != ny {
        return Err(Error::parse(last_line, format!("expected {ny} rows, got {rows}")));
    }
    Ok((grid, values, b[4..].to_vec()))
}

pub fn read_grid<R: BufRead>(r: R) -> Result<RawField> {
    let (grid, values, _) = read_grid_parts(r, 0)?;
    RawField::new(grid, values)
}

pub fn write_info_grid<W: Write>(mut w: W, info: &InfoGrid) -> Result<()> {
    require_2d(info.grid().domain())?;
    writeln!(w, "{} {}", grid_header(info.grid()), fmt_f64(info.rate()))?;
    write_rows(&mut w, info.grid(), info.remaining())
}

pub fn read_info_grid<R: BufRead>(r: R) -> Result<InfoGrid> {
    let (grid, values, extra) = read_grid_parts(r, 1)?;
    InfoGrid::new(grid, values, extra[0])
}

pub fn write_coefficients<W: Write>(mut w: W, coeffs: &CoefficientSet) -> Result<()> {
    let dim = coeffs.domain().dim();
    let ks: Vec<String> = (1..=dim).map(|i| format!("k{i}")).collect();
    writeln!(w, "{},coeff,weight", ks.join(","))?;
    for flat in 0..coeffs.len() {
        let k = coeffs.multi_index(flat);
        let ks: Vec<String> = k.0.iter().map(|v| v.to_string()).collect();
        writeln!(
            w,
            "{},{},{}",
            ks.join(","),
            fmt_f64(coeffs.coeffs()[flat]),
            fmt_f64(coeffs.weights()[flat])
        )?;
    }
    Ok(())
}

/// Reads a coefficient CSV for the given domain. Every multi-index of the
/// implied order must appear exactly once.
pub fn read_coefficients<R: BufRead>(r: R, domain: &Domain) -> Result<CoefficientSet> {
    let dim = domain.dim();
    let mut lines = content_lines(r);
    let (hl, header) = lines
        .next()
        .transpose()?
        .ok_or_else(|| Error::parse(1, "missing header"))?;
    if header.split(',').count() != dim + 2 {
        return Err(Error::parse(hl, "unexpected column count in header"));
    }
    let mut rows = Vec::new();
    for item in lines {
        let (ln, line) = item?;
        let toks: Vec<&str> = line.split(',').collect();
        if toks.len() != dim + 2 {
            return Err(Error::parse(ln, format!("expected {} columns", dim + 2)));
        }
        let k: Vec<usize> = toks[..dim]
            .iter()
            .map(|t| parse_usize(ln, t))
            .collect::<Result<_>>()?;
        rows.push((ln, k, parse_f64(ln, toks[dim])?, parse_f64(ln, toks[dim + 1])?));
    }
    let order = rows
        .iter()
        .flat_map(|(_, k, _, _)| k.iter().copied())
        .max()
        .unwrap_or(0);
    let n = crate::spectral::coefficient_count(dim, order);
    let mut coeffs = vec![f64::NAN; n];
    let mut weights = vec![f64::NAN; n];
    for (ln, k, c, w) in rows {
        let flat = crate::spectral::flat_index_of(order, &k.into());
        if !coeffs[flat].is_nan() {
            return Err(Error::parse(ln, "duplicate multi-index"));
        }
        coeffs[flat] = c;
        weights[flat] = w;
    }
    if coeffs.iter().any(|c| c.is_nan()) {
        return Err(Error::invalid(format!("coefficient table is missing entries for order {order}")));
    }
    CoefficientSet::from_parts(domain.clone(), order, coeffs, weights)
}

pub fn write_trajectory<W: Write>(mut w: W, traj: &Trajectory) -> Result<()> {
    if traj.dim() != 2 {
        return Err(Error::invalid("trajectory CSV holds two-dimensional trajectories only"));
    }
    writeln!(w, "n,x,y,ux,uy")?;
    for n in 0..=traj.len() {
        let x = traj.state(n);
        if n < traj.len() {
            let u = traj.control(n);
            writeln!(
                w,
                "{n},{},{},{},{}",
                fmt_f64(x[0]),
                fmt_f64(x[1]),
                fmt_f64(u[0]),
                fmt_f64(u[1])
            )?;
        } else {
            writeln!(w, "{n},{},{},,", fmt_f64(x[0]), fmt_f64(x[1]))?;
        }
    }
    Ok(())
}

/// Reads a trajectory CSV and re-integrates it with time step `dt`. Stored
/// states must agree with the integrated ones to within `1e-9`.
pub fn read_trajectory<R: BufRead>(r: R, dt: f64, domain: &Domain) -> Result<Trajectory> {
    require_2d(domain)?;
    let mut lines = content_lines(r);
    let (hl, header) = lines
        .next()
        .transpose()?
        .ok_or_else(|| Error::parse(1, "missing header"))?;
    if header.replace(' ', "") != "n,x,y,ux,uy" {
        return Err(Error::parse(hl, "expected header n,x,y,ux,uy"));
    }
    let mut states: Vec<(usize, [f64; 2])> = Vec::new();
    let mut controls: Vec<[f64; 2]> = Vec::new();
    let mut saw_last = false;
    for item in lines {
        let (ln, line) = item?;
        if saw_last {
            return Err(Error::parse(ln, "rows after the final (control-free) row"));
        }
        let toks: Vec<&str> = line.split(',').map(str::trim).collect();
        if toks.len() != 5 {
            return Err(Error::parse(ln, "expected 5 columns"));
        }
        let n = parse_usize(ln, toks[0])?;
        if n != states.len() {
            return Err(Error::parse(ln, format!("expected step {}, got {n}", states.len())));
        }
        states.push((ln, [parse_f64(ln, toks[1])?, parse_f64(ln, toks[2])?]));
        match (toks[3].is_empty(), toks[4].is_empty()) {
            (true, true) => saw_last = true,
            (false, false) => controls.push([parse_f64(ln, toks[3])?, parse_f64(ln, toks[4])?]),
            _ => return Err(Error::parse(ln, "control has one blank component")),
        }
    }
    if states.is_empty() {
        return Err(Error::parse(hl, "no trajectory rows"));
    }
    if !saw_last {
        return Err(Error::parse(states.last().unwrap().0, "final row must leave controls blank"));
    }
    let traj = crate::trajectory::rollout(&states[0].1, &controls, dt, domain.clone())?;
    for (n, (ln, s)) in states.iter().enumerate() {
        let x = traj.state(n);
        if (x[0] - s[0]).abs() > 1e-9 || (x[1] - s[1]).abs() > 1e-9 {
            return Err(Error::parse(*ln, "state inconsistent with controls and time step"));
        }
    }
    Ok(traj)
}

pub fn write_report<W: Write>(mut w: W, report: &OptimizeReport) -> Result<()> {
    writeln!(w, "iteration,score,objective,effort")?;
    for r in &report.records {
        writeln!(
            w,
            "{},{},{},{}",
            r.iteration,
            fmt_f64(r.score),
            fmt_f64(r.objective),
            fmt_f64(r.effort)
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::{decompose_field, DensityField};
    use crate::trajectory::rollout;
    use proptest::prelude::*;

    #[test]
    fn grid_round_trip_keeps_row_order() {
        let g = CellGrid::new(Domain::new(vec![0.0, -1.0], vec![2.0, 1.0]).unwrap(), vec![3, 2]).unwrap();
        let f = RawField::new(g, vec![1.0, 2.0, 3.0, -4.0, 5.5, 1e-30]).unwrap();
        let mut buf = Vec::new();
        write_grid(&mut buf, &f).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert_eq!(text.lines().next().unwrap(), "3 2 0 -1 2 1");
        assert_eq!(text.lines().nth(1).unwrap(), "1 2 3");
        assert_eq!(read_grid(&buf[..]).unwrap(), f);
    }

    #[test]
    fn grid_errors_carry_line_numbers() {
        let text = "2 2 0 0 1 1\n1 2\n# comment\n3 x\n";
        match read_grid(text.as_bytes()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 4),
            other => panic!("{other:?}"),
        }
        let text = "2 2 0 0 1 1\n1 2\n";
        assert!(matches!(read_grid(text.as_bytes()), Err(Error::Parse { .. })));
        let text = "2 2 0 0 1\n";
        assert!(matches!(read_grid(text.as_bytes()), Err(Error::Parse { line: 1, .. })));
    }

    #[test]
    fn info_grid_round_trip() {
        let g = CellGrid::new(Domain::unit(2), vec![2, 2]).unwrap();
        let info = InfoGrid::new(g, vec![0.1, 0.2, 0.3, 0.4], 0.05).unwrap();
        let mut buf = Vec::new();
        write_info_grid(&mut buf, &info).unwrap();
        assert_eq!(read_info_grid(&buf[..]).unwrap(), info);
    }

    #[test]
    fn coefficient_round_trip() {
        let c = decompose_field(&DensityField::uniform(CellGrid::new(Domain::unit(2), vec![5, 5]).unwrap()), 3);
        let mut buf = Vec::new();
        write_coefficients(&mut buf, &c).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("k1,k2,coeff,weight\n0,0,"));
        assert_eq!(read_coefficients(&buf[..], &Domain::unit(2)).unwrap(), c);
    }

    #[test]
    fn trajectory_csv_rejects_inconsistent_states() {
        let text = "n,x,y,ux,uy\n0,0.25,0.35,0.5,0.3\n1,0.5,0.6,,\n";
        assert!(matches!(
            read_trajectory(text.as_bytes(), 0.5, &Domain::unit(2)),
            Err(Error::Parse { line: 3, .. })
        ));
        let ok = "n,x,y,ux,uy\n0,0.25,0.35,0.5,0.3\n1,0.5,0.5,,\n";
        let t = read_trajectory(ok.as_bytes(), 0.5, &Domain::unit(2)).unwrap();
        assert_eq!(t.len(), 1);
    }

    proptest! {
        #[test]
        fn trajectory_csv_round_trip(us in prop::collection::vec((-2.0f64..2.0, -2.0f64..2.0), 1..30)) {
            let controls: Vec<Vec<f64>> = us.iter().map(|&(a, b)| vec![a, b]).collect();
            let t = rollout(&[0.25, 0.35], &controls, 0.5, Domain::unit(2)).unwrap();
            let mut buf = Vec::new();
            write_trajectory(&mut buf, &t).unwrap();
            prop_assert_eq!(read_trajectory(&buf[..], 0.5, &Domain::unit(2)).unwrap(), t);
        }
    }
}
