//! Plain CSV with a header row. Lines starting with `#` are metadata and skipped by the
//! parsers. Reals are written in Rust's shortest round-trip form (scientific notation
//! for very large or small magnitudes), so parsing an emitted file reproduces the values
//! exactly.

use std::fmt::Write as _;

use super::force::ForceRecord;
use crate::error::{Error, Result};

pub const PERCENTILE_HEADER: &str = "percentile,reward";
pub const SWEEP_HEADER: &str = "mass,friction,mean,std,cvar,episodes";
pub const DIFFERENCE_HEADER: &str = "mass,friction,mean_diff,cvar_diff";

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRow {
    pub mass: f64,
    pub friction: f64,
    pub mean: f64,
    pub std: f64,
    pub cvar: f64,
    pub episodes: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DifferenceRow {
    pub mass: f64,
    pub friction: f64,
    pub mean_diff: f64,
    pub cvar_diff: f64,
}

fn metadata(out: &mut String, meta: &[String]) {
    for m in meta {
        for line in m.lines() {
            let _ = writeln!(out, "# {line}");
        }
    }
}

/// Data lines with their 1-based line numbers; the first is the header.
fn data_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
}

fn expect_header<'a>(lines: &mut impl Iterator<Item = (usize, &'a str)>, header: &str) -> Result<()> {
    match lines.next() {
        Some((_, h)) if h == header => Ok(()),
        Some((line, h)) => Err(Error::Parse {
            line,
            msg: format!("expected header `{header}`, found `{h}`"),
        }),
        None => Err(Error::Parse {
            line: 0,
            msg: format!("missing header `{header}`"),
        }),
    }
}

fn fields(line: usize, text: &str, n: usize) -> Result<Vec<&str>> {
    let f: Vec<&str> = text.split(',').map(str::trim).collect();
    if f.len() != n {
        return Err(Error::Parse {
            line,
            msg: format!("expected {n} fields, found {}", f.len()),
        });
    }
    Ok(f)
}

fn num<T: std::str::FromStr>(line: usize, s: &str) -> Result<T> {
    s.parse().map_err(|_| Error::Parse {
        line,
        msg: format!("bad number `{s}`"),
    })
}

pub fn write_percentile_csv(curve: &[(u32, f64)], meta: &[String]) -> String {
    let mut out = String::new();
    metadata(&mut out, meta);
    out.push_str(PERCENTILE_HEADER);
    out.push('\n');
    for (p, r) in curve {
        let _ = writeln!(out, "{p},{r:?}");
    }
    out
}

pub fn parse_percentile_csv(text: &str) -> Result<Vec<(u32, f64)>> {
    let mut lines = data_lines(text);
    expect_header(&mut lines, PERCENTILE_HEADER)?;
    lines
        .map(|(n, l)| {
            let f = fields(n, l, 2)?;
            Ok((num(n, f[0])?, num(n, f[1])?))
        })
        .collect()
}

pub fn write_sweep_csv(rows: &[SweepRow], meta: &[String]) -> String {
    let mut out = String::new();
    metadata(&mut out, meta);
    out.push_str(SWEEP_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(out, "{:?},{:?},{:?},{:?},{:?},{}", r.mass, r.friction, r.mean, r.std, r.cvar, r.episodes);
    }
    out
}

pub fn parse_sweep_csv(text: &str) -> Result<Vec<SweepRow>> {
    let mut lines = data_lines(text);
    expect_header(&mut lines, SWEEP_HEADER)?;
    lines
        .map(|(n, l)| {
            let f = fields(n, l, 6)?;
            Ok(SweepRow {
                mass: num(n, f[0])?,
                friction: num(n, f[1])?,
                mean: num(n, f[2])?,
                std: num(n, f[3])?,
                cvar: num(n, f[4])?,
                episodes: num(n, f[5])?,
            })
        })
        .collect()
}

pub fn write_difference_csv(rows: &[DifferenceRow], meta: &[String]) -> String {
    let mut out = String::new();
    metadata(&mut out, meta);
    out.push_str(DIFFERENCE_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(out, "{:?},{:?},{:?},{:?}", r.mass, r.friction, r.mean_diff, r.cvar_diff);
    }
    out
}

pub fn parse_difference_csv(text: &str) -> Result<Vec<DifferenceRow>> {
    let mut lines = data_lines(text);
    expect_header(&mut lines, DIFFERENCE_HEADER)?;
    lines
        .map(|(n, l)| {
            let f = fields(n, l, 4)?;
            Ok(DifferenceRow {
                mass: num(n, f[0])?,
                friction: num(n, f[1])?,
                mean_diff: num(n, f[2])?,
                cvar_diff: num(n, f[3])?,
            })
        })
        .collect()
}

fn force_header(state_dim: usize, force_dim: usize) -> String {
    let s = (0..state_dim).map(|i| format!("state_{i}"));
    let f = (0..force_dim).map(|i| format!("f_{i}"));
    s.chain(f).collect::<Vec<_>>().join(",")
}

/// Empty input writes a header with no columns.
pub fn write_force_csv(records: &[ForceRecord], meta: &[String]) -> String {
    let (k, m) = records.first().map_or((0, 0), |r| (r.state.len(), r.force.len()));
    let mut out = String::new();
    metadata(&mut out, meta);
    out.push_str(&force_header(k, m));
    out.push('\n');
    for r in records {
        let row: Vec<String> = r.state.iter().chain(&r.force).map(|v| format!("{v:?}")).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

pub fn parse_force_csv(text: &str) -> Result<Vec<ForceRecord>> {
    let mut lines = data_lines(text);
    let (hline, header) = lines.next().ok_or(Error::Parse {
        line: 0,
        msg: "missing header".into(),
    })?;
    let cols: Vec<&str> = header.split(',').map(str::trim).collect();
    let k = cols.iter().take_while(|c| c.starts_with("state_")).count();
    let m = cols.len() - k;
    if header.is_empty() {
        return Ok(Vec::new());
    }
    if header != force_header(k, m) {
        return Err(Error::Parse {
            line: hline,
            msg: format!("unexpected force header `{header}`"),
        });
    }
    lines
        .map(|(n, l)| {
            let f = fields(n, l, k + m)?;
            let v = f.iter().map(|x| num(n, x)).collect::<Result<Vec<f64>>>()?;
            Ok(ForceRecord {
                state: v[..k].to_vec(),
                force: v[k..].to_vec(),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn percentile_round_trip() {
        let c = vec![(0, -1.5), (50, 0.1 + 0.2), (100, 1e300)];
        let text = write_percentile_csv(&c, &["seeds=3".into()]);
        assert!(text.starts_with("# seeds=3\npercentile,reward\n"));
        assert_eq!(parse_percentile_csv(&text).unwrap(), c);
    }

    #[test]
    fn sweep_round_trip() {
        let rows = vec![SweepRow {
            mass: 4.89,
            friction: 0.0,
            mean: 999.25,
            std: 1.0 / 3.0,
            cvar: -0.0,
            episodes: 100,
        }];
        assert_eq!(parse_sweep_csv(&write_sweep_csv(&rows, &[])).unwrap(), rows);
    }

    #[test]
    fn force_round_trip() {
        let r = vec![
            ForceRecord {
                state: vec![0.0, 1.0, -0.1, 0.0],
                force: vec![2.0, -0.5],
            },
            ForceRecord {
                state: vec![0.1, 0.2, 0.3, 0.4],
                force: vec![0.0, 1e-17],
            },
        ];
        let text = write_force_csv(&r, &[]);
        assert!(text.starts_with("state_0,state_1,state_2,state_3,f_0,f_1\n"));
        assert_eq!(parse_force_csv(&text).unwrap(), r);
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let err = parse_sweep_csv("# x\nmass,friction,mean,std,cvar,episodes\n1,2,3\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }));
        assert!(parse_percentile_csv("reward,percentile\n").is_err());
    }
}
