//! File loading, placeholder substitution, CSV fields and grid specifications.

use std::fs;
use std::path::Path;

use nclb_core::bilinear::BilinearForm;
use nclb_core::field::GridField;
use nclb_core::rational::{format_rational, parse_rational, Rational};
use nclb_core::{Error, Result};
use num_complex::Complex64;
use serde_json::Value;

pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::Input(format!("cannot read {}: {e}", path.display())))
}

pub fn parse_rational_flag(flag: &str, text: &str) -> Result<Rational> {
    parse_rational(text).map_err(|e| Error::Input(format!("--{flag}: {e}")))
}

/// Replaces whole-entry placeholders `alpha`, `-alpha`, `beta`, `-beta` in a form file by the
/// given values before the matrix is parsed. Also reports whether any placeholder occurred.
pub fn load_form(path: &Path, alpha: &Rational, beta: &Rational) -> Result<(BilinearForm, bool)> {
    let text = read_text(path)?;
    let mut doc: Value = serde_json::from_str(&text)
        .map_err(|e| Error::Input(format!("{} line {}: {e}", path.display(), e.line())))?;
    let mut used = false;
    if let Some(rows) = doc.get_mut("matrix").and_then(Value::as_array_mut) {
        for row in rows.iter_mut().filter_map(Value::as_array_mut) {
            for entry in row.iter_mut() {
                if let Some(s) = entry.as_str() {
                    if let Some(r) = substitute(s.trim(), alpha, beta) {
                        *entry = Value::String(format_rational(&r));
                        used = true;
                    }
                }
            }
        }
    }
    let form = BilinearForm::from_json(&doc.to_string()).map_err(|e| match e {
        Error::Input(m) => Error::Input(format!("{}: {m}", path.display())),
        other => other,
    })?;
    Ok((form, used))
}

fn substitute(s: &str, alpha: &Rational, beta: &Rational) -> Option<Rational> {
    let (neg, name) = match s.strip_prefix('-') {
        Some(rest) => (true, rest.trim()),
        None => (false, s),
    };
    let v = match name {
        "alpha" => alpha.clone(),
        "beta" => beta.clone(),
        _ => return None,
    };
    Some(if neg { -v } else { v })
}

/// Reads `coordinates..., re, im` rows. A leading header row is allowed; `#` starts a comment.
pub fn read_field_csv(path: &Path, dim: usize) -> Result<GridField> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::Input(format!("cannot read {}: {e}", path.display())))?;
    let mut rows = Vec::new();
    for (n, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| Error::Input(format!("{}: {e}", path.display())))?;
        let line = rec.position().map_or(n as u64 + 1, |p| p.line());
        let nums: std::result::Result<Vec<f64>, _> = rec.iter().map(str::parse::<f64>).collect();
        let nums = match nums {
            Ok(v) => v,
            Err(_) if n == 0 => continue,
            Err(_) => return Err(Error::Input(format!("{} line {line}: non-numeric field", path.display()))),
        };
        if nums.len() != dim + 2 {
            return Err(Error::Input(format!(
                "{} line {line}: expected {} columns (coordinates, re, im), found {}",
                path.display(),
                dim + 2,
                nums.len()
            )));
        }
        rows.push((nums[..dim].to_vec(), Complex64::new(nums[dim], nums[dim + 1])));
    }
    GridField::from_rows(dim, &rows).map_err(|e| match e {
        Error::Input(m) => Error::Input(format!("{}: {m}", path.display())),
        other => other,
    })
}

pub fn write_field_csv(path: &Path, names: &[&str], points: &[Vec<f64>], values: &[Complex64]) -> Result<()> {
    let io = |e: csv::Error| Error::Input(format!("cannot write {}: {e}", path.display()));
    let mut w = csv::Writer::from_path(path).map_err(io)?;
    let mut header: Vec<&str> = names.to_vec();
    header.extend(["re", "im"]);
    w.write_record(&header).map_err(io)?;
    for (x, z) in points.iter().zip(values) {
        let mut rec: Vec<String> = x.iter().map(|c| format!("{c:e}")).collect();
        rec.push(format!("{:e}", z.re));
        rec.push(format!("{:e}", z.im));
        w.write_record(&rec).map_err(io)?;
    }
    w.flush().map_err(|e| Error::Input(format!("cannot write {}: {e}", path.display())))
}

/// `n:lo:hi` for every axis, or one such triple per axis separated by commas.
pub fn parse_grid(spec: &str, dim: usize) -> Result<Vec<Vec<f64>>> {
    let bad = |why: &str| Error::Input(format!("--grid {spec:?}: {why}"));
    let parts: Vec<&str> = spec.split(',').map(str::trim).collect();
    let axes: Vec<&str> = match parts.len() {
        1 => vec![parts[0]; dim],
        k if k == dim => parts,
        k => return Err(bad(&format!("{k} axis specs for {dim} coordinates"))),
    };
    let mut out = vec![Vec::new()];
    for a in axes {
        let f: Vec<&str> = a.split(':').collect();
        if f.len() != 3 {
            return Err(bad("expected n:lo:hi"));
        }
        let n: usize = f[0].parse().map_err(|_| bad("node count is not an integer"))?;
        let lo: f64 = f[1].parse().map_err(|_| bad("lower bound is not a number"))?;
        let hi: f64 = f[2].parse().map_err(|_| bad("upper bound is not a number"))?;
        if n == 0 || !lo.is_finite() || !hi.is_finite() || (n > 1 && lo >= hi) {
            return Err(bad("need n >= 1 and lo < hi"));
        }
        let nodes: Vec<f64> =
            (0..n).map(|k| if n == 1 { lo } else { lo + (hi - lo) * k as f64 / (n - 1) as f64 }).collect();
        out = out.into_iter().flat_map(|p| nodes.iter().map(move |&x| [p.clone(), vec![x]].concat())).collect();
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_specs() {
        assert_eq!(parse_grid("3:-1:1", 2).unwrap().len(), 9);
        let g = parse_grid("2:0:1,1:5:5", 2).unwrap();
        assert_eq!(g, vec![vec![0.0, 5.0], vec![1.0, 5.0]]);
        assert!(parse_grid("3:1:-1", 1).is_err());
        assert!(parse_grid("3:0:1,3:0:1", 3).is_err());
        assert!(parse_grid("x", 1).is_err());
    }

    #[test]
    fn placeholders() {
        let a = parse_rational("2").unwrap();
        let b = parse_rational("1/3").unwrap();
        assert_eq!(substitute("-alpha", &a, &b), Some(-a.clone()));
        assert_eq!(substitute("beta", &a, &b), Some(b));
        assert_eq!(substitute("gamma", &a, &a), None);
    }
}
