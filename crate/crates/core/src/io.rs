//! CSV formats: drivers as `t,lambda`, curves as `t,re,im`.

use std::fmt::Write as _;
use std::path::Path;

use crate::complex::Complex64;
use crate::drivers::Driver;
use crate::error::{LabError, Result};
use crate::fmt::{fmt_f64, parse_f64};
use crate::forward::Curve;

pub const DRIVER_HEADER: &str = "t,lambda";
pub const CURVE_HEADER: &str = "t,re,im";

pub fn driver_to_csv(driver: &Driver) -> String {
    let mut out = String::from(DRIVER_HEADER);
    out.push('\n');
    for (t, v) in driver.times().zip(driver.values()) {
        let _ = writeln!(out, "{},{}", fmt_f64(t), fmt_f64(*v));
    }
    out
}

pub fn curve_to_csv(curve: &Curve) -> String {
    let mut out = String::from(CURVE_HEADER);
    out.push('\n');
    for (t, z) in curve.times().iter().zip(curve.points()) {
        let _ = writeln!(out, "{},{},{}", fmt_f64(*t), fmt_f64(z.re), fmt_f64(z.im));
    }
    out
}

fn rows<'a>(text: &'a str, header: &str, origin: &Path) -> Result<Vec<Vec<f64>>> {
    let err = |message: String| LabError::Parse { path: origin.to_path_buf(), message };
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    match lines.next() {
        Some(h) if h.trim() == header => {}
        other => return Err(err(format!("expected header `{header}`, found {other:?}"))),
    }
    let width = header.split(',').count();
    lines
        .enumerate()
        .map(|(i, line)| {
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != width {
                return Err(err(format!("row {} has {} fields, expected {width}", i + 1, fields.len())));
            }
            fields
                .iter()
                .map(|f| parse_f64(f).ok_or_else(|| err(format!("row {}: bad number `{f}`", i + 1))))
                .collect()
        })
        .collect()
}

pub fn driver_from_csv(text: &str, origin: &Path) -> Result<Driver> {
    let rows = rows(text, DRIVER_HEADER, origin)?;
    let err = |message: String| LabError::Parse { path: origin.to_path_buf(), message };
    if rows.is_empty() {
        return Err(err("no rows".into()));
    }
    if rows[0] != [0.0, 0.0] {
        return Err(err("first row must be `0,0`".into()));
    }
    if rows.len() == 1 {
        return Err(err("a driver file needs at least two rows".into()));
    }
    let horizon = rows[rows.len() - 1][0];
    let n = rows.len() - 1;
    for (k, r) in rows.iter().enumerate() {
        let expect = k as f64 * horizon / n as f64;
        if (r[0] - expect).abs() > 1e-9 * horizon {
            return Err(err(format!("row {k}: time {} is off the uniform grid", r[0])));
        }
    }
    Driver::new(rows.iter().map(|r| r[1]).collect(), horizon)
}

pub fn curve_from_csv(text: &str, origin: &Path) -> Result<Curve> {
    let rows = rows(text, CURVE_HEADER, origin)?;
    let times = rows.iter().map(|r| r[0]).collect();
    let points = rows.iter().map(|r| Complex64::new(r[1], r[2])).collect();
    Curve::new(times, points)
}

pub fn read_driver(path: &Path) -> Result<Driver> {
    let text = std::fs::read_to_string(path).map_err(|e| LabError::io(path, e))?;
    driver_from_csv(&text, path)
}

pub fn read_curve(path: &Path) -> Result<Curve> {
    let text = std::fs::read_to_string(path).map_err(|e| LabError::io(path, e))?;
    curve_from_csv(&text, path)
}
