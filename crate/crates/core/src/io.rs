//! JSON and CSV readers and writers for matrices, kernels and measures.

use std::fs;
use std::path::Path;

use serde_json::Value;

use crate::error::{invalid, Error, Result};
use crate::measures::{DiscreteMeasure, MeasureSet};
use crate::pvariable::{RealKernel, StepPVariable};

fn is_csv(path: &Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv"))
}

/// Headerless CSV of numbers, one matrix row per line.
pub fn parse_matrix_csv(text: &str) -> Result<Vec<Vec<f64>>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record?;
        let row = record
            .iter()
            .map(|f| {
                f.parse::<f64>()
                    .map_err(|e| invalid(format!("bad matrix entry {f:?}: {e}")))
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    check_square(&rows)?;
    Ok(rows)
}

fn check_square(rows: &[Vec<f64>]) -> Result<()> {
    if rows.is_empty() || rows.iter().any(|r| r.len() != rows.len()) {
        return Err(Error::NotSquare);
    }
    Ok(())
}

pub fn matrix_to_csv(rows: &[Vec<f64>]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.write_record(r.iter().map(f64::to_string))?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// A square matrix from `.csv`, or from a JSON array of rows.
pub fn read_matrix(path: &Path) -> Result<Vec<Vec<f64>>> {
    let text = fs::read_to_string(path)?;
    if is_csv(path) {
        return parse_matrix_csv(&text);
    }
    let rows: Vec<Vec<f64>> = serde_json::from_str(&text)?;
    check_square(&rows)?;
    Ok(rows)
}

/// A P-variable from a matrix file (Dirac cells) or a JSON kernel
/// `{"n": n, "cells": [[measure, …], …]}`.
pub fn read_pvariable(path: &Path) -> Result<StepPVariable> {
    if is_csv(path) {
        return StepPVariable::from_matrix(&read_matrix(path)?);
    }
    parse_pvariable(&fs::read_to_string(path)?)
}

pub fn parse_pvariable(text: &str) -> Result<StepPVariable> {
    let v: Value = serde_json::from_str(text)?;
    match v {
        Value::Array(_) => {
            let rows: Vec<Vec<f64>> = serde_json::from_value(v)?;
            StepPVariable::from_matrix(&rows)
        }
        Value::Object(_) => Ok(serde_json::from_value(v)?),
        _ => Err(invalid("expected a matrix or a kernel object")),
    }
}

/// A real kernel from a matrix file.
pub fn read_kernel(path: &Path) -> Result<RealKernel> {
    RealKernel::new(&read_matrix(path)?)
}

/// `{"dim": d, "atoms": [[…], …], "weights": […]}`.
pub fn read_measure(path: &Path) -> Result<DiscreteMeasure> {
    Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
}

/// A JSON array of measures.
pub fn read_measure_set(path: &Path) -> Result<MeasureSet> {
    let members: Vec<DiscreteMeasure> = serde_json::from_str(&fs::read_to_string(path)?)?;
    MeasureSet::new(members)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matrix_csv_round_trip_is_bit_exact() {
        let m = vec![vec![0.1, -2.5e-300], vec![1.0 / 3.0, 7.0]];
        let text = matrix_to_csv(&m).unwrap();
        assert_eq!(parse_matrix_csv(&text).unwrap(), m);
        assert!(parse_matrix_csv("1,2\n3\n").is_err());
    }

    #[test]
    fn pvariable_json_forms() {
        let w = parse_pvariable("[[0,1],[1,0]]").unwrap();
        assert_eq!(w.n(), 2);
        let s = serde_json::to_string(&w).unwrap();
        assert_eq!(parse_pvariable(&s).unwrap(), w);
        assert!(parse_pvariable("3").is_err());
    }
}
