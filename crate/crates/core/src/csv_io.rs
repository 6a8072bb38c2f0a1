//! CSV formats: raw cycle samples, extracted features, predictions, and
//! plot data. Numbers are written in shortest round-trip decimal form, so
//! writing and re-reading a file reproduces the exact same values and equal
//! inputs produce byte-identical files.

use std::collections::HashMap;
use std::io::{Read, Write};

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::features::{CycleRecord, FeatureMatrix};
use crate::validation::GroupStats;

pub const CYCLE_HEADER: [&str; 4] =
    ["cycle_id", "t_seconds", "conductance_siemens", "concentration_ppb"];

fn csv_err(context: &str, err: impl std::fmt::Display) -> Error {
    Error::Csv(format!("{context}: {err}"))
}

fn parse_f64(field: &str, line: usize, column: &str) -> Result<f64> {
    field.trim().parse::<f64>().map_err(|_| {
        Error::Csv(format!("line {line}: column {column}: cannot parse {field:?} as a number"))
    })
}

fn parse_i64(field: &str, line: usize, column: &str) -> Result<i64> {
    field.trim().parse::<i64>().map_err(|_| {
        Error::Csv(format!("line {line}: column {column}: cannot parse {field:?} as an integer"))
    })
}

/// Writes raw cycles, one row per sample. Unlabeled cycles leave the
/// concentration field empty.
pub fn write_cycles_csv<W: Write>(out: &mut W, cycles: &[CycleRecord]) -> Result<()> {
    writeln!(out, "{}", CYCLE_HEADER.join(","))?;
    for cycle in cycles {
        let label = match cycle.concentration {
            Some(c) => c.to_string(),
            None => String::new(),
        };
        for (t, g) in cycle.t.iter().zip(&cycle.g) {
            writeln!(out, "{},{},{},{}", cycle.cycle_id, t, g, label)?;
        }
    }
    Ok(())
}

/// Reads raw cycles. The header is mandatory; the concentration column is
/// optional but, when present, must be constant within each cycle. Rows of
/// one cycle may interleave with others; cycles keep first-appearance order.
pub fn read_cycles_csv<R: Read>(input: R) -> Result<Vec<CycleRecord>> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(input);
    let headers = reader.headers().map_err(|e| csv_err("reading header", e))?.clone();
    let names: Vec<&str> = headers.iter().map(|h| h.trim()).collect();
    if names.len() < 3 || names[..3] != CYCLE_HEADER[..3] {
        return Err(Error::Csv(format!(
            "expected header starting with {:?}, found {:?}",
            CYCLE_HEADER[..3].join(","),
            names.join(",")
        )));
    }
    let has_label = match names.len() {
        3 => false,
        4 if names[3] == CYCLE_HEADER[3] => true,
        _ => {
            return Err(Error::Csv(format!(
                "unexpected columns after {:?}: {:?}",
                CYCLE_HEADER[..3].join(","),
                names[3..].join(",")
            )));
        }
    };

    struct Accum {
        t: Vec<f64>,
        g: Vec<f64>,
        concentration: Option<f64>,
    }
    let mut order: Vec<i64> = Vec::new();
    let mut by_id: HashMap<i64, Accum> = HashMap::new();

    for (idx, record) in reader.records().enumerate() {
        let line = idx + 2; // header is line 1
        let record = record.map_err(|e| csv_err(&format!("line {line}"), e))?;
        if record.len() != names.len() {
            return Err(Error::Csv(format!(
                "line {line}: expected {} fields, found {}",
                names.len(),
                record.len()
            )));
        }
        let cycle_id = parse_i64(&record[0], line, "cycle_id")?;
        let t = parse_f64(&record[1], line, "t_seconds")?;
        let g = parse_f64(&record[2], line, "conductance_siemens")?;
        let concentration = if has_label {
            let field = record[3].trim();
            if field.is_empty() { None } else { Some(parse_f64(field, line, "concentration_ppb")?) }
        } else {
            None
        };

        let entry = by_id.entry(cycle_id).or_insert_with(|| {
            order.push(cycle_id);
            Accum { t: Vec::new(), g: Vec::new(), concentration }
        });
        if entry.concentration != concentration {
            return Err(Error::InvalidCycle {
                cycle_id,
                reason: format!(
                    "concentration changes within the cycle ({:?} then {:?})",
                    entry.concentration, concentration
                ),
            });
        }
        entry.t.push(t);
        entry.g.push(g);
    }

    let mut cycles = Vec::with_capacity(order.len());
    for id in order {
        let accum = by_id.remove(&id).expect("accumulated above");
        cycles.push(CycleRecord::new(id, accum.t, accum.g, accum.concentration)?);
    }
    Ok(cycles)
}

/// Writes a feature matrix with the fixed column layout
/// `cycle_id,concentration_ppb,mean_1..mean_R,slope_1..slope_R`.
pub fn write_features_csv<W: Write>(out: &mut W, matrix: &FeatureMatrix) -> Result<()> {
    write!(out, "cycle_id,concentration_ppb")?;
    for label in &matrix.column_labels {
        write!(out, ",{label}")?;
    }
    writeln!(out)?;
    for (row, (&cycle_id, label)) in matrix.cycle_ids.iter().zip(&matrix.labels).enumerate() {
        match label {
            Some(c) => write!(out, "{cycle_id},{c}")?,
            None => write!(out, "{cycle_id},")?,
        }
        for value in matrix.x.row(row) {
            write!(out, ",{value}")?;
        }
        writeln!(out)?;
    }
    Ok(())
}

/// Reads a feature CSV produced by [`write_features_csv`]. The segment count
/// is inferred from the header, which must list `mean_1..mean_R` followed by
/// `slope_1..slope_R`.
pub fn read_features_csv<R: Read>(input: R) -> Result<FeatureMatrix> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(input);
    let headers = reader.headers().map_err(|e| csv_err("reading header", e))?.clone();
    let names: Vec<String> = headers.iter().map(|h| h.trim().to_string()).collect();
    if names.len() < 4 || names[0] != "cycle_id" || names[1] != "concentration_ppb" {
        return Err(Error::Csv(
            "feature header must start with cycle_id,concentration_ppb,mean_1,...".into(),
        ));
    }
    let feature_labels = &names[2..];
    if !feature_labels.len().is_multiple_of(2) {
        return Err(Error::Csv(format!(
            "feature count {} is odd; expected paired mean/slope columns",
            feature_labels.len()
        )));
    }
    let r = feature_labels.len() / 2;
    let expected = crate::features::column_labels(r);
    if feature_labels != expected {
        return Err(Error::Csv(format!(
            "feature columns must be mean_1..mean_{r},slope_1..slope_{r} in order; found {:?}",
            feature_labels.join(",")
        )));
    }

    let mut cycle_ids = Vec::new();
    let mut labels = Vec::new();
    let mut data: Vec<f64> = Vec::new();
    for (idx, record) in reader.records().enumerate() {
        let line = idx + 2;
        let record = record.map_err(|e| csv_err(&format!("line {line}"), e))?;
        if record.len() != names.len() {
            return Err(Error::Csv(format!(
                "line {line}: expected {} fields, found {}",
                names.len(),
                record.len()
            )));
        }
        cycle_ids.push(parse_i64(&record[0], line, "cycle_id")?);
        let label_field = record[1].trim();
        labels.push(if label_field.is_empty() {
            None
        } else {
            Some(parse_f64(label_field, line, "concentration_ppb")?)
        });
        for (field, column) in record.iter().skip(2).zip(feature_labels) {
            let value = parse_f64(field, line, column)?;
            if !value.is_finite() {
                return Err(Error::Csv(format!(
                    "line {line}: column {column}: non-finite feature {value}"
                )));
            }
            data.push(value);
        }
    }

    let n = cycle_ids.len();
    let x = Array2::from_shape_vec((n, 2 * r), data).expect("validated row width");
    Ok(FeatureMatrix { x, cycle_ids, labels, column_labels: expected })
}

/// Writes per-cycle predictions; the truth column is empty for unlabeled rows.
pub fn write_predictions_csv<W: Write>(
    out: &mut W,
    cycle_ids: &[i64],
    truths: &[Option<f64>],
    predictions: &[f64],
) -> Result<()> {
    writeln!(out, "cycle_id,concentration_ppb,predicted_concentration_ppb")?;
    for ((id, truth), pred) in cycle_ids.iter().zip(truths).zip(predictions) {
        match truth {
            Some(c) => writeln!(out, "{id},{c},{pred}")?,
            None => writeln!(out, "{id},,{pred}")?,
        }
    }
    Ok(())
}

/// Writes per-group plot data for predicted-versus-true charts with
/// +-2 sigma error bars.
pub fn write_plot_csv<W: Write>(out: &mut W, groups: &[GroupStats]) -> Result<()> {
    writeln!(out, "concentration_ppb,mean_pred,sd_pred,n")?;
    for g in groups {
        writeln!(out, "{},{},{},{}", g.concentration, g.mean_pred, g.sd_pred, g.n)?;
    }
    Ok(())
}
