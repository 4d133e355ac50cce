//! CSV ingestion and emission of demand datasets.

use std::collections::HashMap;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::series::{Dataset, DemandSeries, Period};

/// On-disk arrangement of a demand CSV.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Layout {
    /// One row per series: `id,v1,v2,...`; header optional, rows may be ragged.
    #[default]
    Wide,
    /// One row per observation: `id,period,value` with a mandatory header.
    Long,
}

impl FromStr for Layout {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "wide" => Ok(Layout::Wide),
            "long" => Ok(Layout::Long),
            _ => Err(Error::Validation(format!("unknown layout {s:?}"))),
        }
    }
}

pub fn ingest_csv<T: Real>(path: &Path, layout: Layout, period: Period) -> Result<Dataset<T>> {
    let file = std::fs::File::open(path)?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    read_csv(file, &name, layout, period)
}

pub fn read_csv<T: Real, R: Read>(
    reader: R,
    name: &str,
    layout: Layout,
    period: Period,
) -> Result<Dataset<T>> {
    let series = match layout {
        Layout::Wide => read_wide(reader, period)?,
        Layout::Long => read_long(reader, period)?,
    };
    Dataset::new(name, series)
}

fn parse_value<T: Real>(cell: &str, id: &str, position: usize) -> Result<T> {
    let v = cell.trim().parse::<T>().map_err(|_| Error::NonNumeric {
        id: id.to_string(),
        position,
        value: cell.to_string(),
    })?;
    if !v.is_finite() {
        return Err(Error::NonNumeric {
            id: id.to_string(),
            position,
            value: cell.to_string(),
        });
    }
    if v < T::zero() {
        return Err(Error::NegativeDemand {
            id: id.to_string(),
            position,
        });
    }
    Ok(v)
}

fn read_wide<T: Real, R: Read>(reader: R, period: Period) -> Result<Vec<DemandSeries<T>>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(reader);
    let mut out = Vec::new();
    for (row, record) in rdr.records().enumerate() {
        let record = record?;
        let id = record.get(0).unwrap_or("").trim().to_string();
        let cells: Vec<&str> = record.iter().skip(1).collect();
        // Header detection: a first row whose value cells are all non-numeric.
        if row == 0
            && !cells.is_empty()
            && cells
                .iter()
                .all(|c| !c.trim().is_empty() && c.trim().parse::<f64>().is_err())
        {
            continue;
        }
        if id.is_empty() {
            return Err(Error::Malformed(format!("row {} has an empty id", row + 1)));
        }
        let used = cells
            .iter()
            .rposition(|c| !c.trim().is_empty())
            .map_or(0, |p| p + 1);
        let values = cells[..used]
            .iter()
            .enumerate()
            .map(|(i, c)| parse_value::<T>(c, &id, i + 1))
            .collect::<Result<Vec<_>>>()?;
        if values.is_empty() {
            return Err(Error::Malformed(format!("series {id} has no observations")));
        }
        out.push(DemandSeries::new(id, values, period)?);
    }
    Ok(out)
}

fn read_long<T: Real, R: Read>(reader: R, period: Period) -> Result<Vec<DemandSeries<T>>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let headers: Vec<String> = rdr
        .headers()?
        .iter()
        .map(|h| h.trim().to_ascii_lowercase())
        .collect();
    if headers != ["id", "period", "value"] {
        return Err(Error::Malformed(format!(
            "long layout requires header id,period,value, found {}",
            headers.join(",")
        )));
    }
    let mut order: Vec<String> = Vec::new();
    let mut rows: HashMap<String, Vec<(i64, T)>> = HashMap::new();
    for record in rdr.records() {
        let record = record?;
        let id = record[0].trim().to_string();
        let idx: i64 = record[1].trim().parse().map_err(|_| {
            Error::Malformed(format!(
                "period index {:?} of series {id} is not an integer",
                &record[1]
            ))
        })?;
        let entry = rows.entry(id.clone()).or_insert_with(|| {
            order.push(id.clone());
            Vec::new()
        });
        let position = usize::try_from(idx).unwrap_or(0);
        let v = parse_value::<T>(&record[2], &id, position)?;
        entry.push((idx, v));
    }
    order
        .into_iter()
        .map(|id| {
            let mut obs = rows.remove(&id).unwrap_or_default();
            obs.sort_by_key(|(i, _)| *i);
            if obs.windows(2).any(|w| w[0].0 == w[1].0) {
                return Err(Error::Malformed(format!("series {id} repeats a period index")));
            }
            DemandSeries::new(id, obs.into_iter().map(|(_, v)| v).collect(), period)
        })
        .collect()
}

/// Writes the dataset in wide layout without a header.
///
/// Values use the shortest representation that parses back to the same
/// float, so `read_csv` of the output reproduces the values bit for bit.
pub fn write_wide<T: Real, W: Write>(ds: &Dataset<T>, writer: W) -> Result<()> {
    let mut wtr = csv::WriterBuilder::new().flexible(true).from_writer(writer);
    for s in ds.series() {
        let mut rec = Vec::with_capacity(s.len() + 1);
        rec.push(s.id().to_string());
        rec.extend(s.values().iter().map(|v| v.to_string()));
        wtr.write_record(&rec)?;
    }
    wtr.flush()?;
    Ok(())
}
