//! Per-frame results table.
//!
//! ```text
//! frame_index,h_df,h_tf,box_x,box_y,box_w,box_h,n_points
//! 0,3.512,3.512,605,195.5,280,41,1400
//! ...
//! scene_height_m,3.507
//! ```
//!
//! Floats are written in their shortest round-trip decimal form, so
//! read followed by write reproduces the file byte for byte.

use std::path::Path;

use crate::detection::BBox;
use crate::error::{Error, Result};

pub const HEADER: [&str; 8] = [
    "frame_index",
    "h_df",
    "h_tf",
    "box_x",
    "box_y",
    "box_w",
    "box_h",
    "n_points",
];
pub const FOOTER_KEY: &str = "scene_height_m";

#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub frame_index: u64,
    pub h_df: f64,
    pub h_tf: f64,
    pub bbox: BBox,
    /// Points left after the depth filter.
    pub n_points: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResultsTable {
    pub rows: Vec<ResultRow>,
    pub scene_height_m: f64,
}

fn check_finite(frame: u64, name: &str, v: f64) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(Error::Validation {
            frame,
            message: format!("{name} must be finite, got {v}"),
        })
    }
}

impl ResultsTable {
    pub fn validate(&self) -> Result<()> {
        let mut previous: Option<u64> = None;
        for r in &self.rows {
            if previous.is_some_and(|p| r.frame_index <= p) {
                return Err(Error::Validation {
                    frame: r.frame_index,
                    message: "frame indices must be strictly increasing".into(),
                });
            }
            previous = Some(r.frame_index);
            for (name, v) in [
                ("h_df", r.h_df),
                ("h_tf", r.h_tf),
                ("box_x", r.bbox.x_min),
                ("box_y", r.bbox.y_min),
                ("box_w", r.bbox.w),
                ("box_h", r.bbox.h),
            ] {
                check_finite(r.frame_index, name, v)?;
            }
        }
        if !self.scene_height_m.is_finite() {
            return Err(Error::Config(format!(
                "scene height must be finite, got {}",
                self.scene_height_m
            )));
        }
        Ok(())
    }
}

pub fn render_results(table: &ResultsTable) -> Result<String> {
    table.validate()?;
    let mut w = csv::WriterBuilder::new()
        .flexible(true)
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    let csv_err = |e: csv::Error| Error::Config(format!("cannot encode results: {e}"));
    w.write_record(HEADER).map_err(csv_err)?;
    for r in &table.rows {
        w.write_record([
            r.frame_index.to_string(),
            r.h_df.to_string(),
            r.h_tf.to_string(),
            r.bbox.x_min.to_string(),
            r.bbox.y_min.to_string(),
            r.bbox.w.to_string(),
            r.bbox.h.to_string(),
            r.n_points.to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.write_record([FOOTER_KEY.to_string(), table.scene_height_m.to_string()])
        .map_err(csv_err)?;
    let bytes = w
        .into_inner()
        .map_err(|e| Error::Config(format!("cannot encode results: {e}")))?;
    Ok(String::from_utf8(bytes).expect("csv output is ASCII"))
}

fn field<T: std::str::FromStr>(record: &csv::StringRecord, i: usize) -> Result<T> {
    let offset = record.position().map_or(0, |p| p.byte() as usize);
    let raw = &record[i];
    raw.parse()
        .map_err(|_| Error::format(offset, format!("column {} holds {raw:?}", HEADER[i])))
}

pub fn parse_results(text: &str) -> Result<ResultsTable> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(text.as_bytes());
    let mut records = reader.records();
    let header = match records.next() {
        Some(r) => r.map_err(csv_error)?,
        None => return Err(Error::format(0, "empty results file")),
    };
    if header.iter().ne(HEADER) {
        return Err(Error::format(
            0,
            format!("expected header {}", HEADER.join(",")),
        ));
    }
    let mut rows = Vec::new();
    let mut scene_height_m = None;
    for record in records {
        let record = record.map_err(csv_error)?;
        let offset = record.position().map_or(0, |p| p.byte() as usize);
        if scene_height_m.is_some() {
            return Err(Error::format(offset, "rows after the scene height footer"));
        }
        if record.len() == 2 && &record[0] == FOOTER_KEY {
            let raw = &record[1];
            let v: f64 = raw
                .parse()
                .map_err(|_| Error::format(offset, format!("scene height {raw:?}")))?;
            scene_height_m = Some(v);
            continue;
        }
        if record.len() != HEADER.len() {
            return Err(Error::format(
                offset,
                format!("expected {} columns, found {}", HEADER.len(), record.len()),
            ));
        }
        rows.push(ResultRow {
            frame_index: field(&record, 0)?,
            h_df: field(&record, 1)?,
            h_tf: field(&record, 2)?,
            bbox: BBox::new(
                field(&record, 3)?,
                field(&record, 4)?,
                field(&record, 5)?,
                field(&record, 6)?,
                1.0,
            ),
            n_points: field(&record, 7)?,
        });
    }
    let Some(scene_height_m) = scene_height_m else {
        return Err(Error::format(text.len(), "missing scene_height_m footer"));
    };
    let table = ResultsTable {
        rows,
        scene_height_m,
    };
    table.validate()?;
    Ok(table)
}

fn csv_error(e: csv::Error) -> Error {
    let offset = e.position().map_or(0, |p| p.byte() as usize);
    Error::format(offset, e.to_string())
}

pub fn read_results(path: impl AsRef<Path>) -> Result<ResultsTable> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_results(&text)
}

pub fn write_results(path: impl AsRef<Path>, table: &ResultsTable) -> Result<()> {
    let path = path.as_ref();
    let text = render_results(table)?;
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}
