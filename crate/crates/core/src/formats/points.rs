//! Point-label tables: one CSV row per (image, point, class) outcome.

use std::fs::File;
use std::io::{self, Write};
use std::path::Path;

use super::FormatError;
use crate::domain::{check_id, ClassId, Point, PointVerdict};

pub const POINT_LABEL_HEADER: [&str; 9] = [
    "image_id",
    "class_id",
    "x",
    "y",
    "verdict",
    "yes_votes",
    "no_votes",
    "unsure_votes",
    "source",
];

#[derive(Debug, Clone, PartialEq)]
pub struct PointLabelRow {
    pub image_id: String,
    pub class_id: ClassId,
    pub point: Point,
    pub verdict: PointVerdict,
    pub yes_votes: u32,
    pub no_votes: u32,
    pub unsure_votes: u32,
    pub source: String,
}

impl PointLabelRow {
    pub fn answers(&self) -> u32 {
        self.yes_votes + self.no_votes + self.unsure_votes
    }
}

/// Orders rows by (image_id, y, x, class_id).
pub fn sort_point_labels(rows: &mut [PointLabelRow]) {
    rows.sort_by(|a, b| {
        a.image_id
            .cmp(&b.image_id)
            .then(a.point.y().total_cmp(&b.point.y()))
            .then(a.point.x().total_cmp(&b.point.x()))
            .then(a.class_id.cmp(&b.class_id))
    });
}

/// Writes rows sorted by (image_id, y, x, class_id), coordinates with 6 decimals.
pub fn write_point_labels_to<W: Write>(rows: &[PointLabelRow], out: W) -> Result<(), FormatError> {
    let mut sorted = rows.to_vec();
    sort_point_labels(&mut sorted);
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    let csv_err = |e: csv::Error| FormatError::Csv { line: 0, reason: e.to_string() };
    w.write_record(POINT_LABEL_HEADER).map_err(csv_err)?;
    for row in &sorted {
        check_id(&row.image_id)?;
        check_id(&row.source)?;
        w.write_record([
            row.image_id.as_str(),
            &row.class_id.0.to_string(),
            &format!("{:.6}", row.point.x()),
            &format!("{:.6}", row.point.y()),
            row.verdict.as_str(),
            &row.yes_votes.to_string(),
            &row.no_votes.to_string(),
            &row.unsure_votes.to_string(),
            row.source.as_str(),
        ])
        .map_err(csv_err)?;
    }
    w.flush().map_err(|e| FormatError::Csv { line: 0, reason: e.to_string() })
}

pub fn write_point_labels(rows: &[PointLabelRow], path: impl AsRef<Path>) -> Result<(), FormatError> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| FormatError::io(path, e))?;
    let mut buf = io::BufWriter::new(file);
    write_point_labels_to(rows, &mut buf)?;
    buf.flush().map_err(|e| FormatError::io(path, e))
}

fn parse_row(rec: &csv::StringRecord, line: u64) -> Result<PointLabelRow, FormatError> {
    let bad = |reason: String| FormatError::Csv { line, reason };
    if rec.len() != POINT_LABEL_HEADER.len() {
        return Err(bad(format!("expected 9 fields, found {}", rec.len())));
    }
    let int = |i: usize| -> Result<u32, FormatError> {
        rec[i]
            .parse::<u32>()
            .map_err(|_| bad(format!("{} {:?} is not an integer", POINT_LABEL_HEADER[i], &rec[i])))
    };
    let coord = |i: usize| -> Result<f64, FormatError> {
        rec[i]
            .parse::<f64>()
            .map_err(|_| bad(format!("{} {:?} is not a number", POINT_LABEL_HEADER[i], &rec[i])))
    };
    let class = rec[1]
        .parse::<u16>()
        .ok()
        .filter(|&c| c != ClassId::VOID.0)
        .ok_or_else(|| bad(format!("bad class_id {:?}", &rec[1])))?;
    let verdict: PointVerdict = rec[4]
        .parse()
        .map_err(|_| bad(format!("unknown verdict token {:?}", &rec[4])))?;
    let point = Point::new(coord(2)?, coord(3)?).map_err(|e| bad(e.to_string()))?;
    let (yes_votes, no_votes, unsure_votes) = (int(5)?, int(6)?, int(7)?);
    if PointVerdict::from_votes(yes_votes, no_votes, unsure_votes) != verdict {
        return Err(bad(format!("verdict {verdict} inconsistent with votes {yes_votes}/{no_votes}/{unsure_votes}")));
    }
    for id in [&rec[0], &rec[8]] {
        check_id(id).map_err(|e| bad(e.to_string()))?;
    }
    Ok(PointLabelRow {
        image_id: rec[0].to_string(),
        class_id: ClassId(class),
        point,
        verdict,
        yes_votes,
        no_votes,
        unsure_votes,
        source: rec[8].to_string(),
    })
}

pub fn read_point_labels(path: impl AsRef<Path>) -> Result<Vec<PointLabelRow>, FormatError> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| FormatError::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(io::BufReader::new(file));
    let header = reader
        .headers()
        .map_err(|e| FormatError::Csv { line: 1, reason: e.to_string() })?
        .clone();
    if header.iter().ne(POINT_LABEL_HEADER.iter().copied()) {
        return Err(FormatError::Csv { line: 1, reason: "unexpected header".into() });
    }
    let mut rows = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let line = i as u64 + 2;
        let rec = rec.map_err(|e| FormatError::Csv { line, reason: e.to_string() })?;
        rows.push(parse_row(&rec, line)?);
    }
    Ok(rows)
}
