//! Class dictionary (`id,name`) and image-level label tables (`image_id,class_id`).

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fs::File;
use std::io::{self, Write};
use std::path::Path;

use super::FormatError;
use crate::domain::{check_id, ClassId};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassDictionary {
    names: Vec<String>,
}

impl ClassDictionary {
    pub fn new(names: Vec<String>) -> Result<Self, FormatError> {
        if names.len() > ClassId::MAX_CLASSES {
            return Err(FormatError::Csv { line: 0, reason: format!("{} classes exceed limit", names.len()) });
        }
        let mut seen = HashSet::new();
        for (i, n) in names.iter().enumerate() {
            if n.is_empty() || !seen.insert(n.as_str()) {
                return Err(FormatError::Csv {
                    line: i as u64 + 2,
                    reason: format!("class name {n:?} empty or duplicated"),
                });
            }
        }
        Ok(ClassDictionary { names })
    }

    /// Dictionary with names `class_0 .. class_{n-1}`.
    pub fn numbered(n: usize) -> Self {
        ClassDictionary { names: (0..n).map(|i| format!("class_{i}")).collect() }
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn name(&self, id: ClassId) -> Option<&str> {
        self.names.get(id.index()).map(String::as_str)
    }

    pub fn id(&self, name: &str) -> Option<ClassId> {
        self.names.iter().position(|n| n == name).map(|i| ClassId(i as u16))
    }

    pub fn iter(&self) -> impl Iterator<Item = (ClassId, &str)> {
        self.names.iter().enumerate().map(|(i, n)| (ClassId(i as u16), n.as_str()))
    }
}

pub fn write_class_dictionary(dict: &ClassDictionary, path: impl AsRef<Path>) -> Result<(), FormatError> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| FormatError::io(path, e))?;
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(io::BufWriter::new(file));
    let err = |e: csv::Error| FormatError::Csv { line: 0, reason: e.to_string() };
    w.write_record(["id", "name"]).map_err(err)?;
    for (id, name) in dict.iter() {
        w.write_record([id.0.to_string().as_str(), name]).map_err(err)?;
    }
    w.flush().map_err(|e| FormatError::io(path, e))
}

pub fn read_class_dictionary(path: impl AsRef<Path>) -> Result<ClassDictionary, FormatError> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| FormatError::io(path, e))?;
    let mut reader = csv::Reader::from_reader(io::BufReader::new(file));
    let mut names = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let line = i as u64 + 2;
        let rec = rec.map_err(|e| FormatError::Csv { line, reason: e.to_string() })?;
        let id: usize = rec
            .get(0)
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| FormatError::Csv { line, reason: "bad class id".into() })?;
        if id != i {
            return Err(FormatError::Csv { line, reason: format!("class ids must be dense, got {id} at position {i}") });
        }
        let name = rec.get(1).ok_or_else(|| FormatError::Csv { line, reason: "missing name".into() })?;
        names.push(name.to_string());
    }
    ClassDictionary::new(names)
}

pub fn write_image_labels(
    labels: &BTreeMap<String, BTreeSet<ClassId>>,
    path: impl AsRef<Path>,
) -> Result<(), FormatError> {
    let path = path.as_ref();
    let mut out = String::from("image_id,class_id\n");
    for (image, classes) in labels {
        check_id(image)?;
        for c in classes {
            out.push_str(&format!("{image},{}\n", c.0));
        }
    }
    File::create(path)
        .and_then(|mut f| f.write_all(out.as_bytes()))
        .map_err(|e| FormatError::io(path, e))
}

pub fn read_image_labels(path: impl AsRef<Path>) -> Result<BTreeMap<String, BTreeSet<ClassId>>, FormatError> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| FormatError::io(path, e))?;
    let mut reader = csv::Reader::from_reader(io::BufReader::new(file));
    let mut out: BTreeMap<String, BTreeSet<ClassId>> = BTreeMap::new();
    for (i, rec) in reader.records().enumerate() {
        let line = i as u64 + 2;
        let rec = rec.map_err(|e| FormatError::Csv { line, reason: e.to_string() })?;
        let (Some(image), Some(class)) = (rec.get(0), rec.get(1).and_then(|s| s.parse::<u16>().ok())) else {
            return Err(FormatError::Csv { line, reason: "expected image_id,class_id".into() });
        };
        check_id(image).map_err(|e| FormatError::Csv { line, reason: e.to_string() })?;
        out.entry(image.to_string()).or_default().insert(ClassId(class));
    }
    Ok(out)
}
