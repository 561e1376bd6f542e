//! Manifest CSV: header `id,path,label,source,fold`.
//!
//! `label` is `pneumothorax`, `normal` (no finding) or `negative` (any other
//! non-pneumothorax image). `fold` is empty when unassigned.

use std::fs;
use std::path::Path;

use autothorax_core::data::{DatasetManifest, DatasetMode, Finding, ImageRecord, Source, MAX_FOLDS};

use crate::error::{Error, Result};

pub const MANIFEST_HEADER: [&str; 5] = ["id", "path", "label", "source", "fold"];

/// Parse manifest text. The result admits every finding; narrow it with
/// [`DatasetManifest::with_mode`].
pub fn parse_manifest(text: &str) -> Result<DatasetManifest> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .from_reader(text.as_bytes());
    let header = reader.headers().map_err(|e| csv_error(1, e))?;
    if header.iter().ne(MANIFEST_HEADER) {
        return Err(Error::Manifest {
            line: 1,
            message: format!("expected header `{}`", MANIFEST_HEADER.join(",")),
        });
    }
    let mut records = Vec::new();
    for row in reader.records() {
        let row = row.map_err(|e| csv_error(e.position().map_or(0, |p| p.line()), e))?;
        let line = row.position().map_or(0, |p| p.line());
        let bad = |message: String| Error::Manifest { line, message };
        let id = &row[0];
        if id.is_empty() {
            return Err(bad("empty id".into()));
        }
        let finding = Finding::parse(&row[2]).ok_or_else(|| {
            bad(format!(
                "label `{}` is not one of pneumothorax, normal, negative",
                &row[2]
            ))
        })?;
        let source = Source::parse(&row[3]).ok_or_else(|| bad(format!("unknown source `{}`", &row[3])))?;
        let fold = match &row[4] {
            "" => None,
            f => {
                let v: usize = f.parse().map_err(|_| bad(format!("fold `{f}` is not an integer")))?;
                if v >= MAX_FOLDS {
                    return Err(bad(format!("fold {v} outside 0..={}", MAX_FOLDS - 1)));
                }
                Some(v as u8)
            }
        };
        let mut record = ImageRecord::new(id, &row[1], finding, source);
        record.fold = fold;
        records.push(record);
    }
    DatasetManifest::new(records, DatasetMode::FullyAutomated).map_err(|e| match e {
        autothorax_core::Error::DuplicateId(id) => {
            let line = text
                .lines()
                .enumerate()
                .skip(1)
                .filter(|(_, l)| l.split(',').next() == Some(id.as_str()))
                .nth(1)
                .map_or(0, |(i, _)| i as u64 + 1);
            Error::Manifest {
                line,
                message: format!("duplicate id `{id}`"),
            }
        }
        other => other.into(),
    })
}

fn csv_error(line: u64, e: csv::Error) -> Error {
    Error::Manifest {
        line,
        message: e.to_string(),
    }
}

pub fn load_manifest(path: &Path) -> Result<DatasetManifest> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_manifest(&text)
}

pub fn serialize_manifest(manifest: &DatasetManifest) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(MANIFEST_HEADER).expect("in-memory write");
    for r in manifest.records() {
        let fold = r.fold.map(|f| f.to_string()).unwrap_or_default();
        w.write_record([r.id.as_str(), &r.path, r.finding.as_str(), r.source.as_str(), &fold])
            .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 fields")
}

pub fn write_manifest(manifest: &DatasetManifest, path: &Path) -> Result<()> {
    crate::write_file(path, serialize_manifest(manifest).as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;

    const SMALL: &str = "id,path,label,source,fold\n\
        a,img/a.png,pneumothorax,MIMIC_CXR,\n\
        b,img/b.png,pneumothorax,CHEXPERT,3\n\
        c,img/c.png,normal,CHESTXRAY14,\n";

    #[test]
    fn tally() {
        let m = parse_manifest(SMALL).unwrap();
        assert_eq!(m.counts().total.positive, 2);
        assert_eq!(m.counts().total.negative, 1);
        assert_eq!(m.get("b").unwrap().fold, Some(3));
    }

    #[test]
    fn idempotent() {
        let text = serialize_manifest(&parse_manifest(SMALL).unwrap());
        assert_eq!(text, SMALL);
        let quoted = "id,path,label,source,fold\n\"x,1\",\"a \"\"b\"\".png\",negative,SYNTHETIC,0\n";
        let once = serialize_manifest(&parse_manifest(quoted).unwrap());
        assert_eq!(serialize_manifest(&parse_manifest(&once).unwrap()), once);
    }

    #[test]
    fn line_numbers() {
        let bad_fold = "id,path,label,source,fold\na,p,normal,SYNTHETIC,1\nb,p,normal,SYNTHETIC,12\n";
        match parse_manifest(bad_fold) {
            Err(Error::Manifest { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
        let bad_label = "id,path,label,source,fold\na,p,sick,SYNTHETIC,\n";
        assert!(matches!(parse_manifest(bad_label), Err(Error::Manifest { line: 2, .. })));
        let dup = "id,path,label,source,fold\na,p,normal,SYNTHETIC,\na,q,normal,SYNTHETIC,\n";
        assert!(matches!(parse_manifest(dup), Err(Error::Manifest { line: 3, .. })));
        let short = "id,path,label,source,fold\na,p,normal\n";
        assert!(matches!(parse_manifest(short), Err(Error::Manifest { .. })));
        assert!(parse_manifest("id,label\n").is_err());
    }
}
