//! The plate manifest: `plate,well,class,bf_path,gfp_path`.

use std::collections::HashSet;
use std::path::Path;

use cellquad_core::PlateRecord;

use crate::error::{Error, Result};

pub const HEADER: [&str; 5] = ["plate", "well", "class", "bf_path", "gfp_path"];

/// Parses manifest text. Row numbers in errors count the header as row 1.
pub fn parse_manifest(text: &str) -> Result<Vec<PlateRecord>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(text.as_bytes());
    let header = rdr
        .headers()
        .map_err(|e| Error::Data(format!("manifest header: {e}")))?
        .clone();
    let got: Vec<&str> = header.iter().collect();
    if got.len() < HEADER.len() || got[..HEADER.len()] != HEADER {
        let missing: Vec<&str> = HEADER.iter().copied().filter(|h| !got.contains(h)).collect();
        return Err(Error::Data(format!(
            "manifest header must be `{}`; missing or misplaced columns: {}",
            HEADER.join(","),
            if missing.is_empty() { "(order)".to_string() } else { missing.join(", ") }
        )));
    }
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for (i, row) in rdr.records().enumerate() {
        let row_no = i + 2;
        let row = row.map_err(|e| Error::Data(format!("manifest row {row_no}: {e}")))?;
        if row.iter().all(str::is_empty) {
            continue;
        }
        if row.len() < HEADER.len() {
            return Err(Error::Data(format!(
                "manifest row {row_no}: expected {} columns, found {}",
                HEADER.len(),
                row.len()
            )));
        }
        let plate: u32 = row[0]
            .parse()
            .map_err(|_| Error::Data(format!("manifest row {row_no}: plate {:?} is not an integer", &row[0])))?;
        let rec = PlateRecord::new(plate, &row[1], &row[2], &row[3], &row[4])
            .map_err(|e| Error::Data(format!("manifest row {row_no}: {e}")))?;
        if !seen.insert((rec.plate_id, rec.well.clone())) {
            return Err(Error::Data(format!(
                "manifest row {row_no}: duplicate plate {} well {}",
                rec.plate_id, rec.well
            )));
        }
        out.push(rec);
    }
    Ok(out)
}

pub fn load_manifest(path: &Path) -> Result<Vec<PlateRecord>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_manifest(&text).map_err(|e| match e {
        Error::Data(m) => Error::Data(format!("{}: {m}", path.display())),
        other => other,
    })
}

pub fn manifest_text(records: &[PlateRecord]) -> Result<String> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    w.write_record(HEADER).map_err(|e| Error::Data(e.to_string()))?;
    for r in records {
        w.write_record([&r.plate_id.to_string(), &r.well, &r.class_label, &r.bf_path, &r.gfp_path])
            .map_err(|e| Error::Data(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Data(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output of UTF-8 input"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_plate_row() {
        let recs = parse_manifest("plate,well,class,bf_path,gfp_path\n15,J9,Mitochondria,bf.tif,gfp.tif\n").unwrap();
        assert_eq!(recs, vec![PlateRecord::new(15, "J9", "Mitochondria", "bf.tif", "gfp.tif").unwrap()]);
    }

    #[test]
    fn header_only_is_empty() {
        assert!(parse_manifest("plate,well,class,bf_path,gfp_path\n").unwrap().is_empty());
    }

    #[test]
    fn duplicate_well_names_row() {
        let text = "plate,well,class,bf_path,gfp_path\n3,P24,ER,a,b\n3,P24,ER,c,d\n";
        let err = parse_manifest(text).unwrap_err().to_string();
        assert!(err.contains("row 3") && err.contains("duplicate"), "{err}");
    }

    #[test]
    fn missing_column() {
        let err = parse_manifest("plate,well,class,bf_path\n1,A1,ER,a\n").unwrap_err().to_string();
        assert!(err.contains("gfp_path"), "{err}");
        let err = parse_manifest("plate,well,class,bf_path,gfp_path\n1,A1,ER,a\n").unwrap_err().to_string();
        assert!(err.contains("row 2"), "{err}");
    }

    #[test]
    fn bad_plate_number() {
        let err = parse_manifest("plate,well,class,bf_path,gfp_path\nx,A1,ER,a,b\n").unwrap_err();
        assert!(err.to_string().contains("row 2"));
        assert_eq!(err.exit_code(), 3);
    }

    #[test]
    fn round_trip() {
        let recs = vec![
            PlateRecord::new(1, "A1", "ER", "bf/a.png", "gfp/a.png").unwrap(),
            PlateRecord::new(2, "B12", "Cytosol", "bf/b.png", "gfp/b.png").unwrap(),
        ];
        assert_eq!(parse_manifest(&manifest_text(&recs).unwrap()).unwrap(), recs);
    }
}
