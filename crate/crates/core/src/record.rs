use alloc::string::String;

use crate::error::{Error, Result};
use crate::geom::WellKey;

/// One well of one plate: the unit of cross-validation splitting.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PlateRecord {
    pub plate_id: u32,
    pub well: String,
    pub class_label: String,
    pub bf_path: String,
    pub gfp_path: String,
}

impl PlateRecord {
    pub fn new(
        plate_id: u32,
        well: impl Into<String>,
        class_label: impl Into<String>,
        bf_path: impl Into<String>,
        gfp_path: impl Into<String>,
    ) -> Result<Self> {
        let rec = Self {
            plate_id,
            well: well.into(),
            class_label: class_label.into(),
            bf_path: bf_path.into(),
            gfp_path: gfp_path.into(),
        };
        rec.validate()?;
        Ok(rec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.plate_id == 0 {
            return Err(Error::InvalidConfig("plate id must be >= 1".into()));
        }
        if !is_well_name(&self.well) {
            return Err(Error::InvalidConfig(alloc::format!(
                "well {:?} is not a row-letter/column-number position",
                self.well
            )));
        }
        if self.class_label.trim().is_empty() {
            return Err(Error::InvalidConfig("class label is empty".into()));
        }
        if self.bf_path.is_empty() || self.gfp_path.is_empty() {
            return Err(Error::InvalidConfig("channel path is empty".into()));
        }
        Ok(())
    }

    pub fn key(&self) -> WellKey {
        WellKey::new(self.plate_id, self.well.clone())
    }
}

/// Plate positions look like `J9` or `P24`: letters followed by digits.
pub fn is_well_name(s: &str) -> bool {
    let letters = s.chars().take_while(char::is_ascii_alphabetic).count();
    let rest = &s[letters..];
    letters > 0 && !rest.is_empty() && rest.chars().all(|c| c.is_ascii_digit())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn well_names() {
        assert!(is_well_name("J9"));
        assert!(is_well_name("P24"));
        assert!(is_well_name("AA1"));
        assert!(!is_well_name("9J"));
        assert!(!is_well_name("J"));
        assert!(!is_well_name(""));
        assert!(!is_well_name("J9a"));
    }

    #[test]
    fn record_validation() {
        assert!(PlateRecord::new(15, "J9", "Mitochondria", "bf.tif", "gfp.tif").is_ok());
        assert!(PlateRecord::new(0, "J9", "M", "a", "b").is_err());
        assert!(PlateRecord::new(1, "J9", " ", "a", "b").is_err());
        assert!(PlateRecord::new(1, "J9", "M", "", "b").is_err());
    }
}
