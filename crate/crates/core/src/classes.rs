use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Ordered class names. A class id is the zero-based position in this list,
/// in label files and in every matrix.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ClassSet {
    names: Vec<String>,
}

impl ClassSet {
    pub fn new<I, S>(names: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let names: Vec<String> = names.into_iter().map(Into::into).collect();
        if names.is_empty() {
            return Err(Error::EmptyClassSet);
        }
        for (i, name) in names.iter().enumerate() {
            if name.trim().is_empty() || name.trim() != name || name.contains(['\n', '\r', ',']) {
                return Err(Error::InvalidClassName(name.clone()));
            }
            if names[..i].contains(name) {
                return Err(Error::DuplicateClass(name.clone()));
            }
        }
        Ok(Self { names })
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn name(&self, id: usize) -> Option<&str> {
        self.names.get(id).map(String::as_str)
    }

    pub fn id_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn check_id(&self, class_id: usize) -> Result<()> {
        if class_id < self.len() {
            Ok(())
        } else {
            Err(Error::ClassOutOfRange {
                class_id,
                class_count: self.len(),
            })
        }
    }

    /// Darknet names-file body: one class per line, LF terminated.
    pub fn to_names_text(&self) -> String {
        let mut out = String::new();
        for n in &self.names {
            out.push_str(n);
            out.push('\n');
        }
        out
    }

    /// Parses a names file. Blank lines are skipped.
    pub fn from_names_text(text: &str) -> Result<Self> {
        Self::new(
            text.lines()
                .map(str::trim)
                .filter(|l| !l.is_empty())
                .map(ToString::to_string),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn rejects_bad_sets() {
        assert_eq!(ClassSet::new(Vec::<String>::new()), Err(Error::EmptyClassSet));
        assert!(matches!(ClassSet::new(["ER", "M", "ER"]), Err(Error::DuplicateClass(_))));
        assert!(matches!(ClassSet::new(["ER", ""]), Err(Error::InvalidClassName(_))));
    }

    #[test]
    fn ids_follow_order() {
        let c = ClassSet::new(["ER", "Mitochondria", "Cytosol", "Nucleus"]).unwrap();
        assert_eq!(c.id_of("Cytosol"), Some(2));
        assert_eq!(c.name(3), Some("Nucleus"));
        assert!(c.check_id(4).is_err());
    }

    proptest! {
        #[test]
        fn names_file_preserves_ids(names in proptest::collection::btree_set("[A-Za-z][A-Za-z &]{0,12}[A-Za-z]", 1..8)) {
            let set = ClassSet::new(names.iter().cloned().rev()).unwrap();
            let back = ClassSet::from_names_text(&set.to_names_text()).unwrap();
            prop_assert_eq!(&back, &set);
            for (i, n) in set.names().iter().enumerate() {
                prop_assert_eq!(back.id_of(n), Some(i));
            }
        }
    }
}
