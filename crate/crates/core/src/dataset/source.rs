//! Generator input format: concepts, then one `<sep>`-prefixed segment per
//! prototype.

use crate::corpus::ConceptSet;
use crate::error::{Error, Result};

pub const DELIMITER: &str = "<sep>";
const JOINER: &str = " <sep> ";

fn check_segment(text: &str) -> Result<()> {
    if text.is_empty() || text.contains(DELIMITER) || text.trim() != text {
        return Err(Error::Delimiter(text.to_string()));
    }
    Ok(())
}

/// `"c1 c2 ... <sep> proto1 <sep> proto2"`; no trailing delimiter.
pub fn serialize_source<S: AsRef<str>>(concepts: &ConceptSet, prototypes: &[S]) -> Result<String> {
    for c in concepts.iter() {
        check_segment(c)?;
    }
    let mut out = concepts.concepts().join(" ");
    for p in prototypes {
        let p = p.as_ref();
        check_segment(p)?;
        out.push_str(JOINER);
        out.push_str(p);
    }
    Ok(out)
}

/// Inverse of [`serialize_source`]: concept lemmas and prototype texts.
pub fn parse_source(source: &str) -> Result<(Vec<String>, Vec<String>)> {
    let mut parts = source.split(JOINER);
    let head = parts.next().unwrap_or_default();
    let concepts: Vec<String> = head.split(' ').map(str::to_string).collect();
    if head.is_empty()
        || concepts
            .iter()
            .any(|c| c.is_empty() || c.contains(DELIMITER))
    {
        return Err(Error::Delimiter(source.to_string()));
    }
    let prototypes: Vec<String> = parts.map(str::to_string).collect();
    for p in &prototypes {
        check_segment(p)?;
    }
    Ok((concepts, prototypes))
}
