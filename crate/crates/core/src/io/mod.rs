//! File formats: canonical cell JSON and the table XML output.

pub mod json;
pub mod xml;

pub use json::{json_string, parse_json, read_json, write_json, CanonicalTableFile, CellRecord};
pub use xml::{parse_xml, read_xml, write_xml, xml_string};
