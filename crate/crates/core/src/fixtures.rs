//! Assets shipped with the crate: the CDM-subset schema, the clause target
//! registry, the MTA worked example, the reference score tables and the
//! default prompt file.

use serde_json::Value;

use crate::schema::{parse_schema, SchemaGraph};

pub const CDM_SCHEMA: &str = include_str!("../assets/cdm_subset.schema.json");
pub const TARGETS: &str = include_str!("../assets/targets.json");
pub const REFERENCE_SCORES: &str = include_str!("../assets/reference_scores.v1.json");
pub const PROMPTS: &str = include_str!("../assets/prompts.v1.toml");
pub const MTA_EXAMPLE_JSON: &str = include_str!("../assets/mta_example.json");
pub const MTA_EXCERPT: &str = include_str!("../assets/mta_excerpt.txt");

pub fn cdm_schema() -> SchemaGraph {
    parse_schema(CDM_SCHEMA).expect("bundled schema parses")
}

/// Ground-truth CDM JSON for the MTA excerpt.
pub fn mta_example() -> Value {
    serde_json::from_str(MTA_EXAMPLE_JSON).expect("bundled example parses")
}
