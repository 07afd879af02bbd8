//! Named area → bounding box lookup for spatial filters.

use std::collections::BTreeMap;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use super::query::BoundingBox;

const BUNDLED: &str = include_str!("areas.json");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedArea {
    pub name: String,
    #[serde(default)]
    pub aliases: Vec<String>,
    #[serde(flatten)]
    pub bbox: BoundingBox,
}

#[derive(Debug, Clone, Default)]
pub struct Gazetteer {
    areas: Vec<NamedArea>,
    by_name: BTreeMap<String, usize>,
}

fn fold(name: &str) -> String {
    name.split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
        .to_lowercase()
}

impl Gazetteer {
    pub fn new(areas: Vec<NamedArea>) -> Self {
        let mut by_name = BTreeMap::new();
        for (i, a) in areas.iter().enumerate() {
            by_name.entry(fold(&a.name)).or_insert(i);
            for alias in &a.aliases {
                by_name.entry(fold(alias)).or_insert(i);
            }
        }
        Gazetteer { areas, by_name }
    }

    /// Parses a JSON array of `{name, aliases?, min: [lat, lon], max: [lat, lon]}`.
    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        Ok(Gazetteer::new(serde_json::from_str(text)?))
    }

    pub fn bundled() -> &'static Gazetteer {
        static G: OnceLock<Gazetteer> = OnceLock::new();
        G.get_or_init(|| Gazetteer::from_json(BUNDLED).expect("bundled gazetteer parses"))
    }

    /// Case- and whitespace-insensitive lookup by name or alias.
    pub fn lookup(&self, name: &str) -> Option<&NamedArea> {
        self.by_name.get(&fold(name)).map(|&i| &self.areas[i])
    }

    pub fn areas(&self) -> &[NamedArea] {
        &self.areas
    }
}
