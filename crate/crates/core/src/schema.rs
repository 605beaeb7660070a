//! Closed entity and relation vocabularies used by the extraction prompt,
//! plus the [`Triple`] record they govern.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SchemaError {
    #[error("unknown entity type `{0}`")]
    UnknownEntityType(String),
    #[error("unknown relation type `{0}`")]
    UnknownRelationType(String),
    #[error("triple {field} is empty")]
    EmptyField { field: &'static str },
}

macro_rules! vocabulary {
    (
        $(#[$meta:meta])*
        $name:ident, $err:ident {
            $($variant:ident => ($label:literal, $uri:literal, $comment:literal),)+
        }
    ) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
        #[serde(try_from = "String", into = "&'static str")]
        pub enum $name {
            $($variant,)+
        }

        impl $name {
            /// Every member, in prompt order.
            pub const ALL: &'static [$name] = &[$($name::$variant,)+];

            pub fn name(self) -> &'static str {
                match self {
                    $($name::$variant => $label,)+
                }
            }

            /// Identifier exactly as listed in the extraction prompt.
            pub fn uri(self) -> &'static str {
                match self {
                    $($name::$variant => $uri,)+
                }
            }

            /// Trailing `#` comment from the prompt listing.
            pub fn comment(self) -> &'static str {
                match self {
                    $($name::$variant => $comment,)+
                }
            }
        }

        impl FromStr for $name {
            type Err = SchemaError;

            fn from_str(s: &str) -> Result<Self, Self::Err> {
                match s {
                    $($label => Ok($name::$variant),)+
                    other => Err(SchemaError::$err(other.to_string())),
                }
            }
        }

        impl TryFrom<String> for $name {
            type Error = SchemaError;

            fn try_from(s: String) -> Result<Self, Self::Error> {
                s.parse()
            }
        }

        impl From<$name> for &'static str {
            fn from(v: $name) -> Self {
                v.name()
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.name())
            }
        }
    };
}

vocabulary! {
    /// Entity types an extractor may assign to a head or tail.
    EntityType, UnknownEntityType {
        Instrument => ("instrument", "https://www.wikidata.org/wiki/Q751997", "astronomical instrument"),
        Telescope => ("telescope", "https://www.wikidata.org/wiki/Q148578", "space telescope"),
        Mission => ("mission", "https://www.wikidata.org/wiki/Q2133344", "space mission"),
        CelestialObject => ("celestialObject", "https://www.wikidata.org/wiki/Q6999", "astronomical object"),
        CelestialRegion => ("celestialRegion", "https://www.wikidata.org/wiki/Q203218", "spherical coordinate system"),
        CelestialObjectRegion => ("celestialObjectRegion", "https://www.wikidata.org/wiki/Q12134", "celestial sphere"),
        PlanetaryNomenclature => ("planetaryNomenclature", "https://www.wikidata.org/wiki/Q1463003", "planetary nomenclature: system of uniquely identifying features on the surface of a planet or natural satellite"),
        Spacecraft => ("spacecraft", "https://www.wikidata.org/wiki/Q40218", "spacecraft"),
        Measure => ("measure", "https://www.wikidata.org/wiki/Q39875001", "measure: standard against which something can be judged"),
        Period => ("period", "https://www.wikidata.org/wiki/Q392928", "period: subdivision of geological time; shorter than an era and longer than an epoch"),
        Coordinate => ("coordinate", "https://www.wikidata.org/wiki/Q3250736", "coordinate: number which characterizes position"),
        Research => ("research", "https://www.wikidata.org/wiki/Q42240", "research: systematic study undertaken to increase knowledge"),
        Data => ("data", "https://www.wikidata.org/wiki/Q42848", "data: information arranged for automatic processing"),
    }
}

vocabulary! {
    /// Relation types linking a head to a tail.
    RelationType, UnknownRelationType {
        Discovery => ("discovery", "https://www.wikidata.org/wiki/Q12772819", "discovery"),
        Studies => ("studies", "http://www.wikidata.org/prop/direct/P2579", "studied in"),
        MeasuredAs => ("measuredAs", "http://www.wikidata.org/prop/direct/P111", "measured physical quantity"),
        HasChild => ("hasChild", "http://www.wikidata.org/prop/direct/P40", "child"),
        DescribedBy => ("describedBy", "http://www.wikidata.org/prop/direct/P1343", "described by source"),
        LocatedIn => ("locatedIn", "http://www.wikidata.org/prop/direct/P276", "location"),
        HasUse => ("hasUse", "http://www.wikidata.org/prop/direct/P366", "use"),
        OrbitalInclination => ("orbitalInclination", "http://www.wikidata.org/prop/direct/P2045", "orbital inclination"),
        HasCoordinates => ("hasCoordinates", "http://www.wikidata.org/prop/direct/P625", "coordinate location"),
        StatedIn => ("statedIn", "https://www.wikidata.org/wiki/Property:P248", "to be used in the references field to refer to the information document or database in which a claim is made"),
        Creator => ("creator", "https://www.wikidata.org/wiki/Property:P170", "creator"),
        // "corrolates" is the original spelling; kept verbatim.
        HasCause => ("hasCause", "https://www.wikidata.org/wiki/Property:P828", "corrolates"),
    }
}

pub fn parse_entity_type(s: &str) -> Result<EntityType, SchemaError> {
    s.parse()
}

pub fn parse_relation_type(s: &str) -> Result<RelationType, SchemaError> {
    s.parse()
}

/// One extracted `(head, head_type, relation, tail, tail_type)` record tied
/// to the excerpt it came from.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Triple {
    pub head: String,
    pub head_type: EntityType,
    pub relation: RelationType,
    pub tail: String,
    pub tail_type: EntityType,
    pub excerpt_id: String,
}

impl Triple {
    pub fn new(
        head: impl Into<String>,
        head_type: EntityType,
        relation: RelationType,
        tail: impl Into<String>,
        tail_type: EntityType,
        excerpt_id: impl Into<String>,
    ) -> Result<Self, SchemaError> {
        let triple = Triple {
            head: head.into(),
            head_type,
            relation,
            tail: tail.into(),
            tail_type,
            excerpt_id: excerpt_id.into(),
        };
        triple.validate()?;
        Ok(triple)
    }

    pub fn validate(&self) -> Result<(), SchemaError> {
        if self.head.trim().is_empty() {
            return Err(SchemaError::EmptyField { field: "head" });
        }
        if self.tail.trim().is_empty() {
            return Err(SchemaError::EmptyField { field: "tail" });
        }
        Ok(())
    }
}

/// JSON dump of both vocabularies as ordered `name -> uri` objects.
pub fn vocabulary_json() -> serde_json::Value {
    let entities: serde_json::Map<String, serde_json::Value> = EntityType::ALL
        .iter()
        .map(|t| (t.name().to_string(), t.uri().into()))
        .collect();
    let relations: serde_json::Map<String, serde_json::Value> = RelationType::ALL
        .iter()
        .map(|t| (t.name().to_string(), t.uri().into()))
        .collect();
    serde_json::json!({
        "entity_types": entities,
        "relation_types": relations,
    })
}
