//! Serde-friendly map descriptors: the JSON interface through which the CLI
//! (and any external driver) constructs map families.

use serde::{Deserialize, Serialize};

use crate::error::MapError;
use crate::map::TorusMap;
use crate::maps::{Bump1d, DoublingFamilyMap, LinearToralMap, PerturbedExampleMap, PerturbedExampleParams};

/// A buildable map family. JSON shape:
///
/// ```json
/// {"family": "doubling", "multiplier": 2}
/// {"family": "doubling", "multiplier": 2,
///  "perturbation": {"site": 0.5, "radius": 0.2, "strength": -1.2}}
/// {"family": "linear", "matrix": [[2, 0], [0, 2]]}
/// {"family": "perturbed-example", "params": { ... }}
/// ```
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum MapDescriptor {
    Doubling {
        multiplier: i64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        perturbation: Option<Bump1d>,
    },
    Linear {
        matrix: Vec<Vec<i64>>,
        /// Require all eigenvalue moduli above 1 (on by default).
        #[serde(default = "default_true")]
        expanding: bool,
    },
    PerturbedExample {
        params: PerturbedExampleParams,
    },
}

fn default_true() -> bool {
    true
}

impl MapDescriptor {
    pub fn build(&self) -> Result<Box<dyn TorusMap>, MapError> {
        match self {
            MapDescriptor::Doubling {
                multiplier,
                perturbation,
            } => Ok(Box::new(DoublingFamilyMap::new(*multiplier, *perturbation)?)),
            MapDescriptor::Linear { matrix, expanding } => {
                let map = if *expanding {
                    LinearToralMap::expanding(matrix.clone())?
                } else {
                    LinearToralMap::new(matrix.clone())?
                };
                Ok(Box::new(map))
            }
            MapDescriptor::PerturbedExample { params } => {
                Ok(Box::new(PerturbedExampleMap::build(params.clone())?))
            }
        }
    }

    /// The shipped reference example on `T^2`.
    pub fn reference_perturbed() -> Self {
        MapDescriptor::PerturbedExample {
            params: PerturbedExampleParams::reference(),
        }
    }
}
